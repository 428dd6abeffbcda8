"""Measured transmission traces and the two-parameter line-shape fit.

The model absorbance is linear in the atom number n0, so for a trial
frequency offset the best n0 follows in closed form; only the offset needs a
one-dimensional search.  Convention: the data are modelled as

    A_data(delta) = (n0 / n0_model) * A_model(delta - offset)

so a positive offset moves the fitted line to higher detunings.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, GridError, NoConvergence, ParseError, RangeError
from .spectroscopy import Spectrum
from .trajectory_mc import CloudSpec

DEFAULT_WINDOW = 5e6
SCAN_POINTS = 201
COLUMNS = ("detuning_hz", "transmission")


@dataclass
class MeasuredTrace:
    detunings: np.ndarray
    transmission: np.ndarray
    _absorbance: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.transmission = np.asarray(self.transmission, dtype=float)
        if self.detunings.ndim != 1 or self.detunings.shape != self.transmission.shape:
            raise GridError("detunings and transmission must be 1-D arrays of equal length")
        if self.detunings.size < 3:
            raise GridError("a trace needs at least three points")
        if not np.all(np.isfinite(self.detunings)):
            raise GridError("detunings must be finite")
        if np.any(np.diff(self.detunings) <= 0):
            raise GridError("detunings must be strictly increasing")
        t = self.transmission
        if not np.all((t > 0) & (t <= 1)):
            raise RangeError("transmission must lie in (0, 1]")

    @classmethod
    def from_absorbance(cls, detunings, absorbance) -> "MeasuredTrace":
        a = np.asarray(absorbance, dtype=float)
        if np.any(a < 0):
            raise RangeError("absorbance must be non-negative")
        tr = cls(detunings, np.exp(-a))
        tr._absorbance = a.copy()
        return tr

    @property
    def absorbance(self) -> np.ndarray:
        """A = -ln T."""
        if self._absorbance is None:
            self._absorbance = -np.log(self.transmission)
        return self._absorbance


def load_trace(path, format: str = "csv") -> MeasuredTrace:
    if format != "csv":
        raise ParseError(f"unsupported trace format {format!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    try:
        cols = [header.index(name) for name in COLUMNS]
    except ValueError:
        raise ParseError(f"{path}: header must contain {', '.join(COLUMNS)}") from None
    det, tr = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            d, t = (float(row[c]) for c in cols)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric field") from None
        if not (math.isfinite(d) and math.isfinite(t)):
            raise ParseError(f"{path}:{lineno}: non-finite value")
        det.append(d)
        tr.append(t)
    return MeasuredTrace(np.array(det), np.array(tr))


def save_trace(trace: MeasuredTrace, path) -> None:
    # repr() is the shortest string that round-trips a double exactly
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for d, t in zip(trace.detunings.tolist(), trace.transmission.tolist()):
            w.writerow((repr(d), repr(t)))


@dataclass(frozen=True)
class FitResult:
    n0: float
    offset: float
    residual_rms: float
    covariance: np.ndarray
    peak_density: Optional[float] = None

    @property
    def n0_stderr(self) -> float:
        return float(np.sqrt(self.covariance[0, 0]))

    @property
    def offset_stderr(self) -> float:
        return float(np.sqrt(self.covariance[1, 1]))

    def to_json(self) -> dict:
        return {
            "n0": self.n0,
            "offset_hz": float(self.offset),
            "residual_rms": self.residual_rms,
            "peak_density_per_cm3": None if self.peak_density is None else self.peak_density * 1e-6,
            "n0_stderr": self.n0_stderr,
            "offset_stderr_hz": self.offset_stderr,
        }


def peak_density(cloud: CloudSpec) -> float:
    """Central density n0 / (sigma^3 (2 pi)^(3/2)) in atoms/m^3."""
    return cloud.n0 / (cloud.sigma ** 3 * (2 * np.pi) ** 1.5)


def n0_for_peak_density(density: float, sigma: float) -> float:
    return density * sigma ** 3 * (2 * np.pi) ** 1.5


def _shifted(model: Spectrum, detunings, offset):
    return np.interp(detunings - offset, model.detunings, model.absorbance)


def _shifted_slope(model: Spectrum, detunings, offset):
    x = detunings - offset
    slopes = np.diff(model.absorbance) / np.diff(model.detunings)
    k = np.clip(np.searchsorted(model.detunings, x, side="right") - 1, 0, slopes.size - 1)
    return slopes[k]


def fit_objective(detunings, absorbance, model: Spectrum, offset: float):
    """Residual sum of squares at the optimal scale, and that scale.

    Only sums over points, so the value does not depend on row order.
    """
    m = _shifted(model, np.asarray(detunings, dtype=float), offset)
    d = np.asarray(absorbance, dtype=float)
    mm = float(np.dot(m, m))
    if mm == 0:
        return float(np.dot(d, d)), 0.0
    c = max(float(np.dot(m, d)) / mm, 0.0)
    r = d - c * m
    return float(np.dot(r, r)), c


def fit_spectrum(trace: MeasuredTrace, model: Spectrum, window: float = DEFAULT_WINDOW,
                 cloud: Optional[CloudSpec] = None) -> FitResult:
    """Fit n0 and a frequency offset of ``model`` to a measured trace.

    ``model`` may be computed at any positive n0.  Its grid must cover the
    trace grid widened by ``window`` on both sides.  A coarse scan picks the
    best candidate (ties go to the smaller |offset|), golden-section search
    refines it inside the neighbouring candidates and a few Gauss-Newton
    steps on (scale, offset) polish the result.
    """
    if not model.n0 > 0:
        raise DomainError("model spectrum must be computed at positive n0")
    if not window > 0:
        raise DomainError("offset window must be positive")
    x, d = trace.detunings, trace.absorbance
    if model.detunings[0] > x[0] - window or model.detunings[-1] < x[-1] + window:
        raise DomainError("model grid must cover the trace grid plus the offset window")

    def rss(o):
        return fit_objective(x, d, model, o)[0]

    grid = np.linspace(-window, window, SCAN_POINTS)
    order = np.argsort(np.abs(grid), kind="stable")
    values = np.array([rss(o) for o in grid[order]])
    k = int(order[int(np.argmin(values))])
    if k == 0 or k == grid.size - 1:
        raise NoConvergence("offset search window brackets no interior minimum")
    lo, mid, hi = grid[k - 1], grid[k], grid[k + 1]
    res = minimize_scalar(lambda u: rss(u * window), bracket=(lo / window, mid / window, hi / window),
                          method="golden", tol=1e-12)
    best = float(res.x * window) if res.fun <= rss(mid) else float(mid)

    c = fit_objective(x, d, model, best)[1]
    cur = rss(best)
    for _ in range(20):
        m = _shifted(model, x, best)
        jac = np.column_stack([m, -c * _shifted_slope(model, x, best)])
        r = d - c * m
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        c_new, o_new = c + step[0], best + step[1]
        trial = d - c_new * _shifted(model, x, o_new)
        val = float(np.dot(trial, trial))
        if not val < cur or abs(o_new) > window:
            break
        c, best, cur = c_new, o_new, val
    if abs(best) >= window:
        raise NoConvergence("offset converged onto the window edge")

    m = _shifted(model, x, best)
    jac = np.column_stack([m, -c * _shifted_slope(model, x, best)])
    dof = max(x.size - 2, 1)
    try:
        cov = (cur / dof) * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.inf)
    scale = np.array([model.n0, 1.0])
    cov = cov * np.outer(scale, scale)
    n0 = float(c * model.n0)
    dens = None
    if cloud is not None:
        dens = peak_density(CloudSpec(n0=n0, sigma=cloud.sigma, temperature=cloud.temperature))
    return FitResult(n0=n0, offset=float(best), residual_rms=math.sqrt(cur / x.size),
                     covariance=cov, peak_density=dens)
