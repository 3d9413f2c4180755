"""Deterministic Hoelder test data and an empirical exponent estimator.

The workhorse is a cosine Weierstrass series with integer frequency ratio,
so the self-similarity scales line up with the dyadic grid: amplitude ratio
``a`` and frequency ratio ``b`` give exponent alpha = ln(1/a)/ln(b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cubical import DyadicGrid
from .errors import ValidationError
from .forms import SampledForm

LIP_SAFETY = 1.1


@dataclass(frozen=True)
class WeierstrassSpec:
    """Parameters of a Weierstrass-type cosine series.

    ``phases`` holds one offset per (term, axis); the default of zeros keeps
    the series aligned with the dyadic grid.  ``terms`` must make the series
    tail smaller than step**alpha on the target grid, which
    ``validate_for_grid`` checks.
    """

    amplitude: float
    frequency: int
    terms: int
    phases: tuple = ()

    def __post_init__(self):
        if not 0 < self.amplitude < 1:
            raise ValidationError(f"amplitude ratio must be in (0,1), got {self.amplitude}")
        if self.frequency < 2 or int(self.frequency) != self.frequency:
            raise ValidationError(f"frequency ratio must be an integer >= 2")
        if self.terms < 1:
            raise ValidationError("need at least one term")

    @property
    def alpha(self) -> float:
        return min(1.0, math.log(1.0 / self.amplitude) / math.log(self.frequency))

    def tail(self) -> float:
        return self.amplitude**self.terms / (1.0 - self.amplitude)

    def validate_for_grid(self, grid: DyadicGrid):
        h = float(grid.step)
        if self.tail() >= h**self.alpha:
            raise ValidationError(
                f"truncation tail {self.tail():.3g} too large for grid step {h}; "
                "increase the term count"
            )

    def phase(self, k: int, axis: int) -> float:
        if not self.phases:
            return 0.0
        flat = k * 37 + axis
        return float(self.phases[flat % len(self.phases)])

    def __call__(self, *coords):
        """Evaluate on broadcastable coordinate arrays (one per axis)."""
        total = 0.0
        d = len(coords)
        for k in range(self.terms):
            amp = self.amplitude**k / d
            freq = math.pi * self.frequency**k
            for axis, x in enumerate(coords):
                total = total + amp * np.cos(freq * np.asarray(x, dtype=float)
                                             + self.phase(k, axis))
        return total


def spec_for_alpha(alpha: float, frequency: int = 2, terms: int | None = None,
                   grid: DyadicGrid | None = None, phases=()) -> WeierstrassSpec:
    """Spec hitting a target exponent; term count sized for the grid."""
    if not 0 < alpha <= 1:
        raise ValidationError(f"alpha must lie in (0,1], got {alpha}")
    amplitude = float(frequency) ** (-alpha)
    if terms is None:
        terms = 24 if grid is None else grid.L + 16
    spec = WeierstrassSpec(amplitude, frequency, terms, tuple(phases))
    if grid is not None:
        spec.validate_for_grid(grid)
    return spec


def _pairwise_max_quotient(values: np.ndarray, pts: np.ndarray, alpha: float) -> float:
    """Exact max Hoelder quotient over all node pairs (blockwise)."""
    n = len(values)
    best = 0.0
    block = max(1, int(2**22 // max(n, 1)))
    for start in range(0, n, block):
        chunk = pts[start:start + block]
        dist = np.sqrt(((chunk[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
        np.fill_diagonal(dist[:, start:start + len(chunk)], np.inf)
        quot = np.abs(values[start:start + block, None] - values[None, :]) / dist**alpha
        best = max(best, float(np.nanmax(quot)))
    return best


def _axis_shift_max_quotient(arr: np.ndarray, h: float, alpha: float) -> float:
    """Max quotient over dyadic axis-aligned shifts (cheap surrogate)."""
    best = 0.0
    for axis in range(arr.ndim):
        n = arr.shape[axis]
        s = 1
        while s < n:
            a = np.take(arr, range(s, n), axis=axis)
            b = np.take(arr, range(0, n - s), axis=axis)
            diff = float(np.max(np.abs(a - b)))
            best = max(best, diff / (s * h) ** alpha)
            s *= 2
    return best


def weierstrass_sample(spec: WeierstrassSpec, grid: DyadicGrid,
                       exact_pairs_limit: int = 4096) -> SampledForm:
    """Deterministic sampled 0-form with (alpha, empirical lip) metadata.

    The recorded constant is the max Hoelder quotient over node pairs times a
    1.1 safety factor; above ``exact_pairs_limit`` nodes the all-pairs scan
    falls back to dyadic axis shifts.
    """
    spec.validate_for_grid(grid)
    h = float(grid.step)
    coords = [(grid.lo[i] + np.arange(n + 1)) * h for i, n in enumerate(grid.shape)]
    mesh = np.meshgrid(*coords, indexing="ij")
    values = spec(*mesh)
    alpha = spec.alpha
    if values.size <= exact_pairs_limit:
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        lip = _pairwise_max_quotient(values.ravel(), pts, alpha)
    else:
        lip = _axis_shift_max_quotient(values, h, alpha)
    return SampledForm(grid, 0, {(): values}, holder=(alpha, LIP_SAFETY * lip))


def holder_exponent_estimate(f: SampledForm) -> tuple[float, float]:
    """Log-log regression of sup |f(x) - f(y)| against dyadic separations.

    Returns (alpha_hat clamped to [0, 1.05], lip_hat).  A constant input is
    reported as (1, 0).
    """
    if f.m != 0:
        raise ValidationError("exponent estimation needs a 0-form")
    arr = f.node_values()
    h = float(f.grid.step)
    sups, dists = [], []
    s = 1
    while s < max(arr.shape):
        best = 0.0
        for axis in range(arr.ndim):
            n = arr.shape[axis]
            if s >= n:
                continue
            a = np.take(arr, range(s, n), axis=axis)
            b = np.take(arr, range(0, n - s), axis=axis)
            best = max(best, float(np.max(np.abs(a - b))))
        if best > 0:
            sups.append(best)
            dists.append(s * h)
        s *= 2
    if len(sups) == 0:
        return 1.0, 0.0
    if len(sups) < 4:
        raise ValidationError("need at least 4 dyadic scales for the regression")
    logd = np.log2(np.asarray(dists))
    logs = np.log2(np.asarray(sups))
    slope, intercept = np.polyfit(logd, logs, 1)
    alpha_hat = float(min(max(slope, 0.0), 1.05))
    lip_hat = float(2.0**intercept)
    return alpha_hat, lip_hat


def midpoint_displacement(grid: DyadicGrid, roughness: float, seed: int) -> SampledForm:
    """Seeded midpoint-displacement noise (1-D), non-normative.

    Optional rough-path stand-in behind an explicit seed; not used by any
    quantitative guarantee in the package.
    """
    if grid.d != 1:
        raise ValidationError("midpoint displacement generator is 1-D only")
    rng = np.random.default_rng(seed)
    n = grid.shape[0]
    levels = int(math.ceil(math.log2(max(n, 2))))
    size = 2**levels
    vals = np.zeros(size + 1)
    vals[0], vals[-1] = rng.normal(size=2)
    step = size
    amp = 1.0
    while step > 1:
        half = step // 2
        idx = np.arange(half, size, step)
        vals[idx] = 0.5 * (vals[idx - half] + vals[idx + half]) + amp * rng.normal(
            size=len(idx)
        )
        amp *= 2.0 ** (-roughness)
        step = half
    return SampledForm(grid, 0, {(): vals[: n + 1]})
