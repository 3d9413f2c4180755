"""Discrete mollification of chains and charges, and the dyadic scale ladder.

A mollifier is a scaled even bump with unit mass.  Acting on chains it is a
convex combination of lattice translates, so mass never grows and boundary
commutes exactly, term by term.  Acting on charges it produces a sampled
form: the component value at a point is the charge applied to a full
dimensional density current shaped like the bump around that point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cubical import (
    Cell,
    CubicalChain,
    DyadicGrid,
    increasing_tuples,
)
from .errors import (
    BoxOverflowError,
    ResolutionExhaustedError,
    ValidationError,
)
from .forms import SampledForm, component_shape, resample_to_axes

# Even nonnegative bumps supported in the closed unit ball, as polynomials in
# r**2 (rational evaluation stays exact).  poly3 is the default profile.
PROFILES = {
    "poly3": lambda r2: (1 - r2) ** 3,
    "poly2": lambda r2: (1 - r2) ** 2,
}


@dataclass(frozen=True)
class Mollifier:
    """Scaled even kernel: support radius epsilon, unit total weight."""

    epsilon: Fraction
    profile: str = "poly3"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValidationError(f"mollifier radius must be positive, got {self.epsilon}")
        if self.profile not in PROFILES:
            raise ValidationError(
                f"unknown profile {self.profile!r}; available: {sorted(PROFILES)}"
            )

    @classmethod
    def for_grid(cls, grid: DyadicGrid, eps, profile: str = "poly3") -> "Mollifier":
        """Snap ``eps`` to the nearest positive multiple of the grid step."""
        h = grid.step
        k = max(1, round(Fraction(eps) / h))
        return cls(k * h, profile)

    def steps(self, grid: DyadicGrid) -> int:
        """Support radius in lattice steps; must be integral for this grid."""
        k = self.epsilon / grid.step
        if k.denominator != 1:
            raise ValidationError(
                f"radius {self.epsilon} is not a lattice multiple of step {grid.step}"
            )
        return int(k)

    def profile_value(self, r2):
        if r2 >= 1:
            return 0 * r2
        return PROFILES[self.profile](r2)

    def lattice_weights(self, grid: DyadicGrid, exact: bool = False) -> dict:
        """Normalized weights on integer lattice offsets within the support.

        Exact mode keeps Fractions throughout, so evenness and unit sum hold
        identically, which the mass/boundary commutation tests rely on.
        """
        k = self.steps(grid)
        if k < 1:
            raise ResolutionExhaustedError(
                f"kernel radius {self.epsilon} below grid step {grid.step}"
            )
        k2 = Fraction(k * k)
        weights = {}
        for z in itertools.product(range(-k, k + 1), repeat=grid.d):
            r2 = Fraction(sum(v * v for v in z), k * k) if exact else sum(v * v for v in z) / float(k2)
            if r2 >= 1:
                continue
            w = self.profile_value(r2)
            if w != 0:
                weights[z] = w
        total = sum(weights.values())
        return {z: w / total for z, w in weights.items()}


def mollify_chain(chain: CubicalChain, mol: Mollifier) -> CubicalChain:
    """Weight-averaged lattice translates of the chain.

    Exact when the chain carries int/Fraction coefficients: the kernel is
    then evaluated rationally, making mass non-expansion and boundary
    commutation identities, not approximations.
    """
    exact = all(not isinstance(v, float) for v in chain.cells.values())
    weights = mol.lattice_weights(chain.grid, exact=exact)
    if not exact:
        weights = {z: float(w) for z, w in weights.items()}

    bbox = chain.support_bbox()
    if bbox is not None:
        reach = [max(abs(z[i]) for z in weights) for i in range(chain.grid.d)]
        for i in range(chain.grid.d):
            if bbox[0][i] - reach[i] < chain.grid.lo[i] or bbox[1][i] + reach[i] > chain.grid.hi[i]:
                raise BoxOverflowError(
                    "mollified support would leave the grid box; enlarge the box "
                    f"or shrink epsilon (axis {i})"
                )

    out: dict[Cell, object] = {}
    for z, w in weights.items():
        for cell, coeff in chain.cells.items():
            moved = Cell(tuple(a + dz for a, dz in zip(cell.anchor, z)), cell.axes)
            new = out.get(moved, 0) + w * coeff
            if new == 0:
                out.pop(moved, None)
            else:
                out[moved] = new
    return CubicalChain(chain.grid, chain.m, out)


def _kernel_radius(grid: DyadicGrid, mol: Mollifier) -> float:
    """Effective radius so that every sampled cell sits inside the support."""
    h = float(grid.step)
    rad = float(mol.epsilon) - h * math.sqrt(grid.d) / 2.0
    if rad <= 0:
        raise ResolutionExhaustedError(
            f"kernel radius {mol.epsilon} unresolvable at step {grid.step}"
        )
    return rad


def _component_kernel(grid: DyadicGrid, mol: Mollifier, axes: tuple[int, ...]):
    """Profile sampled at displacements between staggered points and cell mids.

    Returns (kernel array, per-axis minimal integer offset).  Offsets along
    the component's own axes are whole steps; transverse offsets carry an
    extra half step.  The sample set is symmetric, so odd moments cancel.
    """
    h = float(grid.step)
    eps = float(mol.epsilon)
    rad = _kernel_radius(grid, mol)
    ranges, halves = [], []
    for i in range(grid.d):
        if i in axes:
            r = int(math.floor(rad / h))
            ranges.append(range(-r, r + 1))
            halves.append(0.0)
        else:
            r = int(math.floor(rad / h + 0.5))
            ranges.append(range(-r + 1, r + 1))
            halves.append(0.5)
    o_min = [rng.start for rng in ranges]
    shape = tuple(len(rng) for rng in ranges)
    kernel = np.zeros(shape)
    for o in itertools.product(*ranges):
        r2 = sum((oi - hf) ** 2 for oi, hf in zip(o, halves)) * h * h
        if r2 <= rad * rad:
            idx = tuple(oi - mi for oi, mi in zip(o, o_min))
            kernel[idx] = mol.profile_value(r2 / (eps * eps))
    if kernel.sum() <= 0:
        raise ResolutionExhaustedError(
            f"kernel radius {mol.epsilon} unresolvable at step {grid.step}"
        )
    return kernel, o_min


def _offset_convolve(arr: np.ndarray, kernel: np.ndarray, o_min, out_shape):
    """out[a] = sum_j kernel[j] * arr[a - o_min - j], zero-padded."""
    from scipy.signal import fftconvolve

    full = fftconvolve(arr, kernel, mode="full")
    slices = []
    for ax in range(arr.ndim):
        start = -o_min[ax]
        slices.append(slice(start, start + out_shape[ax]))
    return full[tuple(slices)]


def kernel_density_chain(
    grid: DyadicGrid, mol: Mollifier, point, axes: tuple[int, ...]
) -> CubicalChain:
    """Unit-mass density current shaped like the bump centered at ``point``.

    Realized as corner-spread faces along ``axes``, the same reduction as
    ``contract`` on the top-dimensional chain, so a charge applied to it is
    the discrete analogue of pairing with the bump times a basis vector.
    """
    h = float(grid.step)
    rad = _kernel_radius(grid, mol)
    eps = float(mol.epsilon)
    lo = []
    hi = []
    for i in range(grid.d):
        lo.append(int(math.floor((float(point[i]) - rad) / h - 0.5)) - grid.lo[i])
        hi.append(int(math.ceil((float(point[i]) + rad) / h - 0.5)) + 1 - grid.lo[i])
        lo[-1] = max(lo[-1], 0)
        hi[-1] = min(hi[-1], grid.shape[i])
    raw = {}
    total = 0.0
    for idx in itertools.product(*(range(a, b) for a, b in zip(lo, hi))):
        mid = [(grid.lo[i] + idx[i] + 0.5) * h for i in range(grid.d)]
        r2 = sum((float(point[i]) - mid[i]) ** 2 for i in range(grid.d))
        if r2 > rad * rad:
            continue
        w = mol.profile_value(r2 / (eps * eps))
        if w > 0:
            raw[idx] = w
            total += w
    if total <= 0:
        raise ResolutionExhaustedError(f"no cells inside kernel at {point}")
    m = len(axes)
    rest = tuple(i for i in range(grid.d) if i not in axes)
    spread = 1.0 / ((1 << len(rest)) * total * h ** m)
    cells: dict[Cell, float] = {}
    for idx, w in raw.items():
        base = tuple(grid.lo[i] + idx[i] for i in range(grid.d))
        for corner in itertools.product((0, 1), repeat=len(rest)):
            a = list(base)
            for ax, c in zip(rest, corner):
                a[ax] += c
            cell = Cell(tuple(a), axes)
            cells[cell] = cells.get(cell, 0.0) + w * spread
    return CubicalChain(grid, m, cells)


def smooth_charge(
    charge,
    mol: Mollifier,
    grid: DyadicGrid | None = None,
    components: list[tuple[int, ...]] | None = None,
) -> SampledForm:
    """Mollify a charge into a sampled form on the grid's staggered lattices.

    For form charges the kernel pairing collapses to a discrete convolution
    of the sample arrays (with renormalized truncation near the box edges);
    any other charge is evaluated on one density current per sample point.
    """
    grid = grid or charge.grid
    m = charge.m
    form = getattr(charge, "form", None)
    if form is not None and form.grid == grid:
        return _smooth_form_fast(form, mol)
    comps = {}
    for axes in components or increasing_tuples(grid.d, m):
        shape = component_shape(grid, axes)
        out = np.zeros(shape)
        h = float(grid.step)
        for idx in itertools.product(*(range(s) for s in shape)):
            point = tuple(
                (grid.lo[i] + idx[i] + (0.5 if i in axes else 0.0)) * h
                for i in range(grid.d)
            )
            out[idx] = charge.evaluate(kernel_density_chain(grid, mol, point, axes))
        comps[axes] = out
    return SampledForm(grid, m, comps)


def _smooth_form_fast(form: SampledForm, mol: Mollifier) -> SampledForm:
    grid = form.grid
    ones = np.ones(grid.shape)
    comps = {}
    for axes, arr in form.components.items():
        cell_avg = resample_to_axes(grid, arr, axes, tuple(range(grid.d)))
        kernel, o_min = _component_kernel(grid, mol, axes)
        out_shape = component_shape(grid, axes)
        num = _offset_convolve(cell_avg, kernel, o_min, out_shape)
        den = _offset_convolve(ones, kernel, o_min, out_shape)
        comps[axes] = num / den
    return SampledForm(grid, form.m, comps)


def dyadic_ladder(charge, levels: int, grid: DyadicGrid | None = None,
                  profile: str = "poly3") -> list[SampledForm]:
    """Unit-scale smoothing followed by dyadic difference bands.

    Element 0 is the charge smoothed at radius 1; element n is the difference
    of the smoothings at radii 2**-n and 2**-(n-1).  Partial sums telescope
    to the smoothing at the finest returned scale.
    """
    grid = grid or charge.grid
    if levels < 0:
        raise ValidationError("level count must be nonnegative")
    finest = Fraction(1, 1 << levels)
    if finest < 2 * grid.step:
        raise ResolutionExhaustedError(
            f"ladder depth {levels} needs scale {finest} < twice the grid step"
        )
    smoothed = [
        smooth_charge(charge, Mollifier(Fraction(1, 1 << n), profile), grid)
        for n in range(levels + 1)
    ]
    ladder = [smoothed[0]]
    for n in range(1, levels + 1):
        ladder.append(smoothed[n] - smoothed[n - 1])
    return ladder
