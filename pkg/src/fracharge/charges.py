"""Charges: evaluatable linear functionals on cubical chains.

Covers form charges (midpoint-rule pairing with a sampled form), derivative
charges (duality with the boundary, so Stokes holds exactly), layer-cake
charges (top-dimensional additive set functions applied through superlevel
sets), the Gamma correspondence between 0-charges and functions, the McShane
Lipschitz approximation, and the lower-bound estimator for the fractional
seminorm |w(T)| <= C N(T)**(1-a) F(T)**a.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .cubical import (
    Cell,
    CubicalChain,
    DyadicGrid,
    boundary,
    cube_chain,
    density_current,
    increasing_tuples,
    mass,
    normal_mass,
    point_chain,
)
from .errors import DimensionError, GridMismatchError, ValidationError
from .flatnorm import flat_norm
from .forms import SampledForm, d_samples

# Frozen per-dimension bound on the total variation of one partial derivative
# of the default unit bump (values rounded up); enters the upper constant in
# the Hoelder-fractionality invariant through max-component duality.
BUMP_DERIVATIVE_TV = {1: 2.19, 2: 2.33, 3: 2.47, 4: 2.60}


class Charge:
    """Linear functional on chains of one fixed degree."""

    m: int
    grid: DyadicGrid

    def evaluate(self, chain: CubicalChain) -> float:
        raise NotImplementedError

    def _check(self, chain: CubicalChain):
        if chain.m != self.m:
            raise DimensionError(
                f"charge degree {self.m} cannot act on a {chain.m}-chain"
            )
        if not chain.grid.compatible(self.grid):
            raise GridMismatchError("charge and chain live on different grids")


class FormCharge(Charge):
    """Continuous-form charge: per-cell midpoint quadrature of the pairing."""

    def __init__(self, form: SampledForm):
        self.form = form
        self.m = form.m
        self.grid = form.grid

    def evaluate(self, chain: CubicalChain) -> float:
        self._check(chain)
        vol = float(self.grid.cell_volume(self.m))
        lo = self.grid.lo
        total = 0.0
        for cell, coeff in chain.cells.items():
            arr = self.form.components.get(cell.axes)
            if arr is None:
                continue
            idx = tuple(a - l for a, l in zip(cell.anchor, lo))
            try:
                v = arr[idx]
            except IndexError:
                raise GridMismatchError(f"cell {cell} outside the form's box")
            total += float(coeff) * float(v)
        return total * vol


class DerivativeCharge(Charge):
    """Exterior derivative by duality: (dw)(T) = w(boundary T), exactly."""

    def __init__(self, base: Charge):
        if base.m >= base.grid.d:
            raise DimensionError("cannot take d of a top-degree charge")
        self.base = base
        self.m = base.m + 1
        self.grid = base.grid

    def evaluate(self, chain: CubicalChain) -> float:
        self._check(chain)
        return self.base.evaluate(boundary(chain))


def exterior_derivative(w: Charge) -> Charge:
    return DerivativeCharge(w)


# -- Gamma correspondence ----------------------------------------------------


def gamma_eval(w: Charge, node: tuple[int, ...]) -> float:
    """Value of the function Gamma(w) at a grid node: w on the point chain."""
    if w.m != 0:
        raise DimensionError("Gamma acts on 0-charges")
    return w.evaluate(point_chain(w.grid, node))


def gamma_inverse(f: SampledForm) -> Charge:
    """The 0-charge whose Gamma image is the sampled function (exactly)."""
    if f.m != 0:
        raise DimensionError("gamma_inverse needs a 0-form")
    return FormCharge(f)


# -- McShane approximation ---------------------------------------------------


def mcshane_approx(f: SampledForm, eps: float) -> SampledForm:
    """Lipschitz lower approximation of an alpha-Hoelder sampled function.

    f_eps(x) = min_y f(y) + (lip / eps**(1-alpha)) |x - y| over grid nodes.
    The output is Lipschitz with constant lip * eps**(alpha-1), sits below f,
    and deviates by at most lip * eps**alpha, all exactly on the node set.
    """
    if f.m != 0:
        raise DimensionError("mcshane_approx needs a 0-form")
    if f.holder is None:
        raise ValidationError("mcshane_approx needs (alpha, lip) metadata")
    if not 0 < eps <= 1:
        raise ValidationError(f"eps must lie in (0, 1], got {eps}")
    alpha, lip = f.holder
    lam = lip * eps ** (alpha - 1.0)
    grid = f.grid
    h = float(grid.step)
    vals = f.node_values().ravel()
    axes_coords = [np.arange(n + 1) * h for n in grid.shape]
    mesh = np.meshgrid(*axes_coords, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    out = np.empty_like(vals)
    block = max(1, int(2**22 // max(len(vals), 1)))
    for start in range(0, len(vals), block):
        chunk = pts[start:start + block]
        dist = np.sqrt(((chunk[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
        out[start:start + block] = np.min(vals[None, :] + lam * dist, axis=1)
    return SampledForm(
        grid, 0, {(): out.reshape(f.node_values().shape)},
        holder=(1.0, lip * eps ** (alpha - 1.0)),
    )


# -- test-current families and the fractional-norm estimator ------------------


@dataclass
class TestCurrent:
    chain: CubicalChain
    normal: float
    flat: float
    label: str = ""


@dataclass
class TestCurrentFamily:
    """A cached family of nonzero chains with precomputed N and LP-computed F."""

    grid: DyadicGrid
    m: int
    _members: list[TestCurrent] = field(default_factory=list)

    def add_chain(self, chain: CubicalChain, label: str = ""):
        if chain.is_zero():
            return
        N = float(normal_mass(chain))
        F = float(flat_norm(chain).value)
        self._members.append(TestCurrent(chain, N, F, label))

    def members(self) -> list[TestCurrent]:
        return list(self._members)

    def __len__(self):
        return len(self._members)

    # builders ---------------------------------------------------------------

    @classmethod
    def dyadic_cubes(cls, grid: DyadicGrid, m: int, max_side: int = 4,
                     boundaries: bool = True) -> "TestCurrentFamily":
        """Dyadic cubes of a few sizes (and their boundaries, one dim down)."""
        fam = cls(grid, m)
        sides = [s for s in (1, 2, 4, 8) if s <= max_side]
        rng = np.random.default_rng(7)
        for side in sides:
            for axes in increasing_tuples(grid.d, m):
                anchor = tuple(
                    int(rng.integers(grid.lo[i], max(grid.lo[i] + 1, grid.hi[i] - side)))
                    for i in range(grid.d)
                )
                fam.add_chain(
                    cube_chain(grid, anchor, side, axes), f"cube{side}:{axes}"
                )
        if boundaries and m < grid.d:
            for side in sides:
                for axes in increasing_tuples(grid.d, m + 1):
                    anchor = tuple(
                        int(rng.integers(grid.lo[i], max(grid.lo[i] + 1, grid.hi[i] - side)))
                        for i in range(grid.d)
                    )
                    fam.add_chain(
                        boundary(cube_chain(grid, anchor, side, axes)),
                        f"dcube{side}:{axes}",
                    )
        return fam

    @classmethod
    def point_pairs(cls, grid: DyadicGrid, count: int = 12) -> "TestCurrentFamily":
        """Differences of point masses at assorted dyadic separations."""
        fam = cls(grid, 0)
        rng = np.random.default_rng(11)
        nodes = []
        for _ in range(count):
            nodes.append(tuple(int(rng.integers(grid.lo[i], grid.hi[i] + 1))
                               for i in range(grid.d)))
        for a, b in itertools.combinations(nodes, 2):
            if a != b:
                fam.add_chain(point_chain(grid, a) - point_chain(grid, b), "pair")
        return fam

    @classmethod
    def density_peaks(cls, grid: DyadicGrid, form: SampledForm, top_k: int = 32,
                      include_boundary_peaks: bool = True) -> "TestCurrentFamily":
        """Unit-mass single-cell density currents at the largest form samples.

        These mirror the currents realizing the sup norms of a smooth form
        and of its derivative: L1-normalized m-vectorfields concentrated on
        one cell, and boundaries of (m+1)-vectorfield concentrations.
        """
        m = form.m
        fam = cls(grid, m)
        vol = float(grid.cell_volume(grid.d))
        cell_shape = grid.shape

        def peak_cells(arr, axes):
            from .forms import resample_to_axes

            per_cell = resample_to_axes(grid, arr, axes, tuple(range(grid.d)))
            flat = np.abs(per_cell).ravel()
            order = np.argsort(flat)[::-1][:top_k]
            return [np.unravel_index(i, cell_shape) for i in order]

        for axes, arr in form.components.items():
            for idx in peak_cells(arr, axes):
                dens = np.zeros(cell_shape)
                dens[idx] = 1.0 / vol
                fam.add_chain(density_current(grid, axes, dens), f"dens:{axes}")
        if include_boundary_peaks and m < grid.d:
            dform = d_samples(form)
            for axes, arr in dform.components.items():
                for idx in peak_cells(arr, axes):
                    dens = np.zeros(cell_shape)
                    dens[idx] = 1.0 / vol
                    fam.add_chain(
                        boundary(density_current(grid, axes, dens)), f"bdens:{axes}"
                    )
        return fam

    def extended(self, other: "TestCurrentFamily") -> "TestCurrentFamily":
        if other.m != self.m:
            raise DimensionError("cannot merge families of different degree")
        fam = TestCurrentFamily(self.grid, self.m)
        fam._members = self._members + other._members
        return fam

    def mollified(self, mol) -> "TestCurrentFamily":
        from .mollify import mollify_chain

        fam = TestCurrentFamily(self.grid, self.m)
        fam._members = list(self._members)
        for tc in self._members:
            try:
                fam.add_chain(mollify_chain(tc.chain, mol), tc.label + "*phi")
            except (ValidationError, ValueError):
                continue
        return fam


def fractional_norm_lb(
    w: Charge, alpha: float, family: TestCurrentFamily, threads: int | None = None
) -> float:
    """Best lower bound of the fractional seminorm over the test family.

    max |w(T)| / (N(T)**(1-alpha) F(T)**alpha); monotone in the family and
    a true lower bound by definition of the seminorm.
    """
    if not 0 < alpha <= 1:
        raise ValidationError(f"alpha must lie in (0, 1], got {alpha}")
    members = family.members()
    if not members:
        raise ValidationError("estimator needs a nonempty test family")

    def ratio(tc: TestCurrent) -> float:
        if tc.flat <= 0 or tc.normal <= 0:
            return 0.0
        denom = tc.normal ** (1.0 - alpha) * tc.flat**alpha
        return abs(w.evaluate(tc.chain)) / denom

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            vals = list(ex.map(ratio, members))
    else:
        vals = [ratio(tc) for tc in members]
    return max(vals)


def plain_norm_lb(w: Charge, family: TestCurrentFamily) -> float:
    """Lower bound of the plain charge norm sup |w(T)| / N(T)."""
    members = family.members()
    if not members:
        raise ValidationError("estimator needs a nonempty test family")
    return max(
        abs(w.evaluate(tc.chain)) / tc.normal for tc in members if tc.normal > 0
    )


def theta_profile(w: Charge, family: TestCurrentFamily, eps_list) -> dict[float, float]:
    """Empirical continuity profile: least theta with |w| <= eps N + theta F.

    Purely observational (see the charge continuity property); nothing is
    asserted about the optimal theta.
    """
    out = {}
    for eps in eps_list:
        theta = 0.0
        for tc in family.members():
            if tc.flat > 0:
                theta = max(theta, (abs(w.evaluate(tc.chain)) - eps * tc.normal) / tc.flat)
        out[float(eps)] = max(theta, 0.0)
    return out


def interpolation_check(
    w: Charge,
    alpha: float,
    eps: float,
    bound: float,
    family: TestCurrentFamily,
    slack: float = 1e-6,
) -> bool:
    """Multiplicative interpolation of estimator bounds.

    Checks the two premises (flat-cochain bound C/eps**(1-alpha), plain bound
    C eps**alpha) on the family estimators and, if they hold, that the
    alpha-estimator is below C, mirroring |w(T)| <= |w(T)|**a |w(T)|**(1-a).
    """
    if not 0 < alpha <= 1:
        raise ValidationError(f"alpha must lie in (0, 1], got {alpha}")
    if eps <= 0:
        raise ValidationError("eps must be positive")
    est1 = fractional_norm_lb(w, 1.0, family)
    est_plain = plain_norm_lb(w, family)
    premise = (
        est1 <= bound / eps ** (1.0 - alpha) * (1.0 + slack) + slack
        and est_plain <= bound * eps**alpha * (1.0 + slack) + slack
    )
    if not premise:
        return False
    est_alpha = fractional_norm_lb(w, alpha, family)
    return est_alpha <= bound * (1.0 + slack) + slack


def holder_fractionality_bound(form: SampledForm) -> float:
    """Upper constant for the fractional seminorm of a Hoelder form charge.

    lip + max(sup, C lip) with the frozen smoothing constant C; any estimator
    lower bound for the form must stay below this.
    """
    if form.holder is None:
        raise ValidationError("needs (alpha, lip) metadata")
    _, lip = form.holder
    d = form.grid.d
    tv = BUMP_DERIVATIVE_TV.get(d)
    if tv is None:
        raise ValidationError(f"no frozen bump constant for dimension {d}")
    c_smooth = (form.m + 1) * tv
    return lip + max(form.sup_norm(), c_smooth * lip)


# -- layer cake ---------------------------------------------------------------


@dataclass
class HolderChargeFn:
    """Finitely additive set function on grid cell sets with Hoelder control.

    ``cell_weights`` holds the measure of each single cell; additivity over
    disjoint grid sets is then automatic.  ``alpha`` is the fractional
    exponent; the dyadic-cube exponent is gamma = (d-1)/d + alpha/d.
    """

    grid: DyadicGrid
    cell_weights: np.ndarray
    alpha: float

    def __post_init__(self):
        self.cell_weights = np.asarray(self.cell_weights, dtype=float)
        if self.cell_weights.shape != self.grid.shape:
            raise GridMismatchError("cell weights do not match the grid")
        if not 0 < self.alpha <= 1:
            raise ValidationError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def gamma(self) -> float:
        d = self.grid.d
        return (d - 1) / d + self.alpha / d

    def measure(self, mask: np.ndarray) -> float:
        return float(self.cell_weights[mask].sum())

    def dyadic_cube_constant(self) -> float:
        """Recorded C with |mu(Q)| <= C vol(Q)**gamma over aligned dyadic cubes."""
        g = self.grid
        vol_cell = float(g.cell_volume(g.d))
        best = 0.0
        side = 1
        while all(n >= side for n in g.shape):
            vol = vol_cell * side**g.d
            ranges = []
            for i, n in enumerate(g.shape):
                start = (-g.lo[i]) % side
                if start + side > n:
                    ranges = None
                    break
                ranges.append(range(start, n - side + 1, side))
            if ranges is not None:
                for corner in itertools.product(*ranges):
                    sl = tuple(slice(c, c + side) for c in corner)
                    mu = float(self.cell_weights[sl].sum())
                    best = max(best, abs(mu) / vol**self.gamma)
            side *= 2
        return best


def layer_cake_eval(mu: HolderChargeFn, density, levels=None) -> float:
    """Charge value on the box contracted with a piecewise-constant density.

    For cellwise-constant densities the superlevel sets are exact grid sets,
    so the layer-cake integral is a finite sum over the distinct values;
    signed densities split into positive and negative parts.  ``levels`` may
    supply an explicit t-grid to force a quadrature approximation instead
    (used for cross-checks).
    """
    if isinstance(density, CubicalChain):
        if density.m != mu.grid.d:
            raise DimensionError("layer cake needs a top-dimensional density")
        arr = np.zeros(mu.grid.shape)
        for cell, coeff in density.cells.items():
            if cell.axes != tuple(range(mu.grid.d)):
                raise ValidationError("density chain must be cellwise constant")
            idx = tuple(a - l for a, l in zip(cell.anchor, mu.grid.lo))
            arr[idx] = float(coeff)
        density = arr
    f = np.asarray(density, dtype=float)
    if f.shape != mu.grid.shape:
        raise GridMismatchError("density does not match the grid")

    def one_sided(g: np.ndarray) -> float:
        if levels is not None:
            ts = np.asarray(levels, dtype=float)
            total = 0.0
            for lo, hi in zip(ts[:-1], ts[1:]):
                tmid = 0.5 * (lo + hi)
                total += (hi - lo) * mu.measure(g > tmid)
            return total
        vals = np.unique(g[g > 0])
        total = 0.0
        prev = 0.0
        for v in vals:
            total += (v - prev) * mu.measure(g >= v)
            prev = v
        return total

    return one_sided(np.maximum(f, 0.0)) - one_sided(np.maximum(-f, 0.0))


class LayerCakeCharge(Charge):
    """Top-dimensional charge acting on densities through the layer cake."""

    def __init__(self, mu: HolderChargeFn):
        self.mu = mu
        self.grid = mu.grid
        self.m = mu.grid.d

    def evaluate(self, chain: CubicalChain) -> float:
        self._check(chain)
        return layer_cake_eval(self.mu, chain)


def lebesgue_measure(grid: DyadicGrid, alpha: float = 1.0) -> HolderChargeFn:
    vol = float(grid.cell_volume(grid.d))
    return HolderChargeFn(grid, np.full(grid.shape, vol), alpha)
