"""Truncated paraproduct exterior product of Hoelder/fractional charges.

The product of an alpha-factor and a beta-factor (alpha + beta > 1 strictly)
is evaluated through the telescoping series

    w0 ^ e0 + sum_n [ w_{n+1} ^ (e_{n+1} - e_n) + (w_{n+1} - w_n) ^ e_n ]

where w_n, e_n are the factors smoothed at dyadic radius 2**-n.  Each term is
a pointwise wedge of smooth sampled forms paired with the target chain by
midpoint quadrature; term magnitudes decay geometrically at rate about
2**(1 - alpha - beta), which drives both the truncation rule and the
reported diagnostics.  Young and Zust integrals are thin front-ends.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .charges import Charge, FormCharge
from .cubical import CubicalChain, DyadicGrid, box_chain, contract, interval_chain
from .errors import (
    CriticalExponentError,
    DimensionError,
    GridMismatchError,
    ResolutionExhaustedError,
    ValidationError,
)
from .forms import SampledForm, d_samples, extend_by_reflection, pointwise_wedge
from .mollify import Mollifier, smooth_charge

RATE_SAFETY = 4.0
REPORT_FLOOR = 1e-12


def lp_sum_bound(alpha: float, bound: float) -> float:
    """Explicit constant of the dyadic summation lemma.

    C * ( 2**(1-a) / (2**(1-a) - 1) + 1 / (1 - 2**-a) ) for 0 < a < 1.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"summation constant needs alpha in (0,1), got {alpha}")
    p = 2.0 ** (1.0 - alpha)
    q = 2.0 ** (-alpha)
    return bound * (p / (p - 1.0) + 1.0 / (1.0 - q))


# -- laddered factors ---------------------------------------------------------


class Factor:
    """A charge together with its dyadic smoothing ladder."""

    m: int
    exponent: float
    grid: DyadicGrid
    profile: str

    def form_at_scale(self, n: int) -> SampledForm:
        raise NotImplementedError

    def norm_hint(self) -> float:
        raise NotImplementedError

    def charge(self) -> Charge:
        raise NotImplementedError


class FormFactor(Factor):
    """Sampled-form factor; smoothings are kernel convolutions of the samples."""

    def __init__(self, form: SampledForm, exponent: float | None = None,
                 profile: str = "poly3"):
        if exponent is None:
            if form.holder is None:
                raise ValidationError("factor needs an exponent or Hoelder metadata")
            exponent = form.holder[0]
        if not 0.0 < exponent <= 1.0:
            raise ValidationError(f"exponent {exponent} not in (0, 1]")
        self.form = form
        self.m = form.m
        self.exponent = float(exponent)
        self.grid = form.grid
        self.profile = profile
        self._cache: dict[int, SampledForm] = {}

    def form_at_scale(self, n: int) -> SampledForm:
        if n not in self._cache:
            mol = Mollifier(Fraction(1, 1 << n), self.profile)
            self._cache[n] = smooth_charge(FormCharge(self.form), mol, self.grid)
        return self._cache[n]

    def norm_hint(self) -> float:
        lip = self.form.holder[1] if self.form.holder else 0.0
        return max(self.form.sup_norm(), lip)

    def charge(self) -> Charge:
        return FormCharge(self.form)


class DerivativeFactor(Factor):
    """Exterior derivative of a factor; ladder commutes through d."""

    def __init__(self, base: Factor):
        if base.m >= base.grid.d:
            raise DimensionError("cannot take d of a top-degree factor")
        self.base = base
        self.m = base.m + 1
        self.exponent = base.exponent
        self.grid = base.grid
        self.profile = base.profile
        self._cache: dict[int, SampledForm] = {}

    def form_at_scale(self, n: int) -> SampledForm:
        if n not in self._cache:
            self._cache[n] = d_samples(self.base.form_at_scale(n))
        return self._cache[n]

    def norm_hint(self) -> float:
        return self.base.norm_hint()

    def charge(self) -> Charge:
        from .charges import exterior_derivative

        return exterior_derivative(self.base.charge())


@dataclass
class ConvergenceReport:
    """Per-level diagnostics of one truncated series evaluation."""

    alpha: float
    beta: float
    levels: list[int]
    terms: list[float]
    partial_sums: list[float]
    fitted_rate: float
    theoretical_rate: float
    achieved_tol: float
    truncation_level: int
    grid_level: int
    converged: bool

    def csv_rows(self):
        rows = [("level", "term", "partial_sum", "fitted_rate", "grid_level")]
        for lvl, t, s in zip(self.levels, self.terms, self.partial_sums):
            rows.append((lvl, repr(t), repr(s), repr(self.fitted_rate), self.grid_level))
        return rows


def _fit_rate(terms: list[float], scale: float = 0.0) -> float:
    """Geometric decay rate fitted on the trailing term magnitudes.

    Terms at the float noise floor of the running value count as zero, so an
    exactly-telescoped series reports rate 0 instead of fitting roundoff.
    """
    mags = [abs(t) for t in terms]
    floor = max(max(mags, default=0.0) * 1e-14, scale * 1e-13, 1e-300)
    tail = [m for m in mags[-6:] if m > floor]
    if len(tail) < 2:
        return 0.0
    ratios = [b / a for a, b in zip(tail[:-1], tail[1:]) if a > 0]
    if not ratios:
        return 0.0
    return float(math.exp(sum(math.log(r) for r in ratios) / len(ratios)))


class ParaproductState:
    """Factors, their ladders, cached term forms and per-chain partial data.

    Construction enforces the strict Young condition alpha + beta > 1 (the
    critical case is refused outright) and the degree bound m + m' <= d.
    Ladder depth is capped at grid level minus 2 so the finest kernel spans
    at least four lattice steps.
    """

    def __init__(self, omega: Factor, eta: Factor, tol: float = 1e-6):
        if omega.grid != eta.grid:
            raise GridMismatchError("paraproduct factors live on different grids")
        if omega.profile != eta.profile:
            raise ValidationError("paraproduct factors use different kernel profiles")
        a, b = omega.exponent, eta.exponent
        if a + b <= 1.0:
            raise CriticalExponentError(
                f"exponents alpha={a}, beta={b} violate alpha + beta > 1; "
                "the critical case diverges and is refused"
            )
        if omega.m + eta.m > omega.grid.d:
            raise DimensionError(
                f"wedge degree {omega.m + eta.m} exceeds dimension {omega.grid.d}"
            )
        self.omega = omega
        self.eta = eta
        self.alpha = a
        self.beta = b
        self.m = omega.m + eta.m
        self.grid = omega.grid
        self.tol = tol
        self.profile = omega.profile
        self.max_depth = self.grid.L - 2
        self._term_forms: dict[int, SampledForm] = {}
        self._chain_cache: dict[int, list[float]] = {}
        self._lock = threading.Lock()

    # ladder access ----------------------------------------------------------

    def omega_form(self, n: int) -> SampledForm:
        return self.omega.form_at_scale(n)

    def eta_form(self, n: int) -> SampledForm:
        return self.eta.form_at_scale(n)

    def term_form(self, n: int) -> SampledForm:
        """Series increment as a sampled form; n = -1 is the base term."""
        with self._lock:
            if n in self._term_forms:
                return self._term_forms[n]
        if n == -1:
            form = pointwise_wedge(self.omega_form(0), self.eta_form(0))
        else:
            d_eta = self.eta_form(n + 1) - self.eta_form(n)
            d_omega = self.omega_form(n + 1) - self.omega_form(n)
            form = pointwise_wedge(self.omega_form(n + 1), d_eta) + pointwise_wedge(
                d_omega, self.eta_form(n)
            )
        with self._lock:
            self._term_forms[n] = form
        return form

    def term_value(self, n: int, chain: CubicalChain, fp: int | None = None) -> float:
        fp = chain.fingerprint() if fp is None else fp
        with self._lock:
            cached = self._chain_cache.setdefault(fp, [])
        k = n + 1
        if k < len(cached):
            return cached[k]
        v = FormCharge(self.term_form(n)).evaluate(chain)
        with self._lock:
            if k == len(cached):
                cached.append(v)
        return v

    def term_via_contraction(self, n: int, chain: CubicalChain) -> float:
        """Same increment computed the dual way, through chain contraction."""
        if n == -1:
            inner = contract(chain, self.omega_form(0))
            return FormCharge(self.eta_form(0)).evaluate(inner)
        d_eta = self.eta_form(n + 1) - self.eta_form(n)
        d_omega = self.omega_form(n + 1) - self.omega_form(n)
        first = FormCharge(d_eta).evaluate(contract(chain, self.omega_form(n + 1)))
        second = FormCharge(self.eta_form(n)).evaluate(contract(chain, d_omega))
        return first + second

    def check_margin(self, chain: CubicalChain):
        bbox = chain.support_bbox()
        if bbox is None:
            return
        need = 1 << self.grid.L  # one ambient unit of mollification room
        for i in range(self.grid.d):
            if bbox[0][i] - self.grid.lo[i] < need or self.grid.hi[i] - bbox[1][i] < need:
                raise ValidationError(
                    "chain support needs margin >= 1 inside the factor box "
                    f"(axis {i}); enlarge the sampling box"
                )


def wedge_eval(
    ps: ParaproductState, chain: CubicalChain, tol: float | None = None
) -> tuple[float, ConvergenceReport]:
    """Evaluate the paraproduct series on a chain to tolerance ``tol``.

    Stops once three consecutive increments fall below tol and the fitted
    decay rate is at most 2**((1-alpha-beta)/2); raises a resolution error
    carrying the partial report when the ladder cap is hit first.
    """
    tol = ps.tol if tol is None else float(tol)
    if chain.m != ps.m:
        raise DimensionError(f"series of degree {ps.m} cannot act on a {chain.m}-chain")
    if not chain.grid.compatible(ps.grid):
        raise GridMismatchError("chain and paraproduct live on different grids")
    ps.check_margin(chain)

    theo = 2.0 ** (1.0 - ps.alpha - ps.beta)
    threshold = 2.0 ** ((1.0 - ps.alpha - ps.beta) / 2.0)
    fp = chain.fingerprint()

    levels, terms, partials = [], [], []
    total = ps.term_value(-1, chain, fp)
    levels.append(-1)
    terms.append(total)
    partials.append(total)

    fitted = 0.0
    converged = False
    n = 0
    while n <= ps.max_depth:
        t = ps.term_value(n, chain, fp)
        total += t
        levels.append(n)
        terms.append(t)
        partials.append(total)
        if len(terms) >= 4:
            recent = [abs(v) for v in terms[-3:]]
            scale = max(abs(p) for p in partials)
            fitted = _fit_rate(terms[1:], scale)
            if max(recent) < tol and fitted <= threshold:
                converged = True
                break
        n += 1

    tail = abs(terms[-1]) * fitted / (1.0 - fitted) if 0.0 <= fitted < 1.0 else float("inf")
    achieved = RATE_SAFETY * (tail + max(abs(v) for v in terms[-3:]))
    achieved = max(achieved, REPORT_FLOOR * (1.0 + abs(total)))
    report = ConvergenceReport(
        alpha=ps.alpha,
        beta=ps.beta,
        levels=levels,
        terms=terms,
        partial_sums=partials,
        fitted_rate=fitted,
        theoretical_rate=theo,
        achieved_tol=achieved,
        truncation_level=levels[-1],
        grid_level=ps.grid.L,
        converged=converged,
    )
    if not converged:
        raise ResolutionExhaustedError(
            f"series did not reach tol={tol} within ladder depth {ps.max_depth} "
            f"(grid level {ps.grid.L}); refine the grid or relax the tolerance",
            report=report,
        )
    return total, report


class WedgeCharge(Charge):
    """The paraproduct product as an evaluatable charge."""

    def __init__(self, ps: ParaproductState):
        self.ps = ps
        self.m = ps.m
        self.grid = ps.grid
        self.last_report: ConvergenceReport | None = None

    def evaluate(self, chain: CubicalChain) -> float:
        value, report = wedge_eval(self.ps, chain, self.ps.tol)
        self.last_report = report
        return value


def wedge_charge(ps: ParaproductState) -> WedgeCharge:
    return WedgeCharge(ps)


class WedgeFactor(Factor):
    """A paraproduct product reused as a factor of a further product.

    Its smoothing ladder is the pointwise product of the factor ladders,
    which is exactly the approximant sequence whose weak* limit defines the
    product; the resulting exponent is alpha + beta - 1.
    """

    def __init__(self, ps: ParaproductState):
        self.ps = ps
        self.m = ps.m
        self.exponent = ps.alpha + ps.beta - 1.0
        self.grid = ps.grid
        self.profile = ps.profile
        self._cache: dict[int, SampledForm] = {}

    def form_at_scale(self, n: int) -> SampledForm:
        if n not in self._cache:
            self._cache[n] = pointwise_wedge(
                self.ps.omega_form(n), self.ps.eta_form(n)
            )
        return self._cache[n]

    def norm_hint(self) -> float:
        return self.ps.omega.norm_hint() * self.ps.eta.norm_hint()

    def charge(self) -> Charge:
        return WedgeCharge(self.ps)


# -- integral front-ends -------------------------------------------------------


def _prepared_factor_form(form: SampledForm, margin: int = 1) -> SampledForm:
    """Ensure ``margin`` ambient units of room around [0,1]^d for smoothing.

    Boxes that already carry the margin pass through untouched; otherwise the
    samples continue by odd reflection, which keeps first differences
    continuous across the seam (edge clamping would kink the data at the
    integration boundary and stall the series at first-order decay).
    """
    g = form.grid
    n = 1 << g.L
    lo = tuple(min(l, -margin * n) for l in g.lo)
    hi = tuple(max(h, (1 + margin) * n) for h in g.hi)
    if lo == g.lo and hi == g.hi:
        return form
    target = DyadicGrid(g.d, g.L, lo, hi)
    return extend_by_reflection(form, target)


def young_integral(
    f: SampledForm,
    g: SampledForm,
    alpha: float | None = None,
    beta: float | None = None,
    tol: float = 1e-6,
    profile: str = "poly3",
    with_report: bool = False,
):
    """Riemann-Stieltjes integral of f dg over [0,1] for Hoelder samples.

    Requires a 1-D grid on [0,1] (samples are extended by edge clamping to
    make room for the unit-scale smoothing) and alpha + beta > 1.
    """
    if f.grid.d != 1 or f.m != 0 or g.m != 0:
        raise ValidationError("young_integral needs two 0-forms on a 1-D grid")
    if f.grid != g.grid:
        raise GridMismatchError("integrand and integrator on different grids")
    fe = _prepared_factor_form(f)
    ge = _prepared_factor_form(g)
    omega = FormFactor(fe, alpha, profile)
    eta = DerivativeFactor(FormFactor(ge, beta, profile))
    ps = ParaproductState(omega, eta, tol=tol)
    lo = 0
    hi = 1 << f.grid.L
    if f.grid.lo[0] > 0 or f.grid.hi[0] < hi:
        raise ValidationError("young_integral integrates over [0,1]; box too small")
    chain = interval_chain(fe.grid, lo, hi, axis=0, base=(0,))
    value, report = wedge_eval(ps, chain, tol)
    return (value, report) if with_report else value


def zust_integral(
    f: SampledForm,
    gs: list[SampledForm],
    alphas: list[float] | None = None,
    tol: float = 1e-4,
    profile: str = "poly3",
    with_report: bool = False,
):
    """The d-fold Stieltjes-type integral of f dg_1 ^ ... ^ dg_d on [0,1]^d.

    Exponents must satisfy sum_i alpha_i > d (strict); the product is built
    left-associated, each partial product re-entering as a laddered factor.
    """
    grid = f.grid
    d = grid.d
    if len(gs) != d:
        raise ValidationError(f"need exactly {d} integrators for a {d}-dim domain")
    if alphas is None:
        alphas = [None] * (d + 1)
    if len(alphas) != d + 1:
        raise ValidationError("need one exponent for f and one per integrator")

    def exp_of(form, given):
        if given is not None:
            return float(given)
        if form.holder is None:
            raise ValidationError("missing exponent and no Hoelder metadata")
        return form.holder[0]

    exps = [exp_of(f, alphas[0])] + [exp_of(g, a) for g, a in zip(gs, alphas[1:])]
    if sum(exps) <= d:
        raise CriticalExponentError(
            f"exponent sum {sum(exps):.4g} fails the strict condition > {d}"
        )
    factor: Factor = FormFactor(_prepared_factor_form(f), exps[0], profile)
    state = None
    for g_form, a in zip(gs, exps[1:]):
        if g_form.grid != grid or g_form.m != 0:
            raise GridMismatchError("integrators must be 0-forms on the same grid")
        eta = DerivativeFactor(FormFactor(_prepared_factor_form(g_form), a, profile))
        state = ParaproductState(factor, eta, tol=tol)
        factor = WedgeFactor(state)
    n = 1 << grid.L
    if any(l > 0 for l in grid.lo) or any(h < n for h in grid.hi):
        raise ValidationError("zust_integral integrates over [0,1]^d; box too small")
    chain = box_chain(factor.grid, (0,) * d, (n,) * d)
    value, report = wedge_eval(state, chain, tol)
    return (value, report) if with_report else value


# -- stability ------------------------------------------------------------------


@dataclass
class StabilityReport:
    deviations: list[float]
    tolerances: list[float]
    base_values: list[float]

    @property
    def decreasing(self) -> bool:
        return all(b <= a * 1.25 + 1e-12 for a, b in zip(self.deviations, self.deviations[1:]))


def wedge_stability(
    base: ParaproductState,
    perturbed: list[tuple[Factor, Factor]],
    chains: list[CubicalChain],
    tol: float = 1e-5,
    norm_bound: float | None = None,
) -> StabilityReport:
    """Deviation of perturbed products from the base product on a chain battery.

    Refuses input sequences whose factor norm surrogates exceed ``norm_bound``
    (weak* continuity only holds along bounded sequences).
    """
    if not perturbed:
        raise ValidationError("stability needs a nonempty factor sequence")
    if norm_bound is not None:
        for w, e in perturbed:
            if w.norm_hint() > norm_bound or e.norm_hint() > norm_bound:
                raise ValidationError(
                    "factor sequence is not uniformly bounded; stability refused"
                )
    base_vals = []
    for chain in chains:
        v, _ = wedge_eval(base, chain, tol)
        base_vals.append(v)
    deviations, tols = [], []
    for w, e in perturbed:
        ps = ParaproductState(w, e, tol=tol)
        worst = 0.0
        worst_tol = 0.0
        for chain, bv in zip(chains, base_vals):
            v, rep = wedge_eval(ps, chain, tol)
            worst = max(worst, abs(v - bv))
            worst_tol = max(worst_tol, rep.achieved_tol)
        deviations.append(worst)
        tols.append(worst_tol)
    return StabilityReport(deviations, tols, base_vals)
