"""Flat norm of a cubical chain via L1-minimization cast as a linear program.

F(T) = inf { M(S) + M(T - dS) } over grid (m+1)-chains S.  The L1 objective
is linearized with split positive/negative parts for both the filling and
the remainder, weighted by cell volumes.  The float backend is scipy's HiGHS;
the exact backend is a self-contained rational simplex, usable for small
instances and returning certified optima.

Fillings are searched on the bounding box of the chain's support (plus an
optional margin).  Collapsing a chain onto a sub-box by clamping anchors is
a boundary-commuting, mass-non-increasing chain map, so enlarging the search
box never changes the optimum; the margin knob is exposed for empirical
verification of exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cubical import (
    Cell,
    CubicalChain,
    DyadicGrid,
    boundary,
    mass,
    normal_mass,
)
from .errors import DimensionError, SolverError, ValidationError
from .simplex import solve_lp_exact

EXACT_VAR_LIMIT = 2048


@dataclass
class FlatNormCert:
    """Optimal filling and remainder witnessing the flat-norm value."""

    value: float | Fraction
    filling: CubicalChain
    remainder: CubicalChain

    def check(self, chain: CubicalChain, tol: float = 1e-9) -> bool:
        """Internal consistency: remainder == chain - d(filling), value matches."""
        if self.filling.is_zero():
            diff = chain - self.remainder
        else:
            diff = chain - boundary(self.filling) - self.remainder
        residual = max((abs(float(v)) for v in diff.cells.values()), default=0.0)
        ok_val = abs(float(self.value) - float(mass(self.filling) + mass(self.remainder)))
        return residual <= tol and ok_val <= tol * (1.0 + abs(float(self.value)))


def _solver_grid(chain: CubicalChain, margin: int) -> DyadicGrid | None:
    bbox = chain.support_bbox()
    if bbox is None:
        return None
    lo0, hi0 = bbox
    lo = tuple(a - margin for a in lo0)
    # Degenerate directions (flat chains) still need one cell of room for
    # fillings of one higher dimension.
    hi = tuple(max(b + margin, l + 1) for b, l in zip(hi0, lo))
    return DyadicGrid(chain.grid.d, chain.grid.L, lo, hi)


def _boundary_entries(cell: Cell):
    """Signed faces of one cell, matching the boundary() convention."""
    for k, ax in enumerate(cell.axes):
        sgn = -1 if k % 2 else 1
        sub = cell.axes[:k] + cell.axes[k + 1:]
        top = list(cell.anchor)
        top[ax] += 1
        yield Cell(tuple(top), sub), sgn
        yield Cell(cell.anchor, sub), -sgn


def flat_norm(
    chain: CubicalChain,
    mode: str = "float",
    margin: int = 0,
    exact_var_limit: int = EXACT_VAR_LIMIT,
) -> FlatNormCert:
    """Flat norm with certificate.

    mode "float" uses scipy/HiGHS; mode "exact" uses rational arithmetic and
    requires the instance to stay below ``exact_var_limit`` split variables.
    """
    if mode not in ("float", "exact"):
        raise ValidationError(f"unknown flat norm mode {mode!r}")
    grid = chain.grid
    m = chain.m
    zero_fill = CubicalChain(grid, min(m + 1, grid.d), {})
    if chain.is_zero():
        return FlatNormCert(Fraction(0) if mode == "exact" else 0.0, zero_fill, chain)
    if m == grid.d:
        # No (d+1)-cells exist: S = 0 is the only filling.
        c = chain.to_fraction() if mode == "exact" else chain
        return FlatNormCert(mass(c), zero_fill, c)

    box = _solver_grid(chain, margin)
    s_cells = list(box.cells(m + 1))
    e_index: dict[Cell, int] = {}
    e_cells: list[Cell] = []
    for cell in box.cells(m):
        e_index[cell] = len(e_cells)
        e_cells.append(cell)
    ns, ne = len(s_cells), len(e_cells)

    cols = []
    for cell in s_cells:
        col = {}
        for face, sgn in _boundary_entries(cell):
            col[e_index[face]] = col.get(e_index[face], 0) + sgn
        cols.append(col)

    t = {}
    for cell, coeff in chain.cells.items():
        t[e_index[cell]] = coeff

    vol_s = box.cell_volume(m + 1)
    vol_e = box.cell_volume(m)

    if mode == "exact":
        nvars = 2 * (ns + ne)
        if nvars > exact_var_limit:
            raise ValidationError(
                f"exact mode limited to {exact_var_limit} variables, "
                f"instance has {nvars}; use float mode"
            )
        return _solve_exact(chain, box, s_cells, e_cells, cols, t, vol_s, vol_e)
    return _solve_float(chain, box, s_cells, e_cells, cols, t, vol_s, vol_e)


def _assemble_cert(chain, box, s_cells, s_vals, exact):
    cells = {}
    for cell, v in zip(s_cells, s_vals):
        if v != 0:
            cells[cell] = v
    filling = CubicalChain(box, chain.m + 1, cells)
    base = chain.to_fraction() if exact else chain
    if filling.is_zero():
        remainder = base
    else:
        remainder = base.on_grid(box.hull(chain.grid)) - boundary(filling)
    value = mass(filling) + mass(remainder)
    return FlatNormCert(value, filling, remainder)


def _solve_exact(chain, box, s_cells, e_cells, cols, t, vol_s, vol_e):
    ns, ne = len(s_cells), len(e_cells)
    n = 2 * ns + 2 * ne
    c = [Fraction(vol_s)] * (2 * ns) + [Fraction(vol_e)] * (2 * ne)
    rows = [dict() for _ in range(ne)]
    for j, col in enumerate(cols):
        for i, sgn in col.items():
            rows[i][j] = Fraction(sgn)
            rows[i][ns + j] = Fraction(-sgn)
    for i in range(ne):
        rows[i][2 * ns + i] = Fraction(1)
        rows[i][2 * ns + ne + i] = Fraction(-1)
    b = [Fraction(0)] * ne
    for i, v in t.items():
        b[i] = Fraction(v)
    _, x = solve_lp_exact(c, rows, b)
    s_vals = [x[j] - x[ns + j] for j in range(ns)]
    return _assemble_cert(chain.to_fraction(), box, s_cells, s_vals, exact=True)


def _solve_float(chain, box, s_cells, e_cells, cols, t, vol_s, vol_e):
    from scipy import sparse
    from scipy.optimize import linprog

    ns, ne = len(s_cells), len(e_cells)
    data, ridx, cidx = [], [], []
    for j, col in enumerate(cols):
        for i, sgn in col.items():
            data.extend((sgn, -sgn))
            ridx.extend((i, i))
            cidx.extend((j, ns + j))
    for i in range(ne):
        data.extend((1.0, -1.0))
        ridx.extend((i, i))
        cidx.extend((2 * ns + i, 2 * ns + ne + i))
    A = sparse.csc_matrix(
        (data, (ridx, cidx)), shape=(ne, 2 * ns + 2 * ne), dtype=float
    )
    b = np.zeros(ne)
    for i, v in t.items():
        b[i] = float(v)
    c = np.concatenate(
        [
            np.full(2 * ns, float(vol_s)),
            np.full(2 * ne, float(vol_e)),
        ]
    )
    res = linprog(c, A_eq=A, b_eq=b, method="highs")
    if not res.success:
        raise SolverError(f"flat norm LP failed: {res.message}")
    x = res.x
    scale = max(1.0, float(np.max(np.abs(b))) if ne else 1.0)
    s_vals = []
    for j in range(ns):
        v = x[j] - x[ns + j]
        s_vals.append(v if abs(v) > 1e-11 * scale else 0.0)
    return _assemble_cert(chain.to_float(), box, s_cells, s_vals, exact=False)


def flat_norm_lower_bound_pair(
    chain_a: CubicalChain, chain_b: CubicalChain, mode: str = "float", margin: int = 0
):
    """F(a - b): the flat distance between two chains of matching dimension."""
    if chain_a.m != chain_b.m:
        raise DimensionError("flat distance needs chains of equal dimension")
    if not chain_a.grid.compatible(chain_b.grid):
        raise ValidationError("flat distance needs chains on compatible grids")
    return flat_norm(chain_a - chain_b, mode=mode, margin=margin).value


def flat_and_normal(chain: CubicalChain, mode: str = "float"):
    """Convenience (N(T), F(T)) pair used by the estimator families."""
    return normal_mass(chain), flat_norm(chain, mode=mode).value
