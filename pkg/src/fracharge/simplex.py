"""Dense two-phase simplex over exact rational arithmetic.

Dictionary-based tableau with Bland's rule (smallest-index pivoting), which
cannot cycle, so termination is guaranteed.  Intended for the certificate
oracle of the flat-norm solver; practical only up to a couple of thousand
variables.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import SolverError

ZERO = Fraction(0)
ONE = Fraction(1)


def _pivot(tab, basis, row, col, ncols):
    piv = tab[row][col]
    inv = ONE / piv
    prow = [v * inv for v in tab[row]]
    tab[row] = prow
    for i, r in enumerate(tab):
        if i == row:
            continue
        f = r[col]
        if f != 0:
            tab[i] = [a - f * b for a, b in zip(r, prow)]
    basis[row] = col


def _optimize(tab, basis, ncols):
    obj = tab[-1]
    nrows = len(tab) - 1
    while True:
        col = -1
        for j in range(ncols):
            if obj[j] < 0:
                col = j
                break
        if col < 0:
            return
        row, best = -1, None
        for i in range(nrows):
            a = tab[i][col]
            if a > 0:
                ratio = tab[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[row]):
                    best, row = ratio, i
        if row < 0:
            raise SolverError("LP is unbounded")
        _pivot(tab, basis, row, col, ncols)
        obj = tab[-1]


def solve_lp_exact(c, rows, b):
    """Minimize c.x subject to (sparse) rows . x = b, x >= 0, exactly.

    ``rows`` is a list of {col: Fraction} dicts, one per constraint.  Returns
    (optimal value, solution list).
    """
    m, n = len(rows), len(c)
    c = [Fraction(v) for v in c]
    b = [Fraction(v) for v in b]

    # Dense phase-1 tableau with artificial columns n..n+m-1.
    tab = []
    for i in range(m):
        row = [ZERO] * (n + m + 1)
        sgn = ONE if b[i] >= 0 else -ONE
        for j, v in rows[i].items():
            row[j] = sgn * Fraction(v)
        row[n + i] = ONE
        row[-1] = sgn * b[i]
        tab.append(row)
    basis = [n + i for i in range(m)]

    obj = [ZERO] * (n + m + 1)
    for i in range(m):
        for j in range(n):
            obj[j] -= tab[i][j]
        obj[-1] -= tab[i][-1]
    tab.append(obj)
    _optimize(tab, basis, n + m)
    if tab[-1][-1] != 0:
        raise SolverError("phase 1 ended with positive infeasibility")

    # Drive remaining artificials out of the basis, dropping redundant rows.
    keep = []
    for i in range(m):
        if basis[i] >= n:
            piv_col = next((j for j in range(n) if tab[i][j] != 0), None)
            if piv_col is None:
                continue
            _pivot(tab, basis, i, piv_col, n + m)
        keep.append(i)
    tab = [tab[i] for i in keep] + [tab[-1]]
    basis = [basis[i] for i in keep]

    # Phase 2 with the real objective, expressed in the current basis.
    obj = [ZERO] * (n + m + 1)
    for j in range(n):
        obj[j] = c[j]
    for i, bi in enumerate(basis):
        f = obj[bi]
        if f != 0:
            obj = [a - f * v for a, v in zip(obj, tab[i])]
    for j in range(n, n + m):
        obj[j] = ZERO  # artificials are never re-entered
    tab[-1] = obj
    _optimize(tab, basis, n)

    x = [ZERO] * n
    for i, bi in enumerate(basis):
        if bi < n:
            x[bi] = tab[i][-1]
    value = -tab[-1][-1]
    return value, x
