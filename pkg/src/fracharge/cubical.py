"""Dyadic cubical grids, oriented cells, and sparse chains.

A chain of dimension ``m`` is a finite map from oriented ``m``-cells to real
coefficients; it is the computational stand-in for a normal current.  Cells
are axis-aligned cubes of side ``2**-L`` addressed by an integer anchor
(lower corner, in lattice units) and a strictly increasing tuple of spanned
axes (0-based).  Orientation is the wedge of the spanned axes in increasing
order, and boundary signs alternate with the position of the dropped axis,
so that the boundary operator squares to zero exactly.

Coefficients may be ints, floats or :class:`fractions.Fraction`; operations
preserve whatever arithmetic the inputs use, which is what makes the exact
(rational) mode of the flat-norm solver possible.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple

from .errors import (
    BoxOverflowError,
    DimensionError,
    GridMismatchError,
    ValidationError,
)


def increasing_tuples(d: int, m: int) -> list[tuple[int, ...]]:
    """All strictly increasing m-tuples from {0, ..., d-1}."""
    return list(itertools.combinations(range(d), m))


def merge_sign(left: tuple[int, ...], right: tuple[int, ...]) -> int:
    """Sign of the permutation sorting the concatenation left+right.

    This is the coefficient in dx_left ^ dx_right = sign * dx_sorted for
    disjoint increasing tuples.
    """
    inversions = sum(1 for a in left for b in right if a > b)
    return -1 if inversions % 2 else 1


class Cell(NamedTuple):
    """Oriented cubical cell: integer lower corner and spanned axes."""

    anchor: tuple[int, ...]
    axes: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.axes)


@dataclass(frozen=True)
class DyadicGrid:
    """Dyadic grid of level ``L`` on an axis-aligned box with dyadic corners.

    ``lo`` and ``hi`` are the box corners in lattice units (multiples of the
    step ``2**-L``), so the box is ``[lo*2**-L, hi*2**-L]`` and every side
    length is automatically an integer multiple of the step.  A box is convex,
    hence a 1-Lipschitz retract of the ambient space, which is what makes the
    grid flat norm agree with the unrestricted one.
    """

    d: int
    L: int
    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"dimension must be >= 1, got {self.d}")
        if self.L < 0:
            raise ValidationError(f"level must be >= 0, got {self.L}")
        if len(self.lo) != self.d or len(self.hi) != self.d:
            raise ValidationError("box corner arity does not match dimension")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValidationError(f"degenerate box lo={self.lo} hi={self.hi}")

    @classmethod
    def unit_box(cls, d: int, L: int, margin: int = 0) -> "DyadicGrid":
        """Grid on [0,1]^d, optionally enlarged by ``margin`` ambient units."""
        n = 1 << L
        return cls(d, L, (-margin * n,) * d, ((1 + margin) * n,) * d)

    @classmethod
    def from_box(cls, d: int, L: int, mins, maxs) -> "DyadicGrid":
        """Build from ambient corner coordinates, validating dyadicity."""
        n = 1 << L
        lo, hi = [], []
        for a, b in zip(mins, maxs):
            fa, fb = Fraction(a) * n, Fraction(b) * n
            if fa.denominator != 1 or fb.denominator != 1:
                raise ValidationError(
                    f"box corner ({a}, {b}) is not a multiple of 2**-{L}"
                )
            lo.append(int(fa))
            hi.append(int(fb))
        return cls(d, L, tuple(lo), tuple(hi))

    @property
    def step(self) -> Fraction:
        return Fraction(1, 1 << self.L)

    @property
    def shape(self) -> tuple[int, ...]:
        """Number of cells along each axis."""
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def node_count(self) -> int:
        out = 1
        for n in self.shape:
            out *= n + 1
        return out

    def cell_volume(self, m: int) -> Fraction:
        return self.step**m

    def contains_cell(self, cell: Cell) -> bool:
        for i in range(self.d):
            top = cell.anchor[i] + (1 if i in cell.axes else 0)
            if cell.anchor[i] < self.lo[i] or top > self.hi[i]:
                return False
        return True

    def compatible(self, other: "DyadicGrid") -> bool:
        return self.d == other.d and self.L == other.L

    def hull(self, other: "DyadicGrid") -> "DyadicGrid":
        if not self.compatible(other):
            raise GridMismatchError(
                f"cannot hull grids (d={self.d},L={self.L}) and "
                f"(d={other.d},L={other.L})"
            )
        lo = tuple(min(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(max(a, b) for a, b in zip(self.hi, other.hi))
        return DyadicGrid(self.d, self.L, lo, hi)

    def cells(self, m: int, axes: tuple[int, ...] | None = None) -> Iterable[Cell]:
        """All m-cells of the grid (optionally of one axis type)."""
        axes_list = [axes] if axes is not None else increasing_tuples(self.d, m)
        for ax in axes_list:
            ranges = []
            for i in range(self.d):
                n = self.hi[i] - self.lo[i]
                extent = n if i in ax else n + 1
                ranges.append(range(self.lo[i], self.lo[i] + extent))
            for anchor in itertools.product(*ranges):
                yield Cell(anchor, ax)

    def cell_midpoint(self, cell: Cell) -> tuple[Fraction, ...]:
        h = self.step
        half = Fraction(1, 2)
        return tuple(
            (cell.anchor[i] + (half if i in cell.axes else 0)) * h
            for i in range(self.d)
        )


def _as_cell(cell) -> Cell:
    if isinstance(cell, Cell):
        return cell
    anchor, axes = cell
    return Cell(tuple(anchor), tuple(axes))


@dataclass(frozen=True)
class CubicalChain:
    """Sparse real-coefficient m-chain on a dyadic grid.

    Immutable value: every operation returns a new chain.  Zero coefficients
    are dropped so the representation is canonical.
    """

    grid: DyadicGrid
    m: int
    cells: Mapping[Cell, object] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for cell, coeff in self.cells.items():
            cell = _as_cell(cell)
            if coeff == 0:
                continue
            if cell.dim != self.m:
                raise DimensionError(
                    f"cell {cell} has dimension {cell.dim}, chain has {self.m}"
                )
            if tuple(sorted(set(cell.axes))) != cell.axes:
                raise ValidationError(f"cell axes {cell.axes} not strictly increasing")
            if cell.axes and (cell.axes[0] < 0 or cell.axes[-1] >= self.grid.d):
                raise ValidationError(f"cell axes {cell.axes} outside 0..{self.grid.d-1}")
            if not self.grid.contains_cell(cell):
                raise BoxOverflowError(f"cell {cell} outside grid box")
            clean[cell] = coeff
        if not 0 <= self.m <= self.grid.d:
            raise DimensionError(f"chain dimension {self.m} not in 0..{self.grid.d}")
        object.__setattr__(self, "cells", clean)

    # -- algebra ---------------------------------------------------------

    def __add__(self, other: "CubicalChain") -> "CubicalChain":
        if self.m != other.m:
            raise DimensionError("cannot add chains of different dimension")
        grid = self.grid.hull(other.grid)
        cells = dict(self.cells)
        for cell, coeff in other.cells.items():
            cells[cell] = cells.get(cell, 0) + coeff
        return CubicalChain(grid, self.m, cells)

    def __sub__(self, other: "CubicalChain") -> "CubicalChain":
        return self + other.scale(-1)

    def __neg__(self) -> "CubicalChain":
        return self.scale(-1)

    def scale(self, a) -> "CubicalChain":
        if a == 0:
            return CubicalChain(self.grid, self.m, {})
        return CubicalChain(
            self.grid, self.m, {c: a * v for c, v in self.cells.items()}
        )

    def __rmul__(self, a) -> "CubicalChain":
        return self.scale(a)

    def is_zero(self) -> bool:
        return not self.cells

    def num_cells(self) -> int:
        return len(self.cells)

    def prune(self, tol: float) -> "CubicalChain":
        """Drop coefficients of magnitude below ``tol`` (float cleanup)."""
        return CubicalChain(
            self.grid,
            self.m,
            {c: v for c, v in self.cells.items() if abs(v) > tol},
        )

    def to_fraction(self) -> "CubicalChain":
        return CubicalChain(
            self.grid, self.m, {c: Fraction(v) for c, v in self.cells.items()}
        )

    def to_float(self) -> "CubicalChain":
        return CubicalChain(
            self.grid, self.m, {c: float(v) for c, v in self.cells.items()}
        )

    def on_grid(self, grid: DyadicGrid) -> "CubicalChain":
        """The same chain viewed on a larger (or equal) compatible box."""
        return CubicalChain(grid, self.m, dict(self.cells))

    # -- geometry --------------------------------------------------------

    def support_bbox(self) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
        """Lattice bounding box of the support, or None for the zero chain."""
        if not self.cells:
            return None
        lo = list(next(iter(self.cells)).anchor)
        hi = list(lo)
        for cell in self.cells:
            for i in range(self.grid.d):
                top = cell.anchor[i] + (1 if i in cell.axes else 0)
                lo[i] = min(lo[i], cell.anchor[i])
                hi[i] = max(hi[i], top)
        return tuple(lo), tuple(hi)

    def fingerprint(self) -> int:
        return hash(
            (self.grid, self.m, tuple(sorted((c, repr(v)) for c, v in self.cells.items())))
        )

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        cells = []
        for cell in sorted(self.cells):
            coeff = self.cells[cell]
            if isinstance(coeff, Fraction):
                # Dyadic rationals round-trip through float64 exactly; other
                # rationals are written as "p/q" strings.
                f = float(coeff)
                coeff = f if Fraction(f) == coeff else f"{coeff.numerator}/{coeff.denominator}"
            cells.append(
                {"anchor": list(cell.anchor), "axes": list(cell.axes), "coeff": coeff}
            )
        return {"d": self.grid.d, "L": self.grid.L, "m": self.m, "cells": cells}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, data: dict, grid: DyadicGrid | None = None) -> "CubicalChain":
        try:
            d, L, m = int(data["d"]), int(data["L"]), int(data["m"])
            raw = data["cells"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed chain JSON: {exc}") from exc
        cells = {}
        for entry in raw:
            try:
                anchor = tuple(int(a) for a in entry["anchor"])
                axes = tuple(int(a) for a in entry["axes"])
                coeff = entry["coeff"]
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"malformed cell entry {entry!r}") from exc
            if isinstance(coeff, str):
                num, _, den = coeff.partition("/")
                coeff = Fraction(int(num), int(den or "1"))
            cell = Cell(anchor, axes)
            cells[cell] = cells.get(cell, 0) + coeff
        if grid is None:
            grid = _hull_grid_for_cells(d, L, cells)
        return cls(grid, m, cells)

    @classmethod
    def from_json(cls, text: str, grid: DyadicGrid | None = None) -> "CubicalChain":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
        return cls.from_json_dict(data, grid)


def _hull_grid_for_cells(d: int, L: int, cells: Mapping[Cell, object]) -> DyadicGrid:
    if not cells:
        return DyadicGrid(d, L, (0,) * d, (1 << L,) * d)
    lo = [None] * d
    hi = [None] * d
    for cell in cells:
        if len(cell.anchor) != d:
            raise ValidationError(f"cell anchor arity {cell.anchor} != d={d}")
        for i in range(d):
            top = cell.anchor[i] + (1 if i in cell.axes else 0)
            lo[i] = cell.anchor[i] if lo[i] is None else min(lo[i], cell.anchor[i])
            hi[i] = top if hi[i] is None else max(hi[i], top)
    hi = [h if h > l else h + 1 for l, h in zip(lo, hi)]
    return DyadicGrid(d, L, tuple(lo), tuple(hi))


# -- chain constructors ----------------------------------------------------


def point_chain(grid: DyadicGrid, node: tuple[int, ...], coeff=1) -> CubicalChain:
    return CubicalChain(grid, 0, {Cell(tuple(node), ()): coeff})


def cube_chain(
    grid: DyadicGrid,
    anchor: tuple[int, ...],
    side_cells: int = 1,
    axes: tuple[int, ...] | None = None,
    coeff=1,
) -> CubicalChain:
    """Solid cube of ``side_cells`` lattice steps spanned along ``axes``."""
    if axes is None:
        axes = tuple(range(grid.d))
    cells = {}
    for offs in itertools.product(range(side_cells), repeat=len(axes)):
        a = list(anchor)
        for ax, o in zip(axes, offs):
            a[ax] += o
        cells[Cell(tuple(a), axes)] = coeff
    return CubicalChain(grid, len(axes), cells)


def box_chain(grid: DyadicGrid, lo, hi, axes=None, coeff=1) -> CubicalChain:
    """All cells of a lattice sub-box [lo, hi], spanned along ``axes``."""
    if axes is None:
        axes = tuple(range(grid.d))
    cells = {}
    ranges = []
    for i in range(grid.d):
        if i in axes:
            ranges.append(range(lo[i], hi[i]))
        else:
            ranges.append(range(lo[i], lo[i] + 1))
    for anchor in itertools.product(*ranges):
        cells[Cell(tuple(anchor), tuple(axes))] = coeff
    return CubicalChain(grid, len(axes), cells)


def interval_chain(grid: DyadicGrid, start: int, stop: int, axis: int = 0,
                   base: tuple[int, ...] | None = None, coeff=1) -> CubicalChain:
    """Oriented 1-chain from lattice coordinate start to stop along one axis."""
    if base is None:
        base = tuple(grid.lo)
    sgn = 1 if stop >= start else -1
    cells = {}
    for k in range(min(start, stop), max(start, stop)):
        a = list(base)
        a[axis] = k
        cells[Cell(tuple(a), (axis,))] = sgn * coeff
    return CubicalChain(grid, 1, cells)


def density_chain(grid: DyadicGrid, values) -> CubicalChain:
    """Top-dimensional chain with one coefficient per grid cell.

    ``values`` is an array of shape ``grid.shape``; this realizes the current
    with piecewise-constant density given by ``values`` (the coefficient IS
    the density, geometric volume enters through the mass).
    """
    import numpy as np

    arr = np.asarray(values)
    if arr.shape != grid.shape:
        raise GridMismatchError(
            f"density shape {arr.shape} does not match grid cells {grid.shape}"
        )
    axes = tuple(range(grid.d))
    cells = {}
    it = np.nditer(arr, flags=["multi_index"])
    for v in it:
        v = v.item()
        if v != 0:
            anchor = tuple(grid.lo[i] + it.multi_index[i] for i in range(grid.d))
            cells[Cell(anchor, axes)] = v
    return CubicalChain(grid, grid.d, cells)


# -- operations --------------------------------------------------------------


def boundary(chain: CubicalChain) -> CubicalChain:
    """Cubical boundary with alternating signs; satisfies boundary**2 = 0."""
    if chain.m == 0:
        raise DimensionError("0-chains have no boundary")
    out: dict[Cell, object] = {}
    for cell, coeff in chain.cells.items():
        for k, ax in enumerate(cell.axes):
            sgn = -1 if k % 2 else 1
            sub = cell.axes[:k] + cell.axes[k + 1:]
            top = list(cell.anchor)
            top[ax] += 1
            for face_anchor, face_sign in ((tuple(top), sgn), (cell.anchor, -sgn)):
                face = Cell(face_anchor, sub)
                new = out.get(face, 0) + face_sign * coeff
                if new == 0:
                    out.pop(face, None)
                else:
                    out[face] = new
    return CubicalChain(chain.grid, chain.m - 1, out)


def mass(chain: CubicalChain):
    """Total variation: sum of |coefficient| times cell m-volume.

    Exact (Fraction) when all coefficients are ints or Fractions.
    """
    if not chain.cells:
        return 0
    vol = chain.grid.cell_volume(chain.m)
    total = sum(abs(c) for c in chain.cells.values())
    if isinstance(total, float):
        return float(vol) * total
    return vol * total


def normal_mass(chain: CubicalChain):
    """Mass plus boundary mass; for 0-chains the boundary term is zero."""
    if chain.m == 0:
        return mass(chain)
    return mass(chain) + mass(boundary(chain))


def translate(chain: CubicalChain, z: tuple[int, ...]) -> CubicalChain:
    """Push forward by a lattice translation, enlarging the box if needed."""
    z = tuple(z)
    if len(z) != chain.grid.d:
        raise ValidationError(f"translation arity {len(z)} != d={chain.grid.d}")
    if any(not isinstance(v, int) for v in z):
        raise ValidationError(f"translation {z} is not a lattice vector")
    cells = {
        Cell(tuple(a + dz for a, dz in zip(cell.anchor, z)), cell.axes): coeff
        for cell, coeff in chain.cells.items()
    }
    grid = chain.grid
    shifted = DyadicGrid(
        grid.d,
        grid.L,
        tuple(l + dz for l, dz in zip(grid.lo, z)),
        tuple(h + dz for h, dz in zip(grid.hi, z)),
    )
    return CubicalChain(grid.hull(shifted), chain.m, cells)


def contract(chain: CubicalChain, form) -> CubicalChain:
    """Interior product of a chain with a sampled form of degree k <= m.

    The form is sampled at the midpoint of each cell of the chain; the
    resulting (m-k)-chain distributes each cell's contribution evenly over
    the 2**k corner faces obtained by dropping the form's axes, so that
    pairing with any test form reproduces the wedge pairing up to midpoint
    quadrature error.
    """
    k = form.m
    if k > chain.m:
        raise DimensionError(
            f"cannot contract a {chain.m}-chain against a {k}-form"
        )
    if not chain.grid.compatible(form.grid):
        raise GridMismatchError("chain and form live on different grids")
    h = float(chain.grid.step)
    scale = h**k / (1 << k)
    out: dict[Cell, object] = {}
    for cell, coeff in chain.cells.items():
        axset = set(cell.axes)
        mid = chain.grid.cell_midpoint(cell)
        for comp in form.component_axes():
            if not set(comp) <= axset:
                continue
            rest = tuple(ax for ax in cell.axes if ax not in comp)
            val = form.value_at(comp, mid)
            if val == 0:
                continue
            w = coeff * (merge_sign(comp, rest) * val * scale)
            for corner in itertools.product((0, 1), repeat=k):
                a = list(cell.anchor)
                for ax, c in zip(comp, corner):
                    a[ax] += c
                face = Cell(tuple(a), rest)
                new = out.get(face, 0) + w
                if new == 0:
                    out.pop(face, None)
                else:
                    out[face] = new
    return CubicalChain(chain.grid, chain.m - k, out)


def density_current(grid: DyadicGrid, axes: tuple[int, ...], values) -> CubicalChain:
    """The m-current with m-vectorfield ``values * e_axes`` spread over cells.

    ``values`` holds one density per grid cell (shape ``grid.shape``).  The
    realization distributes each cell's weight over the corner m-faces along
    the spanned axes, matching what ``contract`` produces on the top chain.
    """
    import numpy as np

    arr = np.asarray(values, dtype=float)
    if arr.shape != grid.shape:
        raise GridMismatchError("density array does not match grid cells")
    m = len(axes)
    h = float(grid.step)
    rest = tuple(i for i in range(grid.d) if i not in axes)
    scale = h ** (grid.d - m) / (1 << (grid.d - m))
    out: dict[Cell, float] = {}
    nz = np.argwhere(arr != 0)
    for idx in nz:
        anchor0 = tuple(grid.lo[i] + int(idx[i]) for i in range(grid.d))
        w = float(arr[tuple(idx)]) * scale
        for corner in itertools.product((0, 1), repeat=len(rest)):
            a = list(anchor0)
            for ax, c in zip(rest, corner):
                a[ax] += c
            face = Cell(tuple(a), tuple(axes))
            out[face] = out.get(face, 0.0) + w
    return CubicalChain(grid, m, {c: v for c, v in out.items() if v != 0})
