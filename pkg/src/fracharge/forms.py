"""Grid-sampled covector fields.

A :class:`SampledForm` of degree ``m`` stores one array per increasing axis
tuple ``I``; the component ``I`` is sampled at the midpoints of the grid's
``I``-cells (staggered layout).  With this layout the midpoint-rule pairing
of a form with a chain is a direct table lookup, and the discrete exterior
derivative (finite differences across opposite faces) satisfies Stokes'
theorem exactly against the cubical boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cubical import DyadicGrid, increasing_tuples, merge_sign
from .errors import DimensionError, GridMismatchError, ValidationError


def component_shape(grid: DyadicGrid, axes: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(
        n if i in axes else n + 1 for i, n in enumerate(grid.shape)
    )


def component_coords(grid: DyadicGrid, axes: tuple[int, ...]) -> list[np.ndarray]:
    """Per-axis ambient coordinates of the staggered sample lattice."""
    h = float(grid.step)
    out = []
    for i, n in enumerate(grid.shape):
        if i in axes:
            out.append((grid.lo[i] + 0.5 + np.arange(n)) * h)
        else:
            out.append((grid.lo[i] + np.arange(n + 1)) * h)
    return out


@dataclass
class SampledForm:
    """m-covector field sampled on the staggered lattices of a dyadic grid.

    ``holder`` optionally records ``(alpha, lip)``: a Hoelder exponent in
    (0, 1] and the associated constant, used by the fractionality estimators
    and the McShane approximation.
    """

    grid: DyadicGrid
    m: int
    components: dict[tuple[int, ...], np.ndarray]
    holder: tuple[float, float] | None = None

    def __post_init__(self):
        if not 0 <= self.m <= self.grid.d:
            raise DimensionError(f"form degree {self.m} not in 0..{self.grid.d}")
        comps = {}
        for axes, arr in self.components.items():
            axes = tuple(axes)
            if len(axes) != self.m:
                raise DimensionError(f"component {axes} has wrong arity for degree {self.m}")
            arr = np.asarray(arr, dtype=float)
            want = component_shape(self.grid, axes)
            if arr.shape != want:
                raise GridMismatchError(
                    f"component {axes} has shape {arr.shape}, expected {want}"
                )
            comps[axes] = arr
        self.components = comps
        if self.holder is not None:
            alpha = float(self.holder[0])
            if not 0 < alpha <= 1:
                raise ValidationError(f"Hoelder exponent {alpha} not in (0, 1]")
            self.holder = (alpha, float(self.holder[1]))

    # -- construction ------------------------------------------------------

    @classmethod
    def sample(cls, grid: DyadicGrid, m: int, fields: dict, holder=None) -> "SampledForm":
        """Sample callables (one per component) on the staggered lattices."""
        comps = {}
        for axes, fn in fields.items():
            axes = tuple(axes)
            mesh = np.meshgrid(*component_coords(grid, axes), indexing="ij")
            comps[axes] = np.asarray(fn(*mesh), dtype=float) * np.ones(mesh[0].shape)
        return cls(grid, m, comps, holder)

    @classmethod
    def zero(cls, grid: DyadicGrid, m: int) -> "SampledForm":
        comps = {
            axes: np.zeros(component_shape(grid, axes))
            for axes in increasing_tuples(grid.d, m)
        }
        return cls(grid, m, comps)

    @classmethod
    def from_scalar(cls, grid: DyadicGrid, values, holder=None) -> "SampledForm":
        """0-form from node values."""
        return cls(grid, 0, {(): np.asarray(values, dtype=float)}, holder)

    def copy_with(self, components, holder="keep") -> "SampledForm":
        return SampledForm(
            self.grid,
            self.m,
            components,
            self.holder if holder == "keep" else holder,
        )

    # -- access ------------------------------------------------------------

    def component_axes(self) -> list[tuple[int, ...]]:
        return list(self.components.keys())

    def node_values(self) -> np.ndarray:
        if self.m != 0:
            raise DimensionError("node_values is for 0-forms")
        return self.components[()]

    def value_at(self, axes: tuple[int, ...], point) -> float:
        """Multilinear interpolation of one component at an ambient point.

        Exact (no interpolation) when the point lies on the component's own
        staggered lattice; cell midpoints of higher-dimensional cells hit
        half-offsets and are averaged over the adjacent samples.
        """
        arr = self.components.get(tuple(axes))
        if arr is None:
            return 0.0
        import math

        h = self.grid.step
        idx_weights = []
        for i in range(self.grid.d):
            t = Fraction(point[i]) / h - self.grid.lo[i]
            if i in axes:
                t -= Fraction(1, 2)
            top = arr.shape[i] - 1
            lo_i = math.floor(t)
            frac = t - lo_i
            if frac == 0:
                if not 0 <= lo_i <= top:
                    raise ValidationError(f"sample point {point} outside grid box")
                idx_weights.append(((lo_i, 1.0),))
            else:
                if lo_i < 0 or lo_i + 1 > top:
                    raise ValidationError(f"sample point {point} outside grid box")
                w = float(frac)
                idx_weights.append(((lo_i, 1.0 - w), (lo_i + 1, w)))
        total = 0.0
        stack = [((), 1.0)]
        for choices in idx_weights:
            stack = [
                (idx + (j,), w * wj) for idx, w in stack for j, wj in choices if wj != 0
            ]
        for idx, w in stack:
            total += w * float(arr[idx])
        return total

    # -- algebra -------------------------------------------------------------

    def __add__(self, other: "SampledForm") -> "SampledForm":
        self._check_same_layout(other)
        comps = {a: self.components[a] + other.components[a] for a in self.components}
        return SampledForm(self.grid, self.m, comps)

    def __sub__(self, other: "SampledForm") -> "SampledForm":
        self._check_same_layout(other)
        comps = {a: self.components[a] - other.components[a] for a in self.components}
        return SampledForm(self.grid, self.m, comps)

    def scale(self, a: float) -> "SampledForm":
        return SampledForm(
            self.grid, self.m, {ax: a * v for ax, v in self.components.items()},
            holder=None if self.holder is None else (self.holder[0], abs(a) * self.holder[1]),
        )

    def _check_same_layout(self, other):
        if self.grid != other.grid or self.m != other.m:
            raise GridMismatchError("forms live on different grids or degrees")
        if set(self.components) != set(other.components):
            raise GridMismatchError("forms carry different component sets")

    def sup_norm(self) -> float:
        """Grid comass proxy: max over components of the max |sample|."""
        vals = [np.max(np.abs(v)) if v.size else 0.0 for v in self.components.values()]
        return float(max(vals)) if vals else 0.0


def d_samples(form: SampledForm) -> SampledForm:
    """Discrete exterior derivative on the sample level.

    Component ``J`` of the result is assembled from staggered differences of
    the ``J`` minus one axis components, divided by the step; evaluating the
    result on a chain equals evaluating ``form`` on the chain's boundary,
    exactly.
    """
    grid = form.grid
    if form.m >= grid.d:
        raise DimensionError("cannot take d of a top-degree form")
    h = float(grid.step)
    comps = {}
    for J in increasing_tuples(grid.d, form.m + 1):
        out = np.zeros(component_shape(grid, J))
        for k, ax in enumerate(J):
            sub = J[:k] + J[k + 1:]
            src = form.components.get(sub)
            if src is None:
                continue
            sgn = -1.0 if k % 2 else 1.0
            out += sgn * np.diff(src, axis=ax) / h
        comps[J] = out
    return SampledForm(grid, form.m + 1, comps)


def resample_to_axes(
    grid: DyadicGrid, arr: np.ndarray, src_axes: tuple[int, ...], dst_axes: tuple[int, ...]
) -> np.ndarray:
    """Average a component from its own lattice onto a finer staggered one.

    Every axis in ``dst_axes`` but not in ``src_axes`` switches from node to
    midpoint sampling by averaging adjacent values.  ``src_axes`` must be a
    subset of ``dst_axes``.
    """
    out = arr
    for ax in dst_axes:
        if ax not in src_axes:
            sl_lo = [slice(None)] * out.ndim
            sl_hi = [slice(None)] * out.ndim
            sl_lo[ax] = slice(None, -1)
            sl_hi[ax] = slice(1, None)
            out = 0.5 * (out[tuple(sl_lo)] + out[tuple(sl_hi)])
    return out


def pointwise_wedge(a: SampledForm, b: SampledForm) -> SampledForm:
    """Pointwise exterior product of two sampled forms.

    Components are brought to the common staggered lattice of the combined
    axes by adjacent averaging, so the result is second-order accurate for
    smooth data and exact for data constant along the averaged axes.
    """
    if a.grid != b.grid:
        raise GridMismatchError("wedge factors live on different grids")
    grid = a.grid
    m = a.m + b.m
    if m > grid.d:
        raise DimensionError(f"wedge degree {m} exceeds ambient dimension {grid.d}")
    comps: dict[tuple[int, ...], np.ndarray] = {}
    for I, va in a.components.items():
        seti = set(I)
        for J, vb in b.components.items():
            if seti & set(J):
                continue
            K = tuple(sorted(I + J))
            sgn = merge_sign(I, J)
            term = sgn * resample_to_axes(grid, va, I, K) * resample_to_axes(grid, vb, J, K)
            if K in comps:
                comps[K] = comps[K] + term
            else:
                comps[K] = term
    for K in increasing_tuples(grid.d, m):
        comps.setdefault(K, np.zeros(component_shape(grid, K)))
    return SampledForm(grid, m, comps)


def extend_by_reflection(form: SampledForm, target: DyadicGrid) -> SampledForm:
    """Extend a sampled 0-form by odd (point-symmetric) reflection per axis.

    At each box face the values continue as 2 f(face) - f(mirror), which
    keeps first differences continuous across the seam; smooth data stays
    second-order smoothable, and a Hoelder constant grows by at most
    2**(1-alpha).  Each side can grow by at most the box extent.
    """
    if form.m != 0:
        raise DimensionError("reflection extension is defined for 0-forms")
    if not form.grid.compatible(target):
        raise GridMismatchError("extension target has different (d, L)")
    arr = form.node_values()
    for i in range(form.grid.d):
        p = form.grid.lo[i] - target.lo[i]
        q = target.hi[i] - form.grid.hi[i]
        n = arr.shape[i] - 1
        if p < 0 or q < 0:
            raise ValidationError("extension target must contain the source box")
        if p > n or q > n:
            raise ValidationError(
                f"reflection along axis {i} needs margin <= box extent ({n} cells)"
            )
        pieces = []
        if p:
            pieces.append(2 * np.take(arr, [0], axis=i) - np.take(arr, range(p, 0, -1), axis=i))
        pieces.append(arr)
        if q:
            pieces.append(
                2 * np.take(arr, [n], axis=i) - np.take(arr, range(n - 1, n - 1 - q, -1), axis=i)
            )
        arr = np.concatenate(pieces, axis=i)
    holder = form.holder
    if holder is not None:
        holder = (holder[0], 2.0 ** (1.0 - holder[0]) * holder[1])
    return SampledForm(target, 0, {(): arr}, holder=holder)


def extend_by_clamping(form: SampledForm, target: DyadicGrid) -> SampledForm:
    """Extend samples to a larger box by edge replication.

    Coordinate clamping is 1-Lipschitz, so the extension preserves any
    Hoelder constant exactly; metadata is kept.
    """
    if not form.grid.compatible(target):
        raise GridMismatchError("extension target has different (d, L)")
    if any(t > s for t, s in zip(target.lo, form.grid.lo)) or any(
        t < s for t, s in zip(target.hi, form.grid.hi)
    ):
        raise ValidationError("extension target must contain the source box")
    comps = {}
    for axes, arr in form.components.items():
        pads = []
        for i in range(form.grid.d):
            pads.append((form.grid.lo[i] - target.lo[i], target.hi[i] - form.grid.hi[i]))
        comps[axes] = np.pad(arr, pads, mode="edge")
    return SampledForm(target, form.m, comps, holder=form.holder)


# -- serialization ------------------------------------------------------------


def form_to_json_dict(form: SampledForm) -> dict:
    return {
        "d": form.grid.d,
        "L": form.grid.L,
        "m": form.m,
        "lo": list(form.grid.lo),
        "hi": list(form.grid.hi),
        "components": {
            ",".join(map(str, axes)): arr.ravel().tolist()
            for axes, arr in form.components.items()
        },
        "holder": None if form.holder is None else list(form.holder),
    }


def form_from_json_dict(data: dict) -> SampledForm:
    try:
        grid = DyadicGrid(
            int(data["d"]), int(data["L"]), tuple(data["lo"]), tuple(data["hi"])
        )
        m = int(data["m"])
        comps = {}
        for key, flat in data["components"].items():
            axes = tuple(int(t) for t in key.split(",") if t != "")
            comps[axes] = np.asarray(flat, dtype=float).reshape(
                component_shape(grid, axes)
            )
        holder = data.get("holder")
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed form JSON: {exc}") from exc
    return SampledForm(grid, m, comps, None if holder is None else tuple(holder))


def save_form(form: SampledForm, path) -> None:
    with open(path, "w") as fh:
        json.dump(form_to_json_dict(form), fh)


def load_form(path) -> SampledForm:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid form JSON: {exc}") from exc
    return form_from_json_dict(data)
