"""Truncated maximal-operator fields over rectangle bases.

Two routes compute the same field: a brute accumulation (per shape, direct
repeated-addition window sums and a linear scan over placements) and a
fast one (prefix sums + doubling sliding maximum).  In rational mode both
work on common-denominator integers, so they must agree bit for bit.

Evaluation point is the cell center; since admissible rectangles are
cell-aligned, "contains the center" and "contains the cell" coincide.
Rectangles may overhang the ambient box: the function is extended by zero
and the full rectangle volume stays in the denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .grid import DyadicGrid, GridSet, StepFunction

__all__ = [
    "BasisSpec",
    "MaxField",
    "EmptyFamilyError",
    "enumerate_shapes",
    "max_field_brute",
    "max_field_fast",
    "level_set",
    "dyadic_ladder",
    "geometric_ladder",
    "save_max_field",
]


class EmptyFamilyError(ValueError):
    """No admissible rectangle exists (truncation too tight for the grid)."""


@dataclass(frozen=True)
class BasisSpec:
    """Axis-interval basis with <= k distinct edge lengths, or its rotation.

    kind "axis": members are axis-parallel intervals whose physical edge
    lengths take at most ``k`` distinct values.  kind "rotated" (n = 2):
    members are the same rectangles rotated by ``gamma`` about their own
    center.
    """

    kind: str = "axis"
    k: int = 2
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("axis", "rotated"):
            raise ValueError("kind must be 'axis' or 'rotated'")
        if self.k < 1:
            raise ValueError("k >= 1 required")

    @property
    def is_quarter_turn(self) -> bool:
        q = self.gamma / (math.pi / 2)
        return abs(q - round(q)) < 1e-12

    def describe(self) -> str:
        if self.kind == "axis":
            return f"I^{self.k}"
        return f"I^{self.k}(gamma={self.gamma:.6g})"


@dataclass(frozen=True, eq=False)
class MaxField:
    """Per-cell truncated maximal function values at cell centers."""

    grid: DyadicGrid
    values: np.ndarray
    basis: BasisSpec
    r: object  # truncation radius (Fraction or None for infinity)
    mode: str = "rational"
    # exact int64 payload when available: value = num / (den * scale)
    num: np.ndarray | None = None
    den: np.ndarray | None = None
    scale: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))


def dyadic_ladder(maxw: int) -> list[int]:
    """Widths 1, 2, 4, ... up to maxw."""
    out = []
    w = 1
    while w <= maxw:
        out.append(w)
        w *= 2
    return out


def geometric_ladder(maxw: int, ratio: float = math.sqrt(2)) -> list[int]:
    """Approximately geometric widths up to maxw, always including 1 and maxw."""
    out = {1, maxw}
    w = 1.0
    while w < maxw:
        w *= ratio
        out.add(min(int(round(w)), maxw))
    return sorted(out)


def _radius_sq(r) -> Fraction | None:
    if r is None or r == math.inf:
        return None
    rf = Fraction(r)
    if rf <= 0:
        raise ValueError("truncation radius must be positive")
    return rf * rf


def enumerate_shapes(
    basis: BasisSpec,
    grid: DyadicGrid,
    r=None,
    ladder: Sequence[int] | None = None,
) -> list[tuple[int, ...]]:
    """Admissible rectangle shapes in cells, deduplicated.

    A shape is admissible when its physical edge lengths take at most
    ``basis.k`` distinct values and its Euclidean diameter is < r.  With a
    ``ladder`` only those per-axis widths are sampled (the resulting field
    is then a certified lower bound on the full-family field).
    """
    r2 = _radius_sq(r)
    cell = grid.cell_size
    if ladder is None:
        per_axis = [range(1, s + 1) for s in grid.shape]
    else:
        per_axis = [[w for w in ladder if 1 <= w <= s] for s in grid.shape]
    shapes = []
    for widths in _product(per_axis):
        lengths = tuple(w * c for w, c in zip(widths, cell))
        if len(set(lengths)) > basis.k:
            continue
        if r2 is not None and sum((e * e for e in lengths), Fraction(0)) >= r2:
            continue
        shapes.append(tuple(widths))
    if not shapes:
        raise EmptyFamilyError("no admissible rectangle shape under this truncation")
    return shapes


def _product(axes: Sequence[Iterable[int]]):
    if not axes:
        yield ()
        return
    head, *rest = axes
    for w in head:
        for tail in _product(rest):
            yield (w, *tail)


# ---------------------------------------------------------------------------
# shared low-level pieces


def _prepare_values(f: StepFunction):
    """Returns (array, den, exact) where array is int64/object/float64."""
    if f.mode == "rational":
        ints, den = f.scaled_integers()
        total = float(np.abs(ints.astype(np.float64)).sum())
        maxden = 1
        for s in f.grid.shape:
            maxden *= s
        # float estimate of the worst numerator; the factor-2 headroom
        # (2^61 instead of 2^62) absorbs its rounding error
        if (total * 1.01 + 1) * maxden < float(1 << 61):
            ints = ints.astype(np.int64)
        return ints, den, True
    return f.values.astype(np.float64), 1, False


def _window_sums_fast(arr: np.ndarray, w: int, axis: int) -> np.ndarray:
    """Placement sums via prefix sums; output length N + w - 1 along axis."""
    arr = np.moveaxis(arr, axis, -1)
    n = arr.shape[-1]
    c = np.concatenate(
        [np.zeros(arr.shape[:-1] + (1,), dtype=arr.dtype), np.cumsum(arr, axis=-1)],
        axis=-1,
    )
    # placement a has lo = a-w+1; clipped sum = c[min(a+1,n)] - c[max(a-w+1,0)]
    last = c[..., n:]
    first = c[..., :1]
    hi = np.concatenate([c[..., 1:], np.repeat(last, w - 1, axis=-1)], axis=-1) if w > 1 else c[..., 1:]
    lo = np.concatenate([np.repeat(first, w - 1, axis=-1), c[..., :n]], axis=-1) if w > 1 else c[..., :n]
    out = hi - lo
    return np.moveaxis(out, -1, axis)


def _window_sums_direct(arr: np.ndarray, w: int, axis: int) -> np.ndarray:
    """Placement sums by direct repeated addition (brute route)."""
    arr = np.moveaxis(arr, axis, -1)
    n = arr.shape[-1]
    pad = np.zeros(arr.shape[:-1] + (n + 2 * (w - 1),), dtype=arr.dtype)
    pad[..., w - 1 : w - 1 + n] = arr
    out = np.zeros(arr.shape[:-1] + (n + w - 1,), dtype=arr.dtype)
    for o in range(w):
        out = out + pad[..., o : o + n + w - 1]
    return np.moveaxis(out, -1, axis)


def _sliding_max_fast(arr: np.ndarray, w: int, axis: int) -> np.ndarray:
    """max over arr[i : i+w]; output length L-w+1 along axis."""
    arr = np.moveaxis(arr, axis, -1)
    L = arr.shape[-1]
    if w > 1:
        if arr.dtype == object:
            # sparse-table doubling (dtype-agnostic, exact)
            p = 1 << (w.bit_length() - 1)
            step = 1
            m = arr
            while step < p:
                m = np.maximum(m[..., : m.shape[-1] - step], m[..., step:])
                step *= 2
            arr = np.maximum(m[..., : m.shape[-1] - (w - p)], m[..., w - p :])
        else:
            from scipy.ndimage import maximum_filter1d

            # origin = -(w//2) makes the window for output i equal [i, i+w)
            arr = maximum_filter1d(arr, size=w, axis=-1, origin=-(w // 2), mode="nearest")
            arr = arr[..., : L - w + 1]
    return np.moveaxis(arr, -1, axis)


def _placement_max_direct(arr: np.ndarray, w: int, axis: int) -> np.ndarray:
    """Same reduction as _sliding_max_fast but by a plain linear scan."""
    arr = np.moveaxis(arr, axis, -1)
    L = arr.shape[-1]
    out = arr[..., : L - w + 1].copy()
    for t in range(1, w):
        out = np.maximum(out, arr[..., t : t + L - w + 1])
    return np.moveaxis(out, -1, axis)


def _field_values(best_num, best_den, den, exact):
    if not exact:
        return best_num  # already averages
    flat_num = best_num.ravel()
    flat_den = best_den.ravel()
    if best_num.dtype != object:
        # few distinct (numerator, denominator) pairs ever occur; build the
        # Fractions once per pair and broadcast
        pairs = np.stack([flat_num, flat_den])
        uniq, inverse = np.unique(pairs, axis=1, return_inverse=True)
        table = np.empty(uniq.shape[1], dtype=object)
        table[:] = [Fraction(int(s), int(d) * den) for s, d in zip(*uniq)]
        return table[inverse].reshape(best_num.shape)
    vals = np.empty(flat_num.shape, dtype=object)
    vals[:] = [Fraction(int(s), int(d) * den) for s, d in zip(flat_num, flat_den)]
    return vals.reshape(best_num.shape)


def _accumulate(best_num, best_den, S, d, exact):
    """Pointwise keep the larger average; exact compare is cross-multiplied."""
    if exact:
        better = S * best_den > best_num * d
        best_num = np.where(better, S, best_num)
        best_den = np.where(better, d, best_den)
        return best_num, best_den
    np.maximum(best_num, S / d, out=best_num)
    return best_num, best_den


def _max_field(
    f: StepFunction,
    basis: BasisSpec,
    r,
    ladder,
    window_sums,
    placement_max,
    shapes=None,
) -> MaxField:
    if basis.kind != "axis":
        raise NotImplementedError(
            "direct max fields are axis-basis only; use gridhalo.rotate for rotated bases"
        )
    if shapes is None:
        shapes = enumerate_shapes(basis, f.grid, r, ladder)
    elif not shapes:
        raise EmptyFamilyError("empty explicit shape list")
    arr, den, exact = _prepare_values(f)
    if exact:
        best_num = np.zeros(f.grid.shape, dtype=arr.dtype)
        best_den = np.ones(f.grid.shape, dtype=np.int64 if arr.dtype != object else object)
    else:
        best_num = np.zeros(f.grid.shape)
        best_den = None
    for shape in shapes:
        S = arr
        for ax, w in enumerate(shape):
            S = window_sums(S, w, ax)
        for ax, w in enumerate(shape):
            S = placement_max(S, w, ax)
        d = 1
        for w in shape:
            d *= w
        best_num, best_den = _accumulate(best_num, best_den, S, d, exact)
    values = _field_values(best_num, best_den, den, exact)
    num_arr = den_arr = None
    scale = 1
    if exact and best_num.dtype != object:
        num_arr, den_arr, scale = best_num, best_den, den
    return MaxField(
        f.grid,
        values,
        basis,
        None if r is None else Fraction(r),
        f.mode,
        num=num_arr,
        den=den_arr,
        scale=scale,
    )


def max_field_brute(f: StepFunction, basis: BasisSpec, r=None, ladder=None, shapes=None) -> MaxField:
    """Reference field: direct window accumulation, linear placement scan."""
    return _max_field(f, basis, r, ladder, _window_sums_direct, _placement_max_direct, shapes)


def max_field_fast(f: StepFunction, basis: BasisSpec, r=None, ladder=None, shapes=None) -> MaxField:
    """Prefix-sum window sums + doubling sliding max; contract-identical to brute.

    An explicit ``shapes`` list restricts the family to those cell shapes
    (used to re-verify recorded certificates on refined grids).
    """
    return _max_field(f, basis, r, ladder, _window_sums_fast, _sliding_max_fast, shapes)


def level_set(field: MaxField, lam) -> GridSet:
    """Cells where the field value is strictly greater than lam."""
    if lam < 0:
        raise ValueError("threshold must be >= 0")
    if field.mode == "rational":
        lam = Fraction(lam)
        if field.num is not None:
            # exact cross-multiplied compare; fall back if it could overflow
            p, q = lam.numerator, lam.denominator
            lim = (1 << 62) // max(q, 1)
            if int(np.abs(field.num).max(initial=0)) < lim and p * int(
                field.den.max(initial=1)
            ) * field.scale < (1 << 62):
                mask = field.num * q > field.den * (p * field.scale)
                return GridSet(field.grid, mask)
        mask = np.array([v > lam for v in field.values.ravel()]).reshape(field.grid.shape)
    else:
        mask = field.values > float(lam)
    return GridSet(field.grid, mask)


def save_max_field(field: MaxField, path):
    from .grid import _format_value

    with open(path, "w") as fh:
        r = "inf" if field.r is None else str(field.r)
        fh.write(
            f"basis={field.basis.kind} k={field.basis.k} "
            f"gamma={field.basis.gamma!r} r={r} mode={field.mode}\n"
        )
        fh.write(f"{field.grid.n} " + " ".join(str(m) for m in field.grid.resolution) + "\n")
        for v in field.values.ravel():
            fh.write(_format_value(v) + "\n")
