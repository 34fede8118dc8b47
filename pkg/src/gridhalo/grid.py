"""Dyadic grids, exact-measure cell sets, step functions, prefix sums.

Everything here is measure bookkeeping for unions of dyadic cells.  Cell
counts are integers, cell volumes are exact rationals, so all measures and
distribution identities can be checked with zero tolerance.  Function
values may be rationals ("rational" mode) or doubles ("double" mode); set
arithmetic never depends on the value mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DyadicGrid",
    "GridSet",
    "StepFunction",
    "AxisRect",
    "IntegralImage",
    "GridMismatchError",
    "ResolutionMismatchError",
    "uniform_distribution_check",
    "save_step_function",
    "load_step_function",
    "save_grid_set",
    "load_grid_set",
]


class GridMismatchError(ValueError):
    """Two operands live on different grids."""


class ResolutionMismatchError(ValueError):
    """A coarse resolution does not divide the fine one."""


def _as_fraction_tuple(values: Sequence) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in values)


@dataclass(frozen=True)
class DyadicGrid:
    """A dyadic partition of an axis-aligned box.

    ``resolution[j]`` is the per-axis exponent: the box is split into
    ``2**resolution[j]`` cells along axis ``j``.  The default box is the
    unit cube.
    """

    resolution: tuple[int, ...]
    origin: tuple[Fraction, ...] = None  # type: ignore[assignment]
    side: tuple[Fraction, ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        res = tuple(int(m) for m in self.resolution)
        if not res or any(m < 0 for m in res):
            raise ValueError("resolution exponents must be non-negative")
        object.__setattr__(self, "resolution", res)
        n = len(res)
        origin = self.origin if self.origin is not None else (Fraction(0),) * n
        side = self.side if self.side is not None else (Fraction(1),) * n
        origin = _as_fraction_tuple(origin)
        side = _as_fraction_tuple(side)
        if len(origin) != n or len(side) != n:
            raise ValueError("origin/side dimension mismatch")
        if any(s <= 0 for s in side):
            raise ValueError("box side lengths must be positive")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "side", side)

    @property
    def n(self) -> int:
        return len(self.resolution)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(1 << m for m in self.resolution)

    @property
    def total_cells(self) -> int:
        return int(np.prod([1 << m for m in self.resolution], dtype=object))

    @property
    def cell_size(self) -> tuple[Fraction, ...]:
        return tuple(s / (1 << m) for s, m in zip(self.side, self.resolution))

    @property
    def cell_volume(self) -> Fraction:
        v = Fraction(1)
        for c in self.cell_size:
            v *= c
        return v

    @property
    def box_volume(self) -> Fraction:
        v = Fraction(1)
        for s in self.side:
            v *= s
        return v

    def cell_center(self, index: Sequence[int]) -> tuple[Fraction, ...]:
        cs = self.cell_size
        return tuple(o + (2 * i + 1) * c / 2 for o, i, c in zip(self.origin, index, cs))

    def refine(self, extra: Sequence[int]) -> "DyadicGrid":
        if len(extra) != self.n or any(e < 0 for e in extra):
            raise ValueError("bad refinement vector")
        return DyadicGrid(
            tuple(m + e for m, e in zip(self.resolution, extra)),
            self.origin,
            self.side,
        )


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridSet:
    """A union of grid cells, stored as a boolean mask."""

    grid: DyadicGrid
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise ValueError("mask shape does not match grid")
        object.__setattr__(self, "mask", _frozen(mask.copy()))

    @classmethod
    def empty(cls, grid: DyadicGrid) -> "GridSet":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def full(cls, grid: DyadicGrid) -> "GridSet":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def from_indices(cls, grid: DyadicGrid, indices: Iterable[Sequence[int]]) -> "GridSet":
        mask = np.zeros(grid.shape, dtype=bool)
        for idx in indices:
            mask[tuple(idx)] = True
        return cls(grid, mask)

    @property
    def popcount(self) -> int:
        return int(self.mask.sum())

    def measure(self) -> Fraction:
        return self.popcount * self.grid.cell_volume

    def relative_measure(self) -> Fraction:
        return Fraction(self.popcount, self.grid.total_cells)

    def _require_same_grid(self, other: "GridSet"):
        if self.grid != other.grid:
            raise GridMismatchError("operands live on different grids")

    def intersection(self, other: "GridSet") -> "GridSet":
        self._require_same_grid(other)
        return GridSet(self.grid, self.mask & other.mask)

    def union(self, other: "GridSet") -> "GridSet":
        self._require_same_grid(other)
        return GridSet(self.grid, self.mask | other.mask)

    def difference(self, other: "GridSet") -> "GridSet":
        self._require_same_grid(other)
        return GridSet(self.grid, self.mask & ~other.mask)

    def complement(self) -> "GridSet":
        return GridSet(self.grid, ~self.mask)

    __and__ = intersection
    __or__ = union
    __sub__ = difference

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSet):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self):
        return hash((self.grid, self.mask.tobytes()))

    def refine(self, extra: Sequence[int]) -> "GridSet":
        """Re-represent on a finer grid; measure is preserved exactly."""
        mask = self.mask
        for ax, e in enumerate(extra):
            if e:
                mask = np.repeat(mask, 1 << e, axis=ax)
        return GridSet(self.grid.refine(extra), mask)


def measure(s: GridSet) -> Fraction:
    return s.measure()


def _coarse_counts(mask: np.ndarray, fine_res: Sequence[int], coarse_res: Sequence[int]) -> np.ndarray:
    """Per-coarse-cell popcounts via block reshaping."""
    blocks = []
    newshape = []
    for m, c in zip(fine_res, coarse_res):
        if c > m:
            raise ResolutionMismatchError("coarse resolution exceeds grid resolution")
        newshape.extend([1 << c, 1 << (m - c)])
    counts = mask.astype(np.int64).reshape(newshape)
    # sum out every second (intra-block) axis
    for ax in reversed(range(1, 2 * len(fine_res), 2)):
        counts = counts.sum(axis=ax)
    return counts


def uniform_distribution_check(s: GridSet, m: Sequence[int]) -> bool:
    """Exact check of ``|P ∩ Q| = |P| |Q|`` over every coarse cell Q.

    Measures are normalized to the ambient box, so in cell counts the
    identity reads ``count_Q * total = count * cells_per_Q * n_coarse`` --
    equivalently every coarse cell holds the same count.
    """
    m = tuple(int(x) for x in m)
    if len(m) != s.grid.n:
        raise ResolutionMismatchError("dimension mismatch")
    counts = _coarse_counts(s.mask, s.grid.resolution, m)
    total = s.popcount
    n_coarse = int(np.prod([1 << c for c in m], dtype=object))
    # |P∩Q|·(#coarse cells) == |P| for every Q, all in exact integers
    return bool(np.all(counts * n_coarse == total))


@dataclass(frozen=True, eq=False)
class StepFunction:
    """A nonnegative cell-constant function on a dyadic grid.

    ``mode`` is "rational" (Fraction values, exact integrals) or "double".
    """

    grid: DyadicGrid
    values: np.ndarray
    mode: str = "rational"

    def __post_init__(self):
        if self.mode not in ("rational", "double"):
            raise ValueError("mode must be 'rational' or 'double'")
        if self.mode == "rational":
            vals = np.empty(self.grid.shape, dtype=object)
            src = np.asarray(self.values, dtype=object)
            if src.shape != self.grid.shape:
                raise ValueError("values shape does not match grid")
            flat = [v if type(v) is Fraction else Fraction(v) for v in src.ravel()]
            if any(v.numerator < 0 for v in flat):
                raise ValueError("step functions are nonnegative")
            vals.ravel()[:] = flat
        else:
            vals = np.asarray(self.values, dtype=np.float64).copy()
            if vals.shape != self.grid.shape:
                raise ValueError("values shape does not match grid")
            if np.any(vals < 0):
                raise ValueError("step functions are nonnegative")
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def indicator(cls, s: GridSet, height=1, mode: str = "rational") -> "StepFunction":
        if mode == "rational":
            vals = np.where(s.mask, Fraction(height), Fraction(0))
        else:
            vals = np.where(s.mask, float(height), 0.0)
        return cls(s.grid, vals, mode)

    @classmethod
    def zeros(cls, grid: DyadicGrid, mode: str = "rational") -> "StepFunction":
        if mode == "rational":
            return cls(grid, np.full(grid.shape, Fraction(0), dtype=object), mode)
        return cls(grid, np.zeros(grid.shape), mode)

    def integral(self):
        cv = self.grid.cell_volume
        if self.mode == "rational":
            return sum(self.values.ravel(), Fraction(0)) * cv
        return float(self.values.sum()) * float(cv)

    def support(self) -> GridSet:
        if self.mode == "rational":
            mask = np.array([v != 0 for v in self.values.ravel()]).reshape(self.grid.shape)
        else:
            mask = self.values != 0
        return GridSet(self.grid, mask)

    def scale(self, c) -> "StepFunction":
        if self.mode == "rational":
            c = Fraction(c)
            vals = np.array([v * c for v in self.values.ravel()], dtype=object).reshape(self.grid.shape)
        else:
            vals = self.values * float(c)
        return StepFunction(self.grid, vals, self.mode)

    def refine(self, extra: Sequence[int]) -> "StepFunction":
        vals = self.values
        for ax, e in enumerate(extra):
            if e:
                vals = np.repeat(vals, 1 << e, axis=ax)
        return StepFunction(self.grid.refine(extra), vals, self.mode)

    def scaled_integers(self) -> tuple[np.ndarray, int]:
        """Rational values as ``ints / D`` with one common denominator D."""
        if self.mode != "rational":
            raise ValueError("only meaningful in rational mode")
        flat = self.values.ravel()
        # step functions typically share value objects across many cells;
        # working per distinct object keeps this linear with a tiny constant
        by_id = {}
        for v in flat:
            by_id.setdefault(id(v), v)
        d = 1
        for v in by_id.values():
            q = v.denominator
            d = d * q // math.gcd(d, q)
        scaled = {i: int(v.numerator * (d // v.denominator)) for i, v in by_id.items()}
        ints = np.array([scaled[id(v)] for v in flat], dtype=object).reshape(
            self.grid.shape
        )
        return ints, d


@dataclass(frozen=True)
class AxisRect:
    """Half-open per-axis cell index ranges ``[lo_j, hi_j)``.

    Indices may run outside the grid: rectangles are allowed to overhang
    the ambient box (the function is extended by zero there).
    """

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("need lo_j < hi_j on every axis")
        object.__setattr__(self, "lo", tuple(int(x) for x in self.lo))
        object.__setattr__(self, "hi", tuple(int(x) for x in self.hi))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def cell_count(self) -> int:
        c = 1
        for w in self.shape:
            c *= w
        return c

    def edge_lengths(self, grid: DyadicGrid) -> tuple[Fraction, ...]:
        return tuple(w * c for w, c in zip(self.shape, grid.cell_size))

    def volume(self, grid: DyadicGrid) -> Fraction:
        v = Fraction(1)
        for e in self.edge_lengths(grid):
            v *= e
        return v

    def diameter_sq(self, grid: DyadicGrid) -> Fraction:
        return sum((e * e for e in self.edge_lengths(grid)), Fraction(0))

    def contains_index(self, index: Sequence[int]) -> bool:
        return all(a <= i < b for a, i, b in zip(self.lo, index, self.hi))


class IntegralImage:
    """Prefix sums of a step function; any axis rect sum in 2^n lookups.

    Rational mode keeps scaled integers, so rectangle sums are exact.
    """

    def __init__(self, f: StepFunction):
        self.grid = f.grid
        self.mode = f.mode
        if f.mode == "rational":
            ints, den = f.scaled_integers()
            self.den = den
            flat = ints
            hi = max((abs(int(v)) for v in ints.ravel()), default=0)
            # stay in int64 whenever the full-grid sum cannot overflow
            if hi * f.grid.total_cells < (1 << 62):
                flat = ints.astype(np.int64)
            self._prefix = self._build(flat)
        else:
            self.den = 1
            self._prefix = self._build(f.values.astype(np.float64))

    @staticmethod
    def _build(vals: np.ndarray) -> np.ndarray:
        p = vals
        for ax in range(vals.ndim):
            p = np.cumsum(p, axis=ax)
        padded = np.zeros(tuple(s + 1 for s in p.shape), dtype=p.dtype)
        padded[(slice(1, None),) * p.ndim] = p
        return padded

    def rect_sum_scaled(self, rect: AxisRect):
        """Sum of the underlying (scaled-integer or float) values over rect∩grid."""
        shape = self.grid.shape
        lo = [min(max(a, 0), s) for a, s in zip(rect.lo, shape)]
        hi = [min(max(b, 0), s) for b, s in zip(rect.hi, shape)]
        if any(a >= b for a, b in zip(lo, hi)):
            return self._prefix.dtype.type(0) if self._prefix.dtype != object else 0
        total = 0
        n = self.grid.n
        for corner in range(1 << n):
            idx = []
            sign = 1
            for j in range(n):
                if corner >> j & 1:
                    idx.append(lo[j])
                    sign = -sign
                else:
                    idx.append(hi[j])
            total = total + sign * self._prefix[tuple(idx)]
        return total

    def rect_sum(self, rect: AxisRect):
        """Integral of f over rect∩grid (not the average)."""
        s = self.rect_sum_scaled(rect)
        cv = self.grid.cell_volume
        if self.mode == "rational":
            return Fraction(int(s), self.den) * cv
        return float(s) * float(cv)


def integral_image(f: StepFunction) -> IntegralImage:
    return IntegralImage(f)


# ---------------------------------------------------------------------------
# plain-text serialization: "n m_1 ... m_n" header then row-major values


def _format_value(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
    return repr(float(v))


def _parse_value(tok: str):
    if "/" in tok:
        p, q = tok.split("/")
        return Fraction(int(p), int(q))
    if any(c in tok for c in ".eE"):
        return float(tok)
    return Fraction(int(tok))


def save_step_function(f: StepFunction, path):
    with open(path, "w") as fh:
        fh.write(f"{f.grid.n} " + " ".join(str(m) for m in f.grid.resolution) + "\n")
        for v in f.values.ravel():
            fh.write(_format_value(v) + "\n")


def load_step_function(path, mode: str = "rational") -> StepFunction:
    with open(path) as fh:
        header = fh.readline().split()
        n = int(header[0])
        res = tuple(int(x) for x in header[1 : 1 + n])
        grid = DyadicGrid(res)
        toks = fh.read().split()
    vals = [_parse_value(t) for t in toks]
    if len(vals) != grid.total_cells:
        raise ValueError("value count does not match grid")
    if mode == "rational":
        arr = np.array([Fraction(v) for v in vals], dtype=object).reshape(grid.shape)
    else:
        arr = np.array([float(v) for v in vals]).reshape(grid.shape)
    return StepFunction(grid, arr, mode)


def save_grid_set(s: GridSet, path):
    with open(path, "w") as fh:
        fh.write(f"{s.grid.n} " + " ".join(str(m) for m in s.grid.resolution) + "\n")
        for v in s.mask.ravel():
            fh.write(("1" if v else "0") + "\n")


def load_grid_set(path) -> GridSet:
    with open(path) as fh:
        header = fh.readline().split()
        n = int(header[0])
        res = tuple(int(x) for x in header[1 : 1 + n])
        grid = DyadicGrid(res)
        toks = fh.read().split()
    mask = np.array([t == "1" for t in toks]).reshape(grid.shape)
    return GridSet(grid, mask)
