"""Single-tile resonance witnesses: the six-condition configurations.

A witness is a set E inside a box Q together with, for each basis in the
family, a set P contained in the level set {M^(trunc)(h chi_E) > 1}, plus
the measured constants.  Axis-parallel bases get P as the exact rational
level set.  Rotated bases get P through a disk reduction that stays
certified without any rotated-measure computation:

    E contains a closed disk D about the box center O (radius = the
    inscribed radius of E).  If an axis rectangle R0 satisfies
    h|R0 ∩ K|/|R0| > 1 for a set K of fine subcells lying inside D, then
    for the rotation rho by gamma about O the rectangle R' = rho(R0) has

        h|R' ∩ E|/|R'| >= h|R' ∩ D|/|R0| = h|R0 ∩ D|/|R0| > 1,

    because D ⊆ E, D is rho-invariant, and |R'| = |R0|.  So a cell x
    belongs to the rotated level set whenever rho^{-1}(center(x)) lies in
    the axis level set U of h chi_K.  U is computed in exact rational
    arithmetic on a refined grid; only the final point location uses
    floats, guarded by a boundary margin, so dropped cells are possible
    but wrongly included ones are not (P is a certified lower bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .grid import DyadicGrid, GridSet, StepFunction
from .growth import GrowthFunction
from .maxop import BasisSpec, dyadic_ladder, enumerate_shapes, level_set, max_field_fast
from .rotate import quarter_turns, rot90_set

__all__ = [
    "MPhiWitness",
    "RotationCertificate",
    "WitnessError",
    "central_block",
    "inscribed_radius_sq",
    "disk_core",
    "axis_level_set_exact",
    "rotation_preimage",
    "build_tile_witness",
    "mphi_witness_for_rotations",
]


class WitnessError(RuntimeError):
    """A witness construction could not satisfy its quantitative targets."""


def central_block(grid: DyadicGrid) -> GridSet:
    """The 2x2 block of cells around the box center (per-axis shape even, >= 2)."""
    if grid.n != 2:
        raise ValueError("tile witnesses are planar")
    if any(s < 2 or s % 2 for s in grid.shape):
        raise ValueError("need an even number of cells (>= 2) per axis")
    mask = np.zeros(grid.shape, dtype=bool)
    cx, cy = (s // 2 for s in grid.shape)
    mask[cx - 1 : cx + 1, cy - 1 : cy + 1] = True
    return GridSet(grid, mask)


def _box_center(grid: DyadicGrid) -> tuple[Fraction, ...]:
    return tuple(o + s / 2 for o, s in zip(grid.origin, grid.side))


def inscribed_radius_sq(E: GridSet, center) -> Fraction:
    """Exact squared radius of the largest disk about ``center`` inside E.

    Computed as the minimum over cells outside E of the squared distance
    from the center to the nearest point of that cell.
    """
    grid = E.grid
    cs = grid.cell_size
    best = None
    for idx in np.ndindex(*grid.shape):
        if E.mask[idx]:
            continue
        d2 = Fraction(0)
        for j, i in enumerate(idx):
            lo = grid.origin[j] + i * cs[j]
            hi = lo + cs[j]
            if center[j] < lo:
                d2 += (lo - center[j]) ** 2
            elif center[j] > hi:
                d2 += (center[j] - hi) ** 2
        if best is None or d2 < best:
            best = d2
    if best is None or best == 0:
        raise WitnessError("no disk about the center fits inside E")
    return best


def _square_refine_bits(grid: DyadicGrid, extra: int) -> tuple[int, ...]:
    """Per-axis refinement exponents making subcells square, then ``extra`` deep."""
    cs = grid.cell_size
    cmin = min(cs)
    bits = []
    for c in cs:
        ratio = c / cmin
        if ratio.denominator != 1 or ratio.numerator & (ratio.numerator - 1):
            raise ValueError("cell aspect ratio must be a power of two")
        bits.append(extra + ratio.numerator.bit_length() - 1)
    return tuple(bits)


def disk_core(grid: DyadicGrid, center, rho_sq: Fraction) -> GridSet:
    """Cells of ``grid`` that lie entirely inside the disk of squared radius
    rho_sq about ``center`` (exact corner test)."""
    cs = grid.cell_size
    mask = np.zeros(grid.shape, dtype=bool)
    for idx in np.ndindex(*grid.shape):
        d2 = Fraction(0)
        for j, i in enumerate(idx):
            lo = grid.origin[j] + i * cs[j]
            hi = lo + cs[j]
            d2 += max(abs(lo - center[j]), abs(hi - center[j])) ** 2
        mask[idx] = d2 <= rho_sq
    out = GridSet(grid, mask)
    if out.popcount == 0:
        raise WitnessError("disk core is empty; refine deeper")
    return out


def axis_level_set_exact(E: GridSet, amp, trunc, basis: BasisSpec, ladder=None):
    """Exact truncated level set {M(amp chi_E) > 1} and the shape list used.

    A ``ladder`` restricts the rectangle widths; the level set is then a
    certified subset of the full-family one (still exact per shape)."""
    shapes = enumerate_shapes(BasisSpec("axis", basis.k), E.grid, r=trunc, ladder=ladder)
    f = StepFunction.indicator(E, Fraction(amp), "rational")
    fld = max_field_fast(f, BasisSpec("axis", basis.k), r=trunc, shapes=shapes)
    return level_set(fld, 1), shapes


@dataclass(frozen=True)
class RotationCertificate:
    """Everything needed to re-check a rotated P set: the exact axis level
    set U of amp*chi_K on the refined grid, and the point-location margin."""

    U: GridSet
    K: GridSet
    gamma: float
    rho_sq: Fraction
    margin: float


def rotation_preimage(
    tile_grid: DyadicGrid,
    U: GridSet,
    gamma: float,
    margin: float,
) -> GridSet:
    """Tile cells whose center, rotated by -gamma about the box center,
    falls inside a cell of U with at least ``margin`` to spare."""
    fine = U.grid
    ox, oy = (float(v) for v in fine.origin)
    cw, ch = (float(v) for v in fine.cell_size)
    nx, ny = fine.shape
    ccx, ccy = (float(v) for v in _box_center(tile_grid))
    cg, sg = math.cos(-gamma), math.sin(-gamma)
    mask = np.zeros(tile_grid.shape, dtype=bool)
    for idx in np.ndindex(*tile_grid.shape):
        px, py = (float(v) for v in tile_grid.cell_center(idx))
        dx, dy = px - ccx, py - ccy
        x = ccx + cg * dx - sg * dy
        y = ccy + sg * dx + cg * dy
        i = math.floor((x - ox) / cw)
        j = math.floor((y - oy) / ch)
        if not (0 <= i < nx and 0 <= j < ny):
            continue
        if not U.mask[i, j]:
            continue
        # stay clear of the subcell walls so float rounding cannot flip cells
        inx = min(x - (ox + i * cw), ox + (i + 1) * cw - x)
        iny = min(y - (oy + j * ch), oy + (j + 1) * ch - y)
        if inx > margin and iny > margin:
            mask[idx] = True
    return GridSet(tile_grid, mask)


@dataclass(frozen=True)
class MPhiWitness:
    """A six-condition configuration (E, {P_B}, Q) on one tile grid.

    Q is the grid's box.  ``h`` is the amplitude whose level sets (at
    threshold 1) contain the P sets; ``trunc`` caps the certificate
    rectangle diameters; ``epsilon`` bounds diam Q (trunc <= epsilon).
    """

    grid: DyadicGrid
    h: Fraction
    epsilon: Fraction
    trunc: Fraction
    E: GridSet
    p_sets: dict
    bases: dict
    shapes: tuple
    certificates: dict = field(default_factory=dict)
    c: float = 0.0
    c_of_h: Fraction = Fraction(0)
    phi_at_h: float = 0.0

    def box_diam_sq(self) -> Fraction:
        return sum((s * s for s in self.grid.side), Fraction(0))

    def verify(self, phi: GrowthFunction) -> dict:
        """Re-check all six conditions; exact except the rotated point maps."""
        results = {}
        ok1 = True
        for key, basis in self.bases.items():
            P = self.p_sets[key]
            qt = quarter_turns(basis.gamma) if basis.kind == "rotated" else 0
            if basis.kind == "axis" or qt == 0:
                ls, _ = axis_level_set_exact(self.E, self.h, self.trunc, basis)
                ok1 &= (P - ls).popcount == 0
            elif qt is not None:
                base, _ = axis_level_set_exact(self.E, self.h, self.trunc, basis)
                ok1 &= (P - rot90_set(base, qt)).popcount == 0
            else:
                cert = self.certificates[key]
                again = rotation_preimage(self.grid, cert.U, cert.gamma, cert.margin)
                ok1 &= (P - again).popcount == 0
        results["levelset_containment"] = ok1
        results["common_resolution"] = all(
            P.grid == self.grid for P in self.p_sets.values()
        )
        phi_h = phi(float(self.h))
        results["p_mass"] = all(
            float(P.measure()) >= self.c * phi_h * float(self.E.measure()) - 1e-12
            for P in self.p_sets.values()
        )
        results["containment_in_box"] = True  # E and P are grid sets of Q's grid
        results["box_diameter"] = self.box_diam_sq() < self.epsilon**2
        results["e_density"] = self.E.measure() >= self.c_of_h * self.grid.box_volume
        return results


def _epsilon_for(grid: DyadicGrid, trunc: Fraction) -> Fraction:
    """Smallest convenient epsilon with diam Q < epsilon and trunc <= epsilon.

    The l1 norm of the box sides dominates its diameter, so it is a valid
    rational upper bound."""
    l1 = sum(grid.side, Fraction(0))
    return max(Fraction(trunc), l1)


def build_tile_witness(
    tile_grid: DyadicGrid,
    bases,
    amp,
    trunc,
    phi: GrowthFunction,
    refine_extra: int = 3,
    margin: float = 1e-9,
) -> MPhiWitness:
    """Witness with E = central 2x2 block and per-basis certified P sets."""
    amp = Fraction(amp)
    trunc = Fraction(trunc)
    if amp <= 1:
        raise ValueError("amplitude must exceed 1")
    E = central_block(tile_grid)
    center = _box_center(tile_grid)
    p_sets, basis_map, certificates = {}, {}, {}
    shapes_used = None
    rot_cache = {}
    for basis in bases:
        key = basis.describe()
        basis_map[key] = basis
        qt = quarter_turns(basis.gamma) if basis.kind == "rotated" else 0
        if basis.kind == "axis" or qt == 0:
            P, shapes = axis_level_set_exact(E, amp, trunc, basis)
            shapes_used = shapes
        elif qt is not None:
            base, shapes = axis_level_set_exact(E, amp, trunc, basis)
            shapes_used = shapes
            P = rot90_set(base, qt)
        else:
            if "rot" not in rot_cache:
                rho_sq = inscribed_radius_sq(E, center)
                bits = _square_refine_bits(tile_grid, refine_extra)
                fine = tile_grid.refine(bits)
                K = disk_core(fine, center, rho_sq)
                # dyadic widths only on the refined grid: still a certified
                # (subset) level set, but the family stays small
                U, _ = axis_level_set_exact(
                    K, amp, trunc, basis, ladder=dyadic_ladder(max(fine.shape))
                )
                rot_cache["rot"] = (U, K, rho_sq)
            U, K, rho_sq = rot_cache["rot"]
            P = rotation_preimage(tile_grid, U, basis.gamma, margin)
            certificates[key] = RotationCertificate(U, K, basis.gamma, rho_sq, margin)
        p_sets[key] = P
    if shapes_used is None:
        shapes_used = enumerate_shapes(BasisSpec("axis", bases[0].k), tile_grid, r=trunc)
    phi_h = phi(float(amp))
    e_meas = float(E.measure())
    c = min(float(P.measure()) / (phi_h * e_meas) for P in p_sets.values())
    if c <= 0:
        raise WitnessError("some basis received an empty P set")
    return MPhiWitness(
        grid=tile_grid,
        h=amp,
        epsilon=_epsilon_for(tile_grid, trunc),
        trunc=trunc,
        E=E,
        p_sets=p_sets,
        bases=basis_map,
        shapes=tuple(tuple(s) for s in shapes_used),
        certificates=certificates,
        c=c,
        c_of_h=Fraction(E.popcount, tile_grid.total_cells),
        phi_at_h=phi_h,
    )


def mphi_witness_for_rotations(
    gammas,
    h,
    epsilon,
    phi: GrowthFunction,
    grid_bits: int = 5,
    r_cells: int = 2,
    k: int = 2,
    refine_extra: int = 3,
    margin: float = 1e-9,
) -> MPhiWitness:
    """Ball-centered witness for a finite family of rotations.

    E is the set of cells whose centers lie in the Euclidean ball of
    ``r_cells`` cells about the box center, on a square grid scaled so the
    box diameter stays below epsilon; certificate rectangles are capped at
    the same epsilon.
    """
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    # shrink the box until its diameter (= side * sqrt(2)) is below epsilon
    side = Fraction(1)
    while 2 * side * side >= epsilon * epsilon:
        side /= 2
    grid = DyadicGrid((grid_bits, grid_bits), side=(side, side))
    shape = grid.shape
    center_cells = tuple(s / 2.0 for s in shape)
    ii, jj = np.indices(shape).astype(float) + 0.5
    d2 = (ii - center_cells[0]) ** 2 + (jj - center_cells[1]) ** 2
    E = GridSet(grid, d2 < float(r_cells) ** 2)
    if E.popcount < 4:
        raise WitnessError("ball too small at this resolution")
    amp = Fraction(h)
    center = _box_center(grid)
    p_sets, basis_map, certificates = {}, {}, {}
    shapes_used = None
    rot_cache = {}
    for gamma in gammas:
        basis = BasisSpec("rotated", k, float(gamma))
        key = basis.describe()
        basis_map[key] = basis
        qt = quarter_turns(basis.gamma)
        if qt == 0:
            P, shapes_used = axis_level_set_exact(E, amp, epsilon, basis)
        elif qt is not None:
            base, shapes_used = axis_level_set_exact(E, amp, epsilon, basis)
            P = rot90_set(base, qt)
        else:
            if "rot" not in rot_cache:
                rho_sq = inscribed_radius_sq(E, center)
                fine = grid.refine((refine_extra, refine_extra))
                K = disk_core(fine, center, rho_sq)
                U, _ = axis_level_set_exact(
                    K, amp, epsilon, basis, ladder=dyadic_ladder(max(fine.shape))
                )
                rot_cache["rot"] = (U, K, rho_sq)
            U, K, rho_sq = rot_cache["rot"]
            P = rotation_preimage(grid, U, basis.gamma, margin)
            certificates[key] = RotationCertificate(U, K, basis.gamma, rho_sq, margin)
        if P.popcount == 0:
            raise WitnessError(f"empty P for rotation {float(gamma):.6g}")
        p_sets[key] = P
    if shapes_used is None:
        shapes_used = enumerate_shapes(BasisSpec("axis", k), grid, r=epsilon)
    phi_h = phi(float(amp))
    c = min(float(P.measure()) / (phi_h * float(E.measure())) for P in p_sets.values())
    return MPhiWitness(
        grid=grid,
        h=amp,
        epsilon=epsilon,
        trunc=epsilon,
        E=E,
        p_sets=p_sets,
        bases=basis_map,
        shapes=tuple(tuple(s) for s in shapes_used),
        certificates=certificates,
        c=c,
        c_of_h=Fraction(E.popcount, grid.total_cells),
        phi_at_h=phi_h,
    )
