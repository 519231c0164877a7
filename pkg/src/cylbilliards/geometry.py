"""Billiard tables built from lattice subspaces, and transitivity analysis.

A scatterer is a tubular neighborhood of a translated subtorus: an
integer-spanned generator subspace fixes the axis directions, collisions are
geometrically nontrivial only in the orthocomplement (the base space), and
the axis translates repeat along the projection of the integer lattice into
the base space.

Tables carry tri-state validation flags. Connectedness of the exterior domain
and positivity of the boundary spatial angle are *assumed*, not decided: both
are global conditions the caller must guarantee (see README).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import (
    BaseDimTooSmall,
    BudgetExceeded,
    DependentBasis,
    DimensionMismatch,
    RadiusTooLarge,
    UnknownCylinderIndex,
)
from .lattice import ProjectedLattice, hermite_generating_rows
from .linalg import (
    SPAN_RTOL,
    as_matrix,
    float_rank,
    nullspace,
    orthonormal_basis,
    rational_intersection_dim,
    rational_nullspace,
    rational_rank,
)

# Tri-state validation flags.
HOLDS = "holds"
FAILS = "fails"
UNCHECKED = "unchecked"

# Orthogonality threshold for the non-orthogonality graph; inputs are
# integer-derived, so true orthogonality is exact up to rounding.
GRAPH_TOL = 1e-10

# Work cap for disjointness enumeration before reporting "unchecked".
DISJOINT_BUDGET = 200_000


@dataclass(frozen=True, eq=False)
class LatticeSubspace:
    """Integer-spanned subspace of R^d together with its orthocomplement."""

    ambient_dim: int
    integer_basis: tuple[tuple[int, ...], ...]
    ortho_basis: np.ndarray
    complement_basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.ortho_basis.shape[0]

    @classmethod
    def from_integer_basis(cls, vectors, ambient_dim: int) -> "LatticeSubspace":
        rows = []
        for v in vectors:
            row = tuple(int(x) for x in v)
            if any(float(b) != float(a) for a, b in zip(v, row)):
                raise ValueError(
                    f"non-integer basis vector {tuple(v)}: only subspaces of the "
                    "standard integer lattice are supported"
                )
            if len(row) != ambient_dim:
                raise DimensionMismatch(
                    f"basis vector has length {len(row)}, expected {ambient_dim}"
                )
            rows.append(row)
        if rows:
            rank = rational_rank(rows)
            if rank != len(rows):
                raise DependentBasis("integer basis vectors are dependent over Q")
            mat = as_matrix(rows, ambient_dim)
            _, _, vt = np.linalg.svd(mat)
            ortho = vt[:rank]
            complement = vt[rank:]
        else:
            ortho = np.zeros((0, ambient_dim))
            complement = np.eye(ambient_dim)
        return cls(ambient_dim, tuple(rows), ortho, complement)


def orthocomplement(basis, dim: int) -> np.ndarray:
    """Orthonormal basis (rows) of the orthocomplement of span(basis) in R^d.

    Empty input returns a full orthonormal basis of R^d. Integer input gets
    an exact rank so the returned count is always d - rank.
    """
    mat = as_matrix(basis, dim)
    if mat.shape[0] == 0:
        return np.eye(dim)
    if _is_integral(mat):
        rank = rational_rank(mat.astype(int).tolist())
    else:
        rank = float_rank(mat, rtol=SPAN_RTOL)
    return nullspace(mat, rank=rank)


def _is_integral(mat: np.ndarray) -> bool:
    return bool(np.all(mat == np.rint(mat)))


@dataclass(frozen=True, eq=False)
class Cylinder:
    """One scatterer: generator subspace, base data, translation, radius."""

    generator: LatticeSubspace
    base: LatticeSubspace
    base_dim: int
    translation: np.ndarray
    radius: float
    projected_lattice_basis: np.ndarray
    lattice: ProjectedLattice

    @property
    def ambient_dim(self) -> int:
        return self.generator.ambient_dim

    @property
    def base_basis(self) -> np.ndarray:
        """Orthonormal rows spanning the base space."""
        return self.generator.complement_basis

    @property
    def base_projector(self) -> np.ndarray:
        b = self.base_basis
        return b.T @ b


def build_cylinder(integer_generator_basis, translation, radius: float, dim: int) -> Cylinder:
    """Construct a scatterer from integer axis directions.

    Raises BaseDimTooSmall when fewer than two directions remain transverse to
    the axis, and RadiusTooLarge when the tube would overlap its own lattice
    translates (2r must stay below the shortest nonzero projected-lattice
    vector; the comparison is exact).
    """
    generator = LatticeSubspace.from_integer_basis(integer_generator_basis, dim)
    base_dim = dim - generator.dim
    if base_dim < 2:
        raise BaseDimTooSmall(
            f"base space has dimension {base_dim}; need at least 2"
        )
    if radius <= 0:
        raise ValueError("radius must be positive")
    lattice = ProjectedLattice.from_generator(
        [list(r) for r in generator.integer_basis], dim, generator.complement_basis
    )
    if Fraction(2 * radius) ** 2 >= lattice.shortest_sq:
        raise RadiusTooLarge(
            f"2r = {2 * radius} reaches shortest projected-lattice vector "
            f"{lattice.shortest_norm:.6g}"
        )
    base = _base_subspace(generator)
    translation = np.mod(np.asarray(translation, dtype=float), 1.0)
    if translation.shape != (dim,):
        raise DimensionMismatch("translation length does not match ambient dimension")
    return Cylinder(
        generator=generator,
        base=base,
        base_dim=base_dim,
        translation=translation,
        radius=float(radius),
        projected_lattice_basis=lattice.basis,
        lattice=lattice,
    )


def _base_subspace(generator: LatticeSubspace) -> LatticeSubspace:
    """The base space as a lattice subspace (integer basis from exact nullspace)."""
    d = generator.ambient_dim
    if not generator.integer_basis:
        return LatticeSubspace.from_integer_basis(np.eye(d, dtype=int), d)
    null = rational_nullspace([list(r) for r in generator.integer_basis])
    int_rows = []
    for vec in null:
        denom = 1
        for x in vec:
            denom = denom * x.denominator // math.gcd(denom, x.denominator)
        int_rows.append([int(x * denom) for x in vec])
    int_rows = hermite_generating_rows(int_rows)
    return LatticeSubspace.from_integer_basis(int_rows, d)


@dataclass(frozen=True, eq=False)
class BilliardTable:
    """A torus minus cylindric scatterers, plus validation flags."""

    dim: int
    cylinders: tuple[Cylinder, ...]
    condition_1_3_disjoint: str = UNCHECKED
    condition_1_4_pairwise_base_intersection: bool = False
    transitive: bool = False
    validated: bool = False
    # Interior connectedness and positive spatial angle are assumed, never decided.
    interior_assumptions: str = "assumed"

    def cylinder(self, index: int) -> Cylinder:
        """Cylinder for a 1-based symbolic index."""
        if not 1 <= index <= len(self.cylinders):
            raise UnknownCylinderIndex(f"index {index} outside 1..{len(self.cylinders)}")
        return self.cylinders[index - 1]


def build_table(cylinders) -> BilliardTable:
    cylinders = tuple(cylinders)
    if not cylinders:
        raise ValueError("a table needs at least one cylinder")
    dim = cylinders[0].ambient_dim
    if any(c.ambient_dim != dim for c in cylinders):
        raise DimensionMismatch("cylinders do not share an ambient dimension")
    return BilliardTable(dim=dim, cylinders=cylinders)


@dataclass(frozen=True, eq=False)
class TransitivityReport:
    """Orthogonal-splitting analysis of a system of base spaces."""

    span_dim: int
    generator_intersection_dim: int
    graph_components: tuple[tuple[int, ...], ...]
    onsp_holds: bool
    transitive: bool
    splitting_witness: tuple[np.ndarray, np.ndarray] | None


def transitivity_report(subspaces, dim: int | None = None) -> TransitivityReport:
    """Decide whether the base-space system admits no orthogonal splitting.

    The system is transitive iff the non-orthogonality graph (edge when two
    subspaces are not mutually orthogonal) is connected and the subspaces
    together span R^d. When it is not, a splitting witness (B1, B2) is
    returned: B1 spans one graph component, B2 is its orthocomplement, and
    every subspace lies entirely in one of them.

    Subspace indices in the report are 1-based, matching symbolic sequences.
    """
    bases = []
    int_bases = []
    for sub in subspaces:
        if isinstance(sub, LatticeSubspace):
            bases.append(sub.ortho_basis)
            int_bases.append([list(r) for r in sub.integer_basis])
        else:
            mat = as_matrix(sub, dim)
            bases.append(orthonormal_basis(mat, rtol=SPAN_RTOL))
            int_bases.append(mat.astype(int).tolist() if _is_integral(mat) else None)
    if not bases:
        raise ValueError("need at least one subspace")
    d = bases[0].shape[1] if dim is None else dim
    if any(b.shape[1] != d for b in bases):
        raise DimensionMismatch("subspaces do not share an ambient dimension")
    if any(b.shape[0] == 0 for b in bases):
        raise ValueError("all subspaces must be nonzero")

    k = len(bases)
    adjacency = [[False] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            touching = bool(np.max(np.abs(bases[i] @ bases[j].T)) > GRAPH_TOL)
            adjacency[i][j] = adjacency[j][i] = touching
    components = _connected_components(adjacency)

    stacked = np.vstack(bases)
    if all(ib is not None for ib in int_bases):
        span_dim = rational_rank([row for ib in int_bases for row in ib])
    else:
        span_dim = float_rank(stacked, rtol=SPAN_RTOL)
    onsp = len(components) == 1 and span_dim == d

    witness = None
    if not onsp:
        first = components[0]
        b1 = orthonormal_basis(np.vstack([bases[i - 1] for i in first]), rtol=SPAN_RTOL)
        b2 = nullspace(b1, rtol=SPAN_RTOL)
        witness = (b1, b2)
    return TransitivityReport(
        span_dim=span_dim,
        generator_intersection_dim=d - span_dim,
        graph_components=components,
        onsp_holds=onsp,
        transitive=onsp,
        splitting_witness=witness,
    )


def _connected_components(adjacency: list[list[bool]]) -> tuple[tuple[int, ...], ...]:
    k = len(adjacency)
    seen = [False] * k
    components = []
    for start in range(k):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            node = stack.pop()
            comp.append(node + 1)
            for other in range(k):
                if adjacency[node][other] and not seen[other]:
                    seen[other] = True
                    stack.append(other)
        components.append(tuple(sorted(comp)))
    return tuple(components)


def validate_table(table: BilliardTable, disjoint_budget: int = DISJOINT_BUDGET) -> BilliardTable:
    """Check pairwise base intersections exactly and closure disjointness
    by lattice-translate distance minimization; set the table flags.

    Disjointness of two tubes reduces to the distance between their axis
    subtori: the minimum over integer translates of the translation difference
    projected into the common base intersection. Enumeration beyond the budget
    reports "unchecked".
    """
    cylinders = table.cylinders
    k = len(cylinders)

    cond_1_4 = True
    for i in range(k):
        for j in range(i + 1, k):
            dim_int = rational_intersection_dim(
                [list(r) for r in cylinders[i].base.integer_basis],
                [list(r) for r in cylinders[j].base.integer_basis],
            )
            if dim_int == 0:
                cond_1_4 = False

    disjoint = HOLDS  # vacuous for a single cylinder
    if disjoint_budget <= 0 and k > 1:
        disjoint = UNCHECKED
    else:
        for i in range(k):
            for j in range(i + 1, k):
                verdict = _pair_disjoint(cylinders[i], cylinders[j], disjoint_budget)
                if verdict == FAILS:
                    disjoint = FAILS
                    break
                if verdict == UNCHECKED and disjoint == HOLDS:
                    disjoint = UNCHECKED
            if disjoint == FAILS:
                break

    report = transitivity_report([c.base for c in cylinders])
    return replace(
        table,
        condition_1_3_disjoint=disjoint,
        condition_1_4_pairwise_base_intersection=cond_1_4,
        transitive=report.transitive,
        validated=True,
    )


def _pair_disjoint(a: Cylinder, b: Cylinder, budget: int) -> str:
    d = a.ambient_dim
    gen_rows = [list(r) for r in a.generator.integer_basis] + [
        list(r) for r in b.generator.integer_basis
    ]
    gen_rows = hermite_generating_rows(gen_rows)
    if len(gen_rows) == d:
        # Axis subtori differ by a dense set of translates; closures meet.
        return FAILS
    try:
        lat = ProjectedLattice.from_generator(gen_rows, d)
        target = lat.subspace_onb.T @ lat.to_coords(b.translation - a.translation)
        guess = lat.babai(target)
        bound = float(np.linalg.norm(guess - target)) + 1e-12
        pts = lat.points_in_ball(target, bound, max_points=budget)
    except BudgetExceeded:
        return UNCHECKED
    if pts.shape[0] == 0:
        dist = float(np.linalg.norm(guess - target))
    else:
        dist = float(np.min(np.linalg.norm(pts - target, axis=1)))
    threshold = a.radius + b.radius
    if dist > threshold + 1e-12:
        return HOLDS
    return FAILS


def axis_distance(a: Cylinder, b: Cylinder) -> float:
    """Torus distance between the two axis subtori (0 when they are dense)."""
    d = a.ambient_dim
    gen_rows = hermite_generating_rows(
        [list(r) for r in a.generator.integer_basis]
        + [list(r) for r in b.generator.integer_basis]
    )
    if len(gen_rows) == d:
        return 0.0
    lat = ProjectedLattice.from_generator(gen_rows, d)
    target = lat.subspace_onb.T @ lat.to_coords(b.translation - a.translation)
    _, dist = lat.nearest(target)
    return dist


def hard_sphere_subspaces(n_particles: int, spatial_dim: int, reduced: bool) -> list[LatticeSubspace]:
    """Base spaces of the pair-collision cylinders for n unit-mass spheres.

    Each unordered pair (i, j) contributes the subspace of configuration
    displacements supported on blocks i and j only. With ``reduced=True`` the
    subspaces are first intersected with the zero-total-displacement
    hyperplane, which makes all pairwise intersections trivial.
    """
    if n_particles < 2 or spatial_dim < 2:
        raise ValueError("need at least 2 particles in at least 2 spatial dimensions")
    d = n_particles * spatial_dim
    out = []
    for i in range(n_particles):
        for j in range(i + 1, n_particles):
            rows = []
            if reduced:
                for s in range(spatial_dim):
                    row = [0] * d
                    row[i * spatial_dim + s] = 1
                    row[j * spatial_dim + s] = -1
                    rows.append(row)
            else:
                for block in (i, j):
                    for s in range(spatial_dim):
                        row = [0] * d
                        row[block * spatial_dim + s] = 1
                        rows.append(row)
            out.append(LatticeSubspace.from_integer_basis(rows, d))
    return out
