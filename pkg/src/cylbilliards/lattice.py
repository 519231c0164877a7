"""Projected-lattice machinery: P_L(Z^d) as a discrete lattice inside a subspace.

Construction is exact: the orthogonal projection along an integer-spanned
generator subspace is a rational matrix, so the projected lattice has rational
generators. A Hermite-style row reduction extracts a rank-m generating set,
LLL reduction shortens it, and the shortest nonzero vector is found by exact
enumeration over the rational Gram data. Only after that does anything get
converted to floating point (Babai rounding and ball enumeration for the
flight loop).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded
from .linalg import rational_nullspace, rational_rref, to_fractions


def hermite_generating_rows(mat: list[list[int]]) -> list[list[int]]:
    """Unimodular row reduction of an integer matrix to its nonzero rows.

    The returned rows generate the same Z-row-lattice as the input and are
    linearly independent.
    """
    m = [[int(x) for x in row] for row in mat]
    if not m:
        return []
    rows, cols = len(m), len(m[0])
    r = 0
    for c in range(cols):
        if r == rows:
            break
        while True:
            nonzero = [i for i in range(r, rows) if m[i][c] != 0]
            if not nonzero:
                break
            i_min = min(nonzero, key=lambda i: abs(m[i][c]))
            m[r], m[i_min] = m[i_min], m[r]
            done = True
            for i in range(r + 1, rows):
                if m[i][c] != 0:
                    q = round(m[i][c] / m[r][c])
                    if q:
                        m[i] = [a - q * b for a, b in zip(m[i], m[r])]
                    if m[i][c] != 0:
                        done = False
            if done:
                break
        if m[r][c] != 0:
            r += 1
    return [row for row in m if any(x != 0 for x in row)]


def _gram_schmidt(basis: list[list[Fraction]]):
    """Exact Gram-Schmidt: orthogonal vectors, coefficients mu, squared norms."""
    n = len(basis)
    ortho = [row[:] for row in basis]
    mu = [[Fraction(0)] * n for _ in range(n)]
    norms_sq = [Fraction(0)] * n
    for i in range(n):
        vec = basis[i][:]
        for j in range(i):
            if norms_sq[j] == 0:
                continue
            mu[i][j] = _dot(basis[i], ortho[j]) / norms_sq[j]
            vec = [a - mu[i][j] * b for a, b in zip(vec, ortho[j])]
        ortho[i] = vec
        norms_sq[i] = _dot(vec, vec)
    return ortho, mu, norms_sq


def _dot(a, b) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def lll_reduce(basis: list[list[Fraction]], delta: Fraction = Fraction(3, 4)) -> list[list[Fraction]]:
    """Exact LLL reduction of independent rational basis rows."""
    b = [row[:] for row in basis]
    n = len(b)
    if n <= 1:
        return b
    ortho, mu, norms = _gram_schmidt(b)
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                b[k] = [a - q * c for a, c in zip(b[k], b[j])]
                ortho, mu, norms = _gram_schmidt(b)
        if norms[k] >= (delta - mu[k][k - 1] ** 2) * norms[k - 1]:
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            ortho, mu, norms = _gram_schmidt(b)
            k = max(k - 1, 1)
    return b


def shortest_vector_sq(basis: list[list[Fraction]]) -> tuple[list[Fraction], Fraction]:
    """Shortest nonzero lattice vector by exact enumeration on a reduced basis."""
    reduced = lll_reduce(basis)
    _, mu, norms = _gram_schmidt(reduced)
    n = len(reduced)
    best_sq = min(_dot(row, row) for row in reduced)
    best_coeff = None

    def recurse(level: int, coeffs: list[int], partial: Fraction, centers: list[Fraction]):
        nonlocal best_sq, best_coeff
        if level < 0:
            if any(coeffs) and partial < best_sq:
                best_sq = partial
                best_coeff = coeffs[:]
            return
        if norms[level] == 0:
            return
        center = -centers[level]
        # |c - center|^2 * norms[level] <= best_sq - partial
        bound = (best_sq - partial) / norms[level]
        half_width = _isqrt_upper(bound)
        c = _ceil_frac(center - half_width)
        while Fraction(c) <= center + half_width:
            diff = Fraction(c) - center
            new_partial = partial + diff * diff * norms[level]
            if new_partial <= best_sq:
                coeffs[level] = c
                new_centers = centers[:]
                for j in range(level):
                    new_centers[j] = centers[j] + Fraction(c) * mu[level][j]
                recurse(level - 1, coeffs, new_partial, new_centers)
                coeffs[level] = 0
            c += 1

    recurse(n - 1, [0] * n, Fraction(0), [Fraction(0)] * n)
    if best_coeff is None:
        idx = min(range(n), key=lambda i: _dot(reduced[i], reduced[i]))
        best_coeff = [int(i == idx) for i in range(n)]
        best_sq = _dot(reduced[idx], reduced[idx])
    vec = [Fraction(0)] * len(reduced[0])
    for c, row in zip(best_coeff, reduced):
        vec = [a + c * x for a, x in zip(vec, row)]
    return vec, best_sq


def _isqrt_upper(x: Fraction) -> Fraction:
    """A rational upper bound on sqrt(x) for x >= 0."""
    if x <= 0:
        return Fraction(0)
    approx = float(x) ** 0.5
    bound = Fraction(approx).limit_denominator(1 << 30) + Fraction(1, 1 << 20)
    while bound * bound < x:
        bound *= 2
    return bound


def _ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


class ProjectedLattice:
    """P_L(Z^d) with a reduced basis, exact shortest vector, and enumeration."""

    def __init__(self, basis_rational: list[list[Fraction]], subspace_onb: np.ndarray):
        self.rank = len(basis_rational)
        self.ambient_dim = subspace_onb.shape[1]
        self.basis_rational = tuple(tuple(row) for row in basis_rational)
        self.basis = np.array([[float(x) for x in row] for row in basis_rational], dtype=float)
        self.subspace_onb = np.asarray(subspace_onb, dtype=float)
        if self.subspace_onb.shape[0] != self.rank:
            raise ValueError("subspace basis rank does not match lattice rank")
        _, self.shortest_sq = shortest_vector_sq([list(r) for r in basis_rational])
        self.shortest_norm = float(self.shortest_sq) ** 0.5
        # Lattice basis expressed in subspace coordinates (rows), plus GS data
        # for Fincke-Pohst enumeration.
        self._coord_basis = self.basis @ self.subspace_onb.T
        self._coord_inv = np.linalg.inv(self._coord_basis)
        self._gs_ortho, self._gs_mu = self._float_gram_schmidt(self._coord_basis)
        self._gs_norms_sq = np.array([float(v @ v) for v in self._gs_ortho])
        # Babai rounding error never exceeds half the sum of basis lengths.
        self.babai_bound = 0.5 * float(np.sum(np.linalg.norm(self.basis, axis=1)))

    @staticmethod
    def _float_gram_schmidt(rows: np.ndarray):
        n = rows.shape[0]
        ortho = rows.astype(float).copy()
        mu = np.zeros((n, n))
        for i in range(n):
            for j in range(i):
                denom = ortho[j] @ ortho[j]
                mu[i, j] = (rows[i] @ ortho[j]) / denom
                ortho[i] = ortho[i] - mu[i, j] * ortho[j]
        return ortho, mu

    @classmethod
    def from_generator(cls, generator_rows: list[list[int]], dim: int,
                       subspace_onb: np.ndarray | None = None) -> "ProjectedLattice":
        """Lattice P_L(Z^d) for L = (span of integer generator rows)^perp."""
        from .linalg import fractions_to_float, orthonormal_basis

        gens = hermite_generating_rows([[int(x) for x in row] for row in generator_rows])
        if not gens:
            basis = [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
            onb = np.eye(dim) if subspace_onb is None else subspace_onb
            return cls(basis, onb)
        b = to_fractions(gens)
        k = len(b)
        gram = [[_dot(b[i], b[j]) for j in range(k)] for i in range(k)]
        gram_inv = _rational_inverse(gram)
        # P_L = I - B^T (B B^T)^-1 B, columns are rational generators of the lattice.
        proj_cols: list[list[Fraction]] = []
        for e in range(dim):
            col_b = [b[i][e] for i in range(k)]
            coef = [_dot(gram_inv[i], col_b) for i in range(k)]
            col = [Fraction(int(e == j)) - sum(coef[i] * b[i][j] for i in range(k))
                   for j in range(dim)]
            proj_cols.append(col)
        sub_basis = rational_nullspace(gens)
        m = len(sub_basis)
        # Coordinates of every generator w.r.t. the rational subspace basis.
        sub_gram = [[_dot(sub_basis[i], sub_basis[j]) for j in range(m)] for i in range(m)]
        sub_inv = _rational_inverse(sub_gram)
        coords = []
        for col in proj_cols:
            rhs = [_dot(sub_basis[i], col) for i in range(m)]
            coords.append([_dot(sub_inv[i], rhs) for i in range(m)])
        denom = 1
        for row in coords:
            for x in row:
                denom = denom * x.denominator // _gcd(denom, x.denominator)
        int_rows = [[int(x * denom) for x in row] for row in coords]
        reduced_rows = hermite_generating_rows(int_rows)
        ambient = []
        for row in reduced_rows:
            vec = [Fraction(0)] * dim
            for c, sub in zip(row, sub_basis):
                if c:
                    vec = [a + Fraction(c, denom) * s for a, s in zip(vec, sub)]
            ambient.append(vec)
        ambient = lll_reduce(ambient)
        if subspace_onb is None:
            subspace_onb = orthonormal_basis(fractions_to_float(sub_basis), rank=m)
        return cls(ambient, subspace_onb)

    def to_coords(self, vec: np.ndarray) -> np.ndarray:
        return self.subspace_onb @ np.asarray(vec, dtype=float)

    def babai(self, target: np.ndarray) -> np.ndarray:
        """Lattice point near ``target`` by coordinate rounding."""
        y = self.to_coords(target)
        c = np.rint(y @ self._coord_inv)
        return c @ self.basis

    def points_in_ball(self, center: np.ndarray, radius: float,
                       max_points: int | None = None) -> np.ndarray:
        """All lattice vectors within ``radius`` of ``center`` (ambient rows)."""
        coeffs = self._enumerate(self.to_coords(center), radius, max_points)
        if coeffs.size == 0:
            return np.zeros((0, self.ambient_dim))
        return coeffs @ self.basis

    def nearest(self, target: np.ndarray) -> tuple[np.ndarray, float]:
        """Closest lattice vector to the subspace component of ``target``."""
        proj = self.subspace_onb.T @ self.to_coords(target)
        guess = self.babai(target)
        bound = float(np.linalg.norm(guess - proj)) + 1e-12
        pts = self.points_in_ball(proj, bound)
        if pts.shape[0] == 0:
            return guess, float(np.linalg.norm(guess - proj))
        dists = np.linalg.norm(pts - proj, axis=1)
        k = int(np.argmin(dists))
        return pts[k], float(dists[k])

    def _enumerate(self, y: np.ndarray, radius: float,
                   max_points: int | None = None) -> np.ndarray:
        """Fincke-Pohst enumeration of ``{c in Z^m : |c @ B - y| <= radius}``."""
        n = self.rank
        r_sq = radius * radius * (1.0 + 1e-12) + 1e-300
        norms = self._gs_norms_sq
        mu = self._gs_mu
        # Target coordinates in the Gram-Schmidt frame.
        y_gs = np.array([(y @ self._gs_ortho[j]) / norms[j] for j in range(n)])
        out: list[list[int]] = []

        def recurse(level: int, coeffs: list[int], partial: float, shifts: np.ndarray):
            if max_points is not None and len(out) > max_points:
                raise BudgetExceeded(f"ball enumeration exceeded {max_points} points")
            if level < 0:
                out.append(coeffs[:])
                return
            center = y_gs[level] - shifts[level]
            budget = r_sq - partial
            if budget < 0:
                return
            half_width = (budget / norms[level]) ** 0.5
            lo = int(np.ceil(center - half_width - 1e-12))
            hi = int(np.floor(center + half_width + 1e-12))
            for c in range(lo, hi + 1):
                diff = c - center
                new_partial = partial + diff * diff * norms[level]
                if new_partial > r_sq:
                    continue
                coeffs[level] = c
                recurse(level - 1, coeffs, new_partial, shifts + c * mu[level])
            coeffs[level] = 0

        recurse(n - 1, [0] * n, 0.0, np.zeros(n))
        return np.array(out, dtype=float) if out else np.zeros((0, n))


def _rational_inverse(mat: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(mat)
    aug = [mat[i][:] + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    rref, pivots = rational_rref(aug)
    if pivots != list(range(n)):
        raise ValueError("matrix is singular over Q")
    return [row[n:] for row in rref]


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a
