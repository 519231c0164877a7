"""Neutral spaces, advances, sufficiency verdicts, combinatorial richness,
orbit-span decomposition, and statistical sufficiency surveys.

A configuration translation W is neutral for a segment when it leaves every
velocity along the segment unchanged. Writing W_k for the translation carried
by the k-th flight and alpha_k for the time advance of the k-th collision,
neutrality is the exact linear system

    project_base_k(W_k - alpha_k * v_k) = 0,
    W_{k+1} = W_k + alpha_k * (v_{k+1} - v_k),

in the unknowns (W, alpha_1..alpha_n). The neutral space is the projection of
its solution space onto the W coordinates; the segment is sufficient
(geometrically hyperbolic) exactly when that space is the line spanned by the
velocity. An independent derivative-kernel method computes the same space
from the kernel of the linearized flow's velocity response and serves as a
cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySequence, NotNeutralError, SingularSegment, UnknownCylinderIndex
from .flow import OrbitSegment, PhasePoint, cylinder_distance, evolve, random_phase_point
from .geometry import BilliardTable
from .linalg import RANK_RTOL, nullspace, orthonormal_basis, rational_rank, rational_intersection_dim
from .tangent import collide_frame, flight_frame, segment_operators

ADVANCE_SYSTEM = "advance_system"
DERIVATIVE_KERNEL = "derivative_kernel"

# Residual tolerance when solving per-collision advance constraints.
ADVANCE_ATOL = 1e-8


@dataclass(frozen=True, eq=False)
class NeutralSpaceResult:
    basis: np.ndarray  # orthonormal rows
    dim: int
    advances: tuple[tuple[float, ...], ...]  # one advance tuple per basis row
    method: str


@dataclass(frozen=True, eq=False)
class SufficiencyVerdict:
    sufficient: bool
    neutral_dim: int
    witness: NeutralSpaceResult


@dataclass(frozen=True, eq=False)
class RichnessReport:
    collided: tuple[int, ...]
    span_dim: int
    full_span: bool
    min_pair_intersection_dim: int | None
    codim2_ok: bool
    relaxed_ok: bool


@dataclass(frozen=True, eq=False)
class SpanDecomposition:
    l_star: np.ndarray  # orthonormal rows spanning the collided base spaces
    a_star: np.ndarray  # orthonormal rows of the orthocomplement
    is_full: bool


def _require_nonsingular(segment: OrbitSegment) -> None:
    # A budget-truncated segment is an ordinary nonsingular piece of orbit;
    # only tangential/double flags invalidate the recorded events.
    flag = segment.singular_flag
    if flag is not None and flag.kind != "budget_exceeded":
        raise SingularSegment(f"segment flagged {flag.kind}")


def _segment_velocities(segment: OrbitSegment) -> np.ndarray:
    """Pre-collision velocity of each event: v_k is constant on flight k."""
    return np.array([e.v_pre for e in segment.events])


def neutral_space_advance(segment: OrbitSegment, table: BilliardTable | None = None) -> NeutralSpaceResult:
    """Neutral space from the exact advance linear system.

    The solution space is computed by SVD of the stacked per-collision
    constraints; the basis is orthonormalized and expressed at the segment
    start, and the advance tuple of each basis vector is reported.
    """
    _require_nonsingular(segment)
    table = table or segment.table
    events = segment.events
    n = len(events)
    if n == 0:
        raise EmptySequence("advance system needs at least one collision")
    d = table.dim
    vels = _segment_velocities(segment)
    deltas = np.array([e.v_post - e.v_pre for e in events])

    rows = []
    for k, event in enumerate(events):
        base_rows = event.cylinder.base_basis  # (m_k, d)
        for ell in base_rows:
            row = np.zeros(d + n)
            row[:d] = ell
            for j in range(k):
                row[d + j] = ell @ deltas[j]
            row[d + k] -= ell @ vels[k]
            rows.append(row)
    system = np.vstack(rows)
    kernel = nullspace(system, rtol=RANK_RTOL)  # rows span the solution space
    w_parts = kernel[:, :d]
    basis = orthonormal_basis(w_parts, rtol=RANK_RTOL)
    advances = tuple(tuple(advance_functionals(segment, w, table)) for w in basis)
    return NeutralSpaceResult(basis=basis, dim=basis.shape[0], advances=advances,
                              method=ADVANCE_SYSTEM)


def advance_functionals(segment: OrbitSegment, translation, table: BilliardTable | None = None) -> tuple[float, ...]:
    """Advance tuple (alpha_1..alpha_n) of a neutral translation.

    Walks the constraints forward: each collision pins its advance uniquely
    because the pre-collision velocity has a nonzero base component. Raises
    NotNeutralError when a constraint residual survives.
    """
    _require_nonsingular(segment)
    table = table or segment.table
    events = segment.events
    if not events:
        raise EmptySequence("advance functionals need at least one collision")
    w = np.asarray(translation, dtype=float).copy()
    scale = max(1.0, float(np.linalg.norm(w)))
    alphas = []
    for k, event in enumerate(events):
        base_rows = event.cylinder.base_basis
        w_b = base_rows @ w
        v_b = base_rows @ event.v_pre
        denom = float(v_b @ v_b)
        alpha = float(w_b @ v_b) / denom
        residual = float(np.linalg.norm(w_b - alpha * v_b))
        if residual > ADVANCE_ATOL * scale:
            raise NotNeutralError(k, residual)
        alphas.append(alpha)
        w = w + alpha * (event.v_post - event.v_pre)
    return tuple(alphas)


def neutral_space_numeric(segment: OrbitSegment, table: BilliardTable | None = None) -> NeutralSpaceResult:
    """Neutral space from the derivative kernel.

    Plants pure translations (W, 0) at a reference time strictly inside the
    segment, transports them to both ends with the linearized flow, and takes
    the kernel of the stacked velocity responses. The kernel is transported
    back to the segment start so results are directly comparable with the
    advance method. A zero-collision segment returns the full space.
    """
    _require_nonsingular(segment)
    table = table or segment.table
    d = table.dim
    n = len(segment.events)
    if n == 0:
        eye = np.eye(d)
        return NeutralSpaceResult(basis=eye, dim=d, advances=tuple(() for _ in range(d)),
                                  method=DERIVATIVE_KERNEL)
    ops = segment_operators(segment)
    split = n // 2  # events 1..split lie behind the reference time
    times = [e.time for e in segment.events]
    t_lo = times[split - 1] if split >= 1 else 0.0
    t_hi = times[split] if split < n else segment.duration
    t_ref = 0.5 * (t_lo + t_hi)

    eye = np.eye(d)
    zeros = np.zeros((d, d))

    def backward_to_start(dqs, dvs):
        t_cur = t_ref
        for k in range(split - 1, -1, -1):
            dqs, dvs = flight_frame(dqs, dvs, times[k] - t_cur)
            dqs, dvs = collide_frame(dqs, dvs, ops[k], inverse=True)
            t_cur = times[k]
        return flight_frame(dqs, dvs, -t_cur)

    # Forward response: reference -> segment end.
    dqs, dvs = flight_frame(eye, zeros, times[split] - t_ref)
    for k in range(split, n):
        dqs, dvs = collide_frame(dqs, dvs, ops[k])
        t_next = times[k + 1] if k + 1 < n else segment.duration
        dqs, dvs = flight_frame(dqs, dvs, t_next - times[k])
    fwd = dvs

    # Backward response: reference -> segment start (inverse steps).
    _, bwd = backward_to_start(eye, zeros)

    stacked = np.hstack([fwd, bwd])  # row i = response of W = e_i
    kernel = nullspace(stacked.T, rtol=RANK_RTOL)

    # Transport kernel vectors to the segment start frame.
    dqs, _ = backward_to_start(kernel, np.zeros_like(kernel))
    basis = orthonormal_basis(dqs, rtol=RANK_RTOL)
    advances = tuple(_advances_by_transport(segment, ops, w) for w in basis)
    return NeutralSpaceResult(basis=basis, dim=basis.shape[0], advances=advances,
                              method=DERIVATIVE_KERNEL)


def _advances_by_transport(segment: OrbitSegment, ops, w: np.ndarray) -> tuple[float, ...]:
    """Advances of a (numerically) neutral vector read off the tangent flow:
    at each collision the time slide is -<normal, W_k>/cos(phi)."""
    dqs = np.atleast_2d(np.asarray(w, dtype=float))
    dvs = np.zeros_like(dqs)
    t_prev = 0.0
    alphas = []
    for event, op in zip(segment.events, ops):
        dqs, dvs = flight_frame(dqs, dvs, event.time - t_prev)
        alphas.append(-float(event.normal @ dqs[0]) / event.cos_phi)
        dqs, dvs = collide_frame(dqs, dvs, op)
        t_prev = event.time
    return tuple(alphas)


def sufficiency(segment: OrbitSegment, table: BilliardTable | None = None,
                cross_check: bool = False) -> SufficiencyVerdict:
    """Sufficiency (geometric hyperbolicity): neutral space of minimal dim 1.

    Zero-collision segments are never sufficient (the neutral space is all of
    R^d). With ``cross_check`` the derivative-kernel method must agree on the
    dimension.
    """
    _require_nonsingular(segment)
    table = table or segment.table
    if len(segment.events) == 0:
        d = table.dim
        witness = NeutralSpaceResult(basis=np.eye(d), dim=d,
                                     advances=tuple(() for _ in range(d)),
                                     method=ADVANCE_SYSTEM)
        return SufficiencyVerdict(sufficient=False, neutral_dim=d, witness=witness)
    witness = neutral_space_advance(segment, table)
    if cross_check:
        other = neutral_space_numeric(segment, table)
        if other.dim != witness.dim:
            raise SingularSegment(
                f"method disagreement: advance dim {witness.dim} vs kernel dim {other.dim}"
            )
    return SufficiencyVerdict(sufficient=witness.dim == 1, neutral_dim=witness.dim,
                              witness=witness)


def richness_report(symbolic, table: BilliardTable) -> RichnessReport:
    """Combinatorial richness of a symbolic sequence: span of the collided
    base spaces and their pairwise intersection dimensions, all exact."""
    symbolic = tuple(int(s) for s in symbolic)
    if not symbolic:
        raise EmptySequence("richness needs a nonempty symbolic sequence")
    k = len(table.cylinders)
    for s in symbolic:
        if not 1 <= s <= k:
            raise UnknownCylinderIndex(f"index {s} outside 1..{k}")
    collided = tuple(sorted(set(symbolic)))
    int_bases = {s: [list(r) for r in table.cylinder(s).base.integer_basis] for s in collided}
    span_rows = [row for s in collided for row in int_bases[s]]
    span_dim = rational_rank(span_rows)
    full_span = span_dim == table.dim
    min_pair: int | None = None
    for a in range(len(collided)):
        for b in range(a + 1, len(collided)):
            dim_int = rational_intersection_dim(int_bases[collided[a]], int_bases[collided[b]])
            min_pair = dim_int if min_pair is None else min(min_pair, dim_int)
    codim2_ok = min_pair is None or min_pair >= 2
    relaxed_ok = min_pair is None or min_pair >= 1
    return RichnessReport(collided=collided, span_dim=span_dim, full_span=full_span,
                          min_pair_intersection_dim=min_pair,
                          codim2_ok=codim2_ok, relaxed_ok=relaxed_ok)


def span_decomposition(symbolic, table: BilliardTable) -> SpanDecomposition:
    """Span of the collided base spaces and its orthocomplement.

    When the orthocomplement is nonzero, the velocity component in it is a
    conserved quantity of the sub-billiard the orbit actually sees.
    """
    symbolic = tuple(int(s) for s in symbolic)
    if not symbolic:
        raise EmptySequence("span decomposition needs a nonempty symbolic sequence")
    collided = sorted(set(symbolic))
    rows = [row for s in collided for row in table.cylinder(s).base.integer_basis]
    rank = rational_rank([list(r) for r in rows])
    stacked = np.array(rows, dtype=float)
    l_star = orthonormal_basis(stacked, rank=rank)
    a_star = nullspace(stacked, rank=rank)
    return SpanDecomposition(l_star=l_star, a_star=a_star, is_full=a_star.shape[0] == 0)


# ---------------------------------------------------------------------------
# Statistical surveys
# ---------------------------------------------------------------------------

GENERIC = "generic"
ANSATZ = "ansatz"

# Width of the near-tangency band used to proxy fresh post-singularity points.
TANGENCY_BAND = 0.05


@dataclass(frozen=True, eq=False)
class SurveyRow:
    sample_id: int
    seed: int
    n_collisions: int
    distinct_cylinders: int
    span_dim: int | None
    codim2_ok: bool | None
    full_span: bool | None
    neutral_dim: int | None
    sufficient: bool | None
    singular_flag: str


@dataclass(frozen=True, eq=False)
class SurveyResult:
    rows: tuple[SurveyRow, ...]
    summary: dict


def survey_sufficiency(table: BilliardTable, sample_count: int, duration: float,
                       seed: int, mode: str = GENERIC, max_events: int = 10_000,
                       tangency_band: float = TANGENCY_BAND, threads: int = 1) -> SurveyResult:
    """Classify sampled orbit segments by richness and sufficiency.

    generic mode samples phase points uniformly (positions rejection-sampled
    outside the scatterers); ansatz mode starts on scatterer boundaries with
    outgoing velocities in a near-tangency band, proxying points freshly past
    a singular reflection, and tests forward sufficiency within ``duration``.
    Per-sample generators are derived from (seed, sample_id) and results merge
    by sample index, so output is deterministic and independent of scheduling
    (``threads`` > 1 runs samples in worker processes).
    """
    if mode not in (GENERIC, ANSATZ):
        raise ValueError(f"unknown survey mode {mode!r}")
    if threads > 1 and sample_count > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        work = partial(_survey_one, table, seed=seed, duration=duration, mode=mode,
                       max_events=max_events, band=tangency_band)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, range(sample_count), chunksize=8))
    else:
        rows = [
            _survey_one(table, i, seed=seed, duration=duration, mode=mode,
                        max_events=max_events, band=tangency_band)
            for i in range(sample_count)
        ]
    return SurveyResult(rows=tuple(rows), summary=summarize_survey(rows, table, seed=seed,
                                                                   mode=mode,
                                                                   sample_count=sample_count,
                                                                   duration=duration))


def _survey_one(table: BilliardTable, sample_id: int, *, seed: int, duration: float,
                mode: str, max_events: int, band: float) -> SurveyRow:
    rng = np.random.default_rng([seed, sample_id])
    if mode == GENERIC:
        x = random_phase_point(table, rng)
    else:
        x = _tangency_start(table, rng, band)
    segment = evolve(x, table, duration, max_events=max_events)
    flag = segment.singular_flag.kind if segment.singular_flag else "none"
    n = segment.n_events
    distinct = len(set(segment.symbolic))
    span_dim = codim2 = full = None
    neutral_dim = suff = None
    if n > 0:
        rich = richness_report(segment.symbolic, table)
        span_dim, codim2, full = rich.span_dim, rich.codim2_ok, rich.full_span
    if flag == "none":
        verdict = sufficiency(segment, table)
        neutral_dim, suff = verdict.neutral_dim, verdict.sufficient
    return SurveyRow(sample_id=sample_id, seed=seed, n_collisions=n,
                     distinct_cylinders=distinct, span_dim=span_dim, codim2_ok=codim2,
                     full_span=full, neutral_dim=neutral_dim, sufficient=suff,
                     singular_flag=flag)


def _tangency_start(table: BilliardTable, rng: np.random.Generator, band: float,
                    max_tries: int = 200) -> PhasePoint:
    """Post-collision point on a scatterer boundary with cos(phi) in (0, band)."""
    for _ in range(max_tries):
        idx = int(rng.integers(len(table.cylinders)))
        cyl = table.cylinders[idx]
        base_rows = cyl.base_basis
        radial = rng.normal(size=base_rows.shape[0])
        radial /= np.linalg.norm(radial)
        normal = radial @ base_rows
        q = cyl.translation + cyl.radius * normal
        gen_basis = np.array(cyl.generator.integer_basis, dtype=float)
        if gen_basis.size:
            q = q + rng.random(gen_basis.shape[0]) @ gen_basis
        q = np.mod(q, 1.0)
        clear = all(
            cylinder_distance(q, other)[0] > other.radius
            for j, other in enumerate(table.cylinders) if j != idx
        )
        if not clear:
            continue
        cos_phi = band * rng.random()
        tangent = rng.normal(size=table.dim)
        tangent -= (tangent @ normal) * normal
        norm = np.linalg.norm(tangent)
        if norm < 1e-12 or cos_phi <= 0.0:
            continue
        v = cos_phi * normal + np.sqrt(1.0 - cos_phi**2) * (tangent / norm)
        return PhasePoint(q, v)
    raise RuntimeError("could not sample a clear near-tangency boundary point")


def summarize_survey(rows, table: BilliardTable, **meta) -> dict:
    """Counts and fractions over survey rows."""
    n = len(rows)
    nonsingular = [r for r in rows if r.singular_flag == "none"]
    full_span = [r for r in nonsingular if r.full_span]
    rich = [r for r in full_span if r.codim2_ok]
    sufficient_rows = [r for r in nonsingular if r.sufficient]
    suff_full = [r for r in full_span if r.sufficient]

    def frac(part, whole):
        return len(part) / len(whole) if whole else None

    return {
        **meta,
        "n_samples": n,
        "n_singular": n - len(nonsingular),
        "fraction_singular": (n - len(nonsingular)) / n if n else None,
        "n_nonsingular": len(nonsingular),
        "n_full_span": len(full_span),
        "n_codim2_rich": len(rich),
        "n_sufficient": len(sufficient_rows),
        "fraction_sufficient_nonsingular": frac(sufficient_rows, nonsingular),
        "fraction_full_span": frac(full_span, nonsingular),
        "fraction_sufficient_full_span": frac(suff_full, full_span),
        "non_sufficient_full_span_ids": [r.sample_id for r in full_span if not r.sufficient],
    }
