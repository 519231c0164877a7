"""Event-driven flow: detection, reflection, evolution, flags, invariants."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cylbilliards import (
    OutwardVelocity,
    PhasePoint,
    StartsInsideScatterer,
    build_cylinder,
    build_table,
    cylinder_distance,
    evolve,
    next_collision,
    phase_point,
    random_phase_point,
    reflect,
    validate_table,
)

from conftest import clean, tori_distance

unit2 = st.floats(-1.0, 1.0).filter(lambda x: abs(x) > 1e-3)


class TestCylinderDistance:
    def test_direct_projection(self, sinai2):
        dist, offset = cylinder_distance(np.array([0.5, 0.0]), sinai2.cylinders[0])
        assert dist == pytest.approx(0.5, abs=1e-14)
        assert np.allclose(offset, [0, 0])

    def test_nearest_translate(self, sinai2):
        dist, offset = cylinder_distance(np.array([0.9, 0.0]), sinai2.cylinders[0])
        assert dist == pytest.approx(0.1, abs=1e-14)
        assert np.allclose(offset, [1, 0])

    def test_generator_direction_ignored(self):
        cyl = build_cylinder([[0, 0, 1]], [0, 0, 0], 0.3, 3)
        for q3 in (0.0, 0.3, 0.7, 0.95):
            dist, _ = cylinder_distance(np.array([0.3, 0.4, q3]), cyl)
            assert dist == pytest.approx(0.5, abs=1e-14)


class TestNextCollision:
    def test_head_on(self, sinai2):
        ev = next_collision(phase_point([0.5, 0.0], [-1.0, 0.0]), sinai2, 10.0)
        assert ev.time == pytest.approx(0.3, abs=1e-14)
        assert np.allclose(ev.q_hit, [0.2, 0.0], atol=1e-14)
        assert np.allclose(ev.normal, [1.0, 0.0], atol=1e-14)
        assert ev.cos_phi == pytest.approx(1.0, abs=1e-14)
        assert ev.cylinder_index == 1

    def test_head_on_via_lattice_translate(self, sinai2):
        ev = next_collision(phase_point([0.5, 0.0], [1.0, 0.0]), sinai2, 10.0)
        assert ev.time == pytest.approx(0.3, abs=1e-14)
        assert np.allclose(ev.q_hit, [0.8, 0.0], atol=1e-14)
        assert np.allclose(ev.normal, [-1.0, 0.0], atol=1e-14)
        assert np.allclose(ev.lattice_offset, [1.0, 0.0], atol=1e-14)

    def test_parallel_to_generator_never_collides(self):
        cyl = build_cylinder([[0, 0, 1]], [0, 0, 0], 0.3, 3)
        table = validate_table(build_table([cyl]))
        x = phase_point([0.3, 0.4, 0.7], [0.0, 0.0, 1.0])
        assert next_collision(x, table, 1000.0) is None

    def test_none_beyond_horizon(self, sinai2):
        x = phase_point([0.5, 0.0], [-1.0, 0.0])
        assert next_collision(x, sinai2, 0.25) is None

    def test_starts_inside_raises(self, sinai2):
        with pytest.raises(StartsInsideScatterer):
            next_collision(phase_point([0.05, 0.0], [1.0, 0.0]), sinai2, 1.0)

    def test_event_invariants(self, ortho3):
        rng = np.random.default_rng(3)
        for _ in range(25):
            x = random_phase_point(ortho3, rng)
            ev = next_collision(x, ortho3, 50.0)
            if ev is None:
                continue
            assert ev.v_pre @ ev.normal == pytest.approx(-ev.cos_phi, abs=1e-12)
            assert ev.cos_phi >= 0
            cyl = ev.cylinder
            radial = cyl.base_projector @ (ev.q_hit - cyl.translation) - ev.lattice_offset
            assert np.linalg.norm(radial) == pytest.approx(cyl.radius, abs=1e-10)
            expected_post = ev.v_pre - 2 * (ev.v_pre @ ev.normal) * ev.normal
            assert np.allclose(ev.v_post, expected_post, atol=1e-14)


class TestReflect:
    def test_head_on_reversal(self):
        ev = _synthetic_event(normal=[1.0, 0.0], v_pre=[-1.0, 0.0])
        out = reflect(PhasePoint(ev.q_hit, ev.v_pre), ev)
        assert np.allclose(out.v, [1.0, 0.0])

    def test_mirror_law(self):
        s = np.sqrt(2) / 2
        ev = _synthetic_event(normal=[1.0, 0.0], v_pre=[-s, s])
        out = reflect(PhasePoint(ev.q_hit, ev.v_pre), ev)
        assert np.allclose(out.v, [s, s], atol=1e-15)

    def test_normal_incidence_any_direction(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            nu = rng.normal(size=3)
            nu /= np.linalg.norm(nu)
            ev = _synthetic_event(normal=nu, v_pre=-nu)
            out = reflect(PhasePoint(ev.q_hit, ev.v_pre), ev)
            assert np.allclose(out.v, nu, atol=1e-14)

    def test_outward_velocity_rejected(self):
        ev = _synthetic_event(normal=[1.0, 0.0], v_pre=[-1.0, 0.0])
        with pytest.raises(OutwardVelocity):
            reflect(PhasePoint(ev.q_hit, np.array([1.0, 0.0])), ev)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(unit2, min_size=3, max_size=3), st.lists(unit2, min_size=3, max_size=3))
    def test_reflection_preserves_norm_and_involutes(self, v_raw, n_raw):
        v = np.array(v_raw) / np.linalg.norm(v_raw)
        nu = np.array(n_raw) / np.linalg.norm(n_raw)
        if abs(v @ nu) < 1e-6:
            return
        if v @ nu > 0:
            v = -v
        once = v - 2 * (v @ nu) * nu
        assert np.linalg.norm(once) == pytest.approx(1.0, abs=1e-12)
        twice = once - 2 * (once @ nu) * nu
        assert np.allclose(twice, v, atol=1e-12)


def _synthetic_event(normal, v_pre):
    from cylbilliards.flow import CollisionEvent

    normal = np.asarray(normal, dtype=float)
    v_pre = np.asarray(v_pre, dtype=float)
    disk = build_cylinder([], [0] * len(normal), 0.2, len(normal))
    return CollisionEvent(
        time=0.0,
        cylinder_index=1,
        q_hit=np.mod(0.2 * normal, 1.0),
        lattice_offset=np.zeros(len(normal)),
        normal=normal,
        v_pre=v_pre,
        v_post=v_pre - 2 * (v_pre @ normal) * normal,
        cos_phi=-float(v_pre @ normal),
        cylinder=disk,
    )


class TestEvolve:
    def test_period_one_bouncing_orbit(self, sinai2):
        seg = evolve(phase_point([0.5, 0.0], [-1.0, 0.0]), sinai2, 1.0)
        assert seg.symbolic == (1, 1)
        assert [e.time for e in seg.events] == pytest.approx([0.3, 0.9], abs=1e-12)
        assert np.allclose(seg.end.v, [-1.0, 0.0])
        assert np.allclose(seg.end.q, [0.7, 0.0], atol=1e-12)
        assert seg.singular_flag is None

    def test_exact_tangency_is_free_flight(self, sinai2):
        seg = evolve(phase_point([0.5, 0.2], [-1.0, 0.0]), sinai2, 1.0)
        assert seg.n_events == 0
        assert seg.singular_flag is None
        assert np.allclose(seg.end.q, [0.5, 0.2], atol=1e-15)

    def test_free_motion_empty_symbolic(self):
        cyl = build_cylinder([[0, 0, 1]], [0, 0, 0], 0.3, 3)
        table = validate_table(build_table([cyl]))
        seg = evolve(phase_point([0.3, 0.4, 0.7], [0, 0, 1.0]), table, 7.25)
        assert seg.symbolic == ()
        assert seg.duration == 7.25
        assert np.allclose(seg.end_unwrapped, [0.3, 0.4, 0.7 + 7.25])

    def test_double_collision_flagged(self):
        c1 = build_cylinder([], [0, 0], 0.3, 2)
        c2 = build_cylinder([], [0.5, 0.0], 0.3, 2)
        table = validate_table(build_table([c1, c2]))
        seg = evolve(phase_point([0.25, 0.5], [0.0, -1.0]), table, 2.0)
        assert seg.singular_flag is not None
        assert seg.singular_flag.kind == "double"
        assert seg.events[seg.singular_flag.event_index].near_double
        assert seg.duration == seg.events[-1].time

    def test_budget_flag_and_chunked_continuation(self, sinai2):
        x = phase_point([0.51, 0.33], [0.6, 0.8])
        whole = evolve(x, sinai2, 40.0)
        first = evolve(x, sinai2, 40.0, max_events=3)
        assert first.singular_flag.kind == "budget_exceeded"
        rest = evolve(first.end, sinai2, 40.0 - first.duration)
        assert first.symbolic + rest.symbolic == whole.symbolic
        assert tori_distance(rest.end.q, whole.end.q) < 1e-9

    def test_event_times_strictly_increasing(self, ortho3):
        rng = np.random.default_rng(11)
        for _ in range(5):
            seg = evolve(random_phase_point(ortho3, rng), ortho3, 30.0)
            times = [e.time for e in seg.events]
            assert all(b > a for a, b in zip(times, times[1:]))
            assert seg.symbolic == tuple(e.cylinder_index for e in seg.events)

    def test_speed_conservation_1000_collisions(self, ortho3):
        rng = np.random.default_rng(4)
        seg = evolve(random_phase_point(ortho3, rng), ortho3, 1e9, max_events=1000)
        assert abs(np.linalg.norm(seg.end.v) - 1.0) < 1e-11

    def test_reversibility(self, dense3):
        rng = np.random.default_rng(6)
        checked = 0
        while checked < 10:
            start = random_phase_point(dense3, rng)
            seg = evolve(start, dense3, 3.0, max_events=20)
            if not clean(seg) or seg.n_events < 5:
                continue
            back = evolve(PhasePoint(seg.end.q, -seg.end.v), dense3, seg.duration)
            assert tori_distance(back.end.q, start.q) < 1e-5
            assert np.max(np.abs(-back.end.v - start.v)) < 1e-5
            checked += 1

    def test_reversal_from_collision_endpoint_retraces(self, dense3):
        # Endpoint exactly on the boundary: the incoming/outgoing boundary
        # identification must reflect the reversed velocity, not tunnel.
        rng = np.random.default_rng(8)
        start = random_phase_point(dense3, rng)
        seg = evolve(start, dense3, 10.0, max_events=8)
        assert seg.singular_flag.kind == "budget_exceeded"
        back = evolve(PhasePoint(seg.end.q, -seg.end.v), dense3, seg.duration)
        # Last forward collision sits at t = duration; reversed, it is
        # absorbed at t = 0, so the retraced sequence drops it.
        assert back.symbolic == tuple(reversed(seg.symbolic[:-1]))
        assert tori_distance(back.end.q, start.q) < 1e-6

    def test_boundary_consistency(self, skew3):
        rng = np.random.default_rng(9)
        seg = evolve(random_phase_point(skew3, rng), skew3, 50.0)
        assert seg.n_events > 5
        for e in seg.events:
            cyl = e.cylinder
            radial = cyl.base_projector @ (e.q_hit - cyl.translation) - e.lattice_offset
            assert abs(np.linalg.norm(radial) - cyl.radius) < 1e-10
            assert abs(np.linalg.norm(e.normal) - 1.0) < 1e-12

    def test_translation_invariance_along_generators(self, parallel3):
        rng = np.random.default_rng(13)
        x = random_phase_point(parallel3, rng)
        seg_a = evolve(x, parallel3, 20.0)
        shift = np.array([0.0, 0.0, 0.37])  # shared generator direction
        seg_b = evolve(PhasePoint(np.mod(x.q + shift, 1.0), x.v), parallel3, 20.0)
        assert seg_a.symbolic == seg_b.symbolic
        assert seg_a.n_events > 0
        for ea, eb in zip(seg_a.events, seg_b.events):
            assert abs(ea.time - eb.time) < 1e-9

    def test_positions_reduced_to_unit_cube(self, ortho3):
        rng = np.random.default_rng(17)
        seg = evolve(random_phase_point(ortho3, rng), ortho3, 25.0)
        for e in seg.events:
            assert np.all(e.q_hit >= 0.0) and np.all(e.q_hit < 1.0)
        assert np.all(seg.end.q >= 0.0) and np.all(seg.end.q < 1.0)

    def test_skew_generator_table_d4(self):
        # Two-dimensional skew generator: collisions live in a genuinely
        # tilted rank-2 projected lattice.
        cyl = build_cylinder([[1, 1, 0, 0], [0, 0, 1, 1]], [0.1, 0.2, 0.3, 0.4], 0.3, 4)
        table = validate_table(build_table([cyl]))
        rng = np.random.default_rng(19)
        seg = evolve(random_phase_point(table, rng), table, 40.0)
        assert seg.n_events > 3
        for e in seg.events:
            radial = cyl.base_projector @ (e.q_hit - cyl.translation) - e.lattice_offset
            assert abs(np.linalg.norm(radial) - cyl.radius) < 1e-10
            # normals stay in the base space, orthogonal to both generators
            assert abs(e.normal @ np.array([1, 1, 0, 0])) < 1e-10
            assert abs(e.normal @ np.array([0, 0, 1, 1])) < 1e-10
        speed = abs(float(np.linalg.norm(seg.end.v)) - 1.0)
        assert speed < 1e-12

    def test_overlapping_table_never_lands_inside(self, split4):
        # Axes of this table intersect, so cylinders overlap; earliest-root
        # detection must still keep every hit point outside the other tube.
        rng = np.random.default_rng(21)
        for _ in range(5):
            seg = evolve(random_phase_point(split4, rng), split4, 15.0)
            for e in seg.events:
                for other in split4.cylinders:
                    if other is e.cylinder:
                        continue
                    dist, _ = cylinder_distance(e.q_hit, other)
                    assert dist > other.radius - 1e-10
