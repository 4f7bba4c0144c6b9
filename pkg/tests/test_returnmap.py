import random

import numpy as np
import pytest

from fpdyn.errors import ParameterError
from fpdyn.flow import SimConfig, simulate
from fpdyn.game import make_shapley
from fpdyn.orbits import clockwise_orbit
from fpdyn.returnmap import (
    CYCLE_SECTIONS,
    ProjectiveMap,
    attraction_check,
    collinear_samples,
    compose,
    cross_ratio,
    first_return,
    line_parameter,
    projective_from_samples,
    random_state,
    sample_section_point,
    section_coords,
    section_state,
)


class TestProjectiveMap:
    def test_identity(self):
        pm = ProjectiveMap.identity()
        assert pm.apply((0.2, 0.5, -1.0)) == pytest.approx((0.2, 0.5, -1.0))

    def test_compose_with_identity(self):
        rng = random.Random(0)
        H = np.eye(4) + 0.1 * np.array([[rng.random() for _ in range(4)] for _ in range(4)])
        pm = ProjectiveMap.from_array(H)
        left = compose(pm, ProjectiveMap.identity())
        z = (0.3, 0.1, 0.4)
        assert left.apply(z) == pytest.approx(pm.apply(z))

    def test_associativity(self):
        rng = random.Random(1)

        def rand_map():
            H = np.eye(4) + 0.2 * np.array(
                [[rng.random() for _ in range(4)] for _ in range(4)]
            )
            return ProjectiveMap.from_array(H)

        t1, t2, t3 = rand_map(), rand_map(), rand_map()
        a = compose(t3, compose(t2, t1))
        b = compose(compose(t3, t2), t1)
        assert np.max(np.abs(a.matrix - b.matrix)) < 1e-12

    def test_affine_denominator_after_centered_composition(self):
        # with T1 fixing the origin, the composed denominator is affine:
        # the bottom row of H2 @ H1 is a linear combination of H1's rows
        rng = random.Random(2)
        game = make_shapley(-0.5)
        m1 = projective_from_samples(game, CYCLE_SECTIONS[0], CYCLE_SECTIONS[1], rng)
        m2 = projective_from_samples(game, CYCLE_SECTIONS[1], CYCLE_SECTIONS[2], rng)
        z0 = section_coords(
            game, CYCLE_SECTIONS[0], sample_section_point(game, CYCLE_SECTIONS[0], rng)
        )
        # translate charts so that T1(z0') uses z0 as the origin
        T = np.eye(4)
        T[:3, 3] = z0
        H1 = m1.matrix @ T  # acts on w = z - z0
        S = np.eye(4)
        S[:3, 3] = [-x for x in m1.apply(z0)]
        H1c = S @ (H1 / (H1[3] @ np.array([0, 0, 0, 1.0])))
        # H1c fixes the origin; compose and check the last row depends
        # affinely on w (it always does for matrices, which is the point:
        # the denominator of the composition is again affine)
        comp = m2.matrix @ H1c
        assert comp.shape == (4, 4)
        w = np.array([0.01, -0.02, 0.005, 1.0])
        den = comp[3] @ w
        den_affine = comp[3, :3] @ w[:3] + comp[3, 3]
        assert den == pytest.approx(den_affine)


class TestHitMaps:
    def test_fit_residuals(self):
        game = make_shapley(-0.5)
        rng = random.Random(3)
        for k in range(6):
            projective_from_samples(
                game, CYCLE_SECTIONS[k], CYCLE_SECTIONS[(k + 1) % 6], rng
            )  # raises if held-out residual exceeds 1e-8

    def test_composition_equals_direct_six_event_map(self):
        beta = -0.5
        game = make_shapley(beta)
        rng = random.Random(4)
        maps = [
            projective_from_samples(game, CYCLE_SECTIONS[k], CYCLE_SECTIONS[(k + 1) % 6], rng)
            for k in range(6)
        ]
        P = maps[0]
        for m in maps[1:]:
            P = compose(m, P)
        for _ in range(10):
            st = sample_section_point(game, CYCLE_SECTIONS[0], rng)
            z = section_coords(game, CYCLE_SECTIONS[0], st)
            traj = simulate(game, st, SimConfig(max_events=7, codim2_policy="abort"))
            end = traj.segments[5].end
            z_direct = section_coords(game, CYCLE_SECTIONS[0], end)
            assert max(abs(a - b) for a, b in zip(P.apply(z), z_direct)) < 1e-8

    def test_cross_ratio_preserved(self):
        game = make_shapley(-0.3)
        rng = random.Random(5)
        pm = projective_from_samples(game, CYCLE_SECTIONS[0], CYCLE_SECTIONS[1], rng)
        z0 = section_coords(game, CYCLE_SECTIONS[0], sample_section_point(game, CYCLE_SECTIONS[0], rng))
        z1 = section_coords(game, CYCLE_SECTIONS[0], sample_section_point(game, CYCLE_SECTIONS[0], rng))
        params = (0.0, 0.35, 0.65, 1.0)
        images = [pm.apply(z) for z in collinear_samples(z0, z1, params)]
        ts = [line_parameter(w, images[0], images[1]) for w in images]
        for w, t in zip(images, ts):
            proj = tuple(a + t * (b - a) for a, b in zip(images[0], images[1]))
            assert max(abs(x - y) for x, y in zip(w, proj)) < 1e-8
        assert cross_ratio(*params) == pytest.approx(cross_ratio(*ts), abs=1e-8)


class TestFirstReturn:
    @pytest.mark.parametrize("beta", [0.0, -0.5, -0.9])
    def test_fixed_point_matches_orbit(self, beta):
        fr = first_return(beta)
        assert fr.verification_residual < 1e-8
        orbit = clockwise_orbit(beta)
        assert fr.fixed_point.vA == pytest.approx(orbit.section_n, abs=1e-7)
        assert fr.fixed_point.vB == pytest.approx(orbit.section_m, abs=1e-7)

    def test_iterates_converge_to_fixed_point(self):
        beta = -0.5
        fr = first_return(beta)
        game = make_shapley(beta)
        rng = random.Random(6)
        for _ in range(20):
            z = section_coords(
                game, CYCLE_SECTIONS[0], sample_section_point(game, CYCLE_SECTIONS[0], rng)
            )
            for _ in range(200):
                z = fr.map.apply(z)
            assert max(abs(a - b) for a, b in zip(z, fr.fixed_point_coords)) < 1e-6

    def test_equilibrium_corner_is_fixed(self):
        beta = -0.5
        fr = first_return(beta)
        zE = ((1 + beta) / 3, (1 + beta) / 3, (1 - beta) / 3)
        out = fr.map.apply(zE)
        assert max(abs(a - b) for a, b in zip(out, zE)) < 1e-6

    def test_unsupported_above_zero(self):
        with pytest.raises(ParameterError):
            first_return(0.5)

    def test_section_chart_roundtrip(self):
        game = make_shapley(-0.25)
        rng = random.Random(7)
        for sec in CYCLE_SECTIONS:
            st = sample_section_point(game, sec, rng)
            z = section_coords(game, sec, st)
            back = section_state(game, sec, z)
            assert back.vA == pytest.approx(st.vA, abs=1e-13)
            assert back.vB == pytest.approx(st.vB, abs=1e-13)


class TestAttraction:
    def test_full_convergence_small(self):
        for beta in (0.0, -0.5):
            rep = attraction_check(beta, n_starts=40, horizon=300, seed=21)
            assert rep.converged_fraction == 1.0
            assert rep.outliers == ()

    def test_report_json_shape(self):
        rep = attraction_check(-0.5, n_starts=5, horizon=300, seed=2)
        d = rep.to_json_dict()
        assert set(d) == {"beta", "fixed_point", "converged_fraction", "outliers"}
        assert d["converged_fraction"] == 1.0

    def test_random_state_is_deterministic(self):
        a = random_state(random.Random(5))
        b = random_state(random.Random(5))
        assert a.pA.components == b.pA.components
        assert a.pB.components == b.pB.components
