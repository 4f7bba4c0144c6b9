import math
import random

import pytest
from hypothesis import given, strategies as st

from fpdyn.errors import AmbiguousFlowError, DomainError, ParameterError
from fpdyn.flow import (
    CODIM2_HIT,
    EQUILIBRIUM_REACHED,
    J_LEG_CROSSING,
    SINGLE_INDIFFERENCE,
    SimConfig,
    advance,
    j_flow_step,
    p_from_v,
    rho_to_s,
    s_to_rho,
    simulate,
    time_to_next_event,
    trajectory_csv_lines,
    v_from_p,
)
from fpdyn.game import SimplexPoint, StateP, StateV, make_shapley
from fpdyn.geometry import Codim2Case
from fpdyn.orbits import anticlockwise_orbit, clockwise_orbit, j_map_F
from fpdyn.returnmap import random_state
from fpdyn.transitions import SHAPLEY_PATTERN, pattern_match


def clockwise_section(beta):
    orbit = clockwise_orbit(beta)
    return orbit.section_state, orbit


class TestTimeToNextEvent:
    def test_clockwise_section_at_beta_zero(self):
        state, orbit = clockwise_section(0.0)
        n = state.vA
        s_star, hits = time_to_next_event(make_shapley(0.0), state, 2, 1)
        want = (n[0] - n[1]) / (n[0] - n[1] + 1.0)
        assert s_star == pytest.approx(want, abs=1e-12)
        assert s_star == pytest.approx(0.31767, abs=1e-5)
        assert len(hits) == 1 and hits[0][1] == "A"

    def test_anticlockwise_section_at_beta_one(self):
        orbit = anticlockwise_orbit(1.0)
        n = orbit.section_n
        s_star, hits = time_to_next_event(make_shapley(1.0), orbit.section_state, 2, 1)
        want = (n[0] - n[2]) / (n[0] - n[2] + 1.0)
        assert s_star == pytest.approx(want, abs=1e-12)
        assert s_star == pytest.approx(0.12060, abs=1e-4)

    def test_generic_linear_tie(self):
        # one-pair race: leader at 0.5, chaser g below, targets 0 and 1
        g = 0.2
        game = make_shapley(0.0)  # targets: columns of the identity
        state = StateV(vA=(0.5, 0.5 - g, 0.0), vB=(0.2, 0.5, 0.3))
        s_star, hits = time_to_next_event(game, state, 2, 1)
        # moving toward column 2 = (0,1,0): gap-at-target is 1
        assert s_star == pytest.approx(g / (g + 1.0), abs=1e-12)
        assert hits[0][1] == "A" and hits[0][2] == (1, 2)

    def test_inconsistent_target_rejected(self):
        game = make_shapley(0.3)
        state = StateV(vA=(0.9, 0.2, 0.2), vB=(0.3, 0.2, 0.2))
        with pytest.raises(ParameterError):
            time_to_next_event(game, state, 1, 2)  # row 2 is not A's argmax


class TestAdvance:
    def test_s_zero_identity(self):
        st_ = StateV(vA=(0.5, 0.3, 0.2), vB=(0.1, 0.2, 0.7))
        out = advance(st_, (0, 1, 0), (0, 0, 1), 0.0)
        assert out.vA == st_.vA and out.vB == st_.vB

    def test_s_one_reaches_target(self):
        st_ = StateV(vA=(0.5, 0.3, 0.2), vB=(0.1, 0.2, 0.7))
        out = advance(st_, (0, 1, 0), (0, 0, 1), 1.0)
        assert out.vA == pytest.approx((0, 1, 0))
        assert out.vB == pytest.approx((0, 0, 1))

    def test_event_state_ties_first_pair(self):
        state, orbit = clockwise_section(0.0)
        t1 = orbit.durations[0]
        game = make_shapley(0.0)
        out = advance(state, game.A_columns[1], game.B_rows[0], t1)
        assert out.vA[0] == pytest.approx(out.vA[1], abs=1e-14)
        n = state.vA
        scale = 1.0 / (n[0] - n[1] + 1.0)
        assert out.vA == pytest.approx((n[0] * scale, n[0] * scale, n[2] * scale))


class TestTimeConversion:
    def test_zero(self):
        assert s_to_rho(0.0) == 0.0

    def test_known_value(self):
        assert s_to_rho(0.31767) == pytest.approx(0.38225, abs=1e-5)

    def test_log_two(self):
        assert rho_to_s(math.log(2.0)) == pytest.approx(0.5)

    def test_infinity_signal(self):
        assert s_to_rho(1.0) == math.inf

    @given(st.floats(0.0, 0.999999))
    def test_roundtrip(self, s):
        assert rho_to_s(s_to_rho(s)) == pytest.approx(s, abs=1e-12)


class TestStateConversion:
    def test_equilibrium_roundtrip(self):
        g = make_shapley(0.4)
        v = StateV(vA=((1.4) / 3,) * 3, vB=((0.6) / 3,) * 3)
        p = p_from_v(g, v)
        assert p.pA.components == pytest.approx((1 / 3,) * 3)
        assert p.pB.components == pytest.approx((1 / 3,) * 3)

    def test_roundtrip_random(self):
        rng = random.Random(5)
        for beta in (-0.9, -0.3, 0.2, 0.8, 1.0):
            g = make_shapley(beta)
            for _ in range(20):
                p0 = random_state(rng)
                v = v_from_p(g, p0)
                p1 = p_from_v(g, v)
                err = max(
                    max(abs(a - b) for a, b in zip(p0.pA.components, p1.pA.components)),
                    max(abs(a - b) for a, b in zip(p0.pB.components, p1.pB.components)),
                )
                assert err < 1e-10

    def test_out_of_image_raises(self):
        g = make_shapley(0.0)
        with pytest.raises(DomainError):
            p_from_v(g, StateV(vA=(2.0, 0.0, 0.0), vB=(1 / 3,) * 3))


class TestSimulate:
    def test_settles_on_clockwise_pattern(self):
        game = make_shapley(-0.5)
        traj = simulate(game, random_state(random.Random(11)), SimConfig(max_events=200))
        assert pattern_match(traj.region_sequence(), SHAPLEY_PATTERN, min_repeats=3)

    def test_orbit_section_closes(self):
        state, orbit = clockwise_section(0.5)
        traj = simulate(make_shapley(0.5), state, SimConfig(max_events=7))
        assert len(traj.segments) >= 6
        end = traj.segments[5].end
        err = max(
            max(abs(a - b) for a, b in zip(end.vA, state.vA)),
            max(abs(a - b) for a, b in zip(end.vB, state.vB)),
        )
        assert err < 1e-9
        durations = [s.duration_s for s in traj.segments[:6]]
        assert durations[0::2] == pytest.approx([orbit.durations[0]] * 3)
        assert durations[1::2] == pytest.approx([orbit.durations[1]] * 3)

    def test_start_at_equilibrium(self):
        game = make_shapley(0.3)
        st_ = StateP(pA=SimplexPoint((1 / 3,) * 3), pB=SimplexPoint((1 / 3,) * 3))
        traj = simulate(game, st_, SimConfig(max_events=10))
        assert traj.stop_reason == "equilibrium"
        assert len(traj.segments) == 0
        assert traj.events[0].kind == EQUILIBRIUM_REACHED

    def test_conservation(self):
        rng = random.Random(3)
        for beta in (-0.6, 0.45):
            game = make_shapley(beta)
            traj = simulate(game, random_state(rng), SimConfig(max_events=150))
            for seg in traj.segments:
                assert abs(sum(seg.end.vA) - (1 + beta)) < 1e-9
                assert abs(sum(seg.end.vB) - (1 - beta)) < 1e-9

    def test_event_margins(self):
        game = make_shapley(-0.25)
        cfg = SimConfig(max_events=80)
        traj = simulate(game, random_state(random.Random(9)), cfg)
        assert traj.stop_reason == "max_events"
        for ev, seg in zip(traj.events, traj.segments):
            if ev.kind != SINGLE_INDIFFERENCE:
                continue
            v = seg.end.vA if ev.player == "A" else seg.end.vB
            assert abs(v[ev.pair[0] - 1] - v[ev.pair[1] - 1]) <= cfg.tol_tie

    def test_segment_chaining(self):
        game = make_shapley(0.7)
        traj = simulate(game, random_state(random.Random(2)), SimConfig(max_events=60))
        for a, b in zip(traj.segments, traj.segments[1:]):
            assert a.end.vA == b.start.vA and a.end.vB == b.start.vB

    def test_max_time_cap_in_s(self):
        game = make_shapley(-0.4)
        traj = simulate(
            game, random_state(random.Random(4)),
            SimConfig(max_events=500, max_time=1.25, time_scale="s"),
        )
        assert traj.stop_reason == "max_time"
        assert sum(s.duration_s for s in traj.segments) == pytest.approx(1.25, abs=1e-9)

    def test_max_time_cap_in_rho(self):
        game = make_shapley(-0.4)
        traj = simulate(
            game, random_state(random.Random(4)),
            SimConfig(max_events=500, max_time=2.0, time_scale="rho"),
        )
        total_rho = sum(s_to_rho(s.duration_s) for s in traj.segments)
        assert traj.stop_reason == "max_time"
        assert total_rho == pytest.approx(2.0, abs=1e-9)

    def test_frozen_tie_is_ambiguous_at_beta_zero(self):
        # player B tied on {3,1} while A strictly prefers 1: the row target
        # (0,1,0) cannot separate the pair
        game = make_shapley(0.0)
        st_ = StateV(vA=(0.9, 0.05, 0.05), vB=(0.45, 0.1, 0.45))
        with pytest.raises(AmbiguousFlowError) as err:
            simulate(game, st_, SimConfig(max_events=10))
        assert err.value.player == "B"

    def test_same_state_fine_for_nonzero_beta(self):
        game = make_shapley(0.2)
        st_ = StateV(vA=(1.06, 0.07, 0.07), vB=(0.36, 0.08, 0.36))
        traj = simulate(game, st_, SimConfig(max_events=10))
        assert traj.stop_reason == "max_events"


class TestCodim2Handling:
    def test_crossing_passes_through(self):
        # a T piece for positive beta: B ties {1,2}, A ties {2,3}
        beta = 0.5
        game = make_shapley(beta)
        st_ = StateV(vA=(0.40, 0.55, 0.55), vB=(0.22, 0.22, 0.06))
        traj = simulate(game, st_, SimConfig(max_events=6))
        assert traj.events[0].kind == CODIM2_HIT
        assert traj.events[0].case is Codim2Case.CROSSING
        assert traj.stop_reason == "max_events"

    def test_saddle_stops(self):
        beta = -0.5
        game = make_shapley(beta)
        st_ = StateV(vA=(-0.1, 0.3, 0.3), vB=(0.6, 0.6, 0.3))
        traj = simulate(game, st_, SimConfig(max_events=6))
        assert traj.stop_reason == "discontinuity"

    def test_spiral_hit_enters_extension_mode(self):
        beta = 0.8
        game = make_shapley(beta)
        st_ = StateV(vA=(0.62, 0.62, 0.56), vB=(0.07, 0.07, 0.06))
        traj = simulate(game, st_, SimConfig(max_events=8, codim2_policy="follow_j"))
        kinds = [e.kind for e in traj.events]
        assert kinds[0] == CODIM2_HIT
        assert J_LEG_CROSSING in kinds

    def test_spiral_hit_abort_policy(self):
        beta = 0.8
        game = make_shapley(beta)
        st_ = StateV(vA=(0.62, 0.62, 0.56), vB=(0.07, 0.07, 0.06))
        traj = simulate(game, st_, SimConfig(max_events=8, codim2_policy="abort"))
        assert traj.stop_reason == "codim2_abort"


class TestJFlow:
    def test_gap_map_at_beta_08(self):
        beta = 0.8
        X = 0.05
        game = make_shapley(beta)
        n1 = (1 + beta - 2 * X) / 3
        n23 = (1 + beta + X) / 3
        mm = (1 - beta) / 3
        st_ = StateV(vA=(n1, n23, n23), vB=(mm, mm, mm))
        seg1, leg1 = j_flow_step(beta, st_, game)
        seg2, leg2 = j_flow_step(beta, seg1.end, game)
        gap = max(seg2.end.vA) - min(seg2.end.vA)
        assert gap == pytest.approx(j_map_F(beta, X), abs=1e-12)
        # closed form for this parameter
        want = X * 1.8 * 2.6 * 0.84 / (1.2 * (3 * 1.8**2 * X + 2.8 * 0.84))
        assert j_map_F(beta, X) == pytest.approx(want, abs=1e-15)

    def test_gaps_shrink_below_sigma(self):
        beta = 0.5
        game = make_shapley(beta)
        X = 0.05
        gaps = [X]
        mm = (1 - beta) / 3
        st_ = StateV(
            vA=((1 + beta - 2 * X) / 3, (1 + beta + X) / 3, (1 + beta + X) / 3),
            vB=(mm, mm, mm),
        )
        for _ in range(8):
            seg, _ = j_flow_step(beta, st_, game)
            st_ = seg.end
            spread = max(st_.vA) - min(st_.vA)
            spread_b = max(st_.vB) - min(st_.vB)
            gaps.append(max(spread, spread_b))
        assert gaps[-1] < gaps[1] < gaps[0] * 1.5
        assert gaps[-1] < 0.02

    def test_fixed_gap_preserved(self):
        from fpdyn.orbits import j_fixed_point

        beta = 0.85
        X = j_fixed_point(beta)
        game = make_shapley(beta)
        mm = (1 - beta) / 3
        st_ = StateV(
            vA=((1 + beta - 2 * X) / 3, (1 + beta + X) / 3, (1 + beta + X) / 3),
            vB=(mm, mm, mm),
        )
        seg1, _ = j_flow_step(beta, st_, game)
        seg2, _ = j_flow_step(beta, seg1.end, game)
        gap = max(seg2.end.vA) - min(seg2.end.vA)
        assert gap == pytest.approx(X, abs=1e-10)

    def test_equilibrium_is_non_unique(self):
        beta = 0.8
        st_ = StateV(vA=((1 + beta) / 3,) * 3, vB=((1 - beta) / 3,) * 3)
        with pytest.raises(AmbiguousFlowError):
            j_flow_step(beta, st_)

    def test_strict_state_rejected(self):
        with pytest.raises(AmbiguousFlowError):
            j_flow_step(0.8, StateV(vA=(0.9, 0.4, 0.3), vB=(0.1, 0.05, 0.02)))


class TestTrajectoryExports:
    def test_csv_header_exact(self):
        game = make_shapley(-0.3)
        traj = simulate(game, random_state(random.Random(1)), SimConfig(max_events=5))
        lines = list(trajectory_csv_lines(traj))
        assert lines[0] == (
            "event_index,s_cum,rho_cum,regionA,regionB,"
            "vA1,vA2,vA3,vB1,vB2,vB3,pA1,pA2,pA3,pB1,pB2,pB3,event_kind"
        )
        assert len(lines) == len(traj.segments) + 2
        assert lines[1].endswith(",init")

    def test_itinerary_entries(self):
        game = make_shapley(-0.3)
        traj = simulate(game, random_state(random.Random(1)), SimConfig(max_events=5))
        itin = traj.itinerary()
        assert len(itin) == len(traj.segments)
        for entry in itin:
            assert set(entry) == {"A", "B", "duration_s", "duration_rho"}
            assert entry["duration_rho"] >= entry["duration_s"]


class TestPiecewiseLinearity:
    def test_half_time_states_interpolate(self):
        game = make_shapley(0.35)
        traj = simulate(game, random_state(random.Random(8)), SimConfig(max_events=10))
        for seg in traj.segments[:5]:
            s_half = seg.duration_s / 2
            mid = advance(seg.start, seg.targetA, seg.targetB, s_half)
            # mid must lie halfway along the chord in the time-rescaled sense
            frac = s_half / seg.duration_s
            chord = tuple(
                a + frac * (b - a) for a, b in zip(seg.start.vA, seg.end.vA)
            )
            assert max(abs(x - y) for x, y in zip(mid.vA, chord)) < 1e-12
