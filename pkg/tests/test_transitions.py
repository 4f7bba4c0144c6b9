import random

import pytest

from fpdyn.errors import ParameterError
from fpdyn.flow import SimConfig, simulate
from fpdyn.game import make_shapley
from fpdyn.geometry import J_LEGS, T_LEGS
from fpdyn.returnmap import random_state
from fpdyn.transitions import (
    ANTI_SHAPLEY_PATTERN,
    SHAPLEY_PATTERN,
    diagram_for,
    pattern_match,
    validate_itinerary,
)


class TestDiagrams:
    def test_regimes(self):
        assert diagram_for(-0.5).regime == "beta_negative"
        assert diagram_for(0.0).regime == "beta_zero"
        assert diagram_for(1e-12).regime == "beta_positive"
        assert diagram_for(1.0).regime == "beta_positive"

    def test_negative_diagram_only_cycle_is_the_six_cycle(self):
        dia = diagram_for(-0.5)
        # off-cycle regions have no incoming arcs, so every directed cycle
        # stays inside the six cycle regions, where each has a single exit
        targets = {b for _, b in dia.arcs}
        for off in ((1, 3), (2, 1), (3, 2)):
            assert off not in targets
        cycle_regions = set(SHAPLEY_PATTERN)
        for reg in cycle_regions:
            outs = [b for a, b in dia.arcs if a == reg]
            assert len(outs) == 1
        assert len(dia.arcs) == 18

    def test_positive_diagram_allows_both_cycles(self):
        dia = diagram_for(0.5)
        for pattern in (SHAPLEY_PATTERN, ANTI_SHAPLEY_PATTERN):
            for k in range(6):
                assert dia.allows(pattern[k], pattern[(k + 1) % 6])

    def test_zero_diagram_flags_ambiguous_faces(self):
        dia = diagram_for(0.0)
        assert len(dia.ambiguous_faces) == 6
        assert ("B", (1, 2), 2) in dia.ambiguous_faces

    def test_positive_corner_types(self):
        dia = diagram_for(0.8)
        assert sum(1 for v in dia.corner_types.values() if v == "spiral") == 6
        assert sum(1 for v in dia.corner_types.values() if v == "transversal") == 3
        for leg in J_LEGS:
            assert dia.corner_types[leg] == "spiral"
        for leg in T_LEGS:
            assert dia.corner_types[leg] == "transversal"

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            diagram_for(-1.0)

    def test_json_export(self):
        d = diagram_for(0.4).to_json_dict()
        assert d["regime"] == "beta_positive"
        assert ["1,1", "1,2"] in d["arcs"]


class TestValidateItinerary:
    def test_simulated_itineraries_validate(self):
        for beta in (-0.5, 0.8):
            game = make_shapley(beta)
            dia = diagram_for(beta)
            rng = random.Random(1)
            for _ in range(20):
                traj = simulate(game, random_state(rng), SimConfig(max_events=150))
                assert validate_itinerary(traj.region_sequence(), dia) is None
                assert validate_itinerary(traj.itinerary(), dia) is None

    def test_forbidden_transition_reported(self):
        dia = diagram_for(-0.5)
        fake = [(1, 2), (3, 3)]
        assert validate_itinerary(fake, dia) == 1

    def test_corner_crossing_allowed_for_positive_beta(self):
        dia = diagram_for(0.5)
        assert validate_itinerary([(3, 2), (2, 1)], dia) is None
        assert validate_itinerary([(3, 2), (2, 1)], diagram_for(-0.5)) == 1

    def test_double_tie_pieces_are_skipped(self):
        dia = diagram_for(0.8)
        assert validate_itinerary([(1, 2), (0, 0), (3, 3)], dia) is None


class TestPatternMatch:
    def test_negative_beta_matches_shapley(self):
        game = make_shapley(-0.5)
        traj = simulate(game, random_state(random.Random(3)), SimConfig(max_events=300))
        assert pattern_match(traj.region_sequence(), "shapley", min_repeats=5)
        assert not pattern_match(traj.region_sequence(), "anti_shapley", min_repeats=5)

    def test_high_beta_matches_anti_shapley(self):
        game = make_shapley(0.95)
        hits = 0
        for seed in range(6):
            traj = simulate(game, random_state(random.Random(seed)), SimConfig(max_events=600))
            if pattern_match(traj.region_sequence(), "anti_shapley", min_repeats=5):
                hits += 1
        assert hits >= 5  # typical behaviour; the attractor is the anticlockwise orbit

    def test_chaotic_band_matches_neither(self):
        game = make_shapley(0.75)
        dia = diagram_for(0.75)
        for seed in range(5):
            traj = simulate(game, random_state(random.Random(seed)), SimConfig(max_events=600))
            seq = traj.region_sequence()
            assert validate_itinerary(seq, dia) is None
            assert not pattern_match(seq, "shapley", min_repeats=5)
            assert not pattern_match(seq, "anti_shapley", min_repeats=5)

    def test_cyclic_shift_allowed(self):
        tail = list(SHAPLEY_PATTERN[3:]) + list(SHAPLEY_PATTERN) * 2 + list(SHAPLEY_PATTERN[:3])
        assert pattern_match(tail, "shapley", min_repeats=2)

    def test_unknown_pattern_rejected(self):
        with pytest.raises(ParameterError):
            pattern_match([(1, 2)] * 12, "sideways", 1)

    def test_explicit_pattern_sequences(self):
        assert SHAPLEY_PATTERN == ((1, 2), (2, 2), (2, 3), (3, 3), (3, 1), (1, 1))
        assert ANTI_SHAPLEY_PATTERN == ((1, 3), (1, 2), (3, 2), (3, 1), (2, 1), (2, 3))
