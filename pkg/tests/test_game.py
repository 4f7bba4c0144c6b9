import pytest
from hypothesis import given, strategies as st

from fpdyn.errors import DomainError, ParameterError
from fpdyn.game import (
    GOLDEN_MEAN,
    BimatrixGame,
    SimplexPoint,
    StateP,
    best_response_set,
    check_transversality,
    game_from_json,
    interior_equilibrium,
    make_shapley,
    utilities,
    zero_sum_certificate,
)


def uniform_state():
    third = SimplexPoint((1 / 3, 1 / 3, 1 / 3))
    return StateP(pA=third, pB=third)


class TestMakeShapley:
    def test_beta_zero_matrices(self):
        g = make_shapley(0.0)
        assert g.A == ((1, 0, 0), (0, 1, 0), (0, 0, 1))
        assert g.B == ((0, 1, 0), (0, 0, 1), (1, 0, 0))

    def test_beta_half_entries(self):
        g = make_shapley(0.5)
        assert g.A[0][2] == 0.5
        assert g.B[0][0] == -0.5
        assert g.B[0][1] == 1.0

    def test_beta_one_sums(self):
        g = make_shapley(1.0)
        for j in range(3):
            assert sum(g.A[i][j] for i in range(3)) == pytest.approx(2.0)
        for i in range(3):
            assert sum(g.B[i]) == pytest.approx(0.0)

    @pytest.mark.parametrize("beta", [-1.0, -1.5, 1.0001, 2.0])
    def test_out_of_range(self, beta):
        with pytest.raises(ParameterError):
            make_shapley(beta)

    def test_singular_rejected_for_general_games(self):
        with pytest.raises(ParameterError):
            BimatrixGame.from_matrices([[1, 1], [1, 1]], [[1, 0], [0, 1]])


class TestUtilities:
    def test_uniform_state_gives_constant_utilities(self):
        for beta in (-0.6, 0.0, 0.7, 1.0):
            g = make_shapley(beta)
            v = utilities(g, uniform_state())
            assert v.vA == pytest.approx(((1 + beta) / 3,) * 3)
            assert v.vB == pytest.approx(((1 - beta) / 3,) * 3)

    def test_pure_column_at_beta_zero(self):
        g = make_shapley(0.0)
        st_ = StateP(pA=SimplexPoint((1 / 3, 1 / 3, 1 / 3)), pB=SimplexPoint((1, 0, 0)))
        assert utilities(g, st_).vA == pytest.approx((1.0, 0.0, 0.0))

    def test_pure_row_at_beta_one(self):
        g = make_shapley(1.0)
        st_ = StateP(pA=SimplexPoint((1, 0, 0)), pB=SimplexPoint((1 / 3, 1 / 3, 1 / 3)))
        assert utilities(g, st_).vB == pytest.approx((-1.0, 1.0, 0.0))

    def test_sum_invariant(self):
        import random

        rng = random.Random(0)
        for beta in (-0.8, -0.2, 0.4, 0.95):
            g = make_shapley(beta)
            for _ in range(50):
                raw = [rng.random() + 1e-3 for _ in range(6)]
                pa = SimplexPoint(tuple(x / sum(raw[:3]) for x in raw[:3]))
                pb = SimplexPoint(tuple(x / sum(raw[3:]) for x in raw[3:]))
                v = utilities(g, StateP(pA=pa, pB=pb))
                assert sum(v.vA) == pytest.approx(1 + beta, abs=1e-10)
                assert sum(v.vB) == pytest.approx(1 - beta, abs=1e-10)


class TestBestResponse:
    def test_strict(self):
        br = best_response_set((0.5, 0.3, 0.2), tol=1e-9)
        assert br.indices == (1,)
        assert br.margin == pytest.approx(0.2)

    def test_exact_tie(self):
        br = best_response_set((0.4, 0.4, 0.2), tol=1e-9)
        assert br.indices == (1, 2)
        assert br.margin == 0.0

    def test_near_tie_within_tolerance(self):
        br = best_response_set((0.4, 0.4 - 1e-12, 0.2), tol=1e-9)
        assert br.indices == (1, 2)

    @given(
        st.lists(st.integers(-1000, 1000), min_size=3, max_size=3),
        st.integers(-500, 500),
        st.floats(0.1, 100),
    )
    def test_shift_and_scale_invariance(self, ticks, c_ticks, s):
        # gaps are multiples of 0.01, far from the tie tolerance, so the
        # thresholded argmax set equals the exact one on both sides
        v = [t / 100 for t in ticks]
        c = c_ticks / 100
        base = best_response_set(v).indices
        assert best_response_set([x + c for x in v]).indices == base
        assert best_response_set([s * x for x in v]).indices == base


class TestInteriorEquilibrium:
    def test_family_barycenter(self):
        for k in range(25):
            beta = -0.95 + 1.95 * k / 24
            eq = interior_equilibrium(make_shapley(beta))
            for p in (eq.pA, eq.pB):
                assert max(abs(x - 1 / 3) for x in p) < 1e-12

    def test_equal_utilities(self):
        g = make_shapley(0.5)
        eq = interior_equilibrium(g)
        v = utilities(g, eq)
        assert v.vA == pytest.approx((0.5, 0.5, 0.5))

    def test_dominant_strategy_game_has_no_interior_equilibrium(self):
        # equal-utility condition forces the weights off the simplex
        g = BimatrixGame.from_matrices(
            [[2, 2], [1, 1]], [[1, 0], [0, 1]], allow_singular=True
        )
        with pytest.raises(DomainError):
            interior_equilibrium(g)


class TestTransversality:
    def test_generic_beta_passes(self):
        assert check_transversality(make_shapley(0.5)).ok

    def test_beta_zero_fails_with_column_violation(self):
        rep = check_transversality(make_shapley(0.0))
        assert not rep.ok
        assert any(v.matrix == "A" and v.line == "column" for v in rep.violations)

    def test_beta_one_fails_in_a_columns(self):
        rep = check_transversality(make_shapley(1.0))
        assert not rep.ok
        assert any(
            v.matrix == "A" and v.line_index == 1 and v.pair == (1, 2)
            for v in rep.violations
        )
        assert all(v.matrix == "A" for v in rep.violations)


class TestZeroSumCertificate:
    def test_zero_at_golden_mean(self):
        assert zero_sum_certificate(GOLDEN_MEAN) <= 1e-12

    def test_beta_zero(self):
        assert zero_sum_certificate(0.0) > 0.3

    def test_near_golden_mean(self):
        for beta in (GOLDEN_MEAN - 0.01, GOLDEN_MEAN + 0.01):
            assert 0.0 < zero_sum_certificate(beta) < 0.05

    def test_grid_minimum(self):
        grid = [-0.99 + 1.98 * k / 399 for k in range(400)]
        best = min(grid, key=zero_sum_certificate)
        assert abs(best - GOLDEN_MEAN) < 1.98 / 399


class TestSimplexPoint:
    def test_renormalizes(self):
        p = SimplexPoint((0.2, 0.3, 0.5 + 5e-12))
        assert sum(p.components) == pytest.approx(1.0, abs=1e-15)

    def test_clips_tiny_negative(self):
        p = SimplexPoint((-5e-13, 0.5, 0.5))
        assert p.components[0] == 0.0

    def test_rejects_large_negative(self):
        with pytest.raises(DomainError):
            SimplexPoint((-1e-6, 0.5, 0.5))

    def test_rejects_bad_sum(self):
        with pytest.raises(DomainError):
            SimplexPoint((0.5, 0.5, 0.5))

    @given(st.lists(st.floats(1e-6, 1.0), min_size=3, max_size=3))
    def test_normalized_inputs_roundtrip(self, raw):
        total = sum(raw)
        p = SimplexPoint(tuple(x / total for x in raw))
        assert sum(p.components) == pytest.approx(1.0, abs=1e-12)
        assert min(p.components) >= 0.0


class TestGameJson:
    def test_family_spec(self):
        g = game_from_json('{"family":"shapley","beta":0.25}')
        assert g.beta == 0.25

    def test_matrix_spec(self):
        g = game_from_json('{"A":[[1,0],[0,1]],"B":[[0,1],[1,0]]}')
        assert g.n == 2

    def test_rejects_unknown(self):
        with pytest.raises(ParameterError):
            game_from_json('{"family":"other","beta":0.1}')
