"""Game data model: payoff matrices, simplex states, utilities, best responses.

Conventions used throughout the package:

* Player A is the row player with payoff matrix ``A``; player B is the
  column player with payoff matrix ``B``.
* Strategy indices are 1-based in all public data structures (they match
  the strategy numbering used in itineraries and transition diagrams).
* The utility vectors are ``vA = A @ pB`` (column) and ``vB = pA @ B``
  (row); each player's best response is the argmax of their own utility
  vector.

The one-parameter family studied by the rest of the package is produced
by :func:`make_shapley`; its matrices are

    A = [[1, 0, b], [b, 1, 0], [0, b, 1]]
    B = [[-b, 1, 0], [0, -b, 1], [1, 0, -b]]

with parameter ``b`` in (-1, 1].  Column sums of A are 1+b and row sums
of B are 1-b, so utility-vector sums are conserved along the flow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, ParameterError, StructuralError

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0

#: Default tie tolerance, in utility units.  Event times are computed
#: analytically so accumulated error stays near machine epsilon; 1e-9
#: gives comfortable headroom.
TIE_TOL = 1e-9

_SIMPLEX_NEG_TOL = 1e-12
_SIMPLEX_SUM_TOL = 1e-10
_DET_TOL = 1e-12


@dataclass(frozen=True)
class SimplexPoint:
    """A probability vector.  Renormalizes on construction.

    Components may dip to -1e-12 (rounding at event boundaries); they are
    clipped to zero and the vector is rescaled to sum exactly to 1.
    """

    components: tuple[float, ...]

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        if len(comps) < 2:
            raise StructuralError("simplex point needs at least 2 components")
        lo = min(comps)
        if lo < -_SIMPLEX_NEG_TOL:
            raise DomainError(
                f"component {lo!r} below simplex tolerance", payload=comps
            )
        total = sum(comps)
        if abs(total - 1.0) > _SIMPLEX_SUM_TOL:
            raise DomainError(
                f"components sum to {total!r}, not 1", payload=comps
            )
        comps = tuple(max(c, 0.0) / total for c in comps)
        object.__setattr__(self, "components", comps)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)


@dataclass(frozen=True)
class StateP:
    """Simplex-space state: the pair of mixed strategies."""

    pA: SimplexPoint
    pB: SimplexPoint


@dataclass(frozen=True)
class StateV:
    """Utility-space state: vA = A @ pB, vB = pA @ B.

    This is the natural coordinate system for the flow; all event
    equations are linear in it.
    """

    vA: tuple[float, ...]
    vB: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "vA", tuple(float(x) for x in self.vA))
        object.__setattr__(self, "vB", tuple(float(x) for x in self.vB))


@dataclass(frozen=True)
class BestResponseSet:
    """Argmax set of a utility vector within a tie tolerance.

    ``margin`` is the gap between the best and second-best entries of the
    unthresholded vector; it is <= the tolerance exactly when the set has
    two or more indices.
    """

    indices: tuple[int, ...]
    margin: float
    player: str | None = None


@dataclass(frozen=True)
class BimatrixGame:
    """A two-player game with nonsingular n x n payoff matrices."""

    n: int
    A: tuple[tuple[float, ...], ...]
    B: tuple[tuple[float, ...], ...]
    beta: float | None = None

    @staticmethod
    def from_matrices(A, B, beta=None, allow_singular=False) -> "BimatrixGame":
        A_t = tuple(tuple(float(x) for x in row) for row in A)
        B_t = tuple(tuple(float(x) for x in row) for row in B)
        n = len(A_t)
        for M, name in ((A_t, "A"), (B_t, "B")):
            if len(M) != n or any(len(row) != n for row in M):
                raise StructuralError(f"matrix {name} is not {n}x{n}")
        if not allow_singular:
            for M, name in ((A_t, "A"), (B_t, "B")):
                scale = max(abs(x) for row in M for x in row) or 1.0
                if abs(np.linalg.det(np.array(M))) <= _DET_TOL * scale**n:
                    raise ParameterError(f"matrix {name} is singular")
        return BimatrixGame(n=n, A=A_t, B=B_t, beta=beta)

    @cached_property
    def A_columns(self) -> tuple[tuple[float, ...], ...]:
        """Columns of A: the targets of vA (indexed by B's strategy)."""
        return tuple(
            tuple(self.A[i][j] for i in range(self.n)) for j in range(self.n)
        )

    @cached_property
    def B_rows(self) -> tuple[tuple[float, ...], ...]:
        """Rows of B: the targets of vB (indexed by A's strategy)."""
        return self.B

    @cached_property
    def A_np(self) -> np.ndarray:
        return np.array(self.A, dtype=float)

    @cached_property
    def B_np(self) -> np.ndarray:
        return np.array(self.B, dtype=float)


def make_shapley(beta: float) -> BimatrixGame:
    """Build the one-parameter 3x3 family member at parameter ``beta``.

    ``beta`` must lie in (-1, 1].  At beta=1 the matrix B is singular;
    the game is still admitted (the flow itself never inverts B) and
    simplex recovery falls back to a constrained least-squares solve.
    """
    beta = float(beta)
    if not (-1.0 < beta <= 1.0):
        raise ParameterError(f"beta={beta} outside (-1, 1]")
    b = beta
    A = ((1.0, 0.0, b), (b, 1.0, 0.0), (0.0, b, 1.0))
    B = ((-b, 1.0, 0.0), (0.0, -b, 1.0), (1.0, 0.0, -b))
    return BimatrixGame.from_matrices(A, B, beta=beta, allow_singular=(beta == 1.0))


def game_from_json(text: str) -> BimatrixGame:
    """Parse a game spec: {"family":"shapley","beta":x} or {"A":..,"B":..}."""
    data = json.loads(text)
    if "family" in data:
        if data["family"] != "shapley":
            raise ParameterError(f"unknown family {data['family']!r}")
        return make_shapley(float(data["beta"]))
    if "A" in data and "B" in data:
        return BimatrixGame.from_matrices(data["A"], data["B"])
    raise ParameterError("game spec needs either 'family' or 'A' and 'B'")


def utilities(game: BimatrixGame, state: StateP) -> StateV:
    """Utility vectors of both players at a simplex state."""
    if len(state.pA) != game.n or len(state.pB) != game.n:
        raise StructuralError("state dimension does not match the game")
    pA = state.pA.components
    pB = state.pB.components
    vA = tuple(
        sum(game.A[i][j] * pB[j] for j in range(game.n)) for i in range(game.n)
    )
    vB = tuple(
        sum(pA[i] * game.B[i][j] for i in range(game.n)) for j in range(game.n)
    )
    return StateV(vA=vA, vB=vB)


def best_response_set(v, tol: float = TIE_TOL, player: str | None = None) -> BestResponseSet:
    """Indices within ``tol`` of the maximum of ``v``, with the raw margin."""
    if tol < 0:
        raise ParameterError("tol must be >= 0")
    vals = [float(x) for x in v]
    top = max(vals)
    indices = tuple(i + 1 for i, x in enumerate(vals) if x >= top - tol)
    rest = sorted(vals, reverse=True)
    margin = rest[0] - rest[1] if len(rest) > 1 else math.inf
    return BestResponseSet(indices=indices, margin=margin, player=player)


def interior_equilibrium(game: BimatrixGame) -> StateP:
    """The state at which both players are indifferent between everything.

    Solves A x = c 1 and y B = c' 1 and normalizes; raises DomainError
    (carrying the unnormalized solution) if the result is not strictly
    interior to the simplex.
    """
    n = game.n
    out = []
    # bordered systems: solve M p = c 1 together with sum(p) = 1, treating
    # the common utility c as an unknown; stays solvable at the family's
    # singular endpoint
    for M, side in ((game.B_np.T, "A"), (game.A_np, "B")):
        sys = np.zeros((n + 1, n + 1))
        sys[:n, :n] = M
        sys[:n, n] = -1.0
        sys[n, :n] = 1.0
        rhs = np.zeros(n + 1)
        rhs[n] = 1.0
        try:
            sol = np.linalg.solve(sys, rhs)
        except np.linalg.LinAlgError as exc:
            raise DomainError(f"equal-utility system is singular: {exc}") from exc
        p = sol[:n]
        if p.min() <= 0.0:
            raise DomainError(
                f"no interior equilibrium: player {side} solution leaves the simplex",
                payload=tuple(p),
            )
        out.append(SimplexPoint(tuple(p)))
    return StateP(pA=out[0], pB=out[1])


@dataclass(frozen=True)
class TransversalityViolation:
    matrix: str          # "A" or "B"
    line: str            # "column" of A / "row" of B
    line_index: int      # 1-based
    pair: tuple[int, int]


@dataclass(frozen=True)
class TransversalityReport:
    ok: bool
    violations: tuple[TransversalityViolation, ...]


def check_transversality(game: BimatrixGame, tol: float = 1e-12) -> TransversalityReport:
    """Sufficient condition for the flow to leave every single-tie line.

    Holds iff within each column of A all entries are pairwise distinct
    and within each row of B all entries are pairwise distinct.
    """
    scale = max(
        max(abs(x) for row in game.A for x in row),
        max(abs(x) for row in game.B for x in row),
        1.0,
    )
    bad = []
    n = game.n
    for j in range(n):
        col = [game.A[i][j] for i in range(n)]
        for a in range(n):
            for b in range(a + 1, n):
                if abs(col[a] - col[b]) <= tol * scale:
                    bad.append(
                        TransversalityViolation("A", "column", j + 1, (a + 1, b + 1))
                    )
    for i in range(n):
        row = game.B[i]
        for a in range(n):
            for b in range(a + 1, n):
                if abs(row[a] - row[b]) <= tol * scale:
                    bad.append(
                        TransversalityViolation("B", "row", i + 1, (a + 1, b + 1))
                    )
    return TransversalityReport(ok=not bad, violations=tuple(bad))


def zero_sum_certificate(beta: float) -> float:
    """Max-norm of A + s(B - 1) at parameter ``beta``, s the golden mean.

    Zero exactly when the family member is equivalent to a zero-sum game.
    """
    game = make_shapley(beta)
    s = GOLDEN_MEAN
    return max(
        abs(game.A[i][j] + s * (game.B[i][j] - 1.0))
        for i in range(3)
        for j in range(3)
    )
