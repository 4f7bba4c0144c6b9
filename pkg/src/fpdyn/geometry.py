"""Indifference sets, codimension-two pieces, and restricted 2x2 games.

A state is codimension-one when exactly one player ties between two
strategies, codimension-two when both do.  For the 3x3 family the nine
codimension-two product pieces split into six "spiral" pieces (the set J,
around which nearby orbits jitter for positive parameter values) and
three "crossing" pieces (the set T, which orbits traverse transversally).

Near a codimension-two piece the flow decomposes into a product of a
2x2 best-response flow and a linear decline in the remaining directions.
The 2x2 factor is classified into one of three local cases:

* Crossing     - no interior equilibrium; trajectories pass through.
* SpiralStable - interior equilibrium with the four quadrant targets
                 cycling around it; trajectories spiral inward.
* Saddle       - two opposite quadrants point outward along a diagonal;
                 the flow is genuinely non-unique on the piece.

``classify_codim2`` decides by a sign test on the 2x2 blocks that drive
the utility-difference flow; ``classify_codim2_by_simulation`` is a
brute-force reference that integrates the 2x2 flow from a grid of starts
and classifies by the observed limit behaviour.  The sign test is
validated against the simulation on every family piece and on random
games (see the test suite and ``fpdyn check``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ClassificationError, ParameterError, StructuralError
from .game import TIE_TOL, BimatrixGame, SimplexPoint, StateV, best_response_set


class Codim2Case(enum.Enum):
    CROSSING = "crossing"
    SPIRAL_STABLE = "spiral_stable"
    SADDLE = "saddle"


@dataclass(frozen=True)
class RegionLabel:
    """Strict-preference region: player A prefers i, player B prefers j."""

    i: int
    j: int

    def as_tuple(self):
        return (self.i, self.j)


@dataclass(frozen=True)
class TieReport:
    """Which player(s) tie, and on which locus the state sits.

    ``locus`` is one of "ZA" (only player A ties), "ZB" (only B),
    "J"/"T" (both tie on a spiral/crossing piece), "E" (all-tie), or
    "Zstar" for other double-tie patterns.
    """

    a_indices: tuple[int, ...]
    b_indices: tuple[int, ...]
    a_margin: float
    b_margin: float
    locus: str


# Cyclic order of the six spiral pieces, as (B tie pair, A tie pair).
# Trajectories on J visit them in exactly this order; consecutive legs
# share one player's pair while the other passes through its center line.
J_LEGS: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = (
    ((1, 2), (3, 1)),
    ((1, 2), (1, 2)),
    ((2, 3), (1, 2)),
    ((2, 3), (2, 3)),
    ((3, 1), (2, 3)),
    ((3, 1), (3, 1)),
)

# The three crossing pieces.
T_LEGS: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = (
    ((1, 2), (2, 3)),
    ((2, 3), (3, 1)),
    ((3, 1), (1, 2)),
)


@dataclass(frozen=True)
class JLeg:
    """One codimension-two product piece, in the J or T family."""

    kind: str  # "J" or "T"
    index: int  # 1-based position within its family's cyclic listing
    pairB: tuple[int, int]
    pairA: tuple[int, int]


def _norm_pair(pair) -> tuple[int, int]:
    a, b = sorted(int(x) for x in pair)
    if a == b or not (1 <= a <= 3 and 1 <= b <= 3):
        raise ParameterError(f"invalid strategy pair {pair!r}")
    # canonical order matches the cyclic listings: (3,1) not (1,3)
    if (a, b) == (1, 3):
        return (3, 1)
    return (a, b)


def leg_for_pairs(pairB, pairA) -> JLeg:
    pb, pa = _norm_pair(pairB), _norm_pair(pairA)
    for idx, (b, a) in enumerate(J_LEGS):
        if (b, a) == (pb, pa):
            return JLeg(kind="J", index=idx + 1, pairB=pb, pairA=pa)
    for idx, (b, a) in enumerate(T_LEGS):
        if (b, a) == (pb, pa):
            return JLeg(kind="T", index=idx + 1, pairB=pb, pairA=pa)
    raise StructuralError(f"pairs ({pairB}, {pairA}) are not a codim-2 piece")


def region_of(state: StateV, tol: float = TIE_TOL):
    """RegionLabel when both best responses are strict, else a TieReport."""
    bra = best_response_set(state.vA, tol, player="A")
    brb = best_response_set(state.vB, tol, player="B")
    if len(bra.indices) == 1 and len(brb.indices) == 1:
        return RegionLabel(i=bra.indices[0], j=brb.indices[0])
    if len(bra.indices) == 1:
        locus = "ZB"
    elif len(brb.indices) == 1:
        locus = "ZA"
    elif len(bra.indices) == 3 and len(brb.indices) == 3:
        locus = "E"
    elif len(bra.indices) == 2 and len(brb.indices) == 2:
        try:
            locus = leg_for_pairs(brb.indices, bra.indices).kind
        except StructuralError:
            locus = "Zstar"
    else:
        locus = "Zstar"
    return TieReport(
        a_indices=bra.indices,
        b_indices=brb.indices,
        a_margin=bra.margin,
        b_margin=brb.margin,
        locus=locus,
    )


def j_leg_of(state: StateV, tol: float = TIE_TOL) -> JLeg | None:
    """The J or T piece the state lies on, or None.

    States at the interior equilibrium report all-tie and get no leg.
    """
    rep = region_of(state, tol)
    if isinstance(rep, RegionLabel):
        return None
    if len(rep.a_indices) != 2 or len(rep.b_indices) != 2:
        return None
    return leg_for_pairs(rep.b_indices, rep.a_indices)


# ---------------------------------------------------------------------------
# indifference-line anchors


@dataclass(frozen=True)
class IndifferenceLocus:
    """One indifference line of the family, in the opponent's simplex.

    For player A, pair (i,j): the locus lives in player B's simplex and
    consists of the segment from the barycenter to ``end_r``; ``end_q``
    is where the extended line meets the boundary on the far side (None
    when the extension is parallel to that edge, at beta = -1/2 for the
    lines in player A's simplex).
    """

    player: str
    pair: tuple[int, int]
    end_r: SimplexPoint
    end_q: SimplexPoint | None


def _cyc(v: tuple[float, float, float], k: int) -> tuple[float, float, float]:
    # shift coordinates forward: k=1 sends (x1,x2,x3) -> (x3,x1,x2)
    for _ in range(k):
        v = (v[2], v[0], v[1])
    return v


def indifference_anchors(beta: float) -> tuple[IndifferenceLocus, ...]:
    """Segment endpoints (R) and far-side boundary points (Q) for all six lines.

    At beta=0 the R points are the edge midpoints; increasing beta rotates
    the lines so that at beta=1 the lines in player B's simplex pass
    through its corners.
    """
    if not (-1.0 < beta <= 1.0):
        raise ParameterError(f"beta={beta} outside (-1, 1]")

    def pt(v):
        # None when the point escapes the simplex (extension parallel to or
        # beyond the far edge, which happens for the Q points once beta < 0)
        total = sum(v)
        if abs(total) < 1e-12:
            return None
        scaled = tuple(x / total for x in v)
        if min(scaled) < -1e-12:
            return None
        return SimplexPoint(scaled)

    out = []
    # player A's lines in Sigma_B: pair {1,2} has R=(1,1-b,0)/(2-b), Q=(0,b,1)/(1+b);
    # the other pairs follow by cyclic coordinate shifts.
    r_a = (1.0, 1.0 - beta, 0.0)
    q_a = (0.0, beta, 1.0)
    for k, pair in enumerate(((1, 2), (2, 3), (3, 1))):
        out.append(
            IndifferenceLocus("A", pair, pt(_cyc(r_a, k)), pt(_cyc(q_a, k)))
        )
    # player B's lines in Sigma_A: pair {2,3} has R=(1+b,1,0)/(2+b), Q=(0,b,1+b)/(1+2b).
    r_b = (1.0 + beta, 1.0, 0.0)
    q_b = (0.0, beta, 1.0 + beta)
    for k, pair in enumerate(((2, 3), (3, 1), (1, 2))):
        out.append(
            IndifferenceLocus("B", pair, pt(_cyc(r_b, k)), pt(_cyc(q_b, k)))
        )
    return tuple(out)


# ---------------------------------------------------------------------------
# restricted 2x2 games


@dataclass(frozen=True)
class RestrictedGame2x2:
    """The 2x2 data governing the flow near a codimension-two piece.

    ``Asub``/``Bsub`` are the principal submatrices on B's tie pair (k,l)
    and A's tie pair (i,j) respectively.  ``flowA``/``flowB`` are the
    blocks that actually drive the local utility-difference flow: rows
    taken from A's tie pair, columns from B's tie pair, in both payoff
    matrices.  For a standalone 2x2 game the two coincide.
    """

    Asub: tuple[tuple[float, float], tuple[float, float]]
    Bsub: tuple[tuple[float, float], tuple[float, float]]
    indexA: tuple[int, int]
    indexB: tuple[int, int]
    flowA: tuple[tuple[float, float], tuple[float, float]]
    flowB: tuple[tuple[float, float], tuple[float, float]]

    @staticmethod
    def from_blocks(Asub, Bsub) -> "RestrictedGame2x2":
        A_t = tuple(tuple(float(x) for x in row) for row in Asub)
        B_t = tuple(tuple(float(x) for x in row) for row in Bsub)
        return RestrictedGame2x2(
            Asub=A_t, Bsub=B_t, indexA=(1, 2), indexB=(1, 2), flowA=A_t, flowB=B_t
        )


def restricted_game(game: BimatrixGame, pairA, pairB) -> RestrictedGame2x2:
    """Extract the restricted game at a codimension-two piece.

    ``pairA`` is player A's tie pair (i,j); ``pairB`` is player B's (k,l).
    """
    i, j = (int(x) for x in pairA)
    k, l = (int(x) for x in pairB)
    for x in (i, j, k, l):
        if not 1 <= x <= game.n:
            raise ParameterError(f"strategy index {x} out of range")
    if i == j or k == l:
        raise ParameterError("tie pairs must have distinct indices")
    i, j, k, l = i - 1, j - 1, k - 1, l - 1
    A, B = game.A, game.B
    Asub = ((A[k][k], A[k][l]), (A[l][k], A[l][l]))
    Bsub = ((B[i][i], B[i][j]), (B[j][i], B[j][j]))
    flowA = ((A[i][k], A[i][l]), (A[j][k], A[j][l]))
    flowB = ((B[i][k], B[i][l]), (B[j][k], B[j][l]))
    return RestrictedGame2x2(
        Asub=Asub, Bsub=Bsub, indexA=(i + 1, j + 1), indexB=(k + 1, l + 1),
        flowA=flowA, flowB=flowB,
    )


def _flow_differences(rg: RestrictedGame2x2):
    Af, Bf = rg.flowA, rg.flowB
    a1 = Af[0][0] - Af[1][0]  # A's gain for its first option when B plays k
    a2 = Af[0][1] - Af[1][1]  # ... when B plays l
    b1 = Bf[0][0] - Bf[0][1]  # B's gain for k when A plays i
    b2 = Bf[1][0] - Bf[1][1]  # ... when A plays j
    return a1, a2, b1, b2


def classify_codim2(rg: RestrictedGame2x2) -> Codim2Case:
    """Classify the local 2x2 flow by signs of the payoff differences.

    An interior equilibrium exists iff both difference pairs have strictly
    opposite signs; given one, the quadrant targets cycle (spiral) iff the
    two first-column differences have opposite signs, and form a saddle
    otherwise.  Validated against the simulation reference below.
    """
    a1, a2, b1, b2 = _flow_differences(rg)
    if min(abs(a1), abs(a2), abs(b1), abs(b2)) == 0.0:
        raise ClassificationError("non-generic restricted game (zero payoff difference)")
    if a1 * a2 >= 0.0 or b1 * b2 >= 0.0:
        return Codim2Case.CROSSING
    if a1 * b1 < 0.0:
        return Codim2Case.SPIRAL_STABLE
    return Codim2Case.SADDLE


def classify_codim2_by_simulation(
    rg: RestrictedGame2x2,
    grid: int = 10,
    horizon: float = 50.0,
    max_events: int = 5000,
) -> Codim2Case:
    """Brute-force reference classifier: integrate the 2x2 flow.

    Runs the exact event-driven best-response flow on the unit square
    from a ``grid`` x ``grid`` lattice of starts for ``horizon`` units of
    original (logarithmic) time, then classifies by where orbits end up:
    a single boundary point means Crossing, shrinking interior orbits
    mean SpiralStable, and two distinct boundary attractors mean Saddle.
    Deliberately independent of the sign test in :func:`classify_codim2`.
    """
    a1, a2, b1, b2 = _flow_differences(rg)
    if min(abs(a1), abs(a2), abs(b1), abs(b2)) == 0.0:
        raise ClassificationError("non-generic restricted game (zero payoff difference)")

    # indifference levels (A switches when y crosses ystar, B when x crosses xstar)
    ystar = a2 / (a2 - a1) if a1 != a2 else math.nan
    xstar = b2 / (b2 - b1) if b1 != b2 else math.nan
    has_interior = (0.0 < ystar < 1.0) and (0.0 < xstar < 1.0)

    corners = set()
    all_shrunk = has_interior

    for gi in range(grid):
        for gj in range(grid):
            x = (gi + 0.5) / grid
            y = (gj + 0.5) / grid
            if has_interior:
                r0 = max(abs(x - xstar), abs(y - ystar))
                if r0 < 1e-6:
                    continue
            ua = a1 * y + a2 * (1.0 - y)
            ub = b1 * x + b2 * (1.0 - x)
            pref_a = ua > 0.0  # True: first option
            pref_b = ub > 0.0
            if abs(ua) < 1e-12 or abs(ub) < 1e-12:
                # start sits exactly on an indifference line: resolve the
                # tied preference by where the initial motion carries it
                if abs(ua) < 1e-12 and abs(ub) < 1e-12:
                    continue  # exactly at the equilibrium point
                if abs(ub) < 1e-12:
                    dx = (1.0 if pref_a else 0.0) - x
                    dub = (b1 - b2) * dx
                    if dub == 0.0:
                        continue
                    pref_b = dub > 0.0
                else:
                    dy = (1.0 if pref_b else 0.0) - y
                    dua = (a1 - a2) * dy
                    if dua == 0.0:
                        continue
                    pref_a = dua > 0.0
            rho = 0.0
            halted = False
            for _ in range(max_events):
                tx = 1.0 if pref_a else 0.0
                ty = 1.0 if pref_b else 0.0
                s_best, who = 1.0, None
                if not math.isnan(ystar) and 0.0 < ystar < 1.0 and y != ty:
                    s = (ystar - y) / (ty - y)
                    if 1e-15 < s < s_best:
                        s_best, who = s, "A"
                if not math.isnan(xstar) and 0.0 < xstar < 1.0 and x != tx:
                    s = (xstar - x) / (tx - x)
                    if 1e-15 < s < s_best:
                        s_best, who = s, "B"
                    elif abs(s - s_best) < 1e-13 and who == "A":
                        who = "AB"
                if who is None:
                    x, y = tx, ty
                    halted = True
                    break
                x += s_best * (tx - x)
                y += s_best * (ty - y)
                rho -= math.log1p(-s_best) if s_best < 1.0 else math.inf
                if who in ("A", "AB"):
                    pref_a = not pref_a
                    y = ystar  # snap onto the crossing line
                if who in ("B", "AB"):
                    pref_b = not pref_b
                    x = xstar
                if rho >= horizon:
                    break
                if has_interior and max(abs(x - xstar), abs(y - ystar)) < 1e-9:
                    break
            if halted:
                corners.add((round(x), round(y)))
                all_shrunk = False
            elif has_interior:
                if max(abs(x - xstar), abs(y - ystar)) > 0.5 * r0:
                    all_shrunk = False

    if not has_interior:
        if len(corners) != 1:
            raise ClassificationError(
                f"inconsistent crossing behaviour: corners {sorted(corners)}"
            )
        return Codim2Case.CROSSING
    if all_shrunk and not corners:
        return Codim2Case.SPIRAL_STABLE
    if len(corners) >= 2:
        return Codim2Case.SADDLE
    raise ClassificationError(
        f"simulation inconclusive: corners {sorted(corners)}, shrunk={all_shrunk}"
    )
