"""Exact event-driven integration of the best-response flow.

The flow is piecewise linear in utility space: while the argmaxes of
``vA`` and ``vB`` are constant, both vectors move in straight lines
toward their targets (a column of A for ``vA``, a row of B for ``vB``)
and would reach them at segment time s = 1.  Every event time is the
root of a scalar affine equation, so there is no ODE stepper anywhere:
trajectories are exact up to floating-point rounding.

Original ("logarithmic") time relates to segment time by
rho = -ln(1 - s); both clocks are tracked.

When both players tie simultaneously the trajectory has hit a
codimension-two piece.  Crossing pieces are passed through; on spiral
pieces the flow continues, by its unique continuous extension, *inside*
the tie set (governed by ``SimConfig.codim2_policy``); on saddle pieces
the flow is genuinely non-unique and the simulator stops or perturbs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousFlowError,
    DomainError,
    ParameterError,
    StructuralError,
)
from .game import (
    TIE_TOL,
    BimatrixGame,
    SimplexPoint,
    StateP,
    StateV,
    interior_equilibrium,
    make_shapley,
    utilities,
)
from .geometry import (
    Codim2Case,
    JLeg,
    classify_codim2,
    j_leg_of,
    leg_for_pairs,
    restricted_game,
)

#: Two tie times closer than this are treated as one codimension-two hit.
SIMULTANEITY_TOL = 1e-10

# event kinds
SINGLE_INDIFFERENCE = "single_indifference"
CODIM2_HIT = "codim2_hit"
EQUILIBRIUM_REACHED = "equilibrium_reached"
DISCONTINUITY_HIT = "discontinuity_hit"
TRUNCATED = "truncated"
J_LEG_CROSSING = "j_leg_crossing"


def s_to_rho(s: float) -> float:
    """Convert a segment-time duration to original time (inf at s=1)."""
    if s < 0.0 or s > 1.0:
        raise ParameterError(f"s={s} outside [0, 1]")
    if s == 1.0:
        return math.inf
    return -math.log1p(-s)


def rho_to_s(rho: float) -> float:
    if rho < 0.0:
        raise ParameterError(f"rho={rho} negative")
    return -math.expm1(-rho)


@dataclass(frozen=True)
class SimConfig:
    tol_tie: float = TIE_TOL
    max_events: int = 1000
    max_time: float = math.inf
    time_scale: str = "s"  # "s" or "rho"
    codim2_policy: str = "follow_j"  # "follow_j" | "abort" | "perturb"
    perturb_eps: float = 1e-6
    equilibrium_radius: float = 1e-7

    def __post_init__(self):
        if self.tol_tie <= 0 or self.equilibrium_radius <= 0:
            raise ParameterError("tolerances must be positive")
        if self.time_scale not in ("s", "rho"):
            raise ParameterError(f"unknown time scale {self.time_scale!r}")
        if self.codim2_policy not in ("follow_j", "abort", "perturb"):
            raise ParameterError(f"unknown codim2 policy {self.codim2_policy!r}")
        if self.codim2_policy == "perturb" and self.perturb_eps <= self.tol_tie:
            raise ParameterError("perturb_eps must exceed tol_tie")
        if self.max_events < 1:
            raise ParameterError("max_events must be >= 1")


@dataclass(frozen=True)
class Segment:
    """One straight-line piece of a trajectory.

    ``end == (1-s) * start + s * (targetA, targetB)`` with s = duration_s.
    Region labels are the 1-based strict preferences; 0 marks a piece
    inside the double-tie set, where ``target*_col/row`` are None and the
    targets are convex combinations.
    """

    start: StateV
    end: StateV
    duration_s: float
    regionA: int
    regionB: int
    targetA: tuple[float, ...]
    targetB: tuple[float, ...]
    targetA_col: int | None
    targetB_row: int | None
    leg: JLeg | None = None

    @property
    def duration_rho(self) -> float:
        return s_to_rho(self.duration_s)


@dataclass(frozen=True)
class Event:
    index: int
    kind: str
    s_cum: float
    rho_cum: float
    player: str | None = None
    pair: tuple[int, int] | None = None
    margin: float | None = None
    leg: JLeg | None = None
    case: Codim2Case | None = None
    detail: str = ""


@dataclass
class Trajectory:
    game: BimatrixGame
    config: SimConfig
    initial_p: StateP | None
    initial_v: StateV
    segments: list[Segment] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    segment_end_kinds: list[str] = field(default_factory=list)
    stop_reason: str = ""

    def itinerary(self) -> list[dict]:
        return [
            {
                "A": seg.regionA,
                "B": seg.regionB,
                "duration_s": seg.duration_s,
                "duration_rho": s_to_rho(min(seg.duration_s, 1.0 - 1e-16)),
            }
            for seg in self.segments
        ]

    def region_sequence(self) -> list[tuple[int, int]]:
        return [(seg.regionA, seg.regionB) for seg in self.segments]

    def final_state(self) -> StateV:
        return self.segments[-1].end if self.segments else self.initial_v


# ---------------------------------------------------------------------------
# elementary steps


def advance(state: StateV, targetA, targetB, s: float) -> StateV:
    """Move both utility vectors a fraction ``s`` of the way to the targets."""
    if not 0.0 <= s <= 1.0:
        raise ParameterError(f"s={s} outside [0, 1]")
    r = 1.0 - s
    vA = tuple(r * v + s * t for v, t in zip(state.vA, targetA))
    vB = tuple(r * v + s * t for v, t in zip(state.vB, targetB))
    return StateV(vA=vA, vB=vB)


def _tie_candidates(v, target, cur0):
    """Times at which another coordinate overtakes the current maximum.

    A coordinate can only overtake if its target entry exceeds the
    leader's; the tie time then solves (1-s) d0 + s dT = 0.
    """
    out = []
    vc = v[cur0]
    tc = target[cur0]
    for b in range(len(v)):
        if b == cur0:
            continue
        dT = tc - target[b]
        if dT >= 0.0:
            continue
        d0 = vc - v[b]
        s = d0 / (d0 - dT)
        if s < 1e-15:
            s = 1e-15
        if s < 1.0:
            out.append((s, b))
    return out


def time_to_next_event(
    game: BimatrixGame,
    state: StateV,
    target_col: int,
    target_row: int,
    tol: float = TIE_TOL,
):
    """First tie time under the given pure targets.

    ``target_col`` is B's strategy (vA heads to that column of A) and
    ``target_row`` is A's (vB heads to that row of B).  Returns
    ``(s_star, hits)`` where hits lists (s, player, pair) for every tie
    within the simultaneity threshold of the first one, or ``(1.0, [])``
    if no tie occurs before the targets are reached.
    """
    n = game.n
    if not (1 <= target_col <= n and 1 <= target_row <= n):
        raise ParameterError("target indices out of range")
    TA = game.A_columns[target_col - 1]
    TB = game.B_rows[target_row - 1]
    iA = max(range(n), key=lambda k: state.vA[k])
    jB = max(range(n), key=lambda k: state.vB[k])
    if state.vA[target_row - 1] < state.vA[iA] - tol:
        raise ParameterError("target_row is not a best response for player A")
    if state.vB[target_col - 1] < state.vB[jB] - tol:
        raise ParameterError("target_col is not a best response for player B")
    cands = [
        (s, "A", (target_row, b + 1))
        for s, b in _tie_candidates(state.vA, TA, target_row - 1)
    ]
    cands += [
        (s, "B", (target_col, b + 1))
        for s, b in _tie_candidates(state.vB, TB, target_col - 1)
    ]
    if not cands:
        return 1.0, []
    s_star = min(c[0] for c in cands)
    hits = [c for c in cands if c[0] <= s_star + SIMULTANEITY_TOL]
    return s_star, hits


# ---------------------------------------------------------------------------
# state <-> simplex conversions


def v_from_p(game: BimatrixGame, state: StateP) -> StateV:
    return utilities(game, state)


def _solve_simplex(M: np.ndarray, rhs: np.ndarray, side: str) -> np.ndarray:
    """Solve M p = rhs with the simplex sum constraint appended.

    The constraint restores uniqueness in the rank-deficient boundary
    case of the family (beta = 1, where B is singular).
    """
    n = M.shape[0]
    stacked = np.vstack([M, np.ones((1, n))])
    target = np.append(rhs, 1.0)
    p, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    resid = np.max(np.abs(stacked @ p - target))
    if resid > 1e-8:
        raise DomainError(
            f"utility vector not in the simplex image (player {side}, residual {resid:.3e})",
            payload=tuple(p),
        )
    return p


def p_from_v(game: BimatrixGame, state: StateV) -> StateP:
    """Recover the simplex state from utilities; errors if outside the image."""
    pB = _solve_simplex(game.A_np, np.array(state.vA), "B")
    pA = _solve_simplex(game.B_np.T, np.array(state.vB), "A")
    for p, side in ((pA, "A"), (pB, "B")):
        if p.min() < -1e-8:
            raise DomainError(
                f"recovered p{side} has component {p.min():.3e} < -1e-8",
                payload=tuple(p),
            )

    def clean(p):
        q = np.clip(p, 0.0, None)
        return SimplexPoint(tuple(q / q.sum()))

    return StateP(pA=clean(pA), pB=clean(pB))


# ---------------------------------------------------------------------------
# continuous-extension (double-tie) machinery


def _j_mix(vec_first, vec_second, equal_pair0):
    """Convex mix of two target vectors with equal entries on a pair.

    Returns (weight on the first, mixed vector), or None when no convex
    mix exists.  Boundary weights are admitted with a small tolerance:
    at the family's endpoint beta=1 one extension mix degenerates to a
    pure strategy, and the extension flow is still well defined there.
    """
    k, l = equal_pair0
    d1 = vec_first[k] - vec_first[l]
    d2 = vec_second[k] - vec_second[l]
    if d1 == d2:
        return None
    w = d2 / (d2 - d1)
    if not (-1e-9 <= w <= 1.0 + 1e-9):
        return None
    w = min(max(w, 0.0), 1.0)
    mixed = tuple(w * a + (1.0 - w) * b for a, b in zip(vec_first, vec_second))
    return w, mixed


def j_targets(game: BimatrixGame, pairB, pairA):
    """Targets keeping both ties: A mixes its tied pair so that B's tied
    utilities stay equal, and vice versa.  None if no interior mix exists
    (the piece is not of spiral type)."""
    k, l = pairB[0] - 1, pairB[1] - 1
    i, j = pairA[0] - 1, pairA[1] - 1
    mixB = _j_mix(game.B_rows[i], game.B_rows[j], (k, l))
    mixA = _j_mix(game.A_columns[k], game.A_columns[l], (i, j))
    if mixB is None or mixA is None:
        return None
    return mixA[1], mixB[1]


def _j_next_pair(game, crossing: str, fixed_pair, old_pair):
    """New tie pair after the crossing player's utilities equalize.

    The continuation must keep both ties and pull the crossing player's
    third coordinate below the tie; the continuous extension admits
    exactly one such pair.  ``old_pair`` may be None when the previous
    leg is unknown (a trajectory started exactly on a leg boundary).
    """
    candidates = []
    for pair in ((1, 2), (2, 3), (3, 1)):
        if old_pair is not None and set(pair) == set(old_pair):
            continue
        pairA, pairB = (pair, fixed_pair) if crossing == "A" else (fixed_pair, pair)
        tg = j_targets(game, pairB, pairA)
        if tg is None:
            continue
        TA, TB = tg
        # only the crossing player's third coordinate must fall below its
        # new tie; the fixed player's third is mid-leg and still approaching
        tgt, p = (TA, pairA) if crossing == "A" else (TB, pairB)
        t0 = p[0] - 1
        third = 3 - (p[0] - 1) - (p[1] - 1)
        if tgt[t0] > tgt[third]:
            candidates.append(pair)
    if len(candidates) != 1:
        raise AmbiguousFlowError(
            f"no unique continuation on the double-tie set (candidates {candidates})"
        )
    return candidates[0]


def _snap_pair(v, idx):
    m = sum(v[k] for k in idx) / len(idx)
    for k in idx:
        v[k] = m


def _snap_all(v):
    m = sum(v) / len(v)
    for k in range(len(v)):
        v[k] = m


# ---------------------------------------------------------------------------
# the simulator


def _equilibrium_v(game: BimatrixGame) -> StateV | None:
    try:
        eq = interior_equilibrium(game)
    except DomainError:
        return None
    return utilities(game, eq)


def _dist_inf(vA, vB, other: StateV) -> float:
    return max(
        max(abs(x - y) for x, y in zip(vA, other.vA)),
        max(abs(x - y) for x, y in zip(vB, other.vB)),
    )


def _resolve_single_tie(tied_idx, target):
    """Winner of a tie by separation rate under the active target.

    Tied coordinates move toward their target entries, so the largest
    entry wins; equal top entries mean the tie is frozen (the line is
    non-transversal) and the flow is ambiguous.
    """
    ranked = sorted(tied_idx, key=lambda k: target[k], reverse=True)
    if target[ranked[0]] - target[ranked[1]] <= 1e-12:
        return None
    return ranked[0]


def _argmax_set0(v, tol):
    m = max(v)
    return [k for k in range(len(v)) if v[k] >= m - tol]


def _consistent_exits(game, pairA0, pairB0):
    """Strict-region continuations from a codimension-two point.

    A pair (a, b) of choices is consistent when each player's chosen
    strategy pulls ahead of its tie partner under the implied targets.
    Crossing pieces admit exactly one, saddles two, spirals none.
    """
    out = []
    for a in pairA0:
        other_a = pairA0[0] if a == pairA0[1] else pairA0[1]
        for b in pairB0:
            other_b = pairB0[0] if b == pairB0[1] else pairB0[1]
            TA = game.A_columns[b]
            TB = game.B_rows[a]
            if TA[a] > TA[other_a] + 1e-14 and TB[b] > TB[other_b] + 1e-14:
                out.append((a, b))
    return out


def simulate(game: BimatrixGame, init, config: SimConfig | None = None) -> Trajectory:
    """Run the exact event-driven flow from an initial state.

    ``init`` may be a StateP or a StateV.  Stops at max_events, max_time,
    on reaching the interior equilibrium, when the motion degenerates
    (no finite tie time), or at a codimension-two point whose policy says
    to stop.  Raises AmbiguousFlowError when the flow is not uniquely
    defined at the current state (frozen tie on a non-transversal line).
    """
    cfg = config or SimConfig()
    if isinstance(init, StateP):
        p0 = init
        v0 = v_from_p(game, init)
    elif isinstance(init, StateV):
        v0 = init
        try:
            p0 = p_from_v(game, init)
        except DomainError:
            p0 = None
    else:
        raise StructuralError(f"init must be StateP or StateV, got {type(init)!r}")

    traj = Trajectory(game=game, config=cfg, initial_p=p0, initial_v=v0)
    vE = _equilibrium_v(game)
    tol = cfg.tol_tie
    vA = list(v0.vA)
    vB = list(v0.vB)
    s_cum = 0.0
    rho_cum = 0.0

    def emit(kind, **kw):
        traj.events.append(
            Event(index=len(traj.events), kind=kind, s_cum=s_cum, rho_cum=rho_cum, **kw)
        )

    def clock():
        return s_cum if cfg.time_scale == "s" else rho_cum

    if vE is not None and _dist_inf(vA, vB, vE) < cfg.equilibrium_radius:
        emit(EQUILIBRIUM_REACHED)
        traj.stop_reason = "equilibrium"
        return traj

    # --- resolve the starting mode and preferences
    mode = "regions"
    leg: JLeg | None = None
    setA = _argmax_set0(vA, tol)
    setB = _argmax_set0(vB, tol)
    iA = setA[0]
    jB = setB[0]
    if len(setA) > 1 and len(setB) > 1:
        if len(setA) == 3 and len(setB) == 3:
            raise AmbiguousFlowError(
                "start has all utilities tied (the equilibrium; flow non-unique)"
            )
        if len(setA) == 3 or len(setB) == 3:
            # a leg boundary of the double-tie set: one player's utilities
            # all equal, the other pair-tied; the extension is unique
            if cfg.codim2_policy != "follow_j":
                traj.stop_reason = "codim2_abort"
                emit(CODIM2_HIT, detail="leg boundary at initial state")
                return traj
            if len(setA) == 3:
                fixed = tuple(sorted(x + 1 for x in setB))
                newp = _j_next_pair(game, "A", fixed, None)
                leg = leg_for_pairs(fixed, newp)
                _snap_all(vA)
                _snap_pair(vB, setB)
            else:
                fixed = tuple(sorted(x + 1 for x in setA))
                newp = _j_next_pair(game, "B", fixed, None)
                leg = leg_for_pairs(newp, fixed)
                _snap_all(vB)
                _snap_pair(vA, setA)
            mode = "j"
            emit(CODIM2_HIT, leg=leg, case=Codim2Case.SPIRAL_STABLE,
                 detail="leg boundary at initial state")
        else:
            pairA = tuple(sorted(x + 1 for x in setA))
            pairB = tuple(sorted(x + 1 for x in setB))
            case = classify_codim2(restricted_game(game, pairA, pairB))
            leg = leg_for_pairs(pairB, pairA)
            emit(CODIM2_HIT, leg=leg, case=case, pair=pairA, detail="initial state")
            if case is Codim2Case.CROSSING:
                exits = _consistent_exits(game, setA, setB)
                if len(exits) != 1:
                    raise AmbiguousFlowError(
                        f"expected one crossing continuation, found {len(exits)}"
                    )
                iA, jB = exits[0]
            elif case is Codim2Case.SPIRAL_STABLE and cfg.codim2_policy == "follow_j":
                mode = "j"
                _snap_pair(vA, setA)
                _snap_pair(vB, setB)
            elif cfg.codim2_policy == "perturb":
                vA[setA[0]] += cfg.perturb_eps
                vA[setA[1]] -= cfg.perturb_eps
                iA = setA[0]
                jB = _resolve_single_tie(setB, game.B_rows[iA])
                if jB is None:
                    raise AmbiguousFlowError("perturbed start still frozen")
            else:
                if case is Codim2Case.SADDLE:
                    emit(DISCONTINUITY_HIT, leg=leg, case=case)
                    traj.stop_reason = "discontinuity"
                else:
                    traj.stop_reason = "codim2_abort"
                return traj
    elif len(setA) > 1:
        win = _resolve_single_tie(setA, game.A_columns[jB])
        if win is None:
            raise AmbiguousFlowError(
                f"player A tie {tuple(x + 1 for x in setA)} is frozen under "
                f"column target {jB + 1} (non-transversal line)",
                player="A",
                pair=tuple(x + 1 for x in setA),
            )
        iA = win
    elif len(setB) > 1:
        win = _resolve_single_tie(setB, game.B_rows[iA])
        if win is None:
            raise AmbiguousFlowError(
                f"player B tie {tuple(x + 1 for x in setB)} is frozen under "
                f"row target {iA + 1} (non-transversal line)",
                player="B",
                pair=tuple(x + 1 for x in setB),
            )
        jB = win

    # --- main loop
    while len(traj.events) < cfg.max_events:
        start = StateV(tuple(vA), tuple(vB))

        if mode == "regions":
            TA = game.A_columns[jB]
            TB = game.B_rows[iA]
            cands = [(s, "A", b) for s, b in _tie_candidates(vA, TA, iA)]
            cands += [(s, "B", b) for s, b in _tie_candidates(vB, TB, jB)]
            region = (iA + 1, jB + 1)
            tacol, tbrow = jB + 1, iA + 1
        else:
            tg = j_targets(game, leg.pairB, leg.pairA)
            if tg is None:
                raise AmbiguousFlowError(f"extension flow undefined on leg {leg}")
            TA, TB = tg
            cands = []
            for v, tgt, pair, who in ((vA, TA, leg.pairA, "A"), (vB, TB, leg.pairB, "B")):
                t0 = pair[0] - 1
                third = 3 - (pair[0] - 1) - (pair[1] - 1)
                d0 = v[t0] - v[third]
                dT = tgt[t0] - tgt[third]
                if d0 > 0.0 and dT < 0.0:
                    s = d0 / (d0 - dT)
                    if 1e-12 < s < 1.0:
                        cands.append((s, who, third))
            region = (0, 0)
            tacol = tbrow = None

        s_star = min((c[0] for c in cands), default=1.0)
        s_dur = s_star
        capped = False
        if math.isfinite(cfg.max_time):
            left = cfg.max_time - clock()
            s_allow = left if cfg.time_scale == "s" else rho_to_s(max(left, 0.0))
            if s_allow <= s_dur:
                s_dur = min(max(s_allow, 0.0), 1.0)
                capped = True

        if capped or not cands:
            end = advance(start, TA, TB, s_dur)
            s_cum += s_dur
            rho_cum += s_to_rho(min(s_dur, 1.0 - 1e-16))
            if s_dur > 0.0:
                traj.segments.append(
                    Segment(
                        start=start, end=end, duration_s=s_dur,
                        regionA=region[0], regionB=region[1],
                        targetA=TA, targetB=TB,
                        targetA_col=tacol, targetB_row=tbrow,
                        leg=leg if mode == "j" else None,
                    )
                )
                traj.segment_end_kinds.append(TRUNCATED)
            vA = list(end.vA)
            vB = list(end.vB)
            emit(TRUNCATED, detail="max_time" if capped else "no finite tie time")
            traj.stop_reason = "max_time" if capped else "truncated"
            return traj

        hits = [c for c in cands if c[0] <= s_star + SIMULTANEITY_TOL]
        end = advance(start, TA, TB, s_star)
        vA = list(end.vA)
        vB = list(end.vB)
        s_cum += s_star
        rho_cum += s_to_rho(s_star)
        # snap the tied coordinates exactly equal before recording the
        # segment end, so consecutive segments chain bit-for-bit
        if mode == "j" and len(hits) == 1:
            _snap_all(vA if hits[0][1] == "A" else vB)
        elif mode == "regions":
            snap_a = {iA} | {o for _, w, o in hits if w == "A"}
            snap_b = {jB} | {o for _, w, o in hits if w == "B"}
            if len(snap_a) > 1:
                _snap_pair(vA, sorted(snap_a))
            if len(snap_b) > 1:
                _snap_pair(vB, sorted(snap_b))
        end = StateV(tuple(vA), tuple(vB))
        traj.segments.append(
            Segment(
                start=start, end=end, duration_s=s_star,
                regionA=region[0], regionB=region[1],
                targetA=TA, targetB=TB,
                targetA_col=tacol, targetB_row=tbrow,
                leg=leg if mode == "j" else None,
            )
        )

        if mode == "j":
            if len(hits) > 1:
                traj.segment_end_kinds.append(DISCONTINUITY_HIT)
                emit(DISCONTINUITY_HIT, detail="simultaneous leg crossings")
                traj.stop_reason = "discontinuity"
                return traj
            _, who, third = hits[0]
            if who == "A":
                new_pair = _j_next_pair(game, "A", leg.pairB, leg.pairA)
                leg = leg_for_pairs(leg.pairB, new_pair)
            else:
                new_pair = _j_next_pair(game, "B", leg.pairA, leg.pairB)
                leg = leg_for_pairs(new_pair, leg.pairA)
            traj.segment_end_kinds.append(J_LEG_CROSSING)
            emit(J_LEG_CROSSING, player=who, leg=leg)
        else:
            a_hits = [h for h in hits if h[1] == "A"]
            b_hits = [h for h in hits if h[1] == "B"]
            if a_hits and b_hits:
                if len(a_hits) > 1 or len(b_hits) > 1:
                    traj.segment_end_kinds.append(DISCONTINUITY_HIT)
                    emit(DISCONTINUITY_HIT, detail="higher-codimension hit")
                    traj.stop_reason = "discontinuity"
                    return traj
                newA, newB = a_hits[0][2], b_hits[0][2]
                pairA = tuple(sorted((iA + 1, newA + 1)))
                pairB = tuple(sorted((jB + 1, newB + 1)))
                hit_leg = leg_for_pairs(pairB, pairA)
                case = classify_codim2(restricted_game(game, pairA, pairB))
                traj.segment_end_kinds.append(CODIM2_HIT)
                emit(CODIM2_HIT, leg=hit_leg, case=case, pair=pairA)
                if case is Codim2Case.CROSSING:
                    iA, jB = newA, newB
                elif case is Codim2Case.SPIRAL_STABLE:
                    if cfg.codim2_policy == "follow_j":
                        mode = "j"
                        leg = hit_leg
                    elif cfg.codim2_policy == "perturb":
                        vA[iA] += cfg.perturb_eps
                        vA[newA] -= cfg.perturb_eps
                    else:
                        traj.stop_reason = "codim2_abort"
                        return traj
                else:  # saddle
                    if cfg.codim2_policy == "perturb":
                        vA[iA] += cfg.perturb_eps
                        vA[newA] -= cfg.perturb_eps
                    else:
                        emit(DISCONTINUITY_HIT, leg=hit_leg, case=case)
                        traj.stop_reason = "discontinuity"
                        return traj
            elif len(a_hits) == 2:
                iA = _resolve_triple(vA, game.A_columns[jB], iA, a_hits, "A")
                traj.segment_end_kinds.append(SINGLE_INDIFFERENCE)
                emit(SINGLE_INDIFFERENCE, player="A", pair=(iA + 1, iA + 1),
                     margin=0.0, detail="triple tie resolved by rate")
            elif len(b_hits) == 2:
                jB = _resolve_triple(vB, game.B_rows[iA], jB, b_hits, "B")
                traj.segment_end_kinds.append(SINGLE_INDIFFERENCE)
                emit(SINGLE_INDIFFERENCE, player="B", pair=(jB + 1, jB + 1),
                     margin=0.0, detail="triple tie resolved by rate")
            elif a_hits:
                old, new = iA, a_hits[0][2]
                margin = abs(vA[old] - vA[new])
                iA = new
                traj.segment_end_kinds.append(SINGLE_INDIFFERENCE)
                emit(SINGLE_INDIFFERENCE, player="A", pair=(old + 1, new + 1),
                     margin=margin)
            else:
                old, new = jB, b_hits[0][2]
                margin = abs(vB[old] - vB[new])
                jB = new
                traj.segment_end_kinds.append(SINGLE_INDIFFERENCE)
                emit(SINGLE_INDIFFERENCE, player="B", pair=(old + 1, new + 1),
                     margin=margin)

        if vE is not None and _dist_inf(vA, vB, vE) < cfg.equilibrium_radius:
            emit(EQUILIBRIUM_REACHED)
            traj.stop_reason = "equilibrium"
            return traj

    traj.stop_reason = "max_events"
    return traj


def _resolve_triple(v, target, cur, hits, who):
    cands = [h[2] for h in hits]
    ranked = sorted(cands, key=lambda k: target[k], reverse=True)
    if target[ranked[0]] - target[ranked[1]] <= 1e-12:
        raise AmbiguousFlowError(
            f"player {who} triple tie with equal separation rates", player=who
        )
    return ranked[0]


# ---------------------------------------------------------------------------
# one continuous-extension step, as a standalone operation


def j_flow_step(beta: float, state: StateV, game: BimatrixGame | None = None):
    """Advance a state on a spiral double-tie piece to the next leg boundary.

    Returns ``(segment, new_leg)``.  The state must tie both players on
    exactly two strategies each; the segment ends when the moving
    player's three utilities equalize.
    """
    if not (0.0 < beta <= 1.0):
        raise ParameterError(f"extension flow requires beta in (0, 1], got {beta}")
    if game is None:
        game = make_shapley(beta)
    leg = j_leg_of(state)
    if leg is not None and leg.kind != "J":
        raise AmbiguousFlowError(
            f"state lies on a crossing piece ({leg.pairB}, {leg.pairA})"
        )
    traj = simulate(game, state, SimConfig(max_events=2, codim2_policy="follow_j"))
    if traj.stop_reason == "equilibrium":
        raise AmbiguousFlowError(
            "state is at the interior equilibrium, where the flow is non-unique"
        )
    if not traj.segments or traj.segments[0].leg is None:
        raise AmbiguousFlowError("state is not on a double-tie piece")
    seg = traj.segments[0]
    new_leg = next((e.leg for e in traj.events if e.kind == J_LEG_CROSSING), seg.leg)
    return seg, new_leg


# ---------------------------------------------------------------------------
# exports


def trajectory_csv_lines(traj: Trajectory):
    """Exact-format CSV rows for a trajectory, header included."""
    yield (
        "event_index,s_cum,rho_cum,regionA,regionB,"
        "vA1,vA2,vA3,vB1,vB2,vB3,pA1,pA2,pA3,pB1,pB2,pB3,event_kind"
    )

    def fmt(x):
        return f"{x:.12g}"

    def prow(state):
        try:
            p = p_from_v(traj.game, state)
            return list(p.pA.components) + list(p.pB.components)
        except DomainError:
            return [math.nan] * 6

    first = traj.segments[0] if traj.segments else None
    state = traj.initial_v
    vals = [0.0, 0.0]
    vals += [first.regionA if first else 0, first.regionB if first else 0]
    vals += list(state.vA) + list(state.vB) + prow(state)
    yield "0," + ",".join(fmt(v) for v in vals) + ",init"
    s_cum = 0.0
    rho_cum = 0.0
    for k, seg in enumerate(traj.segments):
        s_cum += seg.duration_s
        rho_cum += s_to_rho(min(seg.duration_s, 1.0 - 1e-16))
        kind = traj.segment_end_kinds[k] if k < len(traj.segment_end_kinds) else ""
        vals = [s_cum, rho_cum, seg.regionA, seg.regionB]
        vals += list(seg.end.vA) + list(seg.end.vB) + prow(seg.end)
        yield f"{k + 1}," + ",".join(fmt(v) for v in vals) + f",{kind}"


def itinerary_json(traj: Trajectory) -> str:
    return json.dumps(traj.itinerary())
