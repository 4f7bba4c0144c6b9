"""Section-to-section transition maps as projective transformations.

For parameters at or below zero, every strict-preference region along the
six-region cycle has a single exit face, and the hit map from one face to
the next is a central projection: in affine section coordinates it takes
the form z -> L(z) / f(z) with L and f affine.  Such maps send lines to
lines, compose by multiplying homogeneous matrices, and restrict to
Moebius transformations on every line -- which is what forces every
interior section point to converge to the periodic orbit's fixed point.

Maps are recovered numerically from the exact simulator: five samples in
general position determine the homogeneous matrix, and twenty held-out
samples verify the fit to 1e-8.  Cross-ratio preservation and the
strict-contraction property are checked in the test suite.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ExistenceError, ModelFitError, ParameterError
from .flow import SimConfig, SINGLE_INDIFFERENCE, simulate, v_from_p
from .game import BimatrixGame, SimplexPoint, StateP, StateV, make_shapley
from .geometry import indifference_anchors
from .orbits import clockwise_orbit

_FIT_TOL = 1e-8


@dataclass(frozen=True)
class SectionId:
    """An exit face of the six-region cycle.

    The face where ``tie_player`` ties on ``pair`` while the other player
    strictly prefers ``strict``; crossing it enters region ``entering``.
    """

    tie_player: str
    pair: tuple[int, int]
    strict: int
    entering: tuple[int, int]


#: The six faces of the clockwise cycle in crossing order: the k-th face
#: is the entry face of the k-th cycle region.
CYCLE_SECTIONS: tuple[SectionId, ...] = (
    SectionId("B", (1, 2), 1, (1, 2)),
    SectionId("A", (1, 2), 2, (2, 2)),
    SectionId("B", (2, 3), 2, (2, 3)),
    SectionId("A", (2, 3), 3, (3, 3)),
    SectionId("B", (3, 1), 3, (3, 1)),
    SectionId("A", (3, 1), 1, (1, 1)),
)


@dataclass(frozen=True)
class ProjectiveMap:
    """A projective transformation of 3-dimensional section coordinates.

    Stored as a homogeneous 4x4 matrix acting on (z, 1); normalized so
    the bottom-right entry is 1 when it is not (numerically) zero.
    """

    H: tuple[tuple[float, float, float, float], ...]
    source: SectionId | None = None
    target: SectionId | None = None

    @staticmethod
    def from_array(H: np.ndarray, source=None, target=None) -> "ProjectiveMap":
        H = np.asarray(H, dtype=float)
        if H.shape != (4, 4):
            raise ParameterError("homogeneous matrix must be 4x4")
        if abs(H[3, 3]) > 1e-12:
            H = H / H[3, 3]
        else:
            H = H / np.max(np.abs(H))
        return ProjectiveMap(tuple(tuple(row) for row in H), source, target)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.H)

    def apply(self, z) -> tuple[float, float, float]:
        h = self.matrix
        w = h @ np.array([z[0], z[1], z[2], 1.0])
        if abs(w[3]) < 1e-300:
            raise DomainError("point maps to infinity under the projective map")
        return (w[0] / w[3], w[1] / w[3], w[2] / w[3])

    @staticmethod
    def identity() -> "ProjectiveMap":
        return ProjectiveMap.from_array(np.eye(4))


def compose(T2: ProjectiveMap, T1: ProjectiveMap) -> ProjectiveMap:
    """The projective map T2 o T1 (matrix product, renormalized)."""
    return ProjectiveMap.from_array(T2.matrix @ T1.matrix, T1.source, T2.target)


# ---------------------------------------------------------------------------
# section charts


def section_coords(game: BimatrixGame, sec: SectionId, state: StateV):
    """Affine coordinates on a face: two utilities of the strict player's
    vector and the tied player's tie value."""
    if sec.tie_player == "B":
        return (state.vA[0], state.vA[1], state.vB[sec.pair[0] - 1])
    return (state.vB[0], state.vB[1], state.vA[sec.pair[0] - 1])


def section_state(game: BimatrixGame, sec: SectionId, z) -> StateV:
    beta = game.beta
    if beta is None:
        raise ParameterError("section charts require a family game")
    sum_a = 1.0 + beta
    sum_b = 1.0 - beta
    k, l = sec.pair[0] - 1, sec.pair[1] - 1
    third = 3 - k - l
    if sec.tie_player == "B":
        vA = (z[0], z[1], sum_a - z[0] - z[1])
        vB = [0.0, 0.0, 0.0]
        vB[k] = vB[l] = z[2]
        vB[third] = sum_b - 2.0 * z[2]
        return StateV(vA=vA, vB=tuple(vB))
    vB = (z[0], z[1], sum_b - z[0] - z[1])
    vA = [0.0, 0.0, 0.0]
    vA[k] = vA[l] = z[2]
    vA[third] = sum_a - 2.0 * z[2]
    return StateV(vA=tuple(vA), vB=vB)


def sample_section_point(game: BimatrixGame, sec: SectionId, rng: random.Random) -> StateV:
    """Random valid state on the face, with the natural product measure.

    The tied player's opponent coordinate is drawn on the indifference
    segment; the strict player's simplex point is rejection-sampled from
    its preference kite.
    """
    loci = {("A", tuple(sorted(l.pair))): l for l in indifference_anchors(game.beta)
            if l.player == "A"}
    loci.update({("B", tuple(sorted(l.pair))): l for l in indifference_anchors(game.beta)
                 if l.player == "B"})
    key = (sec.tie_player, tuple(sorted(sec.pair)))
    locus = loci[key]
    center = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    for _ in range(10000):
        u = rng.uniform(0.02, 0.98)
        on_line = tuple((1.0 - u) * c + u * r
                        for c, r in zip(center, locus.end_r.components))
        free = tuple(rng.expovariate(1.0) for _ in range(3))
        tot = sum(free)
        free = tuple(x / tot for x in free)
        if sec.tie_player == "B":
            pA = SimplexPoint(on_line)
            pB = SimplexPoint(free)
        else:
            pA = SimplexPoint(free)
            pB = SimplexPoint(on_line)
        state = v_from_p(game, StateP(pA=pA, pB=pB))
        strict_v = state.vA if sec.tie_player == "B" else state.vB
        top = max(strict_v)
        if strict_v[sec.strict - 1] < top - 1e-12 or top - sorted(strict_v)[-2] < 1e-6:
            continue
        tied_v = state.vB if sec.tie_player == "B" else state.vA
        k, l = sec.pair[0] - 1, sec.pair[1] - 1
        third = 3 - k - l
        if tied_v[k] - tied_v[third] < 1e-6:
            continue
        return state
    raise ModelFitError(f"could not sample a valid point on face {sec}")


def _flow_one_region(game: BimatrixGame, sec_from: SectionId, sec_to: SectionId, state: StateV) -> StateV:
    """Hit map through the single region entered from ``sec_from``."""
    traj = simulate(game, state, SimConfig(max_events=2, codim2_policy="abort"))
    if not traj.segments:
        raise ModelFitError("sampled point produced no segment")
    seg = traj.segments[0]
    if (seg.regionA, seg.regionB) != sec_from.entering:
        raise ModelFitError(
            f"sampled point entered region {(seg.regionA, seg.regionB)}, "
            f"expected {sec_from.entering}"
        )
    ev = traj.events[0]
    if ev.kind != SINGLE_INDIFFERENCE or ev.player != sec_to.tie_player \
            or tuple(sorted(ev.pair)) != tuple(sorted(sec_to.pair)):
        raise ModelFitError(
            f"exit event {ev.kind}/{ev.player}/{ev.pair} does not match face {sec_to}"
        )
    return seg.end


def projective_from_samples(
    game: BimatrixGame,
    sec_from: SectionId,
    sec_to: SectionId,
    rng: random.Random,
    n_verify: int = 20,
    max_attempts: int = 8,
) -> ProjectiveMap:
    """Fit the one-region hit map as a projective transformation.

    Five samples in general position determine the homogeneous matrix up
    to scale; the fit must reproduce ``n_verify`` held-out points within
    1e-8, otherwise the map is not projective and a ModelFitError is
    raised (resampling first, in case of a degenerate sample set).
    """
    for _ in range(max_attempts):
        pairs = []
        for _ in range(5 + n_verify):
            st = sample_section_point(game, sec_from, rng)
            z = section_coords(game, sec_from, st)
            out = _flow_one_region(game, sec_from, sec_to, st)
            zp = section_coords(game, sec_to, out)
            pairs.append((z, zp))
        rows = []
        for z, zp in pairs[:5]:
            zh = (z[0], z[1], z[2], 1.0)
            for r in range(3):
                row = [0.0] * 16
                row[4 * r: 4 * r + 4] = zh
                row[12:16] = [-zp[r] * c for c in zh]
                rows.append(row)
        # 15 equations in 16 homogeneous unknowns: the kernel vector is the
        # map; a rank-deficient system means the samples were degenerate.
        _, sv, vt = np.linalg.svd(np.array(rows))
        if sv[-1] < 1e-10 * sv[0]:
            continue  # samples not in general position; resample
        pm = ProjectiveMap.from_array(vt[-1].reshape(4, 4), sec_from, sec_to)
        resid = max(
            max(abs(a - b) for a, b in zip(pm.apply(z), zp)) for z, zp in pairs[5:]
        )
        if resid < _FIT_TOL:
            return pm
        raise ModelFitError(
            f"hit map {sec_from} -> {sec_to} failed verification (residual {resid:.3e})"
        )
    raise ModelFitError(
        f"hit map {sec_from} -> {sec_to}: sample sets kept degenerating"
    )


@dataclass(frozen=True)
class FirstReturn:
    beta: float
    map: ProjectiveMap
    leg_maps: tuple[ProjectiveMap, ...]
    fixed_point: StateV
    fixed_point_coords: tuple[float, float, float]
    verification_residual: float


def first_return(beta: float, seed: int = 20240, n_verify: int = 20) -> FirstReturn:
    """First-return map to the clockwise cycle's base face, for beta <= 0.

    Composes the six one-region projective maps; the interior fixed point
    is recovered from the dominant eigenvector of the homogeneous matrix
    and refined by iteration, and must coincide with the clockwise
    orbit's section point.
    """
    b = float(beta)
    if not (-1.0 < b <= 0.0):
        raise ParameterError(
            f"first-return analysis supports beta in (-1, 0]; beta={b} admits "
            "multiple routes between regions"
        )
    game = make_shapley(b)
    rng = random.Random(seed)
    legs = []
    for k in range(6):
        legs.append(
            projective_from_samples(
                game, CYCLE_SECTIONS[k], CYCLE_SECTIONS[(k + 1) % 6], rng,
                n_verify=n_verify,
            )
        )
    P = legs[0]
    for m in legs[1:]:
        P = compose(m, P)
    P = ProjectiveMap.from_array(P.matrix, CYCLE_SECTIONS[0], CYCLE_SECTIONS[0])

    eigvals, eigvecs = np.linalg.eig(P.matrix)
    order = np.argsort(-np.abs(eigvals))
    z = None
    for idx in order:
        if abs(eigvals[idx].imag) > 1e-9:
            continue
        vec = eigvecs[:, idx].real
        if abs(vec[3]) < 1e-12:
            continue
        z = tuple(vec[:3] / vec[3])
        break
    if z is None:
        raise ExistenceError("no real fixed point found in the return map spectrum")
    for _ in range(200):
        z = P.apply(z)
    orbit = clockwise_orbit(b)
    z_orbit = section_coords(game, CYCLE_SECTIONS[0], orbit.section_state)
    resid = max(abs(a - c) for a, c in zip(z, z_orbit))
    fixed_state = section_state(game, CYCLE_SECTIONS[0], z)
    return FirstReturn(
        beta=b, map=P, leg_maps=tuple(legs), fixed_point=fixed_state,
        fixed_point_coords=tuple(z), verification_residual=resid,
    )


# ---------------------------------------------------------------------------
# global attraction check


@dataclass(frozen=True)
class AttractionReport:
    beta: float
    n_starts: int
    horizon: int
    converged: int
    fixed_point: StateV
    outliers: tuple[int, ...]

    @property
    def converged_fraction(self) -> float:
        return self.converged / self.n_starts if self.n_starts else math.nan

    def to_json_dict(self) -> dict:
        return {
            "beta": self.beta,
            "fixed_point": {
                "vA": list(self.fixed_point.vA),
                "vB": list(self.fixed_point.vB),
            },
            "converged_fraction": self.converged_fraction,
            "outliers": list(self.outliers),
        }


def random_state(rng: random.Random, n: int = 3) -> StateP:
    """Uniform product-simplex state via normalized exponential variates."""
    def pt():
        raw = [rng.expovariate(1.0) for _ in range(n)]
        tot = sum(raw)
        return SimplexPoint(tuple(x / tot for x in raw))

    return StateP(pA=pt(), pB=pt())


_CYCLE = ((1, 2), (2, 2), (2, 3), (3, 3), (3, 1), (1, 1))


def _tail_is_cycle(seq, loops: int = 2) -> bool:
    """True when the last 6*loops regions follow the clockwise cycle."""
    need = 6 * loops
    if len(seq) < need:
        return False
    tail = seq[-need:]
    if tail[0] not in _CYCLE:
        return False
    base = _CYCLE.index(tail[0])
    return all(tail[t] == _CYCLE[(base + t) % 6] for t in range(need))


def attraction_check(
    beta: float,
    n_starts: int = 500,
    horizon: int = 300,
    seed: int = 7,
    radius: float = 1e-5,
) -> AttractionReport:
    """Fraction of random starts that settle onto the clockwise orbit.

    A start converges when its trailing itinerary follows the six-region
    cycle and its last crossing of the base face lies within ``radius``
    (max-norm, utility coordinates) of the orbit's section point.
    """
    b = float(beta)
    if not (-1.0 < b <= 0.0):
        raise ParameterError(f"attraction check supports beta in (-1, 0]; got {b}")
    game = make_shapley(b)
    orbit = clockwise_orbit(b)
    target = orbit.section_state
    rng = random.Random(seed)
    cfg = SimConfig(max_events=horizon, codim2_policy="abort")
    outliers = []
    converged = 0
    for k in range(n_starts):
        start = random_state(rng)
        try:
            traj = simulate(game, start, cfg)
        except Exception:
            outliers.append(k)
            continue
        last_hit = None
        for i, seg in enumerate(traj.segments):
            if (seg.regionA, seg.regionB) != (1, 1):
                continue
            if i + 1 < len(traj.segments) and \
                    (traj.segments[i + 1].regionA, traj.segments[i + 1].regionB) == (1, 2):
                last_hit = seg.end
        dist = (
            max(
                max(abs(a - c) for a, c in zip(last_hit.vA, target.vA)),
                max(abs(a - c) for a, c in zip(last_hit.vB, target.vB)),
            )
            if last_hit is not None
            else math.inf
        )
        if _tail_is_cycle(traj.region_sequence()) and dist < radius:
            converged += 1
        else:
            outliers.append(k)
    return AttractionReport(
        beta=b, n_starts=n_starts, horizon=horizon, converged=converged,
        fixed_point=target, outliers=tuple(outliers),
    )


# ---------------------------------------------------------------------------
# geometric helpers used by the property checks


def cross_ratio(t0, t1, t2, t3) -> float:
    """Cross-ratio of four collinear points given by line parameters."""
    return ((t0 - t2) * (t1 - t3)) / ((t1 - t2) * (t0 - t3))


def collinear_samples(z0, z1, params):
    """Points z0 + t (z1 - z0) for t in params."""
    return [tuple(a + t * (b - a) for a, b in zip(z0, z1)) for t in params]


def line_parameter(z, z0, z1) -> float:
    """Parameter of the projection of z onto the line through z0, z1."""
    d = [b - a for a, b in zip(z0, z1)]
    num = sum((c - a) * dd for c, a, dd in zip(z, z0, d))
    den = sum(dd * dd for dd in d)
    return num / den
