"""Programmatic invariant suite behind ``fpdyn check``.

Each check raises InvariantFailure with a diagnostic message; the run
function collects (name, ok, detail) triples.  The test suite drives the
same functions and adds exact-value assertions on top.
"""

from __future__ import annotations

import random
from collections import Counter

import numpy as np

from .errors import AmbiguousFlowError, InvariantFailure
from .flow import SimConfig, j_flow_step, simulate, v_from_p
from .game import (
    GOLDEN_MEAN,
    StateV,
    best_response_set,
    interior_equilibrium,
    make_shapley,
    utilities,
    zero_sum_certificate,
)
from .geometry import (
    Codim2Case,
    J_LEGS,
    T_LEGS,
    RestrictedGame2x2,
    classify_codim2,
    classify_codim2_by_simulation,
    indifference_anchors,
    restricted_game,
)
from .orbits import (
    anticlockwise_cubic,
    anticlockwise_orbit,
    anticlockwise_perturbation_matrix,
    clockwise_cubic,
    clockwise_orbit,
    find_tau,
    j_map_F,
    stability_matrix,
    symmetric_third_jacobian,
    _RELABEL_CHART,
    _third_map_raw,
)
from .returnmap import (
    CYCLE_SECTIONS,
    attraction_check,
    collinear_samples,
    cross_ratio,
    first_return,
    line_parameter,
    projective_from_samples,
    random_state,
    sample_section_point,
    section_coords,
)
from .transitions import (
    ANTI_SHAPLEY_PATTERN,
    SHAPLEY_PATTERN,
    diagram_for,
    validate_itinerary,
)


def _fail(msg):
    raise InvariantFailure(msg)


# --------------------------------------------------------------------- game


def check_utility_sums(n_beta=20, n_states=20, seed=0):
    """Utility sums equal the constant column/row sums for every state."""
    rng = random.Random(seed)
    for k in range(n_beta):
        beta = -0.99 + (1.99 - 1e-9) * k / (n_beta - 1)
        game = make_shapley(beta)
        for _ in range(n_states):
            st = random_state(rng)
            v = utilities(game, st)
            if abs(sum(v.vA) - (1 + beta)) > 1e-10 or abs(sum(v.vB) - (1 - beta)) > 1e-10:
                _fail(f"utility sums off at beta={beta}")
    return f"{n_beta * n_states} states conserve utility sums"


def check_best_response_invariance(n=200, seed=1):
    """Argmax sets are unchanged by shifts and positive scalings."""
    rng = random.Random(seed)
    for _ in range(n):
        v = [rng.uniform(-2, 2) for _ in range(3)]
        c = rng.uniform(-5, 5)
        s = rng.uniform(0.01, 10)
        base = best_response_set(v).indices
        if best_response_set([x + c for x in v]).indices != base:
            _fail(f"shift changed the argmax set for {v}")
        if best_response_set([s * x for x in v]).indices != base:
            _fail(f"positive scaling changed the argmax set for {v}")
    return f"{n} random vectors invariant under shift and scale"


def check_interior_equilibrium(n=200):
    """The family's equilibrium is the barycenter pair for every beta."""
    for k in range(n):
        beta = -0.99 + 1.99 * k / (n - 1)
        eq = interior_equilibrium(make_shapley(beta))
        err = max(abs(x - 1.0 / 3.0) for x in tuple(eq.pA) + tuple(eq.pB))
        if err > 1e-12:
            _fail(f"equilibrium off barycenter at beta={beta}: {err:.2e}")
    return f"{n} parameters give the barycenter equilibrium within 1e-12"


def check_zero_sum_certificate(n=400):
    """The zero-sum residual vanishes exactly at the golden mean."""
    if zero_sum_certificate(GOLDEN_MEAN) > 1e-12:
        _fail("residual at the golden mean exceeds 1e-12")
    best = min(
        (-0.995 + 1.99 * k / (n - 1) for k in range(n)),
        key=zero_sum_certificate,
    )
    if abs(best - GOLDEN_MEAN) > 1.99 / (n - 1):
        _fail(f"grid minimum at {best}, not at the golden mean")
    return f"residual minimized at the golden mean over a {n}-point grid"


# ----------------------------------------------------------------- geometry


_BETA_GRID = (-0.9, -0.5, -0.1, 0.1, 0.5, 0.9)
_PAIRS = ((1, 2), (2, 3), (3, 1))


def _random_restricted_game(rng):
    # keep payoff differences bounded away from zero so the brute-force
    # flow classifier stays fast and unambiguous
    while True:
        A = [[rng.uniform(-1, 1) for _ in range(2)] for _ in range(2)]
        B = [[rng.uniform(-1, 1) for _ in range(2)] for _ in range(2)]
        rg = RestrictedGame2x2.from_blocks(A, B)
        a1 = A[0][0] - A[1][0]
        a2 = A[0][1] - A[1][1]
        b1 = B[0][0] - B[0][1]
        b2 = B[1][0] - B[1][1]
        if min(abs(a1), abs(a2), abs(b1), abs(b2)) > 0.05:
            return rg


def check_codim2_oracle(n_random=500, seed=11):
    """The sign-test classifier agrees with the brute-force flow oracle."""
    count = 0
    for beta in _BETA_GRID:
        game = make_shapley(beta)
        for pa in _PAIRS:
            for pb in _PAIRS:
                rg = restricted_game(game, pa, pb)
                fast = classify_codim2(rg)
                slow = classify_codim2_by_simulation(rg)
                if fast is not slow:
                    _fail(
                        f"beta={beta} pairA={pa} pairB={pb}: "
                        f"sign test {fast.value}, oracle {slow.value}"
                    )
                count += 1
    rng = random.Random(seed)
    for _ in range(n_random):
        rg = _random_restricted_game(rng)
        fast = classify_codim2(rg)
        slow = classify_codim2_by_simulation(rg)
        if fast is not slow:
            _fail(f"random game {rg.flowA}/{rg.flowB}: {fast.value} vs {slow.value}")
        count += 1
    return f"{count} restricted games classified identically by both routes"


def check_leg_classification():
    """Spiral/crossing/saddle pattern of the nine pieces per regime."""
    for beta in (0.1, 0.5, 0.9):
        game = make_shapley(beta)
        for pb, pa in J_LEGS:
            if classify_codim2(restricted_game(game, pa, pb)) is not Codim2Case.SPIRAL_STABLE:
                _fail(f"piece B{pb} x A{pa} not spiral at beta={beta}")
        for pb, pa in T_LEGS:
            if classify_codim2(restricted_game(game, pa, pb)) is not Codim2Case.CROSSING:
                _fail(f"piece B{pb} x A{pa} not crossing at beta={beta}")
    for beta in (-0.9, -0.5, -0.1):
        game = make_shapley(beta)
        for pb, pa in T_LEGS:
            if classify_codim2(restricted_game(game, pa, pb)) is not Codim2Case.SADDLE:
                _fail(f"piece B{pb} x A{pa} not saddle at beta={beta}")
    return "J spiral and T crossing above zero; T saddle below"


def check_anchor_midpoints():
    """At beta=0 the indifference segments end at the edge midpoints."""
    for locus in indifference_anchors(0.0):
        comps = sorted(locus.end_r.components)
        if max(abs(a - b) for a, b in zip(comps, (0.0, 0.5, 0.5))) > 1e-15:
            _fail(f"locus {locus.player}{locus.pair} endpoint {locus.end_r.components}")
    return "all six endpoints are edge midpoints at beta=0"


# --------------------------------------------------------------------- flow


def check_conservation(n_starts=40, seed=2):
    """Utility sums stay constant along simulated trajectories."""
    rng = random.Random(seed)
    for beta in (-0.7, -0.2, 0.4, 0.8):
        game = make_shapley(beta)
        for _ in range(n_starts):
            traj = simulate(game, random_state(rng), SimConfig(max_events=150))
            for seg in traj.segments[:: max(1, len(traj.segments) // 5)]:
                if abs(sum(seg.end.vA) - (1 + beta)) > 1e-9 or \
                        abs(sum(seg.end.vB) - (1 - beta)) > 1e-9:
                    _fail(f"sum drift at beta={beta}")
    return "utility sums conserved to 1e-9 along trajectories"


def check_segment_affinity(seed=3):
    """Mid-segment states interpolate the endpoints exactly."""
    rng = random.Random(seed)
    game = make_shapley(0.35)
    for _ in range(30):
        traj = simulate(game, random_state(rng), SimConfig(max_events=20))
        for seg in traj.segments[:4]:
            for frac in (0.5, 0.25):
                s = seg.duration_s * frac
                mid = tuple(
                    (1 - s) * a + s * t for a, t in zip(seg.start.vA, seg.targetA)
                )
                lin = tuple(
                    a + frac * (b - a) for a, b in zip(seg.start.vA, seg.end.vA)
                )
                # exact affine interpolation modulo the (1-s) rescaling
                resid = max(
                    abs((1 - seg.duration_s * frac) * l - (1 - seg.duration_s * frac) * m)
                    for l, m in zip(lin, mid)
                )
                expect = tuple(
                    a + (s / seg.duration_s) * (b - a)
                    for a, b in zip(seg.start.vA, seg.end.vA)
                )
                resid = max(abs(e - m) for e, m in zip(expect, mid))
                if resid > 1e-12:
                    _fail(f"segment not affine: residual {resid:.2e}")
    return "states at fractional segment times interpolate exactly"


def check_event_margins(seed=4):
    """Tie margins are below tolerance at events, above at segment starts."""
    rng = random.Random(seed)
    game = make_shapley(-0.3)
    cfg = SimConfig(max_events=60)
    for _ in range(20):
        traj = simulate(game, random_state(rng), cfg)
        for ev, seg in zip(traj.events, traj.segments):
            if ev.kind != "single_indifference" or ev.pair[0] == ev.pair[1]:
                continue
            va = seg.end.vA if ev.player == "A" else seg.end.vB
            d_end = abs(va[ev.pair[0] - 1] - va[ev.pair[1] - 1])
            va0 = seg.start.vA if ev.player == "A" else seg.start.vB
            d_start = abs(va0[ev.pair[0] - 1] - va0[ev.pair[1] - 1])
            if d_end > cfg.tol_tie:
                _fail(f"event margin {d_end:.2e} above tolerance")
            if d_start <= cfg.tol_tie and seg.duration_s > 1e-9:
                _fail("segment started on its own exit tie")
    return "event margins below tolerance; segment starts strictly inside"


def check_no_ambiguity_positive_beta(n_starts=1000, seed=5):
    """For beta in (0,1) random starts never hit an ambiguous state."""
    rng = random.Random(seed)
    for beta in (0.25, 0.75):
        game = make_shapley(beta)
        for _ in range(n_starts // 2):
            try:
                simulate(game, random_state(rng), SimConfig(max_events=120))
            except AmbiguousFlowError as exc:
                _fail(f"ambiguity at beta={beta}: {exc}")
    return f"{n_starts} positive-parameter trajectories, no ambiguity"


def check_j_gap_recursion(n=100, seed=6):
    """One extension leg reproduces the closed-form gap map F."""
    rng = random.Random(seed)
    for _ in range(n):
        beta = rng.uniform(0.05, 1.0)
        X = rng.uniform(1e-4, 0.3)
        game = make_shapley(beta)
        n1 = (1 + beta - 2 * X) / 3
        n23 = (1 + beta + X) / 3
        mm = (1 - beta) / 3
        st = StateV(vA=(n1, n23, n23), vB=(mm, mm, mm))
        seg1, _ = j_flow_step(beta, st, game)
        seg2, _ = j_flow_step(beta, seg1.end, game)
        gap = max(seg2.end.vA) - min(seg2.end.vA)
        want = j_map_F(beta, X)
        if abs(gap - want) > 1e-10:
            _fail(f"gap map off at beta={beta}, X={X}: {gap} vs {want}")
    return f"{n} random legs match the closed-form gap map to 1e-10"


# ------------------------------------------------------------------- orbits


def check_cubic_signs(n=100):
    """Sign pattern of both cubics at the bracketing points."""
    for k in range(n):
        beta = -0.99 + 1.98 * k / (n - 1)
        f = clockwise_cubic(beta)
        if not (f(0.0) < 0.0 < f(1.0)):
            _fail(f"clockwise cubic sign pattern broken at beta={beta}")
        if 0.0 < beta < 1.0:
            g = anticlockwise_cubic(beta)
            if not (g(0.0) < 0.0 and g(1.0 / 3.0) > 0.0 and g(1.0) < 0.0):
                _fail(f"anticlockwise cubic sign pattern broken at beta={beta}")
    return f"cubic sign patterns hold at {n} parameters"


def check_orbit_closure():
    """Constructed orbits replay through the simulator and close."""
    for beta in (-0.8, -0.4, 0.0, 0.3, 0.55):
        clockwise_orbit(beta)  # closure asserted internally to 1e-9
    for beta in (0.65, 0.8, 0.95, 1.0):
        anticlockwise_orbit(beta)
    for beta in (0.7, 0.85, 1.0):
        from .orbits import j_orbit

        j_orbit(beta)
    return "clockwise, anticlockwise and J orbits close under replay"


def check_sigma_degeneracy():
    """Both symmetric orbits collapse at the golden mean."""
    d1 = clockwise_orbit(GOLDEN_MEAN - 1e-3).diameter
    d2 = anticlockwise_orbit(GOLDEN_MEAN + 1e-3).diameter
    if d1 >= 1e-3 or d2 >= 1e-3:
        _fail(f"diameters {d1:.2e}, {d2:.2e} not below 1e-3 near the golden mean")
    return f"diameters {d1:.1e} / {d2:.1e} at distance 1e-3 from the golden mean"


def check_spectrum_consistency(n=12):
    """One anticlockwise eigenvalue equals n2/n1, and the printed matrix
    agrees with the engine-built symmetric Jacobian."""
    for k in range(n):
        beta = GOLDEN_MEAN + 1e-3 + (1.0 - GOLDEN_MEAN - 1e-3) * k / (n - 1)
        orbit = anticlockwise_orbit(beta)
        rep = stability_matrix(beta)
        ratio = orbit.section_n[1] / orbit.section_n[0]
        if min(abs(l - ratio) for l in rep.eigenvalues) > 1e-9:
            _fail(f"n2/n1 not an eigenvalue at beta={beta}")
    game = make_shapley(0.9)
    orbit = anticlockwise_orbit(0.9)
    printed = np.array(anticlockwise_perturbation_matrix(0.9, orbit.section_n[0], orbit.section_n[1]))
    numeric = symmetric_third_jacobian(game, orbit)
    if np.max(np.abs(printed - numeric)) > 1e-6:
        _fail("engine Jacobian disagrees with the exact matrix")
    return "n2/n1 in the spectrum; engine Jacobian matches the exact matrix"


def check_clockwise_stability():
    """The clockwise orbit is attracting on the sampled grid."""
    for beta in (0.0, 0.2, 0.4, 0.6):
        rep = stability_matrix(beta)
        if rep.classification != "attracting":
            _fail(f"clockwise orbit not attracting at beta={beta}: {rep.eigenvalues}")
    return "clockwise orbit attracting at beta in {0, 0.2, 0.4, 0.6}"


def _third_map_sym(game, orbit, eps):
    g = _third_map_raw(game, orbit, eps)
    C = _RELABEL_CHART[orbit.kind]
    return tuple(float(x) for x in C @ np.array(g))


def check_tau_degenerate_doubling():
    """At tau the second iterate is the identity on the critical eigenline.

    The transition maps are projective, so the eigenline maps to itself
    and the restriction is a Moebius map with derivative -1 there; its
    second iterate has no quadratic or cubic term at all.
    """
    tau = find_tau(tol=1e-9)
    game = make_shapley(tau)
    orbit = anticlockwise_orbit(tau)
    mat = np.array(
        anticlockwise_perturbation_matrix(tau, orbit.section_n[0], orbit.section_n[1])
    )
    vals, vecs = np.linalg.eig(mat)
    idx = int(np.argmin(np.abs(vals + 1.0)))
    if abs(vals[idx] + 1.0) > 1e-6:
        _fail(f"no eigenvalue near -1 at tau={tau}")
    V = vecs[:, idx].real
    V = V / np.max(np.abs(V))
    for t in (2e-3, 4e-3, 8e-3):
        eps = tuple(t * x for x in V)
        out = _third_map_sym(game, orbit, _third_map_sym(game, orbit, eps))
        resid = max(abs(a - b) for a, b in zip(out, eps))
        if resid > 1.0 * t**3:
            _fail(f"second iterate deviates by {resid:.2e} at |x-p|={t:.0e}")
    return f"second iterate is the identity to cubic order at tau={tau:.6f}"


# --------------------------------------------------------------- return map


def check_projective_lines(seed=12):
    """Constructed hit maps send lines to lines (cross-ratio preserved)."""
    game = make_shapley(-0.4)
    rng = random.Random(seed)
    pm = projective_from_samples(game, CYCLE_SECTIONS[0], CYCLE_SECTIONS[1], rng)
    z0 = section_coords(game, CYCLE_SECTIONS[0], sample_section_point(game, CYCLE_SECTIONS[0], rng))
    z1 = section_coords(game, CYCLE_SECTIONS[0], sample_section_point(game, CYCLE_SECTIONS[0], rng))
    params = (0.0, 0.3, 0.7, 1.0)
    images = [pm.apply(z) for z in collinear_samples(z0, z1, params)]
    w0, w1 = images[0], images[1]
    ts = [line_parameter(w, w0, w1) for w in images]
    # collinearity: each image must lie on the line through the first two
    for w, t in zip(images, ts):
        proj = tuple(a + t * (b - a) for a, b in zip(w0, w1))
        if max(abs(x - y) for x, y in zip(w, proj)) > 1e-8:
            _fail("image points are not collinear")
    cr_in = cross_ratio(*params)
    cr_out = cross_ratio(*ts)
    if abs(cr_in - cr_out) > 1e-8:
        _fail(f"cross-ratio changed: {cr_in} vs {cr_out}")
    return "images collinear, cross-ratio preserved to 1e-8"


def check_return_contraction(seed=13):
    """The first-return map sends the section strictly inside itself."""
    fr = first_return(-0.5, seed=seed)
    game = make_shapley(-0.5)
    rng = random.Random(seed)
    for _ in range(30):
        st = sample_section_point(game, CYCLE_SECTIONS[0], rng)
        z = section_coords(game, CYCLE_SECTIONS[0], st)
        out = fr.map.apply(z)
        # the image must be a valid interior section point again
        from .returnmap import section_state

        state = section_state(game, CYCLE_SECTIONS[0], out)
        top = max(state.vA)
        if state.vA[0] < top - 1e-12:
            _fail("return image leaves the base face (player A side)")
        pair_val = state.vB[0]
        third = state.vB[2]
        if pair_val - third < 1e-12:
            _fail("return image leaves the base face (player B side)")
    if fr.verification_residual > 1e-8:
        _fail(f"fixed point off the orbit section by {fr.verification_residual:.2e}")
    return "return map maps the section into itself; fixed point matches"


def check_attraction(n_starts=120, seed=14):
    """All sampled starts converge to the clockwise orbit for beta <= 0."""
    for beta in (-0.9, -0.5, 0.0):
        rep = attraction_check(beta, n_starts=n_starts, horizon=300, seed=seed)
        if rep.converged != rep.n_starts:
            _fail(
                f"beta={beta}: only {rep.converged}/{rep.n_starts} converged "
                f"(outliers {rep.outliers[:5]})"
            )
    return f"{3 * n_starts} starts all converge onto the clockwise orbit"


# -------------------------------------------------------------- transitions


def check_diagram_soundness(n_per_beta=150, seed=15):
    """Simulated itineraries never leave the regime's arc set."""
    count = 0
    for beta in (-0.9, -0.5, 0.0, 0.3, 0.6, 0.8, 0.95):
        game = make_shapley(beta)
        dia = diagram_for(beta)
        rng = random.Random(seed)
        for _ in range(n_per_beta):
            traj = simulate(game, random_state(rng), SimConfig(max_events=200, codim2_policy="abort"))
            v = validate_itinerary(traj.region_sequence(), dia)
            if v is not None:
                _fail(f"beta={beta}: transition outside the diagram at index {v}")
            count += 1
    return f"{count} itineraries consistent with the diagrams"


def check_diagram_witnesses(seed=16):
    """Every stored arc is witnessed by a simulated transition."""
    for beta in (-0.5, 0.0, 0.5):
        game = make_shapley(beta)
        dia = diagram_for(beta)
        rng = random.Random(seed)
        seen = Counter()
        for _ in range(4000):
            st = random_state(rng)
            v = v_from_p(game, st)
            from .geometry import region_of, RegionLabel

            lab = region_of(v)
            if not isinstance(lab, RegionLabel):
                continue
            traj = simulate(game, v, SimConfig(max_events=2, codim2_policy="abort"))
            seq = traj.region_sequence()
            if len(seq) >= 2 and seq[0] != seq[1]:
                seen[(seq[0], seq[1])] += 1
        missing = [a for a in dia.arcs if a not in seen]
        if missing:
            _fail(f"beta={beta}: arcs never witnessed: {missing}")
    return "every arc witnessed by a one-step simulation"


def check_cycle_realizability():
    """The clockwise cycle is realizable in all regimes; the anticlockwise
    cycle only for positive parameters."""
    for beta in (-0.5, 0.0, 0.5):
        dia = diagram_for(beta)
        cw = all(
            dia.allows(SHAPLEY_PATTERN[k], SHAPLEY_PATTERN[(k + 1) % 6])
            for k in range(6)
        )
        acw = all(
            dia.allows(ANTI_SHAPLEY_PATTERN[k], ANTI_SHAPLEY_PATTERN[(k + 1) % 6])
            for k in range(6)
        )
        if not cw:
            _fail(f"clockwise cycle not realizable at beta={beta}")
        if acw != (beta > 0):
            _fail(f"anticlockwise realizability wrong at beta={beta}")
    return "cycle realizability matches the regimes"


ALL_CHECKS = (
    ("game/utility-sums", check_utility_sums),
    ("game/best-response-invariance", check_best_response_invariance),
    ("game/interior-equilibrium", check_interior_equilibrium),
    ("game/zero-sum-certificate", check_zero_sum_certificate),
    ("geometry/codim2-oracle", check_codim2_oracle),
    ("geometry/leg-classification", check_leg_classification),
    ("geometry/anchor-midpoints", check_anchor_midpoints),
    ("flow/conservation", check_conservation),
    ("flow/segment-affinity", check_segment_affinity),
    ("flow/event-margins", check_event_margins),
    ("flow/no-ambiguity-positive-beta", check_no_ambiguity_positive_beta),
    ("flow/j-gap-recursion", check_j_gap_recursion),
    ("orbits/cubic-signs", check_cubic_signs),
    ("orbits/closure", check_orbit_closure),
    ("orbits/sigma-degeneracy", check_sigma_degeneracy),
    ("orbits/spectrum-consistency", check_spectrum_consistency),
    ("orbits/clockwise-stability", check_clockwise_stability),
    ("orbits/tau-degenerate-doubling", check_tau_degenerate_doubling),
    ("returnmap/projective-lines", check_projective_lines),
    ("returnmap/contraction", check_return_contraction),
    ("returnmap/attraction", check_attraction),
    ("transitions/diagram-soundness", check_diagram_soundness),
    ("transitions/diagram-witnesses", check_diagram_witnesses),
    ("transitions/cycle-realizability", check_cycle_realizability),
)


def run_checks(quick: bool = False):
    """Run the invariant suite; yields (name, ok, detail) as it goes."""
    overrides = {}
    if quick:
        overrides = {
            "geometry/codim2-oracle": lambda: check_codim2_oracle(n_random=60),
            "flow/no-ambiguity-positive-beta": lambda: check_no_ambiguity_positive_beta(n_starts=200),
            "returnmap/attraction": lambda: check_attraction(n_starts=40),
            "transitions/diagram-soundness": lambda: check_diagram_soundness(n_per_beta=40),
        }
    for name, fn in ALL_CHECKS:
        fn = overrides.get(name, fn)
        try:
            detail = fn()
            yield name, True, detail
        except InvariantFailure as exc:
            yield name, False, str(exc)
