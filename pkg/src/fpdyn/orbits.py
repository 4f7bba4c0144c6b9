"""Closed-form periodic orbits, their stability, and critical parameters.

Three symmetric periodic orbits organize the dynamics of the family:

* the clockwise orbit, for parameters below the golden mean ``sigma``
  (player A copies B, player B plays one ahead);
* the anticlockwise orbit, for parameters above ``sigma`` (both players
  play one ahead); it is attracting above ``tau ~ 0.915`` and of saddle
  type below;
* the orbit on the double-tie set J, born at ``sigma`` in a Hopf-like
  bifurcation with linear (not square-root) diameter growth.

Each orbit is rotation symmetric: one third of it determines the rest by
cyclically permuting strategies.  The section values solve a cubic whose
coefficients are polynomial in the parameter; everything else (durations,
stability, diameters) follows in closed form, and every constructed orbit
is replayed through the exact simulator as a consistency check.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from ._roots import bisect, bracketed_newton
from .errors import ExistenceError, InvariantFailure, ParameterError, SearchError
from .flow import Segment, SimConfig, simulate
from .game import GOLDEN_MEAN, BimatrixGame, StateV, make_shapley
from .geometry import RegionLabel

_CLOSURE_TOL = 1e-9


@dataclass(frozen=True)
class CubicSpec:
    """Cubic equation for a symmetric orbit's section coordinate."""

    kind: str  # "clockwise" | "anticlockwise"
    beta: float
    coefficients: tuple[float, float, float, float]  # (c3, c2, c1, c0)

    def __call__(self, z: float) -> float:
        c3, c2, c1, c0 = self.coefficients
        return ((c3 * z + c2) * z + c1) * z + c0

    def derivative(self, z: float) -> float:
        c3, c2, c1, _ = self.coefficients
        return (3.0 * c3 * z + 2.0 * c2) * z + c1


def clockwise_cubic(beta: float) -> CubicSpec:
    b = beta
    return CubicSpec(
        kind="clockwise",
        beta=b,
        coefficients=(
            3.0 * b * b + 3.0 * b + 3.0,
            2.0 * b**3 - 2.0 * b * b - 5.0 * b - 4.0,
            -(b**3) + 4.0 * b + 3.0,
            -1.0 - b,
        ),
    )


def anticlockwise_cubic(beta: float) -> CubicSpec:
    b = beta
    return CubicSpec(
        kind="anticlockwise",
        beta=b,
        coefficients=(
            3.0 * b * b + 3.0 * b + 3.0 * b**3,
            -5.0 * b**3 - 7.0 * b * b - 4.0 * b - 2.0,
            1.0 + b + 5.0 * b * b + 2.0 * b**3,
            -(b * b),
        ),
    )


@dataclass(frozen=True)
class PeriodicOrbitSpec:
    kind: str  # "clockwise" | "anticlockwise" | "j_orbit"
    beta: float
    section_n: tuple[float, float, float]
    section_m: tuple[float, float, float]
    durations: tuple[float, float]
    full_path: tuple[Segment, ...]
    diameter: float
    root: float
    regions: tuple[RegionLabel, ...] = ()
    diameter_ratios: tuple[float, float] | None = None

    @property
    def section_state(self) -> StateV:
        return StateV(vA=self.section_n, vB=self.section_m)


@dataclass(frozen=True)
class StabilityReport:
    kind: str
    beta: float
    matrix: tuple[tuple[float, float, float], ...]
    eigenvalues: tuple[complex, complex, complex]
    classification: str  # "attracting" | "saddle_type" | "non_generic"


def _equilibrium_utilities(beta: float) -> tuple[float, float]:
    return (1.0 + beta) / 3.0, (1.0 - beta) / 3.0


def _path_diameter(game: BimatrixGame, path) -> float:
    """Largest simplex-coordinate deviation of the orbit from the barycenter.

    Measured in the flow's own phase space (the product of simplices), so
    it goes to zero exactly when the orbit collapses onto the equilibrium.
    """
    from .flow import p_from_v

    d = 0.0
    for seg in path:
        p = p_from_v(game, seg.start)
        d = max(d, max(abs(x - 1.0 / 3.0) for x in p.pA.components))
        d = max(d, max(abs(x - 1.0 / 3.0) for x in p.pB.components))
    return d


def _assemble_path(game: BimatrixGame, section: StateV, expect_regions) -> tuple[Segment, ...]:
    traj = simulate(game, section, SimConfig(max_events=7, codim2_policy="abort"))
    if len(traj.segments) < 6:
        raise InvariantFailure(
            f"orbit replay produced {len(traj.segments)} segments "
            f"(stop: {traj.stop_reason})"
        )
    segs = tuple(traj.segments[:6])
    seq = [(s.regionA, s.regionB) for s in segs]
    if expect_regions is not None and seq != list(expect_regions):
        raise InvariantFailure(f"orbit replay visited {seq}, expected {list(expect_regions)}")
    end = segs[-1].end
    err = max(
        max(abs(a - b) for a, b in zip(end.vA, section.vA)),
        max(abs(a - b) for a, b in zip(end.vB, section.vB)),
    )
    if err > _CLOSURE_TOL:
        raise InvariantFailure(f"orbit does not close: residual {err:.3e}")
    return segs


_CLOCKWISE_REGIONS = ((1, 2), (2, 2), (2, 3), (3, 3), (3, 1), (1, 1))
_ANTICLOCKWISE_REGIONS = ((1, 2), (3, 2), (3, 1), (2, 1), (2, 3), (1, 3))


def clockwise_orbit(beta: float) -> PeriodicOrbitSpec:
    """The symmetric clockwise orbit, for beta in (-1, sigma).

    Section: player B tied between 1 and 2 (about to play 2), player A
    strictly preferring 1.  One third of the orbit consists of two
    straight pieces with durations (t1, t2).
    """
    b = float(beta)
    if not (-1.0 < b < 1.0):
        raise ParameterError(f"beta={b} outside (-1, 1)")
    if b >= GOLDEN_MEAN:
        raise ExistenceError(
            f"the clockwise orbit does not exist for beta={b} >= golden mean "
            f"{GOLDEN_MEAN:.6f} (it has shrunk into the interior equilibrium)"
        )
    cubic = clockwise_cubic(b)
    nu = bracketed_newton(cubic, cubic.derivative, 0.0, 1.0)
    den = 1.0 + b + b * b
    n1 = nu
    n2 = -(
        -2.0 * b * b - b**3 + 2.0 * nu * b**3 - 3.0 * nu * b - 2.0 * nu
        + 3.0 * nu * nu + 3.0 * nu * nu * b * b + 3.0 * nu * nu * b
    ) / den
    n3 = (
        2.0 * b + 1.0 + 2.0 * nu * b**3 - nu * b * b - 4.0 * nu * b - 3.0 * nu
        + 3.0 * nu * nu + 3.0 * nu * nu * b * b + 3.0 * nu * nu * b
    ) / den
    m1 = m2 = 1.0 - nu - nu * b
    m3 = -b + 2.0 * nu * b - 1.0 + 2.0 * nu
    if not (n1 > max(n2, n3) and m1 > m3):
        raise InvariantFailure(
            f"clockwise section inequalities fail at beta={b}: "
            f"n=({n1},{n2},{n3}), m=({m1},{m2},{m3})"
        )
    t1 = (n1 - n2) / (n1 - n2 + 1.0)
    delta = (m2 - m3) + (n1 - n2)
    t2 = delta / (delta + (1.0 + b) * (1.0 + n1 - n2))
    game = make_shapley(b)
    section = StateV(vA=(n1, n2, n3), vB=(m1, m2, m3))
    path = _assemble_path(game, section, _CLOCKWISE_REGIONS)
    if abs(path[0].duration_s - t1) > 1e-10 or abs(path[1].duration_s - t2) > 1e-10:
        raise InvariantFailure("replayed durations disagree with the closed form")
    return PeriodicOrbitSpec(
        kind="clockwise",
        beta=b,
        section_n=(n1, n2, n3),
        section_m=(m1, m2, m3),
        durations=(t1, t2),
        full_path=path,
        diameter=_path_diameter(game, path),
        root=nu,
        regions=tuple(RegionLabel(i, j) for i, j in _CLOCKWISE_REGIONS),
    )


def _anticlockwise_candidates(beta: float):
    cubic = anticlockwise_cubic(beta)
    roots = []
    for lo, hi in ((1e-14, 1.0 / 3.0), (1.0 / 3.0, 1.0)):
        try:
            roots.append(bracketed_newton(cubic, cubic.derivative, lo, hi))
        except SearchError:
            pass
    return roots


def anticlockwise_orbit(beta: float) -> PeriodicOrbitSpec:
    """The symmetric anticlockwise orbit, for beta in (sigma, 1].

    Section: player B tied between 2 and 3 (about to play 2), player A
    strictly preferring 1.
    """
    b = float(beta)
    if not (0.0 < b <= 1.0):
        raise ParameterError(f"beta={b} outside (0, 1]")
    den = b + 1.0 + b * b
    picked = None
    for mu in _anticlockwise_candidates(b):
        m2 = m3 = mu
        m1 = -b + 1.0 - 2.0 * mu
        n1 = b - mu * b
        sq = 3.0 * mu * mu * (b * b + b + b**3)
        n2 = (2.0 * b * b + 1.0 - 3.0 * mu * b**3 - 5.0 * mu * b * b
              - 2.0 * mu * b - 2.0 * mu + sq) / den
        n3 = -(b * b - b - 4.0 * mu * b**3 - 6.0 * mu * b * b
               - 3.0 * mu * b - 2.0 * mu + sq) / den
        strict = (m2 > m1) and (n1 > max(n2, n3)) and ((n1 - n2) * b > (n1 - n3))
        if strict:
            picked = (mu, (n1, n2, n3), (m1, m2, m3))
            break
    if picked is None:
        raise ExistenceError(
            f"no anticlockwise orbit at beta={b}: the section inequalities "
            f"fail for every cubic root (exists only above the golden mean "
            f"{GOLDEN_MEAN:.6f})"
        )
    mu, n, m = picked
    t1 = (n[0] - n[2]) / (n[0] - n[2] + b)
    delta = b * (m[1] - m[0]) + (1.0 + b) * (n[0] - n[2])
    t2 = delta / (delta + b + n[0] - n[2])
    game = make_shapley(b)
    section = StateV(vA=n, vB=m)
    path = _assemble_path(game, section, _ANTICLOCKWISE_REGIONS)
    if abs(path[0].duration_s - t1) > 1e-10 or abs(path[1].duration_s - t2) > 1e-10:
        raise InvariantFailure("replayed durations disagree with the closed form")
    return PeriodicOrbitSpec(
        kind="anticlockwise",
        beta=b,
        section_n=n,
        section_m=m,
        durations=(t1, t2),
        full_path=path,
        diameter=_path_diameter(game, path),
        root=mu,
        regions=tuple(RegionLabel(i, j) for i, j in _ANTICLOCKWISE_REGIONS),
    )


# ---------------------------------------------------------------------------
# stability


def anticlockwise_perturbation_matrix(beta: float, n1: float, n2: float):
    """Linearization of one third of the anticlockwise return map.

    Maps the section perturbation (e1, e2, e3) -- applied to the section
    as n' = (n1+e1, n2+e2, n3-e1-e2), m' = (m1-2*e3, m2+e3, m3+e3) --
    to the arrival deviations (g1, g2, g3) in the same pattern at the
    next section.
    """
    b = beta
    pref = n2 / (n1 * b)
    row1 = (
        b * (3.0 + 2.0 * b) - n1 * 2.0 * (2.0 + b),
        b * (1.0 - n1 + b) - 2.0 * n1,
        3.0 * b * b - 3.0 * n1 * b,
    )
    row2 = (
        b - 2.0 * n2 * (2.0 + b),
        -n2 * (2.0 + b),
        -3.0 * n2 * b,
    )
    row3 = (
        2.0 - 2.0 * (b - n1) * (2.0 + b) / b,
        1.0 - (b - n1) * (2.0 + b) / b,
        3.0 * n1 - 2.0 * b,
    )
    return tuple(tuple(pref * x for x in row) for row in (row1, row2, row3))


def anticlockwise_eigenvalues_closed(beta: float, n1: float, n2: float):
    """The three eigenvalues: n2/n1 and the closed-form conjugate pair."""
    b = beta
    q = -2.0 * n1 * b - n1 - 2.0 * n2 - n2 * b + 2.0 * b * b
    disc = (
        10.0 * n1 * n2 * b + 4.0 * n1 * n2 - 4.0 * n2 * b**2 - 4.0 * n2 * b**3
        - 8.0 * n1 * b**3 + 4.0 * b**4 + 4.0 * n2**2 + 4.0 * n2**2 * b
        + 4.0 * n1**2 * b**2 + 4.0 * n1**2 * b + n2**2 * b**2
        + 4.0 * n2 * b**2 * n1 - 8.0 * n1 * b**2 + n1**2 - 4.0 * n2 * b
        - 8.0 * n1 * b + 4.0 * b**2 + 4.0 * b**3
    )
    sq = cmath.sqrt(disc)
    lam_p = n2 * (q + sq) / (2.0 * n1 * b)
    lam_m = n2 * (q - sq) / (2.0 * n1 * b)
    return (complex(n2 / n1), lam_p, lam_m)


def _classify_spectrum(eigs, tol=1e-9) -> str:
    mags = [abs(l) for l in eigs]
    if any(abs(m - 1.0) <= tol for m in mags):
        return "non_generic"
    if all(m < 1.0 for m in mags):
        return "attracting"
    return "saddle_type"


# engine-based one-third map, used for the clockwise orbit (no closed form
# is available) and to cross-validate the printed anticlockwise matrix.

_PERTURB_PATTERNS = {
    # vA basis deltas for (e1, e2); vB pattern for e3, per orbit kind
    "clockwise": {
        "vA": ((1.0, 0.0, -1.0), (0.0, 1.0, -1.0)),
        "vB": (1.0, 1.0, -2.0),  # tied pair (1,2)
        "events": 2,
    },
    "anticlockwise": {
        "vA": ((1.0, 0.0, -1.0), (0.0, 1.0, -1.0)),
        "vB": (-2.0, 1.0, 1.0),  # tied pair (2,3)
        "events": 2,
    },
}


def _third_map_raw(game: BimatrixGame, orbit: PeriodicOrbitSpec, eps):
    """Flow one third of the period from a perturbed section state.

    Returns the arrival deviations (g1, g2, g3) measured against the
    cyclically permuted section, in arrival-position coordinates.
    """
    pat = _PERTURB_PATTERNS[orbit.kind]
    n = orbit.section_n
    m = orbit.section_m
    vA = [n[k] + eps[0] * pat["vA"][0][k] + eps[1] * pat["vA"][1][k] for k in range(3)]
    vB = [m[k] + eps[2] * pat["vB"][k] for k in range(3)]
    traj = simulate(game, StateV(tuple(vA), tuple(vB)),
                    SimConfig(max_events=3, codim2_policy="abort"))
    if len(traj.segments) < 2:
        raise InvariantFailure("perturbed third-map replay fell short")
    end = traj.segments[1].end
    if orbit.kind == "anticlockwise":
        base_vA = (n[1], n[2], n[0])
        base_vB = (m[1], m[1], m[0])
        g3 = end.vB[0] - base_vB[0]
    else:
        base_vA = (n[2], n[0], n[1])
        base_vB = (m[2], m[0], m[0])
        g3 = end.vB[1] - base_vB[1]
    g1 = end.vA[0] - base_vA[0]
    g2 = end.vA[1] - base_vA[1]
    return (g1, g2, g3)


def third_map_jacobian(game: BimatrixGame, orbit: PeriodicOrbitSpec, h: float = 1e-6):
    """Numeric Jacobian of the one-third map, Richardson-extrapolated.

    Central differences at steps h and h/2 combined as (4 D2 - D1) / 3.
    """
    def diff_matrix(step):
        cols = []
        for k in range(3):
            ep = [0.0, 0.0, 0.0]
            ep[k] = step
            em = [0.0, 0.0, 0.0]
            em[k] = -step
            gp = _third_map_raw(game, orbit, ep)
            gm = _third_map_raw(game, orbit, em)
            cols.append([(a - b) / (2.0 * step) for a, b in zip(gp, gm)])
        return np.array(cols).T

    d1 = diff_matrix(h)
    d2 = diff_matrix(h / 2.0)
    return (4.0 * d2 - d1) / 3.0


# Chart matrix of the cyclic relabeling that carries the arrival section
# back to the canonical one.  The symmetric one-third return map is
# (relabel o flow); its linearization is C @ J_raw.
_RELABEL_CHART = {
    "anticlockwise": np.array([[-1.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
    "clockwise": np.array([[0.0, 1.0, 0.0], [-1.0, -1.0, 0.0], [0.0, 0.0, 1.0]]),
}


def symmetric_third_jacobian(game: BimatrixGame, orbit: PeriodicOrbitSpec, h: float = 1e-6):
    return _RELABEL_CHART[orbit.kind] @ third_map_jacobian(game, orbit, h)


def stability_matrix(beta: float) -> StabilityReport:
    """Return-map linearization for whichever symmetric orbit exists.

    Above the golden mean this is the exact printed matrix of the
    anticlockwise orbit; below, the clockwise analog is built numerically
    by perturbing the section map (the same machinery is validated
    against the exact anticlockwise matrix in the test suite).
    """
    b = float(beta)
    if b > GOLDEN_MEAN:
        orbit = anticlockwise_orbit(b)
        mat = anticlockwise_perturbation_matrix(b, orbit.section_n[0], orbit.section_n[1])
        eigs = tuple(np.linalg.eigvals(np.array(mat)))
        eigs = tuple(sorted(eigs, key=lambda z: -z.real))
        return StabilityReport(
            kind="anticlockwise", beta=b, matrix=mat,
            eigenvalues=eigs, classification=_classify_spectrum(eigs),
        )
    orbit = clockwise_orbit(b)
    game = make_shapley(b)
    jac = symmetric_third_jacobian(game, orbit)
    eigs = tuple(sorted(np.linalg.eigvals(jac), key=lambda z: -z.real))
    mat = tuple(tuple(float(x) for x in row) for row in jac)
    return StabilityReport(
        kind="clockwise", beta=b, matrix=mat,
        eigenvalues=eigs, classification=_classify_spectrum(eigs),
    )


def find_tau(bracket=(GOLDEN_MEAN + 0.01, 0.99), tol: float = 1e-6) -> float:
    """Parameter at which an anticlockwise eigenvalue crosses -1.

    Bisection on (most negative real eigenvalue) + 1 over the bracket.
    """
    lo, hi = bracket
    if not (GOLDEN_MEAN < lo < hi <= 1.0):
        raise ParameterError(f"bracket {bracket} must lie in (sigma, 1]")

    def g(b):
        rep = stability_matrix(b)
        real = [l.real for l in rep.eigenvalues if abs(l.imag) < 1e-9]
        if not real:
            raise SearchError(f"no real eigenvalues at beta={b}")
        return min(real) + 1.0

    if g(lo) * g(hi) > 0.0:
        raise SearchError(f"eigenvalue does not cross -1 on {bracket}")
    return bisect(g, lo, hi, tol=tol)


# ---------------------------------------------------------------------------
# the orbit on the double-tie set


def j_map_F(beta: float, X: float) -> float:
    """Gap after one leg of the extension flow, as a function of the gap.

    A linear fractional transformation a X / (b X + c).
    """
    b = float(beta)
    if not (0.0 < b <= 1.0):
        raise ParameterError(f"beta={b} outside (0, 1]")
    if X < 0.0:
        raise ParameterError("gap X must be >= 0")
    num = X * (1.0 + b) * (1.0 + 2.0 * b) * (1.0 - b + b * b)
    den = (2.0 - b) * (3.0 * (1.0 + b) ** 2 * X + (2.0 + b) * (1.0 + b * b - b))
    return num / den


def j_map_derivative_at_zero(beta: float) -> float:
    b = float(beta)
    return (2.0 * b * b + 3.0 * b + 1.0) / (4.0 - b * b)


def j_fixed_point(beta: float) -> float:
    """Positive fixed gap of the leg map; zero at and below the golden mean."""
    b = float(beta)
    if not (0.0 < b <= 1.0):
        raise ParameterError(f"beta={b} outside (0, 1]")
    if b <= GOLDEN_MEAN:
        return 0.0
    return (1.0 + b * b - b) * (b * b + b - 1.0) / ((2.0 - b) * (1.0 + b) ** 2)


def j_diameter_ratios(beta: float) -> tuple[float, float]:
    """The two closed-form diameter ratio families of the J orbit."""
    b = float(beta)
    if not (GOLDEN_MEAN < b <= 1.0):
        raise ExistenceError(f"the J orbit exists only above the golden mean; beta={b}")
    r1 = (b * b + b - 1.0) / (2.0 * b + 1.0)
    r2 = (b * b + b - 1.0) / (1.0 + b) ** 2
    return (r1, r2)


def j_orbit(beta: float) -> PeriodicOrbitSpec:
    """The periodic orbit on the double-tie set, for beta above sigma.

    The section sits at a leg boundary: player B's utilities all equal,
    player A tied on {2,3} with gap X* (the fixed point of the leg map).
    Six extension segments close the orbit.
    """
    b = float(beta)
    X = j_fixed_point(b)
    if X <= 0.0:
        raise ExistenceError(
            f"the J orbit is degenerate at beta={b} <= golden mean "
            f"{GOLDEN_MEAN:.6f} (fixed gap is zero)"
        )
    n1 = (1.0 + b - 2.0 * X) / 3.0
    n23 = (1.0 + b + X) / 3.0
    mm = (1.0 - b) / 3.0
    section = StateV(vA=(n1, n23, n23), vB=(mm, mm, mm))
    game = make_shapley(b)
    traj = simulate(game, section, SimConfig(max_events=8, codim2_policy="follow_j"))
    if len(traj.segments) < 6:
        raise InvariantFailure(
            f"J-orbit replay produced {len(traj.segments)} segments "
            f"(stop: {traj.stop_reason})"
        )
    path = tuple(traj.segments[:6])
    end = path[-1].end
    err = max(
        max(abs(a - c) for a, c in zip(end.vA, section.vA)),
        max(abs(a - c) for a, c in zip(end.vB, section.vB)),
    )
    if err > _CLOSURE_TOL:
        raise InvariantFailure(f"J orbit does not close: residual {err:.3e}")
    t1 = path[0].duration_s
    t2 = path[1].duration_s
    return PeriodicOrbitSpec(
        kind="j_orbit",
        beta=b,
        section_n=(n1, n23, n23),
        section_m=(mm, mm, mm),
        durations=(t1, t2),
        full_path=path,
        diameter=X,
        root=X,
        diameter_ratios=j_diameter_ratios(b),
    )


# ---------------------------------------------------------------------------
# parameter scans

SCAN_HEADER = (
    "beta,orbit_kind,exists,n1,n2,n3,m1,m2,m3,t1,t2,diameter,"
    "eig1_re,eig1_im,eig2_re,eig2_im,eig3_re,eig3_im,classification"
)


def scan_row(beta: float, kind: str) -> str:
    """One CSV row of the parameter scan; empty fields when absent."""
    def fmt(x):
        return f"{x:.12g}"

    build = clockwise_orbit if kind == "clockwise" else anticlockwise_orbit
    try:
        orbit = build(beta)
    except (ExistenceError, ParameterError):
        return f"{fmt(beta)},{kind},false," + "," * 15
    fields = [fmt(beta), kind, "true"]
    fields += [fmt(x) for x in orbit.section_n + orbit.section_m + orbit.durations]
    fields.append(fmt(orbit.diameter))
    try:
        rep = stability_matrix(beta)
        for lam in rep.eigenvalues:
            fields += [fmt(lam.real), fmt(lam.imag)]
        fields.append(rep.classification)
    except (ExistenceError, InvariantFailure):
        fields += [""] * 7
    return ",".join(fields)


def scan_rows(beta_from: float, beta_to: float, steps: int):
    yield SCAN_HEADER
    for k in range(steps):
        beta = beta_from + (beta_to - beta_from) * k / max(steps - 1, 1)
        for kind in ("clockwise", "anticlockwise"):
            yield scan_row(beta, kind)
