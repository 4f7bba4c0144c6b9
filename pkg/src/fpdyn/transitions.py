"""Allowed-transition diagrams between strict-preference regions.

The nine regions S_ij form a 3x3 checkerboard, glued as a torus; crossing
an edge means one player switched strategy, crossing a corner means both
switched at once (a codimension-two point).  The admissible arcs depend
only on the sign regime of the parameter:

* beta < 0: the six cycle regions each have a single exit along the
  clockwise cycle; the three off-cycle regions have three exits each and
  no entries, so every route funnels into the cycle.
* beta = 0: as above, except one exit of each off-cycle region closes
  (those faces become non-transversal: the tie is frozen there and the
  flow is ambiguous on the face itself).
* beta > 0: every region has exactly two exits; both the clockwise and
  the anticlockwise six-cycles become realizable, and the corners split
  into six spiral corners (the double-tie pieces orbits jitter around)
  and three transversal ones (crossable diagonally).

The arc sets are stored literally and witness-tested against simulated
trajectories: every arc must be witnessed and no simulated transition may
fall outside the set.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParameterError
from .geometry import J_LEGS, T_LEGS

Region = tuple[int, int]

#: The clockwise cycle (A copies B; B plays one ahead).
SHAPLEY_PATTERN: tuple[Region, ...] = ((1, 2), (2, 2), (2, 3), (3, 3), (3, 1), (1, 1))

#: The anticlockwise cycle (both players play one ahead).
ANTI_SHAPLEY_PATTERN: tuple[Region, ...] = ((1, 3), (1, 2), (3, 2), (3, 1), (2, 1), (2, 3))

NAMED_PATTERNS = {
    "shapley": SHAPLEY_PATTERN,
    "anti_shapley": ANTI_SHAPLEY_PATTERN,
}

_CYCLE_ARCS = tuple(
    (SHAPLEY_PATTERN[k], SHAPLEY_PATTERN[(k + 1) % 6]) for k in range(6)
)

# off-cycle exits for beta < 0: each of (1,3), (2,1), (3,2) drains four ways
# (both strategies of either player can be overtaken) and admits no entry
_NEG_ENTRY_ARCS = (
    ((1, 3), (1, 2)), ((1, 3), (3, 3)), ((1, 3), (2, 3)), ((1, 3), (1, 1)),
    ((2, 1), (1, 1)), ((2, 1), (2, 3)), ((2, 1), (3, 1)), ((2, 1), (2, 2)),
    ((3, 2), (2, 2)), ((3, 2), (3, 1)), ((3, 2), (1, 2)), ((3, 2), (3, 3)),
)

# at beta = 0 the third exits close (frozen ties); the faces are ambiguous
_ZERO_ENTRY_ARCS = (
    ((1, 3), (1, 2)), ((1, 3), (3, 3)),
    ((2, 1), (1, 1)), ((2, 1), (2, 3)),
    ((3, 2), (2, 2)), ((3, 2), (3, 1)),
)

#: Non-transversal faces at beta = 0: (tie player, tie pair, strict player's
#: strategy).  The flow is ambiguous on these faces and orbits on either
#: side move away from them.
ZERO_AMBIGUOUS_FACES = (
    ("A", (2, 3), 1),
    ("A", (1, 2), 3),
    ("A", (3, 1), 2),
    ("B", (3, 1), 1),
    ("B", (1, 2), 2),
    ("B", (2, 3), 3),
)

# beta > 0: two exits per region (the clockwise exit and the one-ahead exit)
_POS_ARCS = _CYCLE_ARCS + (
    ((1, 2), (3, 2)),
    ((2, 2), (2, 1)),
    ((2, 3), (1, 3)),
    ((3, 3), (3, 2)),
    ((3, 1), (2, 1)),
    ((1, 1), (1, 3)),
    ((1, 3), (1, 2)), ((1, 3), (3, 3)),
    ((2, 1), (1, 1)), ((2, 1), (2, 3)),
    ((3, 2), (2, 2)), ((3, 2), (3, 1)),
)

# diagonal crossings through the three transversal corners (beta > 0)
_POS_CORNER_ARCS = (
    ((3, 2), (2, 1)),
    ((1, 3), (3, 2)),
    ((2, 1), (1, 3)),
)


@dataclass(frozen=True)
class TransitionDiagram:
    regime: str  # "beta_negative" | "beta_zero" | "beta_positive"
    arcs: frozenset[tuple[Region, Region]]
    corner_arcs: frozenset[tuple[Region, Region]]
    corner_types: dict
    ambiguous_faces: tuple = ()

    def allows(self, frm: Region, to: Region) -> bool:
        return (frm, to) in self.arcs or (frm, to) in self.corner_arcs

    def to_json_dict(self) -> dict:
        def tag(r):
            return f"{r[0]},{r[1]}"

        return {
            "regime": self.regime,
            "arcs": sorted([tag(a), tag(b)] for a, b in self.arcs),
            "corner_arcs": sorted([tag(a), tag(b)] for a, b in self.corner_arcs),
        }


def diagram_for(beta: float) -> TransitionDiagram:
    """The allowed-transition diagram for the parameter's sign regime."""
    if not (-1.0 < beta <= 1.0):
        raise ParameterError(f"beta={beta} outside (-1, 1]")
    if beta < 0.0:
        return TransitionDiagram(
            regime="beta_negative",
            arcs=frozenset(_CYCLE_ARCS + _NEG_ENTRY_ARCS),
            corner_arcs=frozenset(),
            corner_types={},
        )
    if beta == 0.0:
        return TransitionDiagram(
            regime="beta_zero",
            arcs=frozenset(_CYCLE_ARCS + _ZERO_ENTRY_ARCS),
            corner_arcs=frozenset(),
            corner_types={},
            ambiguous_faces=ZERO_AMBIGUOUS_FACES,
        )
    corner_types = {leg: "spiral" for leg in J_LEGS}
    corner_types.update({leg: "transversal" for leg in T_LEGS})
    return TransitionDiagram(
        regime="beta_positive",
        arcs=frozenset(_POS_ARCS),
        corner_arcs=frozenset(_POS_CORNER_ARCS),
        corner_types=corner_types,
    )


def validate_itinerary(itinerary, diagram: TransitionDiagram):
    """None when every consecutive transition is allowed, else the first
    violating index.

    Accepts either (A, B) region pairs or the dict entries produced by
    Trajectory.itinerary().  Pieces inside the double-tie set (labelled
    with zeros) are skipped: they carry no strict-region information.
    """
    regions = []
    for entry in itinerary:
        if isinstance(entry, dict):
            regions.append((entry["A"], entry["B"]))
        else:
            regions.append((entry[0], entry[1]))
    prev = None
    for idx, reg in enumerate(regions):
        if reg[0] == 0 or reg[1] == 0:
            prev = None
            continue
        if prev is not None and prev != reg and not diagram.allows(prev, reg):
            return idx
        prev = reg
    return None


def pattern_match(itinerary, pattern, min_repeats: int = 2) -> bool:
    """True when the trailing itinerary repeats the 6-step pattern.

    ``pattern`` is a name from NAMED_PATTERNS or an explicit sequence of
    six (A, B) pairs; any cyclic shift counts.
    """
    if isinstance(pattern, str):
        try:
            pattern = NAMED_PATTERNS[pattern]
        except KeyError:
            raise ParameterError(f"unknown pattern {pattern!r}") from None
    pattern = tuple((int(a), int(b)) for a, b in pattern)
    if len(pattern) != 6:
        raise ParameterError("pattern must have six entries")
    if min_repeats < 1:
        raise ParameterError("min_repeats must be >= 1")
    regions = []
    for entry in itinerary:
        if isinstance(entry, dict):
            regions.append((entry["A"], entry["B"]))
        else:
            regions.append((entry[0], entry[1]))
    need = 6 * min_repeats
    if len(regions) < need:
        return False
    tail = regions[-need:]
    if tail[0] not in pattern:
        return False
    base = pattern.index(tail[0])
    return all(tail[t] == pattern[(base + t) % 6] for t in range(need))
