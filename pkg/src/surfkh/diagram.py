"""Link diagrams on thickened surfaces: the SLD text format, circle tracing
in any resolution of the cube, and elementary Reidemeister moves.

A crossing has four ends: 0 = over-in, 1 = under-in, 2 = over-out,
3 = under-out, so arcs always run from an out-end (or loop) to an in-end and
component orientations are implicit in the wiring.  A resolution smooths each
crossing with one of two end-pairings; bit 0 selects the oriented (Seifert)
pairing at positive crossings and the disoriented pairing at negative ones,
which is what reproduces the standard homology normalisations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

from .surface import (
    SurfaceModel,
    Word,
    WordSyntaxError,
    format_word,
    invert_word,
    is_contractible,
    parse_word,
    reduce_word,
)

ORIENTED_PAIRING = ((0, 3), (1, 2))
DISORIENTED_PAIRING = ((0, 1), (2, 3))

OVER_IN, UNDER_IN, OVER_OUT, UNDER_OUT = 0, 1, 2, 3


class DiagramError(ValueError):
    """Invalid diagram structure or parse failure."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Crossing:
    id: str
    sign: int  # +1 or -1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise DiagramError(f"crossing {self.id}: sign must be +1 or -1")


@dataclass(frozen=True)
class Arc:
    """Directed strand segment between crossing ends, decorated with the
    pi_1 word of polygon edges crossed from tail to head."""

    from_c: str
    from_e: int
    to_c: str
    to_e: int
    word: Word


@dataclass(frozen=True)
class FreeLoop:
    word: Word


@dataclass(frozen=True)
class SurfaceLinkDiagram:
    surface: SurfaceModel
    crossings: tuple[Crossing, ...]
    arcs: tuple[Arc, ...]
    loops: tuple[FreeLoop, ...]

    def __post_init__(self):
        self._validate()

    def _validate(self) -> None:
        ids = [c.id for c in self.crossings]
        if len(set(ids)) != len(ids):
            raise DiagramError("duplicate crossing ids")
        known = set(ids)
        used: dict[tuple[str, int], str] = {}
        for arc in self.arcs:
            for c, e, role in (
                (arc.from_c, arc.from_e, "from"),
                (arc.to_c, arc.to_e, "to"),
            ):
                if c not in known:
                    raise DiagramError(f"arc references unknown crossing {c}")
                if e not in (0, 1, 2, 3):
                    raise DiagramError(f"arc end index {e} out of range")
                if (c, e) in used:
                    raise DiagramError(f"crossing end {c}.{e} used twice")
                used[(c, e)] = role
            if arc.from_e not in (OVER_OUT, UNDER_OUT):
                raise DiagramError(
                    f"arc leaves {arc.from_c}.{arc.from_e}: unorientable "
                    "(arcs must leave through an outgoing end)"
                )
            if arc.to_e not in (OVER_IN, UNDER_IN):
                raise DiagramError(
                    f"arc enters {arc.to_c}.{arc.to_e}: unorientable "
                    "(arcs must enter through an incoming end)"
                )
            self.surface.validate_word(arc.word)
        for c in self.crossings:
            for e in range(4):
                if (c.id, e) not in used:
                    raise DiagramError(f"dangling crossing end {c.id}.{e}")
        for loop in self.loops:
            self.surface.validate_word(loop.word)

    # -- basic invariants ---------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.crossings)

    def n_plus(self) -> int:
        return sum(1 for c in self.crossings if c.sign > 0)

    def n_minus(self) -> int:
        return sum(1 for c in self.crossings if c.sign < 0)

    def writhe(self) -> int:
        return self.n_plus() - self.n_minus()

    def crossing_index(self, cid: str) -> int:
        for i, c in enumerate(self.crossings):
            if c.id == cid:
                return i
        raise DiagramError(f"unknown crossing {cid}")

    def arc_at(self, c: str, e: int) -> tuple[int, str]:
        """(arc index, 'from'|'to') attached at crossing end (c, e)."""
        for i, arc in enumerate(self.arcs):
            if (arc.from_c, arc.from_e) == (c, e):
                return i, "from"
            if (arc.to_c, arc.to_e) == (c, e):
                return i, "to"
        raise DiagramError(f"no arc at {c}.{e}")

    def components(self) -> list[list[int]]:
        """Arc indices grouped into oriented link components."""
        comps = []
        seen: set[int] = set()
        for start in range(len(self.arcs)):
            if start in seen:
                continue
            comp = []
            i = start
            while i not in seen:
                seen.add(i)
                comp.append(i)
                arc = self.arcs[i]
                # pass through the crossing: over-in -> over-out, etc.
                out_end = OVER_OUT if arc.to_e == OVER_IN else UNDER_OUT
                i, role = self.arc_at(arc.to_c, out_end)
                if role != "from":
                    raise DiagramError("inconsistent wiring")  # pragma: no cover
            comps.append(comp)
        return comps

    def component_count(self) -> int:
        return len(self.components()) + len(self.loops)


# ---------------------------------------------------------------------------
# Resolutions

@dataclass(frozen=True)
class Circle:
    """One circle of a resolution: the cyclic itinerary of arc passages and
    the accumulated pi_1 word (well-defined up to conjugation/inversion)."""

    passages: tuple[tuple[int, int], ...]  # (arc index, +1 forward / -1 back)
    word: Word
    through: frozenset[str]  # crossings whose smoothing arcs this circle uses

    def arc_set(self) -> frozenset[int]:
        return frozenset(a for a, _ in self.passages)


@dataclass(frozen=True)
class Resolution:
    rho: int
    circles: tuple[Circle, ...]
    loop_circle_start: int  # circles[loop_circle_start:] are the free loops


def _pairing(crossing: Crossing, bit: int):
    oriented = (bit == 0) == (crossing.sign > 0)
    return ORIENTED_PAIRING if oriented else DISORIENTED_PAIRING


def resolve(diagram: SurfaceLinkDiagram, rho: int) -> Resolution:
    """Trace the circles of the resolution selected by the bit-vector rho."""
    if not 0 <= rho < (1 << diagram.n):
        raise DiagramError(f"resolution index {rho} out of range")
    partner: dict[tuple[str, int], tuple[str, int]] = {}
    for k, crossing in enumerate(diagram.crossings):
        for e1, e2 in _pairing(crossing, (rho >> k) & 1):
            partner[(crossing.id, e1)] = (crossing.id, e2)
            partner[(crossing.id, e2)] = (crossing.id, e1)

    circles: list[Circle] = []
    visited: set[int] = set()
    for start in range(len(diagram.arcs)):
        if start in visited:
            continue
        passages: list[tuple[int, int]] = []
        word: list[int] = []
        through: set[str] = set()
        i, direction = start, 1
        while True:
            visited.add(i)
            passages.append((i, direction))
            arc = diagram.arcs[i]
            word.extend(arc.word if direction > 0 else invert_word(arc.word))
            head = (arc.to_c, arc.to_e) if direction > 0 else (arc.from_c, arc.from_e)
            exit_end = partner[head]
            through.add(head[0])
            j, role = diagram.arc_at(*exit_end)
            direction = 1 if role == "from" else -1
            i = j
            if i == start and direction == 1:
                break
        circles.append(
            Circle(tuple(passages), reduce_word(tuple(word)), frozenset(through))
        )
    loop_start = len(circles)
    for loop in diagram.loops:
        circles.append(Circle((), reduce_word(loop.word), frozenset()))
    return Resolution(rho, tuple(circles), loop_start)


MERGE, SPLIT, SINGLE_CYCLE = "merge", "split", "single"


@dataclass(frozen=True)
class EdgeInfo:
    rho: int
    k: int
    kind: str
    # indices into source/target circle tuples
    sources: tuple[int, ...]
    targets: tuple[int, ...]
    passive: tuple[tuple[int, int], ...]  # (source idx, target idx) pairs


def classify_edge(
    diagram: SurfaceLinkDiagram,
    rho: int,
    k: int,
    src: Resolution | None = None,
    dst: Resolution | None = None,
) -> EdgeInfo:
    """Classify the cube edge flipping crossing k of resolution rho and match
    the circles not passing through that crossing."""
    if (rho >> k) & 1:
        raise DiagramError(f"bit {k} of rho is already set")
    src = src or resolve(diagram, rho)
    dst = dst or resolve(diagram, rho | (1 << k))
    cid = diagram.crossings[k].id
    s_active = [i for i, c in enumerate(src.circles) if cid in c.through]
    t_active = [i for i, c in enumerate(dst.circles) if cid in c.through]
    s_passive = [i for i in range(len(src.circles)) if i not in s_active]
    t_passive = [i for i in range(len(dst.circles)) if i not in t_active]
    by_arcs = {dst.circles[i].arc_set(): i for i in t_passive}
    passive = []
    for i in s_passive:
        j = by_arcs.get(src.circles[i].arc_set())
        if j is None:  # pragma: no cover - tracer guarantees this
            raise DiagramError("passive circle mismatch across edge")
        passive.append((i, j))
    delta = len(t_active) - len(s_active)
    kind = {1: SPLIT, -1: MERGE, 0: SINGLE_CYCLE}.get(delta)
    if kind is None:  # pragma: no cover
        raise DiagramError("circle count changed by more than one across edge")
    return EdgeInfo(rho, k, kind, tuple(s_active), tuple(t_active), tuple(passive))


# ---------------------------------------------------------------------------
# SLD text format

def parse_diagram(text: str) -> SurfaceLinkDiagram:
    surface: SurfaceModel | None = None
    crossings: list[Crossing] = []
    arcs: list[Arc] = []
    loops: list[FreeLoop] = []

    def err(msg: str, line_no: int):
        raise DiagramError(msg, line=line_no)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind = fields[0]
        try:
            if kind == "surface":
                if surface is not None:
                    err("duplicate surface declaration", line_no)
                if len(fields) != 2:
                    err("usage: surface <genus>", line_no)
                surface = SurfaceModel(int(fields[1]))
            elif kind == "crossing":
                if len(fields) != 3 or fields[2] not in ("+", "-"):
                    err("usage: crossing <id> <+|->", line_no)
                crossings.append(Crossing(fields[1], 1 if fields[2] == "+" else -1))
            elif kind == "arc":
                if len(fields) < 5 or fields[3] != "word":
                    err("usage: arc <id>.<end> <id>.<end> word <tokens|.>", line_no)
                if surface is None:
                    err("surface must be declared before arcs", line_no)
                ends = []
                for spec in fields[1:3]:
                    if "." not in spec:
                        err(f"bad end spec {spec!r}", line_no)
                    c, e = spec.rsplit(".", 1)
                    ends.append((c, int(e)))
                word = parse_word(" ".join(fields[4:]), surface)
                arcs.append(Arc(ends[0][0], ends[0][1], ends[1][0], ends[1][1], word))
            elif kind == "loop":
                if len(fields) < 2 or fields[1] != "word":
                    err("usage: loop word <tokens|.>", line_no)
                if surface is None:
                    err("surface must be declared before loops", line_no)
                loops.append(FreeLoop(parse_word(" ".join(fields[2:]), surface)))
            elif kind == "orient":
                pass  # orientations are implicit in the arc wiring
            else:
                err(f"unknown declaration {kind!r}", line_no)
        except (ValueError, WordSyntaxError) as exc:
            if isinstance(exc, DiagramError) and exc.line is not None:
                raise
            err(str(exc), line_no)
    if surface is None:
        raise DiagramError("missing surface declaration")
    try:
        return SurfaceLinkDiagram(
            surface, tuple(crossings), tuple(arcs), tuple(loops)
        )
    except DiagramError:
        raise
    except ValueError as exc:  # pragma: no cover
        raise DiagramError(str(exc))


def canonical_diagram(diagram: SurfaceLinkDiagram) -> SurfaceLinkDiagram:
    """Canonical ordering: crossings by id, arcs by (from id, end)."""
    crossings = tuple(sorted(diagram.crossings, key=lambda c: c.id))
    arcs = tuple(sorted(diagram.arcs, key=lambda a: (a.from_c, a.from_e)))
    return SurfaceLinkDiagram(diagram.surface, crossings, arcs, diagram.loops)


def serialise_diagram(diagram: SurfaceLinkDiagram) -> str:
    d = canonical_diagram(diagram)
    s = d.surface
    lines = [f"surface {s.genus}"]
    for c in d.crossings:
        lines.append(f"crossing {c.id} {'+' if c.sign > 0 else '-'}")
    for a in d.arcs:
        lines.append(
            f"arc {a.from_c}.{a.from_e} {a.to_c}.{a.to_e} word {format_word(a.word, s)}"
        )
    for loop in d.loops:
        lines.append(f"loop word {format_word(loop.word, s)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Reidemeister moves

def _fresh_crossing_id(diagram: SurfaceLinkDiagram, prefix: str = "r") -> str:
    taken = {c.id for c in diagram.crossings}
    i = 0
    while f"{prefix}{i}" in taken:
        i += 1
    return f"{prefix}{i}"


def _split_word(word: Word, pos: int) -> tuple[Word, Word]:
    if not 0 <= pos <= len(word):
        raise DiagramError(f"arc position {pos} out of range")
    return word[:pos], word[pos:]


def apply_r1(
    diagram: SurfaceLinkDiagram, arc_index: int, pos: int, chirality: int
) -> SurfaceLinkDiagram:
    """Insert a kink of the given sign into an arc.  The kink circle has the
    empty word, so it is contractible and never dotted."""
    if chirality not in (1, -1):
        raise DiagramError("chirality must be +1 or -1")
    arc = diagram.arcs[arc_index]
    w1, w2 = _split_word(arc.word, pos)
    cid = _fresh_crossing_id(diagram)
    new_crossing = Crossing(cid, chirality)
    # strand enters as understrand, loops back over itself
    incoming = Arc(arc.from_c, arc.from_e, cid, UNDER_IN, w1)
    kink = Arc(cid, UNDER_OUT, cid, OVER_IN, ())
    outgoing = Arc(cid, OVER_OUT, arc.to_c, arc.to_e, w2)
    arcs = list(diagram.arcs)
    arcs[arc_index : arc_index + 1] = [incoming, kink, outgoing]
    return SurfaceLinkDiagram(
        diagram.surface, diagram.crossings + (new_crossing,), tuple(arcs), diagram.loops
    )


def apply_r2(
    diagram: SurfaceLinkDiagram,
    arc1_index: int,
    pos1: int,
    arc2_index: int,
    pos2: int,
    band: Word = (),
) -> SurfaceLinkDiagram:
    """Push a finger of the first strand over the second.  The connecting
    band word must be contractible, otherwise the move changes the link."""
    if arc1_index == arc2_index:
        raise DiagramError("r2 sites must lie on distinct arcs")
    if not is_contractible(band, diagram.surface):
        raise DiagramError("r2 band word is not contractible")
    arc1, arc2 = diagram.arcs[arc1_index], diagram.arcs[arc2_index]
    u1, u2 = _split_word(arc1.word, pos1)
    v1, v2 = _split_word(arc2.word, pos2)
    ca = _fresh_crossing_id(diagram, "r")
    cb = _fresh_crossing_id(
        SurfaceLinkDiagram(
            diagram.surface,
            diagram.crossings + (Crossing(ca, 1),),
            diagram.arcs,
            diagram.loops,
        ),
        "r",
    )
    over_in = Arc(arc1.from_c, arc1.from_e, ca, OVER_IN, reduce_word(u1 + band))
    over_mid = Arc(ca, OVER_OUT, cb, OVER_IN, ())
    over_out = Arc(cb, OVER_OUT, arc1.to_c, arc1.to_e, reduce_word(invert_word(band) + u2))
    under_in = Arc(arc2.from_c, arc2.from_e, ca, UNDER_IN, v1)
    under_mid = Arc(ca, UNDER_OUT, cb, UNDER_IN, ())
    under_out = Arc(cb, UNDER_OUT, arc2.to_c, arc2.to_e, v2)
    arcs = list(diagram.arcs)
    # replace both arcs; keep deterministic order
    pieces = {arc1_index: [over_in, over_mid, over_out], arc2_index: [under_in, under_mid, under_out]}
    new_arcs: list[Arc] = []
    for i, a in enumerate(arcs):
        if i in pieces:
            new_arcs.extend(pieces[i])
        else:
            new_arcs.append(a)
    crossings = diagram.crossings + (Crossing(ca, 1), Crossing(cb, -1))
    return SurfaceLinkDiagram(diagram.surface, crossings, tuple(new_arcs), diagram.loops)
