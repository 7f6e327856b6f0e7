"""Differential components for every theory variant and chain-complex
assembly over the decorated cube.

Variant families:

* ``kh``            classical TQFT (single-cycle smoothings get the zero map,
                    so assembly is only consistent when no such edge exists);
* ``dkh``/``dkh-c`` doubled theories, with per-circle dots from a Z2 cocycle;
                    the differential splits into a dot-degree-preserving part,
                    quantum-degree +4 deformation terms, and dot-degree +2
                    terms, and each variant sums a fixed subset;
* ``vkh``/``vkh-h`` virtual theories over R[X]/(X^2), zero single-cycle map,
                    with the algebra automorphism X -> -X applied where the
                    source-sink orientations disagree; ``vkh-h`` keeps only
                    the components preserving the homotopic grading.

Assembly always verifies d*d = 0 and refuses to return an inconsistent
complex: for the virtual theories that check is the gate on the barring
convention, which the construction deliberately treats as pluggable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Optional

from .cube import DecoratedCube, State
from .diagram import (
    MERGE,
    SINGLE_CYCLE,
    SPLIT,
    EdgeInfo,
    Resolution,
    SurfaceLinkDiagram,
)
from .surface import CocycleZ2, HClassCombination

KH = "kh"
DKH = "dkh"
DKH_C = "dkh-c"
DKH_PRIME_C = "dkh-prime-c"
HCAL_C = "hcal-c"
DKH_DPRIME_C = "dkh-dprime-c"
VKH = "vkh"
VKH_H = "vkh-h"

ALL_VARIANTS = (KH, DKH, DKH_C, DKH_PRIME_C, HCAL_C, DKH_DPRIME_C, VKH, VKH_H)
DOUBLED = {DKH, DKH_C, DKH_PRIME_C, HCAL_C, DKH_DPRIME_C}
VIRTUAL = {VKH, VKH_H}

D0, LEE, D2 = "d0", "lee", "d2"


class TheoryError(ValueError):
    pass


class DifferentialSquareError(RuntimeError):
    """d*d != 0: a convention violation, never silently ignored."""


class ChainMapError(RuntimeError):
    """A cobordism frame map failed to commute with the differentials."""


@dataclass(frozen=True)
class TheorySpec:
    variant: str
    ring: str = "Z"
    cocycle: Optional[CocycleZ2] = None

    def __post_init__(self):
        if self.variant not in ALL_VARIANTS:
            raise TheoryError(f"unknown theory variant {self.variant!r}")
        if self.ring not in ("Z", "Q", "F2"):
            raise TheoryError(f"unknown ring {self.ring!r}")
        if self.variant in (DKH_PRIME_C, DKH_DPRIME_C) and self.ring != "Q":
            raise TheoryError(
                f"{self.variant} has coefficient-2 deformation terms and needs ring Q"
            )
        if self.cocycle is not None and self.variant not in (DKH_C, DKH_PRIME_C, HCAL_C, DKH_DPRIME_C):
            if not self.cocycle.is_zero():
                raise TheoryError(f"{self.variant} does not take a cocycle")

    @property
    def doubled(self) -> bool:
        return self.variant in DOUBLED

    @property
    def buckets(self) -> tuple[str, ...]:
        return {
            KH: (D0,),
            DKH: (D0, D2),
            DKH_C: (D0,),
            DKH_PRIME_C: (D0, LEE),
            HCAL_C: (D0, D2),
            DKH_DPRIME_C: (D0, LEE, D2),
            VKH: (D0,),
            VKH_H: (D0,),
        }[self.variant]

    @property
    def handle_buckets(self) -> tuple[str, ...]:
        """Buckets used by 1-handle cobordism maps (same nesting)."""
        return {
            DKH_PRIME_C: (D0, LEE),
            DKH_DPRIME_C: (D0, LEE, D2),
        }.get(self.variant, (D0,))


def parse_theory(name: str, ring: str | None, class_bits: str | None, genus: int) -> TheorySpec:
    from .surface import SurfaceModel

    variant = name
    if variant not in ALL_VARIANTS:
        raise TheoryError(f"unknown theory {name!r}")
    default_ring = "Q" if variant in (DKH_PRIME_C, DKH_DPRIME_C) else "Z"
    ring = ring or default_ring
    cocycle = None
    if variant in (DKH_C, DKH_PRIME_C, HCAL_C, DKH_DPRIME_C):
        surf = SurfaceModel(genus)
        cocycle = (
            CocycleZ2.from_bits(class_bits, surf) if class_bits else CocycleZ2.zero(surf)
        )
    elif class_bits:
        raise TheoryError(f"theory {name!r} does not take --class")
    return TheorySpec(variant, ring, cocycle)


# ---------------------------------------------------------------------------
# Doubled-theory component tables.  Entries are (inputs) -> [(output, coeff)].

def dkh_merge(a: int, b: int, da: bool, db: bool, buckets: Iterable[str]):
    """Merge map on labels (+1/-1) with dot pattern (da, db) -> da xor db."""
    out: list[tuple[int, int]] = []
    for bucket in buckets:
        if bucket == D0:
            if not da and not db:
                if (a, b) == (1, 1):
                    out.append((1, 1))
                elif (a, b) in ((1, -1), (-1, 1)):
                    out.append((-1, 1))
            elif da and db:
                if (a, b) in ((1, -1), (-1, 1)):
                    out.append((-1, 1))
            elif da:  # dotted (x) undotted -> dotted
                if (a, b) == (1, 1):
                    out.append((1, 1))
                elif (a, b) == (-1, 1):
                    out.append((-1, 1))
            else:  # undotted (x) dotted -> dotted
                if (a, b) == (1, 1):
                    out.append((1, 1))
                elif (a, b) == (1, -1):
                    out.append((-1, 1))
        elif bucket == LEE:
            if (a, b) == (-1, -1):
                out.append((1, 1))
        elif bucket == D2:
            if da and db and (a, b) == (1, 1):
                out.append((1, 1))
            elif da and not db and (a, b) == (1, -1):
                out.append((-1, 1))
            elif db and not da and (a, b) == (-1, 1):
                out.append((-1, 1))
    return out


def dkh_split(x: int, dc: bool, d1: bool, d2: bool, buckets: Iterable[str]):
    """Split map: source label/dot dc, target dots (d1, d2), dc = d1 xor d2."""
    out: list[tuple[tuple[int, int], int]] = []
    for bucket in buckets:
        if bucket == D0:
            if not dc and not d1 and not d2:
                if x == 1:
                    out += [((1, -1), 1), ((-1, 1), 1)]
                else:
                    out.append(((-1, -1), 1))
            elif not dc:  # undotted -> dotted (x) dotted
                if x == 1:
                    out += [((1, -1), 1), ((-1, 1), 1)]
            elif d1:  # dotted -> dotted (x) undotted
                if x == 1:
                    out.append(((1, -1), 1))
                else:
                    out.append(((-1, -1), 1))
            else:  # dotted -> undotted (x) dotted
                if x == 1:
                    out.append(((-1, 1), 1))
                else:
                    out.append(((-1, -1), 1))
        elif bucket == LEE:
            if x == -1:
                out.append(((1, 1), 1))
        elif bucket == D2:
            if not dc and d1 and d2 and x == -1:
                out.append(((-1, -1), 1))
            elif dc and d1 and x == 1:
                out.append(((-1, 1), 1))
            elif dc and d2 and x == 1:
                out.append(((1, -1), 1))
    return out


def dkh_eta(x: int, layer: int, dotted: bool, buckets: Iterable[str]):
    """Single-cycle map on (label, layer); 2-coefficients need ring Q."""
    out: list[tuple[tuple[int, int], int]] = []
    for bucket in buckets:
        if bucket == D0:
            if layer == 0:
                out.append(((x, 1), 1))
        elif bucket == LEE:
            if layer == 1 and x == -1:
                out.append(((1, 0), 2))
        elif bucket == D2:
            if dotted and layer == 1 and x == 1:
                out.append(((-1, 0), 2))
    return out


# ---------------------------------------------------------------------------
# Virtual-theory component tables (Frobenius algebra R[X]/(X^2), v+ = 1).

def classical_merge(a: int, b: int):
    if (a, b) == (1, 1):
        return [(1, 1)]
    if (a, b) in ((1, -1), (-1, 1)):
        return [(-1, 1)]
    return []


def classical_split(x: int):
    if x == 1:
        return [((1, -1), 1), ((-1, 1), 1)]
    return [((-1, -1), 1)]


def vkh_merge_h(a: int, b: int, cls1, cls2, cls3):
    """Homotopic-grading-preserving merge, case split by which of the three
    circle classes are contractible."""
    t1, t2, t3 = cls1.is_trivial, cls2.is_trivial, cls3.is_trivial
    if t1 and t2:
        if not t3:
            raise TheoryError("merge of contractible circles must be contractible")
        return classical_merge(a, b)
    if not t1 and not t2:
        if t3:  # m0
            if (a, b) in ((1, -1), (-1, 1)):
                return [(-1, 1)]
            return []
        return []
    if t2:  # m1: [C1] = [C3] != trivial
        if cls1 != cls3:
            raise TheoryError("class triple inconsistent with merge")
        if (a, b) == (1, 1):
            return [(1, 1)]
        if (a, b) == (-1, 1):
            return [(-1, 1)]
        return []
    # m2: [C2] = [C3] != trivial
    if cls2 != cls3:
        raise TheoryError("class triple inconsistent with merge")
    if (a, b) == (1, 1):
        return [(1, 1)]
    if (a, b) == (1, -1):
        return [(-1, 1)]
    return []


def vkh_split_h(x: int, cls1, cls2, cls3):
    """Homotopic-grading-preserving split of C3 into (C1, C2)."""
    t1, t2, t3 = cls1.is_trivial, cls2.is_trivial, cls3.is_trivial
    if t1 and t2:
        if not t3:
            raise TheoryError("split into contractible circles must be contractible")
        return classical_split(x)
    if not t1 and not t2:
        if t3:  # delta0
            if x == 1:
                return [((1, -1), 1), ((-1, 1), 1)]
            return []
        return []
    if t2:  # delta1
        if cls1 != cls3:
            raise TheoryError("class triple inconsistent with split")
        if x == 1:
            return [((1, -1), 1)]
        return [((-1, -1), 1)]
    # delta2
    if cls2 != cls3:
        raise TheoryError("class triple inconsistent with split")
    if x == 1:
        return [((-1, 1), 1)]
    return [((-1, -1), 1)]


# ---------------------------------------------------------------------------
# Source-sink barring for the virtual theories.
#
# Ends 0 and 2 carry inward formal flow, ends 1 and 3 outward flow; this
# alternates around every crossing and orients each smoothing arc.  A circle
# factor is conjugated (v- -> -v-) at the active site when the circle's
# traced direction disagrees with the site flow there.  The convention is
# validated only by the d^2 = 0 gate.

_FLOW_IN = (0, 2)


def _circle_site_bits(diagram, resolution: Resolution, circle_idx: int, crossing_id: str, rho: int):
    """Agreement bits of a circle's passages through the given crossing.

    Returns a list over passages (ordered by traversal) of booleans: True
    when the traversal enters the smoothing arc through a flow-in end.
    Entries are tagged with the entry end index for deterministic reference.
    """
    circle = resolution.circles[circle_idx]
    bits: list[tuple[int, bool]] = []
    passages = circle.passages
    for idx, (arc_i, direction) in enumerate(passages):
        arc = diagram.arcs[arc_i]
        head = (arc.to_c, arc.to_e) if direction > 0 else (arc.from_c, arc.from_e)
        if head[0] == crossing_id:
            bits.append((head[1], head[1] in _FLOW_IN))
    return bits


def _bar_exponent(bits: list[tuple[int, bool]]) -> int:
    """Disagreement exponent for a circle at the active site: reference
    passage is the one entering at the smallest end index."""
    if not bits:
        return 0
    _, agree = min(bits, key=lambda p: p[0])
    return 0 if agree else 1


def barring_signs(cube: DecoratedCube, edge: EdgeInfo, src_labels_idx, dst_labels_idx):
    """(source exponents, target exponents) of the barring operator for the
    circles involved in the edge, indexed like ``edge.sources``/``targets``."""
    diagram = cube.diagram
    cid = diagram.crossings[edge.k].id
    src_res = cube.resolutions[edge.rho]
    dst_res = cube.resolutions[edge.rho | (1 << edge.k)]
    src = [
        _bar_exponent(_circle_site_bits(diagram, src_res, i, cid, edge.rho))
        for i in edge.sources
    ]
    dst = [
        _bar_exponent(_circle_site_bits(diagram, dst_res, j, cid, edge.rho | (1 << edge.k)))
        for j in edge.targets
    ]
    return src, dst


def _bar_sign(label: int, exponent: int) -> int:
    return -1 if exponent and label == -1 else 1


# ---------------------------------------------------------------------------
# Complex assembly

@dataclass
class MultigradedComplex:
    """Free chain groups with sparse exact differentials and attached
    gradings.  Basis order within each homological degree is deterministic."""

    spec: TheorySpec
    cube: DecoratedCube
    bases: dict[int, list[State]]
    index: dict[State, int]
    diff: dict[int, list[dict[int, int]]]  # i -> column per basis element
    entry_buckets: dict[int, list[dict[int, str]]]

    @property
    def ring(self) -> str:
        return self.spec.ring

    @property
    def extra_kind(self) -> Optional[str]:
        if self.spec.variant in (DKH_C, DKH_PRIME_C, HCAL_C, DKH_DPRIME_C):
            return "c"
        if self.spec.variant == VKH_H:
            return "h"
        return None

    @property
    def filtered(self) -> bool:
        if self.spec.variant in (DKH_PRIME_C, DKH_DPRIME_C):
            return True
        if self.spec.variant == HCAL_C and self.ring == "Q":
            return True
        return False

    def degrees(self) -> list[int]:
        return sorted(self.bases)

    def basis(self, i: int) -> list[State]:
        return self.bases.get(i, [])

    def column(self, i: int, s_idx: int) -> dict[int, int]:
        cols = self.diff.get(i)
        return cols[s_idx] if cols else {}

    def grade_j(self, i: int, s_idx: int) -> int:
        return self.cube.grade_j(self.bases[i][s_idx])

    def grade_c2(self, i: int, s_idx: int) -> int:
        return self.cube.grade_c2(self.bases[i][s_idx])

    def grade_h(self, i: int, s_idx: int) -> HClassCombination:
        return self.cube.grade_h(self.bases[i][s_idx])

    def block_key(self, i: int, s_idx: int) -> Hashable:
        state = self.bases[i][s_idx]
        j = self.cube.grade_j(state)
        if self.extra_kind == "c":
            return (j, self.cube.grade_c2(state))
        if self.extra_kind == "h":
            return (j, self.cube.grade_h(state).format())
        return (j, None)

    def table_key(self, i: int, key) -> tuple[int, int, Optional[Hashable]]:
        j, extra = key
        if self.extra_kind == "c" and self.spec.variant == HCAL_C and self.ring == "Z":
            return (i, j, None)
        return (i, j, extra)

    def filtered_table_key(self, i: int, j: int, c2: int):
        return (i, j, c2)

    def total_dim(self) -> int:
        return sum(len(b) for b in self.bases.values())

    def to_json_dict(self) -> dict:
        cube = self.cube
        out = {"variant": self.spec.variant, "ring": self.ring, "levels": []}
        for i in self.degrees():
            states = []
            for s in self.bases[i]:
                states.append(
                    {
                        "rho": s.rho,
                        "labels": list(s.labels),
                        "layer": s.layer,
                        "j": cube.grade_j(s),
                    }
                )
            entries = [
                [s_idx, t_idx, coeff]
                for s_idx, col in enumerate(self.diff.get(i, []))
                for t_idx, coeff in sorted(col.items())
            ]
            out["levels"].append({"i": i, "states": states, "entries": entries})
        return out


def _hcal_z_block_fix(cx: MultigradedComplex):
    """Over Z the c-raising part of the differential leaves the c-blocks, so
    the group structure is computed in (i, j) blocks only."""
    pass


def assemble_complex(diagram: SurfaceLinkDiagram, spec: TheorySpec) -> MultigradedComplex:
    cocycle = spec.cocycle if spec.variant in (DKH_C, DKH_PRIME_C, HCAL_C, DKH_DPRIME_C) else None
    cube = DecoratedCube(diagram, cocycle)
    return assemble_from_cube(cube, spec)


def assemble_from_cube(cube: DecoratedCube, spec: TheorySpec) -> MultigradedComplex:
    n = cube.n
    bases: dict[int, list[State]] = {}
    index: dict[State, int] = {}
    for rho in range(1 << n):
        i = bin(rho).count("1") - cube.n_minus
        lst = bases.setdefault(i, [])
        for state in cube.states(rho, spec.doubled):
            index[state] = len(lst)
            lst.append(state)

    diff: dict[int, list[dict[int, int]]] = {
        i: [dict() for _ in basis] for i, basis in bases.items()
    }
    buckets_map: dict[int, list[dict[int, str]]] = {
        i: [dict() for _ in basis] for i, basis in bases.items()
    }

    for (rho, k), edge in cube.edges.items():
        sign = cube.edge_sign(rho, k)
        i = bin(rho).count("1") - cube.n_minus
        for s_idx_local, state in enumerate(cube.states(rho, spec.doubled)):
            col = diff[i][index[state]]
            bk = buckets_map[i][index[state]]
            for target_labels, layer, coeff, bucket in _edge_images(cube, spec, edge, state):
                tstate = State(rho | (1 << k), target_labels, layer)
                t_idx = index[tstate]
                col[t_idx] = col.get(t_idx, 0) + sign * coeff
                if col[t_idx] == 0:
                    del col[t_idx]
                    bk.pop(t_idx, None)
                else:
                    bk[t_idx] = bucket

    cx = MultigradedComplex(spec, cube, bases, index, diff, buckets_map)
    _verify_d_squared(cx)
    return cx


def _edge_images(cube: DecoratedCube, spec: TheorySpec, edge: EdgeInfo, state: State):
    """Images of a state along one edge: yields (target labels, layer, coeff,
    bucket).  Coefficients exclude the cube edge sign."""
    rho_t = edge.rho | (1 << edge.k)
    decos_s = cube.decorations[edge.rho]
    decos_t = cube.decorations[rho_t]
    m_t = cube.circle_count(rho_t)
    variant = spec.variant

    base = [0] * m_t
    for si, ti in edge.passive:
        base[ti] = state.labels[si]

    use_bar = variant in VIRTUAL and spec.ring != "F2"
    if use_bar and edge.kind != SINGLE_CYCLE:
        src_bar, dst_bar = barring_signs(cube, edge, None, None)
    else:
        src_bar, dst_bar = [0] * len(edge.sources), [0] * len(edge.targets)

    if edge.kind == MERGE:
        i1, i2 = edge.sources
        (j3,) = edge.targets
        a, b = state.labels[i1], state.labels[i2]
        pre = _bar_sign(a, src_bar[0]) * _bar_sign(b, src_bar[1])
        if variant in VIRTUAL:
            if variant == VKH:
                images = classical_merge(a, b)
            else:
                images = vkh_merge_h(
                    a, b,
                    decos_s[i1].hclass, decos_s[i2].hclass, decos_t[j3].hclass,
                )
            for out_label, coeff in images:
                labels = base[:]
                labels[j3] = out_label
                post = _bar_sign(out_label, dst_bar[0])
                yield tuple(labels), state.layer, coeff * pre * post, D0
        elif variant == KH:
            for out_label, coeff in classical_merge(a, b):
                labels = base[:]
                labels[j3] = out_label
                yield tuple(labels), state.layer, coeff, D0
        else:
            da, db, dc = decos_s[i1].dot, decos_s[i2].dot, decos_t[j3].dot
            if dc != (da ^ db):
                raise TheoryError("dot pattern inconsistent with merge")
            for bucket in spec.buckets:
                for out_label, coeff in dkh_merge(a, b, da, db, (bucket,)):
                    labels = base[:]
                    labels[j3] = out_label
                    yield tuple(labels), state.layer, coeff, bucket
    elif edge.kind == SPLIT:
        (i3,) = edge.sources
        j1, j2 = edge.targets
        x = state.labels[i3]
        pre = _bar_sign(x, src_bar[0])
        if variant in VIRTUAL:
            if variant == VKH:
                images = classical_split(x)
            else:
                images = vkh_split_h(
                    x, decos_t[j1].hclass, decos_t[j2].hclass, decos_s[i3].hclass
                )
            for (l1, l2), coeff in images:
                labels = base[:]
                labels[j1], labels[j2] = l1, l2
                post = _bar_sign(l1, dst_bar[0]) * _bar_sign(l2, dst_bar[1])
                yield tuple(labels), state.layer, coeff * pre * post, D0
        elif variant == KH:
            for (l1, l2), coeff in classical_split(x):
                labels = base[:]
                labels[j1], labels[j2] = l1, l2
                yield tuple(labels), state.layer, coeff, D0
        else:
            dc = decos_s[i3].dot
            d1, d2 = decos_t[j1].dot, decos_t[j2].dot
            if dc != (d1 ^ d2):
                raise TheoryError("dot pattern inconsistent with split")
            for bucket in spec.buckets:
                for (l1, l2), coeff in dkh_split(x, dc, d1, d2, (bucket,)):
                    labels = base[:]
                    labels[j1], labels[j2] = l1, l2
                    yield tuple(labels), state.layer, coeff, bucket
    else:  # single-cycle
        (i1,) = edge.sources
        (j1,) = edge.targets
        if variant in VIRTUAL or variant == KH:
            return  # zero map
        dotted = decos_s[i1].dot
        if decos_t[j1].dot != dotted:
            raise TheoryError("single-cycle smoothing changed the dotting")
        x = state.labels[i1]
        for bucket in spec.buckets:
            for (out_label, out_layer), coeff in dkh_eta(x, state.layer, dotted, (bucket,)):
                labels = base[:]
                labels[j1] = out_label
                yield tuple(labels), out_layer, coeff, bucket


def _verify_d_squared(cx: MultigradedComplex) -> None:
    mod2 = cx.ring == "F2"
    for i in cx.degrees():
        nxt = cx.diff.get(i + 1)
        if nxt is None:
            continue
        for s_idx, col in enumerate(cx.diff[i]):
            acc: dict[int, int] = {}
            for t_idx, c1 in col.items():
                for u_idx, c2 in nxt[t_idx].items():
                    acc[u_idx] = acc.get(u_idx, 0) + c1 * c2
            for u_idx, val in acc.items():
                if (val % 2 if mod2 else val) != 0:
                    state = cx.bases[i][s_idx]
                    raise DifferentialSquareError(
                        f"d^2 != 0 for {cx.spec.variant} at i={i}, "
                        f"state rho={state.rho:0{cx.cube.n}b} labels={state.labels} "
                        f"layer={state.layer} -> basis {u_idx} coefficient {val}"
                    )


# ---------------------------------------------------------------------------
# Degree contracts (property checks; see the test suite and `--verify full`)

def degree_contract_violations(cx: MultigradedComplex) -> list[str]:
    """Every matrix entry must respect its bucket's (j, c) degree: the
    c-preserving part keeps both j and c except on undotted deformation
    terms, deformation terms raise j by 4, and the c-raising part raises c
    by exactly 2; the homotopic differential preserves the h-grading."""
    cube = cx.cube
    bad: list[str] = []
    for i in cx.degrees():
        basis_i = cx.bases[i]
        basis_n = cx.bases.get(i + 1, [])
        for s_idx, col in enumerate(cx.diff.get(i, {}) and cx.diff[i]):
            s = basis_i[s_idx]
            js, c2s = cube.grade_j(s), cube.grade_c2(s)
            hs = cube.grade_h(s) if cx.extra_kind == "h" else None
            for t_idx, coeff in col.items():
                t = basis_n[t_idx]
                jt, c2t = cube.grade_j(t), cube.grade_c2(t)
                bucket = cx.entry_buckets[i][s_idx].get(t_idx)
                dj, dc2 = jt - js, c2t - c2s
                ok = True
                if cx.extra_kind == "h":
                    ok = dj == 0 and cube.grade_h(t) == hs
                elif bucket == D0:
                    ok = dj == 0 and dc2 == 0
                elif bucket == LEE:
                    ok = dj == 4 and dc2 in (0, 4)
                elif bucket == D2:
                    ok = dj == 0 and dc2 == 4
                else:
                    ok = dj == 0
                if not ok:
                    bad.append(
                        f"{cx.spec.variant} i={i} bucket={bucket} dj={dj} dc2={dc2}"
                    )
    return bad
