"""The decorated cube of resolutions: vertices with dotted/classified circles,
signed classified edges, and the four state gradings.

Edge signs use (-1)**(number of 1-bits below the flipped position), which
makes every square face of the cube anticommute.  The half-integer dot
grading is stored as an exact integer numerator over 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .diagram import (
    EdgeInfo,
    Resolution,
    SurfaceLinkDiagram,
    classify_edge,
    resolve,
)
from .surface import (
    CocycleZ2,
    HClassCombination,
    HomotopyClass,
    Word,
    canonical_homotopy_class,
    evaluate_cocycle,
    hclass_sum,
)


@dataclass(frozen=True)
class CircleDecoration:
    dot: bool
    hclass: HomotopyClass
    z2: tuple[int, ...]


@dataclass(frozen=True)
class State:
    """Basis element: a resolution with one +/-1 label per circle, plus the
    upper/lower layer flag used by the doubled theories (None otherwise)."""

    rho: int
    labels: tuple[int, ...]
    layer: Optional[int] = None  # 0 = upper, 1 = lower


class DecoratedCube:
    def __init__(self, diagram: SurfaceLinkDiagram, cocycle: CocycleZ2 | None = None):
        self.diagram = diagram
        self.cocycle = cocycle
        self.n = diagram.n
        self.n_minus = diagram.n_minus()
        self.writhe = diagram.writhe()
        self.resolutions: dict[int, Resolution] = {
            rho: resolve(diagram, rho) for rho in range(1 << self.n)
        }
        self._class_cache: dict[Word, HomotopyClass] = {}
        self.decorations: dict[int, tuple[CircleDecoration, ...]] = {
            rho: tuple(self._decorate(c.word) for c in res.circles)
            for rho, res in self.resolutions.items()
        }
        self.edges: dict[tuple[int, int], EdgeInfo] = {}
        for rho in range(1 << self.n):
            for k in range(self.n):
                if not (rho >> k) & 1:
                    self.edges[(rho, k)] = classify_edge(
                        diagram,
                        rho,
                        k,
                        self.resolutions[rho],
                        self.resolutions[rho | (1 << k)],
                    )

    def _decorate(self, word: Word) -> CircleDecoration:
        if word not in self._class_cache:
            self._class_cache[word] = canonical_homotopy_class(word, self.diagram.surface)
        dot = False
        if self.cocycle is not None and not self.cocycle.is_zero():
            dot = bool(evaluate_cocycle(self.cocycle, word, self.diagram.surface))
        return CircleDecoration(
            dot, self._class_cache[word],
            tuple(self._z2(word)),
        )

    def _z2(self, word: Word):
        from .surface import homology_class_z2

        return homology_class_z2(word, self.diagram.surface)

    def edge_sign(self, rho: int, k: int) -> int:
        below = rho & ((1 << k) - 1)
        return -1 if bin(below).count("1") % 2 else 1

    def circle_count(self, rho: int) -> int:
        return len(self.resolutions[rho].circles)

    def states(self, rho: int, doubled: bool) -> Iterator[State]:
        m = self.circle_count(rho)
        layers = (0, 1) if doubled else (None,)
        for layer in layers:
            for mask in range(1 << m):
                labels = tuple(1 if (mask >> i) & 1 == 0 else -1 for i in range(m))
                yield State(rho, labels, layer)

    # -- gradings -----------------------------------------------------------

    def grade_i(self, state: State) -> int:
        return bin(state.rho).count("1") - self.n_minus

    def grade_j(self, state: State) -> int:
        j = sum(state.labels) + self.grade_i(state) + self.writhe
        if state.layer == 1:
            j -= 1
        return j

    def grade_c2(self, state: State) -> int:
        """Twice the dot grading: 2(#dotted-minus - #dotted-plus) + j."""
        decos = self.decorations[state.rho]
        dots = sum(-lab for lab, d in zip(state.labels, decos) if d.dot)
        return 2 * dots + self.grade_j(state)

    def grade_h(self, state: State) -> HClassCombination:
        decos = self.decorations[state.rho]
        return hclass_sum(
            [(d.hclass, lab) for lab, d in zip(state.labels, decos)]
        )

    # -- debug dump ---------------------------------------------------------

    def dump(self) -> str:
        lines = []
        for rho in range(1 << self.n):
            res = self.resolutions[rho]
            decos = self.decorations[rho]
            bits = format(rho, f"0{self.n}b")[::-1] if self.n else "-"
            parts = []
            for c, d in zip(res.circles, decos):
                tag = "*" if d.dot else ""
                parts.append(f"{tag}[{d.hclass}]")
            lines.append(f"vertex {bits}: {len(res.circles)} circles {' '.join(parts)}")
            for k in range(self.n):
                if not (rho >> k) & 1:
                    e = self.edges[(rho, k)]
                    lines.append(
                        f"  edge flip {k}: {e.kind} sign {self.edge_sign(rho, k):+d}"
                    )
        return "\n".join(lines)


def face_sign_parity_ok(cube: DecoratedCube) -> bool:
    """Every 2-face must carry an odd number of -1 edge signs."""
    n = cube.n
    for rho in range(1 << n):
        for k1 in range(n):
            if (rho >> k1) & 1:
                continue
            for k2 in range(k1 + 1, n):
                if (rho >> k2) & 1:
                    continue
                s = (
                    cube.edge_sign(rho, k1)
                    * cube.edge_sign(rho | (1 << k1), k2)
                    * cube.edge_sign(rho, k2)
                    * cube.edge_sign(rho | (1 << k2), k1)
                )
                if s != -1:
                    return False
    return True
