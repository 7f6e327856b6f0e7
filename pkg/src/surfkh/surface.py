"""Genus-g surface model: fundamental-group words, Z2 cohomology pairing,
contractibility, and free homotopy classes of unoriented loops.

Words in pi_1 of the closed oriented genus-g surface are tuples of nonzero
signed integers: letter ``2i-1`` is ``a_i``, letter ``2i`` is ``b_i``, and a
negative value is the inverse generator.  The group relator is
``a1 b1 A1 B1 a2 b2 A2 B2 ...``.

Conjugacy (free homotopy) is decided by abelianisation for genus <= 1 and by
cyclic Dehn reduction for genus >= 2, where the surface relator satisfies the
small-cancellation condition that makes Dehn's algorithm exact.  Smoothing
circles carry no preferred orientation, so classes are canonicalised up to
inversion as well as conjugation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

Word = tuple[int, ...]

_TOKEN_RE = re.compile(r"([aAbB])(\d+)")


class WordSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class SurfaceModel:
    """Closed oriented surface of genus g, presented as a 4g-gon."""

    genus: int

    def __post_init__(self):
        if self.genus < 0:
            raise ValueError("genus must be non-negative")

    @property
    def rank(self) -> int:
        """Number of generators (2g)."""
        return 2 * self.genus

    def relator(self) -> Word:
        w: list[int] = []
        for i in range(self.genus):
            a, b = 2 * i + 1, 2 * i + 2
            w += [a, b, -a, -b]
        return tuple(w)

    def letter_name(self, letter: int) -> str:
        idx = abs(letter)
        if not 1 <= idx <= self.rank:
            raise ValueError(f"letter {letter} out of range for genus {self.genus}")
        base = "a" if idx % 2 == 1 else "b"
        name = f"{base}{(idx + 1) // 2}"
        return name.upper() if letter < 0 else name

    def validate_word(self, w: Word) -> None:
        for letter in w:
            if letter == 0 or abs(letter) > self.rank:
                raise WordSyntaxError(
                    f"letter {letter} not in the genus-{self.genus} alphabet"
                )


def parse_word(text: str, surface: SurfaceModel | None = None) -> Word:
    """Parse word tokens (``a1 B1`` or ``a1B1``); ``.`` is the empty word."""
    text = text.strip()
    if text in (".", ""):
        return ()
    letters: list[int] = []
    for chunk in text.split():
        pos = 0
        for m in _TOKEN_RE.finditer(chunk):
            if m.start() != pos:
                raise WordSyntaxError(f"bad word token near {chunk[pos:]!r}")
            base, idx = m.group(1), int(m.group(2))
            if idx < 1:
                raise WordSyntaxError(f"bad generator index in {m.group(0)!r}")
            letter = 2 * idx - 1 if base.lower() == "a" else 2 * idx
            if base.isupper():
                letter = -letter
            letters.append(letter)
            pos = m.end()
        if pos != len(chunk):
            raise WordSyntaxError(f"bad word token near {chunk[pos:]!r}")
    word = tuple(letters)
    if surface is not None:
        surface.validate_word(word)
    return word


def format_word(w: Word, surface: SurfaceModel) -> str:
    if not w:
        return "."
    return " ".join(surface.letter_name(x) for x in w)


def invert_word(w: Word) -> Word:
    return tuple(-x for x in reversed(w))


def reduce_word(w: Word) -> Word:
    """Free reduction: cancel adjacent x x^-1 pairs to the unique normal form."""
    out: list[int] = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def cyclic_reduce(w: Word) -> Word:
    w = reduce_word(w)
    while len(w) >= 2 and w[0] == -w[-1]:
        w = w[1:-1]
    return w


def homology_class_z2(w: Word, surface: SurfaceModel) -> tuple[int, ...]:
    """Exponent sums of each generator mod 2 (the Z2 homology class)."""
    v = [0] * surface.rank
    for x in w:
        v[abs(x) - 1] ^= 1
    return tuple(v)


@dataclass(frozen=True)
class CocycleZ2:
    """Element of H^1(surface; Z2) as one bit per generator a1,b1,...,ag,bg."""

    values: tuple[int, ...]

    def __post_init__(self):
        if any(v not in (0, 1) for v in self.values):
            raise ValueError("cocycle coordinates must be bits")

    @classmethod
    def zero(cls, surface: SurfaceModel) -> "CocycleZ2":
        return cls((0,) * surface.rank)

    @classmethod
    def from_bits(cls, bits: str, surface: SurfaceModel) -> "CocycleZ2":
        if len(bits) != surface.rank or any(ch not in "01" for ch in bits):
            raise ValueError(
                f"cocycle needs exactly {surface.rank} bits for genus {surface.genus}"
            )
        return cls(tuple(int(ch) for ch in bits))

    def is_zero(self) -> bool:
        return not any(self.values)

    def bits(self) -> str:
        return "".join(str(v) for v in self.values)


def evaluate_cocycle(c: CocycleZ2, w: Word, surface: SurfaceModel) -> int:
    """Pairing <c, [w]> in Z2.  Errors if c does not match the surface rank."""
    if len(c.values) != surface.rank:
        raise ValueError(
            f"cocycle rank {len(c.values)} does not match genus {surface.genus}"
        )
    h = homology_class_z2(w, surface)
    return sum(ci * hi for ci, hi in zip(c.values, h)) % 2


# ---------------------------------------------------------------------------
# Dehn's algorithm (genus >= 2)

@lru_cache(maxsize=None)
def _relator_rotations(genus: int) -> tuple[Word, ...]:
    """All cyclic rotations of the relator and of its inverse."""
    r = SurfaceModel(genus).relator()
    rots = []
    for base in (r, invert_word(r)):
        for k in range(len(base)):
            rots.append(base[k:] + base[:k])
    return tuple(rots)


def _find_long_piece(w: Word, genus: int, min_len: int) -> tuple[int, int, Word] | None:
    """Leftmost factor of w of length > min_len matching a relator-rotation
    prefix; returns (start, length, replacement) with the longest match at the
    leftmost start.  The replacement is the inverse of the rotation's tail."""
    L = 4 * genus
    rots = _relator_rotations(genus)
    n = len(w)
    for start in range(n):
        best = None
        for rot in rots:
            k = 0
            while k < L and start + k < n and w[start + k] == rot[k]:
                k += 1
            if k > min_len and (best is None or k > best[0]):
                best = (k, rot)
        if best is not None:
            k, rot = best
            repl = invert_word(rot[k:])
            return start, k, repl
    return None


def _dehn_shorten(w: Word, genus: int) -> Word:
    """Repeatedly replace factors longer than half the relator; terminates at
    a freely reduced word with no such factor."""
    half = 2 * genus
    w = reduce_word(w)
    while True:
        hit = _find_long_piece(w, genus, half)
        if hit is None:
            return w
        start, k, repl = hit
        w = reduce_word(w[:start] + repl + w[start + k:])


def is_contractible(w: Word, surface: SurfaceModel) -> bool:
    """Whether w represents the identity of pi_1 of the surface."""
    g = surface.genus
    if g == 0:
        return True
    if g == 1:
        ab = [0, 0]
        for x in w:
            ab[abs(x) - 1] += 1 if x > 0 else -1
        return ab == [0, 0]
    return _dehn_shorten(w, g) == ()


# ---------------------------------------------------------------------------
# Free homotopy classes (conjugacy up to inversion)

def _rotations(w: Word) -> list[Word]:
    return [w[k:] + w[:k] for k in range(max(1, len(w)))]


def _cyclic_dehn_reduce(w: Word, genus: int) -> Word:
    """Shorten the cyclic word until no rotation contains more than half a
    relator; the result is a shortest representative of the conjugacy class."""
    half = 2 * genus
    w = cyclic_reduce(w)
    changed = True
    while changed:
        changed = False
        for rot in _rotations(w):
            hit = _find_long_piece(rot, genus, half)
            if hit is not None:
                start, k, repl = hit
                w = cyclic_reduce(rot[:start] + repl + rot[start + k:])
                changed = True
                break
    return w


def _half_relator_closure(w: Word, genus: int) -> set[Word]:
    """All cyclic words reachable from w by exact-half relator substitutions
    at constant length (restarting reduction whenever a word shortens)."""
    half = 2 * genus
    rots_r = _relator_rotations(genus)
    seen: set[Word] = set()
    frontier = [_cyclic_dehn_reduce(w, genus)]
    while frontier:
        u = frontier.pop()
        if u in seen:
            continue
        seen.add(u)
        for rot_u in _rotations(u):
            for rel in rots_r:
                if len(rot_u) < half:
                    continue
                if rot_u[:half] == rel[:half]:
                    repl = invert_word(rel[half:])
                    v = cyclic_reduce(repl + rot_u[half:])
                    v = _cyclic_dehn_reduce(v, genus)
                    if len(v) < len(u):
                        # shortened: restart from the shorter word only
                        return _half_relator_closure(v, genus)
                    if v not in seen:
                        frontier.append(v)
    return seen


@dataclass(frozen=True, order=True)
class HomotopyClass:
    """Canonical representative of a free homotopy class of unoriented loops."""

    genus: int
    word: Word

    @property
    def is_trivial(self) -> bool:
        return not self.word

    def format(self, surface: SurfaceModel | None = None) -> str:
        s = surface or SurfaceModel(self.genus)
        return format_word(self.word, s)

    def __str__(self) -> str:
        return self.format()


def _canonical_cached(w: Word, genus: int) -> Word:
    if genus == 0:
        return ()
    if genus == 1:
        p = sum(1 if x > 0 else -1 for x in w if abs(x) == 1)
        q = sum(1 if x > 0 else -1 for x in w if abs(x) == 2)
        if (p, q) == (0, 0):
            return ()
        if p < 0 or (p == 0 and q < 0):
            p, q = -p, -q
        return tuple([1] * p if p >= 0 else []) + tuple(
            [2] * q if q >= 0 else [-2] * (-q)
        )
    candidates: set[Word] = set()
    for rep in (w, invert_word(w)):
        for u in _half_relator_closure(rep, genus):
            candidates.update(_rotations(u))
    return min(candidates, key=lambda u: (len(u), u))


class _ClassCache:
    def __init__(self):
        self.data: dict[tuple[int, Word], Word] = {}

    def get(self, w: Word, genus: int) -> Word:
        key = (genus, w)
        if key not in self.data:
            self.data[key] = _canonical_cached(w, genus)
        return self.data[key]


_CACHE = _ClassCache()


def canonical_homotopy_class(w: Word, surface: SurfaceModel) -> HomotopyClass:
    """Canonical form of the free homotopy class of the unoriented loop w.

    Conjugate inputs and inverse inputs map to equal outputs; the trivial
    class has the empty canonical word.
    """
    w = cyclic_reduce(w)
    return HomotopyClass(surface.genus, _CACHE.get(w, surface.genus))


# ---------------------------------------------------------------------------
# The free abelian group on nontrivial classes

@dataclass(frozen=True)
class HClassCombination:
    """Finitely supported integer combination of nontrivial homotopy classes.

    The trivial class is the group identity and never appears as a key; zero
    coefficients are dropped.  Instances are canonical and hashable, so they
    double as grading keys.
    """

    terms: tuple[tuple[HomotopyClass, int], ...]

    @classmethod
    def zero(cls) -> "HClassCombination":
        return cls(())

    @classmethod
    def build(cls, pairs: Iterable[tuple[HomotopyClass, int]]) -> "HClassCombination":
        acc: dict[HomotopyClass, int] = {}
        for cls_, coeff in pairs:
            if cls_.is_trivial or coeff == 0:
                continue
            acc[cls_] = acc.get(cls_, 0) + coeff
        terms = tuple(
            (k, v) for k, v in sorted(acc.items(), key=lambda kv: kv[0]) if v != 0
        )
        return cls(terms)

    def __add__(self, other: "HClassCombination") -> "HClassCombination":
        return HClassCombination.build(self.terms + other.terms)

    def __neg__(self) -> "HClassCombination":
        return HClassCombination(tuple((k, -v) for k, v in self.terms))

    def is_zero(self) -> bool:
        return not self.terms

    def format(self, surface: SurfaceModel | None = None) -> str:
        if not self.terms:
            return "0"
        bits = []
        for cls_, coeff in self.terms:
            sign = "+" if coeff > 0 else "-"
            bits.append(f"{sign}{abs(coeff)}[{cls_.format(surface)}]")
        return "".join(bits)

    def __str__(self) -> str:
        return self.format()


def hclass_sum(pairs: Sequence[tuple[HomotopyClass, int]]) -> HClassCombination:
    """Sum coefficients per class, dropping trivial classes and zeros."""
    return HClassCombination.build(pairs)
