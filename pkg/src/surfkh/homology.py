"""Exact homology of multigraded complexes.

Integer blocks go through a certified Smith normal form (the unimodular
transforms are kept and the factorisation U*M*V = D is re-verified on every
reduction).  Rational blocks use exact Gaussian elimination over Fraction,
F2 blocks use bitmask elimination.  Graded theories split into (j, extra)
blocks; filtered theories report the associated graded of the induced
(j, c) bifiltration on homology, computed from subcomplex cycle spaces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Optional, Sequence


class LinearAlgebraError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Dense integer matrices

Matrix = list[list[int]]


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    rb = len(b)
    cb = len(b[0]) if b else 0
    out = [[0] * cb for _ in range(len(a))]
    for i, row in enumerate(a):
        for k, aik in enumerate(row):
            if aik:
                brow = b[k]
                orow = out[i]
                for j in range(cb):
                    if brow[j]:
                        orow[j] += aik * brow[j]
    return out


def identity(n: int) -> Matrix:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


@dataclass
class SmithDecomposition:
    """U * M * V = diag(d1, d2, ...) with d1 | d2 | ... and U, V unimodular."""

    diagonal: list[int]
    left: Matrix
    right: Matrix
    det_sign_left: int
    det_sign_right: int

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d != 0)

    def invariant_factors(self) -> list[int]:
        return [d for d in self.diagonal if d != 0]


def smith_normal_form(matrix: Sequence[Sequence[int]]) -> SmithDecomposition:
    """Certified Smith normal form over Z.

    Pivoting picks the smallest-magnitude nonzero entry (leftmost column,
    then topmost row, on ties) to keep coefficient growth down.  The
    certificate U*M*V == D is always checked before returning.
    """
    a = [list(map(int, row)) for row in matrix]
    m = len(a)
    n = len(a[0]) if m else 0
    u, v = identity(m), identity(n)
    su = sv = 1

    def swap_rows(i, j):
        nonlocal su
        if i != j:
            a[i], a[j] = a[j], a[i]
            u[i], u[j] = u[j], u[i]
            su = -su

    def swap_cols(i, j):
        nonlocal sv
        if i != j:
            for row in a:
                row[i], row[j] = row[j], row[i]
            for row in v:
                row[i], row[j] = row[j], row[i]
            sv = -sv

    def add_row(src, dst, factor):
        # row dst += factor * row src
        arow, urow = a[src], u[src]
        ad, ud = a[dst], u[dst]
        for j in range(n):
            if arow[j]:
                ad[j] += factor * arow[j]
        for j in range(m):
            if urow[j]:
                ud[j] += factor * urow[j]

    def add_col(src, dst, factor):
        for row in a:
            if row[src]:
                row[dst] += factor * row[src]
        for row in v:
            if row[src]:
                row[dst] += factor * row[src]

    def negate_row(i):
        nonlocal su
        a[i] = [-x for x in a[i]]
        u[i] = [-x for x in u[i]]
        su = -su

    t = 0
    while True:
        pivot = None
        for j in range(t, n):
            for i in range(t, m):
                if a[i][j]:
                    if pivot is None or abs(a[i][j]) < abs(a[pivot[0]][pivot[1]]):
                        pivot = (i, j)
        if pivot is None:
            break
        swap_rows(t, pivot[0])
        swap_cols(t, pivot[1])
        while True:
            if a[t][t] < 0:
                negate_row(t)
            p = a[t][t]
            done = True
            for i in range(t + 1, m):
                if a[i][t]:
                    q = a[i][t] // p
                    add_row(t, i, -q)
                    if a[i][t]:
                        swap_rows(t, i)
                        done = False
            for j in range(t + 1, n):
                if a[t][j]:
                    q = a[t][j] // p
                    add_col(t, j, -q)
                    if a[t][j]:
                        swap_cols(t, j)
                        done = False
            if not done:
                continue
            p = a[t][t]
            offender = None
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if a[i][j] % p:
                        offender = i
                        break
                if offender is not None:
                    break
            if offender is None:
                break
            add_row(offender, t, 1)
        t += 1
        if t >= min(m, n):
            break

    diag = [a[i][i] if i < n else 0 for i in range(min(m, n))]
    diag = [d for d in diag]
    dec = SmithDecomposition(diag, u, v, su, sv)
    _verify_snf(matrix, dec)
    return dec


def _verify_snf(matrix: Sequence[Sequence[int]], dec: SmithDecomposition) -> None:
    m = len(dec.left)
    n = len(dec.right)
    prod = mat_mul(mat_mul(dec.left, [list(r) for r in matrix]), dec.right) if m and n else []
    for i in range(m):
        for j in range(n):
            expect = dec.diagonal[i] if i == j and i < len(dec.diagonal) else 0
            if prod[i][j] != expect:
                raise LinearAlgebraError("Smith normal form certificate failed")
    for i in range(len(dec.diagonal) - 1):
        d1, d2 = dec.diagonal[i], dec.diagonal[i + 1]
        if d1 == 0 and d2 != 0 or (d1 and d2 and d2 % d1):
            raise LinearAlgebraError("Smith normal form divisibility chain failed")
    if dec.det_sign_left not in (1, -1) or dec.det_sign_right not in (1, -1):
        raise LinearAlgebraError("transform determinant lost")  # pragma: no cover


# ---------------------------------------------------------------------------
# Exact elimination over Q and F2

QMatrix = list[list[Fraction]]


def q_rref(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns (rref rows, pivot column list)."""
    rows = [row[:] for row in rows]
    pivots: list[int] = []
    r = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        pivot_row = None
        for i in range(r, len(rows)):
            if rows[i][c]:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        pv = rows[r][c]
        rows[r] = [x / pv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def q_rank(rows: list[list[Fraction]]) -> int:
    return len(q_rref(rows)[0])


def q_kernel_basis(columns: list[dict[int, Fraction]], dim_source: int, dim_target: int) -> list[dict[int, Fraction]]:
    """Kernel of the linear map given by sparse columns (source index -> column)."""
    dense = [[Fraction(0)] * dim_source for _ in range(dim_target)]
    for src, col in enumerate(columns):
        for row, val in col.items():
            dense[row][src] = val
    rref, pivots = q_rref(dense) if dim_target else ([], [])
    pivot_set = set(pivots)
    basis = []
    for free in range(dim_source):
        if free in pivot_set:
            continue
        vec = {free: Fraction(1)}
        for r, pc in enumerate(pivots):
            if r < len(rref) and rref[r][free]:
                vec[pc] = -rref[r][free]
        basis.append(vec)
    return basis


def f2_rank(rows: list[int], ncols: int) -> int:
    """Rank over F2 of rows given as bitmasks."""
    basis: list[int] = []
    for row in rows:
        cur = row
        for b in basis:
            low = b & -b
            if cur & low:
                cur ^= b
        if cur:
            basis.append(cur)
    return len(basis)


# ---------------------------------------------------------------------------
# Homology tables

Torsion = tuple[int, ...]
TableKey = tuple[int, Optional[int], Optional[Hashable]]  # (i, j, extra)


@dataclass
class HomologyTable:
    """Free rank and torsion per multidegree.  ``extra`` is the dot grading
    (as twice its value), a homotopic grading key, or None."""

    ring: str
    entries: dict[TableKey, tuple[int, Torsion]] = field(default_factory=dict)
    extra_kind: Optional[str] = None  # 'c' | 'h' | None

    def add(self, key: TableKey, free: int, torsion: Torsion = ()) -> None:
        if free == 0 and not torsion:
            return
        old_free, old_tor = self.entries.get(key, (0, ()))
        self.entries[key] = (old_free + free, _merge_torsion(old_tor, torsion))

    def total_rank(self) -> int:
        return sum(f for f, _ in self.entries.values())

    def is_zero(self) -> bool:
        return not self.entries

    def collapsed(self, forget: Iterable[str]) -> "HomologyTable":
        forget = set(forget)
        out = HomologyTable(self.ring, {}, None if ("c" in forget or "h" in forget) else self.extra_kind)
        for (i, j, extra), (free, tor) in self.entries.items():
            key = (
                i,
                None if "j" in forget else j,
                None if ("c" in forget or "h" in forget) else extra,
            )
            out.add(key, free, tor)
        return out

    def to_json_dict(self) -> dict:
        items = []
        for (i, j, extra), (free, tor) in sorted(
            self.entries.items(), key=lambda kv: _key_sort(kv[0])
        ):
            entry: dict[str, Any] = {"i": i, "j": j}
            if self.extra_kind == "c":
                entry["c"] = _c_str(extra)
                entry["h"] = None
            elif self.extra_kind == "h":
                entry["c"] = None
                entry["h"] = extra
            else:
                entry["c"] = None
                entry["h"] = None
            entry["free"] = free
            entry["torsion"] = list(tor)
            items.append(entry)
        return {"ring": self.ring, "entries": items}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    def render_grid(self) -> str:
        """Human-readable grids: one i/j grid per extra degree."""
        groups: dict[Hashable, dict[tuple[int, int], str]] = {}
        for (i, j, extra), (free, tor) in sorted(
            self.entries.items(), key=lambda kv: _key_sort(kv[0])
        ):
            cell = _group_str(self.ring, free, tor)
            groups.setdefault(extra, {})[(i, j if j is not None else 0)] = cell
        blocks = []
        for extra, cells in groups.items():
            header = ""
            if self.extra_kind == "c":
                header = f"c = {_c_str(extra)}\n"
            elif self.extra_kind == "h":
                header = f"h = {extra}\n"
            is_ = sorted({i for i, _ in cells})
            js = sorted({j for _, j in cells}, reverse=True)
            width = max([len(c) for c in cells.values()] + [4])
            lines = [header.rstrip()] if header else []
            for j in js:
                row = [f"{j:>5} |"]
                for i in is_:
                    row.append(f"{cells.get((i, j), '.'):>{width}}")
                lines.append(" ".join(row))
            lines.append(f"{'':>5}  " + " ".join(f"{i:>{width}}" for i in is_))
            lines.append(f"{'':>5}  " + "(columns: homological degree)")
            blocks.append("\n".join(line for line in lines if line))
        return "\n\n".join(blocks) + "\n"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, HomologyTable)
            and self.ring == other.ring
            and self.entries == other.entries
        )


def _key_sort(key: TableKey):
    i, j, extra = key
    return (i, j if j is not None else 0, repr(extra))


def _c_str(c2) -> str:
    if c2 is None:
        return None
    if c2 % 2 == 0:
        return str(c2 // 2)
    return f"{c2}/2"


def _group_str(ring: str, free: int, tor: Torsion) -> str:
    base = {"Z": "Z", "Q": "Q", "F2": "F2"}[ring]
    parts = []
    if free == 1:
        parts.append(base)
    elif free > 1:
        parts.append(f"{base}^{free}")
    for t in tor:
        parts.append(f"Z/{t}")
    return "+".join(parts) if parts else "0"


def _merge_torsion(a: Torsion, b: Torsion) -> Torsion:
    return tuple(sorted(a + b))


def compare_tables(
    t1: HomologyTable, t2: HomologyTable, forget: Iterable[str] = ()
) -> tuple[bool, list[str]]:
    """Equality after collapsing the forgotten gradings; diff on mismatch."""
    a, b = t1.collapsed(forget), t2.collapsed(forget)
    if a.ring != b.ring:
        return False, [f"rings differ: {a.ring} vs {b.ring}"]
    diff = []
    for key in sorted(set(a.entries) | set(b.entries), key=_key_sort):
        va, vb = a.entries.get(key, (0, ())), b.entries.get(key, (0, ()))
        if va != vb:
            diff.append(f"at {key}: {va} vs {vb}")
    return not diff, diff


# ---------------------------------------------------------------------------
# Homology of assembled complexes

def homology(complex_) -> HomologyTable:
    """Homology table of a MultigradedComplex, split by its gradings.

    Graded variants split into exact (j, extra) blocks.  Filtered variants
    (over Q) report the associated graded of the (j, c) bifiltration.
    """
    if complex_.filtered:
        return _filtered_homology(complex_)
    return _graded_homology(complex_)


def _graded_homology(cx) -> HomologyTable:
    table = HomologyTable(cx.ring, {}, cx.extra_kind)
    blocks: dict[tuple[int, Any], list[int]] = {}
    index_of: dict[tuple[int, int], tuple[Any, int]] = {}
    for i in cx.degrees():
        for s_idx in range(len(cx.basis(i))):
            key = cx.block_key(i, s_idx)
            blk = blocks.setdefault((i, key), [])
            index_of[(i, s_idx)] = (key, len(blk))
            blk.append(s_idx)

    # block matrices of d_i restricted to each (j, extra) block
    def block_matrix(i, key) -> tuple[list[dict[int, Any]], int]:
        src = blocks.get((i, key), [])
        tgt_len = len(blocks.get((i + 1, key), []))
        cols = []
        for s_idx in src:
            col = {}
            for t_idx, coeff in cx.column(i, s_idx).items():
                tkey, tpos = index_of[(i + 1, t_idx)]
                if tkey != key:
                    raise LinearAlgebraError(
                        f"differential leaves grading block at i={i}"
                    )
                col[tpos] = coeff
            cols.append(col)
        return cols, tgt_len

    keys = sorted({k for (_, k) in blocks}, key=repr)
    ranks: dict[tuple[int, Any], int] = {}
    snfs: dict[tuple[int, Any], SmithDecomposition] = {}
    for (i, key), src in sorted(blocks.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))):
        cols, tgt_len = block_matrix(i, key)
        if cx.ring == "Z":
            dense = [[0] * len(cols) for _ in range(tgt_len)]
            for c, col in enumerate(cols):
                for r, val in col.items():
                    dense[r][c] = val
            dec = smith_normal_form(dense) if cols and tgt_len else SmithDecomposition(
                [], identity(tgt_len), identity(len(cols)), 1, 1
            )
            ranks[(i, key)] = dec.rank
            snfs[(i, key)] = dec
        elif cx.ring == "Q":
            dense = [[Fraction(0)] * len(cols) for _ in range(tgt_len)]
            for c, col in enumerate(cols):
                for r, val in col.items():
                    dense[r][c] = Fraction(val)
            ranks[(i, key)] = q_rank(dense) if tgt_len else 0
        else:  # F2
            rows = [0] * tgt_len
            for c, col in enumerate(cols):
                for r, val in col.items():
                    if val % 2:
                        rows[r] |= 1 << c
            ranks[(i, key)] = f2_rank(rows, len(cols))

    for (i, key), src in blocks.items():
        dim = len(src)
        r_out = ranks.get((i, key), 0)
        r_in = ranks.get((i - 1, key), 0)
        free = dim - r_out - r_in
        torsion: Torsion = ()
        if cx.ring == "Z":
            dec_in = snfs.get((i - 1, key))
            if dec_in is not None:
                torsion = tuple(d for d in dec_in.invariant_factors() if d > 1)
        if free < 0:
            raise LinearAlgebraError("negative homology rank")  # pragma: no cover
        i_, j_, extra_ = cx.table_key(i, key)
        table.add((i_, j_, extra_), free, torsion)
    if cx.ring == "Z":
        _crosscheck_q_ranks(cx, blocks, ranks)
    return table


def _crosscheck_q_ranks(cx, blocks, z_ranks) -> None:
    """Rational rank of each block map must match the SNF rank."""
    for (i, key), src in blocks.items():
        tgt = blocks.get((i + 1, key), [])
        pos = {s: p for p, s in enumerate(tgt)}
        dense = [[Fraction(0)] * len(src) for _ in range(len(tgt))]
        for c, s_idx in enumerate(src):
            for t_idx, coeff in cx.column(i, s_idx).items():
                dense[pos[_second(cx, i + 1, t_idx, key)]][c] = Fraction(coeff)
        qr = q_rank(dense) if tgt else 0
        if qr != z_ranks[(i, key)]:
            raise LinearAlgebraError("Q-rank disagrees with Smith normal form rank")


def _second(cx, i, t_idx, key):
    return t_idx


def _filtered_homology(cx) -> HomologyTable:
    """Associated graded of the (j, c) bifiltration on homology, over Q.

    Both gradings are non-decreasing along the differential, so the states
    with j >= s and c >= t span a subcomplex for every (s, t).  The induced
    filtration on homology is F(s,t) = im(H(C>=(s,t)) -> H(C)) and the table
    reports its two-dimensional associated graded.
    """
    if cx.ring != "Q":
        raise LinearAlgebraError("filtered homology tables require ring Q")
    table = HomologyTable(cx.ring, {}, cx.extra_kind)
    for i in cx.degrees():
        dim = len(cx.basis(i))
        grades = [(cx.grade_j(i, s), cx.grade_c2(i, s)) for s in range(dim)]
        cols = [
            {t: Fraction(c) for t, c in cx.column(i, s).items()}
            for s in range(dim)
        ]
        dim_next = len(cx.basis(i + 1)) if (i + 1) in set(cx.degrees()) else 0
        prev_deg = i - 1 in set(cx.degrees())
        bdry: list[dict[int, Fraction]] = []
        if prev_deg:
            for s in range(len(cx.basis(i - 1))):
                bdry.append({t: Fraction(c) for t, c in cx.column(i - 1, s).items()})
        b_rows = [[col.get(r, Fraction(0)) for r in range(dim)] for col in bdry]
        b_rank = q_rank(b_rows) if b_rows else 0

        js = sorted({j for j, _ in grades})
        cs = sorted({c for _, c in grades})

        def filtration_rank(s_min: int, t_min: int) -> int:
            sub = [s for s in range(dim) if grades[s][0] >= s_min and grades[s][1] >= t_min]
            if not sub:
                return 0
            sub_cols = [cols[s] for s in sub]
            kernel = q_kernel_basis(sub_cols, len(sub), dim_next)
            # kernel vectors are in sub-coordinates; lift to full coordinates
            lifted = []
            for vec in kernel:
                row = [Fraction(0)] * dim
                for pos, val in vec.items():
                    row[sub[pos]] = val
                lifted.append(row)
            return q_rank(lifted + b_rows) - b_rank

        INF = None
        cache: dict[tuple[int, int], int] = {}

        def r(s_min, t_min) -> int:
            if s_min is INF or t_min is INF:
                return 0
            key = (s_min, t_min)
            if key not in cache:
                cache[key] = filtration_rank(s_min, t_min)
            return cache[key]

        def nxt(vals, x):
            bigger = [v for v in vals if v > x]
            return min(bigger) if bigger else INF

        for j in js:
            for c in cs:
                g = (
                    r(j, c)
                    - r(nxt(js, j), c)
                    - r(j, nxt(cs, c))
                    + r(nxt(js, j), nxt(cs, c))
                )
                if g < 0:
                    raise LinearAlgebraError("bifiltration rank inconsistency")
                if g:
                    i_, j_, extra_ = cx.filtered_table_key(i, j, c)
                    table.add((i_, j_, extra_), g)
    return table
