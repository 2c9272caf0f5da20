"""Sparse linear algebra over Z/2 and graded chain complexes.

Vectors over Z/2 are held as Python integers used as bitmasks (bit i set
means coordinate i is 1), so addition is ^ and scalar work disappears.
Matrices are sparse sets of (row, col) positions.  Elimination is
column-major with the lowest set row as pivot, which makes every routine
deterministic: the same input always yields the same bases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple


class Z2Error(ValueError):
    """Raised for malformed matrices, complexes, or inconsistent data."""


# ---------------------------------------------------------------------------
# bitmask helpers


def mask_from_indices(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def indices_from_mask(mask: int) -> Tuple[int, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


def _lowest_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


class Echelon:
    """Incremental echelon basis of bitmask vectors, pivot = lowest set bit.

    Optionally tracks, for every stored vector, which of the inserted
    vectors combine to it, so membership queries can return coefficients.
    """

    def __init__(self, track: bool = False):
        self.pivots: Dict[int, int] = {}  # pivot bit -> index into vecs
        self.vecs: List[int] = []
        self.combos: List[int] = [] if track else None  # type: ignore[assignment]
        self._track = track
        self.n_inserted = 0

    @property
    def dim(self) -> int:
        return len(self.vecs)

    def _sweep(self, v: int, c: int) -> Tuple[int, int]:
        while v:
            p = _lowest_bit(v)
            k = self.pivots.get(p)
            if k is None:
                break
            v ^= self.vecs[k]
            if self._track:
                c ^= self.combos[k]
        return v, c

    def insert(self, v: int) -> bool:
        """Add a vector; returns True if it enlarged the span."""
        c = 1 << self.n_inserted if self._track else 0
        self.n_inserted += 1
        v, c = self._sweep(v, c)
        if v == 0:
            self._last_combo = c
            return False
        self.pivots[_lowest_bit(v)] = len(self.vecs)
        self.vecs.append(v)
        if self._track:
            self.combos.append(c)
        self._last_combo = c
        return True

    def residual(self, v: int) -> int:
        r, _ = self._sweep(v, 0)
        return r

    def contains(self, v: int) -> bool:
        return self.residual(v) == 0

    def coefficients(self, v: int) -> Optional[int]:
        """Mask over inserted vectors expressing v, or None if v not in span."""
        if not self._track:
            raise Z2Error("echelon built without coefficient tracking")
        r, c = self._sweep(v, 0)
        return c if r == 0 else None


# ---------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class Z2Matrix:
    """Sparse matrix over Z/2: a set of (row, col) positions equal to 1."""

    n_rows: int
    n_cols: int
    entries: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n_rows < 0 or self.n_cols < 0:
            raise Z2Error("matrix dimensions must be non-negative")
        for r, c in self.entries:
            if not (0 <= r < self.n_rows and 0 <= c < self.n_cols):
                raise Z2Error(f"entry ({r},{c}) outside {self.n_rows}x{self.n_cols}")

    @staticmethod
    def from_entries(n_rows: int, n_cols: int, entries: Iterable[Tuple[int, int]]) -> "Z2Matrix":
        return Z2Matrix(n_rows, n_cols, frozenset((int(r), int(c)) for r, c in entries))

    @staticmethod
    def from_dense(rows: Sequence[Sequence[int]]) -> "Z2Matrix":
        n_rows = len(rows)
        n_cols = len(rows[0]) if n_rows else 0
        ent = set()
        for i, row in enumerate(rows):
            if len(row) != n_cols:
                raise Z2Error("ragged dense matrix")
            for j, v in enumerate(row):
                if int(v) % 2:
                    ent.add((i, j))
        return Z2Matrix(n_rows, n_cols, frozenset(ent))

    @staticmethod
    def identity(n: int) -> "Z2Matrix":
        return Z2Matrix(n, n, frozenset((i, i) for i in range(n)))

    @staticmethod
    def zeros(n_rows: int, n_cols: int) -> "Z2Matrix":
        return Z2Matrix(n_rows, n_cols, frozenset())

    def to_dense(self) -> List[List[int]]:
        out = [[0] * self.n_cols for _ in range(self.n_rows)]
        for r, c in self.entries:
            out[r][c] = 1
        return out

    def column_masks(self) -> List[int]:
        cols = [0] * self.n_cols
        for r, c in self.entries:
            cols[c] ^= 1 << r
        return cols

    @staticmethod
    def from_column_masks(n_rows: int, masks: Sequence[int]) -> "Z2Matrix":
        ent = set()
        for c, m in enumerate(masks):
            for r in indices_from_mask(m):
                ent.add((r, c))
        return Z2Matrix(n_rows, len(masks), frozenset(ent))

    def transpose(self) -> "Z2Matrix":
        return Z2Matrix(self.n_cols, self.n_rows, frozenset((c, r) for r, c in self.entries))

    def __add__(self, other: "Z2Matrix") -> "Z2Matrix":
        if (self.n_rows, self.n_cols) != (other.n_rows, other.n_cols):
            raise Z2Error("shape mismatch in addition")
        return Z2Matrix(self.n_rows, self.n_cols, self.entries ^ other.entries)

    def __matmul__(self, other: "Z2Matrix") -> "Z2Matrix":
        if self.n_cols != other.n_rows:
            raise Z2Error("shape mismatch in product")
        mine = self.column_masks()
        out = []
        for m in other.column_masks():
            acc = 0
            for r in indices_from_mask(m):
                acc ^= mine[r]
            out.append(acc)
        return Z2Matrix.from_column_masks(self.n_rows, out)

    def apply(self, v: int) -> int:
        """Matrix times a column bitmask."""
        cols = self.column_masks()
        acc = 0
        for i in indices_from_mask(v):
            if i >= self.n_cols:
                raise Z2Error("vector outside matrix domain")
            acc ^= cols[i]
        return acc

    def is_zero(self) -> bool:
        return not self.entries

    def to_json(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "entries": sorted([r, c] for r, c in self.entries),
        }

    @staticmethod
    def from_json(obj: dict) -> "Z2Matrix":
        try:
            return Z2Matrix.from_entries(obj["n_rows"], obj["n_cols"], obj["entries"])
        except (KeyError, TypeError) as e:
            raise Z2Error(f"malformed matrix JSON: {e}")


@dataclass(frozen=True)
class ReduceResult:
    rank: int
    kernel_basis: Tuple[Tuple[int, ...], ...]
    image_basis: Tuple[Tuple[int, ...], ...]


def reduce(m: Z2Matrix) -> ReduceResult:
    """Column elimination; returns rank with kernel and image bases.

    Vectors are sorted tuples of support indices (kernel over columns,
    image over rows).  rank + len(kernel_basis) == n_cols always holds.
    """
    cols = m.column_masks()
    ech = Echelon(track=True)
    kernel = []
    image = []
    for j, col in enumerate(cols):
        if ech.insert(col):
            image.append(ech.vecs[-1])
        else:
            kernel.append(ech._last_combo)
    rank = ech.dim
    return ReduceResult(
        rank=rank,
        kernel_basis=tuple(indices_from_mask(k) for k in kernel),
        image_basis=tuple(indices_from_mask(v) for v in image),
    )


def rank(m: Z2Matrix) -> int:
    ech = Echelon()
    for col in m.column_masks():
        ech.insert(col)
    return ech.dim


def solve(m: Z2Matrix, rhs: Iterable[int]) -> Optional[Tuple[int, ...]]:
    """One solution x of m @ x = rhs (rhs a row-index iterable), or None."""
    ech = Echelon(track=True)
    for col in m.column_masks():
        ech.insert(col)
    coeff = ech.coefficients(mask_from_indices(rhs))
    if coeff is None:
        return None
    return indices_from_mask(coeff)


def is_invertible(m: Z2Matrix) -> bool:
    return m.n_rows == m.n_cols and rank(m) == m.n_rows


# ---------------------------------------------------------------------------
# graded complexes


class GHTable:
    """Ranks by integer degree; absent degrees are zero."""

    def __init__(self, ranks: Optional[Dict[int, int]] = None):
        self._ranks: Dict[int, int] = {}
        if ranks:
            for d, r in ranks.items():
                d, r = int(d), int(r)
                if r < 0:
                    raise Z2Error("negative rank")
                if r:
                    self._ranks[d] = r

    def rank(self, degree: int) -> int:
        return self._ranks.get(degree, 0)

    __getitem__ = rank

    def degrees(self) -> List[int]:
        return sorted(self._ranks)

    def as_dict(self) -> Dict[int, int]:
        return {d: self._ranks[d] for d in self.degrees()}

    def total_rank(self) -> int:
        return sum(self._ranks.values())

    def shift(self, s: int) -> "GHTable":
        return GHTable({d + s: r for d, r in self._ranks.items()})

    def __add__(self, other: "GHTable") -> "GHTable":
        out = dict(self._ranks)
        for d, r in other._ranks.items():
            out[d] = out.get(d, 0) + r
        return GHTable(out)

    def __eq__(self, other) -> bool:
        return isinstance(other, GHTable) and self._ranks == other._ranks

    def __bool__(self) -> bool:
        return bool(self._ranks)

    def __repr__(self) -> str:
        return f"GHTable({self.as_dict()})"

    def to_json(self) -> Dict[str, int]:
        return {str(d): self._ranks[d] for d in self.degrees()}

    @staticmethod
    def from_json(obj: Dict[str, int]) -> "GHTable":
        return GHTable({int(k): int(v) for k, v in obj.items()})


class GradedComplex:
    """Chain complex over Z/2 with string generator ids and integer degrees.

    The differential maps each generator to a set of ids sitting exactly
    one degree lower; that drop is enforced here, d*d = 0 is checked by
    verify_d_squared / homology so a broken complex can still be inspected.
    """

    def __init__(self, generators: Sequence[Tuple[str, int]],
                 differential: Optional[Dict[str, Iterable[str]]] = None):
        self.generators: List[Tuple[str, int]] = [(str(g), int(d)) for g, d in generators]
        self.index: Dict[str, int] = {}
        self.degree: Dict[str, int] = {}
        for i, (g, d) in enumerate(self.generators):
            if g in self.index:
                raise Z2Error(f"duplicate generator id {g!r}")
            self.index[g] = i
            self.degree[g] = d
        diff: Dict[str, frozenset] = {}
        for src, targets in (differential or {}).items():
            if src not in self.index:
                raise Z2Error(f"differential source {src!r} not a generator")
            tset = frozenset(str(t) for t in targets)
            for t in tset:
                if t not in self.index:
                    raise Z2Error(f"differential target {t!r} not a generator")
                if self.degree[t] != self.degree[src] - 1:
                    raise Z2Error(
                        f"differential {src!r}->{t!r} drops degree "
                        f"{self.degree[src]}->{self.degree[t]}, expected drop of 1")
            if tset:
                diff[src] = tset
        self.differential: Dict[str, frozenset] = diff

    def degrees(self) -> List[int]:
        return sorted({d for _, d in self.generators})

    def generators_of_degree(self, k: int) -> List[str]:
        return [g for g, d in self.generators if d == k]

    def boundary_matrix(self, k: int) -> Z2Matrix:
        """d_k as a matrix from degree-k generators to degree-(k-1) generators."""
        src = self.generators_of_degree(k)
        dst = self.generators_of_degree(k - 1)
        dst_index = {g: i for i, g in enumerate(dst)}
        ent = set()
        for j, g in enumerate(src):
            for t in self.differential.get(g, ()):
                ent.add((dst_index[t], j))
        return Z2Matrix(len(dst), len(src), frozenset(ent))

    def direct_sum(self, other: "GradedComplex", tag_self: str = "", tag_other: str = "'") -> "GradedComplex":
        gens = [(g + tag_self, d) for g, d in self.generators]
        gens += [(g + tag_other, d) for g, d in other.generators]
        diff: Dict[str, List[str]] = {}
        for s, ts in self.differential.items():
            diff[s + tag_self] = [t + tag_self for t in ts]
        for s, ts in other.differential.items():
            diff[s + tag_other] = [t + tag_other for t in ts]
        return GradedComplex(gens, diff)

    def to_json(self) -> dict:
        order = {g: i for i, (g, _) in enumerate(self.generators)}
        return {
            "generators": [{"id": g, "degree": d} for g, d in self.generators],
            "differential": {
                g: sorted(self.differential[g], key=order.__getitem__)
                for g, _ in self.generators if g in self.differential
            },
        }

    @staticmethod
    def from_json(obj: dict) -> "GradedComplex":
        try:
            gens = [(e["id"], e["degree"]) for e in obj["generators"]]
            diff = obj.get("differential", {})
        except (KeyError, TypeError) as e:
            raise Z2Error(f"malformed complex JSON: {e}")
        return GradedComplex(gens, diff)


def verify_d_squared(c: GradedComplex) -> Tuple[bool, Optional[str]]:
    """Check d*d = 0; on failure returns the first violating generator."""
    for g, _ in c.generators:
        acc: set = set()
        for t in c.differential.get(g, ()):
            acc ^= c.differential.get(t, frozenset())
        if acc:
            return False, g
    return True, None


def homology(c: GradedComplex) -> GHTable:
    """Z/2 homology ranks by degree.  Rejects complexes with d*d != 0."""
    ok, witness = verify_d_squared(c)
    if not ok:
        raise Z2Error(f"d squared is nonzero on generator {witness!r}")
    out: Dict[int, int] = {}
    for k in c.degrees():
        n_k = len(c.generators_of_degree(k))
        r_k = rank(c.boundary_matrix(k))
        r_k1 = rank(c.boundary_matrix(k + 1))
        out[k] = n_k - r_k - r_k1
    return GHTable(out)
