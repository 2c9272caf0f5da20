"""Filtered Z/2 complexes over finite base posets and their spectral sequences.

A filtered complex here is the chain complex of a family: generators
carry a base point, a base degree l (the filtration degree) and a fiber
degree j, and the differential splits into components d_n moving bidegree
(l, j) -> (l - n, j + n - 1).  Pages are computed from the classical
cycle/boundary recursion

    Z^r(l,j) = { x in F_l C_(l+j) : d x in F_(l-r) }
    E^r(l,j) = Z^r(l,j) / ( Z^(r-1)(l-1,j+1) + d Z^(r-1)(l+r-1,j-r+2) )

with explicit bitmask bases throughout, so every page differential d^r
is available as an actual matrix, not just a rank.  Stabilisation is
declared once r exceeds the spread of occupied base degrees; past that
point no component of d can move anything.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from gfh.z2 import (
    Echelon,
    GHTable,
    GradedComplex,
    Z2Error,
    Z2Matrix,
    homology,
    indices_from_mask,
)


class SpectralError(ValueError):
    """Malformed filtered complexes or bidegree violations."""


@dataclass(frozen=True)
class FamilyGenerator:
    id: str
    base_point: str
    base_degree: int
    fiber_degree: int

    @property
    def total_degree(self) -> int:
        return self.base_degree + self.fiber_degree


class FilteredComplex:
    """Bigraded complex with differential components d_n, n >= 0."""

    def __init__(self, base, generators, components: Dict[int, Z2Matrix]):
        self.base = base
        self.generators: List[FamilyGenerator] = list(generators)
        n = len(self.generators)
        self.index: Dict[str, int] = {}
        for i, g in enumerate(self.generators):
            if g.id in self.index:
                raise SpectralError(f"duplicate generator id {g.id!r}")
            self.index[g.id] = i
        self.components: Dict[int, Z2Matrix] = {}
        for comp_n, mat in sorted(components.items()):
            comp_n = int(comp_n)
            if comp_n < 0:
                raise SpectralError(f"component index {comp_n} is negative")
            if (mat.n_rows, mat.n_cols) != (n, n):
                raise SpectralError(
                    f"component {comp_n} is {mat.n_rows}x{mat.n_cols}, expected {n}x{n}")
            for r, c in mat.entries:
                src, tgt = self.generators[c], self.generators[r]
                if (tgt.base_degree != src.base_degree - comp_n
                        or tgt.fiber_degree != src.fiber_degree + comp_n - 1):
                    raise SpectralError(
                        f"component {comp_n} entry {src.id!r}->{tgt.id!r} has bidegree "
                        f"({src.base_degree},{src.fiber_degree})->"
                        f"({tgt.base_degree},{tgt.fiber_degree}), expected shift "
                        f"({-comp_n},{comp_n - 1})")
            if mat.entries:
                self.components[comp_n] = mat

    def total_matrix(self) -> Z2Matrix:
        n = len(self.generators)
        entries: set = set()
        for mat in self.components.values():
            entries ^= set(mat.entries)
        return Z2Matrix(n, n, frozenset(entries))

    def total_complex(self) -> GradedComplex:
        gens = [(g.id, g.total_degree) for g in self.generators]
        diff: Dict[str, List[str]] = {}
        for r, c in self.total_matrix().entries:
            diff.setdefault(self.generators[c].id, []).append(self.generators[r].id)
        return GradedComplex(gens, diff)

    def verify(self) -> None:
        """Raise if the total differential does not square to zero."""
        from gfh.z2 import verify_d_squared
        ok, witness = verify_d_squared(self.total_complex())
        if not ok:
            raise SpectralError(f"total differential squares to {witness!r} != 0")

    def bidegrees(self) -> List[Tuple[int, int]]:
        return sorted({(g.base_degree, g.fiber_degree) for g in self.generators})

    def base_degree_spread(self) -> int:
        ls = [g.base_degree for g in self.generators]
        return (max(ls) - min(ls)) if ls else 0

    def to_json(self) -> dict:
        base = self.base.to_json() if hasattr(self.base, "to_json") else self.base
        return {
            "base": base,
            "generators": [
                {"id": g.id, "base_point": g.base_point,
                 "base_degree": g.base_degree, "fiber_degree": g.fiber_degree}
                for g in self.generators
            ],
            "components": {str(n): m.to_json() for n, m in sorted(self.components.items())},
        }

    @staticmethod
    def from_json(obj: dict) -> "FilteredComplex":
        try:
            gens = [FamilyGenerator(e["id"], e["base_point"],
                                    int(e["base_degree"]), int(e["fiber_degree"]))
                    for e in obj["generators"]]
            comps = {int(k): Z2Matrix.from_json(v)
                     for k, v in obj.get("components", {}).items()}
            base = obj.get("base")
        except (KeyError, TypeError, Z2Error) as e:
            raise SpectralError(f"malformed filtered complex JSON: {e}")
        return FilteredComplex(base, gens, comps)


@dataclass
class Page:
    ranks: Dict[Tuple[int, int], int]
    differentials: Dict[Tuple[int, int], Z2Matrix] = field(default_factory=dict)


@dataclass
class SpectralPages:
    pages: Dict[int, Page]
    e_infinity: Dict[Tuple[int, int], int]
    r_stable: int

    def rank(self, r: int, l: int, j: int) -> int:
        r_eff = min(r, max(self.pages))
        return self.pages[r_eff].ranks.get((l, j), 0)

    def to_json(self) -> dict:
        ranks = {}
        for r in sorted(self.pages):
            for (l, j), count in sorted(self.pages[r].ranks.items()):
                ranks[f"{r}/{l}/{j}"] = count
        diffs = {}
        for r in sorted(self.pages):
            for (l, j), mat in sorted(self.pages[r].differentials.items()):
                if not mat.is_zero():
                    diffs[f"{r}/{l}/{j}"] = mat.to_json()
        return {
            "ranks": ranks,
            "differentials": diffs,
            "e_infinity": {f"{l}/{j}": c for (l, j), c in sorted(self.e_infinity.items())},
            "r_stable": self.r_stable,
        }


class _PageEngine:
    def __init__(self, fc: FilteredComplex):
        self.fc = fc
        self.n = len(fc.generators)
        self.l = [g.base_degree for g in fc.generators]
        self.j = [g.fiber_degree for g in fc.generators]
        self.nu = [g.total_degree for g in fc.generators]
        self.d_cols = fc.total_matrix().column_masks()
        self.min_l = min(self.l) if self.l else 0
        self.max_l = max(self.l) if self.l else 0
        self._z_cache: Dict[Tuple[int, int, int], List[int]] = {}

    def apply_d(self, mask: int) -> int:
        acc = 0
        for i in indices_from_mask(mask):
            acc ^= self.d_cols[i]
        return acc

    def z_basis(self, r: int, l: int, j: int) -> List[int]:
        """Basis (global bitmasks) of Z^r(l, j)."""
        if r < 0:
            r = 0
        if l < self.min_l:
            return []
        # F_l saturates above max_l: (l, j) with l > max_l is the same space
        # as (max_l, j + l - max_l), and the cycle condition dx in F_(l-r)
        # keeps the absolute cutoff l - r.  r beyond the spread saturates.
        l_eff = min(l, self.max_l)
        r_shifted = max(r - (l - l_eff), 0)
        key = (min(r_shifted, l_eff - self.min_l + 1), l_eff, j + (l - l_eff))
        r_eff, l_eff, j_eff = key
        cached = self._z_cache.get(key)
        if cached is not None:
            return cached
        nu = l_eff + j_eff
        dom = [i for i in range(self.n) if self.nu[i] == nu and self.l[i] <= l_eff]
        forbidden = 0
        cutoff = l_eff - r_eff
        for i in range(self.n):
            if self.nu[i] == nu - 1 and self.l[i] > cutoff:
                forbidden |= 1 << i
        ech = Echelon(track=True)
        combos = []
        for g in dom:
            if not ech.insert(self.d_cols[g] & forbidden):
                combos.append(ech._last_combo)
        basis = []
        for combo in combos:
            mask = 0
            for t in indices_from_mask(combo):
                mask |= 1 << dom[t]
            basis.append(mask)
        self._z_cache[key] = basis
        return basis

    def boundary_basis(self, r: int, l: int, j: int) -> List[int]:
        """Spanning set of B^r(l, j) (not reduced)."""
        out = list(self.z_basis(r - 1, l - 1, j + 1))
        for z in self.z_basis(r - 1, l + r - 1, j - r + 2):
            w = self.apply_d(z)
            if w:
                out.append(w)
        return out

    def page_data(self, r: int, l: int, j: int):
        """Representatives of E^r(l,j) plus a tracked echelon over B then Z.

        Returns (reps, echelon, rep_of_inserted) where rep_of_inserted maps
        an inserted-vector index (as used in Echelon.coefficients masks) to
        the representative column it names.  Inserted B vectors and dependent
        Z vectors have no image there; dependent vectors never show up in
        coefficient masks because sweeps only use stored vectors.
        """
        z = self.z_basis(r, l, j)
        b = self.boundary_basis(r, l, j)
        ech = Echelon(track=True)
        for v in b:
            ech.insert(v)
        reps = []
        rep_of_inserted: Dict[int, int] = {}
        for v in z:
            pos = ech.n_inserted
            if ech.insert(v):
                rep_of_inserted[pos] = len(reps)
                reps.append(v)
        return reps, ech, rep_of_inserted


def pages(fc: FilteredComplex, r_max: Optional[int] = None) -> SpectralPages:
    """All pages with explicit page differentials, plus the stable page.

    Validates bidegrees (at construction) and d*d = 0 before computing.
    """
    fc.verify()
    engine = _PageEngine(fc)
    spread = fc.base_degree_spread()
    r_stable = spread + 1
    r_top = max(r_max if r_max is not None else r_stable, r_stable)

    occupied = fc.bidegrees()
    out_pages: Dict[int, Page] = {}
    reps_cache: Dict[Tuple[int, int, int], tuple] = {}

    def data(r, l, j):
        key = (r, l, j)
        if key not in reps_cache:
            reps_cache[key] = engine.page_data(r, l, j)
        return reps_cache[key]

    for r in range(0, r_top + 1):
        ranks: Dict[Tuple[int, int], int] = {}
        diffs: Dict[Tuple[int, int], Z2Matrix] = {}
        for (l, j) in occupied:
            reps, _, _ = data(r, l, j)
            if reps:
                ranks[(l, j)] = len(reps)
        for (l, j), count in ranks.items():
            tgt = (l - r, j + r - 1) if r > 0 else (l, j - 1)
            reps_src, _, _ = data(r, l, j)
            reps_tgt, ech_tgt, rep_of = data(r, *tgt)
            entries = []
            for col, v in enumerate(reps_src):
                w = engine.apply_d(v)
                coeffs = ech_tgt.coefficients(w)
                if coeffs is None:
                    raise SpectralError(
                        f"page {r} differential leaves the page at bidegree {(l, j)}")
                for t in indices_from_mask(coeffs):
                    if t in rep_of:
                        entries.append((rep_of[t], col))
            diffs[(l, j)] = Z2Matrix.from_entries(len(reps_tgt), count, entries)
        out_pages[r] = Page(ranks=ranks, differentials=diffs)

    e_inf = dict(out_pages[r_stable].ranks)
    if r_max is not None and r_max < r_top:
        out_pages = {r: p for r, p in out_pages.items() if r <= max(r_max, r_stable)}
    return SpectralPages(pages=out_pages, e_infinity=e_inf, r_stable=r_stable)


def total_homology(fc: FilteredComplex) -> GHTable:
    """Homology of the totalisation, graded by total degree l + j."""
    return homology(fc.total_complex())


def convergence_check(p: SpectralPages, t: GHTable) -> Tuple[bool, Optional[int]]:
    """Does the stable page sum to the total homology in every degree?

    Returns (True, None) or (False, first failing total degree).
    """
    sums: Dict[int, int] = {}
    for (l, j), count in p.e_infinity.items():
        sums[l + j] = sums.get(l + j, 0) + count
    for nu in sorted(set(sums) | set(t.degrees())):
        if sums.get(nu, 0) != t.rank(nu):
            return False, nu
    return True, None


def collapse_check(p: SpectralPages) -> bool:
    """True iff nothing changes after the second page."""
    if 2 not in p.pages:
        return True
    base = p.pages[2].ranks
    for r in sorted(p.pages):
        if r < 2:
            continue
        if p.pages[r].ranks != base:
            return False
    return p.e_infinity == base
