"""Family complexes over spheres and intervals, and their monodromy maps.

A family complex couples a base (a sphere S^m with critical points a, b,
an interval with critical points -1, 0, 1, or an interval times a sphere)
to a fiber chain complex.  The interesting content is the d_m component:
for S^1 families it encodes the monodromy mu via d_1(a, x) = (b, x + mu x),
for S^m families a chain map theta of fiber degree m - 1.  From it we
extract psi, the induced map on fiber homology; a non-identity (m = 1) or
nonzero (m >= 2) psi certifies that the loop or sphere of Legendrians the
family came from is not contractible.

Generator ids follow the convention "<base point>|<fiber id>", e.g.
"a|beta_L" or "0,b|x3".  Spun families double every fiber id to "x[-]"
and "x[+]".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from gfh.spectral import FamilyGenerator, FilteredComplex
from gfh.z2 import (
    Echelon,
    GHTable,
    GradedComplex,
    Z2Matrix,
    homology,
    indices_from_mask,
    is_invertible,
    mask_from_indices,
    reduce,
    verify_d_squared,
)


class FamilyError(ValueError):
    """Inadmissible family data: bad bases, non-chain maps, rule violations."""


# ---------------------------------------------------------------------------
# base descriptors


@dataclass(frozen=True)
class BaseDescriptor:
    """Shape of the base: sphere(m), interval, or interval times sphere(m)."""

    kind: str
    m: int = 0

    KINDS = ("sphere", "interval", "interval_product")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise FamilyError(f"unknown base kind {self.kind!r}")
        if self.kind in ("sphere", "interval_product") and self.m < 1:
            raise FamilyError("sphere dimension m >= 1 required")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind != "interval":
            out["m"] = self.m
        return out

    @staticmethod
    def coerce(obj) -> "BaseDescriptor":
        if isinstance(obj, BaseDescriptor):
            return obj
        if isinstance(obj, dict) and "kind" in obj:
            return BaseDescriptor(obj["kind"], int(obj.get("m", 0)))
        raise FamilyError(f"not a base descriptor: {obj!r}")


# ---------------------------------------------------------------------------
# chain maps and monodromies as per-degree blocks


def _degree_lists(c: GradedComplex) -> Dict[int, List[str]]:
    return {j: c.generators_of_degree(j) for j in c.degrees()}


@dataclass
class ChainMap:
    """Map of complexes raising fiber degree by `shift`, one block per degree.

    blocks[j] sends the degree-j generators of the source (column order =
    listed order) to the degree-(j + shift) generators of the target.
    Missing blocks are zero.
    """

    shift: int
    blocks: Dict[int, Z2Matrix] = field(default_factory=dict)

    def block(self, j: int, n_rows: int, n_cols: int) -> Z2Matrix:
        b = self.blocks.get(j)
        if b is None:
            return Z2Matrix.zeros(n_rows, n_cols)
        if (b.n_rows, b.n_cols) != (n_rows, n_cols):
            raise FamilyError(
                f"block at degree {j} is {b.n_rows}x{b.n_cols}, expected {n_rows}x{n_cols}")
        return b

    def validate(self, src: GradedComplex, tgt: Optional[GradedComplex] = None) -> None:
        """Check shapes and commutation with the differentials; witness on failure."""
        tgt = tgt if tgt is not None else src
        n_src = {j: len(g) for j, g in _degree_lists(src).items()}
        n_tgt = {j: len(g) for j, g in _degree_lists(tgt).items()}
        for j in self.blocks:
            self.block(j, n_tgt.get(j + self.shift, 0), n_src.get(j, 0))
        degrees = sorted(set(n_src) | {j for j in self.blocks})
        for j in degrees:
            d_src = src.boundary_matrix(j)
            d_tgt = tgt.boundary_matrix(j + self.shift)
            m_j = self.block(j, n_tgt.get(j + self.shift, 0), n_src.get(j, 0))
            m_jm1 = self.block(j - 1, n_tgt.get(j - 1 + self.shift, 0),
                               n_src.get(j - 1, 0))
            if (d_tgt @ m_j) + (m_jm1 @ d_src) != Z2Matrix.zeros(d_tgt.n_rows, d_src.n_cols):
                raise FamilyError(f"not a chain map: commutation fails at degree {j}")

    def __add__(self, other: "ChainMap") -> "ChainMap":
        if self.shift != other.shift:
            raise FamilyError("cannot add chain maps of different shifts")
        out: Dict[int, Z2Matrix] = dict(self.blocks)
        for j, b in other.blocks.items():
            out[j] = (out[j] + b) if j in out else b
        return ChainMap(self.shift, {j: b for j, b in out.items() if not b.is_zero()})


@dataclass
class MonodromyData:
    """Degree-0 chain automorphism: invertible matrix per fiber degree."""

    degrees: Dict[int, Z2Matrix] = field(default_factory=dict)

    def validate(self, fiber: GradedComplex) -> None:
        counts = {j: len(g) for j, g in _degree_lists(fiber).items()}
        for j, n in counts.items():
            if n == 0:
                continue
            blk = self.degrees.get(j)
            if blk is None:
                raise FamilyError(f"monodromy block missing at degree {j}")
            if (blk.n_rows, blk.n_cols) != (n, n):
                raise FamilyError(
                    f"monodromy block at degree {j} is {blk.n_rows}x{blk.n_cols}, "
                    f"expected {n}x{n}")
            if not is_invertible(blk):
                raise FamilyError(f"monodromy block at degree {j} is not invertible")
        ChainMap(0, dict(self.degrees)).validate(fiber)

    def as_chain_map(self) -> ChainMap:
        return ChainMap(0, dict(self.degrees))

    def power(self, k: int) -> "MonodromyData":
        out = {}
        for j, blk in self.degrees.items():
            acc = Z2Matrix.identity(blk.n_rows)
            for _ in range(k):
                acc = blk @ acc
            out[j] = acc
        return MonodromyData(out)

    def to_json(self) -> dict:
        return {"degrees": {str(j): self.degrees[j].to_dense()
                            for j in sorted(self.degrees)}}

    @staticmethod
    def from_json(obj: dict) -> "MonodromyData":
        try:
            return MonodromyData({int(j): Z2Matrix.from_dense(mat)
                                  for j, mat in obj["degrees"].items()})
        except (KeyError, TypeError) as e:
            raise FamilyError(f"malformed monodromy JSON: {e}")


# ---------------------------------------------------------------------------
# homology bases with coordinates, for induced maps


class HomologyBasis:
    """Deterministic cycle representatives per degree, with class coordinates."""

    def __init__(self, c: GradedComplex):
        self.complex = c
        self.reps: Dict[int, List[int]] = {}
        self.labels: Dict[int, Tuple[str, ...]] = {}
        self._ech: Dict[int, Echelon] = {}
        self._rep_of: Dict[int, Dict[int, int]] = {}
        for j in c.degrees():
            gens_j = c.generators_of_degree(j)
            ech = Echelon(track=True)
            for col in c.boundary_matrix(j + 1).column_masks():
                ech.insert(col)
            reps: List[int] = []
            rep_of: Dict[int, int] = {}
            for ker in reduce(c.boundary_matrix(j)).kernel_basis:
                mask = mask_from_indices(ker)
                pos = ech.n_inserted
                if ech.insert(mask):
                    rep_of[pos] = len(reps)
                    reps.append(mask)
            self.reps[j] = reps
            self.labels[j] = tuple(
                "+".join(gens_j[i] for i in indices_from_mask(m)) for m in reps)
            self._ech[j] = ech
            self._rep_of[j] = rep_of

    def table(self) -> GHTable:
        return GHTable({j: len(r) for j, r in self.reps.items()})

    def class_coords(self, j: int, mask: int) -> Optional[int]:
        """Coordinates of a degree-j cycle in the chosen basis, or None."""
        if j not in self._ech:
            return 0 if mask == 0 else None
        coeffs = self._ech[j].coefficients(mask)
        if coeffs is None:
            return None
        out = 0
        for t in indices_from_mask(coeffs):
            pos = self._rep_of[j].get(t)
            if pos is not None:
                out |= 1 << pos
        return out

    def induced(self, cm: ChainMap) -> Dict[int, Z2Matrix]:
        """Matrix of the induced homology map per source degree."""
        counts = {j: len(g) for j, g in _degree_lists(self.complex).items()}
        out: Dict[int, Z2Matrix] = {}
        for j, reps in self.reps.items():
            if not reps:
                continue
            tgt = j + cm.shift
            n_tgt_reps = len(self.reps.get(tgt, []))
            blk = cm.block(j, counts.get(tgt, 0), counts.get(j, 0))
            entries = []
            for col, r_mask in enumerate(reps):
                w = blk.apply(r_mask)
                coords = self.class_coords(tgt, w)
                if coords is None:
                    raise FamilyError(
                        f"chain map image of a degree-{j} cycle is not a cycle")
                for row in indices_from_mask(coords):
                    entries.append((row, col))
            out[j] = Z2Matrix.from_entries(n_tgt_reps, len(reps), entries)
        return out


# ---------------------------------------------------------------------------
# sphere families


def _column_entries(fiber: GradedComplex, of: Dict[str, int]) -> set:
    ent = set()
    for src, tgts in fiber.differential.items():
        for t in tgts:
            ent.add((of[t], of[src]))
    return ent


def sphere_family(fiber: GradedComplex, m: int, data) -> FilteredComplex:
    """Family complex over S^m with fiber critical data `fiber`.

    For m = 1, `data` is a MonodromyData mu and d_1(a, x) = (b, x + mu x);
    for m >= 2, `data` is a ChainMap theta of shift m - 1 and
    d_m(a, x) = (b, theta x).  The minimum column (b, x) receives nothing.
    """
    if m < 1:
        raise FamilyError("sphere dimension m >= 1 required")
    lists = _degree_lists(fiber)
    counts = {j: len(g) for j, g in lists.items()}
    if m == 1:
        if not isinstance(data, MonodromyData):
            raise FamilyError("m = 1 family needs MonodromyData")
        data.validate(fiber)
        theta = {j: data.degrees[j] + Z2Matrix.identity(counts[j])
                 for j in counts if counts[j]}
    else:
        if not isinstance(data, ChainMap):
            raise FamilyError("m >= 2 family needs a ChainMap")
        if data.shift != m - 1:
            raise FamilyError(f"theta must shift degree by m-1 = {m - 1}, got {data.shift}")
        data.validate(fiber)
        theta = {j: data.block(j, counts.get(j + m - 1, 0), counts[j])
                 for j in counts if counts[j]}

    gens = [FamilyGenerator(f"a|{g}", "a", m, d) for g, d in fiber.generators]
    gens += [FamilyGenerator(f"b|{g}", "b", 0, d) for g, d in fiber.generators]
    n = len(gens)
    k = len(fiber.generators)
    a_of = {g: i for i, (g, _) in enumerate(fiber.generators)}
    b_of = {g: k + i for i, (g, _) in enumerate(fiber.generators)}

    ent0 = _column_entries(fiber, a_of) | _column_entries(fiber, b_of)
    ent_m = set()
    for j, blk in theta.items():
        src_ids = lists[j]
        tgt_ids = lists.get(j + m - 1, [])
        for r, c in blk.entries:
            ent_m.add((b_of[tgt_ids[r]], a_of[src_ids[c]]))

    comps = {0: Z2Matrix(n, n, frozenset(ent0)), m: Z2Matrix(n, n, frozenset(ent_m))}
    fc = FilteredComplex(BaseDescriptor("sphere", m), gens, comps)
    fc.verify()
    return fc


@dataclass
class _ParsedSphere:
    fiber: GradedComplex
    m: int
    theta: ChainMap


def _parse_sphere(fc: FilteredComplex) -> _ParsedSphere:
    base = BaseDescriptor.coerce(fc.base)
    if base.kind != "sphere":
        raise FamilyError(f"expected a sphere family, base kind is {base.kind!r}")
    m = base.m
    a_gens = [g for g in fc.generators if g.base_point == "a"]
    b_gens = [g for g in fc.generators if g.base_point == "b"]
    if len(a_gens) + len(b_gens) != len(fc.generators):
        raise FamilyError("sphere base admits only critical points 'a' and 'b'")

    def suffix(g: FamilyGenerator) -> str:
        head = g.base_point + "|"
        if not g.id.startswith(head):
            raise FamilyError(f"generator id {g.id!r} does not follow '<base>|<fiber>'")
        return g.id[len(head):]

    b_ids = [suffix(g) for g in b_gens]
    a_by_id = {suffix(g): g for g in a_gens}
    if sorted(b_ids) != sorted(a_by_id):
        raise FamilyError("columns over a and b carry different fiber generators")
    for g in b_gens:
        if g.base_degree != 0:
            raise FamilyError(f"minimum column generator {g.id!r} has base degree "
                              f"{g.base_degree}, expected 0")
        ga = a_by_id[suffix(g)]
        if ga.base_degree != m:
            raise FamilyError(f"maximum column generator {ga.id!r} has base degree "
                              f"{ga.base_degree}, expected {m}")
        if ga.fiber_degree != g.fiber_degree:
            raise FamilyError(f"fiber degrees of {ga.id!r} and {g.id!r} differ")

    for comp_n in fc.components:
        if comp_n not in (0, m):
            raise FamilyError(f"sphere family admits only d_0 and d_{m}, found d_{comp_n}")

    b_index = {sid: i for i, sid in enumerate(b_ids)}
    idx_of_global = {fc.index[f"b|{sid}"]: sid for sid in b_ids}
    a_global = {fc.index[f"a|{sid}"]: sid for sid in b_ids}

    diff_b: Dict[str, List[str]] = {}
    diff_a = set()
    for r, c in fc.components.get(0, Z2Matrix.zeros(0, 0)).entries:
        if c in idx_of_global:
            diff_b.setdefault(idx_of_global[c], []).append(idx_of_global[r])
        else:
            diff_a.add((a_global[r], a_global[c]))
    mirror = {(t, s) for s, ts in diff_b.items() for t in ts}
    if diff_a != mirror:
        raise FamilyError("fiber differentials over a and b differ")

    fiber = GradedComplex([(sid, g.fiber_degree) for sid, g in
                           ((suffix(g), g) for g in b_gens)], diff_b)
    lists = _degree_lists(fiber)
    theta_entries: Dict[int, set] = {}
    dm = fc.components.get(m)
    if dm is not None:
        local = {sid: (j, lists[j].index(sid))
                 for j, ids in lists.items() for sid in ids}
        for r, c in dm.entries:
            src = a_global[c]
            tgt = idx_of_global[r]
            j = local[src][0]
            theta_entries.setdefault(j, set()).add((local[tgt][1], local[src][1]))
    theta_blocks = {}
    for j, ids in lists.items():
        ent = theta_entries.get(j, set())
        theta_blocks[j] = Z2Matrix(len(lists.get(j + m - 1, [])), len(ids), frozenset(ent))
    return _ParsedSphere(fiber, m, ChainMap(m - 1, theta_blocks))


# ---------------------------------------------------------------------------
# psi and certificates


@dataclass
class PsiMap:
    """The monodromy morphism: matrices per GH degree with labeled bases.

    degree_shift = 1 - m is a bookkeeping label: the block at degree j
    maps GH_j to GH_(j - degree_shift) = GH_(j + m - 1).
    """

    m: int
    degree_shift: int
    homology: Dict[int, Z2Matrix]
    basis: Dict[int, Tuple[str, ...]]
    table: GHTable
    chain: Optional[Dict[int, Z2Matrix]] = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, PsiMap):
            return NotImplemented
        same = (self.m == other.m and self.degree_shift == other.degree_shift
                and self.homology == other.homology and self.basis == other.basis)
        if same and self.chain is not None and other.chain is not None:
            same = self.chain == other.chain
        return same

    def is_identity(self) -> bool:
        return all(blk == Z2Matrix.identity(blk.n_cols)
                   for blk in self.homology.values())

    def is_zero(self) -> bool:
        return all(blk.is_zero() for blk in self.homology.values())

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "degree_shift": self.degree_shift,
            "degrees": {str(j): self.homology[j].to_dense()
                        for j in sorted(self.homology)},
            "basis": {str(j): list(self.basis[j]) for j in sorted(self.basis)},
            "table": self.table.to_json(),
        }

    @staticmethod
    def from_json(obj: dict) -> "PsiMap":
        try:
            hom = {int(j): Z2Matrix.from_dense(mat)
                   for j, mat in obj["degrees"].items()}
            basis = {int(j): tuple(v) for j, v in obj.get("basis", {}).items()}
            table = GHTable.from_json(obj.get("table", {}))
            return PsiMap(int(obj["m"]), int(obj["degree_shift"]), hom, basis, table)
        except (KeyError, TypeError) as e:
            raise FamilyError(f"malformed psi JSON: {e}")


def psi(fc: FilteredComplex) -> PsiMap:
    """Extract the monodromy morphism from a sphere family.

    psi_j = theta_j + 1 when m = 1 (then it must be invertible), theta_j
    when m >= 2; verified to anticommute with d_0 before homology is taken.
    """
    parsed = _parse_sphere(fc)
    fiber, m, theta = parsed.fiber, parsed.m, parsed.theta
    counts = {j: len(g) for j, g in _degree_lists(fiber).items()}
    chain: Dict[int, Z2Matrix] = {}
    for j, n in counts.items():
        blk = theta.block(j, counts.get(j + m - 1, 0), n)
        if m == 1:
            blk = blk + Z2Matrix.identity(n)
        chain[j] = blk
    cm = ChainMap(m - 1, chain)
    cm.validate(fiber)  # raises with the failing degree
    if m == 1:
        for j, blk in chain.items():
            if not is_invertible(blk):
                raise FamilyError(
                    f"monodromy of an S^1 family must be invertible; "
                    f"degree {j} block is singular")
    hb = HomologyBasis(fiber)
    return PsiMap(m=m, degree_shift=1 - m, homology=hb.induced(cm),
                  basis=dict(hb.labels), table=hb.table(), chain=chain)


def compose(p1: PsiMap, p2: PsiMap) -> PsiMap:
    """Product of monodromy morphisms: matrix product for m = 1, sum for m >= 2."""
    if p1.m != p2.m or p1.degree_shift != p2.degree_shift:
        raise FamilyError("cannot compose psi maps of different m")
    if p1.basis != p2.basis or p1.table != p2.table:
        raise FamilyError("psi maps use different homology bases")
    out_h: Dict[int, Z2Matrix] = {}
    for j in sorted(set(p1.homology) | set(p2.homology)):
        a, b = p1.homology.get(j), p2.homology.get(j)
        if p1.m == 1:
            if a is None or b is None:
                raise FamilyError("psi maps use different homology bases")
            out_h[j] = a @ b
        else:
            if a is None:
                out_h[j] = b
            elif b is None:
                out_h[j] = a
            else:
                out_h[j] = a + b
    out_c = None
    if p1.chain is not None and p2.chain is not None:
        out_c = {}
        for j in sorted(set(p1.chain) | set(p2.chain)):
            a, b = p1.chain.get(j), p2.chain.get(j)
            if p1.m == 1:
                out_c[j] = a @ b
            else:
                out_c[j] = a if b is None else (b if a is None else a + b)
    return PsiMap(p1.m, p1.degree_shift, out_h, dict(p1.basis), p1.table, out_c)


_ORDER_CAP = 1024


def certificate(p: PsiMap) -> dict:
    """Non-contractibility verdict from a monodromy morphism.

    For m = 1 the order lower bound is the exact multiplicative order of
    the homology map (capped); nontrivial means different from the
    identity.  For m >= 2 nontrivial means nonzero.
    """
    if p.m == 1:
        nontrivial = not p.is_identity()
        order = 1
        if nontrivial:
            power = {j: Z2Matrix.identity(blk.n_cols) for j, blk in p.homology.items()}
            order = _ORDER_CAP
            for k in range(1, _ORDER_CAP + 1):
                power = {j: p.homology[j] @ power[j] for j in power}
                if all(blk == Z2Matrix.identity(blk.n_cols) for blk in power.values()):
                    order = k
                    break
        witness_degrees = [j for j, blk in sorted(p.homology.items())
                           if blk != Z2Matrix.identity(blk.n_cols)]
    else:
        nontrivial = not p.is_zero()
        order = 1
        witness_degrees = [j for j, blk in sorted(p.homology.items())
                           if not blk.is_zero()]
    basis = ""
    if witness_degrees:
        top = max(witness_degrees)
        basis = ",".join(p.basis.get(top, ()))
    if not nontrivial:
        claim = "no obstruction found"
    elif p.m == 1:
        claim = "loop not contractible in Legendrian category"
    else:
        claim = "sphere family not contractible in Legendrian category"
    return {
        "nontrivial": nontrivial,
        "order_lower_bound": order,
        "basis": basis,
        "paper_claim": claim,
    }


def cover_pullback(fc: FilteredComplex, k: int) -> FilteredComplex:
    """Pull an S^1 family back along the degree-k self cover: mu becomes mu^k."""
    parsed = _parse_sphere(fc)
    if parsed.m != 1:
        raise FamilyError("cover pullback is defined for S^1 families only")
    if k < 1:
        raise FamilyError("cover degree k >= 1 required")
    counts = {j: len(g) for j, g in _degree_lists(parsed.fiber).items()}
    mu = MonodromyData({j: parsed.theta.block(j, n, n) + Z2Matrix.identity(n)
                        for j, n in counts.items() if n})
    return sphere_family(parsed.fiber, 1, mu.power(k))


# ---------------------------------------------------------------------------
# interval families: continuation maps and homotopy verification


def interval_family(c_minus: GradedComplex, c_zero: GradedComplex,
                    c_plus: GradedComplex, alpha_plus: ChainMap,
                    alpha_minus: ChainMap) -> FilteredComplex:
    """Family over an interval: slices at -1, 0, 1, the middle sitting at
    base degree 1, with d_1(0, x) = (1, alpha_plus x) + (-1, alpha_minus x)."""
    for cm, name in ((alpha_plus, "alpha_plus"), (alpha_minus, "alpha_minus")):
        if cm.shift != 0:
            raise FamilyError(f"{name} must preserve fiber degree")
    alpha_plus.validate(c_zero, c_plus)
    alpha_minus.validate(c_zero, c_minus)
    slices = {"-1": (c_minus, 0), "0": (c_zero, 1), "1": (c_plus, 0)}
    gens: List[FamilyGenerator] = []
    of: Dict[Tuple[str, str], int] = {}
    for n in ("-1", "0", "1"):
        cx, bdeg = slices[n]
        for g, d in cx.generators:
            of[(n, g)] = len(gens)
            gens.append(FamilyGenerator(f"{n}|{g}", n, bdeg, d))
    ent0 = set()
    for n in ("-1", "0", "1"):
        cx = slices[n][0]
        for src, tgts in cx.differential.items():
            for t in tgts:
                ent0.add((of[(n, t)], of[(n, src)]))
    ent1 = set()
    lists0 = _degree_lists(c_zero)
    for sign, cm, cx in (("1", alpha_plus, c_plus), ("-1", alpha_minus, c_minus)):
        lists_t = _degree_lists(cx)
        for j, ids in lists0.items():
            tgt_ids = lists_t.get(j, [])
            blk = cm.block(j, len(tgt_ids), len(ids))
            for r, c in blk.entries:
                ent1.add((of[(sign, tgt_ids[r])], of[("0", ids[c])]))
    n_all = len(gens)
    fc = FilteredComplex(BaseDescriptor("interval"), gens,
                         {0: Z2Matrix(n_all, n_all, frozenset(ent0)),
                          1: Z2Matrix(n_all, n_all, frozenset(ent1))})
    return fc


@dataclass
class ContinuationReport:
    alpha: Dict[int, Z2Matrix]
    alpha_minus: Dict[int, Z2Matrix]
    admissible: bool
    induced: Optional[Dict[int, Z2Matrix]]
    induced_minus: Optional[Dict[int, Z2Matrix]]
    quasi_iso: bool
    flags: List[str]


def continuation(fc: FilteredComplex) -> ContinuationReport:
    """Read the continuation map alpha(x) = <d_1(0, x), 1> off an interval family.

    alpha must be a chain map (it is whenever d^2 = 0); its induced map on
    homology is reported and checked to be invertible in every degree, the
    groupoid property of paths of families.  Violations are flagged, not
    raised, so fixtures can exercise them.
    """
    base = BaseDescriptor.coerce(fc.base)
    if base.kind != "interval":
        raise FamilyError(f"expected an interval family, base kind is {base.kind!r}")
    slices: Dict[str, List[FamilyGenerator]] = {"-1": [], "0": [], "1": []}
    for g in fc.generators:
        if g.base_point not in slices:
            raise FamilyError(f"interval base admits points -1, 0, 1; "
                              f"got {g.base_point!r}")
        slices[g.base_point].append(g)

    def slice_complex(n: str) -> GradedComplex:
        ids = {fc.index[g.id]: g.id[len(n) + 1:] for g in slices[n]}
        diff: Dict[str, List[str]] = {}
        for r, c in fc.components.get(0, Z2Matrix.zeros(0, 0)).entries:
            if c in ids and r in ids:
                diff.setdefault(ids[c], []).append(ids[r])
        return GradedComplex([(g.id[len(n) + 1:], g.fiber_degree) for g in slices[n]],
                             diff)

    c_minus, c_zero, c_plus = slice_complex("-1"), slice_complex("0"), slice_complex("1")
    flags: List[str] = []
    ok, witness = verify_d_squared(fc.total_complex())
    admissible = ok
    if not ok:
        flags.append(f"inadmissible input: d^2 != 0 at {witness!r}")

    idx_slice = {}
    for n, gs in slices.items():
        for g in gs:
            idx_slice[fc.index[g.id]] = (n, g.id[len(n) + 1:])
    blocks: Dict[str, Dict[int, set]] = {"1": {}, "-1": {}}
    lists0 = _degree_lists(c_zero)
    lists_t = {"1": _degree_lists(c_plus), "-1": _degree_lists(c_minus)}
    local0 = {sid: (j, ids.index(sid)) for j, ids in lists0.items() for sid in ids}
    local_t = {n: {sid: (j, ids.index(sid)) for j, ids in lt.items() for sid in ids}
               for n, lt in lists_t.items()}
    for r, c in fc.components.get(1, Z2Matrix.zeros(0, 0)).entries:
        n_src, sid = idx_slice[c]
        n_tgt, tid = idx_slice[r]
        if n_src != "0" or n_tgt == "0":
            raise FamilyError("d_1 of an interval family must map the middle "
                              "slice to the end slices")
        j = local0[sid][0]
        blocks[n_tgt].setdefault(j, set()).add((local_t[n_tgt][tid][1], local0[sid][1]))

    def to_blocks(n: str) -> Dict[int, Z2Matrix]:
        out = {}
        for j, ids in lists0.items():
            ent = blocks[n].get(j, set())
            out[j] = Z2Matrix(len(lists_t[n].get(j, [])), len(ids), frozenset(ent))
        return out

    alpha_p, alpha_m = to_blocks("1"), to_blocks("-1")
    induced = induced_m = None
    quasi = False
    if admissible:
        hb0 = HomologyBasis(c_zero)
        cm_p, cm_m = ChainMap(0, alpha_p), ChainMap(0, alpha_m)
        try:
            cm_p.validate(c_zero, c_plus)
            cm_m.validate(c_zero, c_minus)
        except FamilyError as e:
            admissible = False
            flags.append(f"inadmissible input: {e}")
        if admissible:
            hb_p, hb_m = HomologyBasis(c_plus), HomologyBasis(c_minus)
            induced = _induced_between(hb0, hb_p, cm_p)
            induced_m = _induced_between(hb0, hb_m, cm_m)
            quasi = (_blocks_invertible(induced, hb0.table(), hb_p.table())
                     and _blocks_invertible(induced_m, hb0.table(), hb_m.table()))
            if not quasi:
                flags.append("continuation map is not a quasi-isomorphism "
                             "(groupoid property violated)")
    return ContinuationReport(alpha_p, alpha_m, admissible, induced, induced_m,
                              quasi, flags)


def _induced_between(hb_src: HomologyBasis, hb_tgt: HomologyBasis,
                     cm: ChainMap) -> Dict[int, Z2Matrix]:
    counts_src = {j: len(g) for j, g in _degree_lists(hb_src.complex).items()}
    counts_tgt = {j: len(g) for j, g in _degree_lists(hb_tgt.complex).items()}
    out = {}
    for j, reps in hb_src.reps.items():
        if not reps:
            continue
        blk = cm.block(j, counts_tgt.get(j + cm.shift, 0), counts_src.get(j, 0))
        entries = []
        for col, r_mask in enumerate(reps):
            coords = hb_tgt.class_coords(j + cm.shift, blk.apply(r_mask))
            if coords is None:
                raise FamilyError(f"image of a degree-{j} cycle is not a cycle")
            for row in indices_from_mask(coords):
                entries.append((row, col))
        out[j] = Z2Matrix.from_entries(len(hb_tgt.reps.get(j + cm.shift, [])),
                                       len(reps), entries)
    return out


def _blocks_invertible(blocks: Dict[int, Z2Matrix], src: GHTable, tgt: GHTable) -> bool:
    if src.as_dict() != tgt.as_dict():
        return False
    return all(is_invertible(b) for b in blocks.values())


@dataclass
class HomotopyData:
    """Chain data over the interval base connecting two sphere families.

    h is the primary homotopy block H (fiber degree shift m), read off
    d_(m+1) from (0, a) to (1, b); h_minus optionally feeds (-1, b).
    theta_mid overrides the middle-slice d_m data (default: the f0 slice).
    """

    h: Dict[int, Z2Matrix] = field(default_factory=dict)
    h_minus: Dict[int, Z2Matrix] = field(default_factory=dict)
    theta_mid: Optional[Dict[int, Z2Matrix]] = None


@dataclass
class HomotopyReport:
    ok: bool
    witness: Optional[str] = None

    def __bool__(self) -> bool:
        return self.ok


def homotopy_family(f0: FilteredComplex, f1: FilteredComplex,
                    htpy: HomotopyData) -> FilteredComplex:
    """Assemble the six-column family over interval x S^m from two sphere
    families and homotopy data; f0 sits over the -1 end, f1 over +1."""
    p0, p1 = _parse_sphere(f0), _parse_sphere(f1)
    if p0.m != p1.m:
        raise FamilyError("families live over spheres of different dimension")
    if (p0.fiber.generators != p1.fiber.generators
            or p0.fiber.differential != p1.fiber.differential):
        raise FamilyError("families have different fibers")
    m, fiber = p0.m, p0.fiber
    lists = _degree_lists(fiber)
    counts = {j: len(g) for j, g in lists.items()}
    theta_mid = ChainMap(m - 1, dict(htpy.theta_mid)) if htpy.theta_mid is not None \
        else p0.theta
    theta_by_slice = {"-1": p0.theta, "0": theta_mid, "1": p1.theta}

    base_deg = {"a": m, "b": 0}
    gens: List[FamilyGenerator] = []
    of: Dict[Tuple[str, str], int] = {}
    for c in ("a", "b"):
        for n in ("-1", "0", "1"):
            bdeg = base_deg[c] + (1 if n == "0" else 0)
            for g, d in fiber.generators:
                of[(f"{n},{c}", g)] = len(gens)
                gens.append(FamilyGenerator(f"{n},{c}|{g}", f"{n},{c}", bdeg, d))
    n_all = len(gens)

    ent0 = set()
    for c in ("a", "b"):
        for n in ("-1", "0", "1"):
            for src, tgts in fiber.differential.items():
                for t in tgts:
                    ent0.add((of[(f"{n},{c}", t)], of[(f"{n},{c}", src)]))
    ent1 = set()
    for c in ("a", "b"):
        for g, _ in fiber.generators:
            ent1.add((of[(f"1,{c}", g)], of[(f"0,{c}", g)]))
            ent1.add((of[(f"-1,{c}", g)], of[(f"0,{c}", g)]))
    ent_m = set()
    for n in ("-1", "0", "1"):
        th = theta_by_slice[n]
        for j, ids in lists.items():
            tgt_ids = lists.get(j + m - 1, [])
            blk = th.block(j, len(tgt_ids), len(ids))
            for r, c in blk.entries:
                ent_m.add((of[(f"{n},b", tgt_ids[r])], of[(f"{n},a", ids[c])]))
    ent_h = set()
    for sign, data in (("1", htpy.h), ("-1", htpy.h_minus)):
        cm = ChainMap(m, dict(data))
        for j, ids in lists.items():
            tgt_ids = lists.get(j + m, [])
            blk = cm.block(j, len(tgt_ids), len(ids))
            for r, c in blk.entries:
                ent_h.add((of[(f"{sign},b", tgt_ids[r])], of[(f"0,a", ids[c])]))

    comps: Dict[int, set] = {0: ent0, 1: ent1}
    comps[m] = comps.get(m, set()) | ent_m
    comps[m + 1] = comps.get(m + 1, set()) | ent_h
    matrices = {k: Z2Matrix(n_all, n_all, frozenset(v)) for k, v in comps.items()
                if v or k == 0}
    return FilteredComplex(BaseDescriptor("interval_product", m), gens, matrices)


def verify_homotopy(f0: FilteredComplex, f1: FilteredComplex,
                    htpy: HomotopyData) -> HomotopyReport:
    """Check that htpy exhibits f0 and f1 as homotopic sphere families.

    Two conditions, both required: the assembled six-column complex has
    d^2 = 0, and psi_f0 + psi_f1 = d_0 H + H d_0 where H sums the h and
    h_minus blocks.  Malformed inputs raise; a failed identity reports
    false with a witness.
    """
    fam = homotopy_family(f0, f1, htpy)
    ok, witness = verify_d_squared(fam.total_complex())
    if not ok:
        return HomotopyReport(False, f"assembled d^2 is nonzero at {witness!r}")
    p0, p1 = _parse_sphere(f0), _parse_sphere(f1)
    fiber, m = p0.fiber, p0.m
    counts = {j: len(g) for j, g in _degree_lists(fiber).items()}
    h_total = ChainMap(m, dict(htpy.h)) + ChainMap(m, dict(htpy.h_minus))
    psi0, psi1 = psi(f0), psi(f1)
    for j in sorted(counts):
        n_j = counts[j]
        n_tgt = counts.get(j + m - 1, 0)
        lhs = psi0.chain.get(j, Z2Matrix.zeros(n_tgt, n_j)) \
            + psi1.chain.get(j, Z2Matrix.zeros(n_tgt, n_j))
        h_j = h_total.block(j, counts.get(j + m, 0), n_j)
        h_jm1 = h_total.block(j - 1, counts.get(j + m - 1, 0), counts.get(j - 1, 0))
        d_top = fiber.boundary_matrix(j + m)
        d_bot = fiber.boundary_matrix(j)
        rhs = (d_top @ h_j) + (h_jm1 @ d_bot)
        if lhs != rhs:
            return HomotopyReport(
                False, f"chain homotopy identity fails at fiber degree {j}")
    return HomotopyReport(True, None)


# ---------------------------------------------------------------------------
# products, spinning, twist spinning


_BASE_BETTI = {
    "point": (1,),
    "S1": (1, 1),
    "S2": (1, 0, 1),
    "T2": (1, 2, 1),
}


def base_betti_numbers(name: str) -> Tuple[int, ...]:
    try:
        return _BASE_BETTI[name]
    except KeyError:
        raise FamilyError(f"unknown base {name!r}; known: {sorted(_BASE_BETTI)}")


def kunneth(gh: GHTable, base_betti: Sequence[int]) -> GHTable:
    """GH of a product with a closed base: rank_k = sum_l gh_l * betti_(k-l)."""
    out: Dict[int, int] = {}
    for l in gh.degrees():
        for i, b in enumerate(base_betti):
            if b:
                out[l + i] = out.get(l + i, 0) + gh.rank(l) * int(b)
    return GHTable(out)


def product_family(fiber: GradedComplex, base_name: str) -> FilteredComplex:
    """Trivial family over a product base: one fiber copy per base cell,
    fiber differential only.  The cell complexes used here have zero
    differential, so d_0 is the only component."""
    cells = {"S1": (0, 1), "S2": (0, 2), "T2": (0, 1, 1, 2), "point": (0,)}
    if base_name not in cells:
        raise FamilyError(f"unknown base {base_name!r}; known: {sorted(cells)}")
    gens: List[FamilyGenerator] = []
    of: Dict[Tuple[int, str], int] = {}
    for ci, cdeg in enumerate(cells[base_name]):
        for g, d in fiber.generators:
            of[(ci, g)] = len(gens)
            gens.append(FamilyGenerator(f"e{ci}|{g}", f"e{ci}", cdeg, d))
    ent0 = set()
    for ci in range(len(cells[base_name])):
        for src, tgts in fiber.differential.items():
            for t in tgts:
                ent0.add((of[(ci, t)], of[(ci, src)]))
    n_all = len(gens)
    return FilteredComplex({"kind": "product", "base_name": base_name}, gens,
                           {0: Z2Matrix(n_all, n_all, frozenset(ent0))})


def spin_gh(gh: GHTable, m: int) -> GHTable:
    """GH table of the m-fold spin: rank_k = rank_k + rank_(k-m)."""
    if m < 1:
        raise FamilyError("spin dimension m >= 1 required")
    return gh + gh.shift(m)


def twist_spin(fiber: GradedComplex, p: PsiMap, m: int) -> GHTable:
    """GH of the twist spin: homology of GH <- GH[1-m] with d = psi (+ 1 if m=1).

    The two-column complex has (a, x) at degree j + m over each GH_j class
    x and (b, y) at degree j; d(a, x) = (b, psi x + x) when m = 1 and
    (b, psi x) otherwise.
    """
    if p.degree_shift != 1 - m:
        raise FamilyError(
            f"degree shift mismatch: psi has {p.degree_shift}, spin needs {1 - m}")
    hb = HomologyBasis(fiber)
    if hb.table() != p.table:
        raise FamilyError("psi map does not belong to this fiber")
    gens: List[Tuple[str, int]] = []
    for j in p.table.degrees():
        for i in range(p.table.rank(j)):
            gens.append((f"a|{j}.{i}", j + m))
    for j in p.table.degrees():
        for i in range(p.table.rank(j)):
            gens.append((f"b|{j}.{i}", j))
    dd: Dict[str, List[str]] = {}
    for j in p.table.degrees():
        blk = p.homology.get(j, Z2Matrix.zeros(p.table.rank(j + m - 1), p.table.rank(j)))
        if m == 1:
            blk = blk + Z2Matrix.identity(blk.n_cols)
        for r, c in blk.entries:
            dd.setdefault(f"a|{j}.{c}", []).append(f"b|{j + m - 1}.{r}")
    return homology(GradedComplex(gens, dd))


def spin_family(fc: FilteredComplex) -> FilteredComplex:
    """Spin an S^1 family: fiber generators double to x[-] (degree kept)
    and x[+] (degree + 1); d_0 and the monodromy act diagonally with equal
    blocks and no cross terms."""
    parsed = _parse_sphere(fc)
    if parsed.m != 1:
        raise FamilyError("spinning is defined for S^1 families here")
    fiber = parsed.fiber
    counts = {j: len(g) for j, g in _degree_lists(fiber).items()}
    gens = [(f"{g}[-]", d) for g, d in fiber.generators]
    gens += [(f"{g}[+]", d + 1) for g, d in fiber.generators]
    diff: Dict[str, List[str]] = {}
    for src, tgts in fiber.differential.items():
        diff[f"{src}[-]"] = [f"{t}[-]" for t in tgts]
        diff[f"{src}[+]"] = [f"{t}[+]" for t in tgts]
    spun_fiber = GradedComplex(gens, diff)
    lists = _degree_lists(fiber)
    mu_blocks: Dict[int, Z2Matrix] = {}
    for j, n in counts.items():
        if n:
            mu_blocks[j] = parsed.theta.block(j, n, n) + Z2Matrix.identity(n)
    spun_mu: Dict[int, Z2Matrix] = {}
    lists_s = _degree_lists(spun_fiber)
    for j, ids in lists_s.items():
        k = len(ids)
        pos = {sid: i for i, sid in enumerate(ids)}
        ent = set()
        for sign, dshift in (("[-]", 0), ("[+]", 1)):
            src_ids = lists.get(j - dshift, [])
            blk = mu_blocks.get(j - dshift)
            if blk is None:
                continue
            for r, c in blk.entries:
                ent.add((pos[src_ids[r] + sign], pos[src_ids[c] + sign]))
        spun_mu[j] = Z2Matrix(k, k, frozenset(ent))
    return sphere_family(spun_fiber, 1, MonodromyData(spun_mu))


def _split_sign(sid: str) -> Tuple[str, str]:
    if sid.endswith("[-]"):
        return sid[:-3], "-"
    if sid.endswith("[+]"):
        return sid[:-3], "+"
    raise FamilyError(f"fiber id {sid!r} carries no [-]/[+] tag")


def spin_block_check(spun: FilteredComplex) -> Tuple[bool, Optional[str]]:
    """Validate the block structure of a spun family: tagged generator
    pairs with the [+] fiber degree one higher, no cross-block entries in
    any component, and equal diagonal blocks."""
    try:
        degree_of: Dict[Tuple[str, str, str], int] = {}
        for g in spun.generators:
            head, _, sid = g.id.partition("|")
            core, sign = _split_sign(sid)
            degree_of[(head, core, sign)] = g.fiber_degree
    except FamilyError as e:
        return False, str(e)
    for (head, core, sign), d in degree_of.items():
        other = "+" if sign == "-" else "-"
        if (head, core, other) not in degree_of:
            return False, f"generator {head}|{core}[{sign}] has no [{other}] partner"
        if sign == "-" and degree_of[(head, core, "+")] != d + 1:
            return False, f"[+] copy of {head}|{core} is not shifted up by 1"
    sign_of = {}
    core_of = {}
    for g in spun.generators:
        head, _, sid = g.id.partition("|")
        core, sign = _split_sign(sid)
        sign_of[spun.index[g.id]] = sign
        core_of[spun.index[g.id]] = (head, core)
    for n, mat in spun.components.items():
        seen = {"-": set(), "+": set()}
        for r, c in mat.entries:
            if sign_of[r] != sign_of[c]:
                gr = spun.generators[r].id
                gc = spun.generators[c].id
                return False, f"cross-block entry {gc!r} -> {gr!r} in d_{n}"
            seen[sign_of[c]].add((core_of[r], core_of[c]))
        if seen["-"] != seen["+"]:
            return False, f"diagonal blocks of d_{n} differ"
    return True, None


def factor_check(fc: FilteredComplex, spun: FilteredComplex) -> bool:
    """Does the spun family's monodromy factor through the original one?

    The block validator runs first; then psi of the spun family must act
    as psi of fc on the [-] block and on the [+] block (shifted by one).
    """
    ok, _ = spin_block_check(spun)
    if not ok:
        return False
    p = psi(fc)
    q = psi(spun)
    if p.m != q.m:
        return False
    parsed_spun = _parse_sphere(spun)
    lists_s = _degree_lists(parsed_spun.fiber)
    parsed = _parse_sphere(fc)
    lists = _degree_lists(parsed.fiber)
    for j, ids in lists_s.items():
        blk = q.chain.get(j)
        if blk is None:
            continue
        tgt_ids = lists_s.get(j + q.m - 1, [])
        for sign, dshift in (("-", 0), ("+", 1)):
            rows = [i for i, sid in enumerate(tgt_ids) if _split_sign(sid)[1] == sign]
            cols = [i for i, sid in enumerate(ids) if _split_sign(sid)[1] == sign]
            src_orig = lists.get(j - dshift, [])
            tgt_orig = lists.get(j - dshift + q.m - 1, [])
            sub = {(r, c) for r, c in blk.entries if r in rows and c in cols}
            row_pos = {tgt_ids[r]: tgt_orig.index(_split_sign(tgt_ids[r])[0])
                       for r in rows}
            col_pos = {ids[c]: src_orig.index(_split_sign(ids[c])[0]) for c in cols}
            got = {(row_pos[tgt_ids[r]], col_pos[ids[c]]) for r, c in sub}
            want_blk = p.chain.get(j - dshift,
                                   Z2Matrix.zeros(len(tgt_orig), len(src_orig)))
            if got != set(want_blk.entries):
                return False
    return True


# ---------------------------------------------------------------------------
# the dumbbell model


def dumbbell(n: int, r: int, copies: int = 2) -> Tuple[GradedComplex, MonodromyData]:
    """Chain model of the dumbbell Legendrian: one class at degree n and
    `copies` symmetric classes at degrees r and 1 - r, zero differential;
    the loop of rotations acts as the cyclic shift on the symmetric classes
    and (by convention, flagged in outputs) as the identity at degree n.
    """
    if n < 0:
        raise FamilyError("n >= 0 required")
    if r < n + 2:
        raise FamilyError("r >= n+2 required")
    if copies < 2:
        raise FamilyError("copies >= 2 required")
    if copies == 2:
        betas = ["beta_L", "beta_R"]
        gammas = ["gamma_L", "gamma_R"]
    else:
        betas = [f"beta_{i + 1}" for i in range(copies)]
        gammas = [f"gamma_{i + 1}" for i in range(copies)]
    gens = [("core", n)]
    gens += [(b, r) for b in betas]
    gens += [(g, 1 - r) for g in gammas]
    cx = GradedComplex(gens, {})
    shift = Z2Matrix.from_entries(
        copies, copies, [((i + 1) % copies, i) for i in range(copies)])
    mu = MonodromyData({n: Z2Matrix.identity(1), r: shift, 1 - r: shift})
    return cx, mu


DUMBBELL_NOTES = (
    "monodromy acts as the identity on the degree-n class by the "
    "rotational-symmetry convention; only the symmetric classes are "
    "constrained by the model",
)
