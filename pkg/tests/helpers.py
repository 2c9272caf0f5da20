"""Shared fixtures and independent oracles for the test suite.

Oracles here deliberately avoid the library's sparse bitmask code paths:
ranks come from dense numpy row elimination, expression values from
Python's own evaluator.  Fixture factories (random complexes, chain maps,
monodromies) may use library types, but never library answers.
"""

from __future__ import annotations

import numpy as np

from gfh.z2 import GradedComplex, Z2Matrix, mask_from_indices


# ---------------------------------------------------------------------------
# dense GF(2) oracle


def dense_rank_gf2(a) -> int:
    """Rank over GF(2) by plain dense row elimination."""
    a = (np.array(a, dtype=np.int64) % 2).astype(np.int8)
    if a.size == 0:
        return 0
    n_rows, n_cols = a.shape
    r = 0
    for c in range(n_cols):
        rows = np.nonzero(a[r:, c])[0]
        if rows.size == 0:
            continue
        piv = r + rows[0]
        a[[r, piv]] = a[[piv, r]]
        hit = np.nonzero(a[:, c])[0]
        for i in hit:
            if i != r:
                a[i] ^= a[r]
        r += 1
        if r == n_rows:
            break
    return r


def dense_of(m: Z2Matrix):
    return np.array(m.to_dense(), dtype=np.int8).reshape(m.n_rows, m.n_cols)


# ---------------------------------------------------------------------------
# random complexes with known homology (conjugated normal forms)


def random_invertible_gf2(rng, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0), dtype=np.int8)
    lower = np.tril(rng.integers(0, 2, size=(n, n)), -1) + np.eye(n, dtype=np.int64)
    upper = np.triu(rng.integers(0, 2, size=(n, n)), 1) + np.eye(n, dtype=np.int64)
    perm = np.eye(n, dtype=np.int64)[rng.permutation(n)]
    return (perm @ lower @ upper % 2).astype(np.int8)


def inverse_gf2(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    aug = np.concatenate([a.astype(np.int8) % 2, np.eye(n, dtype=np.int8)], axis=1)
    r = 0
    for c in range(n):
        rows = np.nonzero(aug[r:, c])[0]
        if rows.size == 0:
            raise ValueError("singular")
        piv = r + rows[0]
        aug[[r, piv]] = aug[[piv, r]]
        for i in np.nonzero(aug[:, c])[0]:
            if i != r:
                aug[i] ^= aug[r]
        r += 1
    return aug[:, n:]


def random_complex(rng, degrees=(-1, 0, 1, 2, 3), max_pairs=2, max_cycles=2):
    """GradedComplex with scrambled basis but known homology ranks.

    Returns (complex, expected_homology_dict).  Built from a normal form
    (matched pairs x->y plus lone cycles) conjugated by random invertible
    degree-zero changes of basis, so the differential looks arbitrary.
    """
    pairs = {k: int(rng.integers(0, max_pairs + 1)) for k in degrees}
    cycles = {k: int(rng.integers(0, max_cycles + 1)) for k in degrees}
    pairs[degrees[0]] = 0  # nothing to kill below the bottom degree
    counts = {}
    for k in degrees:
        counts[k] = cycles.get(k, 0) + pairs.get(k, 0)
    for k in degrees[:-1]:
        counts[k] += pairs.get(k + 1, 0)  # targets of pairs one degree up

    gens = []
    for k in degrees:
        for i in range(counts[k]):
            gens.append((f"g{k}_{i}", k))

    # normal-form differential per degree: first pairs[k] generators of
    # degree k map to the last pairs[k] generators of degree k-1
    d_normal = {}
    for k in degrees:
        below = counts.get(k - 1, 0)
        for i in range(pairs.get(k, 0)):
            d_normal[(k, i)] = below - pairs[k] + i

    basis_change = {k: random_invertible_gf2(rng, counts[k]) for k in degrees}
    inv = {k: inverse_gf2(basis_change[k]) if counts[k] else basis_change[k]
           for k in degrees}

    diff = {}
    names = {k: [f"g{k}_{i}" for i in range(counts[k])] for k in degrees}
    for k in degrees:
        if k - 1 not in counts:
            continue
        n_k, n_b = counts[k], counts[k - 1]
        dmat = np.zeros((n_b, n_k), dtype=np.int8)
        for (kk, i), j in d_normal.items():
            if kk == k:
                dmat[j, i] = 1
        dmat = basis_change[k - 1] @ dmat @ inv[k] % 2
        for j in range(n_k):
            targets = [names[k - 1][i] for i in np.nonzero(dmat[:, j])[0]]
            if targets:
                diff[names[k][j]] = targets

    expected = {k: cycles[k] for k in degrees if cycles[k]}
    return GradedComplex(gens, diff), expected


# ---------------------------------------------------------------------------
# random chain maps and monodromies via kernel sampling


def chain_map_space(c: GradedComplex, shift: int):
    """Basis of all chain maps c -> c raising degree by `shift`.

    A map is a family of blocks M_k : C_k -> C_{k+shift} with
    M_{k-1} d_k = d_{k+shift} M_k over Z/2.  Returns (slots, basis) where
    slots lists (degree, row, col) coordinates and basis is a list of
    0/1 numpy vectors over those slots.
    """
    degs = c.degrees()
    dims = {k: len(c.generators_of_degree(k)) for k in degs}
    slots = []
    for k in degs:
        tgt = dims.get(k + shift, 0)
        for r in range(tgt):
            for col in range(dims[k]):
                slots.append((k, r, col))
    slot_index = {s: i for i, s in enumerate(slots)}
    n = len(slots)
    if n == 0:
        return slots, []

    dmat = {k: dense_of(c.boundary_matrix(k)) for k in [d for d in degs] + [max(degs) + 1]}

    rows = []
    for k in degs:
        n_k = dims[k]
        n_km1 = dims.get(k - 1, 0)
        n_tgt = dims.get(k + shift - 1, 0)
        if n_k == 0 or n_tgt == 0:
            continue
        dk = dmat.get(k)
        dks = dmat.get(k + shift)
        for r in range(n_tgt):
            for col in range(n_k):
                row = np.zeros(n, dtype=np.int8)
                # (M_{k-1} d_k)[r, col]
                if n_km1 and dk is not None and dk.size:
                    for mid in range(n_km1):
                        if dk[mid, col]:
                            s = (k - 1, r, mid)
                            if s in slot_index:
                                row[slot_index[s]] ^= 1
                # (d_{k+shift} M_k)[r, col]
                if dks is not None and dks.size:
                    for mid in range(dims.get(k + shift, 0)):
                        if dks[r, mid]:
                            s = (k, mid, col)
                            if s in slot_index:
                                row[slot_index[s]] ^= 1
                if row.any():
                    rows.append(row)

    if not rows:
        basis = [np.eye(n, dtype=np.int8)[i] for i in range(n)]
        return slots, basis

    a = np.array(rows, dtype=np.int8)
    # kernel basis of a over GF(2) by elimination with free-column tracking
    m_rows, n_cols = a.shape
    a = a.copy()
    pivots = []
    r = 0
    for ccol in range(n_cols):
        rows_nz = np.nonzero(a[r:, ccol])[0]
        if rows_nz.size == 0:
            continue
        piv = r + rows_nz[0]
        a[[r, piv]] = a[[piv, r]]
        for i in np.nonzero(a[:, ccol])[0]:
            if i != r:
                a[i] ^= a[r]
        pivots.append(ccol)
        r += 1
        if r == m_rows:
            break
    free = [j for j in range(n_cols) if j not in set(pivots)]
    basis = []
    for f in free:
        v = np.zeros(n_cols, dtype=np.int8)
        v[f] = 1
        for i, p in enumerate(pivots):
            if a[i, f]:
                v[p] = 1
        basis.append(v)
    return slots, basis


def blocks_from_slot_vector(c: GradedComplex, shift: int, slots, vec) -> dict:
    degs = c.degrees()
    dims = {k: len(c.generators_of_degree(k)) for k in degs}
    blocks = {k: np.zeros((dims.get(k + shift, 0), dims[k]), dtype=np.int8) for k in degs}
    for (k, r, col), bit in zip(slots, vec):
        if bit:
            blocks[k][r, col] = 1
    return blocks

def _dense_nullspace(a):
    a = (np.asarray(a, dtype=np.int8) % 2).copy()
    m_rows, n_cols = a.shape
    pivots = []
    r = 0
    for ccol in range(n_cols):
        rows_nz = np.nonzero(a[r:, ccol])[0] if r < m_rows else np.array([])
        if rows_nz.size == 0:
            continue
        piv = r + rows_nz[0]
        a[[r, piv]] = a[[piv, r]]
        for i in np.nonzero(a[:, ccol])[0]:
            if i != r:
                a[i] ^= a[r]
        pivots.append(ccol)
        r += 1
    out = []
    for f in (j for j in range(n_cols) if j not in set(pivots)):
        v = np.zeros(n_cols, dtype=np.int8)
        v[f] = 1
        for i, p in enumerate(pivots):
            if a[i, f]:
                v[p] = 1
        out.append(v)
    return out


def random_chain_map(rng, c: GradedComplex, shift: int, invertible: bool = False,
                     max_tries: int = 60):
    """Random chain self-map of c with the given degree shift, as dense blocks."""
    slots, basis = chain_map_space(c, shift)
    degs = c.degrees()
    dims = {k: len(c.generators_of_degree(k)) for k in degs}
    for _ in range(max_tries):
        vec = np.zeros(len(slots), dtype=np.int8)
        for b in basis:
            if rng.integers(0, 2):
                vec ^= b
        blocks = blocks_from_slot_vector(c, shift, slots, vec)
        if not invertible:
            return blocks
        ok = True
        for k in degs:
            blk = blocks[k]
            if blk.shape[0] != blk.shape[1]:
                ok = False
                break
            if blk.size and dense_rank_gf2(blk) != blk.shape[0]:
                ok = False
                break
        if ok:
            return blocks
    # Rejection can starve when many small blocks must all be invertible at
    # once.  Fall back to identity + strictly upper triangular chain map,
    # which is invertible by construction.
    forbidden = [i for i, (_, r, col) in enumerate(slots) if r >= col]
    vec = np.zeros(len(slots), dtype=np.int8)
    if basis:
        bmat = np.array(basis, dtype=np.int8)
        if forbidden:
            combos = _dense_nullspace(bmat[:, forbidden].T)
        else:
            combos = list(np.eye(len(basis), dtype=np.int8))
        for x in combos:
            if rng.integers(0, 2):
                for i in np.nonzero(x)[0]:
                    vec ^= bmat[i]
    blocks = blocks_from_slot_vector(c, shift, slots, vec)
    for k in degs:
        blocks[k] = blocks[k] ^ np.eye(dims[k], dtype=np.int8)
    return blocks


def z2_from_dense(a) -> Z2Matrix:
    a = np.asarray(a)
    return Z2Matrix.from_entries(
        a.shape[0], a.shape[1],
        [(int(r), int(c)) for r, c in zip(*np.nonzero(a % 2))])


def mask_of(ids, index_map) -> int:
    return mask_from_indices(index_map[i] for i in ids)


# ---------------------------------------------------------------------------
# independent expression evaluator (Python eval over a numpy namespace)


def oracle_smoothstep(t):
    t = np.asarray(t, dtype=float)
    core = 6.0 * t**5 - 15.0 * t**4 + 10.0 * t**3
    return np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, core))


def oracle_smoothstep_d1(t):
    t = np.asarray(t, dtype=float)
    core = 30.0 * t**2 * (t - 1.0) ** 2
    return np.where((t <= 0.0) | (t >= 1.0), 0.0, core)


def oracle_smoothstep_d2(t):
    t = np.asarray(t, dtype=float)
    core = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0)
    return np.where((t <= 0.0) | (t >= 1.0), 0.0, core)


_ORACLE_NS = {
    "smoothstep": oracle_smoothstep,
    "smoothstep_d1": oracle_smoothstep_d1,
    "smoothstep_d2": oracle_smoothstep_d2,
    "sqrt": np.sqrt,
    "__builtins__": {},
}


def eval_oracle(text: str, env: dict):
    """Evaluate an expression string with Python's own parser and numpy."""
    ns = dict(_ORACLE_NS)
    ns.update(env)
    return eval(text.replace("^", "**"), ns)  # noqa: S307 - test oracle


# ---------------------------------------------------------------------------
# random filtered complexes with known total homology

def random_filtered(rng, n_gens=12, base_levels=(0, 1, 2), fiber_range=(-2, 3),
                    pair_prob=0.7):
    """Random valid filtered complex plus its total homology by construction.

    Start from a normal form: generators get random bidegrees, some pairs
    (x, y) with total degree dropping by one and base degree not increasing
    get d x = y, the rest stay lone cycles.  Conjugating by a random
    filtration-preserving unipotent map keeps d filtration-preserving with
    d*d = 0 and keeps homology = one class per lone generator.
    """
    from gfh.spectral import FamilyGenerator, FilteredComplex

    lo, hi = fiber_range
    gens = []
    for i in range(n_gens):
        l = int(rng.choice(base_levels))
        j = int(rng.integers(lo, hi + 1))
        gens.append(FamilyGenerator(f"g{i}", f"p{l}", l, j))

    order = list(rng.permutation(n_gens))
    paired = set()
    pairs = []
    for x in order:
        if x in paired:
            continue
        mates = [y for y in order
                 if y not in paired and y != x
                 and gens[y].total_degree == gens[x].total_degree - 1
                 and gens[y].base_degree <= gens[x].base_degree]
        if mates and rng.random() < pair_prob:
            y = mates[int(rng.integers(len(mates)))]
            pairs.append((x, y))
            paired.update((x, y))

    d0 = np.zeros((n_gens, n_gens), dtype=np.int64)
    for x, y in pairs:
        d0[y, x] = 1

    expected = {}
    for i in range(n_gens):
        if i not in paired:
            nu = gens[i].total_degree
            expected[nu] = expected.get(nu, 0) + 1

    # unipotent filtration-preserving change of basis: strictly upper
    # triangular in an order sorted by (total degree, base degree)
    pos = sorted(range(n_gens), key=lambda i: (gens[i].total_degree, gens[i].base_degree, i))
    rank_of = {g: p for p, g in enumerate(pos)}
    nmat = np.zeros((n_gens, n_gens), dtype=np.int64)
    for k in range(n_gens):
        for i in range(n_gens):
            if (gens[i].total_degree == gens[k].total_degree
                    and rank_of[i] < rank_of[k] and rng.random() < 0.4):
                nmat[i, k] = 1
    g = (np.eye(n_gens, dtype=np.int64) + nmat) % 2
    ginv = inverse_gf2(g)
    d = (g @ d0 @ ginv) % 2

    comps = {}
    for r in range(n_gens):
        for c in range(n_gens):
            if d[r, c]:
                shift = gens[c].base_degree - gens[r].base_degree
                comps.setdefault(shift, set()).add((r, c))
    components = {k: Z2Matrix(n_gens, n_gens, frozenset(v)) for k, v in comps.items()}
    fc = FilteredComplex({"kind": "synthetic"}, gens, components)
    return fc, expected


# ---------------------------------------------------------------------------
# families fixtures: sphere families, homotopies, tensor oracle


def z2blocks(blocks) -> dict:
    return {int(j): z2_from_dense(b) for j, b in blocks.items() if np.asarray(b).size}


def random_sphere_family(rng, m=1, fiber=None):
    """Random admissible sphere family; returns (fiber, data, family)."""
    from gfh.families import ChainMap, MonodromyData, sphere_family

    if fiber is None:
        fiber, _ = random_complex(rng)
    if m == 1:
        blocks = random_chain_map(rng, fiber, 0, invertible=True)
        data = MonodromyData(z2blocks(blocks))
    else:
        blocks = random_chain_map(rng, fiber, m - 1)
        data = ChainMap(m - 1, z2blocks(blocks))
    return fiber, data, sphere_family(fiber, m, data)


def _dense_boundaries(c: GradedComplex) -> dict:
    degs = c.degrees()
    out = {}
    for k in degs + [max(degs) + 1] if degs else []:
        out[k] = dense_of(c.boundary_matrix(k))
    return out


def _dims(c: GradedComplex) -> dict:
    return {k: len(c.generators_of_degree(k)) for k in c.degrees()}


def random_degree_map(rng, c: GradedComplex, shift: int, density=0.35) -> dict:
    """Arbitrary degree-raising linear map as dense blocks (no chain condition)."""
    dims = _dims(c)
    out = {}
    for j, n in dims.items():
        rows = dims.get(j + shift, 0)
        if rows and n:
            out[j] = (rng.random((rows, n)) < density).astype(np.int8)
    return out


def _homotopy_delta(c: GradedComplex, k_blocks: dict, m: int) -> dict:
    """delta_j = d_(j+m) K_j + K_(j-1) d_j as dense blocks of shift m-1."""
    dims = _dims(c)
    d = _dense_boundaries(c)
    delta = {}
    for j, n in dims.items():
        rows = dims.get(j + m - 1, 0)
        acc = np.zeros((rows, n), dtype=np.int8)
        kj = k_blocks.get(j)
        if kj is not None and kj.size and d.get(j + m) is not None and d[j + m].size:
            acc ^= (d[j + m] @ kj % 2).astype(np.int8)
        kjm1 = k_blocks.get(j - 1)
        if kjm1 is not None and kjm1.size and d.get(j) is not None and d[j].size:
            acc ^= (kjm1 @ d[j] % 2).astype(np.int8)
        if acc.any():
            delta[j] = acc
    return delta


def homotopic_fixture(rng, m=1, corrupt=None, max_tries=200):
    """Two sphere families joined by valid homotopy data, optionally corrupted.

    corrupt=None gives a true pair (f1's theta = f0's + d K + K d with K the
    homotopy block).  corrupt="h" flips one entry of H whose commutator with
    d is nonzero; corrupt="mid" flips one entry of the middle-slice theta,
    which breaks d^2 = 0 of the assembled complex.  Returns (f0, f1, htpy).
    """
    from gfh.families import ChainMap, HomotopyData, MonodromyData, sphere_family

    for _ in range(max_tries):
        fiber, _ = random_complex(rng)
        dims = _dims(fiber)
        if not dims:
            continue
        mid_slots = [(j, r, c) for j, n in dims.items()
                     for r in range(dims.get(j + m - 1, 0)) for c in range(n)]
        if corrupt == "mid" and not mid_slots:
            continue
        try:
            if m == 1:
                mu_blocks = random_chain_map(rng, fiber, 0, invertible=True)
            else:
                theta0_blocks = random_chain_map(rng, fiber, m - 1)
        except RuntimeError:
            continue
        k_blocks = random_degree_map(rng, fiber, m)
        delta = _homotopy_delta(fiber, k_blocks, m)
        if m == 1:
            mu2 = {}
            ok = True
            for j, n in dims.items():
                base = mu_blocks.get(j, np.zeros((n, n), dtype=np.int8))
                blk = base.copy()
                if j in delta:
                    blk = blk ^ delta[j]
                if n and dense_rank_gf2(blk) != n:
                    ok = False
                    break
                mu2[j] = blk
            if not ok:
                continue
            data0 = MonodromyData(z2blocks(mu_blocks))
            data1 = MonodromyData(z2blocks(mu2))
            f0 = sphere_family(fiber, 1, data0)
            f1 = sphere_family(fiber, 1, data1)
        else:
            t1 = {}
            for j, n in dims.items():
                rows = dims.get(j + m - 1, 0)
                acc = np.zeros((rows, n), dtype=np.int8)
                if j in theta0_blocks and theta0_blocks[j].size:
                    acc ^= theta0_blocks[j]
                if j in delta:
                    acc ^= delta[j]
                if acc.any():
                    t1[j] = acc
            f0 = sphere_family(fiber, m, ChainMap(m - 1, z2blocks(theta0_blocks)))
            f1 = sphere_family(fiber, m, ChainMap(m - 1, z2blocks(t1)))

        h_blocks = {j: b.copy() for j, b in k_blocks.items()}
        if corrupt is None:
            return f0, f1, HomotopyData(h=z2blocks(h_blocks))
        if corrupt == "h":
            d = _dense_boundaries(fiber)
            slots = []
            for j, blk in h_blocks.items():
                dj_m = d.get(j + m)
                dj_1 = d.get(j + 1)
                for r in range(blk.shape[0]):
                    for c in range(blk.shape[1]):
                        col_hit = dj_m is not None and dj_m.size and dj_m[:, r].any()
                        row_hit = dj_1 is not None and dj_1.size and dj_1[c, :].any()
                        if col_hit or row_hit:
                            slots.append((j, r, c))
            if not slots:
                continue
            j, r, c = slots[int(rng.integers(len(slots)))]
            h_blocks[j][r, c] ^= 1
            return f0, f1, HomotopyData(h=z2blocks(h_blocks))
        if corrupt == "mid":
            if not mid_slots:
                continue
            from gfh.families import psi as _psi
            j, r, c = mid_slots[int(rng.integers(len(mid_slots)))]
            theta_mid = {}
            p0 = _psi(f0)
            for jj, n in dims.items():
                rows = dims.get(jj + m - 1, 0)
                blk = np.zeros((rows, n), dtype=np.int8)
                ch = p0.chain.get(jj)
                if ch is not None:
                    blk ^= np.array(ch.to_dense(), dtype=np.int8)
                if m == 1 and n:
                    blk ^= np.eye(n, dtype=np.int8)
                theta_mid[jj] = blk
            theta_mid[j][r, c] ^= 1
            return f0, f1, HomotopyData(h=z2blocks(h_blocks),
                                        theta_mid=z2blocks(theta_mid))
        raise ValueError(f"unknown corruption mode {corrupt!r}")
    raise RuntimeError("could not build a homotopy fixture")


def tensor_complex(c1: GradedComplex, c2: GradedComplex) -> GradedComplex:
    """Tensor product complex: d(x*y) = dx*y + x*dy over Z/2."""
    gens = [(f"{g1}*{g2}", d1 + d2)
            for g1, d1 in c1.generators for g2, d2 in c2.generators]
    diff = {}
    for g1, d1 in c1.generators:
        for g2, d2 in c2.generators:
            tgts = [f"{t}*{g2}" for t in c1.differential.get(g1, ())]
            tgts += [f"{g1}*{t}" for t in c2.differential.get(g2, ())]
            if tgts:
                diff[f"{g1}*{g2}"] = tgts
    return GradedComplex(gens, diff)


def circle_complex() -> GradedComplex:
    return GradedComplex([("v0", 0), ("v1", 0), ("e0", 1), ("e1", 1)],
                         {"e0": ["v0", "v1"], "e1": ["v0", "v1"]})


def sphere2_complex() -> GradedComplex:
    """Boundary of the tetrahedron on vertices 1..4."""
    verts = [f"v{i}" for i in range(1, 5)]
    edges = [(i, j) for i in range(1, 5) for j in range(i + 1, 5)]
    faces = [(i, j, k) for i in range(1, 5) for j in range(i + 1, 5)
             for k in range(j + 1, 5)]
    gens = [(v, 0) for v in verts]
    gens += [(f"e{i}{j}", 1) for i, j in edges]
    gens += [(f"f{i}{j}{k}", 2) for i, j, k in faces]
    diff = {f"e{i}{j}": [f"v{i}", f"v{j}"] for i, j in edges}
    for i, j, k in faces:
        diff[f"f{i}{j}{k}"] = [f"e{i}{j}", f"e{i}{k}", f"e{j}{k}"]
    return GradedComplex(gens, diff)


def torus_complex() -> GradedComplex:
    return tensor_complex(circle_complex(), circle_complex())


# ---------------------------------------------------------------------------
# brute-force cubical oracle: enumerates every cell of the grid directly,
# no doubled-grid tricks and no elimination shortcuts


def oracle_relative_ranks(vertex_values, eps, omega):
    """Ranks of H_*(sublevel(omega), sublevel(eps)) by dense elimination.

    A cell is the product of [i, i+1] over a subset of axes anchored at a
    vertex; it belongs to sublevel(c) iff every corner value is <= c.
    """
    vals = np.asarray(vertex_values, dtype=np.float64)
    shape = vals.shape
    d = vals.ndim
    cells = {}
    for anchor in np.ndindex(*shape):
        for mask in range(1 << d):
            ok = True
            for a in range(d):
                if (mask >> a) & 1 and anchor[a] + 1 >= shape[a]:
                    ok = False
                    break
            if not ok:
                continue
            corners = [anchor]
            for a in range(d):
                if (mask >> a) & 1:
                    corners = [c[:a] + (c[a] + off,) + c[a + 1:]
                               for c in corners for off in (0, 1)]
            v = max(vals[c] for c in corners)
            if eps < v <= omega:
                cells[(anchor, mask)] = bin(mask).count("1")
    order = sorted(cells)
    pos = {c: i for i, c in enumerate(order)}
    by_dim = {}
    for c in order:
        by_dim.setdefault(cells[c], []).append(c)
    ranks = {}
    counts = {k: len(v) for k, v in by_dim.items()}
    for k in sorted(by_dim):
        rows = by_dim.get(k - 1, [])
        rpos = {c: i for i, c in enumerate(rows)}
        mat = np.zeros((len(rows), len(by_dim[k])), dtype=np.int8)
        for j, (anchor, mask) in enumerate(by_dim[k]):
            for a in range(d):
                if not (mask >> a) & 1:
                    continue
                sub = mask & ~(1 << a)
                far = anchor[:a] + (anchor[a] + 1,) + anchor[a + 1:]
                for f in ((anchor, sub), (far, sub)):
                    if f in cells:
                        mat[rpos[f], j] ^= 1
        ranks[k] = dense_rank_gf2(mat) if mat.size else 0
    out = {}
    for k, n in counts.items():
        b = n - ranks.get(k, 0) - ranks.get(k + 1, 0)
        if b:
            out[k] = b
    return out
