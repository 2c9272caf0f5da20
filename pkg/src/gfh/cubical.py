"""Sampled scalar fields and relative homology of sublevel-set pairs.

The pair (sublevel(omega), sublevel(eps)) is modelled on the doubled grid:
a grid of shape 2r-1 per axis whose even coordinates are vertices and whose
odd coordinates span edges, squares, and so on.  A cell belongs to
sublevel(c) iff all of its vertices do, so the cell value is the max over
its vertex corners and the window eps < value <= omega carves out the
quotient complex directly.
"""

import json
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gfh.expr import Expr, gradient, hessian
from gfh.z2 import Echelon, GHTable

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


class CubicalError(ValueError):
    pass


_PREFIX_RANK = {"x": 0, "e": 1, "te": 2}
_AXIS_RE = re.compile(r"(te|x|e)(\d+)\Z")


def canonical_axes(names) -> Tuple[str, ...]:
    """Sort axis names x1..xn, e1..eN, te1..teN; anything else goes last."""

    def key(n):
        m = _AXIS_RE.match(n)
        if m:
            return (_PREFIX_RANK[m.group(1)], int(m.group(2)), n)
        return (3, 0, n)

    return tuple(sorted(names, key=key))


def _as_resolution(resolution, naxes: int) -> Tuple[int, ...]:
    if isinstance(resolution, (int, np.integer)):
        res = (int(resolution),) * naxes
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != naxes:
        raise CubicalError(f"resolution has {len(res)} axes, box has {naxes}")
    for r in res:
        if r < 2:
            raise CubicalError("resolution >= 2 per axis required")
    return res


def _as_box(box) -> Tuple[Tuple[float, float], ...]:
    out = []
    for pair in box:
        lo, hi = float(pair[0]), float(pair[1])
        if not lo < hi:
            raise CubicalError(f"degenerate box interval ({lo}, {hi})")
        out.append((lo, hi))
    return tuple(out)


@dataclass(frozen=True)
class ScalarField:
    box: Tuple[Tuple[float, float], ...]
    resolution: Tuple[int, ...]
    values: np.ndarray
    axes: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "box", _as_box(self.box))
        object.__setattr__(self, "resolution",
                           _as_resolution(self.resolution, len(self.box)))
        object.__setattr__(self, "axes", tuple(self.axes))
        if len(self.axes) != len(self.box):
            raise CubicalError("one axis name per box interval required")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.resolution:
            raise CubicalError(
                f"values shape {vals.shape} does not match resolution {self.resolution}")
        if not np.all(np.isfinite(vals)):
            idx = tuple(int(i) for i in np.argwhere(~np.isfinite(vals))[0])
            loc = tuple(self.grid_axis(a)[idx[a]] for a in range(len(idx)))
            raise CubicalError(f"non-finite value at vertex {loc}")
        object.__setattr__(self, "values", vals)

    def grid_axis(self, a: int) -> np.ndarray:
        lo, hi = self.box[a]
        return np.linspace(lo, hi, self.resolution[a])

    def spacing(self) -> Tuple[float, ...]:
        return tuple((hi - lo) / (r - 1)
                     for (lo, hi), r in zip(self.box, self.resolution))

    def to_csv(self, path) -> None:
        header = {"box": [list(b) for b in self.box],
                  "resolution": list(self.resolution),
                  "axes": list(self.axes)}
        with open(path, "w") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for v in self.values.ravel(order="C"):
                fh.write(repr(float(v)) + "\n")

    @classmethod
    def from_csv(cls, path) -> "ScalarField":
        with open(path) as fh:
            header = json.loads(fh.readline())
            vals = np.array([float(line) for line in fh if line.strip()])
        res = tuple(header["resolution"])
        return cls(box=tuple(tuple(b) for b in header["box"]),
                   resolution=res,
                   values=vals.reshape(res, order="C"),
                   axes=tuple(header["axes"]))


def _grid_env(box, resolution, axes):
    coords = [np.linspace(lo, hi, r) for (lo, hi), r in zip(box, resolution)]
    mesh = np.meshgrid(*coords, indexing="ij")
    return {name: arr for name, arr in zip(axes, mesh)}


def sample(expr: Expr, box, resolution, axes: Optional[Sequence[str]] = None) -> ScalarField:
    box = _as_box(box)
    if axes is None:
        axes = canonical_axes(expr.variables())
        if len(axes) != len(box):
            raise CubicalError(
                f"expression has variables {list(axes)} but box has {len(box)} axes")
    axes = tuple(axes)
    resolution = _as_resolution(resolution, len(box))
    extra = expr.variables() - set(axes)
    if extra:
        raise CubicalError(f"expression variables {sorted(extra)} not among axes {list(axes)}")
    env = _grid_env(box, resolution, axes)
    vals = np.broadcast_to(expr.evaluate(env), resolution).astype(np.float64)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        loc = tuple(float(env[a][idx]) for a in axes)
        raise CubicalError(f"expression not finite at vertex {loc}")
    return ScalarField(box=box, resolution=resolution, values=vals, axes=axes)


# ---------------------------------------------------------------------------
# doubled grid and window


def doubled_values(values: np.ndarray) -> np.ndarray:
    """Cell values on the doubled grid: max over the cell's vertex corners."""
    out = np.asarray(values, dtype=np.float64)
    nd = out.ndim
    for a in range(nd):
        n = out.shape[a]
        shp = list(out.shape)
        shp[a] = 2 * n - 1
        dbl = np.empty(shp, dtype=np.float64)
        even = [slice(None)] * nd
        even[a] = slice(0, None, 2)
        odd = [slice(None)] * nd
        odd[a] = slice(1, None, 2)
        lo = [slice(None)] * nd
        lo[a] = slice(0, n - 1)
        hi = [slice(None)] * nd
        hi[a] = slice(1, n)
        dbl[tuple(even)] = out
        dbl[tuple(odd)] = np.maximum(out[tuple(lo)], out[tuple(hi)])
        out = dbl
    return out


def _cell_dims(shape) -> np.ndarray:
    """Cell dimension (number of odd coordinates) for every doubled-grid index."""
    dims = np.zeros((), dtype=np.int8)
    for n in shape:
        par = (np.arange(n, dtype=np.int8) & 1)
        dims = dims[..., None] + par
    return dims


# the shrink kernels exist twice: a numba version for large grids and a
# plain-python twin used as a cross-check and as the fallback

def _counts_py(active, shape, strides):
    n = active.size
    d = len(shape)
    fcnt = np.zeros(n, dtype=np.int16)
    ccnt = np.zeros(n, dtype=np.int16)
    for i in range(n):
        if not active[i]:
            continue
        rem = i
        for a in range(d):
            c = rem // strides[a]
            rem -= c * strides[a]
            if c & 1:
                if active[i - strides[a]]:
                    fcnt[i] += 1
                if active[i + strides[a]]:
                    fcnt[i] += 1
            else:
                if c > 0 and active[i - strides[a]]:
                    ccnt[i] += 1
                if c < shape[a] - 1 and active[i + strides[a]]:
                    ccnt[i] += 1
    return fcnt, ccnt


def _pass_py(active, fcnt, ccnt, shape, strides, queue, phase):
    n = active.size
    d = len(shape)
    cnt = fcnt if phase == 0 else ccnt
    tail = 0
    for i in range(n):
        if active[i] and cnt[i] == 1:
            queue[tail] = i
            tail += 1
    head = 0
    removed = 0
    while head < tail:
        b = queue[head]
        head += 1
        if not active[b] or cnt[b] != 1:
            continue
        partner = -1
        rem = b
        for a in range(d):
            c = rem // strides[a]
            rem -= c * strides[a]
            if phase == 0:
                if c & 1:
                    if active[b - strides[a]]:
                        partner = b - strides[a]
                    if active[b + strides[a]]:
                        partner = b + strides[a]
            else:
                if not (c & 1):
                    if c > 0 and active[b - strides[a]]:
                        partner = b - strides[a]
                    if c < shape[a] - 1 and active[b + strides[a]]:
                        partner = b + strides[a]
        active[b] = 0
        active[partner] = 0
        removed += 2
        for t in range(2):
            x = b if t == 0 else partner
            rem = x
            for a in range(d):
                c = rem // strides[a]
                rem -= c * strides[a]
                if c & 1:
                    for f in (x - strides[a], x + strides[a]):
                        if active[f]:
                            ccnt[f] -= 1
                            if phase == 1 and ccnt[f] == 1:
                                queue[tail] = f
                                tail += 1
                else:
                    if c > 0 and active[x - strides[a]]:
                        fcnt[x - strides[a]] -= 1
                        if phase == 0 and fcnt[x - strides[a]] == 1:
                            queue[tail] = x - strides[a]
                            tail += 1
                    if c < shape[a] - 1 and active[x + strides[a]]:
                        fcnt[x + strides[a]] -= 1
                        if phase == 0 and fcnt[x + strides[a]] == 1:
                            queue[tail] = x + strides[a]
                            tail += 1
    return removed


if _HAVE_NUMBA:
    _counts_nb = njit(cache=True)(_counts_py)
    _pass_nb = njit(cache=True)(_pass_py)


def _shrink(active, shape, strides, engine):
    counts = _counts_nb if engine == "numba" else _counts_py
    one_pass = _pass_nb if engine == "numba" else _pass_py
    fcnt, ccnt = counts(active, shape, strides)
    queue = np.empty(2 * active.size + 16, dtype=np.int64)
    while True:
        removed = one_pass(active, fcnt, ccnt, shape, strides, queue, 0)
        removed += one_pass(active, fcnt, ccnt, shape, strides, queue, 1)
        if not removed:
            return


def _core_ranks(active, dims_flat, shape, strides):
    core = np.nonzero(active)[0]
    pos: Dict[int, int] = {}
    by_dim: Dict[int, List[int]] = {}
    for i in core:
        i = int(i)
        by_dim.setdefault(int(dims_flat[i]), []).append(i)
    for k in by_dim:
        for j, i in enumerate(by_dim[k]):
            pos[i] = j
    counts = {k: len(v) for k, v in by_dim.items()}
    ranks: Dict[int, int] = {}
    d = len(shape)
    for k in sorted(by_dim):
        if k - 1 not in by_dim and k != 0:
            ranks[k] = 0
            continue
        ech = Echelon()
        for i in by_dim[k]:
            mask = 0
            rem = i
            for a in range(d):
                c = rem // strides[a]
                rem -= c * strides[a]
                if c & 1:
                    for f in (i - strides[a], i + strides[a]):
                        if active[f]:
                            mask ^= 1 << pos[f]
            ech.insert(mask)
        ranks[k] = len(ech.pivots)
    out = {}
    for k, n in counts.items():
        b = n - ranks.get(k, 0) - ranks.get(k + 1, 0)
        if b:
            out[k] = b
    return out


def relative_homology(field: ScalarField, eps: float, omega: float,
                      engine: str = "auto") -> GHTable:
    """Ranks of H_*(sublevel(omega), sublevel(eps); Z/2), raw cubical degrees."""
    if not eps < omega:
        raise CubicalError(f"eps < omega required, got eps={eps}, omega={omega}")
    if engine == "auto":
        engine = "numba" if _HAVE_NUMBA else "python"
    if engine not in ("numba", "python"):
        raise CubicalError(f"unknown engine {engine!r}")
    if engine == "numba" and not _HAVE_NUMBA:  # pragma: no cover
        raise CubicalError("numba engine requested but numba is unavailable")
    pooled = doubled_values(field.values)
    shape = np.array(pooled.shape, dtype=np.int64)
    strides = np.array([s // pooled.itemsize for s in pooled.strides], dtype=np.int64)
    active = ((pooled > eps) & (pooled <= omega)).ravel().astype(np.uint8)
    if not active.any():
        return GHTable({})
    _shrink(active, shape, strides, engine)
    dims_flat = _cell_dims(pooled.shape).ravel()
    return GHTable(_core_ranks(active, dims_flat, shape, strides))


# ---------------------------------------------------------------------------
# critical points


@dataclass(frozen=True)
class CriticalPoint:
    location: Tuple[float, ...]
    value: float
    morse_index: int
    hessian_min_singular_value: float


@dataclass
class CriticalPointReport:
    points: List[CriticalPoint]
    failures: List[Tuple[float, ...]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def values(self) -> List[float]:
        return [p.value for p in self.points]

    def positive_values(self, tol: float = 0.0) -> List[float]:
        return [p.value for p in self.points if p.value > tol]


def _cell_extrema(arr: np.ndarray, op) -> np.ndarray:
    out = arr
    for a in range(arr.ndim):
        nd = out.ndim
        lo = [slice(None)] * nd
        lo[a] = slice(0, out.shape[a] - 1)
        hi = [slice(None)] * nd
        hi[a] = slice(1, out.shape[a])
        out = op(out[tuple(lo)], out[tuple(hi)])
    return out


def _batch_eval(exprs, pts, axes):
    """Evaluate expressions at a (k, d) batch of points, one column each."""
    env = {a: pts[:, i] for i, a in enumerate(axes)}
    k = pts.shape[0]
    return [np.broadcast_to(np.asarray(e.evaluate(env), dtype=np.float64), (k,))
            for e in exprs]


def critical_values(expr: Expr, box, resolution, tol: float = 1e-8,
                    axes=None) -> CriticalPointReport:
    """Newton-refined interior critical points seeded on sign-change cells.

    The Newton step uses the pseudoinverse of the Hessian, so seeds near a
    degenerate (Morse-Bott) critical set converge to the nearest point of
    the set instead of blowing up; such points carry a near-zero hessian
    margin and trigger the degeneracy warning.
    """
    box = _as_box(box)
    axes = canonical_axes(expr.variables()) if axes is None else tuple(axes)
    extra = expr.variables() - set(axes)
    if extra:
        raise CubicalError(f"expression variables {sorted(extra)} not in axes")
    if len(axes) != len(box):
        raise CubicalError(
            f"expression has variables {list(axes)} but box has {len(box)} axes")
    resolution = _as_resolution(resolution, len(box))
    d = len(box)
    grads = gradient(expr, axes)
    hess = hessian(expr, axes)
    env = _grid_env(box, resolution, axes)
    cand = None
    for g in grads:
        gv = np.broadcast_to(g.evaluate(env), resolution)
        change = (_cell_extrema(gv, np.minimum) <= 0) & (_cell_extrema(gv, np.maximum) >= 0)
        cand = change if cand is None else (cand & change)
    coords = [np.linspace(lo, hi, r) for (lo, hi), r in zip(box, resolution)]
    idx = np.argwhere(cand)
    report = CriticalPointReport(points=[])
    if idx.size == 0:
        return report
    seeds = np.stack([0.5 * (coords[a][idx[:, a]] + coords[a][idx[:, a] + 1])
                      for a in range(d)], axis=1)
    diam = float(np.linalg.norm([hi - lo for lo, hi in box]))
    x = seeds.copy()
    alive = np.ones(len(x), dtype=bool)
    converged = np.zeros(len(x), dtype=bool)
    for _ in range(80):
        ids = np.nonzero(alive)[0]
        if ids.size == 0:
            break
        pts = x[ids]
        g = np.stack(_batch_eval(grads, pts, axes), axis=1)
        done = np.max(np.abs(g), axis=1) < 1e-12
        converged[ids[done]] = True
        alive[ids[done]] = False
        ids = ids[~done]
        if ids.size == 0:
            break
        pts, g = pts[~done], g[~done]
        hcols = _batch_eval([hij for row in hess for hij in row], pts, axes)
        h = np.stack(hcols, axis=1).reshape(len(pts), d, d)
        step = (np.linalg.pinv(h, rcond=1e-12) @ g[..., None])[..., 0]
        moved = pts - step
        runaway = np.linalg.norm(moved - seeds[ids], axis=1) > 2.0 * diam
        bad = runaway | ~np.all(np.isfinite(moved), axis=1)
        alive[ids[bad]] = False
        x[ids[~bad]] = moved[~bad]
    for i in np.nonzero(~converged)[0]:
        report.failures.append(tuple(float(v) for v in seeds[i]))
    sol = x[converged]
    if len(sol) == 0:
        return report
    inside = np.ones(len(sol), dtype=bool)
    for a, (lo, hi) in enumerate(box):
        inside &= (sol[:, a] >= lo - tol) & (sol[:, a] <= hi + tol)
    for i in np.nonzero(~inside)[0]:
        seed = seeds[np.nonzero(converged)[0][i]]
        report.warnings.append(
            f"Newton escaped the box from seed {tuple(round(float(v), 6) for v in seed)}")
    sol = sol[inside]
    if len(sol) == 0:
        return report
    vals = _batch_eval([expr], sol, axes)[0]
    hcols = _batch_eval([hij for row in hess for hij in row], sol, axes)
    h = np.stack(hcols, axis=1).reshape(len(sol), d, d)
    eig = np.linalg.eigvalsh(h)
    margins = np.min(np.abs(eig), axis=1)
    indices = np.sum(eig < 0, axis=1)
    pts = [CriticalPoint(tuple(float(v) for v in sol[i]), float(vals[i]),
                         int(indices[i]), float(margins[i]))
           for i in range(len(sol))]
    pts.sort(key=lambda p: (p.value, p.location))
    span = pts[-1].value - pts[0].value if len(pts) > 1 else 0.0
    value_window = 1e-8 * (1.0 + abs(span))
    kept: List[CriticalPoint] = []
    for p in pts:
        dup = False
        for q in reversed(kept):
            if p.value - q.value > value_window:
                break
            if max(abs(a - b) for a, b in zip(p.location, q.location)) <= tol:
                dup = True
                break
        if not dup:
            kept.append(p)
    for p in kept:
        if p.hessian_min_singular_value < tol:
            report.warnings.append(
                f"near-degenerate critical point at {p.location}: "
                f"hessian margin {p.hessian_min_singular_value:.3e}")
    report.points = kept
    return report


# ---------------------------------------------------------------------------
# heuristic box validation


@dataclass(frozen=True)
class BoxReport:
    ok: bool
    tau: float
    offenders: Tuple[Tuple[float, ...], ...]
    note: str = "heuristic box validation"


def validate_box(expr: Expr, box, resolution, eps: float, omega: float,
                 tau: Optional[float] = None, axes=None) -> BoxReport:
    """Check that the near-critical slab stays strictly inside the box.

    The slab is {eps/2 <= f <= 2*omega} intersected with {|grad f| <= tau};
    if it touches the sampling boundary, the box cannot be trusted to
    contain all the topology between the two levels.
    """
    box = _as_box(box)
    axes = canonical_axes(expr.variables()) if axes is None else tuple(axes)
    resolution = _as_resolution(resolution, len(box))
    env = _grid_env(box, resolution, axes)
    vals = np.broadcast_to(expr.evaluate(env), resolution)
    gsq = np.zeros(resolution)
    for g in gradient(expr, axes):
        gv = np.broadcast_to(g.evaluate(env), resolution)
        gsq = gsq + gv * gv
    gnorm = np.sqrt(gsq)
    if tau is None:
        hsq = np.zeros(resolution)
        for row in hessian(expr, axes):
            for hij in row:
                hv = np.broadcast_to(hij.evaluate(env), resolution)
                hsq = hsq + hv * hv
        hmax = float(np.sqrt(hsq).max())
        spacing = max((hi - lo) / (r - 1) for (lo, hi), r in zip(box, resolution))
        tau = 10.0 * spacing * hmax
    slab = (vals >= eps / 2) & (vals <= 2 * omega) & (gnorm <= tau)
    boundary = np.zeros(resolution, dtype=bool)
    for a in range(len(box)):
        sl = [slice(None)] * len(box)
        sl[a] = 0
        boundary[tuple(sl)] = True
        sl[a] = resolution[a] - 1
        boundary[tuple(sl)] = True
    bad = slab & boundary
    offenders = []
    for idx in np.argwhere(bad)[:8]:
        offenders.append(tuple(float(env[a][tuple(idx)]) for a in axes))
    return BoxReport(ok=not bad.any(), tau=float(tau), offenders=tuple(offenders))
