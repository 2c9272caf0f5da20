"""Generating family specs, difference functions, fronts, and GH tables.

A spec carries a closed-form family f(x, e) that agrees with the linear
function A.e outside a declared support box.  The GH pipeline builds the
difference delta(x, e, te) = f(x, te) - f(x, e), locates its critical
values, picks a window (eps, omega) around the positive ones, and reads
the table off the relative homology of the sublevel pair, shifted down
by N+1.
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gfh.cubical import (
    BoxReport,
    CriticalPointReport,
    canonical_axes,
    critical_values,
    relative_homology,
    sample,
    validate_box,
    _as_box,
    _as_resolution,
)
from gfh.expr import Expr, Fun, Pow, Var, add, gradient, parse, sub
from gfh.z2 import GHTable


class GenFamError(ValueError):
    pass


_SHELL_SAMPLES = 240
_SHELL_TOL = 1e-9


def _x_names(n: int) -> Tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(n))


def _e_names(n_fiber: int) -> Tuple[str, ...]:
    return tuple(f"e{i + 1}" for i in range(n_fiber))


def _te_names(n_fiber: int) -> Tuple[str, ...]:
    return tuple(f"te{i + 1}" for i in range(n_fiber))


@dataclass(frozen=True)
class GenFamSpec:
    n: int
    N: int
    expr: Expr
    linear_direction: Tuple[float, ...]
    computation_box: Tuple[Tuple[float, float], ...]
    support_box: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        if self.n < 1 or self.N < 1:
            raise GenFamError("n >= 1 and N >= 1 required")
        expr = self.expr if isinstance(self.expr, Expr) else parse(str(self.expr))
        object.__setattr__(self, "expr", expr)
        a = tuple(float(v) for v in self.linear_direction)
        if len(a) != self.N:
            raise GenFamError(f"linear_direction has {len(a)} entries, N={self.N}")
        if not any(a):
            raise GenFamError("linear_direction must be nonzero")
        object.__setattr__(self, "linear_direction", a)
        cbox = _as_box(self.computation_box)
        sbox = _as_box(self.support_box)
        if len(cbox) != self.n + self.N or len(sbox) != self.n + self.N:
            raise GenFamError(
                f"boxes need {self.n + self.N} intervals (x then e), got "
                f"{len(cbox)} and {len(sbox)}")
        for i, ((sl, sh), (cl, ch)) in enumerate(zip(sbox, cbox)):
            if sl < cl or sh > ch:
                raise GenFamError(
                    f"support_box axis {i} [{sl},{sh}] leaves computation_box [{cl},{ch}]")
        object.__setattr__(self, "computation_box", cbox)
        object.__setattr__(self, "support_box", sbox)
        allowed = set(self.axes())
        extra = expr.variables() - allowed
        if extra:
            raise GenFamError(
                f"spec variables limited to {list(allowed)}, found {sorted(extra)}")
        self._shell_test()

    def axes(self) -> Tuple[str, ...]:
        return _x_names(self.n) + _e_names(self.N)

    def linear_expr(self) -> Expr:
        out: Expr = parse("0")
        for coeff, name in zip(self.linear_direction, _e_names(self.N)):
            if coeff:
                out = add(out, parse(f"{coeff!r} * {name}"))
        return out

    def _shell_test(self):
        rng = np.random.default_rng(0)
        pts: List[np.ndarray] = []
        lo = np.array([b[0] for b in self.computation_box])
        hi = np.array([b[1] for b in self.computation_box])
        slo = np.array([b[0] for b in self.support_box])
        shi = np.array([b[1] for b in self.support_box])
        guard = 0
        while len(pts) < _SHELL_SAMPLES and guard < 200 * _SHELL_SAMPLES:
            guard += 1
            p = lo + (hi - lo) * rng.random(len(lo))
            if np.any(p < slo) or np.any(p > shi):
                pts.append(p)
        if not pts:
            return  # support fills the whole computation box
        pts_arr = np.array(pts)
        env = {a: pts_arr[:, i] for i, a in enumerate(self.axes())}
        f = np.broadcast_to(self.expr.evaluate(env), (len(pts_arr),))
        lin = np.broadcast_to(self.linear_expr().evaluate(env), (len(pts_arr),))
        err = np.abs(f - lin)
        worst = int(np.argmax(err))
        if err[worst] >= _SHELL_TOL:
            loc = tuple(round(float(v), 6) for v in pts_arr[worst])
            raise GenFamError(
                f"outside support_box the family must equal A.e; "
                f"|f - A.e| = {err[worst]:.3e} at {loc}")

    def to_json(self) -> dict:
        return {"n": self.n, "N": self.N, "expr": str(self.expr),
                "linear_direction": list(self.linear_direction),
                "computation_box": [list(b) for b in self.computation_box],
                "support_box": [list(b) for b in self.support_box]}

    @classmethod
    def from_json(cls, blob: dict) -> "GenFamSpec":
        try:
            return cls(n=int(blob["n"]), N=int(blob["N"]), expr=parse(blob["expr"]),
                       linear_direction=tuple(blob["linear_direction"]),
                       computation_box=tuple(tuple(b) for b in blob["computation_box"]),
                       support_box=tuple(tuple(b) for b in blob["support_box"]))
        except KeyError as missing:
            raise GenFamError(f"spec JSON lacks key {missing}")

    @classmethod
    def load(cls, path) -> "GenFamSpec":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def bundled(name: str) -> GenFamSpec:
    """Load a spec file shipped with the package (unknot, stacked_disks)."""
    ref = resources.files("gfh").joinpath(f"specs/{name}.json")
    try:
        text = ref.read_text()
    except FileNotFoundError:
        raise GenFamError(f"no bundled spec named {name!r}")
    return GenFamSpec.from_json(json.loads(text))


def bundled_names() -> Tuple[str, ...]:
    root = resources.files("gfh").joinpath("specs")
    return tuple(sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json")))


# ---------------------------------------------------------------------------
# difference function


@dataclass(frozen=True)
class DifferenceData:
    n: int
    N: int
    expr: Expr
    box: Tuple[Tuple[float, float], ...]
    axes: Tuple[str, ...]


def difference(spec: GenFamSpec) -> DifferenceData:
    """delta(x, e, te) = f(x, te) - f(x, e) on the doubled-fiber box."""
    tilde = _te_names(spec.N)
    clash = spec.expr.variables() & set(tilde)
    if clash:
        raise GenFamError(f"variable names {sorted(clash)} collide with the "
                          f"tilde copies of the fiber variables")
    subs = {e: Var(t) for e, t in zip(_e_names(spec.N), tilde)}
    f_tilde = spec.expr.substitute(subs)
    delta = sub(f_tilde, spec.expr)
    x_box = spec.computation_box[:spec.n]
    e_box = spec.computation_box[spec.n:]
    return DifferenceData(n=spec.n, N=spec.N, expr=delta,
                          box=x_box + e_box + e_box,
                          axes=_x_names(spec.n) + _e_names(spec.N) + tilde)


# ---------------------------------------------------------------------------
# fronts


@dataclass(frozen=True)
class FrontCloud:
    columns: Tuple[str, ...]
    points: np.ndarray  # (k, 2n+1): x, slopes dx f, z = f

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.points:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


# Newton stops at |d_e f| < 1e-12, so over a rank-deficient locus the
# converged samples still show a residual Jacobian of order sqrt(1e-12);
# the cutoff has to sit above that while staying far below the O(1)
# Jacobians of honest fold points.
_RANK_TOL = 1e-5


def legendrian_front(spec: GenFamSpec, resolution) -> FrontCloud:
    """Sample the 1-jet (x, d_x f, f) over the fiber critical set of f.

    Fiber critical points are found per base point by Newton from
    sign-change seeds; the full Jacobian of d_e f must have rank N at every
    sample, otherwise the family does not generate a Legendrian.
    """
    if spec.n > 2:
        raise GenFamError("front export limited to n <= 2")
    res = _as_resolution(resolution, spec.n + spec.N)
    axes = spec.axes()
    xnames, enames = _x_names(spec.n), _e_names(spec.N)
    fiber_grads = gradient(spec.expr, enames)
    base_grads = gradient(spec.expr, xnames)
    env = {a: arr for a, arr in zip(
        axes, np.meshgrid(*[np.linspace(lo, hi, r)
                            for (lo, hi), r in zip(spec.computation_box, res)],
                          indexing="ij"))}
    cand = None
    for g in fiber_grads:
        gv = np.broadcast_to(g.evaluate(env), res)
        lo_ = _cell_min(gv, spec.n)
        hi_ = _cell_max(gv, spec.n)
        change = (lo_ <= 0) & (hi_ >= 0)
        cand = change if cand is None else (cand & change)
    coords = [np.linspace(lo, hi, r) for (lo, hi), r in zip(spec.computation_box, res)]
    idx = np.argwhere(cand)
    if idx.size == 0:
        return FrontCloud(columns=xnames + tuple(f"p{i+1}" for i in range(spec.n)) + ("z",),
                          points=np.empty((0, 2 * spec.n + 1)))
    base = np.stack([coords[a][idx[:, a]] for a in range(spec.n)], axis=1)
    fib = np.stack([0.5 * (coords[spec.n + j][idx[:, spec.n + j]]
                           + coords[spec.n + j][idx[:, spec.n + j] + 1])
                    for j in range(spec.N)], axis=1)
    hess_fiber = [[gi.diff(e) for e in enames] for gi in fiber_grads]
    pts = np.concatenate([base, fib], axis=1)
    alive = np.ones(len(pts), dtype=bool)
    converged = np.zeros(len(pts), dtype=bool)
    for _ in range(60):
        ids = np.nonzero(alive)[0]
        if ids.size == 0:
            break
        envp = {a: pts[ids, i] for i, a in enumerate(axes)}
        g = np.stack([np.broadcast_to(gi.evaluate(envp), (ids.size,))
                      for gi in fiber_grads], axis=1)
        done = np.max(np.abs(g), axis=1) < 1e-12
        converged[ids[done]] = True
        alive[ids[done]] = False
        ids = ids[~done]
        if ids.size == 0:
            break
        g = g[~done]
        envp = {a: pts[ids, i] for i, a in enumerate(axes)}
        h = np.stack([np.broadcast_to(hij.evaluate(envp), (ids.size,))
                      for row in hess_fiber for hij in row], axis=1)
        h = h.reshape(ids.size, spec.N, spec.N)
        step = (np.linalg.pinv(h, rcond=1e-12) @ g[..., None])[..., 0]
        pts[ids, spec.n:] -= step
        offgrid = np.zeros(ids.size, dtype=bool)
        for j in range(spec.N):
            lo, hi = spec.computation_box[spec.n + j]
            span = hi - lo
            col = pts[ids, spec.n + j]
            offgrid |= (col < lo - span) | (col > hi + span)
        alive[ids[offgrid]] = False
    sol = pts[converged]
    keep = np.ones(len(sol), dtype=bool)
    for j in range(spec.N):
        lo, hi = spec.computation_box[spec.n + j]
        keep &= (sol[:, spec.n + j] >= lo) & (sol[:, spec.n + j] <= hi)
    sol = sol[keep]
    if len(sol) == 0:
        return FrontCloud(columns=xnames + tuple(f"p{i+1}" for i in range(spec.n)) + ("z",),
                          points=np.empty((0, 2 * spec.n + 1)))
    envs = {a: sol[:, i] for i, a in enumerate(axes)}
    jac_exprs = [gi.diff(v) for gi in fiber_grads for v in axes]
    jac = np.stack([np.broadcast_to(e.evaluate(envs), (len(sol),))
                    for e in jac_exprs], axis=1).reshape(len(sol), spec.N, len(axes))
    sv = np.linalg.svd(jac, compute_uv=False)
    bad = sv[:, -1] < _RANK_TOL
    if bad.any():
        where = tuple(round(float(v), 6) for v in sol[int(np.nonzero(bad)[0][0])])
        raise GenFamError(
            f"d_e f fails the regular-value test at {where}; "
            f"spec rejected as non-generating")
    slopes = np.stack([np.broadcast_to(g.evaluate(envs), (len(sol),))
                       for g in base_grads], axis=1)
    z = np.broadcast_to(spec.expr.evaluate(envs), (len(sol),))
    cloud = np.concatenate([sol[:, :spec.n], slopes, z[:, None]], axis=1)
    cloud = np.unique(cloud, axis=0)
    return FrontCloud(columns=xnames + tuple(f"p{i+1}" for i in range(spec.n)) + ("z",),
                      points=cloud)


def _cell_min(arr, n_base):
    return _pool(arr, np.minimum)


def _cell_max(arr, n_base):
    return _pool(arr, np.maximum)


def _pool(arr, op):
    out = arr
    for a in range(arr.ndim):
        nd = out.ndim
        lo = [slice(None)] * nd
        lo[a] = slice(0, out.shape[a] - 1)
        hi = [slice(None)] * nd
        hi[a] = slice(1, out.shape[a])
        out = op(out[tuple(lo)], out[tuple(hi)])
    return out


# ---------------------------------------------------------------------------
# GH pipeline


@dataclass
class GHResult:
    table: GHTable
    eps: float
    omega: float
    critical_report: CriticalPointReport
    stability_flags: List[str] = field(default_factory=list)
    box_report: Optional[BoxReport] = None

    def to_json(self) -> dict:
        return {"gh": self.table.to_json(), "eps": self.eps, "omega": self.omega,
                "critical_values": [round(v, 12) for v in self.critical_report.values()],
                "flags": list(self.stability_flags)}


_VALIDATION_RES = 21

# points on the diagonal (chord start == chord end) sit at value 0 but come
# back from Newton as +-1e-16; anything below this is treated as not a chord
def _zero_tol(report: CriticalPointReport) -> float:
    vals = report.values()
    if not vals:
        return 1e-9
    return 1e-9 * (1.0 + abs(max(vals) - min(vals)))


def window(report: CriticalPointReport) -> Tuple[float, float]:
    """eps = half the smallest positive critical value, omega = max + 10% span."""
    pos = report.positive_values(tol=_zero_tol(report))
    if not pos:
        raise GenFamError("no positive critical values")
    vals = report.values()
    span = max(vals) - min(vals)
    return 0.5 * min(pos), max(vals) + 0.1 * span


# chords found along a locally flat direction of the profile stall anywhere
# within ~1e-7 of the true point, so merging needs a radius well above that
_CHORD_TOL = 1e-6


def gh(spec: GenFamSpec, resolution, eps: Optional[float] = None,
       omega: Optional[float] = None) -> GHResult:
    d = difference(spec)
    res = _as_resolution(resolution, len(d.box))
    report = critical_values(d.expr, d.box, res, tol=_CHORD_TOL, axes=d.axes)
    ztol = _zero_tol(report)
    # the diagonal (chord start == chord end) is flat in the swap direction at
    # value 0 for every spec, so degeneracy there carries no information; only
    # degeneracy at an actual chord is worth surfacing
    flags = [w for w in report.warnings if not w.startswith("near-degenerate")]
    flags += [f"near-degenerate chord at value {p.value:.6f}: "
              f"hessian margin {p.hessian_min_singular_value:.3e}"
              for p in report.points
              if p.value > ztol and p.hessian_min_singular_value < _CHORD_TOL]
    if len(flags) > 5:
        flags = flags[:5] + [f"... {len(flags)} warnings total"]
    pos = report.positive_values(tol=ztol)
    if not pos:
        return GHResult(GHTable({}), eps=0.0, omega=0.0, critical_report=report,
                        stability_flags=flags + [
                            "no positive critical values: no Reeb chords inside the box"])
    auto_eps, auto_omega = window(report)
    eps = auto_eps if eps is None else float(eps)
    omega = auto_omega if omega is None else float(omega)
    if any(v <= eps for v in pos):
        raise GenFamError(
            f"critical value {min(pos)} does not clear eps={eps}")
    # on the box boundary the difference function moves at the linear rate
    # ||A|| or faster, so half of it separates near-critical from linear
    tau = 0.5 * float(np.linalg.norm(spec.linear_direction))
    box_rep = validate_box(d.expr, d.box,
                           tuple(min(r, _VALIDATION_RES) for r in res), eps, omega,
                           tau=tau, axes=d.axes)
    if not box_rep.ok:
        raise GenFamError(
            f"box validation failed: near-critical slab touches the boundary at "
            f"{box_rep.offenders[:3]} (tau={box_rep.tau:.3e})")
    f = sample(d.expr, d.box, res, axes=d.axes)
    raw = relative_homology(f, eps, omega)
    table = raw.shift(-(spec.N + 1))
    flags.append("heuristic box validation passed")
    return GHResult(table, eps=eps, omega=omega, critical_report=report,
                    stability_flags=flags, box_report=box_rep)


@dataclass
class StabilityReport:
    base: GHResult
    tables: Dict[str, GHTable]
    discrepancies: List[str]

    def ok(self) -> bool:
        return not self.discrepancies

    def to_json(self) -> dict:
        return {"base": self.base.table.to_json(),
                "runs": {k: t.to_json() for k, t in self.tables.items()},
                "discrepancies": list(self.discrepancies)}


def _doubled_box_spec(spec: GenFamSpec) -> GenFamSpec:
    grown = tuple((0.5 * (lo + hi) - (hi - lo), 0.5 * (lo + hi) + (hi - lo))
                  for lo, hi in spec.computation_box)
    return GenFamSpec(n=spec.n, N=spec.N, expr=spec.expr,
                      linear_direction=spec.linear_direction,
                      computation_box=grown, support_box=spec.support_box)


def stability(spec: GenFamSpec, resolution) -> StabilityReport:
    """Rerun gh at doubled resolution, doubled box (same spacing), and an
    alternate admissible window; report any rank discrepancies."""
    d = difference(spec)
    res = _as_resolution(resolution, len(d.box))
    base = gh(spec, res)
    runs: Dict[str, GHTable] = {}
    dbl_res = tuple(2 * r - 1 for r in res)
    runs["doubled_resolution"] = gh(spec, dbl_res).table
    runs["doubled_box"] = gh(_doubled_box_spec(spec), dbl_res).table
    vals = base.critical_report.values()
    pos = base.critical_report.positive_values(tol=_zero_tol(base.critical_report))
    if pos:
        span = max(vals) - min(vals)
        alt = (0.75 * min(pos), max(vals) + 0.25 * span)
        runs["alternate_window"] = gh(spec, res, eps=alt[0], omega=alt[1]).table
    discrepancies = [name for name, t in runs.items() if t != base.table]
    return StabilityReport(base=base, tables=runs, discrepancies=discrepancies)


# ---------------------------------------------------------------------------
# spinning


def spin_spec(spec: GenFamSpec, m: int) -> GenFamSpec:
    """Revolve the last base variable: x_n := sqrt(x_n^2 + ... + x_{n+m}^2).

    Requires the declared support to sit inside {x_n > 1/2} so the square
    root stays smooth on the support region.
    """
    if m < 1:
        raise GenFamError("m >= 1 required")
    lo, hi = spec.support_box[spec.n - 1]
    if lo <= 0.5:
        raise GenFamError(
            f"support touches x{spec.n} = {lo} <= 1/2; spinning needs support "
            f"inside the half-space x{spec.n} > 1/2")
    last = f"x{spec.n}"
    radial: Expr = Pow(Var(last), 2)
    for i in range(m):
        radial = add(radial, Pow(Var(f"x{spec.n + 1 + i}"), 2))
    rho = Fun("sqrt", radial)
    new_expr = spec.expr.substitute({last: rho})
    comp_hi = spec.computation_box[spec.n - 1][1]
    supp_hi = hi
    new_comp = (spec.computation_box[:spec.n - 1]
                + tuple((-comp_hi, comp_hi) for _ in range(m + 1))
                + spec.computation_box[spec.n:])
    new_supp = (spec.support_box[:spec.n - 1]
                + tuple((-supp_hi, supp_hi) for _ in range(m + 1))
                + spec.support_box[spec.n:])
    return GenFamSpec(n=spec.n + m, N=spec.N, expr=new_expr,
                      linear_direction=spec.linear_direction,
                      computation_box=new_comp, support_box=new_supp)
