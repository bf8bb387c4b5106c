"""Solution branches in the (alpha, u(alpha)) plane.

Each grid value of alpha contributes the roots of the matching equations;
roots are linked into branches by continuation within a crossing pair
{2k+1, 2k+2} (labels may switch inside a pair at the tangency), and branch
ends are paired into junctions (turning points or bifurcation points) to
group branches into connected components.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import ProblemParams, band_index, derive_constants
from .matching import StaleRoot, build_profile, scan_roots
from .numerics import DEFAULT_TOLERANCES, Tolerances, brackets_from_samples, find_root
from .records import DOMAIN_D1, DOMAIN_D2
from .timemaps import CurveOrbitGeometry

ODD = "bifurcation"
EVEN = "turning point"
FOLD = "turning point"
BRANCH_POINT = "bifurcation"
RELINK = "relinked"

START_ALPHA0 = "reaches alpha = 0"
END_TAIL = "tail toward alpha = 1/2"
OPEN_END = "open"

_CRIT_N = 48  # alpha samples for locating critical values
_CRIT_SCAN = 40  # departure-curve scan size when only the tangency is needed


class CriticalNotPresent(ValueError):
    """The defining equation of a critical alpha has no admissible root."""


class LinkageWarning(UserWarning):
    pass


# critical values ------------------------------------------------------------

def _geometry(params, alpha, tol, n_scan=_CRIT_SCAN):
    return CurveOrbitGeometry(params.with_alpha(alpha), tol, n_scan)


def _supremum_root(f, tol, lo=0.002, hi=0.498, n=_CRIT_N):
    """Largest a such that f < 0 on (0, a): first upward crossing on a grid, refined.

    Returns (root, other sign changes seen on the grid).
    """
    grid = np.linspace(lo, hi, n)
    vals = np.array([f(a) for a in grid])
    if not vals[0] < 0.0:
        # the set may be very short; look closer to zero before giving up
        fine = np.geomspace(1e-5, lo, 12)
        fv = np.array([f(a) for a in fine])
        if not fv[0] < 0.0:
            raise CriticalNotPresent("defining function is not negative near alpha = 0")
        grid, vals = np.concatenate([fine, grid[1:]]), np.concatenate([fv, vals[1:]])
    cells = brackets_from_samples(grid, vals)
    if not cells:
        raise CriticalNotPresent("defining function has no sign change in (0, 1/2)")
    lo_c, hi_c = cells[0]
    root = find_root(f, lo_c, hi_c, tol.root_tol)
    others = [0.5 * (a + b) for a, b in cells[1:]]
    return root, others


@dataclass(frozen=True)
class Critical:
    kind: str
    index: int          # the k in alpha_k
    alpha: float
    residual: float
    others: tuple = ()  # further sign changes of the defining function

    def as_dict(self):
        return {"kind": self.kind, "index": self.index, "alpha": self.alpha,
                "residual": self.residual, "other_crossings": list(self.others)}


def _odd_function(j, params, tol):
    def f(a):
        g = _geometry(params, a, tol)
        return float(g.schedule(g.x_t).tau_j(2 * j + 1) - (1.0 - 2.0 * a))
    return f


def detect_odd_critical(j: int, params: ProblemParams, tol: Tolerances = DEFAULT_TOLERANCES) -> Critical:
    """alpha_{2j+1}: where tau_{2j+1} at the tangency point first reaches 1 - 2*alpha."""
    if not params.is_symmetric:
        raise ValueError("critical values are defined for symmetric weights")
    f = _odd_function(j, params, tol)
    root, others = _supremum_root(f, tol)
    return Critical(ODD, 2 * j + 1, root, abs(f(root)), tuple(others))


def _theta_values(geometry, j, s):
    table = geometry.schedule_s(s)
    return 2.0 * table.ax + 2.0 * j * table.half


def _theta_grid(geometry):
    left = geometry.left
    return np.unique(np.concatenate([left.domain_grid(DOMAIN_D1), left.domain_grid(DOMAIN_D2)]))


def theta_min(j: int, geometry: CurveOrbitGeometry) -> tuple[float, float]:
    """Minimum over the closed-orbit departure points of 2A(x) + j*tau(x), as (value, x)."""
    s = _theta_grid(geometry)
    vals = _theta_values(geometry, j, s)
    i = int(np.nanargmin(vals))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]

    def g(q):
        return float(_theta_values(geometry, j, [q])[0])

    res = optimize.minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13 * hi})
    best = min((res.fun, res.x), (vals[i], s[i]))
    x = float(geometry.left.energy_at(best[1])[0])
    return float(best[0]), x


def theta_roots(j: int, params: ProblemParams, tol: Tolerances = DEFAULT_TOLERANCES) -> list[float]:
    """Departure abscissae solving 2A(x) + j*tau(x) = 1 - 2*alpha."""
    geometry = CurveOrbitGeometry(params, tol)
    target = 1.0 - 2.0 * params.alpha
    s = _theta_grid(geometry)
    v = _theta_values(geometry, j, s) - target
    out = []
    cells = brackets_from_samples(s, v)
    i = int(np.nanargmin(v))
    if not cells and 0 < i < len(s) - 1:
        # a shallow dip between two samples
        val, x_min = theta_min(j, geometry)
        if val < target:
            s_min = geometry.left.curve.s_of_x(x_min)
            cells = [(s[i - 1], s_min), (s_min, s[i + 1])]
    for lo, hi in cells:
        r = find_root(lambda q: float(_theta_values(geometry, j, [q])[0] - target), lo, hi,
                      tol.root_tol * hi)
        out.append(float(geometry.left.energy_at(r)[0]))
    return sorted(out)


def detect_even_critical(j: int, params: ProblemParams, tol: Tolerances = DEFAULT_TOLERANCES) -> Critical:
    """alpha_{2j}: where min over x of 2A(x) + j*tau(x) last reaches 1 - 2*alpha."""
    if not params.is_symmetric:
        raise ValueError("critical values are defined for symmetric weights")
    if j < 1:
        raise ValueError("j must be positive")

    def g(a):
        return theta_min(j, _geometry(params, a, tol, 120))[0] - (1.0 - 2.0 * a)

    root, others = _supremum_root(g, tol)
    return Critical(EVEN, 2 * j, root, abs(g(root)), tuple(others))


@dataclass
class CriticalAlphas:
    odd: list = field(default_factory=list)   # alpha_1, alpha_3, ...
    even: list = field(default_factory=list)  # alpha_2, alpha_4, ...
    missing: list = field(default_factory=list)

    def value(self, k):
        for c in self.odd + self.even:
            if c.index == k:
                return c.alpha
        raise KeyError(k)

    def all(self):
        return sorted(self.odd + self.even, key=lambda c: c.index)

    def smallest(self):
        vals = [c.alpha for c in self.odd + self.even]
        return min(vals) if vals else 0.5

    def as_dict(self):
        return {"criticals": [c.as_dict() for c in self.all()], "missing": list(self.missing)}


def critical_alphas(params: ProblemParams, tol: Tolerances = DEFAULT_TOLERANCES) -> CriticalAlphas:
    """All criticals whose defining sets are nonempty for the band of lambda."""
    n = band_index(params.lam, params.p)
    out = CriticalAlphas()
    for j in range((n + 1) // 2):
        try:
            out.odd.append(detect_odd_critical(j, params, tol))
        except CriticalNotPresent:
            out.missing.append(2 * j + 1)
    for j in range(1, n // 2 + 1):
        try:
            out.even.append(detect_even_critical(j, params, tol))
        except CriticalNotPresent:
            out.missing.append(2 * j)
    return out


def smallest_critical(params: ProblemParams, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    return critical_alphas(params, tol).smallest()


# sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaGrid:
    alpha_min: float = 0.002
    alpha_max: float = 0.498
    steps: int = 200
    window: float = 0.01
    density: int = 10
    # finer bisection hits the noise floor of the maps next to the tangency
    junction_tol: float = 1e-5
    extra: tuple = (0.40, 0.45, 0.49)

    def __post_init__(self):
        if not 0.0 < self.alpha_min < self.alpha_max < 0.5:
            raise ValueError("alpha grid must satisfy 0 < alpha_min < alpha_max < 1/2")
        if self.steps < 2:
            raise ValueError("alpha grid needs at least two steps")

    @property
    def step(self):
        return (self.alpha_max - self.alpha_min) / (self.steps - 1)

    def base(self):
        extra = [a for a in self.extra if self.alpha_min <= a <= self.alpha_max]
        return np.unique(np.concatenate([np.linspace(self.alpha_min, self.alpha_max, self.steps), extra]))

    def windows(self, centers):
        fine = self.step / self.density
        pts = []
        for c in centers:
            lo = max(self.alpha_min, c - self.window)
            hi = min(self.alpha_max, c + self.window)
            pts.append(np.arange(lo, hi, fine))
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)


@dataclass(frozen=True)
class Sample:
    alpha: float
    x: float
    j: int
    domain: str
    validated: bool = True
    failures: tuple = ()
    oracle_floor: float | None = None

    @property
    def pair(self):
        return (self.j - 1) // 2


@dataclass
class Branch:
    id: int
    samples: list = field(default_factory=list)
    start: str = OPEN_END
    end: str = OPEN_END

    @property
    def pair(self):
        return self.samples[0].pair

    @property
    def alpha_range(self):
        return self.samples[0].alpha, self.samples[-1].alpha

    def x_at(self, alpha):
        """Linear interpolation of the branch in alpha (NaN outside its range)."""
        a = np.array([s.alpha for s in self.samples])
        x = np.array([s.x for s in self.samples])
        if not a[0] <= alpha <= a[-1]:
            return math.nan
        return float(np.interp(alpha, a, x))

    def as_dict(self):
        return {"id": self.id, "start": self.start, "end": self.end, "pair": self.pair,
                "n_samples": len(self.samples), "alpha_range": list(self.alpha_range)}


@dataclass(frozen=True)
class Junction:
    kind: str
    alpha: float
    x: float
    branches: tuple

    def as_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "x": self.x, "branches": list(self.branches)}


@dataclass
class BifurcationDiagram:
    params: ProblemParams
    levels: np.ndarray
    branches: list
    junctions: list
    components: list            # lists of branch ids
    criticals: CriticalAlphas
    principal: int | None
    band: int
    warnings: list = field(default_factory=list)
    reference_components: int | None = None

    @property
    def n_components(self):
        return len(self.components)

    @property
    def expected_components(self):
        return self.band // 2 + 1

    @property
    def case(self):
        n = self.band
        if n <= 1:
            return f"n = {n}"
        return f"odd n = 2k+1, k = {n // 2}" if n % 2 else f"even n = 2k, k = {n // 2}"

    @property
    def pattern_met(self):
        """At least the minimal component structure for the band."""
        return self.n_components >= self.expected_components and self.principal is not None

    @property
    def separated(self):
        if self.reference_components is None:
            return None
        return self.n_components > self.reference_components

    def samples(self):
        return [s for b in self.branches for s in b.samples]

    def counts(self):
        """Number of roots found at every alpha level."""
        c = Counter(s.alpha for s in self.samples())
        return {float(a): c.get(a, 0) for a in self.levels}

    def component_of(self, branch_id):
        for i, comp in enumerate(self.components):
            if branch_id in comp:
                return i
        raise KeyError(branch_id)

    def all_validated(self):
        return all(s.validated for s in self.samples())

    def classification(self):
        return {"band": self.band, "case": self.case, "components": self.n_components,
                "expected_at_least": self.expected_components, "pattern": "at least" if self.pattern_met
                else "not met", "principal_branch": self.principal,
                "reference_components": self.reference_components, "separated": self.separated}


def _components_of(n, edges):
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


class _Sweep:
    def __init__(self, params, grid, tol, validate):
        self.params, self.grid, self.tol, self.validate = params, grid, tol, validate
        self.levels = {}
        self.warnings = []
        c = derive_constants(params)
        self.omega, self.u_h = c.omega, c.u_h

    def level(self, alpha):
        alpha = float(alpha)
        if alpha not in self.levels:
            p = self.params.with_alpha(alpha)
            geometry = CurveOrbitGeometry(p, self.tol)
            roots = scan_roots(p, geometry, self.tol).roots
            out = []
            for s, x, j, dom in roots:
                ok, why, floor = True, (), None
                if self.validate:
                    try:
                        res = build_profile(x, j, p, 201, geometry, self.tol, dom).residuals
                        why, floor = tuple(res.failures()), res.oracle_floor
                    except StaleRoot:
                        why = ("stale root",)
                    except FloatingPointError:
                        why = ("blow-up",)
                    ok = not why
                out.append(Sample(alpha, float(x), int(j), dom, ok, why, floor))
            self.levels[alpha] = out
        return self.levels[alpha]

    def signature(self, alpha):
        return tuple(sorted(Counter(s.pair for s in self.level(alpha)).items()))

    def resolve(self):
        """Bisect every interval across which the per-pair root counts change."""
        changes = []
        while True:
            alphas = sorted(self.levels)
            todo = []
            for a, b in zip(alphas[:-1], alphas[1:]):
                if self.signature(a) != self.signature(b):
                    if b - a > self.grid.junction_tol:
                        todo.append(0.5 * (a + b))
                    else:
                        changes.append(0.5 * (a + b))
            if not todo:
                return sorted(set(changes))
            for m in todo:
                self.level(m)
            changes = []

    def run(self):
        for a in self.grid.base():
            self.level(a)
        centres = self.resolve()
        for a in self.grid.windows(centres):
            self.level(a)
        self.resolve()
        return np.array(sorted(self.levels))


def _link(levels, per_level, omega, u_h, warn):
    """Continue roots between consecutive levels inside each crossing pair."""
    slope_floor = 2.0 * u_h
    branches = []
    open_at = {}  # index in current level -> branch
    for li, a in enumerate(levels):
        cur = per_level[li]
        new_open = {}
        if li == 0:
            for i, s in enumerate(cur):
                b = Branch(len(branches), [s], START_ALPHA0)
                branches.append(b)
                new_open[i] = b
            open_at = new_open
            continue
        prev = per_level[li - 1]
        da = a - levels[li - 1]
        matched_cur = set()
        for k in {s.pair for s in prev} | {s.pair for s in cur}:
            ip = [i for i, s in enumerate(prev) if s.pair == k and i in open_at]
            ic = [i for i, s in enumerate(cur) if s.pair == k]
            if not ip or not ic:
                continue
            cost = np.array([[abs(prev[p].x - cur[c].x) for c in ic] for p in ip])
            rows, cols = optimize.linear_sum_assignment(cost)
            for r, c in zip(rows, cols):
                br = open_at[ip[r]]
                step = slope_floor * da
                if len(br.samples) >= 2:
                    s1, s2 = br.samples[-2], br.samples[-1]
                    dx, da_prev = abs(s2.x - s1.x), s2.alpha - s1.alpha
                    # secant prediction, or square-root scaling next to a fold
                    step = max(step, dx / da_prev * da, dx * math.sqrt(da / da_prev))
                bound = 5.0 * step + 1e-6 * u_h
                if cost[r, c] <= bound or _isolated(cost, r, c, 0.1 * u_h):
                    br.samples.append(cur[ic[c]])
                    new_open[ic[c]] = br
                    matched_cur.add(ic[c])
                else:
                    warn(f"step rejected at alpha={a:.9g}: |dx|={cost[r, c]:.3g} > {bound:.3g}")
        for i, s in enumerate(cur):
            if i not in matched_cur:
                b = Branch(len(branches), [s])
                branches.append(b)
                new_open[i] = b
        open_at = new_open
    return branches


def _isolated(cost, r, c, cap):
    """A match that is mutually nearest and five times closer than any alternative."""
    d = cost[r, c]
    if d > cap:
        return False
    others = np.concatenate([np.delete(cost[r, :], c), np.delete(cost[:, c], r)])
    return not others.size or d * 5.0 <= others.min()


def _junctions(branches, levels, x_tol):
    """Pair up interior branch ends; returns (junctions, union edges)."""
    index = {a: i for i, a in enumerate(levels)}
    at_level = {}
    for b in branches:
        for s in b.samples:
            at_level.setdefault(index[s.alpha], []).append((b.id, s.x))
    last = len(levels) - 1
    edges, junctions = [], []
    seen = set()

    def handle(b, li, neighbour_li, x, is_end):
        here = [(bid, xx) for bid, xx in at_level.get(li, []) if bid != b.id]
        there = [(bid, xx) for bid, xx in at_level.get(neighbour_li, [])]
        through = {bid for bid, _ in here} & {bid for bid, _ in there}
        near_through = sorted((abs(xx - x), bid) for bid, xx in here + there
                              if bid in through and abs(xx - x) <= x_tol)
        if near_through:
            other = near_through[0][1]
            return BRANCH_POINT, [other]
        # another branch ending (or starting) at the same level
        same = sorted((abs(xx - x), bid) for bid, xx in here
                      if bid not in through and abs(xx - x) <= x_tol
                      and _ends_at(branches[bid], levels[li], is_end))
        if same:
            return FOLD, [same[0][1]]
        # a fresh branch on the other side continuing this one (split linkage)
        cont = sorted((abs(xx - x), bid) for bid, xx in there
                      if bid not in through and abs(xx - x) <= x_tol
                      and _ends_at(branches[bid], levels[neighbour_li], not is_end))
        if cont:
            return RELINK, [cont[0][1]]
        return None, []

    for b in branches:
        first, final = index[b.samples[0].alpha], index[b.samples[-1].alpha]
        if final == last:
            b.end = END_TAIL
        else:
            kind, others = handle(b, final, final + 1, b.samples[-1].x, True)
            if kind:
                b.end = kind
                for o in others:
                    edges.append((b.id, o))
                    key = (kind, min(b.id, o), max(b.id, o), final)
                    if key not in seen:
                        seen.add(key)
                        junctions.append(Junction(kind, 0.5 * (levels[final] + levels[final + 1]),
                                                  b.samples[-1].x, (b.id, o)))
        if first == 0:
            b.start = START_ALPHA0
        else:
            kind, others = handle(b, first, first - 1, b.samples[0].x, False)
            if kind:
                b.start = kind
                for o in others:
                    edges.append((b.id, o))
                    key = (kind, min(b.id, o), max(b.id, o), first - 1)
                    if key not in seen and kind != RELINK:
                        seen.add(key)
                        junctions.append(Junction(kind, 0.5 * (levels[first] + levels[first - 1]),
                                                  b.samples[0].x, (b.id, o)))
    return junctions, edges


def _ends_at(branch, alpha, is_end):
    return (branch.samples[-1].alpha if is_end else branch.samples[0].alpha) == alpha


def _merge_relinks(branches, junctions, edges):
    """Join branches that were split by a rejected step but continue each other."""
    relinks = [(a, b) for a, b in edges
               if branches[a].end == RELINK and branches[b].start == RELINK
               and branches[a].samples[-1].alpha < branches[b].samples[0].alpha]
    absorbed = {}
    for a, b in sorted(relinks, key=lambda e: branches[e[0]].samples[-1].alpha):
        root = a
        while root in absorbed:
            root = absorbed[root]
        head = branches[root]
        head.samples.extend(branches[b].samples)
        head.end = branches[b].end
        absorbed[b] = root
    keep = [b for b in branches if b.id not in absorbed]
    renum = {b.id: i for i, b in enumerate(keep)}

    def new_id(i):
        while i in absorbed:
            i = absorbed[i]
        return renum[i]

    for b in keep:
        b.id = renum[b.id]
    new_edges = [(new_id(a), new_id(b)) for a, b in edges]
    new_edges = [(a, b) for a, b in new_edges if a != b]
    new_junctions = [Junction(j.kind, j.alpha, j.x, tuple(new_id(i) for i in j.branches))
                     for j in junctions if j.kind != RELINK]
    return keep, new_junctions, new_edges


def _principal(branches, levels):
    tails = [b for b in branches if b.samples[-1].alpha == levels[-1] and b.pair == 0]
    if not tails:
        return None
    return max(tails, key=lambda b: b.samples[-1].x).id


def _diagram(params, grid, tol, validate, criticals, reference_components=None):
    sweep = _Sweep(params, grid, tol, validate)
    levels = sweep.run()
    per_level = [sorted(sweep.levels[a], key=lambda s: s.x) for a in levels]
    branch_warnings = []
    branches = _link(levels, per_level, sweep.omega, sweep.u_h, branch_warnings.append)
    x_tol = 2e-2 * sweep.omega
    junctions, edges = _junctions(branches, levels, x_tol)
    branches, junctions, edges = _merge_relinks(branches, junctions, edges)
    for b in branches:
        if b.start == OPEN_END or b.end == OPEN_END:
            branch_warnings.append(f"branch {b.id} has an unresolved end over alpha in "
                                   f"[{b.alpha_range[0]:.9g}, {b.alpha_range[1]:.9g}]")
    for w in branch_warnings:
        warnings.warn(w, LinkageWarning, stacklevel=3)
    components = _components_of(len(branches), edges)
    return BifurcationDiagram(params=params, levels=levels, branches=branches, junctions=junctions,
                              components=components, criticals=criticals,
                              principal=_principal(branches, levels),
                              band=band_index(params.lam, params.p),
                              warnings=sweep.warnings + branch_warnings,
                              reference_components=reference_components)


def sweep_diagram(params: ProblemParams, grid: AlphaGrid = AlphaGrid(),
                  tol: Tolerances = DEFAULT_TOLERANCES, validate: bool = True,
                  criticals: CriticalAlphas | None = None) -> BifurcationDiagram:
    """Branches, junctions and components over the alpha grid.

    For symmetric weights the critical values are located from their defining
    equations; otherwise only the junctions seen by the sweep are reported.
    """
    if criticals is None:
        criticals = critical_alphas(params, tol) if params.is_symmetric else CriticalAlphas()
    return _diagram(params, grid, tol, validate, criticals)


def asymmetric_sweep(params: ProblemParams, grid: AlphaGrid = AlphaGrid(),
                     tol: Tolerances = DEFAULT_TOLERANCES, validate: bool = True,
                     reference: BifurcationDiagram | None = None) -> BifurcationDiagram:
    """Sweep with unequal outer weights, optionally compared with a symmetric reference."""
    ref = reference.n_components if reference is not None else None
    return _diagram(params, grid, tol, validate, CriticalAlphas(), ref)


def restricted_hausdorff(a: BifurcationDiagram, b: BifurcationDiagram, exclude=(), window=0.02):
    """Largest per-level Hausdorff distance in x between two diagrams.

    Only alpha levels present in both diagrams and farther than ``window``
    from every value in ``exclude`` are compared.
    """
    xa, xb = {}, {}
    for d, out in ((a, xa), (b, xb)):
        for s in d.samples():
            out.setdefault(s.alpha, []).append(s.x)
    worst = 0.0
    for alpha in sorted(set(xa) & set(xb)):
        if any(abs(alpha - e) <= window for e in exclude):
            continue
        p, q = np.array(xa[alpha]), np.array(xb[alpha])
        d = np.abs(p[:, None] - q[None, :])
        worst = max(worst, float(d.min(axis=1).max()), float(d.min(axis=0).max()))
    return worst
