"""Frequent Hypercyclicity Criterion for translation semigroups, at desk scale.

The pipeline is

1. :func:`tail_radius` picks, for a compactly supported target y and a
   tolerance eps, a radius beyond which any separated family of backward
   shifts ``S_mu y`` sums to norm < eps;
2. :func:`plan_criterion` turns the targets y_1..y_L into separations
   r_1 <= ... <= r_L and a separated family (A(l, r_l), B(l, r_l));
3. :func:`construct_vector` sums ``S_b y_l`` over b in B(l, r_l), |b| <= horizon,
   and records the tail partial-sum norms;
4. :func:`verify_return`, :func:`orbit_density` and :func:`transition_density`
   measure how the orbit ``T_t x`` comes back to the targets.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .density import (DensityEstimate, PredicateSet, SeparatedFamily, build_separated_family,
                      return_set_density_bound, sector_lower_density, substream)
from .lp_space import (GridFunction, LpContext, backshift, grid_offset, indicator, lincomb,
                       norm, snap, translate_distance)
from .weights import _annulus_integral, integrate_weight


class CriterionInapplicableError(ValueError):
    """The weight integral diverges, so the criterion gives no radii."""


class ConstructionFailedError(RuntimeError):
    def __init__(self, level, subset, value, bound):
        super().__init__(f"tail partial sum at level {level} has norm {value:.6g} > {bound:.6g} "
                         f"(subset {subset})")
        self.level, self.subset, self.value, self.bound = level, subset, value, bound


class VerificationFailedError(RuntimeError):
    def __init__(self, report):
        super().__init__(f"return error {report.max_error:.6g} exceeds {report.bound:.6g} "
                         f"at t={report.worst_point}")
        self.report = report


# ---------------------------------------------------------------------------
# radii
# ---------------------------------------------------------------------------

def cover_multiplicity(y: GridFunction) -> int:
    """N = floor(2 s_y) + 1"""
    return math.floor(2.0 * y.support_radius) + 1


def _tail_function(ctx: LpContext):
    w = ctx.weight
    if w.radial_tail is not None:
        return lambda R: float(w.radial_tail(max(R, 0.0)))
    res = integrate_weight(w)
    if not res.finite:
        raise CriterionInapplicableError(
            f"the integral of weight {w.name!r} over the sector is {res.status}")
    total = res.value
    return lambda R: max(total - _annulus_integral(w, 0.0, R, 1e-10)[0], 0.0) if R > 0 else total


def tail_radius(y: GridFunction, ctx: LpContext, eps: float, _tail=None) -> int:
    """Least integer R >= 1 with G(R - s_y)^(1/p) < eps / (M_y N)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if y.sector.alpha != ctx.sector.alpha:
        raise ValueError("target and context live on different sectors")
    G = _tail if _tail is not None else _tail_function(ctx)
    M = y.sup_norm
    if M == 0.0:
        return 1
    s = y.support_radius
    target = eps / (M * cover_multiplicity(y))

    def ok(R):
        return G(R - s) ** (1.0 / ctx.p) < target

    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > 1 << 40:
            raise CriterionInapplicableError("tail never drops below the tolerance")
    lo = hi // 2  # ok(lo) is false unless hi == 1
    if hi == 1:
        return 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True, eq=False)
class CriterionPlan:
    ctx: LpContext
    targets: tuple
    radii: tuple
    family: SeparatedFamily
    cover_multiplicity: tuple
    digest: str

    @property
    def levels(self) -> int:
        return len(self.targets)

    @property
    def h(self):
        return self.targets[0].h


def _plan_digest(ctx, targets, radii, integer_horizon, point_horizon) -> str:
    doc = {"alpha": ctx.sector.alpha, "p": ctx.p, "weight": ctx.weight.name,
           "targets": [t.to_json() for t in targets], "radii": list(radii),
           "integer_horizon": integer_horizon, "point_horizon": point_horizon}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def plan_criterion(targets: Sequence[GridFunction], ctx: LpContext, integer_horizon: int = 1024,
                   point_horizon: int | None = None) -> CriterionPlan:
    """Separations r_l = max_{j <= l} tail_radius(y_j, 1/(l 2^l)), made nondecreasing.

    For translations T_t S_t y = y exactly, so the return condition on
    T_t S_t y_l - y_l holds with error 0 and imposes nothing further on r_l.
    """
    targets = tuple(targets)
    if not targets:
        raise ValueError("at least one target is required")
    h = targets[0].h
    for y in targets:
        if y.h != h or y.sector.alpha != ctx.sector.alpha:
            raise ValueError("targets must share the context's sector and grid")
    G = _tail_function(ctx)
    radii = []
    for l in range(1, len(targets) + 1):
        eps = 1.0 / (l * 2 ** l)
        r = max(tail_radius(y, ctx, eps, _tail=G) for y in targets[:l])
        radii.append(max(r, radii[-1]) if radii else r)
    if point_horizon is None:
        point_horizon = min(integer_horizon, 1024)
    family = build_separated_family(radii, integer_horizon, ctx.sector, point_horizon=point_horizon)
    return CriterionPlan(ctx, targets, tuple(radii), family,
                         tuple(cover_multiplicity(y) for y in targets),
                         _plan_digest(ctx, targets, radii, integer_horizon, point_horizon))


# ---------------------------------------------------------------------------
# the vector
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FhcVector:
    x: GridFunction
    terms: tuple  # of (b, level, target index), in summation order
    truncation_horizon: float
    plan_digest: str
    bound_ledger: dict = field(default_factory=dict)

    def resum(self, targets) -> GridFunction:
        """Rebuild x from the recorded terms."""
        return _sum_terms(self.terms, targets, self.x.sector, self.x.h)

    def to_json(self) -> dict:
        return {"plan_digest": self.plan_digest, "truncation_horizon": self.truncation_horizon,
                "terms": [{"b": [b.real, b.imag], "level": l, "target": j} for b, l, j in self.terms],
                "x": self.x.to_json()}

    @classmethod
    def from_json(cls, doc) -> "FhcVector":
        if isinstance(doc, str):
            doc = json.loads(doc)
        terms = tuple((complex(*t["b"]), int(t["level"]), int(t["target"])) for t in doc["terms"])
        return cls(GridFunction.from_json(doc["x"]), terms, float(doc["truncation_horizon"]),
                   doc["plan_digest"])


def _sum_terms(terms, targets, sector, h) -> GridFunction:
    if not terms:
        return GridFunction.zero(sector, h)
    parts = [backshift(targets[j - 1], b) for b, _, j in terms]
    return lincomb([1.0] * len(parts), parts)


def _collect_terms(plan: CriterionPlan, horizon: float):
    h = plan.h
    rows = []
    for l in range(1, plan.levels + 1):
        for k, b in enumerate(plan.family.points(l)):
            bs = snap(b, h)
            if abs(bs) <= horizon and plan.ctx.sector.contains(bs):
                rows.append((bs.real, k, bs, l))
    rows.sort(key=lambda r: (r[0], r[3], r[1]))
    return tuple((bs, l, l) for _, _, bs, l in rows)


def construct_vector(plan: CriterionPlan, horizon: float, tail_subsets: int = 8, seed: int = 0,
                     slack: float = 1.1) -> FhcVector:
    """Truncated series x = sum over |b_k| <= horizon of S_{b_k} y_{l(k)}.

    For each level l the norm of several finite sub-sums over terms with
    |b_k| >= r_l (the whole tail, its per-level parts, and ``tail_subsets``
    random halves) is recorded and must stay below (2 / 2^l) * slack.
    """
    terms = _collect_terms(plan, horizon)
    sec, h = plan.ctx.sector, plan.h
    parts = [backshift(plan.targets[j - 1], b) for b, _, j in terms]
    x = lincomb([1.0] * len(parts), parts) if parts else GridFunction.zero(sec, h)

    records = []
    mods = np.array([abs(b) for b, _, _ in terms])
    levels = np.array([l for _, l, _ in terms], dtype=int)
    for l in range(1, plan.levels + 1):
        bound = 2.0 / 2 ** l
        tail = np.nonzero(mods >= plan.radii[l - 1])[0] if len(terms) else np.zeros(0, int)
        subsets = [("tail", tail)]
        for j in range(1, plan.levels + 1):
            subsets.append((f"tail-level-{j}", tail[levels[tail] == j]))
        for s in range(tail_subsets):
            rng = substream(seed, l, s)
            subsets.append((f"random-{s}", tail[rng.random(len(tail)) < 0.5]))
        for name, idx in subsets:
            value = norm(lincomb([1.0] * len(idx), [parts[i] for i in idx]), plan.ctx) if len(idx) else 0.0
            records.append({"level": l, "subset": name, "size": int(len(idx)), "norm": value,
                            "bound": bound, "slack": slack})
            if value > bound * slack:
                raise ConstructionFailedError(l, name, value, bound * slack)

    return FhcVector(x, terms, float(horizon), plan.digest, {"tail_sums": records})


# ---------------------------------------------------------------------------
# orbit experiments
# ---------------------------------------------------------------------------

@dataclass
class ReturnReport:
    level: int
    bound: float
    points: list
    errors: list

    @property
    def max_error(self) -> float:
        return max(self.errors) if self.errors else 0.0

    @property
    def worst_point(self):
        return self.points[int(np.argmax(self.errors))] if self.errors else None

    @property
    def passed(self) -> bool:
        return self.max_error <= self.bound

    def to_json(self):
        return {"level": self.level, "bound": self.bound, "max_error": self.max_error,
                "passed": self.passed,
                "samples": [{"t": [t.real, t.imag], "error": e} for t, e in zip(self.points, self.errors)]}


def verify_return(v: FhcVector, plan: CriterionPlan, level: int, sample_count: int = 64,
                  slack: float = 1.1, raise_on_failure: bool = True) -> ReturnReport:
    """||T_t x - y_l|| for t in B(l, r_l) far enough inside the truncation horizon.

    Raises :class:`VerificationFailedError` when an error exceeds (3 / 2^l) * slack.
    """
    if not 1 <= level <= plan.levels:
        raise ValueError(f"level {level} not in plan")
    y = plan.targets[level - 1]
    reach = v.truncation_horizon - y.support_radius
    cand = [b for b, l, _ in v.terms if l == level and abs(b) <= reach]
    if len(cand) > sample_count:
        idx = np.unique(np.linspace(0, len(cand) - 1, sample_count).round().astype(int))
        cand = [cand[i] for i in idx]
    errors = [translate_distance(v.x, grid_offset(plan.h, t), y, plan.ctx) for t in cand]
    rep = ReturnReport(level, 3.0 / 2 ** level * slack, cand, errors)
    if raise_on_failure and not rep.passed:
        raise VerificationFailedError(rep)
    return rep


def _empty_window_test(x: GridFunction, y: GridFunction):
    """Vectorized test: does x have no cell in the support box of y shifted by (a, b)?

    Uses a summed-area table of the occupied cells of x.
    """
    if not len(y.I):
        return lambda a, b: np.ones(np.shape(a), dtype=bool)
    if not len(x.I):
        return lambda a, b: np.ones(np.shape(a), dtype=bool)
    i0, j0 = int(x.I.min()), int(x.J.min())
    occ = np.zeros((int(x.I.max()) - i0 + 1, int(x.J.max()) - j0 + 1), dtype=np.int32)
    occ[x.I - i0, x.J - j0] = 1
    sat = np.zeros((occ.shape[0] + 1, occ.shape[1] + 1), dtype=np.int64)
    sat[1:, 1:] = occ.cumsum(0).cumsum(1)
    yi0, yi1, yj0, yj1 = int(y.I.min()), int(y.I.max()), int(y.J.min()), int(y.J.max())

    def empty(a, b):
        lo_i = np.clip(yi0 + a - i0, 0, occ.shape[0])
        hi_i = np.clip(yi1 + a - i0 + 1, 0, occ.shape[0])
        lo_j = np.clip(yj0 + b - j0, 0, occ.shape[1])
        hi_j = np.clip(yj1 + b - j0 + 1, 0, occ.shape[1])
        count = sat[hi_i, hi_j] - sat[lo_i, hi_j] - sat[hi_i, lo_j] + sat[lo_i, lo_j]
        return count == 0

    return empty


def _hitting_predicate(v: FhcVector, ctx: LpContext, center: GridFunction, radius: float,
                       base: tuple[int, int] = (0, 0)):
    sec = ctx.sector
    hf = float(v.x.h)
    window = _empty_window_test(v.x, center) if norm(center, ctx) >= radius else None

    def member(xs, ys):
        a = np.rint(xs / hf).astype(np.int64)
        b = np.rint(ys / hf).astype(np.int64)
        ok = sec.contains_xy(a * hf, b * hf)
        if window is not None:
            # no cell of T_t x over the support box of the center: distance >= its norm
            ok &= ~window(a + base[0], b + base[1])
        out = np.zeros(xs.shape, dtype=bool)
        for k in np.nonzero(ok)[0]:
            off = (int(a[k]) + base[0], int(b[k]) + base[1])
            out[k] = translate_distance(v.x, off, center, ctx) < radius
        return out

    return member


@dataclass
class OrbitReport:
    estimate: DensityEstimate
    level: int | None
    delta0: float
    bound: float | None

    def to_json(self):
        return {"level": self.level, "delta0": self.delta0, "bound": self.bound,
                "estimate": self.estimate.to_json()}


def orbit_density(v: FhcVector, plan: CriterionPlan, target: GridFunction, radius: float,
                  horizons: Sequence[float], seed: int, samples: int, workers: int = 1) -> OrbitReport:
    """Density of {t : ||T_t x - target|| < radius}, sampled at grid-snapped points.

    When ``target`` is one of the plan's targets y_l, the closed-form bound
    d_l delta0^2 tan(alpha) / r_l with delta0 = h (one cell) is attached.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if max(horizons) > v.truncation_horizon - target.support_radius:
        raise ValueError("horizon exceeds the truncation horizon of the vector")
    pred = PredicateSet(plan.ctx.sector, _hitting_predicate(v, plan.ctx, target, radius))
    est = sector_lower_density(pred, horizons, seed=seed, samples=samples, workers=workers)
    level = next((l for l, y in enumerate(plan.targets, 1) if y.same_cells(target)), None)
    delta0 = float(plan.h)
    bound = return_set_density_bound(plan.family, level, delta0)[0] if level else None
    return OrbitReport(est, level, delta0, bound)


@dataclass
class TransitionReport:
    status: str  # "estimated" | "inconclusive"
    t0: complex | None
    estimate: DensityEstimate | None

    def to_json(self):
        return {"status": self.status,
                "t0": None if self.t0 is None else [self.t0.real, self.t0.imag],
                "estimate": None if self.estimate is None else self.estimate.to_json()}


def find_hitting_time(v: FhcVector, plan: CriterionPlan, center: GridFunction, radius: float,
                      reach: float):
    """First t0 in (0, then the vector's shift points by modulus) with ||T_t0 x - center|| < radius."""
    cands = [0j] + sorted((b for b, _, _ in v.terms), key=abs)
    for t0 in cands:
        if abs(t0) > reach:
            break
        if translate_distance(v.x, grid_offset(plan.h, t0), center, plan.ctx) < radius:
            return t0
    return None


def transition_density(v: FhcVector, plan: CriterionPlan, U_center: GridFunction, U_radius: float,
                       V_center: GridFunction, V_radius: float, horizons: Sequence[float] | None,
                       seed: int, samples: int, workers: int = 1) -> TransitionReport:
    """Density of N(x, V) - t0, a subset of the transition set N(U, V), for some t0 in N(x, U).

    With ``horizons=None`` the horizons are a quarter, a half and all of the
    largest radius that keeps every shifted sample inside the truncation horizon.
    """
    t0 = find_hitting_time(v, plan, U_center, U_radius, v.truncation_horizon - U_center.support_radius)
    if t0 is None:
        return TransitionReport("inconclusive", None, None)
    if horizons is None:
        reach = math.floor(v.truncation_horizon - V_center.support_radius - abs(t0))
        if reach < 4:
            raise ValueError("no room left for horizons beyond the hitting time")
        horizons = [reach / 4, reach / 2, reach]
    if max(horizons) + abs(t0) > v.truncation_horizon - V_center.support_radius:
        raise ValueError("shifted horizon exceeds the truncation horizon of the vector")
    base = grid_offset(plan.h, t0)
    pred = PredicateSet(plan.ctx.sector, _hitting_predicate(v, plan.ctx, V_center, V_radius, base))
    est = sector_lower_density(pred, horizons, seed=seed, samples=samples, workers=workers)
    return TransitionReport("estimated", t0, est)


def dense_targets(sector, h, count: int) -> list[GridFunction]:
    """First ``count`` members of a countable family: q-truncation indicators with dyadic scales.

    Pairs (m, n) are enumerated along anti-diagonals; the pair gives
    ``(-1)^n (n / 2) 1_{Delta_{m/2}}``.
    """
    out = []
    d = 2
    while len(out) < count:
        for m in range(1, d):
            n = d - m
            out.append(indicator(sector, h, m / 2, (-1) ** n * n / 2))
            if len(out) == count:
                break
        d += 1
    return out
