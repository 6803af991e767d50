"""Lower densities on the integers and on the sector, and separated families.

The sector density of a measurable set A is ``liminf_t m(A cap Delta_t) / (alpha t^2)``.
Only finitely many horizons can ever be evaluated, so every estimate here is
a finite-horizon proxy: the ratios themselves are exact (closed form and
polygon/arc clipping) for :class:`ExactSet` and stratified Monte Carlo for
:class:`PredicateSet`.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from ._convex import Disc, HalfPlane, cone_halfplanes, convex_area
from .sector_geometry import Sector


class HorizonTooSmallError(ValueError):
    """A level of a separated family received no element below the integer horizon."""


# ---------------------------------------------------------------------------
# integer sets
# ---------------------------------------------------------------------------

def integer_density_prefix(S, N: int) -> float:
    """card(S cap [0, N]) / (N + 1).

    ``S`` may be an iterable of integers or a predicate ``int -> bool``.
    """
    N = int(N)
    if N < 0:
        raise ValueError("horizon must be >= 0")
    if callable(S):
        count = sum(1 for n in range(N + 1) if S(n))
    else:
        arr = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))
        count = int(np.count_nonzero((arr >= 0) & (arr <= N)))
    return count / (N + 1)


def _two_adic_valuation(j: int) -> int:
    return (j & -j).bit_length() - 1


@dataclass(frozen=True, eq=False)
class SeparatedFamily:
    """Paired sets A(l, r_l) of integers and B(l, r_l) of sector points.

    ``integer_sets[l-1]`` and ``point_sets[l-1]`` belong to level ``l``.  The
    point sets cover abscissae up to ``point_horizon`` only.
    """

    sector: Sector
    separations: tuple
    integer_horizon: int
    integer_sets: tuple
    point_sets: tuple
    density_bounds: tuple
    point_horizon: int

    @property
    def levels(self) -> int:
        return len(self.separations)

    def points(self, level: int) -> np.ndarray:
        return self.point_sets[level - 1]


def build_separated_family(separations: Sequence[int], integer_horizon: int, sector: Sector,
                           point_horizon: int | None = None) -> SeparatedFamily:
    """Dyadic-block construction of pairwise separated integer sets.

    Block ``[2^j, 2^(j+1))`` is owned by level ``nu_2(j) + 1``; inside an owned
    block the level takes ``2^j + R, 2^j + 3R, ...`` (step ``2R``, ``R = max r``)
    while staying ``R`` away from the block's right end.  This gives
    ``n >= r_l`` and ``|n - m| >= r_l + r_k`` for all distinct members.
    """
    seps = tuple(int(r) for r in separations)
    if not seps:
        raise ValueError("need at least one level")
    if any(r < 1 for r in seps):
        raise ValueError("separations must be positive integers")
    N = int(integer_horizon)
    L = len(seps)
    rmax = max(seps)
    if point_horizon is None:
        point_horizon = min(N, 1024)

    members: list[list[int]] = [[] for _ in range(L)]
    j = 1
    while (1 << j) <= N:
        lvl = _two_adic_valuation(j) + 1
        if lvl <= L:
            start = 1 << j
            if start >= seps[lvl - 1]:
                stop = min((1 << (j + 1)) - rmax, N)
                members[lvl - 1].extend(range(start + rmax, stop + 1, 2 * rmax))
        j += 1

    for lvl, m in enumerate(members, start=1):
        if not m:
            raise HorizonTooSmallError(
                f"level {lvl} (r={seps[lvl - 1]}) is empty below integer horizon {N}"
            )
    integer_sets = tuple(np.asarray(m, dtype=np.int64) for m in members)
    _check_integer_separation(integer_sets, seps)

    bounds = []
    for A in integer_sets:
        checkpoints = [1 << k for k in range(N.bit_length()) if A[0] <= (1 << k) <= N]
        checkpoints.append(N)
        d = min(np.count_nonzero(A <= c) / (c + 1) for c in checkpoints)
        if not d > 0:
            raise RuntimeError("density bound must be positive")
        bounds.append(d)

    point_sets = []
    for A, r in zip(integer_sets, seps):
        segs = [sector.segment_points_array(n, r) for n in A
                if n <= point_horizon and sector.segment_length(n) > r * (1 + 1e-12)]
        pts = np.concatenate(segs) if segs else np.zeros(0, dtype=complex)
        point_sets.append(pts)
    _check_point_structure(point_sets, integer_sets, seps, sector)

    return SeparatedFamily(sector=sector, separations=seps, integer_horizon=N,
                           integer_sets=integer_sets, point_sets=tuple(point_sets),
                           density_bounds=tuple(bounds), point_horizon=int(point_horizon))


def _check_integer_separation(integer_sets, seps):
    vals = np.concatenate(integer_sets)
    labels = np.concatenate([np.full(len(A), r, dtype=np.int64) for A, r in zip(integer_sets, seps)])
    if len(np.unique(vals)) != len(vals):
        raise RuntimeError("integer sets are not pairwise disjoint")
    if np.any(vals < labels):
        raise RuntimeError("an element n violates n >= r_l")
    order = np.argsort(vals, kind="stable")
    vals, labels = vals[order], labels[order]
    reach = 2 * max(seps)
    off = 1
    while off < len(vals):
        gap = vals[off:] - vals[:-off]
        if not np.any(gap < reach):
            break
        if np.any(gap < labels[off:] + labels[:-off]):
            raise RuntimeError("two elements are closer than r_l + r_k")
        off += 1


def _check_point_structure(point_sets, integer_sets, seps, sector):
    for pts, A, r in zip(point_sets, integer_sets, seps):
        if len(pts) == 0:
            continue
        xs = pts.real
        if not np.all(np.isin(xs, A.astype(float))):
            raise RuntimeError("point off the chords of its level")
        same = xs[1:] == xs[:-1]
        steps = pts.imag[:-1] - pts.imag[1:]
        if np.any(np.abs(steps[same] - r) > 1e-9 * max(1.0, r)):
            raise RuntimeError("chord points are not evenly spaced")
        if not np.all(sector.contains_xy(xs, pts.imag)):
            raise RuntimeError("chord point outside the sector")


# ---------------------------------------------------------------------------
# sector sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Subsector:
    """{theta1 <= arg t <= theta2}"""

    theta1: float
    theta2: float


@dataclass(frozen=True, eq=False)
class Anchored:
    """Union over anchors b of the copies b + Delta_delta."""

    anchors: np.ndarray
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "anchors", np.asarray(self.anchors, dtype=complex).ravel())
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True)
class DiscPrimitive:
    center: complex
    radius: float


@dataclass(frozen=True)
class HalfPlanePrimitive:
    """{a x + b y <= c}"""

    a: float
    b: float
    c: float


Primitive = Union[Subsector, Anchored, DiscPrimitive, HalfPlanePrimitive]


class ExactSet:
    """Finite union of primitives, intersected with the ambient sector."""

    def __init__(self, sector: Sector, primitives: Iterable[Primitive]):
        self.sector = sector
        prims = []
        for p in primitives:
            if isinstance(p, Subsector):
                lo, hi = max(p.theta1, -sector.alpha), min(p.theta2, sector.alpha)
                p = Subsector(lo, max(lo, hi))
            elif not isinstance(p, (Anchored, DiscPrimitive, HalfPlanePrimitive)):
                raise TypeError(f"unknown primitive {p!r}")
            prims.append(p)
        self.primitives = tuple(prims)
        self._pairs_cache: dict = {}

    # -- membership -----------------------------------------------------------

    def contains_xy(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        ang = np.arctan2(y, x)
        for p in self.primitives:
            if isinstance(p, Subsector):
                inside |= (ang >= p.theta1 - 1e-12) & (ang <= p.theta2 + 1e-12) & (p.theta2 > p.theta1)
            elif isinstance(p, DiscPrimitive):
                inside |= np.hypot(x - p.center.real, y - p.center.imag) <= p.radius
            elif isinstance(p, HalfPlanePrimitive):
                inside |= p.a * x + p.b * y <= p.c
            else:
                inside |= _anchored_contains(p, self.sector, x, y)
        return inside & self.sector.contains_xy(x, y)

    # -- area -----------------------------------------------------------------

    def area(self, t: float) -> float:
        """Lebesgue measure of (this set) cap Delta_t."""
        t = float(t)
        if t <= 0:
            return 0.0
        sec = self.sector
        ambient = cone_halfplanes(0j, -sec.alpha, sec.alpha)
        bound = Disc(0.0, 0.0, t)

        subs = _merge_intervals([(p.theta1, p.theta2) for p in self.primitives
                                 if isinstance(p, Subsector)])
        generic = [p for p in self.primitives if isinstance(p, (DiscPrimitive, HalfPlanePrimitive))]
        anchored = [p for p in self.primitives if isinstance(p, Anchored)]

        total = 0.0
        for lo, hi in subs:
            total += 0.5 * (hi - lo) * t * t

        big_atoms = [_atom_of_interval(lo, hi) for lo, hi in subs] + [_atom_of(p) for p in generic]
        for p in generic:
            hps, dcs = _atom_of(p)
            total += convex_area(hps + ambient, dcs + [bound])

        anchors = np.concatenate([p.anchors for p in anchored]) if anchored else np.zeros(0, complex)
        deltas = (np.concatenate([np.full(len(p.anchors), p.delta) for p in anchored])
                  if anchored else np.zeros(0))
        anchor_areas = _anchored_areas(anchors, deltas, sec, t, ambient, bound)
        total += float(np.sum(anchor_areas))

        # pairwise overlaps among big atoms (merged subsectors are disjoint among themselves)
        n_sub = len(subs)
        for i in range(len(big_atoms)):
            for k in range(max(i + 1, n_sub), len(big_atoms)):
                hps = big_atoms[i][0] + big_atoms[k][0] + ambient
                dcs = big_atoms[i][1] + big_atoms[k][1] + [bound]
                total -= convex_area(hps, dcs)

        # anchored copies against big atoms
        for hps_b, dcs_b in big_atoms:
            total -= _anchored_vs_atom(anchors, deltas, anchor_areas, hps_b, dcs_b, sec, ambient, bound)

        # anchored copies among themselves
        for i, k in self._anchor_pairs(anchors, deltas, t):
            hps = (cone_halfplanes(complex(anchors[i]), -sec.alpha, sec.alpha)
                   + cone_halfplanes(complex(anchors[k]), -sec.alpha, sec.alpha) + ambient)
            dcs = [Disc(anchors[i].real, anchors[i].imag, deltas[i]),
                   Disc(anchors[k].real, anchors[k].imag, deltas[k]), bound]
            total -= convex_area(hps, dcs)

        return max(total, 0.0)

    def _anchor_pairs(self, anchors, deltas, t):
        if len(anchors) < 2:
            return []
        near = np.nonzero(np.abs(anchors) - deltas < t)[0]
        if len(near) < 2:
            return []
        key = len(near)
        if key in self._pairs_cache:
            return self._pairs_cache[key]
        pts = np.column_stack([anchors[near].real, anchors[near].imag])
        tree = cKDTree(pts)
        raw = tree.query_pairs(r=2.0 * float(deltas[near].max()), output_type="ndarray")
        pairs = []
        for a, b in raw:
            i, k = int(near[a]), int(near[b])
            if abs(anchors[i] - anchors[k]) < deltas[i] + deltas[k]:
                pairs.append((min(i, k), max(i, k)))
        pairs.sort()
        _assert_no_triples(pairs)
        self._pairs_cache[key] = pairs
        return pairs

    # -- serialisation --------------------------------------------------------

    def to_json(self) -> dict:
        prims = []
        for p in self.primitives:
            if isinstance(p, Subsector):
                prims.append({"kind": "subsector", "theta1": p.theta1, "theta2": p.theta2})
            elif isinstance(p, Anchored):
                prims.append({"kind": "anchored", "delta": p.delta,
                              "anchors": [[float(b.real), float(b.imag)] for b in p.anchors]})
            elif isinstance(p, DiscPrimitive):
                prims.append({"kind": "disc", "center": [p.center.real, p.center.imag],
                              "radius": p.radius})
            else:
                prims.append({"kind": "halfplane", "a": p.a, "b": p.b, "c": p.c})
        return {"alpha": self.sector.alpha, "primitives": prims}

    @classmethod
    def from_json(cls, doc) -> "ExactSet":
        if isinstance(doc, str):
            doc = json.loads(doc)
        sector = Sector(doc["alpha"])
        prims = []
        for p in doc["primitives"]:
            kind = p.get("kind")
            if kind == "subsector":
                prims.append(Subsector(float(p["theta1"]), float(p["theta2"])))
            elif kind == "anchored":
                anchors = p["anchors"] if "anchors" in p else [p["b"]]
                prims.append(Anchored(np.array([complex(a, b) for a, b in anchors]), float(p["delta"])))
            elif kind == "disc":
                cx, cy = p["center"]
                prims.append(DiscPrimitive(complex(cx, cy), float(p["radius"])))
            elif kind == "halfplane":
                prims.append(HalfPlanePrimitive(float(p["a"]), float(p["b"]), float(p["c"])))
            else:
                raise ValueError(f"unknown primitive kind {kind!r}")
        return cls(sector, prims)


class PredicateSet:
    """Set given by a deterministic membership oracle.

    ``fn(x, y)`` receives coordinate arrays and returns a boolean array.  Pass
    ``vectorized=False`` for a scalar ``fn(complex) -> bool``.
    """

    def __init__(self, sector: Sector, fn: Callable, vectorized: bool = True):
        self.sector = sector
        self._fn = fn
        self.vectorized = vectorized

    def contains_xy(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.vectorized:
            out = np.asarray(self._fn(x, y), dtype=bool)
        else:
            out = np.fromiter((bool(self._fn(complex(a, b))) for a, b in zip(x.ravel(), y.ravel())),
                              dtype=bool, count=x.size).reshape(x.shape)
        return out & self.sector.contains_xy(x, y)


SectorSet = Union[ExactSet, PredicateSet]


def _merge_intervals(intervals):
    iv = sorted((lo, hi) for lo, hi in intervals if hi > lo)
    out: list[list[float]] = []
    for lo, hi in iv:
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [tuple(x) for x in out]


def _atom_of_interval(lo, hi):
    return cone_halfplanes(0j, lo, hi), []


def _atom_of(p):
    if isinstance(p, DiscPrimitive):
        return [], [Disc(p.center.real, p.center.imag, p.radius)]
    return [HalfPlane(p.a, p.b, p.c)], []


def _anchored_contains(p: Anchored, sector: Sector, x, y):
    out = np.zeros(x.shape, dtype=bool)
    if len(p.anchors) == 0:
        return out
    tree = cKDTree(np.column_stack([p.anchors.real, p.anchors.imag]))
    flat_x, flat_y = x.ravel(), y.ravel()
    hits = tree.query_ball_point(np.column_stack([flat_x, flat_y]), r=p.delta)
    res = np.zeros(flat_x.shape, dtype=bool)
    for idx, cand in enumerate(hits):
        for c in cand:
            b = p.anchors[c]
            if sector.contains((flat_x[idx] - b.real, flat_y[idx] - b.imag)):
                res[idx] = True
                break
    return res.reshape(x.shape)


def _anchored_areas(anchors, deltas, sec: Sector, t, ambient, bound) -> np.ndarray:
    out = np.zeros(len(anchors))
    if len(anchors) == 0:
        return out
    mod = np.abs(anchors)
    in_sector = sec.contains_xy(anchors.real, anchors.imag)
    interior = in_sector & (mod + deltas <= t)
    out[interior] = sec.alpha * deltas[interior] * deltas[interior]
    rest = np.nonzero(~interior & (mod - deltas < t))[0]
    for i in rest:
        b = complex(anchors[i])
        out[i] = convex_area(cone_halfplanes(b, -sec.alpha, sec.alpha) + ambient,
                             [Disc(b.real, b.imag, float(deltas[i])), bound])
    return out


def _anchored_vs_atom(anchors, deltas, anchor_areas, hps, dcs, sec, ambient, bound) -> float:
    """Sum over anchors of area((b + Delta_delta) cap atom cap Delta_t)."""
    if len(anchors) == 0:
        return 0.0
    live = anchor_areas > 0
    inside = live.copy()
    outside = ~live
    for h in hps:
        h = h.normalized()
        sd = h.a * anchors.real + h.b * anchors.imag - h.c
        inside &= sd <= -deltas
        outside |= sd >= deltas
    for d in dcs:
        dist = np.hypot(anchors.real - d.cx, anchors.imag - d.cy)
        inside &= dist + deltas <= d.r
        outside |= dist >= d.r + deltas
    total = float(np.sum(anchor_areas[inside & ~outside]))
    for i in np.nonzero(~inside & ~outside)[0]:
        b = complex(anchors[i])
        total += convex_area(cone_halfplanes(b, -sec.alpha, sec.alpha) + ambient + hps,
                             [Disc(b.real, b.imag, float(deltas[i])), bound] + dcs)
    return total


def _assert_no_triples(pairs):
    adj: dict[int, set] = {}
    for i, k in pairs:
        adj.setdefault(i, set()).add(k)
        adj.setdefault(k, set()).add(i)
    for i, k in pairs:
        if adj[i] & adj[k]:
            raise ValueError("three anchored copies overlap; pairwise inclusion-exclusion is not exact")


# ---------------------------------------------------------------------------
# density estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityEstimate:
    horizons: tuple
    ratios: tuple
    halfwidths: tuple
    method: str
    seed: int | None = None
    samples: int | None = None
    liminf_proxy: float = field(init=False)

    def __post_init__(self):
        if not (len(self.horizons) == len(self.ratios) == len(self.halfwidths)):
            raise ValueError("horizons, ratios and halfwidths must have equal length")
        m = len(self.ratios)
        window = self.ratios[m - math.ceil(m / 3):] if m else ()
        object.__setattr__(self, "liminf_proxy", min(window) if window else float("nan"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["horizon", "ratio", "halfwidth"])
        for row in zip(self.horizons, self.ratios, self.halfwidths):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"method": self.method, "seed": self.seed, "samples": self.samples,
                "horizons": list(self.horizons), "ratios": list(self.ratios),
                "halfwidths": list(self.halfwidths), "liminf_proxy": self.liminf_proxy}


def geometric_horizons(t0: float, count: int) -> list[float]:
    """t_i = t0 * 2^(i/4), i = 0..count-1."""
    return [t0 * 2.0 ** (i / 4) for i in range(count)]


def _check_horizons(horizons):
    hs = [float(t) for t in horizons]
    if not hs:
        raise ValueError("at least one horizon is required")
    if hs[0] <= 0 or any(b <= a for a, b in zip(hs, hs[1:])):
        raise ValueError("horizons must be positive and strictly increasing")
    return hs


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream (seed, *key); independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _stratum_hits(membership, sector, t, seed, hidx, sidx, n, k, chunk=1 << 16):
    a, b = divmod(sidx, k)
    rng = substream(seed, hidx, sidx)
    hits = 0
    remaining = n
    while remaining > 0:
        m = min(chunk, remaining)
        u = (a + rng.random(m)) / k
        v = (b + rng.random(m)) / k
        r = t * np.sqrt(u)
        th = sector.alpha * (2.0 * v - 1.0)
        hits += int(np.count_nonzero(membership(r * np.cos(th), r * np.sin(th))))
        remaining -= m
    return hits


def monte_carlo_ratio(membership, sector: Sector, t: float, seed: int, samples: int,
                      horizon_index: int = 0, strata_per_axis: int = 8, workers: int = 1):
    """Stratified estimate of m(A cap Delta_t)/(alpha t^2) and its 3-sigma half-width.

    Samples are uniform in (r^2, theta) within each of ``strata_per_axis^2``
    equal-area cells; cell ``s`` draws from substream ``(seed, horizon_index, s)``.
    """
    k = int(strata_per_axis)
    S = k * k
    if samples < S:
        raise ValueError(f"need at least {S} samples for {S} strata")
    base, extra = divmod(int(samples), S)
    counts = [base + (1 if s < extra else 0) for s in range(S)]

    def job(s):
        return _stratum_hits(membership, sector, t, seed, horizon_index, s, counts[s], k)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            hits = list(ex.map(job, range(S)))
    else:
        hits = [job(s) for s in range(S)]
    p = math.fsum(h / c for h, c in zip(hits, counts)) / S
    sigma = math.sqrt(max(p * (1.0 - p), 0.0))
    return p, 3.0 * sigma / math.sqrt(samples)


def sector_lower_density(A: SectorSet, horizons: Sequence[float], method: str | None = None,
                         seed: int | None = None, samples: int | None = None,
                         strata_per_axis: int = 8, workers: int = 1) -> DensityEstimate:
    """Finite-horizon lower-density proxy of ``A``.

    ``method`` defaults to ``"exact"`` for :class:`ExactSet` and
    ``"monte-carlo"`` for :class:`PredicateSet`; an exact set may also be
    sampled, which is how the two engines are cross-checked.
    """
    hs = _check_horizons(horizons)
    if method is None:
        method = "exact" if isinstance(A, ExactSet) else "monte-carlo"
    sec = A.sector
    if method == "exact":
        if not isinstance(A, ExactSet):
            raise ValueError("exact evaluation needs an ExactSet")
        ratios = tuple(A.area(t) / sec.truncated_area(t) for t in hs)
        return DensityEstimate(tuple(hs), ratios, (0.0,) * len(hs), "exact")
    if method != "monte-carlo":
        raise ValueError(f"unknown method {method!r}")
    if seed is None or samples is None:
        raise ValueError("monte-carlo estimation needs a seed and a sample count")
    ratios, widths = [], []
    for i, t in enumerate(hs):
        p, hw = monte_carlo_ratio(A.contains_xy, sec, t, seed, samples, horizon_index=i,
                                  strata_per_axis=strata_per_axis, workers=workers)
        ratios.append(p)
        widths.append(hw)
    return DensityEstimate(tuple(hs), tuple(ratios), tuple(widths), "monte-carlo",
                           seed=int(seed), samples=int(samples))


def return_set_density_bound(family: SeparatedFamily, level: int, delta: float):
    """Lower bound d_l delta^2 tan(alpha) / r_l on the density of B(l, r_l) + Delta_delta.

    Returns ``(bound, region)`` where ``region`` is the exact set of anchored
    copies, for direct estimation.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not 1 <= level <= family.levels:
        raise ValueError(f"level {level} not in family of {family.levels} levels")
    d = family.density_bounds[level - 1]
    r = family.separations[level - 1]
    bound = d * delta * delta * family.sector.tan_alpha / r
    region = ExactSet(family.sector, [Anchored(family.points(level), delta)])
    return bound, region
