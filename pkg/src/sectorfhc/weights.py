"""Admissible weights on the sector and the two checks attached to them.

A weight rho is admissible when ``rho(t) <= M exp(omega |t'|) rho(t + t')`` for
all t, t' in the sector.  The sufficient check integrates rho over the sector;
the necessary check estimates the lower density of eroded sublevel sets
``{t : t + Delta_R subset {rho <= eps}}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .density import DensityEstimate, PredicateSet, sector_lower_density
from .sector_geometry import Sector


class CatalogError(ValueError):
    pass


class WeightEvaluationError(ArithmeticError):
    def __init__(self, node, value):
        super().__init__(f"weight is not finite at {node!r} (value {value!r})")
        self.node = node
        self.value = value


@dataclass(frozen=True, eq=False)
class WeightFn:
    """A weight on ``sector`` with claimed admissibility constants.

    ``evaluator(x, y)`` must accept float arrays.  ``radial_tail(R)`` is the
    integral of rho over ``{|tau| >= R}`` when known in closed form.
    ``scalar(x, y)``, when given, is a float-only twin of ``evaluator`` used by
    the quadrature loops.
    """

    sector: Sector
    evaluator: Callable
    M: float
    omega: float
    name: str = "custom"
    radial_tail: Optional[Callable[[float], float]] = None
    sup: Optional[float] = None
    scalar: Optional[Callable[[float, float], float]] = None

    def __call__(self, p):
        p = complex(p)
        if self.scalar is not None:
            return float(self.scalar(p.real, p.imag))
        return float(self.evaluator(np.float64(p.real), np.float64(p.imag)))

    def at_xy(self, x, y) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(x, float), np.asarray(y, float)), dtype=float)


def _gauss(x, y):
    return np.exp(-(x * x + y * y))


def _exp(x, y):
    return np.exp(-np.sqrt(x * x + y * y))


def _cubic(x, y):
    r = np.maximum(np.sqrt(x * x + y * y), 1.0)
    return 1.0 / (r * r * r)


def _chaouchi(x, y):
    u = x + y
    s = np.sqrt(np.maximum(x - y, 0.0))
    return np.where(u >= s, 1.0, np.exp(np.minimum(u - s, 0.0)))


def _constant_one(x, y):
    return np.ones(np.broadcast(x, y).shape)


def _gauss_s(x, y):
    return math.exp(-(x * x + y * y))


def _exp_s(x, y):
    return math.exp(-math.hypot(x, y))


def _cubic_s(x, y):
    r = math.hypot(x, y)
    return 1.0 if r <= 1.0 else r ** -3


def _chaouchi_s(x, y):
    u = x + y
    s = math.sqrt(max(x - y, 0.0))
    return 1.0 if u >= s else math.exp(u - s)


CATALOG = ("gauss", "exp", "cubic", "chaouchi", "constant")


def catalog_weight(name: str, alpha: float = math.pi / 4) -> WeightFn:
    """Built-in weights.

    ==========  ======================================  ==================  ==============
    name        rho(tau)                                (M, omega)          tail G(R)
    ==========  ======================================  ==================  ==============
    gauss       exp(-|tau|^2)                           (1, 0), see below   alpha e^{-R^2}
    exp         exp(-|tau|)                             (1, 1)              2 alpha (R+1) e^{-R}
    cubic       1 on |tau| <= 1, |tau|^-3 beyond        (1, 3)              2 alpha / R (R >= 1)
    chaouchi    1 if x+y >= sqrt(x-y), else e^{x+y-sqrt(x-y)}  (e^{1/4}, sqrt 2)  none
    constant    1                                       (1, 0)              none
    ==========  ======================================  ==================  ==============

    No finite (M, omega) makes the Gaussian weight admissible on an unbounded
    sector (|t + t'|^2 - |t|^2 grows like 2|t||t'|); the claimed pair is a
    placeholder that :func:`check_admissibility` refutes.  ``chaouchi`` only
    exists on the quarter-plane sector alpha = pi/4.
    """
    if name not in CATALOG:
        raise CatalogError(f"unknown weight {name!r}; choose from {', '.join(CATALOG)}")
    if name == "chaouchi":
        if not math.isclose(alpha, math.pi / 4, rel_tol=0, abs_tol=1e-15):
            raise CatalogError("the chaouchi weight is defined on Delta(pi/4) only")
        alpha = math.pi / 4
    sec = Sector(alpha)
    a = sec.alpha
    if name == "gauss":
        return WeightFn(sec, _gauss, 1.0, 0.0, name, lambda R: a * math.exp(-max(R, 0.0) ** 2), 1.0,
                        _gauss_s)
    if name == "exp":
        return WeightFn(sec, _exp, 1.0, 1.0, name,
                        lambda R: 2 * a * (max(R, 0.0) + 1.0) * math.exp(-max(R, 0.0)), 1.0, _exp_s)
    if name == "cubic":
        def tail(R):
            R = max(R, 0.0)
            return 2 * a / R if R >= 1.0 else a * (1.0 - R * R) + 2 * a
        return WeightFn(sec, _cubic, 1.0, 3.0, name, tail, 1.0, _cubic_s)
    if name == "constant":
        return WeightFn(sec, _constant_one, 1.0, 0.0, name, None, 1.0, lambda x, y: 1.0)
    return WeightFn(sec, _chaouchi, math.exp(0.25), math.sqrt(2.0), name, None, 1.0, _chaouchi_s)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityResult:
    passed: bool
    samples: int
    worst_ratio: float
    t: complex | None = None
    t_prime: complex | None = None

    def to_json(self):
        d = {"passed": self.passed, "samples": self.samples, "worst_ratio": self.worst_ratio}
        if not self.passed:
            d["t"] = [self.t.real, self.t.imag]
            d["t_prime"] = [self.t_prime.real, self.t_prime.imag]
        return d


def _uniform_in_truncation(rng, sector: Sector, T: float, n: int):
    r = T * np.sqrt(rng.random(n))
    th = sector.alpha * (2.0 * rng.random(n) - 1.0)
    return r * np.cos(th), r * np.sin(th)


def check_admissibility(w: WeightFn, seed: int, count: int, T: float = 4.0,
                        rtol: float = 1e-9) -> AdmissibilityResult:
    """Sample pairs (t, t') uniformly in Delta_T x Delta_T and test the growth inequality.

    A pass is evidence, not proof.  Otherwise the pair with the largest
    ``rho(t) / (M e^{omega |t'|} rho(t + t'))`` is reported.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    x1, y1 = _uniform_in_truncation(rng, w.sector, T, count)
    x2, y2 = _uniform_in_truncation(rng, w.sector, T, count)
    # include the apex pairs, where violations of type rho(0) > rho(t') live
    x1[0], y1[0] = 0.0, 0.0
    lhs = w.at_xy(x1, y1)
    rhs = w.M * np.exp(w.omega * np.hypot(x2, y2)) * w.at_xy(x1 + x2, y1 + y2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.inf)
    k = int(np.argmax(ratio))
    worst = float(ratio[k])
    if worst <= 1.0 + rtol:
        return AdmissibilityResult(True, count, worst)
    return AdmissibilityResult(False, count, worst, complex(x1[k], y1[k]), complex(x2[k], y2[k]))


# ---------------------------------------------------------------------------
# sector integral
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegralResult:
    status: str  # "finite" | "divergent" | "inconclusive"
    value: float
    error: float
    radii: tuple
    partials: tuple

    @property
    def finite(self) -> bool:
        return self.status == "finite"

    def to_json(self):
        return {"status": self.status, "value": self.value, "error_bound": self.error,
                "radii": list(self.radii), "partials": list(self.partials)}


def _annulus_integral(w: WeightFn, r0: float, r1: float, epsrel: float) -> tuple[float, float]:
    a = w.sector.alpha
    ev = w.scalar if w.scalar is not None else (lambda x, y: float(w.evaluator(np.float64(x), np.float64(y))))

    def radial(r):
        def inner(th):
            v = ev(r * math.cos(th), r * math.sin(th))
            if not math.isfinite(v):
                raise WeightEvaluationError(complex(r * math.cos(th), r * math.sin(th)), v)
            return v
        val, _ = integrate.quad(inner, -a, a, epsabs=0.0, epsrel=epsrel, limit=200)
        return val * r

    val, err = integrate.quad(radial, r0, r1, epsabs=0.0, epsrel=epsrel, limit=200)
    return val, err


def integrate_weight(w: WeightFn, tol: float = 1e-9, r0: float = 1.0,
                     max_doublings: int = 40) -> IntegralResult:
    """Polar adaptive quadrature of rho over the sector on doubling disc radii.

    With a closed-form tail G the loop stops once G(R) < tol * partial and
    returns ``partial + G(R)/2`` with error bound G(R).  Without one, the
    integral is declared finite when two successive doublings change the
    partial by less than ``tol * partial``, and divergent when the annulus
    increments fail to decrease over six consecutive doublings.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    epsrel = min(max(tol * 0.1, 1e-10), 1e-6)
    R = float(r0)
    partial, qerr = _annulus_integral(w, 0.0, R, epsrel)
    radii, partials, increments = [R], [partial], [partial]
    small_steps = 0
    growing = 0
    for _ in range(max_doublings):
        if w.radial_tail is not None:
            G = float(w.radial_tail(R))
            if G < tol * partial:
                return IntegralResult("finite", partial + 0.5 * G, G + qerr, tuple(radii), tuple(partials))
        inc, e = _annulus_integral(w, R, 2.0 * R, epsrel)
        R *= 2.0
        partial += inc
        qerr += e
        radii.append(R)
        partials.append(partial)
        if w.radial_tail is None:
            small_steps = small_steps + 1 if inc < tol * partial else 0
            if small_steps >= 2:
                return IntegralResult("finite", partial, qerr + inc, tuple(radii), tuple(partials))
            growing = growing + 1 if inc >= increments[-1] else 0
            if growing >= 6:
                return IntegralResult("divergent", math.inf, math.inf, tuple(radii), tuple(partials))
        increments.append(inc)
    return IntegralResult("inconclusive", partial, math.inf, tuple(radii), tuple(partials))


# ---------------------------------------------------------------------------
# sublevel sets and erosion
# ---------------------------------------------------------------------------

def sublevel_set(w: WeightFn, eps: float) -> PredicateSet:
    """{t in Delta : rho(t) <= eps}"""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return PredicateSet(w.sector, lambda x, y: w.at_xy(x, y) <= eps)


def cover_nodes(sector: Sector, radius: float, pitch_divisor: int = 8,
                pitch: float | None = None) -> np.ndarray:
    """Deterministic polar grid covering Delta_radius.

    Rings sit at multiples of ``pitch`` (default ``radius / pitch_divisor``)
    plus the outer ring, each with nodes at most ``pitch`` apart.  The nodes of
    a ring depend only on its radius and the pitch, so with a shared pitch the
    cover of a radius that is a multiple of the pitch lies inside the cover of
    every larger radius.
    """
    if pitch is None:
        pitch = radius / pitch_divisor
    if not (radius > 0 and pitch > 0):
        raise ValueError("radius and pitch must be positive")
    rings = [k * pitch for k in range(1, int(math.floor(radius / pitch * (1 + 1e-12))) + 1)]
    if not rings or rings[-1] < radius * (1 - 1e-12):
        rings.append(radius)
    nodes = [0j]
    for rk in rings:
        m = max(1, math.ceil(2 * sector.alpha * rk / pitch)) + 1
        th = np.linspace(-sector.alpha, sector.alpha, m)
        nodes.extend(rk * np.exp(1j * th))
    return np.asarray(nodes)


def erosion_set(w: WeightFn, eps: float, radius: float, pitch: float | None = None) -> PredicateSet:
    """Points t whose translate t + Delta_radius stays in the eps-sublevel set.

    Membership tests the nodes of :func:`cover_nodes`, so the result contains
    the true erosion.
    """
    nodes = cover_nodes(w.sector, radius, pitch=pitch)

    def member(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        keep = np.zeros(x.shape, dtype=bool)
        idx = np.arange(x.size)
        xa, ya = x.ravel(), y.ravel()
        for start in range(0, nodes.size, 32):
            if idx.size == 0:
                break
            block = nodes[start:start + 32]
            vals = w.at_xy(xa[:, None] + block.real, ya[:, None] + block.imag)
            ok = np.all(vals <= eps, axis=1)
            idx, xa, ya = idx[ok], xa[ok], ya[ok]
        keep.ravel()[idx] = True
        return keep

    return PredicateSet(w.sector, member)


@dataclass
class NecessaryVerdict:
    status: str  # "pass" | "fail" | "inconclusive"
    curves: list  # one record per (eps, radius)
    failing_eps: float | None = None

    def to_json(self):
        return {"status": self.status, "failing_eps": self.failing_eps,
                "curves": [{"eps": c["eps"], "radius": c["radius"], **c["estimate"].to_json(),
                            "csv": c["estimate"].to_csv()}
                           for c in self.curves]}


def check_necessary(w: WeightFn, epsilons: Sequence[float], horizons: Sequence[float],
                    erosion_radii: Sequence[float], seed: int, samples: int,
                    fail_threshold: float = 0.02, pass_threshold: float = 0.05,
                    workers: int = 1) -> NecessaryVerdict:
    """Eroded-sublevel density curves and the thick-set verdict.

    fail: for some eps, the curve at the smallest radius is non-increasing and
    ends below ``fail_threshold``.  pass: every curve's tail minimum exceeds
    ``pass_threshold``.  Anything else is inconclusive.
    """
    if not epsilons or not erosion_radii:
        raise ValueError("epsilons and erosion radii must be nonempty")
    radii = sorted(float(r) for r in erosion_radii)
    pitch = radii[0] / 8  # shared, so that covers of nested radii are nested
    curves = []
    for eps in epsilons:
        for R in radii:
            est = sector_lower_density(erosion_set(w, eps, R, pitch), horizons, seed=seed,
                                       samples=samples, workers=workers)
            curves.append({"eps": float(eps), "radius": R, "estimate": est})

    for eps in epsilons:
        c = next(c for c in curves if c["eps"] == float(eps) and c["radius"] == radii[0])
        rs = c["estimate"].ratios
        if all(b <= a for a, b in zip(rs, rs[1:])) and rs[-1] < fail_threshold:
            return NecessaryVerdict("fail", curves, float(eps))
    if all(c["estimate"].liminf_proxy > pass_threshold for c in curves):
        return NecessaryVerdict("pass", curves)
    return NecessaryVerdict("inconclusive", curves)


def check_sufficient(w: WeightFn, tol: float = 1e-9) -> tuple[str, IntegralResult]:
    """'pass' iff the sector integral of rho is finite."""
    res = integrate_weight(w, tol)
    status = {"finite": "pass", "divergent": "fail"}.get(res.status, "inconclusive")
    return status, res


@dataclass
class WeightVerdict:
    name: str
    sufficient: str
    integral: IntegralResult
    necessary: NecessaryVerdict
    evidence: list = field(default_factory=list)

    def to_json(self):
        return {"name": self.name,
                "sufficient": {"status": self.sufficient, "integral": self.integral.to_json()},
                "necessary": self.necessary.to_json(),
                "evidence": self.evidence}
