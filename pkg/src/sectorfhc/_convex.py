"""Exact area of a bounded intersection of half-planes and discs.

The boundary of such a region is made of straight pieces and circular arcs.
Every constraint curve is split at its intersections with all the others; a
piece belongs to the boundary when its midpoint satisfies every other
constraint.  The area then follows from Green's theorem,
``A = 1/2 \\oint (x dy - y dx)``, evaluated in closed form on each piece.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class HalfPlane:
    """{(x, y) : a x + b y <= c}"""

    a: float
    b: float
    c: float

    def normalized(self) -> "HalfPlane":
        s = math.hypot(self.a, self.b)
        if s == 0.0:
            raise ValueError("degenerate half-plane normal")
        return HalfPlane(self.a / s, self.b / s, self.c / s)


@dataclass(frozen=True)
class Disc:
    cx: float
    cy: float
    r: float


def _dedupe_halfplanes(hps):
    out: list[HalfPlane] = []
    for hp in (h.normalized() for h in hps):
        for k, other in enumerate(out):
            if abs(hp.a - other.a) < 1e-12 and abs(hp.b - other.b) < 1e-12:
                if hp.c < other.c:
                    out[k] = hp
                break
        else:
            out.append(hp)
    return out


def _dedupe_discs(discs, tol):
    out: list[Disc] = []
    for d in discs:
        if d.r <= 0.0:
            return None
        for k, other in enumerate(out):
            # concentric, or so nearly coincident that both boundaries would pass
            # the midpoint test; the smaller disc is (within rounding) the intersection
            gap = math.hypot(d.cx - other.cx, d.cy - other.cy)
            if gap == 0.0 or gap + abs(d.r - other.r) <= 4.0 * tol:
                if d.r < other.r:
                    out[k] = d
                break
        else:
            out.append(d)
    return out


def _line_line(h1: HalfPlane, h2: HalfPlane):
    det = h1.a * h2.b - h1.b * h2.a
    if abs(det) < 1e-14:
        return None
    x = (h1.c * h2.b - h1.b * h2.c) / det
    y = (h1.a * h2.c - h1.c * h2.a) / det
    return x, y


def _line_circle(h: HalfPlane, d: Disc, tol: float):
    # points p0 + s*dir on the line, with p0 the foot of the origin
    px, py = h.c * h.a, h.c * h.b
    dx, dy = -h.b, h.a
    ox, oy = px - d.cx, py - d.cy
    bq = dx * ox + dy * oy
    cq = ox * ox + oy * oy - d.r * d.r
    disc = bq * bq - cq
    # near-tangency counts as a (double) crossing so that pieces get split there
    if disc < -4.0 * tol * d.r:
        return []
    sq = math.sqrt(max(disc, 0.0))
    return [(px + s * dx, py + s * dy) for s in (-bq - sq, -bq + sq)]


def _circle_circle(d1: Disc, d2: Disc, tol: float):
    dx, dy = d2.cx - d1.cx, d2.cy - d1.cy
    dist = math.hypot(dx, dy)
    if dist == 0.0 or dist > d1.r + d2.r + 2.0 * tol or dist < abs(d1.r - d2.r) - 2.0 * tol:
        return []
    a = (d1.r * d1.r - d2.r * d2.r + dist * dist) / (2.0 * dist)
    h = math.sqrt(max(d1.r * d1.r - a * a, 0.0))
    mx, my = d1.cx + a * dx / dist, d1.cy + a * dy / dist
    return [(mx - h * dy / dist, my + h * dx / dist), (mx + h * dy / dist, my - h * dx / dist)]


def _inside(x, y, hps, discs, tol, skip_hp=-1, skip_disc=-1) -> bool:
    for k, h in enumerate(hps):
        if k != skip_hp and h.a * x + h.b * y > h.c + tol:
            return False
    for k, d in enumerate(discs):
        if k != skip_disc and math.hypot(x - d.cx, y - d.cy) > d.r + tol:
            return False
    return True


def convex_area(halfplanes, discs) -> float:
    """Area of the intersection of the given half-planes and discs.

    At least one disc is required so that the region is bounded.
    """
    discs = list(discs)
    if not discs:
        raise ValueError("at least one disc is needed to bound the region")
    scale = max(1.0, max(abs(d.cx) + abs(d.cy) + d.r for d in discs))
    tol = 1e-10 * scale
    hps = _dedupe_halfplanes(halfplanes)
    dcs = _dedupe_discs(discs, tol)
    if dcs is None:
        return 0.0

    twice_area = 0.0

    for k, h in enumerate(hps):
        px, py = h.c * h.a, h.c * h.b
        dx, dy = -h.b, h.a
        params = []
        for m, g in enumerate(hps):
            if m != k:
                p = _line_line(h, g)
                if p is not None:
                    params.append((p[0] - px) * dx + (p[1] - py) * dy)
        for d in dcs:
            for p in _line_circle(h, d, tol):
                params.append((p[0] - px) * dx + (p[1] - py) * dy)
        params.sort()
        for s0, s1 in zip(params, params[1:]):
            if s1 - s0 <= 1e-14 * scale:
                continue
            sm = 0.5 * (s0 + s1)
            if not _inside(px + sm * dx, py + sm * dy, hps, dcs, tol, skip_hp=k):
                continue
            x0, y0 = px + s0 * dx, py + s0 * dy
            x1, y1 = px + s1 * dx, py + s1 * dy
            twice_area += x0 * y1 - y0 * x1

    for k, d in enumerate(dcs):
        angles = []
        for h in hps:
            for p in _line_circle(h, d, tol):
                angles.append(math.atan2(p[1] - d.cy, p[0] - d.cx) % _TWO_PI)
        for m, e in enumerate(dcs):
            if m != k:
                for p in _circle_circle(d, e, tol):
                    angles.append(math.atan2(p[1] - d.cy, p[0] - d.cx) % _TWO_PI)
        if not angles:
            if _inside(d.cx + d.r, d.cy, hps, dcs, tol, skip_disc=k):
                twice_area += _TWO_PI * d.r * d.r
            continue
        angles.sort()
        spans = list(zip(angles, angles[1:])) + [(angles[-1], angles[0] + _TWO_PI)]
        for f0, f1 in spans:
            if f1 - f0 <= 1e-14:
                continue
            fm = 0.5 * (f0 + f1)
            if not _inside(d.cx + d.r * math.cos(fm), d.cy + d.r * math.sin(fm),
                           hps, dcs, tol, skip_disc=k):
                continue
            twice_area += (d.r * d.cx * (math.sin(f1) - math.sin(f0))
                           - d.r * d.cy * (math.cos(f1) - math.cos(f0))
                           + d.r * d.r * (f1 - f0))

    return max(0.0, 0.5 * twice_area)


def cone_halfplanes(apex: complex, theta1: float, theta2: float) -> list[HalfPlane]:
    """Half-planes whose intersection is {apex + r e^{i theta} : theta1 <= theta <= theta2}.

    Valid for opening angles theta2 - theta1 <= pi.
    """
    ax, ay = apex.real, apex.imag
    s1, c1 = math.sin(theta1), math.cos(theta1)
    s2, c2 = math.sin(theta2), math.cos(theta2)
    # left of the ray at theta1, right of the ray at theta2
    return [
        HalfPlane(s1, -c1, s1 * ax - c1 * ay),
        HalfPlane(-s2, c2, -s2 * ax + c2 * ay),
    ]
