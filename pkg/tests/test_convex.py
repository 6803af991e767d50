"""Exact area engine against shapely polygon areas (high-resolution discs)."""
import math

import pytest
from hypothesis import given, strategies as st
from shapely.geometry import Point, Polygon, box

from sectorfhc._convex import Disc, HalfPlane, cone_halfplanes, convex_area

BIG = 1e3


def shapely_region(hps, discs):
    region = discs[0][0]
    for d, _ in discs[1:]:
        region = region.intersection(d)
    for a, b, c in hps:
        # half-plane a x + b y <= c as a huge polygon
        n = math.hypot(a, b)
        a, b, c = a / n, b / n, c / n
        px, py = a * c, b * c  # foot point on the boundary line
        tx, ty = -b, a
        poly = Polygon([(px + BIG * tx, py + BIG * ty), (px - BIG * tx, py - BIG * ty),
                        (px - BIG * tx - BIG * a, py - BIG * ty - BIG * b),
                        (px + BIG * tx - BIG * a, py + BIG * ty - BIG * b)])
        region = region.intersection(poly)
    return region.area


def shapely_disc(cx, cy, r):
    return Point(cx, cy).buffer(r, quad_segs=2048), r


def test_full_disc():
    assert convex_area([], [Disc(0, 0, 2)]) == pytest.approx(4 * math.pi, rel=1e-14)


def test_half_disc():
    assert convex_area([HalfPlane(0, 1, 0)], [Disc(0, 0, 1)]) == pytest.approx(math.pi / 2, rel=1e-14)


def test_square_inside_disc():
    hps = [HalfPlane(1, 0, 1), HalfPlane(-1, 0, 1), HalfPlane(0, 1, 1), HalfPlane(0, -1, 1)]
    assert convex_area(hps, [Disc(0, 0, 10)]) == pytest.approx(4.0, rel=1e-13)
    assert shapely_region([(1, 0, 1), (-1, 0, 1), (0, 1, 1), (0, -1, 1)],
                          [shapely_disc(0, 0, 10)]) == pytest.approx(4.0, rel=1e-9)
    assert box(-1, -1, 1, 1).area == 4.0


def test_empty_intersection():
    assert convex_area([HalfPlane(1, 0, -5)], [Disc(0, 0, 1)]) == 0.0
    assert convex_area([], [Disc(0, 0, 1), Disc(5, 0, 1)]) == 0.0


def test_needs_a_disc():
    with pytest.raises(ValueError):
        convex_area([HalfPlane(1, 0, 1)], [])


def test_cone_wedge_area():
    hps = cone_halfplanes(0j, -math.pi / 4, math.pi / 4)
    assert convex_area(hps, [Disc(0, 0, 3)]) == pytest.approx(math.pi / 4 * 9, rel=1e-13)


def coord(lo, hi):
    # GEOS loses precision on subnormal coordinates, so the oracle cannot judge them
    return st.floats(lo, hi, allow_subnormal=False)


@given(coord(-2, 2), coord(-2, 2), coord(0.3, 3), coord(-2, 2), coord(-2, 2), coord(0.3, 3),
       coord(0, 2 * math.pi), coord(-1, 1))
def test_random_lens_with_cut_matches_shapely(x1, y1, r1, x2, y2, r2, phi, c):
    a, b = math.cos(phi), math.sin(phi)
    ours = convex_area([HalfPlane(a, b, c)], [Disc(x1, y1, r1), Disc(x2, y2, r2)])
    ref = shapely_region([(a, b, c)], [shapely_disc(x1, y1, r1), shapely_disc(x2, y2, r2)])
    assert ours == pytest.approx(ref, rel=1e-5, abs=1e-5)


@given(coord(-3, 3), coord(-3, 3), coord(0, math.pi / 2), coord(0.1, 2), coord(0.5, 5),
       coord(-1, 1), coord(-1, 1), coord(0, 2 * math.pi), coord(-2, 2))
def test_anchored_cone_clipping_matches_shapely(ax, ay, half, delta, t, cx, cy, phi, c):
    cone = cone_halfplanes(complex(ax, ay), -half, half)
    cut = HalfPlane(math.cos(phi), math.sin(phi), c)
    ours = convex_area(cone + [cut], [Disc(ax, ay, delta), Disc(cx, cy, t)])
    ref = shapely_region([(h.a, h.b, h.c) for h in cone + [cut]],
                         [shapely_disc(ax, ay, delta), shapely_disc(cx, cy, t)])
    assert ours == pytest.approx(ref, rel=1e-5, abs=1e-5)
