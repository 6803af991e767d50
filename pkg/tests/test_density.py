import dataclasses
import io
import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from shapely.geometry import Point, Polygon
from shapely.ops import unary_union

from sectorfhc import (Anchored, DiscPrimitive, ExactSet, HalfPlanePrimitive, HorizonTooSmallError,
                       PredicateSet, Sector, Subsector, build_separated_family, geometric_horizons,
                       integer_density_prefix, return_set_density_bound, sector_lower_density)
from sectorfhc.density import DensityEstimate, monte_carlo_ratio

from _pairs import family_violations

Q = Sector(math.pi / 4)


# -- integer densities ---------------------------------------------------------

def test_prefix_density_of_evens():
    assert integer_density_prefix(range(0, 100, 2), 9) == 0.5


def test_prefix_density_of_squares():
    assert integer_density_prefix([n * n for n in range(20)], 99) == 0.1


def test_prefix_density_of_empty_set():
    assert integer_density_prefix([], 5) == 0.0


def test_prefix_density_from_predicate():
    assert integer_density_prefix(lambda n: n % 3 == 0, 8) == 3 / 9


def test_prefix_density_negative_horizon():
    with pytest.raises(ValueError):
        integer_density_prefix([1], -1)


# -- separated families --------------------------------------------------------

def brute_force_invariants(fam):
    assert family_violations(fam) == []


def test_single_level_small_family():
    fam = build_separated_family([2], 64, Q)
    A = fam.integer_sets[0]
    assert len(A) > 0 and A.min() >= 2
    assert np.all(np.diff(np.sort(A)) >= 4)
    brute_force_invariants(fam)
    for n in A:
        col = fam.points(1)[fam.points(1).real == n]
        if len(col) > 1:
            assert np.allclose(-np.diff(col.imag), 2.0)


def test_two_levels_cross_gaps():
    fam = build_separated_family([2, 4], 2 ** 12, Q, point_horizon=300)
    a, b = fam.integer_sets
    assert np.min(np.abs(a[:, None] - b[None, :])) >= 6
    brute_force_invariants(fam)


def test_horizon_too_small_names_level():
    with pytest.raises(HorizonTooSmallError, match="level 1"):
        build_separated_family([10], 8, Q)


def test_nonpositive_separation_rejected():
    with pytest.raises(ValueError):
        build_separated_family([0], 64, Q)


@given(st.lists(st.integers(1, 6), min_size=1, max_size=2), st.integers(9, 12))
def test_random_families_satisfy_invariants(seps, log_n):
    seps = sorted(seps)
    try:
        fam = build_separated_family(seps, 2 ** log_n, Q, point_horizon=160)
    except HorizonTooSmallError:
        return
    brute_force_invariants(fam)


def test_density_bound_is_a_prefix_minimum():
    fam = build_separated_family([3], 2 ** 10, Q)
    A = fam.integer_sets[0]
    d = fam.density_bounds[0]
    for c in [2 ** k for k in range(11) if 2 ** k >= A[0]]:
        assert integer_density_prefix(A, c) >= d


# -- exact densities -----------------------------------------------------------

def test_full_sector_ratio_is_exactly_one():
    est = sector_lower_density(ExactSet(Q, [Subsector(-Q.alpha, Q.alpha)]), [1, 10, 1e4])
    assert est.ratios == (1.0, 1.0, 1.0)
    assert est.liminf_proxy == 1.0 and est.halfwidths == (0.0, 0.0, 0.0)


def test_half_opening_subsector_ratio_is_half():
    est = sector_lower_density(ExactSet(Q, [Subsector(-Q.alpha / 2, Q.alpha / 2)]), [1, 7, 300])
    assert est.ratios == pytest.approx([0.5] * 3, abs=1e-15)


def test_ray_ratio_is_exactly_zero():
    est = sector_lower_density(ExactSet(Q, [Subsector(0.0, 0.0)]), geometric_horizons(1, 9))
    assert all(r == 0.0 for r in est.ratios)


def test_horizons_must_increase():
    with pytest.raises(ValueError):
        sector_lower_density(ExactSet(Q, []), [2, 1])


def test_empty_set_density():
    assert sector_lower_density(ExactSet(Q, []), [1, 2]).ratios == (0.0, 0.0)


def test_halfplane_cut_angular_density():
    for k in (-0.9, -0.5, 0.0, 0.5):
        A = ExactSet(Q, [HalfPlanePrimitive(-k, 1.0, 0.0)])  # y <= k x
        exact = (math.pi / 4 + math.atan(k)) / (math.pi / 2)
        assert sector_lower_density(A, [1, 50]).ratios == pytest.approx([exact] * 2, abs=1e-12)


def test_disc_primitive_area():
    A = ExactSet(Q, [DiscPrimitive(5 + 0j, 1.0)])
    assert A.area(100) == pytest.approx(math.pi, rel=1e-12)
    assert A.area(5) == pytest.approx(math.pi / 2 - 0.0, rel=0.2)  # cut by the arc |t| = 5


def test_overlapping_big_primitives_use_inclusion_exclusion():
    A = ExactSet(Q, [Subsector(-Q.alpha, 0.0), DiscPrimitive(3 + 0j, 1.0)])
    # half of the disc lies in the lower subsector
    assert A.area(10) == pytest.approx(Q.alpha * 100 / 2 + math.pi / 2, rel=1e-12)


def shapely_sector_copy(b, delta, alpha, n=2048):
    th = np.linspace(-alpha, alpha, n)
    pts = [(b.real, b.imag)] + [(b.real + delta * math.cos(a), b.imag + delta * math.sin(a)) for a in th]
    return Polygon(pts)


@pytest.mark.parametrize("delta", [0.3, 0.75, 0.95])
def test_anchored_union_area_matches_shapely(delta):
    anchors = np.array([2 + 0j, 3 + 0j, 4.5 + 1.5j, 5 - 2j, 8 + 7.5j])
    A = ExactSet(Q, [Anchored(anchors, delta)])
    t = 6.0
    ring = Point(0, 0).buffer(t, quad_segs=4096)
    wedge = Polygon([(0, 0), (20, -20), (20, 20)])
    union = unary_union([shapely_sector_copy(b, delta, Q.alpha) for b in anchors])
    ref = union.intersection(ring).intersection(wedge).area
    assert A.area(t) == pytest.approx(ref, rel=1e-4)


def test_triple_overlap_is_refused():
    anchors = np.array([2 + 0j, 2.5 + 0j, 3 + 0j])
    with pytest.raises(ValueError):
        ExactSet(Q, [Anchored(anchors, 0.9)]).area(10)


def test_nested_sets_have_ordered_ratios():
    small = ExactSet(Q, [Subsector(-0.2, 0.1)])
    big = ExactSet(Q, [Subsector(-0.3, 0.4), DiscPrimitive(4 + 0j, 2)])
    hs = [1, 3, 9, 27]
    for a, b in zip(sector_lower_density(small, hs).ratios, sector_lower_density(big, hs).ratios):
        assert a <= b


def test_exact_set_json_round_trip():
    A = ExactSet(Q, [Subsector(-0.2, 0.3), Anchored(np.array([2 + 1j, 4 + 0j]), 0.5),
                     DiscPrimitive(3 + 0j, 1.0), HalfPlanePrimitive(1.0, 2.0, 3.0)])
    B = ExactSet.from_json(A.to_json())
    assert B.to_json() == A.to_json()
    assert B.area(5) == A.area(5)


def test_unknown_primitive_kind():
    with pytest.raises(ValueError):
        ExactSet.from_json({"alpha": 0.5, "primitives": [{"kind": "blob"}]})


def test_subsectors_are_clipped_to_the_sector():
    A = ExactSet(Q, [Subsector(-3.0, 3.0)])
    assert A.area(2) == pytest.approx(Q.truncated_area(2), rel=1e-15)


# -- Monte-Carlo ---------------------------------------------------------------

def test_monte_carlo_needs_seed():
    A = PredicateSet(Q, lambda x, y: x > 1)
    with pytest.raises(ValueError):
        sector_lower_density(A, [1, 2])


def test_monte_carlo_reproducible_and_worker_independent():
    A = PredicateSet(Q, lambda x, y: np.hypot(x, y) > 3)
    e1 = sector_lower_density(A, [4, 8], seed=5, samples=20000)
    e2 = sector_lower_density(A, [4, 8], seed=5, samples=20000, workers=3)
    assert e1 == e2
    assert e1.to_csv() == e2.to_csv()


def test_monte_carlo_agrees_with_exact_engine():
    A = ExactSet(Q, [Subsector(-0.1, 0.5), DiscPrimitive(6 + 1j, 2.0)])
    hs = [5, 10, 20]
    exact = sector_lower_density(A, hs)
    mc = sector_lower_density(A, hs, method="monte-carlo", seed=1, samples=50000)
    for r, p, hw in zip(exact.ratios, mc.ratios, mc.halfwidths):
        assert abs(r - p) <= hw


def test_monte_carlo_needs_one_sample_per_stratum():
    with pytest.raises(ValueError):
        monte_carlo_ratio(lambda x, y: x > 0, Q, 1.0, seed=0, samples=10)


def test_csv_layout():
    est = DensityEstimate((1.0, 2.0), (0.5, 0.25), (0.0, 0.0), "exact")
    text = est.to_csv()
    assert text.startswith("horizon,ratio,halfwidth\r\n")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[1] == ["1.0", "0.5", "0.0"]


def test_liminf_proxy_uses_last_third():
    est = DensityEstimate(tuple(range(1, 7)), (0.9, 0.1, 0.8, 0.7, 0.6, 0.65), (0,) * 6, "exact")
    assert est.liminf_proxy == 0.6
    assert est.liminf_proxy <= max(est.ratios)


# -- return-set bound ----------------------------------------------------------

def test_return_set_bound_closed_form():
    fam = build_separated_family([2], 64, Q)
    fam = dataclasses.replace(fam, density_bounds=(0.05,))
    bound, _ = return_set_density_bound(fam, 1, 0.5)
    assert bound == pytest.approx(0.00625, rel=1e-15)


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.5])
def test_return_set_bound_rejects_delta(delta):
    fam = build_separated_family([2], 64, Q)
    with pytest.raises(ValueError):
        return_set_density_bound(fam, 1, delta)


def test_return_set_bound_vanishes_with_delta():
    fam = build_separated_family([2], 64, Q)
    assert return_set_density_bound(fam, 1, 1e-6)[0] < 1e-12


def test_return_set_exact_density_beats_half_the_bound():
    fam = build_separated_family([2], 2 ** 12, Q, point_horizon=2 ** 12)
    bound, region = return_set_density_bound(fam, 1, 0.5)
    est = sector_lower_density(region, [2 ** k for k in range(8, 13)])
    assert min(est.ratios) >= 0.5 * bound > 0
