import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sectorfhc import (CatalogError, Sector, catalog_weight, check_admissibility, check_necessary,
                       check_sufficient, integrate_weight, sector_lower_density, sublevel_set)
from sectorfhc.weights import (WeightEvaluationError, WeightFn, cover_nodes, erosion_set)

A = math.pi / 4


def test_exp_value():
    assert catalog_weight("exp")(3 + 0j) == pytest.approx(math.exp(-3), rel=1e-15)


def test_chaouchi_plateau():
    assert catalog_weight("chaouchi")(5 + 4j) == 1.0


def test_chaouchi_decay_region():
    x, y = 4.0, -3.9
    assert catalog_weight("chaouchi")(complex(x, y)) == pytest.approx(
        math.exp(x + y - math.sqrt(x - y)), rel=1e-14)


def test_gauss_at_origin():
    assert catalog_weight("gauss")(0j) == 1.0


def test_cubic_values():
    w = catalog_weight("cubic")
    assert w(0.5 + 0j) == 1.0 and w(2 + 0j) == pytest.approx(1 / 8)


def test_unknown_name():
    with pytest.raises(CatalogError):
        catalog_weight("unknown-weight")


def test_chaouchi_pinned_to_quarter_sector():
    with pytest.raises(CatalogError):
        catalog_weight("chaouchi", 0.5)


@pytest.mark.parametrize("name", ["gauss", "exp", "cubic", "chaouchi", "constant"])
@given(r=st.floats(0, 60), th=st.floats(-A, A))
def test_evaluators_positive_finite_and_scalar_twin_agrees(name, r, th):
    w = catalog_weight(name)
    x, y = r * math.cos(th), r * math.sin(th)
    v = float(w.at_xy(np.array([x]), np.array([y]))[0])
    assert math.isfinite(v) and v >= 0
    assert w(complex(x, y)) == pytest.approx(v, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("name", ["gauss", "exp", "cubic"])
def test_closed_tails_decrease(name):
    w = catalog_weight(name)
    rs = np.linspace(1, 40, 200)
    g = [w.radial_tail(r) for r in rs]
    assert all(b <= a for a, b in zip(g, g[1:]))
    assert g[-1] < 1e-1 * g[0]


@pytest.mark.parametrize("name,R", [("gauss", 1.5), ("exp", 2.0), ("cubic", 3.0)])
def test_closed_tails_match_quadrature(name, R):
    w = catalog_weight(name)
    total = integrate_weight(w).value
    from sectorfhc.weights import _annulus_integral
    inner, _ = _annulus_integral(w, 0.0, R, 1e-12)
    assert total - inner == pytest.approx(w.radial_tail(R), rel=1e-6)


# -- admissibility -------------------------------------------------------------

@given(st.integers(0, 2 ** 32))
def test_exp_admissible_for_every_seed(seed):
    assert check_admissibility(catalog_weight("exp"), seed, 200).passed


def test_gauss_claim_is_refuted():
    w = catalog_weight("gauss")
    res = check_admissibility(w, 0, 500)
    assert not res.passed and res.worst_ratio > 1
    # the pair t = 0, t' = 1 already breaks rho(t) <= M e^{omega |t'|} rho(t + t')
    assert w(0j) > w.M * math.exp(w.omega * 1.0) * w(1 + 0j)


@pytest.mark.parametrize("name", ["cubic", "chaouchi"])
def test_derived_constants_survive_sampling(name):
    assert check_admissibility(catalog_weight(name), 3, 20000, T=8.0).passed


def test_admissibility_needs_samples():
    with pytest.raises(ValueError):
        check_admissibility(catalog_weight("exp"), 0, 0)


# -- integral ------------------------------------------------------------------

@pytest.mark.parametrize("name,factor", [("gauss", 1.0), ("exp", 2.0), ("cubic", 3.0)])
def test_integral_closed_forms(name, factor):
    res = integrate_weight(catalog_weight(name))
    assert res.finite
    assert res.value == pytest.approx(factor * A, rel=1e-6)
    assert res.error >= 0


@pytest.mark.parametrize("alpha", [0.3, 1.2, math.pi / 2])
def test_integral_scales_with_opening(alpha):
    assert integrate_weight(catalog_weight("exp", alpha)).value == pytest.approx(2 * alpha, rel=1e-6)


@pytest.mark.parametrize("name", ["chaouchi", "constant"])
def test_integral_diverges(name):
    res = integrate_weight(catalog_weight(name))
    assert res.status == "divergent" and not res.finite


def test_integral_without_tail_converges_by_doubling():
    base = catalog_weight("exp")
    w = WeightFn(base.sector, base.evaluator, 1.0, 1.0, "exp-no-tail", None, 1.0, base.scalar)
    res = integrate_weight(w, tol=1e-8)
    assert res.finite and res.value == pytest.approx(2 * A, rel=1e-6)


def test_non_finite_evaluator_reports_node():
    w = WeightFn(Sector(A), lambda x, y: np.where(np.hypot(x, y) > 2, np.nan, 1.0), 1, 0, "bad")
    with pytest.raises(WeightEvaluationError):
        integrate_weight(w)


def test_integral_tolerance_must_be_positive():
    with pytest.raises(ValueError):
        integrate_weight(catalog_weight("exp"), tol=0)


def test_check_sufficient_statuses():
    assert check_sufficient(catalog_weight("gauss"))[0] == "pass"
    assert check_sufficient(catalog_weight("chaouchi"))[0] == "fail"


# -- sublevel sets and erosion -------------------------------------------------

def test_exp_sublevel_is_complement_of_disc():
    w = catalog_weight("exp")
    S = sublevel_set(w, math.exp(-2))
    est = sector_lower_density(S, [4, 8, 16], seed=0, samples=40000)
    for t, p, hw in zip(est.horizons, est.ratios, est.halfwidths):
        assert abs(p - (1 - 4 / t ** 2)) <= hw + 1e-12


def test_chaouchi_sublevel_membership():
    w = catalog_weight("chaouchi")
    S = sublevel_set(w, 0.5)
    x = np.array([10.0, 10.0, 3.0])
    y = np.array([-9.9, 9.0, 0.0])
    expected = x + y <= np.sqrt(x - y) - math.log(2)
    assert list(S.contains_xy(x, y)) == list(expected)


def test_sublevel_above_sup_is_everything():
    S = sublevel_set(catalog_weight("cubic"), 1.0)
    rng = np.random.default_rng(0)
    r, th = 10 * rng.random(200), A * (2 * rng.random(200) - 1)
    assert S.contains_xy(r * np.cos(th), r * np.sin(th)).all()


pts = st.tuples(st.floats(0, 30), st.floats(-A, A))


@given(st.sampled_from(["gauss", "exp", "cubic", "chaouchi"]), st.floats(1e-3, 1),
       st.floats(1e-3, 1), st.lists(pts, min_size=1, max_size=30))
def test_sublevel_monotone_in_eps(name, e1, e2, ps):
    lo, hi = sorted((e1, e2))
    w = catalog_weight(name)
    x = np.array([r * math.cos(t) for r, t in ps])
    y = np.array([r * math.sin(t) for r, t in ps])
    a, b = sublevel_set(w, lo).contains_xy(x, y), sublevel_set(w, hi).contains_xy(x, y)
    assert np.all(~a | b)


@given(st.sampled_from(["exp", "chaouchi"]), st.floats(0.05, 0.9), st.integers(1, 16),
       st.integers(0, 16), st.lists(pts, min_size=1, max_size=30))
def test_erosion_shrinks(name, eps, k, extra, ps):
    pitch = 1 / 8
    lo, hi = k * pitch, k * pitch + extra * pitch * 0.77
    w = catalog_weight(name)
    x = np.array([r * math.cos(t) for r, t in ps])
    y = np.array([r * math.sin(t) for r, t in ps])
    sub = sublevel_set(w, eps).contains_xy(x, y)
    e_lo = erosion_set(w, eps, lo, pitch).contains_xy(x, y)
    e_hi = erosion_set(w, eps, hi, pitch).contains_xy(x, y)
    assert np.all(~e_lo | sub)
    assert np.all(~e_hi | e_lo)


def test_shared_pitch_covers_are_nested():
    sec = Sector(A)
    small, big = cover_nodes(sec, 1.0, pitch=0.125), cover_nodes(sec, 2.3, pitch=0.125)
    assert set(small.tolist()) <= set(big.tolist())


def test_cover_nodes_within_truncation():
    nodes = cover_nodes(Sector(A), 2.0)
    sec = Sector(A)
    assert np.all(np.abs(nodes) <= 2.0 + 1e-12)
    assert all(sec.contains(complex(n)) for n in nodes)
    assert 0j in list(nodes)


def test_exp_erosion_contains_far_points():
    w = catalog_weight("exp")
    E = erosion_set(w, math.exp(-2), 1.0)
    x = np.array([3.2, 10.0, 1.0])
    y = np.zeros(3)
    assert list(E.contains_xy(x, y)) == [True, True, False]


# -- necessary verdict ---------------------------------------------------------

def test_necessary_passes_for_exp():
    v = check_necessary(catalog_weight("exp"), [math.exp(-2)], [10, 100, 1000], [1.0],
                        seed=0, samples=20000)
    assert v.status == "pass"


def test_necessary_fails_for_chaouchi():
    v = check_necessary(catalog_weight("chaouchi"), [0.5], [1e2, 1e3, 1e4], [1.0],
                        seed=0, samples=20000)
    assert v.status == "fail" and v.failing_eps == 0.5
    rs = v.curves[0]["estimate"].ratios
    assert all(b <= a for a, b in zip(rs, rs[1:])) and rs[-1] < 0.02


def test_necessary_fails_with_zeros_for_constant():
    v = check_necessary(catalog_weight("constant"), [0.5], [10, 100], [1.0], seed=0, samples=1000)
    assert v.status == "fail"
    assert v.curves[0]["estimate"].ratios == (0.0, 0.0)


def test_necessary_needs_inputs():
    with pytest.raises(ValueError):
        check_necessary(catalog_weight("exp"), [], [10], [1.0], seed=0, samples=100)
