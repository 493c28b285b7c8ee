import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pricelimit.contagion import run_cascade
from pricelimit.critical import (
    ALWAYS,
    CANNOT_FAIL,
    INDETERMINATE,
    NEVER,
    UNAVOIDABLE,
    DomainError,
    average_cascade_steps,
    default_bins,
    driving_node_probability,
    find_alpha_c,
    max_alpha_ci_histogram,
    neighbor_alpha_c,
    neighbor_alpha_c_simplified,
    neighbor_thresholds,
    pearson,
    sweep,
)
from pricelimit.network import load_holdings
from pricelimit.synthetic import random_bipartite, star, toy_t1, toy_t2

from oracle import naive_cascade, structural_p_d
from strategies import limit, small_records


def test_exact_threshold_t1():
    t = neighbor_alpha_c(toy_t1(), "S1", "S2", 0.1)
    assert t.value == pytest.approx(1.6)
    assert t.flag == UNAVOIDABLE


def test_exact_threshold_t2():
    t = neighbor_alpha_c(toy_t2(), "S1", "S2", 0.6)
    assert t.value == pytest.approx(0.8)


def test_simplified_threshold_t1():
    assert neighbor_alpha_c_simplified(toy_t1(), "S1", "S2", 0.1).value == pytest.approx(0.8)
    # S1 and S3 are fully nested in S2's holders
    assert neighbor_alpha_c_simplified(toy_t1(), "S2", "S1", 0.1).value == 0.9
    assert neighbor_alpha_c_simplified(toy_t1(), "S2", "S3", 0.1).value == 0.9


def test_threshold_domain_errors():
    with pytest.raises(DomainError):
        neighbor_alpha_c(toy_t1(), "S1", "S3", 0.1)
    with pytest.raises(DomainError):
        neighbor_alpha_c_simplified(toy_t1(), "S1", "S1", 0.1)


def test_cannot_fail_is_clamped():
    # target mostly held outside the shock's investors
    net = load_holdings([("C1", "S1", 1.0), ("C1", "S2", 0.1), ("C2", "S2", 10.0)])
    t = neighbor_alpha_c_simplified(net, "S1", "S2", 0.1)
    assert t.value == 0.0 and t.flag == CANNOT_FAIL


def test_vectorised_exact_matches_scalar_t1():
    nbr, vals = neighbor_thresholds(toy_t1(), 0, 0.1, simplified=False)
    assert list(nbr) == [1] and vals[0] == pytest.approx(1.6)


def test_exact_at_least_simplified_fixture():
    net = random_bipartite(30, 6, 80, seed=3)
    for j in range(net.n_stocks):
        n1, exact = neighbor_thresholds(net, j, 0.3, simplified=False)
        n2, simp = neighbor_thresholds(net, j, 0.3, simplified=True)
        assert (n1 == n2).all()
        # clamped at zero, as negative values all mean the target cannot fail
        assert (np.maximum(exact, 0) >= np.maximum(simp, 0) - 1e-12).all()


@given(small_records(max_investors=5, max_stocks=6), limit, st.data())
def test_exact_ge_simplified(recs, c, data):
    net = load_holdings(recs)
    j = data.draw(st.sampled_from(net.stocks))
    for i in net.stocks:
        if i == j or not net.holders(i) & net.holders(j):
            continue
        ex = neighbor_alpha_c(net, j, i, c)
        si = neighbor_alpha_c_simplified(net, j, i, c)
        if ex.flag != INDETERMINATE:
            assert ex.value >= si.value - 1e-12


@given(small_records(max_investors=5, max_stocks=6), limit, st.data())
def test_vectorised_matches_scalar(recs, c, data):
    net = load_holdings(recs)
    j = data.draw(st.sampled_from(net.stocks))
    nbr, vals = neighbor_thresholds(net, net.stock_index[j], c)
    for k, v in zip(nbr, vals):
        t = neighbor_alpha_c_simplified(net, j, net.stocks[k], c)
        assert max(v, 0.0) == pytest.approx(t.value, rel=1e-12, abs=1e-12)


@given(
    st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=4),
    st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=4),
    limit,
)
def test_full_nestedness_is_exactly_one_minus_c(target_w, extra_w, c):
    recs = []
    for m, w in enumerate(target_w):
        recs.append((f"C{m}", "T", w))
        recs.append((f"C{m}", "J", extra_w[m % len(extra_w)]))
    net = load_holdings(recs)
    assert neighbor_alpha_c_simplified(net, "J", "T", c).value == 1 - c


def test_cascade_flip_matches_threshold_t2():
    a = find_alpha_c(toy_t2(), "S1", 0.6, collapse_threshold=1.0, tol=1e-3)
    assert abs(a.value - 0.8) <= 1e-3
    assert run_cascade(toy_t2(), "S1", 0.8, 0.6).final_failed_fraction == 1.0
    assert run_cascade(toy_t2(), "S1", 0.8 + 1e-9, 0.6).final_failed_fraction == 0.5


def test_sentinels():
    assert find_alpha_c(toy_t1(), "S1", 0.1).status == ALWAYS
    net = load_holdings([("C1", "S1", 1.0), ("C2", "S2", 1.0), ("C3", "S3", 1.0)])
    a = find_alpha_c(net, "S1", 0.5)
    assert a.status == NEVER and a.value == 0.0 and a.is_sentinel


def test_find_alpha_c_argument_checks():
    with pytest.raises(ValueError):
        find_alpha_c(toy_t2(), "S1", 0.5, collapse_threshold=0.0)
    with pytest.raises(ValueError):
        find_alpha_c(toy_t2(), "S1", 0.5, tol=0.0)


def test_nested_chain_approaches_one_minus_c():
    # one investor owning many tiny stocks: concentration -> 0
    net = star(200)
    for c in (0.2, 0.5, 0.8):
        a = find_alpha_c(net, "S000", c, tol=1e-4)
        assert abs(a.value - (1 - c)) < 0.01


def test_bisection_bracket_consistent():
    net = random_bipartite(40, 6, 90, seed=1)
    c = 0.3
    for s in net.stocks[:8]:
        a = find_alpha_c(net, s, c, tol=1e-3)
        if a.is_sentinel:
            continue
        assert run_cascade(net, s, max(a.value - 1e-3, 0), c).final_failed_fraction >= 0.5
        assert run_cascade(net, s, min(a.value + 1e-3, 1), c).final_failed_fraction < 0.5


def test_sweep_grid_consistent_with_alpha_c():
    net = random_bipartite(25, 5, 60, seed=2)
    res = sweep(net, [0.2, 0.4], [0.0, 0.25, 0.5, 0.75, 1.0], tol=1e-3)
    assert len(res.grid) == 2 * 5 * net.n_stocks
    for (c, alpha, s), (frac, collapsed) in res.grid.items():
        assert collapsed == (frac >= 0.5)
        a = res.alpha_c_per_shock[(c, s)]
        if a.is_sentinel:
            continue
        if alpha < a.value - 1e-3:
            assert collapsed
        if alpha > a.value + 1e-3:
            assert not collapsed
    agg = res.aggregate()
    assert list(agg) == [0.2, 0.4]
    assert agg[0.2]["n_shocks"] == net.n_stocks


def test_sweep_parallel_identical():
    net = random_bipartite(25, 5, 60, seed=2)
    a = sweep(net, [0.3], [0.5], workers=1)
    b = sweep(net, [0.3], [0.5], workers=3)
    assert a.grid == b.grid and a.alpha_c_per_shock == b.alpha_c_per_shock


def test_p_d_star():
    n = 10
    p_d = driving_node_probability(star(n), 0.3)
    assert all(v == pytest.approx((n - 1) / n) for v in p_d.values())


def test_p_d_private_investor():
    net = load_holdings([("C1", "S1", 1.0), ("C1", "S2", 1.0), ("P", "S2", 1.0)])
    assert driving_node_probability(net, 0.2)["S2"] == 0.0
    assert driving_node_probability(net, 0.2)["S1"] == 0.5


def test_p_d_t1():
    assert driving_node_probability(toy_t1(), 0.1) == pytest.approx({"S1": 1 / 3, "S2": 0.0, "S3": 1 / 3})


def test_p_d_ten_stocks_against_brute_force():
    net = load_holdings(random_bipartite(10, 3, 16, seed=4).records())
    assert net.n_stocks == 10
    recs = net.records()
    brute = structural_p_d(recs)
    assert driving_node_probability(net, 0.25) == pytest.approx(brute)
    # same count from the per-pair scalar thresholds over all 10 shocks
    c = 0.25
    counted = {s: 0 for s in net.stocks}
    for j in net.stocks:
        for i in net.stocks:
            if i != j and net.holders(i) & net.holders(j):
                t = neighbor_alpha_c_simplified(net, j, i, c)
                counted[i] += t.value == 1 - c
    assert {s: v / 10 for s, v in counted.items()} == pytest.approx(brute)


@given(small_records(max_investors=5, max_stocks=7), limit)
def test_p_d_structural(recs, c):
    net = load_holdings(recs)
    assert driving_node_probability(net, c) == pytest.approx(structural_p_d(net.records()))


def test_histogram_t1():
    h = max_alpha_ci_histogram(toy_t1(), 0.1)
    assert h.max_per_shock == pytest.approx({"S1": 0.8, "S2": 0.9, "S3": 0.8})
    assert h.fraction_at_boundary == pytest.approx(1 / 3)
    assert h.fractions.sum() == pytest.approx(1.0)


def test_histogram_star_on_diagonal():
    for c in (0.1, 0.5, 0.9):
        h = max_alpha_ci_histogram(star(12), c)
        assert h.fraction_at_boundary == 1.0
        k = int(np.searchsorted(h.edges, 1 - c, side="right")) - 1
        assert h.fractions[k] == 1.0


def test_default_bins_centre_grid():
    edges = default_bins()
    assert len(edges) == 10
    for v in np.round(np.arange(0.1, 1.0, 0.1), 10):
        k = int(np.searchsorted(edges, v, side="right")) - 1
        assert edges[k] < v < edges[k + 1]


def test_average_steps_t1():
    out = average_cascade_steps(toy_t1(), 0.1, 1.0)
    assert out.mean_step == pytest.approx({"S1": 1.5, "S2": 1.0, "S3": 1.5})
    assert out.n_never_failed == 0


def test_average_steps_match_naive():
    net = random_bipartite(12, 4, 20, seed=5)
    recs = net.records()
    out = average_cascade_steps(net, 0.2, 0.6)
    steps = {}
    for s in net.stocks:
        timeline, *_ = naive_cascade(recs, s, 0.6, 0.2)
        for tau, group in timeline[1:]:
            for t in group:
                steps.setdefault(t, []).append(tau)
    assert out.mean_step == pytest.approx({k: np.mean(v) for k, v in steps.items()})


def test_pearson_undefined_cases():
    assert math.isnan(pearson([1, 2], [3, 4])[0])
    assert math.isnan(pearson([1, 2, 3], [5, 5, 5])[0])
    assert pearson([1, 2, 3], [2, 4, 6])[0] == pytest.approx(1.0)
