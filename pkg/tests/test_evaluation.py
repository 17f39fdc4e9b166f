import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from gemkoc import model as mk
from gemkoc.classifiers import GridSpec, classifier, config_grid
from gemkoc.data_io import FoldSplit, OneClassTask
from gemkoc.evaluation import (
    ConfusionCounts,
    ResultTable,
    evaluate_fold,
    eta_m,
    eta_p,
    f_sf,
    friedman_chi2,
    friedman_ranks,
    gmean,
    grid_search,
    iman_davenport,
    rank_matrix,
    read_table,
    stats_report,
)
from gemkoc.layers import LayerHyperparams

counts = st.integers(0, 50)


def table(rows, std=None):
    rows = np.atleast_2d(np.asarray(rows, float))
    return ResultTable([f"c{i}" for i in range(rows.shape[0])], [f"d{j}" for j in range(rows.shape[1])], rows, std)


# gmean

def test_gmean_examples():
    assert gmean(ConfusionCounts(tp=5)) == 1.0
    assert gmean(ConfusionCounts(tp=0, fp=3, fn=2)) == 0.0
    assert gmean(ConfusionCounts(tp=4, fp=1, fn=1)) == pytest.approx(0.8, abs=1e-15)
    assert gmean(ConfusionCounts()) == 0.0


def test_counts_nonnegative():
    with pytest.raises(ValueError):
        ConfusionCounts(tp=-1)


@given(counts, counts, counts, counts, counts)
def test_gmean_range_and_tn_invariance(tp, fp, fn, tn1, tn2):
    a = gmean(ConfusionCounts(tp, fp, fn, tn1))
    assert 0.0 <= a <= 1.0
    assert a == gmean(ConfusionCounts(tp, fp, fn, tn2))


# aggregates

def test_eta_m_examples():
    assert eta_m(table([[80, 80, 80]]), "c0") == 80
    assert eta_m(table([[60, 80]]), "c0") == 70


def test_eta_p_examples():
    t = table([[50.0], [100.0]])
    assert [eta_p(t, "c0"), eta_p(t, "c1")] == [50.0, 100.0]
    t = table([[90, 70], [80, 60]])
    assert eta_p(t, "c0") == 100.0


def test_eta_p_zero_column():
    with pytest.raises(ValueError):
        eta_p(table([[0.0], [0.0]]), "c0")


def test_unknown_classifier():
    with pytest.raises(KeyError):
        eta_m(table([[1.0]]), "nope")


def test_friedman_ranks_examples():
    assert list(friedman_ranks(table([[3], [2], [1]])).values()) == [1, 2, 3]
    assert list(friedman_ranks(table([[5], [5], [1]])).values()) == [1.5, 1.5, 3]
    # ties are judged after rounding to two decimals
    assert list(friedman_ranks(table([[70.001], [69.998]])).values()) == [1.5, 1.5]


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.tuples(st.integers(2, 8), st.integers(1, 6)), elements=st.sampled_from([10.0, 20.0, 20.0, 50.0, 80.0])))
def test_rank_conservation(vals):
    r = rank_matrix(table(vals))
    k = vals.shape[0]
    np.testing.assert_allclose(r.sum(axis=0), k * (k + 1) / 2)


def _chi2_from_rank_sums(r, n):
    """Classical form: 12/(n k (k+1)) * sum R_j^2 - 3 n (k+1) with R_j rank sums."""
    k = r.shape[0]
    sums = r.sum(axis=1)
    return 12.0 / (n * k * (k + 1)) * np.sum(sums**2) - 3.0 * n * (k + 1)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(2, 6), st.integers(2, 8)), elements=st.floats(0, 100)))
def test_chi2_matches_rank_sum_formula(vals):
    t = table(vals)
    n = vals.shape[1]
    chi2 = friedman_chi2(list(friedman_ranks(t).values()), n)
    assert chi2 == pytest.approx(_chi2_from_rank_sums(rank_matrix(t), n), abs=1e-9)


def test_identical_ranks_give_zero():
    assert friedman_chi2([2.0, 2.0, 2.0], 4) == pytest.approx(0.0, abs=1e-12)
    assert iman_davenport(0.0, 4, 3) == 0.0


def test_iman_davenport_hand_instance():
    # three datasets, three classifiers, a strict order everywhere
    r = np.array([1.0, 2.0, 3.0])
    chi2 = 12 * 3 / (3 * 4) * (1 + 4 + 9 - 3 * 16 / 4)
    assert friedman_chi2(r, 3) == pytest.approx(chi2) == pytest.approx(6.0)
    # denominator N(k-1) - chi2 = 0 is rejected
    with pytest.raises(ValueError):
        iman_davenport(6.0, 3, 3)
    assert iman_davenport(4.0, 3, 3) == pytest.approx(2 * 4.0 / (6 - 4.0))


@pytest.mark.parametrize("x,d1,d2", [(6.33, 14, 280), (1.0, 3, 9), (0.2, 1, 1), (25.0, 5, 50)])
def test_f_sf_matches_scipy(x, d1, d2):
    assert f_sf(x, d1, d2) == pytest.approx(stats.f.sf(x, d1, d2), rel=1e-10, abs=1e-15)


def test_stats_single_classifier_and_constant_table():
    rep = stats_report(table([[50, 60, 70]]))
    assert rep.eta_f == {"c0": 1.0}
    rep = stats_report(table([[50, 50], [50, 50], [50, 50]]))
    assert rep.f_f == 0.0 and rep.p_value == 1.0
    assert "Iman-Davenport" in rep.to_text()


# tables

def test_csv_round_trip(tmp_path):
    t = table([[99.5, 12.346], [0.0, 100.0]], std=[[1.0, 2.0], [0.0, 0.5]])
    p = tmp_path / "t.csv"
    p.write_text(t.to_csv())
    assert p.read_text().splitlines()[1] == "c0,99.50 (1.00),12.35 (2.00)"
    back = read_table(p)
    assert back.classifiers == t.classifiers and back.datasets == t.datasets
    np.testing.assert_allclose(back.mean, np.round(t.mean, 2))


def test_text_table_alignment():
    lines = table([[1.0, 22.5]], std=[[0.1, 3.0]]).to_text().splitlines()
    assert len({len(line) for line in lines}) == 1


def test_read_table_bad_cell(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("classifier,a\nx,abc\n")
    with pytest.raises(ValueError):
        read_table(p)


# evaluate_fold / grid_search

def _fold(rng):
    train = rng.normal(size=(20, 2))
    return FoldSplit(0, train, rng.normal(size=(5, 2)), rng.normal(loc=50.0, size=(7, 2)))


def test_evaluate_fold_separation(rng):
    fold = _fold(rng)
    m = mk.fit(fold.train_targets, mk.MkocConfig(eta=1.0))
    m = mk.MkocModel(m.encoders, m.head, m.threshold_kind, 0.9, m.train_output_mean, m.r, m.eta)
    c = evaluate_fold(m, fold)
    assert (c.fp, c.fn) == (0, 0) and c.total == fold.n_test


def test_evaluate_fold_accept_everything(rng):
    fold = _fold(rng)
    m = mk.fit(fold.train_targets, mk.MkocConfig())
    m = mk.MkocModel(m.encoders, m.head, m.threshold_kind, 1e9, m.train_output_mean, m.r, m.eta)
    c = evaluate_fold(m, fold)
    assert c.fp == 7 and c.fn == 0 and c.total == 12


def _blob_task(seed=0):
    rng = np.random.default_rng(seed)
    return OneClassTask("blob", rng.normal(size=(30, 2)), rng.normal(loc=3.0, size=(30, 2)))


def test_grid_one_config():
    cfg = config_grid(classifier("KOC"), GridSpec(c=(1.0,)))
    res = grid_search(_blob_task(), cfg, k=3)
    assert res.best.config == cfg[0] and res.best.gmeans.shape == (3,)
    assert 0 <= res.mean <= 100


def test_grid_argmax_and_tie_break():
    grid = [mk.MkocConfig(layers=LayerHyperparams(c)) for c in (1.0, 1.0, 8.0, 0.125)]
    res = grid_search(_blob_task(), grid, k=3, runs=2)
    means = [s.mean for s in res.scores]
    assert res.best is res.scores[int(np.argmax(means))]
    assert res.best is not res.scores[1]  # identical to the first config, never preferred
    assert res.best.gmeans.shape == (6,)
    assert res.std == pytest.approx(100 * np.std(res.best.gmeans))


def test_grid_depth_sharing_matches_independent_fits():
    spec = classifier("LMKOC-LLE_theta1")
    grid = config_grid(spec, GridSpec(c=(1.0,), lam=(1.0,), depth=(1, 2, 3)))
    task = _blob_task()
    shared = grid_search(task, grid, k=3)
    for cfg in grid:
        alone = grid_search(task, [cfg], k=3)
        np.testing.assert_array_equal(alone.best.gmeans, next(s.gmeans for s in shared.scores if s.config == cfg))


def test_grid_parallel_equals_serial():
    grid = config_grid(classifier("GKOC-CDA"), GridSpec(c=(0.5, 2.0), lam=(1.0,), clusters=(2, 3)))
    a = grid_search(_blob_task(), grid, k=3, jobs=1)
    b = grid_search(_blob_task(), grid, k=3, jobs=2)
    for x, y in zip(a.scores, b.scores):
        np.testing.assert_array_equal(x.gmeans, y.gmeans)


def test_grid_empty():
    with pytest.raises(ValueError):
        grid_search(_blob_task(), [])
