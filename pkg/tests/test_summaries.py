import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import binder_bruteforce
from dpmvs.archive import DrawArchive
from dpmvs.chain import run_chain
from dpmvs.data import simulate_scenario1
from dpmvs.dp_core import Partition
from dpmvs.randist import make_rng
from dpmvs.rpms import RpmsSampler
from dpmvs.summaries import (
    autocorrelation,
    binder_loss,
    binder_point_estimate,
    coclustering_matrix,
    inclusion_summary,
    k_mode,
    k_posterior,
    marginal_inclusion_by_cluster,
    psbp_inclusion,
    rpms_inclusion,
)

archives_st = st.integers(2, 7).flatmap(
    lambda n: st.lists(st.lists(st.integers(0, 3), min_size=n, max_size=n), min_size=1, max_size=12)
)


def _archive(rows, model="rpms", **extra):
    arc = DrawArchive(model, len(rows[0]), {"assign": "ivec"})
    for r in rows:
        rec = {"assign": Partition.from_labels(list(r)).assign.copy()}
        rec.update(extra)
        arc.records.append(rec)
    return arc


def test_cocluster_identical_draws():
    C = coclustering_matrix(_archive([[0, 0, 1]] * 4))
    assert np.array_equal(C, [[1, 1, 0], [1, 1, 0], [0, 0, 1]])


def test_cocluster_two_partitions():
    C = coclustering_matrix(_archive([[0, 0, 1], [0, 1, 1]]))
    assert set(np.unique(C)) <= {0.0, 0.5, 1.0}
    assert C[0, 1] == 0.5 and C[1, 2] == 0.5 and C[0, 2] == 0.0


def test_cocluster_empty():
    with pytest.raises(ValueError):
        coclustering_matrix(DrawArchive("rpms", 3, {"assign": "ivec"}))
    with pytest.raises(ValueError):
        binder_point_estimate(DrawArchive("rpms", 3, {"assign": "ivec"}))


@settings(max_examples=60, deadline=None)
@given(archives_st)
def test_cocluster_structure(rows):
    C = coclustering_matrix(_archive(rows))
    assert np.allclose(C, C.T) and np.all(np.diag(C) == 1.0)
    assert np.all((C >= 0) & (C <= 1))


def test_binder_single_partition():
    est = binder_point_estimate(_archive([[1, 1, 0, 2]] * 3))
    assert est == Partition([0, 0, 1, 2])


def test_binder_matches_bruteforce():
    rows = [[0, 0, 1, 1], [0, 0, 0, 1], [0, 1, 1, 1], [0, 0, 0, 1], [0, 0, 1, 1], [0, 0, 1, 1]]
    idx, loss = binder_bruteforce(rows)
    est = binder_point_estimate(_archive(rows))
    assert est == Partition(rows[idx])
    assert binder_loss(est, coclustering_matrix(_archive(rows))) == pytest.approx(loss)


def test_binder_tie_goes_to_earliest():
    rows = [[0, 1], [0, 0]]
    assert binder_point_estimate(_archive(rows)) == Partition([0, 1])
    assert binder_point_estimate(_archive(rows[::-1])) == Partition([0, 0])


@settings(max_examples=60, deadline=None)
@given(archives_st)
def test_binder_never_worse_than_any_draw(rows):
    arc = _archive(rows)
    C = coclustering_matrix(arc)
    best = binder_loss(binder_point_estimate(arc), C)
    assert all(best <= binder_loss(np.array(r), C) + 1e-12 for r in rows)


@settings(max_examples=60, deadline=None)
@given(archives_st)
def test_binder_invariant_to_duplication(rows):
    assert binder_point_estimate(_archive(rows)) == binder_point_estimate(_archive(rows + rows))


@settings(max_examples=60, deadline=None)
@given(archives_st, st.permutations(range(4)))
def test_summaries_label_invariant(rows, perm):
    relabeled = [[perm[v] for v in r] for r in rows]
    a, b = _archive(rows), _archive(relabeled)
    assert np.array_equal(coclustering_matrix(a), coclustering_matrix(b))
    assert binder_point_estimate(a) == binder_point_estimate(b)
    assert k_posterior(a) == k_posterior(b)


def test_k_posterior_and_mode():
    arc = _archive([[0, 0, 1], [0, 1, 2], [0, 0, 1], [0, 0, 0]])
    assert k_posterior(arc) == {1: 0.25, 2: 0.5, 3: 0.25}
    assert k_mode(arc) == 2


def test_autocorrelation_examples():
    assert autocorrelation(np.ones(50), 3) == 0.0
    assert autocorrelation(np.tile([1.0, -1.0], 50), 1) == pytest.approx(-1.0, abs=0.02)


def test_autocorrelation_white_noise():
    x = np.random.default_rng(0).standard_normal(10**5)
    assert abs(autocorrelation(x, 1)) < 0.01


def test_autocorrelation_lag_too_large():
    with pytest.raises(ValueError):
        autocorrelation(np.arange(5.0), 5)


def _theta_archive(thetas, fixed=True, intercept=False):
    arc = DrawArchive("rpms", 4, {"assign": "ivec", "theta": "fmat"},
                      meta={"fixed_partition": fixed, "intercept": intercept})
    for th in thetas:
        arc.records.append({"assign": np.array([0, 0, 1, 1]), "theta": np.array(th, float)})
    return arc


def test_inclusion_by_cluster_spike_forcing():
    # spike everywhere (pi = 1) against slab everywhere (pi = 0)
    spike = _theta_archive([[[0.0, 1.0], [0.0, 2.0]]] * 5)
    slab = _theta_archive([[[0.3, 1.0], [-2.0, 2.0]]] * 5)
    assert np.array_equal(marginal_inclusion_by_cluster(spike)[:, 0], [0, 0])
    assert np.array_equal(marginal_inclusion_by_cluster(slab)[:, 0], [1, 1])


def test_inclusion_by_cluster_fractions_and_intercept():
    arc = _theta_archive([[[5.0, 0.0, 1.0], [5.0, 1.0, 1.0]], [[5.0, 1.0, 0.0], [5.0, 0.0, 1.0]]], intercept=True)
    M = marginal_inclusion_by_cluster(arc, Partition([0, 0, 1, 1]))
    assert np.allclose(M, [[0.5, 0.5], [0.5, 1.0]])


def test_inclusion_by_cluster_requires_fixed_partition():
    with pytest.raises(ValueError):
        marginal_inclusion_by_cluster(_theta_archive([[[1.0]]], fixed=False))
    with pytest.raises(ValueError):
        marginal_inclusion_by_cluster(_theta_archive([[[1.0], [1.0]]]), Partition([0, 1, 1, 1]))


def test_inclusion_by_cluster_scenario1_rerun():
    ds, truth = simulate_scenario1(1)
    part = Partition(truth["assign"])
    arc = run_chain(RpmsSampler(ds, fixed_partition=part), make_rng(2), 1500, 500)
    M = marginal_inclusion_by_cluster(arc, part)
    # covariate 2 has effect 5 in both generating clusters
    assert M.shape == (2, 2) and np.all(M[:, 1] > 0.95)


def test_rpms_and_psbp_inclusion_arithmetic():
    arc = DrawArchive("rpms", 4, {}, meta={"column_names": ["a", "b"]})
    arc.records.append({"assign": np.array([0, 0, 0, 1]), "theta": np.array([[1.0, 0.0], [0.0, 2.0]])})
    assert np.allclose(rpms_inclusion(arc), [0.75, 0.25])
    assert inclusion_summary(arc) == {"a": 0.75, "b": 0.25}
    g = DrawArchive("psbp", 4, {}, meta={"covariate_names": ["a"]})
    g.records += [{"gamma": np.array([[0.0], [1.0]])}, {"gamma": np.zeros((2, 1))}]
    assert np.allclose(psbp_inclusion(g), [0.5])
