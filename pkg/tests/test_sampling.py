import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cell
from oracles import brute_extent, brute_greedy, extent_formula
from patchmem.errors import ValidationError
from patchmem.sampling import (
    SamplerConfig,
    adaptive_sample,
    assign_clusters,
    cluster_extent,
    greedy_coreset,
    max_cluster_extent,
    ratio_key_count,
)


# --- greedy selection -------------------------------------------------------


def test_greedy_trace_k2():
    vectors = np.array([[0.0], [1.0], [2.0], [10.0]])
    idx, clamped = greedy_coreset(vectors, 2)
    assert list(idx) == [0, 3]
    assert not clamped


def test_greedy_trace_k3():
    # after {0, 10}: min sq-dists are 1 (point 1) and 4 (point 2)
    vectors = np.array([[0.0], [1.0], [2.0], [10.0]])
    idx, _ = greedy_coreset(vectors, 3)
    assert list(idx) == [0, 3, 2]


def test_greedy_selects_all_when_k_equals_n():
    vectors = np.random.default_rng(0).standard_normal((12, 3))
    idx, clamped = greedy_coreset(vectors, 12)
    assert sorted(idx) == list(range(12))
    assert not clamped


def test_greedy_clamps_oversized_k():
    vectors = np.random.default_rng(1).standard_normal((5, 2))
    idx, clamped = greedy_coreset(vectors, 9)
    assert sorted(idx) == list(range(5))
    assert clamped


def test_greedy_matches_brute_force_seeded():
    rng = np.random.default_rng(42)
    for _ in range(60):
        n = int(rng.integers(1, 65))
        d = int(rng.integers(1, 9))
        k = int(rng.integers(1, n + 1))
        vectors = rng.standard_normal((n, d))
        ours, _ = greedy_coreset(vectors, k)
        assert list(ours) == brute_greedy(vectors.tolist(), k)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 20), d=st.integers(1, 4))
def test_greedy_matches_brute_force_property(seed, n, d):
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((n, d))
    k = int(rng.integers(1, n + 1))
    ours, _ = greedy_coreset(vectors, k)
    assert list(ours) == brute_greedy(vectors.tolist(), k)


def test_greedy_tie_breaks_to_lowest_index():
    # symmetric pair at equal distance from the start: index 1 must win
    vectors = np.array([[0.0], [5.0], [-5.0]])
    idx, _ = greedy_coreset(vectors, 2)
    assert list(idx) == [0, 1]


def test_greedy_invariant_under_duplicate_append():
    rng = np.random.default_rng(7)
    vectors = rng.standard_normal((20, 3))
    k = 5
    base, _ = greedy_coreset(vectors, k)
    # append copies of already-selected vectors: min-distance zero, never picked
    dup = np.concatenate([vectors, vectors[base[:3]]], axis=0)
    again, _ = greedy_coreset(dup, k)
    assert list(base) == list(again)


def test_greedy_seeded_random_init_deterministic():
    vectors = np.random.default_rng(3).standard_normal((30, 4))
    cfg = SamplerConfig(rng_seed=99, init_mode="seeded_random")
    a, _ = greedy_coreset(vectors, 6, cfg)
    b, _ = greedy_coreset(vectors, 6, cfg)
    assert list(a) == list(b)
    # brute force agrees once the start index is fixed
    assert list(a) == brute_greedy(vectors.tolist(), 6, start=int(a[0]))


def test_greedy_empty_cell_rejected():
    with pytest.raises(ValidationError):
        greedy_coreset(np.zeros((0, 3)), 1)


# --- cluster assignment -----------------------------------------------------


def test_assign_single_key():
    vectors = np.random.default_rng(0).standard_normal((10, 2))
    assign = assign_clusters(vectors, np.array([4]))
    assert np.all(assign == 0)


def test_assign_nearest_key():
    vectors = np.array([[0.0], [10.0], [3.0]])
    assign = assign_clusters(vectors, np.array([0, 1]))
    assert assign[2] == 0  # |3-0| < |3-10|


def test_assign_tie_goes_to_lower_position():
    vectors = np.array([[0.0], [10.0], [5.0]])
    assign = assign_clusters(vectors, np.array([0, 1]))
    assert assign[2] == 0


def test_assign_key_owns_itself():
    # duplicate vectors selected as two keys: each index maps to its own key
    vectors = np.array([[1.0], [1.0], [2.0]])
    assign = assign_clusters(vectors, np.array([0, 1]))
    assert assign[0] == 0
    assert assign[1] == 1


# --- cluster extent ---------------------------------------------------------


def test_extent_zero_for_identical_members():
    key = np.array([1.0, 2.0])
    members = np.tile(key, (5, 1))
    assert cluster_extent(key, members) == 0.0


def test_extent_half_at_ln3():
    # squared distance ln 3  ->  1 - 2/(1+3) = 0.5
    key = np.array([0.0])
    members = np.array([[0.0], [math.sqrt(math.log(3.0))]])
    assert cluster_extent(key, members) == pytest.approx(0.5, abs=1e-9)


def test_extent_saturates_finite():
    key = np.zeros(1)
    for s in (10.0, 100.0, 1e6):
        members = np.array([[0.0], [math.sqrt(s)]])
        d = cluster_extent(key, members)
        assert math.isfinite(d)
        assert d == pytest.approx(extent_formula(s), abs=1e-12)
        assert 0.0 <= d <= 1.0


def test_extent_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(20):
        members = rng.standard_normal((8, 3))
        key = members[2]
        assert cluster_extent(key, members) == pytest.approx(
            brute_extent(key.tolist(), members.tolist()), abs=1e-12
        )


@settings(max_examples=30, deadline=None)
@given(s1=st.floats(0, 50), s2=st.floats(0, 50))
def test_extent_monotone_in_distance(s1, s2):
    key = np.zeros(1)
    d1 = cluster_extent(key, np.array([[math.sqrt(s1)]]))
    d2 = cluster_extent(key, np.array([[math.sqrt(s2)]]))
    if s1 <= s2:
        assert d1 <= d2


# --- ratio arithmetic -------------------------------------------------------


def test_ratio_key_count_exact_products():
    assert ratio_key_count(0.1, 100) == 10
    assert ratio_key_count(0.1, 160) == 16
    assert ratio_key_count(0.2, 160) == 32
    assert ratio_key_count(0.1, 7) == 1
    assert ratio_key_count(0.15, 10) == 2  # ceil(1.5)
    assert ratio_key_count(0.001, 3) == 1  # floor of 1


# --- sampler config ---------------------------------------------------------


def test_config_escalation_budget_invariant():
    SamplerConfig(base_ratio=0.5, escalation_factor=2.0, max_escalations=1).validate()
    with pytest.raises(ValidationError):
        SamplerConfig(base_ratio=0.6, escalation_factor=2.0, max_escalations=1).validate()
    with pytest.raises(ValidationError):
        SamplerConfig(base_ratio=1.0, escalation_factor=2.0, max_escalations=1).validate()
    SamplerConfig(base_ratio=1.0, max_escalations=0).validate()


# --- adaptive sampling ------------------------------------------------------


def test_adaptive_identical_vectors_no_escalation():
    cell = make_cell(np.ones((100, 4), dtype=np.float32))
    out = adaptive_sample(cell, SamplerConfig())
    assert out.key_count == 10
    assert out.max_extent == 0.0
    assert not out.escalated


def test_adaptive_bimodal_escalates_to_double():
    # two wide modes: the initial 10-key clustering cannot shrink the
    # within-cluster spread below the threshold, so the cell escalates
    rng = np.random.default_rng(13)
    a = rng.standard_normal((50, 4)) * 1.5 + 5.0
    b = rng.standard_normal((50, 4)) * 1.5 - 5.0
    cell = make_cell(np.concatenate([a, b]).astype(np.float32))
    cfg = SamplerConfig()
    out = adaptive_sample(cell, cfg)
    # verify the trigger via the independent extent computation
    k0_idx, _ = greedy_coreset(cell.vectors.astype(np.float64), 10, cfg)
    assert max_cluster_extent(cell.vectors.astype(np.float64), k0_idx) > 0.5
    assert out.escalated
    assert out.key_count == 20
    assert out.max_extent > 0.5


def test_adaptive_full_ratio_keeps_everything():
    cell = make_cell(np.random.default_rng(1).standard_normal((30, 3)).astype(np.float32))
    cfg = SamplerConfig(base_ratio=1.0, max_escalations=0)
    out = adaptive_sample(cell, cfg)
    assert out.key_count == 30
    assert sorted(out.indices) == list(range(30))
    assert not out.escalated


def test_adaptive_deterministic():
    cell = make_cell(np.random.default_rng(2).standard_normal((64, 5)).astype(np.float32))
    cfg = SamplerConfig()
    a = adaptive_sample(cell, cfg)
    b = adaptive_sample(cell, cfg)
    assert list(a.indices) == list(b.indices)
    assert a.max_extent == b.max_extent
    assert a.escalated == b.escalated


def test_adaptive_spread_never_gets_fewer_keys():
    # equal-size cells under one config: the high-extent cell cannot end up
    # with fewer keys than the low-extent cell
    rng = np.random.default_rng(3)
    tight = make_cell((rng.standard_normal((80, 4)) * 0.01).astype(np.float32))
    wide_modes = np.concatenate(
        [rng.standard_normal((40, 4)) * 2 + 6, rng.standard_normal((40, 4)) * 2 - 6]
    )
    wide = make_cell(wide_modes.astype(np.float32))
    cfg = SamplerConfig()
    out_tight = adaptive_sample(tight, cfg)
    out_wide = adaptive_sample(wide, cfg)
    assert out_tight.max_extent <= out_wide.max_extent
    assert out_wide.key_count >= out_tight.key_count


def test_adaptive_max_escalations_zero_never_escalates():
    rng = np.random.default_rng(4)
    wide = make_cell((rng.standard_normal((50, 4)) * 3).astype(np.float32))
    out = adaptive_sample(wide, SamplerConfig(max_escalations=0))
    assert not out.escalated
    assert out.key_count == 5


def test_adaptive_escalation_clamps_to_cell_size():
    # escalation may overshoot a tiny cell; sampling clamps, never fails
    rng = np.random.default_rng(5)
    wide = make_cell((rng.standard_normal((3, 2)) * 50).astype(np.float32))
    out = adaptive_sample(wide, SamplerConfig(base_ratio=0.5, escalation_factor=2.0))
    assert out.key_count <= 3
