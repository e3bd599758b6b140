import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xmem import (
    ConfigError,
    KeyBlock,
    LongTermMemory,
    ShrinkageVector,
    ValueBlock,
    potentiate,
    select_kmeans,
    select_prototypes,
    select_random,
)
from xmem.long_term_memory import ConsolidationReport
from xmem.oracle import oracle_top_p


def _candidates(rng, n, c_k=3, c_v=4):
    return (
        KeyBlock(rng.uniform(-1, 1, (c_k, n)).astype(np.float32)),
        ShrinkageVector(rng.uniform(1, 6, n).astype(np.float32)),
        ValueBlock(rng.uniform(-2, 2, (c_v, n)).astype(np.float32)),
    )


def _protos(rng, n, c_k=3, c_v=4):
    keys, shrink, values = _candidates(rng, n, c_k, c_v)
    return keys, shrink, values


# -- selection ---------------------------------------------------------------

def test_select_top2_by_usage():
    keys = KeyBlock(np.zeros((2, 3), dtype=np.float32))
    assert select_prototypes(keys, np.array([0.5, 0.1, 0.9]), p=2) == [0, 2]


def test_select_ties_go_to_lower_index():
    keys = KeyBlock(np.zeros((2, 5), dtype=np.float32))
    assert select_prototypes(keys, np.ones(5), p=3) == [0, 1, 2]


def test_select_matches_full_sort_oracle():
    rng = np.random.default_rng(31)
    hw = 12
    usage = rng.uniform(0, 1, 5 * hw)
    keys = KeyBlock(np.zeros((2, 5 * hw), dtype=np.float32))
    assert select_prototypes(keys, usage, p=13) == oracle_top_p(usage, 13)


def test_select_empty_candidates():
    keys = KeyBlock(np.zeros((2, 0), dtype=np.float32))
    assert select_prototypes(keys, np.zeros(0), p=4) == []


def test_select_random_is_seeded_and_unique():
    rng = np.random.default_rng(32)
    keys, _, _ = _candidates(rng, 20)
    a = select_random(keys, np.zeros(20), 8, np.random.default_rng(5))
    b = select_random(keys, np.zeros(20), 8, np.random.default_rng(5))
    assert a == b
    assert len(set(a)) == 8
    assert all(0 <= i < 20 for i in a)


def test_select_kmeans_unique_and_snapped():
    rng = np.random.default_rng(33)
    keys, _, _ = _candidates(rng, 30)
    picked = select_kmeans(keys, np.zeros(30), 6, np.random.default_rng(7))
    assert len(picked) == 6
    assert len(set(picked)) == 6
    assert all(0 <= i < 30 for i in picked)
    repeat = select_kmeans(keys, np.zeros(30), 6, np.random.default_rng(7))
    assert picked == repeat


# -- potentiation --------------------------------------------------------------

def test_potentiate_singleton_is_identity():
    rng = np.random.default_rng(34)
    keys, shrink, values = _candidates(rng, 1)
    pk, ps, pv = potentiate(keys, shrink, values, [0], top_k=30)
    npt.assert_array_equal(pk.data, keys.data)
    npt.assert_allclose(pv.data, values.data, atol=1e-6)
    npt.assert_allclose(ps.data, shrink.data, atol=1e-6)


def test_potentiate_identical_keys_average_values():
    keys = KeyBlock(np.array([[0.5], [0.5]], dtype=np.float32)[:, [0, 0]])
    shrink = ShrinkageVector(np.array([2.0, 2.0], dtype=np.float32))
    values = ValueBlock(np.array([[1.0, 3.0], [10.0, 20.0]], dtype=np.float32))
    pk, ps, pv = potentiate(keys, shrink, values, [0], top_k=None)
    npt.assert_allclose(pv.data[:, 0], [2.0, 15.0], atol=1e-6)
    npt.assert_allclose(ps.data, [2.0], atol=1e-6)


def test_potentiate_keys_are_bitwise_copies():
    rng = np.random.default_rng(35)
    keys, shrink, values = _candidates(rng, 40)
    idx = [3, 7, 21]
    pk, _, _ = potentiate(keys, shrink, values, idx, top_k=10)
    assert pk.data.tobytes() == keys.data[:, idx].tobytes()


def test_potentiate_values_stay_in_candidate_hull():
    rng = np.random.default_rng(36)
    for _ in range(30):
        n = int(rng.integers(2, 50))
        keys, shrink, values = _candidates(rng, n)
        p = int(rng.integers(1, n + 1))
        idx = sorted(rng.choice(n, size=p, replace=False).tolist())
        _, ps, pv = potentiate(keys, shrink, values, idx, top_k=8)
        lo = values.data.min(axis=1, keepdims=True) - 1e-5
        hi = values.data.max(axis=1, keepdims=True) + 1e-5
        assert (pv.data >= lo).all() and (pv.data <= hi).all()
        assert ps.data.min() >= 1.0


def test_potentiate_empty_selection():
    rng = np.random.default_rng(37)
    keys, shrink, values = _candidates(rng, 5)
    pk, ps, pv = potentiate(keys, shrink, values, [], top_k=4)
    assert pk.n == 0 and ps.n == 0 and pv.n == 0


def test_potentiate_rejects_duplicate_indices():
    rng = np.random.default_rng(38)
    keys, shrink, values = _candidates(rng, 5)
    with pytest.raises(ValueError):
        potentiate(keys, shrink, values, [1, 1], top_k=4)


# -- commit / eviction ---------------------------------------------------------

def _store(l_max=3, usages=()):
    lt = LongTermMemory(c_k=2, c_v=2, l_max=l_max)
    if usages:
        n = len(usages)
        lt.commit(
            KeyBlock(np.arange(2 * n, dtype=np.float32).reshape(2, n)),
            ShrinkageVector(np.ones(n, dtype=np.float32)),
            ValueBlock(np.zeros((2, n), dtype=np.float32)),
        )
        lt.accumulate_usage(np.asarray(usages, dtype=np.float64))
    return lt


def test_commit_evicts_least_used():
    lt = _store(l_max=3, usages=[5.0, 1.0, 3.0])
    survivor_key = lt.keys[:, 0].copy()
    rng = np.random.default_rng(41)
    evicted = lt.commit(*_protos(rng, 2, c_k=2, c_v=2))
    assert evicted == 2
    assert lt.element_count == 3
    npt.assert_array_equal(lt.keys[:, 0], survivor_key)
    npt.assert_array_equal(lt.usage, [5.0, 0.0, 0.0])


def test_commit_without_overflow_evicts_nothing():
    lt = _store(l_max=10, usages=[1.0, 2.0])
    rng = np.random.default_rng(42)
    assert lt.commit(*_protos(rng, 3, c_k=2, c_v=2)) == 0
    assert lt.element_count == 5


def test_commit_eviction_tie_breaks_toward_lower_index():
    lt = _store(l_max=3, usages=[2.0, 2.0, 5.0])
    kept = lt.keys[:, [1, 2]].copy()
    rng = np.random.default_rng(43)
    lt.commit(*_protos(rng, 1, c_k=2, c_v=2))
    npt.assert_array_equal(lt.keys[:, :2], kept)


def test_commit_oversized_batch_rejected():
    lt = _store(l_max=3)
    rng = np.random.default_rng(44)
    with pytest.raises(ConfigError):
        lt.commit(*_protos(rng, 4, c_k=2, c_v=2))


def test_commit_survivors_match_sort_truncate():
    rng = np.random.default_rng(45)
    lt = _store(l_max=20)
    rng_usage = np.random.default_rng(46)
    lt.commit(*_protos(rng, 15, c_k=2, c_v=2))
    usage = rng_usage.uniform(0, 10, 15)
    lt.accumulate_usage(usage - lt.usage[:15])
    tagged = lt.keys.copy()
    new = 9
    lt.commit(*_protos(rng, new, c_k=2, c_v=2))
    # survivors must be exactly the usage-sorted tail of the old elements
    order = np.argsort(usage, kind="stable")
    expected_keep = sorted(order[4:])  # 15 + 9 - 20 = 4 evicted
    npt.assert_array_equal(lt.keys[:, : len(expected_keep)], tagged[:, expected_keep])


def test_initial_usage_override():
    lt = _store(l_max=5)
    rng = np.random.default_rng(47)
    lt.commit(*_protos(rng, 2, c_k=2, c_v=2), initial_usage=np.array([3.0, 4.0]))
    npt.assert_array_equal(lt.usage, [3.0, 4.0])


def test_accumulate_usage_totals():
    lt = _store(l_max=6, usages=[0.0, 0.0])
    lt.accumulate_usage(np.array([0.25, 4.0]))
    npt.assert_allclose(lt.usage, [0.25, 4.0])
    lt.accumulate_usage(np.zeros(2))
    npt.assert_allclose(lt.usage, [0.25, 4.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=25), st.integers(6, 30))
def test_commit_sequence_never_exceeds_cap(batch_sizes, l_max):
    rng = np.random.default_rng(48)
    lt = LongTermMemory(c_k=2, c_v=2, l_max=l_max)
    for size in batch_sizes:
        lt.commit(*_protos(rng, size, c_k=2, c_v=2))
        lt.accumulate_usage(rng.uniform(0, 1, lt.element_count))
        assert lt.element_count <= l_max


def test_consolidation_report_ratio():
    report = ConsolidationReport(prototype_count=128, evicted_count=0, candidate_elements=8100)
    assert abs(report.compression_ratio - 63.28125) < 1e-12
