import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hindsight.exceptions import PreconditionError, ShapeError
from hindsight.replay import PrioritizedReplay, SumTree, Transition, read_buffer_dump
from oracles import NaivePriorities


def make_transition(i, goal_dim=2, virtual=False):
    return Transition(
        observation=np.full(3, float(i)), goal=np.full(goal_dim, i / 10), action=np.zeros(2),
        reward=-1.0, next_observation=np.full(3, i + 1.0), achieved_goal=np.full(goal_dim, 0.1),
        next_achieved_goal=np.full(goal_dim, 0.2), is_virtual=virtual,
    )


def make_buffer(capacity=8, **kw):
    return PrioritizedReplay(capacity, 3, 2, 2, **kw)


class TestSumTree:
    def test_internal_sums(self):
        tree = SumTree(5)
        tree.update([0, 1, 2, 3, 4], [1.0, 2.0, 3.0, 4.0, 5.0])
        assert tree.total == 15.0
        for node in range(1, tree.base):
            assert tree.nodes[node] == tree.nodes[2 * node] + tree.nodes[2 * node + 1]

    def test_find_boundaries(self):
        tree = SumTree(4)
        tree.update([0, 1, 2, 3], [1.0, 0.0, 2.0, 1.0])
        np.testing.assert_array_equal(tree.find([0.0, 0.999, 1.0, 2.5, 3.0, 3.999]),
                                      [0, 0, 2, 2, 3, 3])

    def test_capacity_one(self):
        tree = SumTree(1)
        tree.update([0], [0.7])
        assert tree.total == 0.7 and tree.find([0.5])[0] == 0

    def test_fuzz_against_flat_array(self):
        rng = np.random.default_rng(0)
        tree, naive = SumTree(37), np.zeros(37)
        for _ in range(10_000):
            i = rng.integers(0, 37, size=rng.integers(1, 4))
            v = rng.random(len(i)) * 5
            tree.update(i, v)
            naive[i] = v
            assert abs(tree.total - naive.sum()) < 1e-9
        np.testing.assert_allclose(tree.leaves, naive)
        masses = rng.random(200) * naive.sum()
        expected = np.searchsorted(np.cumsum(naive), masses, side="right")
        np.testing.assert_array_equal(tree.find(masses), expected)


class TestStore:
    def test_store_one(self):
        buf = make_buffer()
        buf.store(make_transition(0))
        assert len(buf) == 1

    def test_ring_eviction(self):
        buf = make_buffer(capacity=3)
        for i in range(4):
            buf.store(make_transition(i))
        assert len(buf) == 3
        obs = sorted(buf.observation[:, 0])
        assert obs == [1.0, 2.0, 3.0]
        np.testing.assert_array_equal(buf.observation[buf.order(), 0], [1.0, 2.0, 3.0])

    def test_new_priority_is_max_seen(self):
        buf = make_buffer()
        buf.store(make_transition(0))
        buf.store(make_transition(1))
        buf.update_priorities([0], [4.0])
        slot = buf.store(make_transition(2))
        assert buf.tree.leaves[slot] == pytest.approx(buf.max_priority_seen)
        assert buf.max_priority_seen == pytest.approx((4.0 + 1e-3) ** 0.6)

    def test_shape_mismatch(self):
        buf = make_buffer()
        t = make_transition(0, goal_dim=3)
        with pytest.raises(ShapeError):
            buf.store(t)

    def test_round_trip_transition(self):
        buf = make_buffer()
        t = make_transition(5, virtual=True)
        slot = buf.store(t)
        back = buf.transition(slot)
        assert back.is_virtual is True and back.reward == -1.0
        np.testing.assert_array_equal(back.observation, t.observation)


class TestSample:
    def test_uniform_frequencies(self):
        buf = make_buffer(capacity=10)
        for i in range(10):
            buf.store(make_transition(i))
        rng = np.random.default_rng(0)
        counts = np.zeros(10)
        for _ in range(100_000 // 10):
            _, idx, _ = buf.sample(10, rng)
            np.add.at(counts, idx, 1)
        np.testing.assert_allclose(counts / counts.sum(), 0.1, atol=0.002)

    def test_three_to_one(self):
        buf = make_buffer(capacity=2, alpha=1.0, priority_floor=1e-12)
        buf.store(make_transition(0))
        buf.store(make_transition(1))
        buf.update_priorities([0, 1], [3.0, 1.0])
        rng = np.random.default_rng(1)
        counts = np.zeros(2)
        for _ in range(50_000):
            _, idx, _ = buf.sample(2, rng)
            np.add.at(counts, idx, 1)
        np.testing.assert_allclose(counts / counts.sum(), [0.75, 0.25], atol=0.02)

    def test_weights_beta_one_uniform(self):
        buf = make_buffer(beta=1.0)
        for i in range(8):
            buf.store(make_transition(i))
        _, _, w = buf.sample(8, np.random.default_rng(0))
        np.testing.assert_allclose(w, 1.0)

    def test_weights_formula(self):
        buf = make_buffer(capacity=4, alpha=1.0, beta=0.5, priority_floor=1e-12)
        for i in range(4):
            buf.store(make_transition(i))
        buf.update_priorities([0, 1, 2, 3], [1.0, 2.0, 3.0, 4.0])
        _, idx, w = buf.sample(4, np.random.default_rng(0))
        p = np.array([1.0, 2.0, 3.0, 4.0]) / 10.0
        raw = (4 * p[idx]) ** -0.5
        np.testing.assert_allclose(w, raw / raw.max())

    def test_too_many(self):
        buf = make_buffer()
        buf.store(make_transition(0))
        with pytest.raises(PreconditionError):
            buf.sample(2, np.random.default_rng(0))


class TestPriorities:
    def test_floor(self):
        buf = make_buffer()
        buf.store(make_transition(0))
        buf.update_priorities([0], [0.0])
        assert buf.tree.leaves[0] == pytest.approx(1e-3 ** 0.6)

    def test_invalid_index(self):
        buf = make_buffer()
        buf.store(make_transition(0))
        with pytest.raises(PreconditionError):
            buf.update_priorities([3], [1.0])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.booleans(), st.integers(0, 50), st.floats(0, 20)),
                    min_size=1, max_size=80))
    def test_interleavings_match_flat_array(self, ops):
        buf = make_buffer(capacity=7)
        naive = NaivePriorities(7)
        max_seen = 1.0
        for is_store, i, td in ops:
            if is_store or buf.size == 0:
                slot = buf.store(make_transition(i))
                assert slot == naive.store(max_seen)
            else:
                j = i % buf.size
                buf.update_priorities([j], [td])
                naive.p[j] = (td + 1e-3) ** 0.6
                max_seen = max(max_seen, naive.p[j])
            assert abs(buf.tree.total - naive.total()) < 1e-9
            assert np.all(buf.tree.leaves[: buf.size] >= 1e-3 ** 0.6 - 1e-15)
        masses = np.linspace(0, naive.total(), 13, endpoint=False)
        assert [int(buf.tree.find([m])[0]) for m in masses] == [naive.find(m) for m in masses]

    def test_fuzz_ten_thousand(self):
        rng = np.random.default_rng(3)
        buf = make_buffer(capacity=64)
        naive = NaivePriorities(64)
        max_seen = 1.0
        for step in range(10_000):
            if rng.random() < 0.3 or buf.size == 0:
                naive.store(max_seen)
                buf.store(make_transition(step))
            else:
                j = rng.integers(0, buf.size, size=3)
                td = rng.exponential(size=3)
                buf.update_priorities(j, td)
                naive.p[j] = (td + 1e-3) ** 0.6
                max_seen = max(max_seen, naive.p[j].max())
        np.testing.assert_allclose(buf.tree.leaves, naive.p, rtol=0, atol=1e-12)
        assert abs(buf.tree.total - naive.total()) < 1e-9


def test_dump_round_trip(tmp_path):
    buf = make_buffer(capacity=4)
    for i in range(6):
        buf.store(make_transition(i, virtual=i % 2 == 1))
    buf.dump_csv(tmp_path / "d.csv")
    dump = read_buffer_dump(tmp_path / "d.csv")
    np.testing.assert_array_equal(dump["goal"][:, 0], [0.2, 0.3, 0.4, 0.5])
    np.testing.assert_array_equal(dump["is_virtual"], [False, True, False, True])
    assert dump["achieved_goal"].shape == (4, 2)
