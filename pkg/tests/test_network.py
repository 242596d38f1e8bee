import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from median_consensus.errors import ConfigurationError, InvalidParameterError
from median_consensus.network import (
    LossModel,
    Schedule,
    Topology,
    build_chain,
    build_complete,
    deliveries,
    from_edges,
    neighbor_counts,
    read_topology,
    write_topology,
)


def test_chain_counts():
    assert neighbor_counts(build_chain(5)) == [2, 3, 3, 3, 2]


def test_complete_counts():
    assert neighbor_counts(build_complete(4)) == [4, 4, 4, 4]


@pytest.mark.parametrize(
    "matrix, match",
    [
        ([[1, 1], [0, 1]], "symmetric"),
        ([[0, 1], [1, 1]], "diagonal"),
        ([[1, 0], [0, 1]], "connected"),
        ([[1, 2], [2, 1]], "0 or 1"),
        ([[1, 1, 1], [1, 1, 1]], "square"),
    ],
)
def test_bad_adjacency(matrix, match):
    with pytest.raises(ConfigurationError, match=match):
        Topology(np.array(matrix))


def test_n_one_rejected():
    with pytest.raises(InvalidParameterError):
        build_complete(1)


def test_from_edges_matches_builder():
    assert from_edges(4, [(0, 1), (1, 2), (2, 3)]) == build_chain(4)


def test_topology_file_formats(tmp_path):
    t = build_chain(4)
    write_topology(t, tmp_path / "m.txt")
    assert read_topology(tmp_path / "m.txt") == t
    (tmp_path / "e.txt").write_text("# chain\nn 4\n0 1\n1 2  # middle\n2 3\n")
    assert read_topology(tmp_path / "e.txt") == t
    (tmp_path / "bad.txt").write_text("n 3\n0 1\n")
    with pytest.raises(ConfigurationError, match="connected"):
        read_topology(tmp_path / "bad.txt")


def test_schedule_round_robin():
    s = Schedule.round_robin(3)
    assert [s.transmitter(k) for k in range(7)] == [0, 1, 2, 0, 1, 2, 0]
    assert s.cycle_length == 3
    with pytest.raises(ConfigurationError):
        Schedule((0, 0, 1))


def test_custom_slot_order():
    s = Schedule((2, 0, 1))
    assert [s.transmitter(k) for k in range(4)] == [2, 0, 1, 2]


def test_loss_probability_range():
    with pytest.raises(InvalidParameterError):
        LossModel(1.5)


class TestDeliveries:
    def test_no_loss_complete(self):
        t, s = build_complete(4), Schedule.round_robin(4)
        assert deliveries(t, s, LossModel().channel(), 1) == {0, 1, 2, 3}
        assert deliveries(t, s, LossModel().channel(), 1, self_update=False) == {0, 2, 3}

    def test_total_loss_keeps_self(self):
        t, s = build_complete(4), Schedule.round_robin(4)
        ch = LossModel(1.0).channel()
        for k in range(8):
            assert deliveries(t, s, ch, k) == {k % 4}

    def test_chain_neighbourhood(self):
        t, s = build_chain(5), Schedule.round_robin(5)
        ch = LossModel().channel()
        assert [deliveries(t, s, ch, k) for k in range(5)] == [
            {0, 1}, {0, 1, 2}, {1, 2, 3}, {2, 3, 4}, {3, 4}
        ]

    @given(st.integers(0, 2**31), st.floats(0.0, 1.0))
    def test_deterministic_per_seed(self, seed, p):
        t, s = build_complete(5), Schedule.round_robin(5)
        a, b = LossModel(p, seed).channel(), LossModel(p, seed).channel()
        assert [deliveries(t, s, a, k) for k in range(30)] == [deliveries(t, s, b, k) for k in range(30)]

    @pytest.mark.parametrize("t", [build_complete(5), build_chain(5), from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)])])
    def test_cycle_union_covers_graph(self, t):
        s = Schedule.round_robin(t.n)
        ch = LossModel().channel()
        heard = np.zeros((t.n, t.n), dtype=np.int8)
        for k in range(s.cycle_length):
            j = s.transmitter(k)
            for i in deliveries(t, s, ch, k):
                heard[i, j] = 1
        assert np.array_equal(heard, t.adjacency)

    def test_drop_frequency(self):
        p, steps = 0.3, 4000
        t, s = build_complete(5), Schedule.round_robin(5)
        ch = LossModel(p, 7).channel()
        candidates = steps * 4
        got = sum(len(deliveries(t, s, ch, k)) - 1 for k in range(steps))
        mean = candidates * (1 - p)
        sigma = math.sqrt(candidates * p * (1 - p))
        assert abs(got - mean) <= 3 * sigma
