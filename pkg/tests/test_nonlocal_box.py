import math

import numpy as np
import pytest

from bell_lab.correlations import estimate_behavior, no_signaling_check, validate_behavior
from bell_lab.harness import sample_tally
from bell_lab.lhv import is_local
from bell_lab.nonlocal_box import PrBox, SingleUseError, clone_signaling_demo, pr_behavior, sample

import oracles


def test_pr_behavior_cells():
    b = pr_behavior()
    assert np.array_equal(b.table, oracles.pr_table())
    assert b.prob((0, 1), (1, 1)) == 0.5
    assert b.prob((0, 0), (1, 1)) == 0.0
    assert validate_behavior(b) == []
    assert no_signaling_check(b).passed


def test_pr_is_extremal_nonlocal():
    m = is_local(pr_behavior())
    assert not m.local and m.certificate.witnessed_value == 4.0


def test_sample_promise_and_validation():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = sample(1, 1, rng)
        assert a != b
        a, b = sample(0, 1, rng)
        assert a == b
    with pytest.raises(ValueError):
        sample(2, 0, rng)


def test_sample_transcripts_reproduce_cells():
    rng = np.random.default_rng(17)
    n = 100_000
    exact = pr_behavior().table
    se = math.sqrt(0.25 / n)
    for x in range(2):
        for y in range(2):
            counts = np.zeros((2, 2))
            for _ in range(n):
                a, b = sample(x, y, rng)
                counts[a, b] += 1
            p = counts / n
            nz = exact[x, y] > 0
            assert np.all(np.abs(p - exact[x, y])[nz] < 4 * se)
            assert np.all(p[~nz] == 0)


def test_box_rounds_replay_with_seed():
    first = PrBox(seed=5)
    second = PrBox(seed=5)
    runs = [[box.play(0, 0) for _ in range(50)] for box in (first, second)]
    assert runs[0] == runs[1]
    assert all(a == b for a, b in runs[0])
    assert any(a == 1 for a, _ in runs[0]) and any(a == 0 for a, _ in runs[0])


def test_ports_are_single_use():
    box = PrBox()
    box.alice(0)
    with pytest.raises(SingleUseError):
        box.alice(1)
    box.bob(1)
    with pytest.raises(SingleUseError):
        box.bob(0)
    box.next_round()
    box.bob(0)  # fresh round


def test_promise_holds_in_either_order():
    box = PrBox(seed=2)
    rng = np.random.default_rng(9)
    for _ in range(400):
        x, y, bob_first = (int(v) for v in rng.integers(2, size=3))
        a, b = box.play(x, y, bob_first=bool(bob_first))
        assert a ^ b == x & y


def test_query_order_does_not_change_statistics():
    n = 4000
    tallies = []
    for bob_first in (False, True):
        box = PrBox(seed=3)
        counts = np.zeros((2, 2))
        for _ in range(n):
            a, b = box.play(1, 1, bob_first=bob_first)
            counts[a, b] += 1
        tallies.append(counts / n)
    se = math.sqrt(0.25 / n)
    assert np.all(np.abs(tallies[0] - tallies[1]) < 4 * math.sqrt(2) * se)


def test_rounds_csv():
    box = PrBox(seed=4)
    box.play(1, 0)
    box.play(1, 1)
    lines = box.rounds_csv().splitlines()
    assert lines[0] == "round,x,y,a,b,seed"
    assert len(lines) == 3
    r, x, y, a, b, seed = map(int, lines[2].split(","))
    assert (r, x, y, seed) == (1, 1, 1, 4) and a ^ b == 1


def test_vectorized_pr_tally_holds_promise():
    t = sample_tally(pr_behavior(), 4_000_000, seed=11)
    counts = t.counts
    for x in range(2):
        for y in range(2):
            for a in range(2):
                for b in range(2):
                    if a ^ b != x & y:
                        assert counts[x, y, a, b] == 0
    est = estimate_behavior(t)
    for x in range(2):
        for y in range(2):
            n = est.totals[x, y]
            alice_zero = est.table[x, y, 0].sum()
            assert abs(alice_zero - 0.5) < 4 * math.sqrt(0.25 / n)


def test_clone_signals():
    t = clone_signaling_demo(0, 1, seed=0)
    assert t.signaling
    for row in t.rows:
        assert row["b1"] ^ row["b2"] == row["x"]
    by_x = {row["x"]: row["b1_xor_b2"] for row in t.rows}
    assert by_x == {0: 0, 1: 1}


def test_equal_clones_derive_nothing():
    t = clone_signaling_demo(0, 0)
    assert not t.signaling
    assert "no contradiction derivable" in t.message
