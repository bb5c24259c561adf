"""The PR box: exact behavior, a two-port single-use resource, and the
argument that a clonable box would signal.

The two ports share one hidden bit per round. Whichever port is queried
first outputs that bit; the second outputs it XOR x*y. This is a sampling
device for the promise a + b = x*y (mod 2) with uniform marginals, not a
physical mechanism, and it makes the promise hold whatever the query order.
The link has no latency model.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .correlations import Behavior, BellLabError, Scenario


class SingleUseError(BellLabError):
    """A port was queried twice in one round."""


def _bit(v, name: str) -> int:
    if v not in (0, 1):
        raise ValueError(f"{name} must be a bit, got {v!r}")
    return int(v)


def pr_behavior() -> Behavior:
    """p(a,b|x,y) = 1/2 if a XOR b == x AND y else 0."""
    table = np.zeros((2, 2, 2, 2))
    for x, y, a, b in itertools.product(range(2), repeat=4):
        if a ^ b == x & y:
            table[x, y, a, b] = 0.5
    return Behavior(Scenario.chsh(), table)


def sample(x: int, y: int, rng: np.random.Generator) -> tuple[int, int]:
    """One PR round: a uniform, b = a XOR (x AND y)."""
    x, y = _bit(x, "x"), _bit(y, "y")
    a = int(rng.integers(2))
    return a, a ^ (x & y)


@dataclass
class PrBox:
    """Seeded PR box with explicit rounds and single-use ports."""

    seed: int = 0
    round: int = 0
    log: list[tuple[int, int, int, int, int]] = field(default_factory=list)
    _pending: dict[str, tuple[int, int]] = field(default_factory=dict, repr=False)

    def _hidden_bit(self) -> int:
        return int(kernels.uniforms(self.seed, self.round, self.round + 1, 1)[0, 0] < 0.5)

    def _query(self, port: str, value: int) -> int:
        if port in self._pending:
            raise SingleUseError(f"port {port} already used in round {self.round}")
        other = "B" if port == "A" else "A"
        r = self._hidden_bit()
        if other in self._pending:
            out = r ^ (value & self._pending[other][0])
        else:
            out = r
        self._pending[port] = (value, out)
        if len(self._pending) == 2:
            (x, a), (y, b) = self._pending["A"], self._pending["B"]
            self.log.append((self.round, x, y, a, b))
        return out

    def alice(self, x: int) -> int:
        return self._query("A", _bit(x, "x"))

    def bob(self, y: int) -> int:
        return self._query("B", _bit(y, "y"))

    def next_round(self) -> None:
        self.round += 1
        self._pending.clear()

    def play(self, x: int, y: int, bob_first: bool = False) -> tuple[int, int]:
        """Feed both ports in the given order and advance the round."""
        if bob_first:
            b = self.bob(y)
            a = self.alice(x)
        else:
            a = self.alice(x)
            b = self.bob(y)
        self.next_round()
        return a, b

    def rounds_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "x", "y", "a", "b", "seed"])
        for row in self.log:
            w.writerow(list(row) + [self.seed])
        return buf.getvalue()


@dataclass(frozen=True)
class CloneTranscript:
    y1: int
    y2: int
    signaling: bool
    rows: tuple[dict, ...]
    message: str


def clone_signaling_demo(y1: int, y2: int, seed: int = 0) -> CloneTranscript:
    """Suppose two Bob ports both satisfy the promise with one Alice port.

    Then b1 XOR b2 = x AND (y1 XOR y2), so with y1 != y2 Bob reads Alice's
    input x from his two outputs alone.
    """
    y1, y2 = _bit(y1, "y1"), _bit(y2, "y2")
    if y1 == y2:
        return CloneTranscript(y1, y2, False, (), "no contradiction derivable: both clones got the same input")
    rows = []
    for i, x in enumerate((0, 1)):
        a = int(kernels.uniforms(seed, i, i + 1, 1)[0, 0] < 0.5)
        b1 = a ^ (x & y1)
        b2 = a ^ (x & y2)
        rows.append({"x": x, "a": a, "b1": b1, "b2": b2, "b1_xor_b2": b1 ^ b2, "bob_reads_x": (b1 ^ b2) == x})
    signaling = all(r["bob_reads_x"] for r in rows)
    return CloneTranscript(
        y1, y2, signaling, tuple(rows), "b1 XOR b2 = x: Bob learns Alice's input, so a clonable box would signal"
    )
