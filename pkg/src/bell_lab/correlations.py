"""Scenarios, behaviors p(outcomes|inputs), tallies and their statistics.

A behavior table has shape ``inputs + outputs``: for two parties it is
indexed ``[x][y][a][b]``. Flattened views are row-major over parties, so the
joint input ``(x, y)`` has index ``x * m_B + y`` and likewise for outcomes.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import serialization

EXACT_TOL = 1e-12
FLOAT_TOL = 1e-9


class BellLabError(Exception):
    """Base class for errors raised by bell_lab."""


class StructureError(BellLabError, ValueError):
    """A table does not have the dimensions its scenario declares."""


class InvalidBehaviorError(BellLabError, ValueError):
    """A behavior fails nonnegativity or normalization."""


class EstimationError(BellLabError, ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    bottom: tuple[bool, ...] = ()

    def __post_init__(self):
        inputs = tuple(int(m) for m in self.inputs)
        outputs = tuple(int(k) for k in self.outputs)
        bottom = tuple(bool(b) for b in self.bottom) or (False,) * len(inputs)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "bottom", bottom)
        if not inputs:
            raise StructureError("a scenario needs at least one party")
        if len(outputs) != len(inputs) or len(bottom) != len(inputs):
            raise StructureError(
                f"inputs {inputs}, outputs {outputs} and bottom {bottom} must have one entry per party"
            )
        if min(inputs) < 1 or min(outputs) < 1:
            raise StructureError("every input and output cardinality must be >= 1")
        for k, flag in zip(outputs, bottom):
            if flag and k < 2:
                raise StructureError("a party with a no-outcome symbol needs at least one real outcome")

    @classmethod
    def chsh(cls) -> "Scenario":
        """Two parties, binary inputs, binary outcomes."""
        return cls((2, 2), (2, 2))

    @property
    def n_parties(self) -> int:
        return len(self.inputs)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.inputs + self.outputs

    @property
    def n_joint_inputs(self) -> int:
        return math.prod(self.inputs)

    @property
    def n_joint_outputs(self) -> int:
        return math.prod(self.outputs)

    def bottom_symbol(self, party: int) -> int | None:
        """Outcome index used for "no outcome" by ``party``, if it has one."""
        return self.outputs[party] - 1 if self.bottom[party] else None

    def without_bottom(self) -> "Scenario":
        outputs = tuple(k - 1 if b else k for k, b in zip(self.outputs, self.bottom))
        return Scenario(self.inputs, outputs)

    def to_dict(self) -> dict:
        return {
            "parties": self.n_parties,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "bottom": list(self.bottom),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            s = cls(tuple(d["inputs"]), tuple(d["outputs"]), tuple(d.get("bottom", ())))
        except (KeyError, TypeError) as exc:
            raise StructureError(f"malformed scenario: {exc}") from exc
        if "parties" in d and int(d["parties"]) != s.n_parties:
            raise StructureError(f"parties={d['parties']} but {s.n_parties} input cardinalities given")
        return s


def _check_shape(scenario: Scenario, table: np.ndarray, what: str = "table") -> None:
    if table.shape != scenario.shape:
        raise StructureError(f"{what} has shape {table.shape}, scenario requires {scenario.shape}")


@dataclass(frozen=True, eq=False)
class Behavior:
    """Conditional distribution p(outcomes | inputs) on a scenario."""

    scenario: Scenario
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=np.float64)
        _check_shape(self.scenario, table)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_matrix(cls, scenario: Scenario, matrix: np.ndarray) -> "Behavior":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (scenario.n_joint_inputs, scenario.n_joint_outputs):
            raise StructureError(f"matrix shape {matrix.shape} does not fit {scenario}")
        return cls(scenario, matrix.reshape(scenario.shape))

    @classmethod
    def uniform(cls, scenario: Scenario) -> "Behavior":
        return cls(scenario, np.full(scenario.shape, 1.0 / scenario.n_joint_outputs))

    def matrix(self) -> np.ndarray:
        """Table as (joint input, joint outcome)."""
        s = self.scenario
        return self.table.reshape(s.n_joint_inputs, s.n_joint_outputs)

    def prob(self, outcomes: Sequence[int], inputs: Sequence[int]) -> float:
        return float(self.table[tuple(inputs) + tuple(outcomes)])

    def marginal(self, parties: Sequence[int]) -> np.ndarray:
        """Outcome marginal of ``parties``; keeps every party's input axis."""
        n = self.scenario.n_parties
        drop = tuple(n + p for p in range(n) if p not in parties)
        return self.table.sum(axis=drop)

    def mix(self, other: "Behavior", weight: float) -> "Behavior":
        """``weight * self + (1 - weight) * other``."""
        if other.scenario != self.scenario:
            raise StructureError("cannot mix behaviors on different scenarios")
        return Behavior(self.scenario, weight * self.table + (1.0 - weight) * other.table)

    def correlator(self, inputs: Sequence[int]) -> float:
        """E = p(a=b) - p(a!=b) for two binary-outcome parties."""
        if self.scenario.outputs != (2, 2):
            raise StructureError("correlator is defined for two parties with binary outcomes")
        block = self.table[tuple(inputs)]
        same = block[0, 0] + block[1, 1]
        return float(same - (block[0, 1] + block[1, 0]))

    def to_dict(self) -> dict:
        return {"scenario": self.scenario.to_dict(), "table": self.table.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Behavior":
        if not isinstance(d, dict) or "scenario" not in d or "table" not in d:
            raise StructureError("behavior JSON needs 'scenario' and 'table'")
        scenario = Scenario.from_dict(d["scenario"])
        try:
            table = np.array(d["table"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise StructureError(f"ragged or non-numeric table: {exc}") from exc
        return cls(scenario, table)

    def to_json(self) -> str:
        return serialization.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Behavior":
        return cls.from_dict(serialization.loads(text))

    def __eq__(self, other):
        if not isinstance(other, Behavior):
            return NotImplemented
        return self.scenario == other.scenario and np.array_equal(self.table, other.table)

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    kind: str  # "nonnegativity" | "normalization" | "nonfinite"
    index: tuple[int, ...]
    value: float

    def __str__(self) -> str:
        return f"{self.kind} at {self.index}: {self.value!r}"


def validate_behavior(b: Behavior, tol: float = EXACT_TOL) -> list[Violation]:
    """List every numeric violation; empty iff the table is a valid behavior.

    Raises StructureError when the table does not match the scenario.
    """
    s = b.scenario
    table = np.asarray(b.table)
    _check_shape(s, table)
    report: list[Violation] = []
    n = s.n_parties
    for idx in zip(*np.nonzero(~np.isfinite(table))):
        report.append(Violation("nonfinite", tuple(int(i) for i in idx), float(table[idx])))
    for idx in zip(*np.nonzero(table < 0.0)):
        report.append(Violation("nonnegativity", tuple(int(i) for i in idx), float(table[idx])))
    sums = table.sum(axis=tuple(range(n, 2 * n)))
    for idx in np.ndindex(*s.inputs):
        total = float(sums[idx])
        if not abs(total - 1.0) <= tol:
            report.append(Violation("normalization", tuple(idx), total))
    return report


def require_valid(b: Behavior, tol: float = EXACT_TOL) -> None:
    report = validate_behavior(b, tol)
    if report:
        shown = "; ".join(str(v) for v in report[:4])
        raise InvalidBehaviorError(f"invalid behavior ({len(report)} violations): {shown}")


@dataclass(frozen=True)
class NoSignalingReport:
    deviations: dict[tuple[int, ...], float]
    tol: float

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol

    def per_party(self) -> dict[int, float]:
        """Worst deviation of each single party's marginal."""
        return {g[0]: d for g, d in self.deviations.items() if len(g) == 1}


def no_signaling_check(b: Behavior, tol: float = EXACT_TOL, validate_tol: float = EXACT_TOL) -> NoSignalingReport:
    """Largest change of each party-group marginal under the other parties' inputs.

    Every nonempty proper subset of parties is checked; the deviation is the
    L-infinity spread of its outcome marginal across the remaining inputs.
    """
    require_valid(b, validate_tol)
    n = b.scenario.n_parties
    deviations: dict[tuple[int, ...], float] = {}
    for size in range(1, n):
        for group in itertools.combinations(range(n), size):
            marg = b.marginal(group)
            rest = tuple(p for p in range(n) if p not in group)
            spread = marg.max(axis=rest) - marg.min(axis=rest)
            deviations[group] = float(spread.max())
    return NoSignalingReport(deviations, tol)


def permute_outcome_axis(table: np.ndarray, n_parties: int, party: int, inp: int, perm: Sequence[int]) -> np.ndarray:
    """Array form of ``relabel_outcomes``; works for behaviors and functionals alike."""
    out = np.array(table)
    sel = [slice(None)] * (2 * n_parties)
    sel[party] = inp
    block = np.asarray(table)[tuple(sel)]
    # fixing one input axis shifts the party's outcome axis down by one
    axis = n_parties + party - 1
    out[tuple(sel)] = np.take(block, np.argsort(perm), axis=axis)
    return out


def permute_input_axis(table: np.ndarray, party: int, perm: Sequence[int]) -> np.ndarray:
    return np.take(np.asarray(table), np.argsort(perm), axis=party)


def relabel_outcomes(b: Behavior, party: int, inp: int, perm: Sequence[int]) -> Behavior:
    """Rename ``party``'s outcome ``k`` to ``perm[k]`` when its input is ``inp``."""
    return Behavior(b.scenario, permute_outcome_axis(b.table, b.scenario.n_parties, party, inp, perm))


def relabel_inputs(b: Behavior, party: int, perm: Sequence[int]) -> Behavior:
    """Rename ``party``'s input ``i`` to ``perm[i]``."""
    return Behavior(b.scenario, permute_input_axis(b.table, party, perm))


def postselect(b: Behavior) -> tuple[Behavior, np.ndarray]:
    """Condition on every flagged party producing a real outcome.

    Returns the conditional behavior on the scenario without the no-outcome
    symbol, and the per-joint-input probability of being kept. Joint inputs
    that are never kept make the conditional undefined and raise.
    """
    s = b.scenario
    n = s.n_parties
    keep = (slice(None),) * n + tuple(slice(0, k - 1) if f else slice(None) for k, f in zip(s.outputs, s.bottom))
    kept = b.table[keep]
    rate = kept.sum(axis=tuple(range(n, 2 * n)))
    if np.any(rate <= 0.0):
        raise EstimationError("some joint input is never post-selected")
    cond = kept / rate.reshape(rate.shape + (1,) * n)
    return Behavior(s.without_bottom(), cond), rate


@dataclass(frozen=True, eq=False)
class TallyTable:
    """Counts per (joint input, joint outcome) from a seeded run."""

    scenario: Scenario
    counts: np.ndarray
    rng_seed: int | None = None

    def __post_init__(self):
        counts = np.array(self.counts)
        if counts.size and not np.issubdtype(counts.dtype, np.integer):
            if not np.all(np.isfinite(counts)) or np.any(counts != np.round(counts)):
                raise StructureError("counts must be finite integers")
        counts = counts.astype(np.int64)
        _check_shape(self.scenario, counts, "counts")
        if np.any(counts < 0):
            raise StructureError("counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def empty(cls, scenario: Scenario, rng_seed: int | None = None) -> "TallyTable":
        return cls(scenario, np.zeros(scenario.shape, dtype=np.int64), rng_seed)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def per_input_totals(self) -> np.ndarray:
        n = self.scenario.n_parties
        return self.counts.sum(axis=tuple(range(n, 2 * n)))

    def merge(self, other: "TallyTable") -> "TallyTable":
        if other.scenario != self.scenario:
            raise StructureError("cannot merge tallies on different scenarios")
        seed = self.rng_seed if self.rng_seed == other.rng_seed else None
        return TallyTable(self.scenario, self.counts + other.counts, seed)

    __add__ = merge

    def postselect(self) -> tuple["TallyTable", float]:
        """Drop every round in which a flagged party produced no outcome.

        Returns the kept tally and the discarded fraction of rounds.
        """
        s = self.scenario
        n = s.n_parties
        keep = (slice(None),) * n + tuple(slice(0, k - 1) if f else slice(None) for k, f in zip(s.outputs, s.bottom))
        kept = self.counts[keep]
        total = self.total
        discarded = (total - int(kept.sum())) / total if total else 0.0
        return TallyTable(s.without_bottom(), kept, self.rng_seed), discarded

    def to_csv(self) -> str:
        in_cols, out_cols = serialization.party_columns(self.scenario.n_parties)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(in_cols + out_cols + ["count"])
        for idx in np.ndindex(*self.scenario.shape):
            w.writerow(list(idx) + [int(self.counts[idx])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, scenario: Scenario, rng_seed: int | None = None) -> "TallyTable":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise StructureError("empty tally CSV")
        in_cols, out_cols = serialization.party_columns(scenario.n_parties)
        if rows[0] != in_cols + out_cols + ["count"]:
            raise StructureError(f"unexpected tally header {rows[0]}")
        counts = np.zeros(scenario.shape, dtype=np.int64)
        for row in rows[1:]:
            if not row:
                continue
            *idx, count = (int(v) for v in row)
            counts[tuple(idx)] += count
        return cls(scenario, counts, rng_seed)


@dataclass(frozen=True, eq=False)
class Estimate:
    """Frequency estimate of a behavior with binomial standard errors.

    Cells of joint inputs that were never sampled are NaN and listed in
    ``unknown``; they are never filled in.
    """

    scenario: Scenario
    table: np.ndarray
    stderr: np.ndarray
    totals: np.ndarray
    unknown: np.ndarray = field(repr=False)
    degenerate: np.ndarray = field(repr=False)

    @property
    def complete(self) -> bool:
        return not bool(self.unknown.any())

    @property
    def behavior(self) -> Behavior:
        if not self.complete:
            missing = [tuple(int(i) for i in idx) for idx in zip(*np.nonzero(self.unknown))]
            raise EstimationError(f"joint inputs {missing} have no rounds; behavior is unknown there")
        return Behavior(self.scenario, self.table)


def estimate_behavior(t: TallyTable) -> Estimate:
    """Cell frequencies ``count / N_input`` and ``sqrt(p(1-p)/N_input)``."""
    s = t.scenario
    n = s.n_parties
    totals = t.per_input_totals()
    if totals.sum() == 0:
        raise EstimationError("tally is empty")
    unknown = totals == 0
    denom = np.where(unknown, 1, totals).reshape(totals.shape + (1,) * n)
    p_hat = t.counts / denom
    stderr = np.sqrt(p_hat * (1.0 - p_hat) / denom)
    mask = np.broadcast_to(unknown.reshape(unknown.shape + (1,) * n), s.shape)
    p_hat = np.where(mask, np.nan, p_hat)
    stderr = np.where(mask, np.nan, stderr)
    return Estimate(s, p_hat, stderr, totals, unknown, totals == 1)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint distribution of two finite variables, ``probs[u, v]``."""

    probs: np.ndarray
    labels: tuple[tuple, tuple] | None = None

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 2:
            raise StructureError("a joint distribution table must be two-dimensional")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidBehaviorError("joint probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > EXACT_TOL:
            raise InvalidBehaviorError(f"joint probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_counts(cls, counts) -> "JointDistribution":
        c = np.asarray(counts, dtype=np.float64)
        if c.sum() <= 0:
            raise EstimationError("no samples")
        p = c / c.sum()
        # exact rescale keeps the 1e-12 normalization check meaningful
        return cls(p / p.sum())

    @classmethod
    def product(cls, pu: Iterable[float], pv: Iterable[float]) -> "JointDistribution":
        return cls(np.outer(np.asarray(list(pu), float), np.asarray(list(pv), float)))


def entropy(p: Iterable[float]) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    arr = np.asarray(list(p), dtype=np.float64)
    arr = arr[arr > 0]
    return float(-(arr * np.log2(arr)).sum())


def mutual_information(j: JointDistribution) -> float:
    """I(U:V) in bits."""
    p = j.probs
    pu = p.sum(axis=1, keepdims=True)
    pv = p.sum(axis=0, keepdims=True)
    nz = p > 0
    terms = p[nz] * np.log2(p[nz] / (pu * pv)[nz])
    return max(float(terms.sum()), 0.0)
