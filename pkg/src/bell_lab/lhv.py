"""Local hidden-variable models: deterministic strategies, mixtures, Bell
functionals, the local bound, and local-polytope membership.

Strategies are ordered canonically: the response tuple is flattened party by
party (party 0's outputs on inputs 0..m-1 first) and compared
lexicographically. Strategy index ``k`` is that tuple read as a mixed-radix
number with the first entry most significant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import kernels, serialization
from .correlations import (
    EXACT_TOL,
    FLOAT_TOL,
    Behavior,
    BellLabError,
    Scenario,
    StructureError,
    permute_input_axis,
    permute_outcome_axis,
    require_valid,
)

DEFAULT_CAP = 10**6
_CHUNK = 1 << 16


class DeskScaleExceeded(BellLabError):
    """The strategy count exceeds the enumeration cap."""


class MembershipSolverError(BellLabError):
    """The membership LP failed numerically; says nothing about locality."""


def strategy_count(s: Scenario) -> int:
    return math.prod(k**m for k, m in zip(s.outputs, s.inputs))


def check_cap(s: Scenario, cap: int) -> int:
    count = strategy_count(s)
    if count > cap:
        raise DeskScaleExceeded(f"desk-scale exceeded: {count} deterministic strategies > cap {cap}")
    return count


@dataclass(frozen=True)
class DeterministicStrategy:
    """One hidden variable fixing every party's output for every input."""

    scenario: Scenario
    responses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        responses = tuple(tuple(int(o) for o in r) for r in self.responses)
        object.__setattr__(self, "responses", responses)
        s = self.scenario
        if len(responses) != s.n_parties:
            raise StructureError("one response map per party required")
        for p, r in enumerate(responses):
            if len(r) != s.inputs[p]:
                raise StructureError(f"party {p} response must cover {s.inputs[p]} inputs")
            if any(not 0 <= o < s.outputs[p] for o in r):
                raise StructureError(f"party {p} response {r} outside outputs 0..{s.outputs[p] - 1}")

    @classmethod
    def from_index(cls, s: Scenario, k: int) -> "DeterministicStrategy":
        radices = [o for o, m in zip(s.outputs, s.inputs) for _ in range(m)]
        digits = []
        for r in reversed(radices):
            k, d = divmod(k, r)
            digits.append(d)
        if k:
            raise ValueError("strategy index out of range")
        digits.reverse()
        out, pos = [], 0
        for m in s.inputs:
            out.append(tuple(digits[pos : pos + m]))
            pos += m
        return cls(s, tuple(out))

    @property
    def index(self) -> int:
        k = 0
        for p, r in enumerate(self.responses):
            for o in r:
                k = k * self.scenario.outputs[p] + o
        return k

    def outcome(self, inputs: Sequence[int]) -> tuple[int, ...]:
        return tuple(r[x] for r, x in zip(self.responses, inputs))

    def behavior(self) -> Behavior:
        s = self.scenario
        table = np.zeros(s.shape)
        for joint in np.ndindex(*s.inputs):
            table[joint + self.outcome(joint)] = 1.0
        return Behavior(s, table)


def enumerate_deterministic(s: Scenario, cap: int = DEFAULT_CAP) -> list[DeterministicStrategy]:
    """All deterministic strategies in canonical order."""
    check_cap(s, cap)
    per_party = [list(itertools.product(range(k), repeat=m)) for k, m in zip(s.outputs, s.inputs)]
    return [DeterministicStrategy(s, combo) for combo in itertools.product(*per_party)]


def vertex_matrix(s: Scenario, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Column k is strategy k's behavior flattened over (joint input, joint outcome)."""
    count = check_cap(s, cap)
    ks = np.arange(count)
    radices = [o for o, m in zip(s.outputs, s.inputs) for _ in range(m)]
    digits = np.empty((count, len(radices)), dtype=np.int64)
    rest = ks.copy()
    for pos in range(len(radices) - 1, -1, -1):
        digits[:, pos] = rest % radices[pos]
        rest //= radices[pos]
    offsets = np.cumsum([0] + list(s.inputs[:-1]))
    mat = np.zeros((s.n_joint_inputs, s.n_joint_outputs, count))
    for j, joint in enumerate(np.ndindex(*s.inputs)):
        idx = np.zeros(count, dtype=np.int64)
        for p, x in enumerate(joint):
            idx = idx * s.outputs[p] + digits[:, offsets[p] + x]
        mat[j, idx, ks] = 1.0
    return mat.reshape(-1, count)


@dataclass(frozen=True, eq=False)
class LocalModel:
    """Finite mixture of deterministic strategies with weights rho."""

    strategies: tuple[DeterministicStrategy, ...]
    weights: np.ndarray

    def __post_init__(self):
        strategies = tuple(self.strategies)
        weights = np.asarray(self.weights, dtype=np.float64).copy()
        object.__setattr__(self, "strategies", strategies)
        object.__setattr__(self, "weights", weights)
        if not strategies:
            raise ValueError("a local model needs at least one strategy")
        if weights.shape != (len(strategies),):
            raise ValueError("one weight per strategy required")
        if len({st.scenario for st in strategies}) != 1:
            raise StructureError("all strategies must share one scenario")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > EXACT_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")

    @property
    def scenario(self) -> Scenario:
        return self.strategies[0].scenario

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "strategies": [[list(r) for r in st.responses] for st in self.strategies],
            "weights": self.weights.tolist(),
        }


def behavior_of(m: LocalModel) -> Behavior:
    """p(a,b,...|x,y,...) = sum_lambda rho(lambda) prod_p [a_p = lambda_p(x_p)]."""
    s = m.scenario
    table = np.zeros(s.shape)
    for st, w in zip(m.strategies, m.weights):
        for joint in np.ndindex(*s.inputs):
            table[joint + st.outcome(joint)] += w
    return Behavior(s, table)


class BellFunctional:
    """Linear functional sum of coefficient * p over every table cell."""

    def __init__(self, scenario: Scenario, coefficients, local_bound: float | None = None):
        coefficients = np.array(coefficients, dtype=np.float64)
        if coefficients.shape != scenario.shape:
            raise StructureError(f"coefficients have shape {coefficients.shape}, scenario requires {scenario.shape}")
        coefficients.setflags(write=False)
        self.scenario = scenario
        self.coefficients = coefficients
        if local_bound is not None:
            self.__dict__["local_bound"] = float(local_bound)

    @classmethod
    def chsh_s(cls, scenario: Scenario | None = None) -> "BellFunctional":
        """S = p(a=b|00) + p(a=b|01) + p(a=b|10) + p(a!=b|11).

        On a scenario with a no-outcome symbol the extra cells get coefficient 0.
        """
        scenario = scenario or Scenario.chsh()
        if scenario.inputs != (2, 2) or scenario.without_bottom().outputs != (2, 2):
            raise StructureError("S needs two parties with two inputs and two real outcomes each")
        c = np.zeros(scenario.shape)
        for x, y, a, b in itertools.product(range(2), repeat=4):
            c[x, y, a, b] = 1.0 if (a ^ b) == (x & y) else 0.0
        return cls(scenario, c)

    @cached_property
    def local_bound(self) -> float:
        return local_max(self).value

    def matrix(self) -> np.ndarray:
        s = self.scenario
        return self.coefficients.reshape(s.n_joint_inputs, s.n_joint_outputs)

    def relabel_outcomes(self, party: int, inp: int, perm: Sequence[int]) -> "BellFunctional":
        s = self.scenario
        return BellFunctional(s, permute_outcome_axis(self.coefficients, s.n_parties, party, inp, perm))

    def relabel_inputs(self, party: int, perm: Sequence[int]) -> "BellFunctional":
        return BellFunctional(self.scenario, permute_input_axis(self.coefficients, party, perm))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "coefficients": self.coefficients.tolist(),
            "local_bound": self.local_bound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BellFunctional":
        if not isinstance(d, dict) or "scenario" not in d or "coefficients" not in d:
            raise StructureError("functional JSON needs 'scenario' and 'coefficients'")
        s = Scenario.from_dict(d["scenario"])
        try:
            coeffs = np.array(d["coefficients"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise StructureError(f"ragged or non-numeric coefficients: {exc}") from exc
        # a stored bound is not trusted; it is recomputed on demand
        return cls(s, coeffs)

    def to_json(self) -> str:
        return serialization.dumps(self.to_dict())


def bell_value(b: Behavior, f: BellFunctional) -> float:
    if b.scenario != f.scenario:
        raise StructureError(f"behavior scenario {b.scenario} differs from functional scenario {f.scenario}")
    return float(np.dot(f.coefficients.ravel(), b.table.ravel()))


@dataclass(frozen=True)
class LocalMax:
    value: float
    argmax: DeterministicStrategy
    n_optimal: int
    n_strategies: int

    def to_dict(self) -> dict:
        return {
            "max": self.value,
            "argmax": [list(r) for r in self.argmax.responses],
            "argmax_index": self.argmax.index,
            "n_optimal": self.n_optimal,
            "n_strategies": self.n_strategies,
        }


def local_max(f: BellFunctional, cap: int = DEFAULT_CAP) -> LocalMax:
    """Exact maximum of ``f`` over deterministic strategies.

    Ties go to the first strategy in canonical order; values within
    1e-12 (relative to the coefficient scale) of the maximum count as optimal.
    """
    s = f.scenario
    count = check_cap(s, cap)
    coeffs = f.matrix()
    best, best_k = -np.inf, -1
    values_by_chunk = []
    for lo in range(0, count, _CHUNK):
        hi = min(lo + _CHUNK, count)
        vals = kernels.strategy_values(coeffs, s.inputs, s.outputs, lo, hi)
        values_by_chunk.append(vals)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, best_k = float(vals[k]), lo + k
    scale = max(1.0, float(np.abs(coeffs).sum(axis=1).max()))
    thresh = best - EXACT_TOL * scale
    n_opt = sum(int(np.count_nonzero(v >= thresh)) for v in values_by_chunk)
    first_k = next(
        lo + int(np.flatnonzero(v >= thresh)[0])
        for lo, v in zip(range(0, count, _CHUNK), values_by_chunk)
        if np.any(v >= thresh)
    )
    return LocalMax(best, DeterministicStrategy.from_index(s, first_k), n_opt, count)


@dataclass(frozen=True, eq=False)
class Certificate:
    """Separating functional: ``witnessed_value`` exceeds every local strategy.

    Coefficients are shifted so each joint-input block has minimum 0 and then
    scaled so the largest coefficient is 1; ``gap`` is in those units.
    """

    functional: BellFunctional
    witnessed_value: float

    @property
    def local_bound(self) -> float:
        return self.functional.local_bound

    @property
    def gap(self) -> float:
        return self.witnessed_value - self.local_bound

    def to_dict(self) -> dict:
        d = self.functional.to_dict()
        d["witnessed_value"] = self.witnessed_value
        d["normalization"] = "per-input-block minimum 0, maximum coefficient 1"
        return d


@dataclass(frozen=True, eq=False)
class Membership:
    local: bool
    model: LocalModel | None = None
    certificate: Certificate | None = None
    residual: float | None = None

    def to_dict(self) -> dict:
        if self.local:
            return {"local": True, "residual": self.residual, "model": self.model.to_dict()}
        return {"local": False, "certificate": self.certificate.to_dict()}


def _normalize_certificate(s: Scenario, f: np.ndarray) -> np.ndarray:
    f = f.reshape(s.n_joint_inputs, s.n_joint_outputs)
    f = f - f.min(axis=1, keepdims=True)
    top = f.max()
    if top <= 0:
        raise MembershipSolverError("separating functional vanished after normalization")
    f = f / top
    # snap solver noise so exact functionals stay exact
    snapped = np.round(f * 2**20) / 2**20
    f = np.where(np.abs(f - snapped) < 1e-9, snapped, f) + 0.0
    return f.reshape(s.shape)


def is_local(b: Behavior, tol: float = FLOAT_TOL, cap: int = DEFAULT_CAP) -> Membership:
    """Decide membership in the local polytope.

    Local: weights over deterministic strategies reproducing ``b`` within
    ``tol`` (checked by recomputing ``behavior_of``). Nonlocal: a normalized
    functional whose value on ``b`` beats its exact local maximum by more
    than ``tol``. Raises MembershipSolverError if the LP fails or neither
    outcome can be certified.
    """
    require_valid(b, FLOAT_TOL)
    s = b.scenario
    verts = vertex_matrix(s, cap)
    n_cells, n_vert = verts.shape
    p = b.table.ravel()

    # min r  s.t. |V w - p| <= r, sum w = 1, w >= 0
    c = np.zeros(n_vert + 1)
    c[-1] = 1.0
    ones = np.ones((n_cells, 1))
    a_ub = np.vstack([np.hstack([verts, -ones]), np.hstack([-verts, -ones])])
    b_ub = np.concatenate([p, -p])
    a_eq = np.hstack([np.ones((1, n_vert)), [[0.0]]])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=(0, None), method="highs")
    if res.status != 0:
        raise MembershipSolverError(f"feasibility LP failed: {res.message}")

    if res.x[-1] <= tol:
        w = np.clip(res.x[:-1], 0.0, None)
        keep = np.flatnonzero(w > 1e-14)
        w = w[keep] / w[keep].sum()
        model = LocalModel(tuple(DeterministicStrategy.from_index(s, int(k)) for k in keep), w)
        residual = float(np.abs(behavior_of(model).table - b.table).max())
        if residual <= tol:
            return Membership(True, model=model, residual=residual)

    # max f.p - t  s.t. f.v_k <= t for all k, 0 <= f <= 1
    c = np.concatenate([-p, [1.0]])
    a_ub = np.hstack([verts.T, -np.ones((n_vert, 1))])
    bounds = [(0.0, 1.0)] * n_cells + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n_vert), bounds=bounds, method="highs")
    if res.status != 0:
        raise MembershipSolverError(f"separation LP failed: {res.message}")
    raw = res.x[:n_cells]
    f = BellFunctional(s, _normalize_certificate(s, raw))
    cert = Certificate(f, bell_value(b, f))
    if not cert.gap > tol:
        raise MembershipSolverError(
            f"behavior lies within tolerance of the local polytope boundary (gap {cert.gap:.3e}); undecided"
        )
    return Membership(False, certificate=cert)
