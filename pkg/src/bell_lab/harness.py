"""Seeded Monte Carlo experiments: CHSH runs, the GHZ hidden-communication
signaling experiment, and a local model exploiting the detection loophole.

Round ``i`` draws all its randomness from the counter-based stream
``(seed, i)`` (see ``kernels``), so tallies do not depend on how rounds are
split across workers.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .correlations import (
    Behavior,
    BellLabError,
    JointDistribution,
    Scenario,
    StructureError,
    TallyTable,
    estimate_behavior,
    mutual_information,
    no_signaling_check,
    require_valid,
)
from .lhv import BellFunctional, DeterministicStrategy, LocalModel, behavior_of, bell_value, enumerate_deterministic
from .nonlocal_box import pr_behavior
from .quantum import QuantumSetup, born_behavior
from .relativity import ConfigurationError, SpacetimeEvent, VCausalModel, influence_reaches, is_spacelike

_CHUNK = 1 << 18


class RunError(BellLabError, ValueError):
    pass


@dataclass(frozen=True)
class PrBoxSource:
    """Marker source: rounds follow the PR box promise."""


@dataclass(frozen=True)
class DetectionModel:
    """Local model that fakes a PR box through missing outcomes.

    Hidden variable (x_hat, y_hat, a_hat, b_hat) with a_hat XOR b_hat =
    x_hat AND y_hat, uniform over its 8 values. Each party outputs its planned
    bit iff its input equals its planned input, otherwise no outcome.
    """

    @property
    def scenario(self) -> Scenario:
        return Scenario((2, 2), (3, 3), (True, True))

    def hidden_values(self) -> list[tuple[int, int, int, int]]:
        return [(xh, yh, ah, ah ^ (xh & yh)) for xh, yh, ah in itertools.product(range(2), repeat=3)]

    def local_model(self) -> LocalModel:
        s = self.scenario
        strategies = []
        for xh, yh, ah, bh in self.hidden_values():
            alice = tuple(ah if x == xh else 2 for x in range(2))
            bob = tuple(bh if y == yh else 2 for y in range(2))
            strategies.append(DeterministicStrategy(s, (alice, bob)))
        return LocalModel(tuple(strategies), np.full(8, 1.0 / 8.0))

    def behavior(self) -> Behavior:
        return behavior_of(self.local_model())


def local_default_model() -> LocalModel:
    """Uniform mixture of the deterministic strategies saturating S = 3."""
    f = BellFunctional.chsh_s()
    best = [st for st in enumerate_deterministic(f.scenario) if bell_value(st.behavior(), f) == 3.0]
    return LocalModel(tuple(best), np.full(len(best), 1.0 / len(best)))


Source = Behavior | QuantumSetup | PrBoxSource | DetectionModel | LocalModel


def source_behavior(source: Source) -> Behavior:
    """Exact behavior a source realizes."""
    if isinstance(source, Behavior):
        return source
    if isinstance(source, QuantumSetup):
        return born_behavior(source)
    if isinstance(source, PrBoxSource):
        return pr_behavior()
    if isinstance(source, DetectionModel):
        return source.behavior()
    if isinstance(source, LocalModel):
        return behavior_of(source)
    raise RunError(f"unsupported source {type(source).__name__}")


def source_label(source: Source) -> str:
    return {
        Behavior: "behavior",
        QuantumSetup: "quantum",
        PrBoxSource: "pr",
        DetectionModel: "detection",
        LocalModel: "local",
    }.get(type(source), type(source).__name__)


@dataclass
class ExperimentConfig:
    source: Source
    rounds: int
    seed: int = 0
    input_dist: Sequence[Sequence[float]] | None = None
    functional: BellFunctional | None = None
    events: Sequence[SpacetimeEvent] | None = None
    fair_sampling: bool = False
    workers: int = 1

    def __post_init__(self):
        if int(self.rounds) < 1:
            raise RunError("rounds must be >= 1")
        self.rounds = int(self.rounds)
        if self.workers < 1:
            raise RunError("workers must be >= 1")

    def scenario(self) -> Scenario:
        if isinstance(self.source, QuantumSetup):
            return self.source.scenario
        if isinstance(self.source, PrBoxSource):
            return Scenario.chsh()
        return self.source.scenario

    def input_probabilities(self) -> list[np.ndarray]:
        s = self.scenario()
        if self.input_dist is None:
            return [np.full(m, 1.0 / m) for m in s.inputs]
        dists = [np.asarray(d, dtype=np.float64) for d in self.input_dist]
        if len(dists) != s.n_parties or any(d.shape != (m,) for d, m in zip(dists, s.inputs)):
            raise RunError("input distribution must give one probability per input per party")
        for d in dists:
            if np.any(d < 0) or abs(d.sum() - 1.0) > 1e-12:
                raise RunError("each party's input distribution must be nonnegative and sum to 1")
        return dists

    def echo(self) -> dict:
        return {
            "source": source_label(self.source),
            "rounds": self.rounds,
            "seed": self.seed,
            "input_dist": [d.tolist() for d in self.input_probabilities()],
            "fair_sampling": self.fair_sampling,
            "workers": self.workers,
            "backend": kernels.BACKEND,
        }


def _cdf(probs: np.ndarray) -> np.ndarray:
    """Cumulative table per row, exactly 1.0 from the last positive cell on."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    cdf = np.cumsum(probs, axis=1) / probs.sum(axis=1, keepdims=True)
    for row, p in zip(cdf, probs):
        last = int(np.flatnonzero(p > 0)[-1])
        row[last:] = 1.0
    return cdf


def sampling_tables(behavior: Behavior, input_probs: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    joint = input_probs[0]
    for d in input_probs[1:]:
        joint = np.outer(joint, d).ravel()
    return _cdf(joint)[0], _cdf(behavior.matrix())


def sample_tally(
    behavior: Behavior,
    rounds: int,
    seed: int,
    input_probs: Sequence[np.ndarray] | None = None,
    workers: int = 1,
) -> TallyTable:
    """Tally ``rounds`` seeded rounds drawn from ``behavior``."""
    s = behavior.scenario
    if input_probs is None:
        input_probs = [np.full(m, 1.0 / m) for m in s.inputs]
    icdf, ocdf = sampling_tables(behavior, input_probs)
    spans = [(lo, min(lo + _CHUNK, rounds)) for lo in range(0, rounds, _CHUNK)]
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda sp: kernels.tally_table(icdf, ocdf, seed, *sp), spans))
    else:
        parts = [kernels.tally_table(icdf, ocdf, seed, *sp) for sp in spans]
    counts = np.sum(parts, axis=0)
    return TallyTable(s, counts.reshape(s.shape), seed)


def functional_estimate(tally: TallyTable, f: BellFunctional) -> tuple[float, float] | None:
    """Plug-in estimate of ``f`` and its standard error; None if an input was never sampled.

    The variance is the multinomial one, summed over independent joint inputs.
    """
    est = estimate_behavior(tally)
    if not est.complete:
        return None
    s = tally.scenario
    p = est.table.reshape(s.n_joint_inputs, -1)
    n = est.totals.reshape(-1)
    c = f.matrix()
    mean = (c * p).sum(axis=1)
    var = ((c * c * p).sum(axis=1) - mean**2) / n
    return float(mean.sum()), float(math.sqrt(max(var.sum(), 0.0)))


@dataclass
class RunReport:
    config: ExperimentConfig
    tally: TallyTable
    s_hat: float | None
    stderr: float | None
    s_exact: float | None
    no_signaling_max_dev: float | None
    loopholes: dict | None
    unknown_inputs: list
    tallies_ref: str | None = None

    @property
    def ci95(self) -> list[float] | None:
        if self.s_hat is None:
            return None
        return [self.s_hat - 1.96 * self.stderr, self.s_hat + 1.96 * self.stderr]

    def to_dict(self) -> dict:
        return {
            "config_echo": self.config.echo(),
            "seed": self.config.seed,
            "N": self.config.rounds,
            "tallies_ref": self.tallies_ref,
            "S_hat": self.s_hat,
            "stderr": self.stderr,
            "ci95": self.ci95,
            "S_exact": self.s_exact,
            "no_signaling_max_dev": self.no_signaling_max_dev,
            "unknown_inputs": self.unknown_inputs,
            "loopholes": self.loopholes,
        }


def _default_functional(s: Scenario) -> BellFunctional | None:
    try:
        return BellFunctional.chsh_s(s)
    except StructureError:
        return None


def run(cfg: ExperimentConfig) -> RunReport:
    """Sample ``cfg.rounds`` rounds and estimate S, its error and signaling."""
    exact = source_behavior(cfg.source)
    require_valid(exact, 1e-9)
    f = cfg.functional if cfg.functional is not None else _default_functional(exact.scenario)
    if f is not None and f.scenario != exact.scenario:
        raise RunError("functional and source scenarios differ")
    tally = sample_tally(exact, cfg.rounds, cfg.seed, cfg.input_probabilities(), cfg.workers)
    est = estimate_behavior(tally)
    unknown = [list(map(int, idx)) for idx in zip(*np.nonzero(est.unknown))]
    s_hat = stderr = s_exact = ns_dev = None
    if f is not None:
        s_exact = bell_value(exact, f)
        fe = functional_estimate(tally, f)
        if fe is not None:
            s_hat, stderr = fe
    if est.complete:
        ns_dev = no_signaling_check(est.behavior, validate_tol=1e-9).max_deviation
    loopholes = None
    if cfg.events is not None:
        loopholes = loophole_audit(cfg.events, tally, cfg.fair_sampling)
    return RunReport(cfg, tally, s_hat, stderr, s_exact, ns_dev, loopholes, unknown)


def interval_coverage(cfg: ExperimentConfig, repetitions: int, k: float = 2.0) -> int:
    """How many of ``repetitions`` independent runs have |S_hat - S| <= k stderr."""
    hits = 0
    for rep in range(repetitions):
        seed = cfg.seed * 1_000_003 + rep
        sub = ExperimentConfig(cfg.source, cfg.rounds, seed, cfg.input_dist, cfg.functional, workers=cfg.workers)
        r = run(sub)
        if r.s_hat is not None and abs(r.s_hat - r.s_exact) <= k * r.stderr:
            hits += 1
    return hits


# --- loophole audit ----------------------------------------------------------


def loophole_audit(events: Sequence[SpacetimeEvent] | None, tally: TallyTable | None = None, fair_sampling: bool = False) -> dict:
    """Which loopholes a run leaves open.

    Locality is open when some party's input is not spacelike separated
    from another party's outcome. Detection is open when no-outcome symbols
    occur and fair sampling is not assumed.
    """
    if not events:
        raise ConfigurationError("loophole audit needs event geometry")
    inputs = {e.party: e for e in events if e.kind == "input_chosen"}
    outcomes = {e.party: e for e in events if e.kind == "outcome_registered"}
    if set(inputs) != set(outcomes) or len(inputs) < 2:
        raise ConfigurationError("geometry needs an input and an outcome event for every party")
    locality_open = any(
        not is_spacelike(inputs[p], outcomes[q]) for p in inputs for q in outcomes if p != q
    )
    detection_open = False
    if tally is not None and any(tally.scenario.bottom):
        s = tally.scenario
        n = s.n_parties
        for p in range(n):
            if s.bottom[p]:
                sel = [slice(None)] * (2 * n)
                sel[n + p] = s.outputs[p] - 1
                if tally.counts[tuple(sel)].sum() > 0:
                    detection_open = True
        detection_open = detection_open and not fair_sampling
    return {"locality": bool(locality_open), "detection": bool(detection_open)}


# --- detection loophole --------------------------------------------------------


@dataclass
class DetectionReport:
    full: TallyTable
    postselected: TallyTable
    discarded_fraction: float
    s_post: float
    s_post_stderr: float
    s_full: float | None
    coincidence_rate: float
    coincidence_stderr: float
    efficiency: tuple[float, float] | None
    efficiency_stderr: tuple[float, float] | None

    def to_dict(self) -> dict:
        return {
            "seed": self.full.rng_seed,
            "N": self.full.total,
            "S_post": self.s_post,
            "S_post_stderr": self.s_post_stderr,
            "S_full": self.s_full,
            "coincidence_rate": self.coincidence_rate,
            "coincidence_stderr": self.coincidence_stderr,
            "per_party_efficiency": None if self.efficiency is None else list(self.efficiency),
            "per_party_efficiency_stderr": None if self.efficiency_stderr is None else list(self.efficiency_stderr),
            "discarded_fraction": self.discarded_fraction,
        }


def detection_loophole_run(rounds: int, seed: int = 0, report_efficiency: bool = True) -> DetectionReport:
    """Sample the detection model, then compare full and post-selected statistics."""
    if rounds < 1:
        raise RunError("rounds must be >= 1")
    model = DetectionModel()
    s = model.scenario
    counts = np.zeros(s.shape, dtype=np.int64)
    for lo in range(0, rounds, _CHUNK):
        hi = min(lo + _CHUNK, rounds)
        u = kernels.uniforms(seed, lo, hi, 3)
        x = (u[:, 0] * 2).astype(np.int64)
        y = (u[:, 1] * 2).astype(np.int64)
        lam = (u[:, 2] * 8).astype(np.int64)
        xh, yh, ah = lam >> 2, (lam >> 1) & 1, lam & 1
        bh = ah ^ (xh & yh)
        a = np.where(x == xh, ah, 2)
        b = np.where(y == yh, bh, 2)
        flat = ((x * 2 + y) * 3 + a) * 3 + b
        counts += np.bincount(flat, minlength=counts.size).reshape(s.shape)
    full = TallyTable(s, counts, seed)
    post, discarded = full.postselect()
    fe = functional_estimate(post, BellFunctional.chsh_s())
    if fe is None:
        raise RunError("too few rounds: some input pair had no coincidences")
    s_post, s_err = fe
    full_fe = functional_estimate(full, BellFunctional.chsh_s(s))
    kept = 1.0 - discarded
    eff = eff_err = None
    if report_efficiency:
        detected = []
        for p in range(2):
            axis = tuple(i for i in range(4) if i != 2 + p)
            detected.append(float(counts.sum(axis=axis)[:2].sum() / rounds))
        eff = (detected[0], detected[1])
        eff_err = tuple(math.sqrt(e * (1 - e) / rounds) for e in eff)
    return DetectionReport(
        full,
        post,
        discarded,
        s_post,
        s_err,
        None if full_fe is None else full_fe[0],
        kept,
        math.sqrt(kept * (1 - kept) / rounds),
        eff,
        eff_err,
    )


# --- GHZ hidden-communication signaling ---------------------------------------


LateRule = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


def independent_late_rule(u_b: np.ndarray, u_c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pure hidden communication: with no influence, each outcome is a fair coin."""
    return (u_b < 0.5).astype(np.int64), (u_c < 0.5).astype(np.int64)


@dataclass
class VCausalGhzConfig:
    """Three parties sharing a GHZ state under a finite-speed hidden-influence model.

    ``events`` maps party name "A", "B", "C" to (input event, outcome event).
    ``alice_measures=None`` picks the arm by a fair coin each round.
    ``late_rule`` decides Bob's and Charlie's outcomes when no influence
    arrived in time; swapping it in gives a mixed model with extra local
    variables.
    """

    model: VCausalModel
    events: dict[str, tuple[SpacetimeEvent, SpacetimeEvent]]
    alice_measures: bool | None = True
    late_rule: LateRule = independent_late_rule

    def __post_init__(self):
        if set(self.events) != {"A", "B", "C"}:
            raise ConfigurationError("events needed for parties A, B and C")
        (b_in, b_out), (c_in, c_out) = self.events["B"], self.events["C"]
        if influence_reaches(b_in, c_out, self.model) or influence_reaches(c_in, b_out, self.model):
            raise ConfigurationError("Bob and Charlie must be out of reach of each other's hidden influence")

    @property
    def reaches(self) -> tuple[bool, bool]:
        a_in = self.events["A"][0]
        return (
            influence_reaches(a_in, self.events["B"][1], self.model),
            influence_reaches(a_in, self.events["C"][1], self.model),
        )


def ghz_events(
    alice_distance: float = 100e3,
    bc_distance: float = 1e3,
    alice_lead: float = 10e-6,
    charlie_delay: float = 0.0,
) -> dict[str, tuple[SpacetimeEvent, SpacetimeEvent]]:
    """Alice far from Bob and Charlie, who measure simultaneously near each other.

    Alice measures ``alice_lead`` seconds before them: too early for light
    to connect her to them at 100 km, early enough for v >= ~34 c.
    """
    a = np.array([0.0, 0.0, 0.0])
    b = np.array([alice_distance, 0.0, 0.0])
    c = np.array([alice_distance, bc_distance, 0.0])
    ev = {
        "A": (SpacetimeEvent("A", "input_chosen", a, -alice_lead), SpacetimeEvent("A", "outcome_registered", a, -alice_lead)),
        "B": (SpacetimeEvent("B", "input_chosen", b, 0.0), SpacetimeEvent("B", "outcome_registered", b, 0.0)),
        "C": (
            SpacetimeEvent("C", "input_chosen", c, charlie_delay),
            SpacetimeEvent("C", "outcome_registered", c, charlie_delay),
        ),
    }
    return ev


@dataclass
class GhzReport:
    seed: int
    rounds: int
    arm_counts: dict[str, int]
    equal_counts: dict[str, int]
    reaches: tuple[bool, bool]
    alice_matches: int | None
    joint_bc: dict[str, list[list[int]]]

    def p_equal(self, arm: str) -> float | None:
        n = self.arm_counts.get(arm, 0)
        return self.equal_counts[arm] / n if n else None

    def p_equal_stderr(self, arm: str) -> float | None:
        p = self.p_equal(arm)
        return None if p is None else math.sqrt(p * (1 - p) / self.arm_counts[arm])

    def signaling_information(self) -> float | None:
        """Empirical I(arm : [b == c]) in bits; needs both arms."""
        if any(self.arm_counts.get(arm, 0) == 0 for arm in ("measure", "idle")):
            return None
        table = [
            [self.arm_counts[arm] - self.equal_counts[arm], self.equal_counts[arm]] for arm in ("measure", "idle")
        ]
        return mutual_information(JointDistribution.from_counts(table))

    def bc_information(self, arm: str) -> float | None:
        """Empirical I(b : c) within one arm."""
        if self.arm_counts.get(arm, 0) == 0:
            return None
        return mutual_information(JointDistribution.from_counts(self.joint_bc[arm]))

    def to_dict(self) -> dict:
        arms = {}
        for arm in ("measure", "idle"):
            if self.arm_counts.get(arm, 0):
                arms[arm] = {
                    "rounds": self.arm_counts[arm],
                    "P_b_eq_c": self.p_equal(arm),
                    "stderr": self.p_equal_stderr(arm),
                    "I_b_c_bits": self.bc_information(arm),
                }
        return {
            "seed": self.seed,
            "N": self.rounds,
            "alice_reaches": {"B": self.reaches[0], "C": self.reaches[1]},
            "arms": arms,
            "alice_matches_bob_and_charlie": self.alice_matches,
            "signaling_information_bits": self.signaling_information(),
        }


def _h2(p: float) -> float:
    return 0.0 if p in (0.0, 1.0) else -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


# I(arm : [b == c]) for equal-prior arms with P(b=c) = 1 and 1/2
GHZ_SIGNALING_BITS = _h2(0.75) - 0.5


def ghz_vcausal_run(cfg: VCausalGhzConfig, rounds: int, seed: int = 0) -> GhzReport:
    """Simulate the GHZ experiment when all correlation comes from hidden influences.

    When Alice measures and her influence reaches a party in time, that
    party's outcome copies Alice's; otherwise ``cfg.late_rule`` decides.
    """
    if rounds < 1:
        raise RunError("rounds must be >= 1")
    reach_b, reach_c = cfg.reaches
    arm_counts = {"measure": 0, "idle": 0}
    equal_counts = {"measure": 0, "idle": 0}
    joint = {"measure": np.zeros((2, 2), dtype=np.int64), "idle": np.zeros((2, 2), dtype=np.int64)}
    matches = 0
    for lo in range(0, rounds, _CHUNK):
        hi = min(lo + _CHUNK, rounds)
        u = kernels.uniforms(seed, lo, hi, 4)
        if cfg.alice_measures is None:
            measure = u[:, 0] < 0.5
        else:
            measure = np.full(hi - lo, bool(cfg.alice_measures))
        a = (u[:, 1] < 0.5).astype(np.int64)
        late_b, late_c = cfg.late_rule(u[:, 2], u[:, 3])
        b = np.where(measure & reach_b, a, late_b)
        c = np.where(measure & reach_c, a, late_c)
        for arm, mask in (("measure", measure), ("idle", ~measure)):
            arm_counts[arm] += int(mask.sum())
            equal_counts[arm] += int((b[mask] == c[mask]).sum())
            joint[arm] += np.bincount(b[mask] * 2 + c[mask], minlength=4).reshape(2, 2)
        matches += int((measure & (a == b) & (a == c)).sum())
    return GhzReport(
        seed,
        rounds,
        arm_counts,
        equal_counts,
        (reach_b, reach_c),
        matches if arm_counts["measure"] else None,
        {k: v.tolist() for k, v in joint.items()},
    )
