import math

import numpy as np
import pytest

from bell_lab.correlations import Behavior, Scenario, postselect
from bell_lab.harness import (
    GHZ_SIGNALING_BITS,
    DetectionModel,
    ExperimentConfig,
    PrBoxSource,
    RunError,
    VCausalGhzConfig,
    detection_loophole_run,
    ghz_events,
    ghz_vcausal_run,
    interval_coverage,
    local_default_model,
    loophole_audit,
    run,
    sample_tally,
    source_behavior,
)
from bell_lab.lhv import BellFunctional, bell_value, enumerate_deterministic, is_local, local_max
from bell_lab.nonlocal_box import pr_behavior
from bell_lab.quantum import tsirelson_setup
from bell_lab.relativity import ConfigurationError, VCausalModel, lab_events

import oracles


def test_rounds_validated():
    with pytest.raises(RunError):
        ExperimentConfig(PrBoxSource(), 0)
    with pytest.raises(RunError):
        ExperimentConfig(PrBoxSource(), 10, workers=0)
    with pytest.raises(RunError):
        run(ExperimentConfig(PrBoxSource(), 10, input_dist=[[0.5, 0.6], [0.5, 0.5]]))


def test_local_default_model_saturates_bound():
    m = local_default_model()
    assert len(m.strategies) == 8
    assert bell_value(source_behavior(m), BellFunctional.chsh_s()) == pytest.approx(3.0, abs=1e-15)


def test_seed_reproducibility_independent_of_workers():
    b = source_behavior(tsirelson_setup())
    t1 = sample_tally(b, 700_000, seed=9, workers=1)
    t4 = sample_tally(b, 700_000, seed=9, workers=4)
    assert np.array_equal(t1.counts, t4.counts)
    t_other = sample_tally(b, 700_000, seed=10)
    assert not np.array_equal(t1.counts, t_other.counts)


def test_non_uniform_input_distribution():
    t = sample_tally(pr_behavior(), 200_000, seed=1, input_probs=[np.array([0.9, 0.1]), np.array([0.5, 0.5])])
    frac_x0 = t.per_input_totals()[0].sum() / t.total
    assert abs(frac_x0 - 0.9) < 4 * math.sqrt(0.09 / t.total)


@pytest.mark.parametrize(
    "source, exact",
    [(PrBoxSource(), oracles.PR_S), (tsirelson_setup(), oracles.TSIRELSON_S), (local_default_model(), 3.0)],
    ids=["pr", "quantum", "local"],
)
def test_run_estimates_s_within_four_stderr(source, exact):
    r = run(ExperimentConfig(source, 10**6, seed=2))
    assert r.s_exact == pytest.approx(exact, abs=1e-12)
    if r.stderr == 0:
        assert r.s_hat == exact
    else:
        assert abs(r.s_hat - exact) <= 4 * r.stderr
    lo, hi = r.ci95
    assert lo <= r.s_hat <= hi
    assert r.no_signaling_max_dev < 0.01


def test_short_run_reports_ci_and_unknown_inputs():
    r = run(ExperimentConfig(local_default_model(), 10, seed=1))
    d = r.to_dict()
    assert d["N"] == 10 and d["seed"] == 1
    assert d["unknown_inputs"] == []  # seed 1 happens to visit all four input pairs
    assert d["S_hat"] <= 3.0 + 4 * d["stderr"]
    lo, hi = d["ci95"]
    assert hi - lo == pytest.approx(2 * 1.96 * d["stderr"])
    # a 2-round run cannot cover four input pairs
    r2 = run(ExperimentConfig(PrBoxSource(), 2, seed=0))
    assert r2.s_hat is None and r2.unknown_inputs


def test_pr_coverage_is_degenerate():
    # every PR round satisfies the promise, so S_hat = 4 with zero error every time
    hits = interval_coverage(ExperimentConfig(PrBoxSource(), 10**4, seed=5), 100)
    assert hits == 100


def test_quantum_interval_coverage():
    hits = interval_coverage(ExperimentConfig(tsirelson_setup(), 10**4, seed=5), 100)
    assert 89 <= hits <= 99


# --- loophole audit ------------------------------------------------------------------


def test_locality_audit():
    assert loophole_audit(lab_events(18e3))["locality"] is False
    late = lab_events(18e3, duration=1.0)
    assert loophole_audit(late)["locality"] is True
    with pytest.raises(ConfigurationError):
        loophole_audit(None)


def test_detection_audit():
    m = DetectionModel()
    t = sample_tally(m.behavior(), 1000, seed=0)
    assert loophole_audit(lab_events(18e3), t)["detection"] is True
    assert loophole_audit(lab_events(18e3), t, fair_sampling=True)["detection"] is False
    r = run(ExperimentConfig(m, 1000, events=lab_events(18e3)))
    assert r.loopholes == {"locality": False, "detection": True}


# --- detection loophole model ------------------------------------------------------


def test_detection_model_full_behavior_is_local():
    m = DetectionModel()
    b = m.behavior()
    assert is_local(b).local
    assert bell_value(b, BellFunctional.chsh_s(m.scenario)) <= 3.0


def test_detection_model_postselects_to_pr_exactly():
    cond, rate = postselect(DetectionModel().behavior())
    assert np.allclose(cond.table, pr_behavior().table, atol=1e-15)
    assert np.allclose(rate, 0.25)


def test_three_outcome_alphabet_local_bound():
    s = Scenario((2, 2), (3, 3), (True, True))
    f = BellFunctional.chsh_s(s)
    assert local_max(f).value == 3.0
    assert len(enumerate_deterministic(s)) == 81


def test_detection_run_statistics():
    r = detection_loophole_run(10**6, seed=3)
    assert abs(r.s_post - 4.0) <= max(4 * r.s_post_stderr, 1e-12)
    assert abs(r.coincidence_rate - 0.25) <= 4 * r.coincidence_stderr
    for e, se in zip(r.efficiency, r.efficiency_stderr):
        assert abs(e - 0.5) <= 4 * se
    assert r.s_full <= 3.0
    assert r.discarded_fraction == pytest.approx(1 - r.coincidence_rate)


# --- GHZ hidden communication --------------------------------------------------------


def ghz_cfg(arm, **kw):
    return VCausalGhzConfig(VCausalModel(v=1e4), ghz_events(**kw), arm)


def test_ghz_alice_measuring_correlates_bob_and_charlie():
    r = ghz_vcausal_run(ghz_cfg(True), 10**5, seed=1)
    assert r.reaches == (True, True)
    assert r.p_equal("measure") == 1.0
    assert r.alice_matches == 10**5


def test_ghz_idle_alice_leaves_them_uncorrelated():
    r = ghz_vcausal_run(ghz_cfg(False), 10**5, seed=1)
    p, se = r.p_equal("idle"), r.p_equal_stderr("idle")
    assert abs(p - 0.5) <= 4 * se
    # isolation: under independence 2 n ln2 I_hat is chi-square(1), mean 1 and sd sqrt(2)
    n = r.arm_counts["idle"]
    assert r.bc_information("idle") <= (1 + 3 * math.sqrt(2)) / (2 * n * math.log(2))


def test_ghz_signaling_information():
    assert GHZ_SIGNALING_BITS == pytest.approx(oracles.ghz_signaling_bits(), abs=1e-15)
    assert GHZ_SIGNALING_BITS == pytest.approx(oracles.binary_entropy(0.75) - 0.5, abs=1e-15)
    r = ghz_vcausal_run(ghz_cfg(None), 10**5, seed=2)
    assert abs(r.signaling_information() - GHZ_SIGNALING_BITS) < 0.01


def test_ghz_isolation_is_required():
    with pytest.raises(ConfigurationError):
        ghz_cfg(True, charlie_delay=1e-6)


def test_ghz_slow_influence_does_not_reach():
    cfg = VCausalGhzConfig(VCausalModel(v=2.0), ghz_events(), True)
    assert cfg.reaches == (False, False)
    r = ghz_vcausal_run(cfg, 10**4, seed=0)
    assert abs(r.p_equal("measure") - 0.5) <= 4 * r.p_equal_stderr("measure")


def test_ghz_report_is_reproducible():
    a = ghz_vcausal_run(ghz_cfg(None), 5000, seed=4).to_dict()
    b = ghz_vcausal_run(ghz_cfg(None), 5000, seed=4).to_dict()
    assert a == b


def test_run_with_behavior_source():
    b = Behavior.uniform(Scenario.chsh())
    r = run(ExperimentConfig(b, 10**5, seed=0))
    assert abs(r.s_hat - 2.0) <= 4 * r.stderr
