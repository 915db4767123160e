"""Drained measurements and replica ensembles against exact values."""

import math

import numpy as np
import pytest

from latgas import (
    RunControl,
    SingleSiteModel,
    TasepParams,
    exact_law,
    measure_residence,
    run_ensemble,
    tasep_model,
)


def test_measurement_is_drained():
    m = measure_residence(
        tasep_model(TasepParams(3, 1.0, 1.0)),
        RunControl(max_jumps=5_000, seed=1),
    )
    assert m.summary.reason == "drained"
    assert m.ledger.open_counted(m.summary.measure_time) == 0
    assert m.summary.final_time >= m.summary.measure_time


def test_single_site_estimators_converge():
    # two-state chain: rho = phi = 1/2, tau = 1, residence Exp(1)
    m = measure_residence(
        SingleSiteModel(1.0, 1.0), RunControl(max_jumps=100_000, seed=5)
    )
    e = m.estimates
    assert abs(e.tau_hat - 1.0) <= 3.0 * e.stderr_tau
    assert abs(e.phi_hat - 0.5) <= 3.0 * e.stderr_phi
    assert abs(e.rho_hat - 0.5) <= 3.0 * e.stderr_rho


def test_tasep_l2_estimators_converge():
    model = tasep_model(TasepParams(2, 1.0, 1.0))
    sol = exact_law(model)
    m = measure_residence(model, RunControl(max_jumps=150_000, seed=2))
    e = m.estimates
    assert abs(e.tau_hat - sol.tau) <= 3.0 * e.stderr_tau
    assert abs(e.phi_hat - sol.phi) <= 3.0 * e.stderr_phi
    assert abs(e.rho_hat - sol.rho) <= 3.0 * e.stderr_rho


def test_max_time_measurement():
    model = SingleSiteModel(2.0, 2.0)
    m = measure_residence(model, RunControl(max_time=500.0, seed=3))
    e = m.estimates
    assert e.t == 500.0
    assert abs(e.rho_hat - 0.5) <= 3.0 * e.stderr_rho


def test_ensemble_single_replica_equals_single_run():
    model = tasep_model(TasepParams(3, 1.0, 1.0))
    control = RunControl(max_jumps=3_000, seed=7)
    ens = run_ensemble(model, control, 1)
    assert len(ens.replicas) == 1
    assert ens.pooled == ens.replicas[0]


def test_ensemble_deterministic_and_distinct():
    model = tasep_model(TasepParams(3, 1.0, 1.0))
    control = RunControl(max_jumps=2_000, seed=11)
    a = run_ensemble(model, control, 6)
    b = run_ensemble(model, control, 6)
    taus_a = [e.tau_hat for e in a.replicas]
    taus_b = [e.tau_hat for e in b.replicas]
    assert taus_a == taus_b
    assert len(set(taus_a)) == 6


def test_ensemble_workers_do_not_change_results():
    model = tasep_model(TasepParams(3, 0.8, 1.2))
    control = RunControl(max_jumps=1_500, seed=4)
    seq = run_ensemble(model, control, 4, workers=1)
    par = run_ensemble(model, control, 4, workers=2)
    assert [e.tau_hat for e in seq.replicas] == [e.tau_hat for e in par.replicas]
    assert seq.pooled.tau_hat == par.pooled.tau_hat


def test_ensemble_mean_influx_matches_exact():
    model = tasep_model(TasepParams(5, 1.0, 1.0))
    sol = exact_law(model)
    ens = run_ensemble(model, RunControl(max_jumps=4_000, seed=19), 100)
    pooled = ens.pooled
    assert pooled.n_completed <= pooled.n_injected
    assert abs(pooled.phi_hat - sol.phi) <= 3.0 * pooled.stderr_phi
    assert abs(pooled.tau_hat - sol.tau) <= 3.0 * pooled.stderr_tau


def test_ensemble_validates_replica_count():
    with pytest.raises(ValueError):
        run_ensemble(SingleSiteModel(), RunControl(max_jumps=10), 0)
