"""Drained residence measurements and replica ensembles.

A measurement runs one trajectory with a ledger attached, lets the run
drain past its stop point until every counted particle has exited, and
evaluates the estimators at the measurement horizon.  Ensembles repeat
this over deterministically derived seeds and pool the replicas.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .lattice import Configuration, RateModel
from .simulate import RunControl, RunSummary, replica_seeds, run
from .tracking import Estimates, ResidenceLedger

WORKERS_ENV = "LATGAS_WORKERS"


@dataclass
class Measurement:
    summary: RunSummary
    estimates: Estimates
    ledger: ResidenceLedger


def measure_residence(model: RateModel, control: RunControl) -> Measurement:
    """One trajectory with particle tracking, drained to completion.

    The control's drain flag is forced on: the residence-time estimator is
    defined only once every particle injected by the horizon has left.
    """
    if not control.drain:
        control = replace(control, drain=True)
    initial = (
        control.initial
        if control.initial is not None
        else Configuration.empty(model.lattice.size)
    )
    ledger = ResidenceLedger(initial)
    summary = run(
        model,
        control,
        observer=ledger.observe,
        on_horizon=ledger.set_cutoff,
        drain_until=lambda: ledger.open_counted() == 0,
    )
    return Measurement(
        summary=summary,
        estimates=ledger.estimates(summary.measure_time),
        ledger=ledger,
    )


@dataclass
class EnsembleResult:
    """Per-replica estimates plus a pooled row.

    The pooled point estimates aggregate all replicas (total residence over
    total completions, and so on); with two or more replicas the pooled
    standard errors come from the spread of the independent replica values,
    which needs no autocorrelation correction.
    """

    replicas: list
    summaries: list
    pooled: Estimates


def _measure_with_seed(args):
    model, control, seed = args
    m = measure_residence(model, replace(control, seed=seed))
    return m.summary, m.estimates


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_ensemble(
    model: RateModel,
    control: RunControl,
    n_replicas: int,
    workers: int | None = None,
) -> EnsembleResult:
    """Independent replicas of a residence measurement.

    Replica seeds are derived deterministically from the control's seed, so
    the result set does not depend on scheduling; with ``workers`` > 1 the
    replicas run in separate processes.
    """
    if n_replicas < 1:
        raise ValueError("n_replicas must be >= 1")
    if workers is None:
        workers = default_workers()
    seeds = replica_seeds(control.seed, n_replicas)
    jobs = [(model, control, s) for s in seeds]
    if workers > 1 and n_replicas > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n_replicas)) as pool:
            results = list(pool.map(_measure_with_seed, jobs))
    else:
        results = [_measure_with_seed(job) for job in jobs]
    summaries = [r[0] for r in results]
    estimates = [r[1] for r in results]
    return EnsembleResult(
        replicas=estimates,
        summaries=summaries,
        pooled=_pool(estimates),
    )


def _pool(replicas) -> Estimates:
    if len(replicas) == 1:
        return replicas[0]
    t_total = sum(e.t for e in replicas)
    n_inj = sum(e.n_injected for e in replicas)
    n_comp = sum(e.n_completed for e in replicas)
    rho = sum(e.rho_hat * e.t for e in replicas) / t_total
    phi = n_inj / t_total
    tau = (
        sum(e.tau_hat * e.n_completed for e in replicas) / n_comp if n_comp else 0.0
    )
    r = len(replicas)

    def spread(values):
        return float(np.std(values, ddof=1) / np.sqrt(r))

    return Estimates(
        t=t_total / r,
        rho_hat=rho,
        phi_hat=phi,
        tau_hat=tau,
        n_injected=n_inj,
        n_completed=n_comp,
        stderr_tau=spread([e.tau_hat for e in replicas]),
        stderr_rho=spread([e.rho_hat for e in replicas]),
        stderr_phi=spread([e.phi_hat for e in replicas]),
    )
