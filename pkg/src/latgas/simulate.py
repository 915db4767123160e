"""Sample paths of the lattice gas via the jump-chain / holding-time construction.

Each step draws an exponential holding time with the total exit rate of the
current configuration and then picks one enabled event with probability
proportional to its rate (the direct kinetic Monte Carlo method).  Runs are
bit-reproducible for a fixed model, control, and seed.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .lattice import Configuration, Event, RateModel, enabled_events

_BUF = 8192


class AbsorbingStateError(RuntimeError):
    """The chain reached a state with zero total exit rate."""


class DrainBudgetError(RuntimeError):
    """The drain phase exceeded the configured jump budget."""


@dataclass(frozen=True)
class JumpRecord:
    """One row of a trajectory.

    ``time`` is the jump time at which the chain entered ``config`` through
    ``event`` (``event`` is None on the initial record), and ``hold_before``
    is the sojourn just spent in the previous configuration.
    """

    index: int
    time: float
    event: Event | None
    config: Configuration
    hold_before: float


@dataclass(frozen=True)
class RunControl:
    """Stop rule, seed, and initial configuration of one trajectory.

    Exactly one of ``max_jumps`` / ``max_time`` must be set.  With ``drain``
    the run continues past the stop point until a caller-supplied condition
    reports that every tracked particle has left; ``drain_budget`` caps the
    total number of jumps so a drain always terminates.
    """

    max_jumps: int | None = None
    max_time: float | None = None
    drain: bool = False
    seed: int = 0
    initial: Configuration | None = None
    drain_budget: int = 10**9

    def __post_init__(self):
        if (self.max_jumps is None) == (self.max_time is None):
            raise ValueError("set exactly one of max_jumps / max_time")
        if self.max_jumps is not None and self.max_jumps < 0:
            raise ValueError("max_jumps must be >= 0")
        if self.max_time is not None and self.max_time <= 0:
            raise ValueError("max_time must be > 0")
        if self.drain_budget < 1:
            raise ValueError("drain_budget must be >= 1")


@dataclass(frozen=True)
class RunSummary:
    """Outcome of one trajectory.

    ``measure_time`` is the estimation horizon (the requested max_time, or
    the time of the last counted jump for a jump-budget stop); ``final_time``
    extends past it when the run drained.
    """

    n_jumps: int
    final_time: float
    measure_time: float
    reason: str
    final_config: Configuration


class _EventTable:
    """Per-state cache of the enabled-event list and its cumulative rates.

    Rates under Assumption-style models depend on the configuration only, so
    the scan produced by ``enabled_events`` can be memoized by occupancy
    mask.  Entries are (q, events, flip_masks, cumulative_rates).
    """

    def __init__(self, model: RateModel):
        self.model = model
        self.size = model.lattice.size
        self.table = {}

    def lookup(self, mask: int):
        entry = self.table.get(mask)
        if entry is None:
            pairs = enabled_events(self.model, Configuration(mask, self.size))
            cum = []
            acc = 0.0
            for _, rate in pairs:
                acc += rate
                cum.append(acc)
            entry = (
                acc,
                tuple(ev for ev, _ in pairs),
                tuple(ev.flip_mask for ev, _ in pairs),
                cum,
            )
            self.table[mask] = entry
        return entry


def _pick(cum, r):
    # first index with cumulative rate above r; clamp guards the rare case
    # where rounding pushes r up to the total rate itself
    return min(bisect_right(cum, r), len(cum) - 1)


def step(model: RateModel, eta: Configuration, rng) -> tuple[float, Event, Configuration]:
    """One jump: exponential holding time, then an event drawn by rate.

    Raises AbsorbingStateError when no event is enabled.
    """
    pairs = enabled_events(model, eta)
    q = math.fsum(r for _, r in pairs)
    if q <= 0.0:
        raise AbsorbingStateError(f"state {eta} is absorbing (q = 0)")
    u = rng.random()
    if u <= 0.0:
        u = 2.0**-53
    hold = -math.log(u) / q
    r = rng.random() * q
    acc = 0.0
    chosen = pairs[-1][0]
    for ev, rate in pairs:
        acc += rate
        if r < acc:
            chosen = ev
            break
    return hold, chosen, Configuration(eta.mask ^ chosen.flip_mask, eta.size)


def run(
    model: RateModel,
    control: RunControl,
    observer=None,
    on_horizon=None,
    drain_until=None,
) -> RunSummary:
    """Simulate one trajectory under the given control.

    ``observer`` receives every JumpRecord in order, starting with the
    initial record.  When the primary stop rule fires, ``on_horizon`` is
    called once with the measurement horizon; if ``control.drain`` is set
    the run then continues until ``drain_until()`` returns True (bounded by
    ``control.drain_budget`` jumps in total).
    """
    size = model.lattice.size
    eta0 = control.initial if control.initial is not None else Configuration.empty(size)
    if eta0.size != size:
        raise ValueError(
            f"initial configuration has {eta0.size} sites, model lattice has {size}"
        )
    rng = np.random.default_rng(control.seed)
    table = _EventTable(model)

    mask = eta0.mask
    t = 0.0
    n = 0
    if observer is not None:
        observer(JumpRecord(0, 0.0, None, eta0, 0.0))

    draining = False
    horizon = None
    want_drain = control.drain and drain_until is not None
    buf = rng.random(_BUF).tolist()
    bi = _BUF
    log = math.log

    def fix_horizon(value):
        nonlocal horizon, draining
        horizon = value
        if on_horizon is not None:
            on_horizon(value)
        draining = True

    while True:
        if not draining and control.max_jumps is not None and n >= control.max_jumps:
            fix_horizon(t)
        if draining and (not want_drain or drain_until()):
            reason = "drained" if want_drain else (
                "max-jumps" if control.max_jumps is not None else "max-time"
            )
            break
        if n >= control.drain_budget:
            raise DrainBudgetError(
                f"drain budget of {control.drain_budget} jumps exhausted at t={t}"
            )

        q, events, flips, cum = table.lookup(mask)
        if q <= 0.0:
            raise AbsorbingStateError(
                f"state {Configuration(mask, size)} is absorbing (q = 0); "
                f"irreducible models cannot reach this"
            )
        if bi >= _BUF:
            buf = rng.random(_BUF).tolist()
            bi = 0
        u = buf[bi]
        bi += 1
        if u <= 0.0:
            u = 2.0**-53
        hold = -log(u) / q

        if (
            not draining
            and control.max_time is not None
            and t + hold > control.max_time
        ):
            fix_horizon(control.max_time)
            if not want_drain or drain_until():
                reason = "max-time"
                break

        if bi >= _BUF:
            buf = rng.random(_BUF).tolist()
            bi = 0
        k = _pick(cum, buf[bi] * q)
        bi += 1

        t += hold
        n += 1
        mask ^= flips[k]
        if observer is not None:
            observer(JumpRecord(n, t, events[k], Configuration(mask, size), hold))

    if horizon is None:
        horizon = t
    return RunSummary(
        n_jumps=n,
        final_time=max(t, horizon),
        measure_time=horizon,
        reason=reason,
        final_config=Configuration(mask, size),
    )


def replica_seeds(base_seed: int, n: int) -> list[int]:
    """Deterministic independent seeds for n replicas of a base seed."""
    ss = np.random.SeedSequence(base_seed)
    return [int(s) for s in ss.generate_state(n, dtype=np.uint64)]
