"""Particle identities along a trajectory and the residence-time estimators.

Because particles enter one at a time and hop one at a time, each one can be
tagged with a persistent id: an injection mints a fresh id, a hop moves the
id with the particle, an extraction closes every id under the removed sites.
The ledger built this way yields the three sample-path estimators

* ``tau_hat``  - mean time between entry and exit of the particles injected
  up to the horizon (the horizon requires a drained run, so no counted
  particle is still inside),
* ``phi_hat``  - injections per unit time,
* ``rho_hat``  - time-averaged particle count,

whose limits satisfy rho = phi * tau.  A direct, per-jump evaluation of the
survival indicators from consecutive configurations is provided as an
independent cross-check of the id bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Configuration, Diffusion, Extraction, Injection
from .simulate import JumpRecord


class LedgerCorruptionError(RuntimeError):
    """An observed event is inconsistent with the ledger's site ownership."""


class IncompleteDrainError(RuntimeError):
    """Counted particles are still in the system at the requested horizon."""


@dataclass
class Estimates:
    """Point estimates at horizon t with batch-means standard errors."""

    t: float
    rho_hat: float
    phi_hat: float
    tau_hat: float
    n_injected: int
    n_completed: int
    stderr_tau: float
    stderr_rho: float
    stderr_phi: float


class ResidenceLedger:
    """Entry/exit bookkeeping of every particle seen along one trajectory.

    Feed it every JumpRecord of a run (via ``observe``).  Particles present
    in the initial configuration are tracked for the conservation check but
    flagged so the estimators can exclude them: the mean residence time is
    defined over injected particles only.
    """

    def __init__(self, initial: Configuration, cutoff: float = math.inf):
        self.size = initial.size
        self.cutoff = cutoff
        self._mask = initial.mask
        self._owner = [None] * initial.size
        self._next_id = 0
        # open_records: id -> (entry jump index, entry time, initial flag)
        self.open_records = {}
        # closed records, columnar, in exit order
        self.closed_entry_idx = []
        self.closed_exit_idx = []
        self.closed_entry = []
        self.closed_exit = []
        self.closed_initial = []
        self._n_open_counted = 0
        self.n_initial = initial.particle_count
        self.n_observed = 0
        for x in range(initial.size):
            if initial[x]:
                self._owner[x] = self._next_id
                self.open_records[self._next_id] = (0, 0.0, True)
                self._next_id += 1

    # -- streaming interface -------------------------------------------------

    def set_cutoff(self, t: float):
        """Freeze the measurement horizon: later injections are not counted."""
        self.cutoff = t

    def open_counted(self, cutoff: float | None = None) -> int:
        """Number of injected-and-counted particles still in the system."""
        if cutoff is None or cutoff == self.cutoff:
            return self._n_open_counted
        return sum(
            1
            for (_, entry, initial) in self.open_records.values()
            if not initial and entry <= cutoff
        )

    @property
    def particle_count(self) -> int:
        return len(self.open_records)

    def observe(self, record: JumpRecord):
        """Advance the ledger by one jump record (records must arrive in order)."""
        event = record.event
        owner = self._owner
        if event is None:
            if record.index != 0 or record.config.mask != self._mask:
                raise LedgerCorruptionError(
                    "initial record does not match the ledger's initial configuration"
                )
        elif isinstance(event, Injection):
            x = event.site
            if owner[x] is not None:
                raise LedgerCorruptionError(
                    f"injection at site {x} which the ledger sees occupied"
                )
            pid = self._next_id
            self._next_id += 1
            owner[x] = pid
            self.open_records[pid] = (record.index, record.time, False)
            if record.time <= self.cutoff:
                self._n_open_counted += 1
            self._mask ^= 1 << x
        elif isinstance(event, Diffusion):
            pid = owner[event.source]
            if pid is None:
                raise LedgerCorruptionError(
                    f"diffusion from site {event.source} which the ledger sees empty"
                )
            if owner[event.target] is not None:
                raise LedgerCorruptionError(
                    f"diffusion onto site {event.target} which the ledger sees occupied"
                )
            owner[event.source] = None
            owner[event.target] = pid
            self._mask ^= (1 << event.source) | (1 << event.target)
        elif isinstance(event, Extraction):
            for x in event.sites:
                pid = owner[x]
                if pid is None:
                    raise LedgerCorruptionError(
                        f"extraction at site {x} which the ledger sees empty"
                    )
                owner[x] = None
                entry_idx, entry_time, initial = self.open_records.pop(pid)
                self.closed_entry_idx.append(entry_idx)
                self.closed_exit_idx.append(record.index)
                self.closed_entry.append(entry_time)
                self.closed_exit.append(record.time)
                self.closed_initial.append(initial)
                if not initial and entry_time <= self.cutoff:
                    self._n_open_counted -= 1
            self._mask ^= event.flip_mask
        else:
            raise TypeError(f"not an event: {event!r}")

        self.n_observed = record.index
        # conservation: the simulator's occupancy must match the ledger's
        # open records site by site and in count
        if record.config.mask != self._mask:
            raise LedgerCorruptionError(
                f"occupancy mismatch at jump {record.index}: "
                f"simulator {record.config}, ledger {Configuration(self._mask, self.size)}"
            )
        if record.config.particle_count != len(self.open_records):
            raise LedgerCorruptionError(
                f"particle count mismatch at jump {record.index}"
            )

    # -- estimators ----------------------------------------------------------

    def _counted_residences(self, t: float) -> np.ndarray:
        """Residence times of injected particles with entry <= t, in entry order."""
        still_open = self.open_counted(t)
        if still_open:
            raise IncompleteDrainError(
                f"{still_open} counted particle(s) still in the system; "
                f"drain the run past t={t} before computing the residence time"
            )
        entry = np.asarray(self.closed_entry)
        exit_ = np.asarray(self.closed_exit)
        initial = np.asarray(self.closed_initial, dtype=bool)
        if entry.size == 0:
            return np.empty(0)
        sel = (~initial) & (entry <= t)
        order = np.argsort(np.asarray(self.closed_entry_idx)[sel], kind="stable")
        return (exit_[sel] - entry[sel])[order]

    def mean_residence_time(self, t: float) -> float:
        """Average residence of particles injected by t (0 when none were)."""
        res = self._counted_residences(t)
        if res.size == 0:
            return 0.0
        return float(res.mean())

    def injections_by(self, t: float) -> int:
        n = sum(
            1
            for (_, entry, initial) in self.open_records.values()
            if not initial and entry <= t
        )
        entry = np.asarray(self.closed_entry)
        initial = np.asarray(self.closed_initial, dtype=bool)
        if entry.size:
            n += int(((~initial) & (entry <= t)).sum())
        return n

    def influx(self, t: float) -> float:
        """Injections per unit time up to t."""
        if t <= 0:
            raise ValueError("influx needs t > 0")
        return self.injections_by(t) / t

    def _intervals(self):
        """(entry, exit) of every particle ever seen; open ones get exit = inf."""
        entry = list(self.closed_entry)
        exit_ = list(self.closed_exit)
        for (_, e, _initial) in self.open_records.values():
            entry.append(e)
            exit_.append(math.inf)
        return np.asarray(entry), np.asarray(exit_)

    def _count_integral(self, s: np.ndarray) -> np.ndarray:
        """integral_0^s |eta_u| du at each value of s, via interval overlaps."""
        entry, exit_ = self._intervals()
        entry_sorted = np.sort(entry)
        exit_sorted = np.sort(exit_[np.isfinite(exit_)])
        n_open = entry.size - exit_sorted.size
        centry = np.concatenate([[0.0], np.cumsum(entry_sorted)])
        cexit = np.concatenate([[0.0], np.cumsum(exit_sorted)])
        s = np.asarray(s, dtype=float)
        ke = np.searchsorted(entry_sorted, s, side="right")
        kx = np.searchsorted(exit_sorted, s, side="right")
        sum_min_entry = centry[ke] + s * (entry_sorted.size - ke)
        sum_min_exit = cexit[kx] + s * (exit_sorted.size - kx) + s * n_open
        return sum_min_exit - sum_min_entry

    def occupancy_average(self, t: float) -> float:
        """Time-averaged particle count over [0, t]."""
        if t <= 0:
            raise ValueError("occupancy average needs t > 0")
        return float(self._count_integral(np.array([t]))[0]) / t

    def estimates(self, t: float) -> Estimates:
        """All three estimators at horizon t, with batch-means standard errors."""
        res = self._counted_residences(t)
        n_completed = int(res.size)
        n_injected = self.injections_by(t)
        tau_hat = float(res.mean()) if n_completed else 0.0
        rho_hat = self.occupancy_average(t)
        phi_hat = n_injected / t

        stderr_tau = _batch_means_stderr(res)

        counted_entries = self._counted_entry_times(t)
        stderr_phi = _window_rate_stderr(counted_entries, t)
        stderr_rho = self._window_rho_stderr(t)

        return Estimates(
            t=t,
            rho_hat=rho_hat,
            phi_hat=phi_hat,
            tau_hat=tau_hat,
            n_injected=n_injected,
            n_completed=n_completed,
            stderr_tau=stderr_tau,
            stderr_rho=stderr_rho,
            stderr_phi=stderr_phi,
        )

    def _counted_entry_times(self, t: float) -> np.ndarray:
        entry = np.asarray(self.closed_entry)
        initial = np.asarray(self.closed_initial, dtype=bool)
        times = list(entry[(~initial) & (entry <= t)]) if entry.size else []
        times += [
            e
            for (_, e, ini) in self.open_records.values()
            if not ini and e <= t
        ]
        return np.sort(np.asarray(times))

    def _window_rho_stderr(self, t: float) -> float:
        entry, exit_ = self._intervals()
        n_changes = entry.size + np.isfinite(exit_).sum()
        b = max(2, math.isqrt(max(int(n_changes), 1)))
        edges = np.linspace(0.0, t, b + 1)
        integrals = np.diff(self._count_integral(edges))
        means = integrals / (t / b)
        if means.size < 2:
            return math.nan
        return float(means.std(ddof=1) / math.sqrt(b))


def _batch_means_stderr(values: np.ndarray) -> float:
    """Nonoverlapping batch means with ceil(sqrt(n)) batches."""
    n = values.size
    if n < 2:
        return math.nan
    b = math.ceil(math.sqrt(n))
    m = n // b
    if m == 0 or b < 2:
        return math.nan
    batches = values[: b * m].reshape(b, m).mean(axis=1)
    return float(batches.std(ddof=1) / math.sqrt(b))


def _window_rate_stderr(event_times: np.ndarray, t: float) -> float:
    """Standard error of an event rate from per-window counts."""
    n = event_times.size
    if n < 2:
        return math.nan
    b = max(2, math.isqrt(int(n)))
    edges = np.linspace(0.0, t, b + 1)
    counts = np.diff(np.searchsorted(event_times, edges, side="right"))
    rates = counts / (t / b)
    return float(rates.std(ddof=1) / math.sqrt(b))


def occupancy_time_average(jump_times, counts, t: float) -> float:
    """Time average of a piecewise-constant count left-continuous on jumps.

    ``jump_times`` are J_0 = 0 <= J_1 <= ... and ``counts`` the particle
    count right after each jump; the average is the exact integral of the
    resulting step function over [0, t] divided by t.  Holds that run past
    t contribute only their portion before t.
    """
    if t <= 0:
        raise ValueError("occupancy average needs t > 0")
    if len(jump_times) != len(counts) or not len(jump_times):
        raise ValueError("need equally many jump times and counts")
    if jump_times[0] != 0.0:
        raise ValueError("trajectories start at time 0")
    area = 0.0
    for i in range(len(jump_times)):
        lo = min(jump_times[i], t)
        hi = min(jump_times[i + 1], t) if i + 1 < len(jump_times) else t
        area += (hi - lo) * counts[i]
    return area / t


# ---------------------------------------------------------------------------
# direct evaluation of the survival indicators (test oracle)
# ---------------------------------------------------------------------------


def step_survival_matrix(prev: Configuration, cur: Configuration) -> np.ndarray:
    """theta matrix of one jump: entry (x, y) = 1 iff a particle moved x -> y.

    Diagonal entries mark particles that stayed put; off-diagonal entries
    require an occupied source that empties and an empty target that fills.
    """
    L = prev.size
    theta = np.zeros((L, L), dtype=np.int64)
    for x in range(L):
        if not prev[x]:
            continue
        if cur[x]:
            theta[x, x] = 1
            continue
        for y in range(L):
            if y != x and not prev[y] and cur[y]:
                theta[x, y] = 1
    return theta


def brute_force_theta_u(configs) -> tuple[np.ndarray, np.ndarray]:
    """Survival indicators of a trajectory prefix, straight from the definitions.

    ``configs`` is the jump-chain prefix (initial configuration included).
    Returns (Theta, U) with Theta[i, j, x] = 1 iff a particle sitting at x
    before jump i is still present after jump j, and U[i, j] = 1 iff jump i
    injected a particle that is still present after jump j; both indexed for
    1 <= i <= j <= n and zero elsewhere.  Guarded to small prefixes: this is
    a quadratic-size cross-check, not a production path.
    """
    configs = list(configs)
    n = len(configs) - 1
    if n < 0:
        raise ValueError("need at least the initial configuration")
    L = configs[0].size
    if n > 32 or L > 6:
        raise ValueError(f"guard exceeded (n={n} jumps, L={L}); keep n <= 32, L <= 6")

    thetas = [None] + [
        step_survival_matrix(configs[i - 1], configs[i]) for i in range(1, n + 1)
    ]
    theta_big = np.zeros((n + 1, n + 1, L), dtype=np.int64)
    for i in range(1, n + 1):
        acc = thetas[i]
        theta_big[i, i] = acc.sum(axis=1)
        for j in range(i + 1, n + 1):
            acc = acc @ thetas[j]
            theta_big[i, j] = acc.sum(axis=1)

    u = np.zeros((n + 1, n + 1), dtype=np.int64)
    for i in range(1, n + 1):
        injected = configs[i].particle_count > configs[i - 1].particle_count
        if not injected:
            continue
        u[i, i] = 1
        empty_before = np.array([1 - configs[i - 1][x] for x in range(L)])
        for j in range(i + 1, n + 1):
            u[i, j] = int(np.dot(empty_before, theta_big[i + 1, j]))
    return theta_big, u
