"""Lattices, occupancy configurations, events, and the rate-model contract.

A configuration is a bit-packed occupancy vector over a finite lattice.
Dynamics are defined by three families of rates: single-particle injection
on empty sites, single-particle hops onto empty sites, and simultaneous
extraction of a filled site subset.  Models declare a finite list of
candidate extraction subsets.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class EventPreconditionError(ValueError):
    """An event was applied to a configuration that does not enable it."""


@dataclass(frozen=True)
class Lattice:
    """A finite set of sites 0..size-1.

    The topology tag is consumed only by the built-in models (ring for the
    Ising chain, path for the exclusion process); user-defined rate models
    are free to ignore it.
    """

    size: int
    topology: str = "path"

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"lattice size must be >= 1, got {self.size}")
        if self.topology not in ("ring", "path"):
            raise ValueError(f"unknown topology {self.topology!r}")

    @property
    def sites(self) -> range:
        return range(self.size)


@dataclass(frozen=True)
class Configuration:
    """Bit-packed occupancy vector: bit x of ``mask`` is the occupancy of site x."""

    mask: int
    size: int

    def __post_init__(self):
        if not 0 <= self.mask < (1 << self.size):
            raise ValueError(f"mask {self.mask:#x} out of range for {self.size} sites")

    @classmethod
    def from_bits(cls, bits) -> "Configuration":
        bits = list(bits)
        mask = 0
        for x, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError(f"occupancy must be 0 or 1, got {b!r} at site {x}")
            mask |= b << x
        return cls(mask, len(bits))

    @classmethod
    def empty(cls, size: int) -> "Configuration":
        return cls(0, size)

    def __len__(self):
        return self.size

    def __getitem__(self, x: int) -> int:
        if not 0 <= x < self.size:
            raise IndexError(x)
        return (self.mask >> x) & 1

    @property
    def bits(self) -> tuple:
        return tuple((self.mask >> x) & 1 for x in range(self.size))

    @property
    def particle_count(self) -> int:
        return self.mask.bit_count()

    def flip(self, sites) -> "Configuration":
        """Return the configuration with occupancy inverted on the given sites."""
        m = 0
        for x in sites:
            m |= 1 << x
        return Configuration(self.mask ^ m, self.size)

    def __str__(self):
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class Injection:
    """A particle appears at ``site`` (requires the site empty)."""

    site: int

    @property
    def flip_mask(self) -> int:
        return 1 << self.site


@dataclass(frozen=True)
class Diffusion:
    """The particle at ``source`` hops to the empty ``target`` site."""

    source: int
    target: int

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError("diffusion requires distinct source and target")

    @property
    def flip_mask(self) -> int:
        return (1 << self.source) | (1 << self.target)


@dataclass(frozen=True)
class Extraction:
    """All particles in the nonempty site set ``sites`` leave simultaneously."""

    sites: frozenset

    def __post_init__(self):
        object.__setattr__(self, "sites", frozenset(self.sites))
        if not self.sites:
            raise ValueError("extraction subset must be nonempty")

    @property
    def flip_mask(self) -> int:
        m = 0
        for x in self.sites:
            m |= 1 << x
        return m


Event = Injection | Diffusion | Extraction


class RateModel(abc.ABC):
    """Contract for the three rate families defining a lattice-gas generator.

    Implementations must satisfy the occupancy constraints:

    * ``injection_rate(eta, x) == 0`` whenever ``eta[x] == 1``,
    * ``diffusion_rate(eta, x, y) == 0`` whenever ``eta[x] == 0`` or ``eta[y] == 1``,
    * ``extraction_rate(eta, v) == 0`` whenever some site of ``v`` is empty,

    and all rates must be nonnegative.  ``validate_model`` audits these
    constraints together with irreducibility on small lattices.
    """

    lattice: Lattice

    @abc.abstractmethod
    def injection_rate(self, eta: Configuration, x: int) -> float:
        ...

    @abc.abstractmethod
    def diffusion_rate(self, eta: Configuration, x: int, y: int) -> float:
        ...

    @abc.abstractmethod
    def extraction_candidates(self):
        """Finite list of candidate extraction subsets (frozensets of sites)."""
        ...

    @abc.abstractmethod
    def extraction_rate(self, eta: Configuration, v: frozenset) -> float:
        ...

    def diffusion_pairs(self):
        """Ordered site pairs that may ever carry a positive diffusion rate.

        The default is every ordered pair; models with local moves override
        this to keep event enumeration linear in the number of moves.  The
        returned list must be a superset of the pairs with positive rate in
        any configuration.
        """
        n = self.lattice.size
        return [(x, y) for x in range(n) for y in range(n) if x != y]


def total_rate(model: RateModel, eta: Configuration) -> float:
    """Total exit rate q(eta): the sum of all injection, diffusion and extraction rates."""
    q = 0.0
    for x in model.lattice.sites:
        q += model.injection_rate(eta, x)
    for x, y in model.diffusion_pairs():
        q += model.diffusion_rate(eta, x, y)
    for v in model.extraction_candidates():
        q += model.extraction_rate(eta, v)
    return q


def enabled_events(model: RateModel, eta: Configuration):
    """All events with strictly positive rate from ``eta``, as (event, rate) pairs.

    The listed rates sum to ``total_rate(model, eta)`` up to float rounding.
    """
    out = []
    for x in model.lattice.sites:
        r = model.injection_rate(eta, x)
        if r > 0.0:
            out.append((Injection(x), r))
    for x, y in model.diffusion_pairs():
        r = model.diffusion_rate(eta, x, y)
        if r > 0.0:
            out.append((Diffusion(x, y), r))
    for v in model.extraction_candidates():
        r = model.extraction_rate(eta, v)
        if r > 0.0:
            out.append((Extraction(v), r))
    return out


def apply_event(eta: Configuration, event: Event) -> Configuration:
    """Apply one jump to a configuration, checking its occupancy precondition."""
    if isinstance(event, Injection):
        if eta[event.site]:
            raise EventPreconditionError(f"injection at occupied site {event.site}")
    elif isinstance(event, Diffusion):
        if not eta[event.source]:
            raise EventPreconditionError(f"diffusion from empty site {event.source}")
        if eta[event.target]:
            raise EventPreconditionError(f"diffusion onto occupied site {event.target}")
    elif isinstance(event, Extraction):
        missing = sorted(x for x in event.sites if not eta[x])
        if missing:
            raise EventPreconditionError(f"extraction from empty site(s) {missing}")
    else:
        raise TypeError(f"not an event: {event!r}")
    return Configuration(eta.mask ^ event.flip_mask, eta.size)


def all_configurations(size: int):
    """Iterate the full state space of a lattice of the given size."""
    for mask in range(1 << size):
        yield Configuration(mask, size)


@dataclass
class ValidationReport:
    """Findings of a model audit: rate-sign violations, absorbing states, irreducibility."""

    rate_violations: list = field(default_factory=list)
    absorbing_states: list = field(default_factory=list)
    irreducible: bool | None = None
    n_states_checked: int = 0

    @property
    def ok(self) -> bool:
        return (
            not self.rate_violations
            and not self.absorbing_states
            and self.irreducible is not False
        )

    def summary(self) -> str:
        lines = [
            f"states checked: {self.n_states_checked}",
            f"rate violations: {len(self.rate_violations)}",
            f"absorbing states: {len(self.absorbing_states)}",
            f"irreducible: {self.irreducible}",
        ]
        lines += [f"  {v}" for v in self.rate_violations[:20]]
        lines += [f"  absorbing: {eta}" for eta in self.absorbing_states[:20]]
        return "\n".join(lines)


def _check_rates(model: RateModel, eta: Configuration, report: ValidationReport):
    for x in model.lattice.sites:
        r = model.injection_rate(eta, x)
        if r < 0.0:
            report.rate_violations.append(f"i_{x}({eta}) = {r} < 0")
        elif r > 0.0 and eta[x]:
            report.rate_violations.append(f"i_{x}({eta}) = {r} > 0 on occupied site")
    for x, y in model.diffusion_pairs():
        r = model.diffusion_rate(eta, x, y)
        if r < 0.0:
            report.rate_violations.append(f"d_{x},{y}({eta}) = {r} < 0")
        elif r > 0.0 and (not eta[x] or eta[y]):
            report.rate_violations.append(
                f"d_{x},{y}({eta}) = {r} > 0 without occupied source and empty target"
            )
    for v in model.extraction_candidates():
        r = model.extraction_rate(eta, v)
        vs = sorted(v)
        if not v:
            report.rate_violations.append("empty extraction candidate declared")
        if r < 0.0:
            report.rate_violations.append(f"e_{vs}({eta}) = {r} < 0")
        elif r > 0.0 and any(not eta[x] for x in v):
            report.rate_violations.append(f"e_{vs}({eta}) = {r} > 0 on unfilled subset")


def validate_model(
    model: RateModel,
    state_cap: int = 16,
    n_samples: int = 512,
    seed: int = 0,
) -> ValidationReport:
    """Audit a rate model against its contract.

    For lattices of at most ``state_cap`` sites the whole state space is
    enumerated, absorbing states are listed, and irreducibility is decided
    by strong connectivity of the jump-chain digraph.  Larger lattices get
    rate-sign spot checks on ``n_samples`` random configurations only
    (``irreducible`` is left undecided).
    """
    report = ValidationReport()
    L = model.lattice.size

    if L > state_cap:
        rng = np.random.default_rng(seed)
        seen = set()
        for _ in range(n_samples):
            mask = int(rng.integers(0, 1 << L))
            if mask in seen:
                continue
            seen.add(mask)
            _check_rates(model, Configuration(mask, L), report)
        report.n_states_checked = len(seen)
        report.irreducible = None
        return report

    n_states = 1 << L
    rows, cols = [], []
    for eta in all_configurations(L):
        _check_rates(model, eta, report)
        events = enabled_events(model, eta)
        if not events:
            report.absorbing_states.append(eta)
            continue
        for event, _rate in events:
            rows.append(eta.mask)
            cols.append(eta.mask ^ event.flip_mask)
    report.n_states_checked = n_states

    if report.absorbing_states:
        report.irreducible = False
        return report
    graph = csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n_states, n_states)
    )
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    report.irreducible = bool(n_comp == 1)
    return report
