"""Exact finite-state computations for small lattices.

The full state space of a lattice with L sites has 2^L configurations, so
for desk-scale L the generator can be materialized as a dense matrix and
the stationary distribution obtained by a direct linear solve.  This is
the reference against which simulation estimates and closed-form results
are checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    Configuration,
    RateModel,
    all_configurations,
    enabled_events,
    total_rate,
)


class StateSpaceCapError(ValueError):
    """The lattice is too large for dense exact computation."""


class ReducibleModelError(RuntimeError):
    """The stationary solve failed; the model is likely not irreducible."""


class AbsorbingStateError(RuntimeError):
    """A state with zero total exit rate was found."""


def _check_cap(model: RateModel, site_cap: int):
    L = model.lattice.size
    if L > site_cap:
        raise StateSpaceCapError(
            f"lattice has {L} sites; exact computation capped at {site_cap} "
            f"(override via the cap argument)"
        )
    return L


def build_generator(model: RateModel, site_cap: int = 16) -> np.ndarray:
    """Dense generator matrix over the full state space, indexed by occupancy mask.

    Entry (m, m') is the total rate of events taking mask m to m'; the
    diagonal holds -q(m), so rows sum to zero.
    """
    L = _check_cap(model, site_cap)
    n = 1 << L
    Q = np.zeros((n, n))
    for eta in all_configurations(L):
        for event, rate in enabled_events(model, eta):
            Q[eta.mask, eta.mask ^ event.flip_mask] += rate
        Q[eta.mask, eta.mask] -= Q[eta.mask].sum()
    return Q


def jump_chain_matrix(model: RateModel, site_cap: int = 16) -> np.ndarray:
    """Transition matrix of the embedded jump chain: entries rate / q(state)."""
    Q = build_generator(model, site_cap)
    q = -np.diag(Q)
    if np.any(q <= 0.0):
        dead = int(np.argmin(q))
        raise AbsorbingStateError(
            f"state {Configuration(dead, model.lattice.size)} has zero exit rate"
        )
    P = Q / q[:, None]
    np.fill_diagonal(P, 0.0)
    return P


def stationary_distribution(Q: np.ndarray) -> np.ndarray:
    """Solve pi @ Q = 0 with sum(pi) = 1 by a dense linear solve.

    One equation of the transposed system is replaced by the normalization
    row.  Raises ReducibleModelError when the solve is singular or yields
    nonpositive probabilities, which for a rate matrix built from a valid
    model signals a reducible jump chain.
    """
    n = Q.shape[0]
    A = Q.T.copy()
    A[0, :] = 1.0
    b = np.zeros(n)
    b[0] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as err:
        raise ReducibleModelError(
            "singular stationary system; run validate_model to check irreducibility"
        ) from err
    scale = max(1.0, float(np.abs(Q).max()))
    residual = float(np.abs(pi @ Q).max())
    if residual > 1e-8 * scale or pi.min() <= 0.0:
        raise ReducibleModelError(
            f"stationary solve unreliable (residual {residual:.3g}, "
            f"min pi {pi.min():.3g}); run validate_model to check irreducibility"
        )
    return pi


@dataclass
class ExactSolution:
    """Stationary distribution with the derived observables of the residence law."""

    pi: np.ndarray
    rho: float
    phi: float
    tau: float
    min_q: float
    residual: float


def exact_law(model: RateModel, site_cap: int = 12) -> ExactSolution:
    """Exact stationary mean particle count rho, influx phi, and their ratio tau.

    rho is the pi-average of the particle count, phi the pi-average of the
    total injection rate; tau = rho / phi is the exact mean residence time.
    """
    L = _check_cap(model, site_cap)
    Q = build_generator(model, site_cap)
    pi = stationary_distribution(Q)
    counts = np.array([m.bit_count() for m in range(1 << L)], dtype=float)
    rho = float(pi @ counts)
    inj = np.zeros(1 << L)
    for eta in all_configurations(L):
        inj[eta.mask] = sum(model.injection_rate(eta, x) for x in model.lattice.sites)
    phi = float(pi @ inj)
    if phi <= 0.0:
        raise ValueError(
            "model admits no injections under pi (phi = 0); residence law undefined"
        )
    q = -np.diag(Q)
    residual = float(np.abs(pi @ Q).max())
    return ExactSolution(
        pi=pi,
        rho=rho,
        phi=phi,
        tau=rho / phi,
        min_q=float(q.min()),
        residual=residual,
    )


def occupation_marginals(model: RateModel, pi: np.ndarray) -> np.ndarray:
    """Per-site stationary occupation probabilities sum_eta eta(x) pi(eta)."""
    L = model.lattice.size
    out = np.zeros(L)
    for mask in range(1 << L):
        p = pi[mask]
        for x in range(L):
            if (mask >> x) & 1:
                out[x] += p
    return out


@dataclass
class ReversibilityReport:
    """Detailed-balance audit of a model against an exact stationary distribution.

    The generator is reversible iff every singleton extraction rate matches
    the injection rate of the reverse flip weighted by the stationary ratio,
    multi-site extraction rates vanish, and every diffusion rate is balanced
    by the reverse hop from the swapped configuration.
    """

    reversible: bool
    extraction_violations: list = field(default_factory=list)
    diffusion_violations: list = field(default_factory=list)
    rtol: float = 1e-9
    atol: float = 1e-12


def detailed_balance_check(
    model: RateModel,
    pi: np.ndarray | None = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    site_cap: int = 12,
) -> ReversibilityReport:
    """Classify a model as reversible or not, listing every balance violation."""
    L = _check_cap(model, site_cap)
    if pi is None:
        pi = stationary_distribution(build_generator(model, site_cap))

    def differs(a, b):
        return abs(a - b) > rtol * max(abs(a), abs(b)) + atol

    ext_viol = []
    for v in model.extraction_candidates():
        v = frozenset(v)
        vmask = 0
        for x in v:
            vmask |= 1 << x
        for eta in all_configurations(L):
            if eta.mask & vmask != vmask:
                continue
            rate = model.extraction_rate(eta, v)
            if len(v) == 1:
                (x,) = v
                flipped = Configuration(eta.mask ^ vmask, L)
                target = (
                    model.injection_rate(flipped, x) * pi[flipped.mask] / pi[eta.mask]
                )
                if differs(rate, target):
                    ext_viol.append((v, eta))
            elif rate > atol:
                ext_viol.append((v, eta))

    pairs = set(model.diffusion_pairs())
    pairs |= {(y, x) for x, y in pairs}
    diff_viol = []
    for eta in all_configurations(L):
        for x, y in sorted(pairs):
            lhs = model.diffusion_rate(eta, x, y) * pi[eta.mask]
            swapped = Configuration(eta.mask ^ (1 << x) ^ (1 << y), L)
            rhs = model.diffusion_rate(swapped, y, x) * pi[swapped.mask]
            if differs(lhs, rhs):
                diff_viol.append((x, y, eta))

    return ReversibilityReport(
        reversible=not ext_viol and not diff_viol,
        extraction_violations=ext_viol,
        diffusion_violations=diff_viol,
        rtol=rtol,
        atol=atol,
    )


def w_spectral_radius(model: RateModel, dim_cap: int = 2048) -> float:
    """Spectral radius of the particle-survival transfer operator.

    The operator acts on functions of (site, state) pairs and propagates the
    indicator that a tagged particle survives one jump of the embedded chain,
    either staying at its site or hopping to an empty one.  Its spectral
    radius lies strictly below 1 for irreducible dynamics, which is what
    drives every tagged particle out of the system at a geometric rate.
    """
    L = model.lattice.size
    n = 1 << L
    dim = L * n
    if dim > dim_cap:
        raise StateSpaceCapError(
            f"operator dimension {dim} exceeds cap {dim_cap} (override via dim_cap)"
        )
    P = jump_chain_matrix(model, site_cap=L)
    W = np.zeros((dim, dim))

    def idx(x, mask):
        return x * n + mask

    for mask in range(n):
        for nxt in np.nonzero(P[mask])[0]:
            p = P[mask, nxt]
            for x in range(L):
                if not (mask >> x) & 1:
                    continue
                if (nxt >> x) & 1:
                    W[idx(x, mask), idx(x, nxt)] += p
                    continue
                # particle left x: it survives only by hopping to a site
                # empty before and filled after the jump
                for y in range(L):
                    if y != x and not (mask >> y) & 1 and (nxt >> y) & 1:
                        W[idx(x, mask), idx(y, nxt)] += p
    eigs = np.linalg.eigvals(W)
    return float(np.abs(eigs).max())
