"""Built-in rate models and their closed-form observables.

Two reference systems are provided: a ring lattice gas whose injection and
extraction rates are in detailed balance with an Ising-type Gibbs state
(single-site Glauber moves plus nearest-neighbor Metropolis exchanges), and
the totally asymmetric exclusion process on an open path.  Both admit exact
expressions for the mean residence time; those closed forms live here next
to the models so they can be checked against the dense oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .lattice import Configuration, Lattice, RateModel


# ---------------------------------------------------------------------------
# single site: the smallest nontrivial gas (two states, one particle)
# ---------------------------------------------------------------------------


class SingleSiteModel(RateModel):
    """One site with injection rate ``alpha`` and extraction rate ``beta``."""

    def __init__(self, alpha: float = 1.0, beta: float = 1.0):
        if alpha <= 0 or beta <= 0:
            raise ValueError("alpha and beta must be positive")
        self.lattice = Lattice(1, "path")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self._candidates = [frozenset({0})]

    def injection_rate(self, eta, x):
        return 0.0 if eta[x] else self.alpha

    def diffusion_rate(self, eta, x, y):
        return 0.0

    def diffusion_pairs(self):
        return []

    def extraction_candidates(self):
        return self._candidates

    def extraction_rate(self, eta, v):
        return self.beta if eta[0] else 0.0


# ---------------------------------------------------------------------------
# Ising ring with Glauber + Kawasaki dynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsingParams:
    """Ring size, interaction V, chemical potential mu, and injection parameters.

    The four injection parameters are indexed by the occupancies of the two
    neighbors of the target site; the matching extraction parameters
    beta_ab = alpha_ab * exp(V*(a+b) - mu) are derived, which is exactly the
    choice that balances single-site moves against the Gibbs weights.
    """

    L: int
    V: float = 0.0
    mu: float = 0.0
    alpha_00: float = 1.0
    alpha_10: float = 1.0
    alpha_01: float = 1.0
    alpha_11: float = 1.0
    kawasaki_scale: float = 1.0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("Ising ring needs L >= 2")
        for name in ("alpha_00", "alpha_10", "alpha_01", "alpha_11"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.kawasaki_scale <= 0:
            raise ValueError("kawasaki_scale must be strictly positive")

    @property
    def alphas(self) -> dict:
        return {
            (0, 0): self.alpha_00,
            (1, 0): self.alpha_10,
            (0, 1): self.alpha_01,
            (1, 1): self.alpha_11,
        }

    @property
    def betas(self) -> dict:
        return {
            (a, b): alpha * math.exp(self.V * (a + b) - self.mu)
            for (a, b), alpha in self.alphas.items()
        }


def ising_hamiltonian(params: IsingParams, eta: Configuration) -> float:
    """Energy V * sum_x eta(x) eta(x+1) - mu * sum_x eta(x) on the ring."""
    L = params.L
    h = 0.0
    for x in range(L):
        h += params.V * eta[x] * eta[(x + 1) % L]
    return h - params.mu * eta.particle_count


class IsingRingModel(RateModel):
    """Lattice gas on a ring in detailed balance with the Ising Gibbs state.

    Injection rates depend on the neighbor occupancies; extraction rates are
    the derived betas of the parameter set; exchanges are nearest-neighbor
    Metropolis moves, so diffusion satisfies detailed balance as well.
    """

    def __init__(self, params: IsingParams):
        self.params = params
        self.lattice = Lattice(params.L, "ring")
        self._alphas = params.alphas
        self._betas = params.betas
        self._candidates = [frozenset({x}) for x in range(params.L)]
        L = params.L
        pairs = {(x, (x + 1) % L) for x in range(L)}
        pairs |= {(x, (x - 1) % L) for x in range(L)}
        self._pairs = sorted(p for p in pairs if p[0] != p[1])
        self._pair_set = set(self._pairs)

    def _neighbors(self, x):
        L = self.params.L
        return (x - 1) % L, (x + 1) % L

    def injection_rate(self, eta, x):
        if eta[x]:
            return 0.0
        left, right = self._neighbors(x)
        return self._alphas[(eta[left], eta[right])]

    def extraction_candidates(self):
        return self._candidates

    def extraction_rate(self, eta, v):
        (x,) = v
        if not eta[x]:
            return 0.0
        left, right = self._neighbors(x)
        return self._betas[(eta[left], eta[right])]

    def diffusion_pairs(self):
        return self._pairs

    def diffusion_rate(self, eta, x, y):
        if (x, y) not in self._pair_set:
            return 0.0
        if not eta[x] or eta[y]:
            return 0.0
        dh = ising_hamiltonian(self.params, eta.flip((x, y))) - ising_hamiltonian(
            self.params, eta
        )
        return self.params.kawasaki_scale * min(1.0, math.exp(-dh))


def ising_model(params: IsingParams) -> IsingRingModel:
    return IsingRingModel(params)


@dataclass
class TransferMatrixSolution:
    """Spectral data of the 2x2 transfer matrix and the resulting residence time."""

    t_plus: float
    t_minus: float
    r_plus: float
    r_minus: float
    a_plus: float
    a_minus: float
    tau: float
    p_plus: np.ndarray
    p_minus: np.ndarray


def ising_tau_exact(params: IsingParams) -> TransferMatrixSolution:
    """Closed-form mean residence time of the Ising ring gas.

    The Gibbs weight factorizes over bonds through the symmetric transfer
    matrix [[1, e^(mu/2)], [e^(mu/2), e^(mu-V)]]; the stationary occupation
    and injection averages reduce to powers of its eigenvalues t- < t+, and
    the ratio is evaluated after factoring out t+^L so arbitrary ring sizes
    stay in float range.
    """
    V, mu, L = params.V, params.mu, params.L
    em = math.exp(mu - V)
    root = math.sqrt((1.0 - em) ** 2 + 4.0 * math.exp(mu))
    t_plus = (1.0 + em + root) / 2.0
    t_minus = (1.0 + em - root) / 2.0

    T = np.array([[1.0, math.exp(mu / 2)], [math.exp(mu / 2), em]])
    eye = np.eye(2)
    p_plus = (T - t_minus * eye) / (t_plus - t_minus)
    p_minus = (T - t_plus * eye) / (t_minus - t_plus)

    def r_of(t):
        return (t - 1.0) ** 2 / ((t - 1.0) ** 2 + math.exp(mu))

    def a_of(t):
        num = (
            params.alpha_00
            + (params.alpha_10 + params.alpha_01) * (t - 1.0)
            + params.alpha_11 * (t - 1.0) ** 2
        )
        return num / (1.0 + math.exp(-mu) * (t - 1.0) ** 2)

    r_plus, r_minus = r_of(t_plus), r_of(t_minus)
    a_plus, a_minus = a_of(t_plus), a_of(t_minus)

    # tau = (r+ t+^L + r- t-^L) / (a+ t+^(L-2) + a- t-^(L-2)), divided
    # through by t+^(L-2); |t-/t+| < 1 so the power underflows harmlessly
    s = t_minus / t_plus
    sl = s ** (L - 2)
    tau = (r_plus * t_plus**2 + r_minus * t_minus**2 * sl) / (a_plus + a_minus * sl)

    return TransferMatrixSolution(
        t_plus=t_plus,
        t_minus=t_minus,
        r_plus=r_plus,
        r_minus=r_minus,
        a_plus=a_plus,
        a_minus=a_minus,
        tau=tau,
        p_plus=p_plus,
        p_minus=p_minus,
    )


# ---------------------------------------------------------------------------
# TASEP with open boundaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TasepParams:
    """Open-boundary exclusion process: entry rate alpha, exit rate beta."""

    L: int
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("TASEP needs L >= 2")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be strictly positive")


class TasepModel(RateModel):
    """Particles enter at site 0, hop right at unit rate, leave from site L-1."""

    def __init__(self, params: TasepParams):
        self.params = params
        self.lattice = Lattice(params.L, "path")
        self._pairs = [(x, x + 1) for x in range(params.L - 1)]
        self._candidates = [frozenset({params.L - 1})]

    def injection_rate(self, eta, x):
        if x != 0 or eta[0]:
            return 0.0
        return self.params.alpha

    def diffusion_pairs(self):
        return self._pairs

    def diffusion_rate(self, eta, x, y):
        if y != x + 1 or y >= self.params.L:
            return 0.0
        return 1.0 if (eta[x] and not eta[y]) else 0.0

    def extraction_candidates(self):
        return self._candidates

    def extraction_rate(self, eta, v):
        return self.params.beta if eta[self.params.L - 1] else 0.0


def tasep_model(params: TasepParams) -> TasepModel:
    return TasepModel(params)


def tasep_B(x: int, k: int) -> int:
    """Combinatorial coefficient k (2x-k-1)! / (x! (x-k)!), exactly."""
    if x < 1 or not 1 <= k <= x:
        raise ValueError(f"need 1 <= k <= x with x >= 1, got x={x}, k={k}")
    return k * math.comb(2 * x - k - 1, x - k) // x


def _log_B(x: int, ks: np.ndarray) -> np.ndarray:
    # log of k (2x-k-1)! / (x! (x-k)!) via log-gamma
    return (
        np.log(ks)
        + gammaln(2 * x - ks)
        - gammaln(x + 1)
        - gammaln(x - ks + 1)
    )


def _log_geom_sum(d: float, ks: np.ndarray) -> np.ndarray:
    """log(sum_{l=0..k} exp(l*d)) for each k, stable for any sign of d."""
    if abs(d) < 1e-13:
        # sum = (k+1)(1 + k d/2 + O((kd)^2))
        return np.log(ks + 1.0) + ks * d / 2.0
    if d > 0:
        return (
            ks * d
            + np.log1p(-np.exp(-(ks + 1.0) * d))
            - math.log1p(-math.exp(-d))
        )
    return np.log1p(-np.exp((ks + 1.0) * d)) - math.log1p(-math.exp(d))


def _log_inner_sum(alpha: float, beta: float, ks: np.ndarray) -> np.ndarray:
    # log(sum_{l=0..k} alpha^-l beta^-(k-l))
    d = math.log(beta) - math.log(alpha)
    return -ks * math.log(beta) + _log_geom_sum(d, ks)


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + math.log(math.fsum(np.exp(values - m).tolist()))


def _tasep_log_Z(alpha: float, beta: float, x_max: int) -> np.ndarray:
    out = np.empty(x_max + 1)
    out[0] = 0.0
    for x in range(1, x_max + 1):
        ks = np.arange(1, x + 1, dtype=float)
        out[x] = _logsumexp(_log_B(x, ks) + _log_inner_sum(alpha, beta, ks))
    return out


def _tasep_Z_direct(alpha: float, beta: float, x_max: int) -> np.ndarray:
    # S_k = sum_{l=0..k} alpha^-l beta^-(k-l) satisfies S_k = S_{k-1}/beta + alpha^-k
    S = [1.0]
    for k in range(1, x_max + 1):
        S.append(S[-1] / beta + alpha ** (-k))
    out = np.empty(x_max + 1)
    out[0] = 1.0
    for x in range(1, x_max + 1):
        out[x] = math.fsum(tasep_B(x, k) * S[k] for k in range(1, x + 1))
    return out


_DIRECT_CAP = 150


def tasep_Z(params: TasepParams, x_max: int | None = None, method: str = "auto"):
    """Normalization sequence Z_0..Z_x_max of the open-boundary exclusion process.

    Small indices are evaluated by direct compensated summation (exact for
    integer-valued cases such as alpha = beta = 1, where the sequence is the
    Catalan numbers); large indices switch to log-domain accumulation since
    Z_x grows like 4^x.  Raises OverflowError when a requested value does
    not fit a float64.
    """
    if x_max is None:
        x_max = params.L
    if x_max < 0:
        raise ValueError("x_max must be >= 0")
    if method not in ("auto", "direct", "log"):
        raise ValueError(f"unknown method {method!r}")
    if method == "direct" or (method == "auto" and x_max <= _DIRECT_CAP):
        Z = _tasep_Z_direct(params.alpha, params.beta, x_max)
        if not np.all(np.isfinite(Z)):
            raise OverflowError(
                f"Z overflows float64 before x={x_max}; use the log-domain "
                f"closed forms (tasep_density, tasep_tau_exact) instead"
            )
        return Z
    logZ = _tasep_log_Z(params.alpha, params.beta, x_max)
    if logZ.max() >= 709.0:
        raise OverflowError(
            f"Z overflows float64 before x={x_max}; use the log-domain "
            f"closed forms (tasep_density, tasep_tau_exact) instead"
        )
    return np.exp(logZ)


def _log_B_first(k_max: int) -> np.ndarray:
    """log B_{k,1} for k = 0..k_max (entry 0 unused)."""
    ks = np.arange(k_max + 1, dtype=float)
    ks[0] = 1.0
    return gammaln(2 * ks - 1) - gammaln(ks + 1) - gammaln(ks)


def tasep_density(params: TasepParams, method: str = "auto") -> np.ndarray:
    """Exact stationary occupation probability of each site (left to right)."""
    L, alpha, beta = params.L, params.alpha, params.beta
    if method == "direct" or (method == "auto" and L <= _DIRECT_CAP):
        Z = _tasep_Z_direct(alpha, beta, L)
        dens = np.empty(L)
        for x in range(1, L):
            terms = [
                Z[L - k] * tasep_B(k, 1) + Z[x - 1] * tasep_B(L - x, k) / beta ** (k + 1)
                for k in range(1, L - x + 1)
            ]
            dens[x - 1] = math.fsum(terms) / Z[L]
        dens[L - 1] = Z[L - 1] / (beta * Z[L])
        return dens

    logZ = _tasep_log_Z(alpha, beta, L)
    logB1 = _log_B_first(L)
    logbeta = math.log(beta)
    dens = np.empty(L)
    for x in range(1, L):
        kr = np.arange(1, L - x + 1)
        first = logZ[L - kr] + logB1[kr]
        second = logZ[x - 1] + _log_B(L - x, kr.astype(float)) - (kr + 1.0) * logbeta
        dens[x - 1] = math.exp(_logsumexp(np.concatenate([first, second])) - logZ[L])
    dens[L - 1] = math.exp(logZ[L - 1] - logbeta - logZ[L])
    return dens


def tasep_tau_exact(params: TasepParams, method: str = "auto") -> float:
    """Exact mean residence time of the open-boundary exclusion process."""
    L, alpha, beta = params.L, params.alpha, params.beta
    if method == "direct" or (method == "auto" and L <= _DIRECT_CAP):
        Z = _tasep_Z_direct(alpha, beta, L)
        terms = []
        for x in range(1, L):
            terms.append((L - x) * Z[L - x] * tasep_B(x, 1))
            terms.extend(
                Z[x - 1] * tasep_B(L - x, k) / beta ** (k + 1)
                for k in range(1, L - x + 1)
            )
        return 1.0 / beta + math.fsum(terms) / Z[L - 1]

    logZ = _tasep_log_Z(alpha, beta, L)
    logB1 = _log_B_first(L)
    logbeta = math.log(beta)
    pieces = []
    for x in range(1, L):
        pieces.append(math.log(L - x) + logZ[L - x] + logB1[x])
        kr = np.arange(1, L - x + 1, dtype=float)
        pieces.append(
            _logsumexp(logZ[x - 1] + _log_B(L - x, kr) - (kr + 1.0) * logbeta)
        )
    return 1.0 / beta + math.exp(_logsumexp(np.array(pieces)) - logZ[L - 1])


def tasep_r_coefficient(alpha: float, beta: float) -> float:
    """Large-system slope of tau / L, by phase of the boundary rates."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be strictly positive")
    if alpha >= 0.5 and beta >= 0.5:
        return 2.0
    if alpha == beta:
        return 1.0 / (2.0 * alpha * (1.0 - alpha))
    if alpha < beta:
        return 1.0 / (1.0 - alpha)
    return 1.0 / beta


# ---------------------------------------------------------------------------
# explicit rate tables (general small models, CLI custom-table input)
# ---------------------------------------------------------------------------

_TABLE_SITE_CAP = 8


class TableModel(RateModel):
    """Rates given explicitly per configuration, for lattices of up to 8 sites.

    Entries are sparse triplets keyed by the occupancy bitmask of the state
    (bit x = site x).  Entries violating the occupancy constraints are
    rejected at construction.
    """

    def __init__(self, size, injections=(), diffusions=(), extractions=(), topology="path"):
        if size > _TABLE_SITE_CAP:
            raise ValueError(f"table models are capped at {_TABLE_SITE_CAP} sites")
        self.lattice = Lattice(size, topology)
        n = 1 << size
        self._inj = {}
        self._diff = {}
        self._ext = {}
        candidates = {}
        pairs = set()
        for mask, x, rate in injections:
            self._check_entry(n, mask, rate, f"injection at {x}")
            if not 0 <= x < size:
                raise ValueError(f"injection site {x} out of range")
            if (mask >> x) & 1:
                raise ValueError(
                    f"injection rate on occupied site {x} of state {mask:#x}"
                )
            if rate > 0.0:
                self._inj[(mask, x)] = float(rate)
        for mask, x, y, rate in diffusions:
            self._check_entry(n, mask, rate, f"diffusion {x}->{y}")
            if x == y or not (0 <= x < size and 0 <= y < size):
                raise ValueError(f"diffusion pair ({x}, {y}) invalid")
            if not (mask >> x) & 1 or (mask >> y) & 1:
                raise ValueError(
                    f"diffusion {x}->{y} needs occupied source and empty "
                    f"target in state {mask:#x}"
                )
            if rate > 0.0:
                self._diff[(mask, x, y)] = float(rate)
                pairs.add((x, y))
        for mask, sites, rate in extractions:
            v = frozenset(sites)
            self._check_entry(n, mask, rate, f"extraction of {sorted(v)}")
            if not v or any(not 0 <= x < size for x in v):
                raise ValueError(f"extraction subset {sorted(v)} invalid")
            vmask = 0
            for x in v:
                vmask |= 1 << x
            if mask & vmask != vmask:
                raise ValueError(
                    f"extraction of {sorted(v)} from unfilled state {mask:#x}"
                )
            candidates[v] = True
            if rate > 0.0:
                self._ext[(mask, v)] = float(rate)
        self._candidates = sorted(candidates, key=sorted)
        self._pairs = sorted(pairs)

    @staticmethod
    def _check_entry(n, mask, rate, what):
        if not 0 <= mask < n:
            raise ValueError(f"state {mask:#x} out of range for table ({what})")
        if rate < 0.0:
            raise ValueError(f"negative rate {rate} for {what} in state {mask:#x}")

    def injection_rate(self, eta, x):
        return self._inj.get((eta.mask, x), 0.0)

    def diffusion_pairs(self):
        return self._pairs

    def diffusion_rate(self, eta, x, y):
        return self._diff.get((eta.mask, x, y), 0.0)

    def extraction_candidates(self):
        return self._candidates

    def extraction_rate(self, eta, v):
        return self._ext.get((eta.mask, frozenset(v)), 0.0)

    def to_dict(self) -> dict:
        return {
            "size": self.lattice.size,
            "topology": self.lattice.topology,
            "injections": [[m, x, r] for (m, x), r in sorted(self._inj.items())],
            "diffusions": [
                [m, x, y, r] for (m, x, y), r in sorted(self._diff.items())
            ],
            "extractions": [
                [m, sorted(v), r]
                for (m, v), r in sorted(self._ext.items(), key=lambda kv: (kv[0][0], sorted(kv[0][1])))
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TableModel":
        try:
            return cls(
                size=d["size"],
                injections=d.get("injections", ()),
                diffusions=d.get("diffusions", ()),
                extractions=[(m, tuple(v), r) for m, v, r in d.get("extractions", ())],
                topology=d.get("topology", "path"),
            )
        except KeyError as err:
            raise ValueError(f"table model is missing key {err}") from err
