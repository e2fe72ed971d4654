"""Markov-chain Monte Carlo estimation of thermal observable averages.

Sampling targets the Boltzmann weight ``exp(-H)`` of a classical rotator
Hamiltonian.  One Monte Carlo step is 2N iterations of a single-spin
Metropolis update followed by a single-spin overrelaxation update, both
at uniformly random sites.  Proposal amplitudes adapt toward an
acceptance rate of 0.5 +- 0.1 during thermalization and are frozen for
production, which keeps detailed balance exact where it matters.

``estimate_moments`` is the production entry point; it runs on the
compiled kernels.  The single-update functions in this module are plain
numpy reference implementations used for testing and inspection.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import PoisonedStateError, ShapeMismatchError
from .model import RotatorConfiguration, local_energy_change, local_field


@dataclass
class SamplerConfig:
    seed: int = 0
    chains: int = 2
    thermalization_sweeps: int = 200
    bins: int = 32
    target_eta: float = 0.1
    initial_cone_angle: float = 1.0
    adaptation_interval: int = 100
    min_steps: int = 8192
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.chains < 1:
            raise ShapeMismatchError("chains must be >= 1")
        if self.bins < 32:
            raise ShapeMismatchError("bins must be >= 32")
        if not 0.0 < self.target_eta <= 1.0:
            raise ShapeMismatchError("target_eta must lie in (0, 1]")
        if self.thermalization_sweeps < 1:
            raise ShapeMismatchError("thermalization_sweeps must be >= 1")
        if not 0.0 < self.initial_cone_angle <= math.pi:
            raise ShapeMismatchError("initial_cone_angle must lie in (0, pi]")
        if self.adaptation_interval < 1 or self.min_steps < 1:
            raise ShapeMismatchError("intervals must be positive")


@dataclass
class GradientContext:
    """Target values that turn moment estimation into gradient estimation.

    When present, the run is extended until the relative-precision rule
    2 * sum_a |g_a| Err(g_a) / |g|^2 < eta holds for g = means - targets,
    until g is compatible with zero against the combined data + Monte
    Carlo uncertainties (compat_sigmas, requires Monte Carlo errors at or
    below the data uncertainties), or until the step cap is hit.
    """

    targets: np.ndarray
    data_sigmas: Optional[np.ndarray] = None
    eta: float = 0.1
    compat_sigmas: Optional[float] = 3.0


@dataclass
class ChainState:
    """Warm-start handle: configuration plus adapted proposal amplitude."""

    vectors: np.ndarray
    cone_angle: float


@dataclass
class MomentEstimate:
    means: np.ndarray
    errors: np.ndarray
    mc_steps_used: int
    acceptance_rate: float
    budget_exceeded: bool = False
    chain_spread_flag: bool = False
    final_states: tuple = ()


def derive_seed(*parts):
    """Deterministic 32-bit seed from integer parts (FNV-1a mix)."""
    h = 2166136261
    for p in parts:
        p = int(p)
        for chunk in (p & 0xFFFFFFFF, (p >> 32) & 0xFFFFFFFF):
            h ^= chunk
            h = (h * 16777619) % (1 << 32)
    return h


# ---------------------------------------------------------------------------
# Reference single-update operations (plain numpy, rng passed explicitly)
# ---------------------------------------------------------------------------

@dataclass
class MCState:
    """Adaptation bookkeeping for the reference mc_step."""

    cone_angle: float = 1.0
    adaptation_interval: int = 100
    adapting: bool = True
    proposals: int = 0
    accepts: int = 0
    window_proposals: int = 0
    window_accepts: int = 0

    def freeze(self):
        self.adapting = False

    @property
    def acceptance_rate(self):
        return self.accepts / self.proposals if self.proposals else 0.0

    def record(self, accepted):
        self.proposals += 1
        self.accepts += int(accepted)
        if not self.adapting:
            return
        self.window_proposals += 1
        self.window_accepts += int(accepted)
        if self.window_proposals >= self.adaptation_interval:
            rate = self.window_accepts / self.window_proposals
            if rate > 0.6:
                self.cone_angle *= 1.1
            elif rate < 0.4:
                self.cone_angle /= 1.1
            self.cone_angle = min(math.pi, max(1e-3, self.cone_angle))
            self.window_proposals = 0
            self.window_accepts = 0


def _propose_in_cone(rng, v, cone_angle):
    ref = np.zeros(3)
    ref[np.argmin(np.abs(v))] = 1.0
    e1 = np.cross(v, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(v, e1)
    u = 1.0 - rng.random() * (1.0 - math.cos(cone_angle))
    s = math.sqrt(max(0.0, 1.0 - u * u))
    phi = 2.0 * math.pi * rng.random()
    new = u * v + s * (math.cos(phi) * e1 + math.sin(phi) * e2)
    return new / np.linalg.norm(new)


def metropolis_update(config, hamiltonian, site, rng, cone_angle):
    """Propose a rotation within a cone and accept with min(1, e^{-dH}).

    Mutates the configuration only on accept; returns the accept flag.
    """
    if not 0.0 < cone_angle <= math.pi:
        raise ShapeMismatchError("cone_angle must lie in (0, pi]")
    proposal = _propose_in_cone(rng, config.vectors[site], cone_angle)
    d_e = local_energy_change(config, hamiltonian, site, proposal)
    if d_e <= 0.0 or rng.random() < math.exp(-d_e):
        config.vectors[site] = proposal
        return True
    return False


def overrelaxation_update(config, hamiltonian, site, rng=None):
    """Reflect one spin about its local field (energy-preserving).

    A vanishing local field (< 1e-12) leaves the energy flat, in which
    case the spin is replaced by a uniform random direction.
    """
    h = local_field(config, hamiltonian, site)
    norm = np.linalg.norm(h)
    if norm < 1e-12:
        if rng is None:
            rng = np.random.default_rng()
        v = rng.normal(size=3)
        config.vectors[site] = v / np.linalg.norm(v)
        return
    hhat = h / norm
    v = config.vectors[site]
    new = 2.0 * np.dot(v, hhat) * hhat - v
    config.vectors[site] = new / np.linalg.norm(new)


def mc_step(config, hamiltonian, rng, state):
    """One Monte Carlo step: 2N (Metropolis + overrelaxation) updates."""
    n = config.n_sites
    for _ in range(2 * n):
        site = int(rng.integers(0, n))
        accepted = metropolis_update(config, hamiltonian, site, rng,
                                     state.cone_angle)
        state.record(accepted)
        site = int(rng.integers(0, n))
        overrelaxation_update(config, hamiltonian, site, rng=rng)


# ---------------------------------------------------------------------------
# Production estimator (kernel-backed)
# ---------------------------------------------------------------------------

_FIRST_BIN_LEN = 8


class _Chain:
    def __init__(self, vectors, cone_angle, n_obs):
        self.vectors = vectors
        self.cone_angle = cone_angle
        self.bin_means = np.zeros((0, n_obs))
        self.lin_sums = np.zeros(n_obs)
        self.sq_sums = np.zeros(n_obs)
        self.steps = 0
        self.accepts = 0
        self.proposals = 0

    def stats(self):
        m = self.bin_means.shape[0]
        mean = self.bin_means.mean(axis=0)
        err = np.sqrt(
            np.sum((self.bin_means - mean) ** 2, axis=0) / (m * (m - 1))
        )
        return mean, err

    def naive_variance(self):
        mean = self.lin_sums / self.steps
        return np.maximum(0.0, self.sq_sums / self.steps - mean**2)


def _merge_chains(chains):
    means = np.array([c.stats()[0] for c in chains])
    errs = np.array([c.stats()[1] for c in chains])
    if len(chains) == 1:
        return means[0], errs[0], False
    max_err = errs.max()
    if max_err == 0.0:
        merged = means.mean(axis=0)
        return merged, np.zeros_like(merged), False
    eps = 1e-12 * max_err
    w = 1.0 / (errs**2 + eps**2)
    merged = np.sum(w * means, axis=0) / np.sum(w, axis=0)
    merged_err = np.sqrt(1.0 / np.sum(w, axis=0))
    spread = means.std(axis=0, ddof=1)
    intra = errs.mean(axis=0)
    flag = bool(np.any(spread > 3.0 * np.maximum(intra, 1e-300)))
    return merged, merged_err, flag


def estimate_moments(hamiltonian, dataset, sampler_config,
                     gradient_context=None, initial_states=None):
    """Thermal averages of every dataset observable with error bars.

    Runs ``chains`` independent chains, discards thermalization,
    accumulates equal-length bins (rebinned by doubling so the count
    stays within [bins, 2*bins)), and merges chains by inverse-variance
    weighting.  Errors are jackknife estimates over the bins; checks are
    only trusted once the bin length exceeds ten estimated
    autocorrelation times.  See GradientContext for the stopping rules.
    """
    cfg = sampler_config
    packed = hamiltonian.packed()
    n_obs = len(hamiltonian.observables)
    if dataset is not None and tuple(dataset.observables) != tuple(
            hamiltonian.observables):
        raise ShapeMismatchError("dataset and Hamiltonian observables differ")

    if initial_states is not None and len(initial_states) != cfg.chains:
        raise ShapeMismatchError("initial_states must match the chain count")
    chains = []
    for c in range(cfg.chains):
        kernels.seed_stream(derive_seed(cfg.seed, c, 0))
        if initial_states is not None:
            state = initial_states[c]
            vec = np.array(state.vectors, dtype=float, copy=True)
            cone = float(state.cone_angle)
        else:
            vec = kernels.random_configuration(packed.n_sites)
            cone = cfg.initial_cone_angle
        cone, _ = kernels.run_thermalization(
            vec, packed.kind, packed.axis, packed.dist, packed.coup,
            cfg.thermalization_sweeps, cone, cfg.adaptation_interval,
        )
        chains.append(_Chain(vec, cone, n_obs))

    bin_len = _FIRST_BIN_LEN
    segment = 1
    budget_exceeded = False
    while True:
        for c, chain in enumerate(chains):
            kernels.seed_stream(derive_seed(cfg.seed, c, segment))
            bin_sums = np.zeros((cfg.bins, n_obs))
            acc, prop = kernels.run_production(
                chain.vectors, packed.kind, packed.axis, packed.dist,
                packed.coup, chain.cone_angle, cfg.bins, bin_len,
                bin_sums, chain.lin_sums, chain.sq_sums,
            )
            chain.bin_means = np.vstack([chain.bin_means, bin_sums / bin_len])
            chain.steps += cfg.bins * bin_len
            chain.accepts += acc
            chain.proposals += prop
            if chain.bin_means.shape[0] >= 2 * cfg.bins:
                folded = chain.bin_means
                chain.bin_means = 0.5 * (folded[0::2] + folded[1::2])
        bin_len = chains[0].steps // chains[0].bin_means.shape[0]
        segment += 1

        total_steps = sum(ch.steps for ch in chains)
        means, errors, spread_flag = _merge_chains(chains)
        if not np.all(np.isfinite(means)):
            raise PoisonedStateError("non-finite observable average")

        # bins must outgrow the autocorrelation time before stopping rules apply
        tau_ok = True
        for chain in chains:
            var = chain.naive_variance()
            _, err = chain.stats()
            with np.errstate(divide="ignore", invalid="ignore"):
                tau = np.where(var > 0.0,
                               err**2 * chain.steps / (2.0 * var), 0.5)
            tau = np.nan_to_num(tau, nan=0.5, posinf=0.5)
            if bin_len < 10.0 * max(0.5, tau.max()):
                tau_ok = False

        done = False
        if total_steps >= cfg.max_steps:
            done = True
            budget_exceeded = gradient_context is not None
        elif total_steps >= cfg.min_steps and tau_ok:
            if gradient_context is None:
                done = True
            else:
                g = means - gradient_context.targets
                norm_sq = float(np.dot(g, g))
                if norm_sq > 0.0:
                    precision = 2.0 * float(np.sum(np.abs(g) * errors)) / norm_sq
                    if precision < gradient_context.eta:
                        done = True
                if (not done and gradient_context.compat_sigmas is not None
                        and gradient_context.data_sigmas is not None):
                    sig = gradient_context.data_sigmas
                    combined = np.sqrt(sig**2 + errors**2)
                    if (np.all(errors <= sig)
                            and np.all(np.abs(g) <=
                                       gradient_context.compat_sigmas * combined)):
                        done = True
        if done:
            break

    total_prop = sum(ch.proposals for ch in chains)
    total_acc = sum(ch.accepts for ch in chains)
    estimate = MomentEstimate(
        means=means,
        errors=errors,
        mc_steps_used=total_steps,
        acceptance_rate=total_acc / total_prop if total_prop else 0.0,
        budget_exceeded=budget_exceeded,
        chain_spread_flag=spread_flag,
        final_states=tuple(
            ChainState(ch.vectors.copy(), ch.cone_angle) for ch in chains
        ),
    )
    return estimate
