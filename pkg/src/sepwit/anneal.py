"""Separable bound via simulated annealing of the classical witness energy.

The separable bound of a witness with coefficients W is the ground-state
energy of the classical functional W_cl(config) = -sum_a W_a A_a(config)
over product states.  Each restart ramps the inverse temperature over a
geometric grid while sampling exp(-beta * W_cl) with the Metropolis +
overrelaxation kernel, records the lowest energy seen (at sweep
granularity), and the best configuration across restarts is polished by
deterministic local-field alignment to a true local minimum.

``exact_bound_small`` provides an exhaustive grid + polish oracle for
N <= 3, used to validate the annealer.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidObservableError, ShapeMismatchError
from .model import RotatorConfiguration, pack_terms
from .sampler import derive_seed


@dataclass
class AnnealSchedule:
    beta_start: float = 0.0
    beta_end: float = 1000.0
    beta_steps: int = 200
    sweeps_per_beta: int = 20
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.beta_end <= self.beta_start or self.beta_start < 0:
            raise ShapeMismatchError("need beta_end > beta_start >= 0")
        if self.beta_steps < 2 or self.sweeps_per_beta < 1 or self.restarts < 1:
            raise ShapeMismatchError("schedule counts must be positive")

    def beta_grid(self):
        """Geometric ramp; a beta_start of zero is prepended explicitly."""
        lo = self.beta_start if self.beta_start > 0 else 1e-2
        grid = np.geomspace(lo, self.beta_end, self.beta_steps)
        if self.beta_start == 0.0:
            grid = np.concatenate([[0.0], grid])
        return grid


@dataclass
class BoundResult:
    value: float
    configuration: RotatorConfiguration
    pre_polish_value: float
    restart_minima: np.ndarray
    energy_trace: np.ndarray  # (restarts, betas * sweeps_per_beta)

    def __iter__(self):
        # allows: bound, config = separable_bound(...)
        return iter((self.value, self.configuration))


def _check_coefficients(coefficients, tol=1e-3):
    coefficients = np.asarray(coefficients, dtype=float)
    norm = np.linalg.norm(coefficients)
    if norm == 0.0:
        raise ShapeMismatchError("witness coefficients are all zero")
    if abs(norm - 1.0) > tol:
        warnings.warn(
            f"witness coefficients have norm {norm:.6f}, expected 1",
            stacklevel=3,
        )
    return coefficients


def separable_bound(coefficients, n_sites, observables, schedule=None,
                    initial_cone_angle=1.0, adaptation_interval=100):
    """Minimum of -sum_a W_a A_a over product states, by annealing.

    Returns a BoundResult; its ``value`` is the polished minimum and
    ``pre_polish_value`` the raw recorded minimum of the ramps.
    """
    schedule = schedule or AnnealSchedule()
    coefficients = _check_coefficients(coefficients)
    packed = pack_terms(n_sites, observables, coefficients)
    betas = schedule.beta_grid()
    n_trace = betas.shape[0] * schedule.sweeps_per_beta

    best_e = np.inf
    best_vec = None
    minima = np.empty(schedule.restarts)
    traces = np.empty((schedule.restarts, n_trace))
    for rep in range(schedule.restarts):
        kernels.seed_stream(derive_seed(schedule.seed, rep))
        vec = kernels.random_configuration(n_sites)
        ramp_best = np.empty((n_sites, 3))
        e = kernels.run_anneal_ramp(
            vec, packed.kind, packed.axis, packed.dist, packed.coup,
            betas, schedule.sweeps_per_beta, initial_cone_angle,
            adaptation_interval, traces[rep], ramp_best,
        )
        minima[rep] = e
        if e < best_e:
            best_e = e
            best_vec = ramp_best

    polished = kernels.polish(best_vec, packed.kind, packed.axis, packed.dist,
                              packed.coup, 10_000, 1e-12)
    return BoundResult(
        value=float(polished),
        configuration=RotatorConfiguration(best_vec),
        pre_polish_value=float(best_e),
        restart_minima=minima,
        energy_trace=traces,
    )


def polish_configuration(config, observables, coefficients,
                         max_passes=10_000, tol=1e-12):
    """Deterministic local-field alignment; returns the polished energy.

    Never increases the energy and is idempotent at a fixed point.  The
    configuration is modified in place.
    """
    packed = pack_terms(config.n_sites, observables,
                        np.asarray(coefficients, dtype=float))
    return float(kernels.polish(config.vectors, packed.kind, packed.axis,
                                packed.dist, packed.coup, max_passes, tol))


def fibonacci_sphere(n_points):
    """Roughly uniform sphere covering used for the exhaustive grid."""
    i = np.arange(n_points)
    z = 1.0 - (2.0 * i + 1.0) / n_points
    golden = np.pi * (3.0 - np.sqrt(5.0))
    phi = golden * i
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def exact_bound_small(coefficients, n_sites, observables, grid_resolution=None):
    """Global separable bound for N <= 3 by dense grid search plus polish.

    Polishes from every grid combination; warns when the winning start
    moved by more than one grid cell, which signals a resolution too
    coarse to trust basin coverage.
    """
    if n_sites not in (2, 3):
        raise InvalidObservableError("exact bound is implemented for N <= 3")
    if grid_resolution is None:
        grid_resolution = 192 if n_sites == 2 else 96
    coefficients = _check_coefficients(coefficients)
    packed = pack_terms(n_sites, observables, coefficients)
    points = fibonacci_sphere(grid_resolution)
    best_e, _, moved = kernels.exact_grid_min(
        points, n_sites, packed.kind, packed.axis, packed.dist, packed.coup,
        60, 100_000, 1e-12,
    )
    # nearest-neighbor spacing of the Fibonacci covering
    cell = 2.0 * np.sqrt(4.0 / grid_resolution)
    if moved > cell:
        warnings.warn(
            f"polish moved the winning start by {moved:.3f} rad "
            f"(> grid cell {cell:.3f}); increase grid_resolution",
            stacklevel=2,
        )
    return float(best_e)
