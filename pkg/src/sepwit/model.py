"""Core model: observables, datasets, rotator configurations, Hamiltonians.

All observables are translation-orbit sums over a periodic chain of N
sites.  Values are stored in the extensive (orbit-sum) convention; the
per-site convention used at I/O boundaries divides by the orbit size.

A product state of N qubits is a configuration of N unit 3-vectors (one
Bloch vector per site).  A classical Hamiltonian carries one coupling per
observable, ``H(config) = -sum_a K_a * A_a(config)``, so that the
Boltzmann weight ``exp(-H)`` is the maximum-entropy distribution
constrained by those observables.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidObservableError, ShapeMismatchError

AXES = ("x", "y", "z", "iso")
AXIS_INDEX = {"x": 0, "y": 1, "z": 2, "iso": 3}
KIND_FIELD = 0
KIND_PAIR = 1


def orbit_size(n_sites, distance):
    """Number of terms in the translation orbit of an observable.

    Fields sum over all N sites.  Pair correlators at distance r sum over
    i = 1..N when r < N/2 and over i = 1..N/2 when r = N/2 (even N), so
    each unordered site pair is counted exactly once.
    """
    if distance == 0:
        return n_sites
    if 2 * distance < n_sites:
        return n_sites
    if 2 * distance == n_sites:
        return n_sites // 2
    raise InvalidObservableError(
        f"distance {distance} exceeds half the chain length N={n_sites}"
    )


@dataclass(frozen=True)
class ObservableSpec:
    """One measured observable: a field or a two-site correlator.

    ``axis='iso'`` denotes the x+y+z sum of a correlator and is only
    valid for pairs.  ``distance`` is the lattice offset r >= 1 for pairs
    and 0 for fields.
    """

    kind: str
    axis: str
    distance: int = 0
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("field", "pair"):
            raise InvalidObservableError(f"unknown kind {self.kind!r}")
        if self.axis not in AXES:
            raise InvalidObservableError(f"unknown axis {self.axis!r}")
        if self.kind == "field":
            if self.distance != 0:
                raise InvalidObservableError("field observables have distance 0")
            if self.axis == "iso":
                raise InvalidObservableError("axis 'iso' is only valid for pairs")
        else:
            if self.distance < 1:
                raise InvalidObservableError("pair correlators need distance >= 1")
        if not self.label:
            auto = (
                f"m_{self.axis}"
                if self.kind == "field"
                else f"C_{self.axis}_r{self.distance}"
            )
            object.__setattr__(self, "label", auto)

    def validate_for(self, n_sites):
        if self.kind == "pair" and 2 * self.distance > n_sites:
            raise InvalidObservableError(
                f"{self.label}: distance {self.distance} out of range for N={n_sites}"
            )


def field_obs(axis):
    return ObservableSpec("field", axis)


def pair_obs(axis, distance):
    return ObservableSpec("pair", axis, distance)


@dataclass
class QuantumDataset:
    """Measured expectation values with uncertainties (extensive convention)."""

    n_sites: int
    observables: tuple
    values: np.ndarray
    uncertainties: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.observables = tuple(self.observables)
        self.values = np.asarray(self.values, dtype=float)
        self.uncertainties = np.asarray(self.uncertainties, dtype=float)
        self.validate()

    def validate(self):
        n_obs = len(self.observables)
        if self.values.shape != (n_obs,) or self.uncertainties.shape != (n_obs,):
            raise ShapeMismatchError(
                "values/uncertainties must align with observables "
                f"(R={n_obs}, got {self.values.shape} and {self.uncertainties.shape})"
            )
        if np.any(self.uncertainties < 0):
            raise ShapeMismatchError("uncertainties must be nonnegative")
        if not np.all(np.isfinite(self.values)):
            raise ShapeMismatchError("values must be finite")
        for obs, per_site in zip(self.observables, self.per_site_values()):
            obs.validate_for(self.n_sites)
            bound = 3.0 if obs.axis == "iso" else 1.0
            if abs(per_site) > bound + 1e-9:
                raise ShapeMismatchError(
                    f"{obs.label}: per-site value {per_site} outside [-{bound}, {bound}]"
                )

    def orbit_sizes(self):
        return np.array(
            [orbit_size(self.n_sites, o.distance) for o in self.observables],
            dtype=float,
        )

    def per_site_values(self):
        return self.values / self.orbit_sizes()

    def per_site_uncertainties(self):
        return self.uncertainties / self.orbit_sizes()

    @classmethod
    def from_per_site(cls, n_sites, observables, per_site_values,
                      per_site_uncertainties, metadata=None):
        observables = tuple(observables)
        sizes = np.array([orbit_size(n_sites, o.distance) for o in observables],
                         dtype=float)
        return cls(
            n_sites=n_sites,
            observables=observables,
            values=np.asarray(per_site_values, dtype=float) * sizes,
            uncertainties=np.asarray(per_site_uncertainties, dtype=float) * sizes,
            metadata=dict(metadata or {}),
        )


@dataclass
class RotatorConfiguration:
    """N unit 3-vectors, one Bloch vector per site."""

    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != 3:
            raise ShapeMismatchError("configuration must have shape (N, 3)")

    @property
    def n_sites(self):
        return self.vectors.shape[0]

    def validate(self, tol=1e-12):
        norms = np.linalg.norm(self.vectors, axis=1)
        if np.max(np.abs(norms - 1.0)) > tol:
            raise ShapeMismatchError("configuration vectors are not unit length")

    def renormalized(self):
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        return RotatorConfiguration(self.vectors / norms)

    def shifted(self, shift):
        return RotatorConfiguration(np.roll(self.vectors, shift, axis=0))

    def copy(self):
        return RotatorConfiguration(self.vectors.copy())

    @classmethod
    def aligned(cls, n_sites, direction=(0.0, 0.0, 1.0)):
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        return cls(np.tile(d, (n_sites, 1)))

    @classmethod
    def neel(cls, n_sites, direction=(0.0, 0.0, 1.0)):
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        signs = np.where(np.arange(n_sites) % 2 == 0, 1.0, -1.0)
        return cls(signs[:, None] * d[None, :])

    @classmethod
    def random(cls, n_sites, rng):
        v = rng.normal(size=(n_sites, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return cls(v)


@dataclass
class ClassicalHamiltonian:
    """H(config) = -sum_a K_a * A_a(config), one coupling per observable."""

    n_sites: int
    observables: tuple
    couplings: np.ndarray

    def __post_init__(self):
        self.observables = tuple(self.observables)
        self.couplings = np.asarray(self.couplings, dtype=float)
        if self.couplings.shape != (len(self.observables),):
            raise ShapeMismatchError("couplings must align with observables")
        if not np.all(np.isfinite(self.couplings)):
            raise ShapeMismatchError("couplings must be finite")
        for obs in self.observables:
            obs.validate_for(self.n_sites)

    def packed(self):
        return pack_terms(self.n_sites, self.observables, self.couplings)

    @classmethod
    def for_dataset(cls, dataset, couplings):
        return cls(dataset.n_sites, dataset.observables, couplings)


@dataclass(frozen=True)
class PackedTerms:
    """Flat integer/float arrays consumed by the compiled kernels."""

    n_sites: int
    kind: np.ndarray      # 0 field, 1 pair
    axis: np.ndarray      # 0 x, 1 y, 2 z, 3 iso
    dist: np.ndarray      # 0 for fields
    coup: np.ndarray


def pack_terms(n_sites, observables, couplings=None):
    r = len(observables)
    kind = np.empty(r, dtype=np.int64)
    axis = np.empty(r, dtype=np.int64)
    dist = np.empty(r, dtype=np.int64)
    for i, obs in enumerate(observables):
        obs.validate_for(n_sites)
        kind[i] = KIND_FIELD if obs.kind == "field" else KIND_PAIR
        axis[i] = AXIS_INDEX[obs.axis]
        dist[i] = obs.distance
    if couplings is None:
        coup = np.zeros(r, dtype=float)
    else:
        coup = np.ascontiguousarray(couplings, dtype=float)
        if coup.shape != (r,):
            raise ShapeMismatchError("couplings must align with observables")
    return PackedTerms(n_sites, kind, axis, dist, coup)


def evaluate_observable(config, obs):
    """Orbit-sum value of one observable on a product-state configuration.

    Vectorized numpy reference; the compiled kernels are checked against
    this implementation.
    """
    v = config.vectors
    n = v.shape[0]
    obs.validate_for(n)
    if obs.kind == "field":
        return float(np.sum(v[:, AXIS_INDEX[obs.axis]]))
    r = obs.distance
    terms = orbit_size(n, r)
    shifted = np.roll(v, -r, axis=0)
    if obs.axis == "iso":
        prod = np.sum(v * shifted, axis=1)
    else:
        a = AXIS_INDEX[obs.axis]
        prod = v[:, a] * shifted[:, a]
    return float(np.sum(prod[:terms]))


def evaluate_all(config, observables):
    return np.array([evaluate_observable(config, o) for o in observables])


def energy(config, hamiltonian):
    """-sum_a K_a * A_a(config)."""
    if config.n_sites != hamiltonian.n_sites:
        raise ShapeMismatchError(
            f"configuration has {config.n_sites} sites, "
            f"Hamiltonian expects {hamiltonian.n_sites}"
        )
    values = evaluate_all(config, hamiltonian.observables)
    return float(-np.dot(hamiltonian.couplings, values))


def local_energy_change(config, hamiltonian, site, proposed_vector):
    """Energy difference from replacing one spin, in O(R) time.

    Equals ``energy(config with replacement) - energy(config)``.
    """
    if config.n_sites != hamiltonian.n_sites:
        raise ShapeMismatchError("configuration/Hamiltonian size mismatch")
    if not 0 <= site < config.n_sites:
        raise ShapeMismatchError(f"site {site} out of range")
    proposed = np.asarray(proposed_vector, dtype=float)
    from . import kernels

    packed = hamiltonian.packed()
    return float(
        kernels.delta_energy(
            config.vectors, site, proposed,
            packed.kind, packed.axis, packed.dist, packed.coup,
        )
    )


def local_field(config, hamiltonian, site):
    """h = -dH/dn at one site; the energy is -n.h plus site-independent terms."""
    from . import kernels

    packed = hamiltonian.packed()
    h = np.zeros(3)
    kernels.local_field(
        config.vectors, site, packed.kind, packed.axis, packed.dist, packed.coup, h
    )
    return h
