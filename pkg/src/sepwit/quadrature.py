"""Deterministic quadrature references for two- and three-site rings.

These routines evaluate thermal averages, the log partition function and
observable covariances for the rotator Boltzmann weight by numerical
integration over (S^2)^N, N in {2, 3}.  They share no code with the
Monte Carlo kernels and serve as the independent oracle in the tests.

The sphere is discretized with Gauss-Legendre nodes in cos(theta) and a
uniform (trapezoidal) grid in phi; both converge spectrally for the
analytic integrands that arise here.  Weights are normalized to the
uniform probability measure on the sphere, matching the convention of
the Monte Carlo sampler.
"""

import numpy as np

from .errors import InvalidObservableError
from .model import AXIS_INDEX

_RING_SITES = (2, 3)


def sphere_grid(n_theta=32, n_phi=32):
    """(points (G,3), weights (G,)) with weights summing to one."""
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1.0 - u**2)
    x = np.outer(s, np.cos(phi)).ravel()
    y = np.outer(s, np.sin(phi)).ravel()
    z = np.repeat(u, n_phi)
    w = np.repeat(wu / 2.0, n_phi) / n_phi
    return np.column_stack([x, y, z]), w


def _split_terms(n_sites, observables, coefficients):
    fields = []
    pairs = []
    for obs, k in zip(observables, coefficients):
        obs.validate_for(n_sites)
        if obs.kind == "pair" and obs.distance != 1:
            raise InvalidObservableError(
                "ring quadrature supports distance-1 correlators only"
            )
        (fields if obs.kind == "field" else pairs).append((obs, float(k)))
    return fields, pairs


def _site_factor(points, fields):
    """exp(sum_f K_f n_f) at every grid point."""
    expo = np.zeros(points.shape[0])
    for obs, k in fields:
        expo += k * points[:, AXIS_INDEX[obs.axis]]
    return np.exp(expo)


def _bond_exponent(points, pairs):
    """sum over pair couplings of K * o(n, n') on the G x G grid."""
    g = points.shape[0]
    expo = np.zeros((g, g))
    for obs, k in pairs:
        if obs.axis == "iso":
            expo += k * (points @ points.T)
        else:
            a = AXIS_INDEX[obs.axis]
            expo += k * np.outer(points[:, a], points[:, a])
    return expo


def _pair_value(points, obs):
    if obs.axis == "iso":
        return points @ points.T
    a = AXIS_INDEX[obs.axis]
    return np.outer(points[:, a], points[:, a])


def ring_partition(n_sites, observables, couplings, n_theta=32, n_phi=32):
    """Z = integral of exp(sum_a K_a A_a) over the uniform product measure."""
    if n_sites not in _RING_SITES:
        raise InvalidObservableError("ring quadrature handles N = 2 or 3")
    fields, pairs = _split_terms(n_sites, observables, couplings)
    points, w = sphere_grid(n_theta, n_phi)
    site = w * _site_factor(points, fields)
    bond = np.exp(_bond_exponent(points, pairs))
    if n_sites == 2:
        return float(site @ bond @ site)
    m = site[:, None] * bond
    return float(np.trace(m @ m @ m))


def ring_log_partition(n_sites, observables, couplings, n_theta=32, n_phi=32):
    return float(np.log(ring_partition(n_sites, observables, couplings,
                                       n_theta, n_phi)))


def ring_moments(n_sites, observables, couplings, n_theta=32, n_phi=32):
    """Thermal averages <A_a> (extensive orbit sums) for every observable."""
    if n_sites not in _RING_SITES:
        raise InvalidObservableError("ring quadrature handles N = 2 or 3")
    fields, pairs = _split_terms(n_sites, observables, couplings)
    points, w = sphere_grid(n_theta, n_phi)
    site = w * _site_factor(points, fields)
    bond = np.exp(_bond_exponent(points, pairs))

    out = np.empty(len(observables))
    if n_sites == 2:
        z = site @ bond @ site
        for i, obs in enumerate(observables):
            if obs.kind == "field":
                nf = points[:, AXIS_INDEX[obs.axis]]
                # both sites contribute; bond matrix is symmetric
                out[i] = 2.0 * ((site * nf) @ bond @ site) / z
            else:
                out[i] = (site @ (bond * _pair_value(points, obs)) @ site) / z
        return out

    m = site[:, None] * bond
    m2 = m @ m
    z = np.trace(m @ m2)
    diag_weight = np.einsum("ij,ji->i", m, m2)
    for i, obs in enumerate(observables):
        if obs.kind == "field":
            nf = points[:, AXIS_INDEX[obs.axis]]
            out[i] = 3.0 * float(nf @ diag_weight) / z
        else:
            ma = site[:, None] * (bond * _pair_value(points, obs))
            out[i] = 3.0 * float(np.einsum("ij,ji->", ma, m2)) / z
    return out


def ring_covariance(n_sites, observables, couplings, n_theta=16, n_phi=16):
    """Covariance matrix of the observable functions under the Boltzmann
    weight, evaluated on the full product grid.

    Uses moments of an explicit discrete probability measure, so the
    result is positive semidefinite by construction up to rounding.
    """
    if n_sites not in _RING_SITES:
        raise InvalidObservableError("ring quadrature handles N = 2 or 3")
    fields, pairs = _split_terms(n_sites, observables, couplings)
    points, w = sphere_grid(n_theta, n_phi)
    g = points.shape[0]
    r = len(observables)
    site_exp = _site_factor(points, fields)
    bond_exp = _bond_exponent(points, pairs)

    first = np.zeros(r)
    second = np.zeros((r, r))
    z = 0.0
    site_w = w * site_exp
    if n_sites == 2:
        vals = np.empty((r, g * g))
        weight = (np.outer(site_w, site_w) * np.exp(bond_exp)).ravel()
        for a, obs in enumerate(observables):
            ax = AXIS_INDEX[obs.axis]
            if obs.kind == "field":
                p = points[:, ax]
                v = p[:, None] + p[None, :]
            elif obs.axis == "iso":
                v = points @ points.T
            else:
                v = np.outer(points[:, ax], points[:, ax])
            vals[a] = v.ravel()
        z = weight.sum()
        first = vals @ weight
        second = (vals * weight) @ vals.T
    else:
        dots = points @ points.T
        vals = np.empty((r, g * g))
        for i1 in range(g):
            expo = bond_exp[i1][:, None] + bond_exp + bond_exp[:, i1][None, :]
            weight = ((w[i1] * site_exp[i1])
                      * np.outer(site_w, site_w) * np.exp(expo)).ravel()
            for a, obs in enumerate(observables):
                ax = AXIS_INDEX[obs.axis]
                if obs.kind == "field":
                    p = points[:, ax]
                    v = points[i1, ax] + p[:, None] + p[None, :]
                elif obs.axis == "iso":
                    d1 = dots[i1]
                    v = d1[:, None] + dots + d1[None, :]
                else:
                    p = points[:, ax]
                    c = points[i1, ax]
                    v = c * p[:, None] + np.outer(p, p) + c * p[None, :]
                vals[a] = v.ravel()
            z += weight.sum()
            first += vals @ weight
            second += (vals * weight) @ vals.T
    first /= z
    second /= z
    return second - np.outer(first, first)
