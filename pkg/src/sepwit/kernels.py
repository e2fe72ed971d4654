"""Hot numerical loops, compiled with numba unless SEPWIT_BACKEND=numpy.

All functions below are written in nopython-compatible Python and receive
the flat term arrays produced by ``model.pack_terms``:

    kind[a]  0 = field, 1 = pair correlator
    axis[a]  0 = x, 1 = y, 2 = z, 3 = isotropic (x+y+z)
    dist[a]  lattice offset (0 for fields)
    coup[a]  coupling / coefficient multiplying observable a

Random numbers come from the backend's Mersenne-Twister stream; seed it
with ``seed_stream`` before a reproducible run.  The numba and numpy
backends draw bit-identical sequences.
"""

import numpy as np

from .backend import kernel


@kernel
def seed_stream(seed):
    np.random.seed(seed)


@kernel
def random_unit_vector():
    u = 2.0 * np.random.random() - 1.0
    phi = 2.0 * np.pi * np.random.random()
    s = np.sqrt(max(0.0, 1.0 - u * u))
    return np.array((s * np.cos(phi), s * np.sin(phi), u))


@kernel
def random_configuration(n_sites):
    vec = np.empty((n_sites, 3))
    for i in range(n_sites):
        vec[i] = random_unit_vector()
    return vec


@kernel
def observables_eval(vec, kind, axis, dist, out):
    """Orbit-sum value of every term; out must have length len(kind)."""
    n = vec.shape[0]
    for a in range(kind.shape[0]):
        ax = axis[a]
        if kind[a] == 0:
            s = 0.0
            for i in range(n):
                s += vec[i, ax]
            out[a] = s
        else:
            r = dist[a]
            terms = n if 2 * r < n else n // 2
            s = 0.0
            if ax == 3:
                for i in range(terms):
                    j = i + r
                    if j >= n:
                        j -= n
                    s += (vec[i, 0] * vec[j, 0] + vec[i, 1] * vec[j, 1]
                          + vec[i, 2] * vec[j, 2])
            else:
                for i in range(terms):
                    j = i + r
                    if j >= n:
                        j -= n
                    s += vec[i, ax] * vec[j, ax]
            out[a] = s


@kernel
def total_energy(vec, kind, axis, dist, coup):
    n = vec.shape[0]
    e = 0.0
    for a in range(kind.shape[0]):
        ax = axis[a]
        if kind[a] == 0:
            s = 0.0
            for i in range(n):
                s += vec[i, ax]
        else:
            r = dist[a]
            terms = n if 2 * r < n else n // 2
            s = 0.0
            if ax == 3:
                for i in range(terms):
                    j = i + r
                    if j >= n:
                        j -= n
                    s += (vec[i, 0] * vec[j, 0] + vec[i, 1] * vec[j, 1]
                          + vec[i, 2] * vec[j, 2])
            else:
                for i in range(terms):
                    j = i + r
                    if j >= n:
                        j -= n
                    s += vec[i, ax] * vec[j, ax]
        e -= coup[a] * s
    return e


@kernel
def _local_field_components(vec, site, kind, axis, dist, coup):
    """h = -dH/dn at `site`; local energy is -n.h + const."""
    n = vec.shape[0]
    hx = 0.0
    hy = 0.0
    hz = 0.0
    for a in range(kind.shape[0]):
        k = coup[a]
        if k == 0.0:
            continue
        ax = axis[a]
        if kind[a] == 0:
            if ax == 0:
                hx += k
            elif ax == 1:
                hy += k
            else:
                hz += k
        else:
            r = dist[a]
            j1 = site + r
            if j1 >= n:
                j1 -= n
            if 2 * r < n:
                j2 = site - r
                if j2 < 0:
                    j2 += n
                if ax == 3:
                    hx += k * (vec[j1, 0] + vec[j2, 0])
                    hy += k * (vec[j1, 1] + vec[j2, 1])
                    hz += k * (vec[j1, 2] + vec[j2, 2])
                else:
                    w = k * (vec[j1, ax] + vec[j2, ax])
                    if ax == 0:
                        hx += w
                    elif ax == 1:
                        hy += w
                    else:
                        hz += w
            else:
                # r = N/2: the single orbit term couples site to site+N/2
                if ax == 3:
                    hx += k * vec[j1, 0]
                    hy += k * vec[j1, 1]
                    hz += k * vec[j1, 2]
                else:
                    w = k * vec[j1, ax]
                    if ax == 0:
                        hx += w
                    elif ax == 1:
                        hy += w
                    else:
                        hz += w
    return hx, hy, hz


@kernel
def local_field(vec, site, kind, axis, dist, coup, out):
    hx, hy, hz = _local_field_components(vec, site, kind, axis, dist, coup)
    out[0] = hx
    out[1] = hy
    out[2] = hz


@kernel
def delta_energy(vec, site, new_vec, kind, axis, dist, coup):
    hx, hy, hz = _local_field_components(vec, site, kind, axis, dist, coup)
    dx = new_vec[0] - vec[site, 0]
    dy = new_vec[1] - vec[site, 1]
    dz = new_vec[2] - vec[site, 2]
    return -(dx * hx + dy * hy + dz * hz)


@kernel
def propose_in_cone(vx, vy, vz, cone_angle):
    """Uniform direction within a cone of half-angle cone_angle about v."""
    # orthonormal frame perpendicular to v, built from the smallest component
    ax = abs(vx)
    ay = abs(vy)
    az = abs(vz)
    if ax <= ay and ax <= az:
        rx, ry, rz = 1.0, 0.0, 0.0
    elif ay <= az:
        rx, ry, rz = 0.0, 1.0, 0.0
    else:
        rx, ry, rz = 0.0, 0.0, 1.0
    e1x = vy * rz - vz * ry
    e1y = vz * rx - vx * rz
    e1z = vx * ry - vy * rx
    inv = 1.0 / np.sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
    e1x *= inv
    e1y *= inv
    e1z *= inv
    e2x = vy * e1z - vz * e1y
    e2y = vz * e1x - vx * e1z
    e2z = vx * e1y - vy * e1x

    u = 1.0 - np.random.random() * (1.0 - np.cos(cone_angle))
    s = np.sqrt(max(0.0, 1.0 - u * u))
    phi = 2.0 * np.pi * np.random.random()
    c = s * np.cos(phi)
    d = s * np.sin(phi)
    nx = u * vx + c * e1x + d * e2x
    ny = u * vy + c * e1y + d * e2y
    nz = u * vz + c * e1z + d * e2z
    inv = 1.0 / np.sqrt(nx * nx + ny * ny + nz * nz)
    return nx * inv, ny * inv, nz * inv


@kernel
def metropolis_site(vec, site, kind, axis, dist, coup, cone_angle):
    nx, ny, nz = propose_in_cone(
        vec[site, 0], vec[site, 1], vec[site, 2], cone_angle
    )
    hx, hy, hz = _local_field_components(vec, site, kind, axis, dist, coup)
    d_e = -((nx - vec[site, 0]) * hx + (ny - vec[site, 1]) * hy
            + (nz - vec[site, 2]) * hz)
    if d_e <= 0.0 or np.random.random() < np.exp(-d_e):
        vec[site, 0] = nx
        vec[site, 1] = ny
        vec[site, 2] = nz
        return 1
    return 0


@kernel
def overrelax_site(vec, site, kind, axis, dist, coup):
    """Reflect the spin about its local field; microcanonical move."""
    hx, hy, hz = _local_field_components(vec, site, kind, axis, dist, coup)
    hn = np.sqrt(hx * hx + hy * hy + hz * hz)
    if hn < 1e-12:
        v = random_unit_vector()
        vec[site, 0] = v[0]
        vec[site, 1] = v[1]
        vec[site, 2] = v[2]
        return
    hx /= hn
    hy /= hn
    hz /= hn
    d = 2.0 * (vec[site, 0] * hx + vec[site, 1] * hy + vec[site, 2] * hz)
    nx = d * hx - vec[site, 0]
    ny = d * hy - vec[site, 1]
    nz = d * hz - vec[site, 2]
    inv = 1.0 / np.sqrt(nx * nx + ny * ny + nz * nz)
    vec[site, 0] = nx * inv
    vec[site, 1] = ny * inv
    vec[site, 2] = nz * inv


@kernel
def mc_step(vec, kind, axis, dist, coup, cone_angle):
    """One Monte Carlo step: 2N (Metropolis + overrelaxation) site updates."""
    n = vec.shape[0]
    accepts = 0
    for _ in range(2 * n):
        site = np.random.randint(0, n)
        accepts += metropolis_site(vec, site, kind, axis, dist, coup, cone_angle)
        site = np.random.randint(0, n)
        overrelax_site(vec, site, kind, axis, dist, coup)
    return accepts


@kernel
def run_thermalization(vec, kind, axis, dist, coup, n_sweeps, cone_angle,
                       adapt_interval):
    """Thermalize with proposal-amplitude adaptation toward 0.5 acceptance.

    The cone angle is multiplied/divided by 1.1 every `adapt_interval`
    proposals when the windowed acceptance leaves [0.4, 0.6], clamped to
    (1e-3, pi].  Returns (cone_angle, overall acceptance rate).
    """
    n = vec.shape[0]
    prop = 0
    acc = 0
    total_prop = 0
    total_acc = 0
    for _ in range(n_sweeps):
        for _ in range(2 * n):
            site = np.random.randint(0, n)
            a = metropolis_site(vec, site, kind, axis, dist, coup, cone_angle)
            acc += a
            prop += 1
            total_acc += a
            total_prop += 1
            if prop >= adapt_interval:
                rate = acc / prop
                if rate > 0.6:
                    cone_angle *= 1.1
                elif rate < 0.4:
                    cone_angle /= 1.1
                if cone_angle > np.pi:
                    cone_angle = np.pi
                elif cone_angle < 1e-3:
                    cone_angle = 1e-3
                prop = 0
                acc = 0
            site = np.random.randint(0, n)
            overrelax_site(vec, site, kind, axis, dist, coup)
    rate = total_acc / total_prop if total_prop > 0 else 0.0
    return cone_angle, rate


@kernel
def run_production(vec, kind, axis, dist, coup, cone_angle, n_bins, bin_len,
                   bin_sums, lin_sums, sq_sums):
    """Measure every observable after each MC step, accumulating bin sums.

    bin_sums has shape (n_bins, R); lin_sums/sq_sums accumulate per-step
    sums and squared sums (for autocorrelation estimates).  The cone angle
    is frozen so production sampling satisfies detailed balance.
    Returns (accepted proposals, total proposals).
    """
    r = kind.shape[0]
    obs = np.empty(r)
    accepts = 0
    n = vec.shape[0]
    for b in range(n_bins):
        for _ in range(bin_len):
            accepts += mc_step(vec, kind, axis, dist, coup, cone_angle)
            observables_eval(vec, kind, axis, dist, obs)
            for a in range(r):
                x = obs[a]
                bin_sums[b, a] += x
                lin_sums[a] += x
                sq_sums[a] += x * x
    return accepts, 2 * n * n_bins * bin_len


@kernel
def run_anneal_ramp(vec, kind, axis, dist, coup, betas, sweeps_per_beta,
                    cone_angle, adapt_interval, trace, best_vec):
    """One annealing ramp sampling exp(-beta * E) over the beta grid.

    Records the energy after every sweep in `trace` (length
    len(betas) * sweeps_per_beta) and keeps the lowest-energy
    configuration seen, copied into best_vec.  Returns the recorded
    minimum energy.
    """
    n = vec.shape[0]
    r = kind.shape[0]
    scaled = np.empty(r)
    best_e = total_energy(vec, kind, axis, dist, coup)
    for i in range(n):
        for c in range(3):
            best_vec[i, c] = vec[i, c]
    prop = 0
    acc = 0
    t = 0
    for ib in range(betas.shape[0]):
        beta = betas[ib]
        for a in range(r):
            scaled[a] = beta * coup[a]
        for _ in range(sweeps_per_beta):
            for _ in range(2 * n):
                site = np.random.randint(0, n)
                a = metropolis_site(vec, site, kind, axis, dist, scaled,
                                    cone_angle)
                acc += a
                prop += 1
                if prop >= adapt_interval:
                    rate = acc / prop
                    if rate > 0.6:
                        cone_angle *= 1.1
                    elif rate < 0.4:
                        cone_angle /= 1.1
                    if cone_angle > np.pi:
                        cone_angle = np.pi
                    elif cone_angle < 1e-3:
                        cone_angle = 1e-3
                    prop = 0
                    acc = 0
                site = np.random.randint(0, n)
                overrelax_site(vec, site, kind, axis, dist, scaled)
            e = total_energy(vec, kind, axis, dist, coup)
            trace[t] = e
            t += 1
            if e < best_e:
                best_e = e
                for i in range(n):
                    for c in range(3):
                        best_vec[i, c] = vec[i, c]
    return best_e


@kernel
def polish(vec, kind, axis, dist, coup, max_passes, tol):
    """Deterministically align each spin with its local field, iterated.

    Coordinate-descent on the energy; never increases it.  Stops when a
    full pass improves the energy by less than `tol`.  Returns the final
    (exactly recomputed) energy.
    """
    n = vec.shape[0]
    for _ in range(max_passes):
        gain = 0.0
        for site in range(n):
            hx, hy, hz = _local_field_components(vec, site, kind, axis, dist,
                                                 coup)
            hn = np.sqrt(hx * hx + hy * hy + hz * hz)
            if hn < 1e-12:
                continue
            # new energy contribution -|h| versus current -n.h
            cur = vec[site, 0] * hx + vec[site, 1] * hy + vec[site, 2] * hz
            gain += hn - cur
            vec[site, 0] = hx / hn
            vec[site, 1] = hy / hn
            vec[site, 2] = hz / hn
        if gain < tol:
            break
    return total_energy(vec, kind, axis, dist, coup)


@kernel
def exact_grid_min(points, n_sites, kind, axis, dist, coup, coarse_passes,
                   final_passes, tol):
    """Global minimum over product states for n_sites in {2, 3}.

    Polishes from every combination of grid points, keeps the best basin,
    then re-polishes it to full tolerance.  Returns
    (energy, best configuration, largest angular move of the winning start).
    """
    g = points.shape[0]
    vec = np.empty((n_sites, 3))
    best_vec = np.empty((n_sites, 3))
    start = np.empty((n_sites, 3))
    best_start = np.empty((n_sites, 3))
    best_e = np.inf
    if n_sites == 2:
        for i in range(g):
            for j in range(g):
                for c in range(3):
                    vec[0, c] = points[i, c]
                    vec[1, c] = points[j, c]
                    start[0, c] = points[i, c]
                    start[1, c] = points[j, c]
                e = polish(vec, kind, axis, dist, coup, coarse_passes, tol)
                if e < best_e:
                    best_e = e
                    best_vec[:] = vec
                    best_start[:] = start
    else:
        for i in range(g):
            for j in range(g):
                for k in range(g):
                    for c in range(3):
                        vec[0, c] = points[i, c]
                        vec[1, c] = points[j, c]
                        vec[2, c] = points[k, c]
                        start[0, c] = points[i, c]
                        start[1, c] = points[j, c]
                        start[2, c] = points[k, c]
                    e = polish(vec, kind, axis, dist, coup, coarse_passes, tol)
                    if e < best_e:
                        best_e = e
                        best_vec[:] = vec
                        best_start[:] = start
    vec[:] = best_start
    best_e = polish(vec, kind, axis, dist, coup, final_passes, tol)
    best_vec[:] = vec
    moved = 0.0
    for i in range(n_sites):
        d = (best_start[i, 0] * best_vec[i, 0]
             + best_start[i, 1] * best_vec[i, 1]
             + best_start[i, 2] * best_vec[i, 2])
        if d > 1.0:
            d = 1.0
        elif d < -1.0:
            d = -1.0
        ang = np.arccos(d)
        if ang > moved:
            moved = ang
    return best_e, best_vec, moved
