"""Inner loops with a numba path and a pure-numpy path.

The numba versions are used unless ``SPINCHAIN_NUMBA=0`` is set or numba cannot
be imported.  Both paths are kept importable so tests and the benchmark can
compare them directly.
"""

import numpy as np

from ._config import use_numba

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _log_power_iterates_numpy(S, v0, w, n_max):
    out = np.empty(n_max)
    y = np.array(v0, dtype=np.complex128)
    log_scale = 0.0
    for n in range(n_max):
        y = S @ y
        s = np.max(np.abs(y))
        if s == 0.0:
            out[n:] = -np.inf
            return out
        y = y / s
        log_scale += np.log(s)
        val = np.real(w @ y)
        out[n] = log_scale + np.log(val) if val > 0.0 else -np.inf
    return out


def _merge_sorted_atoms_numpy(values, masses, tol):
    if values.shape[0] == 0:
        return values.copy(), masses.copy()
    # cluster boundaries: a gap larger than tol from the cluster's first value
    starts = [0]
    anchor = values[0]
    for i in range(1, values.shape[0]):
        if values[i] - anchor > tol:
            starts.append(i)
            anchor = values[i]
    bounds = np.array(starts + [values.shape[0]])
    out_v = np.array([values[bounds[j]:bounds[j + 1]].mean() for j in range(len(starts))])
    out_m = np.add.reduceat(masses, bounds[:-1])
    return out_v, out_m


if numba is not None:

    @numba.njit(cache=True)
    def _log_power_iterates_numba(S, v0, w, n_max):
        dim = S.shape[0]
        out = np.empty(n_max)
        y = v0.astype(np.complex128)
        tmp = np.empty(dim, dtype=np.complex128)
        log_scale = 0.0
        for n in range(n_max):
            s = 0.0
            for i in range(dim):
                acc = 0j
                for j in range(dim):
                    acc += S[i, j] * y[j]
                tmp[i] = acc
                a = abs(acc)
                if a > s:
                    s = a
            if s == 0.0:
                for k in range(n, n_max):
                    out[k] = -np.inf
                return out
            val = 0.0
            for i in range(dim):
                y[i] = tmp[i] / s
                val += (w[i] * y[i]).real
            log_scale += np.log(s)
            if val > 0.0:
                out[n] = log_scale + np.log(val)
            else:
                out[n] = -np.inf
        return out

    @numba.njit(cache=True)
    def _merge_sorted_atoms_numba(values, masses, tol):
        n = values.shape[0]
        out_v = np.empty(n)
        out_m = np.empty(n)
        if n == 0:
            return out_v, out_m
        k = 0
        anchor = values[0]
        vsum = values[0]
        msum = masses[0]
        count = 1
        for i in range(1, n):
            if values[i] - anchor > tol:
                out_v[k] = vsum / count
                out_m[k] = msum
                k += 1
                anchor = values[i]
                vsum = values[i]
                msum = masses[i]
                count = 1
            else:
                vsum += values[i]
                msum += masses[i]
                count += 1
        out_v[k] = vsum / count
        out_m[k] = msum
        return out_v[:k + 1].copy(), out_m[:k + 1].copy()

else:  # pragma: no cover
    _log_power_iterates_numba = None
    _merge_sorted_atoms_numba = None


def numba_active():
    return numba is not None and use_numba()


def log_power_iterates(S, v0, w, n_max):
    """``log Re(w . S^n v0)`` for n = 1..n_max, renormalizing every step.

    Entries where the pairing is not strictly positive are ``-inf``.
    """
    S = np.ascontiguousarray(S, dtype=np.complex128)
    v0 = np.ascontiguousarray(v0, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    if numba_active():
        return _log_power_iterates_numba(S, v0, w, int(n_max))
    return _log_power_iterates_numpy(S, v0, w, int(n_max))


def merge_sorted_atoms(values, masses, tol):
    """Merge ascending ``values`` lying within ``tol`` of a cluster's first value."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    masses = np.ascontiguousarray(masses, dtype=np.float64)
    if numba_active():
        return _merge_sorted_atoms_numba(values, masses, float(tol))
    return _merge_sorted_atoms_numpy(values, masses, float(tol))
