# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Metropolis kernels.

Both kernels consume pre-drawn random streams (proposal sites, exchange
partners, uniforms) so that their output is bit-for-bit reproducible and
identical to the pure-Python kernels in ``_kernels_py``.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, log, INFINITY

cnp.import_array()

cdef double ZERO_TOL_SQ = 1e-24


cdef inline double log_abs_gamma(double x, double y, bint pm, bint* zero) noexcept nogil:
    """log |Gamma(x + iy)|, Gamma = 1 + e^t (pm false) or 2 cosh t (pm true)."""
    cdef double ax, s
    if pm:
        ax = x if x >= 0 else -x
        s = 1.0 + 2.0 * exp(-2.0 * ax) * cos(2.0 * y) + exp(-4.0 * ax)
        zero[0] = s < ZERO_TOL_SQ
        return ax + 0.5 * log(s) if not zero[0] else -INFINITY
    if x > 0:
        s = 1.0 + 2.0 * exp(-x) * cos(y) + exp(-2.0 * x)
        zero[0] = s < ZERO_TOL_SQ
        return x + 0.5 * log(s) if not zero[0] else -INFINITY
    s = 1.0 + 2.0 * exp(x) * cos(y) + exp(2.0 * x)
    zero[0] = s < ZERO_TOL_SQ
    return 0.5 * log(s) if not zero[0] else -INFINITY


def rbm_metropolis(double[::1] a_re, double[::1] b_re, double[::1] b_im,
                   double[:, ::1] w_re, double[:, ::1] w_im,
                   signed char[::1] v0, bint hidden_pm,
                   long long[::1] sites, long long[::1] partners, double[::1] uniforms,
                   bint exchange, long long burn, long long thin):
    """Single-site flip (or two-site exchange) Metropolis chain for an RBM.

    Returns ``(samples, n_accepted, final_config)``; a sample is recorded
    after every ``thin``-th step past the first ``burn`` steps.
    """
    cdef Py_ssize_t n = a_re.shape[0]
    cdef Py_ssize_t m = b_re.shape[0]
    cdef Py_ssize_t n_steps = sites.shape[0]
    cdef Py_ssize_t n_rec = 0
    if n_steps > burn:
        n_rec = (n_steps - burn) // thin
    samples_arr = np.empty((n_rec, n), dtype=np.int8)
    cdef signed char[:, ::1] samples = samples_arr
    v_arr = np.array(v0, dtype=np.int8)
    cdef signed char[::1] v = v_arr
    cdef double[::1] tx = np.empty(m)
    cdef double[::1] ty = np.empty(m)
    cdef double[::1] lg = np.empty(m)
    cdef double[::1] nx = np.empty(m)
    cdef double[::1] ny = np.empty(m)
    cdef double[::1] nlg = np.empty(m)
    cdef Py_ssize_t t, i, j, k, rec = 0
    cdef long long accepted = 0
    cdef double di, dj, delta
    cdef bint zero, reject
    with nogil:
        for k in range(m):
            tx[k] = b_re[k]
            ty[k] = b_im[k]
            for i in range(n):
                if v[i]:
                    tx[k] += w_re[i, k]
                    ty[k] += w_im[i, k]
            lg[k] = log_abs_gamma(tx[k], ty[k], hidden_pm, &zero)
        for t in range(n_steps):
            i = sites[t]
            j = partners[t]
            reject = 0
            if exchange and v[i] == v[j]:
                reject = 1
            if not reject:
                di = 1.0 - 2.0 * v[i]
                delta = a_re[i] * di
                if exchange:
                    dj = 1.0 - 2.0 * v[j]
                    delta += a_re[j] * dj
                for k in range(m):
                    nx[k] = tx[k] + di * w_re[i, k]
                    ny[k] = ty[k] + di * w_im[i, k]
                    if exchange:
                        nx[k] += dj * w_re[j, k]
                        ny[k] += dj * w_im[j, k]
                    nlg[k] = log_abs_gamma(nx[k], ny[k], hidden_pm, &zero)
                    if zero:
                        reject = 1
                        break
                    delta += nlg[k] - lg[k]
                if not reject and uniforms[t] < exp(2.0 * delta):
                    accepted += 1
                    v[i] = 1 - v[i]
                    if exchange:
                        v[j] = 1 - v[j]
                    for k in range(m):
                        tx[k] = nx[k]
                        ty[k] = ny[k]
                        lg[k] = nlg[k]
            if t >= burn and (t - burn + 1) % thin == 0:
                for i in range(n):
                    samples[rec, i] = v[i]
                rec += 1
    return samples_arr, int(accepted), v_arr


def table_metropolis(double[::1] log_prob, int n, long long start,
                     long long[::1] sites, long long[::1] partners, double[::1] uniforms,
                     bint exchange, long long burn, long long thin):
    """Metropolis chain over a tabulated log |psi|^2 (big-endian indices).

    Entries equal to -inf are zero-amplitude configurations and are never
    accepted. Returns ``(sample_indices, n_accepted, final_index)``.
    """
    cdef Py_ssize_t n_steps = sites.shape[0]
    cdef Py_ssize_t n_rec = 0
    if n_steps > burn:
        n_rec = (n_steps - burn) // thin
    out_arr = np.empty(n_rec, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef long long cur = start, prop, bi, bj
    cdef long long accepted = 0
    cdef Py_ssize_t t, rec = 0
    cdef double d
    with nogil:
        for t in range(n_steps):
            bi = (<long long> 1) << (n - 1 - sites[t])
            prop = cur ^ bi
            if exchange:
                bj = (<long long> 1) << (n - 1 - partners[t])
                if ((cur & bi) != 0) == ((cur & bj) != 0):
                    prop = cur
                else:
                    prop = prop ^ bj
            if prop != cur and log_prob[prop] != -INFINITY:
                d = log_prob[prop] - log_prob[cur]
                if uniforms[t] < exp(d):
                    cur = prop
                    accepted += 1
            if t >= burn and (t - burn + 1) % thin == 0:
                out[rec] = cur
                rec += 1
    return out_arr, int(accepted), int(cur)
