"""Pure-Python Metropolis kernels; statement-for-statement twins of ``_kernels.pyx``."""
import math

import numpy as np

ZERO_TOL_SQ = 1e-24


def log_abs_gamma(x, y, pm):
    """Return (log |Gamma(x + iy)|, is_zero)."""
    if pm:
        ax = x if x >= 0 else -x
        s = 1.0 + 2.0 * math.exp(-2.0 * ax) * math.cos(2.0 * y) + math.exp(-4.0 * ax)
        zero = s < ZERO_TOL_SQ
        return (-math.inf if zero else ax + 0.5 * math.log(s)), zero
    if x > 0:
        s = 1.0 + 2.0 * math.exp(-x) * math.cos(y) + math.exp(-2.0 * x)
        zero = s < ZERO_TOL_SQ
        return (-math.inf if zero else x + 0.5 * math.log(s)), zero
    s = 1.0 + 2.0 * math.exp(x) * math.cos(y) + math.exp(2.0 * x)
    zero = s < ZERO_TOL_SQ
    return (-math.inf if zero else 0.5 * math.log(s)), zero


def _exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def rbm_metropolis(a_re, b_re, b_im, w_re, w_im, v0, hidden_pm, sites, partners, uniforms,
                   exchange, burn, thin):
    n, m = len(a_re), len(b_re)
    a_re = [float(x) for x in a_re]
    w_re = np.asarray(w_re).tolist()
    w_im = np.asarray(w_im).tolist()
    v = [int(x) for x in v0]
    n_steps = len(sites)
    n_rec = (n_steps - burn) // thin if n_steps > burn else 0
    samples = np.empty((n_rec, n), dtype=np.int8)
    tx, ty, lg = [0.0] * m, [0.0] * m, [0.0] * m
    for k in range(m):
        tx[k] = float(b_re[k])
        ty[k] = float(b_im[k])
        for i in range(n):
            if v[i]:
                tx[k] += w_re[i][k]
                ty[k] += w_im[i][k]
        lg[k], _ = log_abs_gamma(tx[k], ty[k], hidden_pm)
    nx, ny, nlg = [0.0] * m, [0.0] * m, [0.0] * m
    accepted = 0
    rec = 0
    sites = [int(s) for s in sites]
    partners = [int(s) for s in partners]
    uniforms = [float(u) for u in uniforms]
    for t in range(n_steps):
        i = sites[t]
        j = partners[t]
        reject = bool(exchange) and v[i] == v[j]
        if not reject:
            di = 1.0 - 2.0 * v[i]
            delta = a_re[i] * di
            dj = 0.0
            if exchange:
                dj = 1.0 - 2.0 * v[j]
                delta += a_re[j] * dj
            for k in range(m):
                nx[k] = tx[k] + di * w_re[i][k]
                ny[k] = ty[k] + di * w_im[i][k]
                if exchange:
                    nx[k] += dj * w_re[j][k]
                    ny[k] += dj * w_im[j][k]
                nlg[k], zero = log_abs_gamma(nx[k], ny[k], hidden_pm)
                if zero:
                    reject = True
                    break
                delta += nlg[k] - lg[k]
            if not reject and uniforms[t] < _exp(2.0 * delta):
                accepted += 1
                v[i] = 1 - v[i]
                if exchange:
                    v[j] = 1 - v[j]
                tx, nx = nx[:], tx
                ty, ny = ny[:], ty
                lg, nlg = nlg[:], lg
        if t >= burn and (t - burn + 1) % thin == 0:
            samples[rec] = v
            rec += 1
    return samples, accepted, np.array(v, dtype=np.int8)


def table_metropolis(log_prob, n, start, sites, partners, uniforms, exchange, burn, thin):
    log_prob = np.asarray(log_prob, dtype=float).tolist()
    n_steps = len(sites)
    n_rec = (n_steps - burn) // thin if n_steps > burn else 0
    out = np.empty(n_rec, dtype=np.int64)
    cur = int(start)
    accepted = 0
    rec = 0
    for t in range(n_steps):
        bi = 1 << (n - 1 - int(sites[t]))
        prop = cur ^ bi
        if exchange:
            bj = 1 << (n - 1 - int(partners[t]))
            if bool(cur & bi) == bool(cur & bj):
                prop = cur
            else:
                prop ^= bj
        if prop != cur and log_prob[prop] != -math.inf:
            if float(uniforms[t]) < _exp(log_prob[prop] - log_prob[cur]):
                cur = prop
                accepted += 1
        if t >= burn and (t - burn + 1) % thin == 0:
            out[rec] = cur
            rec += 1
    return out, accepted, cur
