"""Reference implementations used only by the tests."""

import itertools

import numpy as np


def brute_force_simplex_projection(b):
    """Enumerate every support set and keep the feasible stationary point of least norm."""
    b = np.asarray(b, dtype=float)
    n = b.size
    best, best_val = None, np.inf
    for r in range(1, n + 1):
        for support in itertools.combinations(range(n), r):
            s = list(support)
            xi = (b[s].sum() - 1.0) / r
            p = np.zeros(n)
            p[s] = b[s] - xi
            if np.any(p < -1e-15):
                continue
            val = np.sum((b - p) ** 2)
            if val < best_val - 1e-15:
                best, best_val = np.maximum(p, 0.0), val
    return best


def dense_transition_matrix(pc):
    """Full 2^n x 2^n matrix with entry [kappa, zeta] = P(observe kappa | sent zeta)."""
    n = len(pc)
    m = np.ones((2**n, 2**n))
    for k in range(2**n):
        for z in range(2**n):
            for i in range(n):
                same = ((k >> i) & 1) == ((z >> i) & 1)
                m[k, z] *= pc[i] if same else 1 - pc[i]
    return m


def brute_map_log_ratio(llr, probs):
    """log sum_s p(s) exp(z(s).l) - log sum_s p(~s) exp(z(s).l), one outcome at a time."""
    d = llr.size
    num = den = 0.0
    for k in range(2**d):
        z = np.array([(k >> i) & 1 for i in range(d)])
        w = np.exp(z @ llr)
        num += probs[k] * w
        den += probs[2**d - 1 - k] * w
    return np.log(num) - np.log(den)


def id_term_density(l, P, h, sigma):
    """Density of one ID log-likelihood term given x = +1 (known CSI, source correct w.p. P > 1/2).

    Obtained by inverting l(y) = log(e^u P + 1 - P) - log(P + e^u (1 - P)),
    u = 2 y h / sigma^2, and transforming the two-component Gaussian mixture of y.
    Supported on |l| < log(P / (1 - P)).
    """
    l = np.asarray(l, dtype=float)
    Q = 1.0 - P
    L = np.exp(l)
    num, den = Q - L * P, L * Q - P
    y = sigma**2 / (2 * h) * np.log(num / den)
    jac = sigma**2 / (2 * h) * L * (2 * P - 1) / (num * den)
    mix = P * np.exp(-0.5 * ((y - h) / sigma) ** 2) + Q * np.exp(-0.5 * ((y + h) / sigma) ** 2)
    return np.abs(jac) * mix / (np.sqrt(2 * np.pi) * sigma)
