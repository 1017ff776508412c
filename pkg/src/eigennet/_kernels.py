"""Compiled inner loop of the blockwise random-walk Metropolis sampler.

One call advances the chain through one adaptation window using noise drawn
by the caller, so the random stream is owned by a numpy ``Generator`` and
results do not depend on numba's RNG.
"""

import math

import numpy as np
from numba import njit

BLOCK_ALPHA, BLOCK_BETA, BLOCK_S, BLOCK_B = 0, 1, 2, 3


@njit(cache=True)
def loglik(g, b, y):
    total = 0.0
    for i in range(g.shape[0]):
        x = y[i] * (g[i] + b)
        if x > 0.0:
            total -= math.log1p(math.exp(-x))
        else:
            total += x - math.log1p(math.exp(x))
    return total


@njit(cache=True)
def l1_of(V, coef, identity):
    if identity:
        total = 0.0
        for j in range(coef.shape[0]):
            total += abs(coef[j])
        return total
    return np.abs(V @ coef).sum()


@njit(cache=True)
def matvec_into(A, x, out):
    for i in range(A.shape[0]):
        acc = 0.0
        for j in range(A.shape[1]):
            acc += A[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def l1_matvec(V, x, identity):
    total = 0.0
    if identity:
        for j in range(x.shape[0]):
            total += abs(x[j])
        return total
    for i in range(V.shape[0]):
        acc = 0.0
        for j in range(V.shape[1]):
            acc += V[i, j] * x[j]
        total += abs(acc)
    return total


@njit(cache=True)
def generative(beta, s, eta, lam2):
    total = 0.0
    for j in range(beta.shape[0]):
        ab = abs(beta[j])
        total += beta[j] * beta[j] - 2.0 * eta[j] * s[j] * ab + eta[j] * s[j] * s[j]
    return -0.5 * lam2 * total


@njit(cache=True)
def sqdist(a, c):
    total = 0.0
    for j in range(a.shape[0]):
        d = a[j] - c[j]
        total += d * d
    return total


@njit(cache=True)
def run_window(
    Z, y, V, identity, eta, lam1, lam2, lam3, inv_var_b,
    update, tie_beta, s_active,
    alpha, beta, s, bvec, g, cache,
    steps, scale_a, scale_be, scale_s,
    na, nbe, ns, nb, logu,
    t0, burn_in, thin,
    out_alpha, out_beta, out_s, out_b, out_lp, out_iter, out_count,
    accepts, sums, sumsq,
    best_lp, best_alpha, best_beta, best_s, best_b,
):
    # cache holds [loglik, l1, coupling, generative]; bvec[0] is the bias.
    m = alpha.shape[0]
    W = na.shape[0]
    prop = np.empty(m)
    g_new = np.empty(g.shape[0])
    for k in range(W):
        t = t0 + k
        b = bvec[0]
        if update[BLOCK_ALPHA]:
            for j in range(m):
                prop[j] = alpha[j] + steps[0] * scale_a[j] * na[k, j]
            matvec_into(Z, prop, g_new)
            ll_new = loglik(g_new, b, y)
            l1_new = l1_matvec(V, prop, identity)
            if tie_beta:
                coup_new = 0.0
                gen_new = generative(prop, s, eta, lam2)
            else:
                coup_new = sqdist(prop, beta)
                gen_new = cache[3]
            delta = (ll_new - cache[0]) - lam1 * (l1_new - cache[1]) \
                - 0.5 * lam3 * (coup_new - cache[2]) + (gen_new - cache[3])
            if logu[k, 0] < delta:
                alpha[:] = prop
                if tie_beta:
                    beta[:] = prop
                g[:] = g_new
                cache[0] = ll_new
                cache[1] = l1_new
                cache[2] = coup_new
                cache[3] = gen_new
                accepts[0] += 1
        if update[BLOCK_BETA] and not tie_beta:
            for j in range(m):
                prop[j] = beta[j] + steps[1] * scale_be[j] * nbe[k, j]
            coup_new = sqdist(alpha, prop)
            gen_new = generative(prop, s, eta, lam2)
            delta = -0.5 * lam3 * (coup_new - cache[2]) + (gen_new - cache[3])
            if logu[k, 1] < delta:
                beta[:] = prop
                cache[2] = coup_new
                cache[3] = gen_new
                accepts[1] += 1
        if update[BLOCK_S]:
            for j in range(m):
                if s_active[j]:
                    prop[j] = abs(s[j] + steps[2] * scale_s[j] * ns[k, j])
                else:
                    prop[j] = s[j]
            gen_new = generative(beta, prop, eta, lam2)
            delta = gen_new - cache[3]
            if logu[k, 2] < delta:
                s[:] = prop
                cache[3] = gen_new
                accepts[2] += 1
        if update[BLOCK_B]:
            b_new = b + steps[3] * nb[k]
            ll_new = loglik(g, b_new, y)
            delta = (ll_new - cache[0]) - 0.5 * inv_var_b * (b_new * b_new - b * b)
            if logu[k, 3] < delta:
                bvec[0] = b_new
                cache[0] = ll_new
                accepts[3] += 1
        b = bvec[0]
        lp = cache[0] - lam1 * cache[1] - 0.5 * lam3 * cache[2] + cache[3] - 0.5 * inv_var_b * b * b

        for j in range(m):
            sums[0, j] += alpha[j]
            sumsq[0, j] += alpha[j] * alpha[j]
            sums[1, j] += beta[j]
            sumsq[1, j] += beta[j] * beta[j]
            sums[2, j] += s[j]
            sumsq[2, j] += s[j] * s[j]

        if lp > best_lp[0]:
            best_lp[0] = lp
            best_alpha[:] = alpha
            best_beta[:] = beta
            best_s[:] = s
            best_b[0] = b

        if t > burn_in and (t - burn_in) % thin == 0:
            r = out_count[0]
            out_alpha[r, :] = alpha
            out_beta[r, :] = beta
            out_s[r, :] = s
            out_b[r] = b
            out_lp[r] = lp
            out_iter[r] = t
            out_count[0] = r + 1
