"""Compiled inner loops for the event-driven simulator."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def build_alias(weights):
    """Vose alias table for sampling index ``e`` with probability ``w_e / sum(w)``."""
    n = weights.shape[0]
    total = 0.0
    for e in range(n):
        total += weights[e]
    prob = np.empty(n)
    alias = np.arange(n)
    scaled = np.empty(n)
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for e in range(n):
        scaled[e] = weights[e] * n / total
        if scaled[e] < 1.0:
            small[ns] = e
            ns += 1
        else:
            large[nl] = e
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        l = large[nl - 1]
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            nl -= 1
            small[ns] = l
            ns += 1
    for q in range(nl):
        prob[large[q]] = 1.0
        alias[large[q]] = large[q]
    for q in range(ns):
        # leftovers from roundoff
        prob[small[q]] = 1.0
        alias[small[q]] = small[q]
    return prob, alias


@njit(cache=True)
def alias_lookup(u, prob, alias):
    """Map uniforms in [0, 1) to indices using one uniform per draw."""
    n = prob.shape[0]
    out = np.empty(u.shape[0], dtype=np.int64)
    for b in range(u.shape[0]):
        x = u[b] * n
        col = int(x)
        if col >= n:
            col = n - 1
        frac = x - col
        out[b] = col if frac < prob[col] else alias[col]
    return out


@njit(nogil=True, cache=True)
def advance(eta, ei, ej, dts, edges, clock_t, counters, sample_times,
            rows, inv_sqrt_n, rho, y, yint,
            indptr, nbr, eid, gw, gamma, gint,
            out_y, out_int, out_g):
    """Consume one block of events; return True once the horizon is reached.

    ``clock_t[0]`` is the current time, ``counters`` holds
    ``(next sample index, events applied, effective swaps)``.  The state is
    recorded at sample time ``s`` before any event at time ``>= s``.
    ``y`` and ``gamma`` are running values of the field rows and of the
    carre du champ for each gamma observable; ``yint`` and ``gint`` their
    exact time integrals over the piecewise-constant trajectory.
    """
    t = clock_t[0]
    k = counters[0]
    K = sample_times.shape[0]
    R = rows.shape[0]
    Q = gw.shape[1]
    n = eta.shape[0]
    done = False
    for b in range(dts.shape[0]):
        tn = t + dts[b]
        while k < K and sample_times[k] <= tn:
            h = sample_times[k] - t
            for r in range(R):
                yint[r] += y[r] * h
            for q in range(Q):
                if gamma[q] > 0.0:
                    gint[q] += gamma[q] * h
            t = sample_times[k]
            # resync the fields to kill incremental roundoff
            for r in range(R):
                acc = 0.0
                for i in range(n):
                    acc += rows[r, i] * (eta[i] - rho)
                y[r] = acc * inv_sqrt_n
                out_y[k, r] = y[r]
                out_int[k, r] = yint[r]
            for q in range(Q):
                out_g[k, q] = gint[q]
            k += 1
        if k >= K:
            done = True
            break
        h = tn - t
        for r in range(R):
            yint[r] += y[r] * h
        for q in range(Q):
            if gamma[q] > 0.0:
                gint[q] += gamma[q] * h
        t = tn
        e = edges[b]
        i = ei[e]
        j = ej[e]
        counters[1] += 1
        a = eta[i]
        c = eta[j]
        if a == c:
            continue
        counters[2] += 1
        # a particle moves from the occupied end to the empty end
        sgn = inv_sqrt_n if a == 1 else -inv_sqrt_n
        for r in range(R):
            y[r] += sgn * (rows[r, j] - rows[r, i])
        if Q > 0:
            for p in range(indptr[i], indptr[i + 1]):
                m = nbr[p]
                if m == j:
                    continue
                up = eta[m] == a
                for q in range(Q):
                    if up:
                        gamma[q] += gw[eid[p], q]
                    else:
                        gamma[q] -= gw[eid[p], q]
            for p in range(indptr[j], indptr[j + 1]):
                m = nbr[p]
                if m == i:
                    continue
                up = eta[m] == c
                for q in range(Q):
                    if up:
                        gamma[q] += gw[eid[p], q]
                    else:
                        gamma[q] -= gw[eid[p], q]
        eta[i] = c
        eta[j] = a
    clock_t[0] = t
    counters[0] = k
    return done
