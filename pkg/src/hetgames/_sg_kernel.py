"""Compiled inner loop for stochastic-game trials.

This mirrors, expression for expression, the per-stage operations exposed
by ``sg_learners``, ``matrix_learners.empirical_average_step``,
``schedules.StepSchedule.value`` and ``rng.SplitMix64``: same evaluation
order, same left-to-right accumulations, same comparison directions. A
compiled trial is therefore bitwise identical to one stepped through the
public functions, and the test suite pins that equivalence. Change either
side only together.

The chunk layout: ``run_chunk`` plays ``n_steps`` stages starting at a
given stage index and then folds the final stage's pending experience
before returning, so a caller logging between chunks sees a snapshot in
which every completed stage has been absorbed (visit counters sum to the
stage index). Re-entering with the pending flag cleared continues the
trajectory exactly where an unchunked run would be.

RNG state crosses the boundary as a one-element uint64 array: scalar
boxing through Python would round-trip the value through a lossy
conversion, the array does not.
"""

import math

import numpy as np
from numba import njit

from .rng import _MIX1, _MIX2, GOLDEN

_GOLDEN = np.uint64(GOLDEN)
_M1 = np.uint64(_MIX1)
_M2 = np.uint64(_MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.1102230246251565e-16


@njit(cache=True)
def _uniform(st):
    st[0] = st[0] + _GOLDEN
    z = st[0]
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return (z >> _S11) * _INV53


@njit(cache=True)
def _categorical(st, probs):
    u = _uniform(st)
    acc = 0.0
    n = probs.shape[0]
    for i in range(n):
        acc += probs[i]
        if u < acc:
            return i
    return n - 1


@njit(cache=True)
def _sched(scale, expo, t):
    v = 1.0 / (scale * (t + 1)) ** expo
    return v if v < 1.0 else 1.0


@njit(cache=True)
def run_chunk(
    r1,
    r2,
    kern,
    gamma,
    fixed1,
    theta1,
    tau1,
    knows1,
    a_scale1,
    a_exp1,
    b_scale1,
    b_exp1,
    strat1,
    fixed2,
    theta2,
    tau2,
    knows2,
    a_scale2,
    a_exp2,
    b_scale2,
    b_exp2,
    strat2,
    avg_scale1,
    avg_exp1,
    avg_scale2,
    avg_exp2,
    q1,
    q2,
    v1,
    v2,
    counters,
    avg1,
    avg2,
    cur,
    ipend,
    fpend,
    rng_state,
    n_steps,
):
    n_states = v1.shape[0]
    n1 = q1.shape[1]
    n2 = q2.shape[1]
    mu1 = np.empty(n1)
    mu2 = np.empty(n2)

    for step in range(n_steps + 1):
        # fold the pending stage, if any (the +1 pass folds the last one)
        if ipend[0] == 1:
            ps = ipend[1]
            pa1 = ipend[2]
            pa2 = ipend[3]
            t = counters[ps]
            csn = cur[0]

            if fixed1 == 0:
                alpha = _sched(a_scale1, a_exp1, t)
                beta = _sched(b_scale1, b_exp1, t)
                # response and value target from the pre-update estimates
                if tau1 == 0.0:
                    best = 0
                    top = q1[ps, 0]
                    for a in range(1, n1):
                        if q1[ps, a] > top:
                            top = q1[ps, a]
                            best = a
                    vt = q1[ps, best]
                else:
                    top = q1[ps, 0]
                    for a in range(1, n1):
                        if q1[ps, a] > top:
                            top = q1[ps, a]
                    z = 0.0
                    for a in range(n1):
                        mu1[a] = math.exp((q1[ps, a] - top) / tau1)
                        z += mu1[a]
                    for a in range(n1):
                        mu1[a] = mu1[a] / z
                    vt = 0.0
                    for a in range(n1):
                        vt += mu1[a] * q1[ps, a]
                if ipend[4] == 1 and knows1 == 1:
                    for a in range(n1):
                        cont = 0.0
                        for sp in range(n_states):
                            cont += kern[ps, a, pa2, sp] * v1[sp]
                        tgt = r1[ps, a, pa2] + gamma * cont
                        q1[ps, a] = q1[ps, a] + alpha * (tgt - q1[ps, a])
                else:
                    stp = alpha / mu1[pa1]
                    if stp > 1.0:
                        stp = 1.0
                    tgt = fpend[0] + gamma * v1[csn]
                    q1[ps, pa1] = q1[ps, pa1] + stp * (tgt - q1[ps, pa1])
                v1[ps] = v1[ps] + beta * (vt - v1[ps])

            if fixed2 == 0:
                alpha = _sched(a_scale2, a_exp2, t)
                beta = _sched(b_scale2, b_exp2, t)
                if tau2 == 0.0:
                    best = 0
                    top = q2[ps, 0]
                    for a in range(1, n2):
                        if q2[ps, a] > top:
                            top = q2[ps, a]
                            best = a
                    vt = q2[ps, best]
                else:
                    top = q2[ps, 0]
                    for a in range(1, n2):
                        if q2[ps, a] > top:
                            top = q2[ps, a]
                    z = 0.0
                    for a in range(n2):
                        mu2[a] = math.exp((q2[ps, a] - top) / tau2)
                        z += mu2[a]
                    for a in range(n2):
                        mu2[a] = mu2[a] / z
                    vt = 0.0
                    for a in range(n2):
                        vt += mu2[a] * q2[ps, a]
                if ipend[5] == 1 and knows2 == 1:
                    for a in range(n2):
                        cont = 0.0
                        for sp in range(n_states):
                            cont += kern[ps, pa1, a, sp] * v2[sp]
                        tgt = r2[ps, a, pa1] + gamma * cont
                        q2[ps, a] = q2[ps, a] + alpha * (tgt - q2[ps, a])
                else:
                    stp = alpha / mu2[pa2]
                    if stp > 1.0:
                        stp = 1.0
                    tgt = fpend[1] + gamma * v2[csn]
                    q2[ps, pa2] = q2[ps, pa2] + stp * (tgt - q2[ps, pa2])
                v2[ps] = v2[ps] + beta * (vt - v2[ps])

            counters[ps] = t + 1
            ipend[0] = 0

        if step == n_steps:
            break

        # play one stage; draw order is the determinism contract:
        # obs1, obs2, act1, act2, next state
        s = cur[0]
        t_s = counters[s]

        obs1 = 0
        if fixed1 == 0:
            if theta1 >= 1.0:
                obs1 = 1
            elif theta1 > 0.0:
                if _uniform(rng_state) < theta1:
                    obs1 = 1
        obs2 = 0
        if fixed2 == 0:
            if theta2 >= 1.0:
                obs2 = 1
            elif theta2 > 0.0:
                if _uniform(rng_state) < theta2:
                    obs2 = 1

        if fixed1 == 1:
            a1 = _categorical(rng_state, strat1[s])
        elif tau1 == 0.0:
            a1 = 0
            top = q1[s, 0]
            for a in range(1, n1):
                if q1[s, a] > top:
                    top = q1[s, a]
                    a1 = a
        else:
            top = q1[s, 0]
            for a in range(1, n1):
                if q1[s, a] > top:
                    top = q1[s, a]
            z = 0.0
            for a in range(n1):
                mu1[a] = math.exp((q1[s, a] - top) / tau1)
                z += mu1[a]
            for a in range(n1):
                mu1[a] = mu1[a] / z
            a1 = _categorical(rng_state, mu1)

        if fixed2 == 1:
            a2 = _categorical(rng_state, strat2[s])
        elif tau2 == 0.0:
            a2 = 0
            top = q2[s, 0]
            for a in range(1, n2):
                if q2[s, a] > top:
                    top = q2[s, a]
                    a2 = a
        else:
            top = q2[s, 0]
            for a in range(1, n2):
                if q2[s, a] > top:
                    top = q2[s, a]
            z = 0.0
            for a in range(n2):
                mu2[a] = math.exp((q2[s, a] - top) / tau2)
                z += mu2[a]
            for a in range(n2):
                mu2[a] = mu2[a] / z
            a2 = _categorical(rng_state, mu2)

        stp1 = _sched(avg_scale1, avg_exp1, t_s)
        for a in range(n1):
            one = 1.0 if a == a1 else 0.0
            avg1[s, a] = avg1[s, a] + stp1 * (one - avg1[s, a])
        stp2 = _sched(avg_scale2, avg_exp2, t_s)
        for a in range(n2):
            one = 1.0 if a == a2 else 0.0
            avg2[s, a] = avg2[s, a] + stp2 * (one - avg2[s, a])

        rr1 = r1[s, a1, a2]
        rr2 = r2[s, a2, a1]
        sn = _categorical(rng_state, kern[s, a1, a2])

        ipend[0] = 1
        ipend[1] = s
        ipend[2] = a1
        ipend[3] = a2
        ipend[4] = obs1
        ipend[5] = obs2
        fpend[0] = rr1
        fpend[1] = rr2
        cur[0] = sn
