"""Independent reference implementations used by several test modules.

Everything here is written from the model definition directly (explicit
per-person case analysis, full joint-sequence enumeration) and shares no code
with the package under test.
"""

import numpy as np


def oracle_transition(s_prev, s_cur, v_prev, v_cur, q):
    if v_cur == 0:
        return 1.0 if s_cur == 0 else 0.0
    if v_prev == 0:
        return 0.5
    return q if s_prev == s_cur else 1.0 - q


def _bit(s, n):
    return (s >> n) & 1


def _config_lik(s, p_speak, vis):
    out = 1.0
    for n in range(len(vis)):
        if vis[n] == 0:
            if _bit(s, n):
                return 0.0
        else:
            out *= p_speak[n] if _bit(s, n) else 1.0 - p_speak[n]
    return out


def joint_enumeration_marginals(p_speak_seq, vis_seq, q):
    """Filtering marginals P(S_{t,n}=1 | obs up to t) for every t, computed by
    materializing the probability of every joint state sequence of length t.

    Returns an array (T, N). Cost is O(2^(N*T)); intended for N <= 3, T <= 5.
    """
    T = len(vis_seq)
    N = len(vis_seq[0])
    S = 2 ** N

    init = np.array(
        [
            np.prod(
                [
                    (0.5 if vis_seq[0][n] else (1.0 if _bit(s, n) == 0 else 0.0))
                    for n in range(N)
                ]
            )
            for s in range(S)
        ]
    )
    liks = [
        np.array([_config_lik(s, p_speak_seq[t], vis_seq[t]) for s in range(S)])
        for t in range(T)
    ]
    transitions = []
    for t in range(1, T):
        M = np.empty((S, S))
        for sp in range(S):
            for sc in range(S):
                prob = 1.0
                for n in range(N):
                    prob *= oracle_transition(
                        _bit(sp, n), _bit(sc, n), vis_seq[t - 1][n], vis_seq[t][n], q
                    )
                M[sp, sc] = prob
        transitions.append(M)

    marginals = np.zeros((T, N))
    bitvals = np.array([[_bit(s, n) for n in range(N)] for s in range(S)], dtype=float)
    joint = init * liks[0]  # shape (S,) and growing: one axis per time step
    for t in range(T):
        if t > 0:
            joint = joint[..., :, None] * transitions[t - 1] * liks[t]
        total = joint.sum()
        # filtering marginal at the LAST axis (time t), all history enumerated
        last = joint.reshape(-1, S).sum(axis=0) / total
        marginals[t] = last @ bitvals
    return marginals


def random_filter_instance(rng, n_persons, n_steps):
    """Random speaking probabilities and a visibility pattern that always has
    at least someone plausible to look at."""
    p = rng.uniform(0.0, 1.0, (n_steps, n_persons))
    vis = rng.integers(0, 2, (n_steps, n_persons)).astype(np.uint8)
    return p, vis
