"""Pure-Python hot loops. Mirrors ``_ckernels.pyx`` draw for draw.

Any change to the order of random draws or to floating point expression order
here must be made in the Cython module as well; the backends are tested for
bit-identical output.
"""

from __future__ import annotations

import numpy as np

from .rng import RngStream

BACKEND = "python"
_TWO_NEG_53 = 1.0 / 9007199254740992.0


def _invert(u, cum, fallback):
    for j in range(len(cum)):
        if u < cum[j]:
            return j
    return fallback


def _argmax_box(row, sl, wl, wc, mp):
    """First maximum of a Q row restricted to draws <= (sl, wl)."""
    box = row.reshape(-1, wc + 1, mp + 1)[: sl + 1, : wl + 1, :]
    k = int(np.argmax(box))
    m1 = mp + 1
    rest, m = divmod(k, m1)
    sp, wp = divmod(rest, wl + 1)
    return sp, wp, m


def _max_box(row, sl, wl, wc, mp):
    return float(row.reshape(-1, wc + 1, mp + 1)[: sl + 1, : wl + 1, :].max())


def _env(model, rng, d, sl, wl, sp, wp):
    """Generation draws then demand draw; returns (gs, gw, d', sl', wl')."""
    raw = rng.next_uint64
    gs = _invert((raw() >> 11) * _TWO_NEG_53, model.solar_cdf, len(model.solar_cdf))
    gw = _invert((raw() >> 11) * _TWO_NEG_53, model.wind_cdf, len(model.wind_cdf))
    d2 = _invert((raw() >> 11) * _TWO_NEG_53, model.demand_cum[d], model.demand_fallback[d])
    sl2 = min(model.sc, sl - sp + gs)
    wl2 = min(model.wc, wl - wp + gw)
    return gs, gw, d2, sl2, wl2


def train(model, q, visits, rng: RngStream, state, steps, epsilon, alpha0, omega, decay,
          log_every, log_step, log_avg, log_alpha, transcript=None):
    """Run ε-greedy Q-learning in place on ``q`` and ``visits``.

    Returns ``(final_state_index, cumulative_signed_deficit)``.
    """
    sc, wc, mp = model.sc, model.wc, model.mp
    ns_w = wc + 1
    ns_sw = (sc + 1) * ns_w
    m1 = mp + 1
    levels = model.demand_levels
    rewards = model.rewards
    gamma = model.gamma
    raw = rng.next_uint64
    d, rest = divmod(state, ns_sw)
    sl, wl = divmod(rest, ns_w)
    cum_def = 0
    n_log = 0
    alpha = alpha0
    for t in range(steps):
        s = (d * (sc + 1) + sl) * ns_w + wl
        u = (raw() >> 11) * _TWO_NEG_53
        if u < epsilon:
            nfeas = (sl + 1) * (wl + 1) * m1
            k = int((raw() >> 11) * _TWO_NEG_53 * nfeas)
            rest, m = divmod(k, m1)
            sp, wp = divmod(rest, wl + 1)
        else:
            sp, wp, m = _argmax_box(q[s], sl, wl, wc, mp)
        a = (sp * ns_w + wp) * m1 + m
        gs, gw, d2, sl2, wl2 = _env(model, rng, d, sl, wl, sp, wp)
        r = float(rewards[d, sp + wp, m])
        s2 = (d2 * (sc + 1) + sl2) * ns_w + wl2
        n = int(visits[s, a]) + 1
        visits[s, a] = n
        if decay:
            alpha = alpha0 / float(n) ** omega
        q_sa = float(q[s, a])
        target = r + gamma * _max_box(q[s2], sl2, wl2, wc, mp)
        q[s, a] = q_sa + alpha * (target - q_sa)
        deficit = int(levels[d]) - (sp + wp + m)
        cum_def += deficit
        if transcript is not None:
            transcript.append((s, a, r, deficit, gs, gw, s2))
        if log_every > 0 and (t + 1) % log_every == 0:
            log_step[n_log] = t + 1
            log_avg[n_log] = cum_def / (t + 1)
            log_alpha[n_log] = alpha
            n_log += 1
        d, sl, wl = d2, sl2, wl2
    return (d * (sc + 1) + sl) * ns_w + wl, cum_def


def evaluate(model, policy, rng: RngStream, state, steps):
    """Roll out a fixed policy, or the no-storage baseline when ``policy`` is None.

    Returns ``(sum_signed, sum_squared, sum_main, final_state_index)``.
    """
    sc, wc, mp = model.sc, model.wc, model.mp
    ns_w = wc + 1
    ns_sw = (sc + 1) * ns_w
    m1 = mp + 1
    levels = model.demand_levels
    raw = rng.next_uint64
    d, rest = divmod(state, ns_sw)
    sl, wl = divmod(rest, ns_w)
    sum_def = sum_sq = sum_main = 0
    for _ in range(steps):
        demand = int(levels[d])
        if policy is None:
            gs = _invert((raw() >> 11) * _TWO_NEG_53, model.solar_cdf, len(model.solar_cdf))
            gw = _invert((raw() >> 11) * _TWO_NEG_53, model.wind_cdf, len(model.wind_cdf))
            m = max(0, min(mp, demand - (gs + gw)))
            supplied = gs + gw + m
            d = _invert((raw() >> 11) * _TWO_NEG_53, model.demand_cum[d], model.demand_fallback[d])
        else:
            a = int(policy[(d * (sc + 1) + sl) * ns_w + wl])
            rest, m = divmod(a, m1)
            sp, wp = divmod(rest, ns_w)
            supplied = sp + wp + m
            _, _, d, sl, wl = _env(model, rng, d, sl, wl, sp, wp)
        deficit = demand - supplied
        sum_def += deficit
        sum_sq += deficit * deficit
        sum_main += m
    return sum_def, sum_sq, sum_main, (d * (sc + 1) + sl) * ns_w + wl


def sample_transitions(model, state, action, n, rng: RngStream, counts):
    """Accumulate next-state counts of ``n`` independent steps from one (s, a)."""
    sc, wc, mp = model.sc, model.wc, model.mp
    ns_w = wc + 1
    ns_sw = (sc + 1) * ns_w
    d, rest = divmod(state, ns_sw)
    sl, wl = divmod(rest, ns_w)
    rest, _ = divmod(action, mp + 1)
    sp, wp = divmod(rest, ns_w)
    for _ in range(n):
        _, _, d2, sl2, wl2 = _env(model, rng, d, sl, wl, sp, wp)
        counts[(d2 * (sc + 1) + sl2) * ns_w + wl2] += 1
