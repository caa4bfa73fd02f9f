# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Must stay draw-for-draw identical to ``_pykernels.py``."""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport pow
from libc.stdint cimport int64_t, uint64_t
from numpy.random cimport bitgen_t

BACKEND = "cython"

cdef double TWO_NEG_53 = 1.0 / 9007199254740992.0


cdef inline double _uniform(bitgen_t* rng) noexcept nogil:
    return <double>(rng.next_uint64(rng.state) >> 11) * TWO_NEG_53


cdef inline Py_ssize_t _invert(double u, const double[:] cum, Py_ssize_t fallback) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(cum.shape[0]):
        if u < cum[j]:
            return j
    return fallback


cdef bitgen_t* _bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef struct Dims:
    Py_ssize_t sc, wc, mp


cdef inline Py_ssize_t _argmax_box(const double[:, :] q, Py_ssize_t s, Py_ssize_t sl,
                                   Py_ssize_t wl, Dims dm) noexcept nogil:
    cdef Py_ssize_t sp, wp, m, base, best = -1
    cdef double v, best_v = 0.0
    for sp in range(sl + 1):
        for wp in range(wl + 1):
            base = (sp * (dm.wc + 1) + wp) * (dm.mp + 1)
            for m in range(dm.mp + 1):
                v = q[s, base + m]
                if best < 0 or v > best_v:
                    best_v = v
                    best = base + m
    return best


cdef inline double _max_box(const double[:, :] q, Py_ssize_t s, Py_ssize_t sl,
                            Py_ssize_t wl, Dims dm) noexcept nogil:
    cdef Py_ssize_t sp, wp, m, base
    cdef bint first = True
    cdef double v, best_v = 0.0
    for sp in range(sl + 1):
        for wp in range(wl + 1):
            base = (sp * (dm.wc + 1) + wp) * (dm.mp + 1)
            for m in range(dm.mp + 1):
                v = q[s, base + m]
                if first or v > best_v:
                    best_v = v
                    first = False
    return best_v


def train(model, double[:, :] q, int64_t[:, :] visits, rng, Py_ssize_t state,
          Py_ssize_t steps, double epsilon, double alpha0, double omega, bint decay,
          Py_ssize_t log_every, int64_t[:] log_step, double[:] log_avg, double[:] log_alpha,
          transcript=None):
    if transcript is not None:
        raise ValueError("transcripts are only recorded by the Python backend")
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Dims dm
    dm.sc = model.sc
    dm.wc = model.wc
    dm.mp = model.mp
    cdef const int64_t[:] levels = model.demand_levels
    cdef const double[:, :] demand_cum = model.demand_cum
    cdef const int64_t[:] demand_fallback = model.demand_fallback
    cdef const double[:] solar_cdf = model.solar_cdf
    cdef const double[:] wind_cdf = model.wind_cdf
    cdef const double[:, :, :] rewards = model.rewards
    cdef double gamma = model.gamma
    cdef Py_ssize_t ns_w = dm.wc + 1, m1 = dm.mp + 1
    cdef Py_ssize_t ns_sw = (dm.sc + 1) * ns_w
    cdef Py_ssize_t d = state // ns_sw
    cdef Py_ssize_t sl = (state % ns_sw) // ns_w
    cdef Py_ssize_t wl = state % ns_w
    cdef Py_ssize_t t, s, s2, a, k, nfeas, sp, wp, m, rest, gs, gw, d2, sl2, wl2
    cdef Py_ssize_t n_log = 0
    cdef int64_t cum_def = 0, n
    cdef double u, r, q_sa, target, alpha = alpha0
    with nogil:
        for t in range(steps):
            s = (d * (dm.sc + 1) + sl) * ns_w + wl
            u = _uniform(bg)
            if u < epsilon:
                nfeas = (sl + 1) * (wl + 1) * m1
                k = <Py_ssize_t>(_uniform(bg) * nfeas)
                m = k % m1
                rest = k // m1
                wp = rest % (wl + 1)
                sp = rest // (wl + 1)
                a = (sp * ns_w + wp) * m1 + m
            else:
                a = _argmax_box(q, s, sl, wl, dm)
                m = a % m1
                rest = a // m1
                wp = rest % ns_w
                sp = rest // ns_w
            gs = _invert(_uniform(bg), solar_cdf, solar_cdf.shape[0])
            gw = _invert(_uniform(bg), wind_cdf, wind_cdf.shape[0])
            d2 = _invert(_uniform(bg), demand_cum[d], demand_fallback[d])
            sl2 = sl - sp + gs
            if sl2 > dm.sc:
                sl2 = dm.sc
            wl2 = wl - wp + gw
            if wl2 > dm.wc:
                wl2 = dm.wc
            r = rewards[d, sp + wp, m]
            s2 = (d2 * (dm.sc + 1) + sl2) * ns_w + wl2
            n = visits[s, a] + 1
            visits[s, a] = n
            if decay:
                alpha = alpha0 / pow(<double>n, omega)
            q_sa = q[s, a]
            target = r + gamma * _max_box(q, s2, sl2, wl2, dm)
            q[s, a] = q_sa + alpha * (target - q_sa)
            cum_def += levels[d] - (sp + wp + m)
            if log_every > 0 and (t + 1) % log_every == 0:
                log_step[n_log] = t + 1
                log_avg[n_log] = <double>cum_def / <double>(t + 1)
                log_alpha[n_log] = alpha
                n_log += 1
            d = d2
            sl = sl2
            wl = wl2
    return (d * (dm.sc + 1) + sl) * ns_w + wl, cum_def


def evaluate(model, policy, rng, Py_ssize_t state, Py_ssize_t steps):
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Dims dm
    dm.sc = model.sc
    dm.wc = model.wc
    dm.mp = model.mp
    cdef const int64_t[:] levels = model.demand_levels
    cdef const double[:, :] demand_cum = model.demand_cum
    cdef const int64_t[:] demand_fallback = model.demand_fallback
    cdef const double[:] solar_cdf = model.solar_cdf
    cdef const double[:] wind_cdf = model.wind_cdf
    cdef bint baseline = policy is None
    cdef const int64_t[:] pi
    if not baseline:
        pi = policy
    cdef Py_ssize_t ns_w = dm.wc + 1, m1 = dm.mp + 1
    cdef Py_ssize_t ns_sw = (dm.sc + 1) * ns_w
    cdef Py_ssize_t d = state // ns_sw
    cdef Py_ssize_t sl = (state % ns_sw) // ns_w
    cdef Py_ssize_t wl = state % ns_w
    cdef Py_ssize_t t, a, sp, wp, m, rest, gs, gw
    cdef int64_t demand, supplied, deficit
    cdef int64_t sum_def = 0, sum_sq = 0, sum_main = 0
    with nogil:
        for t in range(steps):
            demand = levels[d]
            if baseline:
                gs = _invert(_uniform(bg), solar_cdf, solar_cdf.shape[0])
                gw = _invert(_uniform(bg), wind_cdf, wind_cdf.shape[0])
                m = demand - (gs + gw)
                if m > dm.mp:
                    m = dm.mp
                if m < 0:
                    m = 0
                supplied = gs + gw + m
                d = _invert(_uniform(bg), demand_cum[d], demand_fallback[d])
            else:
                a = pi[(d * (dm.sc + 1) + sl) * ns_w + wl]
                m = a % m1
                rest = a // m1
                wp = rest % ns_w
                sp = rest // ns_w
                supplied = sp + wp + m
                gs = _invert(_uniform(bg), solar_cdf, solar_cdf.shape[0])
                gw = _invert(_uniform(bg), wind_cdf, wind_cdf.shape[0])
                d = _invert(_uniform(bg), demand_cum[d], demand_fallback[d])
                sl = sl - sp + gs
                if sl > dm.sc:
                    sl = dm.sc
                wl = wl - wp + gw
                if wl > dm.wc:
                    wl = dm.wc
            deficit = demand - supplied
            sum_def += deficit
            sum_sq += deficit * deficit
            sum_main += m
    return sum_def, sum_sq, sum_main, (d * (dm.sc + 1) + sl) * ns_w + wl


def sample_transitions(model, Py_ssize_t state, Py_ssize_t action, Py_ssize_t n, rng,
                       int64_t[:] counts):
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t sc = model.sc, wc = model.wc, mp = model.mp
    cdef const double[:, :] demand_cum = model.demand_cum
    cdef const int64_t[:] demand_fallback = model.demand_fallback
    cdef const double[:] solar_cdf = model.solar_cdf
    cdef const double[:] wind_cdf = model.wind_cdf
    cdef Py_ssize_t ns_w = wc + 1
    cdef Py_ssize_t ns_sw = (sc + 1) * ns_w
    cdef Py_ssize_t d = state // ns_sw
    cdef Py_ssize_t sl = (state % ns_sw) // ns_w
    cdef Py_ssize_t wl = state % ns_w
    cdef Py_ssize_t rest = action // (mp + 1)
    cdef Py_ssize_t wp = rest % ns_w
    cdef Py_ssize_t sp = rest // ns_w
    cdef Py_ssize_t i, gs, gw, d2, sl2, wl2
    with nogil:
        for i in range(n):
            gs = _invert(_uniform(bg), solar_cdf, solar_cdf.shape[0])
            gw = _invert(_uniform(bg), wind_cdf, wind_cdf.shape[0])
            d2 = _invert(_uniform(bg), demand_cum[d], demand_fallback[d])
            sl2 = sl - sp + gs
            if sl2 > sc:
                sl2 = sc
            wl2 = wl - wp + gw
            if wl2 > wc:
                wl2 = wc
            counts[(d2 * (sc + 1) + sl2) * ns_w + wl2] += 1
