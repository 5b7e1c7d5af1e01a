# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for best-response sweeps; mirrors ``_core_py``."""

from libc.stdint cimport int64_t, uint8_t
from libc.stdlib cimport malloc, free

cdef double EPS = 1e-9

cdef enum:
    EVEN_OUT = 0
    SCORE = 1


cdef inline double _option_value(int model, Py_ssize_t i, int64_t t, int64_t[::1] profile,
                                 int64_t* counts, double pen, double[::1] rl,
                                 double[::1] rf, double[::1] beta,
                                 double[::1] score) nogil:
    cdef Py_ssize_t n_veh = profile.shape[0]
    cdef Py_ssize_t k
    cdef int64_t n = counts[t] + 1 - (1 if profile[i] == t else 0)
    cdef bint lowest
    cdef Py_ssize_t m
    cdef double sum_rf, min_gap, g, before, after, gi
    if model == EVEN_OUT:
        if n > 1:
            return (rl[i] + (n - 1) * rf[i]) / n - pen
        return -pen
    if model == SCORE:
        if n <= 1:
            return -pen
        lowest = True
        for k in range(n_veh):
            if k != i and profile[k] == t and score[k] < score[i]:
                lowest = False
                break
        if lowest:
            return rl[i] - pen + beta[i] * (n - 1) / n
        return rf[i] - pen - beta[i] / n
    m = 0
    sum_rf = 0.0
    min_gap = 0.0
    for k in range(n_veh):
        if k != i and profile[k] == t:
            g = rf[k] - rl[k]
            if m == 0 or g < min_gap:
                min_gap = g
            sum_rf += rf[k]
            m += 1
    if m == 0:
        return -pen
    before = sum_rf - min_gap if m > 1 else 0.0
    gi = rf[i] - rl[i]
    after = sum_rf + rf[i] - (min_gap if min_gap < gi else gi)
    return after - before - pen


def departure_sweep(int model, int64_t[::1] profile, int64_t[::1] opt_ptr,
                    int64_t[::1] opt_time, double[::1] opt_pen, double[::1] rl,
                    double[::1] rf, double[::1] beta, double[::1] score,
                    Py_ssize_t n_times):
    """One in-place best-response sweep in vehicle order; returns 1 if anything moved."""
    cdef Py_ssize_t n_veh = profile.shape[0]
    cdef Py_ssize_t i, o, lo, hi, width = 0
    cdef int64_t current, choice
    cdef double best, cur_value
    cdef bint have_cur
    cdef int changed = 0
    for i in range(n_veh):
        if opt_ptr[i + 1] - opt_ptr[i] > width:
            width = opt_ptr[i + 1] - opt_ptr[i]
    cdef int64_t* counts = <int64_t*> malloc(max(n_times, 1) * sizeof(int64_t))
    cdef double* values = <double*> malloc(max(width, 1) * sizeof(double))
    if counts == NULL or values == NULL:
        free(counts)
        free(values)
        raise MemoryError()
    try:
        with nogil:
            for o in range(n_times):
                counts[o] = 0
            for i in range(n_veh):
                counts[profile[i]] += 1
            for i in range(n_veh):
                lo = opt_ptr[i]
                hi = opt_ptr[i + 1]
                best = 0.0
                for o in range(lo, hi):
                    values[o - lo] = _option_value(model, i, opt_time[o], profile, counts,
                                                   opt_pen[o], rl, rf, beta, score)
                    if o == lo or values[o - lo] > best:
                        best = values[o - lo]
                current = profile[i]
                choice = current
                have_cur = False
                cur_value = 0.0
                for o in range(lo, hi):
                    if opt_time[o] == current:
                        have_cur = True
                        cur_value = values[o - lo]
                if not have_cur or cur_value < best - EPS:
                    for o in range(lo, hi):
                        if values[o - lo] >= best - EPS:
                            choice = opt_time[o]
                            break
                if choice != current:
                    counts[current] -= 1
                    counts[choice] += 1
                    profile[i] = choice
                    changed = 1
    finally:
        free(counts)
        free(values)
    return changed


cdef inline Py_ssize_t _choice(Py_ssize_t j, uint8_t[::1] is_seller, double[::1] price,
                               uint8_t[:, ::1] reach, double[:, ::1] gain,
                               int64_t[::1] order) nogil:
    cdef Py_ssize_t best = -1
    cdef double best_value = 0.0
    cdef double v
    cdef Py_ssize_t a, s
    for a in range(order.shape[0]):
        s = order[a]
        if is_seller[s] and reach[j, s]:
            v = gain[j, s] - price[s]
            if v > best_value + EPS:
                best = s
                best_value = v
    return best


def buyer_choices(uint8_t[::1] is_seller, double[::1] price, uint8_t[:, ::1] reach,
                  double[:, ::1] gain, int64_t[::1] order, int64_t[::1] out):
    """Fill ``out[j]`` with the seller index buyer ``j`` follows, ``-1`` otherwise."""
    cdef Py_ssize_t j
    with nogil:
        for j in range(is_seller.shape[0]):
            if is_seller[j]:
                out[j] = -1
            else:
                out[j] = _choice(j, is_seller, price, reach, gain, order)


def market_sweep(uint8_t[::1] is_seller, double[::1] price, int64_t[::1] price_idx,
                 int64_t[::1] grid_ptr, double[::1] grid_vals, uint8_t[:, ::1] reach,
                 double[:, ::1] gain, int64_t[::1] order, double[::1] rl):
    """One in-place sweep of seller best responses in index order; returns 1 if any price moved."""
    cdef Py_ssize_t n = is_seller.shape[0]
    cdef Py_ssize_t i, j, k, best_k
    cdef int64_t count
    cdef double value, best_value
    cdef int changed = 0
    with nogil:
        for i in range(n):
            if not is_seller[i]:
                continue
            best_k = -1
            best_value = 0.0
            for k in range(grid_ptr[i], grid_ptr[i + 1]):
                price[i] = grid_vals[k]
                count = 0
                for j in range(n):
                    if not is_seller[j] and reach[j, i]:
                        if _choice(j, is_seller, price, reach, gain, order) == i:
                            count += 1
                value = rl[i] + count * grid_vals[k] if count > 0 else 0.0
                if best_k < 0 or value > best_value + EPS:
                    best_k = k
                    best_value = value
            price[i] = grid_vals[best_k]
            if best_k != price_idx[i]:
                price_idx[i] = best_k
                changed = 1
    return changed
