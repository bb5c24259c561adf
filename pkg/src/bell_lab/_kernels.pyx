# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Mirrors ``_pykernels`` bit for bit."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

BACKEND = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef int LANES = 8


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _unit(uint64_t key, uint64_t i, int lane) noexcept nogil:
    cdef uint64_t ctr = i * LANES + <uint64_t>(lane + 1)
    return <double>(_mix(key + ctr * GOLDEN) >> 11) * (1.0 / 9007199254740992.0)


def round_key(seed):
    cdef uint64_t s = <uint64_t>((int(seed) + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF)
    return int(_mix(s))


def uniforms(seed, Py_ssize_t start, Py_ssize_t stop, int lanes):
    if not 0 < lanes <= LANES:
        raise ValueError(f"lanes must be in 1..{LANES}")
    cdef uint64_t key = <uint64_t>round_key(seed)
    cdef Py_ssize_t n = stop - start, r
    cdef int lane
    out = np.empty((n, lanes), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for r in range(n):
            for lane in range(lanes):
                o[r, lane] = _unit(key, <uint64_t>(start + r), lane)
    return out


cdef inline Py_ssize_t _search(const double* cdf, Py_ssize_t k, double u) noexcept nogil:
    cdef Py_ssize_t j = 0
    while j < k - 1 and u >= cdf[j]:
        j += 1
    return j


def draw_table(input_cdf, outcome_cdf, seed, Py_ssize_t start, Py_ssize_t stop):
    cdef const double[::1] icdf = np.ascontiguousarray(input_cdf, dtype=np.float64)
    cdef const double[:, ::1] ocdf = np.ascontiguousarray(outcome_cdf, dtype=np.float64)
    cdef uint64_t key = <uint64_t>round_key(seed)
    cdef Py_ssize_t n = stop - start, r, i
    cdef Py_ssize_t k_in = icdf.shape[0], k_out = ocdf.shape[1]
    inp = np.empty(n, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] vi = inp
    cdef int64_t[::1] vo = out
    with nogil:
        for r in range(n):
            i = _search(&icdf[0], k_in, _unit(key, <uint64_t>(start + r), 0))
            vi[r] = i
            vo[r] = _search(&ocdf[i, 0], k_out, _unit(key, <uint64_t>(start + r), 1))
    return inp, out


def tally_table(input_cdf, outcome_cdf, seed, Py_ssize_t start, Py_ssize_t stop):
    cdef const double[::1] icdf = np.ascontiguousarray(input_cdf, dtype=np.float64)
    cdef const double[:, ::1] ocdf = np.ascontiguousarray(outcome_cdf, dtype=np.float64)
    cdef uint64_t key = <uint64_t>round_key(seed)
    cdef Py_ssize_t r, i, j
    cdef Py_ssize_t k_in = icdf.shape[0], k_out = ocdf.shape[1]
    counts = np.zeros((k_in, k_out), dtype=np.int64)
    cdef int64_t[:, ::1] c = counts
    with nogil:
        for r in range(start, stop):
            i = _search(&icdf[0], k_in, _unit(key, <uint64_t>r, 0))
            j = _search(&ocdf[i, 0], k_out, _unit(key, <uint64_t>r, 1))
            c[i, j] += 1
    return counts


def strategy_values(coeffs, inputs, outputs, Py_ssize_t start, Py_ssize_t stop):
    cdef const double[:, ::1] f = np.ascontiguousarray(coeffs, dtype=np.float64)
    ins = [int(m) for m in inputs]
    outs = [int(o) for o in outputs]
    radix_list = [o for o, m in zip(outs, ins) for _ in range(m)]
    offset_list = list(np.cumsum([0] + ins[:-1]))
    joint_list = [list(jt) for jt in np.ndindex(*ins)]
    cdef Py_ssize_t n_parties = len(ins), n_digits = len(radix_list)
    cdef Py_ssize_t n_joint = len(joint_list)
    cdef int64_t[::1] radix = np.asarray(radix_list, dtype=np.int64)
    cdef int64_t[::1] offset = np.asarray(offset_list, dtype=np.int64)
    cdef int64_t[::1] outp = np.asarray(outs, dtype=np.int64)
    cdef int64_t[:, ::1] joint = np.asarray(joint_list, dtype=np.int64).reshape(n_joint, n_parties)
    cdef int64_t[::1] digit = np.zeros(max(n_digits, 1), dtype=np.int64)
    cdef Py_ssize_t n = stop - start, r, pos, j, p
    cdef int64_t rest, idx
    cdef double acc
    values = np.empty(n, dtype=np.float64)
    cdef double[::1] vals = values

    rest = start
    for pos in range(n_digits - 1, -1, -1):
        digit[pos] = rest % radix[pos]
        rest //= radix[pos]

    with nogil:
        for r in range(n):
            acc = 0.0
            for j in range(n_joint):
                idx = 0
                for p in range(n_parties):
                    idx = idx * outp[p] + digit[offset[p] + joint[j, p]]
                acc = acc + f[j, idx]
            vals[r] = acc
            # odometer increment, last digit least significant
            pos = n_digits - 1
            while pos >= 0:
                digit[pos] += 1
                if digit[pos] < radix[pos]:
                    break
                digit[pos] = 0
                pos -= 1
    return values
