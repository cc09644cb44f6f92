"""Compiled inner loops for the Wigner Delta recursion and the transform contractions.

Every function here has a numpy twin in :mod:`spinconv._fallback` with the same
signature and output layout; :mod:`spinconv.backend` picks one at import.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, ldexp

cnp.import_array()


cdef inline Py_ssize_t _offset(Py_ssize_t l) nogil:
    return l * (2 * l - 1) * (2 * l + 1) // 3


def delta_packed(int l_max):
    """Delta^l_{k,m} = d^l_{k,m}(pi/2) for 0 <= l <= l_max, packed degree by degree.

    Degree l occupies a row-major (2l+1, 2l+1) block starting at l(2l-1)(2l+1)/3,
    indexed [k + l, m + l].
    """
    if l_max < 0:
        raise ValueError("l_max must be non-negative")
    cdef Py_ssize_t total = _offset(l_max + 1)
    out_arr = np.zeros(total, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t l, k, m, n, np1, np2, o, o1, o2
    cdef double den, a, b, kk, mm, lf
    out[0] = 1.0
    with nogil:
        for l in range(1, l_max + 1):
            n = 2 * l + 1
            np1 = 2 * l - 1
            np2 = 2 * l - 3
            o = _offset(l)
            o1 = _offset(l - 1)
            o2 = _offset(l - 2) if l >= 2 else 0
            lf = <double> l
            # interior |k|, |m| <= l-1: three-term recursion in l with cos(pi/2) = 0
            for k in range(-(l - 1), l):
                kk = <double> k
                for m in range(-(l - 1), l):
                    mm = <double> m
                    den = sqrt((lf * lf - kk * kk) * (lf * lf - mm * mm))
                    if l >= 2:
                        a = -(2.0 * lf - 1.0) * kk * mm / ((lf - 1.0) * den)
                        a = a * out[o1 + (k + l - 1) * np1 + (m + l - 1)]
                        if k > -(l - 1) and k < l - 1 and m > -(l - 1) and m < l - 1:
                            b = lf * sqrt(((lf - 1.0) * (lf - 1.0) - kk * kk)
                                          * ((lf - 1.0) * (lf - 1.0) - mm * mm)) / ((lf - 1.0) * den)
                            a = a - b * out[o2 + (k + l - 2) * np2 + (m + l - 2)]
                        out[o + (k + l) * n + (m + l)] = a
                    else:
                        out[o + (k + l) * n + (m + l)] = 0.0
            # row k = l
            for m in range(-(l - 1), l):
                mm = <double> m
                out[o + (2 * l) * n + (m + l)] = (
                    -0.5 * sqrt(2.0 * lf * (2.0 * lf - 1.0) / ((lf + mm) * (lf - mm)))
                    * out[o1 + (2 * l - 2) * np1 + (m + l - 1)]
                )
            out[o + (2 * l) * n + 2 * l] = ldexp(1.0, -l)
            out[o + (2 * l) * n] = ldexp(1.0, -l)
            # column m = l: d_{k,l} = (-1)^{k-l} d_{l,k}
            for k in range(-l, l + 1):
                if (k - l) % 2 == 0:
                    out[o + (k + l) * n + 2 * l] = out[o + (2 * l) * n + (k + l)]
                else:
                    out[o + (k + l) * n + 2 * l] = -out[o + (2 * l) * n + (k + l)]
            # row k = -l: d_{-l,m} = d_{-m,l};  column m = -l: d_{k,-l} = d_{l,-k}
            for m in range(-l, l + 1):
                out[o + m + l] = out[o + (l - m) * n + 2 * l]
            for k in range(-l, l + 1):
                out[o + (k + l) * n] = out[o + (2 * l) * n + (l - k)]
    return out_arr


def contract_forward(const double[:, :, ::1] plan, const double complex[:, :, ::1] tori, int spin):
    """out[c, l, m] = sum_k plan[l, m, k] * tori[c, m, k] over the nonzero triangle.

    plan is (B, 2B-1, 2B-1) indexed [l, m+B-1, k+B-1]; tori is (C, 2B-1, 2B-1)
    indexed [c, m+B-1, k+B-1]. Returns (C, B, 2B-1).
    """
    cdef Py_ssize_t B = plan.shape[0]
    cdef Py_ssize_t M = 2 * B - 1
    cdef Py_ssize_t C = tori.shape[0]
    if plan.shape[1] != M or plan.shape[2] != M:
        raise ValueError("plan must have shape (B, 2B-1, 2B-1)")
    if tori.shape[1] != M or tori.shape[2] != M:
        raise ValueError("torus integrals must have shape (C, 2B-1, 2B-1)")
    out_arr = np.zeros((C, B, M), dtype=np.complex128)
    cdef double[:, :, ::1] out = out_arr.view(np.float64).reshape(C, B, 2 * M)
    cdef const double[:, :, ::1] t = np.asarray(tori).view(np.float64).reshape(C, M, 2 * M)
    cdef Py_ssize_t c, mi, l, ki, lo, aspin = abs(spin), am
    cdef double re, im, p
    with nogil:
        for c in range(C):
            for mi in range(M):
                am = mi - (B - 1)
                if am < 0:
                    am = -am
                lo = am if am > aspin else aspin
                for l in range(lo, B):
                    re = 0.0
                    im = 0.0
                    for ki in range(B - 1 - l, B + l):
                        p = plan[l, mi, ki]
                        re = re + p * t[c, mi, 2 * ki]
                        im = im + p * t[c, mi, 2 * ki + 1]
                    out[c, l, 2 * mi] = re
                    out[c, l, 2 * mi + 1] = im
    return out_arr


def contract_inverse(const double[:, :, ::1] plan, const double complex[:, :, ::1] coeffs, int spin):
    """out[c, m, k] = sum_l plan[l, m, k] * coeffs[c, l, m] over the nonzero triangle.

    coeffs is (C, B, 2B-1) indexed [c, l, m+B-1]. Returns (C, 2B-1, 2B-1) indexed
    [c, m+B-1, k+B-1].
    """
    cdef Py_ssize_t B = plan.shape[0]
    cdef Py_ssize_t M = 2 * B - 1
    cdef Py_ssize_t C = coeffs.shape[0]
    if plan.shape[1] != M or plan.shape[2] != M:
        raise ValueError("plan must have shape (B, 2B-1, 2B-1)")
    if coeffs.shape[1] != B or coeffs.shape[2] != M:
        raise ValueError("coefficients must have shape (C, B, 2B-1)")
    out_arr = np.zeros((C, M, M), dtype=np.complex128)
    cdef double[:, :, ::1] out = out_arr.view(np.float64).reshape(C, M, 2 * M)
    cdef const double[:, :, ::1] f = np.asarray(coeffs).view(np.float64).reshape(C, B, 2 * M)
    cdef Py_ssize_t c, mi, l, ki, lo, aspin = abs(spin), am
    cdef double re, im, p
    with nogil:
        for c in range(C):
            for mi in range(M):
                am = mi - (B - 1)
                if am < 0:
                    am = -am
                lo = am if am > aspin else aspin
                for l in range(lo, B):
                    re = f[c, l, 2 * mi]
                    im = f[c, l, 2 * mi + 1]
                    if re == 0.0 and im == 0.0:
                        continue
                    for ki in range(B - 1 - l, B + l):
                        p = plan[l, mi, ki]
                        out[c, mi, 2 * ki] += p * re
                        out[c, mi, 2 * ki + 1] += p * im
    return out_arr
