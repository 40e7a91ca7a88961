# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Rademacher sign-sum kernel (Gray-code enumeration)."""
from libc.math cimport pow, sqrt, fabs
from libc.stdlib cimport malloc, free

cdef extern from "complex.h":
    double cabs(double complex) nogil

# rebuild the running sum from scratch this often to bound drift
cdef Py_ssize_t RESYNC = 4096


cdef inline double _norm_pow(double complex *v, Py_ssize_t D, double p, double q,
                             double r, Py_ssize_t block, double weight) nogil:
    cdef Py_ssize_t b = 0, i
    cdef double inner, total = 0.0, a
    while b < D:
        inner = 0.0
        if q == 2.0:
            for i in range(b, b + block):
                a = v[i].real * v[i].real + v[i].imag * v[i].imag
                inner += a
            if r == 2.0:
                total += inner
            else:
                total += pow(inner, r / 2.0)
        else:
            for i in range(b, b + block):
                inner += pow(cabs(v[i]), q)
            if r == q:
                total += inner
            else:
                total += pow(inner, r / q)
        b += block
    total *= weight
    if p == r:
        return total
    return pow(total, p / r)


def sign_sum(const double complex[:, ::1] Y, double p, double q, double r,
             Py_ssize_t block, double weight):
    """Sum over all 2^N sign patterns of ||sum_j eps_j y_j||^p."""
    cdef Py_ssize_t N = Y.shape[0], D = Y.shape[1]
    cdef Py_ssize_t j, i, t, flip, steps
    cdef double total = 0.0
    cdef double complex *acc
    cdef int *sgn
    if N == 0:
        return 0.0
    if D % block:
        raise ValueError("block size must divide the vector length")
    acc = <double complex *> malloc(D * sizeof(double complex))
    sgn = <int *> malloc(N * sizeof(int))
    try:
        with nogil:
            for i in range(D):
                acc[i] = 0
            for j in range(N):
                sgn[j] = 1
                for i in range(D):
                    acc[i] = acc[i] + Y[j, i]
            total = _norm_pow(acc, D, p, q, r, block, weight)
            steps = (<Py_ssize_t> 1) << (N - 1)
            for t in range(1, steps):
                # index of lowest set bit selects the sign to flip (eps_0 stays +1)
                flip = 1
                j = t
                while not (j & 1):
                    j >>= 1
                    flip += 1
                sgn[flip] = -sgn[flip]
                if t % RESYNC == 0:
                    for i in range(D):
                        acc[i] = 0
                    for j in range(N):
                        for i in range(D):
                            acc[i] = acc[i] + sgn[j] * Y[j, i]
                elif sgn[flip] > 0:
                    for i in range(D):
                        acc[i] = acc[i] + 2.0 * Y[flip, i]
                else:
                    for i in range(D):
                        acc[i] = acc[i] - 2.0 * Y[flip, i]
                total += _norm_pow(acc, D, p, q, r, block, weight)
    finally:
        free(acc)
        free(sgn)
    return 2.0 * total
