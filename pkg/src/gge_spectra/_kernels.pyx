# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Metropolis-within-Gibbs sweeps.

The pure-Python twin lives in ``_kernels_py.py``; both consume the same
pre-generated random numbers and perform the same floating point operations.
"""

from libc.math cimport exp, log, sqrt, tanh, atanh, cos, sin, atan2

ctypedef fused num:
    double
    double complex

# coordinate update codes
cdef enum:
    REAL = 0
    POSITIVE = 1
    INTERVAL = 2
    DISK = 3
    PHASE = 4
    FROZEN = 5
    PAIRED = 6

# field maps
cdef enum:
    F_IDENTITY = 0
    F_SQRT = 1
    F_CMV = 2
    F_CMV_REAL = 3


cdef inline double _re(num x) noexcept nogil:
    if num is double:
        return x
    else:
        return x.real


cdef inline void _set_fields(double[:, ::1] X, num[:, ::1] F, int fcode, Py_ssize_t j) noexcept nogil:
    cdef double r2
    if fcode == F_IDENTITY:
        for c in range(X.shape[1]):
            F[j, c] = X[j, c]
    elif fcode == F_SQRT:
        F[j, 0] = X[j, 0]
        F[j, 1] = sqrt(X[j, 0]) if X[j, 0] > 0 else 0.0
    elif fcode == F_CMV_REAL:
        r2 = 1.0 - X[j, 0] * X[j, 0]
        F[j, 0] = X[j, 0]
        F[j, 1] = X[j, 0]
        F[j, 2] = sqrt(r2) if r2 > 0 else 0.0
    else:
        if num is double:
            pass
        else:
            r2 = 1.0 - (X[j, 0] * X[j, 0] + X[j, 1] * X[j, 1])
            F[j, 0] = X[j, 0] + 1j * X[j, 1]
            F[j, 1] = X[j, 0] - 1j * X[j, 1]
            F[j, 2] = sqrt(r2) if r2 > 0 else 0.0


cdef inline double _mono_sum(num[:, ::1] F, num[::1] coef, const Py_ssize_t[::1] mstart,
                             const Py_ssize_t[::1] fsite, const Py_ssize_t[::1] ffield,
                             const Py_ssize_t[::1] fpow, const Py_ssize_t[::1] ids,
                             Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef double tot = 0.0
    cdef Py_ssize_t t, m, f, p
    cdef num prod, base
    for t in range(lo, hi):
        m = ids[t]
        prod = coef[m]
        for f in range(mstart[m], mstart[m + 1]):
            base = F[fsite[f], ffield[f]]
            for p in range(fpow[f]):
                prod = prod * base
        tot += _re(prod)
    return tot


cdef inline double _log_weight(double[:, ::1] X, const double[:, :, ::1] wexp, const Py_ssize_t[:, ::1] dom,
                               Py_ssize_t j, Py_ssize_t c) noexcept nogil:
    cdef int code = dom[j, c]
    cdef double x = X[j, c]
    cdef double w = 0.0
    if code == POSITIVE:
        if wexp[j, c, 0] != 0.0:
            w = wexp[j, c, 0] * log(x)
    elif code == INTERVAL:
        if wexp[j, c, 0] != 0.0:
            w += wexp[j, c, 0] * log(1.0 - x * x)
        if wexp[j, c, 1] != 0.0:
            w += wexp[j, c, 1] * log(1.0 - x)
        if wexp[j, c, 2] != 0.0:
            w += wexp[j, c, 2] * log(1.0 + x)
    elif code == DISK:
        if wexp[j, 0, 0] != 0.0:
            w = wexp[j, 0, 0] * log(1.0 - (X[j, 0] * X[j, 0] + X[j, 1] * X[j, 1]))
    return w


def total_energy(double[:, ::1] X, num[:, ::1] F, int fcode, num[::1] coef,
                 const Py_ssize_t[::1] mstart, const Py_ssize_t[::1] fsite,
                 const Py_ssize_t[::1] ffield, const Py_ssize_t[::1] fpow,
                 const Py_ssize_t[::1] all_ids):
    """Real part of the sum of all monomials (fields must be current)."""
    return _mono_sum(F, coef, mstart, fsite, ffield, fpow, all_ids, 0, all_ids.shape[0])


def sweeps(double[:, ::1] X, num[:, ::1] F, int fcode, num[::1] coef,
           const Py_ssize_t[::1] mstart, const Py_ssize_t[::1] fsite,
           const Py_ssize_t[::1] ffield, const Py_ssize_t[::1] fpow,
           const Py_ssize_t[::1] sstart, const Py_ssize_t[::1] smono,
           const Py_ssize_t[::1] all_ids,
           const Py_ssize_t[:, ::1] dom, const double[:, :, ::1] wexp,
           const double[:, ::1] logstep,
           const double[:, :, ::1] z, const double[:, :, ::1] u,
           Py_ssize_t[:, ::1] acc, Py_ssize_t[:, ::1] tries, double[::1] energy):
    """Run ``z.shape[0]`` full sweeps in place; optionally record the energy after each."""
    cdef Py_ssize_t S = z.shape[0], N = X.shape[0], d = X.shape[1], nf = F.shape[1]
    cdef Py_ssize_t s, j, c, q
    cdef int code
    cdef double e_old, e_new, w_old, w_new, jac, step, x0, x1, uu, un, v, th, r, y
    cdef double saveX[2]
    cdef num saveF[3]
    cdef bint record = energy.shape[0] > 0
    with nogil:
        for s in range(S):
            for j in range(N):
                for c in range(d):
                    code = dom[j, c]
                    if code == FROZEN or code == PAIRED:
                        continue
                    for q in range(d):
                        saveX[q] = X[j, q]
                    for q in range(nf):
                        saveF[q] = F[j, q]
                    e_old = _mono_sum(F, coef, mstart, fsite, ffield, fpow, smono, sstart[j], sstart[j + 1])
                    w_old = _log_weight(X, wexp, dom, j, c)
                    step = exp(logstep[j, c])
                    jac = 0.0
                    if code == REAL:
                        X[j, c] = saveX[c] + step * z[s, j, c]
                    elif code == POSITIVE:
                        X[j, c] = saveX[c] * exp(step * z[s, j, c])
                        jac = step * z[s, j, c]
                    elif code == INTERVAL:
                        y = atanh(saveX[c]) + step * z[s, j, c]
                        X[j, c] = tanh(y)
                        if 1.0 - X[j, c] * X[j, c] <= 0.0:
                            X[j, c] = saveX[c]
                            tries[j, c] += 1
                            continue
                        jac = log(1.0 - X[j, c] * X[j, c]) - log(1.0 - saveX[c] * saveX[c])
                    elif code == DISK:
                        uu = saveX[0] * saveX[0] + saveX[1] * saveX[1]
                        v = log(uu) - log(1.0 - uu) + step * z[s, j, 0]
                        th = atan2(saveX[1], saveX[0]) + exp(logstep[j, 1]) * z[s, j, 1]
                        un = 1.0 / (1.0 + exp(-v))
                        if un <= 0.0 or un >= 1.0:
                            tries[j, c] += 1
                            continue
                        r = sqrt(un)
                        X[j, 0] = r * cos(th)
                        X[j, 1] = r * sin(th)
                        jac = log(un * (1.0 - un)) - log(uu * (1.0 - uu))
                    else:
                        th = atan2(saveX[1], saveX[0]) + step * z[s, j, 0]
                        X[j, 0] = cos(th)
                        X[j, 1] = sin(th)
                    _set_fields(X, F, fcode, j)
                    e_new = _mono_sum(F, coef, mstart, fsite, ffield, fpow, smono, sstart[j], sstart[j + 1])
                    w_new = _log_weight(X, wexp, dom, j, c)
                    tries[j, c] += 1
                    if log(u[s, j, c]) < (e_old - e_new) + (w_new - w_old) + jac:
                        acc[j, c] += 1
                    else:
                        for q in range(d):
                            X[j, q] = saveX[q]
                        for q in range(nf):
                            F[j, q] = saveF[q]
            if record:
                energy[s] = _mono_sum(F, coef, mstart, fsite, ffield, fpow, all_ids, 0, all_ids.shape[0])
