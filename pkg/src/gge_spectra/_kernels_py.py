"""Pure-Python twin of the compiled sweep kernel.

Same signature, same random-number consumption and the same sequence of
floating point operations, so short runs agree with the compiled backend.
"""

from math import atan2, atanh, cos, exp, log, sin, sqrt, tanh

REAL, POSITIVE, INTERVAL, DISK, PHASE, FROZEN, PAIRED = range(7)
F_IDENTITY, F_SQRT, F_CMV, F_CMV_REAL = range(4)


def _set_fields(X, F, fcode, j):
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
        x0, x1 = float(X[j, 0]), float(X[j, 1])
        r2 = 1.0 - (x0 * x0 + x1 * x1)
        F[j, 0] = complex(x0, x1)
        F[j, 1] = complex(x0, -x1)
        F[j, 2] = sqrt(r2) if r2 > 0 else 0.0


def _mono_sum(F, coef, mstart, fsite, ffield, fpow, ids, lo, hi):
    tot = 0.0
    for t in range(lo, hi):
        m = ids[t]
        prod = coef[m]
        for f in range(mstart[m], mstart[m + 1]):
            base = F[fsite[f], ffield[f]]
            for _ in range(fpow[f]):
                prod = prod * base
        tot += prod.real
    return tot


def _log_weight(X, wexp, dom, j, c):
    code = dom[j, c]
    x = X[j, c]
    w = 0.0
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


def total_energy(X, F, fcode, coef, mstart, fsite, ffield, fpow, all_ids):
    """Real part of the sum of all monomials (fields must be current)."""
    return _mono_sum(F, coef, mstart, fsite, ffield, fpow, all_ids, 0, len(all_ids))


def sweeps(X, F, fcode, coef, mstart, fsite, ffield, fpow, sstart, smono, all_ids,
           dom, wexp, logstep, z, u, acc, tries, energy):
    """Run ``z.shape[0]`` full sweeps in place; optionally record the energy after each."""
    S, N, d = z.shape
    nf = F.shape[1]
    # plain Python containers keep the inner loop tolerable
    coef_l = coef.tolist()
    mstart_l, fsite_l, ffield_l, fpow_l = mstart.tolist(), fsite.tolist(), ffield.tolist(), fpow.tolist()
    smono_l, sstart_l, ids_l = smono.tolist(), sstart.tolist(), all_ids.tolist()
    record = energy.shape[0] > 0
    for s in range(S):
        for j in range(N):
            for c in range(d):
                code = dom[j, c]
                if code == FROZEN or code == PAIRED:
                    continue
                saveX = [float(X[j, q]) for q in range(d)]
                saveF = [F[j, q] for q in range(nf)]
                e_old = _mono_sum(F, coef_l, mstart_l, fsite_l, ffield_l, fpow_l, smono_l, sstart_l[j], sstart_l[j + 1])
                w_old = _log_weight(X, wexp, dom, j, c)
                step = exp(logstep[j, c])
                jac = 0.0
                zz = float(z[s, j, c])
                if code == REAL:
                    X[j, c] = saveX[c] + step * zz
                elif code == POSITIVE:
                    X[j, c] = saveX[c] * exp(step * zz)
                    jac = step * zz
                elif code == INTERVAL:
                    y = atanh(saveX[c]) + step * zz
                    X[j, c] = tanh(y)
                    if 1.0 - X[j, c] * X[j, c] <= 0.0:
                        X[j, c] = saveX[c]
                        tries[j, c] += 1
                        continue
                    jac = log(1.0 - X[j, c] * X[j, c]) - log(1.0 - saveX[c] * saveX[c])
                elif code == DISK:
                    uu = saveX[0] * saveX[0] + saveX[1] * saveX[1]
                    v = log(uu) - log(1.0 - uu) + step * float(z[s, j, 0])
                    th = atan2(saveX[1], saveX[0]) + exp(logstep[j, 1]) * float(z[s, j, 1])
                    un = 1.0 / (1.0 + exp(-v))
                    if un <= 0.0 or un >= 1.0:
                        tries[j, c] += 1
                        continue
                    r = sqrt(un)
                    X[j, 0] = r * cos(th)
                    X[j, 1] = r * sin(th)
                    jac = log(un * (1.0 - un)) - log(uu * (1.0 - uu))
                else:
                    th = atan2(saveX[1], saveX[0]) + step * float(z[s, j, 0])
                    X[j, 0] = cos(th)
                    X[j, 1] = sin(th)
                _set_fields(X, F, fcode, j)
                e_new = _mono_sum(F, coef_l, mstart_l, fsite_l, ffield_l, fpow_l, smono_l, sstart_l[j], sstart_l[j + 1])
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
            energy[s] = _mono_sum(F, coef_l, mstart_l, fsite_l, ffield_l, fpow_l, ids_l, 0, len(ids_l))
