# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched Lohner iteration for the Lomelí map.

Mirrors ``_pykernels.lohner_iterate``.  Every interval operation rounds the
IEEE result outward by one ulp; the extension must be compiled
without value-changing floating point optimisations (no fast-math, no FMA
contraction).
"""

import numpy as np


cdef extern from "_rounding.h" nogil:
    double hp_up(double x)
    double hp_dn(double x)

DEF MAXD = 4


ctypedef struct iv:
    double lo
    double hi


cdef inline double _dn(double x) noexcept nogil:
    return hp_dn(x)


cdef inline double _up(double x) noexcept nogil:
    return hp_up(x)


cdef inline iv mk(double lo, double hi) noexcept nogil:
    cdef iv r
    r.lo = lo
    r.hi = hi
    return r


cdef inline iv pt(double x) noexcept nogil:
    return mk(x, x)


cdef inline iv add(iv a, iv b) noexcept nogil:
    return mk(_dn(a.lo + b.lo), _up(a.hi + b.hi))


cdef inline iv sub(iv a, iv b) noexcept nogil:
    return mk(_dn(a.lo - b.hi), _up(a.hi - b.lo))


cdef inline iv neg(iv a) noexcept nogil:
    return mk(-a.hi, -a.lo)


cdef inline iv mul(iv a, iv b) noexcept nogil:
    cdef double p1 = a.lo * b.lo
    cdef double p2 = a.lo * b.hi
    cdef double p3 = a.hi * b.lo
    cdef double p4 = a.hi * b.hi
    cdef double lo = p1
    cdef double hi = p1
    if p2 < lo: lo = p2
    if p3 < lo: lo = p3
    if p4 < lo: lo = p4
    if p2 > hi: hi = p2
    if p3 > hi: hi = p3
    if p4 > hi: hi = p4
    return mk(_dn(lo), _up(hi))


cdef inline iv muls(iv a, double x) noexcept nogil:
    cdef double p = a.lo * x
    cdef double q = a.hi * x
    if p <= q:
        return mk(_dn(p), _up(q))
    return mk(_dn(q), _up(p))


cdef inline iv sqr(iv a) noexcept nogil:
    cdef double l2 = a.lo * a.lo
    cdef double h2 = a.hi * a.hi
    cdef double m = l2 if l2 > h2 else h2
    if a.lo <= 0.0 and a.hi >= 0.0:
        return mk(0.0, _up(m))
    cdef double n = l2 if l2 < h2 else h2
    return mk(_dn(n), _up(m))


cdef inline double mid(iv a) noexcept nogil:
    cdef double m = 0.5 * a.lo + 0.5 * a.hi
    if m < a.lo: m = a.lo
    if m > a.hi: m = a.hi
    return m


cdef inline bint iszero(iv a) noexcept nogil:
    return a.lo == 0.0 and a.hi == 0.0


cdef void lomeli_pieces(double* x, iv* p, int direction, iv* fx, iv* J) noexcept nogil:
    # p = (a, b, c, alpha, tau); J row-major 3x3
    cdef iv X = pt(x[0])
    cdef iv Y = pt(x[1])
    cdef iv Z = pt(x[2])
    cdef iv one = pt(1.0)
    cdef iv zero = pt(0.0)
    cdef int i
    for i in range(9):
        J[i] = zero
    if direction > 0:
        fx[0] = add(add(add(add(add(Z, p[3]), mul(p[4], X)), mul(p[0], sqr(X))), mul(p[1], mul(X, Y))),
                    mul(p[2], sqr(Y)))
        fx[1] = X
        fx[2] = Y
        J[0] = add(add(p[4], muls(mul(p[0], X), 2.0)), mul(p[1], Y))
        J[1] = add(mul(p[1], X), muls(mul(p[2], Y), 2.0))
        J[2] = one
        J[3] = one
        J[7] = one
    else:
        fx[0] = Y
        fx[1] = Z
        fx[2] = sub(sub(sub(sub(sub(X, p[3]), mul(p[4], Y)), mul(p[0], sqr(Y))), mul(p[1], mul(Y, Z))),
                    mul(p[2], sqr(Z)))
        J[1] = one
        J[5] = one
        J[6] = one
        J[7] = sub(sub(neg(p[4]), muls(mul(p[0], Y), 2.0)), mul(p[1], Z))
        J[8] = sub(neg(mul(p[1], Y)), muls(mul(p[2], Z), 2.0))


cdef void hessians(iv* p, int direction, iv* H) noexcept nogil:
    # H[i*9 + j*3 + k] = d^2 f_i / dx_j dx_k
    cdef int i
    for i in range(27):
        H[i] = pt(0.0)
    if direction > 0:
        H[0] = muls(p[0], 2.0)
        H[1] = p[1]
        H[3] = p[1]
        H[4] = muls(p[2], 2.0)
    else:
        H[18 + 4] = neg(muls(p[0], 2.0))
        H[18 + 5] = neg(p[1])
        H[18 + 7] = neg(p[1])
        H[18 + 8] = neg(muls(p[2], 2.0))


def lohner_iterate(x0_in, A_in, b_lo, b_hi, r_lo, r_hi, X0_in, Aq_in, R_lo, R_hi,
                   p_lo, p_hi, int steps, int direction, bint deriv=True):
    """Batched Lohner iteration; arrays as in the numpy fallback (n = 3)."""
    x0a = np.array(x0_in, dtype=np.float64, order="C")
    Aa = np.array(A_in, dtype=np.float64, order="C")
    X0a = np.array(X0_in, dtype=np.float64, order="C")
    Aqa = np.array(Aq_in, dtype=np.float64, order="C")
    rla = np.array(r_lo, dtype=np.float64, order="C")
    rha = np.array(r_hi, dtype=np.float64, order="C")
    Rla = np.array(R_lo, dtype=np.float64, order="C")
    Rha = np.array(R_hi, dtype=np.float64, order="C")
    bla = np.ascontiguousarray(b_lo, dtype=np.float64)
    bha = np.ascontiguousarray(b_hi, dtype=np.float64)
    pla = np.ascontiguousarray(p_lo, dtype=np.float64)
    pha = np.ascontiguousarray(p_hi, dtype=np.float64)

    cdef double[:, ::1] x0 = x0a
    cdef double[:, :, ::1] A = Aa
    cdef double[:, :, ::1] X0 = X0a
    cdef double[:, :, :, ::1] Aq = Aqa
    cdef double[:, ::1] rl = rla
    cdef double[:, ::1] rh = rha
    cdef double[:, :, ::1] Rl = Rla
    cdef double[:, :, ::1] Rh = Rha
    cdef double[:, ::1] bl = bla
    cdef double[:, ::1] bh = bha
    cdef double[::1] pl = pla
    cdef double[::1] ph = pha

    cdef Py_ssize_t B = x0.shape[0]
    cdef int n = x0.shape[1]
    cdef int m = A.shape[2]
    cdef int nc = X0.shape[2]
    if n != 3 or m > MAXD or nc > MAXD:
        raise ValueError("unsupported dimensions")

    cdef iv p[5]
    cdef iv H[27]
    cdef bint Hnz[27]
    cdef iv fx[3]
    cdef iv J[9]
    cdef iv b[MAXD]
    cdef iv r[3]
    cdef iv R[3][MAXD]
    cdef double x[3]
    cdef double xn[3]
    cdef iv AJ[3][MAXD]
    cdef double An[3][MAXD]
    cdef iv HA[3][3][MAXD]
    cdef iv G[3][MAXD][MAXD]
    cdef iv T[3][MAXD][3]
    cdef iv q[3]
    cdef iv acc, acc2, t
    cdef iv rn[3]
    cdef iv XJ[3][MAXD]
    cdef double X0n[3][MAXD]
    cdef iv AqJ[3][MAXD][MAXD]
    cdef double Aqn[3][MAXD][MAXD]
    cdef iv w[3]
    cdef iv wH[3][3]
    cdef iv Zm[3][MAXD]
    cdef iv Rn[3][MAXD]
    cdef Py_ssize_t e
    cdef int s, i, j, k, k2, l, c

    for i in range(5):
        p[i] = mk(pl[i], ph[i])
    hessians(p, direction, H)
    for i in range(27):
        Hnz[i] = not iszero(H[i])

    with nogil:
        for e in range(B):
            for k in range(m):
                b[k] = mk(bl[e, k], bh[e, k])
            for s in range(steps):
                for i in range(3):
                    x[i] = x0[e, i]
                    r[i] = mk(rl[e, i], rh[e, i])
                lomeli_pieces(x, p, direction, fx, J)
                for i in range(3):
                    xn[i] = mid(fx[i])
                # AJ = J A
                for i in range(3):
                    for k in range(m):
                        acc = pt(0.0)
                        for j in range(3):
                            if not iszero(J[i * 3 + j]):
                                acc = add(acc, muls(J[i * 3 + j], A[e, j, k]))
                        AJ[i][k] = acc
                        An[i][k] = mid(acc)
                # HA_i = H_i A, G_i = A^T H_i A, T_i = A^T H_i
                for i in range(3):
                    for j in range(3):
                        for k in range(m):
                            acc = pt(0.0)
                            for l in range(3):
                                if Hnz[i * 9 + j * 3 + l]:
                                    acc = add(acc, muls(H[i * 9 + j * 3 + l], A[e, l, k]))
                            HA[i][j][k] = acc
                    for k in range(m):
                        for k2 in range(m):
                            acc = pt(0.0)
                            for j in range(3):
                                acc = add(acc, muls(HA[i][j][k2], A[e, j, k]))
                            G[i][k][k2] = acc
                        for j in range(3):
                            acc = pt(0.0)
                            for l in range(3):
                                if Hnz[i * 9 + l * 3 + j]:
                                    acc = add(acc, muls(H[i * 9 + l * 3 + j], A[e, l, k]))
                            T[i][k][j] = acc
                # quadratic remainder 1/2 (b^T G b + 2 b^T T r + r^T H r)
                for i in range(3):
                    acc = pt(0.0)
                    for k in range(m):
                        acc = add(acc, mul(G[i][k][k], sqr(b[k])))
                        for k2 in range(k + 1, m):
                            acc = add(acc, mul(add(G[i][k][k2], G[i][k2][k]), mul(b[k], b[k2])))
                    acc2 = pt(0.0)
                    for k in range(m):
                        t = pt(0.0)
                        for j in range(3):
                            t = add(t, mul(T[i][k][j], r[j]))
                        acc2 = add(acc2, mul(b[k], t))
                    acc = add(acc, muls(acc2, 2.0))
                    acc2 = pt(0.0)
                    for j in range(3):
                        t = pt(0.0)
                        for l in range(3):
                            if Hnz[i * 9 + j * 3 + l]:
                                t = add(t, mul(H[i * 9 + j * 3 + l], r[l]))
                        acc2 = add(acc2, mul(r[j], t))
                    acc = add(acc, acc2)
                    q[i] = muls(acc, 0.5)
                for i in range(3):
                    acc = sub(fx[i], pt(xn[i]))
                    for k in range(m):
                        acc = add(acc, mul(sub(AJ[i][k], pt(An[i][k])), b[k]))
                    for j in range(3):
                        if not iszero(J[i * 3 + j]):
                            acc = add(acc, mul(J[i * 3 + j], r[j]))
                    rn[i] = add(acc, q[i])

                if deriv:
                    for j in range(3):
                        for c in range(nc):
                            R[j][c] = mk(Rl[e, j, c], Rh[e, j, c])
                    for i in range(3):
                        for c in range(nc):
                            acc = pt(0.0)
                            for j in range(3):
                                if not iszero(J[i * 3 + j]):
                                    acc = add(acc, muls(J[i * 3 + j], X0[e, j, c]))
                            XJ[i][c] = acc
                            X0n[i][c] = mid(acc)
                    for i in range(3):
                        for k in range(m):
                            for c in range(nc):
                                acc = pt(0.0)
                                for j in range(3):
                                    if not iszero(J[i * 3 + j]):
                                        acc = add(acc, muls(J[i * 3 + j], Aq[e, j, k, c]))
                                for l in range(3):
                                    acc = add(acc, muls(T[i][k][l], X0[e, l, c]))
                                AqJ[i][k][c] = acc
                                Aqn[i][k][c] = mid(acc)
                    for j in range(3):
                        acc = r[j]
                        for k in range(m):
                            acc = add(acc, muls(b[k], A[e, j, k]))
                        w[j] = acc
                    for i in range(3):
                        for l in range(3):
                            acc = pt(0.0)
                            for j in range(3):
                                if Hnz[i * 9 + j * 3 + l]:
                                    acc = add(acc, mul(w[j], H[i * 9 + j * 3 + l]))
                            wH[i][l] = acc
                    for j in range(3):
                        for c in range(nc):
                            acc = R[j][c]
                            for k in range(m):
                                acc = add(acc, muls(b[k], Aq[e, j, k, c]))
                            Zm[j][c] = acc
                    for i in range(3):
                        for c in range(nc):
                            acc = sub(XJ[i][c], pt(X0n[i][c]))
                            for k in range(m):
                                acc = add(acc, mul(b[k], sub(AqJ[i][k][c], pt(Aqn[i][k][c]))))
                            # r^T H_i X0
                            for j in range(3):
                                t = pt(0.0)
                                for l in range(3):
                                    if Hnz[i * 9 + j * 3 + l]:
                                        t = add(t, muls(H[i * 9 + j * 3 + l], X0[e, l, c]))
                                acc = add(acc, mul(r[j], t))
                            for j in range(3):
                                if not iszero(J[i * 3 + j]):
                                    acc = add(acc, mul(J[i * 3 + j], R[j][c]))
                            for l in range(3):
                                acc = add(acc, mul(wH[i][l], Zm[l][c]))
                            Rn[i][c] = acc
                    for i in range(3):
                        for c in range(nc):
                            X0[e, i, c] = X0n[i][c]
                            Rl[e, i, c] = Rn[i][c].lo
                            Rh[e, i, c] = Rn[i][c].hi
                            for k in range(m):
                                Aq[e, i, k, c] = Aqn[i][k][c]
                for i in range(3):
                    x0[e, i] = xn[i]
                    rl[e, i] = rn[i].lo
                    rh[e, i] = rn[i].hi
                    for k in range(m):
                        A[e, i, k] = An[i][k]
    return x0a, Aa, rla, rha, X0a, Aqa, Rla, Rha
