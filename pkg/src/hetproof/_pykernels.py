"""Pure numpy implementation of the batched Lohner iteration.

Same signature and semantics as the compiled ``_ckernels`` module; used when
the extension is unavailable or ``HETPROOF_PURE=1``.
"""

import numpy as np

from .interval import Interval, stack


def _lomeli_pieces(x0, plo, phi, direction):
    a, b, c, al, tau = (Interval(plo[i], phi[i]) for i in range(5))
    X = Interval.point(x0)
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    B = x0.shape[0]
    one = Interval.point(np.ones(B))
    zero = Interval.zeros(B)
    if direction > 0:
        top = z + al + tau * x + a * x.sqr() + b * (x * y) + c * y.sqr()
        fx = stack([top, x, y], -1)
        r1 = tau + 2.0 * (a * x) + b * y
        r2 = b * x + 2.0 * (c * y)
        J = stack([stack([r1, r2, one], -1), stack([one, zero, zero], -1),
                   stack([zero, one, zero], -1)], -2)
        H = Interval.zeros((3, 3, 3))
        H[0, 0, 0] = 2.0 * a
        H[0, 0, 1] = b
        H[0, 1, 0] = b
        H[0, 1, 1] = 2.0 * c
    else:
        bot = x - al - tau * y - a * y.sqr() - b * (y * z) - c * z.sqr()
        fx = stack([y, z, bot], -1)
        q2 = -tau - 2.0 * (a * y) - b * z
        q3 = -(b * y) - 2.0 * (c * z)
        J = stack([stack([zero, one, zero], -1), stack([zero, zero, one], -1),
                   stack([one, q2, q3], -1)], -2)
        H = Interval.zeros((3, 3, 3))
        H[2, 1, 1] = -(2.0 * a)
        H[2, 1, 2] = -b
        H[2, 2, 1] = -b
        H[2, 2, 2] = -(2.0 * c)
    return fx, J, H


def _quad(b: Interval, G: Interval) -> Interval:
    """``b^T G_i b`` for G of shape (B, n, m, m), b of shape (B, m); uses squares on the diagonal."""
    m = b.shape[-1]
    out = None
    for j in range(m):
        t = G[:, :, j, j] * b[:, None, j].sqr()
        out = t if out is None else out + t
        for k in range(j + 1, m):
            t = (G[:, :, j, k] + G[:, :, k, j]) * (b[:, None, j] * b[:, None, k])
            out = out + t
    return out


def step(x0, A, b, r, X0, Aq, R, fx, J, H, deriv=True):
    """One Lohner step given ``f([x0])``, ``Df([x0])`` and the Hessians ``H``.

    x0 (B,n) float, A (B,n,m) float, b (B,m), r (B,n), X0 (B,n,c) float,
    Aq (B,n,m,c) float, R (B,n,c) Interval, fx (B,n), J (B,n,n), H (n,n,n) or (B,n,n,n).
    """
    if H.ndim == 3:
        H = H.broadcast_to((x0.shape[0],) + H.shape)
    x0n = fx.mid()
    AJ = J @ A
    An = AJ.mid()
    HA = H @ A[:, None]  # (B,n,n,m)
    AT = np.swapaxes(A, -1, -2)[:, None]  # (B,1,m,n)
    G = HA.swapaxes(-1, -2) @ A[:, None]  # (B,n,m,m) = A^T H_i A
    T = AT @ H  # (B,n,m,n) = A^T H_i
    q1 = _quad(b, G)
    q2 = (b[:, None, None, :] @ (T @ r[:, None, :, None]))[..., 0, 0]
    Hr = (H @ r[:, None, :, None])[..., 0]  # (B,n,n)
    q3 = (r[:, None, None, :] @ Hr[..., None])[..., 0, 0]
    quad = 0.5 * (q1 + 2.0 * q2 + q3)
    rn = (fx - x0n) + ((AJ - An) @ b[..., None])[..., 0] + (J @ r[..., None])[..., 0] + quad
    if not deriv:
        return x0n, An, rn, X0, Aq, R
    XJ = J @ X0
    X0n = XJ.mid()
    # J * Aq + A^T H X0
    JA = None
    for j in range(J.shape[-1]):
        t = J[:, :, j, None, None] * Aq[:, None, j]
        JA = t if JA is None else JA + t
    AHX = T @ X0[:, None]  # (B,n,m,c)
    AqJ = JA + AHX
    Aqn = AqJ.mid()
    D = AqJ - Aqn
    bD = (b[:, None, None, :] @ D)[..., 0, :]  # (B,n,c)
    rHX = (r[:, None, None, :] @ (H @ X0[:, None]))[..., 0, :]
    w = (Interval.point(A) @ b[..., None])[..., 0] + r  # (B,n)
    wH = (w[:, None, None, :] @ H)[..., 0, :]  # (B,n,n) rows w^T H_i
    bAq = (b[:, None, None, :] @ Interval.point(Aq))[..., 0, :]  # (B,n,c)
    Z = bAq + R
    Rn = (XJ - X0n) + bD + rHX + J @ R + wH @ Z
    return x0n, An, rn, X0n, Aqn, Rn


def lohner_iterate(x0, A, b_lo, b_hi, r_lo, r_hi, X0, Aq, R_lo, R_hi,
                   p_lo, p_hi, steps, direction, deriv=True):
    b = Interval(b_lo, b_hi)
    r = Interval(r_lo, r_hi)
    R = Interval(R_lo, R_hi)
    x0 = np.array(x0, dtype=float)
    A = np.array(A, dtype=float)
    X0 = np.array(X0, dtype=float)
    Aq = np.array(Aq, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            fx, J, H = _lomeli_pieces(x0, p_lo, p_hi, direction)
            x0, A, r, X0, Aq, R = step(x0, A, b, r, X0, Aq, R, fx, J, H, deriv)
    return x0, A, r.lo, r.hi, X0, Aq, R.lo, R.hi
