"""Pure-numpy implementations of the hot kernels.

Same signatures as the compiled module ``_fast``; selected at import time by
``stackinfer._kernels`` when the extension is unavailable (or when
``STACKINFER_BACKEND=python`` is set).
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

# A-, D-, E-optimality codes shared with the compiled kernel.
KIND_A, KIND_D, KIND_E = 0, 1, 2


def _trace_gram(qinv):
    """S_ij = tr(Qinv E_i Qinv E_j) for the symmetric basis E1=e11, E2=e12+e21, E3=e22."""
    p, q, r = qinv[0, 0], qinv[0, 1], qinv[1, 1]
    return np.array(
        [
            [p * p, 2 * p * q, q * q],
            [2 * p * q, 2 * (p * r + q * q), 2 * q * r],
            [q * q, 2 * q * r, r * r],
        ]
    )


def crit_map(V, qinv, lam, kind):
    """Batched information criterion over follower-side vectors.

    Parameters
    ----------
    V : (N, 2) array
        Rows v = Qinv @ R1F @ uL, one per candidate leader action.
    qinv : (2, 2) array
        Inverse of the follower quadratic term Q(theta).
    lam : float
        Rationality coefficient.
    kind : int
        0 = trace, 1 = det^(1/3), 2 = smallest eigenvalue.

    Returns
    -------
    (N,) array of criterion values of F = lam * W'(v) + S / 2.
    """
    V = np.ascontiguousarray(V, dtype=np.float64)
    p, q, r = qinv[0, 0], qinv[0, 1], qinv[1, 1]
    v1, v2 = V[:, 0], V[:, 1]
    S = _trace_gram(qinv)

    # W'_ij = (E_i v)' Qinv (E_j v) with E_1 v=(v1,0), E_2 v=(v2,v1), E_3 v=(0,v2)
    f11 = lam * (p * v1 * v1) + 0.5 * S[0, 0]
    f12 = lam * (v1 * (p * v2 + q * v1)) + 0.5 * S[0, 1]
    f13 = lam * (q * v1 * v2) + 0.5 * S[0, 2]
    f22 = lam * (p * v2 * v2 + 2 * q * v1 * v2 + r * v1 * v1) + 0.5 * S[1, 1]
    f23 = lam * (q * v2 * v2 + r * v1 * v2) + 0.5 * S[1, 2]
    f33 = lam * (r * v2 * v2) + 0.5 * S[2, 2]

    if kind == KIND_A:
        return f11 + f22 + f33
    if kind == KIND_D:
        det = (
            f11 * (f22 * f33 - f23 * f23)
            - f12 * (f12 * f33 - f23 * f13)
            + f13 * (f12 * f23 - f22 * f13)
        )
        return np.cbrt(np.maximum(det, 0.0))
    if kind == KIND_E:
        F = np.empty((len(V), 3, 3))
        F[:, 0, 0] = f11
        F[:, 0, 1] = F[:, 1, 0] = f12
        F[:, 0, 2] = F[:, 2, 0] = f13
        F[:, 1, 1] = f22
        F[:, 1, 2] = F[:, 2, 1] = f23
        F[:, 2, 2] = f33
        return np.linalg.eigvalsh(F)[:, 0]
    raise ValueError(f"unknown criterion code {kind}")


def design_map(V, base, qinv, lam, kind):
    """Batched sequential-design objective over follower-side vectors.

    For each row v the information matrix is M = base + lam * W'(v), where
    ``base`` carries everything already known (accumulated OIM of past
    observations plus the candidate's own S/2 part).

    kind: 0 = -trace(M^{-1}) (total-variance form), 1 = det^(1/3),
    2 = smallest eigenvalue.
    """
    V = np.ascontiguousarray(V, dtype=np.float64)
    p, q, r = qinv[0, 0], qinv[0, 1], qinv[1, 1]
    v1, v2 = V[:, 0], V[:, 1]

    m11 = base[0, 0] + lam * (p * v1 * v1)
    m12 = base[0, 1] + lam * (v1 * (p * v2 + q * v1))
    m13 = base[0, 2] + lam * (q * v1 * v2)
    m22 = base[1, 1] + lam * (p * v2 * v2 + 2 * q * v1 * v2 + r * v1 * v1)
    m23 = base[1, 2] + lam * (q * v2 * v2 + r * v1 * v2)
    m33 = base[2, 2] + lam * (r * v2 * v2)

    det = (
        m11 * (m22 * m33 - m23 * m23)
        - m12 * (m12 * m33 - m23 * m13)
        + m13 * (m12 * m23 - m22 * m13)
    )
    if kind == KIND_A:
        minors = (m11 * m22 - m12 * m12) + (m11 * m33 - m13 * m13) + (m22 * m33 - m23 * m23)
        out = np.full(len(V), -np.inf)
        ok = det > 0
        out[ok] = -minors[ok] / det[ok]
        return out
    if kind == KIND_D:
        return np.cbrt(np.maximum(det, 0.0))
    if kind == KIND_E:
        M = np.empty((len(V), 3, 3))
        M[:, 0, 0] = m11
        M[:, 0, 1] = M[:, 1, 0] = m12
        M[:, 0, 2] = M[:, 2, 0] = m13
        M[:, 1, 1] = m22
        M[:, 1, 2] = M[:, 2, 1] = m23
        M[:, 2, 2] = m33
        return np.linalg.eigvalsh(M)[:, 0]
    raise ValueError(f"unknown criterion code {kind}")


def cost_map(C, U):
    """Batched quadratic form 0.5 * u' C u over rows of U."""
    U = np.asarray(U, dtype=np.float64)
    return 0.5 * np.einsum("ki,ij,kj->k", U, C, U)


def mle_vgh(theta, s_hat, b_hat, cbar, lam):
    """Log-likelihood value, gradient and Hessian in theta from sufficient statistics.

    The averaged log-density over a dataset depends on the data only through
    s_hat = mean(uF uF'), b_hat = mean(b b') and cbar = mean(b . uF), where
    b = R1F uL.  Returns (value, grad (3,), hess (3, 3)).
    """
    t1, t2, t3 = theta
    det = t1 * t3 - t2 * t2
    Q = np.array([[t1, t2], [t2, t3]])
    qinv = np.array([[t3, -t2], [-t2, t1]]) / det
    p, q, r = qinv[0, 0], qinv[0, 1], qinv[1, 1]

    G = qinv @ b_hat @ qinv  # symmetric
    value = (
        np.log(lam / (2 * np.pi))
        + 0.5 * np.log(det)
        - 0.5 * lam * (t1 * s_hat[0, 0] + 2 * t2 * s_hat[0, 1] + t3 * s_hat[1, 1])
        - lam * cbar
        - 0.5 * lam * (p * b_hat[0, 0] + 2 * q * b_hat[0, 1] + r * b_hat[1, 1])
    )
    grad = np.array(
        [
            0.5 * p - 0.5 * lam * s_hat[0, 0] + 0.5 * lam * G[0, 0],
            q - lam * s_hat[0, 1] + lam * G[0, 1],
            0.5 * r - 0.5 * lam * s_hat[1, 1] + 0.5 * lam * G[1, 1],
        ]
    )

    E = np.array([[[1.0, 0], [0, 0]], [[0, 1.0], [1.0, 0]], [[0, 0], [0, 1.0]]])
    A = np.einsum("ab,ibc,cd->iad", qinv, E, qinv)  # A_i = Qinv E_i Qinv
    S = _trace_gram(qinv)
    P = qinv @ b_hat
    T = np.einsum("iab,jbc,ca->ij", A, E, P)  # tr(A_i E_j Qinv b_hat)
    hess = -0.5 * S - 0.5 * lam * (T + T.T)
    return value, grad, hess
