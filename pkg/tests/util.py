"""Shared helpers for the test suite: random matrix generators and the
independent brute-force search oracles used to cross-check the
closed-form existence tests.

The oracles deliberately avoid the library's F1/F2 route: they search
for a unit vector making the required column norms equal to one, over a
dense grid with multistart local refinement.
"""

import numpy as np
from scipy.optimize import minimize

from jtri import matcore


def rand_complex(rng, rows, cols=None):
    cols = rows if cols is None else cols
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def rand_unit_det(rng, n):
    a = rand_complex(rng, n)
    return a / abs(np.linalg.det(a)) ** (1.0 / n)


def rand_unitary(rng, n):
    return matcore.qr(rand_complex(rng, n)).q


def rand_real_det_one(rng, n):
    while True:
        a = rng.standard_normal((n, n))
        d = np.linalg.det(a)
        if abs(d) > 1e-2:
            a = a / abs(d) ** (1.0 / n)
            if np.linalg.det(a) < 0:
                a[:, 0] = -a[:, 0]
            return a.astype(complex)


def recon_error(u, r, v, a):
    return np.linalg.norm(u @ r @ v.conj().T - a) / max(np.linalg.norm(a), 1e-300)


# --- unit-vector search oracles -----------------------------------------------

_PHI = np.linspace(0.0, np.pi / 2, 181)
_PSI = np.linspace(0.0, 2 * np.pi, 360, endpoint=False)
_CP = np.cos(_PHI)[:, None]
_SP = np.sin(_PHI)[:, None]
_EXP_PSI = np.exp(1j * _PSI)[None, :]


def _vec(phi, psi):
    return np.array([np.cos(phi), np.exp(1j * psi) * np.sin(phi)])


def _grid_values(forms):
    """max_k |v^H S_k v| over the (phi, psi) grid, vectorized."""
    vals = None
    for s in forms:
        q = (s[0, 0].real * _CP ** 2 + s[1, 1].real * _SP ** 2
             + 2.0 * _CP * _SP * np.real(s[0, 1] * _EXP_PSI))
        a = np.abs(q)
        vals = a if vals is None else np.maximum(vals, a)
    return vals


def null_pair_residual(s1, s2, n_starts=6):
    """min over unit v of max(|v^H S1 v|, |v^H S2 v|): grid search plus
    Nelder-Mead refinement from the best grid cells."""
    vals = _grid_values((s1, s2))
    starts = np.argsort(vals.ravel())[:n_starts]

    def objective(p):
        v = _vec(p[0], p[1])
        return max(abs(v.conj() @ s1 @ v), abs(v.conj() @ s2 @ v))

    best = np.inf
    for k in starts:
        i, j = np.unravel_index(k, vals.shape)
        res = minimize(objective, [_PHI[i], _PSI[j]], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400})
        best = min(best, res.fun)
    return best


def gmd2_residual(a1, a2):
    """Oracle for existence of unit-diagonal joint triangularization of a
    2x2 pair: both first columns of A_k V must reach norm one."""
    s1 = a1.conj().T @ a1 - np.eye(2)
    s2 = a2.conj().T @ a2 - np.eye(2)
    return null_pair_residual(s1, s2)


def upper_lower_residual(a1, a2, n_starts=6):
    """Oracle for the mixed orientation: v1 must give ||A1 v1|| = 1 and
    its reflected partner v2 must give ||A2 v2|| = 1."""
    s1 = a1.conj().T @ a1 - np.eye(2)
    s2raw = a2.conj().T @ a2 - np.eye(2)

    def objective(p):
        v1 = _vec(p[0], p[1])
        v2 = np.array([np.conj(v1[1]), -np.conj(v1[0])])
        return max(abs(v1.conj() @ s1 @ v1), abs(v2.conj() @ s2raw @ v2))

    # the partner condition equals a quadratic form in v1 as well
    vals = _grid_values((s1, matcore.adjugate(s2raw)))
    starts = np.argsort(vals.ravel())[:n_starts]
    best = np.inf
    for k in starts:
        i, j = np.unravel_index(k, vals.shape)
        res = minimize(objective, [_PHI[i], _PSI[j]], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400})
        best = min(best, res.fun)
    return best


def extended_gmd_residual(rng, a1, a2, n_ext=2, n_starts=24):
    """Oracle on the n_ext-fold extended pair: search over unit vectors of
    the full extended space (random multistart, Nelder-Mead on the real
    parametrization) for a direction giving both extended columns unit
    norm."""
    s1 = np.kron(np.eye(n_ext), a1.conj().T @ a1 - np.eye(2))
    s2 = np.kron(np.eye(n_ext), a2.conj().T @ a2 - np.eye(2))
    dim = 2 * n_ext

    def objective(p):
        v = p[:dim] + 1j * p[dim:]
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            return 1e6
        v = v / nrm
        return max(abs(v.conj() @ s1 @ v), abs(v.conj() @ s2 @ v))

    best = np.inf
    for _ in range(n_starts):
        p0 = rng.standard_normal(2 * dim)
        res = minimize(objective, p0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12,
                                "maxiter": 3000, "maxfev": 6000})
        best = min(best, res.fun)
    return best
