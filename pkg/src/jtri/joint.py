"""Joint decompositions of matrix families sharing one right factor.

The workhorse is the reduction between the two joint forms: equi-diagonal
triangularization of K+1 matrices is equivalent to unit-diagonal
triangularization of the K quotients B_k = A_k A_{K+1}^{-1}
(kgmd_to_kjet / jet2).  For 2x2 pairs, exact unit-diagonal joint
triangularization has a closed-form existence test, the sign of

    F1(S1, S2) = det(S1 adj(S2) - S2 adj(S1)),   S_k = A_k^H A_k - I,

and the constructive witness is a unit vector annihilating both quadratic
forms, which this module solves case by case (exists_2gmd /
construct_2gmd).  A companion test F2 decides the mixed upper/lower
orientation (exists_upper_lower / construct_upper_lower).
"""

from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import (
    BadDeterminantError,
    ConditionViolatedError,
    NotConstructibleError,
    NotHermitianError,
    NotSquareError,
    ShapeMismatchError,
    SingularMatrixError,
)
from .gtd import gmd


@dataclass
class JointFactors:
    """Shared right factor plus per-user left/triangular pairs.

    For every user k:  a_k = u_k @ r_k @ v^H, all r_k upper-triangular
    with the common real positive diagonal ``diag``.
    """
    v: np.ndarray
    users: list          # [(u_k, r_k), ...]
    diag: np.ndarray


@dataclass
class QuadraticWitness:
    """Unit vector with v^H S1 v = v^H S2 v = 0 and solver provenance."""
    v1: np.ndarray
    t: float | None
    case_id: int


def _det2(m):
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def _check_square_set(mats):
    out = []
    n = None
    for a in mats:
        m = matcore.as_cmatrix(a)
        if m.shape[0] != m.shape[1]:
            raise NotSquareError("all matrices must be square")
        if n is None:
            n = m.shape[0]
        elif m.shape[0] != n:
            raise ShapeMismatchError("all matrices must share one size")
        out.append(m)
    return out, n


def normalize_equal_det(matrices):
    """Scale each matrix to unit |det|; returns (scaled, factors) with
    a_k = factors[k] * scaled[k]."""
    mats, n = _check_square_set(matrices)
    scaled = []
    factors = []
    for m in mats:
        d = abs(np.linalg.det(m))
        if not d > 0:
            raise SingularMatrixError("cannot normalize a singular matrix")
        f = d ** (1.0 / n)
        factors.append(f)
        scaled.append(m / f)
    return scaled, factors


def _equal_absdet_or_raise(mats, tol=matcore.TOL_MAJOR):
    logs = [np.log(abs(np.linalg.det(m)) + 1e-300) for m in mats]
    if max(logs) - min(logs) > mats[0].shape[0] * tol * 10 + tol:
        raise BadDeterminantError(
            "matrices must have equal |det| (log spread %.3g)" % (max(logs) - min(logs)))


def _hermitian_2x2_or_raise(s):
    m = matcore.as_cmatrix(s)
    if m.shape != (2, 2):
        raise ShapeMismatchError("expected a 2x2 matrix")
    scale = np.max(np.abs(m)) + 1.0
    if np.max(np.abs(m - m.conj().T)) > matcore.TOL_ZERO * scale:
        raise NotHermitianError("matrix is not Hermitian")
    return 0.5 * (m + m.conj().T)


def f1(s1, s2):
    """det(S1 adj(S2) - S2 adj(S1)) for Hermitian 2x2 S1, S2; real by
    construction (tiny imaginary residue is discarded).  Invariant under
    simultaneous unitary conjugation, and nonnegative exactly when the two
    quadratic forms share a unit-norm null vector."""
    h1 = _hermitian_2x2_or_raise(s1)
    h2 = _hermitian_2x2_or_raise(s2)
    m = h1 @ matcore.adjugate(h2) - h2 @ matcore.adjugate(h1)
    return float(_det2(m).real)


def f2(s1, s2):
    """det(S1 S2 - adj(S2) adj(S1)); decides the upper/lower variant."""
    h1 = _hermitian_2x2_or_raise(s1)
    h2 = _hermitian_2x2_or_raise(s2)
    m = h1 @ h2 - matcore.adjugate(h2) @ matcore.adjugate(h1)
    return float(_det2(m).real)


# --- the common-null-vector solver ------------------------------------------

_CASE_TOL = 1e-10


def _xy_from_sums(x_sq, y_sq, w, z):
    """Recover v = (x1 + i x2, y1 + i y2) from
    x1^2+x2^2, y1^2+y2^2, x1 y1 + x2 y2, x2 y1 - x1 y2.
    The free global phase is spent making the first component real."""
    x_sq = max(x_sq, 0.0)
    y_sq = max(y_sq, 0.0)
    if x_sq >= y_sq:
        x1 = np.sqrt(x_sq)
        y1 = w / x1
        y2 = -z / x1
    else:
        y1 = np.sqrt(y_sq)
        x1 = w / y1
        x2 = z / y1
        v = np.array([x1 + 1j * x2, y1])
        return v / np.linalg.norm(v)
    v = np.array([x1, y1 + 1j * y2])
    return v / np.linalg.norm(v)


def common_null_witness(s1, s2):
    """Unit vector v with v^H S1 v = v^H S2 v = 0 for Hermitian 2x2 pairs.

    Requires det(S1) <= 0, det(S2) <= 0 and F1(S1, S2) >= 0; raises
    ConditionViolatedError otherwise.  The solver diagonalizes S1 and
    branches on the classic four cases of the reduced real system.
    """
    h1 = _hermitian_2x2_or_raise(s1)
    h2 = _hermitian_2x2_or_raise(s2)
    # the problem is invariant to positive rescaling of either form;
    # scale large inputs down but never blow up a numerically zero form
    g1 = h1 / max(np.linalg.norm(h1), 1.0)
    g2 = h2 / max(np.linalg.norm(h2), 1.0)
    if _det2(g1).real > _CASE_TOL:
        raise ConditionViolatedError("first form is definite; no null vector")
    if _det2(g2).real > _CASE_TOL:
        raise ConditionViolatedError("second form is definite; no null vector")
    evals, q = np.linalg.eigh(g1)
    a1, c1 = float(evals[0]), float(evals[1])
    t2 = q.conj().T @ g2 @ q
    a2, c2 = float(t2[0, 0].real), float(t2[1, 1].real)
    b2, beta2 = float(t2[0, 1].real), float(t2[0, 1].imag)

    if abs(a1 - c1) <= _CASE_TOL * (abs(a1) + abs(c1) + 1.0):
        # S1 is (numerically) zero: any null-value vector of S2 works
        lam, w = np.linalg.eigh(t2)
        lo, hi = float(lam[0]), float(lam[1])
        if hi - lo <= 0:
            v_loc = np.array([1.0, 0.0], dtype=complex)
        else:
            ch = np.sqrt(min(max(hi / (hi - lo), 0.0), 1.0))
            sh = np.sqrt(max(1.0 - ch * ch, 0.0))
            v_loc = w @ np.array([ch, sh], dtype=complex)
        case_id, t_par = 2, None
    elif abs(b2) > _CASE_TOL * (abs(a2) + abs(c2) + abs(b2) + abs(beta2) + 1.0):
        # general position: one-parameter family, quadratic in t
        qa = -((a1 - c1) ** 2) * (b2 * b2 + beta2 * beta2)
        qb = 2.0 * beta2 * (a2 * c1 - a1 * c2) * (a1 - c1)
        qc = -4.0 * a1 * c1 * b2 * b2 - (a2 * c1 - a1 * c2) ** 2
        disc = qb * qb - 4.0 * qa * qc
        if disc < -1e-12:
            raise ConditionViolatedError("no common null vector (negative discriminant)")
        root = np.sqrt(max(disc, 0.0))
        bmat = np.array([[1.0, 0.0, 0.0, 1.0],
                         [a1, 0.0, 0.0, c1],
                         [a2, b2, beta2, c2],
                         [0.0, 0.0, 1.0, 0.0]])
        best = None
        for t_cand in ((-qb + root) / (2.0 * qa), (-qb - root) / (2.0 * qa)):
            x_sq, two_w, two_z, y_sq = np.linalg.solve(bmat, [1.0, 0.0, 0.0, t_cand])
            score = min(x_sq, y_sq)
            if best is None or score > best[0]:
                best = (score, t_cand, x_sq, two_w, two_z, y_sq)
        _, t_par, x_sq, two_w, two_z, y_sq = best
        v_loc = _xy_from_sums(x_sq, y_sq, two_w / 2.0, two_z / 2.0)
        case_id = 1
    elif abs(beta2) > _CASE_TOL * (abs(a2) + abs(c2) + abs(beta2) + 1.0):
        den = (a1 - c1) * beta2
        f5 = -beta2 * c1 / den
        f6 = (a2 * c1 - a1 * c2) / den
        f7 = a1 * beta2 / den
        gap = 4.0 * f5 * f7 - f6 * f6
        if f5 < -1e-12 or f7 < -1e-12 or gap < -1e-12:
            raise ConditionViolatedError("no common null vector (case 3 conditions)")
        w = np.sqrt(max(f5 * f7 - (f6 / 2.0) ** 2, 0.0))
        v_loc = _xy_from_sums(f5, f7, w, f6 / 2.0)
        case_id, t_par = 3, None
    else:
        # both forms diagonal in this basis: rows must be proportional
        mismatch = a2 * c1 - a1 * c2
        if abs(mismatch) > 1e-10 * (abs(a2) + abs(c2) + 1.0) * (abs(a1) + abs(c1)):
            raise ConditionViolatedError("no common null vector (diagonal mismatch)")
        den = c1 - a1
        x_sq = c1 / den
        y_sq = -a1 / den
        # the cross terms are unconstrained here; pick the consistent value
        v_loc = _xy_from_sums(x_sq, y_sq, np.sqrt(max(x_sq * y_sq, 0.0)), 0.0)
        case_id, t_par = 4, None
    v = q @ v_loc
    v = v / np.linalg.norm(v)
    return QuadraticWitness(v1=v, t=t_par, case_id=case_id)


# --- 2x2 joint decompositions -------------------------------------------------


def _check_unit_det_pair(a1, a2):
    m1 = matcore.as_cmatrix(a1)
    m2 = matcore.as_cmatrix(a2)
    if m1.shape != (2, 2) or m2.shape != (2, 2):
        raise ShapeMismatchError("expected 2x2 matrices")
    for m in (m1, m2):
        if abs(abs(_det2(m)) - 1.0) > 1e-6:
            raise BadDeterminantError("matrices must have |det| = 1 (got %.6g)"
                                      % abs(_det2(m)))
    return m1, m2


def exists_2gmd(a1, a2, r=1.0):
    """Existence of joint unit-phase triangularization of a 2x2 pair with
    common diagonal (r, 1/r); for r = 1 the test is F1 >= 0, and for
    general r the two shifted forms must also be indefinite."""
    m1, m2 = _check_unit_det_pair(a1, a2)
    shift = float(r) ** 2
    s1 = m1.conj().T @ m1 - shift * np.eye(2)
    s2 = m2.conj().T @ m2 - shift * np.eye(2)
    val = f1(s1, s2)
    scale = (np.linalg.norm(s1) * np.linalg.norm(s2)) ** 2 + 1.0
    if val < -matcore.TOL_ZERO * scale:
        return False
    if r != 1.0:
        if _det2(s1).real > matcore.TOL_ZERO or _det2(s2).real > matcore.TOL_ZERO:
            return False
    return True


def construct_2gmd(a1, a2):
    """Joint triangularization of a 2x2 unit-det pair with unit diagonals.

    Finds the common null direction of A_k^H A_k - I, completes it to a
    unitary V, and triangularizes each A_k V by QR.
    """
    m1, m2 = _check_unit_det_pair(a1, a2)
    s1 = m1.conj().T @ m1 - np.eye(2)
    s2 = m2.conj().T @ m2 - np.eye(2)
    witness = common_null_witness(s1, s2)
    return _finish_joint_from_v1([m1, m2], witness.v1)


def _finish_joint_from_v1(mats, v1):
    v2 = np.array([-np.conj(v1[1]), np.conj(v1[0])])
    v = np.column_stack([v1, v2])
    users = []
    diags = []
    for m in mats:
        fac = matcore.qr(m @ v)
        users.append((fac.q, fac.r))
        diags.append(np.real(np.diag(fac.r)))
    diag = np.mean(diags, axis=0)
    return JointFactors(v=v, users=users, diag=diag)


def kgmd_exact(matrices):
    """Exact joint unit-diagonal triangularization, where available.

    K = 1 is the geometric mean decomposition.  For 2x2 families the
    common-null-vector route is attempted (guaranteed complete for K = 2);
    identical matrices reduce to the single-matrix case.  Anything else
    raises NotConstructibleError so callers can fall back to time
    extensions.
    """
    mats, n = _check_square_set(matrices)
    if not mats:
        raise ShapeMismatchError("need at least one matrix")
    _equal_absdet_or_raise(mats)
    for m in mats:
        if abs(abs(np.linalg.det(m)) - 1.0) > 1e-6:
            raise BadDeterminantError("kgmd_exact expects unit |det| input")
    if len(mats) == 1:
        fac = gmd(mats[0])
        return JointFactors(v=fac.v, users=[(fac.u, fac.r)], diag=fac.diag)
    if all(np.allclose(m, mats[0], atol=1e-12) for m in mats[1:]):
        fac = gmd(mats[0])
        return JointFactors(v=fac.v, users=[(fac.u, fac.r)] * len(mats), diag=fac.diag)
    if n == 2:
        forms = [m.conj().T @ m - np.eye(2) for m in mats]
        try:
            witness = common_null_witness(forms[0], forms[1])
        except ConditionViolatedError as exc:
            raise NotConstructibleError(str(exc)) from exc
        for s in forms[2:]:
            if abs(witness.v1.conj() @ s @ witness.v1) > 1e-8 * (np.linalg.norm(s) + 1):
                raise NotConstructibleError(
                    "no common null vector across all %d matrices" % len(mats))
        return _finish_joint_from_v1(mats, witness.v1)
    raise NotConstructibleError(
        "no exact construction known for %d matrices of size %d" % (len(mats), n))


def kgmd_to_kjet(matrices, inner=None):
    """Equi-diagonal triangularization of K+1 matrices via unit-diagonal
    triangularization of the K quotients against the last matrix.

    ``inner`` supplies the joint unit-diagonal step (default kgmd_exact);
    NotConstructibleError from it propagates.
    """
    mats, n = _check_square_set(matrices)
    if len(mats) < 2:
        raise ShapeMismatchError("need at least two matrices")
    _equal_absdet_or_raise(mats)
    if inner is None:
        inner = kgmd_exact
    last = mats[-1]
    try:
        last_inv = np.linalg.inv(last)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("last matrix is singular") from exc
    quotients = [m @ last_inv for m in mats[:-1]]
    core = inner(quotients)
    u_last = core.v
    fac = matcore.qr(last_inv @ u_last)
    v = fac.q
    r_hat_inv = np.linalg.inv(fac.r)
    users = [(u_k, t_k @ r_hat_inv) for (u_k, t_k) in core.users]
    users.append((u_last, r_hat_inv))
    diag = 1.0 / np.real(np.diag(fac.r))
    return JointFactors(v=v, users=users, diag=diag)


def jet2(a1, a2):
    """Equi-diagonal triangularization of two equal-|det| matrices.
    Always succeeds for invertible input."""
    return kgmd_to_kjet([a1, a2])


def exists_upper_lower(a1, a2, r=1.0):
    """Existence of the mixed orientation: first matrix upper-triangular
    with diagonal (r, 1/r), second lower-triangular with the same diagonal."""
    m1, m2 = _check_unit_det_pair(a1, a2)
    s1 = m1.conj().T @ m1 - float(r) ** 2 * np.eye(2)
    s2 = m2.conj().T @ m2 - np.eye(2) / float(r) ** 2
    val = f2(s1, s2)
    scale = (np.linalg.norm(s1) * np.linalg.norm(s2)) ** 2 + 1.0
    if val < -matcore.TOL_ZERO * scale:
        return False
    if r != 1.0:
        if _det2(s1).real > matcore.TOL_ZERO or _det2(s2).real > matcore.TOL_ZERO:
            return False
    return True


def construct_upper_lower(a1, a2):
    """Mixed-orientation joint triangularization with unit diagonals.

    Returns (v, u1, r1_upper, u2, r2_lower).  The first column of V makes
    A1 v1 unit-norm (upper route); its reflected partner makes A2 v2
    unit-norm, which is exactly the lower-triangular condition.
    """
    m1, m2 = _check_unit_det_pair(a1, a2)
    s1 = m1.conj().T @ m1 - np.eye(2)
    s2 = matcore.adjugate(m2.conj().T @ m2 - np.eye(2))
    try:
        witness = common_null_witness(s1, s2)
    except ConditionViolatedError as exc:
        raise ConditionViolatedError(
            "upper/lower decomposition does not exist: %s" % exc) from exc
    v1 = witness.v1
    v2 = np.array([np.conj(v1[1]), -np.conj(v1[0])])
    v = np.column_stack([v1, v2])
    fac1 = matcore.qr(m1 @ v)
    u1, r1 = fac1.q, fac1.r
    # lower-triangular factor: orthonormalize the columns of A2 V in
    # reverse order, with the positive-diagonal phase convention
    b = m2 @ v
    q2 = b[:, 1] / np.linalg.norm(b[:, 1])
    resid = b[:, 0] - q2 * (q2.conj() @ b[:, 0])
    nr = np.linalg.norm(resid)
    if nr <= matcore.TOL_RANK * np.linalg.norm(b):
        raise SingularMatrixError("second matrix is numerically singular")
    q1 = resid / nr
    u2 = np.column_stack([q1, q2])
    r2 = u2.conj().T @ b
    phases = np.diag(r2) / np.abs(np.diag(r2))
    u2 = u2 * phases[np.newaxis, :]
    r2 = phases.conj()[:, np.newaxis] * r2
    r2[0, 1] = 0.0
    r2[0, 0] = r2[0, 0].real
    r2[1, 1] = r2[1, 1].real
    return v, u1, r1, u2, r2


def joint_block_feasible(a1, a2, block_sizes, det_ratios, tol=matcore.TOL_MAJOR):
    """Feasibility of joint block-triangularization of an invertible pair
    with prescribed per-block determinant ratios.

    The tests compare sorted prefix products of the |ratios| against the
    generalized singular values, computed here as the singular values of
    a1 @ inv(a2).
    """
    (m1, m2), n = _check_square_set([a1, a2])
    sizes = [int(s) for s in block_sizes]
    ratios = [complex(x) for x in det_ratios]
    if len(sizes) != len(ratios):
        raise ShapeMismatchError("one determinant ratio per block")
    if any(s <= 0 for s in sizes) or sum(sizes) != n:
        raise ShapeMismatchError("block sizes must be positive and sum to %d" % n)
    try:
        quotient = m1 @ np.linalg.inv(m2)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("second matrix is singular") from exc
    mu = matcore.svd(quotient).sigma
    if mu[-1] <= 0:
        raise SingularMatrixError("first matrix is singular")
    d_roots = [abs(ratios[i]) ** (1.0 / sizes[i]) for i in range(len(sizes))]
    order = sorted(range(len(sizes)), key=lambda i: -d_roots[i])
    lmu = np.cumsum(np.log(mu))
    acc = 0.0
    count = 0
    for qi, i in enumerate(order):
        if abs(ratios[i]) == 0:
            return False
        acc += np.log(abs(ratios[i]))
        count += sizes[i]
        if qi < len(order) - 1:
            if acc > lmu[count - 1] + tol:
                return False
        elif abs(acc - lmu[-1]) > tol:
            return False
    return True
