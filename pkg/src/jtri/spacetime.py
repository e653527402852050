"""Time-extension constructions.

When no exact joint unit-diagonal triangularization of K matrices exists,
it can still be done for the block-diagonal N-fold extensions, up to a
constant number of discarded coordinates: nearly_kgmd produces
rectangular orthonormal-column factors of width n*(N - (n^(K-1) - 1)).

The construction runs K rounds.  Round 1 applies a per-block geometric
mean decomposition of the first matrix; each later round l reorders the
coordinates so that the still-unequalized cells of user l line up in
contiguous n-groups whose product is one, applies a single local GMD to
all groups at once, and re-triangularizes everyone by QR.  Users already
equalized hold identity blocks at the touched positions, so the QR step
provably leaves them untouched (the positive-diagonal QR of c*I times a
unitary returns the unitary itself).  The reordering drops a fixed number
of edge coordinates per round, independent of N, which is why the
efficiency (kept / total) approaches one as N grows.
"""

from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import (
    BadDeterminantError,
    FormMismatchError,
    ShapeMismatchError,
    SingularMatrixError,
    TooFewExtensionsError,
    UnachievableFractionError,
)
from .gtd import gmd
from .joint import _check_square_set, exists_2gmd


@dataclass
class SpaceTimeFactors:
    """Rectangular joint factors for N-fold extended matrices.

    v and every u_k have orthonormal columns (n*N rows); each t_k is the
    square upper-triangular u_k^H A_k_extended v.  ``kept_indices`` maps
    the retained coordinates back to 1-based positions of the extended
    space (useful for cross-checking which edge coordinates were dropped).
    """
    n: int
    k_users: int
    n_ext: int
    v: np.ndarray
    users: list          # [(u_k, t_k), ...]
    kept_indices: list
    diag: np.ndarray

    @property
    def kept_dim(self):
        return self.v.shape[1]


def _reorder_indices(n, n_users, n_ext, round_l):
    """1-based index groups kept by the round-l reordering.

    Group q1 collects one coordinate from each of n hops of stride
    delta = n^(K-l+1) - 1 starting at coordinate n*q1; consecutive group
    starts are n apart.  Validated against the fully worked small cases;
    the group count shrinks with l, which is where the edge coordinates
    are discarded.
    """
    delta = n ** (n_users - round_l + 1) - 1
    q1_count = n_ext - n ** (n_users - 1) + n ** (n_users - round_l)
    return [
        [n + (q1 - 1) * n + (q2 - 1) * delta for q2 in range(1, n + 1)]
        for q1 in range(1, q1_count + 1)
    ]


def _retriangularize(t_mats, u_mats, v_total, v_emb):
    """Apply a shared right factor and restore triangularity by QR."""
    v_total = v_total @ v_emb
    for k in range(len(t_mats)):
        fac = matcore.qr(t_mats[k] @ v_emb)
        u_mats[k] = u_mats[k] @ fac.q
        t_mats[k] = fac.r
    return v_total


def nearly_kgmd(matrices, n_ext):
    """Joint unit-diagonal triangularization of N-fold extended matrices.

    Input matrices must be square, equal size, unit |det| (normalize
    first), and n_ext >= n^(K-1).  The factors have orthonormal columns,
    the triangular parts are n*(n_ext - (n^(K-1) - 1)) wide with all
    diagonal entries 1.
    """
    mats, n = _check_square_set(matrices)
    if not mats:
        raise ShapeMismatchError("need at least one matrix")
    k_users = len(mats)
    for m in mats:
        d = abs(np.linalg.det(m))
        if not d > 0:
            raise SingularMatrixError("matrices must be invertible")
        if abs(d - 1.0) > 1e-6:
            raise BadDeterminantError("matrices must have unit |det| (got %.6g)" % d)
    min_ext = n ** (k_users - 1)
    n_ext = int(n_ext)
    if n_ext < min_ext:
        raise TooFewExtensionsError(
            "need at least %d extensions for %d users of size %d, got %d"
            % (min_ext, k_users, n, n_ext))

    # round 1: per-block GMD of the first matrix, QR-align everyone
    local = gmd(mats[0])
    v_emb = matcore.time_extend(local.v, n_ext)
    v_total = np.eye(n * n_ext, dtype=np.complex128)
    t_mats = [matcore.time_extend(m, n_ext) for m in mats]
    u_mats = [np.eye(n * n_ext, dtype=np.complex128) for _ in mats]
    v_total = _retriangularize(t_mats, u_mats, v_total, v_emb)
    coords = list(range(1, n * n_ext + 1))

    for round_l in range(2, k_users + 1):
        groups = _reorder_indices(n, k_users, n_ext, round_l)
        flat = [i for g in groups for i in g]
        picker = matcore.extraction_matrix(t_mats[0].shape[0], flat)
        coords = [coords[i - 1] for i in flat]
        v_total = v_total @ picker
        for k in range(k_users):
            u_mats[k] = u_mats[k] @ picker
            t_mats[k] = picker.conj().T @ t_mats[k] @ picker
        active = t_mats[round_l - 1]
        local = gmd(active[0:n, 0:n])
        v_emb = matcore.time_extend(local.v, len(groups))
        v_total = _retriangularize(t_mats, u_mats, v_total, v_emb)

    diag = np.real(np.diag(t_mats[0]))
    users = list(zip(u_mats, t_mats))
    return SpaceTimeFactors(n=n, k_users=k_users, n_ext=n_ext, v=v_total,
                            users=users, kept_indices=coords, diag=diag)


def nearly_kjet(matrices, n_ext):
    """Equi-diagonal variant for K+1 matrices with equal |det|, built by
    reducing to nearly_kgmd of the K quotients against the last matrix."""
    mats, n = _check_square_set(matrices)
    if len(mats) < 2:
        raise ShapeMismatchError("need at least two matrices")
    dets = [abs(np.linalg.det(m)) for m in mats]
    if not all(d > 0 for d in dets):
        raise SingularMatrixError("matrices must be invertible")
    spread = max(dets) - min(dets)
    if spread > 1e-6 * (1 + max(dets)):
        raise BadDeterminantError("matrices must have equal |det|")
    last = mats[-1]
    last_inv = np.linalg.inv(last)
    quotients = [m @ last_inv for m in mats[:-1]]
    core = nearly_kgmd(quotients, n_ext)
    last_ext_inv = matcore.time_extend(last_inv, n_ext)
    fac = matcore.qr(last_ext_inv @ core.v)
    v = fac.q
    r_hat_inv = np.linalg.inv(fac.r)
    users = [(u_k, t_k @ r_hat_inv) for (u_k, t_k) in core.users]
    users.append((core.v, r_hat_inv))
    diag = 1.0 / np.real(np.diag(fac.r))
    return SpaceTimeFactors(n=n, k_users=len(mats), n_ext=int(n_ext), v=v,
                            users=users, kept_indices=core.kept_indices,
                            diag=diag)


def extension_futile_2x2(a1, a2):
    """True when no number of time extensions admits an exact joint
    unit-diagonal triangularization of the 2x2 pair: existence for the
    extended matrices is equivalent to existence for the originals, so
    the F1 test settles every N at once."""
    return not exists_2gmd(a1, a2, 1.0)


_REFLECTION_TOL = 1e-8


def _reflection_parts(m):
    """Split a 2x2 unitary of the reflection form
    [[a+bi, c+di], [c-di, -a+bi]] into (a, b, c, d)."""
    w = matcore.as_cmatrix(m)
    if w.shape != (2, 2):
        raise ShapeMismatchError("factors must be 2x2")
    if (abs(w[1, 0] - np.conj(w[0, 1])) > _REFLECTION_TOL
            or abs(w[1, 1] + np.conj(w[0, 0])) > _REFLECTION_TOL):
        raise FormMismatchError("factor is not in reflection form")
    return (float(w[0, 0].real), float(w[0, 0].imag),
            float(w[0, 1].real), float(w[0, 1].imag))


def rephase_to_reflection(u1, u2, v):
    """Rotate a 2x2 joint-triangularization triple by a common global
    phase so all three factors land in reflection form (determinant -1).

    Works whenever the three determinants agree, which holds for factors
    of real det(+1) matrix pairs; the triangular parts are unchanged.
    """
    dets = [np.linalg.det(np.asarray(m)) for m in (u1, u2, v)]
    if max(abs(dets[0] - d) for d in dets) > 1e-8:
        raise FormMismatchError("factor determinants disagree; cannot rephase jointly")
    phase = np.exp(0.5j * (np.pi - np.angle(dets[2])))
    return u1 * phase, u2 * phase, v * phase


def real_embedding_2gmd(a1, a2, u1, u2, v):
    """Real orthogonal 4x4 factors realizing the complex 2x2 joint
    triangularization of a real pair on the two-fold extended space.

    The complex factors must be in reflection form (see
    rephase_to_reflection); each maps to the fixed 4x4 sign pattern
      [[ a, -b,  c, -d],
       [ c,  d, -a, -b],
       [ b,  a,  d,  c],
       [-d,  c,  b, -a]]
    and the embedded triple triangularizes blkdiag(A_k, A_k) with unit
    diagonal using only real orthogonal matrices.
    """
    for m in (a1, a2):
        mm = matcore.as_cmatrix(m)
        if mm.shape != (2, 2):
            raise ShapeMismatchError("channel matrices must be 2x2")
        if np.max(np.abs(mm.imag)) > _REFLECTION_TOL:
            raise FormMismatchError("channel matrices must be real valued")
    out = []
    for m in (u1, u2, v):
        a, b, c, d = _reflection_parts(m)
        out.append(np.array([
            [a, -b, c, -d],
            [c, d, -a, -b],
            [b, a, d, c],
            [-d, c, b, -a],
        ]))
    return tuple(out)


def required_extensions(fraction, n, k_users, mode="gmd"):
    """Smallest number of jointly processed channel uses whose kept
    fraction (N - (n^E - 1)) / N reaches ``fraction``.

    mode "gmd": E = k_users - 1 (constant equal diagonals for k_users
    matrices).  mode "jet": E = k_users - 2 (equal diagonals only; one
    user is absorbed by the quotient reduction).  ``fraction`` may be a
    float or an exact fractions.Fraction; a fraction of exactly 1 is
    achievable only when no coordinates are ever discarded (E = 0).
    """
    if mode not in ("gmd", "jet"):
        raise ShapeMismatchError("mode must be 'gmd' or 'jet'")
    if k_users < 1 or (mode == "jet" and k_users < 2):
        raise ShapeMismatchError("too few users for mode %r" % mode)
    exponent = k_users - 1 if mode == "gmd" else k_users - 2
    lost = n ** exponent - 1
    frac = fraction
    try:
        f_val = float(frac)
    except (TypeError, ValueError) as exc:
        raise UnachievableFractionError("fraction must be numeric") from exc
    if not 0.0 < f_val <= 1.0:
        raise UnachievableFractionError("fraction must lie in (0, 1]")
    if lost == 0:
        return 1
    if f_val >= 1.0:
        raise UnachievableFractionError(
            "fraction 1 needs unbounded extensions when coordinates are discarded")
    n_min = n ** exponent
    # smallest N with (N - lost)/N >= fraction, i.e. N >= lost/(1 - fraction)
    n_guess = int(np.ceil(lost / (1.0 - f_val) - 1e-9))
    n_val = max(n_min, n_guess)
    while (n_val - lost) / n_val < f_val - 1e-12:
        n_val += 1
    while n_val - 1 >= n_min and (n_val - 1 - lost) / (n_val - 1) >= f_val - 1e-12:
        n_val -= 1
    return n_val
