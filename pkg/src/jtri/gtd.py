"""Single-matrix unitary triangularizations.

gtd()  -- upper-triangular factor with a prescribed positive diagonal,
          feasible exactly when the singular values multiplicatively
          majorize the target.
gmd()  -- the constant-diagonal special case (always feasible).
check_multiplicity_conditions() -- the reduced M-condition feasibility
          test when the target diagonal has repeated values.
block_gtd() -- block upper-triangular form with prescribed block
          determinant magnitudes.
"""

from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import (
    BlockConditionError,
    LengthMismatchError,
    MajorizationError,
    NonPositiveEntryError,
    NotSquareError,
    ShapeMismatchError,
    SingularMatrixError,
)


@dataclass
class GtdFactors:
    """a = u @ r @ v^H with unitary u, v and upper-triangular r.

    ``diag`` repeats the (real, positive) diagonal of r for convenience.
    """
    u: np.ndarray
    r: np.ndarray
    v: np.ndarray
    diag: np.ndarray


@dataclass
class BlockSpec:
    """Block sizes and complex determinant targets for block_gtd.

    Only the magnitudes of ``block_dets`` are realizable; any phase is
    absorbed into the unitary factors.
    """
    block_sizes: list
    block_dets: list


@dataclass
class BlockGtdFactors(GtdFactors):
    """block_gtd result; ``boundaries`` are the 0-based block start offsets."""
    boundaries: list = field(default_factory=list)


def _check_square_invertible(a):
    m = matcore.as_cmatrix(a)
    n, cols = m.shape
    if n != cols:
        raise NotSquareError("need a square matrix, got %d x %d" % (n, cols))
    fac = matcore.svd(m)
    if fac.sigma[-1] <= matcore.TOL_RANK * max(fac.sigma[0], 1e-300):
        raise SingularMatrixError("matrix is singular to working precision")
    return m, fac


def _first_failing_prefix(sigma, target, tol=matcore.TOL_MAJOR):
    """1-based length of the first violated prefix (n = product mismatch), or None."""
    ls = np.sort(np.log(sigma))[::-1]
    lt = np.sort(np.log(target))[::-1]
    cs = np.cumsum(ls)
    ct = np.cumsum(lt)
    n = len(ls)
    for l in range(n - 1):
        if ct[l] > cs[l] + tol:
            return l + 1
    if abs(ct[-1] - cs[-1]) > tol:
        return n
    return None


def _rot(c, s):
    return np.array([[c, -s], [s, c]])


def _apply_right_pair(mats, j, g):
    """cols (j, j+1) of every matrix in mats times the 2x2 g."""
    for m in mats:
        m[:, j:j + 2] = m[:, j:j + 2] @ g


def _apply_left_pair(m, j, g):
    """rows (j, j+1) of m times g^H from the left."""
    m[j:j + 2, :] = g.conj().T @ m[j:j + 2, :]


def _deflate(r_mat, u_mat, v_mat, j, target):
    """One pairing step: diagonal entries (j, j+1) of r_mat, with
    r[j,j] >= target >= r[j+1,j+1], become (target, product/target).

    Assumes rows j, j+1 of r_mat are zero to the right of the pair and the
    pair block itself is diagonal, which the sweep in _gtd_sorted maintains.
    """
    d1 = r_mat[j, j].real
    d2 = r_mat[j + 1, j + 1].real
    if abs(d1 - d2) <= 1e-15 * (d1 + d2):
        c, s = 1.0, 0.0
    else:
        c2 = (target * target - d2 * d2) / (d1 * d1 - d2 * d2)
        c = np.sqrt(min(max(c2, 0.0), 1.0))
        s = np.sqrt(max(1.0 - c * c, 0.0))
    gr = _rot(c, s)
    q1 = np.array([c * d1, s * d2]) / max(target, 1e-300)
    nq = np.linalg.norm(q1)
    q1 = q1 / nq if nq > 0 else np.array([1.0, 0.0])
    gl = np.array([[q1[0], -q1[1]], [q1[1], q1[0]]])
    _apply_right_pair([r_mat, v_mat], j, gr)
    _apply_left_pair(r_mat, j, gl)
    u_mat[:, j:j + 2] = u_mat[:, j:j + 2] @ gl
    r_mat[j + 1, j] = 0.0
    r_mat[j, j] = r_mat[j, j].real
    r_mat[j + 1, j + 1] = r_mat[j + 1, j + 1].real


def _swap_positions(r_mat, u_mat, v_mat, j, p):
    """Exchange diagonal slots j and p (both in the still-diagonal trailing
    block), keeping the factorization consistent."""
    if j == p:
        return
    perm_rows = list(range(r_mat.shape[0]))
    perm_rows[j], perm_rows[p] = perm_rows[p], perm_rows[j]
    r_mat[:, :] = r_mat[np.ix_(perm_rows, perm_rows)]
    u_mat[:, :] = u_mat[:, perm_rows]
    v_mat[:, :] = v_mat[:, perm_rows]


def _gtd_sorted(fac, tau):
    """Construct u, r, v for a non-increasing positive target tau, starting
    from the SVD ``fac``.

    Each step pairs the tightest bracketing cells: the smallest remaining
    diagonal cell at or above the target with the largest cell at or below
    it.  (Pairing the overall largest with the overall smallest looks
    natural but can leave a remainder that no longer majorizes the
    remaining targets; bracketing preserves the invariant.)
    """
    n = len(tau)
    u = fac.u.copy()
    v = fac.v.copy()
    r = np.zeros((n, n), dtype=np.complex128)
    np.fill_diagonal(r, fac.sigma)
    snap = 1e-12 * max(fac.sigma[0], 1.0)
    for k in range(n - 1):
        t_k = tau[k]
        cells = np.real(np.diag(r)[k:])
        above = np.flatnonzero(cells >= t_k - snap)
        if above.size:
            p = k + int(above[np.argmin(cells[above])])
        else:
            p = k + int(np.argmax(cells))
        _swap_positions(r, u, v, k, p)
        cells = np.real(np.diag(r)[k + 1:])
        below = np.flatnonzero(cells <= t_k + snap)
        if below.size:
            q = k + 1 + int(below[np.argmax(cells[below])])
        else:
            q = k + 1 + int(np.argmin(cells))
        _swap_positions(r, u, v, k + 1, q)
        d1 = r[k, k].real
        d2 = r[k + 1, k + 1].real
        t = min(max(t_k, min(d1, d2)), max(d1, d2))  # clamp roundoff at the edges
        _deflate(r, u, v, k, t)
    r[n - 1, n - 1] = r[n - 1, n - 1].real
    return u, r, v


def _gtd2(block, first):
    """2x2 triangularization of an arbitrary block with prescribed first
    diagonal entry.  Returns (u, r, v) with block = u @ r @ v^H."""
    fac = matcore.svd(block)
    d1, d2 = fac.sigma
    t = min(max(first, d2), d1)
    u = fac.u.copy()
    v = fac.v.copy()
    r = np.zeros((2, 2), dtype=np.complex128)
    np.fill_diagonal(r, fac.sigma)
    _deflate(r, u, v, 0, t)
    return u, r, v


def _unsort_diag(u, r, v, want):
    """Reorder the (descending) diagonal of r into the requested order
    ``want`` by adjacent 2x2 re-triangularizations."""
    n = len(want)
    current = list(np.real(np.diag(r)))
    for i in range(n):
        # locate the still-unplaced entry closest to want[i]
        best, best_err = None, None
        for j in range(i, n):
            err = abs(current[j] - want[i])
            if best is None or err < best_err:
                best, best_err = j, err
        for m in range(best, i, -1):
            # swap diagonal slots m-1 and m
            block = r[m - 1:m + 1, m - 1:m + 1].copy()
            bu, br, bv = _gtd2(block, current[m])
            r[:, m - 1:m + 1] = r[:, m - 1:m + 1] @ bv
            v[:, m - 1:m + 1] = v[:, m - 1:m + 1] @ bv
            r[m - 1:m + 1, :] = bu.conj().T @ r[m - 1:m + 1, :]
            u[:, m - 1:m + 1] = u[:, m - 1:m + 1] @ bu
            r[m, m - 1] = 0.0
            current[m - 1], current[m] = current[m], current[m - 1]
            current[m - 1] = r[m - 1, m - 1].real
            current[m] = r[m, m].real
    return u, r, v


def gtd(a, target_diag):
    """Unitary triangularization with prescribed positive diagonal.

    Raises MajorizationError (with the first failing prefix length) when
    sigma(a) does not multiplicatively majorize the target, and
    SingularMatrixError for singular input.
    """
    m, fac = _check_square_invertible(a)
    n = m.shape[0]
    target = np.asarray(target_diag, dtype=float)
    if target.ndim != 1 or target.size != n:
        raise LengthMismatchError("target diagonal must have %d entries" % n)
    if np.any(target <= 0):
        raise NonPositiveEntryError("target diagonal must be positive")
    bad = _first_failing_prefix(fac.sigma, target)
    if bad is not None:
        raise MajorizationError(
            "target diagonal not majorized by the singular values "
            "(first failing prefix length %d)" % bad,
            failing_prefix=bad)
    order = np.argsort(-target, kind="stable")
    tau = target[order]
    u, r, v = _gtd_sorted(fac, tau)
    if not np.array_equal(order, np.arange(n)):
        u, r, v = _unsort_diag(u, r, v, target)
    diag = np.real(np.diag(r)).copy()
    return GtdFactors(u=u, r=r, v=v, diag=diag)


def gmd(a):
    """Geometric mean decomposition: constant diagonal equal to the
    geometric mean of the singular values.  Always succeeds for square
    invertible input."""
    m, fac = _check_square_invertible(a)
    n = m.shape[0]
    g = float(np.exp(np.mean(np.log(fac.sigma))))
    u, r, v = _gtd_sorted(fac, np.full(n, g))
    diag = np.real(np.diag(r)).copy()
    return GtdFactors(u=u, r=r, v=v, diag=diag)


def check_multiplicity_conditions(sigma, values, mults, tol=matcore.TOL_MAJOR):
    """Feasibility of a target diagonal given as M distinct values with
    multiplicities: the M prefix conditions replace the full n.

    ``values`` must be strictly decreasing, ``mults`` positive counts
    summing to len(sigma).
    """
    sig = np.asarray(sigma, dtype=float)
    vals = np.asarray(values, dtype=float)
    counts = np.asarray(mults, dtype=int)
    if vals.size != counts.size:
        raise ShapeMismatchError("values and mults must pair up")
    if counts.sum() != sig.size:
        raise ShapeMismatchError(
            "multiplicities sum to %d, sigma has %d entries" % (counts.sum(), sig.size))
    if np.any(vals <= 0) or np.any(sig <= 0):
        raise NonPositiveEntryError("sigma and values must be positive")
    if np.any(np.diff(vals) >= 0):
        raise ShapeMismatchError("values must be strictly decreasing")
    if np.any(counts <= 0):
        raise ShapeMismatchError("multiplicities must be positive")
    ls = np.cumsum(np.sort(np.log(sig))[::-1])
    lhs = np.cumsum(counts * np.log(vals))
    ends = np.cumsum(counts)
    for q in range(vals.size - 1):
        if lhs[q] > ls[ends[q] - 1] + tol:
            return False
    return bool(abs(lhs[-1] - ls[-1]) <= tol)


def block_gtd(a, spec):
    """Block upper-triangular decomposition with prescribed |det| per
    diagonal block.

    Realized as a gtd whose target repeats each block's determinant-root
    n_m times, so the block structure can be read off the result.
    Returns BlockGtdFactors with 0-based block boundary offsets.
    """
    m, fac = _check_square_invertible(a)
    n = m.shape[0]
    sizes = [int(s) for s in spec.block_sizes]
    dets = [complex(d) for d in spec.block_dets]
    if len(sizes) != len(dets):
        raise ShapeMismatchError("one determinant target per block")
    if any(s <= 0 for s in sizes) or sum(sizes) != n:
        raise ShapeMismatchError("block sizes must be positive and sum to %d" % n)
    if any(abs(d) == 0 for d in dets):
        raise ShapeMismatchError("block determinants must be nonzero")
    d_roots = [abs(dets[i]) ** (1.0 / sizes[i]) for i in range(len(sizes))]
    # feasibility, stated on the blocks sorted by their determinant root
    order = sorted(range(len(sizes)), key=lambda i: -d_roots[i])
    ls = np.cumsum(np.sort(np.log(fac.sigma))[::-1])
    acc = 0.0
    count = 0
    for qi, i in enumerate(order):
        acc += np.log(abs(dets[i]))
        count += sizes[i]
        if qi < len(order) - 1:
            if acc > ls[count - 1] + matcore.TOL_MAJOR:
                raise BlockConditionError(
                    "block determinant condition fails at q=%d" % (qi + 1),
                    failing_q=qi + 1)
        elif abs(acc - ls[-1]) > matcore.TOL_MAJOR:
            raise BlockConditionError(
                "product of block determinants does not match det(a)",
                failing_q=len(order))
    target = np.concatenate([np.full(sizes[i], d_roots[i]) for i in range(len(sizes))])
    factors = gtd(m, target)
    boundaries = [int(b) for b in np.cumsum([0] + sizes[:-1])]
    return BlockGtdFactors(u=factors.u, r=factors.r, v=factors.v,
                           diag=factors.diag, boundaries=boundaries)
