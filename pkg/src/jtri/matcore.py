"""Dense complex matrix core: QR/SVD wrappers with fixed conventions,
adjugate, time extension, extraction/embedding operators, multiplicative
majorization, and the JSON matrix interchange format.

Matrices are numpy ``complex128`` 2-D arrays throughout the package.
All index lists crossing the API (extraction, embedding, kept indices)
are 1-based; numpy storage is 0-based internally.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateIndexError,
    IndexOutOfRangeError,
    LengthMismatchError,
    NonPositiveEntryError,
    NotFiniteError,
    NotSquareError,
    NoConvergenceError,
    OverlappingGroupsError,
    ParseError,
    RankDeficientError,
)

# Shared tolerances (absolute on unit-scaled data unless noted).
TOL_UNITARY = 1e-9
TOL_ZERO = 1e-9
TOL_RECON = 1e-9      # relative
TOL_RANK = 1e-12      # relative
TOL_MAJOR = 1e-9      # on log-products


def as_cmatrix(a):
    """Coerce to a finite complex128 2-D array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise LengthMismatchError("expected a 2-D matrix, got ndim=%d" % m.ndim)
    if not np.all(np.isfinite(m)):
        raise NotFiniteError("matrix contains non-finite entries")
    return m


@dataclass
class QrFactors:
    q: np.ndarray   # orthonormal columns
    r: np.ndarray   # upper-triangular, real positive diagonal


@dataclass
class SvdFactors:
    u: np.ndarray
    sigma: np.ndarray   # non-increasing, real >= 0
    v: np.ndarray       # a = u @ diag(sigma) @ v.conj().T


def qr(a):
    """Thin QR with the positive-diagonal convention.

    The diagonal of R is forced real and positive by absorbing unit phases
    into the columns of Q.  This makes the factorization unique for
    full-column-rank input, which the joint constructions rely on:
    qr(c*I @ V) returns Q = V (up to roundoff), R = c*I for unitary V, c > 0.
    """
    m = as_cmatrix(a)
    rows, cols = m.shape
    if cols > rows:
        raise RankDeficientError("more columns (%d) than rows (%d)" % (cols, rows))
    q, r = np.linalg.qr(m, mode="reduced")
    scale = np.linalg.norm(m) + 1.0e-300
    diag = np.diag(r).copy()
    if np.any(np.abs(diag) <= TOL_RANK * scale):
        raise RankDeficientError("column residual below %g of the input norm" % TOL_RANK)
    phases = diag / np.abs(diag)
    q = q * phases[np.newaxis, :]
    r = phases.conj()[:, np.newaxis] * r
    # exact zeros below the diagonal, exact real diagonal
    r[np.tril_indices(cols, -1)] = 0.0
    idx = np.arange(cols)
    r[idx, idx] = r[idx, idx].real
    return QrFactors(q=q, r=r)


def svd(a):
    """Full SVD, sigma sorted non-increasingly; a = u @ diag(sigma) @ v^H."""
    m = as_cmatrix(a)
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(str(exc)) from exc
    return SvdFactors(u=u, sigma=s, v=vh.conj().T)


def adjugate(a):
    """Adjugate (transpose of the cofactor matrix).

    Polynomial in the entries, so it is well defined for singular input.
    Closed forms for n <= 2; cofactor expansion above that (intended for
    the small matrices this package works with).
    """
    m = as_cmatrix(a)
    n, cols = m.shape
    if n != cols:
        raise NotSquareError("adjugate needs a square matrix")
    if n == 1:
        return np.ones((1, 1), dtype=np.complex128)
    if n == 2:
        return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])
    adj = np.empty((n, n), dtype=np.complex128)
    rows_mask = np.ones(n, dtype=bool)
    cols_mask = np.ones(n, dtype=bool)
    for i in range(n):
        rows_mask[i] = False
        for j in range(n):
            cols_mask[j] = False
            minor = m[np.ix_(rows_mask, cols_mask)]
            adj[j, i] = (-1) ** (i + j) * np.linalg.det(minor)
            cols_mask[j] = True
        rows_mask[i] = True
    return adj


def time_extend(a, n_ext):
    """Block-diagonal matrix with ``n_ext`` copies of ``a``."""
    m = as_cmatrix(a)
    if n_ext < 1:
        raise LengthMismatchError("n_ext must be >= 1")
    return np.kron(np.eye(n_ext), m)


def extraction_matrix(n, indices):
    """n-by-k matrix whose columns are the listed standard basis vectors.

    ``indices`` are 1-based and must be distinct.  E^H A E picks out the
    submatrix of A at those index pairs, in the listed order.
    """
    idx = list(indices)
    k = len(idx)
    out = np.zeros((n, k), dtype=np.complex128)
    seen = set()
    for col, i in enumerate(idx):
        if not 1 <= i <= n:
            raise IndexOutOfRangeError("index %r outside 1..%d" % (i, n))
        if i in seen:
            raise DuplicateIndexError("index %r listed twice" % (i,))
        seen.add(i)
        out[i - 1, col] = 1.0
    return out


def embed(n, b, index_groups):
    """Overwrite I_n with copies of ``b`` on each coordinate group.

    Each group is a tuple of 1-based positions, one per row/column of ``b``;
    entry (i, j) of ``b`` lands at (group[i], group[j]).  Groups must be
    pairwise disjoint, so embedding a unitary block keeps the result unitary.
    """
    block = as_cmatrix(b)
    k, k2 = block.shape
    if k != k2:
        raise NotSquareError("embedded block must be square")
    out = np.eye(n, dtype=np.complex128)
    used = set()
    for group in index_groups:
        g = list(group)
        if len(g) != k:
            raise LengthMismatchError(
                "group %r has %d entries, block is %d-by-%d" % (g, len(g), k, k))
        for i in g:
            if not 1 <= i <= n:
                raise IndexOutOfRangeError("index %r outside 1..%d" % (i, n))
            if i in used:
                raise OverlappingGroupsError("index %r appears in two groups" % (i,))
            used.add(i)
        pos = [i - 1 for i in g]
        out[np.ix_(pos, pos)] = block
    return out


def majorizes(x, y, tol=TOL_MAJOR):
    """Multiplicative majorization x >= y.

    True iff the sorted prefix products of x dominate those of y and the
    total products agree, compared on the log scale with ``tol`` slack
    (so exact boundary cases such as the constant-diagonal target pass).
    """
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.ndim != 1 or yv.ndim != 1 or xv.size != yv.size:
        raise LengthMismatchError("majorizes needs two equal-length vectors")
    if xv.size == 0:
        return True
    if np.any(xv <= 0) or np.any(yv <= 0):
        raise NonPositiveEntryError("majorization is defined for positive vectors")
    lx = np.sort(np.log(xv))[::-1]
    ly = np.sort(np.log(yv))[::-1]
    cx = np.cumsum(lx)
    cy = np.cumsum(ly)
    if abs(cx[-1] - cy[-1]) > tol:
        return False
    return bool(np.all(cx[:-1] >= cy[:-1] - tol))


# --- JSON interchange --------------------------------------------------------


def matrix_to_json(a):
    """Matrix as {"rows", "cols", "data": [[re, im], ...]} in row-major order.

    Floats survive a JSON round trip exactly (serialized with Python's
    shortest round-trip decimal representation).
    """
    m = as_cmatrix(a)
    rows, cols = m.shape
    flat = m.reshape(-1)
    return {
        "rows": rows,
        "cols": cols,
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(obj):
    """Inverse of :func:`matrix_to_json`."""
    try:
        rows = int(obj["rows"])
        cols = int(obj["cols"])
        data = obj["data"]
    except (TypeError, KeyError) as exc:
        raise ParseError("matrix object needs rows/cols/data fields") from exc
    if rows < 0 or cols < 0 or len(data) != rows * cols:
        raise ParseError("data length %d does not match %d x %d" % (len(data), rows, cols))
    out = np.empty(rows * cols, dtype=np.complex128)
    for i, pair in enumerate(data):
        try:
            re, im = pair
        except (TypeError, ValueError) as exc:
            raise ParseError("entry %d is not an [re, im] pair" % i) from exc
        out[i] = complex(float(re), float(im))
    return out.reshape(rows, cols)
