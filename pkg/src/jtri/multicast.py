"""Gaussian MIMO multicast layer.

Capacity quantities (log-det mutual information, worst-user rate),
canonical channel matrices, per-stream rate accounting, a deterministic
Monte-Carlo simulator of the successive-interference-cancellation
receiver, and generators for the worked channel families (rateless,
permuted parallel channels, degrees-of-freedom mismatch).

Conventions: noise is unit-variance circularly-symmetric complex
Gaussian per receive dimension, rates are bits per channel use, and the
reference input is white, cov = (P / n_t) I, unless a covariance is
given explicitly.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import (
    BadKError,
    DiagBelowOneError,
    DimensionMismatchError,
    NotPsdError,
    ShapeMismatchError,
    TooManyUsersError,
)
from .joint import JointFactors
from .spacetime import SpaceTimeFactors


@dataclass
class MulticastProblem:
    """Per-user channel matrices, shared input covariance, power budget."""
    users: list            # H_k, each n_r_k x n_t
    cov: np.ndarray        # n_t x n_t Hermitian PSD
    power: float

    def __post_init__(self):
        self.users = [matcore.as_cmatrix(h) for h in self.users]
        self.cov = matcore.as_cmatrix(self.cov)
        n_t = self.cov.shape[0]
        if self.cov.shape != (n_t, n_t):
            raise ShapeMismatchError("covariance must be square")
        for h in self.users:
            if h.shape[1] != n_t:
                raise ShapeMismatchError(
                    "user channel has %d columns, covariance is %d-dim"
                    % (h.shape[1], n_t))
        if np.trace(self.cov).real > self.power + matcore.TOL_ZERO:
            raise ShapeMismatchError("trace of covariance exceeds the power budget")

    @property
    def n_t(self):
        return self.cov.shape[0]


@dataclass
class SchemeRates:
    per_stream_snr: np.ndarray
    per_stream_rate: np.ndarray
    total_rate: float


@dataclass
class SicReport:
    """Measured vs predicted post-cancellation SNR for one user."""
    measured_snr: np.ndarray
    predicted_snr: np.ndarray
    std_error: np.ndarray
    trials: int
    seed: int


def _check_psd(cov):
    c = matcore.as_cmatrix(cov)
    scale = np.max(np.abs(c)) + 1.0
    if np.max(np.abs(c - c.conj().T)) > 1e-9 * scale:
        raise NotPsdError("covariance is not Hermitian")
    w = np.linalg.eigvalsh(0.5 * (c + c.conj().T))
    if w[0] < -1e-9 * scale:
        raise NotPsdError("covariance has a negative eigenvalue %.3g" % w[0])
    return 0.5 * (c + c.conj().T)


def mutual_info(h, cov):
    """log2 det(I + H C H^H) in bits per channel use."""
    hm = matcore.as_cmatrix(h)
    c = _check_psd(cov)
    if hm.shape[1] != c.shape[0]:
        raise DimensionMismatchError("channel/covariance size mismatch")
    gram = np.eye(hm.shape[0]) + hm @ c @ hm.conj().T
    sign, logdet = np.linalg.slogdet(gram)
    return float(max(logdet, 0.0) / np.log(2.0))


def multicast_rate(problem):
    """Worst-user mutual information at the problem's fixed covariance."""
    return min(mutual_info(h, problem.cov) for h in problem.users)


def cov_sqrt(cov):
    """Lower-triangular factor B with B B^H = cov (positive diagonal on
    the positive-definite part; zero columns where the covariance is
    singular)."""
    c = _check_psd(cov)
    n = c.shape[0]
    scale = np.max(np.abs(c)) + 1e-300
    b = np.zeros((n, n), dtype=np.complex128)
    work = c.copy()
    for j in range(n):
        pivot = work[j, j].real
        if pivot < -1e-9 * scale:
            raise NotPsdError("negative pivot in Cholesky factorization")
        if pivot <= 1e-14 * scale:
            continue
        root = np.sqrt(pivot)
        b[j, j] = root
        if j + 1 < n:
            col = work[j + 1:, j] / root
            b[j + 1:, j] = col
            work[j + 1:, j + 1:] -= np.outer(col, col.conj())
    return b


def canonical_matrix(h, cov):
    """Upper-triangular factor G of the noise-augmented channel: stack
    H C^(1/2) on top of the identity and take the QR triangle.  Then
    det(G^H G) = 2^I(H, C), so 2 * sum(log2 diag(G)) is the mutual
    information."""
    return _augmented_qr(h, cov).r


def _augmented_qr(h, cov):
    hm = matcore.as_cmatrix(h)
    c = _check_psd(cov)
    if hm.shape[1] != c.shape[0]:
        raise DimensionMismatchError("channel/covariance size mismatch")
    n_t = c.shape[0]
    aug = np.vstack([hm @ cov_sqrt(c), np.eye(n_t)])
    return matcore.qr(aug)


def scheme_rates(diag, n_ext=1):
    """Stream SNRs r_j^2 - 1 and rates log2(r_j^2); the total is
    normalized per channel use of the extension."""
    d = np.asarray(diag, dtype=float)
    if np.any(d < 1.0 - matcore.TOL_ZERO):
        raise DiagBelowOneError("scheme diagonal entries must be >= 1")
    d = np.maximum(d, 1.0)
    snr = d * d - 1.0
    rate = 2.0 * np.log2(d)
    return SchemeRates(per_stream_snr=snr, per_stream_rate=rate,
                       total_rate=float(np.sum(rate)) / int(n_ext))


def _factor_views(problem, factors):
    """Per-user (u, n_ext) views of JointFactors or SpaceTimeFactors."""
    if isinstance(factors, JointFactors):
        if len(factors.users) != len(problem.users):
            raise DimensionMismatchError("one factor pair per user required")
        return [(u, 1) for (u, _r) in factors.users]
    if isinstance(factors, SpaceTimeFactors):
        if factors.k_users != len(problem.users):
            raise DimensionMismatchError("one factor pair per user required")
        if factors.n != problem.n_t:
            raise DimensionMismatchError("factor block size differs from n_t")
        return [(u, factors.n_ext) for (u, _t) in factors.users]
    raise DimensionMismatchError("unsupported factors object")


def simulate_sic(problem, factors, trials, seed, noise=True):
    """Monte-Carlo measurement of the per-stream SNR seen by the
    successive-cancellation receiver, one report per user.

    Unit-variance symbols enter through the shared precoder, each user
    filters with its own left factor, and already-decoded streams are
    removed exactly (genie-aided, as appropriate for capacity-achieving
    scalar codes).  The remaining interference plus filtered noise is the
    denominator.  Predicted SNRs are r_j^2 - 1 from the effective
    triangular matrix.  With ``noise=False`` interference-free streams
    report infinite SNR.

    Deterministic for a fixed (seed, trials): draws come from a
    counter-based generator in a fixed order, and the estimator uses
    numpy reductions only.

    For square (exact) factors the measured SNR converges to the
    prediction on every stream.  For rectangular time-extension factors
    the interior streams behave the same way, but the few streams
    adjacent to the discarded coordinates can deviate, since the exact
    cancellation identity involves the dropped subspace.
    """
    if trials < 1:
        raise DimensionMismatchError("trials must be positive")
    views = _factor_views(problem, factors)
    v = factors.v
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    m_streams = v.shape[1]
    x_sym = (rng.standard_normal((m_streams, trials))
             + 1j * rng.standard_normal((m_streams, trials))) / np.sqrt(2.0)
    reports = []
    for (h, (u, n_ext)) in zip(problem.users, views):
        qfac = _augmented_qr(h, problem.cov)
        g = qfac.r
        q1 = qfac.q[:h.shape[0], :]
        if n_ext > 1:
            q1 = matcore.time_extend(q1, n_ext)
            g = matcore.time_extend(g, n_ext)
        if u.shape[0] != g.shape[0] or v.shape[0] != g.shape[0]:
            raise DimensionMismatchError("factor height differs from extended n_t")
        front = u.conj().T @ q1.conj().T          # m x (n_r * n_ext)
        signal = front @ (q1 @ (g @ v))           # m x m effective matrix
        r_eff = u.conj().T @ (g @ v)
        predicted = np.abs(np.diag(r_eff)) ** 2 - 1.0
        y_eff = signal @ x_sym
        if noise:
            z = (rng.standard_normal((q1.shape[0], trials))
                 + 1j * rng.standard_normal((q1.shape[0], trials))) / np.sqrt(2.0)
            y_eff = y_eff + front @ z
        measured = np.empty(m_streams)
        stderr = np.empty(m_streams)
        for j in range(m_streams):
            decoded = y_eff[j] - signal[j, j + 1:] @ x_sym[j + 1:]
            sig = signal[j, j] * x_sym[j]
            noise_part = decoded - sig
            p_sig = np.abs(sig) ** 2
            p_noise = np.abs(noise_part) ** 2
            ms, mn = np.mean(p_sig), np.mean(p_noise)
            if mn <= 1e-20 * ms:
                # interference-free stream measured without noise injection:
                # the denominator is pure floating-point residue
                measured[j] = np.inf
                stderr[j] = np.inf
                continue
            ratio = ms / mn
            rel_var = (np.var(p_sig) / (ms * ms) + np.var(p_noise) / (mn * mn)) / trials
            measured[j] = ratio
            stderr[j] = ratio * np.sqrt(max(rel_var, 0.0))
        reports.append(SicReport(measured_snr=measured, predicted_snr=predicted,
                                 std_error=stderr, trials=int(trials),
                                 seed=int(seed)))
    return reports


# --- worked channel families --------------------------------------------------


def rateless_channels(k_rates, total_rate):
    """Channel family for incremental-redundancy coding: user k keeps the
    first k of K unit blocks with gain alpha_k = sqrt(2^(C/k) - 1), so
    every user's white-input mutual information equals C."""
    if k_rates < 1:
        raise ShapeMismatchError("k_rates must be >= 1")
    if not total_rate > 0:
        raise ShapeMismatchError("total rate must be positive")
    out = []
    for k in range(1, k_rates + 1):
        alpha = np.sqrt(2.0 ** (total_rate / k) - 1.0)
        h = np.zeros((k, k_rates), dtype=np.complex128)
        h[:, :k] = alpha * np.eye(k)
        out.append(h)
    return out


def rateless3_reduce(total_rate):
    """Closed-form 2x2 residual pair of the three-rate problem after
    eliminating the common first precoder column; both outputs have unit
    determinant and the second is diag(b, 1/b) with b = 2^(C/12)."""
    if not total_rate > 0:
        raise ShapeMismatchError("total rate must be positive")
    b = 2.0 ** (total_rate / 12.0)
    b2, b4, b6, b8 = b ** 2, b ** 4, b ** 6, b ** 8
    core = np.sqrt(1.0 - b2 + b8)
    a1 = np.array([
        [core / b2, (b6 - 1.0) / (b * np.sqrt((1.0 - b2 + b8) * (1.0 + b2 + b4)))],
        [0.0, b2 / core],
    ], dtype=np.complex128)
    a2 = np.diag([b, 1.0 / b]).astype(np.complex128)
    return a1, a2


def permuted_channels(gains):
    """All K! diagonal channels obtained by permuting the given gains."""
    g = np.asarray(gains, dtype=float)
    if g.ndim != 1 or g.size < 1:
        raise ShapeMismatchError("gains must be a nonempty vector")
    if np.any(g <= 0):
        raise ShapeMismatchError("gains must be positive")
    if g.size > 4:
        raise TooManyUsersError("factorial enumeration capped at 4 gains")
    return [np.diag(np.asarray(p, dtype=np.complex128))
            for p in itertools.permutations(g)]


def dft_precoder(k):
    """The capacity-achieving precoder for permuted parallel channels:
    the scaled Hadamard matrix for two channels, the 3x3 DFT for three."""
    if k == 2:
        return np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0)
    if k == 3:
        e = np.exp(2j * np.pi / 3.0)
        return np.array([
            [1.0, 1.0, 1.0],
            [1.0, e, 1.0 / e],
            [1.0, 1.0 / e, e],
        ]) / np.sqrt(3.0)
    raise BadKError("closed-form precoder available for k in {2, 3} only")


@dataclass
class DofMismatchExample:
    """Degrees-of-freedom-mismatch worked example: the problem instance,
    the gains, the closed-form precoder, and (three-user variant) the
    mixed-orientation triangular targets."""
    problem: MulticastProblem
    gains: list
    precoder: np.ndarray
    t_matrices: list | None


def dof_mismatch_example(c_ptp, variant="two_user"):
    """Channel families in which users disagree on their antenna count but
    share the same white-input mutual information c_ptp (power fixed to 1,
    cov = I/2)."""
    if not c_ptp > 0:
        raise ShapeMismatchError("c_ptp must be positive")
    power = 1.0
    cov = np.eye(2, dtype=np.complex128) * (power / 2.0)
    alpha_full = np.sqrt(2.0 * (2.0 ** c_ptp - 1.0))        # one active antenna
    alpha_wide = np.sqrt(2.0 * (2.0 ** (c_ptp / 2.0) - 1.0))  # both antennas
    root = 2.0 ** (c_ptp / 4.0)
    precoder = np.sqrt(1.0 / (2.0 ** (c_ptp / 2.0) + 1.0)) * np.array(
        [[1.0, root], [root, -1.0]], dtype=np.complex128)
    if variant == "two_user":
        users = [
            np.array([[alpha_full, 0.0]], dtype=np.complex128),
            alpha_wide * np.eye(2, dtype=np.complex128),
        ]
        problem = MulticastProblem(users=users, cov=cov, power=power)
        return DofMismatchExample(problem=problem, gains=[alpha_full, alpha_wide],
                                  precoder=precoder, t_matrices=None)
    if variant == "three_user":
        users = [
            alpha_wide * np.eye(2, dtype=np.complex128),
            np.array([[alpha_full, 0.0]], dtype=np.complex128),
            np.array([[0.0, alpha_full]], dtype=np.complex128),
        ]
        problem = MulticastProblem(users=users, cov=cov, power=power)
        off = (2.0 ** c_ptp - 1.0) / (2.0 ** (c_ptp / 2.0) + 1.0)
        t_matrices = [
            root * np.eye(2, dtype=np.complex128),
            np.array([[root, off], [0.0, root]], dtype=np.complex128),
            np.array([[root, 0.0], [-off, root]], dtype=np.complex128),
        ]
        return DofMismatchExample(problem=problem,
                                  gains=[alpha_wide, alpha_full, alpha_full],
                                  precoder=precoder, t_matrices=t_matrices)
    raise ShapeMismatchError("variant must be 'two_user' or 'three_user'")
