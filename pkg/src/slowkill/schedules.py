"""Cooling schedules for the cardinality, the scaled shrinkage rule, and the
warm-started line search on the inverse learning rate.
"""

import enum
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import NonFiniteError
from .losses import _bregman, _gradient
from .thresholding import DEFAULT_POLICY, group_quantile_threshold


class ScheduleKind(enum.Enum):
    INVERSE = "inverse"
    SIGMOIDAL = "sigmoidal"
    CONSTANT = "constant"


def inverse_cooling(p, q, T, t):
    """Cardinality q_{t+1} of the inverse schedule; q_1 = p/2 and q_{T+1} = q."""
    p, q, T, t = int(p), int(q), int(T), int(t)
    if p <= 2 * q:
        raise ValueError(f"inverse schedule needs p > 2q (p={p}, q={q}); use a constant schedule")
    if not 0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    # (T - t) / (tT/(p - q) + 2T/(p - 2q)) as one integer ratio, floored exactly
    num = (T - t) * (p - q) * (p - 2 * q)
    den = t * T * (p - 2 * q) + 2 * T * (p - q)
    val = q + num // den
    return int(min(max(val, q), p))


def sigmoidal_cooling(p, q, T, t, a=1.0, b=10.0, c=1.0):
    """Cardinality of the sigmoidal schedule ``q + (p - q) / (1 + a e^{bt/T})^c``.

    The last step (t >= T) returns exactly ``q``.
    """
    if min(a, b, c) <= 0:
        raise ValueError("sigmoid shape parameters must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t >= T:
        return int(q)
    val = math.floor(q + (p - q) / (1.0 + a * math.exp(b * t / T)) ** c)
    return int(min(max(val, q), p))


@dataclass(frozen=True)
class ScheduleSpec:
    kind: ScheduleKind = ScheduleKind.INVERSE
    T: int = 100
    target_q: int = 1
    sigmoid_a: float = 1.0
    sigmoid_b: float = 10.0
    sigmoid_c: float = 1.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.target_q < 1:
            raise ValueError("target_q must be at least 1")

    def effective_kind(self, p):
        if self.kind is ScheduleKind.INVERSE and p <= 2 * self.target_q:
            return ScheduleKind.CONSTANT
        return self.kind

    def cardinality(self, t, p):
        """q_{t+1}: the cardinality used by update number t (0-based)."""
        kind = self.effective_kind(p)
        q = self.target_q
        if kind is ScheduleKind.CONSTANT or t >= self.T:
            return q
        if kind is ScheduleKind.INVERSE:
            return inverse_cooling(p, q, self.T, t)
        return sigmoidal_cooling(p, q, self.T, t, self.sigmoid_a, self.sigmoid_b, self.sigmoid_c)

    def sequence(self, p):
        """Cardinalities for updates 0..T."""
        return [self.cardinality(t, p) for t in range(self.T + 1)]


def sbar(q, n, p, L):
    """Surrogate for the true sparsity: min(q, n L^2 / log(e p))."""
    return min(q, n * L * L / (1.0 + math.log(p)))


@dataclass(frozen=True)
class ShrinkagePlan:
    eta0: float
    lipschitz: float
    n: int
    p: int
    q: int

    def __post_init__(self):
        if self.eta0 < 0:
            raise ValueError("eta0 must be nonnegative")


def eta_bar(q_plus, rho_plus, plan):
    """Scaled l2 shrinkage for the next update.

    Large cardinalities (more than twice the target) get the rate-free
    value ``1/(2 sqrt(q_plus/sbar) - 1)``; near the target the shrinkage is
    ``eta0/rho_plus``; in between the smaller of the two.
    """
    shrink = plan.eta0 / rho_plus
    if q_plus <= 2 * plan.q:
        return shrink
    sb = sbar(plan.q, plan.n, plan.p, plan.lipschitz)
    early = 1.0 / (2.0 * math.sqrt(q_plus / sb) - 1.0)
    if plan.q >= plan.n / 2:
        return early
    return min(shrink, early)


def spectral_norm_sq(X, iters=50, seed=0):
    """Estimate ||X||_2^2 by power iteration on X^H X."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = X.conj().T @ (X @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(np.linalg.norm(X @ v) ** 2)


class LineSearchResult(NamedTuple):
    rho: float
    beta: np.ndarray
    xb: np.ndarray
    accepted: bool
    trials: int


def _fitted(X, beta):
    nz = np.flatnonzero(np.any(beta != 0, axis=1)) if beta.ndim == 2 else np.flatnonzero(beta)
    if nz.size == X.shape[1]:
        return X @ beta
    return X[:, nz] @ beta[nz]


def _search(loss, X, beta_prev, xb_prev, grad, q, eta_fn, rho_start, alpha, M, policy):
    def trial(rho):
        eb = eta_fn(rho)
        b = group_quantile_threshold(beta_prev - grad / rho, q, eb, policy)
        xb = _fitted(X, b)
        d = b - beta_prev
        dd = float(np.sum(d.real ** 2 + d.imag ** 2)) if np.iscomplexobj(d) else float(np.sum(d * d))
        half = 0.5 * rho * dd
        gap = half - _bregman(loss, xb, xb_prev)
        return b, xb, gap >= -1e-12 * (1.0 + half), dd == 0.0

    rho = rho_start
    beta, xb, ok, still = trial(rho)
    moves = 0
    if ok:
        while moves < M and not still:
            cand = alpha * rho
            b, fx, ok_c, still_c = trial(cand)
            moves += 1
            if not ok_c:
                break
            rho, beta, xb, still = cand, b, fx, still_c
        return LineSearchResult(rho, beta, xb, True, moves + 1)
    while moves < M:
        rho = rho / alpha
        beta, xb, ok, _ = trial(rho)
        moves += 1
        if ok:
            return LineSearchResult(rho, beta, xb, True, moves + 1)
    return LineSearchResult(rho, beta, xb, False, moves + 1)


def line_search(loss, X, y, beta_prev, q_next, eta_bar_next, rho_start, alpha=0.5, M=5, policy=DEFAULT_POLICY):
    """Warm-started geometric search for the inverse learning rate.

    Starting from ``rho_start`` the trial value is multiplied by ``alpha``
    while the majorization gap at the thresholded step stays nonnegative,
    or divided by ``alpha`` until it becomes nonnegative, using at most
    ``M`` moves. ``eta_bar_next`` may be a number or a callable of rho.

    Returns a :class:`LineSearchResult`; ``accepted`` is False when no trial
    within ``M`` moves satisfied the criterion, in which case the largest
    tried rho and its step are returned and a warning is issued.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if M < 1:
        raise ValueError("M must be at least 1")
    if not rho_start > 0:
        raise ValueError("rho_start must be positive")
    X = np.asarray(X)
    beta_prev = np.asarray(beta_prev)
    xb_prev = X @ beta_prev
    grad = X.conj().T @ _gradient(loss, xb_prev, np.asarray(y).reshape(xb_prev.shape))
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite gradient")
    eta_fn = eta_bar_next if callable(eta_bar_next) else (lambda rho: eta_bar_next)
    res = _search(loss, X, beta_prev, xb_prev, grad, q_next, eta_fn, rho_start, alpha, M, policy)
    if not res.accepted:
        warnings.warn(f"line search did not satisfy the majorization criterion within M={M} moves", RuntimeWarning)
    return res
