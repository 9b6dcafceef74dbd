"""Slow-kill iterations: thresholded gradient steps under a cooling
cardinality schedule, adaptive shrinkage and a line-searched learning rate,
followed by a restricted polish and optional refit.
"""

import dataclasses
import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .exceptions import DimensionError, NonFiniteError
from .losses import LossSpec, _gradient, _value, check_response, sigmoid, softplus
from .schedules import (
    ScheduleKind,
    ScheduleSpec,
    ShrinkagePlan,
    _search,
    eta_bar,
    spectral_norm_sq,
)
from .thresholding import ThresholdPolicy, TieMode, group_quantile_threshold


@dataclass(frozen=True)
class Problem:
    """An estimation instance.

    ``X`` is n x p (real, or complex for the MMV loss); ``y`` is an n-vector
    or an n x m matrix. With ``add_intercept`` a ones column is prepended to
    the working design and exempted from thresholding and shrinkage.
    """

    X: np.ndarray
    y: np.ndarray
    loss: LossSpec = LossSpec.QUADRATIC
    add_intercept: bool = False

    def __post_init__(self):
        X = np.asarray(self.X)
        if X.ndim != 2:
            raise DimensionError(f"design must be 2-d, got ndim={X.ndim}")
        n, p = X.shape
        if n < 1 or p < 2:
            raise DimensionError(f"need n >= 1 and p >= 2, got n={n}, p={p}")
        if np.iscomplexobj(X) and self.loss is not LossSpec.COMPLEX_MMV:
            raise DimensionError(f"complex design requires the complex-mmv loss, not {self.loss.value}")
        y = check_response(self.loss, self.y)
        if y.shape[0] != n:
            raise DimensionError(f"response has {y.shape[0]} rows, design has {n}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("design and response must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def m(self):
        return 1 if self.y.ndim == 1 else self.y.shape[1]

    @property
    def is_complex(self):
        return np.iscomplexobj(self.X) or np.iscomplexobj(self.y)

    @property
    def offset(self):
        """Column offset of original predictors inside the working design."""
        return 1 if self.add_intercept else 0

    @property
    def protected(self):
        return (0,) if self.add_intercept else ()

    @cached_property
    def design(self):
        if not self.add_intercept:
            return self.X
        return np.hstack([np.ones((self.n, 1), dtype=self.X.dtype), self.X])

    @cached_property
    def Y(self):
        y = self.y.reshape(self.n, self.m)
        return y.astype(complex) if self.is_complex else y.astype(float)

    def coef_dtype(self):
        return complex if self.is_complex else float


@dataclass
class SolverConfig:
    q: int
    eta0: float = 50.0
    schedule: Optional[ScheduleSpec] = None
    alpha: float = 0.5
    max_search: int = 5
    line_search: bool = True
    squeeze: bool = True
    k0: int = 2
    polish_tol: float = 1e-8
    polish_max_iter: int = 500
    refit: bool = False
    refit_ridge: float = 1e-8
    stable_iters: int = 3
    max_iter: int = 1000
    max_rounds: int = 20
    rho0: Optional[float] = None
    beta0: Optional[np.ndarray] = None
    tie_mode: TieMode = TieMode.LOWEST_INDEX_WINS
    callback: Optional[Callable] = None

    def schedule_spec(self):
        if self.schedule is None:
            return ScheduleSpec(ScheduleKind.INVERSE, T=100, target_q=self.q)
        if self.schedule.target_q != self.q:
            return dataclasses.replace(self.schedule, target_q=self.q)
        return self.schedule

    def validate(self, problem):
        if not 1 <= self.q < problem.p:
            raise ValueError(f"q={self.q} must satisfy 1 <= q < p={problem.p}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_search < 1:
            raise ValueError("max_search must be at least 1")
        if self.eta0 < 0:
            raise ValueError("eta0 must be nonnegative")
        if min(self.polish_tol, self.refit_ridge) < 0 or self.polish_tol == 0:
            raise ValueError("tolerances must be positive")
        if self.k0 < 1 or self.stable_iters < 1:
            raise ValueError("k0 and stable_iters must be at least 1")


@dataclass
class SolverState:
    beta: np.ndarray  # (len(active), m) over working-design columns
    active: np.ndarray  # working-design column index of each row of beta
    xb: np.ndarray
    rho: float
    t: int = 0
    q_t: int = 0
    eta_bar_t: float = 0.0
    objective_trace: list = field(default_factory=list)
    rho_trace: list = field(default_factory=list)
    q_trace: list = field(default_factory=list)
    eta_bar_trace: list = field(default_factory=list)
    accepted_trace: list = field(default_factory=list)
    squeeze_events: list = field(default_factory=list)
    next_squeeze_k: int = 1
    warnings: int = 0
    Xa: Optional[np.ndarray] = None
    XaH: Optional[np.ndarray] = None

    @property
    def support(self):
        """Working-design indices with a nonzero coefficient row."""
        return self.active[np.any(self.beta != 0, axis=1)]

    def protected_positions(self, problem):
        return tuple(np.flatnonzero(np.isin(self.active, problem.protected)))


@dataclass
class FitResult:
    beta_hat: np.ndarray
    support: np.ndarray
    intercept: Optional[object]
    objective_trace: list
    rho_trace: list
    q_trace: list
    eta_bar_trace: list
    accepted_trace: list
    fixed_point_residual: float
    line_search_warnings: int
    wall_time: float
    iterations: int
    rho_final: float
    squeeze_events: list
    polished_beta: np.ndarray
    polished_intercept: Optional[object] = None
    refit_singular: bool = False
    active: Optional[np.ndarray] = None  # original columns still in the working design at the end


def _adjoint(X):
    return X.conj().T if np.iscomplexobj(X) else X.T


def _objective(problem, beta, xb, eta0, protected_pos):
    pen = beta
    if protected_pos:
        pen = np.delete(beta, protected_pos, axis=0)
    return _value(problem.loss, xb, problem.Y) + 0.5 * eta0 * float(np.sum(np.abs(pen) ** 2))


def init_state(problem, config):
    """Starting state: all working columns active, beta0 (default zero)."""
    design = problem.design
    p_work = design.shape[1]
    beta = np.zeros((p_work, problem.m), dtype=problem.coef_dtype())
    if config.beta0 is not None:
        b0 = np.asarray(config.beta0).reshape(problem.p, problem.m)
        beta[problem.offset:] = b0
        if np.count_nonzero(np.any(b0 != 0, axis=1)) > config.q and config.schedule_spec().effective_kind(problem.p) is ScheduleKind.CONSTANT:
            warnings.warn("warm start has more nonzeros than q; descent guarantees start after the first step")
    rho = config.rho0
    if rho is None:
        rho = problem.loss.lipschitz * spectral_norm_sq(design)
        if rho <= 0:
            rho = 1.0
    state = SolverState(
        beta=beta,
        active=np.arange(p_work),
        xb=design @ beta,
        rho=float(rho),
        q_t=problem.p,
        next_squeeze_k=config.k0,
        Xa=design,
        XaH=_adjoint(design),
    )
    return state


def _plan(problem, config):
    return ShrinkagePlan(config.eta0, problem.loss.lipschitz, problem.n, problem.p, config.q)


def step(state, problem, config):
    """One slow-kill update; mutates and returns ``state``."""
    schedule = config.schedule_spec()
    prot = state.protected_positions(problem)
    free_active = state.beta.shape[0] - len(prot)
    q_next = min(schedule.cardinality(state.t, problem.p), free_active)
    grad = state.XaH @ _gradient(problem.loss, state.xb, problem.Y)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError(f"non-finite gradient at iteration {state.t}")
    plan = _plan(problem, config)
    policy = ThresholdPolicy(config.tie_mode, prot)
    res = _search(
        problem.loss, state.Xa, state.beta, state.xb, grad, q_next,
        lambda rho: eta_bar(q_next, rho, plan),
        state.rho, config.alpha, config.max_search if config.line_search else 0, policy,
    )
    if not res.accepted:
        state.warnings += 1
    state.beta, state.xb, state.rho = res.beta, res.xb, res.rho
    state.q_t = q_next
    state.eta_bar_t = eta_bar(q_next, res.rho, plan)
    state.t += 1
    state.objective_trace.append(_objective(problem, state.beta, state.xb, config.eta0, prot))
    state.rho_trace.append(res.rho)
    state.q_trace.append(q_next)
    state.eta_bar_trace.append(state.eta_bar_t)
    state.accepted_trace.append(res.accepted)
    return state


def squeeze(state, problem=None):
    """Drop every active column whose coefficient row is zero (protected kept)."""
    keep = np.any(state.beta != 0, axis=1)
    if problem is not None and problem.protected:
        keep |= np.isin(state.active, problem.protected)
    if np.all(keep):
        return state
    state.beta = state.beta[keep]
    state.active = state.active[keep]
    state.Xa = np.ascontiguousarray(state.Xa[:, keep])
    state.XaH = _adjoint(state.Xa)
    state.squeeze_events.append((state.t, state.active.copy()))
    return state


def _maybe_squeeze(state, problem, config):
    if not config.squeeze:
        return
    schedule = config.schedule_spec()
    if schedule.effective_kind(problem.p) is ScheduleKind.CONSTANT or state.t > schedule.T:
        return
    fire = False
    while state.q_t < problem.p / 2.0 ** state.next_squeeze_k:
        fire = True
        state.next_squeeze_k += 1
    if fire:
        squeeze(state, problem)


def _fp_residual(loss, Xa, Y, beta, rho, q, eta_b, policy):
    xb = Xa @ beta
    g = _adjoint(Xa) @ _gradient(loss, xb, Y)
    q = min(q, beta.shape[0] - len(policy.protected_indices))
    target = group_quantile_threshold(beta - g / rho, q, eta_b, policy)
    return float(np.max(np.abs(beta - target))) if beta.size else 0.0


def _full_coef(problem, beta, intercept=None):
    b = np.asarray(beta).reshape(problem.p, problem.m).astype(problem.coef_dtype())
    if problem.add_intercept:
        icpt = np.zeros((1, problem.m), dtype=b.dtype) if intercept is None else np.asarray(intercept, dtype=b.dtype).reshape(1, problem.m)
        b = np.vstack([icpt, b])
    return b


def fixed_point_residual(beta, problem, rho, q, eta_bar, intercept=None):
    """Sup-norm distance between ``beta`` and one thresholded gradient step from it.

    ``beta`` is indexed like the columns of ``problem.X``; the intercept (if
    the problem has one) is passed separately and is never thresholded.
    """
    b = _full_coef(problem, beta, intercept)
    policy = ThresholdPolicy(protected_indices=problem.protected)
    return _fp_residual(problem.loss, problem.design, problem.Y, b, rho, q, eta_bar, policy)


def _restricted_fit(loss, A, Y, start, penalty, tol, max_iter):
    """Minimize l0(A g; Y) + 0.5 sum(penalty * |g|^2) over g.

    Quadratic losses are solved directly by least squares on the augmented
    system; logistic uses damped Newton. Returns (g, grad_inf_norm, singular).
    """
    k = A.shape[1]
    if k == 0:
        return start.copy(), 0.0, False
    if loss is not LossSpec.LOGISTIC:
        aug = np.vstack([A, np.diag(np.sqrt(penalty)).astype(A.dtype)])
        rhs = np.vstack([Y, np.zeros((k, Y.shape[1]), dtype=Y.dtype)])
        g, _, rank, _ = np.linalg.lstsq(aug, rhs, rcond=None)
        grad = _adjoint(A) @ (A @ g - Y) + penalty[:, None] * g
        return g, float(np.max(np.abs(grad))), rank < k
    y = Y[:, 0]
    g = start[:, 0].astype(float).copy()
    singular = False

    def obj(v):
        xb = A @ v
        return float(np.sum(softplus(xb) - y * xb)) + 0.5 * float(penalty @ (v * v))

    f = obj(g)
    gn = np.inf
    for _ in range(max_iter):
        xb = A @ g
        mu = sigmoid(xb)
        grad = A.T @ (mu - y) + penalty * g
        gn = float(np.max(np.abs(grad)))
        if gn <= tol:
            break
        w = mu * (1.0 - mu)
        H = A.T @ (w[:, None] * A) + np.diag(penalty)
        try:
            direction = np.linalg.solve(H, grad)
            if not np.all(np.isfinite(direction)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            singular = True
            direction = np.linalg.lstsq(H, grad, rcond=None)[0]
        slope = float(grad @ direction)
        if slope <= 0:
            direction, slope = grad, float(grad @ grad)
        s = 1.0
        while True:
            cand = g - s * direction
            fc = obj(cand)
            if fc <= f - 1e-4 * s * slope or s < 1e-12:
                break
            s *= 0.5
        if fc > f:
            break
        g, f = cand, fc
    return g[:, None], gn, singular


def _polish_active(problem, Xa, beta, prot, eta0, tol, max_iter):
    rows = np.flatnonzero(np.any(beta != 0, axis=1))
    if prot:
        rows = np.union1d(rows, prot)
    out = np.zeros_like(beta)
    if rows.size == 0:
        return out, 0.0, False
    penalty = np.where(np.isin(rows, prot), 0.0, eta0)
    g, gn, singular = _restricted_fit(problem.loss, Xa[:, rows], problem.Y, beta[rows], penalty, tol, max_iter)
    out[rows] = g
    return out, gn, singular


def polish(beta, problem, config, intercept=None):
    """Minimize loss + (eta0/2)||b||^2 over the support of ``beta``.

    Returns ``(beta, intercept)`` in original indexing; the support never grows.
    """
    b = _full_coef(problem, beta, intercept)
    out, _, _ = _polish_active(problem, problem.design, b, problem.protected, config.eta0, config.polish_tol, config.polish_max_iter)
    return _split(problem, out)


def refit(problem, support, ridge=1e-8, tol=1e-8, max_iter=500):
    """Nearly unpenalized fit of the loss restricted to ``support``.

    ``support`` holds original column indices. Returns
    ``(beta, intercept, singular)``; a rank-deficient restricted design
    yields the minimum-norm solution with ``singular=True``.
    """
    support = np.asarray(support, dtype=int)
    if support.size > problem.n:
        warnings.warn(f"refitting {support.size} variables with only {problem.n} observations")
    cols = np.concatenate([np.array(problem.protected, dtype=int), support + problem.offset])
    penalty = np.where(np.arange(cols.size) < len(problem.protected), 0.0, ridge)
    A = problem.design[:, cols]
    start = np.zeros((cols.size, problem.m), dtype=problem.coef_dtype())
    g, _, singular = _restricted_fit(problem.loss, A, problem.Y, start, penalty, tol, max_iter)
    full = np.zeros((problem.design.shape[1], problem.m), dtype=problem.coef_dtype())
    full[cols] = g
    beta, icpt = _split(problem, full)
    return beta, icpt, singular


def _split(problem, full):
    icpt = None
    if problem.add_intercept:
        icpt = full[0, 0] if problem.m == 1 else full[0].copy()
        full = full[1:]
    beta = full[:, 0].copy() if (problem.m == 1 and problem.y.ndim == 1) else full.copy()
    if not problem.is_complex:
        beta = beta.real
        if icpt is not None:
            icpt = np.real(icpt)
            icpt = float(icpt) if np.ndim(icpt) == 0 else icpt
    return beta, icpt


def _support_key(state):
    return state.support.tobytes()


def fit(problem, config):
    """Run slow kill on ``problem`` and return a :class:`FitResult`."""
    config.validate(problem)
    t0 = time.perf_counter()
    schedule = config.schedule_spec()
    state = init_state(problem, config)
    cb = config.callback

    n_cool = schedule.T + 1 if schedule.effective_kind(problem.p) is not ScheduleKind.CONSTANT else 0
    for _ in range(n_cool):
        step(state, problem, config)
        _maybe_squeeze(state, problem, config)
        if cb is not None:
            cb(state)

    prot = state.protected_positions(problem)
    policy = ThresholdPolicy(config.tie_mode, prot)
    budget = config.max_iter
    residual = np.inf
    polished = state.beta
    for _ in range(config.max_rounds):
        stable, prev = 0, _support_key(state)
        while budget > 0 and stable < config.stable_iters:
            step(state, problem, config)
            if cb is not None:
                cb(state)
            budget -= 1
            key = _support_key(state)
            stable = stable + 1 if key == prev else 0
            prev = key
        polished, _, _ = _polish_active(problem, state.Xa, state.beta, prot, config.eta0, config.polish_tol, config.polish_max_iter)
        residual = _fp_residual(problem.loss, state.Xa, problem.Y, polished, state.rho, config.q, config.eta0 / state.rho, policy)
        if residual <= config.polish_tol or budget <= 0:
            break
        pol_xb = state.Xa @ polished
        if _objective(problem, polished, pol_xb, config.eta0, prot) <= _objective(problem, state.beta, state.xb, config.eta0, prot):
            state.beta, state.xb = polished, pol_xb

    full = np.zeros((problem.design.shape[1], problem.m), dtype=problem.coef_dtype())
    full[state.active] = polished
    pol_beta, pol_icpt = _split(problem, full)
    support = np.flatnonzero(np.any(full[problem.offset:] != 0, axis=1))

    beta_hat, icpt, singular = pol_beta, pol_icpt, False
    if config.refit:
        beta_hat, icpt, singular = refit(problem, support, config.refit_ridge, config.polish_tol, config.polish_max_iter)

    return FitResult(
        beta_hat=beta_hat,
        support=support,
        intercept=icpt,
        objective_trace=state.objective_trace,
        rho_trace=state.rho_trace,
        q_trace=state.q_trace,
        eta_bar_trace=state.eta_bar_trace,
        accepted_trace=state.accepted_trace,
        fixed_point_residual=residual,
        line_search_warnings=state.warnings,
        wall_time=time.perf_counter() - t0,
        iterations=state.t,
        rho_final=state.rho,
        squeeze_events=state.squeeze_events,
        polished_beta=pol_beta,
        polished_intercept=pol_icpt,
        refit_singular=singular,
        active=state.active[state.active >= problem.offset] - problem.offset,
    )


def iht_baseline(problem, q, max_iter=1000, line_search=False, **overrides):
    """Plain iterative hard thresholding: constant q, no shrinkage, no squeezing.

    By default the step is the classical fixed 1/(L ||X||_2^2); pass
    ``line_search=True`` to use the same adaptive search as :func:`fit`.
    """
    cfg = dict(
        q=q,
        eta0=0.0,
        schedule=ScheduleSpec(ScheduleKind.CONSTANT, T=1, target_q=q),
        squeeze=False,
        max_iter=max_iter,
        line_search=line_search,
    )
    cfg.update(overrides)
    return fit(problem, SolverConfig(**cfg))
