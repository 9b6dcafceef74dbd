"""Synthetic designs, evaluation metrics, sampled restricted-isometry
numbers and the replicate runner behind the benchmark tables.
"""

import enum
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from .losses import LossSpec
from .schedules import ScheduleKind, ScheduleSpec
from .solver import Problem, SolverConfig, fit, iht_baseline

# named sub-streams hanging off a single user seed
STREAM_DESIGN = 1
STREAM_NOISE = 2
STREAM_TEST_DESIGN = 3
STREAM_RIP = 4


def rng_for(seed, *keys):
    """Counter-based generator keyed by ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))


class CovKind(enum.Enum):
    TOEPLITZ = "toeplitz"
    EQUAL = "equal"
    IDENTITY = "identity"


class ResponseModel(enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True)
class Covariance:
    """Structured covariance: Toeplitz tau^|i-j|, equicorrelation, or identity."""

    kind: CovKind
    tau: float
    p: int

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ValueError(f"tau must lie in [0, 1), got {self.tau}")

    def matvec(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind is CovKind.IDENTITY or self.tau == 0.0:
            return d.copy()
        if self.kind is CovKind.TOEPLITZ:
            return _accel.toeplitz_matvec(np.ascontiguousarray(d), self.tau)
        return (1.0 - self.tau) * d + self.tau * d.sum()

    def quad(self, d):
        d = np.asarray(d, dtype=float)
        return float(d @ self.matvec(d))

    def dense(self):
        idx = np.arange(self.p)
        if self.kind is CovKind.IDENTITY:
            return np.eye(self.p)
        if self.kind is CovKind.TOEPLITZ:
            return self.tau ** np.abs(idx[:, None] - idx[None, :])
        return np.where(idx[:, None] == idx[None, :], 1.0, self.tau)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    p: int
    s: int
    tau: float = 0.0
    cov_kind: CovKind = CovKind.TOEPLITZ
    model: ResponseModel = ResponseModel.REGRESSION
    sigma: float = 1.0
    magnitude: float = 1.0
    beta_star: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.beta_star is None and 10 * (self.s - 1) + 1 > self.p:
            raise ValueError(f"default signal layout needs p >= {10 * (self.s - 1) + 1}")

    @property
    def covariance(self):
        return Covariance(self.cov_kind, self.tau, self.p)

    def signal(self):
        if self.beta_star is not None:
            return np.asarray(self.beta_star, dtype=float)
        return true_beta(self.p, self.s, self.magnitude)


def _normal_rows(n, cols, seed, keys):
    out = np.empty((n, cols))
    for i in range(n):
        out[i] = rng_for(seed, *keys, i).standard_normal(cols)
    return out


def draw_design(n, p, tau, cov_kind, seed, stream=STREAM_DESIGN):
    """n x p matrix with rows i.i.d. N(0, Sigma); row i uses its own keyed stream.

    Toeplitz rows come from the AR(1) recursion (the Cholesky factor of
    [tau^|i-j|] applied to white noise); equicorrelated rows from one shared
    factor plus independent noise.
    """
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    if cov_kind is CovKind.EQUAL and tau > 0:
        z = _normal_rows(n, p + 1, seed, (stream,))
        return math.sqrt(tau) * z[:, :1] + math.sqrt(1.0 - tau) * z[:, 1:]
    z = _normal_rows(n, p, seed, (stream,))
    if cov_kind is CovKind.TOEPLITZ and tau > 0:
        return _accel.ar1_rows(z, tau)
    return z


def gen_design(spec, seed=None, stream=STREAM_DESIGN):
    return draw_design(spec.n, spec.p, spec.tau, spec.cov_kind, spec.seed if seed is None else seed, stream)


def true_beta(p, s, magnitude=1.0):
    """Nonzeros of size ``magnitude`` at 0-based positions 0, 10, ..., 10(s-1)."""
    if s < 1 or 10 * (s - 1) + 1 > p:
        raise ValueError(f"s={s} nonzeros spaced by 10 do not fit in p={p}")
    b = np.zeros(p)
    b[np.arange(s) * 10] = magnitude
    return b


def gen_response(X, beta_star, model, seed, sigma=1.0, stream=STREAM_NOISE):
    eta = X @ beta_star
    if model is ResponseModel.CLASSIFICATION:
        return (eta > 0).astype(float)
    if sigma == 0:
        return eta
    return eta + sigma * rng_for(seed, stream).standard_normal(X.shape[0])


def miss_rate(est_support, true_support):
    """Fraction of true variables missing from the estimate."""
    true_support = set(int(j) for j in true_support)
    if not true_support:
        raise ValueError("true support is empty")
    est = set(int(j) for j in est_support)
    return len(true_support - est) / len(true_support)


def pred_error_regression(beta_hat, beta_star, cov):
    """10 (b - b*)' Sigma (b - b*) using the structured covariance."""
    return 10.0 * cov.quad(np.asarray(beta_hat) - np.asarray(beta_star))


def misclass_rate(beta_hat, X_test, y_test, intercept=0.0):
    """Percentage of test labels mispredicted by ``1{intercept + X b > 0}``."""
    pred = (X_test @ np.asarray(beta_hat) + (intercept or 0.0)) > 0
    return 100.0 * float(np.mean(pred != (np.asarray(y_test) > 0.5)))


@dataclass
class Metrics:
    miss_rate: float
    pred_error: float
    wall_time: float
    support_size: int


# ---------------------------------------------------------------------------
# restricted isometry numbers by subset sampling
# ---------------------------------------------------------------------------

def _subset_extremes(G, subsets, chunk=256):
    lo, hi = np.inf, -np.inf
    for start in range(0, len(subsets), chunk):
        idx = subsets[start:start + chunk]
        blocks = G[idx[:, :, None], idx[:, None, :]]
        ev = np.linalg.eigvalsh(blocks)
        lo = min(lo, float(ev[:, 0].min()))
        hi = max(hi, float(ev[:, -1].max()))
    return lo, hi


def _sample_subsets(p, s, num_samples, rng):
    return np.stack([np.sort(rng.choice(p, s, replace=False)) for _ in range(num_samples)])


def estimate_rip(X, s, num_samples=2000, seed=0, gram=None, exhaustive=False):
    """Sampled restricted isometry numbers ``(rho_minus_hat, rho_plus_hat)``.

    Extreme eigenvalues of X_I^H X_I over ``num_samples`` uniform s-subsets I
    (all subsets when ``exhaustive``). These are inner bounds: the true
    rho_minus(s) is no larger and rho_plus(s) no smaller.
    """
    X = np.asarray(X)
    p = X.shape[1]
    if not 1 <= s <= p:
        raise ValueError(f"s={s} outside [1, {p}]")
    if num_samples is not None and num_samples < 1 and not exhaustive:
        raise ValueError("num_samples must be positive")
    G = gram if gram is not None else X.conj().T @ X
    if exhaustive:
        subsets = np.array(list(itertools.combinations(range(p), s)))
    else:
        subsets = _sample_subsets(p, s, num_samples, rng_for(seed, STREAM_RIP, s))
    return _subset_extremes(G, subsets)


def rip_ratio_curve(n, p, s, tau, theta_grid, samples=2000, reps=20, seed=0,
                    cov_kind=CovKind.TOEPLITZ, exhaustive=False, workers=1):
    """Average of 4 theta rho_-(q+s)^2 / rho_+(2q)^2 over random designs, q = theta s.

    Returns rows ``(theta, mean, stderr)``.
    """
    theta_grid = list(theta_grid)
    if max(theta_grid) * s > p / 2:
        raise ValueError("largest theta * s exceeds p/2")

    def one_rep(r):
        X = draw_design(n, p, tau, cov_kind, seed, stream=STREAM_DESIGN * 1000 + r)
        G = X.T @ X
        row = []
        for th in theta_grid:
            q = int(round(th * s))
            key = seed * 7919 + r
            lo, _ = estimate_rip(X, q + s, samples, key, gram=G, exhaustive=exhaustive)
            _, hi = estimate_rip(X, 2 * q, samples, key + 1, gram=G, exhaustive=exhaustive)
            row.append(4.0 * th * lo ** 2 / hi ** 2)
        return row

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        table = np.array(list(pool.map(one_rep, range(reps))))
    out = []
    for j, th in enumerate(theta_grid):
        col = table[:, j]
        se = float(col.std(ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0
        out.append((float(th), float(col.mean()), se))
    return out


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray
    X_test: Optional[np.ndarray] = None
    y_test: Optional[np.ndarray] = None


def gen_dataset(spec, replicate=0):
    """Training data (and a same-size test set for classification) for one replicate."""
    seed = int(np.random.SeedSequence([spec.seed, replicate]).generate_state(1, np.uint64)[0])
    X = gen_design(spec, seed=seed)
    b = spec.signal()
    y = gen_response(X, b, spec.model, seed, spec.sigma)
    data = Dataset(X, y, b)
    if spec.model is ResponseModel.CLASSIFICATION:
        data.X_test = gen_design(spec, seed=seed, stream=STREAM_TEST_DESIGN)
        data.y_test = gen_response(data.X_test, b, spec.model, seed)
    return data


METHODS = ("slowkill", "iht", "iht-ls")


def _run_method(method, data, spec, q, eta0, T, iht_max_iter):
    classification = spec.model is ResponseModel.CLASSIFICATION
    loss = LossSpec.LOGISTIC if classification else LossSpec.QUADRATIC
    prob = Problem(data.X, data.y, loss, add_intercept=classification)
    if method == "slowkill":
        cfg = SolverConfig(q=q, eta0=eta0, schedule=ScheduleSpec(ScheduleKind.INVERSE, T=T, target_q=q), refit=True)
        res = fit(prob, cfg)
    elif method in ("iht", "iht-ls"):
        res = iht_baseline(prob, q, max_iter=iht_max_iter, line_search=(method == "iht-ls"), refit=True)
    else:
        raise ValueError(f"unknown method {method!r}")
    true_sup = np.flatnonzero(data.beta_star)
    if classification:
        err = misclass_rate(res.beta_hat, data.X_test, data.y_test, res.intercept)
    else:
        err = pred_error_regression(res.beta_hat, data.beta_star, spec.covariance)
    return Metrics(miss_rate(res.support, true_sup), err, res.wall_time, int(res.support.size)), res


@dataclass
class ExperimentSummary:
    rows: list = field(default_factory=list)  # one dict per method
    records: list = field(default_factory=list)  # one dict per (replicate, method)

    def row(self, method):
        for r in self.rows:
            if r["method"] == method:
                return r
        raise KeyError(method)


SUMMARY_HEADER = [
    "scenario", "method", "reps", "n", "p", "s", "tau", "cov", "model", "q",
    "miss_rate_mean", "miss_rate_se", "pred_error_mean", "pred_error_se", "total_time",
]


def run_experiment(spec, methods=("slowkill", "iht"), q_select=None, reps=50, seed=None, eta0=50.0, T=100,
                   iht_max_iter=1000, workers=1, scenario="custom"):
    """Run ``reps`` replicates of each method and summarize.

    ``q_select`` defaults to floor(1.5 s). Each replicate's data is keyed by
    ``(seed, replicate)`` so results do not depend on ``workers``.
    """
    if seed is not None:
        spec = SyntheticSpec(**{**asdict(spec), "seed": seed})
    q = int(math.floor(1.5 * spec.s)) if q_select is None else int(q_select)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")

    def one_rep(r):
        data = gen_dataset(spec, r)
        out = []
        for m in methods:
            met, res = _run_method(m, data, spec, q, eta0, T, iht_max_iter)
            out.append({
                "replicate": r, "method": m, "miss_rate": met.miss_rate, "pred_error": met.pred_error,
                "wall_time": met.wall_time, "support_size": met.support_size,
                "support": [int(j) + 1 for j in res.support], "iterations": res.iterations,
                "line_search_warnings": res.line_search_warnings,
            })
        return out

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        per_rep = list(pool.map(one_rep, range(reps)))
    summary = ExperimentSummary()
    summary.records = [rec for rep in per_rep for rec in rep]
    for m in methods:
        recs = [r for r in summary.records if r["method"] == m]
        miss = np.array([r["miss_rate"] for r in recs])
        err = np.array([r["pred_error"] for r in recs])
        k = len(recs)

        def se(a):
            return float(a.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0

        summary.rows.append({
            "scenario": scenario, "method": m, "reps": k, "n": spec.n, "p": spec.p, "s": spec.s,
            "tau": spec.tau, "cov": spec.cov_kind.value, "model": spec.model.value, "q": q,
            "miss_rate_mean": float(miss.mean()), "miss_rate_se": se(miss),
            "pred_error_mean": float(err.mean()), "pred_error_se": se(err),
            "total_time": float(sum(r["wall_time"] for r in recs)),
        })
    return summary


def write_summary_csv(summary, path):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_HEADER)
        w.writeheader()
        for row in summary.rows:
            w.writerow({k: row[k] for k in SUMMARY_HEADER})


def write_records_jsonl(summary, path):
    with open(path, "w") as fh:
        for rec in summary.records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


PRESETS = {
    "table41-toeplitz": dict(n=150, p=5000, s=10, tau=0.9, cov_kind=CovKind.TOEPLITZ, model=ResponseModel.REGRESSION),
    "table41-equal": dict(n=150, p=5000, s=10, tau=0.9, cov_kind=CovKind.EQUAL, model=ResponseModel.REGRESSION),
    "table42-toeplitz": dict(n=500, p=2000, s=10, tau=0.9, cov_kind=CovKind.TOEPLITZ, model=ResponseModel.CLASSIFICATION),
    "table42-equal": dict(n=500, p=2000, s=10, tau=0.9, cov_kind=CovKind.EQUAL, model=ResponseModel.CLASSIFICATION),
}
