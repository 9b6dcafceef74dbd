"""Choosing the cardinality q with a predictive information criterion."""

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InadmissibleModelError, NonpositiveRssError
from .losses import _value
from .solver import _full_coef, fit


def complexity_penalty(J, m, p):
    """J m + J log(e p / J), with value 0 at J = 0."""
    if J < 0 or J > p:
        raise ValueError(f"support size J={J} outside [0, {p}]")
    if m < 1:
        raise ValueError("m must be at least 1")
    if J == 0:
        return 0.0
    return J * m + J * (1.0 + math.log(p / J))


def pic_known_scale(loss_value, J, m, p, A=2.0):
    return loss_value + A * complexity_penalty(J, m, p)


def pic_scale_free(rss, n, m, J, p, A=2.0):
    """m n log(rss) + A P(J); requires A P(J) < m n."""
    pen = A * complexity_penalty(J, m, p)
    if pen >= m * n:
        raise InadmissibleModelError(f"A*P={pen:.4g} is not below m*n={m * n} (J={J})")
    if not rss > 0:
        raise NonpositiveRssError("residual sum of squares must be positive")
    return m * n * math.log(rss) + pen


class Criterion(enum.Enum):
    KNOWN_SCALE = "known-scale"
    SCALE_FREE = "scale-free"


@dataclass
class SelectionResult:
    q_grid: list
    scores: list  # None where the model was skipped
    chosen_q: int
    fits: list
    skipped: dict = field(default_factory=dict)  # q -> reason

    @property
    def chosen_fit(self):
        return self.fits[self.q_grid.index(self.chosen_q)]


def _rss_and_loss(problem, res):
    B = _full_coef(problem, res.beta_hat, res.intercept)
    xb = problem.design @ B
    r = problem.Y - xb
    rss = float(np.sum(np.abs(r) ** 2))
    return rss, _value(problem.loss, xb, problem.Y)


def score_fit(problem, res, criterion=Criterion.SCALE_FREE, A=2.0):
    """Criterion value of a fitted model (uses its stored coefficients)."""
    J = int(res.support.size)
    rss, lv = _rss_and_loss(problem, res)
    if criterion is Criterion.KNOWN_SCALE:
        return pic_known_scale(lv, J, problem.m, problem.p, A)
    tiny = np.finfo(float).eps * float(np.sum(np.abs(problem.Y) ** 2))
    if rss <= tiny:
        raise NonpositiveRssError(f"interpolating fit (rss={rss:.3g})")
    return pic_scale_free(rss, problem.n, problem.m, J, problem.p, A)


def select_q(problem, q_grid, config_template, criterion=Criterion.SCALE_FREE, A=2.0):
    """Fit every q in ``q_grid`` (with refitting) and pick the criterion minimizer.

    Models that are inadmissible under the scale-free form, or interpolate
    the data, are skipped and their reason recorded.
    """
    q_grid = [int(q) for q in q_grid]
    if not q_grid:
        raise ValueError("q_grid is empty")
    if any(b <= a for a, b in zip(q_grid, q_grid[1:])):
        raise ValueError("q_grid must be strictly increasing")
    if q_grid[-1] >= problem.p:
        raise ValueError("every q must be below p")
    scores, fits, skipped = [], [], {}
    for q in q_grid:
        cfg = dataclasses.replace(config_template, q=q, refit=True)
        res = fit(problem, cfg)
        fits.append(res)
        try:
            scores.append(score_fit(problem, res, criterion, A))
        except (InadmissibleModelError, NonpositiveRssError) as exc:
            scores.append(None)
            skipped[q] = str(exc)
    valid = [(s, q) for s, q in zip(scores, q_grid) if s is not None]
    if not valid:
        raise InadmissibleModelError("every q in the grid was inadmissible")
    chosen = min(valid)[1]
    return SelectionResult(q_grid, scores, chosen, fits, skipped)
