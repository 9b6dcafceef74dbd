"""Quantile thresholding: keep the q largest entries (or rows), shrink them
by 1/(1 + eta_bar), zero the rest.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import _accel
from .exceptions import DimensionError, TieAtQuantileError


class TieMode(enum.Enum):
    LOWEST_INDEX_WINS = "lowest-index"
    STRICT_ERROR = "strict"


@dataclass(frozen=True)
class ThresholdPolicy:
    tie_mode: TieMode = TieMode.LOWEST_INDEX_WINS
    protected_indices: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "protected_indices", tuple(sorted(int(i) for i in self.protected_indices)))


DEFAULT_POLICY = ThresholdPolicy()


def row_scores(S):
    """Ranking scores: magnitudes for a vector, squared row norms for a matrix.

    Rows are rescaled by an exact power of two before squaring so that
    tiny or huge entries neither underflow to ties nor overflow.
    """
    if S.ndim == 1:
        return np.abs(S)
    big = float(np.max(np.abs(S))) if S.size else 0.0
    if big > 0.0 and np.isfinite(big):
        S = np.ldexp(S.real, -np.frexp(big)[1]) + (1j * np.ldexp(S.imag, -np.frexp(big)[1]) if np.iscomplexobj(S) else 0.0)
    if np.iscomplexobj(S):
        return np.sum(S.real ** 2 + S.imag ** 2, axis=1)
    return np.einsum("ij,ij->i", S, S)


def select_rows(S, q, policy=DEFAULT_POLICY):
    """Indices (sorted, into ``S``) of the q non-protected rows with largest norm."""
    p = S.shape[0]
    protected = policy.protected_indices
    if protected and (protected[0] < 0 or protected[-1] >= p):
        raise DimensionError(f"protected index out of range for {p} rows")
    free_count = p - len(protected)
    if not 0 <= q <= free_count:
        raise ValueError(f"q={q} outside [0, {free_count}]")
    scores = row_scores(S)
    if protected:
        free = np.setdiff1d(np.arange(p), protected, assume_unique=True)
        scores = scores[free]
    else:
        free = None
    if policy.tie_mode is TieMode.STRICT_ERROR and 0 < q < scores.shape[0]:
        kth, nxt = _accel.kth_gap_numpy(scores, q)
        if kth == nxt and kth != 0:
            raise TieAtQuantileError(f"magnitudes tie at the q-th order statistic (q={q})")
    picked = _accel.select_top(np.ascontiguousarray(scores), q)
    return picked if free is None else free[picked]


def group_quantile_threshold(S, q, eta_bar, policy=DEFAULT_POLICY):
    """Row-wise quantile thresholding of a p x m array (real or complex).

    Rows are ranked by Euclidean norm; the top ``q`` non-protected rows are
    divided by ``1 + eta_bar``, protected rows pass through untouched and
    all other rows become zero. A 1-d input is treated elementwise.
    """
    S = np.asarray(S)
    if eta_bar < 0:
        raise ValueError("eta_bar must be nonnegative")
    keep = select_rows(S, q, policy)
    out = np.zeros_like(S)
    out[keep] = S[keep] / (1.0 + eta_bar)
    if policy.protected_indices:
        idx = list(policy.protected_indices)
        out[idx] = S[idx]
    return out


def quantile_threshold(s, q, eta_bar, policy=DEFAULT_POLICY):
    """Elementwise quantile thresholding of a p-vector."""
    s = np.asarray(s)
    if s.ndim != 1:
        raise DimensionError("quantile_threshold takes a vector; use group_quantile_threshold for matrices")
    return group_quantile_threshold(s, q, eta_bar, policy)
