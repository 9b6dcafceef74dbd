"""Losses of the form l0(Xb; y), their gradients in the fitted values, and
the generalized Bregman divergence used by the line search.

Every function here works on fitted values ``xb`` only; the design matrix
enters through :func:`majorization_gap` alone.
"""

import enum

import numpy as np

from .exceptions import DimensionError, ResponseDomainError


class LossSpec(enum.Enum):
    QUADRATIC = "quadratic"
    LOGISTIC = "logistic"
    COMPLEX_MMV = "complex-mmv"

    @property
    def lipschitz(self):
        """Lipschitz constant of the gradient with respect to fitted values."""
        return 0.25 if self is LossSpec.LOGISTIC else 1.0

    @property
    def multi_response(self):
        return self is LossSpec.COMPLEX_MMV


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    # exp of a nonpositive argument only
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def check_response(loss, y):
    y = np.asarray(y)
    if loss is LossSpec.COMPLEX_MMV:
        if y.ndim not in (1, 2):
            raise DimensionError(f"response must be a vector or n x m matrix, got ndim={y.ndim}")
        return y
    if y.ndim == 2 and y.shape[1] != 1:
        raise DimensionError(f"{loss.value} loss takes a single response column, got {y.shape[1]}")
    if y.ndim > 2:
        raise DimensionError(f"response has too many dimensions ({y.ndim})")
    if np.iscomplexobj(y):
        raise ResponseDomainError(f"{loss.value} loss needs a real response")
    if loss is LossSpec.LOGISTIC and not np.all((y == 0) | (y == 1)):
        raise ResponseDomainError("logistic loss needs responses in {0, 1}")
    return y


def _check_pair(a, b, what="fitted values"):
    if np.shape(a) != np.shape(b):
        raise DimensionError(f"{what} shape {np.shape(a)} does not match {np.shape(b)}")


# unchecked versions used inside the solver loop

def _value(loss, xb, y):
    if loss is LossSpec.LOGISTIC:
        return float(np.sum(softplus(xb) - y * xb))
    r = y - xb
    if np.iscomplexobj(r):
        return 0.5 * float(np.sum(r.real ** 2 + r.imag ** 2))
    return 0.5 * float(r.ravel() @ r.ravel())


def _gradient(loss, xb, y):
    if loss is LossSpec.LOGISTIC:
        return sigmoid(xb) - y
    return xb - y


def _bregman(loss, xb1, xb2):
    # the linear term in y cancels, so the divergence never needs y
    d = xb1 - xb2
    if loss is LossSpec.LOGISTIC:
        # log(1 - s + s e^d) - s d: log1p keeps precision for small steps,
        # the log-sum-exp form stays finite when s rounds to 1 and d << 0
        s = sigmoid(xb2)
        small = (d >= -1.0) & (d <= 1.0)
        dc = np.clip(d, -1.0, 1.0)
        near = np.log1p(s * np.expm1(dc))
        far = np.logaddexp(-softplus(xb2), d - softplus(-xb2))
        out = np.where(small, near, far) - s * d
        return float(np.sum(np.maximum(out, 0.0)))
    if np.iscomplexobj(d):
        return 0.5 * float(np.sum(d.real ** 2 + d.imag ** 2))
    return 0.5 * float(d.ravel() @ d.ravel())


def loss_value(loss, xb, y):
    """Evaluate l0(xb; y).

    Quadratic and complex MMV give half the squared (Frobenius) residual
    norm; logistic gives the negative Bernoulli log-likelihood with
    natural parameter ``xb``.
    """
    y = check_response(loss, y)
    xb = np.asarray(xb)
    _check_pair(xb, y)
    return _value(loss, xb, y)


def loss_gradient(loss, xb, y):
    """Gradient of l0 with respect to the fitted values, same shape as ``xb``."""
    y = check_response(loss, y)
    xb = np.asarray(xb)
    _check_pair(xb, y)
    return _gradient(loss, xb, y)


def bregman(loss, xb1, xb2, y):
    """Generalized Bregman divergence l0(xb1) - l0(xb2) - <grad l0(xb2), xb1 - xb2>.

    For complex fitted values the inner product is the symmetrized
    Hermitian form, so the result is always real.
    """
    y = check_response(loss, y)
    xb1, xb2 = np.asarray(xb1), np.asarray(xb2)
    _check_pair(xb1, xb2)
    _check_pair(xb1, y)
    return _bregman(loss, xb1, xb2)


def majorization_gap(loss, rho, beta1, beta2, X):
    """(rho/2)||beta1 - beta2||^2 minus the Bregman divergence at (X beta1, X beta2).

    A nonnegative value means the quadratic surrogate with inverse step
    ``rho`` majorizes the loss along the step from ``beta2`` to ``beta1``.
    """
    beta1, beta2 = np.asarray(beta1), np.asarray(beta2)
    _check_pair(beta1, beta2, "coefficients")
    X = np.asarray(X)
    if X.shape[1] != beta1.shape[0]:
        raise DimensionError(f"design has {X.shape[1]} columns, coefficients have {beta1.shape[0]} rows")
    d = beta1 - beta2
    dd = float(np.sum(np.abs(d) ** 2))
    return 0.5 * rho * dd - _bregman(loss, X @ beta1, X @ beta2)
