"""scikit-learn style estimators for the fit-shaped steps of a scaling analysis.

:class:`AitkenExtrapolator` turns a sampled sequence ``lambda_k -> v_k`` into a
limit estimate; :class:`RenormExponentEstimator` fits the power law
``N_lambda = c * lambda**delta`` of the auto-normalized field-strength factor.
Both follow the usual ``fit`` / fitted-attribute-with-trailing-underscore
conventions and support ``get_params`` / ``set_params`` via ``BaseEstimator``.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_decreasing
from .errors import DomainError


def aitken_delta2(values, floor=0.0):
    """Aitken Delta^2 transform; entry ``k`` uses ``v_k, v_{k+1}, v_{k+2}``.

    Steps no larger than ``floor`` count as converged and are passed through,
    so noise-level differences never reach the division.
    """
    v = np.asarray(values, dtype=complex)
    d1 = v[1:] - v[:-1]
    den = d1[1:] - d1[:-1]
    num = d1[1:] ** 2
    out = np.empty(len(den), dtype=complex)
    # failed samples arrive as nan and propagate without a warning
    with np.errstate(invalid="ignore"):
        for k in range(len(den)):
            if abs(d1[k + 1]) <= floor:
                out[k] = v[k + 2]
            elif den[k] == 0:
                out[k] = np.nan
            else:
                out[k] = v[k + 2] - num[k] / den[k]
    return out


class AitkenExtrapolator(BaseEstimator):
    """Limit of a sequence sampled along decreasing ``lambda`` by Aitken acceleration.

    Parameters
    ----------
    tol : float
        Relative agreement required of the last three accelerated values.
    reference : float or None
        Magnitude the tolerance is relative to when the limit itself is
        near zero (typically the observable's value at ``lambda = 1``).
    """

    def __init__(self, tol=1e-4, reference=None):
        self.tol = tol
        self.reference = reference

    def fit(self, lambdas, values, errors=None):
        lambdas = check_decreasing(lambdas, "lambdas")
        v = np.asarray(values, dtype=complex)
        if v.shape != lambdas.shape:
            raise DomainError("lambdas and values must have the same length")
        if v.size < 3:
            raise DomainError("need at least three sequence values")
        errors = np.zeros(v.size) if errors is None else np.asarray(errors, dtype=float)

        ref = float(self.reference or 0.0)
        noise = 1e-2 * self.tol * max(ref, float(np.max(np.abs(v))) if np.all(np.isfinite(v)) else 0.0)
        acc = aitken_delta2(v, floor=max(noise, 10 * float(np.max(errors[np.isfinite(errors)], initial=0.0))))
        tail = acc[-3:]
        self.accelerated_ = acc
        self.limit_ = complex(acc[-1])
        finite = bool(np.all(np.isfinite(tail))) and bool(np.all(np.isfinite(v)))
        scale = max(abs(self.limit_) if finite else 0.0, ref, 1e-300)
        if finite:
            spread = max(abs(a - b) for a in tail for b in tail)
            steps = np.abs(np.diff(v))
            # Aitken maps geometric divergence onto a spurious "antilimit"
            contracting = steps[-1] <= steps[-2] * (1 + 1e-9) or steps[-1] <= self.tol * scale
            self.converged_ = bool(spread <= self.tol * scale and contracting)
            self.error_ = float(max(spread, abs(v[-1] - self.limit_) / 3, errors[-1]))
        else:
            self.converged_ = False
            self.error_ = float("inf")
        return self

    def _check_fitted(self):
        if not hasattr(self, "limit_"):
            raise NotFittedError("AitkenExtrapolator is not fitted")


class RenormExponentEstimator(BaseEstimator):
    """Fit ``N_lambda = c * lambda**delta`` with ``N_lambda = w2(f_lambda, f_lambda)**-1/2``.

    ``fit(lambdas)`` evaluates the auto-normalization on the grid and fits
    ``log N`` against ``log lambda`` by least squares; ``predict`` returns the
    fitted power law.
    """

    def __init__(self, model=None, test_function=None, options=None):
        self.model = model
        self.test_function = test_function
        self.options = options

    def fit(self, lambdas, y=None):
        from . import rgflow

        lambdas = np.asarray(lambdas, dtype=float)
        order = np.argsort(lambdas)[::-1]
        lambdas = check_decreasing(lambdas[order], "lambda grid")
        if lambdas.size < 4 or np.log10(lambdas[0] / lambdas[-1]) < 2 - 1e-12:
            raise DomainError("need >= 4 grid points spanning >= 2 decades")
        if y is None:
            renorm = rgflow.AutoNormalized(self.test_function)
            kw = {} if self.options is None else {"options": self.options}
            y = [renorm.factor(lam, self.model, **kw) for lam in lambdas]
        else:
            y = np.asarray(y, dtype=float)[order]
        logN = np.log(np.asarray(y, dtype=float))
        X = np.stack([np.ones_like(lambdas), np.log(lambdas)], 1)
        (logc, delta), *_ = np.linalg.lstsq(X, logN, rcond=None)
        self.lambdas_ = lambdas
        self.factors_ = np.exp(logN)
        self.c_ = float(np.exp(logc))
        self.delta_ = float(delta)
        self.residual_ = float(np.max(np.abs(X @ [logc, delta] - logN)))
        return self

    def predict(self, lambdas):
        if not hasattr(self, "delta_"):
            raise NotFittedError("RenormExponentEstimator is not fitted")
        return self.c_ * np.asarray(lambdas, dtype=float) ** self.delta_
