"""ARIMA(p, d, q) baseline with ACF/PACF diagnostics and order selection.

Estimation minimizes the conditional sum of squares: residuals are
defined recursively with the first p differenced observations taken as
given and pre-sample residuals set to zero. Starting values come from a
Hannan-Rissanen pass (long-AR residual proxy, then least squares); a
Gauss-Newton-family least-squares refinement polishes them. Order search
fits every grid member and keeps the AIC/BIC minimizer.

The intercept is estimated only for d = 0; once the series is
differenced the level is absorbed and forecasts carry no deterministic
drift, so ARIMA(0,1,0) predicts a flat continuation of the last value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import lfilter
from sklearn.base import BaseEstimator

from . import persist
from ._validation import as_float_vector, check_fitted
from .errors import DataFormatError, TrainingError

ARIMA_FORMAT = "arima/1"


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        for name in ("p", "d", "q"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise DataFormatError(f"order component {name} must be a non-negative int")

    def __iter__(self):
        return iter((self.p, self.d, self.q))


def difference(values, d: int) -> np.ndarray:
    """Apply first differencing d times; output has length N - d."""
    if d < 0:
        raise DataFormatError("differencing order must be >= 0")
    arr = as_float_vector(values, "series", min_len=d + 1)
    for _ in range(d):
        arr = np.diff(arr)
    return arr


def integration_initials(values, d: int) -> list[float]:
    """First element of each partial-difference level, for exact undo."""
    arr = as_float_vector(values, "series", min_len=d + 1)
    initials = []
    for _ in range(d):
        initials.append(float(arr[0]))
        arr = np.diff(arr)
    return initials


def integrate(diffed, initials) -> np.ndarray:
    """Invert difference(): cumulative-sum back up through the stored levels."""
    arr = np.asarray(diffed, dtype=float)
    for init in reversed(list(initials)):
        arr = np.concatenate(([init], init + np.cumsum(arr)))
    return arr


def acf(values, max_lag: int) -> np.ndarray:
    """Sample autocorrelations r_0..r_max_lag (r_0 = 1)."""
    arr = as_float_vector(values, "series", min_len=max_lag + 1)
    if max_lag < 0:
        raise DataFormatError("max_lag must be >= 0")
    centered = arr - arr.mean()
    denom = float(np.dot(centered, centered))
    if denom == 0.0:
        raise DataFormatError("acf is undefined for a constant series")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(np.dot(centered[:-k], centered[k:])) / denom
    return out


def pacf(values, max_lag: int) -> np.ndarray:
    """Partial autocorrelations via the Durbin-Levinson recursion on the ACF."""
    r = acf(values, max_lag)
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    if max_lag == 0:
        return out
    phi_prev = np.array([r[1]])
    out[1] = r[1]
    for k in range(2, max_lag + 1):
        num = r[k] - float(np.dot(phi_prev, r[k - 1 : 0 : -1]))
        den = 1.0 - float(np.dot(phi_prev, r[1:k]))
        phi_kk = num / den
        phi = phi_prev - phi_kk * phi_prev[::-1]
        phi_prev = np.append(phi, phi_kk)
        out[k] = phi_kk
    return out


def _css_residuals(w: np.ndarray, c: float, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Conditional residuals e_p..e_{n-1}; first p values given, e_{<p} = 0."""
    p = phi.size
    rhs = w[p:] - c
    for i in range(p):
        rhs = rhs - phi[i] * w[p - 1 - i : w.size - 1 - i]
    if theta.size == 0:
        return rhs
    e = lfilter([1.0], np.concatenate(([1.0], theta)), rhs)
    return e


def _hannan_rissanen(w: np.ndarray, p: int, q: int, with_intercept: bool):
    """Starting values for (c, phi, theta) via long-AR residual proxies."""
    n = w.size
    if q == 0:
        # Pure AR: conditional least squares is already the CSS optimum.
        cols = [np.ones(n - p)] if with_intercept else []
        cols += [w[p - 1 - i : n - 1 - i] for i in range(p)]
        if not cols:
            return (float(w.mean()) if with_intercept else 0.0), np.empty(0), np.empty(0)
        design = np.column_stack(cols)
        beta, *_ = np.linalg.lstsq(design, w[p:], rcond=None)
        c = float(beta[0]) if with_intercept else 0.0
        phi = beta[1:] if with_intercept else beta
        return c, np.asarray(phi, dtype=float), np.empty(0)

    h = min(max(10, 2 * max(p, q)), max(n // 4, max(p, q) + 1))
    cols = [np.ones(n - h)] + [w[h - 1 - i : n - 1 - i] for i in range(h)]
    design = np.column_stack(cols)
    beta, *_ = np.linalg.lstsq(design, w[h:], rcond=None)
    resid = np.zeros(n)
    resid[h:] = w[h:] - design @ beta

    start = h + q
    cols = [np.ones(n - start)] if with_intercept else []
    cols += [w[start - 1 - i : n - 1 - i] for i in range(p)]
    cols += [resid[start - 1 - j : n - 1 - j] for j in range(q)]
    design = np.column_stack(cols) if cols else np.ones((n - start, 0))
    beta, *_ = np.linalg.lstsq(design, w[start:], rcond=None)
    offset = 1 if with_intercept else 0
    c = float(beta[0]) if with_intercept else 0.0
    phi = np.asarray(beta[offset : offset + p], dtype=float)
    theta = np.asarray(beta[offset + p :], dtype=float)
    return c, phi, theta


def _polynomial_roots_outside_unit(coeffs: np.ndarray) -> bool:
    """True when all roots of 1 - c_1 z - ... - c_k z^k lie outside |z| = 1."""
    if coeffs.size == 0:
        return True
    poly = np.concatenate(([1.0], -coeffs))
    roots = np.roots(poly[::-1])
    return bool(np.all(np.abs(roots) > 1.0 + 1e-9))


class ArimaForecaster(BaseEstimator):
    """Conditional-sum-of-squares ARIMA estimator and forecaster."""

    def __init__(self, p: int = 1, d: int = 0, q: int = 0, max_iterations: int = 200):
        self.p = p
        self.d = d
        self.q = q
        self.max_iterations = max_iterations
        self.ar_: np.ndarray | None = None
        self.ma_: np.ndarray | None = None
        self.intercept_: float = 0.0
        self.sigma2_: float = 0.0
        self.loglik_: float = 0.0
        self.n_effective_: int = 0
        self.converged_: bool = True
        self.stationary_: bool = True

    @property
    def order(self) -> ArimaOrder:
        return ArimaOrder(self.p, self.d, self.q)

    def fit(self, values, y=None):
        p, d, q = self.p, self.d, self.q
        values = as_float_vector(values, "series", min_len=d + 2)
        w = difference(values, d)
        required = 10 * (p + q + 1)
        if w.size < required:
            raise DataFormatError(
                f"series too short for order ({p},{d},{q}): need at least "
                f"{required} points after differencing, got {w.size}"
            )
        with_intercept = d == 0
        c0, phi0, theta0 = _hannan_rissanen(w, p, q, with_intercept)

        self.converged_ = True
        if q == 0:
            c, phi, theta = c0, phi0, theta0
        else:
            x0 = np.concatenate(([c0] if with_intercept else [], phi0, theta0))
            off = 1 if with_intercept else 0

            def objective(x):
                e = _css_residuals(w, x[0] if with_intercept else 0.0,
                                   x[off : off + p], x[off + p :])
                # An explosive MA recursion produces astronomic residuals;
                # cap them so the optimizer sees a finite cliff to back away
                # from instead of infs.
                if not np.all(np.abs(e) < 1e8):
                    return np.full(w.size - p, 1e8)
                return e

            bound = 2.5  # invertible/stationary fits of interest live inside
            try:
                result = least_squares(
                    objective,
                    np.clip(x0, -bound, bound),
                    method="trf",
                    bounds=(-bound, bound),
                    max_nfev=self.max_iterations * max(x0.size, 1),
                )
                self.converged_ = bool(
                    result.status > 0 and np.all(np.isfinite(result.x))
                )
                x = result.x
            except (ValueError, np.linalg.LinAlgError):
                self.converged_ = False
                x = np.clip(x0, -bound, bound)
            c = float(x[0]) if with_intercept else 0.0
            phi = np.asarray(x[off : off + p], dtype=float)
            theta = np.asarray(x[off + p :], dtype=float)

        residuals = _css_residuals(w, c, phi, theta)
        n_eff = residuals.size
        css = float(np.dot(residuals, residuals))
        sigma2 = css / n_eff if n_eff else float("nan")
        if not (n_eff and math.isfinite(sigma2)) or sigma2 <= 0:
            raise TrainingError(f"degenerate fit for order ({p},{d},{q})")

        self.ar_ = phi
        self.ma_ = theta
        self.intercept_ = c
        self.sigma2_ = sigma2
        self.n_effective_ = n_eff
        self.loglik_ = -0.5 * n_eff * (math.log(2.0 * math.pi * sigma2) + 1.0)
        self.stationary_ = _polynomial_roots_outside_unit(phi)
        # A non-invertible MA part makes the residual recursion explosive on
        # fresh data, so such fits are treated as non-convergent.
        if not _polynomial_roots_outside_unit(-theta):
            self.converged_ = False

        # Tails needed to continue the recursions past the training data.
        self._w_tail = w[-p:].copy() if p else np.empty(0)
        self._resid_tail = residuals[-q:].copy() if q else np.empty(0)
        level = values.copy()
        self._level_tails = []
        for _ in range(d):
            self._level_tails.append(float(level[-1]))
            level = np.diff(level)
        return self

    @property
    def n_parameters(self) -> int:
        # Intercept included in the count whether or not d forced it to zero,
        # so criteria stay comparable across differencing orders.
        return self.p + self.q + 1

    def aic(self) -> float:
        check_fitted(self, "ar_")
        return 2.0 * self.n_parameters - 2.0 * self.loglik_

    def bic(self) -> float:
        check_fitted(self, "ar_")
        return self.n_parameters * math.log(self.n_effective_) - 2.0 * self.loglik_

    def forecast(self, horizon: int) -> np.ndarray:
        """Iterate the ARMA recursion with future shocks 0, then undo differencing."""
        check_fitted(self, "ar_")
        if horizon < 1:
            raise DataFormatError(f"forecast horizon must be >= 1, got {horizon}")
        p, q = self.p, self.q
        w_hist = list(self._w_tail[-p:]) if p else []
        e_hist = list(self._resid_tail[-q:]) if q else []
        out = np.empty(horizon)
        for k in range(horizon):
            value = self.intercept_
            for i in range(p):
                value += self.ar_[i] * w_hist[-1 - i]
            for j in range(q):
                value += self.ma_[j] * e_hist[-1 - j]
            out[k] = value
            if p:
                w_hist.append(value)
            if q:
                e_hist.append(0.0)
        for tail in reversed(self._level_tails):
            out = tail + np.cumsum(out)
        return out

    def one_step_predictions(self, values, start: int) -> np.ndarray:
        """Next-value predictions for indices start..N-1 given observed history.

        Runs the fitted residual recursion over the whole series; the
        one-step level prediction at t is x_t minus that residual.
        """
        check_fitted(self, "ar_")
        values = as_float_vector(values, "series")
        w = difference(values, self.d)
        if start < self.p + self.d:
            raise DataFormatError(
                f"start must be >= p + d = {self.p + self.d} for one-step predictions"
            )
        residuals = _css_residuals(w, self.intercept_, self.ar_, self.ma_)
        # residuals[k] belongs to level index k + p + d
        offset = start - (self.p + self.d)
        return values[start:] - residuals[offset:]

    # -- persistence ----------------------------------------------------

    def save(self, path) -> None:
        check_fitted(self, "ar_")
        doc = {
            "format": ARIMA_FORMAT,
            "order": {"p": self.p, "d": self.d, "q": self.q},
            "ar": persist.encode_array(self.ar_),
            "ma": persist.encode_array(self.ma_),
            "intercept": self.intercept_,
            "sigma2": self.sigma2_,
            "loglik": self.loglik_,
            "n_effective": self.n_effective_,
            "converged": self.converged_,
            "stationary": self.stationary_,
            "tails": {
                "w": persist.encode_array(self._w_tail),
                "residuals": persist.encode_array(self._resid_tail),
                "levels": list(self._level_tails),
            },
        }
        persist.write_document(doc, path)

    @classmethod
    def load(cls, path) -> "ArimaForecaster":
        doc = persist.read_document(path, ARIMA_FORMAT)
        order = doc["order"]
        model = cls(p=int(order["p"]), d=int(order["d"]), q=int(order["q"]))
        model.ar_ = persist.decode_array(doc["ar"], "ar")
        model.ma_ = persist.decode_array(doc["ma"], "ma")
        if model.ar_.shape != (model.p,) or model.ma_.shape != (model.q,):
            raise DataFormatError("stored coefficients do not match declared order")
        model.intercept_ = float(doc["intercept"])
        model.sigma2_ = float(doc["sigma2"])
        model.loglik_ = float(doc["loglik"])
        model.n_effective_ = int(doc["n_effective"])
        model.converged_ = bool(doc["converged"])
        model.stationary_ = bool(doc["stationary"])
        model._w_tail = persist.decode_array(doc["tails"]["w"], "tails.w")
        model._resid_tail = persist.decode_array(doc["tails"]["residuals"], "tails.residuals")
        model._level_tails = [float(x) for x in doc["tails"]["levels"]]
        return model


def default_grid(max_p: int = 5, max_d: int = 2, max_q: int = 5) -> list[ArimaOrder]:
    return [
        ArimaOrder(p, d, q)
        for p in range(max_p + 1)
        for d in range(max_d + 1)
        for q in range(max_q + 1)
    ]


def _comparable_criterion(model: ArimaForecaster, values: np.ndarray, skip: int,
                          criterion: str) -> float:
    """AIC/BIC over a residual window common to the whole grid.

    Each order conditions on its own p + d leading observations, so raw
    conditional likelihoods cover different sample sizes and shorter
    samples look spuriously better. Scoring every candidate on the
    residuals for indices >= skip removes that bias.
    """
    w = difference(values, model.d)
    residuals = _css_residuals(w, model.intercept_, model.ar_, model.ma_)
    drop = skip - (model.p + model.d)
    residuals = residuals[drop:]
    n = residuals.size
    sigma2 = float(np.dot(residuals, residuals)) / n
    if not math.isfinite(sigma2) or sigma2 <= 0:
        return float("inf")
    loglik = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)
    k = model.n_parameters
    if criterion == "aic":
        return 2.0 * k - 2.0 * loglik
    return k * math.log(n) - 2.0 * loglik


def select_order(values, grid, criterion: str = "aic") -> tuple[ArimaOrder, ArimaForecaster]:
    """Fit every grid order and return the criterion minimizer.

    Candidates are compared on a shared residual window (see
    _comparable_criterion). Failed or non-convergent fits are skipped;
    ties break toward smaller p + q, then smaller d.
    """
    grid = list(grid)
    if not grid:
        raise DataFormatError("order-selection grid is empty")
    if criterion not in ("aic", "bic"):
        raise DataFormatError(f"criterion must be 'aic' or 'bic', got {criterion!r}")
    values = as_float_vector(values, "series", min_len=2)
    skip = max(order.p + order.d for order in grid)
    best = None
    for order in grid:
        model = ArimaForecaster(p=order.p, d=order.d, q=order.q)
        try:
            model.fit(values)
        except (DataFormatError, TrainingError, np.linalg.LinAlgError):
            continue
        if not model.converged_:
            continue
        score = _comparable_criterion(model, values, skip, criterion)
        if not math.isfinite(score):
            continue
        key = (score, order.p + order.q, order.d)
        if best is None or key < best[0]:
            best = (key, order, model)
    if best is None:
        raise TrainingError("every order in the grid failed to fit")
    return best[1], best[2]
