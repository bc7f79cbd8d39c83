import numpy as np
import statsmodels.api as sm
from sklearn.metrics import mean_squared_error, mean_absolute_error
from math import sqrt

from LAB_HELPERS.LAB_errors import FitError


def evaluate_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    metrics = {
        "MAE": float(mean_absolute_error(y_true, y_pred)),
        "RMSE": float(sqrt(mean_squared_error(y_true, y_pred))),
        "LINF": float(np.max(np.abs(np.asarray(y_true) - np.asarray(y_pred)))),
    }
    return metrics


def ols_fit(design: np.ndarray, y: np.ndarray, alpha=0.05) -> dict:
    """Ordinary least squares with standard errors and confidence intervals."""
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if design.ndim == 1:
        design = design[:, None]
    if design.shape[0] < design.shape[1]:
        raise FitError(f"{design.shape[0]} samples cannot determine {design.shape[1]} coefficients")
    result = sm.OLS(y, design).fit()
    dof = design.shape[0] - design.shape[1]
    conf_int = np.asarray(result.conf_int(alpha=alpha)) if dof > 0 else np.full((design.shape[1], 2), np.nan)
    return {
        "params": np.asarray(result.params, dtype=float),
        "stderr": np.asarray(result.bse, dtype=float) if dof > 0 else np.full(design.shape[1], np.nan),
        "conf_int": conf_int,
        "condition_number": float(np.linalg.cond(design)),
        "residual": np.asarray(result.resid, dtype=float),
    }


def linear_fit(x, y, alpha=0.05) -> dict:
    """Fits y = intercept + slope * x."""
    x = np.asarray(x, dtype=float)
    fit = ols_fit(sm.add_constant(x, has_constant='add'), y, alpha=alpha)
    return {
        "slope": float(fit["params"][1]),
        "intercept": float(fit["params"][0]),
        "stderr": float(fit["stderr"][1]),
        "conf_int": [float(v) for v in fit["conf_int"][1]],
    }


def power_law_exponent(x, y, alpha=0.05) -> dict:
    """Exponent p of y ~ c x^p by log-log regression; y must be positive."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs positive samples")
    fit = linear_fit(np.log(x), np.log(y), alpha=alpha)
    return {
        "exponent": fit["slope"],
        "prefactor": float(np.exp(fit["intercept"])),
        "stderr": fit["stderr"],
        "conf_int": fit["conf_int"],
    }
