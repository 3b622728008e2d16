"""Least-squares fits of crater-depth hinges and saturating loading curves."""

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from src.utils.errors import DegenerateDataError
from src.utils.logging import get_logger

logger = get_logger(__name__)

# Relative variance above which a fitted parameter is reported as unidentifiable
UNIDENTIFIABLE_RELATIVE_VARIANCE = 1e3

# Depths below this fraction of the largest depth count as "no crater"
ZERO_DEPTH_FRACTION = 1e-2

HINGE_GRID_POINTS = 400


@dataclass
class FitResult:
    parameters: Dict[str, float]
    residual_norm: float
    covariance_diagonal: Dict[str, float]
    relative_variance: Dict[str, float] = field(default_factory=dict)
    unidentifiable: bool = False

    def __post_init__(self):
        if self.residual_norm < 0:
            raise ValueError("residual_norm must be >= 0")


def _covariance(jac: np.ndarray, residuals: np.ndarray) -> Tuple[np.ndarray, float]:
    """Unscaled inverse normal matrix and the residual variance."""
    m, n = jac.shape
    normal_inv = np.linalg.pinv(jac.T @ jac)
    dof = max(m - n, 1)
    return normal_inv, float(residuals @ residuals) / dof


def hinge(fluence: np.ndarray, threshold: float, slope: float) -> np.ndarray:
    """Depth per pulse max(0, slope·(F − F_th))."""
    return np.maximum(0.0, slope * (np.asarray(fluence, float) - threshold))


def _hinge_seed(fluence: np.ndarray, depth: np.ndarray) -> Tuple[float, float]:
    """Threshold on a grid, slope by linear least squares for each candidate."""
    lo = fluence.min()
    hi = fluence[depth > 0].max()
    best = (np.inf, lo, 0.0)
    for threshold in np.linspace(lo, hi, HINGE_GRID_POINTS, endpoint=False):
        x = np.maximum(0.0, fluence - threshold)
        denominator = x @ x
        if denominator == 0:
            continue
        slope = (x @ depth) / denominator
        sse = float(np.sum((slope * x - depth) ** 2))
        if sse < best[0]:
            best = (sse, threshold, slope)
    return best[1], best[2]


def fit_threshold(points: Sequence[Tuple[float, float]], n_pulses=1) -> FitResult:
    """Fit depth = n_pulses·max(0, slope·(F − F_th)).

    Args:
        points: (fluence, depth) pairs in any consistent units
        n_pulses: Pulses per scan point, scalar or one per point

    Returns:
        FitResult with F_th and slope (depth per pulse per fluence unit)
    """
    data = np.asarray(points, dtype=float).reshape(-1, 2)
    if data.shape[0] < 4:
        raise DegenerateDataError("hinge fit needs at least 4 points")
    fluence = data[:, 0]
    per_pulse = data[:, 1] / np.broadcast_to(np.asarray(n_pulses, float), fluence.shape)
    scale = np.abs(per_pulse).max()
    if scale == 0:
        raise DegenerateDataError("all depths are zero; the scan never crossed the threshold")
    zero = per_pulse <= ZERO_DEPTH_FRACTION * scale
    if not zero.any() or np.count_nonzero(~zero) < 2:
        raise DegenerateDataError("scan must include points both below and above the threshold")

    y = per_pulse / scale
    threshold0, slope0 = _hinge_seed(fluence, y)

    def residuals(p):
        return hinge(fluence, p[0], p[1]) - y

    span = float(np.ptp(fluence)) or 1.0
    result = least_squares(residuals, x0=[threshold0, slope0], method="lm",
                           x_scale=[span, abs(slope0) or 1.0], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    threshold, slope = result.x
    normal_inv, variance = _covariance(result.jac, result.fun)
    cov = np.diag(normal_inv) * variance
    fitted = FitResult(
        parameters={"F_th": float(threshold), "slope": float(slope * scale)},
        residual_norm=float(np.linalg.norm(result.fun) * scale),
        covariance_diagonal={"F_th": float(cov[0]), "slope": float(cov[1] * scale ** 2)},
    )
    logger.debug("Threshold fit", {"parameters": fitted.parameters, "nfev": result.nfev})
    return fitted


def saturation(power: np.ndarray, r_max: float, p_sat: float) -> np.ndarray:
    return r_max * power / (power + p_sat)


def _saturation_seed(power: np.ndarray, rate: np.ndarray) -> Tuple[float, float]:
    """Double-reciprocal straight-line seed, with a fallback for noisy data."""
    positive = (power > 0) & (rate > 0)
    if np.count_nonzero(positive) >= 2:
        slope, intercept = np.polyfit(1.0 / power[positive], 1.0 / rate[positive], 1)
        if intercept > 0 and slope > 0:
            return 1.0 / intercept, slope / intercept
    return 2.0 * rate.max(), float(np.median(power[power > 0]))


def fit_saturation(points: Sequence[Tuple[float, float]]) -> FitResult:
    """Fit rate = R_max·P/(P + P_sat).

    The fit runs in log-parameters so both stay positive. Parameters whose
    relative variance exceeds the identifiability bound are flagged.

    Args:
        points: (power, rate) pairs

    Returns:
        FitResult with R_max, P_sat and linear_slope = R_max/P_sat
    """
    data = np.asarray(points, dtype=float).reshape(-1, 2)
    if data.shape[0] < 3:
        raise DegenerateDataError("saturation fit needs at least 3 points")
    power, rate = data[:, 0], data[:, 1]
    if np.any(power < 0):
        raise DegenerateDataError("powers must be >= 0")
    if np.count_nonzero(power > 0) < 2 or rate.max() <= 0:
        raise DegenerateDataError("need at least two positive powers with a positive rate")

    scale = rate.max()
    y = rate / scale
    r_max0, p_sat0 = _saturation_seed(power, y)
    if not (power.min() < p_sat0 < power.max()):
        logger.warning("Saturation seed outside the sampled power range", {
            "p_sat_seed": p_sat0, "power_min": power.min(), "power_max": power.max(),
        })

    def residuals(log_p):
        return saturation(power, np.exp(log_p[0]), np.exp(log_p[1])) - y

    result = least_squares(residuals, x0=np.log([r_max0, p_sat0]), method="lm",
                           xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    r_max, p_sat = np.exp(result.x)
    normal_inv, variance = _covariance(result.jac, result.fun)
    # log-parameter variances are relative variances
    relative = np.diag(normal_inv)
    cov = relative * variance * np.array([r_max, p_sat]) ** 2
    unidentifiable = bool(np.any(relative > UNIDENTIFIABLE_RELATIVE_VARIANCE))
    if unidentifiable:
        logger.warning("Saturation parameters unidentifiable from these powers", {
            "relative_variance": relative.tolist(),
        })
    r_max *= scale
    return FitResult(
        parameters={"R_max": float(r_max), "P_sat": float(p_sat), "linear_slope": float(r_max / p_sat)},
        residual_norm=float(np.linalg.norm(result.fun) * scale),
        covariance_diagonal={"R_max": float(cov[0] * scale ** 2), "P_sat": float(cov[1])},
        relative_variance={"R_max": float(relative[0]), "P_sat": float(relative[1])},
        unidentifiable=unidentifiable,
    )


def linear_r_squared(x: Sequence[float], y: Sequence[float]) -> float:
    """Coefficient of determination of a straight-line fit."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = np.sum((y - (slope * x + intercept)) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
