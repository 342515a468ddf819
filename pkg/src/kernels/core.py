import logging
import warnings
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd
from scipy.special import j0

from src.errors import UnsupportedKernelError, ValidationError
from src.kernels.models import DecayReport, Kernel, KernelFamily

logger = logging.getLogger(__name__)


class ApproximateKernelWarning(UserWarning):
    """Kostlan kernels are evaluated through their d -> infinity limit."""


def bargmann_fock() -> Kernel:
    return Kernel(KernelFamily.BARGMANN_FOCK)


def bessel_wave() -> Kernel:
    return Kernel(KernelFamily.BESSEL_WAVE)


def kostlan(degree: int) -> Kernel:
    return Kernel(KernelFamily.KOSTLAN, degree=degree)


def tabulated(radii: Sequence[float], values: Sequence[float]) -> Kernel:
    return Kernel(
        KernelFamily.TABULATED,
        radii=tuple(float(r) for r in radii),
        values=tuple(float(v) for v in values),
    )


def load_tabulated(path: Union[str, Path]) -> Kernel:
    """Reads a two-column CSV (radius, value) into a tabulated kernel."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise ValidationError(f"Cannot read kernel table '{path}': {e}") from e

    columns = [c.strip().lower() for c in frame.columns]
    if columns[:2] != ["radius", "value"]:
        raise ValidationError(
            f"Expected columns 'radius,value' in '{path}' but found '{','.join(columns)}'"
        )
    return tabulated(frame.iloc[:, 0].to_numpy(), frame.iloc[:, 1].to_numpy())


def radial_profile(kernel: Kernel, r: np.ndarray) -> np.ndarray:
    """K as a function of |x|, vectorised over r >= 0."""
    r = np.abs(np.asarray(r, dtype=float))
    family = kernel.family

    if family in (KernelFamily.BARGMANN_FOCK, KernelFamily.KOSTLAN):
        return np.exp(-0.5 * r * r)
    if family == KernelFamily.BESSEL_WAVE:
        return j0(r)
    if family == KernelFamily.TABULATED:
        radii = np.asarray(kernel.radii)
        values = np.asarray(kernel.values)
        # zero tail beyond the last tabulated radius
        return np.interp(r, radii, values, right=0.0)

    raise UnsupportedKernelError(f"Unknown kernel family '{family}'")


def kernel_eval_many(kernel: Kernel, dx: np.ndarray) -> np.ndarray:
    """K(dx) for an array of displacement vectors with trailing axis 2."""
    dx = np.asarray(dx, dtype=float)
    return radial_profile(kernel, np.hypot(dx[..., 0], dx[..., 1]))


def kernel_eval(kernel: Kernel, dx: Sequence[float]) -> float:
    if kernel.family == KernelFamily.KOSTLAN:
        warnings.warn(
            f"kostlan(d={kernel.degree}) has no stationary kernel at finite degree; "
            "returning the limit exp(-|dx|^2/2)",
            ApproximateKernelWarning,
            stacklevel=2,
        )
    return float(kernel_eval_many(kernel, np.asarray(dx, dtype=float)))


def kostlan_covariance(degree: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Exact covariance of the rescaled degree-d Kostlan field between point sets.

    The field is sqrt(d!) p(x/sqrt d) / (1 + |x|^2/d)^(d/2), so
    cov(x, y) = (1 + <x,y>/d)^d / ((1 + |x|^2/d)(1 + |y|^2/d))^(d/2),
    which tends to exp(-|x-y|^2/2) as d grows.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = float(degree)

    base = 1.0 + (x @ y.T) / d
    log_weight_x = 0.5 * d * np.log1p(np.sum(x * x, axis=1) / d)
    log_weight_y = 0.5 * d * np.log1p(np.sum(y * y, axis=1) / d)

    with np.errstate(divide="ignore"):
        log_abs = d * np.log(np.abs(base))
    sign = np.where(base < 0, (-1.0) ** degree, 1.0)
    return sign * np.exp(log_abs - log_weight_x[:, None] - log_weight_y[None, :])


def covariance_matrix(kernel: Kernel, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if kernel.family == KernelFamily.KOSTLAN:
        return kostlan_covariance(kernel.degree, points, points)
    return kernel_eval_many(kernel, points[:, None, :] - points[None, :, :])


def _log_abs_profile(kernel: Kernel, r: np.ndarray) -> np.ndarray:
    if kernel.family in (KernelFamily.BARGMANN_FOCK, KernelFamily.KOSTLAN):
        # exact, avoids underflow of exp(-r^2/2) at large r
        return -0.5 * r * r
    with np.errstate(divide="ignore"):
        return np.log(np.abs(radial_profile(kernel, r)))


def decay_check(kernel: Kernel, radii: Sequence[float]) -> DecayReport:
    """
    Per-radius ratios |K(r)| r^alpha / beta, evaluated in log space.
    A maximum ratio <= 1 means the declared decay holds on the grid.
    """
    if not kernel.has_decay:
        raise UnsupportedKernelError(f"Kernel {kernel.describe()} carries no decay metadata")

    r = np.asarray(radii, dtype=float)
    if np.any(r < 1.0):
        raise ValidationError("decay_check radii must all be >= 1")

    log_ratio = _log_abs_profile(kernel, r) + kernel.decay_alpha * np.log(r) - kernel.decay_log_beta
    ratios = np.exp(log_ratio)
    report = DecayReport(radii=r, ratios=ratios)
    if not report.holds:
        worst = int(np.argmax(ratios))
        logger.warning(
            "Declared decay fails for %s at r=%.4g (ratio %.4g)",
            kernel.describe(),
            r[worst],
            ratios[worst],
        )
    return report


def bargmann_fock_log_beta(alpha: float) -> float:
    """
    Smallest log(beta) with exp(-r^2/2) <= beta r^-alpha for all r > 0.
    The supremum of r^alpha exp(-r^2/2) sits at r = sqrt(alpha).
    """
    if alpha <= 0:
        return 0.0
    return 0.5 * alpha * (np.log(alpha) - 1.0)
