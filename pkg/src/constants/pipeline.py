"""
Deterministic RSW constant pipeline and decorrelation budgets.

Everything is evaluated in log space with mpmath: at c0 = 1/2, Q3 is about
exp(-2151) and tau1 = exp(E) with E about exp(2152), so even log(tau1)
overflows a double.
"""

import logging
import math
from typing import Optional

import mpmath
import numpy as np
from scipy.optimize import brentq

from src.constants.models import (
    AlphaCurves,
    AlphaEstimate,
    DecorrBudget,
    LOG_C_COUPLING,
    RswConstants,
    TNuBound,
)
from src.errors import DomainError
from src.kernels.core import bargmann_fock_log_beta

logger = logging.getLogger(__name__)

PRECISION_DPS = 60
# b of the lower bound alpha(Omega, s) >= b: lambda / 4 with the small-box radius lambda = 1/4
DEFAULT_ALPHA_LOWER = 1.0 / 16.0
DEFAULT_A_T = 8.0  # face-centred square lattice at eps = 1/2


def _check_c0_nu(c0: float, nu: float):
    if not 0 < c0 < 1:
        raise DomainError(f"c0 must lie in (0, 1), got {c0}")
    if not 0 < nu < 0.5:
        raise DomainError(f"nu must lie in (0, 1/2), got {nu}")


def log_Q1(c0) -> mpmath.mpf:
    """log of c0 (c0/8)^4."""
    c0 = mpmath.mpf(c0)
    return mpmath.log(c0) + 4 * mpmath.log(c0 / 8)


def log_q2(c0) -> mpmath.mpf:
    """log of (Q1^15 c0^2)^4."""
    c0 = mpmath.mpf(c0)
    return 4 * (15 * log_Q1(c0) + 2 * mpmath.log(c0))


def log_q2_tilde(c0) -> mpmath.mpf:
    """log of ((Q1 (c0/4)^2)^9 c0^8)^4."""
    c0 = mpmath.mpf(c0)
    return 4 * (9 * (log_Q1(c0) + 2 * mpmath.log(c0 / 4)) + 8 * mpmath.log(c0))


def log_Q2(c0) -> mpmath.mpf:
    return min(log_q2(c0), log_q2_tilde(c0))


def log_Q3(c0) -> mpmath.mpf:
    """log of (Q2 (c0/4)^2)^3 c0^2."""
    c0 = mpmath.mpf(c0)
    return 3 * (log_Q2(c0) + 2 * mpmath.log(c0 / 4)) + 2 * mpmath.log(c0)


def log_tau1(c0) -> mpmath.mpf:
    """log tau1 = max(log 4, ln5 ln(c0/8) / ln(1 - Q3/2) + ln5)."""
    c0 = mpmath.mpf(c0)
    with mpmath.workdps(PRECISION_DPS):
        half_q3 = mpmath.exp(log_Q3(c0)) / 2
        exponent = mpmath.log(5) * mpmath.log(c0 / 8) / mpmath.log1p(-half_q3) + mpmath.log(5)
        return max(mpmath.log(4), exponent)


def gamma_nu(nu) -> mpmath.mpf:
    """1 + log_{4/(3+2nu)}(3/2 + nu)."""
    nu = mpmath.mpf(nu)
    return 1 + mpmath.log(mpmath.mpf(3) / 2 + nu) / mpmath.log(4 / (3 + 2 * nu))


def log_phi_bound(budget: DecorrBudget, area: float, sup_abs_K: float) -> float:
    """log of C a_T^(8/5) area^(8/5) sup|K|^(1/5), unclamped; -inf when sup|K| = 0."""
    if area <= 0:
        raise DomainError(f"area must be positive, got {area}")
    if not 0 <= sup_abs_K <= 1:
        raise DomainError(f"sup |K| must lie in [0, 1], got {sup_abs_K}")
    if sup_abs_K == 0:
        return -math.inf
    return LOG_C_COUPLING + 1.6 * math.log(budget.a_T) + 1.6 * math.log(area) + 0.2 * math.log(sup_abs_K)


def phi_bound(budget: DecorrBudget, area: float, sup_abs_K: float) -> float:
    return math.exp(min(0.0, log_phi_bound(budget, area, sup_abs_K)))


def log_decorrelation_envelope(budget: DecorrBudget, s: float) -> float:
    """log of C' a_T^(8/5) s^((16-alpha)/5) ln^(16/5) s, unclamped (s > 1)."""
    if s <= 1:
        raise DomainError(f"the decorrelation envelope needs s > 1, got {s}")
    log_s = math.log(s)
    return (
        budget.log_C_prime
        + 1.6 * math.log(budget.a_T)
        + (16.0 - budget.alpha) / 5.0 * log_s
        + 3.2 * math.log(log_s)
    )


def decorrelation_envelope(budget: DecorrBudget, s: float) -> float:
    return math.exp(min(0.0, log_decorrelation_envelope(budget, s)))


def _log_s_star(budget: DecorrBudget, log_target: float) -> float:
    """
    Largest log s with envelope(s) >= target. The log envelope is decreasing
    in L = log s once L > 16 / (alpha - 16).
    """
    if budget.alpha <= 16:
        raise DomainError(f"the decorrelation envelope decays only for alpha > 16, got {budget.alpha}")

    def excess(L: float) -> float:
        return log_decorrelation_envelope(budget, math.exp(L)) - log_target

    lo = max(1e-6, 16.0 / (budget.alpha - 16.0))
    if excess(lo) <= 0:
        return lo
    hi = 2.0 * lo + 1.0
    while excess(hi) > 0:
        hi *= 2.0
    return brentq(excess, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)


def pipeline(
    c0: float,
    nu: float,
    budget: Optional[DecorrBudget] = None,
    alpha_lower: float = DEFAULT_ALPHA_LOWER,
) -> RswConstants:
    _check_c0_nu(c0, nu)
    if alpha_lower <= 0:
        raise DomainError(f"alpha_lower must be positive, got {alpha_lower}")
    budget = budget or DecorrBudget(a_T=DEFAULT_A_T)

    with mpmath.workdps(PRECISION_DPS):
        c0_m = mpmath.mpf(c0)
        nu_m = mpmath.mpf(nu)
        lq1 = log_Q1(c0_m)
        lq2 = log_q2(c0_m)
        lq2t = log_q2_tilde(c0_m)
        lQ2 = min(lq2, lq2t)
        lQ3 = log_Q3(c0_m)
        ltau1 = log_tau1(c0_m)
        gamma = gamma_nu(nu_m)

        # s(Omega): envelope(s) = (c0/16) Q3, but never below exp(tau1)
        log_target = float(mpmath.log(c0_m / 16) + lQ3)
        log_s_star = mpmath.mpf(_log_s_star(budget, log_target))
        llso = max(mpmath.log(log_s_star), ltau1)

        # s_nu = max(s(Omega), floor(6/nu) + 1)
        llsn = max(llso, mpmath.log(mpmath.log(math.floor(6 / nu) + 1)))

        # log t_nu = log(3/2 + nu) + gamma log s_nu + (1 - gamma) log b
        log_t = (
            mpmath.log(mpmath.mpf(3) / 2 + nu_m)
            + gamma * mpmath.exp(llsn)
            + (1 - gamma) * mpmath.log(mpmath.mpf(alpha_lower))
        )
        lltn = mpmath.log(log_t)

        return RswConstants(
            c0=c0_m,
            nu=nu_m,
            log_Q1=+lq1,
            log_q2=+lq2,
            log_q2_tilde=+lq2t,
            log_Q2=+lQ2,
            log_Q3=+lQ3,
            log_tau1=+ltau1,
            gamma_nu=+gamma,
            log_s_star=log_s_star,
            log_log_s_omega=+llso,
            log_log_s_nu=+llsn,
            log_log_t_nu=+lltn,
            alpha_lower=mpmath.mpf(alpha_lower),
        )


def tau3_nu(c0: float, nu: float) -> mpmath.mpf:
    """log tau_{3,nu} = gamma(nu) log tau1: the bound on consecutive good-scale ratios."""
    _check_c0_nu(c0, nu)
    with mpmath.workdps(PRECISION_DPS):
        return +(gamma_nu(nu) * log_tau1(c0))


def rsw_lower_bound(rho: float, c0: float, nu: float) -> mpmath.mpf:
    """
    log(-log P_nu(rho, c0)) where
    P_nu = Q2^((1 + 2 max(0, rho - 2)) (1 + 2 (tau3 - 1) rho / (rho - 1))).
    """
    if rho <= 1:
        raise DomainError(f"rho must exceed 1, got {rho}")
    _check_c0_nu(c0, nu)
    with mpmath.workdps(PRECISION_DPS):
        rho_m = mpmath.mpf(rho)
        tau3 = mpmath.exp(tau3_nu(c0, nu))
        first = 1 + 2 * max(mpmath.mpf(0), rho_m - 2)
        second = 1 + 2 * (tau3 - 1) * rho_m / (rho_m - 1)
        return +(mpmath.log(-log_Q2(c0)) + mpmath.log(first) + mpmath.log(second))


def aspect_comparison_exponent(s: float, s2: float, rho: float, rho2: float) -> float:
    """Exponent k with f_{s2}(rho2) >= f_s(rho)^k for s <= s2 and rho, rho2 > 1."""
    if not (0 < s <= s2 and rho > 1 and rho2 > 1):
        raise DomainError(f"need 0 < s <= s2 and rho, rho2 > 1; got s={s}, s2={s2}, rho={rho}, rho2={rho2}")
    return 1.0 + 2.0 * max(0.0, rho2 / (rho - 1.0) * (s2 / s - rho / rho2))


def mod6_shift(s: int) -> int:
    """Smallest k >= 0 with s + k divisible by 6."""
    if int(s) != s or s < 1:
        raise DomainError(f"mod6_shift needs a positive integer, got {s}")
    return (-int(s)) % 6


def t_nu_bound(
    a_T: float,
    alpha: float,
    theta: float,
    nu: float,
    c0: float = 0.5,
    log_beta: Optional[float] = None,
    alpha_lower: float = DEFAULT_ALPHA_LOWER,
) -> TNuBound:
    """
    log t_nu <= 8 gamma / (alpha - 16 - theta) * log a_T + log C_{theta,nu}.

    Assembly of C_{theta,nu} (a_T >= 1):
      ln s <= (16 / (e theta)) s^(theta/16) turns the envelope into
      phi(s) <= C' a_T^(8/5) (16/(e theta))^(16/5) s^((16 + theta - alpha)/5),
      which is below (c0/16) Q3 once s >= C_theta a_T^(8/(alpha-16-theta)) with
      C_theta = [C' (16/(e theta))^(16/5) / ((c0/16) Q3)]^(5/(alpha-16-theta));
      then log C_{theta,nu} = log(3/2+nu) + (1-gamma) log b
                              + gamma max(log C_theta, tau1, log(floor(6/nu)+1)).
    """
    if not 0 < theta < alpha - 16:
        raise DomainError(f"t_nu_bound needs 0 < theta < alpha - 16, got theta={theta}, alpha={alpha}")
    if not 0 < nu < 0.5:
        raise DomainError(f"nu must lie in (0, 1/2), got {nu}")
    if a_T <= 0:
        raise DomainError(f"a_T must be positive, got {a_T}")

    if log_beta is None:
        log_beta = bargmann_fock_log_beta(alpha)
    budget = DecorrBudget(a_T=a_T, alpha=alpha, log_beta=float(log_beta))
    denominator = alpha - 16.0 - theta

    with mpmath.workdps(PRECISION_DPS):
        gamma = gamma_nu(nu)
        exponent = float(8 * gamma / denominator)
        log_c_theta = (
            budget.log_C_prime
            + 3.2 * math.log(16.0 / (math.e * theta))
            - (mpmath.log(mpmath.mpf(c0) / 16) + log_Q3(c0))
        ) * 5 / denominator
        log_scale_floor = max(
            log_c_theta,
            mpmath.exp(log_tau1(c0)),
            mpmath.log(math.floor(6 / nu) + 1),
        )
        log_constant = (
            mpmath.log(mpmath.mpf(3) / 2 + nu)
            + (1 - gamma) * mpmath.log(mpmath.mpf(alpha_lower))
            + gamma * log_scale_floor
        )
    return TNuBound(exponent=exponent, log_scale=exponent * math.log(a_T), log_constant=+log_constant)


def main_theorem_alpha_threshold() -> float:
    """144 + 128 log_{4/3}(3/2) = 16 + 128 gamma(0)."""
    return 144.0 + 128.0 * math.log(1.5) / math.log(4.0 / 3.0)


def nodal_exponent_margin(alpha: float, theta: float, nu: float) -> float:
    """min((alpha - 16 - theta) / gamma(nu) - 128, alpha - 144); positive in the main theorem's regime."""
    gamma = float(gamma_nu(nu))
    return min((alpha - 16.0 - theta) / gamma - 128.0, alpha - 144.0)


def estimate_alpha_s(curves: AlphaCurves, c0_hat: float) -> AlphaEstimate:
    """
    Plug-in estimate of alpha(Omega, s) on the grid.

    (P1) P[X_s(alpha)] >= Q1(c0_hat); (P2) P[H_s(0, alpha)] - P[H_s(alpha, s/2)] >= c0_hat / 4.
    Returns the smallest alpha where both hold; otherwise the smallest alpha
    where (P1) holds with p2_holds False; otherwise s/4 flagged.
    """
    q1 = float(mpmath.exp(log_Q1(c0_hat)))
    p1 = curves.p_x >= q1
    p2 = curves.h_gap >= c0_hat / 4.0

    both = np.nonzero(p1 & p2)[0]
    if both.size:
        return AlphaEstimate(float(curves.alphas[both[0]]), True, True, False)
    only_p1 = np.nonzero(p1)[0]
    if only_p1.size:
        logger.info("No grid alpha satisfies (P2) at s=%g; returning the first (P1) point", curves.s)
        return AlphaEstimate(float(curves.alphas[only_p1[0]]), True, False, False)
    logger.warning("No grid alpha satisfies (P1) at s=%g; falling back to s/4", curves.s)
    return AlphaEstimate(curves.s / 4.0, False, False, True)
