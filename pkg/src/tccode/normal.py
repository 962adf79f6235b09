"""Standard normal tail and its inverse.

The tail uses the complementary error function; the inverse starts from the
Acklam rational approximation and polishes with Halley steps on the tail
itself, which brings it to near machine precision across (0, 1).
"""

from __future__ import annotations

import math

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Acklam's rational approximation coefficients for the normal quantile.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def gaussian_tail(z: float) -> float:
    """Q(z) = P(N(0,1) > z)."""
    return 0.5 * math.erfc(z / _SQRT2)


def _phi(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def _acklam_ppf(p: float) -> float:
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if p > p_high:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                 / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def gaussian_quantile(eps: float) -> float:
    """The z with Q(z) = eps, for eps in (0, 1)."""
    if not 0.0 < eps < 1.0:
        raise ValueError("quantile requires eps strictly inside (0, 1)")
    if eps > 0.5:
        # Work in the lower tail, where erfc keeps full relative precision;
        # 1 - eps is exact for eps >= 1/2.
        return -gaussian_quantile(1.0 - eps)
    z = -_acklam_ppf(eps)  # Q^{-1}(eps) = -Phi^{-1}(eps)
    for _ in range(3):
        err = gaussian_tail(z) - eps
        d = _phi(z)
        if d == 0.0:
            break
        # Halley step for f(z) = Q(z) - eps, with f' = -phi, f'' = z*phi.
        step = err / d
        z += step / (1.0 - 0.5 * z * step)
    return z
