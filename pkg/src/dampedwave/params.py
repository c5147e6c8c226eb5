"""Scalar coefficients of the damped wave equation and the closed-form rates.

The damping coefficient mu1 and mass coefficient mu2 combine into the
effective mass mu = mu1*(2-mu1)/4 + mu2 of the Klein-Gordon form, and the
Bessel order nu = sqrt(1-4*mu)/2 controls every predicted decay or growth
exponent.  Everything here is a pure function of (mu1, mu2, d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficient pair with the derived effective mass and Bessel order.

    mu equals mu1*(2-mu1)/4 + mu2 exactly.  nu is real in [0, inf) when
    mu <= 1/4 and purely imaginary when mu > 1/4; in both branches
    nu**2 + mu = 1/4.
    """

    mu1: float
    mu2: float
    dimension: int
    lambda_sign: int = 1
    mu: float = field(init=False)
    nu: complex = field(init=False)

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.lambda_sign not in (+1, -1):
            raise ValueError(f"lambda_sign must be +1 or -1, got {self.lambda_sign}")
        mu = self.mu1 * (2.0 - self.mu1) / 4.0 + self.mu2
        if mu <= 0.25:
            nu = complex(math.sqrt(1.0 - 4.0 * mu) / 2.0, 0.0)
        else:
            nu = complex(0.0, math.sqrt(4.0 * mu - 1.0) / 2.0)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)

    @property
    def re_nu(self) -> float:
        return self.nu.real

    @property
    def has_log_rate(self) -> bool:
        """True exactly when the log-corrected decay regime applies (mu == 1/4)."""
        return self.mu == 0.25


@dataclass(frozen=True)
class RatePrediction:
    """Closed-form asymptotic exponents for a coefficient set.

    linear_order      exponent of (1+t) in the linear scattering error
    has_log           whether that error carries a (1+log(1+t)) factor
    nonlinear_order   error exponent for the quintic equation,
                      max{-1/2 + Re nu, -2*mu1/(d-2)}
    dw_shift          extra -mu1/2 gained by undoing the Liouville transform
    alpha             L^2 growth exponent max{1/2 + Re nu, 1 - 2*mu1/(d-2)}
    """

    linear_order: float
    has_log: bool
    nonlinear_order: float
    dw_shift: float
    alpha: float


def derive_coefficients(mu1: float, mu2: float, d: int, lambda_sign: int = 1) -> CoefficientSet:
    """Build the fully derived coefficient set for damping mu1, mass mu2 in dimension d."""
    return CoefficientSet(mu1=float(mu1), mu2=float(mu2), dimension=int(d), lambda_sign=lambda_sign)


def coefficients_for_mu(mu: float, d: int, mu1: float = 0.0, lambda_sign: int = 1) -> CoefficientSet:
    """Coefficient set with a prescribed effective mass mu at given damping mu1.

    Solves for mu2 so that mu1*(2-mu1)/4 + mu2 == mu.  Convenient for
    experiments stated directly in terms of mu.
    """
    mu2 = float(mu) - mu1 * (2.0 - mu1) / 4.0
    return derive_coefficients(mu1, mu2, d, lambda_sign)


def predict_rates(c: CoefficientSet) -> RatePrediction:
    """Predicted decay/growth exponents for the coefficient set.

    The nonlinear entries require d >= 3 (energy-critical power); for
    d < 3 they are NaN.
    """
    linear_order = -0.5 + c.re_nu
    if c.dimension >= 3:
        nl_candidate = -2.0 * c.mu1 / (c.dimension - 2)
        nonlinear_order = max(linear_order, nl_candidate)
        alpha = max(0.5 + c.re_nu, 1.0 + nl_candidate)
    else:
        nonlinear_order = math.nan
        alpha = math.nan
    return RatePrediction(
        linear_order=linear_order,
        has_log=c.has_log_rate,
        nonlinear_order=nonlinear_order,
        dw_shift=-c.mu1 / 2.0,
        alpha=alpha,
    )


def check_admissible_pair(q: float, r: float, d: int) -> dict:
    """Wave admissibility of the space-time exponent pair (q, r) in dimension d.

    The pair is admissible when 2 <= q, r <= inf, 1/q <= (d-1)/2*(1/2-1/r),
    and (q, r, d) != (2, inf, 3).  gamma = d*(1/2 - 1/r) - 1/q is the
    derivative loss and is returned regardless of admissibility.
    """
    if q < 2 or r < 2:
        raise ValueError("admissibility is defined for q, r >= 2")
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    inv_r = 0.0 if math.isinf(r) else 1.0 / r
    gamma = d * (0.5 - inv_r) - inv_q
    admissible = inv_q <= (d - 1) / 2.0 * (0.5 - inv_r) + 1e-15
    if q == 2 and math.isinf(r) and d == 3:
        admissible = False
    return {"admissible": admissible, "gamma": gamma}


def nu_squared_defect(c: CoefficientSet) -> float:
    """|nu^2 + mu - 1/4|, zero in exact arithmetic on both order branches."""
    return abs(c.nu * c.nu + c.mu - 0.25)
