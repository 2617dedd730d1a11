"""Market-coordinate parameters and the reduction to the dimensionless pair (a, b).

All rates are per calendar year; sigma has units 1/sqrt(year), eta has units
price*year/share^2.  The reduced coordinate is x = eta*sigma^2*z/s, and every
multiplication by sigma^2 is done here or in reduced coordinates so downstream
modules never mix units.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError


def reduction_coefficients(rho, lam, r, sigma):
    """Map (rho, lambda, r, sigma) to the dimensionless pair (a, b).

        a = 2*(lambda - r + sigma^2) / sigma^2
        b = -2*(2*lambda - rho + sigma^2) / sigma^2

    Uses only field arithmetic, so exact inputs (e.g. ``fractions.Fraction``)
    produce exact outputs.
    """
    s2 = sigma * sigma
    a = 2 * (lam - r + s2) / s2
    b = -2 * (2 * lam - rho + s2) / s2
    return a, b


@dataclass(frozen=True)
class ModelParams:
    """Market-coordinate model parameters.

    rho    discount rate (1/year)
    lam    drift of the unaffected price (1/year)
    r      inventory interest rate (1/year); a storage cost when negative
    sigma  volatility of the unaffected price (1/sqrt(year)), > 0
    eta    temporary impact coefficient (price*year/share^2), > 0

    Construction enforces the standing assumption rho > lam + r; downstream
    code may rely on it without re-checking.
    """

    rho: float
    lam: float
    r: float
    sigma: float
    eta: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not self.eta > 0.0:
            raise ValidationError(f"eta must be positive, got {self.eta}")
        if not self.rho > self.lam + self.r:
            raise ValidationError(
                f"need rho > lam + r (got rho={self.rho}, lam+r={self.lam + self.r}); "
                "otherwise the reduced problem has a + b <= 0 and no admissible solution"
            )


@dataclass(frozen=True)
class ReducedParams:
    """Dimensionless pair (a, b) governing the reduced equation; a + b > 0."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a + self.b > 0.0:
            raise ValidationError(
                f"need a + b > 0, got a={self.a}, b={self.b} (a+b={self.a + self.b})"
            )


@dataclass(frozen=True)
class MarketState:
    """Initial market state: unaffected price s > 0 and inventory z >= 0."""

    s: float
    z: float

    def __post_init__(self):
        if not self.s > 0.0:
            raise ValidationError(f"price s must be positive, got {self.s}")
        if not self.z >= 0.0:
            raise ValidationError(f"inventory z must be non-negative, got {self.z}")


def reduce(params: ModelParams) -> ReducedParams:
    """Collapse the five rate parameters into the reduced pair (a, b).

    The pair satisfies a + b = 2*(rho - lam - r)/sigma^2 > 0, which is
    equivalent to the standing assumption already enforced by ModelParams.
    """
    a, b = reduction_coefficients(params.rho, params.lam, params.r, params.sigma)
    return ReducedParams(float(a), float(b))


def check_strong_admissibility(params: ModelParams) -> bool:
    """True iff rho > max(lam, 0) + max(r, 0).

    In this stronger regime bounded purchase rates are admissible controls as
    well; the flag is informational and has no effect on the solve.
    """
    return params.rho > max(params.lam, 0.0) + max(params.r, 0.0)


def calibrate_eta(impact_fraction: float, price: float, window_minutes: float,
                  trading_minutes_per_year: float) -> float:
    """Back out eta from an empirical block-impact estimate.

    ``impact_fraction`` is the relative execution-price drop observed when one
    reference block (inventory unit z = 1) is sold over ``window_minutes``.
    With a trading year of ``trading_minutes_per_year`` minutes,

        eta = impact_fraction * price * window_minutes / trading_minutes_per_year.
    """
    for name, v in (("impact_fraction", impact_fraction), ("price", price),
                    ("window_minutes", window_minutes),
                    ("trading_minutes_per_year", trading_minutes_per_year)):
        if not v > 0.0:
            raise ValidationError(f"{name} must be strictly positive, got {v}")
    return impact_fraction * price * window_minutes / trading_minutes_per_year
