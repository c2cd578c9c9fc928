"""Parameter pack (n, gamma) and every closed-form constant of the flat model.

All thresholds used elsewhere in the package (critical exponent, trace
Sobolev constant, bubble amplitude calibration, energy quantum, compactness
threshold) are derived here once and carried around as an immutable value
object, so there is a single source of truth for exponents.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from functools import lru_cache
import math

from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from .errors import ParameterError

# Relative tolerance of the cached radial quadrature for the bubble mass
# constant C_n = int (1+|z|^2)^-n dz.
_MASS_QUAD_RTOL = 1e-12


def _check_order(n, gamma):
    if not isinstance(n, int) or n < 1:
        raise ParameterError(f"boundary dimension must be a positive integer, got {n!r}")
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"order gamma must lie in (0, 1), got {gamma!r}")
    if n - 2.0 * gamma <= 0.0:
        raise ParameterError(f"need n - 2*gamma > 0, got n={n}, gamma={gamma}")


def critical_exponent(n, gamma):
    """Trace-critical exponent 2n/(n - 2*gamma); rejects n - 2*gamma <= 0."""
    _check_order(n, gamma)
    return 2.0 * n / (n - 2.0 * gamma)


def coupling_d_gamma(gamma):
    """Normalization 2^(2g) Gamma(g)/Gamma(-g) of the order-g boundary operator."""
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"order gamma must lie in (0, 1), got {gamma!r}")
    return 2.0 ** (2.0 * gamma) * gamma_fn(gamma) / gamma_fn(-gamma)


def coupling_d_star(gamma):
    """Positive weight d* = -d_gamma/(2 gamma) relating the fractional operator
    to the weighted conormal derivative; equals 2^(2g-1) Gamma(g)/Gamma(1-g)."""
    return -coupling_d_gamma(gamma) / (2.0 * gamma)


def sobolev_constant(n, gamma):
    """Sharp constant of the weighted trace Sobolev inequality.

    ||u(.,0)||_{2*}^2 <= S(n,g) * int y^(1-2g) |grad U|^2 over the half-space,
    with equality attained by the bubble extensions.
    """
    _check_order(n, gamma)
    return (
        1.0 / (2.0 * math.pi ** gamma)
        * gamma_fn(gamma) / gamma_fn(1.0 - gamma)
        * gamma_fn((n - 2.0 * gamma) / 2.0) / gamma_fn((n + 2.0 * gamma) / 2.0)
        * (gamma_fn(float(n)) / gamma_fn(n / 2.0)) ** (2.0 * gamma / n)
    )


def fractional_coefficient(n, gamma):
    """Proportionality constant c with (-Lap)^g w = c * w^(2*-1) for the unit
    amplitude bubble w = (lam/(|x|^2+lam^2))^((n-2g)/2).

    Candidate closed form (eigenvalue of the conformally covariant operator on
    the round sphere pulled back through stereographic projection); it is
    validated, never assumed, by the spectral oracle in bubbles.calibrate_amplitude.
    """
    _check_order(n, gamma)
    return 2.0 ** (2.0 * gamma) * gamma_fn((n + 2.0 * gamma) / 2.0) / gamma_fn((n - 2.0 * gamma) / 2.0)


def sphere_area(n):
    """Surface measure of the unit sphere S^(n-1) in R^n (2 for n = 1)."""
    if n == 1:
        return 2.0
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


@lru_cache(maxsize=None)
def bubble_mass_constant(n):
    """C_n = int_{R^n} (1+|z|^2)^(-n) dz by adaptive radial quadrature.

    Cached per dimension; relative tolerance 1e-12 (well below the 1e-10
    contract).  The closed form pi^(n/2) Gamma(n/2)/Gamma(n) is asserted
    against this quadrature in the tests, not used here.
    """
    if not isinstance(n, int) or n < 1:
        raise ParameterError(f"dimension must be a positive integer, got {n!r}")

    def radial(r):
        return r ** (n - 1) * (1.0 + r * r) ** (-n)

    core, _ = quad(radial, 0.0, 1.0, epsabs=0.0, epsrel=_MASS_QUAD_RTOL, limit=200)
    # substitute r = 1/s on the tail so quad sees a finite smooth interval
    tail, _ = quad(lambda s: radial(1.0 / s) / (s * s), 0.0, 1.0,
                   epsabs=0.0, epsrel=_MASS_QUAD_RTOL, limit=200)
    return sphere_area(n) * (core + tail)


@dataclass(frozen=True)
class FracParams:
    """Dimension, order, and all derived constants of the flat model.

    Immutable after construction; build through :meth:`create`.  The derived
    fields are:

    two_star        critical trace exponent 2n/(n-2g)
    d_gamma         2^(2g) Gamma(g)/Gamma(-g) (negative for g in (0,1))
    d_star          -d_gamma/(2g) > 0
    sobolev_S       sharp trace Sobolev constant S(n, g)
    mass_constant   C_n = int (1+|z|^2)^-n dz (lambda-free bubble trace mass)
    kappa           amplitude making the unit bubble solve the boundary
                    equation with unit coefficient
    energy_quantum  E* = (g/n) * kappa^(2*) * C_n, the energy of one bubble
    beta_zero       (g/n) * S^(-n/(2g)), the compactness threshold
    """

    n: int
    gamma: float
    two_star: float
    d_gamma: float
    d_star: float
    sobolev_S: float
    mass_constant: float
    kappa: float
    energy_quantum: float
    beta_zero: float

    @classmethod
    def create(cls, n, gamma):
        _check_order(n, gamma)
        two_star = critical_exponent(n, gamma)
        d_g = coupling_d_gamma(gamma)
        d_s = coupling_d_star(gamma)
        if d_s <= 0.0:
            raise ParameterError(f"derived d* must be positive, got {d_s}")
        S = sobolev_constant(n, gamma)
        cn = bubble_mass_constant(n)
        # boundary equation has the raw conormal derivative, hence the d* division
        c_boundary = fractional_coefficient(n, gamma) / d_s
        kappa = c_boundary ** ((n - 2.0 * gamma) / (4.0 * gamma))
        e_star = (gamma / n) * kappa ** two_star * cn
        beta0 = (gamma / n) * S ** (-n / (2.0 * gamma))
        return cls(n=n, gamma=gamma, two_star=two_star, d_gamma=d_g, d_star=d_s,
                   sobolev_S=S, mass_constant=cn, kappa=kappa,
                   energy_quantum=e_star, beta_zero=beta0)

    @property
    def trace_power(self):
        """Decay exponent (n - 2*gamma)/2 of the bubble trace profile."""
        return (self.n - 2.0 * self.gamma) / 2.0

    def beta_zero_cross_check(self):
        """Relative deviation between the two routes to the energy quantum:
        (g/n) S^(-n/2g) versus (g/n) kappa^(2*) C_n.  Analytically zero."""
        return abs(self.energy_quantum - self.beta_zero) / self.beta_zero

    def as_dict(self):
        """Flat dict for the `constants` CLI report (documented key set)."""
        d = asdict(self)
        return {
            "n": d["n"],
            "gamma": d["gamma"],
            "two_star": d["two_star"],
            "d_gamma": d["d_gamma"],
            "d_star": d["d_star"],
            "sobolev_S": d["sobolev_S"],
            "kappa": d["kappa"],
            "energy_quantum": d["energy_quantum"],
            "beta_zero": d["beta_zero"],
        }
