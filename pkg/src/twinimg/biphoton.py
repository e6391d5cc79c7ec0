"""Closed-form double-Gaussian biphoton model.

A Gaussian pump beam driving collinear pair emission through a thin
nonlinear crystal produces a two-photon transverse amplitude that is,
per transverse axis, a Gaussian in the pair *sum* coordinate and a
Gaussian in the pair *difference* coordinate.  In the position
representation the sum width is set by the pump (``sigma_p``) and the
difference width by the phase-matching acceptance (``sigma_phi``); in
the momentum representation the two widths swap roles.  Squaring either
amplitude gives independent Gaussian densities for the sum and
difference coordinates, which is what makes the conditional-variance
algebra below exact.

Unit conventions, used consistently across the package:

* transverse lengths in micrometres (um),
* transverse momenta in hbar/um with hbar = 1,
* hence the single-particle Heisenberg bound on the product
  Var(x1 - x2) * Var(px1 + px2) is the pure number 1/4.

The pump and phase-matching widths may differ per axis; everything here
factorizes axis by axis, so anisotropic sources are handled without any
extra machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Heisenberg bound on the conditional-variance product (hbar = 1).
HEISENBERG_BOUND = 0.25

#: Minimum pump/phase-matching width ratio for which the strongly
#: correlated (sum >> difference width) approximation is accepted.
EPR_REGIME_FACTOR = 2.0


class EprRegimeError(ValueError):
    """Raised when widths are not in the strongly correlated regime."""


@dataclass(frozen=True)
class BiphotonParams:
    """Per-axis Gaussian widths of the two-photon amplitude.

    ``sigma_p_*`` is the pump beam standard deviation and ``sigma_phi_*``
    the standard deviation (defined in the crystal plane) of the Fourier
    transform of the phase-matching function.  All widths in um.
    """

    sigma_p_x: float
    sigma_p_y: float
    sigma_phi_x: float
    sigma_phi_y: float

    def __post_init__(self):
        for name in ("sigma_p_x", "sigma_p_y", "sigma_phi_x", "sigma_phi_y"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @property
    def sigma_p(self) -> np.ndarray:
        """Pump widths as an (x, y) array."""
        return np.array([self.sigma_p_x, self.sigma_p_y])

    @property
    def sigma_phi(self) -> np.ndarray:
        """Phase-matching widths as an (x, y) array."""
        return np.array([self.sigma_phi_x, self.sigma_phi_y])

    def in_epr_regime(self, factor: float = EPR_REGIME_FACTOR) -> bool:
        """True if sigma_p >= factor * sigma_phi on both axes."""
        return bool(np.all(self.sigma_p >= factor * self.sigma_phi))

    def require_epr_regime(self, factor: float = EPR_REGIME_FACTOR) -> None:
        if not self.in_epr_regime(factor):
            raise EprRegimeError(
                "not in EPR approximation regime: requires sigma_p >= "
                f"{factor} * sigma_phi per axis (got sigma_p={tuple(self.sigma_p)}, "
                f"sigma_phi={tuple(self.sigma_phi)})"
            )


@dataclass(frozen=True)
class EprPrediction:
    """Analytic conditional-variance budget of a parameter set.

    ``var_diff_*`` is the per-axis variance of the position difference
    (um^2), ``var_sum_p*`` the per-axis variance of the momentum sum
    (hbar^2 um^-2).  ``product_*`` multiplies the two, ``v_*`` is the
    ratio of the Heisenberg bound to the product (degree of paradox) and
    ``schmidt_k`` the geometric mean of the two axes' degrees, i.e. the
    effective dimensionality of the transverse entanglement.
    """

    var_diff_x: float
    var_diff_y: float
    var_sum_px: float
    var_sum_py: float
    product_x: float
    product_y: float
    v_x: float
    v_y: float
    schmidt_k: float


@dataclass(frozen=True)
class EprVerdict:
    violated: bool
    n_sigma: float


def _check_coords(*arrays) -> list[np.ndarray]:
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if a.shape[-1] != 2:
            raise ValueError("coordinates must have a trailing axis of length 2")
        if not np.all(np.isfinite(a)):
            raise ValueError("coordinates must be finite")
        out.append(a)
    return out


def wavefunction_position(params: BiphotonParams, rho1, rho2):
    """Real position-representation amplitude at (rho1, rho2).

    Arguments are (..., 2) arrays of transverse positions in um; the
    result broadcasts over leading axes.  The amplitude is normalized so
    that |psi|^2 integrates to one over both transverse planes.
    """
    rho1, rho2 = _check_coords(rho1, rho2)
    s = rho1 + rho2
    u = rho1 - rho2
    sp2 = params.sigma_p ** 2
    sphi2 = params.sigma_phi ** 2
    exponent = (s ** 2 / (4.0 * sp2) + u ** 2 / (4.0 * sphi2)).sum(axis=-1)
    norm = 1.0 / (np.pi * math.sqrt(
        params.sigma_p_x * params.sigma_phi_x * params.sigma_p_y * params.sigma_phi_y))
    return norm * np.exp(-exponent)


def wavefunction_momentum(params: BiphotonParams, p1, p2):
    """Real momentum-representation amplitude at (p1, p2).

    Arguments are (..., 2) arrays of transverse momenta in hbar/um.  The
    sum term carries the pump width and the difference term the
    phase-matching width, as required by Fourier duality with
    :func:`wavefunction_position`; normalized like the position form.
    """
    p1, p2 = _check_coords(p1, p2)
    s = p1 + p2
    u = p1 - p2
    sp2 = params.sigma_p ** 2
    sphi2 = params.sigma_phi ** 2
    exponent = (sp2 * s ** 2 / 4.0 + sphi2 * u ** 2 / 4.0).sum(axis=-1)
    norm = math.sqrt(
        params.sigma_p_x * params.sigma_phi_x * params.sigma_p_y * params.sigma_phi_y) / np.pi
    return norm * np.exp(-exponent)


def predict(params: BiphotonParams) -> EprPrediction:
    """Analytic conditional variances, EPR products and dimensionality.

    Valid in the strongly correlated regime (pump much wider than the
    phase-matching width); rejects parameter sets outside it.  Squaring
    the amplitudes gives, per axis, Var(x1 - x2) = sigma_phi^2 and
    Var(px1 + px2) = 1 / sigma_p^2; both moments are cross-checked
    against sampling and quadrature in the test suite.
    """
    params.require_epr_regime()
    var_diff = params.sigma_phi ** 2
    var_sum_p = 1.0 / params.sigma_p ** 2
    product = var_diff * var_sum_p
    v = HEISENBERG_BOUND / product
    return EprPrediction(
        var_diff_x=float(var_diff[0]),
        var_diff_y=float(var_diff[1]),
        var_sum_px=float(var_sum_p[0]),
        var_sum_py=float(var_sum_p[1]),
        product_x=float(product[0]),
        product_y=float(product[1]),
        v_x=float(v[0]),
        v_y=float(v[1]),
        schmidt_k=float(math.sqrt(v[0] * v[1])),
    )


def epr_verdict(product: float, uncertainty: float) -> EprVerdict:
    """Compare a measured variance product against the Heisenberg bound.

    ``n_sigma`` is how many uncertainties the product sits below the
    bound (negative if above).  Violation is decided on the central
    value alone.
    """
    if not (math.isfinite(product)):
        raise ValueError(f"product must be finite, got {product!r}")
    if not (math.isfinite(uncertainty) and uncertainty > 0.0):
        raise ValueError(f"uncertainty must be positive, got {uncertainty!r}")
    n_sigma = (HEISENBERG_BOUND - product) / uncertainty
    return EprVerdict(violated=bool(product < HEISENBERG_BOUND), n_sigma=float(n_sigma))
