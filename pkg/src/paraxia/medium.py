"""Statistical model of the random slab.

The medium is described by the standard deviation ``sigma`` of the index
fluctuations and by the longitudinal and transverse correlation radii
``l_z`` and ``l_x``.  A correlation *family* supplies the dimensionless
autocorrelation; everything the wave solvers need is derived from its
z-integrated form

    C0(x)    = sigma**2 * l_z * c0(x / l_x)
    C0hat(u) = sigma**2 * l_z * l_x**d * c0hat(u * l_x)

where ``c0`` and ``c0hat`` are the dimensionless integrated
autocorrelation and its transverse Fourier transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CorrelationFamily",
    "GaussianFamily",
    "FAMILIES",
    "MediumSpec",
    "DimensionlessGroups",
    "evaluate_c0",
    "evaluate_c0_hat",
    "dimensionless_groups",
    "NARROWBAND_MARGIN",
]

# "B << Bc" read as B < 0.1 * Bc.
NARROWBAND_MARGIN = 0.1


class CorrelationFamily:
    """Dimensionless correlation model ``C(z, x)`` reduced to its z-integral.

    Subclasses provide ``c0`` (integrated autocorrelation, isotropic in
    ``x``), ``c0_hat`` (its d-dimensional Fourier transform) and the
    curvature constant ``dcal = -Laplacian(c0)(0) / d``.
    """

    name = "abstract"

    def c0(self, x):
        raise NotImplementedError

    def c0_hat(self, u, d=1):
        raise NotImplementedError

    def dcal(self, d=1):
        raise NotImplementedError

    def c0_hat_support(self, d=1, rel=1e-12):
        """Radius beyond which ``c0_hat < rel * c0_hat(0)``."""
        raise NotImplementedError


class GaussianFamily(CorrelationFamily):
    """``C(z, x) = exp(-z**2 - |x|**2)``.

    Integrating over z gives ``c0(x) = sqrt(pi) exp(-|x|**2)`` whose
    transform is ``c0_hat(u) = sqrt(pi) * pi**(d/2) * exp(-|u|**2 / 4)``.
    """

    name = "gaussian"

    def c0(self, x):
        x = np.asarray(x, dtype=float)
        return math.sqrt(math.pi) * np.exp(-x * x)

    def c0_hat(self, u, d=1):
        u = np.asarray(u, dtype=float)
        return math.sqrt(math.pi) * math.pi ** (d / 2) * np.exp(-0.25 * u * u)

    def dcal(self, d=1):
        return 2.0 * math.sqrt(math.pi)

    def c0_hat_support(self, d=1, rel=1e-12):
        return 2.0 * math.sqrt(-math.log(rel))


FAMILIES: dict[str, CorrelationFamily] = {"gaussian": GaussianFamily()}


def _family(tag: str) -> CorrelationFamily:
    try:
        return FAMILIES[tag]
    except KeyError:
        raise ValueError(f"unknown correlation family {tag!r}; known: {sorted(FAMILIES)}") from None


@dataclass(frozen=True)
class MediumSpec:
    """Random-medium statistics.

    Parameters
    ----------
    sigma : float
        Standard deviation of the fluctuations (dimensionless).
    l_z, l_x : float
        Longitudinal and transverse correlation radii.
    family : str
        Correlation family tag, a key of :data:`FAMILIES`.
    """

    sigma: float
    l_z: float = 1.0
    l_x: float = 1.0
    family: str = "gaussian"

    def __post_init__(self):
        if not (self.sigma >= 0):
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not (self.l_z > 0 and self.l_x > 0):
            raise ValueError(f"correlation radii must be positive, got l_z={self.l_z}, l_x={self.l_x}")
        _family(self.family)

    @property
    def model(self) -> CorrelationFamily:
        return _family(self.family)

    @property
    def amplitude(self) -> float:
        """``sigma**2 * l_z``, the scale of ``C0``."""
        return self.sigma ** 2 * self.l_z

    def c0(self, x):
        """Integrated autocorrelation ``C0`` at transverse offset ``x`` (scalar |x|)."""
        return self.amplitude * self.model.c0(np.abs(np.asarray(x, dtype=float)) / self.l_x)

    def c0_hat(self, u, d=1):
        """Power spectral density ``C0hat`` at spatial frequency magnitude ``u``."""
        u = np.abs(np.asarray(u, dtype=float))
        return self.amplitude * self.l_x ** d * self.model.c0_hat(u * self.l_x, d)

    def c0_zero(self) -> float:
        return float(self.c0(0.0))

    def diffusion(self, d=1) -> float:
        """``D = sigma**2 l_z l_x**-2 * dcal`` (curvature of ``C0`` at 0)."""
        return self.amplitude / self.l_x ** 2 * self.model.dcal(d)

    def to_dict(self) -> dict:
        return {"family": self.family, "sigma": self.sigma, "l_z": self.l_z, "l_x": self.l_x}


def evaluate_c0(spec: MediumSpec, x):
    return spec.c0(x)


def evaluate_c0_hat(spec: MediumSpec, u, d=1):
    return spec.c0_hat(u, d)


@dataclass(frozen=True)
class DimensionlessGroups:
    alpha: float
    beta: float
    alpha0: float
    a_e: float
    alpha_e: float
    D: float
    Dcal: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def dimensionless_groups(spec: MediumSpec, k0: float, L: float, r0: float, bandwidth=None, d=1):
    """Regime parameters of a slab experiment.

    Returns
    -------
    groups : DimensionlessGroups
    narrowband : bool or None
        ``bandwidth < 0.1 * k0 * min(1, 1/alpha, 1/alpha0, 1/beta)``;
        ``None`` when no bandwidth is given.
    """
    for name, val in (("k0", k0), ("L", L), ("r0", r0)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    beta = spec.sigma ** 2 * k0 ** 2 * L * spec.l_z / 4.0
    alpha = L / (k0 * spec.l_x ** 2)
    alpha0 = L / (k0 * r0 ** 2)
    a_e = math.sqrt(spec.l_x * r0)
    alpha_e = L / (k0 * a_e ** 2)
    dcal = spec.model.dcal(d)
    groups = DimensionlessGroups(alpha, beta, alpha0, a_e, alpha_e, spec.diffusion(d), dcal)
    narrowband = None
    if bandwidth is not None:
        inv = [1.0, 1.0 / alpha, 1.0 / alpha0]
        if beta > 0:
            inv.append(1.0 / beta)
        narrowband = bool(bandwidth < NARROWBAND_MARGIN * k0 * min(inv))
    return groups, narrowband
