"""Closed-form and quadrature theory for the transmitted and reflected fields.

Autocorrelations use the narrowband, Gaussian-beam setting: the incident
field is ``f0(t) exp(-i k0 t) exp(-|x|^2 / r0^2)`` and every two-point
function carries the temporal envelope

    f0(s + t/2) conj(f0(s - t/2)) exp(-i k0 t)

times a transverse factor computed here.  All formulas are for d = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .medium import MediumSpec, dimensionless_groups
from .propagator import reflection_coefficients
from .screens import Grid

__all__ = [
    "BeamParams",
    "BeamTheory",
    "EBCTheory",
    "MomentField",
    "QuadratureError",
    "beam_metrics_theory",
    "transmitted_autocorrelation",
    "reflected_autocorrelation",
    "ebc_profile",
    "ebc_theory",
    "mean_kernel_moments",
    "c0_depth_integral",
]


class QuadratureError(RuntimeError):
    """A quadrature did not settle under refinement."""


@dataclass(frozen=True)
class BeamParams:
    """Inputs shared by the autocorrelation formulas.

    ``f0`` is the pulse envelope (a callable of time); ``None`` means a
    monochromatic source, ``f0 = 1``.
    """

    medium: MediumSpec
    k0: float
    L: float
    r0: float
    Z0: float = 1.0
    f0: Callable | None = None

    def __post_init__(self):
        for name in ("k0", "L", "r0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def coeffs(self):
        return reflection_coefficients(self.Z0)

    def envelope(self, s, t):
        """``f0(s+t/2) conj(f0(s-t/2)) exp(-i k0 t)``."""
        t = np.asarray(t, dtype=float)
        ph = np.exp(-1j * self.k0 * t)
        if self.f0 is None:
            return ph
        return self.f0(s + t / 2) * np.conj(self.f0(s - t / 2)) * ph


# ---------------------------------------------------------------- beam metrics

@dataclass(frozen=True)
class BeamTheory:
    """Gaussian-regime beam radius, coherence radius and phase parameter.

    Valid when ``k0 r0^2 >> L`` (free diffraction of the beam neglected).
    """

    r_T: float
    rho_T: float
    r0: float
    k0: float
    L: float
    D: float

    @property
    def chi_T(self) -> float:
        """``r_T / sqrt(k0 D L^2 / 2)``; raises ``ZeroDivisionError`` when ``D = 0``."""
        if self.D == 0:
            raise ZeroDivisionError("chi_T is undefined for D = 0 (the x*y phase term vanishes)")
        return self.r_T / math.sqrt(self.k0 * self.D * self.L ** 2 / 2.0)


def beam_metrics_theory(r0, k0, L, D) -> BeamTheory:
    """Beam radius, correlation radius and phase parameter at depth ``L``."""
    if not (r0 > 0 and k0 > 0 and L > 0):
        raise ValueError("r0, k0 and L must be positive")
    if D < 0:
        raise ValueError("D must be non-negative")
    g = 1.0 + D * L ** 3 / (3.0 * r0 ** 2)
    r_T = r0 * math.sqrt(g)
    rho_T = r0 * math.sqrt(g) / math.sqrt(1.0 + k0 ** 2 * r0 ** 2 * D * L / 4.0 + k0 ** 2 * D ** 2 * L ** 4 / 48.0)
    return BeamTheory(r_T, rho_T, r0, k0, L, D)


# ------------------------------------------------------------ quadrature core

def c0_depth_integral(medium: MediumSpec, eta, y, k0, L, nodes=None):
    """``int_0^L C0(eta z / k0 + y) dz`` by Gauss-Legendre in z.

    The node count grows with the sweep ``|eta| L / k0`` measured in
    correlation radii so the integrand stays resolved.
    """
    eta = np.asarray(eta, dtype=float)
    if nodes is None:
        sweep = float(np.max(np.abs(eta))) * L / k0 / medium.l_x if eta.size else 0.0
        nodes = int(min(4000, max(24, math.ceil(6 * sweep) + 24)))
    t, w = np.polynomial.legendre.leggauss(nodes)
    z = 0.5 * L * (t + 1.0)
    arg = eta[..., None] * z / k0 + y
    return 0.5 * L * (medium.c0(arg) @ w)


def _eta_integral(integrand, eta_max, x, n0=257, rtol=1e-3, max_doublings=8):
    """Trapezoid over ``[-eta_max, eta_max]`` against ``exp(-i eta x)``.

    The point count doubles until two levels agree to ``rtol * 1e-3``
    relative (or absolutely, against the integrand scale); failure to
    reach ``rtol`` raises :class:`QuadratureError`.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nx = max(1.0, float(np.max(np.abs(x))) * eta_max / math.pi)
    n = int(max(n0, 8 * nx + 1)) | 1
    prev = None
    for _ in range(max_doublings + 1):
        eta = np.linspace(-eta_max, eta_max, n)
        h = eta[1] - eta[0]
        f = integrand(eta)
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        val = (np.exp(-1j * np.outer(x, eta)) * f) @ w
        scale = float(np.sum(np.abs(f)) * h) or 1.0
        if prev is not None:
            err = np.max(np.abs(val - prev)) / scale
            if err < rtol * 1e-3:
                return val
        prev = val
        n = 2 * n - 1
    if err < rtol:
        return val
    raise QuadratureError(f"eta quadrature did not converge (change {err:.2e} on refinement)")


def _tr_integral(p: BeamParams, x, y, depth, mode):
    """Transverse ``(x, y)`` factor of the transmitted autocorrelation at ``depth``."""
    med, k0, r0 = p.medium, p.k0, p.r0
    amp = k0 ** 2 / 4.0
    c00 = med.c0_zero()

    def integrand(eta):
        if mode == "full":
            g = -(eta * depth / k0 + y) ** 2 / (2 * r0 ** 2) - r0 ** 2 * eta ** 2 / 8
        else:
            g = -r0 ** 2 * eta ** 2 / 8 - y ** 2 / (2 * r0 ** 2)
        if med.sigma > 0:
            g = g + amp * (c0_depth_integral(med, eta, y, k0, depth) - c00 * depth)
        return np.exp(g)

    # e^{-r0^2 eta^2 / 8} < 1e-17 beyond this
    eta_max = math.sqrt(8 * 40.0) / r0
    val = _eta_integral(integrand, eta_max, x)
    return val * math.sqrt(r0 ** 2 / (8 * math.pi))


def _scalar(v, like):
    return v[0] if np.ndim(like) == 0 else v


def transmitted_autocorrelation(mode, s, t, x, y, params: BeamParams):
    """Mean of ``p_tr(s+t/2, x+y/2) conj(p_tr(s-t/2, x-y/2))``.

    Parameters
    ----------
    mode : {"full", "narrow", "gaussian"}
        ``full`` keeps the beam-diffraction shift ``eta L / k0`` in the
        Gaussian weight, ``narrow`` drops it (``l_x << r0``), ``gaussian``
        is the strong-scattering closed form built from
        :func:`beam_metrics_theory`.
    x : float or array
        Mid-point offsets; ``y`` is a scalar separation.
    """
    p = params
    env = p.envelope(s, t)
    T0 = p.coeffs.T0
    if mode in ("full", "narrow"):
        v = _tr_integral(p, x, float(y), p.L, mode)
        return _scalar(T0 ** 2 * env * v, x)
    if mode == "gaussian":
        D = p.medium.diffusion(1)
        if not D > 0:
            raise ValueError("gaussian mode needs D > 0")
        bt = beam_metrics_theory(p.r0, p.k0, p.L, D)
        x = np.asarray(x, dtype=float)
        val = (p.r0 / bt.r_T) * np.exp(-2 * x ** 2 / bt.r_T ** 2 - y ** 2 / (2 * bt.rho_T ** 2)
                                       + 1j * x * y / bt.chi_T ** 2)
        return T0 ** 2 * env * val
    raise ValueError(f"unknown mode {mode!r}")


def reflected_autocorrelation(mode, s, t, x, y, params: BeamParams, vr_table=None):
    """Mean reflected two-point function.

    ``narrow`` is the transmitted narrow form at depth ``2L`` with ``R0^2``
    in place of ``T0^2``.  ``full`` evaluates the triple integral over
    ``(eta1, eta2, eta3)`` against a reflection Wigner table (see
    :func:`paraxia.wigner.vr_table`).
    """
    p = params
    env = p.envelope(s, t)
    R0 = p.coeffs.R0
    if mode == "narrow":
        v = _tr_integral(p, x, float(y), 2 * p.L, "narrow")
        return _scalar(R0 ** 2 * env * v, x)
    if mode == "full":
        if vr_table is None:
            raise ValueError("full mode needs a reflection Wigner table")
        v = _ref_full(p, np.atleast_1d(np.asarray(x, dtype=float)), float(y), vr_table)
        return _scalar(R0 ** 2 * env * v, x)
    raise ValueError(f"unknown mode {mode!r}")


def _ref_full(p: BeamParams, x, y, tab):
    """Triple integral for the reflected autocorrelation in table units.

    With ``Q, r, s`` the dimensionless (times ``l_x``) frequencies and
    ``U = exp(i alpha r s) V`` the table value,

        A / R0^2 = (rho^2 / 8 pi) sum U(Q, r, s)
                   exp(-rho^2 (s^2 + (r - 2Q)^2) / 8) exp(-i s x' + i y' (Q + r/2)) dQ dr ds

    where ``rho = r0 / l_x`` and primed offsets are in units of ``l_x``.
    The ``Q`` sum of the ballistic part uses its exact Gaussian integral.
    """
    lx = p.medium.l_x
    rho = p.r0 / lx
    xs, ys = x / lx, y / lx
    r = tab.r[:, None]
    s = tab.s[None, :]
    dr, ds = tab.dr, tab.ds
    pre = rho ** 2 / (8 * math.pi)
    gs = np.exp(-rho ** 2 * s ** 2 / 8)
    # ballistic delta(Q): int dQ delta(Q) e^{-rho^2 (r-2Q)^2/8} e^{iyQ} = e^{-rho^2 r^2/8}
    wb = np.exp(-rho ** 2 * r ** 2 / 8 + 1j * ys * r / 2) * gs * tab.ballistic
    # smooth part on the Q lattice
    Q = tab.q
    gq = np.exp(-rho ** 2 * (r[None] - 2 * Q[:, None, None]) ** 2 / 8 + 1j * ys * (Q[:, None, None] + r[None] / 2))
    ws = np.sum(gq * tab.smooth, axis=0) * tab.dq * gs
    tot = wb + ws
    out = np.empty(x.size, dtype=complex)
    for i, xv in enumerate(xs):
        out[i] = np.sum(tot * np.exp(-1j * s * xv)) * dr * ds
    return pre * out


# ------------------------------------------------------------------ EBC cone

@dataclass(frozen=True)
class EBCTheory:
    """Cone widths read off the e-folding scales of the displayed exponents.

    ``profile(dk)`` is the intensity near the backscatter direction relative
    to the broad cone there, with ``dk = kappa0 + kappa_inc``.
    """

    dk_spec: float
    dk_ebc: float
    enhancement: float = 2.0
    alpha: float = field(default=math.nan)
    beta: float = field(default=math.nan)
    l_x: float = 1.0
    dcal: float = 2.0 * math.sqrt(math.pi)

    def profile(self, dk):
        dk = np.asarray(dk, dtype=float)
        return 1.0 + np.exp(-(dk / self.dk_ebc) ** 2)

    def width_convention(self) -> str:
        return "e-folding of exp(-(dk/width)^2)"


def ebc_theory(medium: MediumSpec, k0, L) -> EBCTheory:
    D = medium.diffusion(1)
    if not D > 0:
        raise ValueError("cone widths need D > 0")
    g, _ = dimensionless_groups(medium, k0, L, 1.0)
    return EBCTheory(math.sqrt(D * L) * k0, 2 * math.sqrt(3.0) / math.sqrt(D * L ** 3),
                     2.0, g.alpha, g.beta, medium.l_x, g.Dcal)


def ebc_profile(kappa0, kappa_inc, medium: MediumSpec, k0, L, mode="asymptotic", vr=None):
    """Mean reflected intensity in direction ``kappa0`` (scale ``P = 1``).

    ``asymptotic`` (``alpha >> 1``, ``beta >> 1``) returns the broad
    diffusion cone around ``+kappa_inc`` plus the narrow backscatter cone,
    whose height equals the broad cone at ``-kappa_inc``:

        (pi Dcal beta)^(-1/2) [exp(-|k0-ki|^2 l^2 / (4 Dcal beta))
                               + exp(-|ki|^2 l^2 / (Dcal beta)) exp(-Dcal beta alpha^2 |k0+ki|^2 l^2 / 3)]

    ``exact`` evaluates ``V(1, (kappa0-kappa_inc) l_x / 2, (kappa0+kappa_inc) l_x, 0)``
    through ``vr``, a callable ``(q, r) -> V`` (for instance
    :meth:`paraxia.wigner.VRState.at_s0`).

    Returns
    -------
    values : ndarray
    theory : EBCTheory
    """
    th = ebc_theory(medium, k0, L)
    k0v = np.asarray(kappa0, dtype=float)
    lx = medium.l_x
    if mode == "asymptotic":
        db = th.dcal * th.beta
        broad = np.exp(-((k0v - kappa_inc) * lx) ** 2 / (4 * db))
        narrow = math.exp(-(kappa_inc * lx) ** 2 / db) * np.exp(-db * th.alpha ** 2 * ((k0v + kappa_inc) * lx) ** 2 / 3)
        return (broad + narrow) / math.sqrt(math.pi * db), th
    if mode == "exact":
        if vr is None:
            raise ValueError("exact mode needs a V evaluator")
        q = (k0v - kappa_inc) * lx / 2
        r = (k0v + kappa_inc) * lx
        return np.asarray(vr(q, r)), th
    raise ValueError(f"unknown mode {mode!r}")


# ----------------------------------------------------------- kernel moments

@dataclass
class MomentField:
    """Mean of a kernel spectrum on the ``(kappa, kappa')`` lattice (fft order)."""

    values: np.ndarray
    z: float
    k: float
    order: tuple
    grid: Grid


def mean_kernel_moments(order, k, L, grid: Grid, medium: MediumSpec, Z0=1.0, steps=None):
    """First moments of the transmission / reflection kernel spectra.

    ``(1, 0)``: ``T0 delta(kappa-kappa') exp(-i kappa'^2 L/(2k)) exp(-k^2 C0(0) L/8)``
    in closed form, delta as ``1/dkappa`` on the diagonal.

    ``(0, 1)``: the linear equation

        dI/dz = -i (kappa^2 + kappa'^2) / (2k) I - k^2 C(0) / 4 I
                - k^2 / (4 width) sum_m C0hat(kappa_m) I(kappa - kappa_m, kappa' - kappa_m)

    from ``I(0) = R0 delta(kappa - kappa')`` by integrating-factor RK4.  The
    lattice sum replaces the frequency integral, and ``C(0)`` is its
    lattice value (the periodized ``C0``), so the damping and the shifted
    sum balance exactly as on the torus the screens live on.
    """
    order = tuple(order)
    if grid.d != 1:
        raise ValueError("moment solver supports d=1")
    c = reflection_coefficients(Z0)
    kap = grid.kappa
    dk = grid.dkappa
    n = grid.n
    if order == (1, 0):
        diag = c.T0 / dk * np.exp(-1j * kap ** 2 * L / (2 * k)) * math.exp(-k ** 2 * medium.c0_zero() * L / 8)
        return MomentField(np.diag(diag).astype(complex), L, k, order, grid)
    if order != (0, 1):
        raise NotImplementedError(f"moment order {order} is out of scope (only (1,0) and (0,1))")
    chat = medium.c0_hat(np.abs(kap)) / grid.width
    c_per0 = float(np.sum(chat))
    # shift along the diagonal: symbol depends on theta1 + theta2
    w_hat = np.fft.fft(chat)
    idx = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
    symbol = -(k ** 2 / 4) * w_hat[idx]
    lin = -1j * (kap[:, None] ** 2 + kap[None, :] ** 2) / (2 * k) - k ** 2 * c_per0 / 4

    def nl(J, z):
        # J lives in the interaction frame: I = exp(lin z) J
        E = np.exp(lin * z)
        I = E * J
        return np.fft.ifft2(np.fft.fft2(I) * symbol) / E

    if steps is None:
        # damping plus the fastest interaction-frame phase among coupled modes
        ks = medium.model.c0_hat_support(1, 1e-16) / medium.l_x
        rate = k ** 2 * c_per0 / 2 + 2 * min(ks, float(np.max(np.abs(kap)))) * float(np.max(np.abs(kap))) / k
        steps = max(50, int(math.ceil(rate * L / 0.2)))
    h = L / steps
    J = np.diag(np.full(n, c.R0 / dk)).astype(complex)
    if medium.sigma > 0:
        for i in range(steps):
            z = i * h
            k1 = nl(J, z)
            k2 = nl(J + h / 2 * k1, z + h / 2)
            k3 = nl(J + h / 2 * k2, z + h / 2)
            k4 = nl(J + h * k3, z + h)
            J = J + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    vals = np.exp(lin * L) * J
    return MomentField(vals, L, k, order, grid)
