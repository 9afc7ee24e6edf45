"""Wigner-distribution solvers for the transmitted and reflected fields (d = 1).

Transmission: the integral representation

    W(zeta, x, x', q, q') = T0^2 / (4 pi^2 alpha) iint exp(-i (q'+q) eta1 - i (ratio (x'-x) / alpha + q zeta) eta2)
                            exp(beta int_0^zeta c0(eta1 + eta2 z) - c0(0) dz) deta1 deta2

with ``ratio = r0 / l_x``.

Reflection: the dimensionless system for ``V(zeta, q, r, s)`` started from
``delta(q)``, its reduced form at ``r / alpha`` and the closed forms of the
large-``alpha`` limits.  All frequencies here are in units of ``1 / l_x``
and ``c0``, ``c0hat`` are the dimensionless correlation functions of the
medium's family.

Dirac masses in ``q`` live on the ``q`` lattice as ``1 / dq`` at ``q = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .medium import MediumSpec

__all__ = [
    "WignerGridSpec",
    "VRState",
    "QuadratureError",
    "wt_eval",
    "vr_reduced_integrate",
    "vr_closed_form",
    "vr_asymptotics",
    "vr_integrate_full",
    "l1_distance",
    "default_full_grid",
    "ReflectionTable",
    "vr_table",
]

U_SUPPORT_REL = 1e-12


class QuadratureError(RuntimeError):
    """Quadrature failed to settle on refinement."""


def _uniform_symmetric(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size < 3:
        raise ValueError(f"{name} must be a 1-d lattice with at least 3 points")
    h = np.diff(a)
    if np.max(np.abs(h - h[0])) > 1e-9 * h[0] or h[0] <= 0:
        raise ValueError(f"{name} must be uniform and increasing")
    return a, float(h[0])


@dataclass(frozen=True)
class WignerGridSpec:
    """Lattices for the reflection Wigner solvers.

    Parameters
    ----------
    q_grid : array
        Symmetric uniform lattice; must contain ``q = 0``.
    u_grid : array
        Symmetric uniform lattice of frequency shifts.  Its spacing is the
        quadrature step, its extent must cover the support of ``c0hat``.
        The full solver also uses it as the ``(r, s)`` lattice offsets
        around ``(r, s)``.
    r, s : float
        Parameters of the reduced equation (``r``) or the centre of the
        ``(r, s)`` lattice of the full system.
    zeta_steps : int
    """

    q_grid: np.ndarray
    u_grid: np.ndarray
    r: float = 0.0
    s: float = 0.0
    zeta_steps: int = 200

    def __post_init__(self):
        q, _ = _uniform_symmetric(self.q_grid, "q_grid")
        u, _ = _uniform_symmetric(self.u_grid, "u_grid")
        for a, name in ((q, "q_grid"), (u, "u_grid")):
            if abs(a[0] + a[-1]) > 1e-9 * abs(a[-1]):
                raise ValueError(f"{name} must be symmetric about 0")
        if q.size % 2 == 0:
            raise ValueError("q_grid needs an odd point count so that q = 0 is a node")
        if self.zeta_steps < 1:
            raise ValueError("zeta_steps must be >= 1")

    @property
    def dq(self):
        return float(self.q_grid[1] - self.q_grid[0])

    @property
    def du(self):
        return float(self.u_grid[1] - self.u_grid[0])

    def check_support(self, medium: MediumSpec):
        umax = medium.model.c0_hat_support(1, U_SUPPORT_REL)
        if self.u_grid[-1] < umax:
            raise ValueError(f"u_grid reaches {self.u_grid[-1]:g} but c0hat support is {umax:g}")


@dataclass
class VRState:
    """Reflection Wigner values at depth fraction ``zeta``.

    ``values`` is indexed by ``q`` (reduced) or ``(q, r, s)`` (full).
    ``ballistic`` is the weight of the Dirac mass at ``q = 0`` (already
    included in ``values`` as ``ballistic / dq`` at the ``q = 0`` node).
    """

    values: np.ndarray
    zeta: float
    alpha: float
    beta: float
    q: np.ndarray
    r: np.ndarray | float = 0.0
    s: np.ndarray | float = 0.0
    ballistic: np.ndarray | float | None = None
    kind: str = "reduced"
    meta: dict = field(default_factory=dict)

    @property
    def dq(self):
        return float(self.q[1] - self.q[0])

    def mass(self):
        """``int V dq`` (all nodes, Dirac included)."""
        return np.sum(self.values, axis=0) * self.dq

    def smooth(self):
        """Values with the Dirac weight removed from the ``q = 0`` node."""
        if self.ballistic is None:
            raise ValueError("state carries no ballistic split")
        v = np.array(self.values, copy=True)
        i0 = int(np.argmin(np.abs(self.q)))
        v[i0] = v[i0] - np.asarray(self.ballistic) / self.dq
        return v

    def at_s0(self, q, r):
        """Smooth part of ``V(q, r, 0)`` for a full state whose ``s`` lattice contains 0.

        ``r`` must be a lattice node; ``q`` is interpolated linearly.
        """
        if self.kind != "full":
            raise ValueError("at_s0 needs a full state")
        q = np.atleast_1d(np.asarray(q, dtype=float))
        r = np.broadcast_to(np.asarray(r, dtype=float), q.shape)
        js = int(np.argmin(np.abs(self.s)))
        if abs(self.s[js]) > 1e-9:
            raise ValueError("s = 0 is not on the lattice")
        sm = self.smooth()
        out = np.empty(q.shape, dtype=complex)
        dr = self.r[1] - self.r[0]
        for i, (qq, rr) in enumerate(zip(q, r)):
            ir = int(round((rr - self.r[0]) / dr))
            if not 0 <= ir < self.r.size or abs(self.r[ir] - rr) > 1e-6 * dr:
                raise ValueError(f"r={rr:g} is not a lattice node")
            col = sm[:, ir, js]
            out[i] = np.interp(qq, self.q, col.real) + 1j * np.interp(qq, self.q, col.imag)
        return out


def l1_distance(a, b, h=1.0):
    """``sum |a - b| / sum |b|`` (relative L1 on a common lattice)."""
    a, b = np.asarray(a), np.asarray(b)
    den = float(np.sum(np.abs(b)))
    return float(np.sum(np.abs(a - b))) / den if den else float(np.sum(np.abs(a - b)))


# ---------------------------------------------------------------- transmission

def _leg(n):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def _wt_exponent(e1, e2, zeta, beta, model, nodes=32):
    """``beta int_0^zeta c0(e1 + e2 z) - c0(0) dz`` by Gauss-Legendre."""
    t, w = _leg(nodes)
    z = zeta * t
    arg = e1[..., None] + e2[..., None] * z
    return beta * zeta * ((model.c0(arg) - model.c0(0.0)) @ w)


def wt_eval(zeta, x, x_prime, q, q_prime, *, alpha, beta, medium: MediumSpec, T0=1.0, ratio=1.0,
            smear=(0.0, 0.0, 0.0), n=None, tol=1e-3, max_doublings=5):
    """Transmitted Wigner function by 2-d trapezoid quadrature over ``(eta1, eta2)``.

    Parameters
    ----------
    zeta, x, x_prime, q, q_prime : float or arrays (broadcast together)
    alpha, beta : float
    ratio : float
        ``r0 / l_x``.
    smear : (w_x, w_q, w_qp)
        Widths of normalized Gaussians convolved with the function in
        ``x' - x``, ``q`` and ``q'``.  The function itself carries a Dirac
        pair (the unscattered part); with ``w_x = w_q = 0`` only its
        regular part is returned, otherwise the full smeared function.

    Raises
    ------
    QuadratureError
        If the value moves by more than ``tol`` (relative to the integrand
        scale) on the last refinement.
    """
    model = medium.model
    b = np.broadcast_arrays(*map(lambda v: np.asarray(v, dtype=float), (zeta, x, x_prime, q, q_prime)))
    zeta, x, xp, q, qp = (v.ravel() for v in b)
    wx, wq, wqp = (float(w) for w in smear)
    regular = wx == 0 and wq == 0
    vel = alpha / ratio  # x' - x enters as (x'-x) / vel
    # box: decay of the smearing factors, or of the regular part
    e2max = 8.0 * vel / wx if wx > 0 else (8.0 / (wq * max(zeta.max(), 1e-3)) if wq > 0 else 40.0)
    if wx > 0 and wq > 0:
        e2max = min(e2max, 8.0 / (wq * max(zeta.min(), 1e-3))) if zeta.min() > 0 else e2max
    e1max = (8.0 / wqp if wqp > 0 else 12.0) + e2max * float(zeta.max())
    if wq > 0:
        e1max = min(e1max, 8.0 / wq + e2max * float(zeta.max()))
    freq1 = float(np.max(np.abs(q + qp))) + 1.0
    freq2 = float(np.max(np.abs((xp - x) / vel + q * zeta))) + 1.0
    if n is None:
        n1 = int(max(64, 4 * e1max * freq1 / math.pi, 8 * e1max))
        n2 = int(max(64, 4 * e2max * freq2 / math.pi, 8 * e2max))
    else:
        n1 = n2 = int(n)
    prev = None
    err = np.inf
    for _ in range(max_doublings + 1):
        e1 = np.linspace(-e1max, e1max, n1 | 1)
        e2 = np.linspace(-e2max, e2max, n2 | 1)
        h1, h2 = e1[1] - e1[0], e2[1] - e2[0]
        E1, E2 = np.meshgrid(e1, e2, indexing="ij")
        vals = np.empty(zeta.size, dtype=complex)
        scale = 0.0
        for i in range(zeta.size):
            g = _wt_exponent(E1, E2, zeta[i], beta, model)
            if regular:
                c00 = float(model.c0(0.0))
                f = np.exp(-beta * c00 * zeta[i]) * np.expm1(g + beta * c00 * zeta[i])
            else:
                f = np.exp(g)
            f = f * np.exp(-0.5 * ((wq * (E1 + zeta[i] * E2)) ** 2 + (wqp * E1) ** 2 + (wx * E2 / vel) ** 2))
            ph = np.exp(-1j * ((q[i] + qp[i]) * E1 + ((xp[i] - x[i]) / vel + q[i] * zeta[i]) * E2))
            vals[i] = np.sum(f * ph) * h1 * h2
            scale = max(scale, float(np.sum(np.abs(f))) * h1 * h2)
        if prev is not None:
            err = float(np.max(np.abs(vals - prev))) / (scale or 1.0)
            if err < tol * 1e-2:
                break
        prev = vals
        n1, n2 = 2 * n1, 2 * n2
    if err > tol:
        raise QuadratureError(f"transmitted Wigner quadrature unsettled (change {err:.2e})")
    out = T0 ** 2 / (4 * math.pi ** 2 * alpha) * vals
    return out.reshape(b[0].shape)[()] if b[0].ndim else out[0]


# ------------------------------------------------------------ reduced system

def _u_weights(medium: MediumSpec, du):
    """Nodes ``m du`` and trapezoid weights ``du c0hat(m du) / (2 pi)`` over the support."""
    umax = medium.model.c0_hat_support(1, U_SUPPORT_REL)
    m = np.arange(-int(math.ceil(umax / du)), int(math.ceil(umax / du)) + 1)
    u = m * du
    return m, u, du * medium.model.c0_hat(u, 1) / (2 * math.pi)


def _rk4(rhs, y, steps, zeta=1.0):
    h = zeta / steps
    y0 = float(np.max(np.abs(y)))
    for i in range(steps):
        z = i * h
        k1 = rhs(y, z)
        k2 = rhs(y + h / 2 * k1, z + h / 2)
        k3 = rhs(y + h / 2 * k2, z + h / 2)
        k4 = rhs(y + h * k3, z + h)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > 10 * y0:
            raise RuntimeError("RK4 step instability: norm grew more than 10x")
    return y


def _delta(q):
    v = np.zeros(q.size)
    i0 = int(np.argmin(np.abs(q)))
    v[i0] = 1.0 / (q[1] - q[0])
    return v, i0


def vr_reduced_integrate(r, beta, medium: MediumSpec, q_grid, zeta_steps=200, zeta=1.0) -> VRState:
    """RK4 solution of the reduced equation

        dV/dzeta = (2 beta / 2 pi) int c0hat(u) [V(q - u/2) cos(r u zeta) - V(q)] du

    from ``delta(q)``.  The shift nodes are ``u = 2 m dq`` so each shifted
    value is a lattice value; ``V`` vanishes off the lattice.
    """
    q, dq = _uniform_symmetric(q_grid, "q_grid")
    m, u, w = _u_weights(medium, 2 * dq)
    w = 2 * beta * w
    wsum = float(np.sum(w))
    V0, _ = _delta(q)
    n = q.size

    def rhs(V, z):
        c = w * np.cos(r * u * z)
        out = -wsum * V
        for mm, cc in zip(m, c):
            if abs(mm) >= n:
                continue
            if mm >= 0:
                out[mm:] += cc * V[: n - mm]
            else:
                out[: n + mm] += cc * V[-mm:]
        return out

    V = V0 if beta == 0 else _rk4(rhs, V0, zeta_steps, zeta)
    return VRState(V, zeta, math.inf, beta, q, r, kind="reduced")


def _reduced_F(u, r, beta, zeta, model, nodes=64):
    """``exp(beta int_0^zeta c0(u/2 + r z) + c0(u/2 - r z) - 2 c0(0) dz)``."""
    t, w = _leg(nodes)
    z = zeta * t
    a = u[:, None] / 2
    g = model.c0(a + r * z) + model.c0(a - r * z) - 2 * model.c0(0.0)
    return np.exp(beta * zeta * (g @ w))


def vr_closed_form(r, beta, medium: MediumSpec, q_grid, zeta=1.0) -> VRState:
    """Fourier quadrature of

        V_r(zeta, q) = (1 / 2 pi) int exp(-i q u) exp(beta int_0^zeta c0(u/2 + r z') + c0(u/2 - r z') - 2 c0(0) dz') du

    split into the Dirac part ``exp(-2 beta c0(0) zeta) delta(q)`` and a
    smooth density sampled on ``q_grid``.
    """
    q, dq = _uniform_symmetric(q_grid, "q_grid")
    model = medium.model
    Finf = math.exp(-2 * beta * float(model.c0(0.0)) * zeta)
    # beyond |u|/2 > |r| zeta + 7 the integrand equals Finf to 1e-21
    U = 2 * (abs(r) * zeta + 7.0)
    du = min(0.02, math.pi / (8 * max(abs(q[-1]), 1.0)))
    nu = int(math.ceil(U / du))
    u = np.arange(0, nu + 1) * du
    F = _reduced_F(u, r, beta, zeta, model) - Finf
    w = np.full(u.size, 2 * du)
    w[0] = du
    w[-1] = du
    smooth = (np.cos(np.outer(q, u)) * F) @ w / (2 * math.pi)
    V = smooth.copy()
    i0 = int(np.argmin(np.abs(q)))
    V[i0] += Finf / dq
    return VRState(V, zeta, math.inf, beta, q, r, ballistic=Finf, kind="closed")


def vr_asymptotics(kind, r, s, beta, zeta, q_grid, medium: MediumSpec):
    """Large-``alpha`` limits on the ``q`` lattice.

    ``decay``: ``delta(q) exp(-2 beta c0(0) zeta)``; ``reduced``: the closed
    form at ``r``; ``combo``: ``V_r + V_s - delta(q) exp(-2 beta c0(0) zeta)``.
    """
    q, dq = _uniform_symmetric(q_grid, "q_grid")
    d, _ = _delta(q)
    dec = math.exp(-2 * beta * float(medium.model.c0(0.0)) * zeta)
    if kind == "decay":
        return d * dec
    if kind == "reduced":
        return vr_closed_form(r, beta, medium, q, zeta).values
    if kind == "combo":
        return vr_closed_form(r, beta, medium, q, zeta).values + vr_closed_form(s, beta, medium, q, zeta).values - d * dec
    raise ValueError(f"unknown kind {kind!r}")


# --------------------------------------------------------------- full system

def default_full_grid(alpha, r=0.0, s=0.0, q_points=65, dq=0.25, zeta_steps=200, du=None, n_rs=None):
    """Grid choice used by the tests: ``du`` shrinks like ``1 / alpha`` above ``alpha = 12.5``.

    The ``(r, s)`` box half-width is ``n_rs * du / 2``; paths leaving it
    carry exponentially small weight for ``beta <~ 1``.
    """
    if du is None:
        du = min(0.1, 1.25 / max(alpha, 1e-9))
    if n_rs is None:
        n_rs = 1 << int(math.ceil(math.log2(12.8 / du)))
    half = (q_points - 1) // 2
    q = dq * np.arange(-half, half + 1)
    m = n_rs // 2
    u = du * np.arange(-m, m + 1)
    return WignerGridSpec(q, u, r, s, zeta_steps), n_rs


def _fold(weights, m, n):
    out = np.zeros(n, dtype=complex)
    np.add.at(out, np.mod(m, n), weights)
    return out


def vr_integrate_full(gridspec: WignerGridSpec, alpha, beta, medium: MediumSpec, *, n_rs=None,
                      convention="derived", window=(0, 0), zeta=1.0) -> VRState:
    """Full reflection system from ``delta(q)`` on an exact shift lattice.

    In the frame ``U = exp(i alpha r s zeta) V`` the eight-term collision
    integral is a sum of pure lattice shifts of ``(q, r, s)`` weighted by
    ``du c0hat(u) / 2 pi``.  The solver

    * Fourier transforms in ``q`` (one independent ``(r, s)`` problem per
      dual variable ``X``, the ``q`` shifts becoming phases),
    * diagonalizes the shift sums with a 2-d FFT over the periodic
      ``(r, s)`` box of ``n_rs`` points per axis, spacing ``du``,
    * advances with Strang splitting: exact phase ``exp(i alpha r s dz/2)``,
      exact collision step, exact phase.

    Parameters
    ----------
    convention : {"derived", "verbatim"}
        ``derived`` keeps ``q`` unshifted in the two cross terms and uses
        the phase ``-i alpha [(r+s) u - u^2] zeta`` in the last one, which
        is what the underlying transport system for the reflection Wigner
        function gives.  ``verbatim`` uses ``q - u/2`` in both cross terms
        and ``-i alpha [(r+s) u + u^2] zeta``.
    window : (int, int)
        Half-widths (in lattice steps) of the ``(r, s)`` block to return
        around ``(gridspec.r, gridspec.s)``.

    Returns
    -------
    VRState
        ``values[q, i, j]`` with ``ballistic[i, j]`` the Dirac weight.  The
        smooth ``q`` profile is periodized with period ``nq dq``; the
        ``q`` box must hold its tails.
    """
    if convention not in ("derived", "verbatim"):
        raise ValueError(f"unknown convention {convention!r}")
    gs = gridspec
    q = np.asarray(gs.q_grid, dtype=float)
    dq, du = gs.dq, gs.du
    n = int(n_rs or (gs.u_grid.size - 1))
    if n % 2:
        raise ValueError("n_rs must be even")
    wr, ws = (int(w) for w in window)
    if 2 * max(wr, ws) + 1 > n:
        raise ValueError("window exceeds the (r, s) box")
    model = medium.model
    m, u, w = _u_weights(medium, du)
    theta_m = np.fft.fftfreq(n) * n  # integer offsets in fft order
    rr = gs.r + du * theta_m
    ss = gs.s + du * theta_m
    steps = gs.zeta_steps
    h = zeta / steps
    kin = np.exp(0.5j * alpha * np.outer(rr, ss) * h)
    ia = np.arange(n)
    diff = (ia[:, None] - ia[None, :]) % n
    summ = (ia[:, None] + ia[None, :]) % n
    neg = (-ia) % n
    W0 = np.fft.fft(_fold(w, m, n))
    nq = q.size
    X = 2 * np.pi * np.fft.fftfreq(nq, d=dq)

    def symbol(Xv, z, ballistic_only=False):
        V = np.fft.fft(_fold(w * np.exp(-0.5j * u * Xv), m, n))
        if ballistic_only:
            V = np.zeros(n, dtype=complex)
        if convention == "derived":
            c4a = W0[diff]
            c4b = W0[summ]
        else:
            c4a = V[diff]
            Z = np.fft.fft(_fold(w * np.exp(-0.5j * u * Xv - 2j * alpha * u * u * z), m, n))
            if ballistic_only:
                Z = np.zeros(n, dtype=complex)
            c4b = Z[summ]
        return beta * (V[:, None] + V[neg][:, None] + V[None, :] + V[neg][None, :]
                       - 2 * W0[0] - c4a - c4b)

    ridx = np.mod(np.arange(-wr, wr + 1), n)
    sidx = np.mod(np.arange(-ws, ws + 1), n)

    def run(Xv, ballistic_only=False):
        U = np.ones((n, n), dtype=complex)
        E = None if convention == "verbatim" else np.exp(symbol(Xv, 0.0, ballistic_only) * h)
        for i in range(steps):
            if E is None or convention == "verbatim":
                E = np.exp(symbol(Xv, (i + 0.5) * h, ballistic_only) * h)
            U *= kin
            U = sfft.ifft2(sfft.fft2(U, overwrite_x=True) * E, overwrite_x=True)
            U *= kin
            if not np.all(np.isfinite(U)) or np.max(np.abs(U)) > 10.0:
                raise RuntimeError("step instability: norm grew more than 10x")
        return U[np.ix_(ridx, sidx)]

    if beta == 0:
        blocks = np.ones((nq, ridx.size, sidx.size), dtype=complex)
        for j in range(nq):
            blocks[j] = np.exp(1j * alpha * np.outer(rr[ridx], ss[sidx]) * zeta)
        bal = blocks[0].copy()
    else:
        blocks = np.stack([run(Xv) for Xv in X])
        bal = run(0.0, ballistic_only=True) if convention == "derived" else \
            np.exp(-2 * beta * float(np.real(W0[0])) * zeta + 1j * alpha * np.outer(rr[ridx], ss[sidx]) * zeta)
    back = np.exp(-1j * alpha * np.outer(rr[ridx], ss[sidx]) * zeta)
    # inverse transform over X: values at q_i = (1/(nq dq)) sum_j U(X_j) exp(i q_i X_j)
    smooth_hat = blocks - bal[None]
    qi = np.round(q / dq).astype(int)
    # q lattice is symmetric and contains 0: fft-order mapping
    sm = np.fft.ifft(smooth_hat, axis=0) / dq
    order = np.mod(qi, nq)
    sm = sm[order]
    bal_v = bal * back
    vals = sm * back[None]
    i0 = int(np.argmin(np.abs(q)))
    vals[i0] += bal_v / dq
    return VRState(vals, zeta, alpha, beta, q, rr[ridx], ss[sidx], ballistic=bal_v, kind="full",
                   meta={"convention": convention, "du": du, "n_rs": n, "zeta_steps": steps})


@dataclass(frozen=True)
class ReflectionTable:
    """Full-system values in the frame ``U = exp(i alpha r s) V``, split into
    the Dirac weight ``ballistic[r, s]`` and the smooth density ``smooth[q, r, s]``."""

    q: np.ndarray
    r: np.ndarray
    s: np.ndarray
    ballistic: np.ndarray
    smooth: np.ndarray
    alpha: float
    beta: float

    @property
    def dq(self):
        return float(self.q[1] - self.q[0])

    @property
    def dr(self):
        return float(self.r[1] - self.r[0])

    @property
    def ds(self):
        return float(self.s[1] - self.s[0])


def vr_table(state: VRState) -> ReflectionTable:
    """Reflection table for the full-mode autocorrelation quadrature."""
    if state.kind != "full":
        raise ValueError("vr_table needs a full state")
    ph = np.exp(1j * state.alpha * np.outer(state.r, state.s) * state.zeta)
    return ReflectionTable(state.q, np.asarray(state.r), np.asarray(state.s), state.ballistic * ph,
                           state.smooth() * ph[None], state.alpha, state.beta)
