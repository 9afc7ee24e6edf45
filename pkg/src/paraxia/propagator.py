"""Per-realization split-step evolution of transmitted beams and reflection kernels.

A step of length ``dz`` at wavenumber ``k`` is the Strang sequence

    g_j = H  S_j  H,    H = exp(-i |kappa|^2 dz / (4k)),   S_j = exp(i (k/2) dB_j(x))

with ``H`` applied spectrally and ``S_j`` pointwise.  The Stratonovich
screen term is exactly this unitary phase, so no drift correction is
applied; the Itô damping ``k^2 C0(0) / 8`` shows up in ensemble means.

Each ``g_j`` is a symmetric matrix on the grid.  The kernel equations then
give

    T(L) = T0 g_1 g_2 ... g_N,        R(L) = g_N ... g_1 R0 g_1 ... g_N

so a downgoing pass (steps applied in descending j) feeds both the
transmitted field and, after the interface and an ascending pass through
the same medium, the reflected field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .screens import Grid, ScreenStack

__all__ = [
    "BoundaryCoefficients",
    "FieldSlice",
    "KernelSlice",
    "reflection_coefficients",
    "make_incident_beam",
    "absorbing_mask",
    "free_propagate",
    "split_step_pass",
    "inverse_pass",
    "pass_with_snapshots",
    "downgoing",
    "transmit",
    "reflect_double_pass",
    "reflect_kernel",
    "apply_kernel",
    "synthesize_time_trace",
    "energy",
    "KERNEL_MAX_N",
]

KERNEL_MAX_N = 2048  # (n, n) complex kernel of 64 MiB


@dataclass(frozen=True)
class BoundaryCoefficients:
    Z0: float
    R0: float
    T0: float


def reflection_coefficients(Z0: float) -> BoundaryCoefficients:
    """Interface coefficients ``R0 = (Z0-1)/(Z0+1)``, ``T0 = 2 sqrt(Z0)/(1+Z0)``."""
    if not Z0 > 0:
        raise ValueError(f"impedance ratio must be positive, got {Z0}")
    return BoundaryCoefficients(float(Z0), (Z0 - 1.0) / (Z0 + 1.0), 2.0 * math.sqrt(Z0) / (1.0 + Z0))


@dataclass
class FieldSlice:
    """Complex transverse field at wavenumber ``k`` and depth ``z``.

    ``values`` may carry leading batch axes (independent realizations);
    the trailing ``grid.d`` axes are transverse, ordered as ``grid.x``.
    """

    values: np.ndarray = field(repr=False)
    grid: Grid
    k: float
    z: float = 0.0

    def energy(self):
        return energy(self.values, self.grid)


@dataclass
class KernelSlice:
    """Two-point kernel on ``grid x grid`` (d=1); ``values[i, j]`` at ``(x_i, x_j)``."""

    values: np.ndarray = field(repr=False)
    grid: Grid
    k: float
    z: float = 0.0


def energy(values, grid: Grid):
    """Discrete ``int |b|^2 dx`` over the trailing transverse axes."""
    axes = tuple(range(-grid.d, 0))
    return np.sum(np.abs(values) ** 2, axis=axes) * grid.cell()


def absorbing_mask(grid: Grid) -> np.ndarray:
    """Super-Gaussian absorber ``exp(-(|x| / (0.45 width))**16)``."""
    return np.exp(-((grid.radius() / (0.45 * grid.width)) ** 16))


def _tilt_on_lattice(kappa_inc, grid: Grid):
    kin = np.atleast_1d(np.asarray(kappa_inc, dtype=float))
    if kin.size == 1 and grid.d == 2:
        kin = np.array([kin[0], 0.0])
    if kin.size != grid.d:
        raise ValueError(f"tilt must have {grid.d} components")
    m = kin / grid.dkappa
    if np.any(np.abs(m - np.rint(m)) > 1e-9):
        raise ValueError(f"tilt {kin} is not on the frequency lattice (spacing {grid.dkappa:g})")
    return kin


def make_incident_beam(kind: str, params: dict, grid: Grid) -> FieldSlice:
    """Incident profile at the slab surface.

    Parameters
    ----------
    kind : {"gaussian", "plane", "from_source"}
    params : dict
        gaussian: ``r0``, ``k``, optional ``kappa_inc`` (on-lattice tilt) and
        ``amplitude``.  plane: ``k``, ``kappa_inc`` and ``amplitude``; a
        lattice plane wave filling the periodic grid.  from_source: ``profile`` (source profile in x at the
        grid coordinates), ``k``, ``z0`` and ``L``; returns
        ``-1/2`` times the profile Fresnel-shifted by ``L - z0``.
    """
    k = float(params.get("k", 1.0))
    if kind in ("gaussian", "plane"):
        amp = params.get("amplitude", 1.0)
        if kind == "gaussian":
            r0 = float(params["r0"])
            if not r0 > 0:
                raise ValueError("r0 must be positive")
            b = amp * np.exp(-(grid.radius() / r0) ** 2) + 0j
        else:
            b = np.full(grid.shape, amp, dtype=complex)
        kin = params.get("kappa_inc", 0.0)
        kin = _tilt_on_lattice(kin, grid)
        if np.any(kin != 0):
            phase = sum(kv * xv for kv, xv in zip(kin, grid.coords()))
            b = b * np.exp(1j * phase)
        return FieldSlice(b, grid, k, 0.0)
    if kind == "from_source":
        prof = np.asarray(params["profile"], dtype=complex)
        if prof.shape != grid.shape:
            raise ValueError("source profile shape does not match the grid")
        z0, L = float(params["z0"]), float(params["L"])
        if z0 < L:
            raise ValueError("source must sit at z0 >= L")
        b = -0.5 * free_propagate(prof, grid, k, z0 - L)
        return FieldSlice(b, grid, k, 0.0)
    raise ValueError(f"unknown beam kind {kind!r}")


def _axes(grid):
    return tuple(range(-grid.d, 0))


def _free_multiplier(grid: Grid, k: float, dz: float, sign=1):
    return np.exp((-1j * sign * dz / (2.0 * k)) * grid.kappa_sq())


def free_propagate(values, grid: Grid, k: float, z: float, sign=1):
    """Exact free Fresnel propagation ``exp(-i sign |kappa|^2 z / (2k))``.

    The grid coordinates are centered, so the transform is taken after
    an ``ifftshift`` to keep ``x = 0`` at index 0.
    """
    ax = _axes(grid)
    if z == 0:
        return np.array(values, dtype=complex, copy=True)
    v = sfft.ifftshift(values, axes=ax)
    v = sfft.ifftn(sfft.fftn(v, axes=ax) * _free_multiplier(grid, k, z, sign), axes=ax)
    return sfft.fftshift(v, axes=ax)


def _run_steps(v, scr, step_idx, grid, k, dz, mask, conj):
    """Strang steps on fft-ordered data ``v`` (batch, *grid.shape).

    ``scr`` has shape (n_steps, *batch, *grid.shape) in fft order.  Adjacent
    half free steps are merged into one full step.
    """
    sign = -1 if conj else 1
    ax = _axes(grid)
    half = _free_multiplier(grid, k, dz / 2.0, sign)
    full = half * half
    nsteps = len(step_idx)
    if nsteps == 0:
        return v
    v = sfft.fftn(v, axes=ax)
    pref = sign * 0.5 * k
    for c, j in enumerate(step_idx):
        v *= half if c == 0 else full
        v = sfft.ifftn(v, axes=ax, overwrite_x=True)
        phase = np.exp(1j * pref * scr[j])
        if mask is not None:
            phase = phase * mask
        v *= phase
        v = sfft.fftn(v, axes=ax, overwrite_x=True)
    v *= half
    return sfft.ifftn(v, axes=ax, overwrite_x=True)


def _order_indices(n_steps, order):
    if order == "forward":
        return range(n_steps)
    if order == "reverse":
        return range(n_steps - 1, -1, -1)
    raise ValueError(f"order must be 'forward' or 'reverse', got {order!r}")


def _prep(field_: FieldSlice, screens, mask):
    g = field_.grid
    if isinstance(screens, ScreenStack):
        if screens.grid != g:
            raise ValueError("field and screens live on different grids")
        arr, dz = screens.screens, screens.dz
    else:
        arr, dz = screens
        if arr.shape[-g.d:] != g.shape:
            raise ValueError("field and screens live on different grids")
    ax = _axes(g)
    v = sfft.ifftshift(np.asarray(field_.values, dtype=complex), axes=ax)
    s = sfft.ifftshift(arr, axes=ax)
    m = None if mask is None else sfft.ifftshift(np.asarray(mask, dtype=float), axes=ax)
    return v, s, dz, m


def split_step_pass(field: FieldSlice, screens, k: float | None = None, order: str = "forward",
                    mask=None) -> FieldSlice:
    """One pass through the slab.

    Parameters
    ----------
    field : FieldSlice
    screens : ScreenStack or (array, dz)
        The array form has shape ``(n_steps, *batch, *grid.shape)`` and lets
        a batch of realizations share one call.
    k : float, optional
        Wavenumber; defaults to ``field.k``.
    order : {"forward", "reverse"}
        Ascending or descending step index.
    mask : ndarray, optional
        Absorbing profile applied once per step.
    """
    k = field.k if k is None else k
    if not k > 0:
        raise ValueError("k must be positive")
    v, s, dz, m = _prep(field, screens, mask)
    idx = _order_indices(s.shape[0], order)
    out = _run_steps(v, s, list(idx), field.grid, k, dz, m, conj=False)
    out = sfft.fftshift(out, axes=_axes(field.grid))
    return FieldSlice(out, field.grid, k, field.z + s.shape[0] * dz)


def pass_with_snapshots(field: FieldSlice, screens, k=None, order="forward", mask=None, snapshots=()):
    """Like :func:`split_step_pass` but also returns the field after each step count in ``snapshots``.

    Returns
    -------
    dict
        ``{m: ndarray}`` for every requested ``m`` (including the full pass).
    """
    k = field.k if k is None else k
    v, s, dz, m = _prep(field, screens, mask)
    nst = s.shape[0]
    marks = sorted(set(int(c) for c in snapshots) | {nst})
    if marks[0] < 0 or marks[-1] > nst:
        raise ValueError("snapshot step counts must lie in [0, n_steps]")
    idx = list(_order_indices(nst, order))
    out, done = {}, 0
    ax = _axes(field.grid)
    for c in marks:
        v = _run_steps(v, s, idx[done:c], field.grid, k, dz, m, conj=False)
        done = c
        out[c] = sfft.fftshift(v, axes=ax)
    return out


def inverse_pass(field: FieldSlice, screens, k: float | None = None, order: str = "forward") -> FieldSlice:
    """Undo ``split_step_pass(order=order)``: reversed steps with conjugated multipliers."""
    k = field.k if k is None else k
    v, s, dz, _ = _prep(field, screens, None)
    idx = list(_order_indices(s.shape[0], order))[::-1]
    out = _run_steps(v, s, idx, field.grid, k, dz, None, conj=True)
    out = sfft.fftshift(out, axes=_axes(field.grid))
    return FieldSlice(out, field.grid, k, field.z - s.shape[0] * dz)


def downgoing(b_inc: FieldSlice, screens, k=None, mask=None) -> FieldSlice:
    """Field arriving at the interface: descending pass from the surface."""
    return split_step_pass(b_inc, screens, k, "reverse", mask)


def transmit(b_inc: FieldSlice, screens, k=None, coeffs: BoundaryCoefficients | None = None,
             mask=None, order: str = "reverse") -> FieldSlice:
    """Transmitted field ``T0 * g_1 ... g_N b_inc``.

    The descending order is the one implied by the kernel equation and is
    the same downgoing pass used by :func:`reflect_double_pass`; ``order``
    may be set to "forward" since single-pass statistics do not depend on it.
    """
    T0 = 1.0 if coeffs is None else coeffs.T0
    out = split_step_pass(b_inc, screens, k, order, mask)
    out.values *= T0
    return out


def reflect_double_pass(b_inc: FieldSlice, screens, k=None, coeffs: BoundaryCoefficients | None = None,
                        mask=None, down: FieldSlice | None = None) -> FieldSlice:
    """Reflected field ``R0 * forward(reverse(b_inc))`` through the same frozen medium.

    A precomputed downgoing field may be passed as ``down`` to share it with
    :func:`transmit`.
    """
    R0 = 0.0 if coeffs is None else coeffs.R0
    if down is None:
        down = downgoing(b_inc, screens, k, mask)
    up = split_step_pass(FieldSlice(down.values, down.grid, down.k, 0.0), screens, k, "forward", mask)
    up.values *= R0
    up.z = 2.0 * up.z
    return up


def reflect_kernel(screens: ScreenStack, k: float, coeffs: BoundaryCoefficients) -> KernelSlice:
    """Evolve the discretized reflection kernel on the (x, x') grid.

    Starts from ``R0 * I / dx`` and applies ``K <- g_j K g_j`` for ascending
    j: the 2-axis free multiplier ``exp(-i (|kappa|^2 + |kappa'|^2) dz / (4k))``
    around the screen phase ``exp(i (k/2) (dB_j(x) + dB_j(x')))``.
    """
    g = screens.grid
    if g.d != 1:
        raise ValueError("kernel method supports d=1 only")
    if g.n > KERNEL_MAX_N:
        raise MemoryError(f"kernel grid n={g.n} exceeds the {KERNEL_MAX_N} bound")
    n, dz = g.n, screens.dz
    K = np.eye(n, dtype=complex) * (coeffs.R0 / g.dx)
    ksq = g.kappa_sq()
    half = np.exp(-1j * dz / (4.0 * k) * (ksq[:, None] + ksq[None, :]))
    full = half * half
    s = sfft.ifftshift(screens.screens, axes=-1)
    if screens.n_steps:
        K = sfft.fft2(K)
        for j in range(screens.n_steps):
            K *= half if j == 0 else full
            K = sfft.ifft2(K, overwrite_x=True)
            ph = np.exp(0.5j * k * s[j])
            K *= ph[:, None] * ph[None, :]
            K = sfft.fft2(K, overwrite_x=True)
        K *= half
        K = sfft.ifft2(K, overwrite_x=True)
    K = sfft.fftshift(K)
    return KernelSlice(K, g, k, screens.length)


def apply_kernel(kernel: KernelSlice, b: FieldSlice) -> FieldSlice:
    """``int K(x, x') b(x') dx'`` as a Riemann sum."""
    if kernel.grid != b.grid:
        raise ValueError("grid mismatch")
    return FieldSlice(kernel.values @ b.values * b.grid.dx, b.grid, b.k, kernel.z)


def synthesize_time_trace(fields_by_k: dict, weights, s_grid) -> np.ndarray:
    """Time-domain field ``p(s, x) = (1/2pi) int field_k(x) w(k) exp(-iks) dk``.

    Trapezoidal rule over uniformly spaced wavenumbers.

    Parameters
    ----------
    fields_by_k : dict
        ``{k: FieldSlice}``
    weights : dict or sequence
        Source spectrum samples, keyed like ``fields_by_k`` or listed in
        ascending k.
    s_grid : array_like
        Time offsets.

    Returns
    -------
    ndarray of shape ``(len(s_grid), *grid.shape)``
    """
    if not fields_by_k:
        raise ValueError("no wavenumbers given")
    ks = np.array(sorted(fields_by_k))
    w = np.array([weights[k] for k in ks] if isinstance(weights, dict) else weights, dtype=complex)
    if w.size != ks.size:
        raise ValueError("weights do not match the wavenumber set")
    s = np.atleast_1d(np.asarray(s_grid, dtype=float))
    if ks.size == 1:
        quad = np.ones(1)
        dk = 1.0
    else:
        dk = np.diff(ks)
        if np.max(np.abs(dk - dk[0])) > 1e-9 * abs(dk[0]):
            raise ValueError("wavenumber samples must be uniform")
        dk = dk[0]
        quad = np.ones(ks.size)
        quad[[0, -1]] = 0.5
        quad = quad * dk / (2 * np.pi)
    F = np.stack([fields_by_k[k].values for k in ks])
    coef = (quad * w)[None, :] * np.exp(-1j * s[:, None] * ks[None, :])
    return np.tensordot(coef, F, axes=(1, 0))
