"""Phase screens: realizations of the Brownian field increments.

Each screen ``dB_j(x) = B((j+1)dz, x) - B(j dz, x)`` is a real, stationary,
periodic Gaussian field with covariance ``dz * C0(x - x')``.  Screens are
synthesized spectrally on the same torus the split-step propagator uses,
so the covariance realized on the grid is the lattice-periodized

    C_per(x) = (1/width**d) * sum_m C0hat(kappa_m) exp(i kappa_m x)

which equals ``C0`` up to wraparound terms that are negligible once
``width >> l_x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .medium import MediumSpec

__all__ = [
    "Grid",
    "ScreenStack",
    "RNGStream",
    "make_rng",
    "lattice_spectrum",
    "periodic_c0",
    "synthesize_screens",
    "empirical_screen_covariance",
    "check_grid",
]


@dataclass(frozen=True)
class Grid:
    """Periodic transverse grid, ``n`` points per axis with spacing ``dx``."""

    n: int
    dx: float
    d: int = 1

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two >= 2, got {self.n}")
        if not self.dx > 0:
            raise ValueError(f"grid spacing must be positive, got {self.dx}")
        if self.d not in (1, 2):
            raise ValueError(f"transverse dimension must be 1 or 2, got {self.d}")

    @classmethod
    def from_width(cls, n, width, d=1):
        return cls(int(n), float(width) / int(n), d)

    @property
    def width(self) -> float:
        return self.n * self.dx

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def x(self) -> np.ndarray:
        """Coordinates ``dx * m`` for ``m`` in ``[-n/2, n/2)`` (centered, not fft order)."""
        return (np.arange(self.n) - self.n // 2) * self.dx

    @property
    def kappa(self) -> np.ndarray:
        """Frequency lattice ``2 pi m / width`` in fft order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def dkappa(self) -> float:
        return 2.0 * np.pi / self.width

    def kappa_sq(self) -> np.ndarray:
        """``|kappa|**2`` on the full d-dimensional lattice (fft order)."""
        k = self.kappa
        if self.d == 1:
            return k * k
        return k[:, None] ** 2 + k[None, :] ** 2

    def coords(self):
        """Tuple of coordinate arrays broadcastable to ``shape``."""
        x = self.x
        if self.d == 1:
            return (x,)
        return (x[:, None], x[None, :])

    def radius(self) -> np.ndarray:
        if self.d == 1:
            return np.abs(self.x)
        x0, x1 = self.coords()
        return np.sqrt(x0 * x0 + x1 * x1)

    def cell(self) -> float:
        return self.dx ** self.d

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "width": self.width}


@dataclass(frozen=True)
class RNGStream:
    """Counter-style stream label: ``(master_seed, index)`` plus a purpose code."""

    master_seed: int
    index: int
    purpose: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.purpose), int(self.index)))
        return np.random.Generator(np.random.PCG64(ss))

    @property
    def label(self) -> str:
        return f"{self.master_seed}:{self.purpose}:{self.index}"


def make_rng(master_seed: int, index: int, purpose: int = 0) -> np.random.Generator:
    """Generator for realization ``index``; independent of any other index or order of use."""
    return RNGStream(master_seed, index, purpose).generator()


@dataclass(frozen=True)
class ScreenStack:
    """One realization of the slab: ``n_steps`` real screens on ``grid``.

    ``screens[j]`` is sampled at the coordinates ``grid.x``.
    """

    grid: Grid
    dz: float
    screens: np.ndarray = field(repr=False)
    stream_id: str = ""

    @property
    def n_steps(self) -> int:
        return self.screens.shape[0]

    @property
    def length(self) -> float:
        return self.n_steps * self.dz


def lattice_spectrum(spec: MediumSpec, grid: Grid) -> np.ndarray:
    """``C0hat`` on the grid's frequency lattice (fft order, full d-dim shape)."""
    return spec.c0_hat(np.sqrt(grid.kappa_sq()), grid.d)


def periodic_c0(spec: MediumSpec, grid: Grid) -> np.ndarray:
    """Covariance ``C_per`` of the synthesized screens per unit dz, at centered lags ``grid.x``."""
    chat = lattice_spectrum(spec, grid)
    c = np.fft.ifftn(chat).real * grid.n ** grid.d / grid.width ** grid.d
    return np.fft.fftshift(c)


def synthesize_screens(spec: MediumSpec, grid: Grid, n_steps: int, dz: float, stream) -> ScreenStack:
    """Draw one stack of phase screens.

    Real white noise is transformed with a real FFT, which yields complex
    circular Gaussian modes with Hermitian symmetry built in.  Mode ``m`` is
    scaled by ``sqrt(dz * C0hat(kappa_m) / dx**d)`` and transformed back, so
    each screen has covariance ``dz * C_per``.

    Parameters
    ----------
    stream : RNGStream, numpy Generator or int
        Randomness source.  An int is read as ``RNGStream(int, 0)``.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if not dz > 0:
        raise ValueError("dz must be positive")
    if isinstance(stream, RNGStream):
        rng, sid = stream.generator(), stream.label
    elif isinstance(stream, np.random.Generator):
        rng, sid = stream, "generator"
    else:
        st = RNGStream(int(stream), 0)
        rng, sid = st.generator(), st.label
    chat = lattice_spectrum(spec, grid)
    if np.any(chat < 0) or not np.all(np.isfinite(chat)):
        raise ValueError("power spectral density is negative or non-finite on the grid lattice")
    axes = tuple(range(1, grid.d + 1))
    # rfftn keeps the last axis halved
    half = chat[..., : grid.n // 2 + 1]
    amp = np.sqrt(dz * half / grid.cell())
    shape = (n_steps,) + grid.shape
    if spec.sigma == 0 or n_steps == 0:
        return ScreenStack(grid, dz, np.zeros(shape), sid)
    w = rng.standard_normal(shape)
    scr = np.fft.irfftn(np.fft.rfftn(w, axes=axes) * amp, s=grid.shape, axes=axes)
    return ScreenStack(grid, dz, scr, sid)


def empirical_screen_covariance(stacks, lags, base=None):
    """Sample covariance of screens across realizations.

    Deviations from the across-realization mean at each point are
    correlated at each lag, averaged over steps and base points, and the
    realization-level averages give the estimate with its standard error.

    Parameters
    ----------
    stacks : sequence of ScreenStack
        At least two realizations on identical grids.
    lags : array_like
        Transverse offsets (lengths), integer multiples of ``dx``.
    base : array_like of int, optional
        Base-point indices; all points by default.

    Returns
    -------
    est, se : ndarray
        Covariance estimates (per screen, i.e. including the ``dz`` factor)
        and their standard errors.
    """
    stacks = list(stacks)
    if len(stacks) < 2:
        raise ValueError("need at least two stacks")
    g0, dz0, n0 = stacks[0].grid, stacks[0].dz, stacks[0].n_steps
    for s in stacks[1:]:
        if s.grid != g0 or s.dz != dz0 or s.n_steps != n0:
            raise ValueError("mismatched grids or step layouts")
    if g0.d != 1:
        raise ValueError("covariance utility supports d=1")
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    idx = np.rint(lags / g0.dx).astype(int)
    if np.any(np.abs(idx * g0.dx - lags) > 1e-9 * max(g0.dx, 1.0)):
        raise ValueError("lags must be integer multiples of dx")
    data = np.stack([s.screens for s in stacks])  # (N, steps, n)
    nreal = data.shape[0]
    dev = data - data.mean(axis=0)
    b = np.arange(g0.n) if base is None else np.asarray(base, dtype=int)
    per = np.empty((nreal, idx.size))
    for c, m in enumerate(idx):
        prod = np.roll(dev, -m, axis=2)[..., b] * dev[..., b]
        per[:, c] = prod.mean(axis=(1, 2))
    per *= nreal / (nreal - 1)
    est = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / math.sqrt(nreal)
    return est, se


def check_grid(grid: Grid, spec: MediumSpec | None = None, spread: float | None = None):
    """Resolution and anti-wraparound warnings for a grid.

    ``spread`` is the largest beam radius (``max(r0, r_T)``) expected.
    """
    out = []
    if spec is not None and grid.dx > spec.l_x / 4:
        out.append(f"dx={grid.dx:g} exceeds l_x/4={spec.l_x / 4:g}: medium under-resolved")
    if spread is not None and grid.width < 8 * spread:
        out.append(f"width={grid.width:g} below 8x beam radius {spread:g}: wraparound risk")
    return out
