"""Monte Carlo orchestration and estimators for transmitted and reflected fields.

Realizations are grouped into fixed blocks of consecutive indices.  Each
block's sums are computed from a single batched propagation and kept
separately; totals are always reduced over blocks in ascending block
order.  Estimates therefore do not depend on the number of workers, and a
merge of accumulators covering disjoint blocks reproduces the single run
bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import optimize

from .medium import MediumSpec
from .propagator import (FieldSlice, absorbing_mask, make_incident_beam, pass_with_snapshots,
                         reflect_kernel, reflection_coefficients, split_step_pass)
from .screens import Grid, RNGStream, synthesize_screens

__all__ = [
    "RunPlan",
    "BlockSums",
    "EnsembleAccumulator",
    "EnsembleResult",
    "run_ensemble",
    "merge_accumulators",
    "estimate_autocorrelation",
    "beam_metrics_estimate",
    "angular_spectrum_stats",
    "mean_reflection_kernel",
    "auto_block_size",
]

BLOCK_BYTES = 64 * 2 ** 20  # screen memory per batched block


@dataclass(frozen=True)
class RunPlan:
    """Everything that defines an ensemble run.

    ``beam`` is a dict for :func:`make_incident_beam` (``kind``, ``r0``,
    ``kappa_inc``); ``snapshots`` lists transmitted depths as step counts.
    """

    n_realizations: int
    master_seed: int
    k: float
    medium: MediumSpec
    grid: Grid
    L: float
    n_steps: int
    beam: dict = field(default_factory=lambda: {"kind": "gaussian", "r0": 1.0})
    experiment: str = "transmit"
    Z0: float = 1.0
    mask: bool = False
    max_lag: int = 16
    snapshots: tuple = ()
    block_size: int = 0
    start_index: int = 0

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.experiment not in ("transmit", "reflect", "both"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.n_steps < 1 or not self.L > 0:
            raise ValueError("need n_steps >= 1 and L > 0")
        if abs(self.dz * self.n_steps - self.L) > 1e-12 * self.L:
            raise ValueError("dz * n_steps must equal L")
        if not 0 <= self.max_lag <= self.grid.n // 4:
            raise ValueError("max_lag must lie in [0, n/4]")
        if self.start_index % self.blocks_of() != 0:
            raise ValueError("start_index must be a multiple of the block size")

    @property
    def dz(self) -> float:
        return self.L / self.n_steps

    def blocks_of(self) -> int:
        return self.block_size or auto_block_size(self.grid, self.n_steps)

    @property
    def coeffs(self):
        return reflection_coefficients(self.Z0)

    def depths(self):
        return tuple(sorted(set(int(s) for s in self.snapshots) | {self.n_steps}))

    def plan_hash(self) -> str:
        """Hash of everything except the realization range."""
        d = {
            "seed": int(self.master_seed), "k": self.k, "medium": self.medium.to_dict(),
            "grid": [self.grid.n, self.grid.dx, self.grid.d], "L": self.L, "n_steps": self.n_steps,
            "beam": {kk: (list(np.atleast_1d(v).tolist()) if not isinstance(v, str) else v)
                     for kk, v in sorted(self.beam.items())},
            "experiment": self.experiment, "Z0": self.Z0, "mask": self.mask, "max_lag": self.max_lag,
            "snapshots": list(self.depths()), "block": self.blocks_of(),
        }
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def auto_block_size(grid: Grid, n_steps: int, cap: int = 50) -> int:
    """Largest block (<= cap) whose screens fit in ``BLOCK_BYTES``."""
    per = n_steps * grid.n ** grid.d * 8
    return int(max(1, min(cap, BLOCK_BYTES // max(per, 1))))


@dataclass
class BlockSums:
    """Sums over one block of realizations."""

    n: int
    field: np.ndarray
    intensity: np.ndarray
    intensity2: np.ndarray
    autocorr: np.ndarray
    autocorr2: np.ndarray
    angular: np.ndarray
    angular2: np.ndarray

    def __add__(self, o: "BlockSums") -> "BlockSums":
        return BlockSums(self.n + o.n, *(getattr(self, f) + getattr(o, f) for f in _SUM_FIELDS))

    def __sub__(self, o: "BlockSums") -> "BlockSums":
        return BlockSums(self.n - o.n, *(getattr(self, f) - getattr(o, f) for f in _SUM_FIELDS))


_SUM_FIELDS = ("field", "intensity", "intensity2", "autocorr", "autocorr2", "angular", "angular2")


def _lag_products(p, M):
    """``p(x + m dx) * conj(p(x - m dx))`` for m = 0..M; shape (..., M+1, n)."""
    out = np.empty(p.shape[:-1] + (M + 1, p.shape[-1]), dtype=complex)
    out[..., 0, :] = np.abs(p) ** 2
    for m in range(1, M + 1):
        out[..., m, :] = np.roll(p, -m, axis=-1) * np.conj(np.roll(p, m, axis=-1))
    return out


def block_sums_from_fields(p: np.ndarray, grid: Grid, M: int) -> BlockSums:
    """Sums over the leading axis of a batch of fields ``p`` (B, n)."""
    I = np.abs(p) ** 2
    A = _lag_products(p, M) if M > 0 else I[:, None, :].astype(complex)
    ph = sfft.fft(sfft.ifftshift(p, axes=-1), axis=-1) * grid.dx
    S = np.abs(ph) ** 2
    return BlockSums(p.shape[0], p.sum(0), I.sum(0), (I * I).sum(0), A.sum(0), (np.abs(A) ** 2).sum(0),
                     S.sum(0), (S * S).sum(0))


@dataclass
class EnsembleAccumulator:
    """Streaming sums over realizations grouped by block index."""

    grid: Grid
    max_lag: int
    plan_hash: str = ""
    block_size: int = 1
    blocks: dict = field(default_factory=dict)
    depth: float = 0.0

    @property
    def n(self) -> int:
        return sum(b.n for b in self.blocks.values())

    def add_block(self, index: int, sums: BlockSums):
        if index in self.blocks:
            raise ValueError(f"block {index} already absorbed")
        self.blocks[index] = sums

    def totals(self) -> BlockSums:
        if not self.blocks:
            raise ValueError("empty accumulator")
        keys = sorted(self.blocks)
        tot = self.blocks[keys[0]]
        for kk in keys[1:]:
            tot = tot + self.blocks[kk]
        return tot

    def indices(self):
        out = []
        for b in sorted(self.blocks):
            out.extend(range(b * self.block_size, b * self.block_size + self.blocks[b].n))
        return out

    # moment estimators: mean and its standard error (closed-form leave-one-out jackknife)
    @staticmethod
    def _mean_se(s1, s2, n):
        mean = s1 / n
        if n < 2:
            return mean, np.full(np.shape(mean), np.nan)
        var = np.maximum(s2 / n - np.abs(mean) ** 2, 0.0) * n / (n - 1)
        return mean, np.sqrt(var / n)

    def mean_field(self):
        t = self.totals()
        return self._mean_se(t.field, t.intensity, t.n)

    def mean_intensity(self):
        t = self.totals()
        return self._mean_se(t.intensity, t.intensity2, t.n)

    def autocorr_table(self):
        """Full lag table for m = -M..M (rows) and all centers (columns), with SEs."""
        t = self.totals()
        a, se = self._mean_se(t.autocorr, t.autocorr2, t.n)
        neg = np.conj(a[1:][::-1])
        return np.concatenate([neg, a]), np.concatenate([se[1:][::-1], se])

    def angular_spectrum(self):
        """Mean ``|p_check(kappa)|^2`` on the sorted lattice with SEs."""
        t = self.totals()
        m, se = self._mean_se(t.angular, t.angular2, t.n)
        kap = sfft.fftshift(self.grid.kappa)
        return kap, sfft.fftshift(m), sfft.fftshift(se)

    def block_jackknife(self, fn):
        """Estimate ``fn(totals)`` and its delete-a-block jackknife SE."""
        tot = self.totals()
        theta = np.asarray(fn(tot), dtype=float)
        G = len(self.blocks)
        if G < 2:
            return theta, np.full(theta.shape, np.nan)
        reps = np.array([fn(tot - self.blocks[b]) for b in sorted(self.blocks)], dtype=float)
        mu = reps.mean(axis=0)
        se = np.sqrt((G - 1) / G * np.sum((reps - mu) ** 2, axis=0))
        return theta, se


@dataclass
class EnsembleResult:
    plan: RunPlan
    transmit: dict  # step count -> EnsembleAccumulator
    reflect: EnsembleAccumulator | None
    audit: np.ndarray  # (n_realizations, 3): E_inc, E_tr, E_ref (NaN without a reflected channel)

    @property
    def transmitted(self) -> EnsembleAccumulator | None:
        return self.transmit.get(self.plan.n_steps) if self.transmit else None

    def max_energy_defect(self) -> float:
        """Worst relative energy defect; NaN when no reflected field was computed."""
        e = self.audit
        if np.isnan(e[:, 2]).any():
            return math.nan
        return float(np.max(np.abs(e[:, 1] + e[:, 2] - e[:, 0]) / e[:, 0]))


def _beam(plan: RunPlan) -> FieldSlice:
    params = dict(plan.beam)
    kind = params.pop("kind", "gaussian")
    params.setdefault("k", plan.k)
    return make_incident_beam(kind, params, plan.grid)


def _run_block(plan: RunPlan, block: int):
    """Propagate one block; returns per-channel BlockSums and the energy audit."""
    B = plan.blocks_of()
    lo = block * B
    hi = min(lo + B, plan.start_index + plan.n_realizations)
    g = plan.grid
    stacks = [synthesize_screens(plan.medium, g, plan.n_steps, plan.dz, RNGStream(plan.master_seed, i))
              for i in range(lo, hi)]
    scr = np.stack([s.screens for s in stacks], axis=1)
    del stacks
    b = _beam(plan)
    batch = FieldSlice(np.broadcast_to(b.values, (hi - lo,) + g.shape).copy(), g, plan.k)
    mask = absorbing_mask(g) if plan.mask else None
    c = plan.coeffs
    depths = plan.depths()
    snaps = pass_with_snapshots(batch, (scr, plan.dz), plan.k, "reverse", mask, depths)
    down = snaps[plan.n_steps]
    e_inc = np.full(hi - lo, b.energy())
    out_t, out_r = {}, None
    e_tr = (c.T0 ** 2) * np.sum(np.abs(down) ** 2, axis=-1) * g.dx
    e_ref = np.full(hi - lo, np.nan)
    if plan.experiment in ("transmit", "both"):
        for m in depths:
            out_t[m] = block_sums_from_fields(c.T0 * snaps[m], g, plan.max_lag)
    del snaps
    if plan.experiment in ("reflect", "both"):
        up = split_step_pass(FieldSlice(down, g, plan.k), (scr, plan.dz), plan.k, "forward", mask).values
        up *= c.R0
        e_ref = np.sum(np.abs(up) ** 2, axis=-1) * g.dx
        out_r = block_sums_from_fields(up, g, plan.max_lag)
    bad = ~np.isfinite(e_tr)
    if out_r is not None:
        bad |= ~np.isfinite(e_ref)
    if np.any(bad):
        raise FloatingPointError(f"non-finite field in realization {lo + int(np.argmax(bad))}")
    return block, out_t, out_r, np.stack([e_inc, e_tr, e_ref], axis=1)


def _run_block_star(args):
    return _run_block(*args)


def run_ensemble(plan: RunPlan, workers: int = 1) -> EnsembleResult:
    """Run every realization of ``plan`` and absorb the fields.

    Realization ``i`` draws its screens from ``RNGStream(master_seed, i)``,
    then the downgoing pass feeds the transmitted field (``T0`` times the
    field at the interface, at every snapshot depth) and, for reflection,
    an upgoing pass through the same screens times ``R0``.
    """
    B = plan.blocks_of()
    first = plan.start_index // B
    last = (plan.start_index + plan.n_realizations - 1) // B
    jobs = [(plan, blk) for blk in range(first, last + 1)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_block_star, jobs))
    else:
        results = [_run_block(*j) for j in jobs]
    h = plan.plan_hash()
    tr = {}
    if plan.experiment in ("transmit", "both"):
        tr = {m: EnsembleAccumulator(plan.grid, plan.max_lag, h, B, depth=m * plan.dz) for m in plan.depths()}
    rf = EnsembleAccumulator(plan.grid, plan.max_lag, h, B, depth=2 * plan.L) \
        if plan.experiment in ("reflect", "both") else None
    audits = []
    for blk, out_t, out_r, aud in sorted(results, key=lambda r: r[0]):
        for m, s in out_t.items():
            tr[m].add_block(blk, s)
        if rf is not None:
            rf.add_block(blk, out_r)
        audits.append(aud)
    return EnsembleResult(plan, tr, rf, np.concatenate(audits))


def merge_accumulators(a: EnsembleAccumulator, b: EnsembleAccumulator) -> EnsembleAccumulator:
    """Union of two accumulators over disjoint realization blocks."""
    if a.grid != b.grid or a.max_lag != b.max_lag:
        raise ValueError("accumulators live on different grids")
    if a.blocks and b.blocks and (a.plan_hash != b.plan_hash or a.block_size != b.block_size):
        raise ValueError("plan hash mismatch")
    overlap = set(a.blocks) & set(b.blocks)
    if overlap:
        raise ValueError(f"overlapping realization blocks {sorted(overlap)}")
    src = a if a.blocks else b
    out = EnsembleAccumulator(a.grid, a.max_lag, src.plan_hash, src.block_size, {}, src.depth)
    out.blocks.update(a.blocks)
    out.blocks.update(b.blocks)
    return out


def _lag_index(acc: EnsembleAccumulator, x, y):
    g = acc.grid
    ix = np.rint(np.asarray(x, dtype=float) / g.dx).astype(int) + g.n // 2
    m2 = np.asarray(y, dtype=float) / g.dx
    m = np.rint(m2 / 2).astype(int)
    if np.any(np.abs(2 * m - m2) > 1e-9) or np.any(np.abs(ix - g.n // 2 - np.asarray(x) / g.dx) > 1e-9):
        raise ValueError("x must lie on the grid and y must be an even multiple of dx")
    if np.any(np.abs(m) > acc.max_lag) or np.any((ix < 0) | (ix >= g.n)):
        raise ValueError("requested lag or center outside the stored table")
    return ix, m


def estimate_autocorrelation(acc: EnsembleAccumulator, x, y):
    """``E[p(x + y/2) conj p(x - y/2)]`` with its standard error.

    ``x`` must be a grid point and ``y`` an even multiple of ``dx``.
    """
    ix, m = _lag_index(acc, x, y)
    tab, se = acc.autocorr_table()
    return tab[m + acc.max_lag, ix], se[m + acc.max_lag, ix]


def _r_from(t: BlockSums, grid: Grid):
    I = t.intensity / t.n
    return 2.0 * math.sqrt(np.sum(grid.x ** 2 * I) / np.sum(I))


def _rho_from(t: BlockSums, grid: Grid, M: int):
    c = grid.n // 2
    a = np.abs(t.autocorr[:, c]) / t.n
    ratio = a / a[0]
    y = 2 * grid.dx * np.arange(M + 1)
    below = np.nonzero(ratio < math.exp(-1))[0]
    if below.size == 0:
        return math.nan
    j = below[0]
    # log-linear interpolation of the 1/e crossing
    l0, l1 = math.log(ratio[j - 1]), math.log(ratio[j])
    ye = y[j - 1] + (-1 - l0) / (l1 - l0) * (y[j] - y[j - 1])
    return ye / math.sqrt(2.0)


def _chi_from(t: BlockSums, grid: Grid, M: int, r_hat, rho_hat):
    A = t.autocorr / t.n
    x = grid.x
    y = 2 * grid.dx * np.arange(M + 1)
    X, Y = np.meshgrid(x, y)
    sel = (np.abs(X) <= r_hat / 2) & (Y <= rho_hat) & (Y > 0)
    if np.count_nonzero(sel) < 2:
        return math.nan
    xy = (X * Y)[sel]
    ph = np.angle(A[sel])
    c = np.sum(xy * ph) / np.sum(xy * xy)
    return 1.0 / math.sqrt(c) if c > 0 else math.nan


def beam_metrics_estimate(acc: EnsembleAccumulator, with_se: bool = True):
    """Beam radius, coherence radius and phase parameter from an accumulator.

    ``r_T`` is twice the rms radius of the mean intensity, ``rho_T`` the
    1/e lag of ``|A(0, y)| / A(0, 0)`` divided by sqrt(2), and ``chi_T``
    follows from the least-squares slope of ``arg A(x, y)`` against ``x y``
    on ``|x| <= r_T/2``, ``0 < y <= rho_T``.

    Returns
    -------
    dict with ``r_T``, ``rho_T``, ``chi_T`` and (if ``with_se``) their
    delete-a-block jackknife SEs under ``*_se``.
    """
    g, M = acc.grid, acc.max_lag
    if g.d != 1:
        raise ValueError("beam metrics implemented for d=1")
    t = acc.totals()
    I = t.intensity / t.n
    edge = max(I[0], I[-1], I[g.n // 16], I[-g.n // 16])
    if edge > 1e-3 * I.max():
        warnings.warn("mean intensity does not decay at the grid edge: wraparound likely", RuntimeWarning)

    def f(tt):
        r = _r_from(tt, g)
        rho = _rho_from(tt, g, M) if M > 0 else math.nan
        chi = _chi_from(tt, g, M, r, rho) if M > 0 and np.isfinite(rho) else math.nan
        return [r, rho, chi]

    if with_se:
        val, se = acc.block_jackknife(f)
    else:
        val, se = np.array(f(t)), np.full(3, np.nan)
    out = dict(zip(("r_T", "rho_T", "chi_T"), map(float, val)))
    out.update(dict(zip(("r_T_se", "rho_T_se", "chi_T_se"), map(float, se))))
    return out


def _gauss(x, a, c, w):
    return a * np.exp(-(((x - c) / w) ** 2))


def _cone_fit(kap, S, kappa_inc, ebc_width, dkap):
    """Broad Gaussian baseline plus narrow-peak fit; returns (enh, w_narrow, w_broad)."""
    back = -kappa_inc
    excl = (np.abs(kap - back) < 3 * ebc_width) | (np.abs(kap - kappa_inc) < 1.5 * dkap)
    keep = ~excl & (S > 1e-3 * S.max())
    w0 = math.sqrt(np.sum(S[keep] * (kap[keep] - kappa_inc) ** 2) / np.sum(S[keep])) * math.sqrt(2)
    p0 = [S[keep].max(), kappa_inc, w0]
    (a, c, w), _ = optimize.curve_fit(_gauss, kap[keep], S[keep], p0=p0, maxfev=20000)
    base = _gauss(kap, a, c, w)
    ib = int(np.argmin(np.abs(kap - back)))
    enh = S[ib] / base[ib]
    win = np.abs(kap - back) < 3 * ebc_width
    rel = S[win] / base[win] - 1.0
    (h, c2, wn), _ = optimize.curve_fit(_gauss, kap[win], rel, p0=[max(enh - 1, 0.1), back, ebc_width],
                                         maxfev=20000)
    return enh, abs(wn), abs(w)


def angular_spectrum_stats(acc: EnsembleAccumulator, kappa_inc: float, ebc_width: float, with_se=True):
    """Enhancement factor and cone widths of the mean reflected angular spectrum.

    Parameters
    ----------
    kappa_inc : float
        Incident tilt; the specular cone is centered there and the
        backscattered direction is ``-kappa_inc``.
    ebc_width : float
        Predicted narrow-cone width; a window of three such widths around
        ``-kappa_inc`` is excluded from the broad-cone fit.

    Returns
    -------
    dict with ``enhancement``, ``ebc_width``, ``broad_width`` (e-folding
    scales of Gaussian fits) and their block-jackknife SEs.
    """
    g = acc.grid
    if ebc_width < 3 * g.dkappa:
        raise ValueError(f"cone width {ebc_width:g} is narrower than 3 lattice spacings ({g.dkappa:g})")
    kap = sfft.fftshift(g.kappa)

    def f(tt):
        S = sfft.fftshift(tt.angular / tt.n)
        return list(_cone_fit(kap, S, kappa_inc, ebc_width, g.dkappa))

    if with_se:
        val, se = acc.block_jackknife(f)
    else:
        val, se = np.array(f(acc.totals())), np.full(3, np.nan)
    keys = ("enhancement", "ebc_width", "broad_width")
    out = dict(zip(keys, map(float, val)))
    out.update({k + "_se": float(s) for k, s in zip(keys, se)})
    return out


def mean_reflection_kernel(plan: RunPlan):
    """Mean and SE of the kernel spectrum ``R_hat(kappa, kappa')`` over the plan's realizations.

    ``R_hat[i, j] = (dx^2 / 2 pi) sum K(x, x') exp(-i kappa_i x + i kappa_j x')``
    on the fft-ordered lattice, the discrete form of the inverse of the
    kernel's double Fourier representation.
    """
    g, c = plan.grid, plan.coeffs
    s1 = np.zeros((g.n, g.n), dtype=complex)
    s2 = np.zeros((g.n, g.n))
    lo = plan.start_index
    for i in range(lo, lo + plan.n_realizations):
        st = synthesize_screens(plan.medium, g, plan.n_steps, plan.dz, RNGStream(plan.master_seed, i))
        K = reflect_kernel(st, plan.k, c).values
        K = sfft.ifftshift(K)
        Rh = sfft.fft(sfft.ifft(K, axis=1) * g.n, axis=0) * (g.dx ** 2 / (2 * np.pi))
        s1 += Rh
        s2 += np.abs(Rh) ** 2
    n = plan.n_realizations
    return EnsembleAccumulator._mean_se(s1, s2, n)
