import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf

from paraxia import analytics as an
from paraxia.analytics import (BeamParams, beam_metrics_theory, c0_depth_integral, ebc_profile, ebc_theory,
                               mean_kernel_moments, reflected_autocorrelation, transmitted_autocorrelation)
from paraxia.medium import MediumSpec
from paraxia.screens import Grid


def test_beam_metrics_oracle():
    bt = beam_metrics_theory(1.0, 50.0, 1.0, 3.0)
    assert bt.r_T == pytest.approx(1.414214, abs=1e-6)
    assert bt.rho_T == pytest.approx(0.029205, abs=1e-6)
    assert bt.chi_T == pytest.approx(0.163299, abs=1e-6)
    assert bt.rho_T <= bt.r_T


def test_beam_metrics_unscattered_and_errors():
    bt = beam_metrics_theory(2.5, 10.0, 7.0, 0.0)
    assert bt.r_T == 2.5 and bt.rho_T == 2.5
    with pytest.raises(ZeroDivisionError):
        bt.chi_T
    with pytest.raises(ValueError):
        beam_metrics_theory(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        beam_metrics_theory(1.0, 1.0, 1.0, -1.0)


def test_anomalous_rate():
    r0, D = 1.0, 0.3
    L = (1e4 * 3 * r0 ** 2 / D) ** (1 / 3)
    bt = beam_metrics_theory(r0, 20.0, L, D)
    assert abs(bt.r_T / (math.sqrt(D / 3) * L ** 1.5) - 1) < 1e-4
    assert bt.r_T > r0


def test_depth_integral_vs_erf():
    med = MediumSpec(0.2, l_z=1.5, l_x=0.7)
    k0, L, y = 30.0, 12.0, 0.3
    eta = np.array([-40.0, -3.0, 0.5, 25.0])
    got = c0_depth_integral(med, eta, y, k0, L)
    lx = med.l_x
    a = eta * L / k0
    want = med.amplitude * math.sqrt(math.pi) * (lx * k0 / eta) * (math.sqrt(math.pi) / 2) * (
        erf((a + y) / lx) - erf(y / lx))
    assert np.allclose(got, want, rtol=1e-12, atol=1e-14)


def _params(sigma=0.0, Z0=1.0, **kw):
    base = dict(k0=20.0, L=5.0, r0=2.0)
    base.update(kw)
    return BeamParams(MediumSpec(sigma), Z0=Z0, **base)


def test_unscattered_values():
    p = _params(Z0=2.0)
    T0 = p.coeffs.T0
    assert transmitted_autocorrelation("narrow", 0, 0, 0.0, 0.0, p) == pytest.approx(T0 ** 2, rel=1e-12)
    a0 = p.L / (p.k0 * p.r0 ** 2)
    full = transmitted_autocorrelation("full", 0, 0, 0.0, 0.0, p)
    assert full == pytest.approx(T0 ** 2 / math.sqrt(1 + 4 * a0 ** 2), rel=1e-12)
    q = _params(Z0=3.0)
    assert reflected_autocorrelation("narrow", 0, 0, 0.0, 0.0, q) == pytest.approx(0.25, rel=1e-12)


def test_envelope_factor():
    f0 = lambda t: np.exp(-t ** 2 / 4 + 0.3j * t)
    p = BeamParams(MediumSpec(0.05), 20.0, 5.0, 2.0, f0=f0)
    s, t = 0.4, 0.7
    for mode in ("full", "narrow", "gaussian"):
        r = transmitted_autocorrelation(mode, s, t, 0.5, 0.2, p) / transmitted_autocorrelation(mode, s, 0, 0.5, 0.2, p)
        want = f0(s + t / 2) * np.conj(f0(s - t / 2)) * np.exp(-1j * 20.0 * t) / abs(f0(s)) ** 2
        assert r == pytest.approx(want, rel=1e-12)


def test_narrow_matches_full_for_wide_beam():
    p = BeamParams(MediumSpec(0.05, l_x=1.0), 50.0, 10.0, 50.0)
    x = np.array([0.0, 10.0, 30.0])
    for y in (0.0, 0.5):
        a = transmitted_autocorrelation("narrow", 0, 0, x, y, p)
        b = transmitted_autocorrelation("full", 0, 0, x, y, p)
        assert np.max(np.abs(a - b) / np.abs(b)) < 1e-3


def test_narrow_vs_gaussian_strong_scattering():
    k0, r0 = 50.0, 10.0
    L = 0.01 * k0 * r0 ** 2
    sig = math.sqrt(4 * 30 / (k0 ** 2 * L))
    p = BeamParams(MediumSpec(sig), k0, L, r0)
    bt = beam_metrics_theory(r0, k0, L, p.medium.diffusion())
    x = np.linspace(-bt.r_T, bt.r_T, 11)
    a = transmitted_autocorrelation("narrow", 0, 0, x, 0.0, p)
    g = transmitted_autocorrelation("gaussian", 0, 0, x, 0.0, p)
    assert np.max(np.abs(a / g - 1)) <= 0.02


def _direct_reflected(p, x, y):
    # independent coding of the 2L formula: erf inner integral, adaptive outer quadrature
    med, k0, r0, L2 = p.medium, p.k0, p.r0, 2 * p.L
    lx, A = med.l_x, med.amplitude

    def inner(eta):
        if abs(eta) < 1e-12:
            return A * math.sqrt(math.pi) * math.exp(-(y / lx) ** 2) * L2
        a = eta * L2 / k0
        return A * math.sqrt(math.pi) * lx * k0 / eta * math.sqrt(math.pi) / 2 * (erf((a + y) / lx) - erf(y / lx))

    def f(eta, part):
        g = -r0 ** 2 * eta ** 2 / 8 - y ** 2 / (2 * r0 ** 2) + k0 ** 2 / 4 * (inner(eta) - med.c0_zero() * L2)
        v = math.exp(g) * np.exp(-1j * eta * x)
        return v.real if part == 0 else v.imag

    lim = 20 / r0
    re = quad(f, -lim, lim, args=(0,), limit=400, epsabs=1e-13)[0]
    im = quad(f, -lim, lim, args=(1,), limit=400, epsabs=1e-13)[0]
    return p.coeffs.R0 ** 2 * math.sqrt(r0 ** 2 / (8 * math.pi)) * (re + 1j * im)


def test_reflected_narrow_is_transmitted_at_2L():
    p = BeamParams(MediumSpec(0.08, l_x=0.8), 15.0, 4.0, 3.0, Z0=2.5)
    p2 = BeamParams(p.medium, p.k0, 2 * p.L, p.r0, Z0=2.5)
    c = p.coeffs
    for x, y in ((0.0, 0.0), (1.0, 0.3), (-2.0, 0.6)):
        ref = reflected_autocorrelation("narrow", 0, 0, x, y, p)
        tr = transmitted_autocorrelation("narrow", 0, 0, x, y, p2)
        assert ref == pytest.approx(c.R0 ** 2 / c.T0 ** 2 * tr, rel=1e-12)
        assert ref == pytest.approx(_direct_reflected(p, x, y), rel=1e-6, abs=1e-12)


def test_bad_modes_and_quadrature_failure():
    p = _params(0.05)
    with pytest.raises(ValueError):
        transmitted_autocorrelation("wide", 0, 0, 0.0, 0.0, p)
    with pytest.raises(ValueError):
        transmitted_autocorrelation("gaussian", 0, 0, 0.0, 0.0, _params(0.0))
    with pytest.raises(ValueError):
        reflected_autocorrelation("full", 0, 0, 0.0, 0.0, p)
    wild = lambda eta: np.exp(2j * np.pi * np.random.default_rng(0).random(eta.size))
    with pytest.raises(an.QuadratureError):
        an._eta_integral(wild, 1.0, 0.0, max_doublings=2)


def test_ebc_widths_and_bracket():
    med = MediumSpec(math.sqrt(0.04 / (2 * math.sqrt(math.pi))))
    assert med.diffusion() == pytest.approx(0.04, rel=1e-14)
    th = ebc_theory(med, 50.0, 10.0)
    assert th.dk_spec == pytest.approx(31.6228, abs=1e-4)
    assert th.dk_ebc == pytest.approx(0.547723, abs=1e-6)
    k_inc = 3.0
    v, _ = ebc_profile(np.array([-k_inc, k_inc + 40.0]), k_inc, med, 50.0, 10.0)
    db = th.dcal * th.beta
    broad = math.exp(-(k_inc * med.l_x) ** 2 / db) / math.sqrt(math.pi * db)
    assert v[0] / broad == pytest.approx(2.0, rel=1e-14)
    assert th.profile(0.0) == 2.0


@pytest.mark.parametrize("D,k0,L", [(0.04, 50.0, 10.0), (0.3, 12.0, 3.0), (1e-3, 200.0, 40.0)])
def test_ebc_identities(D, k0, L):
    med = MediumSpec(math.sqrt(D / (2 * math.sqrt(math.pi))), l_x=1.0)
    th = ebc_theory(med, k0, L)
    assert abs(th.dk_ebc / th.dk_spec / (2 * math.sqrt(3) / (k0 * D * L ** 2)) - 1) < 1e-12
    dk = np.linspace(-5, 5, 2001) * th.dk_ebc
    prof = th.profile(dk)
    assert dk[np.argmax(prof)] == 0.0
    # e-folding convention
    assert th.profile(th.dk_ebc) - 1 == pytest.approx(math.exp(-1), rel=1e-12)


def test_ebc_exact_hook():
    med = MediumSpec(0.05)
    v, th = ebc_profile([1.0, 2.0], -1.0, med, 20.0, 5.0, mode="exact", vr=lambda q, r: q + 10 * r)
    assert np.allclose(v, [1.0 + 0.0, 1.5 + 10.0])
    with pytest.raises(ValueError):
        ebc_profile(0.0, 1.0, med, 20.0, 5.0, mode="exact")


def test_first_order_closed_form():
    med = MediumSpec(1 / math.pi ** 0.25)
    assert med.c0_zero() == pytest.approx(1.0, rel=1e-14)
    g = Grid(32, 0.5)
    m = mean_kernel_moments((1, 0), 2.0, 1.0, g, med)
    d = np.diag(m.values) * g.dkappa
    assert np.allclose(np.abs(d), math.exp(-0.5), rtol=1e-14)
    assert np.abs(m.values - np.diag(np.diag(m.values))).max() == 0
    # semigroup form of the first A.15 line
    m2 = mean_kernel_moments((1, 0), 2.0, 1.0 + 1e-3, g, med)
    lam = -1j * g.kappa ** 2 / 4.0 - 4.0 / 8
    ratio = np.diag(m2.values) / np.diag(m.values)
    assert np.max(np.abs(ratio - np.exp(lam * 1e-3))) < 1e-12


def test_reflection_moment_properties():
    g = Grid(32, 0.5)
    m = mean_kernel_moments((0, 1), 5.0, 2.0, g, MediumSpec(0.0), Z0=3.0)
    assert np.allclose(np.abs(np.diag(m.values)), 0.5 / g.dkappa, rtol=1e-13)
    med = MediumSpec(0.1)
    norms = [np.linalg.norm(mean_kernel_moments((0, 1), 5.0, L, g, med, Z0=3.0).values) for L in (0.5, 1.0, 2.0)]
    assert norms[0] > norms[1] > norms[2]
    a = mean_kernel_moments((0, 1), 5.0, 2.0, g, med, Z0=3.0, steps=200).values
    b = mean_kernel_moments((0, 1), 5.0, 2.0, g, med, Z0=3.0, steps=400).values
    assert np.abs(a - b).max() < 1e-8 * np.abs(b).max()
    with pytest.raises(NotImplementedError, match="out of scope"):
        mean_kernel_moments((1, 1), 5.0, 2.0, g, med)


def test_reflected_full_unscattered_diffraction():
    # sigma = 0: V = delta(q), the (r, s) Gaussian integral gives the 2L Fresnel factor
    from paraxia import wigner as w
    med = MediumSpec(0.0, l_x=0.5)
    p = BeamParams(med, 20.0, 2.0, 1.5, Z0=3.0)
    alpha = p.L / (p.k0 * med.l_x ** 2)
    rho = p.r0 / med.l_x
    du = 0.04
    half = int(round(5.0 / du))
    gs = w.WignerGridSpec(np.array([-0.5, 0.0, 0.5]), du * np.arange(-half, half + 1), 0.0, 0.0, 1)
    st = w.vr_integrate_full(gs, alpha, 0.0, med, n_rs=2 * half, window=(half - 1, half - 1))
    tab = w.vr_table(st)
    got = reflected_autocorrelation("full", 0, 0, 0.0, 0.0, p, vr_table=tab)
    a0 = p.L / (p.k0 * p.r0 ** 2)
    assert abs(got / (0.25 / math.sqrt(1 + 16 * a0 ** 2)) - 1) < 1e-6
    assert rho > 1
