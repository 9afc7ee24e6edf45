import math

import numpy as np
import pytest

from paraxia.ensemble import (EnsembleAccumulator, RunPlan, angular_spectrum_stats,
                              beam_metrics_estimate, estimate_autocorrelation, merge_accumulators,
                              run_ensemble)
from paraxia.medium import MediumSpec
from paraxia.propagator import free_propagate, make_incident_beam
from paraxia.screens import Grid

MED = MediumSpec(0.1, 1.0, 1.0)
G = Grid(64, 0.25)


def _plan(n=100, **kw):
    base = dict(n_realizations=n, master_seed=11, k=10.0, medium=MED, grid=G, L=2.0, n_steps=20,
                beam={"kind": "gaussian", "r0": 1.5}, experiment="both", Z0=2.0, max_lag=4, block_size=25)
    base.update(kw)
    return RunPlan(**base)


def _bytes(acc):
    t = acc.totals()
    return b"".join(getattr(t, f).tobytes() for f in ("field", "intensity", "autocorr", "angular"))


def test_plan_validation():
    with pytest.raises(ValueError):
        _plan(experiment="sideways")
    with pytest.raises(ValueError):
        _plan(max_lag=40)
    with pytest.raises(ValueError):
        _plan(start_index=7)


def test_zero_sigma_mean_is_free():
    p = _plan(n=2, medium=MediumSpec(0.0))
    r = run_ensemble(p)
    mean, _ = r.transmitted.mean_field()
    b = make_incident_beam("gaussian", {"r0": 1.5, "k": 10.0}, G)
    want = p.coeffs.T0 * free_propagate(b.values, G, 10.0, 2.0)
    assert np.allclose(mean, want, rtol=0, atol=1e-14)


def test_energy_audit():
    r = run_ensemble(_plan(n=100))
    assert r.audit.shape == (100, 3)
    assert r.max_energy_defect() < 1e-10


def test_determinism_and_workers():
    a = run_ensemble(_plan(n=60))
    b = run_ensemble(_plan(n=60))
    c = run_ensemble(_plan(n=60), workers=2)
    for x in (b, c):
        assert _bytes(a.transmitted) == _bytes(x.transmitted)
        assert _bytes(a.reflect) == _bytes(x.reflect)
        assert a.audit.tobytes() == x.audit.tobytes()


def test_merge_halves_equals_single_run():
    full = run_ensemble(_plan(n=1000, n_steps=10, L=1.0))
    h1 = run_ensemble(_plan(n=500, n_steps=10, L=1.0))
    h2 = run_ensemble(_plan(n=500, n_steps=10, L=1.0, start_index=500))
    m1 = merge_accumulators(h1.reflect, h2.reflect)
    m2 = merge_accumulators(h2.reflect, h1.reflect)
    assert m1.n == 1000 and m1.indices() == list(range(1000))
    assert _bytes(m1) == _bytes(full.reflect) == _bytes(m2)


def test_merge_identity_and_errors():
    a = run_ensemble(_plan(n=50)).reflect
    empty = EnsembleAccumulator(G, a.max_lag)
    assert _bytes(merge_accumulators(a, empty)) == _bytes(a)
    assert _bytes(merge_accumulators(empty, a)) == _bytes(a)
    with pytest.raises(ValueError):
        merge_accumulators(a, a)
    other = run_ensemble(_plan(n=50, master_seed=12, start_index=50)).reflect
    with pytest.raises(ValueError):
        merge_accumulators(a, other)


def test_autocorrelation_algebra():
    acc = run_ensemble(_plan(n=50)).transmitted
    for x in (-0.5, 0.0, 0.75):
        v0, _ = estimate_autocorrelation(acc, x, 0.0)
        assert v0.imag == 0 and v0.real >= 0
        for y in (0.5, 1.0, 2.0):
            a, sa = estimate_autocorrelation(acc, x, y)
            b, sb = estimate_autocorrelation(acc, x, -y)
            assert a == np.conj(b) and sa == sb
    with pytest.raises(ValueError):
        estimate_autocorrelation(acc, 0.0, 0.25)
    with pytest.raises(ValueError):
        estimate_autocorrelation(acc, 0.1, 0.5)


def test_se_scaling():
    se = []
    ns = (250, 1000, 4000)
    big = run_ensemble(_plan(n=4000, n_steps=10, L=1.0, experiment="transmit", block_size=50))
    for n in ns:
        sub = EnsembleAccumulator(G, 4, "", 50, {b: s for b, s in big.transmitted.blocks.items() if b < n // 50})
        se.append(np.mean(sub.mean_field()[1][28:36]))
    slope = np.polyfit(np.log(ns), np.log(se), 1)[0]
    assert abs(slope + 0.5) < 0.1


def test_metrics_unscattered():
    p = _plan(n=2, medium=MediumSpec(0.0), L=1e-6, n_steps=1, grid=Grid(256, 0.05))
    m = beam_metrics_estimate(run_ensemble(p).transmitted)
    assert m["r_T"] == pytest.approx(1.5, rel=1e-2)


def test_enhancement_unscattered():
    g = Grid(1024, 0.25)
    kin = 8 * g.dkappa
    p = RunPlan(4, 1, 10.0, MediumSpec(0.0), g, 2.0, 4, {"kind": "gaussian", "r0": 2.0, "kappa_inc": kin},
                "reflect", Z0=2.0, max_lag=0)
    st = angular_spectrum_stats(run_ensemble(p).reflect, kin, 3.5 * g.dkappa, with_se=False)
    assert st["enhancement"] == pytest.approx(1.0, abs=1e-6)
