import json

import numpy as np
import pytest

from paraxia import cli_io
from paraxia.cli_io import (ArtifactError, ConfigError, config_from_dict, derived_groups, execute_command,
                            load_config, main, read_artifacts, write_artifacts)


def _cfg(**over):
    d = {"medium": {"family": "gaussian", "sigma": 0.05, "l_z": 1.0, "l_x": 1.0},
         "slab": {"L": 4.0, "n_steps": 10},
         "beam": {"kind": "gaussian", "r0": 2.0, "k0": 10.0},
         "grid": {"d": 1, "n": 64, "width": 32.0},
         "mc": {"n_realizations": 2, "seed": 11}}
    for k, v in over.items():
        d[k] = {**d.get(k, {}), **v}
    return d


def _write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


def test_config_round_trip_and_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, _cfg()))
    assert cfg.outputs.mask is False and cfg.outputs.dump_screens is False
    again = config_from_dict(json.loads(json.dumps(cfg.model_dump(mode="json"))))
    assert again == cfg


def test_config_errors_name_the_field(tmp_path):
    with pytest.raises(ConfigError, match=r"medium\.sigma"):
        load_config(_write(tmp_path, _cfg(medium={"sigma": -0.1})))
    with pytest.raises(ConfigError, match=r"beam\.colour"):
        config_from_dict(_cfg(beam={"colour": "red"}))
    with pytest.raises(ConfigError, match=r"slab\.n_steps"):
        config_from_dict(_cfg(slab={"n_steps": 0}))
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


def test_manifest_echoes_groups(tmp_path):
    d = _cfg(medium={"sigma": 0.1, "l_x": 0.5}, slab={"L": 10.0}, beam={"k0": 50.0, "r0": 4.0},
             grid={"n": 256, "width": 64.0})
    cfg = config_from_dict(d)
    g, warn = derived_groups(cfg)
    assert g["beta"] == pytest.approx(62.5, rel=1e-12)
    assert g["alpha"] == pytest.approx(0.8, rel=1e-12)
    assert g["alpha0"] == pytest.approx(0.0125, rel=1e-12)
    assert any("asymptotics inapplicable" in w for w in warn)
    status, out = execute_command("theory", cfg, {"out": tmp_path / "th"})
    assert status == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["groups"]["beta"] == pytest.approx(62.5) and man["groups"]["alpha"] == pytest.approx(0.8)
    assert man["groups"]["alpha0"] == pytest.approx(0.0125)
    assert (out / "ebc_profile.csv").exists()


def test_round_trip_bit_identical_and_length_law(tmp_path):
    cfg = config_from_dict(_cfg())
    status, out = execute_command("run-transmit", cfg, {"out": tmp_path / "r"})
    assert status == 0
    man, arr = read_artifacts(out)
    for name, e in man["arrays"].items():
        size = (tmp_path / "r" / e["file"]).stat().st_size
        per = 16 if e["dtype"] == "complex128" else 8
        assert int(np.prod(e["shape"])) * per == size
    m2 = write_artifacts(tmp_path / "copy", {k: v for k, v in man.items() if k != "arrays"}, arr)
    _, arr2 = read_artifacts(tmp_path / "copy")
    for k in arr:
        assert arr[k].tobytes() == arr2[k].tobytes()
        assert m2["arrays"][k]["shape"] == man["arrays"][k]["shape"]
    assert np.iscomplexobj(arr["transmit_mean_field"])
    raw = (out / "transmit_mean_field.bin").read_bytes()
    re0 = np.frombuffer(raw[:8], "<f8")[0]
    assert re0 == arr["transmit_mean_field"].ravel()[0].real


def test_truncated_array_named(tmp_path):
    write_artifacts(tmp_path, {"command": "x"}, {"alpha_field": np.ones(4, complex), "b": np.zeros(3)})
    f = tmp_path / "alpha_field.bin"
    f.write_bytes(f.read_bytes()[:-3])
    with pytest.raises(ArtifactError, match="alpha_field"):
        read_artifacts(tmp_path)
    with pytest.raises(ArtifactError):
        read_artifacts(tmp_path / "nowhere")


def _bytes(d):
    man = json.loads((d / "manifest.json").read_text())
    return {n: (d / e["file"]).read_bytes() for n, e in man["arrays"].items()}, man


def test_determinism_across_runs_and_workers(tmp_path):
    cfg = config_from_dict(_cfg(mc={"n_realizations": 6}))
    execute_command("run-reflect", cfg, {"out": tmp_path / "a", "seed": 5})
    execute_command("run-reflect", cfg, {"out": tmp_path / "b", "seed": 5})
    execute_command("run-reflect", cfg, {"out": tmp_path / "c", "seed": 5, "workers": 2})
    ba, ma = _bytes(tmp_path / "a")
    for other in ("b", "c"):
        bo, mo = _bytes(tmp_path / other)
        assert ba == bo
        ma2 = {k: v for k, v in ma.items() if k != "wall_clock"}
        mo2 = {k: v for k, v in mo.items() if k != "wall_clock"}
        assert ma2 == mo2
    execute_command("run-reflect", cfg, {"out": tmp_path / "d", "seed": 6})
    assert _bytes(tmp_path / "d")[0] != ba


def test_seed_precedence(tmp_path, monkeypatch):
    cfg = config_from_dict(_cfg())
    monkeypatch.setenv("PARAXIA_SEED", "99")
    execute_command("run-transmit", cfg, {"out": tmp_path / "env"})
    assert json.loads((tmp_path / "env" / "manifest.json").read_text())["run"]["seed"] == 99
    execute_command("run-transmit", cfg, {"out": tmp_path / "flag", "seed": 3})
    assert json.loads((tmp_path / "flag" / "manifest.json").read_text())["run"]["seed"] == 3
    monkeypatch.delenv("PARAXIA_SEED")
    execute_command("run-transmit", cfg, {"out": tmp_path / "cfg"})
    assert json.loads((tmp_path / "cfg" / "manifest.json").read_text())["run"]["seed"] == 11


def test_validate_sigma_zero_passes(tmp_path, capsys):
    p = _write(tmp_path, _cfg(medium={"sigma": 0.0}, boundary={"Z0": 2.0}))
    assert main(["validate", "--config", str(p), "--out", str(tmp_path / "v")]) == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text and text.count("PASS") >= 4


def test_compare_pure_and_exit_codes(tmp_path, capsys):
    p = _write(tmp_path, _cfg(mc={"n_realizations": 20}))
    run = tmp_path / "run"
    assert main(["run-transmit", "--config", str(p), "--out", str(run)]) == 0
    assert main(["compare", "--out", str(run)]) == 0
    first = (run / "compare.csv").read_bytes()
    assert main(["compare", "--out", str(run)]) == 0
    assert (run / "compare.csv").read_bytes() == first
    assert first.count(b"\r\n") >= 2 and b"mean-field damping" in first
    # a transmit-only run has no reflected energy: no energy row even with R0 != 0
    tz = _write(tmp_path, _cfg(boundary={"Z0": 3.0}, mc={"n_realizations": 20}), "tz.json")
    assert main(["run-transmit", "--config", str(tz), "--out", str(tmp_path / "tz")]) == 0
    assert main(["compare", "--out", str(tmp_path / "tz")]) == 0
    assert np.isnan(read_artifacts(tmp_path / "tz")[1]["audit"][:, 2]).all()
    assert b"energy" not in (tmp_path / "tz" / "compare.csv").read_bytes()
    # break energy conservation in the stored audit: compare must fail with status 2
    run = tmp_path / "refl"
    assert main(["run-reflect", "--config", str(p), "--out", str(run)]) == 0
    assert main(["compare", "--out", str(run)]) == 0
    man, arr = read_artifacts(run)
    arr["audit"][0, 1] *= 1.01
    write_artifacts(run, {k: v for k, v in man.items() if k != "arrays"}, arr)
    assert main(["compare", "--out", str(run)]) == 2
    # runtime errors exit 1
    assert main(["compare", "--out", str(tmp_path / "missing")]) == 1
    bad = _write(tmp_path, _cfg(medium={"sigma": -1.0}), "bad.json")
    assert main(["run-transmit", "--config", str(bad)]) == 1
    assert "medium.sigma" in capsys.readouterr().err


def test_realizations_flag_and_dump(tmp_path):
    p = _write(tmp_path, _cfg(outputs={"dump_screens": True}))
    assert main(["run-reflect", "--config", str(p), "--out", str(tmp_path / "o"), "--realizations", "3"]) == 0
    man, arr = read_artifacts(tmp_path / "o")
    assert man["run"]["n_realizations"] == 3 and arr["audit"].shape == (3, 3)
    assert arr["screens_0"].shape == (10, 64)


def test_wigner_command(tmp_path):
    cfg = config_from_dict(_cfg(medium={"sigma": 0.3}))
    status, out = execute_command("wigner", cfg, {"out": tmp_path / "w"})
    assert status == 0
    man, arr = read_artifacts(out)
    assert {"q", "reduced_r0", "closed_r2", "decay", "full_r1_s1"} <= set(arr)
    _, rows = cli_io.read_csv(out / "wigner.csv")
    assert all(float(r[2]) < 1e-3 for r in rows if r[0] == "reduced_vs_closed")
