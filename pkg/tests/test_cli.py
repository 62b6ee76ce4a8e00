import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from bhgen.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from bhgen.config import ConfigError, load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_config(tmp_path, **overrides):
    cfg = json.loads((CONFIGS / "fig4.json").read_text())
    cfg["replicates"] = 50
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_malthus_markov(capsys):
    assert main(["malthus", "--config", str(CONFIGS / "markov_exp.json")]) == EXIT_OK
    table = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines() if "=" in line)
    assert float(table["alpha"]) == pytest.approx(1.0, abs=1e-12)
    assert float(table["c"]) == pytest.approx(1.0, abs=1e-12)


def test_malthus_lattice_warning(capsys):
    assert main(["malthus", "--config", str(CONFIGS / "deterministic_gw.json")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "lattice_warning=True" in out
    assert any(line.startswith("WARNING") for line in out.splitlines())


def test_malthus_bcell_golden(capsys):
    main(["malthus", "--config", str(CONFIGS / "fig4.json")])
    table = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    assert float(table["alpha"]) == pytest.approx(0.05142328761091504, abs=1e-10)


def test_ensemble_byte_identical_across_jobs(tmp_path):
    cfg = small_config(tmp_path, replicates=40)
    outs = []
    for jobs, name in ((1, "a"), (4, "b"), (1, "c")):
        assert main(["ensemble", "--config", str(cfg), "--out", str(tmp_path / name), "--jobs", str(jobs)]) == EXIT_OK
        outs.append(tmp_path / name)
    for f in ("trajectories.csv", "estimator.csv", "manifest.json"):
        blobs = {(o / f).read_bytes() for o in outs}
        assert len(blobs) == 1, f


def test_trajectory_csv_format(tmp_path):
    cfg = small_config(tmp_path, replicates=3, observation_times=[0, 12.5, 96])
    main(["ensemble", "--config", str(cfg), "--out", str(tmp_path / "o")])
    rows = read_table(tmp_path / "o" / "trajectories.csv")
    assert list(rows[0]) == ["replicate", "t", "type", "Z", "G", "Zpos", "GB", "GD", "extinct", "capped"]
    assert [r["t"] for r in rows[:3]] == ["0.000000", "12.500000", "96.000000"]
    est = read_table(tmp_path / "o" / "estimator.csv")
    assert list(est[0]) == ["replicate", "t", "type", "avg_gen", "label_est", "w_z", "w_g"]
    assert est[0]["w_g"] == ""  # undefined at t = 0
    for r in est:
        if r["avg_gen"] == "":
            assert float(r["w_z"]) == 0.0  # extinct rows keep empty sentinels, not zeros


def _sweep_gap_medians(out):
    medians = []
    for p in ("0.1", "0.01", "0.001"):
        est = [r for r in read_table(out / f"estimator_p{p}.csv") if r["t"] == "96.000000" and r["label_est"]]
        gaps = [abs(float(r["label_est"]) * 96 - float(r["avg_gen"])) for r in est]
        medians.append(float(np.median(gaps)))
    return medians


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    assert main(["ensemble", "--config", str(CONFIGS / "p_sweep.json"), "--out", str(out)]) == EXIT_OK
    return out


def test_p_sweep_writes_one_pair_per_p(sweep_dir):
    manifest = json.loads((sweep_dir / "manifest.json").read_text())
    assert [f["p"] for f in manifest["files"]] == [0.1, 0.01, 0.001]
    for f in manifest["files"]:
        assert (sweep_dir / f["estimator"]).exists() and (sweep_dir / f["trajectories"]).exists()
    # label loss never changes the population: all three trajectory files share Z and G
    zg = [[(r["Z"], r["G"]) for r in read_table(sweep_dir / f["trajectories"])] for f in manifest["files"]]
    assert zg[0] == zg[1] == zg[2]


@pytest.mark.xfail(strict=True, reason="sampling noise in Zpos grows like 1/sqrt(p Z) and swamps the O(p) bias "
                                       "for p <= 0.01 at desk-scale populations")
def test_p_sweep_realised_gap_decreases(sweep_dir):
    m = _sweep_gap_medians(sweep_dir)
    assert m[0] > m[1] > m[2]


def test_p_sweep_bias_decreases_with_p():
    """The O(p) bias itself, free of label noise: use E(Zpos/Z | tree) in place of Zpos/Z."""
    from bhgen.distributions import RngStream
    from bhgen.engine import expected_label_fraction, simulate
    from bhgen.estimator import label_estimate_from_fraction
    from bhgen.presets import single_type_spec

    spec = single_type_spec(initial_count=100)
    gaps = {p: [] for p in (0.1, 0.01, 0.001)}
    for idx in range(10):
        s = simulate(spec, RngStream(11, idx), [96.0], keep_generations=True).snapshots[-1]
        for p in gaps:
            est = label_estimate_from_fraction(expected_label_fraction(s, p), p, 96.0)
            gaps[p].append(abs(est * 96 - s.G[0] / s.Z[0]))
    m = [float(np.median(gaps[p])) for p in (0.1, 0.01, 0.001)]
    assert m[0] > m[1] > m[2]


def test_hundred_cell_estimator_tracks_average_generation(tmp_path):
    out = tmp_path / "fig10b"
    assert main(["ensemble", "--config", str(CONFIGS / "fig10b_100cells.json"), "--out", str(out)]) == EXIT_OK
    est = [r for r in read_table(out / "estimator.csv") if r["t"] == "96.000000" and r["type"] == "2"]
    assert len(est) == 10
    rel = [abs(float(r["label_est"]) * 96 / float(r["avg_gen"]) - 1) for r in est]
    assert np.median(rel) <= 0.2


def test_oracle_markov(tmp_path):
    out = tmp_path / "oracle.csv"
    assert main(["oracle", "--config", str(CONFIGS / "markov_exp.json"), "--out", str(out)]) == EXIT_OK
    rows = [r for r in read_table(out) if r["moment_id"] == "EZ"]
    t = np.array([float(r["t"]) for r in rows])
    v = np.array([float(r["value"]) for r in rows])
    assert np.max(np.abs(v / np.exp(t) - 1)) <= 1e-3


def test_oracle_bcell_grid_ids(tmp_path):
    out = tmp_path / "oracle.csv"
    assert main(["oracle", "--config", str(CONFIGS / "fig4.json"), "--out", str(out), "--dt", "0.1"]) == EXIT_OK
    assert {r["moment_id"] for r in read_table(out)} == {"EZ", "EG", "EZ2", "EGZ", "EG2"}


def test_oracle_resolution_error(tmp_path, capsys):
    code = main(["oracle", "--config", str(CONFIGS / "fig4.json"), "--out", str(tmp_path / "o.csv"), "--dt", "1.0"])
    assert code == EXIT_USAGE
    assert "resolve" in capsys.readouterr().err


@pytest.fixture(scope="module")
def verified_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("verify")
    cfg = base / "cfg.json"
    cfg.write_text((CONFIGS / "fig4.json").read_text())
    assert main(["ensemble", "--config", str(cfg), "--out", str(base / "ens")]) == EXIT_OK
    assert main(["oracle", "--config", str(cfg), "--out", str(base / "oracle.csv")]) == EXIT_OK
    return base


def test_verify_passes_on_matching_inputs(verified_run):
    assert main(["verify", str(verified_run / "ens"), str(verified_run / "oracle.csv")]) == EXIT_OK
    verdict = json.loads((verified_run / "ens" / "verdict.json").read_text())
    assert verdict["all_pass"]
    names = {c["name"] for c in verdict["criteria"]}
    assert {"pearson_wz_wg_type1", "ks_wz_wg_type1", "w_z1_mean_t96"} <= names


def test_verify_negative_control_wrong_alpha(verified_run, tmp_path):
    bad = tmp_path / "bad"
    shutil.copytree(verified_run / "ens", bad)
    manifest = json.loads((bad / "manifest.json").read_text())
    manifest["constants"]["alpha"] *= 1.02
    (bad / "manifest.json").write_text(json.dumps(manifest))
    assert main(["verify", str(bad), str(verified_run / "oracle.csv")]) == EXIT_FAIL
    verdict = json.loads((bad / "verdict.json").read_text())
    failed = {c["name"] for c in verdict["criteria"] if not c["pass"]}
    assert "w_z1_mean_t96" in failed


def test_verify_hash_mismatch(verified_run, tmp_path, capsys):
    other = tmp_path / "markov.csv"
    main(["oracle", "--config", str(CONFIGS / "markov_exp.json"), "--out", str(other)])
    assert main(["verify", str(verified_run / "ens"), str(other)]) == EXIT_USAGE
    assert "does not match" in capsys.readouterr().err


def test_figures_small_scale(tmp_path, capsys):
    assert main(["figures", "--out", str(tmp_path), "--scale", "0.05", "--only", "fig2", "fig3"]) == EXIT_OK
    names = {p.name for p in tmp_path.iterdir()}
    assert {"fig2a.csv", "fig2b.csv", "fig3a.csv", "fig3b.csv", "fig3c.csv"} <= names
    assert main(["figures", "--out", str(tmp_path), "--only", "fig99"]) == EXIT_USAGE


# --- config validation -------------------------------------------------------

def base_config():
    return json.loads((CONFIGS / "fig4.json").read_text())


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["process"].update(typo=1),
    lambda d: d.update(version=2),
    lambda d: d.update(replicates=0),
    lambda d: d.update(observation_times=[5, 2]),
    lambda d: d["process"].update(p_label_loss=2.0),
    lambda d: d["process"].update(offspring_type1={"pmf": {"0": 0.5, "2": 0.6}}),
    lambda d: d["process"].update(lifetime={"kind": "weibull", "shape": 2}),
    lambda d: d.update(p_sweep=[0.1, 1.5]),
])
def test_config_rejects(mutate):
    d = base_config()
    mutate(d)
    with pytest.raises(ConfigError):
        load_config(d)


def test_config_forms():
    cfg = load_config(CONFIGS / "fig9_alpha2_less.json")
    assert cfg.process.n_types == 2 and cfg.process.offspring_type1.is_pair
    d = base_config()
    d["observation_times"] = {"t_max": 96, "n_points": 4}
    assert load_config(d).observation_times == [24.0, 48.0, 72.0, 96.0]
    d["process"]["offspring_type1"] = {"support": [0, 2], "probs": [0.2, 0.8]}
    assert load_config(d).process.offspring_type1.moments() == pytest.approx((1.6, 1.6))
    assert load_config(json.dumps(base_config())).replicates == 1000


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["malthus"]) == EXIT_USAGE
    assert main(["malthus", "--config", "/no/such/file.json"]) == EXIT_USAGE
