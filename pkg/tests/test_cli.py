import csv
import json
import math
import re

import pytest

from scourhbm import cli, fem, posterior


def out_args(tmp_path, *extra, cfg=None):
    args = ["--out", str(tmp_path)]
    if cfg is not None:
        args += ["--config", str(cfg)]
    return args + list(extra)


def write_cfg(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def test_pipeline_exit_codes(cli_runs):
    for run in cli_runs["runs"]:
        assert run["codes"] == [0, 0, 0, 0, 0, 0]


def test_resolved_config_echo(cli_runs):
    out = cli_runs["runs"][0]["dir"]
    echo = json.loads((out / "config.resolved.json").read_text())
    assert echo["sampler"]["n_chains"] == 2 and echo["surrogate"]["degree"] == 5


def test_fit_surrogate_outputs(cli_runs):
    out = cli_runs["runs"][0]["dir"]
    s = json.loads((out / "surrogate.json").read_text())
    assert len(s["coefficients"]) == 6
    report = json.loads((out / "fit_report.json").read_text())
    assert report["max_rel"] < 1e-4


def test_gen_data_rows(cli_runs):
    out = cli_runs["runs"][0]["dir"]
    rows = list(csv.DictReader((out / "dataset.csv").open()))
    assert len(rows) == 42
    counts = [sum(r["turbine_id"] == str(k) for r in rows) for k in range(1, 6)]
    assert counts == [10, 10, 10, 10, 2]


def test_infer_outputs(cli_runs):
    out = cli_runs["runs"][0]["dir"]
    chains = posterior.read_posterior(out / "posterior.csv")
    assert chains.draws.shape == (2, 300, 8)
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["rhat_available"] is True and len(diag["step_size"]) == 2
    assert set(diag["rhat"]) == set(chains.names)
    assert diag["out_of_domain_warnings"] >= 0


def test_sweep_outputs(cli_runs):
    out = cli_runs["runs"][0]["dir"]
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert [float(r["scour_depth_m"]) for r in rows] == [0.0, 0.1, 0.2, 0.3, 0.4]
    means = [float(r["mean_frequency_hz"]) for r in rows]
    assert all(a >= b for a, b in zip(means, means[1:]))
    svg = (out / "sweep.svg").read_text()
    assert len(re.findall(r'<path class="density"', svg)) == 1
    assert len(re.findall(r'class="marker"', svg)) == 5
    verdicts = json.loads((out / "sweep_verdicts.json").read_text())
    assert verdicts[0]["verdict"] == "Normal"


def test_plot_panels(cli_runs):
    out = cli_runs["runs"][0]["dir"]
    panels = sorted(out.glob("density_*.svg"))
    assert len(panels) == 8
    for p in panels:
        svg = p.read_text()
        assert len(re.findall(r'class="density"', svg)) == 2
        assert len(re.findall(r'class="truth"', svg)) == 1


def test_plot_without_truth(cli_runs, tmp_path):
    post = cli_runs["runs"][0]["dir"] / "posterior.csv"
    code = cli.main(["plot", "--posterior", str(post), "--truth", str(tmp_path / "none.json"),
                     "--out", str(tmp_path)])
    assert code == 0
    svg = (tmp_path / "density_mu_s.svg").read_text()
    assert "truth" not in svg


def test_plot_empty_posterior_is_usage_error(tmp_path):
    p = tmp_path / "posterior.csv"
    p.write_text("")
    assert cli.main(["plot", "--posterior", str(p), "--out", str(tmp_path)]) == 2


def test_detect_median_and_scoured(cli_runs, tmp_path):
    run = cli_runs["runs"][0]["dir"]
    post = run / "posterior.csv"
    chains = posterior.read_posterior(post)
    k3 = math.exp(float(chains.param("s_3").mean()))
    model = cli.config.default_config().turbine_model()
    f0 = fem.first_bending_frequency(model, k3)
    f40 = fem.first_bending_frequency(model, k3, 0.4)
    assert cli.main(["detect", "--posterior", str(post), "--turbine", "3",
                     "--observation", repr(f0), "--out", str(tmp_path)]) == 0
    assert cli.main(["detect", "--posterior", str(post), "--turbine", "3",
                     "--observation", repr(f40), "--out", str(tmp_path)]) == 3
    v = json.loads((tmp_path / "verdict.json").read_text())
    assert v["verdict"] == "Anomalous"


def test_detect_bad_turbine(cli_runs, tmp_path):
    post = cli_runs["runs"][0]["dir"] / "posterior.csv"
    assert cli.main(["detect", "--posterior", str(post), "--turbine", "99",
                     "--observation", "0.24", "--out", str(tmp_path)]) == 2


def test_single_depth_sweep(cli_runs, tmp_path):
    post = cli_runs["runs"][0]["dir"] / "posterior.csv"
    cfg = write_cfg(tmp_path, {"anomaly": {"depths": [0.0]}})
    assert cli.main(["scour-sweep", "--posterior", str(post), "--turbine", "1"]
                    + out_args(tmp_path, cfg=cfg)) == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert len(rows) == 1 and rows[0]["n_samples"] == "5"


def test_single_chain_marks_rhat_unavailable(cli_runs, tmp_path):
    run = cli_runs["runs"][0]["dir"]
    cfg = write_cfg(tmp_path, {"sampler": {"n_chains": 1, "n_warmup": 100, "n_samples": 50}})
    code = cli.main(["infer", "--dataset", str(run / "dataset.csv"),
                     "--surrogate", str(run / "surrogate.json")] + out_args(tmp_path, cfg=cfg))
    assert code == 0
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["rhat_available"] is False


def test_narrow_surrogate_domain_reports_warnings(cli_runs, tmp_path):
    run = cli_runs["runs"][0]["dir"]
    cfg = write_cfg(tmp_path, {"surrogate": {"domain": [2.0e7, 2.2e7], "n_points": 10},
                               "sampler": {"n_chains": 1, "n_warmup": 50, "n_samples": 20}})
    assert cli.main(["fit-surrogate"] + out_args(tmp_path, cfg=cfg)) == 0
    cli.main(["infer", "--dataset", str(run / "dataset.csv"),
              "--surrogate", str(tmp_path / "surrogate.json")] + out_args(tmp_path, cfg=cfg))
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["out_of_domain_warnings"] > 0


def test_gen_data_single_observation(tmp_path):
    cfg = write_cfg(tmp_path, {"truth": {"n_obs": [1]}})
    assert cli.main(["gen-data"] + out_args(tmp_path, cfg=cfg)) == 0
    lines = (tmp_path / "dataset.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("1,1,")


def test_gen_data_seed_override(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d, seed in ((a, "7"), (b, "7"), (c, "8")):
        assert cli.main(["gen-data", "--out", str(d), "--seed", seed]) == 0
    assert (a / "dataset.csv").read_bytes() == (b / "dataset.csv").read_bytes()
    assert (a / "dataset.csv").read_bytes() != (c / "dataset.csv").read_bytes()


def test_degree_zero_surrogate(tmp_path):
    cfg = write_cfg(tmp_path, {"surrogate": {"degree": 0, "n_points": 8}})
    assert cli.main(["fit-surrogate"] + out_args(tmp_path, cfg=cfg)) == 0
    s = json.loads((tmp_path / "surrogate.json").read_text())
    assert len(s["coefficients"]) == 1


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["infer"],
    ["gen-data", "--seed", "-1"],
    ["gen-data", "--seed", str(2**64)],
    ["detect", "--posterior", "x.csv", "--turbine", "1", "--observation", "abc"],
])
def test_usage_errors(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv else argv) == 2


def test_invalid_domain_config(tmp_path):
    cfg = write_cfg(tmp_path, {"surrogate": {"domain": [5e7, 1e7]}})
    assert cli.main(["fit-surrogate"] + out_args(tmp_path, cfg=cfg)) == 2


def test_missing_input_file(tmp_path):
    assert cli.main(["infer", "--dataset", str(tmp_path / "no.csv"),
                     "--surrogate", str(tmp_path / "no.json"), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_code(cli_runs, tmp_path, monkeypatch):
    run = cli_runs["runs"][0]["dir"]

    def boom(*a, **k):
        raise cli.nuts.SamplingError("chain 0: all warm-up transitions diverged")
    monkeypatch.setattr(cli.nuts, "run", boom)
    code = cli.main(["infer", "--dataset", str(run / "dataset.csv"),
                     "--surrogate", str(run / "surrogate.json"), "--out", str(tmp_path)])
    assert code == 4
