import numpy as np
import pytest
from hypothesis import settings

from scourhbm import config, datagen, fem, hbm, nuts, surrogate

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one acceptance criterion's outcome and print it."""
    def _report(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture(scope="session")
def cfg():
    return config.default_config()


@pytest.fixture(scope="session")
def turbine(cfg):
    return cfg.turbine_model()


@pytest.fixture(scope="session")
def fitted(turbine, cfg):
    sc = cfg.surrogate
    return surrogate.fit_surrogate(turbine, sc.domain, sc.n_points, sc.degree)


@pytest.fixture(scope="session")
def generated(turbine):
    return datagen.generate(datagen.GenerativeTruth(), turbine)


@pytest.fixture(scope="session")
def posterior_model(generated, fitted):
    ds, _ = generated
    return hbm.HierarchicalModel(ds, fitted, hbm.HyperPriors())


@pytest.fixture(scope="session")
def pipeline(cfg, generated, fitted, posterior_model):
    """Full default inference run shared by the slow tests."""
    m = posterior_model
    sb = cfg.sampler
    scfg = nuts.SamplerConfig(sb.n_chains, sb.n_warmup, sb.n_samples, sb.target_accept,
                              sb.max_tree_depth, sb.seed, sb.step_size)
    chains = nuts.run(m, m.initial_point, scfg, names=m.names, constrain=m.constrain,
                      inv_metric0=lambda q: nuts.curvature_inv_metric(m, q))
    ds, record = generated
    return {"chains": chains, "dataset": ds, "record": record, "model": m}


def uniform_tube(length=10.0, d=1.0, t=0.02, env=fem.Environment.AIR, mat=None):
    mat = mat or fem.Material(2.1e11, 8.08e10, 7850.0)
    return fem.TubularSegment(length, d, d, t, mat, env)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SMALL_SAMPLER = {"n_chains": 2, "n_warmup": 300, "n_samples": 300}


def _cli_chain(root, config_path):
    from scourhbm import cli
    base = ["--config", str(config_path), "--out", str(root)]
    steps = [
        ["fit-surrogate"],
        ["gen-data"],
        ["infer", "--dataset", str(root / "dataset.csv"),
         "--surrogate", str(root / "surrogate.json")],
        ["scour-sweep", "--posterior", str(root / "posterior.csv"), "--turbine", "3"],
        ["plot", "--posterior", str(root / "posterior.csv"),
         "--truth", str(root / "dataset.truth.json")],
        ["detect", "--posterior", str(root / "posterior.csv"), "--turbine", "3",
         "--observation", "0.2446"],
    ]
    return [cli.main(s[:1] + base + s[1:]) for s in steps]


@pytest.fixture(scope="session")
def cli_runs(tmp_path_factory):
    """The whole CLI pipeline on a reduced sampler config, run twice."""
    import json
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "small.json"
    cfg_path.write_text(json.dumps({"sampler": SMALL_SAMPLER}))
    runs = []
    for name in ("a", "b"):
        out = root / name
        codes = _cli_chain(out, cfg_path)
        runs.append({"dir": out, "codes": codes})
    return {"config": cfg_path, "runs": runs}
