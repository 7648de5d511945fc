import re

import numpy as np
import pytest

from scourhbm import nuts, plotting, posterior
from scourhbm.anomaly import PredictiveSample


@pytest.fixture(scope="module")
def small_run():
    def target(q):
        return -0.5 * float(q @ q), -q
    return nuts.run(target, np.zeros(4), nuts.SamplerConfig(3, 100, 60, seed=4),
                    names=["mu_s", "sigma_s", "gamma", "s_1"],
                    constrain=lambda u: np.concatenate([u[..., :1], np.exp(u[..., 1:3]),
                                                        u[..., 3:]], axis=-1))


def test_posterior_csv_round_trip(tmp_path, small_run):
    path = tmp_path / "p.csv"
    posterior.write_posterior(small_run, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "chain,draw,mu_s,sigma_s,gamma,s_1"
    assert len(lines) == 1 + 3 * 60
    back = posterior.read_posterior(path)
    assert back.names == small_run.names
    assert np.array_equal(back.constrained, small_run.constrained)
    np.testing.assert_allclose(back.draws, small_run.draws, rtol=1e-15, atol=1e-15)


@pytest.mark.parametrize("text", ["", "chain,draw,mu_s\n", "foo,bar\n1,2\n",
                                  "chain,draw,sigma_s\n1,1,-2\n", "chain,draw,a\n1,1\n"])
def test_bad_posterior_files(tmp_path, text):
    path = tmp_path / "p.csv"
    path.write_text(text)
    with pytest.raises(posterior.PosteriorFormatError):
        posterior.read_posterior(path)


def test_density_panels(small_run):
    panels = plotting.posterior_panels(small_run, {"mu_s": 0.0})
    assert set(panels) == set(small_run.names)
    for name, svg in panels.items():
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        assert len(re.findall(r'class="density"', svg)) == 3
        assert len(re.findall(r'class="truth"', svg)) == (1 if name == "mu_s" else 0)
    assert plotting.posterior_panels(small_run) == plotting.posterior_panels(small_run)


def test_sweep_plot_structure():
    ref = PredictiveSample(3, 0.0, np.random.default_rng(0).normal(0.2436, 5e-5, 500))
    rows = [(0.0, 0.2436), (0.1, 0.2432), (0.2, 0.2429)]
    svg = plotting.sweep_plot(ref, rows)
    assert len(re.findall(r'<path class="density"', svg)) == 1
    assert len(re.findall(r'class="marker"', svg)) == 3


def test_constant_chain_density_does_not_fail():
    y = plotting.density_curve(np.full(10, 2.0), np.linspace(1, 3, 11))
    assert y.max() == 1.0 and y.sum() == 1.0


def test_silverman_bandwidth():
    from scipy.stats import gaussian_kde
    x = np.random.default_rng(1).normal(size=400)
    grid = np.linspace(-3, 3, 50)
    expect = gaussian_kde(x, bw_method="silverman")(grid)
    np.testing.assert_allclose(plotting.density_curve(x, grid), expect, rtol=1e-14)
