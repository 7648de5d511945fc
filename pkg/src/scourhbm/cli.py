"""Batch command-line front end.

Stages talk to each other only through files::

    scourhbm fit-surrogate --out run/
    scourhbm gen-data      --out run/
    scourhbm infer         --dataset run/dataset.csv --surrogate run/surrogate.json --out run/
    scourhbm scour-sweep   --posterior run/posterior.csv --turbine 3 --out run/
    scourhbm detect        --posterior run/posterior.csv --turbine 3 --observation 0.2431 --out run/
    scourhbm plot          --posterior run/posterior.csv --truth run/dataset.truth.json --out run/

Exit codes: 0 success (or Normal verdict), 2 usage/validation error,
3 Anomalous verdict, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import anomaly, config, datagen, diagnostics, hbm, nuts, plotting, posterior, surrogate

EXIT_OK, EXIT_USAGE, EXIT_ANOMALOUS, EXIT_NUMERICAL = 0, 2, 3, 4


class UsageError(ValueError):
    pass


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _prepare(args, seed_block: str | None = None):
    """Load config, apply ``--seed``, create ``--out`` and echo the resolved config."""
    cfg = config.load_config(args.config)
    if args.seed is not None and seed_block is not None:
        block = dataclasses.replace(getattr(cfg, seed_block), seed=args.seed)
        cfg = dataclasses.replace(cfg, **{seed_block: block})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config.dump_config(cfg, out / "config.resolved.json")
    return cfg, out


def _truth(cfg: config.RunConfig) -> datagen.GenerativeTruth:
    t = cfg.truth
    return datagen.GenerativeTruth(t.mu, t.sigma, t.spread_fraction, t.noise_sd, t.n_obs,
                                   t.seed, cfg.surrogate.domain)


def _hyperpriors(cfg: config.RunConfig) -> hbm.HyperPriors:
    return hbm.HyperPriors(**dataclasses.asdict(cfg.hyperpriors))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_fit_surrogate(args) -> int:
    cfg, out = _prepare(args)
    sc = cfg.surrogate
    s = surrogate.fit_surrogate(cfg.turbine_model(), sc.domain, sc.n_points, sc.degree)
    s.save(out / "surrogate.json")
    _dump(s.fit_report, out / "fit_report.json")
    print(f"surrogate degree {s.degree}: validation max relative residual "
          f"{s.fit_report['max_rel']:.3g}")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    cfg, out = _prepare(args, "truth")
    ds, record = datagen.generate(_truth(cfg), cfg.turbine_model())
    path = out / "dataset.csv"
    datagen.write_dataset(ds, path)
    datagen.write_truth(record, datagen.truth_path(path))
    print(f"{ds.total} observations over {ds.K} turbines -> {path}")
    for note in record.domain_warnings:
        print(f"warning: {note}", file=sys.stderr)
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg, out = _prepare(args, "sampler")
    ds = datagen.read_dataset(args.dataset)
    sur = surrogate.PolySurrogate.load(args.surrogate)
    model = hbm.HierarchicalModel(ds, sur, _hyperpriors(cfg))
    sb = cfg.sampler
    scfg = nuts.SamplerConfig(sb.n_chains, sb.n_warmup, sb.n_samples, sb.target_accept,
                              sb.max_tree_depth, sb.seed, sb.step_size)
    chains = nuts.run(model, model.initial_point, scfg, names=model.names,
                      constrain=model.constrain,
                      inv_metric0=lambda q: nuts.curvature_inv_metric(model, q))
    posterior.write_posterior(chains, out / "posterior.csv")
    summ = diagnostics.summary(chains)
    diag = {
        "step_size": [float(x) for x in chains.step_size],
        "divergences": [int(x) for x in chains.divergent.sum(axis=1)],
        "accept_stat_mean": [float(x) for x in chains.accept_stat.mean(axis=1)],
        "rhat_available": chains.n_chains >= 2,
        "rhat": summ["rhat"],
        "ess": summ["ess"],
        "out_of_domain_warnings": int(sur.out_of_domain.value),
    }
    _dump(diag, out / "diagnostics.json")
    worst = max(summ["rhat"].values()) if diag["rhat_available"] else None
    print(f"{chains.n_chains} x {chains.n_draws} draws, "
          f"{sum(diag['divergences'])} divergent, max R-hat "
          f"{'n/a' if worst is None else f'{worst:.4f}'}")
    if diag["out_of_domain_warnings"]:
        print(f"warning: {diag['out_of_domain_warnings']} surrogate evaluations outside "
              f"the fit domain {sur.domain}", file=sys.stderr)
    return EXIT_OK


def _reference(cfg, chains, k, args):
    total = chains.n_chains * chains.n_draws
    n = min(cfg.anomaly.predictive_draws, total)
    return anomaly.posterior_predictive(chains, k, cfg.turbine_model(), 0.0, n,
                                        cfg.anomaly.include_noise,
                                        seed=0 if args.seed is None else args.seed)


def cmd_detect(args) -> int:
    cfg, out = _prepare(args)
    chains = posterior.read_posterior(args.posterior)
    ref = _reference(cfg, chains, args.turbine, args)
    verdict = anomaly.detect(args.observation, ref, cfg.anomaly.mass)
    anomaly.write_verdict(verdict, out / "verdict.json")
    lo, hi = verdict.hdi
    print(f"{verdict.verdict.value}: {args.observation:.8g} Hz vs "
          f"{verdict.mass:g} HDI [{lo:.8g}, {hi:.8g}]")
    return EXIT_ANOMALOUS if verdict.anomalous else EXIT_OK


def cmd_scour_sweep(args) -> int:
    cfg, out = _prepare(args)
    chains = posterior.read_posterior(args.posterior)
    model = cfg.turbine_model()
    a = cfg.anomaly
    rows = anomaly.scour_sweep(chains, args.turbine, model, a.depths, a.n_samples)
    anomaly.write_sweep(rows, a.n_samples, out / "sweep.csv")
    ref = _reference(cfg, chains, args.turbine, args)
    verdicts = [dict(scour_depth_m=d, **anomaly.detect(m, ref, a.mass).to_dict())
                for d, m in rows]
    _dump(verdicts, out / "sweep_verdicts.json")
    svg = plotting.sweep_plot(ref, rows, f"turbine {args.turbine}: scour sweep")
    (out / "sweep.svg").write_text(svg)
    for v in verdicts:
        print(f"{v['scour_depth_m']:.2f} m  {v['observed_hz']:.8f} Hz  {v['verdict']}")
    return EXIT_OK


def cmd_plot(args) -> int:
    out = Path(args.out)
    chains = posterior.read_posterior(args.posterior)
    truth = None
    if args.truth and Path(args.truth).exists():
        truth = datagen.read_truth(args.truth).expected_values()
    out.mkdir(parents=True, exist_ok=True)
    if args.config is not None:
        config.dump_config(config.load_config(args.config), out / "config.resolved.json")
    for name, svg in plotting.posterior_panels(chains, truth).items():
        (out / f"density_{name}.svg").write_text(svg)
    print(f"{len(chains.names)} density panels -> {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (default: shipped defaults)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=_seed, help="override the seed of this stage")

    p = argparse.ArgumentParser(prog="scourhbm", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("fit-surrogate", parents=[common], help="fit the FE surrogate")
    sub.add_parser("gen-data", parents=[common], help="generate the synthetic dataset")

    q = sub.add_parser("infer", parents=[common], help="sample the hierarchical posterior")
    q.add_argument("--dataset", required=True)
    q.add_argument("--surrogate", required=True)

    q = sub.add_parser("detect", parents=[common], help="classify one observed frequency")
    q.add_argument("--posterior", required=True)
    q.add_argument("--observation", type=float, required=True, help="frequency in Hz")
    q.add_argument("--turbine", type=int, required=True, help="1-based turbine index")

    q = sub.add_parser("scour-sweep", parents=[common], help="mean frequency against scour")
    q.add_argument("--posterior", required=True)
    q.add_argument("--turbine", type=int, required=True)

    q = sub.add_parser("plot", parents=[common], help="per-parameter posterior densities")
    q.add_argument("--posterior", required=True)
    q.add_argument("--truth", help="*.truth.json for dashed generating-value lines")
    return p


COMMANDS = {
    "fit-surrogate": cmd_fit_surrogate,
    "gen-data": cmd_gen_data,
    "infer": cmd_infer,
    "detect": cmd_detect,
    "scour-sweep": cmd_scour_sweep,
    "plot": cmd_plot,
}

NUMERICAL = (nuts.SamplingError, surrogate.FitError, FloatingPointError, np.linalg.LinAlgError,
             ArithmeticError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except NUMERICAL as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
