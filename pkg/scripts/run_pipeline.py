"""Run every CLI stage in order into one output directory.

    python scripts/run_pipeline.py --out run/ [--config my.json] [--turbine 3]
"""
import argparse
import sys
import time
from pathlib import Path

from scourhbm import cli


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="run")
    p.add_argument("--config")
    p.add_argument("--turbine", type=int, default=3)
    args = p.parse_args()

    out = Path(args.out)
    base = ["--out", str(out)] + (["--config", args.config] if args.config else [])
    post = str(out / "posterior.csv")
    stages = [
        ["fit-surrogate"],
        ["gen-data"],
        ["infer", "--dataset", str(out / "dataset.csv"), "--surrogate", str(out / "surrogate.json")],
        ["scour-sweep", "--posterior", post, "--turbine", str(args.turbine)],
        ["plot", "--posterior", post, "--truth", str(out / "dataset.truth.json")],
    ]
    for stage in stages:
        t0 = time.perf_counter()
        code = cli.main(stage[:1] + base + stage[1:])
        print(f"[{stage[0]}] exit {code} in {time.perf_counter() - t0:.1f} s")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
