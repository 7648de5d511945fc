"""Posterior draws on disk: one CSV row per (chain, draw), constrained scale."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .nuts import PosteriorChains

# parameters stored on the positive scale and sampled on the log scale
POSITIVE = ("sigma_s", "gamma")


class PosteriorFormatError(ValueError):
    pass


def write_posterior(chains: PosteriorChains, path) -> None:
    lines = [",".join(["chain", "draw"] + list(chains.names))]
    for c in range(chains.n_chains):
        for i in range(chains.n_draws):
            vals = ",".join(f"{v:.17g}" for v in chains.constrained[c, i])
            lines.append(f"{c + 1},{i + 1},{vals}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_posterior(path) -> PosteriorChains:
    """Rebuild chains from a posterior CSV; sampler statistics are not stored."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["chain", "draw"] or len(header) < 3:
            raise PosteriorFormatError(f"{path}: missing 'chain,draw,...' header")
        names = header[2:]
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise PosteriorFormatError(f"{path}: line {reader.line_num}: "
                                           f"expected {len(header)} fields")
            try:
                rows.append((int(row[0]), [float(v) for v in row[2:]]))
            except ValueError:
                raise PosteriorFormatError(f"{path}: line {reader.line_num}: "
                                           "unparseable value") from None
    if not rows:
        raise PosteriorFormatError(f"{path}: no posterior draws")
    chain_ids = sorted({c for c, _ in rows})
    per_chain = {c: [v for cc, v in rows if cc == c] for c in chain_ids}
    lengths = {len(v) for v in per_chain.values()}
    if len(lengths) != 1:
        raise PosteriorFormatError(f"{path}: chains have unequal lengths {sorted(lengths)}")
    constrained = np.array([per_chain[c] for c in chain_ids])
    if not np.all(np.isfinite(constrained)):
        raise PosteriorFormatError(f"{path}: non-finite draws")
    draws = constrained.copy()
    for name in POSITIVE:
        if name in names:
            j = names.index(name)
            if np.any(constrained[..., j] <= 0):
                raise PosteriorFormatError(f"{path}: {name} must be positive")
            draws[..., j] = np.log(constrained[..., j])
    m, n, d = draws.shape
    nan = np.full((m, n), math.nan)
    return PosteriorChains(draws, constrained, names,
                           np.zeros((m, n), dtype=int), np.zeros((m, n), dtype=bool),
                           nan, nan.copy(), np.zeros((m, n), dtype=int),
                           np.full(m, math.nan), np.full((m, d), math.nan))
