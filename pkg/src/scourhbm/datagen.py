"""Synthetic population of first-bending-frequency observations.

Every observation goes through the FE model, never the surrogate, so the
inference stage sees the surrogate's approximation error as it would on
real data.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import fem
from .hbm import Dataset, lognormal_params, param_names

CSV_HEADER = ("turbine_id", "obs_id", "frequency_hz")


class DatasetFormatError(ValueError):
    pass


class DomainWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GenerativeTruth:
    """Population-level generating values.

    Turbine ``k`` gets a latent mean stiffness ``mu_k`` drawn log-normally
    with mean ``mu`` and sd ``sigma``; its ``n_obs[k]`` stiffness
    realisations are ``Normal(mu_k, (spread_fraction * sigma)^2)``.
    """

    mu: float = 2.5e7
    sigma: float = 2.5e6
    spread_fraction: float = 0.05
    noise_sd: float = 1e-4
    n_obs: tuple[int, ...] = (10, 10, 10, 10, 2)
    seed: int = 2023
    domain: tuple[float, float] = (1e7, 5e7)

    def __post_init__(self):
        object.__setattr__(self, "n_obs", tuple(int(n) for n in self.n_obs))
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.sigma < 0 or self.spread_fraction < 0 or self.noise_sd < 0:
            raise ValueError("sigma, spread_fraction and noise_sd must be non-negative")
        if not self.n_obs or min(self.n_obs) < 1:
            raise ValueError("every turbine needs at least one observation")
        lo, hi = self.domain
        if not (lo <= self.mu - 3 * self.sigma and self.mu + 3 * self.sigma <= hi):
            raise ValueError(f"mu +- 3 sigma = [{self.mu - 3 * self.sigma:.4g}, "
                             f"{self.mu + 3 * self.sigma:.4g}] leaves the domain {self.domain}")

    @property
    def K(self) -> int:
        return len(self.n_obs)

    @property
    def spread_sd(self) -> float:
        return self.spread_fraction * self.sigma


@dataclass(frozen=True)
class GroundTruthRecord:
    """Latent quantities behind a generated dataset, kept for scoring."""

    truth: GenerativeTruth
    latent_means: tuple[float, ...]
    stiffness: tuple[tuple[float, ...], ...]
    noiseless: tuple[tuple[float, ...], ...]
    n_rejected: int = 0
    domain_warnings: tuple[str, ...] = field(default_factory=tuple)

    def expected_values(self) -> dict:
        """Generating values on the inference model's parameter scale."""
        out = {"mu_s": self.truth.mu, "sigma_s": self.truth.sigma, "gamma": self.truth.noise_sd}
        for name, m in zip(param_names(self.truth.K)[3:], self.latent_means):
            out[name] = math.log(m)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["expected_values"] = self.expected_values()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthRecord":
        t = dict(d["truth"])
        t["n_obs"] = tuple(t["n_obs"])
        t["domain"] = tuple(t["domain"])
        return cls(GenerativeTruth(**t), tuple(d["latent_means"]),
                   tuple(tuple(x) for x in d["stiffness"]),
                   tuple(tuple(x) for x in d["noiseless"]),
                   int(d["n_rejected"]), tuple(d["domain_warnings"]))


def _positive_normal(rng, mean, sd, n):
    """``n`` Normal draws conditioned on being positive, by rejection."""
    out = np.empty(n)
    rejected = 0
    for i in range(n):
        x = rng.normal(mean, sd)
        while x <= 0:
            rejected += 1
            x = rng.normal(mean, sd)
        out[i] = x
    return out, rejected


def sample_stiffness(truth: GenerativeTruth):
    """``(latent_means, realisations per turbine, n_rejected)``; noise-free part of the draw."""
    pop, _ = np.random.SeedSequence(truth.seed).spawn(2)
    rng = np.random.default_rng(pop)
    m, v = lognormal_params(truth.mu, truth.sigma)
    latent = np.exp(rng.normal(m, math.sqrt(v), truth.K))
    draws, rejected = [], 0
    for mu_k, n in zip(latent, truth.n_obs):
        x, r = _positive_normal(rng, mu_k, truth.spread_sd, n)
        draws.append(x)
        rejected += r
    return latent, draws, rejected


def observation_noise(truth: GenerativeTruth, n: int) -> np.ndarray:
    _, stream = np.random.SeedSequence(truth.seed).spawn(2)
    return np.random.default_rng(stream).normal(0.0, truth.noise_sd, n)


def generate(truth: GenerativeTruth, model: fem.TurbineModel):
    """``(Dataset, GroundTruthRecord)`` for one synthetic population."""
    latent, draws, rejected = sample_stiffness(truth)
    noiseless = [np.array([fem.first_bending_frequency(model, float(k)) for k in x])
                 for x in draws]
    noise = observation_noise(truth, sum(truth.n_obs))
    offsets = np.cumsum((0,) + truth.n_obs)
    obs = [f + noise[a:b] for f, a, b in zip(noiseless, offsets[:-1], offsets[1:])]

    notes = []
    lo, hi = truth.domain
    all_k = np.concatenate(draws)
    n_out = int(np.count_nonzero((all_k < lo) | (all_k > hi)))
    if n_out:
        notes.append(f"{n_out} stiffness realisation(s) outside the surrogate domain {truth.domain}")
    f_lo, f_hi = (fem.first_bending_frequency(model, k) for k in truth.domain)
    all_f = np.concatenate(obs)
    n_out = int(np.count_nonzero((all_f < f_lo) | (all_f > f_hi)))
    if n_out:
        notes.append(f"{n_out} frequency observation(s) outside [{f_lo:.6g}, {f_hi:.6g}] Hz")
    for msg in notes:
        warnings.warn(msg, DomainWarning, stacklevel=2)
    if rejected:
        notes.append(f"{rejected} non-positive stiffness draw(s) rejected")

    record = GroundTruthRecord(truth, tuple(float(x) for x in latent),
                               tuple(tuple(float(v) for v in x) for x in draws),
                               tuple(tuple(float(v) for v in f) for f in noiseless),
                               rejected, tuple(notes))
    return Dataset(tuple(obs)), record


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------

def write_dataset(ds: Dataset, path) -> None:
    lines = [",".join(CSV_HEADER)]
    for label, o in zip(ds.labels, ds.observations):
        lines += [f"{label},{i + 1},{v:.17g}" for i, v in enumerate(o)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path, labels=None) -> Dataset:
    """Parse a dataset CSV. Turbines keep the order of their first row.

    ``labels``, if given, is the set of allowed turbine ids.  A header-only
    file gives an empty dataset; refusing it is the model's job.
    """
    allowed = None if labels is None else {str(x) for x in labels}
    groups: dict[str, list[float]] = {}
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise DatasetFormatError(f"{path}: line 1: expected header {','.join(CSV_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DatasetFormatError(f"{path}: line {line}: expected 3 fields, got {len(row)}")
            tid, oid, val = (c.strip() for c in row)
            if not tid.isdigit() or int(tid) < 1:
                raise DatasetFormatError(f"{path}: line {line}: bad turbine_id {tid!r}")
            tid = str(int(tid))
            if allowed is not None and tid not in allowed:
                raise DatasetFormatError(f"{path}: line {line}: unknown turbine {tid}")
            try:
                oid_i = int(oid)
                f = float(val)
            except ValueError:
                raise DatasetFormatError(f"{path}: line {line}: unparseable row {row}") from None
            if (tid, oid_i) in seen:
                raise DatasetFormatError(f"{path}: line {line}: duplicate obs {tid}/{oid_i}")
            seen.add((tid, oid_i))
            if not math.isfinite(f) or f <= 0:
                raise DatasetFormatError(
                    f"{path}: line {line}: frequency must be finite and positive, got {val}")
            groups.setdefault(tid, []).append(f)
    return Dataset(tuple(np.array(v) for v in groups.values()), tuple(groups))


def write_truth(record: GroundTruthRecord, path) -> None:
    Path(path).write_text(json.dumps(record.to_dict(), indent=2) + "\n")


def read_truth(path) -> GroundTruthRecord:
    return GroundTruthRecord.from_dict(json.loads(Path(path).read_text()))


def truth_path(dataset_path) -> Path:
    p = Path(dataset_path)
    return p.with_name(p.stem + ".truth.json")
