"""Posterior-predictive frequencies, scour sweeps and HDI anomaly verdicts."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fem
from .nuts import PosteriorChains


class Verdict(str, enum.Enum):
    NORMAL = "Normal"
    ANOMALOUS = "Anomalous"


@dataclass(frozen=True)
class PredictiveSample:
    k: int
    scour_depth: float
    frequencies: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float).ravel()
        if len(f) < 1:
            raise ValueError("predictive sample needs at least one draw")
        if not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise ValueError("predictive frequencies must be finite and positive")
        object.__setattr__(self, "frequencies", f)


@dataclass(frozen=True)
class AnomalyVerdict:
    observed_hz: float
    hdi: tuple[float, float]
    mass: float
    tail_prob: float
    verdict: Verdict

    def to_dict(self) -> dict:
        return {"observed_hz": self.observed_hz, "hdi": list(self.hdi), "mass": self.mass,
                "tail_prob": self.tail_prob, "verdict": self.verdict.value}

    @property
    def anomalous(self) -> bool:
        return self.verdict is Verdict.ANOMALOUS


def thin_indices(total: int, n: int) -> np.ndarray:
    """``n`` equally strided indices into ``range(total)``, starting at 0."""
    if not 1 <= n <= total:
        raise ValueError(f"cannot thin {total} draws to {n}")
    return (np.arange(n) * total) // n


def _turbine_column(chains: PosteriorChains, k: int) -> int:
    K = sum(1 for n in chains.names if n.startswith("s_"))
    if not 1 <= k <= K:
        raise ValueError(f"turbine k={k} out of range 1..{K}")
    return chains.names.index(f"s_{k}")


def stiffness_draws(chains: PosteriorChains, k: int, n_draws: int | None = None) -> np.ndarray:
    """Thinned ``exp(s_k)`` draws, chains merged in chain order."""
    s = chains.draws[:, :, _turbine_column(chains, k)].ravel()
    idx = thin_indices(len(s), len(s) if n_draws is None else n_draws)
    return np.exp(s[idx])


def posterior_predictive(chains: PosteriorChains, k: int, model: fem.TurbineModel,
                         scour_depth: float = 0.0, n_draws: int | None = None,
                         include_noise: bool = False, seed: int = 0) -> PredictiveSample:
    """FE frequencies of turbine ``k`` (1-based) over thinned posterior draws.

    Structural frequency only, unless ``include_noise`` adds ``Normal(0, gamma^2)``
    per draw with ``gamma`` taken from the same posterior draw.
    """
    ks = stiffness_draws(chains, k, n_draws)
    f = np.array([fem.first_bending_frequency(model, float(x), scour_depth) for x in ks])
    if include_noise:
        g = chains.constrained[:, :, chains.names.index("gamma")].ravel()
        g = g[thin_indices(len(g), len(ks))]
        f = f + np.random.default_rng(seed).normal(0.0, 1.0, len(f)) * g
    return PredictiveSample(k, float(scour_depth), f)


def scour_sweep(chains: PosteriorChains, k: int, model: fem.TurbineModel,
                depths=(0.0, 0.1, 0.2, 0.3, 0.4), n_samples: int = 5):
    """Mean FE frequency over ``n_samples`` thinned draws at each scour depth."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    ks = stiffness_draws(chains, k, n_samples)
    out = []
    for d in depths:
        f = [fem.first_bending_frequency(model, float(x), float(d)) for x in ks]
        out.append((float(d), float(np.mean(f))))
    return out


def hdi(samples, mass: float) -> tuple[float, float]:
    """Shortest interval holding ``ceil(mass * n)`` of the sorted samples."""
    if not 0 < mass < 1:
        raise ValueError(f"mass must lie in (0, 1), got {mass}")
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n < 10:
        raise ValueError("HDI needs at least 10 samples")
    m = min(n, math.ceil(mass * n))
    widths = x[m - 1:] - x[:n - m + 1]
    i = int(np.argmin(widths))  # first minimum: smallest lower bound
    return float(x[i]), float(x[i + m - 1])


def tail_probability(samples, observed: float) -> float:
    """Two-sided fraction of draws strictly beyond ``observed``."""
    x = np.asarray(samples, dtype=float)
    below = np.count_nonzero(x < observed) / len(x)
    above = np.count_nonzero(x > observed) / len(x)
    return float(min(1.0, 2.0 * min(below, above)))


def detect(observed: float, reference: PredictiveSample, mass: float = 0.999) -> AnomalyVerdict:
    lo, hi = hdi(reference.frequencies, mass)
    inside = lo <= observed <= hi
    return AnomalyVerdict(float(observed), (lo, hi), float(mass),
                          tail_probability(reference.frequencies, observed),
                          Verdict.NORMAL if inside else Verdict.ANOMALOUS)


def write_sweep(rows, n_samples: int, path) -> None:
    lines = ["scour_depth_m,mean_frequency_hz,n_samples"]
    lines += [f"{d:.17g},{f:.17g},{n_samples}" for d, f in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_verdict(v: AnomalyVerdict, path) -> None:
    Path(path).write_text(json.dumps(v.to_dict(), indent=2) + "\n")
