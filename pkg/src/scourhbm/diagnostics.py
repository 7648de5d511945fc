"""Rank-normalised split R-hat and bulk effective sample size."""
from __future__ import annotations

import warnings

import numpy as np
from scipy import special, stats


class DegenerateVarianceWarning(RuntimeWarning):
    pass


def _as_chains(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("expected a (chain, draw) array")
    return x


def _split(x: np.ndarray) -> np.ndarray:
    n = x.shape[1] // 2
    return np.concatenate([x[:, :n], x[:, x.shape[1] - n:]], axis=0)


def rank_normalise(x: np.ndarray) -> np.ndarray:
    s = x.size
    r = stats.rankdata(x, method="average").reshape(x.shape)
    return special.ndtri((r - 0.375) / (s + 0.25))


def _rhat_classic(x: np.ndarray) -> float:
    m, n = x.shape
    w = np.mean(np.var(x, axis=1, ddof=1))
    b = n * np.var(np.mean(x, axis=1), ddof=1)
    var_hat = (n - 1) / n * w + b / n
    return float(np.sqrt(var_hat / w))


def _degenerate(x) -> bool:
    return bool(np.all(np.ptp(x, axis=1) == 0))


def rhat(chains) -> float:
    """max(bulk, tail) rank-normalised split R-hat of a (chain, draw) array."""
    x = _as_chains(chains)
    if x.shape[0] < 2 or x.shape[1] < 4:
        raise ValueError("R-hat needs at least 2 chains of 4 draws")
    if _degenerate(x) or np.ptp(x) == 0:
        warnings.warn("zero within-chain variance; R-hat reported as 1",
                      DegenerateVarianceWarning, stacklevel=2)
        return 1.0
    xs = _split(x)
    bulk = _rhat_classic(rank_normalise(xs))
    folded = np.abs(xs - np.median(xs))
    tail = _rhat_classic(rank_normalise(folded))
    return max(bulk, tail)


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    xc = x - x.mean(axis=-1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, size, axis=-1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=-1)[..., :n]
    return acov / n


def ess_raw(x) -> float:
    """ESS from Geyer's initial monotone sequence over all chains."""
    x = _as_chains(x)
    m, n = x.shape
    if n < 4:
        raise ValueError("ESS needs at least 4 draws per chain")
    acov = _autocov(x)
    chain_mean = x.mean(axis=1)
    mean_var = np.mean(acov[:, 0]) * n / (n - 1)
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += np.var(chain_mean, ddof=1)
    if var_plus <= 0:
        return float(m * n)
    rho = np.zeros(n)
    rho[0] = 1.0
    even = 1.0
    odd = 1.0 - (mean_var - np.mean(acov[:, 1])) / var_plus
    rho[1] = odd
    t = 1
    while t < n - 3 and even + odd > 0:
        even = 1.0 - (mean_var - np.mean(acov[:, t + 1])) / var_plus
        odd = 1.0 - (mean_var - np.mean(acov[:, t + 2])) / var_plus
        if even + odd >= 0:
            rho[t + 1] = even
            rho[t + 2] = odd
        t += 2
    max_t = t
    if even > 0 and max_t + 1 < n:
        rho[max_t + 1] = even
    # enforce a monotone sequence of pair sums
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    total = m * n
    tau = -1.0 + 2.0 * np.sum(rho[:max_t + 1]) + (rho[max_t + 1] if max_t + 1 < n else 0.0)
    tau = max(tau, 1.0 / np.log10(total))
    return float(total / tau)


def ess(chains) -> float:
    """Bulk ESS: Geyer ESS of the rank-normalised split chains."""
    x = _as_chains(chains)
    if x.shape[1] < 4:
        raise ValueError("ESS needs at least 4 draws per chain")
    if np.ptp(x) == 0:
        warnings.warn("zero variance; ESS reported as the draw count",
                      DegenerateVarianceWarning, stacklevel=2)
        return float(x.size)
    return ess_raw(rank_normalise(_split(x)))


def summary(posterior) -> dict:
    """R-hat and ESS for every parameter of a PosteriorChains."""
    out = {"rhat": {}, "ess": {}}
    for i, name in enumerate(posterior.names):
        x = posterior.constrained[:, :, i]
        out["rhat"][name] = rhat(x) if x.shape[0] >= 2 else None
        out["ess"][name] = ess(x)
    return out
