"""Partially pooled hierarchical model over per-turbine soil stiffness.

Generative structure (all second Normal arguments are variances)::

    mu_s    ~ Normal(mu_mu, sigma_mu^2)
    sigma_s ~ HalfCauchy(0, beta_sigma)
    s_k     ~ Normal(m(mu_s, sigma_s), v(mu_s, sigma_s))       k = 1..K
    gamma   ~ HalfCauchy(0, beta_gamma)
    w_ik    ~ Normal(f(exp(s_k)), gamma^2)

with ``m, v`` chosen so that ``exp(s_k)`` has mean ``|mu_s|`` and variance
``sigma_s^2``, and ``f`` the polynomial surrogate of the FE model.

Sampling happens in the unconstrained space
``u = (mu_s, log sigma_s, log gamma, s_1, ..., s_K)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .surrogate import PolySurrogate

LOG_2PI = math.log(2.0 * math.pi)


class EmptyDatasetError(ValueError):
    pass


class NonFiniteLogDensity(FloatingPointError):
    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


@dataclass(frozen=True)
class HyperPriors:
    mu_mu: float = 3e7
    sigma_mu: float = 1e7
    beta_sigma: float = 5e6
    beta_gamma: float = 0.01

    def __post_init__(self):
        if min(self.sigma_mu, self.beta_sigma, self.beta_gamma) <= 0:
            raise ValueError("hyperprior scales must be positive")


@dataclass(frozen=True)
class LatentState:
    mu_s: float
    sigma_s: float
    gamma: float
    s: np.ndarray

    @property
    def K(self) -> int:
        return len(self.s)


@dataclass(frozen=True)
class Dataset:
    """Natural-frequency observations grouped by turbine."""

    observations: tuple[np.ndarray, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        obs = tuple(np.asarray(o, dtype=float).ravel() for o in self.observations)
        object.__setattr__(self, "observations", obs)
        labels = tuple(self.labels) or tuple(str(i + 1) for i in range(len(obs)))
        if len(labels) != len(obs):
            raise ValueError("one label per turbine required")
        object.__setattr__(self, "labels", labels)
        for lab, o in zip(labels, obs):
            if len(o) == 0:
                raise ValueError(f"turbine {lab} has no observations")
            if not np.all(np.isfinite(o)) or np.any(o <= 0):
                raise ValueError(f"turbine {lab}: frequencies must be finite and positive")

    @property
    def K(self) -> int:
        return len(self.observations)

    @property
    def n_obs(self) -> tuple[int, ...]:
        return tuple(len(o) for o in self.observations)

    @property
    def total(self) -> int:
        return sum(self.n_obs)

    def flat(self):
        """``(values, turbine_index)`` with zero-based turbine indices."""
        if self.K == 0:
            return np.zeros(0), np.zeros(0, dtype=int)
        vals = np.concatenate(self.observations)
        idx = np.repeat(np.arange(self.K), self.n_obs)
        return vals, idx


def param_names(K: int) -> list[str]:
    return ["mu_s", "sigma_s", "gamma"] + [f"s_{k + 1}" for k in range(K)]


def to_unconstrained(state: LatentState) -> np.ndarray:
    return np.concatenate([[state.mu_s, math.log(state.sigma_s), math.log(state.gamma)],
                           np.asarray(state.s, dtype=float)])


def to_constrained(u) -> LatentState:
    u = np.asarray(u, dtype=float)
    return LatentState(float(u[0]), float(np.exp(u[1])), float(np.exp(u[2])), u[3:].copy())


def constrain_array(u: np.ndarray) -> np.ndarray:
    """Vectorised constrain over a trailing parameter axis, same column order."""
    out = np.array(u, dtype=float, copy=True)
    out[..., 1:3] = np.exp(out[..., 1:3])
    return out


# --------------------------------------------------------------------------
# densities
# --------------------------------------------------------------------------

def lognormal_params(mu_s, sigma_s):
    """Log-space mean and variance for which ``exp(s)`` has mean |mu_s|, variance sigma_s^2."""
    if np.any(np.asarray(mu_s) == 0):
        raise ValueError("mu_s = 0 has no log-normal moment match")
    mu2 = np.square(mu_s)
    m = np.log(mu2 / np.sqrt(mu2 + np.square(sigma_s)))
    v = np.log1p(np.square(sigma_s) / mu2)
    return m, v


def normal_logpdf(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var)) - 0.5 * np.square(x - mean) / var


def half_cauchy_logpdf(x, scale):
    if x <= 0:
        return -math.inf
    return math.log(2.0 / (math.pi * scale)) - math.log1p((x / scale) ** 2)


def log_prior(state: LatentState, hp: HyperPriors) -> float:
    if state.sigma_s <= 0 or state.gamma <= 0:
        return -math.inf
    m, v = lognormal_params(state.mu_s, state.sigma_s)
    return float(normal_logpdf(state.mu_s, hp.mu_mu, hp.sigma_mu**2)
                 + half_cauchy_logpdf(state.sigma_s, hp.beta_sigma)
                 + np.sum(normal_logpdf(np.asarray(state.s), m, v))
                 + half_cauchy_logpdf(state.gamma, hp.beta_gamma))


def log_likelihood(state: LatentState, data: Dataset, f: PolySurrogate) -> float:
    vals, idx = data.flat()
    if len(vals) == 0:
        return 0.0
    pred = np.asarray(f.eval(np.exp(np.asarray(state.s, dtype=float))))
    if not np.all(np.isfinite(pred)):
        raise NonFiniteLogDensity("surrogate returned a non-finite frequency")
    g2 = state.gamma**2
    return float(np.sum(-0.5 * (LOG_2PI + math.log(g2)) - 0.5 * (vals - pred[idx]) ** 2 / g2))


class HierarchicalModel:
    """Unconstrained log posterior with analytic gradient; callable as ``model(u)``."""

    def __init__(self, data: Dataset, surrogate: PolySurrogate, hp: HyperPriors | None = None):
        if data.K == 0:
            raise EmptyDatasetError("dataset has no observations")
        self.data = data
        self.surrogate = surrogate
        self.hp = hp or HyperPriors()
        self._vals, self._idx = data.flat()
        self._n_k = np.asarray(data.n_obs, dtype=float)
        self.names = param_names(data.K)

    @property
    def K(self) -> int:
        return self.data.K

    @property
    def dim(self) -> int:
        return 3 + self.K

    def terms(self, u) -> dict:
        """Individual log-density contributions at ``u``."""
        st = to_constrained(u)
        return {
            "prior": log_prior(st, self.hp),
            "likelihood": log_likelihood(st, self.data, self.surrogate),
            "log_jacobian": float(u[1] + u[2]),
        }

    def log_density(self, u) -> float:
        return self(u)[0]

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        hp = self.hp
        mu, zs, zg = u[0], u[1], u[2]
        s = u[3:]
        sig, gam = math.exp(zs), math.exp(zg)
        if mu == 0:
            raise NonFiniteLogDensity("mu_s = 0", coordinate="mu_s")

        # population level
        lp = -0.5 * (LOG_2PI + 2 * math.log(hp.sigma_mu)) - 0.5 * ((mu - hp.mu_mu) / hp.sigma_mu) ** 2
        d_mu = -(mu - hp.mu_mu) / hp.sigma_mu**2
        lp += math.log(2.0 / (math.pi * hp.beta_sigma)) - math.log1p((sig / hp.beta_sigma) ** 2)
        d_sig = -2.0 * sig / (hp.beta_sigma**2 + sig**2)
        lp += math.log(2.0 / (math.pi * hp.beta_gamma)) - math.log1p((gam / hp.beta_gamma) ** 2)
        d_gam = -2.0 * gam / (hp.beta_gamma**2 + gam**2)

        # turbine level
        q = mu * mu + sig * sig
        m = math.log(mu * mu) - 0.5 * math.log(q)
        v = math.log1p(sig * sig / (mu * mu))
        r = s - m
        lp += float(np.sum(-0.5 * (LOG_2PI + math.log(v)) - 0.5 * r * r / v))
        d_s = -r / v
        d_m = float(np.sum(r)) / v
        d_v = float(np.sum(-0.5 / v + 0.5 * r * r / v**2))
        dm_dmu = 2.0 / mu - mu / q
        dm_dsig = -sig / q
        dv_dmu = 2.0 * mu / q - 2.0 / mu
        dv_dsig = 2.0 * sig / q
        d_mu += d_m * dm_dmu + d_v * dv_dmu
        d_sig += d_m * dm_dsig + d_v * dv_dsig

        # likelihood
        ks = np.exp(s)
        f, df = self.surrogate.eval_with_derivative(ks)
        f, df = np.atleast_1d(f), np.atleast_1d(df)
        res = self._vals - f[self._idx]
        g2 = gam * gam
        lp += float(-0.5 * len(res) * (LOG_2PI + math.log(g2)) - 0.5 * np.dot(res, res) / g2)
        d_s = d_s + np.bincount(self._idx, weights=res, minlength=self.K) / g2 * df * ks
        d_gam += -len(res) / gam + float(np.dot(res, res)) / gam**3

        # log-transforms plus their Jacobian
        lp += zs + zg
        grad = np.empty_like(u)
        grad[0] = d_mu
        grad[1] = d_sig * sig + 1.0
        grad[2] = d_gam * gam + 1.0
        grad[3:] = d_s

        if not math.isfinite(lp):
            raise NonFiniteLogDensity("non-finite log density", coordinate="log_density")
        bad = ~np.isfinite(grad)
        if bad.any():
            name = self.names[int(np.argmax(bad))]
            raise NonFiniteLogDensity(f"non-finite gradient in {name}", coordinate=name)
        return lp, grad

    def initial_point(self, rng: np.random.Generator, radius: float = 2.0) -> np.ndarray:
        """Uniform jitter of +-radius prior scales around prior-implied centres."""
        hp = self.hp
        m, v = lognormal_params(hp.mu_mu, hp.beta_sigma)
        center = np.concatenate([[hp.mu_mu, math.log(hp.beta_sigma), math.log(hp.beta_gamma)],
                                 np.full(self.K, m)])
        scale = np.concatenate([[hp.sigma_mu, 1.0, 1.0], np.full(self.K, math.sqrt(v))])
        return center + scale * rng.uniform(-radius, radius, size=self.dim)

    def constrain(self, u: np.ndarray) -> np.ndarray:
        return constrain_array(u)


def prior_sd_by_simulation(hp: HyperPriors, K: int, n: int = 1_000_000, seed: int = 0) -> dict:
    """Marginal prior standard deviations of the constrained parameters.

    The half-Cauchy scales have no finite variance, so ``sigma_s`` and
    ``gamma`` are reported as ``inf``.  ``s_k`` is simulated from the hierarchy.
    """
    rng = np.random.default_rng(seed)
    mu = rng.normal(hp.mu_mu, hp.sigma_mu, n)
    sig = np.abs(hp.beta_sigma * rng.standard_cauchy(n))
    mu = np.where(mu == 0, 1e-300, mu)
    m, v = lognormal_params(mu, sig)
    s = rng.normal(m, np.sqrt(v))
    out = {"mu_s": hp.sigma_mu, "sigma_s": math.inf, "gamma": math.inf}
    sd_s = float(np.std(s))
    for k in range(K):
        out[f"s_{k + 1}"] = sd_s
    return out
