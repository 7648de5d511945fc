"""No-U-Turn sampler with multinomial trajectory sampling.

Warm-up follows the usual windowed scheme: dual averaging of the step size
throughout, with the diagonal inverse metric re-estimated at the end of a
sequence of doubling slow windows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

DIVERGENCE_THRESHOLD = 1000.0


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 4
    n_warmup: int = 2000
    n_samples: int = 2000
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0
    step_size: Optional[float] = None  # fixed step, skips step-size adaptation

    def __post_init__(self):
        if min(self.n_chains, self.n_samples) < 1 or self.n_warmup < 0:
            raise ValueError("n_chains and n_samples must be >= 1, n_warmup >= 0")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must be in (0, 1)")
        if self.max_tree_depth < 0:
            raise ValueError("max_tree_depth must be >= 0")


@dataclass
class PosteriorChains:
    draws: np.ndarray  # (chain, draw, dim), unconstrained
    constrained: np.ndarray  # same shape
    names: list[str]
    tree_depth: np.ndarray
    divergent: np.ndarray
    energy: np.ndarray
    accept_stat: np.ndarray
    n_leapfrog: np.ndarray
    step_size: np.ndarray  # per chain
    inv_metric: np.ndarray  # (chain, dim)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    def param(self, name: str) -> np.ndarray:
        """(chain, draw) array of a constrained parameter."""
        return self.constrained[:, :, self.names.index(name)]


@dataclass
class _Point:
    q: np.ndarray
    logp: float
    grad: np.ndarray


def leapfrog(q, p, step_size, grad_fn, inv_metric, grad=None):
    """One leapfrog step; ``grad_fn(q) -> (logp, grad)`` of the log density.

    Returns ``(q', p', logp', grad')``.  A non-finite gradient is returned as
    is and the caller treats it as a divergence.
    """
    if grad is None:
        _, grad = grad_fn(q)
    p_half = p + 0.5 * step_size * grad
    q_new = q + step_size * inv_metric * p_half
    logp, grad_new = grad_fn(q_new)
    p_new = p_half + 0.5 * step_size * grad_new
    return q_new, p_new, logp, grad_new


def _safe(grad_fn):
    def wrapped(q):
        try:
            lp, g = grad_fn(q)
        except (FloatingPointError, ValueError, OverflowError, ZeroDivisionError):
            return -math.inf, np.full_like(q, np.nan)
        if not math.isfinite(lp):
            return -math.inf, np.full_like(q, np.nan)
        return lp, g
    return wrapped


@dataclass
class _Tree:
    q_minus: np.ndarray
    p_minus: np.ndarray
    g_minus: np.ndarray
    q_plus: np.ndarray
    p_plus: np.ndarray
    g_plus: np.ndarray
    proposal: _Point
    log_weight: float
    rho: np.ndarray  # summed momentum
    n_leapfrog: int
    sum_accept: float
    turning: bool = False
    diverging: bool = False


def _no_uturn(p_sharp_minus, p_sharp_plus, rho) -> bool:
    return float(p_sharp_minus @ rho) > 0 and float(p_sharp_plus @ rho) > 0


def _merge(left: _Tree, right: _Tree) -> _Tree:
    """Join two adjacent trees (``left`` earlier in time) into one."""
    lw = np.logaddexp(left.log_weight, right.log_weight)
    tree = _Tree(left.q_minus, left.p_minus, left.g_minus,
                 right.q_plus, right.p_plus, right.g_plus,
                 left.proposal, lw, left.rho + right.rho,
                 left.n_leapfrog + right.n_leapfrog, left.sum_accept + right.sum_accept)
    return tree


class _Integrator:
    def __init__(self, grad_fn, inv_metric, step_size, H0):
        self.grad_fn = grad_fn
        self.inv_metric = inv_metric
        self.step_size = step_size
        self.H0 = H0

    def build(self, q, p, g, direction, depth, rng) -> _Tree:
        if depth == 0:
            eps = direction * self.step_size
            q1, p1, lp1, g1 = leapfrog(q, p, eps, self.grad_fn, self.inv_metric, g)
            if math.isfinite(lp1) and np.all(np.isfinite(g1)):
                H = -lp1 + 0.5 * float(p1 @ (self.inv_metric * p1))
            else:
                H = math.inf
            dH = H - self.H0
            diverging = not (dH <= DIVERGENCE_THRESHOLD)
            log_w = -dH if math.isfinite(dH) else -math.inf
            accept = min(1.0, math.exp(-dH)) if math.isfinite(dH) else 0.0
            return _Tree(q1, p1, g1, q1, p1, g1, _Point(q1, lp1, g1), log_w, p1.copy(),
                         1, accept, diverging=diverging)

        first = self.build(q, p, g, direction, depth - 1, rng)
        if first.diverging or first.turning:
            return first
        if direction > 0:
            second = self.build(first.q_plus, first.p_plus, first.g_plus, direction, depth - 1, rng)
        else:
            second = self.build(first.q_minus, first.p_minus, first.g_minus, direction, depth - 1, rng)
        left, right = (first, second) if direction > 0 else (second, first)
        tree = _merge(left, right)
        tree.diverging = second.diverging
        if second.diverging or second.turning:
            tree.turning = second.turning
            return tree
        # uniform (multinomial) choice between the halves
        if math.log(rng.uniform()) < second.log_weight - tree.log_weight:
            tree.proposal = second.proposal
        else:
            tree.proposal = first.proposal
        tree.turning = self.is_turning(left, right, tree)
        return tree

    def is_turning(self, left: _Tree, right: _Tree, tree: _Tree) -> bool:
        im = self.inv_metric
        if not _no_uturn(im * tree.p_minus, im * tree.p_plus, tree.rho):
            return True
        # extra checks across the join guard against missed U-turns in subtrees
        rho_l = left.rho + right.p_minus
        if not _no_uturn(im * left.p_minus, im * right.p_minus, rho_l):
            return True
        rho_r = right.rho + left.p_plus
        if not _no_uturn(im * left.p_plus, im * right.p_plus, rho_r):
            return True
        return False


@dataclass
class StepStats:
    tree_depth: int
    n_leapfrog: int
    accept_stat: float
    divergent: bool
    energy: float


def nuts_step(current: _Point, grad_fn, step_size, inv_metric, rng, max_tree_depth=10):
    """One NUTS transition from ``current``; returns ``(next_point, StepStats)``."""
    if not math.isfinite(current.logp):
        raise SamplingError("current state has -inf log density; re-initialise the chain")
    d = len(current.q)
    p0 = rng.standard_normal(d) / np.sqrt(inv_metric)
    H0 = -current.logp + 0.5 * float(p0 @ (inv_metric * p0))
    integ = _Integrator(grad_fn, inv_metric, step_size, H0)
    tree = _Tree(current.q, p0, current.grad, current.q, p0, current.grad,
                 current, 0.0, p0.copy(), 0, 0.0)
    proposal = current
    depth = 0
    divergent = False
    for j in range(max_tree_depth + 1):
        direction = 1 if rng.uniform() < 0.5 else -1
        if direction > 0:
            sub = integ.build(tree.q_plus, tree.p_plus, tree.g_plus, 1, j, rng)
        else:
            sub = integ.build(tree.q_minus, tree.p_minus, tree.g_minus, -1, j, rng)
        tree.n_leapfrog += sub.n_leapfrog
        tree.sum_accept += sub.sum_accept
        if sub.diverging:
            divergent = True
            break
        if sub.turning:
            break
        depth = j
        # biased progressive sampling favours the newer subtree
        if math.log(rng.uniform()) < sub.log_weight - tree.log_weight:
            proposal = sub.proposal
        left, right = (tree, sub) if direction > 0 else (sub, tree)
        n_lf, acc = tree.n_leapfrog, tree.sum_accept
        merged = _merge(left, right)
        merged.n_leapfrog, merged.sum_accept = n_lf, acc
        turning = integ.is_turning(left, right, merged)
        tree = merged
        if turning:
            break
    accept = tree.sum_accept / max(tree.n_leapfrog, 1)
    stats = StepStats(depth, tree.n_leapfrog, accept, divergent, -proposal.logp)
    return proposal, stats


# --------------------------------------------------------------------------
# adaptation
# --------------------------------------------------------------------------

class DualAveraging:
    """Nesterov dual averaging of log step size (Hoffman & Gelman constants)."""

    def __init__(self, step_size, target=0.8, gamma=0.05, t0=10.0, kappa=0.75):
        self.target, self.gamma, self.t0, self.kappa = target, gamma, t0, kappa
        self.restart(step_size)

    def restart(self, step_size):
        self.mu = math.log(10.0 * step_size)
        self.t = 0
        self.h_bar = 0.0
        self.log_eps = math.log(step_size)
        self.log_eps_bar = 0.0

    def update(self, accept_stat):
        self.t += 1
        w = 1.0 / (self.t + self.t0)
        self.h_bar = (1 - w) * self.h_bar + w * (self.target - accept_stat)
        self.log_eps = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        eta = self.t ** (-self.kappa)
        self.log_eps_bar = eta * self.log_eps + (1 - eta) * self.log_eps_bar

    @property
    def step_size(self):
        return math.exp(self.log_eps)

    @property
    def final_step_size(self):
        return math.exp(self.log_eps_bar)


def warmup_windows(n_warmup: int, init_buffer=75, term_buffer=None, base_window=25):
    """``(start, end)`` index pairs of the slow metric-adaptation windows.

    The terminal fast window defaults to an eighth of warm-up (at least 50):
    the averaged step size from a 50-iteration window overshoots the
    acceptance target by more than 0.1 on simple Gaussians.
    """
    if n_warmup < 20:
        return []
    if term_buffer is None:
        term_buffer = max(50, n_warmup // 8)
    if init_buffer + term_buffer + base_window > n_warmup:
        init_buffer = int(0.15 * n_warmup)
        term_buffer = int(0.1 * n_warmup)
        base_window = n_warmup - init_buffer - term_buffer
    ends = []
    start, size = init_buffer, base_window
    slow_end = n_warmup - term_buffer
    while start + size <= slow_end:
        # stretch the last window if the next one would not fit
        if start + 3 * size > slow_end:
            size = slow_end - start
        ends.append((start, start + size))
        start += size
        size *= 2
    return ends


def find_reasonable_step_size(point: _Point, grad_fn, inv_metric, rng, step_size=1.0):
    d = len(point.q)
    p = rng.standard_normal(d) / np.sqrt(inv_metric)
    H0 = -point.logp + 0.5 * float(p @ (inv_metric * p))

    def log_ratio(eps):
        _, p1, lp1, _ = leapfrog(point.q, p, eps, grad_fn, inv_metric, point.grad)
        if not math.isfinite(lp1):
            return -math.inf
        return H0 - (-lp1 + 0.5 * float(p1 @ (inv_metric * p1)))

    lr = log_ratio(step_size)
    direction = 1 if lr > math.log(0.8) else -1
    for _ in range(100):
        new = step_size * (2.0 ** direction)
        lr = log_ratio(new)
        if direction > 0 and not lr > math.log(0.8):
            break
        step_size = new
        if direction < 0 and lr > math.log(0.8):
            break
    return step_size


def _regularised_variance(samples, previous):
    n = len(samples)
    var = np.var(samples, axis=0, ddof=1)
    # shrink towards the previous metric rather than an absolute constant:
    # coordinates here span ~20 orders of magnitude in variance
    return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0)) * previous


def curvature_inv_metric(grad_fn, q, rel_step=1e-4):
    """Inverse diagonal Hessian of ``-log p`` at ``q`` by gradient differences.

    Used as the starting metric so coordinates on wildly different scales
    start out comparably conditioned; adaptation refines it.
    """
    q = np.asarray(q, dtype=float)
    out = np.ones_like(q)
    for i in range(len(q)):
        h = rel_step * max(abs(q[i]), 1.0)
        e = np.zeros_like(q)
        e[i] = h
        _, gp = grad_fn(q + e)
        _, gm = grad_fn(q - e)
        c = -(gp[i] - gm[i]) / (2 * h)
        out[i] = 1.0 / c if np.isfinite(c) and c > 0 else (0.1 * max(abs(q[i]), 1.0)) ** 2
    return out


def sample_chain(grad_fn, q0, cfg: SamplerConfig, rng, inv_metric0=None, chain_id=0):
    grad_fn = _safe(grad_fn)
    lp, g = grad_fn(np.asarray(q0, dtype=float))
    if not math.isfinite(lp):
        raise SamplingError(f"chain {chain_id}: initial point has -inf log density")
    point = _Point(np.asarray(q0, dtype=float), lp, g)
    d = len(point.q)
    inv_metric = np.ones(d) if inv_metric0 is None else np.asarray(inv_metric0, dtype=float).copy()

    adapt_step = cfg.step_size is None
    if adapt_step:
        step = find_reasonable_step_size(point, grad_fn, inv_metric, rng)
    else:
        step = float(cfg.step_size)
    da = DualAveraging(step, cfg.target_accept)
    windows = warmup_windows(cfg.n_warmup)
    window_draws = []
    w_i = 0
    n_div_warm = 0

    for it in range(cfg.n_warmup):
        point, st = nuts_step(point, grad_fn, step, inv_metric, rng, cfg.max_tree_depth)
        n_div_warm += st.divergent
        if adapt_step:
            da.update(st.accept_stat)
            step = da.step_size
        if w_i < len(windows) and windows[w_i][0] <= it < windows[w_i][1]:
            window_draws.append(point.q.copy())
            if it == windows[w_i][1] - 1:
                inv_metric = _regularised_variance(np.array(window_draws), inv_metric)
                window_draws = []
                w_i += 1
                if adapt_step:
                    step = find_reasonable_step_size(point, grad_fn, inv_metric, rng, step)
                    da.restart(step)
    if cfg.n_warmup and n_div_warm == cfg.n_warmup:
        raise SamplingError(f"chain {chain_id}: every warm-up transition diverged")
    if adapt_step and cfg.n_warmup:
        step = da.final_step_size

    n = cfg.n_samples
    draws = np.empty((n, d))
    stats = {k: np.empty(n, dtype=t) for k, t in
             [("tree_depth", int), ("divergent", bool), ("energy", float),
              ("accept_stat", float), ("n_leapfrog", int)]}
    for i in range(n):
        point, st = nuts_step(point, grad_fn, step, inv_metric, rng, cfg.max_tree_depth)
        draws[i] = point.q
        for k in stats:
            stats[k][i] = getattr(st, k)
    return draws, stats, step, inv_metric


def run(grad_fn: Callable, init: Callable | np.ndarray, cfg: SamplerConfig,
        names: list[str] | None = None, constrain: Callable | None = None,
        inv_metric0: Callable | np.ndarray | None = None) -> PosteriorChains:
    """Run ``cfg.n_chains`` independent chains.

    ``init`` is either an array of starting points (one row per chain, or a
    single point shared by all) or ``init(rng) -> q0``.  ``inv_metric0`` is
    the starting diagonal inverse metric, or ``inv_metric0(q0)`` to derive it
    per chain.  Each chain gets its own RNG stream spawned from ``cfg.seed``.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    results = []
    for c, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        if callable(init):
            q0 = np.asarray(init(rng), dtype=float)
        else:
            arr = np.atleast_2d(np.asarray(init, dtype=float))
            q0 = arr[c % len(arr)]
        m0 = inv_metric0(q0) if callable(inv_metric0) else inv_metric0
        try:
            results.append(sample_chain(grad_fn, q0, cfg, rng, m0, chain_id=c))
        except SamplingError:
            raise
        except Exception as exc:
            raise SamplingError(f"chain {c}: {exc}") from exc
    draws = np.stack([r[0] for r in results])
    constrained = constrain(draws) if constrain else draws.copy()
    stat = {k: np.stack([r[1][k] for r in results]) for k in results[0][1]}
    names = names or [f"x{i}" for i in range(draws.shape[-1])]
    return PosteriorChains(draws, constrained, list(names), stat["tree_depth"], stat["divergent"],
                           stat["energy"], stat["accept_stat"], stat["n_leapfrog"],
                           np.array([r[2] for r in results]), np.stack([r[3] for r in results]))
