"""Polynomial surrogate for the stiffness -> first bending frequency map."""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem


class FitError(RuntimeError):
    pass


class _Counter:
    # diagnostic only; never feeds back into results
    def __init__(self):
        self._n = 0
        self._lock = threading.Lock()

    def add(self, n: int = 1):
        with self._lock:
            self._n += n

    @property
    def value(self) -> int:
        return self._n

    def reset(self):
        with self._lock:
            self._n = 0


TRANSFORMS = ("log", "linear")


def _forward(k, transform):
    return np.log(k) if transform == "log" else np.asarray(k, dtype=float)


@dataclass(frozen=True)
class PolySurrogate:
    """Polynomial in the scaled input ``x = (t(k) - center) / half_width``.

    ``t`` is ``log`` (default) or the identity, and ``[center - half_width,
    center + half_width]`` is the image of the fit domain under ``t``, so the
    domain always maps onto ``[-1, 1]``.  ``coefficients[i]`` multiplies ``x**i``.
    """

    coefficients: tuple[float, ...]
    domain: tuple[float, float]
    input_transform: str = "log"
    fit_report: dict = field(default_factory=dict, compare=False)
    out_of_domain: _Counter = field(default_factory=_Counter, compare=False, repr=False)

    def __post_init__(self):
        if self.input_transform not in TRANSFORMS:
            raise ValueError(f"input_transform must be one of {TRANSFORMS}")
        if not self.domain[0] < self.domain[1]:
            raise ValueError(f"empty domain {self.domain}")
        if self.input_transform == "log" and self.domain[0] <= 0:
            raise ValueError("log input needs a positive domain")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def center(self) -> float:
        lo, hi = _forward(np.array(self.domain), self.input_transform)
        return float(0.5 * (lo + hi))

    @property
    def half_width(self) -> float:
        lo, hi = _forward(np.array(self.domain), self.input_transform)
        return float(0.5 * (hi - lo))

    def scale(self, k):
        return (_forward(k, self.input_transform) - self.center) / self.half_width

    def _check(self, k):
        k = np.asarray(k, dtype=float)
        if not np.all(np.isfinite(k)):
            raise ValueError("surrogate input must be finite")
        outside = int(np.count_nonzero((k < self.domain[0]) | (k > self.domain[1])))
        if outside:
            self.out_of_domain.add(outside)
        return k

    def __call__(self, k):
        return self.eval(k)

    def eval(self, k):
        k = self._check(k)
        x = self.scale(k)
        y = np.zeros_like(x)
        for c in reversed(self.coefficients):
            y = y * x + c
        return y if y.ndim else float(y)

    def eval_with_derivative(self, k):
        """Value and d/dk, both by Horner's scheme."""
        k = self._check(k)
        x = self.scale(k)
        y = np.zeros_like(x)
        dy = np.zeros_like(x)
        for c in reversed(self.coefficients):
            dy = dy * x + y
            y = y * x + c
        dy = dy / self.half_width
        if self.input_transform == "log":
            dy = dy / k
        if y.ndim:
            return y, dy
        return float(y), float(dy)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "domain": list(self.domain),
            "input_transform": self.input_transform,
            "scaling": {"center": self.center, "half_width": self.half_width},
            "coefficients": list(self.coefficients),
            "fit_report": dict(self.fit_report),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolySurrogate":
        coeffs = tuple(float(c) for c in d["coefficients"])
        if len(coeffs) != int(d["degree"]) + 1:
            raise ValueError("coefficient count does not match degree")
        lo, hi = (float(v) for v in d["domain"])
        s = cls(coeffs, (lo, hi), d.get("input_transform", "log"),
                dict(d.get("fit_report", {})))
        sc = d.get("scaling")
        if sc is not None and (not math.isclose(sc["center"], s.center, rel_tol=1e-12)
                               or not math.isclose(sc["half_width"], s.half_width, rel_tol=1e-12)):
            raise ValueError("scaling block is inconsistent with the domain")
        return s

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "PolySurrogate":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_polynomial(k, y, domain, degree: int = 5, input_transform: str = "log"):
    """Least-squares coefficients in the scaled basis (SVD-based solve)."""
    lo, hi = domain
    if not lo < hi:
        raise FitError(f"empty fit domain {domain}")
    x = PolySurrogate((0.0,), (lo, hi), input_transform).scale(k)
    V = np.vander(x, degree + 1, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(V, np.asarray(y, dtype=float), rcond=None)
    if rank < degree + 1:
        raise FitError(f"rank-deficient design matrix (rank {rank} < {degree + 1})")
    return tuple(float(c) for c in coef)


def _residuals(s: PolySurrogate, k, y):
    r = s.eval(k) - y
    return {
        "max_abs": float(np.max(np.abs(r))),
        "rms": float(np.sqrt(np.mean(r**2))),
        "max_rel": float(np.max(np.abs(r) / np.abs(y))) if np.all(y != 0) else float("inf"),
    }


def fit_surrogate(model: fem.TurbineModel, domain=(1e7, 5e7), n_points: int = 50,
                  degree: int = 5, frequency_fn=None,
                  input_transform: str = "log") -> PolySurrogate:
    """Fit the surrogate to FE frequencies on an even grid over ``domain``.

    Residuals are reported on the midpoints of the training grid, which the
    fit never sees.  ``frequency_fn(model, k)`` defaults to the FE model.
    """
    if n_points < degree + 1:
        raise FitError(f"need at least {degree + 1} points for degree {degree}")
    frequency_fn = frequency_fn or fem.first_bending_frequency
    lo, hi = float(domain[0]), float(domain[1])
    k_train = np.linspace(lo, hi, n_points)
    k_val = 0.5 * (k_train[1:] + k_train[:-1])

    def sample(ks):
        out = np.empty(len(ks))
        for i, k in enumerate(ks):
            try:
                out[i] = frequency_fn(model, float(k))
            except Exception as exc:
                raise FitError(f"FE evaluation failed at k_s={k:.6g}: {exc}") from exc
        return out

    y_train = sample(k_train)
    coeffs = fit_polynomial(k_train, y_train, (lo, hi), degree, input_transform)
    s = PolySurrogate(coeffs, (lo, hi), input_transform)
    report = {"n_train": int(n_points), "n_val": int(len(k_val))}
    train = _residuals(s, k_train, y_train)
    report.update({f"train_{k}": v for k, v in train.items()})
    if len(k_val):
        report.update(_residuals(s, k_val, sample(k_val)))
    else:
        report.update(train)
    return PolySurrogate(coeffs, (lo, hi), input_transform, report)
