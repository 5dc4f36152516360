"""Benchmark objectives with known truth and pluggable noise.

Each problem doubles as the black-box stochastic oracle (sample / sample_batch)
and as the ground-truth source (f_true, grad_true, f_low) that the diagnostics
consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np


class UnknownProblem(KeyError):
    """No builtin problem with that name."""


NOISE_KINDS = ("none", "gaussian", "uniform", "multiplicative")


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean perturbation attached to a true objective value.

    kind/param: "none"; "gaussian" with variance param; "uniform" with
    half-width param; "multiplicative" scaling f by (1 + xi) with
    Var(xi) = param.
    """

    kind: str = "none"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; pick from {NOISE_KINDS}")
        if self.kind != "none" and self.param < 0.0:
            raise ValueError("noise parameter must be >= 0")

    def draw_batch(self, f_val: float, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "none" or self.param == 0.0:
            return np.full(size, f_val)
        if self.kind == "gaussian":
            return f_val + rng.normal(0.0, math.sqrt(self.param), size)
        if self.kind == "uniform":
            return f_val + rng.uniform(-self.param, self.param, size)
        # multiplicative: mean-preserving relative perturbation
        return f_val * (1.0 + rng.normal(0.0, math.sqrt(self.param), size))

    def draw(self, f_val: float, rng: np.random.Generator) -> float:
        return float(self.draw_batch(f_val, 1, rng)[0])

    def variance_bound(self, f_ref: float) -> tuple[float, bool]:
        """Declared variance bound and whether it is only approximate.

        Additive kinds have an exact uniform bound. The multiplicative kind has
        none on unbounded objectives; we declare param * (2*f_ref)**2, valid
        while the objective stays below twice its reference level.
        """
        if self.kind == "none":
            return 0.0, False
        if self.kind == "gaussian":
            return self.param, False
        if self.kind == "uniform":
            return self.param**2 / 3.0, False
        return self.param * 4.0 * f_ref**2, True

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        """Build from a "kind:param" string, e.g. "gaussian:0.01" or "none"."""
        kind, _, param = text.partition(":")
        kind = kind.strip().lower()
        if kind == "none":
            return cls("none", 0.0)
        if not param:
            raise ValueError(f"noise {text!r} needs a parameter, e.g. 'gaussian:0.01'")
        return cls(kind, float(param))


@dataclass(frozen=True)
class NoisyProblem:
    """A benchmark objective observed through a noise model.

    V bounds the variance of a single observation; V_approximate flags bounds
    that only hold near the start level set. L is the gradient's Lipschitz
    constant when one exists globally; assumption_local_only marks problems
    where it does not.
    """

    name: str
    dim: int
    f_true: Callable[[np.ndarray], float]
    grad_true: Callable[[np.ndarray], np.ndarray]
    f_low: float
    noise: NoiseModel
    V: float
    x0: np.ndarray
    L: Optional[float] = None
    assumption_local_only: bool = False
    V_approximate: bool = False

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> float:
        return self.noise.draw(float(self.f_true(x)), rng)

    def sample_batch(self, x: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
        return self.noise.draw_batch(float(self.f_true(x)), size, rng)

    def grad_norm(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.grad_true(x)))

    def with_noise(self, noise: NoiseModel) -> "NoisyProblem":
        V, approx = noise.variance_bound(float(self.f_true(self.x0)))
        return replace(self, noise=noise, V=V, V_approximate=approx)


def _sphere(dim: int, noise: NoiseModel) -> NoisyProblem:
    base = NoisyProblem(
        name="sphere",
        dim=dim,
        f_true=lambda x: float(np.dot(x, x)),
        grad_true=lambda x: 2.0 * np.asarray(x, dtype=float),
        f_low=0.0,
        noise=NoiseModel("none"),
        V=0.0,
        x0=np.ones(dim),
        L=2.0,
    )
    return base.with_noise(noise)


def _quadratic(dim: int, noise: NoiseModel, kappa: float = 10.0) -> NoisyProblem:
    if kappa < 1.0:
        raise ValueError("condition number kappa must be >= 1")
    diag = np.linspace(1.0, kappa, dim) if dim > 1 else np.array([kappa])
    base = NoisyProblem(
        name="quadratic",
        dim=dim,
        f_true=lambda x, d=diag: float(0.5 * np.dot(d * x, x)),
        grad_true=lambda x, d=diag: d * np.asarray(x, dtype=float),
        f_low=0.0,
        noise=NoiseModel("none"),
        V=0.0,
        x0=np.ones(dim),
        L=float(diag.max()),
    )
    return base.with_noise(noise)


def _rosenbrock_f(x: np.ndarray) -> float:
    return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)


def _rosenbrock_grad(x: np.ndarray) -> np.ndarray:
    return np.array(
        [
            -400.0 * x[0] * (x[1] - x[0] ** 2) - 2.0 * (1.0 - x[0]),
            200.0 * (x[1] - x[0] ** 2),
        ]
    )


def _rosenbrock(dim: int, noise: NoiseModel) -> NoisyProblem:
    if dim != 2:
        raise ValueError("rosenbrock is defined here for dim=2 only")
    base = NoisyProblem(
        name="rosenbrock",
        dim=2,
        f_true=_rosenbrock_f,
        grad_true=_rosenbrock_grad,
        f_low=0.0,
        noise=NoiseModel("none"),
        V=0.0,
        x0=np.array([-1.2, 1.0]),
        L=None,
        assumption_local_only=True,
    )
    return base.with_noise(noise)


_BUILTINS: dict[str, Callable[..., NoisyProblem]] = {
    "sphere": _sphere,
    "quadratic": _quadratic,
    "rosenbrock": _rosenbrock,
}


def builtin_problems() -> dict[str, Callable[..., NoisyProblem]]:
    """Catalog of builtin problem factories, keyed by name."""
    return dict(_BUILTINS)


def make_problem(
    name: str, dim: int = 2, noise: NoiseModel = NoiseModel("none"), **kwargs
) -> NoisyProblem:
    """Instantiate a builtin problem; raises UnknownProblem for bad names."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise UnknownProblem(name) from None
    return factory(dim, noise, **kwargs)


def grad_check(problem: NoisyProblem, points, h: float = 1e-5) -> float:
    """Max relative error of grad_true against central differences.

    The error at each point is scaled by max(1, norm of the true gradient) so
    the check stays meaningful near stationary points.
    """
    if h <= 0.0:
        raise ValueError("step h must be > 0")
    worst = 0.0
    for point in points:
        x = np.asarray(point, dtype=float)
        g_true = np.asarray(problem.grad_true(x), dtype=float)
        g_fd = np.empty_like(g_true)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            g_fd[i] = (problem.f_true(x + e) - problem.f_true(x - e)) / (2.0 * h)
        err = np.linalg.norm(g_fd - g_true) / max(1.0, np.linalg.norm(g_true))
        worst = max(worst, float(err))
    return worst
