"""Periodic potentials on the unit circle as finite Fourier series.

A potential is stored as ``q(x) = mean + sum_n A_n cos(2 pi n x) + B_n sin(2 pi n x)``
with ``n = 1..K``.  Norms use the homogeneous weight ``n**(2 alpha)`` on the
zero-mean part, matching the weight of the Birkhoff sequence norm.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class FDConsistencyWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class Potential:
    mean: float
    cos: np.ndarray
    sin: np.ndarray

    @property
    def K(self) -> int:
        return len(self.cos)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.K + 1)

    def __call__(self, x):
        return evaluate(self, x)

    def derivative(self, x):
        """Pointwise value of dq/dx."""
        x = np.asarray(x, dtype=float)
        arg = 2 * np.pi * np.multiply.outer(x, self.modes)
        w = 2 * np.pi * self.modes
        return np.cos(arg) @ (w * self.sin) - np.sin(arg) @ (w * self.cos)

    def shifted(self, c: float) -> "Potential":
        return from_fourier(self.mean + c, self.cos, self.sin)

    def zero_mean(self) -> "Potential":
        return from_fourier(0.0, self.cos, self.sin)

    def padded(self, K: int) -> "Potential":
        if K <= self.K:
            return self
        pad = np.zeros(K - self.K)
        return from_fourier(self.mean, np.concatenate([self.cos, pad]), np.concatenate([self.sin, pad]))

    def min_bound(self) -> float:
        """A cheap lower bound for min q."""
        return self.mean - float(np.sum(np.hypot(self.cos, self.sin)))

    def __add__(self, other: "Potential") -> "Potential":
        K = max(self.K, other.K)
        a, b = self.padded(K), other.padded(K)
        return from_fourier(a.mean + b.mean, a.cos + b.cos, a.sin + b.sin)

    def __mul__(self, c: float) -> "Potential":
        return from_fourier(c * self.mean, c * self.cos, c * self.sin)

    __rmul__ = __mul__

    def describe(self) -> str:
        return f"Potential(K={self.K}, mean={self.mean:.6g})"

    def to_json(self) -> str:
        def num(v):
            return format(float(v), ".16e")

        return '{"mean": %s, "cos": [%s], "sin": [%s]}' % (
            num(self.mean),
            ", ".join(num(v) for v in self.cos),
            ", ".join(num(v) for v in self.sin),
        )

    @classmethod
    def from_json(cls, text: str) -> "Potential":
        data = json.loads(text)
        if not isinstance(data, dict) or set(data) != {"mean", "cos", "sin"}:
            raise ValueError('potential JSON must be {"mean": r, "cos": [...], "sin": [...]}')
        return from_fourier(data["mean"], data["cos"], data["sin"])


def from_fourier(mean, cos_coeffs, sin_coeffs) -> Potential:
    a = np.array(cos_coeffs, dtype=float).reshape(-1)
    b = np.array(sin_coeffs, dtype=float).reshape(-1)
    # an empty list is shorthand for all-zero coefficients
    if a.size == 0:
        a = np.zeros_like(b)
    if b.size == 0:
        b = np.zeros_like(a)
    if a.shape != b.shape:
        raise ValueError(f"cos/sin coefficient lengths differ: {a.size} != {b.size}")
    mean = float(mean)
    if not (math.isfinite(mean) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("potential coefficients must be finite")
    a.setflags(write=False)
    b.setflags(write=False)
    return Potential(mean, a, b)


def zero_potential() -> Potential:
    return from_fourier(0.0, [], [])


def evaluate(q: Potential, x):
    """Value of the trigonometric series at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation point must be finite")
    x = np.mod(x, 1.0)
    arg = 2 * np.pi * np.multiply.outer(x, q.modes)
    out = q.mean + np.cos(arg) @ q.cos + np.sin(arg) @ q.sin
    return float(out) if out.ndim == 0 else out


def grid_mean(q: Potential, nodes: int | None = None) -> float:
    """Mean of q by the trapezoid rule, exact for nodes > K."""
    nodes = nodes or 2 * q.K + 2
    return float(np.mean(evaluate(q, np.arange(nodes) / nodes)))


def sobolev_norm(q: Potential, alpha: float) -> float:
    if q.mean != 0.0:
        raise ValueError("sobolev_norm is defined on the zero-mean leaf; got mean %r" % q.mean)
    _check_alpha(alpha)
    n = q.modes.astype(float)
    return math.sqrt(0.5 * float(np.sum(n ** (2 * alpha) * (q.cos**2 + q.sin**2))))


def _check_alpha(alpha: float) -> None:
    if not (math.isfinite(alpha) and -1.0 <= alpha <= 1.0):
        raise ValueError(f"Sobolev index must lie in [-1, 1], got {alpha}")


def random_potential(beta: float, amplitude: float, modes: int, seed: int) -> Potential:
    """Zero-mean potential with pair magnitudes ``amplitude * n**-beta`` and seeded phases.

    As a truncation proxy the result lies in H^alpha exactly when ``beta > alpha + 1/2``.
    """
    if not beta > 0.5:
        raise ValueError("beta must exceed 1/2")
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    if modes < 1:
        raise ValueError("need at least one mode")
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2 * np.pi, size=modes)
    mag = amplitude * np.arange(1, modes + 1, dtype=float) ** (-beta)
    return from_fourier(0.0, mag * np.cos(phase), mag * np.sin(phase))


def kdv_hamiltonian(q: Potential) -> float:
    """``int_0^1 (q_x^2 / 2 + q^3) dx`` by a trapezoid rule exact for degree-3K integrands."""
    nodes = 4 * q.K + 4
    x = np.arange(nodes) / nodes
    return float(np.mean(0.5 * q.derivative(x) ** 2 + evaluate(q, x) ** 3))


def gardner_bracket(grad_f: Potential, grad_g: Potential) -> float:
    """``int_0^1 grad_f * d/dx grad_g dx`` evaluated on Fourier coefficients.

    The constant parts never contribute, so the mean is a Casimir.
    """
    K = max(grad_f.K, grad_g.K)
    f, g = grad_f.padded(K), grad_g.padded(K)
    n = np.arange(1, K + 1)
    return float(np.pi * np.sum(n * (f.cos * g.sin - f.sin * g.cos)))


def l2_gradients_fd(
    F: Callable[[Potential], Sequence[float]],
    q: Potential,
    h: float = 1e-4,
    modes: int | None = None,
    check: bool = False,
    map_fn: Callable = map,
) -> list[Potential]:
    """L2-gradients of a vector of functionals sharing each perturbed evaluation.

    Each component is the directional derivative along the orthonormal
    directions ``1, sqrt2 cos(2 pi n x), sqrt2 sin(2 pi n x)``, by central
    differences with step ``h``.  With ``check`` the differences are repeated
    at ``h/2`` and a ``FDConsistencyWarning`` is issued when the two disagree
    by more than ``1e-3`` of the largest component.
    ``map_fn`` may be an executor's ordered ``map`` to spread evaluations.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    modes = q.K if modes is None else int(modes)
    if modes < 0:
        raise ValueError("modes must be non-negative")
    base = q.padded(modes)
    K = base.K
    zeros = np.zeros(K)
    root2 = math.sqrt(2.0)
    directions = [from_fourier(1.0, zeros, zeros)]
    for j in range(modes):
        e = np.zeros(K)
        e[j] = root2
        directions += [from_fourier(0.0, e, zeros), from_fourier(0.0, zeros, e)]

    steps = [h, h / 2] if check else [h]
    probes = [base + (sign * step) * d for d in directions for step in steps for sign in (1.0, -1.0)]
    values = np.array([np.atleast_1d(np.asarray(v, dtype=float)) for v in map_fn(F, probes)])
    values = values.reshape(len(directions), len(steps), 2, -1)
    central = (values[:, :, 0] - values[:, :, 1]) / (2 * np.array(steps))[None, :, None]
    deriv = central[:, 0]
    if check:
        scale = np.max(np.abs(deriv), axis=0)
        drift = np.max(np.abs(central[:, 1] - deriv), axis=0)
        if np.any(drift > 1e-3 * scale):
            warnings.warn(
                f"finite-difference gradient changed by {drift.max():.3g} on halving h={h}",
                FDConsistencyWarning,
                stacklevel=2,
            )

    grads = []
    for col in deriv.T:
        a = np.zeros(K)
        b = np.zeros(K)
        a[:modes] = root2 * col[1::2]
        b[:modes] = root2 * col[2::2]
        grads.append(from_fourier(col[0], a, b))
    return grads


def l2_gradient_fd(
    F: Callable[[Potential], float],
    q: Potential,
    h: float = 1e-4,
    modes: int | None = None,
    check: bool = False,
) -> Potential:
    """L2-gradient of a scalar functional; see :func:`l2_gradients_fd`."""
    return l2_gradients_fd(F, q, h, modes, check)[0]


def l2_norm(q: Potential) -> float:
    """Full L2 norm on [0, 1], constant part included."""
    return math.sqrt(q.mean**2 + 0.5 * float(np.sum(q.cos**2 + q.sin**2)))
