"""Decay-rate view of the regularity / gap-decay equivalence.

On finite data membership in H^alpha or h^alpha is read off a fitted
power-law exponent: ``c n^-beta`` lies in the weight-``n^(2 alpha)`` space
exactly when ``alpha < beta - 1/2``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .actions import gap_actions
from .floquet import gap_lengths, periodic_spectrum
from .potentials import random_potential, zero_potential


class FitError(ValueError):
    pass


@dataclass
class DecayFit:
    exponent: float
    r_squared: float
    lo: int
    hi: int
    indices: list[int] = field(default_factory=list)


def decay_exponent_fit(seq, lo: int, hi: int) -> DecayFit:
    """Least-squares line through ``(log n, log seq_n)`` for ``lo <= n <= hi``; zeros skipped.

    ``seq`` is 1-based: ``seq[0]`` belongs to n = 1.
    """
    seq = np.asarray(seq, dtype=float)
    if not 1 <= lo < hi:
        raise FitError(f"need 1 <= lo < hi, got lo={lo}, hi={hi}")
    hi = min(hi, len(seq))
    n = np.arange(lo, hi + 1)
    vals = seq[lo - 1 : hi]
    keep = vals > 0
    if keep.sum() < 5:
        raise FitError(f"only {int(keep.sum())} positive entries in {lo}..{hi}; need 5")
    x, y = np.log(n[keep]), np.log(vals[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return DecayFit(float(-slope), r2, int(lo), int(hi), [int(v) for v in n[keep]])


def sobolev_class(exponent: float | None) -> str:
    if exponent is None:
        return "all alpha"
    return f"alpha < {exponent - 0.5:.4f}"


@dataclass
class Theorem2Report:
    beta: float
    amplitude: float
    K: int
    seed: int
    gammas: list[float]
    moduli: list[float]
    included: list[int]
    excluded: list[int]
    coefficient_fit: DecayFit | None
    gap_fit: DecayFit | None
    moduli_fit: DecayFit | None
    scaled_moduli_fit: DecayFit | None
    potential_class: str
    gap_class: str

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "Theorem2Report":
        d = json.loads(text)
        for key in ("coefficient_fit", "gap_fit", "moduli_fit", "scaled_moduli_fit"):
            if d[key] is not None:
                d[key] = DecayFit(**d[key])
        return cls(**d)


def resolvable(gammas, eigenvalues, tol_gap: float = 1e-9, factor: float = 10.0) -> np.ndarray:
    """Gaps comfortably above the closed-gap tolerance."""
    hi = np.abs(np.asarray(eigenvalues)[2::2])
    return np.asarray(gammas) > factor * tol_gap * np.maximum(1.0, hi)


def theorem2_experiment(
    beta: float,
    amplitude: float,
    K: int,
    seed: int,
    steps: int = 1024,
    nodes: int = 64,
    first: int = 4,
) -> Theorem2Report:
    """Compare decay exponents of coefficients, gap lengths and Birkhoff moduli.

    The fit window starts at ``first`` (smaller indices are pre-asymptotic)
    and only keeps gaps ten times above the closed-gap tolerance.
    """
    if not 1 <= beta <= 3:
        raise ValueError("beta must lie in [1, 3]")
    if not 0 <= amplitude <= 0.1:
        raise ValueError("amplitude must lie in [0, 0.1]")
    if not 1 <= K <= 32:
        raise ValueError("K must lie in 1..32")
    q = random_potential(beta, amplitude, K, seed) if amplitude > 0 else zero_potential().padded(K)
    s = periodic_spectrum(q, K, steps=steps)
    gam = gap_lengths(s).gammas
    moduli = np.sqrt(2 * gap_actions(q, s, range(1, K + 1), nodes))
    ok = resolvable(gam, s.eigenvalues, s.tol_gap)
    n = np.arange(1, K + 1)
    window = (n >= first) & ok
    included = [int(v) for v in n[window]]
    excluded = [int(v) for v in n[(n >= first) & ~ok]]

    def fit(values):
        masked = np.where(window, values, 0.0)
        try:
            return decay_exponent_fit(masked, first, K)
        except FitError:
            return None

    mags = np.hypot(q.cos, q.sin)
    coef_fit = fit(mags) if amplitude > 0 else None
    gap_fit = fit(gam)
    mod_fit = fit(moduli)
    scaled_fit = fit(moduli * np.sqrt(n))
    return Theorem2Report(
        beta=float(beta),
        amplitude=float(amplitude),
        K=int(K),
        seed=int(seed),
        gammas=[float(v) for v in gam],
        moduli=[float(v) for v in moduli],
        included=included,
        excluded=excluded,
        coefficient_fit=coef_fit,
        gap_fit=gap_fit,
        moduli_fit=mod_fit,
        scaled_moduli_fit=scaled_fit,
        potential_class=sobolev_class(coef_fit.exponent if coef_fit else None),
        gap_class=sobolev_class(gap_fit.exponent if gap_fit else None),
    )
