"""KdV action variables as gap integrals of the Hill discriminant.

``I_n = (2/pi) int_{gap n} arcosh((-1)^n delta(lam) / 2) dlam``.  The arcosh
factor vanishes like a square root at both gap edges; the substitution
``lam = mid + (gamma/2) sin(phi)`` turns the integrand into a smooth function
of ``phi`` that Gauss-Legendre handles at spectral accuracy.
"""
from __future__ import annotations

import csv
import io
import math

import numpy as np

from .floquet import Discriminant, Spectrum, gap_lengths, periodic_spectrum
from .potentials import Potential


class ActionError(RuntimeError):
    pass


class ClosedGapError(ActionError):
    pass


def _gauss_phi(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * math.pi * x, 0.5 * math.pi * w


def _arcosh1p(v):
    """arcosh(1 + v) without cancellation for small v >= 0."""
    return np.log1p(v + np.sqrt(v * (v + 2.0)))


def gap_actions(q: Potential, s: Spectrum, indices, nodes: int = 64) -> np.ndarray:
    """Actions for several gap indices sharing one discriminant batch."""
    if nodes < 32:
        raise ValueError("need at least 32 quadrature nodes")
    indices = [int(n) for n in indices]
    for n in indices:
        if not 1 <= n <= s.K:
            raise ValueError(f"gap index {n} outside 1..{s.K}")
    gam = gap_lengths(s).gammas
    out = np.zeros(len(indices))
    open_ = [(i, n) for i, n in enumerate(indices) if gam[n - 1] > 0]
    if not open_:
        return out
    phi, w = _gauss_phi(nodes)
    lams, signs = [], []
    for _, n in open_:
        lo, hi = s.edges(n)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        lams.append(np.concatenate([[mid], mid + half * np.sin(phi)]))
        signs.append(np.full(nodes + 1, 1.0 if n % 2 == 0 else -1.0))
    disc = Discriminant(q, s.steps)
    excess, _ = disc.excess(np.concatenate(lams), np.concatenate(signs))
    excess = excess.reshape(len(open_), nodes + 1)
    for row, (i, n) in zip(excess, open_):
        # the sign pattern (-1)^n must put the gap midpoint on the |delta| >= 2 side
        if row[0] < -1e-12:
            raise ActionError(
                f"sign check failed in gap {n}: (-1)^n delta/2 = {1 + row[0] / 2:.15g} < 1 at the midpoint"
            )
        half = 0.5 * float(gam[n - 1])
        v = np.maximum(0.5 * row[1:], 0.0)
        integral = half * np.sum(w * _arcosh1p(v) * np.cos(phi))
        out[i] = 2.0 / math.pi * integral
    if not np.all(np.isfinite(out)):
        raise ActionError("action quadrature produced a non-finite value")
    return out


def action(q: Potential, n: int, s: Spectrum | None = None, nodes: int = 64, steps: int = 1024) -> float:
    if n < 1:
        raise ValueError("gap index starts at 1")
    if s is None:
        s = periodic_spectrum(q, n, steps=steps)
    return float(gap_actions(q, s, [n], nodes)[0])


def action_sequence(q: Potential, s: Spectrum, nodes: int = 64) -> np.ndarray:
    return gap_actions(q, s, range(1, s.K + 1), nodes)


def ratios(gammas: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """``8 pi n I_n / gamma_n^2``, NaN where the gap is closed."""
    n = np.arange(1, len(gammas) + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 8 * math.pi * n * actions / gammas**2
    return np.where(gammas > 0, r, np.nan)


def action_gap_ratio(q: Potential, n: int, s: Spectrum | None = None, nodes: int = 64, steps: int = 1024) -> float:
    if s is None:
        s = periodic_spectrum(q, n, steps=steps)
    gamma = float(gap_lengths(s).gammas[n - 1])
    if gamma <= 0:
        raise ClosedGapError(f"ratio undefined at closed gap n={n}")
    return 8 * math.pi * n * action(q, n, s, nodes) / gamma**2


def modulus_map(q: Potential, K: int, s: Spectrum | None = None, nodes: int = 64, steps: int = 1024) -> np.ndarray:
    """Birkhoff moduli ``|z_n| = sqrt(2 I_n)`` for n = 1..K."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if s is None:
        s = periodic_spectrum(q, K, steps=steps)
    return np.sqrt(2.0 * gap_actions(q, s, range(1, K + 1), nodes))


def actions_to_csv(gammas, actions) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "gamma", "action", "ratio"])
    for n, (g, a, r) in enumerate(zip(gammas, actions, ratios(np.asarray(gammas), np.asarray(actions))), start=1):
        w.writerow([n, repr(float(g)), repr(float(a)), "" if np.isnan(r) else repr(float(r))])
    return buf.getvalue()


def actions_from_csv(text: str):
    rows = list(csv.DictReader(io.StringIO(text)))
    gam = np.array([float(r["gamma"]) for r in rows])
    act = np.array([float(r["action"]) for r in rows])
    return gam, act
