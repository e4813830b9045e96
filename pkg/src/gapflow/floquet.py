"""Hill discriminant, periodic spectrum and gap lengths.

The Hill equation ``y'' = (q(x) - lam) y`` is integrated over one period with
a fourth-order Magnus scheme (two Gauss points per step).  Each step is the
exact exponential of a traceless 2x2 matrix, so the monodromy has determinant
one up to rounding and the free operator is reproduced exactly.  The
lam-derivative is carried along as a dual part, which makes ``delta_dlambda``
the exact derivative of the discrete discriminant.

Step matrices and their products are formed in extended precision: identical
steps share the same rounding bias in their determinant, which otherwise
compounds linearly in the step count.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .potentials import Potential, evaluate

_G1 = 0.5 - math.sqrt(3.0) / 6.0
_G2 = 0.5 + math.sqrt(3.0) / 6.0
_COMM = math.sqrt(3.0) / 12.0

# Rounding floor of the discriminant excess at a gap's critical point.  A gap
# whose peak does not rise above it cannot be told apart from a closed one.
DELTA_FLOOR = 1e-26

_CHUNK = 96
_LD = np.longdouble
_TERMS = 10
_INV_FACT = np.cumprod(np.concatenate([[1], 1 / np.arange(1, 30, dtype=_LD)]).astype(_LD))


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FloquetResult:
    lam: float
    m: np.ndarray
    m_dlambda: np.ndarray
    delta: float
    delta_dlambda: float


@dataclass(frozen=True, eq=False)
class Spectrum:
    q_id: str
    eigenvalues: np.ndarray
    steps: int
    tol_gap: float = 1e-9

    @property
    def K(self) -> int:
        return (len(self.eigenvalues) - 1) // 2

    def edges(self, k: int) -> tuple[float, float]:
        return float(self.eigenvalues[2 * k - 1]), float(self.eigenvalues[2 * k])


@dataclass(frozen=True, eq=False)
class GapSequence:
    gammas: np.ndarray


def required_steps(steps: int, lam_max: float) -> int:
    """At least 16 steps per oscillation wavelength at the top of the window."""
    wavelengths = math.sqrt(max(lam_max, 0.0)) / (2 * math.pi)
    return max(int(steps), int(math.ceil(16 * wavelengths)))


def _exp_series(mu):
    """cosh(sqrt mu), sinh(sqrt mu)/sqrt mu and the mu-derivative of the latter."""
    c = np.empty_like(mu)
    s = np.empty_like(mu)
    ds = np.empty_like(mu)
    small = np.abs(mu) < 0.1
    if np.any(small):
        m = mu[small]
        cs = np.full_like(m, _INV_FACT[2 * _TERMS])
        ss = np.full_like(m, _INV_FACT[2 * _TERMS + 1])
        dss = np.full_like(m, _TERMS * _INV_FACT[2 * _TERMS + 1])
        for k in range(_TERMS - 1, -1, -1):
            cs = cs * m + _INV_FACT[2 * k]
            ss = ss * m + _INV_FACT[2 * k + 1]
            if k > 0:
                dss = dss * m + k * _INV_FACT[2 * k + 1]
        c[small], s[small], ds[small] = cs, ss, dss
    pos = ~small & (mu > 0)
    if np.any(pos):
        r = np.sqrt(mu[pos])
        c[pos] = np.cosh(r)
        s[pos] = np.sinh(r) / r
    neg = ~small & (mu < 0)
    if np.any(neg):
        r = np.sqrt(-mu[neg])
        c[neg] = np.cos(r)
        s[neg] = np.sin(r) / r
    big = ~small
    ds[big] = (c[big] - s[big]) / (2 * mu[big])
    return c, s, ds


def _dual_product(e, de):
    """Ordered product e[..., N-1] @ ... @ e[..., 0] together with its derivative."""
    eye = np.eye(2, dtype=e.dtype)
    while e.shape[-3] > 1:
        if e.shape[-3] % 2:
            pad = np.broadcast_to(eye, e.shape[:-3] + (1, 2, 2))
            e = np.concatenate([e, pad], axis=-3)
            de = np.concatenate([de, np.zeros_like(pad)], axis=-3)
        early, late = e[..., 0::2, :, :], e[..., 1::2, :, :]
        d_early, d_late = de[..., 0::2, :, :], de[..., 1::2, :, :]
        e = late @ early
        de = d_late @ early + late @ d_early
    return e[..., 0, :, :], de[..., 0, :, :]


class Discriminant:
    """Vectorised monodromy evaluator for a fixed potential and step count."""

    def __init__(self, q: Potential, steps: int):
        if steps < 64:
            raise ValueError("monodromy needs at least 64 steps")
        self.q = q
        self.steps = int(steps)
        x0 = np.arange(self.steps) / self.steps
        q1 = evaluate(q, x0 + _G1 / self.steps).astype(_LD)
        q2 = evaluate(q, x0 + _G2 / self.steps).astype(_LD)
        h = _LD(1) / _LD(self.steps)
        self.h = h
        self.qbar = (q1 + q2) / 2
        self.a = _LD(_COMM) * h * h * (q1 - q2)

    def _matrices(self, lams):
        h, a = self.h, self.a
        c21 = h * (self.qbar[None, :] - lams.astype(_LD)[:, None])
        mu = a[None, :] ** 2 + h * c21
        c, s, ds = _exp_series(mu)
        e = np.empty(mu.shape + (2, 2), dtype=mu.dtype)
        e[..., 0, 0] = c + s * a
        e[..., 0, 1] = s * h
        e[..., 1, 0] = s * c21
        e[..., 1, 1] = c - s * a
        dmu = -h * h
        dc = s * dmu / 2
        dsv = ds * dmu
        de = np.empty_like(e)
        de[..., 0, 0] = dc + dsv * a
        de[..., 0, 1] = dsv * h
        de[..., 1, 0] = dsv * c21 - s * h
        de[..., 1, 1] = dc - dsv * a
        return e, de

    def monodromy(self, lams, extended=False):
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        ms, dms = [], []
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, lams.size, _CHUNK):
                e, de = self._matrices(lams[start : start + _CHUNK])
                m, dm = _dual_product(e, de)
                ms.append(m)
                dms.append(dm)
        m = np.concatenate(ms)
        dm = np.concatenate(dms)
        if not extended:
            m, dm = m.astype(float), dm.astype(float)
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(dm))):
            bad = lams[~np.all(np.isfinite(m.reshape(len(lams), -1)), axis=1)]
            raise SpectrumError(f"non-finite monodromy during integration at lambda={bad[:3]}")
        return m, dm

    def __call__(self, lams):
        """Discriminant and its lam-derivative at each lam."""
        m, dm = self.monodromy(lams)
        return np.trace(m, axis1=-2, axis2=-1), np.trace(dm, axis1=-2, axis2=-1)

    def excess(self, lams, signs):
        """``sign * delta - 2`` and its lam-derivative, free of cancellation near +2.

        With det M = 1, ``delta^2 - 4 = (m11 - m22)^2 + 4 m12 m21``; on the side
        ``sign * delta > 0`` the excess is that product divided by
        ``sign * delta + 2``.  Its error then scales with the rounding of the
        entries times the gap size instead of the rounding of delta itself.
        """
        m, dm = self.monodromy(lams, extended=True)
        s = np.asarray(signs, dtype=float).astype(_LD)
        d = m[:, 0, 0] + m[:, 1, 1]
        d1 = dm[:, 0, 0] + dm[:, 1, 1]
        diff = m[:, 0, 0] - m[:, 1, 1]
        ddiff = dm[:, 0, 0] - dm[:, 1, 1]
        prod = (diff * diff + 4 * m[:, 0, 1] * m[:, 1, 0])
        dprod = 2 * diff * ddiff + 4 * (dm[:, 0, 1] * m[:, 1, 0] + m[:, 0, 1] * dm[:, 1, 0])
        near = s * d > 0
        denom = np.where(near, s * d + 2, 1)
        ex = np.where(near, prod / denom, s * d - 2)
        dex = np.where(near, dprod / denom - prod * s * d1 / denom**2, s * d1)
        return ex.astype(float), dex.astype(float)


def monodromy(q: Potential, lam: float, steps: int = 1024) -> FloquetResult:
    if steps < 64:
        raise ValueError("monodromy needs at least 64 steps")
    if not math.isfinite(lam):
        raise ValueError("lambda must be finite")
    disc = Discriminant(q, required_steps(steps, lam - q.mean))
    m, dm = disc.monodromy([lam])
    m, dm = m[0], dm[0]
    return FloquetResult(float(lam), m, dm, float(np.trace(m)), float(np.trace(dm)))


def _bisect(f, lo, hi, width):
    """Vectorised bisection on sign-changing brackets.

    ``f(x, idx)`` evaluates the function of bracket ``idx`` at ``x``.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    sign_lo = np.sign(f(lo, np.arange(lo.size)))
    for _ in range(200):
        tol = np.maximum(width, 4 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi)))
        idx = np.flatnonzero((hi - lo) > tol)
        if idx.size == 0:
            break
        mid = 0.5 * (lo[idx] + hi[idx])
        same = np.sign(f(mid, idx)) == sign_lo[idx]
        lo[idx[same]] = mid[same]
        hi[idx[~same]] = mid[~same]
    return lo, hi


def _critical_points(disc: Discriminant, q: Potential, count: int, tol_eig: float):
    """The first ``count`` zeros of delta', one inside each spectral gap, ascending."""
    c = q.mean
    lam_floor = q.min_bound() - 1.0
    per_band = 8
    w = (np.arange(per_band * (count + 2)) + 0.5) * math.pi / per_band
    grid = np.concatenate([np.linspace(lam_floor, c, 9)[:-1], c + w**2])
    _, d1 = disc(grid)
    flips = np.flatnonzero(np.sign(d1[:-1]) * np.sign(d1[1:]) < 0)
    if flips.size < count:
        raise SpectrumError(
            f"failed to bracket gap {flips.size + 1}: found {flips.size} of {count} discriminant extrema"
        )
    flips = flips[:count]
    lo, hi = _bisect(lambda x, idx: disc(x)[1], grid[flips], grid[flips + 1], tol_eig)
    return 0.5 * (lo + hi), lam_floor


def _newton_polish(disc, signs, lo, hi, steps=5):
    """Newton on ``sign * delta - 2`` started mid-bracket; steps leaving the bracket are rejected."""
    x = 0.5 * (lo + hi)
    for _ in range(steps):
        f, fp = disc.excess(x, signs)
        with np.errstate(divide="ignore", invalid="ignore"):
            trial = x - f / fp
        ok = np.isfinite(trial) & (trial >= lo) & (trial <= hi)
        if not np.any(ok):
            break
        x = np.where(ok, trial, x)
    return x


def periodic_spectrum(
    q: Potential,
    K: int,
    steps: int = 1024,
    tol_eig: float = 1e-10,
    tol_gap: float = 1e-9,
) -> Spectrum:
    """Periodic eigenvalues lam_0..lam_2K of -d^2/dx^2 + q on [0, 2].

    These are the roots of delta = +2 (period 1) together with delta = -2
    (antiperiodic).  Every gap k contains exactly one critical point mu_k of
    the discriminant; (-1)^k delta(mu_k) - 2 decides whether the gap is open.
    Open gaps have their two edges bisected on each side of mu_k and then
    Newton-polished.  Closed gaps report mu_k twice.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if not (tol_eig > 0 and tol_gap > 0):
        raise ValueError("tolerances must be positive")
    lam_top = q.mean + ((K + 2.5) * math.pi) ** 2
    disc = Discriminant(q, required_steps(steps, lam_top - q.min_bound()))
    mu, lam_floor = _critical_points(disc, q, K + 1, tol_eig)

    k = np.arange(1, K + 1)
    signs = np.where(k % 2 == 0, 1.0, -1.0)
    peak = disc.excess(mu[:K], signs)[0]
    open_ = peak > DELTA_FLOOR

    # brackets: lam_0 in [floor, mu_1]; left edge of gap k in [mu_{k-1}, mu_k]; right edge in [mu_k, mu_{k+1}]
    lo = [lam_floor]
    hi = [mu[0]]
    sgn = [1.0]
    slots = [0]
    for j in np.flatnonzero(open_):
        left = mu[j - 1] if j > 0 else lam_floor
        lo += [left, mu[j]]
        hi += [mu[j], mu[j + 1]]
        sgn += [signs[j], signs[j]]
        slots += [2 * j + 1, 2 * j + 2]
    lo, hi, sgn = np.array(lo), np.array(hi), np.array(sgn)

    def f(x, idx):
        return disc.excess(x, sgn[idx])[0]

    f_lo, f_hi = f(lo, np.arange(lo.size)), f(hi, np.arange(hi.size))
    bad = np.flatnonzero(np.sign(f_lo) * np.sign(f_hi) >= 0)
    if bad.size:
        raise SpectrumError(f"failed to bracket periodic eigenvalue lambda_{slots[bad[0]]}")
    lo, hi = _bisect(f, lo, hi, tol_eig)
    roots = _newton_polish(disc, sgn, lo, hi)

    eig = np.empty(2 * K + 1)
    eig[1::2] = mu[:K]
    eig[2::2] = mu[:K]
    eig[slots] = roots
    return Spectrum(q.describe(), eig, disc.steps, tol_gap)


def gap_lengths(s: Spectrum) -> GapSequence:
    lo = s.eigenvalues[1::2]
    hi = s.eigenvalues[2::2]
    gam = hi - lo
    closed = gam < s.tol_gap * np.maximum(1.0, np.abs(hi))
    gam = np.where(closed, 0.0, gam)
    return GapSequence(gam)


def discriminant_residuals(q: Potential, s: Spectrum) -> np.ndarray:
    """| |delta(lam_j)| - 2 | at every eigenvalue."""
    d, _ = Discriminant(q, s.steps)(s.eigenvalues)
    return np.abs(np.abs(d) - 2.0)


def spectrum_to_csv(s: Spectrum) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "lambda_lo", "lambda_hi", "gamma"])
    lam0 = repr(float(s.eigenvalues[0]))
    w.writerow([0, lam0, lam0, ""])
    gam = gap_lengths(s).gammas
    for k in range(1, s.K + 1):
        lo, hi = s.edges(k)
        w.writerow([k, repr(lo), repr(hi), repr(float(gam[k - 1]))])
    return buf.getvalue()


def spectrum_from_csv(text: str, q_id: str = "csv", steps: int = 1024) -> Spectrum:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or rows[0]["k"] != "0":
        raise ValueError("spectrum CSV must start with the lambda_0 row")
    eig = [float(rows[0]["lambda_lo"])]
    for row in rows[1:]:
        eig += [float(row["lambda_lo"]), float(row["lambda_hi"])]
    return Spectrum(q_id, np.array(eig), steps)
