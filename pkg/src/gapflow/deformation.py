"""Flow of the angle-gradient field and the recursive action damping.

In Birkhoff coordinates the field attached to mode k is
``(x_k, y_k) / (x_k^2 + y_k^2)`` on the k-th plane and zero elsewhere.  It
moves the action linearly, ``I_k(t) = I_k(0) + t``, keeps the angle, and
exists on ``t > -I_k(0)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .birkhoff import BirkhoffVector, actions_of, seq_norm


class FlowDomainError(ValueError):
    pass


def _check_domain(z: BirkhoffVector, k: int, t: float) -> float:
    if not 1 <= k <= z.K:
        raise ValueError(f"mode {k} outside 1..{z.K}")
    if not math.isfinite(t):
        raise ValueError("flow time must be finite")
    ik = float(actions_of(z)[k - 1])
    if ik == 0.0:
        raise FlowDomainError(f"vector field undefined: I_{k} = 0 (closed gap)")
    if t <= -ik:
        raise FlowDomainError(f"flow leaves the domain: action reaches zero (t={t} <= -I_{k}={-ik})")
    return ik


def flow_exact(z: BirkhoffVector, k: int, t: float) -> BirkhoffVector:
    ik = _check_domain(z, k, t)
    scale = math.sqrt((ik + t) / ik)
    return z.with_pair(k, z[k] * scale)


def _field(p):
    return p / (p[0] * p[0] + p[1] * p[1])


def flow_numeric(z: BirkhoffVector, k: int, t: float, steps: int = 256) -> BirkhoffVector:
    """Classical RK4 on the planar field of mode k; the other modes are copied."""
    _check_domain(z, k, t)
    if steps < 16:
        raise ValueError("flow_numeric needs at least 16 steps")
    h = t / steps
    p = np.array(z[k], dtype=float)
    for _ in range(steps):
        k1 = _field(p)
        k2 = _field(p + 0.5 * h * k1)
        k3 = _field(p + 0.5 * h * k2)
        k4 = _field(p + h * k3)
        p = p + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(p)):
            raise FlowDomainError("numerical flow left the domain")
    return z.with_pair(k, p)


def stage_threshold(n: int, alpha: float, epsilon: float) -> float:
    """Bound on ``2 I_n`` after stage n: ``epsilon^2 / (n^(1 + 2 alpha) 2^n)``."""
    return epsilon**2 / (n ** (1 + 2 * alpha) * 2.0**n)


@dataclass
class DampingStage:
    n: int
    threshold: float
    damped: bool
    post_actions: np.ndarray
    weighted_norm_sq: float
    tail_sq: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "threshold": self.threshold,
            "damped": self.damped,
            "norm_sq": self.weighted_norm_sq,
            "tail_sq": self.tail_sq,
            "post_actions": [float(v) for v in self.post_actions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DampingStage":
        return cls(
            int(d["n"]),
            float(d["threshold"]),
            bool(d["damped"]),
            np.array(d.get("post_actions", []), dtype=float),
            float(d["norm_sq"]),
            float(d.get("tail_sq", math.nan)),
        )


@dataclass
class DampingReport:
    epsilon: float
    alpha: float
    stages: list[DampingStage] = field(default_factory=list)
    N_star: int | None = None
    final: BirkhoffVector | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "epsilon": self.epsilon,
                "alpha": self.alpha,
                "N_star": self.N_star,
                "stages": [s.to_dict() for s in self.stages],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DampingReport":
        d = json.loads(text)
        return cls(
            float(d["epsilon"]),
            float(d["alpha"]),
            [DampingStage.from_dict(s) for s in d["stages"]],
            None if d["N_star"] is None else int(d["N_star"]),
        )


def _weights(K: int, alpha: float) -> np.ndarray:
    return np.arange(1, K + 1, dtype=float) ** (1 + 2 * alpha)


def damping_sequence(z0: BirkhoffVector, alpha: float, epsilon: float) -> DampingReport:
    """Drive each action below its stage threshold, one mode at a time.

    Stage n keeps the vector when ``2 I_n`` is already below the threshold,
    otherwise flows mode n for time ``threshold/4 - I_n``, which lands
    ``2 I_n`` at half the threshold.  Flows of one mode never touch the
    others, so later actions keep their input values until their own stage.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not math.isfinite(alpha):
        raise ValueError("alpha must be finite")
    report = DampingReport(float(epsilon), float(alpha))
    w = _weights(z0.K, alpha)
    two_i0 = 2 * actions_of(z0)
    z = z0
    for n in range(1, z0.K + 1):
        thr = stage_threshold(n, alpha, epsilon)
        i_n = float(actions_of(z)[n - 1])
        damped = 2 * i_n >= thr
        if damped:
            z = flow_exact(z, n, thr / 4 - i_n)
        norm_sq = seq_norm(z, alpha + 0.5) ** 2
        report.stages.append(
            DampingStage(n, thr, damped, actions_of(z), norm_sq, float(np.sum(w[n:] * two_i0[n:])))
        )
        if report.N_star is None and math.sqrt(norm_sq) < 2 * epsilon:
            report.N_star = n
    report.final = z
    return report


@dataclass
class NormBoundCheck:
    passed: bool
    failed_stage: int | None = None
    reason: str = ""
    slack: list[float] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


def verify_norm_bound(report: DampingReport, z0: BirkhoffVector, rtol: float = 1e-12) -> NormBoundCheck:
    """Recheck every stage of a damping report against ``z0`` from scratch.

    Per stage n: the recorded threshold, ``2 I_j <= threshold_j`` for j <= n,
    ``I_j`` untouched for j > n, the recorded weighted norm, and the bound
    ``norm^2 <= epsilon^2 sum_{j<=n} 2^-j + sum_{j>n} j^(1+2 alpha) |z_j^0|^2``.
    """
    eps, alpha = report.epsilon, report.alpha
    K = z0.K
    w = _weights(K, alpha)
    i0 = actions_of(z0)
    thresholds = np.array([stage_threshold(j, alpha, eps) for j in range(1, K + 1)])
    out = NormBoundCheck(True)

    def fail(n, why):
        out.passed, out.failed_stage, out.reason = False, n, why
        return out

    if len(report.stages) != K:
        return fail(len(report.stages) + 1, f"report has {len(report.stages)} stages, expected {K}")
    for idx, st in enumerate(report.stages):
        n = idx + 1
        acts = np.asarray(st.post_actions, dtype=float)
        if st.n != n or acts.shape != (K,):
            return fail(n, "stage index or action vector malformed")
        if not math.isclose(st.threshold, thresholds[n - 1], rel_tol=rtol):
            return fail(n, "recorded threshold differs from recomputation")
        over = np.flatnonzero(2 * acts[:n] > thresholds[:n] * (1 + rtol))
        if over.size:
            return fail(n, f"2 I_{over[0] + 1} exceeds its threshold")
        moved = np.flatnonzero(~np.isclose(acts[n:], i0[n:], rtol=rtol, atol=0.0))
        if moved.size:
            return fail(n, f"I_{n + moved[0] + 1} changed before its stage")
        lhs = float(np.sum(w * 2 * acts))
        if not math.isclose(lhs, st.weighted_norm_sq, rel_tol=1e-9, abs_tol=1e-300):
            return fail(n, "recorded weighted norm differs from recomputation")
        rhs = eps**2 * (1 - 2.0**-n) + float(np.sum(w[n:] * 2 * i0[n:]))
        out.slack.append(rhs - lhs)
        if lhs > rhs * (1 + rtol):
            return fail(n, "weighted norm exceeds the damping bound")
    return out
