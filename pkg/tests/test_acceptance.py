"""Acceptance criteria, one test each; the summary prints a PASS/FAIL line per criterion."""
import math
import subprocess
import sys

import numpy as np
import pytest

from oracles import dense_gaps

from gapflow.actions import action_gap_ratio, action_sequence
from gapflow.birkhoff import BirkhoffVector, actions_of, seq_norm
from gapflow.deformation import damping_sequence, flow_exact, flow_numeric, stage_threshold, verify_norm_bound
from gapflow.floquet import gap_lengths, monodromy, periodic_spectrum
from gapflow.potentials import from_fourier, gardner_bracket, l2_gradients_fd, l2_norm, random_potential, zero_potential
from gapflow.regularity import resolvable, theorem2_experiment


def test_c01_free_spectrum(criterion):
    s = periodic_spectrum(zero_potential(), 10)
    k = np.arange(1, 11)
    expected = np.concatenate([[0.0], np.repeat((k * np.pi) ** 2, 2)])
    eig_err = np.max(np.abs(s.eigenvalues - expected) / np.maximum(1, expected))
    gmax = float(np.max(gap_lengths(s).gammas))
    lam = np.linspace(0, 400, 801)
    d_err = max(abs(monodromy(zero_potential(), float(v), steps=2048).delta - 2 * math.cos(math.sqrt(v))) for v in lam)
    criterion(
        "1 free spectrum",
        eig_err < 1e-8 and gmax < 1e-8 and d_err < 1e-8,
        f"eig rel err {eig_err:.1e}, max gap {gmax:.1e}, |delta - 2cos| {d_err:.1e}",
    )


def test_c02_wronskian(criterion):
    worst = 0.0
    for seed in range(5):
        q = random_potential(1.5, 0.5, 8, seed)
        for lam in np.random.default_rng(100 + seed).uniform(-10, 500, 100):
            m = monodromy(q, float(lam)).m
            worst = max(worst, abs(np.linalg.det(m) - 1))
    criterion("2 Wronskian", worst <= 1e-9, f"max |det - 1| {worst:.1e}")


def test_c03_perturbative_gap(criterion):
    q = from_fourier(0, [0.2], [])
    g1 = gap_lengths(periodic_spectrum(q, 3)).gammas[0]
    ref = dense_gaps(q, 3, 128)[0][0]
    rel = abs(g1 - ref) / ref
    criterion("3 perturbative gap", rel <= 0.05 and abs(g1 - 0.2) <= 0.01, f"gamma_1 {g1:.8f}, oracle {ref:.8f}, rel {rel:.1e}")


def test_c04_proposition_ratio(criterion):
    worst = 0.0
    for seed in range(3):
        q = random_potential(1.5, 0.05, 8, seed)
        s = periodic_spectrum(q, 8)
        ok = resolvable(gap_lengths(s).gammas, s.eigenvalues, s.tol_gap)
        for n in range(1, 7):
            if ok[n - 1]:
                worst = max(worst, abs(action_gap_ratio(q, n, s) - 1))
    criterion("4 action-gap ratio", worst <= 0.05, f"max |ratio - 1| {worst:.1e}")


def test_c05_zero_equivalence(criterion):
    cases = [
        (zero_potential(), 12),
        (zero_potential().shifted(3.0), 6),
        (from_fourier(0, [0.2], []), 6),
        (from_fourier(1, [0.0, 0.0, 0.05], [0, 0, 0]), 8),
        (random_potential(2.5, 0.05, 24, 1), 24),
        (random_potential(3.0, 0.1, 8, 2), 30),
    ]
    bad, closed, total = [], 0, 0
    for i, (q, K) in enumerate(cases):
        s = periodic_spectrum(q, K)
        g = gap_lengths(s).gammas
        a = action_sequence(q, s)
        closed += int(np.sum(g == 0))
        total += K
        if not np.array_equal(a == 0, g == 0) or np.any(a < 0):
            bad.append(i)
    criterion("5 zero equivalence", not bad and closed > 0, f"{closed}/{total} closed gaps, mismatching cases {bad}")


@pytest.mark.slow
def test_c06_poisson_commutativity(criterion):
    q = from_fourier(0, [0.2, 0.0], [0.0, 0.1])

    def F(p):
        return action_sequence(p, periodic_spectrum(p, 3))

    grads = l2_gradients_fd(F, q, modes=4)
    worst = 0.0
    for m, n in [(1, 2), (1, 3), (2, 3)]:
        b = gardner_bracket(grads[m - 1], grads[n - 1])
        worst = max(worst, abs(b) / (l2_norm(grads[m - 1]) * l2_norm(grads[n - 1])))
    criterion("6 Poisson commutativity", worst <= 1e-5, f"max relative bracket {worst:.1e}")


def test_c07_flow_agreement(criterion):
    rng = np.random.default_rng(7)
    num_err = act_err = 0.0
    identical = True
    for _ in range(20):
        K = int(rng.integers(1, 8))
        z = BirkhoffVector(rng.normal(size=(K, 2)))
        k = int(rng.integers(1, K + 1))
        ik = actions_of(z)[k - 1]
        t = float(rng.uniform(-0.9, 2.0) * ik)
        ex = flow_exact(z, k, t)
        nu = flow_numeric(z, k, t, steps=1024)
        num_err = max(num_err, float(np.max(np.abs(nu.pairs - ex.pairs))))
        act_err = max(act_err, abs(actions_of(ex)[k - 1] - ik - t))
        off = np.arange(1, K + 1) != k
        identical &= ex.pairs[off].tobytes() == z.pairs[off].tobytes() == nu.pairs[off].tobytes()
    criterion(
        "7 flow agreement",
        num_err <= 1e-6 and act_err <= 1e-12 and identical,
        f"numeric vs exact {num_err:.1e}, action drift {act_err:.1e}, off-mode identical {identical}",
    )


def test_c08_damping_certificate(criterion):
    rng = np.random.default_rng(8)
    failures, worst_ratio, runs = [], 0.0, 0
    for i in range(10):
        K = int(rng.integers(4, 25))
        k = np.arange(1, K + 1)
        decay = k ** -rng.uniform(1.1, 2.5)
        z0 = BirkhoffVector(rng.normal(size=(K, 2)) * decay[:, None])
        i0 = actions_of(z0)
        for eps in (0.05, 0.1):
            for alpha in (-1.0, -0.5, 0.0):
                runs += 1
                rep = damping_sequence(z0, alpha, eps)
                ok = bool(verify_norm_bound(rep, z0)) and rep.N_star is not None
                for st in rep.stages:
                    n = st.n
                    thr = stage_threshold(np.arange(1, n + 1), alpha, eps)
                    ok &= bool(np.all(2 * st.post_actions[:n] <= thr * (1 + 1e-12)))
                    ok &= np.array_equal(st.post_actions[n:], i0[n:])
                final = seq_norm(rep.final, alpha + 0.5)
                ok &= final < 2 * eps
                worst_ratio = max(worst_ratio, final / (2 * eps))
                if not ok:
                    failures.append((i, eps, alpha))
    criterion("8 damping certificate", not failures, f"{runs} runs, failures {failures}, max final/(2 eps) {worst_ratio:.3f}")


@pytest.mark.slow
def test_c09_theorem2_coherence(criterion):
    gap_dev = shift_dev = 0.0
    for beta in (1.0, 1.5, 2.0, 2.5):
        for seed in range(3):
            rep = theorem2_experiment(beta, 0.05, 24, seed)
            gap_dev = max(gap_dev, abs(rep.gap_fit.exponent - beta))
            shift_dev = max(shift_dev, abs(rep.moduli_fit.exponent - rep.gap_fit.exponent - 0.5))
    criterion(
        "9 gap decay coherence",
        gap_dev <= 0.25 and shift_dev <= 0.15,
        f"max |gap exp - beta| {gap_dev:.1e}, max |moduli shift - 0.5| {shift_dev:.1e}",
    )


def test_c10_cli_determinism(criterion, tmp_path):
    qf = tmp_path / "q.json"
    qf.write_text(random_potential(1.5, 0.05, 6, 3).to_json())
    zf = tmp_path / "z.json"
    zf.write_text(BirkhoffVector(np.full((4, 2), 0.5)).to_json())
    runs = [
        ["spectrum", "-i", str(qf), "-K", "6", "--format", "csv"],
        ["actions", "-i", str(qf), "-K", "6"],
        ["damp", "-i", str(zf), "--alpha", "-0.5", "--epsilon", "0.1"],
        ["regularity", "--beta", "2", "-K", "10", "--seed", "5"],
    ]
    differing = []
    for argv in runs:
        outs = [
            subprocess.run([sys.executable, "-m", "gapflow", *argv], capture_output=True, check=True).stdout
            for _ in range(2)
        ]
        if outs[0] != outs[1] or not outs[0]:
            differing.append(argv[0])
    criterion("10 determinism", not differing, f"{len(runs)} commands run twice, differing {differing}")
