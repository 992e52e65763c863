"""Acceptance suite: one test per primary criterion, each printing a
pass line with the measured figure of merit.  Run with `pytest -s` to see
the report lines; tolerances are pinned here and nowhere else."""

import itertools
import time

import numpy as np

from resetcorr.keldysh import (
    NestedBracket,
    accessible_permutations,
    evaluate_words,
    expand,
    missing_permutations,
    nested_bracket_matrix,
)
from resetcorr.qmat import (
    DensityMatrix,
    Operator,
    pauli_operator,
    random_density_mat,
    random_reflection_mat,
)
from resetcorr.channels import ChoiData, choi_from_transfer, kraus_from_choi, transfer_from_kraus
from resetcorr.protocol import (
    AncillaNoise,
    ProtocolSpec,
    hadamard_corr,
    run_robust_exact,
    run_robust_sampled,
)
from resetcorr.estimators import (
    estimate_signed,
    estimate_three_point,
    estimate_two_point,
    shots_for_precision,
    three_point_aux_exact,
    two_point_aux_exact,
)
from resetcorr.fermion import (
    ModelParams,
    equilibrium_occupation,
    green_retarded,
    green_retarded_via_protocol,
    infinitesimal_kraus,
    integrated_channel_factory,
    integrated_kraus,
)

FIG4 = ModelParams(J=1.0, Omega=1.0, Gamma=1.0 / 16.0, beta=100.0, k=-0.5)
# t' = 0 with 40 points spanning (0, 19.5]; the protocol needs t > t'
FIG4_TIMES = np.linspace(0.5, 19.5, 40)


def _report(name, detail):
    print(f"[PASS] {name}: {detail}")


def _kraus_apply(kraus, mat):
    return sum(k @ mat @ k.conj().T for k in kraus)


def _random_params(rng):
    return ModelParams(J=1.0, Omega=float(rng.uniform(0.0, 2.0)),
                       Gamma=float(rng.uniform(0.01, 0.4)),
                       beta=float(rng.uniform(0.2, 30.0)),
                       k=float(rng.uniform(-np.pi, np.pi)))


def test_fig4_exact_mode():
    start = time.time()
    err_int = 0.0
    for t in FIG4_TIMES:
        est = green_retarded_via_protocol(FIG4, float(t), 0.0)
        err_int = max(err_int, abs(est.value - green_retarded(FIG4, float(t), 0.0)))
    assert err_int <= 1e-4
    err_tro = 0.0
    for t in FIG4_TIMES:
        est = green_retarded_via_protocol(FIG4, float(t), 0.0, channel="trotter",
                                          dt=0.05)
        err_tro = max(err_tro, abs(est.value - green_retarded(FIG4, float(t), 0.0)))
    assert err_tro <= 5e-3
    elapsed = time.time() - start
    assert elapsed <= 10.0
    _report("fig4 exact", f"integrated max err {err_int:.2e} (<=1e-4), "
            f"trotter dt=0.05 max err {err_tro:.2e} (<=5e-3), {elapsed:.1f}s (<=10s)")


def test_fig4_sampled_mode():
    start = time.time()
    within = 0
    late_within = 0
    late_total = 0
    for i, t in enumerate(FIG4_TIMES):
        est = green_retarded_via_protocol(FIG4, float(t), 0.0, shots=10000,
                                          seed=42 + 1000 * i)
        ana = green_retarded(FIG4, float(t), 0.0)
        ok = (abs(est.value.real - ana.real) <= 3 * est.stderr_re
              and abs(est.value.imag - ana.imag) <= 3 * est.stderr_im)
        within += ok
        if 10.0 <= t <= 19.0:
            late_total += 1
            late_within += ok
    elapsed = time.time() - start
    assert within >= 0.95 * len(FIG4_TIMES)
    assert late_total > 0 and late_within >= 0.95 * late_total
    assert elapsed <= 300.0
    _report("fig4 sampled", f"{within}/{len(FIG4_TIMES)} points within 3 sigma "
            f"({late_within}/{late_total} in t in [10,19]), {elapsed:.1f}s (<=300s)")


def test_envelope_property():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        p = _random_params(rng)
        t_prime = float(rng.uniform(0.0, 2.0))
        t = t_prime + float(rng.uniform(0.1, 6.0))
        n_ref = float(rng.uniform(0.0, 1.0))
        est = green_retarded_via_protocol(p, t, t_prime, n_ref=n_ref)
        worst = max(worst, abs(abs(est.value) - np.exp(-p.Gamma * (t - t_prime))))
    assert worst <= 1e-6
    _report("envelope |G_R| = exp(-Gamma dt)",
            f"100 random draws, worst deviation {worst:.2e} (<=1e-6)")


def test_two_point_oracle_equivalence():
    rng = np.random.default_rng(12)
    letters = ("X", "Y", "Z")
    worst = 0.0
    for _ in range(50):
        fac = integrated_channel_factory(_random_params(rng))
        t1 = float(rng.uniform(0.0, 2.0))
        t2 = t1 + float(rng.uniform(0.2, 3.0))
        alpha = int(rng.integers(0, 2))
        o1 = pauli_operator(str(rng.choice(letters)))
        o2 = pauli_operator(str(rng.choice(letters)))
        rho = DensityMatrix(random_density_mat(2, rng))
        spec = ProtocolSpec((t1, t2), (o1, o2), (alpha,), fac, rho)
        est = estimate_two_point(run_robust_exact(spec), two_point_aux_exact(spec),
                                 alpha)
        # independent oracle: raw Kraus algebra for both orderings
        ch = fac(t1, t2)
        t_ab = np.trace(o2.mat @ _kraus_apply(ch.kraus, o1.mat @ rho.mat))
        t_ba = np.trace(o2.mat @ _kraus_apply(ch.kraus, rho.mat @ o1.mat))
        oracle = (1j**alpha) * ((1j**alpha) * t_ab + (1j**-alpha) * t_ba)
        worst = max(worst, abs(est.value - oracle))
    assert worst <= 1e-10
    _report("two-point oracle equivalence",
            f"50 instances, worst |estimate - trace| {worst:.2e} (<=1e-10)")


def test_three_point_oracle_equivalence():
    rng = np.random.default_rng(13)
    worst = 0.0
    pair_iter = itertools.cycle(itertools.product((0, 1), (0, 1)))
    seen_pairs = set()
    for _ in range(25):
        fac = integrated_channel_factory(_random_params(rng))
        t1 = float(rng.uniform(0.0, 1.0))
        t2 = t1 + float(rng.uniform(0.2, 1.5))
        t3 = t2 + float(rng.uniform(0.2, 1.5))
        ops = tuple(Operator(random_reflection_mat(rng)) for _ in range(3))
        rho = DensityMatrix(random_density_mat(2, rng))
        alpha = next(pair_iter)
        seen_pairs.add(alpha)
        spec = ProtocolSpec((t1, t2, t3), ops, alpha, fac, rho)
        est = estimate_three_point(run_robust_exact(spec),
                                   three_point_aux_exact(spec), alpha)
        v21, v32 = fac(t1, t2), fac(t2, t3)
        t_a = np.trace(ops[2].mat @ _kraus_apply(
            v32.kraus, ops[1].mat @ _kraus_apply(v21.kraus, ops[0].mat @ rho.mat)))
        t_b = np.trace(ops[2].mat @ _kraus_apply(
            v32.kraus, ops[1].mat @ _kraus_apply(v21.kraus, rho.mat @ ops[0].mat)))
        a1, a2 = alpha
        c = (1j**(a2 + a1)) * t_a + (1j**(a2 - a1)) * t_b
        oracle = (1j**(a1 + a2)) * (c + np.conj(c))
        worst = max(worst, abs(est.value - oracle))
        # the bracket correspondence: i^sum * C equals the nested bracket
        # built from the four accessible orderings
        s1, s2 = (1 if a1 == 0 else -1), (1 if a2 == 0 else -1)
        nested = (np.conj(t_a) + s2 * t_b + s1 * np.conj(t_b) + s1 * s2 * t_a)
        worst = max(worst, abs(est.value - nested))
    assert seen_pairs == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert worst <= 1e-9
    _report("three-point oracle equivalence",
            f"25 instances over all four alpha pairs, worst {worst:.2e} (<=1e-9)")


def test_hadamard_contrast():
    fac = integrated_channel_factory(FIG4)
    rho = DensityMatrix(np.diag([0.8, 0.2]).astype(complex))
    spec = ProtocolSpec((0.0, 2.0), (pauli_operator("X"), pauli_operator("Y")),
                        (0,), fac, rho)
    gamma = 0.7
    noise = AncillaNoise(gamma)
    clean = hadamard_corr(spec)
    noisy = hadamard_corr(spec, noise)
    damping_dev = abs(noisy - np.exp(-gamma * 2.0) * clean)
    assert damping_dev <= 1e-9
    t_clean = run_robust_exact(spec)
    t_noisy = run_robust_exact(spec, noise=noise)
    assert np.array_equal(t_clean.probs, t_noisy.probs)
    assert np.array_equal(t_clean.cond_expect, t_noisy.cond_expect)
    r_clean = run_robust_sampled(spec, 1000, seed=5)
    r_noisy = run_robust_sampled(spec, 1000, seed=5, noise=noise)
    assert r_clean == r_noisy
    _report("hadamard contrast", f"interferometric correlator damped by "
            f"exp(-gamma dt) within {damping_dev:.1e} (<=1e-9); "
            f"reset protocol bitwise unchanged")


def test_shot_noise_scaling():
    fac = integrated_channel_factory(FIG4)
    rho = DensityMatrix(np.diag([0.8, 0.2]).astype(complex))
    spec = ProtocolSpec((0.0, 2.0), (pauli_operator("X"), pauli_operator("X")),
                        (0,), fac, rho)
    shot_counts = (100, 1000, 10000, 100000)
    errs = []
    for i, shots in enumerate(shot_counts):
        records = run_robust_sampled(spec, shots, seed=21 + i)
        errs.append(estimate_signed(records, (0,)).stderr_re)
    slope = np.polyfit(np.log10(shot_counts), np.log10(errs), 1)[0]
    assert abs(slope + 0.5) <= 0.05
    ratio = shots_for_precision(0.05, 0.9) / shots_for_precision(0.1, 0.9)
    assert abs(ratio - 4.0) < 0.05
    _report("shot scaling", f"log-log slope {slope:.3f} (-0.5 +/- 0.05); "
            f"halving epsilon multiplies the Hoeffding count by {ratio:.3f}")


def test_keldysh_accessibility():
    acc3 = accessible_permutations(3)
    assert acc3 == {(1, 2, 3), (1, 3, 2), (2, 3, 1), (3, 2, 1)}
    assert missing_permutations(3) == {(3, 1, 2), (2, 1, 3)}
    for n in range(2, 7):
        assert len(accessible_permutations(n)) == 2 ** (n - 1)
    rng = np.random.default_rng(14)
    worst = 0.0
    for n in (2, 3, 4):
        mats = [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
                for _ in range(n)]
        for alpha in itertools.product((0, 1), repeat=n - 1):
            bracket = NestedBracket(alpha)
            diff = np.abs(evaluate_words(expand(bracket), mats)
                          - nested_bracket_matrix(bracket, mats)).max()
            worst = max(worst, diff / max(1.0, np.abs(
                nested_bracket_matrix(bracket, mats)).max()))
    assert worst <= 1e-12
    _report("keldysh accessibility", "n=3 accessible/missing lists exact; "
            f"|accessible(n)| = 2^(n-1) for n<=6; substitution check {worst:.1e}")


def test_channel_pipeline():
    rng = np.random.default_rng(15)
    worst_complete = 0.0
    for _ in range(10):
        p = _random_params(rng)
        ch = infinitesimal_kraus(p, float(rng.uniform(0, 5)), 0.005)
        worst_complete = max(worst_complete, ch.completeness_defect())
    assert worst_complete <= 1e-14

    ch = integrated_kraus(FIG4, 0.0, 1.0)
    worst_action = 0.0
    for n in (equilibrium_occupation(FIG4, 0.0), 0.0, 0.5, 1.0):
        rho = np.diag([1 - n, n]).astype(complex)
        m = rho.copy()
        for j in range(1000):
            m = infinitesimal_kraus(FIG4, (j + 0.5) * 1e-3, 1e-3).apply_mat(m)
        worst_action = max(worst_action, np.abs(ch.apply_mat(rho) - m).max())
    assert worst_action <= 1e-5

    f = transfer_from_kraus(ch.kraus)
    back = kraus_from_choi(ChoiData(f, choi_from_transfer(f), interval=(0.0, 1.0)))
    worst_round = 0.0
    from resetcorr.channels import SIGMA
    for a in range(4):
        worst_round = max(worst_round, np.abs(
            _kraus_apply(back.kraus, SIGMA[a])
            - _kraus_apply(ch.kraus, SIGMA[a])).max())
    assert worst_round <= 1e-8
    _report("channel pipeline", f"one-step completeness {worst_complete:.1e} "
            f"(machine); integrated vs 1000 composed steps {worst_action:.2e} "
            f"(<=1e-5); process-matrix round trip {worst_round:.2e} (<=1e-8)")
