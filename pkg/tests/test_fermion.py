import math

import numpy as np
import pytest

from resetcorr.qmat import LOWER, P0, P1, RAISE
from resetcorr.channels import ChannelError, integrate_transfer_matrix, transfer_from_kraus
from resetcorr.fermion import (
    ModelParams,
    accumulated_phase,
    dispersion,
    equilibrium_occupation,
    fermi,
    green_greater,
    green_lesser,
    green_retarded,
    green_retarded_via_protocol,
    infinitesimal_kraus,
    integrated_gain,
    integrated_kraus,
    lindblad_generator,
    trotter_channel_factory,
)

FIG4 = ModelParams(J=1.0, Omega=1.0, Gamma=1.0 / 16.0, beta=100.0, k=-0.5)


def test_dispersion_values():
    assert dispersion(ModelParams(Omega=0.0, k=0.0), 3.0) == -2.0
    assert abs(dispersion(ModelParams(Omega=1.0, k=-0.5), 0.5) + 2.0) < 1e-15
    assert abs(dispersion(ModelParams(Omega=0.0, k=math.pi / 2), 1.0)) < 1e-15


def test_fermi_function():
    p = ModelParams(beta=3.7)
    assert fermi(p, 0.0) == 0.5
    rng = np.random.default_rng(0)
    for x in rng.normal(size=10):
        assert abs(fermi(p, x) + fermi(p, -x) - 1.0) < 1e-14
    cold = ModelParams(beta=100.0)
    val = fermi(cold, 2.0)
    assert 0.0 <= val < 1e-80  # ~ e^-200, no overflow


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(J=0.0)
    with pytest.raises(ValueError):
        ModelParams(Gamma=-0.1)
    with pytest.raises(ValueError):
        ModelParams(beta=0.0)


def test_accumulated_phase_basics():
    p = ModelParams(Omega=1.0, k=-0.5)
    assert accumulated_phase(p, 1.3, 1.3) == 0.0
    static = ModelParams(Omega=0.0, k=0.7)
    delta = 2.4
    assert abs(accumulated_phase(static, delta, 0.0)
               - (-2.0 * math.cos(0.7) * delta)) < 1e-14


def test_accumulated_phase_matches_integrated_propagator():
    # oracle: phase extracted from the unitary (Gamma = 0) transfer matrix
    p = ModelParams(J=1.0, Omega=1.0, Gamma=0.0, beta=10.0, k=-0.5)
    cd = integrate_transfer_matrix(lindblad_generator(p), 0.0, 1.0, 2000)
    f_num = math.atan2(cd.f[1, 2], cd.f[1, 1])
    assert abs(f_num - accumulated_phase(p, 1.0, 0.0)) < 1e-8


def test_infinitesimal_closed_system_limit():
    p = ModelParams(Gamma=0.0, Omega=0.5, k=0.2)
    ch = infinitesimal_kraus(p, 0.4, 0.01)
    k0 = ch.kraus[0]
    eps = dispersion(p, 0.4)
    expected = P0 + np.exp(-1j * eps * 0.01) * P1
    assert np.abs(k0 - expected).max() < 1e-14
    assert np.abs(ch.kraus[1]).max() == 0.0
    assert np.abs(ch.kraus[2]).max() == 0.0


def test_infinitesimal_completeness_exact():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = ModelParams(J=float(rng.uniform(0.5, 2)), Omega=float(rng.uniform(0, 2)),
                        Gamma=float(rng.uniform(0, 0.5)), beta=float(rng.uniform(0.1, 50)),
                        k=float(rng.uniform(-np.pi, np.pi)))
        ch = infinitesimal_kraus(p, float(rng.uniform(0, 5)), 0.01)
        assert ch.completeness_defect() < 5e-16


def test_infinitesimal_consistent_with_generator():
    # populations follow the generator exactly; the O(dt^2) deviation sits in
    # the coherence sector, so probe a state with off-diagonals
    p = ModelParams(Omega=0.8, Gamma=0.2, beta=2.0, k=0.1)
    gen = lindblad_generator(p)
    rho = np.array([[0.65, 0.2 - 0.1j], [0.2 + 0.1j, 0.35]], dtype=complex)
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        step = infinitesimal_kraus(p, 0.0, dt).apply_mat(rho)
        first_order = rho + dt * gen.rhs_mat(rho, 0.0)
        errs.append(np.abs(step - first_order).max() / dt**2)
    assert max(errs) / min(errs) < 1.5  # deviation is O(dt^2)


def test_infinitesimal_rejects_large_dt():
    p = ModelParams(Gamma=10.0, beta=0.5)
    with pytest.raises(ChannelError):
        infinitesimal_kraus(p, 0.0, 1.0)


def test_integrated_gamma_zero_is_phase_rotation():
    p = ModelParams(Gamma=0.0, Omega=1.0, k=-0.5)
    ch = integrated_kraus(p, 0.0, 1.8)
    f = accumulated_phase(p, 1.8, 0.0)
    coh = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |0><1| component
    out = ch.apply_mat(coh)
    assert abs(out[0, 1] - np.exp(1j * f)) < 1e-10
    assert abs(out[1, 0]) < 1e-12


def test_integrated_long_time_relaxes_to_fermi():
    p = ModelParams(Omega=0.0, Gamma=0.1, beta=4.0, k=0.8)
    ch = integrated_kraus(p, 0.0, 200.0)
    n0 = 0.9
    out = ch.apply_mat(np.diag([1 - n0, n0]).astype(complex))
    assert abs(out[1, 1].real - fermi(p, dispersion(p, 0.0))) < 1e-8


def test_integrated_matches_composed_infinitesimal_default_occupation():
    p = FIG4
    ch = integrated_kraus(p, 0.0, 1.0)
    n = equilibrium_occupation(p, 0.0)
    rho = np.diag([1 - n, n]).astype(complex)
    m = rho.copy()
    for j in range(1000):
        m = infinitesimal_kraus(p, (j + 0.5) * 1e-3, 1e-3).apply_mat(m)
    assert np.abs(ch.apply_mat(rho) - m).max() < 1e-6


def test_integrated_matches_composed_infinitesimal_any_occupation():
    p = FIG4
    ch = integrated_kraus(p, 0.0, 1.0)
    for n in (0.0, 0.3, 0.7, 1.0):
        rho = np.diag([1 - n, n]).astype(complex)
        m = rho.copy()
        for j in range(1000):
            m = infinitesimal_kraus(p, (j + 0.5) * 1e-3, 1e-3).apply_mat(m)
        assert np.abs(ch.apply_mat(rho) - m).max() < 1e-5


def test_printed_coefficient_variants_fail_validation():
    p = FIG4
    ch = integrated_kraus(p, 0.0, 1.0, coefficients="auto")
    assert ch.meta["coefficient_resolution"] == "derived"
    assert ch.meta.get("printed_variants_valid") is False
    # explicitly requested printed variants either fail to build or realize a
    # different map than the exact propagator
    for variant in ("printed_c", "printed_a"):
        try:
            printed = integrated_kraus(p, 0.0, 1.0, n_ref=0.3, coefficients=variant)
        except ChannelError:
            continue
        exact = integrated_kraus(p, 0.0, 1.0, coefficients="derived")
        diff = np.abs(transfer_from_kraus(printed.kraus)
                      - transfer_from_kraus(exact.kraus)).max()
        assert diff > 1e-3


def test_integrated_gain_static_closed_form():
    p = ModelParams(Omega=0.0, Gamma=0.2, beta=2.0, k=0.4)
    nf = fermi(p, dispersion(p, 0.0))
    expected = nf * (1 - math.exp(-2 * p.Gamma * 3.0))
    assert abs(integrated_gain(p, 0.0, 3.0) - expected) < 1e-12


def test_green_equal_time_and_envelope():
    assert green_retarded(FIG4, 1.5, 1.5) == -1j
    assert green_retarded(FIG4, 1.0, 2.0) == 0.0
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = ModelParams(J=float(rng.uniform(0.5, 2)), Omega=float(rng.uniform(0, 2)),
                        Gamma=float(rng.uniform(0, 0.4)), beta=float(rng.uniform(0.2, 50)),
                        k=float(rng.uniform(-np.pi, np.pi)))
        t_prime = float(rng.uniform(0, 2))
        t = t_prime + float(rng.uniform(0, 5))
        mag = abs(green_retarded(p, t, t_prime))
        assert abs(mag - math.exp(-p.Gamma * (t - t_prime))) < 1e-12


def test_greater_minus_lesser_occupation_independent():
    p = FIG4
    vals = [green_greater(p, 2.0, 0.5, n) - green_lesser(p, 2.0, 0.5, n)
            for n in (0.0, 0.3, 0.7, 1.0)]
    for v in vals[1:]:
        assert abs(v - vals[0]) < 1e-14


def test_protocol_green_closed_system():
    p = ModelParams(Gamma=0.0, Omega=0.0, k=0.3, beta=5.0)
    eps = dispersion(p, 0.0)
    est = green_retarded_via_protocol(p, 2.0, 0.5)
    assert abs(est.value - (-1j * np.exp(-1j * eps * 1.5))) < 1e-10


def test_protocol_green_matches_analytic_exact_mode():
    for t in (0.5, 4.0, 11.5, 19.5):
        est = green_retarded_via_protocol(FIG4, t, 0.0)
        assert abs(est.value - green_retarded(FIG4, t, 0.0)) < 1e-4


def test_protocol_green_occupation_insensitive():
    for n_ref in (0.0, 0.5, 1.0):
        est = green_retarded_via_protocol(FIG4, 3.0, 0.0, n_ref=n_ref)
        assert abs(est.value - green_retarded(FIG4, 3.0, 0.0)) < 1e-9


def test_protocol_green_sampled_three_sigma():
    misses = 0
    for i, t in enumerate(np.linspace(0.5, 15.0, 20)):
        est = green_retarded_via_protocol(FIG4, float(t), 0.0, shots=10000,
                                          seed=100 + i)
        ana = green_retarded(FIG4, float(t), 0.0)
        ok = (abs(est.value.real - ana.real) <= 3 * est.stderr_re
              and abs(est.value.imag - ana.imag) <= 3 * est.stderr_im)
        misses += 0 if ok else 1
    assert misses <= 1


def test_trotter_error_halves_with_dt():
    ts = np.linspace(1.0, 9.0, 5)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        errs.append(max(abs(green_retarded_via_protocol(FIG4, float(t), 0.0,
                                                        channel="trotter", dt=dt).value
                            - green_retarded(FIG4, float(t), 0.0)) for t in ts))
    for coarse, fine in zip(errs, errs[1:]):
        assert 1.6 <= coarse / fine <= 2.4


def test_trotter_factory_channel_properties():
    fac = trotter_channel_factory(FIG4, 0.05)
    ch = fac(0.0, 1.0)
    assert ch.provenance == "trotterized"
    assert ch.meta["steps"] == 20
    assert ch.completeness_defect() < 1e-8
