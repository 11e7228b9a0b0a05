import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hi_metrology import core, oracle
from hi_metrology.core import InterferometerConfig, Scheme
from hi_metrology.errors import CutoffError, DegenerateStateError
from hi_metrology.oracle import (
    TwoModeState,
    apply_bs,
    apply_loss,
    apply_opa,
    apply_phase,
    bs_shell,
    measure,
    prepare_input,
    subtract_photons,
)


def fock(j, k, cutoff=4):
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    amps[j, k] = 1
    return TwoModeState(amps)


def test_prepare_input():
    vac = prepare_input(0.0, 10)
    assert vac.amps[0, 0] == 1 and np.count_nonzero(vac.amps) == 1
    coh = prepare_input(2.0, 30)
    assert coh.norm2 == pytest.approx(1.0, abs=1e-12)
    assert measure(coh, "n_a") == pytest.approx(4.0, abs=1e-10)
    assert not coh.amps[:, 1:].any()
    with pytest.raises(CutoffError) as info:
        prepare_input(3.0, 10)
    assert info.value.suggested > 10


def test_opa_examples():
    s = prepare_input(2.0, 40)
    assert np.array_equal(apply_opa(s, 0.0).amps, s.amps)
    vac = apply_opa(prepare_input(0.0, 80), 1.0)
    assert measure(vac, "n_a") == pytest.approx(math.sinh(1) ** 2, rel=1e-12)
    sq = apply_opa(prepare_input(2.0, 120), 1.0)
    assert measure(sq, "N") == pytest.approx(core.mean_photon_number(InterferometerConfig()), rel=1e-10)


def test_opa_unitarity_and_leak_check():
    s = apply_opa(prepare_input(1.0, 120), 1.0, theta=0.7)
    assert s.norm2 == pytest.approx(1.0, abs=1e-12)
    assert s.leakage() < 1e-10
    with pytest.raises(CutoffError):
        apply_opa(prepare_input(1.0, 20), 1.0)


def test_subtract_photons():
    s = prepare_input(1.0, 30)
    same = subtract_photons(s, 0, 0)
    assert np.array_equal(same.amps, s.amps) and same.norm_weight == pytest.approx(1.0)
    one = subtract_photons(fock(1, 0), 1, 0)
    assert one.amps[0, 0] == 1 and one.norm_weight == 1
    with pytest.raises(DegenerateStateError):
        subtract_photons(fock(0, 0), 1, 0)
    cfg = InterferometerConfig(m=1, n=1)
    sq = subtract_photons(apply_opa(prepare_input(2.0, 160), 1.0), 1, 1)
    assert sq.norm_weight == pytest.approx(core.q_value(cfg, 0, 0, 0, 0).real, rel=1e-6)


def test_phase_examples():
    s = prepare_input(1.0, 40)
    assert np.array_equal(apply_phase(s, 0.0, 1).amps, s.amps)
    assert apply_phase(fock(1, 0), math.pi, 1).amps[1, 0] == pytest.approx(-1)
    assert apply_phase(fock(2, 0), math.pi / 4, 2).amps[2, 0] == pytest.approx(-1)
    rotated = apply_phase(apply_opa(s, 0.5), 0.37, 2)
    assert rotated.norm2 == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        apply_phase(s, 0.1, 3)


def test_bs_examples():
    vac = apply_bs(fock(0, 0))
    assert vac.amps[0, 0] == pytest.approx(1)
    single = apply_bs(fock(1, 0))
    assert single.amps[1, 0] == pytest.approx(1 / math.sqrt(2))
    assert single.amps[0, 1] == pytest.approx(-1j / math.sqrt(2))
    hom = apply_bs(fock(1, 1))
    assert abs(hom.amps[1, 1]) < 1e-15
    assert abs(hom.amps[2, 0]) ** 2 == pytest.approx(0.5)


def test_bs_preserves_norm():
    s = apply_opa(prepare_input(1.5, 60), 0.6)
    out = apply_bs(apply_phase(s, 0.4, 1))
    assert out.norm2 == pytest.approx(s.norm2, abs=1e-12)


@pytest.mark.parametrize("N", [1, 2, 7, 40, 120, 250])
def test_shell_unitarity(N):
    U = bs_shell(N)
    assert np.abs(U.conj().T @ U - np.eye(N + 1)).max() < 1e-12


def test_loss_examples():
    s = prepare_input(1.2, 30)
    ens = apply_loss(s, 1.0)
    assert len(ens.branches) == 1 and np.allclose(ens.branches[0][0].amps, s.amps)
    one = apply_loss(fock(1, 0), 0.6)
    weights = sorted(w for _, w in one.branches)
    assert weights == pytest.approx([0.4, 0.6])
    coh = apply_loss(prepare_input(2.0, 40), 0.35)
    assert measure(coh, "n_a") == pytest.approx(0.35 * 4, rel=1e-12)
    with pytest.raises(ValueError):
        apply_loss(s, 0.0)


def test_loss_preserves_trace():
    s = subtract_photons(apply_opa(prepare_input(2.0, 120), 1.0), 1, 0).normalized()
    assert apply_loss(s, 0.3).trace == pytest.approx(1.0, abs=1e-12)


def test_measure_examples():
    assert measure(fock(0, 0), "X_a^2") == pytest.approx(0.5)
    assert measure(prepare_input(2.0, 40), "X_a") == pytest.approx(2 * math.sqrt(2), rel=1e-12)
    assert measure(fock(2, 3), "N") == 5
    assert measure(fock(2, 3), "n_a^3") == 8
    with pytest.raises(ValueError):
        measure(fock(0, 0), "p_a")


def test_phase_commutes_with_loss_for_linear_shifter():
    s = subtract_photons(apply_opa(prepare_input(1.5, 100), 0.8), 1, 1).normalized()
    phi, eta = 0.7, 0.6
    a = apply_loss(apply_phase(s, phi, 1), eta)
    b = apply_loss(s, eta)
    b.branches = [(apply_phase(st_, phi, 1), w) for st_, w in b.branches]
    for obs in ("X_a", "X_a^2", "n_a", "n_a^2"):
        assert measure(a, obs) == pytest.approx(measure(b, obs), abs=1e-10)


def test_session_paths_agree():
    cfg = InterferometerConfig(alpha_mag=1.5, g=0.7, m=1, n=2, phi=1.1, eta=0.7, theta=0.4, theta_alpha=0.3)
    s = oracle.OracleSession(cfg, 100)
    bs = s.homodyne()
    hb = s.homodyne(method="heisenberg")
    assert hb == pytest.approx(bs, rel=1e-12)
    assert bs == pytest.approx(core.homodyne_moments(cfg), rel=1e-9)


def test_pipeline_matches_core():
    cfg = InterferometerConfig(alpha_mag=2.0, g=1.0, m=1, n=1, scheme=Scheme.KERR, phi=0.013)
    res = oracle.pipeline(cfg)
    mean, second = core.homodyne_moments(cfg)
    assert res.mean_x == pytest.approx(mean, rel=1e-6)
    assert res.second_x == pytest.approx(second, rel=1e-6)
    assert res.lambda2 == pytest.approx(core.normalization(cfg), rel=1e-6)


def test_cutoff_doubling_converges():
    cfg = InterferometerConfig(alpha_mag=1.0, g=0.5, m=1, n=0, phi=0.4)
    c, big = oracle.converged_cutoff(cfg)
    small = oracle.OracleSession(cfg, c).moments()
    for key, value in small.as_dict().items():
        assert value == pytest.approx(big.as_dict()[key], rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(alpha=st.floats(0, 2), g=st.floats(0.05, 1), mn=st.integers(0, 2), phi=st.floats(0, math.pi))
def test_oracle_equivalence_random(alpha, g, mn, phi):
    cfg = InterferometerConfig(alpha_mag=alpha, g=g, m=mn, n=mn, phi=phi, scheme=Scheme.KERR)
    s = oracle.OracleSession(cfg, 160)
    mean, second = core.homodyne_moments(cfg)
    o_mean, o_second = s.homodyne(method="heisenberg")
    assert abs(mean - o_mean) <= 1e-6 * max(1.0, abs(o_second) ** 0.5)
    assert second == pytest.approx(o_second, rel=1e-6)
