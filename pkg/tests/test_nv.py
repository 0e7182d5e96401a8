from functools import reduce

import numpy as np
import pytest
from scipy import constants

from qudit_witness import criteria, linalg, nv
from qudit_witness.errors import (
    DenseCapExceeded,
    InvalidRange,
    ParseError,
    PolarizationOutOfRange,
    TooClose,
)
from qudit_witness.witness import ProtocolConfig, prepared_trace, undetectability_analysis


def kron(*ops):
    return reduce(np.kron, ops)


def random_cfg(rng, n, **kw):
    spins = [nv.NuclearSpin(*rng.normal(size=3), p=rng.uniform(-1, 1)) for _ in range(n)]
    return nv.NvConfig(spins, **kw)


def dipolar_scale(r_nm):
    ge = 2 * np.pi * 28.08e9
    gn = 2 * np.pi * 10.71e6
    return constants.mu_0 / (4 * np.pi) * ge * gn * constants.hbar / (r_nm * 1e-9) ** 3 * 1e-6


def test_dipolar_axial_and_planar():
    k = dipolar_scale(0.5)
    ax = nv.dipolar_couplings([0, 0, 0.5])
    assert ax[0] == 0 and ax[1] == 0
    assert ax[2] == pytest.approx(-2 * k, rel=1e-12)
    pl = nv.dipolar_couplings([0.3, 0.4, 0.0])
    assert pl[0] == pytest.approx(0, abs=1e-15) and pl[1] == pytest.approx(0, abs=1e-15)
    assert pl[2] == pytest.approx(k, rel=1e-12)


def test_dipolar_magnitude_and_symmetry(rng):
    r = rng.normal(size=3)
    r *= 0.5 / np.linalg.norm(r)
    a = np.array(nv.dipolar_couplings(r))
    assert 0.1 <= np.linalg.norm(a) <= 10
    assert np.allclose(np.array(nv.dipolar_couplings(2 * r)), a / 8, rtol=1e-12)
    phi = 0.7
    rot = np.array([[np.cos(phi), -np.sin(phi), 0], [np.sin(phi), np.cos(phi), 0], [0, 0, 1]])
    b = np.array(nv.dipolar_couplings(rot @ r))
    assert b[2] == pytest.approx(a[2], rel=1e-12)
    assert np.allclose(b[:2], rot[:2, :2] @ a[:2], rtol=1e-12)


def test_dipolar_too_close():
    with pytest.raises(TooClose):
        nv.dipolar_couplings([0.05, 0, 0])


def test_dense_model_one_spin():
    s = nv.NuclearSpin(0.3, -0.2, 0.9)
    cfg = nv.NvConfig([s])
    m = nv.build_dense_model(cfg)
    v = 0.3 * nv.SX - 0.2 * nv.SY + 0.9 * nv.SZ
    assert m.n_sys == 3 and m.dim_env == 2
    assert np.array_equal(m.couplings[2], v)
    assert np.array_equal(m.couplings[0], -m.couplings[2])
    assert np.array_equal(m.couplings[1], np.zeros((2, 2)))
    assert np.allclose(m.h_env, cfg.omega_n * nv.SZ)
    eps = m.epsilons
    assert eps[1] == 0.0
    assert eps[2] - eps[0] == pytest.approx(2 * 2 * np.pi * cfg.gamma_e * cfg.b_z)


def test_dense_model_two_spins(rng):
    cfg = random_cfg(rng, 2)
    m = nv.build_dense_model(cfg)
    v1, v2 = (s.a_zx * nv.SX + s.a_zy * nv.SY + s.a_zz * nv.SZ for s in cfg.spins)
    i2 = np.eye(2)
    assert np.allclose(m.couplings[2], kron(v1, i2) + kron(i2, v2), atol=0)
    assert np.allclose(m.h_env, cfg.omega_n * (kron(nv.SZ, i2) + kron(i2, nv.SZ)), atol=0)


def test_dense_cap_refusal():
    spins = nv.load_spin_table()
    with pytest.raises(DenseCapExceeded):
        nv.build_dense_model(nv.NvConfig(spins))


def test_per_spin_examples(rng):
    s = nv.NuclearSpin(*rng.normal(size=3))
    cfg = nv.NvConfig([s])
    for b in nv.BRANCHES:
        assert np.allclose(nv.per_spin_propagator(s, b, cfg, 0.0), np.eye(2), atol=1e-15)
    t = 1.7
    w = cfg.omega_n
    expected = np.diag([np.exp(-1j * w * t / 2), np.exp(1j * w * t / 2)])
    assert np.allclose(nv.per_spin_propagator(s, 0, cfg, t), expected, atol=1e-14)
    for b in (-1, 1):
        oracle = linalg.hermitian_propagator(nv.spin_generator(s, b, cfg), t)
        assert np.max(np.abs(nv.per_spin_propagator(s, b, cfg, t) - oracle)) <= 1e-12


def test_precession_frequency(rng):
    s = nv.NuclearSpin(*rng.normal(size=3))
    cfg = nv.NvConfig([s])
    for b in (-1, 0, 1):
        lam = np.linalg.eigvalsh(nv.spin_generator(s, b, cfg))
        assert lam[1] - lam[0] == pytest.approx(nv.precession_frequency(s, b, cfg), rel=1e-12)
        a_pl = abs(b) * np.hypot(s.a_zx, s.a_zy)
        m = np.sqrt(a_pl**2 + (cfg.omega_n + b * s.a_zz) ** 2)
        assert nv.precession_frequency(s, b, cfg) == pytest.approx(m, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_tensor_of_spin_propagators_is_conditional_propagator(rng, n):
    cfg = random_cfg(rng, n, include_free_phases=True)
    m = nv.build_dense_model(cfg)
    t = rng.uniform(0, 5)
    for k, b in enumerate(nv.BRANCHES):
        fac = kron(*[nv.per_spin_propagator(s, b, cfg, t) for s in cfg.spins])
        assert np.max(np.abs(fac - m.propagator(k, t))) <= 1e-10
        # free phase is a global scalar
        phase = np.exp(-1j * cfg.epsilons[k] * t)
        assert np.max(np.abs(phase * fac - m.propagator(k, t, True))) <= 1e-10


def test_initial_env():
    assert np.allclose(nv.spin_density(0.0), np.eye(2) / 2)
    assert np.allclose(nv.spin_density(1.0), np.diag([0.75, 0.25]))
    with pytest.raises(PolarizationOutOfRange):
        nv.spin_density(1.5)
    with pytest.raises(PolarizationOutOfRange):
        nv.NuclearSpin(0, 0, 1, p=-1.2)


def test_initial_env_product(rng):
    cfg = random_cfg(rng, 4)
    dense = nv.dense_initial_env(cfg)
    manual = np.diag(
        [
            np.prod([(2 + s.p * (1 if bit == "0" else -1)) / 4 for s, bit in zip(cfg.spins, bits)])
            for bits in (format(i, "04b") for i in range(16))
        ]
    )
    assert np.allclose(dense, manual, atol=1e-15)
    assert np.trace(dense) == pytest.approx(1.0)


def test_factorized_coherence_examples(rng):
    cfg = random_cfg(rng, 5)
    c = np.full(3, 1 / np.sqrt(3))
    for k in nv.BRANCHES:
        v = nv.factorized_prepared_coherence(cfg, k, 3.0, (0, 1), 0.0)
        assert v == pytest.approx(1 / 3, abs=1e-14)
    flat = nv.NvConfig([s.with_polarization(0.0) for s in cfg.spins])
    grid = np.linspace(0, 3, 9)
    vals = [nv.factorized_prepared_coherence(flat, k, 2.0, (-1, 1), grid, c) for k in nv.BRANCHES]
    assert np.max(np.abs(vals[0] - vals[1])) <= 1e-12
    assert np.max(np.abs(vals[0] - vals[2])) <= 1e-12


@pytest.mark.parametrize("free", [False, True])
def test_factorized_coherence_matches_dense(rng, free):
    cfg = random_cfg(rng, 3, include_free_phases=free)
    m = nv.build_dense_model(cfg)
    r0 = nv.dense_initial_env(cfg)
    grid = np.linspace(0, 3, 13)
    for k, b in enumerate(nv.BRANCHES):
        for i, j in [(0, 1), (0, 2), (1, 2)]:
            got = nv.factorized_prepared_coherence(
                cfg, b, 1.1, (nv.index_branch(i), nv.index_branch(j)), grid
            )
            want = prepared_trace(m, r0, k, 1.1, (i, j), grid, include_free_phase=free).values
            assert np.max(np.abs(got - want)) <= 1e-10


@pytest.mark.parametrize("n", [1, 2, 3])
def test_factorized_criteria_match_dense(rng, n):
    cfg = random_cfg(rng, n)
    m = nv.build_dense_model(cfg)
    r0 = nv.dense_initial_env(cfg)
    t = 1.9
    dense_one = criteria.class_one_check(m, r0, t, exhaustive=True)
    fac_one = nv.factorized_class_one(cfg, t, exhaustive=True)
    for (k, l, a), (k2, l2, b) in zip(dense_one, fac_one):
        assert (k, l) == (k2, l2)
        assert b == pytest.approx(a, rel=1e-9, abs=1e-13)
    dense_two = criteria.class_two_check(m, t, exhaustive=True)
    fac_two = nv.factorized_class_two(cfg, t, exhaustive=True)
    for (q, a), (q2, b) in zip(dense_two, fac_two):
        assert q == q2
        assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


def test_nv_criteria_unpolarized_and_polarized():
    cfg = nv.NvConfig(nv.load_spin_table())
    rep0 = nv.factorized_verdict(cfg.with_polarization(0.0), 3.0)
    assert all(d < 1e-12 for *_, d in rep0.class_one)
    rep1 = nv.factorized_verdict(cfg.with_polarization(1.0), 3.0)
    assert any(d > rep1.tolerance for *_, d in rep1.class_one)
    assert rep1.verdict.entangled


def test_nv_not_commuting():
    cfg = nv.NvConfig(nv.load_spin_table()[:3])
    rep = undetectability_analysis(nv.build_dense_model(cfg), np.linspace(0, 3, 5))
    assert not rep.all_commuting


def test_bundled_table():
    spins = nv.load_spin_table()
    assert len(spins) == 14
    s1 = spins[0]
    assert (s1.a_zx, s1.a_zy, s1.a_zz, s1.r_nm) == (1.37617, 0.0, 0.973096, 0.504422)
    s11 = spins[10]
    assert (s11.a_zx, s11.a_zy, s11.a_zz) == (0.0, 0.0, -0.420338)


def test_table_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ParseError):
        nv.load_spin_table(empty)
    bad = tmp_path / "bad.csv"
    bad.write_text("r_nm,a_zx,a_zy,a_zz,p\n0.5,1,2,3,0\n0.6,1,x,3,0\n")
    with pytest.raises(ParseError) as info:
        nv.load_spin_table(bad)
    assert info.value.row == 3 and info.value.column == "a_zy"
    header = tmp_path / "header.csv"
    header.write_text("a,b\n")
    with pytest.raises(ParseError):
        nv.load_spin_table(header)


def test_table_roundtrip(tmp_path):
    spins = nv.random_spins(3, 6, 0.5, 0.8, p=0.3)
    path = tmp_path / "t.csv"
    nv.write_spin_table(spins, path)
    back = nv.load_spin_table(path)
    assert [(s.a_zx, s.a_zy, s.a_zz, s.p, s.r_nm) for s in back] == [
        (s.a_zx, s.a_zy, s.a_zz, s.p, s.r_nm) for s in spins
    ]
    path2 = tmp_path / "t2.csv"
    nv.write_spin_table(back, path2)
    assert nv.load_spin_table(path2) == back


def test_random_spins():
    a = nv.random_spins(7, 20, 0.5, 0.7)
    assert a == nv.random_spins(7, 20, 0.5, 0.7)
    assert nv.random_spins(7, 0, 0.5, 0.7) == []
    for s in a:
        assert 0.5 <= s.r_nm <= 0.7
        assert np.allclose(nv.dipolar_couplings(s.position), s.coupling)
    with pytest.raises(InvalidRange):
        nv.random_spins(1, 3, 0.05, 0.7)
    with pytest.raises(InvalidRange):
        nv.random_spins(1, 3, 0.8, 0.7)


def test_witness_prep_distances_factorized():
    cfg = nv.NvConfig(nv.load_spin_table()).with_polarization(1.0)
    rep = nv.factorized_witness_scan(cfg, ProtocolConfig(3.0, (0, 1, 2), np.linspace(0, 3, 50)))
    assert rep.fired_pairs == {(0, 1), (0, 2), (1, 2)}
    assert all(v > 1e-8 for v in rep.prep_distances.values())
