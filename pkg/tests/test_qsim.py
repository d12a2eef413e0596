import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from dqmesq import algebra as alg
from dqmesq.errors import DimensionMismatch, VanishingProjection, ZeroState
from dqmesq.generator import BosonicLayout, Generator, SystemSpec, build_lambda
from dqmesq.models import instantiate_model
from dqmesq.modes import ExpMode, pair_conjugates
from dqmesq.propagate import RdtState
from dqmesq.qsim import (
    ExpAction,
    LcuConfig,
    LcuPropagator,
    RegisterLayout,
    circuit_gates,
    decode_rdt,
    encode_rdt,
    lcu_step,
    run_lcu,
    split_generator,
)

from helpers import random_bosonic_instance, random_fermionic_instance
from oracles import dense_expm_trajectory, lcu_circuit_step, random_density

seeds = st.integers(0, 2 ** 32 - 1)


def _dense_parts(gen):
    L = gen.matrix.toarray()
    return 0.5 * (L + L.conj().T), 0.5 * (L - L.conj().T)


class TestRegisters:
    def test_spin_boson_qubits(self):
        job = instantiate_model("spin_boson", regime="low")
        lay = RegisterLayout.from_generator(job.generator)
        assert lay.n_qubits == 9 and lay.dim == 512
        assert dict(lay.registers) == {"sys_ket": 1, "sys_bra": 1, "mode0": 2, "mode1": 2, "mode2": 2}

    def test_siam_qubits(self):
        job = instantiate_model("siam", regime="low")
        lay = RegisterLayout.from_generator(job.generator)
        assert lay.n_qubits == 17
        assert sum(q for _, q in lay.registers) == 16
        assert lay.is_dense

    def test_padding(self):
        ms = pair_conjugates([ExpMode(0.2, 1.0)])
        gen = build_lambda(SystemSpec(np.diag([0.0, 1, 2]), {"b": np.diag([1.0, 0, -1])}), {"b": ms},
                           n_max=2)
        lay = RegisterLayout.from_generator(gen)
        assert dict(lay.registers) == {"sys_ket": 2, "sys_bra": 2, "mode0": 2}
        assert lay.data_dim == 64 and lay.positions.size == 27 and not lay.is_dense
        assert len(set(lay.positions.tolist())) == 27
        qm = lay.qubit_map()
        assert qm["ancilla"] == [0] and qm["mode0"] == [5, 6]


class TestEncoding:
    def test_pure_vacuum(self):
        job = instantiate_model("spin_boson", regime="low")
        qs = encode_rdt(job.initial_state(), RegisterLayout.from_generator(job.generator))
        assert qs.Z == 1.0
        assert np.count_nonzero(qs.amplitudes) == 1

    @given(seeds)
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        sys_, ms = random_bosonic_instance(rng, d=3, n_pairs=1)
        gen = build_lambda(sys_, ms, n_max=2)
        lay = RegisterLayout.from_generator(gen)
        v = rng.normal(size=gen.dim) + 1j * rng.normal(size=gen.dim)
        qs = encode_rdt(v, lay)
        assert abs(np.linalg.norm(qs.amplitudes) - 1) <= 1e-12 and qs.Z > 0
        assert np.max(np.abs(decode_rdt(qs) - v)) <= 1e-14 * np.max(np.abs(v)) * 10

    def test_zero_state(self):
        job = instantiate_model("spin_boson", regime="low")
        lay = RegisterLayout.from_generator(job.generator)
        with pytest.raises(ZeroState):
            encode_rdt(np.zeros(job.generator.dim), lay)
        with pytest.raises(DimensionMismatch):
            encode_rdt(np.ones(3), lay)


class TestSplit:
    def test_hermitian(self, rng):
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        H = A + A.conj().T
        L0, L1 = split_generator(H)
        assert L1.nnz == 0 or abs(L1).max() == 0

    def test_pure_decay(self):
        L = sp.diags(-1j * np.array([0.5, 1.0, 2.0]))
        L0, L1 = split_generator(L)
        assert abs(L0).max() == 0
        assert abs(L1 - L).max() == 0

    def test_spin_boson_reconstruction(self):
        gen = instantiate_model("spin_boson", regime="high").generator
        L0, L1 = split_generator(gen)
        assert abs(L0 + L1 - gen.matrix).max() <= 1e-13
        assert abs(L0 - L0.getH()).max() <= 1e-13
        assert abs(L1 + L1.getH()).max() <= 1e-13


class TestExpAction:
    def test_taylor_matches_expm(self, rng):
        n = 40
        M = sp.random(n, n, density=0.2, random_state=rng) * 3 + 0j
        v = rng.normal(size=n) + 0j
        dense = ExpAction(M, -0.7)(v)
        taylor = ExpAction(M, -0.7, dense_limit=10)(v)
        assert taylor.shape == v.shape
        assert np.max(np.abs(dense - taylor)) <= 1e-12 * np.max(np.abs(dense))


class TestLcuStep:
    @given(seeds, st.sampled_from([1, 2]), st.sampled_from(["fused", "gates"]),
           st.floats(0.01, 0.5), st.floats(0.001, 0.1))
    def test_matches_explicit_circuit(self, seed, cap, path, eps, dt):
        rng = np.random.default_rng(seed)
        sys_, ms = random_bosonic_instance(rng, d=2, n_pairs=1)
        gen = build_lambda(sys_, ms, n_max=cap)
        cfg = LcuConfig(eps=eps, dt=dt)
        prop = LcuPropagator(gen, cfg)
        if path == "gates":
            prop._fused = None
        lay = prop.layout
        L0, L1 = _dense_parts(gen)
        S = np.zeros((lay.data_dim, gen.dim))
        S[lay.positions, np.arange(gen.dim)] = 1.0
        eye = np.eye(gen.dim)
        U0 = S @ sla.expm(-1j * L0 * dt) @ S.T + (np.eye(lay.data_dim) - S @ S.T)
        Up = 1j * S @ sla.expm(-1j * eps * (eye - 1j * L1 * dt)) @ S.T
        Um = -1j * S @ sla.expm(1j * eps * (eye - 1j * L1 * dt)) @ S.T
        v = rng.normal(size=gen.dim) + 1j * rng.normal(size=gen.dim)
        qs = encode_rdt(v, lay)
        ref, p = lcu_circuit_step(qs.data(0), U0, Up, Um)
        out = lcu_step(qs, prop)
        assert np.max(np.abs(out.data(0) - ref)) <= 1e-12
        assert np.max(np.abs(out.data(1))) == 0
        assert out.Z == pytest.approx(qs.Z * p / math.sin(eps), rel=1e-12)
        assert abs(np.linalg.norm(out.amplitudes) - 1) <= 1e-12

    def test_closed_system_is_exactly_unitary(self, rng):
        # Lambda1 = 0: the LCU branch is sin(eps) * I and the ledger divides it out
        H = rng.normal(size=(2, 2))
        H = H + H.T
        lay = BosonicLayout(2, alg.FockLayout((1,)))
        L = alg.kron(alg.lift_system_superop(H, "left", 2) - alg.lift_system_superop(H, "right", 2),
                     alg.identity(2))
        gen = Generator(L, lay, [])
        cfg = LcuConfig(eps=0.3, dt=0.05)
        rho = random_density(rng, 2)
        v = lay.product_state(rho)
        qs = lcu_step(encode_rdt(v, RegisterLayout.from_generator(gen)), LcuPropagator(gen, cfg))
        exact = sla.expm(-1j * 0.05 * L.toarray()) @ v
        assert np.max(np.abs(decode_rdt(qs) - exact)) <= 1e-13

    def test_pure_decay_step(self):
        gamma, eps, dt = 1.3, 0.05, 0.01
        sys_ = SystemSpec(np.zeros((1, 1)), {"b": np.ones((1, 1))})
        gen = build_lambda(sys_, {"b": pair_conjugates([ExpMode(0.0, gamma)])}, n_max=3)
        v = np.ones(gen.dim, dtype=complex)
        qs = lcu_step(encode_rdt(v, RegisterLayout.from_generator(gen)),
                      LcuPropagator(gen, LcuConfig(eps=eps, dt=dt)))
        got = decode_rdt(qs)
        for n in range(4):
            x = gamma * n * dt
            bound = 1.1 * (x * x / 2 + eps * eps * x / 3) + 1e-15
            assert abs(got[n] - math.exp(-x)) <= bound

    def test_spin_boson_per_step_deviation(self):
        job = instantiate_model("spin_boson", regime="high")
        gen = job.generator
        prop = LcuPropagator(gen, LcuConfig(eps=0.05, dt=0.01))
        v = job.initial_state().vec
        exact = sla.expm(-1j * 0.01 * gen.matrix.toarray()) @ v
        got = decode_rdt(lcu_step(encode_rdt(v, prop.layout), prop))
        assert np.max(np.abs(got / np.linalg.norm(got) - exact / np.linalg.norm(exact))) <= 5e-4

    def test_ancilla_must_start_in_zero(self):
        job = instantiate_model("spin_boson", regime="low")
        prop = LcuPropagator(job.generator, job.lcu)
        qs = encode_rdt(job.initial_state(), prop.layout)
        qs.amplitudes[-1] = 0.5
        with pytest.raises(ValueError):
            lcu_step(qs, prop)

    def test_vanishing_projection(self):
        dt = 0.1
        lay = BosonicLayout(1, alg.FockLayout((1,)))
        gen = Generator(alg.csr(sp.identity(2) * (-1j / dt)), lay, [])
        prop = LcuPropagator(gen, LcuConfig(eps=0.2, dt=dt))
        with pytest.raises(VanishingProjection):
            lcu_step(encode_rdt(np.array([1.0, 0.5], complex), prop.layout), prop)


class TestRunLcu:
    def test_zero_time(self):
        job = instantiate_model("spin_boson", regime="high")
        traj = run_lcu(job.generator, job.rho0, job.lcu, 0.0)
        assert len(traj.records) == 1 and np.array_equal(traj.records[0], job.rho0)

    def test_decoded_trace_is_one(self):
        job = instantiate_model("spin_boson", regime="low")
        traj = run_lcu(job.generator, job.rho0, job.lcu, 2.0, stride=20)
        for rho in traj.records:
            assert abs(np.trace(rho) - 1) <= 1e-15

    def test_sampled_mode(self):
        job = instantiate_model("spin_boson", regime="low")
        a = run_lcu(job.generator, job.rho0, replace(job.lcu, sampled=True, seed=7), 0.5)
        b = run_lcu(job.generator, job.rho0, replace(job.lcu, sampled=True, seed=7), 0.5)
        c = run_lcu(job.generator, job.rho0, job.lcu, 0.5)
        assert a.shots == b.shots > 50
        assert all(np.array_equal(x, y) for x, y in zip(a.records, c.records))

    def test_fermionic(self, rng):
        sys_, ms = random_fermionic_instance(rng, 1, 2)
        gen = build_lambda(sys_, ms)
        rho0 = np.diag([0.3, 0.7]).astype(complex)
        cfg = LcuConfig(eps=0.01, dt=0.01)
        traj = run_lcu(gen, rho0, cfg, 1.0, stride=50)
        ref = dense_expm_trajectory(-1j * gen.matrix, gen.layout.product_state(rho0), traj.times)
        for rho, v in zip(traj.records, ref):
            blk = gen.layout.vacuum_block(v)
            assert np.max(np.abs(rho - blk / np.trace(blk))) <= 5e-3

    def test_eps_scaling_small_model(self):
        sys_, ms = random_bosonic_instance(np.random.default_rng(3), d=2, n_pairs=1)
        gen = build_lambda(sys_, ms, n_max=2)
        rho0 = np.diag([0, 1.0]).astype(complex)
        times = np.linspace(0, 2, 11)
        ref = dense_expm_trajectory(-1j * gen.matrix, gen.layout.product_state(rho0), times)
        ref = [gen.layout.vacuum_block(v) / np.trace(gen.layout.vacuum_block(v)) for v in ref]
        errs = []
        for eps in (0.2, 0.1, 0.05):
            traj = run_lcu(gen, rho0, LcuConfig(eps=eps, dt=1e-4), 2.0, stride=2000)
            errs.append(max(np.max(np.abs(a - b)) for a, b in zip(traj.records, ref)))
        ratios = [errs[0] / errs[1], errs[1] / errs[2]]
        assert all(3 <= r <= 5 for r in ratios), (errs, ratios)

    def test_dt_scaling_and_trotter_convergence(self):
        job = instantiate_model("spin_boson", {"t_final": 2.0}, regime="low")
        gen, rho0 = job.generator, job.rho0
        ref = dense_expm_trajectory(-1j * gen.matrix, job.initial_state().vec, [2.0])[0]
        ref = gen.layout.vacuum_block(ref)
        ref /= np.trace(ref)

        def final(cfg):
            return run_lcu(gen, rho0, cfg, 2.0, stride=10 ** 6).records[-1]

        err, gap = [], []
        for dt in (0.02, 0.01, 0.005):
            exact = final(LcuConfig(eps=0.01, dt=dt))
            trot = final(LcuConfig(eps=0.01, dt=dt, backend="trotter"))
            err.append(np.max(np.abs(exact - ref)))
            gap.append(np.max(np.abs(trot - exact)))
        for a, b in zip(err, err[1:]):
            assert 1.7 <= a / b <= 4.5
        for a, b in zip(gap, gap[1:]):
            assert a / b >= 1.7


def test_circuit_gates():
    job = instantiate_model("spin_boson", regime="low")
    gates = circuit_gates(job.generator, job.lcu)
    names = [g["gate"] for g in gates]
    assert names == ["H", "U0", "U+eps", "U-eps", "RY", "PROJECT"]
    assert gates[2]["control_state"] == 0 and gates[3]["control_state"] == 1
    assert gates[4]["angle"] == pytest.approx(-math.pi / 2)
    assert gates[1]["targets"] == list(range(1, 9))
    trot = circuit_gates(job.generator, replace(job.lcu, backend="trotter"))
    assert sum(g["gate"].startswith("U0") for g in trot) >= 1


def test_config_invariants():
    for bad in ({"eps": 0}, {"eps": 1}, {"dt": 0}, {"backend": "qpu"}):
        with pytest.raises(ValueError):
            LcuConfig(**bad)
