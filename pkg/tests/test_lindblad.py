import math

import numpy as np
import numpy.testing as npt
import pytest

from stabsim.hamiltonian import CollapseSet
from stabsim.hilbert import (
    QUBIT, CompositeSpace, DensityMatrix, LinearOperator, ModeSpec,
    basis_state, lowering_op, number_op,
)
from stabsim.lindblad import (
    EvolutionError, SteadyStateError, build_liouvillian, evolve,
    residual_norm, steady_state, unvectorize, vectorize,
)


def tls_space():
    return CompositeSpace([ModeSpec("q", QUBIT, 2)])


def make_liouvillian(h, collapse_pairs, dims=None):
    dims = dims or [h.shape[0]]
    space = CompositeSpace([ModeSpec(f"m{i}", QUBIT, d)
                            for i, d in enumerate(dims)])
    H = LinearOperator(space, h)
    cols = CollapseSet([(LinearOperator(space, op), rate)
                        for op, rate in collapse_pairs])
    return build_liouvillian(H, cols)


def direct_rhs(h, collapse_pairs, rho):
    out = -1j * (h @ rho - rho @ h)
    for op, rate in collapse_pairs:
        od = op.conj().T
        out += rate * (op @ rho @ od - 0.5 * (od @ op @ rho + rho @ od @ op))
    return out


class TestBuildLiouvillian:
    def test_trivial_generator_is_zero(self):
        L = make_liouvillian(np.zeros((2, 2), dtype=complex), [])
        assert L.matrix.nnz == 0

    def test_matches_direct_evaluation_oracle(self):
        rng = np.random.default_rng(3)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h + h.conj().T
        c1 = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        c2 = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        pairs = [(c1, 0.7), (c2, 1.3)]
        L = make_liouvillian(h, pairs, dims=[4])
        for _ in range(10):
            g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            rho = g @ g.conj().T
            rho /= np.trace(rho).real
            lhs = unvectorize(L.matrix @ vectorize(rho), 4)
            npt.assert_allclose(lhs, direct_rhs(h, pairs, rho), atol=1e-12)

    @pytest.mark.parametrize("d", [3, 8])
    def test_trace_annihilation_on_operator_basis(self, d):
        # Tr[L(rho)] = 0 for every basis matrix: the generator is trace
        # preserving
        rng = np.random.default_rng(5)
        h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = h + h.conj().T
        c = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        L = make_liouvillian(h, [(c, 0.9)], dims=[d])
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                image = unvectorize(L.matrix @ vectorize(e), d)
                assert abs(np.trace(image)) < 1e-11

    def test_space_mismatch_rejected(self):
        space_a = tls_space()
        space_b = CompositeSpace([ModeSpec("q", QUBIT, 3)])
        H = LinearOperator(space_a, np.zeros((2, 2), dtype=complex))
        bad = CollapseSet([(LinearOperator(space_b,
                                           np.zeros((3, 3), dtype=complex)),
                            1.0)])
        with pytest.raises(ValueError, match="different space"):
            build_liouvillian(H, bad)


class TestEvolve:
    def test_exponential_decay(self):
        gamma = 0.8
        space = tls_space()
        H = LinearOperator(space, np.zeros((2, 2), dtype=complex))
        cols = CollapseSet([(lowering_op(space, 0), gamma)])
        L = build_liouvillian(H, cols)
        rho0 = DensityMatrix.from_state_vector(space, basis_state(space, (1,)))
        t = np.linspace(0.0, 4.0, 33)
        res = evolve(L, rho0, t, observables={"n": number_op(space, 0)})
        npt.assert_allclose(np.real(res.observables["n"]),
                            np.exp(-gamma * t), atol=1e-8)

    def test_rabi_oscillation_amplitude(self):
        # coherent drive, no dissipation: population follows sin^2 closely
        # over ten periods
        omega = 2 * math.pi * 1.0
        space = tls_space()
        h = 0.5 * omega * np.array([[0, 1], [1, 0]], dtype=complex)
        L = make_liouvillian(h, [])
        rho0 = DensityMatrix.from_state_vector(space, basis_state(space, (0,)))
        t = np.linspace(0.0, 10.0, 401)
        res = evolve(L, rho0, t, rtol=1e-10, atol=1e-12,
                     observables={"n": number_op(space, 0)})
        expected = np.sin(omega * t / 2.0) ** 2
        npt.assert_allclose(np.real(res.observables["n"]), expected,
                            atol=1e-6)

    def test_driven_damped_cavity_reaches_photon_formula(self):
        # steady <c^dag c> of a linear cavity matches the drive calibration
        from stabsim.rates import photon_number
        eps, delta, kappa = 2.0, 4.0, 1.5  # linear MHz
        dim = 25
        space = CompositeSpace([ModeSpec("r", "resonator", dim)])
        c = lowering_op(space, 0)
        two_pi = 2 * math.pi
        h = (two_pi * delta) * (c.dag() @ c).toarray() \
            + (two_pi * eps) * (c + c.dag()).toarray()
        L = make_liouvillian_res(space, h, [(c.toarray(), two_pi * kappa)])
        rho0 = DensityMatrix.from_state_vector(space, basis_state(space, (0,)))
        t = np.linspace(0.0, 12.0, 25)
        res = evolve(L, rho0, t, observables={"n": (c.dag() @ c)})
        n_ss = float(np.real(res.observables["n"][-1]))
        assert n_ss == pytest.approx(photon_number(eps, delta, kappa),
                                     rel=1e-3)

    def test_tolerance_convergence(self):
        # halving the tolerance moves the endpoint by far less than 1e-5
        rng = np.random.default_rng(9)
        h = rng.normal(size=(4, 4))
        h = (h + h.T).astype(complex)
        c = rng.normal(size=(4, 4)).astype(complex)
        L = make_liouvillian(h, [(c, 0.5)], dims=[4])
        rho0 = np.zeros((4, 4), dtype=complex)
        rho0[1, 1] = 1.0
        t = np.linspace(0.0, 5.0, 11)
        ends = []
        for rtol in (1e-8, 5e-9):
            res = evolve(L, rho0, t, rtol=rtol, atol=rtol * 1e-2,
                         observables={"p": np.diag([0, 1, 0, 0]).astype(complex)})
            ends.append(float(np.real(res.observables["p"][-1])))
        assert abs(ends[0] - ends[1]) < 1e-5

    def test_integrity_diagnostics(self):
        gamma = 0.3
        space = tls_space()
        H = LinearOperator(space,
                           np.array([[0, 1], [1, 0]], dtype=complex))
        L = build_liouvillian(H, CollapseSet([(lowering_op(space, 0), gamma)]))
        rho0 = DensityMatrix.from_state_vector(space, basis_state(space, (1,)))
        res = evolve(L, rho0, np.linspace(0, 20, 101))
        assert res.diagnostics["max_trace_drift"] <= 1e-8
        assert res.diagnostics["max_hermiticity_defect"] <= 1e-9
        assert res.diagnostics["min_eigenvalue"] >= -1e-7

    def test_positivity_abort(self):
        space = tls_space()
        L = build_liouvillian(
            LinearOperator(space, np.zeros((2, 2), dtype=complex)),
            CollapseSet([]))
        bad = np.diag([1.5, -0.5]).astype(complex)  # trace 1, not positive
        with pytest.raises(EvolutionError, match="positivity"):
            evolve(L, bad, np.linspace(0, 1, 5))

    def test_snapshots_validated(self):
        gamma = 0.5
        space = tls_space()
        L = build_liouvillian(
            LinearOperator(space, np.zeros((2, 2), dtype=complex)),
            CollapseSet([(lowering_op(space, 0), gamma)]))
        rho0 = DensityMatrix.from_state_vector(space, basis_state(space, (1,)))
        res = evolve(L, rho0, np.linspace(0, 2, 21), snapshot_times=[1.0, 2.0])
        assert [t for t, _ in res.snapshots] == [1.0, 2.0]
        for _, dm in res.snapshots:
            dm.validate()


def make_liouvillian_res(space, h, collapse_pairs):
    H = LinearOperator(space, h)
    cols = CollapseSet([(LinearOperator(space, op), rate)
                        for op, rate in collapse_pairs])
    return build_liouvillian(H, cols)


class TestSteadyState:
    def test_pure_decay_reaches_ground(self):
        space = tls_space()
        H = LinearOperator(space, np.diag([0.0, 5.0]).astype(complex))
        L = build_liouvillian(H, CollapseSet([(lowering_op(space, 0), 1.0)]))
        ss = steady_state(L, tol=1e-10)
        npt.assert_allclose(ss.rho.matrix, np.diag([1.0, 0.0]), atol=1e-10)
        assert ss.residual < 1e-12
        assert ss.method == "nullspace"

    def test_methods_agree(self):
        # driven decaying qubit: direct solve and long-time integration land
        # on the same state
        space = tls_space()
        h = np.array([[0.0, 1.2], [1.2, 0.5]], dtype=complex)
        L = make_liouvillian(h, [(np.array([[0, 1], [0, 0]], complex), 0.8)])
        a = steady_state(L, method="nullspace", tol=1e-9)
        b = steady_state(L, method="long_time", tol=1e-9, chunk=4.0)
        npt.assert_allclose(a.rho.matrix, b.rho.matrix, atol=1e-7)

    def test_nullspace_size_guard(self):
        space = tls_space()
        L = build_liouvillian(
            LinearOperator(space, np.zeros((2, 2), dtype=complex)),
            CollapseSet([(lowering_op(space, 0), 1.0)]))
        with pytest.raises(SteadyStateError, match="refused"):
            steady_state(L, method="nullspace", nullspace_max_dim=2)

    def test_degenerate_kernel_detected(self):
        # two uncoupled decaying qubits with no cross relaxation conserve
        # each qubit's ground projector: the kernel is degenerate
        space = CompositeSpace([ModeSpec("a", QUBIT, 2), ModeSpec("b", QUBIT, 2)])
        h = np.zeros((4, 4), dtype=complex)
        # dephasing on both qubits only: every diagonal state is steady
        cols = CollapseSet([(number_op(space, 0), 1.0),
                            (number_op(space, 1), 1.0)])
        L = build_liouvillian(LinearOperator(space, h), cols)
        with pytest.raises(SteadyStateError, match="not unique|residual"):
            steady_state(L, method="nullspace", tol=1e-9)

    def test_long_time_budget_error(self):
        # a very slow relaxation cannot reach tolerance within the budget
        space = tls_space()
        L = build_liouvillian(
            LinearOperator(space, np.array([[0, 1], [1, 0]], complex)),
            CollapseSet([(lowering_op(space, 0), 1e-4)]))
        with pytest.raises(SteadyStateError, match="long-time"):
            steady_state(L, method="long_time", tol=1e-12, max_time=1.0,
                         chunk=0.5)

    def test_residual_norm(self):
        space = tls_space()
        L = build_liouvillian(
            LinearOperator(space, np.zeros((2, 2), dtype=complex)),
            CollapseSet([(lowering_op(space, 0), 2.0)]))
        rho = np.diag([0.5, 0.5]).astype(complex)
        assert residual_norm(L, rho) == pytest.approx(1.0)
