import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qopt_bench.problems import generate_problem
from qopt_bench.simulator import (
    Evaluator,
    fubini_study_from_derivatives,
    metric_qcall_cost,
)


def single_qubit_harness(theta):
    """exp(-i*theta*X/2)|0> and its analytic theta-derivative."""
    psi = np.array([np.cos(theta / 2), -1j * np.sin(theta / 2)])
    dpsi = np.array([-0.5 * np.sin(theta / 2), -0.5j * np.cos(theta / 2)])
    return psi, dpsi


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.2, -2.5])
def test_single_qubit_harness_quarter(theta):
    psi, dpsi = single_qubit_harness(theta)
    g = fubini_study_from_derivatives(psi, [dpsi])
    assert abs(g[0, 0] - 0.25) < 1e-10
    assert abs(4 * g[0, 0] - 1.0) < 1e-10  # quantum Fisher information


def test_gauge_invariance():
    psi, dpsi = single_qubit_harness(0.7)
    g0 = fubini_study_from_derivatives(psi, [dpsi])
    phase = np.exp(1j * 1.234)
    g1 = fubini_study_from_derivatives(phase * psi, [phase * dpsi])
    assert np.allclose(g0, g1, atol=1e-13)


def test_diagonal_equals_full_diagonal(graph3):
    ev = Evaluator.for_graph(graph3, n_layers=2)
    th = np.array([0.5, -0.2, 0.9, 0.1])
    full = ev.metric(th, "full").matrix
    diag = ev.metric(th, "diagonal").matrix
    assert np.abs(np.diag(full) - np.diag(diag)).max() < 1e-10
    assert np.abs(diag - np.diag(np.diag(diag))).max() == 0.0


def test_block_diagonal_structure(graph3):
    ev = Evaluator.for_graph(graph3, n_layers=2)
    th = np.array([0.5, -0.2, 0.9, 0.1])
    full = ev.metric(th, "full").matrix
    block = ev.metric(th, "block_diagonal").matrix
    # parameter j belongs to layer j mod p under (gammas, betas) flattening
    for i in range(4):
        for j in range(4):
            if i % 2 == j % 2:
                assert block[i, j] == full[i, j]
            else:
                assert block[i, j] == 0.0


def test_block_equals_full_at_one_layer(graph5):
    ev = Evaluator.for_graph(graph5, n_layers=1)
    th = np.array([0.3, 0.8])
    assert np.array_equal(
        ev.metric(th, "full").matrix, ev.metric(th, "block_diagonal").matrix
    )


@settings(max_examples=20)
@given(data=st.data())
def test_metric_symmetric_and_psd(data):
    n = data.draw(st.integers(2, 5))
    p = data.draw(st.integers(1, 2))
    g = generate_problem(n, seed=data.draw(st.integers(0, 10**5)), density=0.8)
    th = np.array(
        data.draw(st.lists(st.floats(-np.pi, np.pi), min_size=2 * p, max_size=2 * p))
    )
    mat = Evaluator.for_graph(g, n_layers=p).metric(th, "full").matrix
    assert np.abs(mat - mat.T).max() < 1e-10
    assert np.linalg.eigvalsh(mat).min() >= -1e-9


def test_metric_gauge_invariance_on_ansatz(graph3):
    # global-phase robustness of the assembled tensor
    ev = Evaluator.for_graph(graph3, n_layers=1)
    th = np.array([0.4, -0.7])
    psi, derivs = ev._derivative_states(th)
    g0 = fubini_study_from_derivatives(psi, derivs)
    ph = np.exp(1j * 0.77)
    g1 = fubini_study_from_derivatives(ph * psi, [ph * d for d in derivs])
    assert np.allclose(g0, g1, atol=1e-12)


def test_metric_qcall_model(graph3):
    assert metric_qcall_cost(1, "full") == 3
    assert metric_qcall_cost(2, "full") == 10  # (2p)(2p+1)/2
    assert metric_qcall_cost(2, "block_diagonal") == 6
    assert metric_qcall_cost(2, "diagonal") == 4
    with pytest.raises(ValueError):
        metric_qcall_cost(1, "nope")
    ev = Evaluator.for_graph(graph3, n_layers=2)
    th = np.zeros(4)
    ev.metric(th, "full")
    assert ev.qcalls == 10
    ev.metric(th, "diagonal")
    assert ev.qcalls == 14
    with pytest.raises(ValueError):
        ev.metric(th, "bogus")
