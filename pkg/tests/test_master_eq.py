import io

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from slhflow.master_eq import (
    MAX_DIM,
    LocalSpace,
    MasterEquation,
    SimConfig,
    SimulationError,
    SpaceLayout,
    basis_state,
    fidelity,
    integrate,
    lindblad_rhs,
    parse_state,
    to_matrix,
)
from slhflow.qec_models import build_ninequbit_loss_lindblad
from slhflow.slh_core import OperatorError, OperatorExpr, identity, op, symbol

SM = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|


def decay_model():
    return MasterEquation(OperatorExpr.zero(), (sp.sqrt(symbol("kappa")) * op("sm", "Q1"),))


# --- to_matrix ------------------------------------------------------------


def test_identity_any_layout():
    lay = SpaceLayout([LocalSpace("Q1", "qubit", 2), LocalSpace("b", "boson", 3)])
    assert np.allclose(to_matrix(identity(), lay), np.eye(6))


def test_nine_qubit_parity_diagonal():
    lay = SpaceLayout.of([f"Q{k}" for k in range(1, 10)])
    M = to_matrix(build_ninequbit_loss_lindblad(), lay, {"alpha": 2, "theta": 0.01})
    idx = np.arange(512)
    # Q1 is the most significant bit
    bit = lambda q: (idx >> (9 - q)) & 1
    want = 0.02 * (-1.0) ** (bit(2) ^ bit(5) ^ bit(8))
    assert np.allclose(M, np.diag(want))


def test_to_matrix_errors():
    lay = SpaceLayout.of(["Q1"])
    with pytest.raises((SimulationError, OperatorError, KeyError, ValueError)):
        to_matrix(symbol("g") * op("Z", "Q1"), lay)
    with pytest.raises((SimulationError, OperatorError, KeyError, ValueError)):
        to_matrix(op("Z", "Q2"), lay)


def test_layout_invariants():
    with pytest.raises(ValueError):
        SpaceLayout.of(["Q1", "Q1"])
    lay = SpaceLayout.for_exprs([op("Z", "Q2") * op("X", "Q1"), op("a", "c")], dims={"c": 4})
    assert lay.labels == ("Q1", "Q2", "c") and lay.dim == 16


# --- lindblad_rhs ---------------------------------------------------------


def test_decay_generator():
    rho = np.diag([0, 1]).astype(complex)
    d = lindblad_rhs(rho, np.zeros((2, 2)), [SM])
    assert np.isclose(d[1, 1], -1) and np.isclose(d[0, 0], 1)


def test_rhs_dimension_mismatch():
    with pytest.raises((SimulationError, ValueError)):
        lindblad_rhs(np.eye(2), np.eye(4), [])


def _herm(a):
    return a + a.conj().T


cmat = hnp.arrays(np.complex128, (3, 3), elements=st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))


@settings(max_examples=100)
@given(cmat, cmat, cmat, st.lists(cmat, max_size=3))
def test_rhs_traceless(h, a, b, Ls):
    rho = a @ a.conj().T + np.eye(3)
    rho /= np.trace(rho)
    assert abs(np.trace(lindblad_rhs(rho, _herm(h), Ls))) < 1e-12 * (1 + sum(np.abs(L).sum() ** 2 for L in Ls) + np.abs(h).sum())
    assert abs(np.trace(lindblad_rhs(rho, _herm(b), []))) < 1e-12 * (1 + np.abs(b).sum())


# --- integrate ------------------------------------------------------------


@pytest.mark.parametrize("method", ["rk4", "adaptive-rk45"])
def test_amplitude_damping(method):
    kappa = 1.7
    cfg = SimConfig(
        t_final=2 / kappa, dt=1e-3, method=method, bindings={"kappa": kappa},
        rho0=basis_state(SpaceLayout.of(["Q1"]), {"Q1": 1}),
        observables={"p1": op("Pi1", "Q1")}, save_every=1 if method == "rk4" else 400,
    )
    tr = integrate(decay_model(), cfg)
    for t in (0.5 / kappa, 1 / kappa, 2 / kappa):
        k = int(np.argmin(np.abs(tr.times - t)))
        assert abs(tr.times[k] - t) < 1e-3
        assert abs(tr.series["p1"][k].real - np.exp(-kappa * tr.times[k])) < 1e-6
    assert tr.trace_drift.max() < 1e-9 and tr.min_eig.min() > -1e-9


def test_rk4_fourth_order():
    def err(dt):
        cfg = SimConfig(t_final=2.0, dt=dt, bindings={"kappa": 1.0},
                        rho0=basis_state(SpaceLayout.of(["Q1"]), {"Q1": 1}),
                        observables={"p1": op("Pi1", "Q1")})
        tr = integrate(decay_model(), cfg)
        return abs(tr.series["p1"][-1].real - np.exp(-2.0))

    ratio = err(0.2) / err(0.1)
    assert 12 <= ratio <= 20


def test_unitary_evolution_keeps_purity():
    H = 0.7 * op("X", "Q1") + 0.3 * op("Z", "Q1") * op("Z", "Q2") + 1.1 * op("sp", "Q2") + 1.1 * op("sm", "Q2")
    lay = SpaceLayout.of(["Q1", "Q2"])
    psi = parse_state("Q1=0,Q2=1 + Q1=1,Q2=0", lay)
    tr = integrate(MasterEquation(H, ()), SimConfig(t_final=3.0, dt=1e-3, rho0=psi))
    r = tr.final_rho
    assert abs(np.trace(r @ r).real - 1) < 1e-8
    assert tr.hermiticity.max() < 1e-8


def test_deterministic():
    cfg = SimConfig(t_final=0.5, dt=1e-2, bindings={"kappa": 1.0}, observables={"p": op("Pi1", "Q1")},
                    rho0=basis_state(SpaceLayout.of(["Q1"]), {"Q1": 1}))
    a, b = integrate(decay_model(), cfg), integrate(decay_model(), cfg)
    assert np.array_equal(a.series["p"], b.series["p"]) and a.to_csv() == b.to_csv()


def test_csv_output():
    psi = basis_state(SpaceLayout.of(["Q1"]), {"Q1": 1})
    cfg = SimConfig(t_final=0.1, dt=1e-2, bindings={"kappa": 1.0}, fidelity_state=psi,
                    observables={"p1": op("Pi1", "Q1")})
    tr = integrate(decay_model(), cfg)
    buf = io.StringIO()
    tr.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,p1,fidelity,trace_drift"
    assert len(lines) == len(tr.times) + 1
    assert tr.metadata["time_unit"]
    assert len(tr.series["fidelity"]) == len(tr.times)


def test_errors():
    with pytest.raises(SimulationError):
        SimConfig(t_final=1.0, dt=0)
    with pytest.raises(SimulationError):
        SimConfig(t_final=1.0, method="euler")
    big = MasterEquation(op("Z", "Q1"), (), SpaceLayout.of([f"Q{k}" for k in range(13)]))
    assert 2 ** 13 > MAX_DIM
    with pytest.raises(SimulationError):
        integrate(big, SimConfig(t_final=0.1))
    with pytest.raises(SimulationError):
        integrate(decay_model(), SimConfig(t_final=0.1, bindings={"kappa": 1}, fidelity_state=np.ones(4)))
    with pytest.raises(SimulationError):
        parse_state("Q1=2", SpaceLayout.of(["Q1"]))


# --- fidelity -------------------------------------------------------------


def test_fidelity_examples():
    lay = SpaceLayout.of([f"Q{k}" for k in range(5)])
    psi = parse_state("00000 + 11100", lay)
    assert np.isclose(fidelity(np.outer(psi, psi.conj()), psi), 1)
    assert np.isclose(fidelity(np.eye(32) / 32, psi), 1 / 32)
    with pytest.raises((SimulationError, ValueError)):
        fidelity(np.eye(4) / 4, psi)
