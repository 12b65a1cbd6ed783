import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from slhflow.circuit_algebra import parse_term
from slhflow.gj_parse import netlist_to_term, netlist_to_term_naive
from slhflow.master_eq import SpaceLayout
from slhflow.netlist_rewrite import LossAssignment, insert_losses
from slhflow.slh_core import adjoint, equal_numeric, identity, op, symbol
from slhflow.slh_reduce import (
    SLHError,
    SLHTriple,
    concat,
    feedback,
    identity_slh,
    numeric_scattering,
    permute_in,
    permute_out,
    reduce,
    series,
    simplify_slh,
    slh_equal_numeric,
    slh_from_dict,
    slh_to_dict,
)

th, phi, vphi, alpha, beta, kappa, delta = (symbol(n) for n in ("theta", "phi", "varphi", "alpha", "beta", "kappa", "Delta"))


def bs(t):
    return SLHTriple(((sp.cos(t), -sp.sin(t)), (sp.sin(t), sp.cos(t))), (0, 0), 0)


def coherent(a):
    return SLHTriple(((1,),), (a,), 0)


def test_identity_laws():
    A = SLHTriple(((op("Z", "Q1"),),), (alpha * op("sm", "Q1"),), kappa * op("Z", "Q1"))
    assert slh_equal_numeric(series(identity_slh(1), A), A)
    assert slh_equal_numeric(series(A, identity_slh(1)), A)


def test_two_cavity_series():
    a, b = op("a", "a1"), op("a", "b1")
    k = sp.Symbol("kappa", positive=True)
    A = SLHTriple(((1,),), (sp.sqrt(k) * a,), delta * adjoint(a) * a)
    B = SLHTriple(((1,),), (sp.sqrt(k) * b,), 0)
    got = series(B, A)
    assert got.L[0] == sp.sqrt(k) * (a + b)
    want_h = delta * adjoint(a) * a + (k / (2 * sp.I)) * (adjoint(b) * a - adjoint(a) * b)
    assert got.H == want_h


def test_probe_through_zprobe():
    Q1 = SLHTriple(((op("Z", "Q1"),),), (0,), 0)
    got = series(Q1, coherent(alpha))
    assert got.S[0][0] == op("Z", "Q1")
    assert got.L[0] == alpha * op("Z", "Q1")
    assert got.H.is_zero


def test_series_arity_error():
    with pytest.raises(SLHError):
        series(bs(th), coherent(alpha))


def test_concat_examples():
    assert slh_equal_numeric(concat(identity_slh(1), identity_slh(1)), identity_slh(2))
    got = concat(coherent(alpha), coherent(beta))
    assert got.L == (alpha * identity(), beta * identity())
    assert got.S[0][1].is_zero and got.S[1][0].is_zero
    four = concat(bs(phi), bs(vphi))
    assert four.S[0][2].is_zero and four.S[3][1].is_zero
    assert four.S[2][2] == sp.cos(vphi) * identity()


def test_beamsplitter_feedback_is_minus_one():
    got = feedback(bs(th), 2, 2)
    assert got.S == ((-identity(),),)


def test_feedback_index_errors():
    with pytest.raises(SLHError):
        feedback(bs(th), 3, 1)
    with pytest.raises(SLHError):
        feedback(identity_slh(1), 1, 1)  # 1 - S = 0


def test_feedback_operator_entry():
    A = SLHTriple(((sp.Rational(1, 2) * op("Z", "Q1"), 1), (1, 0)), (0, 0), 0)
    got = feedback(A, 1, 1)
    # what remains is the loop itself: (1 - Z/2)^-1 = (1 + Z/2) * 4/3
    assert got.S[0][0] == sp.Rational(4, 3) * (identity() + sp.Rational(1, 2) * op("Z", "Q1"))
    assert equal_numeric(got.S[0][0] * (identity() - sp.Rational(1, 2) * op("Z", "Q1")), identity())


def test_feedback_nilpotent_and_non_invertible_entries():
    A = SLHTriple(((op("sp", "Q1"), 1), (1, 0)), (0, 0), 0)
    assert feedback(A, 1, 1).S[0][0] == identity() + op("sp", "Q1")
    B = SLHTriple(((op("X", "Q1") + op("Z", "Q2"), 1), (1, 0)), (0, 0), 0)
    with pytest.raises(SLHError):
        feedback(B, 1, 1)


def test_passthrough_lines_untouched():
    A = concat(identity_slh(1), bs(th))
    got = feedback(A, 3, 3)
    assert got.S[0][0] == identity() and got.S[0][1].is_zero and got.S[1][0].is_zero


def test_permute_swap_and_inverse():
    got = permute_out(bs(th), (2, 1))
    assert got.S[0] == (sp.sin(th) * identity(), sp.cos(th) * identity())
    assert got.S[1] == (sp.cos(th) * identity(), -sp.sin(th) * identity())
    assert slh_equal_numeric(permute_out(bs(th), (1, 2)), bs(th))
    assert slh_equal_numeric(permute_out(got, (2, 1)), bs(th))
    assert slh_equal_numeric(permute_in(permute_in(bs(th), (2, 1)), (2, 1)), bs(th))
    with pytest.raises(SLHError):
        permute_out(bs(th), (1, 2, 3))


def test_naive_listing_matches_chain(tqp, lib):
    models = lib.instantiate_all(tqp)
    g, _ = netlist_to_term(tqp, lib)
    n, _, _ = netlist_to_term_naive(tqp, lib)
    assert slh_equal_numeric(reduce(g, models), reduce(n, models))


def test_mach_zehnder(mach_zehnder, lib):
    term, _ = netlist_to_term(mach_zehnder, lib)
    got = reduce(term, lib.instantiate_all(mach_zehnder))
    want = bs(phi + vphi)
    assert slh_equal_numeric(got, want)
    assert all(e.is_zero for e in got.L) and got.H.is_zero


def test_single_ref_reduces_to_model(lib, tqp):
    models = lib.instantiate_all(tqp)
    assert reduce(parse_term("W", {"W": (1, 1)}), models) is models["W"]


def test_lossy_mach_zehnder_small_theta(mach_zehnder, lib):
    lossy, _ = insert_losses(mach_zehnder, LossAssignment("theta"))
    term, trace = netlist_to_term(lossy, lib)
    got = reduce(term, lib.instantiate_all(lossy))
    assert got.n_anc == 2
    vals = {"theta": 1e-6, "phi": 0.37, "varphi": 0.81}
    lay = SpaceLayout.of([])
    S = numeric_scattering(got, lay, vals)[:2, :2]
    ref = numeric_scattering(reduce(netlist_to_term(mach_zehnder, lib)[0], lib.instantiate_all(mach_zehnder)), lay, vals)
    assert np.abs(S - ref).max() < 1e-5
    full = numeric_scattering(got, lay, {**vals, "theta": 0.3})
    assert np.allclose(full.conj().T @ full, np.eye(4), atol=1e-9)


def test_simplify_keeps_value():
    x = series(bs(phi), bs(vphi))
    assert slh_equal_numeric(simplify_slh(x), x)


# --- properties -----------------------------------------------------------

LABELS = ("Q1", "Q2")
OPS = st.sampled_from([op(a, q) for a in ("X", "Z", "sm", "sp") for q in LABELS] + [identity()])
REALS = st.floats(-1.5, 1.5).map(lambda v: sp.Float(round(v, 4)))
# positive rotations: any product of two stays away from the identity, so
# closing a loop is never singular
ANGLES = st.floats(0.1, 1.4).map(lambda v: sp.Float(round(v, 4)))


@st.composite
def components(draw, n=None):
    """Random 1- or 2-port SLH whose S is unitary (phase or rotation, maybe times Z)."""
    n = n or draw(st.integers(1, 2))
    if n == 1:
        S = ((sp.exp(sp.I * draw(REALS)) * draw(st.sampled_from([identity(), op("Z", "Q1")])),),)
    else:
        t = draw(st.one_of(ANGLES, st.just(th)))
        c, s = sp.cos(t), sp.sin(t)
        S = ((c, -s), (s, c))
    L = tuple(draw(REALS) * draw(OPS) for _ in range(n))
    h = draw(REALS) * draw(OPS)
    return SLHTriple(S, L, h + adjoint(h))


def _unitary(x, vals={"theta": 0.42}):
    lay = SpaceLayout.of(sorted({lab for e in [*sum(x.S, ()), *x.L, x.H] for lab in e.labels()}))
    M = numeric_scattering(x, lay, vals)
    return np.allclose(M.conj().T @ M, np.eye(M.shape[0]), atol=1e-9)


@settings(max_examples=100)
@given(st.integers(1, 2).flatmap(lambda n: st.tuples(components(n), components(n), components(n))))
def test_series_associative_and_unitary(abc):
    a, b, c = abc
    left = series(series(c, b), a)
    right = series(c, series(b, a))
    assert slh_equal_numeric(left, right, samples=2)
    assert _unitary(left)
    assert adjoint(left.H) == left.H


@settings(max_examples=100)
@given(components(), components(), components())
def test_concat_associative(a, b, c):
    assert slh_equal_numeric(concat(concat(c, b), a), concat(c, concat(b, a)), samples=2)


@settings(max_examples=100)
@given(components())
def test_identity_law_property(a):
    n = a.n_in
    assert slh_equal_numeric(series(identity_slh(n), a), a, samples=2)
    assert slh_equal_numeric(series(a, identity_slh(n)), a, samples=2)


@settings(max_examples=100)
@given(components(2), components(2))
def test_feedback_preserves_unitarity_and_hermiticity(a, b):
    x = feedback(series(b, a), 2, 2)
    assert _unitary(x, {"theta": 0.9})
    assert adjoint(x.H) == x.H


@settings(max_examples=100)
@given(components(), components())
def test_dict_roundtrip(a, b):
    x = concat(a, b)
    d = slh_to_dict(x)
    y = slh_from_dict(d)
    assert slh_equal_numeric(x, y, samples=2)
    assert slh_to_dict(y) == d
