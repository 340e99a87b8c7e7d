from hypothesis import given
from hypothesis import strategies as st

from ghecheck import diffalg as da
from ghecheck.diffalg import ONE, ZERO, J, X, Y, Z, T
from tests.conftest import polys, rationals


def test_total_derivative_of_jet():
    assert da.D(J("u", "x"), Y) == J("u", "xy")
    assert da.D(J("u", "yz") ** 2, X) == 2 * J("u", "yz") * J("u", "xyz")


def test_quotient_rule():
    uyz = J("u", "yz")
    e = J("v") / uyz
    assert da.D(e, X) == J("v", "x") / uyz - J("v") * J("u", "xyz") / uyz ** 2


def test_division_by_non_monomial_raises():
    try:
        ONE / (J("u", "x") + J("u", "y"))
    except da.AlgebraError:
        return
    raise AssertionError("expected AlgebraError")


@given(rationals(), st.sampled_from([X, Y, Z, T]), st.sampled_from([X, Y, Z, T]))
def test_total_derivatives_commute(e, a, b):
    assert da.D(da.D(e, a), b) == da.D(da.D(e, b), a)


@given(rationals(), rationals(), st.sampled_from([X, Y, Z]))
def test_leibniz(f, g, a):
    assert da.D(f * g, a) == da.D(f, a) * g + f * da.D(g, a)


@given(rationals(), st.sampled_from([X, Y, Z]))
def test_euler_annihilates_divergences(e, a):
    assert da.is_total_divergence(da.D(e, a), (X, Y, Z))


@given(polys())
def test_euler_detects_non_divergence_of_squares(e):
    # e^2 integrates to something positive for generic fields, so it is never a divergence
    if not e.is_zero():
        assert not da.is_total_divergence(e * e + J("u") ** 2, (X, Y, Z))


@given(rationals())
def test_text_round_trip(e):
    assert da.from_text(da.to_text(e)) == e


@given(polys(), polys(), polys(), st.sampled_from([X, Y, Z]))
def test_prolongation_commutes_with_total_derivative(q1, q2, e, a):
    Q = (q1, q2)
    assert da.prolong_evolutionary(Q, da.D(e, a)) == da.D(da.prolong_evolutionary(Q, e), a)


@given(polys(), polys())
def test_ring_axioms(f, g):
    assert f * g == g * f
    assert (f + g) - g == f
    assert f * (g + ONE) == f * g + f


def test_euler_on_lagrangian_density():
    # E_u of u_x^2/2 is -u_xx
    assert da.euler_operator(J("u", "x") ** 2 / 2, "u", (X, Y, Z)) == -J("u", "xx")


def test_q_vanishes_on_background():
    q = da.q_expr()
    bg = da.subs(q, lambda v: (ONE if v[2] == da.idx_from("yz") else ZERO) if v[0] == "j" else None)
    assert bg.is_zero()


def test_split_by_params():
    e = da.param("a") * J("u") + da.param("a") * da.param("b") * J("v") + J("u", "x")
    parts = da.split_by_params(e, ["a", "b"])
    assert set(parts) == {(0, 0), (1, 0), (1, 1)}
