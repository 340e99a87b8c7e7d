import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghecheck import diffalg as da
from ghecheck import olver as o
from ghecheck.diffalg import ONE, ZERO, J, X, Y, Z
from ghecheck.olver import WedgeExpr
from tests.conftest import polys

SPEC_TRIPLES = [(a, b, c) for a in ("", "x", "y", "xy", "xx") for b in ("", "x", "y", "xy")
                for c in ("", "x", "y", "z")]
ODD_SPECS = ["", "x", "y", "z", "xy", "yz"]
COEFF = [ONE, -ONE, 2 * ONE, J("u", "yz"), J("v", "x"), da.param("b") * J("u", "xy")]


@st.composite
def univectors(draw, bases=("theta", "eta")):
    n = draw(st.integers(1, 3))
    out = ZERO
    for _ in range(n):
        out = out + draw(st.sampled_from(COEFF)) * J(draw(st.sampled_from(bases)), draw(st.sampled_from(ODD_SPECS)))
    return out


@st.composite
def const_trivectors(draw):
    n = draw(st.integers(1, 4))
    order = draw(st.integers(1, 3))
    out = WedgeExpr(ZERO, 3)
    for _ in range(n):
        specs = draw(st.sampled_from([s for s in SPEC_TRIPLES if sum(map(len, s)) == order]))
        fs = [J("theta", sp) for sp in specs]
        out = out + WedgeExpr.wedge(*fs).scale(draw(st.integers(-3, 3)) * ONE)
    return out


@given(univectors(), univectors())
def test_wedge_antisymmetry(f, g):
    assert WedgeExpr.wedge(f, g).equals(-WedgeExpr.wedge(g, f))


@given(univectors())
def test_wedge_square_vanishes(f):
    assert WedgeExpr.wedge(f, f).is_zero()


@given(univectors(), univectors(), univectors())
def test_wedge_associative(f, g, h):
    a = WedgeExpr.wedge(f) ^ WedgeExpr.wedge(g, h)
    b = WedgeExpr.wedge(f, g) ^ WedgeExpr.wedge(h)
    assert a.equals(b)


@given(univectors(), univectors(), univectors(), st.sampled_from([X, Y, Z]))
def test_exact_trivectors_reduce_to_zero(f, g, h, ax):
    T = WedgeExpr.wedge(f, g, h).D(ax)
    assert o.reduce_mod_divergence(T).poly.is_zero()


@given(polys(), polys(), univectors(), univectors(), st.sampled_from([X, Y, Z]))
def test_pr_v_commutes_with_total_derivative(q1, q2, f, g, ax):
    Q = (q1 * J("theta"), q2 * J("eta"))
    W = WedgeExpr.wedge(f, g)
    assert o.pr_v(Q, W.D(ax)).equals(o.pr_v(Q, W).D(ax))


@given(const_trivectors())
def test_reduction_agrees_with_brute_force(T):
    alt = T.alternate().poly
    fields = ["theta1", "theta2", "theta3"]
    expect = o.is_divergence_bruteforce(alt, fields) if not alt.is_zero() else True
    assert o.reduce_mod_divergence(T).poly.is_zero() == expect


def test_reduction_detects_a_non_divergence():
    T = WedgeExpr.wedge(J("theta"), J("theta", "x"), J("theta", "xy"))
    assert not T.is_zero()
    assert not o.reduce_mod_divergence(T).poly.is_zero()


def test_cells_partition_the_trivector():
    T = o.jacobi_trivector(o.Pencil()).alternate()
    total = ZERO
    for part in o.cells(T, "rho").values():
        total = total + part
    assert total == T.poly


def test_jacobi_pencil():
    ver = o.jacobi_compatibility_check()
    assert ver.passed
    labels = [c["cell"] for c in ver.details["cells"]]
    assert len(labels) == len(set(labels)) > 10
    assert all(c["terms"] > 0 for c in ver.details["cells"])


@pytest.mark.parametrize("term", [t for t in o.LOCAL_TERMS if t != "zeta"])
def test_mutations_fail(term):
    assert not o.jacobi_check(o.Pencil().mutated(term)).passed


def test_zeta_coefficient_is_free():
    for factor in (-ONE, ZERO, 2 * ONE):
        assert o.jacobi_check(o.Pencil().mutated("zeta", factor)).passed


def test_specialized_a():
    assert o.jacobi_compatibility_check(a=3 * ONE).passed


def test_j0_alone():
    assert o.j0_jacobi_check().passed


def test_local_trivector_matches_bivector_route():
    for P in (o.Pencil(ONE, da.param("b"), 0), o.Pencil(ONE, da.param("b"), 0).mutated("Dz vy", 2 * ONE)):
        lhs = o.pr_v(o.characteristic(P), o.local_bivector(P))
        assert o.reduce_mod_divergence(lhs + o.jacobi_trivector(P).scale(ONE / 2)).poly.is_zero()


def test_bivector_matches_display():
    assert o.bivector_check().passed


def test_bivector_skew_part():
    Bv = o.build_bivector(o.Pencil().operator())
    assert Bv.equals(o.Bivector(o.theta_display_operator()))
    assert not Bv.equals(o.Bivector(o.Pencil().mutated("Dz vy").operator()))


def test_symplectic_closure_and_control():
    assert o.symplectic_closure_check().passed
    assert not o.symplectic_closure_check(scale_b=2 * ONE).passed
    du, dv = J("du"), J("dv")
    broken = o.symplectic_form() + WedgeExpr.wedge(du, dv).scale(J("u", "yz"))
    assert not o.reduce_mod_divergence(o.vertical_d(broken)).poly.is_zero()


def test_trace_is_json_serializable():
    import json
    json.dumps(o.j0_jacobi_check().to_json())


def test_brute_force_oracle_on_known_cases():
    t1, t2 = J("theta1"), J("theta2")
    jac = da.D(t1, X) * da.D(t2, Y) - da.D(t1, Y) * da.D(t2, X)
    assert o.is_divergence_bruteforce(jac, ["theta1", "theta2"])
    assert not o.is_divergence_bruteforce(da.D(t1, X) * da.D(t2, Y), ["theta1", "theta2"])
    T = WedgeExpr.wedge(J("theta"), J("theta", "x"), J("theta", "xy")).alternate().poly
    assert not o.is_divergence_bruteforce(T, ["theta1", "theta2", "theta3"])
    E = WedgeExpr.wedge(J("theta"), J("theta", "x"), J("theta", "y")).D(X).alternate().poly
    assert o.is_divergence_bruteforce(E, ["theta1", "theta2", "theta3"])
