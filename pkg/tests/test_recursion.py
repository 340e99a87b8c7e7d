import pytest

from ghecheck import diffalg as da
from ghecheck import recursion as r
from ghecheck.diffalg import ONE
from ghecheck.hamiltonian import gradient, j0
from ghecheck.model import B, two_component_flow, u, v
from ghecheck.nonlocal_ops import normalize_nonlocal


def test_commutator_audit_reports_corrections():
    ver = r.commutator_expansion_check()
    assert ver.passed
    assert ver.details


@pytest.mark.parametrize("n", [1, 2, 3])
def test_integrability(n):
    assert r.integrability_elimination_check(n).passed


def test_integrability_mutation():
    assert not r.integrability_elimination_check(1, mutate=True).passed


def test_inversion():
    assert r.inversion_check().passed


def test_r_matrix_forms():
    assert r.r_matrix_check().passed


def test_r_adjoint():
    assert r.r_adjoint_check().passed


def test_j1_entries_and_skew():
    assert r.j1_entries_check().passed
    assert r.j1_skew_check().passed


def test_j1_is_not_j0():
    assert not r.j1().equals(j0())


def test_bihamiltonian():
    assert r.bihamiltonian_check().passed


def test_bihamiltonian_detects_wrong_h0():
    flow = r.j1_printed().apply(gradient(2 * r.h0()))
    res = [normalize_nonlocal(f - t) for f, t in zip(flow, two_component_flow())]
    assert not all(x.is_zero() for x in res)


def test_recursion_acts_on_local_pair():
    # R (v, q) = b (v, q) - (u_x, v_x)
    got = [normalize_nonlocal(x) for x in r.r_matrix().apply(two_component_flow())]
    want = (B * v() - u("x"), B * da.q_expr() - v("x"))
    assert [da.substitute_flow(g - w) for g, w in zip(got, want)] == [da.ZERO, da.ZERO]


def test_h2_from_adjoint_step():
    assert r.h2_check().passed


def test_density_from_gradient_round_trip():
    H = r.h2_density()
    assert da.is_total_divergence(r.density_from_gradient(gradient(H)) - H, r.SPACE)


def test_non_gradient_rejected():
    with pytest.raises(r.NonGradient):
        r.density_from_gradient((v(), ONE * u("x")))


def test_j0_h2_flow():
    assert r.j0h2_check().passed


def test_j1_h2_flow_is_r_squared_of_base_flow():
    got = r.higher_flow(r.h2_density(), r.j1_printed())
    want = ((1 + B * B) * v() - 2 * B * u("x"), (1 + B * B) * da.q_expr() - 2 * B * v("x"))
    assert all(normalize_nonlocal(g - w).is_zero() for g, w in zip(got, want))
