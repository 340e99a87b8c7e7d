import pytest

from ghecheck import diffalg as da
from ghecheck import hamiltonian as h
from ghecheck.model import u, v

SPACE = h.SPACE


def test_constraints_give_k():
    assert h.constraint_check().passed


def test_k_times_j0():
    assert h.j0_check().passed


def test_hamiltonian_flow():
    assert h.hamiltonian_flow_check().passed


def test_symplectic_closure():
    assert h.symplectic_closure_check().passed


@pytest.mark.parametrize("name", ["X2", "X3", "X5", "X6", "X7", "X8", "Xcd"])
def test_inverse_noether_reproduces_density(name):
    assert h.noether_check(name).passed


@pytest.mark.parametrize("name", ["X1", "X4"])
def test_non_variational(name):
    from ghecheck.model import point_symmetry
    with pytest.raises(h.NonVariational):
        h.inverse_noether(point_symmetry(name).pair, name)


def test_homotopy_density_inverts_euler():
    E = u("xx") * u("yz") + u("x") ** 2
    dens = h.homotopy_density(E)
    # E is not variational, so the homotopy output must fail the Helmholtz test
    assert da.euler_operator(dens, "u", SPACE) != E
    E2 = da.euler_operator(u("x") ** 2 * u("yz"), "u", SPACE)
    assert da.euler_operator(h.homotopy_density(E2), "u", SPACE) == E2


def test_conservation_matrix_matches_commutation():
    for key, (conserved, commuting) in h.conservation_matrix().items():
        assert conserved == commuting, key


def test_hcd_not_conserved_by_flow():
    assert not h.conservation_check("Hcd", "X3").passed


def test_explicit_time_derivative_reading():
    H, _ = h.printed_integrals()["Hcd"]
    assert da.is_total_divergence(h.derivative_along(H, "t"), SPACE)


def test_one_component_rate_of_h1():
    # D_t of H1 with v = u_t along the one-component equation is a divergence
    assert da.is_total_divergence(h.one_component_rate(h.h1_alt()), SPACE)


def test_one_component_rate_detects_non_integral():
    assert not da.is_total_divergence(h.one_component_rate(v() ** 2), SPACE)


def test_integrals_table_json():
    rows = h.integrals_table_json()
    assert {r["name"] for r in rows} == set(h.printed_integrals())
    for r in rows:
        assert da.from_text(r["density"]) == h.printed_integrals()[r["name"]][0]
