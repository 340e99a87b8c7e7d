import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghecheck import diffalg as da
from ghecheck import model as m
from ghecheck.diffalg import ONE, J
from ghecheck.model import B, u, v


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lax_pairs(n):
    assert m.lax_commutator_check(n).passed


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lax_mutation_fails(n):
    assert not m.lax_commutator_check(n, mutate=True).passed


def test_reduction_kills_the_equation():
    assert m.reduce_mod_ghe(m.ghe_residual("z")).is_zero()
    for perm in m.PERMUTATIONS.values():
        assert m.reduce_mod_ghe(da.D(m.ghe_residual("z"), 2), perm).is_zero()


def test_vector_field_bracket_is_antisymmetric():
    A = m.L_op(1, 2, 3)
    Bf = m.L_op(2, 4, 3)
    s = A.bracket(Bf) + Bf.bracket(A)
    assert all(c.is_zero() for c in s.values())


def test_lagrangian():
    assert m.lagrangian_check().passed


def test_lagrangian_mutation():
    assert not m.lagrangian_check(m.lagrangian_density(b_coeff=B)).passed


def test_elimination_of_u_t():
    assert m.elimination_residual().is_zero()


def test_symmetry_table():
    assert m.symmetry_table_check().passed


@pytest.mark.parametrize("name", sorted(m.GENERATORS))
def test_point_symmetries(name):
    assert m.is_symmetry(m.point_symmetry(name).pair).passed


@given(st.sampled_from([u("x"), v(), u("xy"), J("u") * J("v")]))
def test_non_symmetries_fail(phi):
    assert not m.is_symmetry((phi, ONE)).passed


def test_commuting_subalgebra():
    for pair, br in m.commuting_subalgebra().items():
        assert all(da.substitute_flow(x).is_zero() for x in br), pair


def test_steady_solution_is_fixed_point():
    # q vanishes for u = y z, v = 0
    sub = lambda var: (ONE if var[2] == da.idx_from("yz") else da.ZERO) if var[0] == "j" else None
    assert da.subs(da.q_expr(), sub).is_zero()
