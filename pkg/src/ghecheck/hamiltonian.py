"""Constraints, the symplectic operator K, J0, H1 and the inverse Noether map."""

from __future__ import annotations

from dataclasses import dataclass

from . import diffalg as da
from .diffalg import ONE, ZERO, DiffExpr, J, X, Y, Z, fn
from .model import B, GENERATORS, lagrangian_density, point_symmetry, two_component_flow, u, v
from .nonlocal_ops import LinOp, OperatorMatrix, frechet, op_adjoint, op_apply
from .verdict import Verdict

SPACE = (X, Y, Z)
M = LinOp.mult
Dx, Dy, Dz = LinOp.D(X), LinOp.D(Y), LinOp.D(Z)


# ---------------------------------------------------------------- constraints

@dataclass(frozen=True)
class ConstraintData:
    pi_u: DiffExpr
    pi_v: DiffExpr
    phi_u: DiffExpr
    phi_v: DiffExpr


def constraint_data() -> ConstraintData:
    """Momenta as partial derivatives of the Lagrangian in u_t, v_t.

    The constraint is ``Phi_u = Pi_u - (momentum as a function of u, v)``;
    ``Pi_u`` is kept as a free symbol ``P``.
    """
    L = lagrangian_density()
    mom_u = L.partial(("j", "u", da.unit(da.T)))
    mom_v = L.partial(("j", "v", da.unit(da.T)))
    pi_u, pi_v = J("Pu"), J("Pv")
    return ConstraintData(pi_u, pi_v, pi_u - mom_u, pi_v - mom_v)


def k11_printed(b=B) -> LinOp:
    return (M(b * u("xz") + v("z")) * Dy + M(v("y") - b * u("xy")) * Dz + M(v("yz")))


def constraint_matrix() -> OperatorMatrix:
    """K from the constraints: curl of the momentum one-form.

    For a first-order Lagrangian ``A_i(u) u^i_t - H`` the bracket of the
    constraints is ``D_A^dagger - D_A`` in each block.
    """
    L = lagrangian_density()
    A = (L.partial(("j", "u", da.unit(da.T))), L.partial(("j", "v", da.unit(da.T))))
    blocks = []
    deps = ("u", "v")
    for i in range(2):
        for j in range(2):
            Dij = frechet(A[i], deps[j])
            Dji = frechet(A[j], deps[i])
            blocks.append(op_adjoint(Dji) - Dij)
    return OperatorMatrix(*blocks)


def k_printed() -> OperatorMatrix:
    return OperatorMatrix.of(k11_printed(), M(-u("yz")), M(u("yz")), 0)


def j022(b=B) -> LinOp:
    inv = M(ONE / u("yz"))
    return inv * (M(b * u("xz")) * Dy - M(b * u("xy")) * Dz + M(v("z")) * Dy + M(v("y")) * Dz + M(v("yz"))) * inv


def j0(b=B) -> OperatorMatrix:
    return OperatorMatrix.of(0, ONE / u("yz"), -ONE / u("yz"), j022(b))


def h1() -> DiffExpr:
    return (v() ** 2 * u("yz") + u("y") * u("z") * u("xx")) / 2


def h1_alt() -> DiffExpr:
    return (v() ** 2 + u("x") ** 2) * u("yz") / 2


def gradient(H: DiffExpr, axes=SPACE):
    return (da.euler_operator(H, "u", axes), da.euler_operator(H, "v", axes))


def constraint_check() -> Verdict:
    K = constraint_matrix()
    res = K.entry_residuals(k_printed())
    skew = K.is_skew()
    Kp = k_printed()
    ok = not res and skew
    return Verdict("constraints", ok,
                   "K from the momentum one-form %s the displayed K; skew: %s" % ("matches" if not res else "differs from", skew),
                   {"residuals": {str(k): str(r) for k, r in res.items()},
                    "K12*K21": str(Kp.b.words[0][0][1] * Kp.c.words[0][0][1])})


def j0_check() -> Verdict:
    K = k_printed()
    J0 = j0()
    left = (K * J0).is_identity()
    right = (J0 * K).is_identity()
    skew = J0.is_skew()
    return Verdict("j0", left and right and skew,
                   "K J0 = I: %s, J0 K = I: %s, J0 skew: %s" % (left, right, skew))


def hamiltonian_flow_check() -> Verdict:
    diff_ok = da.is_total_divergence(h1() - h1_alt(), SPACE)
    flow = j0().apply(gradient(h1()))
    target = two_component_flow()
    r = [da.substitute_flow(f - t) for f, t in zip(flow, target)]
    ok = diff_ok and all(x.is_zero() for x in r)
    return Verdict("hamiltonian:flow", ok,
                   "H1 forms differ by a divergence: %s; J0 grad H1 = (v, q): %s" % (diff_ok, all(x.is_zero() for x in r)),
                   {"residuals": [str(x) for x in r]})


# ---------------------------------------------------------------- inverse Noether

class NonVariational(Exception):
    def __init__(self, name, residual):
        super().__init__("%s is not variational" % name)
        self.name = name
        self.residual = residual


@dataclass(frozen=True)
class IntegralEntry:
    name: str
    density: DiffExpr
    source: str


def homotopy_density(E: DiffExpr, dep: str = "u") -> DiffExpr:
    """Density h with ``delta h = E`` for E polynomial in the jets of dep.

    Straight-line homotopy from the zero field: a term of degree d in the
    jets contributes ``dep * term / (d + 1)``.
    """
    if any(v[1] == dep for v, _ in E.den):
        raise da.AlgebraError("homotopy needs jets of %s only in numerators" % dep)
    out = ZERO
    for m, c in E.num.items():
        d = sum(k for var, k in m if var[0] == "j" and var[1] == dep)
        out = out + DiffExpr({m: c}) * J(dep) / (d + 1)
    if E.den or not E.pden.is_one():
        out = out * DiffExpr({(): da.PONE}, E.den, E.pden)
    return out


def inverse_noether(Q, name: str = "Q") -> IntegralEntry:
    """Density H with ``(delta_u H, delta_v H) = K (phi, psi)``; else NonVariational."""
    phi, psi = Q
    if any(var[1] == "v" and any(var[2]) for var in phi.jets()):
        raise ValueError("phi must not contain derivatives of v")
    phi = da.substitute_flow(phi)
    psi = da.substitute_flow(psi)
    from .nonlocal_ops import integrate_in
    Hv = integrate_in(u("yz") * phi, ("j", "v", (0, 0, 0, 0)))
    E = op_apply(k11_printed(), phi) - u("yz") * psi - da.euler_operator(Hv, "u", SPACE)
    if E.jets("v"):
        raise NonVariational(name, E)
    h = homotopy_density(E)
    check = da.euler_operator(h, "u", SPACE) - E
    if not check.is_zero():
        raise NonVariational(name, check)
    H = Hv + h
    grad = gradient(H)
    if grad[1] != u("yz") * phi:
        raise NonVariational(name, grad[1] - u("yz") * phi)
    return IntegralEntry(name, H, name)


def printed_integrals() -> dict:
    """Densities as published, keyed by integral name -> (density, source)."""
    f, g, h, k = fn("f"), fn("g"), fn("h"), fn("k")
    c, d = fn("c"), fn("d")
    uyz = u("yz")
    return {
        "H2": ((B * v() * u("x") - (u("x") ** 2 + v() ** 2) / 2) * uyz, "X2"),
        "H3": (-(v() ** 2 * uyz + u("y") * u("z") * u("xx")) / 2, "X3"),
        "H5": (f * v() * uyz + B / 2 * fn("f", 1) * u("x") * u("y"), "X5"),
        "H6": (g * v() * uyz - B / 2 * fn("g", 1) * u("x") * u("z"), "X6"),
        "H7": (-h * (4 * v() * u("y") * uyz + B * (2 * u("x") * u("y") * uyz - u("y") ** 2 * u("xz"))) / 4, "X7"),
        "H8": (-k * (4 * v() * u("z") * uyz - B * (2 * u("x") * u("z") * uyz - u("z") ** 2 * u("xy"))) / 4, "X8"),
        "Hcd": ((c + d) * v() * uyz + (fn("c", 1) + fn("d", 1)) / 2 * u("y") * u("z"), "Xcd"),
    }


def noether_check(name: str) -> Verdict:
    """Run inverse Noether on a table symmetry and compare with the printed density."""
    Q = point_symmetry(name).pair
    printed = {src: (iname, dens) for iname, (dens, src) in printed_integrals().items()}
    try:
        entry = inverse_noether(Q, name)
    except NonVariational as exc:
        expect_nonvar = name not in printed
        return Verdict("noether:" + name, expect_nonvar,
                       "non-variational" + ("" if expect_nonvar else " (a density was expected)"),
                       {"obstruction": str(exc.residual)})
    if name not in printed:
        return Verdict("noether:" + name, False, "unexpected density %s" % entry.density)
    iname, dens = printed[name]
    same = da.is_total_divergence(entry.density - dens, SPACE)
    return Verdict("noether:" + name, same,
                   "%s reproduced up to a divergence" % iname if same else "density differs from %s" % iname,
                   {"density": str(entry.density), "integral": iname})


# ---------------------------------------------------------------- conservation

def derivative_along(H: DiffExpr, flow: str) -> DiffExpr:
    """Rate of change of a density along a flow.

    ``flow`` is a symmetry name (derivative ``pr v_Q(H)`` in the group
    parameter) or ``"t"`` for the flow itself including explicit time
    dependence (``D_t H`` with time derivatives eliminated).
    """
    if flow == "t":
        return da.substitute_flow(da.total_derivative(H, da.T))
    Q = point_symmetry(flow).pair
    return da.substitute_flow(da.prolong_evolutionary(tuple(da.substitute_flow(x) for x in Q), H))


def conservation_check(integral: str, flow: str) -> Verdict:
    H, _ = printed_integrals()[integral]
    rate = derivative_along(H, flow)
    ok = da.is_total_divergence(rate, SPACE)
    return Verdict("conservation:%s:%s" % (integral, flow), ok,
                   "rate is %sa total divergence" % ("" if ok else "not "))


def conservation_prediction_check(integral: str, flow: str) -> Verdict:
    """Passes when conservation agrees with commutation of the generators."""
    base = conservation_check(integral, flow)
    src = printed_integrals()[integral][1]
    expected = commutes(src, flow)
    ok = base.passed == expected
    return Verdict(base.name, ok, "%s; generators %s %s" % (
        "conserved" if base.passed else "not conserved",
        src, ("commute with " if expected else "do not commute with ") + flow))


def symplectic_closure_check(scale_b=ONE) -> Verdict:
    from .olver import symplectic_closure_check as check
    return check(scale_b)


def commutes(a: str, b: str) -> bool:
    br = da.characteristic_bracket(point_symmetry(a).pair, point_symmetry(b).pair)
    return all(da.substitute_flow(x).is_zero() for x in br)


FLOWS = ("X2", "X3", "X5", "X6", "X7", "X8", "Xcd")


def conservation_matrix() -> dict:
    """(integral, flow) -> (conserved, source commutes with flow)."""
    out = {}
    for iname, (_, src) in printed_integrals().items():
        for fl in FLOWS:
            out[(iname, fl)] = (conservation_check(iname, fl).passed, commutes(src, fl))
    return out


def one_component_rate(H: DiffExpr) -> DiffExpr:
    """``D_t`` of the density with v -> u_t, reduced by the one-component equation."""
    Hu = da.subs(H, lambda var: J("u", da.idx_add(var[2], da.unit(da.T))) if var[0] == "j" and var[1] == "v" else None)
    from .model import ghe_residual
    Hu = da.specialize_b(Hu)
    res = ghe_residual("txyz")
    utt = ("j", "u", (2, 0, 0, 0))
    c = res.partial(utt)
    sol = -(res - c * DiffExpr.var(utt)) / c
    cache = {}

    def rule(var):
        if var[0] != "j" or var[1] != "u" or var[2][0] < 2:
            return None
        if var not in cache:
            rest = list(var[2])
            rest[0] -= 2
            cache[var] = da.subs(da.D_index(sol, tuple(rest)), rule)
        return cache[var]

    rate = da.total_derivative(Hu, da.T)
    return da.subs(rate, rule)


def integrals_table_json() -> list:
    rows = []
    for iname, (dens, src) in printed_integrals().items():
        rows.append({
            "name": iname,
            "density": da.to_text(dens),
            "display": str(dens),
            "source": src,
            "conservation": {fl: conservation_check(iname, fl).passed for fl in FLOWS},
        })
    return rows


CHECKS = {
    "constraints": constraint_check,
    "j0": j0_check,
    "hamiltonian:flow": hamiltonian_flow_check,
}
for _name in GENERATORS:
    CHECKS["noether:" + _name] = (lambda n: lambda: noether_check(n))(_name)
