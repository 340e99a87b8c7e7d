"""Acceptance criteria, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import time

import numpy as np

from ghecheck import diffalg as da
from ghecheck import hamiltonian as ham
from ghecheck import model, olver, recursion
from ghecheck import simulator as sim
from ghecheck.nonlocal_ops import normalize_nonlocal

class Criterion:
    def __init__(self, name, sink=None):
        self.name = name
        self.items = []
        self.sink = sink if sink is not None else []

    def check(self, label, ok):
        self.items.append((label, bool(ok)))
        return ok

    def finish(self):
        bad = [label for label, ok in self.items if not ok]
        line = "%s %s: %s" % ("FAIL" if bad else "PASS", self.name,
                              ("failed: " + "; ".join(bad)) if bad else "%d sub-checks" % len(self.items))
        self.sink.append(line)
        print(line)
        assert not bad, line


def test_criterion_1_lax(acceptance_sink):
    c = Criterion("1 lax suite", acceptance_sink)
    t0 = time.time()
    for n in (1, 2, 3):
        c.check("lax%d" % n, model.lax_commutator_check(n).passed)
    c.check("runtime < 10 s", time.time() - t0 < 10)
    c.finish()


def test_criterion_2_structures(acceptance_sink):
    c = Criterion("2 structure suite", acceptance_sink)
    c.check("lagrangian", model.lagrangian_check().passed)
    c.check("symplectic closure", ham.symplectic_closure_check().passed)
    c.check("K J0 = I", (ham.k_printed() * ham.j0()).is_identity())
    flow = ham.j0().apply(ham.gradient(ham.h1()))
    c.check("J0 grad H1 = (v, q)", all(da.substitute_flow(f - t).is_zero()
                                       for f, t in zip(flow, model.two_component_flow())))
    c.finish()


def test_criterion_3_noether(acceptance_sink):
    c = Criterion("3 noether suite", acceptance_sink)
    for name in ("X2", "X3", "X5", "X6", "X7", "X8", "Xcd"):
        c.check("density for " + name, ham.noether_check(name).passed)
    for name in ("X1", "X4"):
        try:
            ham.inverse_noether(model.point_symmetry(name).pair, name)
            c.check(name + " non-variational", False)
        except ham.NonVariational:
            c.check(name + " non-variational", True)
    mat = ham.conservation_matrix()
    c.check("conservation matrix = commutation table", all(a == b for a, b in mat.values()))
    c.check("Hcd not conserved by the flow", not mat[("Hcd", "X3")][0])
    c.finish()


def test_criterion_4_recursion(acceptance_sink):
    c = Criterion("4 recursion suite", acceptance_sink)
    c.check("2x2 inversion", recursion.inversion_check().passed)
    c.check("J1 entries", recursion.j1_entries_check().passed)
    c.check("J1 skew", recursion.j1_skew_check().passed)
    c.check("bihamiltonian", recursion.bihamiltonian_check().passed)
    _, dens = recursion.adjoint_step(ham.h1())
    c.check("adjoint step on H1 = displayed H2 up to divergence",
            da.is_total_divergence(dens - recursion.h2_as_displayed(), ham.SPACE))
    H2 = recursion.h2_density()
    got0 = recursion.higher_flow(H2, ham.j0())
    c.check("J0 grad H2 = (b v - u_x, b q - v_x)",
            all(normalize_nonlocal(g - w).is_zero() for g, w in zip(got0, recursion.j0h2_printed())))
    got1 = recursion.higher_flow(H2, recursion.j1_printed())
    c.check("J1 grad H2 = displayed nonlocal flow",
            all(normalize_nonlocal(g - w).is_zero() for g, w in zip(got1, recursion.j1h2_printed())))
    c.finish()


def test_criterion_5_olver(acceptance_sink):
    c = Criterion("5 olver jacobi", acceptance_sink)
    t0 = time.time()
    ver = olver.jacobi_compatibility_check()
    c.check("all cells reduce to zero", ver.passed)
    for term, v in olver.mutation_controls().items():
        c.check("flip of %s detected" % term, not v.passed)
    c.check("runtime < 600 s", time.time() - t0 < 600)
    c.finish()


def test_criterion_6_commutator_audit(acceptance_sink):
    c = Criterion("6 commutator audit", acceptance_sink)
    audit = recursion.commutator_expansion_check()
    c.check("audit reports agreement or corrections", audit.passed and bool(audit.details))
    for n in (1, 2, 3):
        c.check("integrability %d" % n, recursion.integrability_elimination_check(n).passed)
    c.finish()


def test_criterion_7_simulator(acceptance_sink):
    c = Criterion("7 simulator", acceptance_sink)
    t0 = time.time()
    rep = sim.run_and_monitor(sim.GridConfig(N_x=32, N_y=32, N_z=32, dt=2e-3, T=1.0, eps=0.05).validate())
    c.check("runtime < 120 s", time.time() - t0 < 120)
    for name in sim.MONITORED:
        c.check("drift %s = %.1e < 1e-5" % (name, rep.max_drift[name]), rep.max_drift[name] < 1e-5)
    study = sim.refinement_study(sim.GridConfig(T=0.5, eps=0.05), Ns=(12, 16, 24), dts=(0.05, 0.025, 0.0125))
    c.check("4th-order spatial drift convergence", min(study["space_order"]) > 3.5)
    c.check("4th-order temporal convergence", min(study["time_order"]) > 3.5)
    zero = sim.GridConfig(eps=0.0, T=2.0, dt=2e-3).validate()
    rz = sim.run_and_monitor(zero)
    fs = rz.final_state
    c.check("steady solution exact over 1000 steps", rz.steps == 1000
            and max(np.abs(fs.w).max(), np.abs(fs.v).max()) < 1e-12)
    c.finish()


def test_criterion_8_w_solve(acceptance_sink):
    c = Criterion("8 w-solve", acceptance_sink)
    cfg = sim.GridConfig().validate()
    g = sim.Grid(cfg)
    st = sim.init_state(cfg, g)
    sigma0 = np.sin(g.x + 0.3) * np.cos(2 * g.y) + 0.5 * np.cos(g.x) * np.sin(g.z + g.y)
    out = sim.solve_w(g, st, sim.w_apply(g, st, sigma0))
    c.check("manufactured residual %.1e < 1e-8" % out.residual, out.residual < 1e-8)
    c.check("mean-zero gauge", abs(out.sigma.mean()) < 1e-12)
    c.finish()


if __name__ == "__main__":
    import sys
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn([])
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
