"""Periodic-grid integration of the two-component flow ``u_t = v, v_t = q``.

The field is split as ``u = y z + w`` with ``w`` periodic, so every evolved
array lives on the torus and ``u_yz = 1 + w_yz``.  Spatial derivatives are
4th-order centered differences, time stepping is classical RK4.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

STENCIL = {1: 8.0 / 12.0, 2: -1.0 / 12.0}
DENSITIES = ("H1", "H2", "H5", "H6", "H7", "H8", "H0", "Hcd")
MONITORED = ("H1", "H2", "H5", "H6", "H7", "H8")


class ConfigError(ValueError):
    pass


class FloorViolation(RuntimeError):
    def __init__(self, min_uyz, floor, t):
        super().__init__("min |u_yz| = %.3g below floor %.3g at t = %.4g" % (min_uyz, floor, t))
        self.min_uyz, self.floor, self.t = min_uyz, floor, t


@dataclass
class GridConfig:
    N_x: int = 32
    N_y: int = 32
    N_z: int = 32
    L_x: float = 2 * math.pi
    L_y: float = 2 * math.pi
    L_z: float = 2 * math.pi
    dt: float = 2e-3
    T: float = 1.0
    b: float = 0.5
    eps: float = 0.05
    modes: int = 1
    seed: int = 0
    floor: float = 0.1
    b_max: float = 10.0
    sample_every: int = 10
    stencil_order: int = 4
    periodic: bool = True
    monitor: tuple = MONITORED

    def validate(self) -> "GridConfig":
        for n in (self.N_x, self.N_y, self.N_z):
            if int(n) != n or n < 8:
                raise ConfigError("need at least 8 points per axis, got %s" % n)
        if self.dt <= 0 or self.T < 0:
            raise ConfigError("dt must be positive and T non-negative")
        if abs(self.b) > self.b_max:
            raise ConfigError("|b| = %g exceeds %g" % (abs(self.b), self.b_max))
        if self.stencil_order != 4:
            raise ConfigError("only the 4th-order stencil is implemented")
        if not self.periodic:
            raise ConfigError("initial data must be periodic")
        if self.modes < 1:
            raise ConfigError("modes must be at least 1")
        bad = [m for m in self.monitor if m not in DENSITIES]
        if bad:
            raise ConfigError("unknown densities %s" % bad)
        return self

    @classmethod
    def from_text(cls, text: str) -> "GridConfig":
        """``key = value`` lines; ``#`` starts a comment."""
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("expected key = value: %r" % raw)
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise ConfigError("unknown key %r" % key)
            kw[key] = _parse_value(kinds[key], val)
        return cls(**kw).validate()

    @classmethod
    def from_file(cls, path) -> "GridConfig":
        return cls.from_text(Path(path).read_text())


def _parse_value(kind, val: str):
    try:
        if kind == "int":
            return int(val)
        if kind == "float":
            return float(val)
        if kind == "bool":
            if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return val.lower() in ("true", "1", "yes")
        if kind == "tuple":
            return tuple(s.strip() for s in val.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError("bad value %r" % val) from exc
    return val


class Grid:
    def __init__(self, cfg: GridConfig):
        self.cfg = cfg
        self.shape = (cfg.N_x, cfg.N_y, cfg.N_z)
        self.h = (cfg.L_x / cfg.N_x, cfg.L_y / cfg.N_y, cfg.L_z / cfg.N_z)
        axes = [np.arange(n) * h for n, h in zip(self.shape, self.h)]
        self.x, self.y, self.z = np.meshgrid(*axes, indexing="ij")
        self.cell = self.h[0] * self.h[1] * self.h[2]

    def d(self, f: np.ndarray, axis: int) -> np.ndarray:
        out = np.zeros_like(f)
        for s, c in STENCIL.items():
            out += c * (np.roll(f, -s, axis) - np.roll(f, s, axis))
        return out / self.h[axis]

    def dT(self, f: np.ndarray, axis: int) -> np.ndarray:
        return -self.d(f, axis)

    def integrate(self, f: np.ndarray) -> float:
        return float(f.sum() * self.cell)


@dataclass
class FieldState:
    w: np.ndarray
    v: np.ndarray
    t: float = 0.0


class Derivs:
    """Jets of ``u = y z + w`` and of ``v``; background enters only u_y, u_z, u_yz."""

    def __init__(self, grid: Grid, st: FieldState):
        d = grid.d
        w, v = st.w, st.v
        self.v = v
        self.u_x, wy, wz = d(w, 0), d(w, 1), d(w, 2)
        self.u_y = grid.z + wy
        self.u_z = grid.y + wz
        self.u_xx = d(self.u_x, 0)
        self.u_xy = d(self.u_x, 1)
        self.u_xz = d(self.u_x, 2)
        self.u_yz = 1.0 + d(wy, 2)
        self.v_x, self.v_y, self.v_z = d(v, 0), d(v, 1), d(v, 2)


def q_field(D: Derivs, b: float) -> np.ndarray:
    return (D.u_yz * D.u_xx - D.u_xz * D.u_xy + b * (D.u_xz * D.v_y - D.u_xy * D.v_z)
            + D.v_y * D.v_z) / D.u_yz


def _rhs(grid: Grid, w, v, b):
    D = Derivs(grid, FieldState(w, v))
    return v, q_field(D, b)


def check_floor(grid: Grid, st: FieldState, floor: float) -> float:
    m = float(np.abs(1.0 + grid.d(grid.d(st.w, 1), 2)).min())
    if m < floor:
        raise FloorViolation(m, floor, st.t)
    return m


def step(grid: Grid, st: FieldState, dt: float, b: float) -> FieldState:
    w, v = st.w, st.v
    k1 = _rhs(grid, w, v, b)
    k2 = _rhs(grid, w + dt / 2 * k1[0], v + dt / 2 * k1[1], b)
    k3 = _rhs(grid, w + dt / 2 * k2[0], v + dt / 2 * k2[1], b)
    k4 = _rhs(grid, w + dt * k3[0], v + dt * k3[1], b)
    return FieldState(w + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                      v + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
                      st.t + dt)


def _low_mode_field(grid: Grid, rng: np.random.Generator, modes: int) -> np.ndarray:
    out = np.zeros(grid.shape)
    L = (grid.cfg.L_x, grid.cfg.L_y, grid.cfg.L_z)
    coords = (grid.x, grid.y, grid.z)
    for kx in range(0, modes + 1):
        for ky in range(0, modes + 1):
            for kz in range(0, modes + 1):
                if kx == ky == kz == 0:
                    continue
                factor = np.ones(grid.shape)
                for k, c, l in zip((kx, ky, kz), coords, L):
                    factor = factor * np.cos(2 * math.pi * k * c / l + rng.uniform(0, 2 * math.pi))
                out += rng.uniform(-1, 1) * factor
    return out / max(np.abs(out).max(), 1e-300)


def init_state(cfg: GridConfig, grid: Grid = None) -> FieldState:
    cfg.validate()
    grid = grid or Grid(cfg)
    rng = np.random.default_rng(cfg.seed)
    w = cfg.eps * _low_mode_field(grid, rng, cfg.modes)
    v = cfg.eps * _low_mode_field(grid, rng, cfg.modes)
    st = FieldState(w, v)
    check_floor(grid, st, cfg.floor)
    return st


# ---------------------------------------------------------------- integrals

def density(name: str, grid: Grid, st: FieldState, b: float) -> np.ndarray:
    """Grid density of a named integral, with ``v`` in place of ``u_t``.

    Arbitrary functions are instantiated as f(z) = sin z, g(y) = cos y,
    h(y) = sin y, k(z) = cos z.  ``Hcd`` uses c(s) = sin s, d = 0 at the
    current time and is a control, not a conserved quantity.
    """
    D = Derivs(grid, st)
    y, z, x = grid.y, grid.z, grid.x
    v, ux, uy, uz, uyz = D.v, D.u_x, D.u_y, D.u_z, D.u_yz
    if name == "H1":
        return (v ** 2 + ux ** 2) * uyz / 2
    if name == "H2":
        return b / 2 * (v ** 2 + ux ** 2) * uyz - v * ux * uyz
    if name == "H5":
        return np.sin(z) * v * uyz + b / 2 * np.cos(z) * ux * uy
    if name == "H6":
        return np.cos(y) * v * uyz + b / 2 * np.sin(y) * ux * uz
    if name == "H7":
        return -np.sin(y) * (4 * v * uy * uyz + b * (2 * ux * uy * uyz - uy ** 2 * D.u_xz)) / 4
    if name == "H8":
        return -np.cos(z) * (4 * v * uz * uyz - b * (2 * ux * uz * uyz - uz ** 2 * D.u_xy)) / 4
    if name == "H0":
        return (2 * ux * v + b * (v ** 2 + ux ** 2)) * uyz / (2 * (b * b - 1))
    if name == "Hcd":
        s = st.t + x
        return np.sin(s) * v * uyz + np.cos(s) / 2 * uy * uz
    raise ConfigError("unknown density %r" % name)


def integral_value(name: str, grid: Grid, st: FieldState, b: float) -> float:
    return grid.integrate(density(name, grid, st, b))


def drift_scale(name: str, grid: Grid, st: FieldState, b: float) -> float:
    """Denominator of the relative drift: the initial value, or the L1 size
    of the density when the value itself is accidentally tiny."""
    val = abs(integral_value(name, grid, st, b))
    l1 = grid.integrate(np.abs(density(name, grid, st, b)))
    return val if val > 1e-3 * l1 else max(l1, 1e-300)


@dataclass
class Report:
    rows: list
    max_drift: dict
    min_uyz: float
    steps: int
    seconds: float
    aborted: str = ""
    config: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"max_drift": self.max_drift, "min_uyz": self.min_uyz, "steps": self.steps,
                "seconds": round(self.seconds, 3), "aborted": self.aborted, "config": self.config}

    def write(self, out_dir) -> tuple:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / "monitor.csv", out / "summary.json"
        with csv_path.open("w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=list(self.rows[0].keys()))
            wr.writeheader()
            wr.writerows(self.rows)
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True))
        return csv_path, json_path


def run_and_monitor(cfg: GridConfig, state: FieldState = None) -> Report:
    cfg.validate()
    t0 = time.time()
    grid = Grid(cfg)
    st = state or init_state(cfg, grid)
    names = list(cfg.monitor)
    H0 = {n: integral_value(n, grid, st, cfg.b) for n in names}
    scale = {n: drift_scale(n, grid, st, cfg.b) for n in names}
    nsteps = int(round(cfg.T / cfg.dt))
    rows, worst = [], {n: 0.0 for n in names}
    min_uyz = check_floor(grid, st, cfg.floor)
    aborted = ""

    def sample(st, m):
        row = {"time": st.t}
        for n in names:
            row[n] = integral_value(n, grid, st, cfg.b)
        row["min_uyz"] = m
        for n in names:
            d = abs(row[n] - H0[n]) / scale[n]
            row["drift_" + n] = d
            worst[n] = max(worst[n], d)
        rows.append(row)

    sample(st, min_uyz)
    k = 0
    try:
        for k in range(1, nsteps + 1):
            st = step(grid, st, cfg.dt, cfg.b)
            m = check_floor(grid, st, cfg.floor)
            min_uyz = min(min_uyz, m)
            if k % cfg.sample_every == 0 or k == nsteps:
                sample(st, m)
    except FloorViolation as exc:
        aborted = str(exc)
        sample(st, exc.min_uyz)
    cfgd = asdict(cfg)
    cfgd["monitor"] = list(cfg.monitor)
    rep = Report(rows, worst, min_uyz, k, time.time() - t0, aborted, cfgd)
    rep.final_state = st
    return rep


def refinement_study(base: GridConfig, Ns=(16, 24, 32), dts=(0.04, 0.02, 0.01), name="H1") -> dict:
    """Observed orders of drift convergence in space and in time.

    Spatial: fixed tiny dt, drift at horizon for increasing N.  Temporal:
    fixed N, drift at horizon for decreasing dt; the spatial part of the
    drift is removed by subtracting a fine-dt reference on the same grid.
    """
    def final_value(cfg):
        rep = run_and_monitor(cfg)
        return rep.rows[-1][name], rep.rows[0][name]

    def cfg_with(**kw):
        d = asdict(base)
        d.update(kw, monitor=(name,), sample_every=10 ** 9)
        return GridConfig(**d)

    space = []
    for n in Ns:
        end, start = final_value(cfg_with(N_x=n, N_y=n, N_z=n, dt=min(dts) / 2))
        space.append(abs(end - start))
    ref_end, _ = final_value(cfg_with(dt=min(dts) / 4))
    temporal = []
    for dt in dts:
        end, _ = final_value(cfg_with(dt=dt))
        temporal.append(abs(end - ref_end))
    rate = lambda e, r: [math.log(e[i] / e[i + 1]) / math.log(r[i]) for i in range(len(e) - 1)]
    return {
        "N": list(Ns), "space_drift": space,
        "space_order": rate(space, [Ns[i + 1] / Ns[i] for i in range(len(Ns) - 1)]),
        "dt": list(dts), "time_error": temporal,
        "time_order": rate(temporal, [dts[i] / dts[i + 1] for i in range(len(dts) - 1)]),
    }


# ---------------------------------------------------------------- w^-1 on the grid

@dataclass
class WSolve:
    sigma: np.ndarray
    residual: float
    iterations: int
    ill_conditioned: bool


def w_apply(grid: Grid, st: FieldState, f: np.ndarray) -> np.ndarray:
    D = Derivs(grid, st)
    return D.u_yz * grid.d(f, 0) - D.u_xz * grid.d(f, 1)


def solve_w(grid: Grid, st: FieldState, g: np.ndarray, tol: float = 1e-12, maxiter: int = 20000,
            threshold: float = 1e-8) -> WSolve:
    """Least-squares ``w sigma = g`` by preconditioned CG on the normal equations.

    Starting from zero keeps the iterate orthogonal to the discrete kernel;
    the constant mode is projected out as the gauge.  ``residual`` is
    ``|w sigma - g| / |g|``.
    """
    D = Derivs(grid, st)
    a, c = D.u_yz, D.u_xz
    n = g.size

    def A(f):
        return a * grid.d(f, 0) - c * grid.d(f, 1)

    def AT(r):
        return grid.dT(a * r, 0) - grid.dT(c * r, 1)

    diag = np.zeros(grid.shape)
    for s, wgt in STENCIL.items():
        for sgn in (1, -1):
            diag += (wgt / grid.h[0]) ** 2 * np.roll(a, sgn * s, 0) ** 2
            diag += (wgt / grid.h[1]) ** 2 * np.roll(c, sgn * s, 1) ** 2
    pre = 1.0 / np.maximum(diag, 1e-300)

    normal = LinearOperator((n, n), matvec=lambda f: AT(A(f.reshape(grid.shape))).ravel(), dtype=float)
    precond = LinearOperator((n, n), matvec=lambda r: (pre.ravel() * r), dtype=float)
    rhs = AT(g).ravel()
    count = [0]
    sol, _ = cg(normal, rhs, rtol=tol, atol=0.0, maxiter=maxiter, M=precond,
                callback=lambda _x: count.__setitem__(0, count[0] + 1))
    sigma = sol.reshape(grid.shape)
    sigma = sigma - sigma.mean()
    gn = float(np.linalg.norm(g))
    res = float(np.linalg.norm(A(sigma) - g)) / gn if gn else float(np.linalg.norm(A(sigma)))
    return WSolve(sigma, res, count[0], res > threshold)


def nonlocal_flow_component(grid: Grid, st: FieldState, b: float) -> WSolve:
    """``(b/2) w^-1 (v v_yz + v_y v_z)`` evaluated by the grid solve."""
    D = Derivs(grid, st)
    g = st.v * grid.d(D.v_y, 2) + D.v_y * D.v_z
    out = solve_w(grid, st, g)
    out.sigma = b / 2 * out.sigma
    return out
