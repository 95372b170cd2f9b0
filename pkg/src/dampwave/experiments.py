"""Experiment descriptions, presets and the CSV-emitting sweep runner.

A problem is described by a flat mapping of string values, the same
schema used by config files::

    # Example 1 on the unit square
    domain     = 0, 1, 0, 1
    nx         = 10
    ny         = 10
    alpha_kind = constant
    alpha_value = 3*pi
    u0         = sin(pi*x)*sin(pi*y)
    u1         = -pi*sin(pi*x)*sin(pi*y)
    k          = auto
    T          = 1

Optional keys: ``beta`` (0), ``semilinear`` (``none`` or ``cubic``),
``forcing`` (0, an expression, or ``manufactured``), ``startup``
(``taylor2``), ``fit_window`` (``lo, hi``), ``outputs`` (output
directory) and ``exact`` (exact solution, enables error tables).
"""

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import sympy as sp

from . import expressions as ex
from .analysis import (DecayFit, compensator_params, error_norms, fit_decay_rate,
                       fit_norm_decay, rate, theoretical_delta_max)
from .linalg import smallest_eigenvalue
from .stepper import SimConfig, cubic, run

log = logging.getLogger(__name__)

KEYS = ("domain", "nx", "ny", "alpha_kind", "alpha_value", "alpha_expr", "beta",
        "semilinear", "forcing", "u0", "u1", "k", "T", "startup", "fit_window",
        "outputs", "exact")
REQUIRED = ("domain", "nx", "ny", "alpha_kind", "u0", "u1", "k", "T")

TABLE_HEADER = "N,h,k,L2,rate_L2,Linf,rate_Linf,H1,rate_H1"
DECAY_HEADER = "t,E,norm_M,norm_K,Linf_node"


class ConfigError(ValueError):
    """Schema or value violations, one message per problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines into ``(entries, line_numbers)``."""
    entries, lines, problems = {}, {}, []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{no}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            problems.append(f"{source}:{no}: unknown key {key!r}")
        elif key in entries:
            problems.append(f"{source}:{no}: duplicate key {key!r} (first on line {lines[key]})")
        elif not value:
            problems.append(f"{source}:{no}: empty value for {key!r}")
        else:
            entries[key] = value
            lines[key] = no
    if problems:
        raise ConfigError(problems)
    return entries, lines


def read_config(path):
    with open(path) as fh:
        entries, lines = parse_config_text(fh.read(), source=path)
    name = os.path.splitext(os.path.basename(path))[0]
    return Problem.from_entries(entries, name=name, lines=lines, source=path)


def _floats(text, n):
    parts = [p.strip() for p in text.replace(";", ",").split(",")]
    if len(parts) != n:
        raise ValueError(f"expected {n} comma-separated numbers, got {text!r}")
    return tuple(float(ex.parse(p)) for p in parts)


@dataclass
class Problem:
    """A validated experiment: raw entries plus the parsed pieces."""

    name: str
    entries: dict
    domain: tuple
    nx: int
    ny: int
    alpha: object              # float or sympy expression in x, y
    beta: float
    semilinear: bool
    forcing: Optional[object]  # sympy expression or None
    u0: object
    u1: object
    exact: Optional[object]
    k: Optional[float]
    T: float
    startup: str
    fit_window: Optional[tuple]
    outputs: Optional[str]

    @classmethod
    def from_entries(cls, entries, name="problem", lines=None, source="<config>"):
        lines = lines or {}
        problems = []

        def where(key):
            return f"{source}:{lines[key]}: " if key in lines else f"{source}: "

        for key in REQUIRED:
            if key not in entries:
                problems.append(f"{source}: missing required key {key!r}")
        kind = entries.get("alpha_kind")
        if kind is not None:
            if kind not in ("constant", "expr"):
                problems.append(f"{where('alpha_kind')}alpha_kind must be 'constant' or 'expr'")
            else:
                need = "alpha_value" if kind == "constant" else "alpha_expr"
                other = "alpha_expr" if kind == "constant" else "alpha_value"
                if need not in entries:
                    problems.append(f"{source}: missing required key {need!r} for alpha_kind={kind}")
                if other in entries:
                    problems.append(f"{where(other)}{other} conflicts with alpha_kind={kind}")
        if problems:
            raise ConfigError(problems)

        def field_value(key, conv):
            try:
                return conv(entries[key])
            except (ValueError, TypeError) as exc:
                problems.append(f"{where(key)}{key}: {exc}")
                return None

        def number(text):
            return float(ex.parse(text))

        def integer(text):
            v = int(text)
            if v < 1:
                raise ValueError("must be a positive integer")
            return v

        domain = field_value("domain", lambda s: _floats(s, 4))
        nx = field_value("nx", integer)
        ny = field_value("ny", integer)
        beta = field_value("beta", number) if "beta" in entries else 0.0
        params = {"beta": beta if beta is not None else 0.0}

        if kind == "constant":
            alpha = field_value("alpha_value", number)
            params["alpha"] = alpha if alpha is not None else 0.0
        else:
            alpha = field_value("alpha_expr", lambda s: ex.parse(s, params))
            if alpha is not None and alpha.has(ex.t):
                problems.append(f"{where('alpha_expr')}alpha_expr must not depend on t")

        def expr(text):
            return ex.parse(text, params)

        u0 = field_value("u0", expr)
        u1 = field_value("u1", expr)
        exact = field_value("exact", expr) if "exact" in entries else None
        semi_text = entries.get("semilinear", "none")
        if semi_text not in ("none", "cubic"):
            problems.append(f"{where('semilinear')}semilinear must be 'none' or 'cubic'")
        semilinear = semi_text == "cubic"

        forcing = None
        ftext = entries.get("forcing", "0")
        if ftext == "manufactured":
            if "exact" not in entries:
                problems.append(f"{where('forcing')}forcing = manufactured needs an 'exact' entry")
        else:
            forcing = field_value("forcing", expr) if "forcing" in entries else None
            if forcing is not None and forcing == 0:
                forcing = None

        kt = entries.get("k")
        k = None if kt in ("auto", "h^2", "h**2") else field_value("k", number)
        T = field_value("T", number)
        if T is not None and T <= 0:
            problems.append(f"{where('T')}T must be positive, got {T}")
        if k is not None and k <= 0:
            problems.append(f"{where('k')}k must be positive, got {k}")
        if k is not None and T is not None and 0 < T < k:
            problems.append(f"{where('k')}k={k} exceeds T={T}")
        if beta is not None and beta < 0:
            problems.append(f"{where('beta')}beta must be nonnegative")
        startup = entries.get("startup", "taylor2")
        if startup not in ("taylor2", "taylor1", "discrete"):
            problems.append(f"{where('startup')}unknown startup scheme {startup!r}")
        window = field_value("fit_window", lambda s: _floats(s, 2)) if "fit_window" in entries else None
        if window is not None and not window[0] < window[1]:
            problems.append(f"{where('fit_window')}fit_window must satisfy lo < hi")
        if domain is not None and not (domain[1] > domain[0] and domain[3] > domain[2]):
            problems.append(f"{where('domain')}domain must be x0, x1, y0, y1 with x0 < x1, y0 < y1")
        if problems:
            raise ConfigError(problems)

        if ftext == "manufactured":
            forcing = pde_residual(exact, alpha, beta, semilinear)
            if forcing == 0:
                forcing = None

        return cls(name, dict(entries), domain, nx, ny, alpha, beta, semilinear, forcing,
                   u0, u1, exact, k, T, startup, window, entries.get("outputs"))

    def with_overrides(self, alpha=None, beta=None, delta=None, k=None, T=None, window=None):
        """A new problem with CLI-style overrides applied to the raw entries."""
        entries = dict(self.entries)
        if delta is not None:
            if alpha is not None or beta is not None:
                raise ConfigError(["--delta cannot be combined with --alpha or --beta"])
            a, b = compensator_params(delta)
            alpha, beta = a, b
        if alpha is not None:
            entries.pop("alpha_expr", None)
            entries["alpha_kind"] = "constant"
            entries["alpha_value"] = repr(float(alpha))
        if beta is not None:
            entries["beta"] = repr(float(beta))
        if k is not None:
            entries["k"] = repr(float(k))
        if T is not None:
            entries["T"] = repr(float(T))
        if window is not None:
            entries["fit_window"] = f"{window[0]!r}, {window[1]!r}"
        return Problem.from_entries(entries, name=self.name, source=self.name)

    def initial_acceleration(self):
        """``u_tt(x, y, 0)`` implied by the PDE and the initial data."""
        f0 = self.forcing.subs(ex.t, 0) if self.forcing is not None else 0
        acc = f0 - self.alpha * self.u1 - self.beta * self.u0 + ex.laplacian(self.u0)
        if self.semilinear:
            acc -= self.u0**3 - self.u0
        return acc.subs(ex.t, 0)

    def sim_config(self, N=None):
        nx, ny = (N, N) if N is not None else (self.nx, self.ny)
        alpha = self.alpha if isinstance(self.alpha, float) else ex.compile_spatial(self.alpha)
        forcing = ex.compile_expr(self.forcing) if self.forcing is not None else None
        return SimConfig(
            nx=nx, ny=ny,
            x_range=self.domain[:2], y_range=self.domain[2:],
            alpha=alpha, beta=self.beta,
            forcing=forcing,
            forcing_time_dependent=self.forcing is not None and ex.depends_on_time(self.forcing),
            semilinear=cubic if self.semilinear else None,
            u0=ex.compile_spatial(self.u0), u1=ex.compile_spatial(self.u1),
            accel0=ex.compile_spatial(self.initial_acceleration()),
            k=self.k, T=self.T, startup=self.startup)


def pde_residual(u, alpha, beta, semilinear, forcing=0):
    """``u_tt + alpha u_t + beta u - lap u [+ u^3 - u] - forcing``."""
    r = sp.diff(u, ex.t, 2) + alpha * sp.diff(u, ex.t) + beta * u - ex.laplacian(u)
    if semilinear:
        r += u**3 - u
    return r - forcing


# Presets. Values are strings in the config schema, so a config file with
# the same entries takes exactly the same code path.
_PHI = "sin(pi*x)*sin(pi*y)"
_DECAY = f"exp(-pi*t)*{_PHI}"
_EX2_RATE = "(-alpha/2 + sqrt(alpha^2/4 - 2*pi^2))"

PRESETS = {
    "example1": dict(
        description="convergence table and decay history, constant damping", sweep=(5, 10, 15, 20, 25),
        entries=dict(domain="0, 1, 0, 1", nx="10", ny="10", alpha_kind="constant",
                     alpha_value="3*pi", u0=_PHI, u1=f"-pi*{_PHI}", exact=_DECAY,
                     k="auto", T="1")),
    "example2": dict(
        description="convergence table, overdamped single mode", sweep=(6, 12, 18, 24, 30),
        min_alpha=2 * math.sqrt(2) * math.pi,
        entries=dict(domain="0, 1, 0, 1", nx="12", ny="12", alpha_kind="constant",
                     alpha_value="8.9", u0=_PHI, u1=f"{_EX2_RATE}*{_PHI}",
                     exact=f"exp({_EX2_RATE}*t)*{_PHI}", k="auto", T="1")),
    "example3": dict(
        description="convergence table, weak damping with forcing", sweep=(6, 12, 18, 24, 30),
        entries=dict(domain="0, 1, 0, 1", nx="12", ny="12", alpha_kind="constant",
                     alpha_value="0.1", forcing="manufactured", u0=_PHI, u1=f"-pi*{_PHI}",
                     exact=_DECAY, k="auto", T="1")),
    "example4": dict(
        description="convergence table, space-dependent damping", sweep=(6, 12, 18, 24, 30),
        entries=dict(domain="1, 2, 1, 2", nx="12", ny="12", alpha_kind="expr",
                     alpha_expr="1.0*abs(x)^(-0.5)", forcing="manufactured",
                     u0=_PHI, u1=f"-pi*{_PHI}", exact=_DECAY, k="auto", T="1")),
    "example5": dict(
        description="convergence table, cubic nonlinearity with forcing", sweep=(8, 16, 24, 32, 40),
        entries=dict(domain="0, 1, 0, 1", nx="16", ny="16", alpha_kind="constant",
                     alpha_value="4", semilinear="cubic", forcing="manufactured",
                     u0=_PHI, u1=f"-pi*{_PHI}", exact=_DECAY, k="auto", T="1")),
    "example6": dict(
        description="decay history, cubic nonlinearity", sweep=(16,),
        entries=dict(domain="0, 1, 0, 1", nx="16", ny="16", alpha_kind="constant",
                     alpha_value="1", semilinear="cubic", u0=_PHI, u1=f"-pi*{_PHI}",
                     k="auto", T="1")),
    "example7": dict(
        description="decay history, damping with compensator", sweep=(16,),
        entries=dict(domain="0, 1, 0, 1", nx="16", ny="16", alpha_kind="constant",
                     alpha_value="10", beta="32", u0=_PHI, u1=f"-pi*{_PHI}",
                     k="auto", T="1")),
}


def load_preset(name):
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; known: {', '.join(PRESETS)}"])
    return Problem.from_entries(PRESETS[name]["entries"], name=name, source=name)


def check_preset_constraints(problem):
    info = PRESETS.get(problem.name, {})
    lo = info.get("min_alpha")
    if lo is not None:
        a = problem.alpha
        if not isinstance(a, float) or a < lo:
            raise ConfigError([f"{problem.name}: alpha must be a constant >= 2*sqrt(2)*pi "
                               f"= {lo:.6f} for a real exponent, got {a}"])


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.10e}"


@dataclass
class RunResult:
    N: int
    trajectory: object
    errors: Optional[object]
    fit_energy: object
    fit_norm: object
    lambda1: float
    lambda1_shifted: float
    delta_max: Optional[float]
    delta_max_shifted: Optional[float]


@dataclass
class SweepResult:
    problem: Problem
    runs: list
    table_rows: list = field(default_factory=list)
    files: list = field(default_factory=list)


def _fit_or_skip(fit, window, *args):
    # a short run may leave too few samples in the window; record, don't crash
    try:
        return fit(*args)
    except ValueError as exc:
        nan = float("nan")
        log.warning("decay fit skipped: %s", exc)
        return DecayFit(tuple(window), nan, nan, nan, 0, status="skipped")


def run_single(problem, N=None):
    cfg = problem.sim_config(N)
    traj = run(cfg)
    sysm = traj.system
    errors = None
    if problem.exact is not None:
        uT = problem.exact.subs(ex.t, problem.T)
        gx, gy = ex.gradient(uT)
        fu = ex.compile_spatial(uT)
        fgx, fgy = ex.compile_spatial(gx), ex.compile_spatial(gy)
        errors = error_norms(traj.mesh, traj.U_final, fu,
                             lambda xv, yv: (fgx(xv, yv), fgy(xv, yv)), k=traj.k)
    T = problem.T
    window = problem.fit_window or (0.2 * T, T)
    fit_e = _fit_or_skip(fit_decay_rate, window, traj.energy, window)
    fit_n = _fit_or_skip(fit_norm_decay, window, traj.t, traj.norm_M, window)
    lam = smallest_eigenvalue(sysm.K, sysm.M)
    lam_s = lam + sysm.beta if sysm.beta else lam
    if sysm.beta:
        lam_s = smallest_eigenvalue(sysm.L, sysm.M)
    a_min = sysm.alpha_range[0]
    dmax = theoretical_delta_max(a_min, lam) if a_min > 0 else None
    dmax_s = theoretical_delta_max(a_min, lam_s) if a_min > 0 else None
    return RunResult(cfg.nx, traj, errors, fit_e, fit_n, lam, lam_s, dmax, dmax_s)


def table_rows(runs):
    """Rows of the error table; rates come from the rounded, emitted errors."""
    rows = []
    prev = None
    for r in runs:
        e = r.errors
        cells = {"L2": _fmt(e.L2), "Linf": _fmt(e.Linf), "H1": _fmt(e.H1)}
        vals = {key: float(s) if s else float("nan") for key, s in cells.items()}
        h = float(_fmt(e.h))
        rates = {}
        for key in cells:
            rates[key] = None if prev is None else rate(prev[0][key], vals[key], prev[1], h)
        rows.append(",".join([str(r.N), _fmt(e.h), _fmt(r.trajectory.k),
                              cells["L2"], _fmt(rates["L2"]),
                              cells["Linf"], _fmt(rates["Linf"]),
                              cells["H1"], _fmt(rates["H1"])]))
        prev = (vals, h)
    return rows


def decay_rows(traj):
    E = traj.E
    return [",".join(_fmt(v) for v in (traj.t[n], E[n], traj.norm_M[n], traj.norm_K[n], traj.linf[n]))
            for n in range(traj.n_steps + 1)]


def summary_lines(problem, runs):
    lines = [f"experiment {problem.name}"]
    desc = PRESETS.get(problem.name, {}).get("description")
    if desc:
        lines.append(f"description {desc}")
    a = problem.alpha
    lines.append(f"alpha {a!r}" if isinstance(a, float) else f"alpha {a}")
    lines.append(f"beta {problem.beta!r}")
    for r in runs:
        tr = r.trajectory
        parts = [f"N={r.N}", f"k={_fmt(tr.k)}", f"steps={tr.n_steps}",
                 f"delta_est_energy={_fmt(r.fit_energy.delta_est)}",
                 f"delta_est_norm={_fmt(r.fit_norm.delta_est)}",
                 f"delta_max={_fmt(r.delta_max)}",
                 f"delta_max_shifted={_fmt(r.delta_max_shifted)}",
                 f"lambda1={_fmt(r.lambda1)}",
                 f"lambda1_shifted={_fmt(r.lambda1_shifted)}",
                 f"energy_identity_residual={_fmt(float(tr.identity_residual().max()))}"]
        for label, fit in (("energy", r.fit_energy), ("norm", r.fit_norm)):
            if fit.status != "ok":
                parts.append(f"fit_{label}={fit.status.replace(' ', '_')}")
        if tr.k_adjusted:
            parts.append("k_adjusted=yes")
        lines.append(" ".join(parts))
    return lines


def run_sweep(problem, Ns=None, out_dir=None):
    """Run ``problem`` for every N and write table, decay and summary files."""
    check_preset_constraints(problem)
    if Ns is None:
        Ns = PRESETS.get(problem.name, {}).get("sweep") or (problem.nx,)
    Ns = list(Ns)
    runs = [run_single(problem, N) for N in Ns]
    result = SweepResult(problem, runs)
    if problem.exact is not None:
        result.table_rows = table_rows(runs)
    out_dir = out_dir or problem.outputs or "."
    os.makedirs(out_dir, exist_ok=True)
    name = problem.name

    def emit(fname, lines):
        path = os.path.join(out_dir, fname)
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        result.files.append(path)

    if result.table_rows:
        emit(f"{name}_table.csv", [TABLE_HEADER] + result.table_rows)
    for r in runs:
        emit(f"{name}_decay_N{r.N}.csv", [DECAY_HEADER] + decay_rows(r.trajectory))
    emit(f"{name}_summary.txt", summary_lines(problem, runs))
    return result
