"""Three-level time stepping for damped wave equations.

The scheme advances

    M (U+ - 2U + U-)/k^2 + D (U+ - U-)/(2k) + (K + beta M)(U+ + 2U + U-)/4
        + M g(U) = (F+ + 2F + F-)/4

where ``D`` is the damping-weighted mass matrix and ``g`` an optional
nonlinearity evaluated nodally at the middle level. The system matrix is
constant, symmetric and positive definite, so each step is one CG solve.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .analysis import cubic_potential, discrete_energy, m_norm
from .assembly import (as_field, assemble_load, assemble_stiffness,
                       assemble_weighted_mass, nodal_interpolant)
from .linalg import ConvergenceError, cg_solve
from .mesh import build_rect_mesh

log = logging.getLogger(__name__)

STARTUP_SCHEMES = ("taylor2", "taylor1", "discrete")


class NumericalError(RuntimeError):
    """The time integration produced non-finite values or a failed solve."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


def cubic(u):
    """The built-in nonlinearity ``u**3 - u``."""
    return u * u * u - u


cubic.potential = cubic_potential


def _zero(x, y, *args):
    return np.zeros(np.shape(x))


@dataclass
class SimConfig:
    """Problem data for one run.

    Spatial functions take ``(x, y)`` arrays; ``forcing`` takes
    ``(x, y, t)``. ``alpha`` may be a number or a function of position.
    ``accel0`` is the exact ``u_tt(., 0)`` used by the ``taylor2`` start;
    without it ``taylor2`` degrades to ``taylor1``. ``k=None`` means
    ``k = h**2``.
    """

    nx: int
    ny: int
    x_range: tuple = (0.0, 1.0)
    y_range: tuple = (0.0, 1.0)
    a11: object = 1.0
    a12: object = 0.0
    a22: object = 1.0
    a0: object = 0.0
    alpha: object = 1.0
    beta: float = 0.0
    forcing: Optional[Callable] = None
    forcing_time_dependent: bool = True
    semilinear: Optional[Callable] = None
    u0: Callable = _zero
    u1: Callable = _zero
    accel0: Optional[Callable] = None
    k: Optional[float] = None
    T: float = 1.0
    startup: str = "taylor2"
    cg_tol: float = 1e-12
    cg_max_iter: Optional[int] = None
    snapshot_times: tuple = ()

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError(f"final time must be positive, got T={self.T}")
        if self.k is not None and self.k <= 0:
            raise ValueError(f"time step must be positive, got k={self.k}")
        if self.k is not None and self.k > self.T:
            raise ValueError(f"time step k={self.k} exceeds final time T={self.T}")
        if self.beta < 0:
            raise ValueError(f"compensator must be nonnegative, got beta={self.beta}")
        if self.startup not in STARTUP_SCHEMES:
            raise ValueError(f"unknown startup scheme {self.startup!r}; "
                             f"expected one of {', '.join(STARTUP_SCHEMES)}")

    def mesh(self):
        return build_rect_mesh(self.nx, self.ny, self.x_range, self.y_range)

    def time_grid(self, h):
        """``(k, n_steps, adjusted)``; k is shrunk so that T is a whole number of steps."""
        k = self.k if self.k is not None else h * h
        n = max(1, math.ceil(self.T / k - 1e-9))
        k_eff = self.T / n
        return k_eff, n, not math.isclose(k_eff, k, rel_tol=1e-12)


@dataclass
class StepperState:
    U_prev: np.ndarray
    U_curr: np.ndarray
    n: int
    t: float


class PrecomputedSystem:
    """Matrices of one (config, mesh, k) triple plus a rolling load cache."""

    def __init__(self, config, mesh, k):
        self.config = config
        self.mesh = mesh
        self.k = k
        self.M = assemble_weighted_mass(mesh, 1.0)
        self.K = assemble_stiffness(mesh, config.a11, config.a12, config.a22, config.a0)
        alpha = as_field(config.alpha)
        if alpha.is_constant:
            if alpha.value < 0:
                raise ValueError(f"damping must be nonnegative, got {alpha.value}")
            self.alpha_const = float(alpha.value)
            self.D = self.alpha_const * self.M
            self.alpha_range = (self.alpha_const, self.alpha_const)
        else:
            self.alpha_const = None
            self.D = assemble_weighted_mass(mesh, alpha)
            mid = mesh.edge_midpoints()
            vals = alpha(mid[..., 0], mid[..., 1])
            self.alpha_range = (float(vals.min()), float(vals.max()))
        self.beta = float(config.beta)
        self.L = self.K + self.beta * self.M if self.beta else self.K
        self.S = (self.M / k**2 + self.D / (2 * k) + self.L / 4).tocsr()
        self._loads = {}

    def load(self, n):
        """Load vector at time level ``n`` (zero vector without forcing)."""
        f = self.config.forcing
        if f is None:
            return None
        if not self.config.forcing_time_dependent:
            n = 0
        if n not in self._loads:
            if len(self._loads) > 4:
                self._loads.pop(min(self._loads))
            self._loads[n] = assemble_load(self.mesh, f, n * self.k)
        return self._loads[n]

    def source(self, n, U):
        """``F_hat^n - M g(U^n)``, or None if both vanish."""
        out = None
        if self.config.forcing is not None:
            out = 0.25 * (self.load(n + 1) + 2 * self.load(n) + self.load(n - 1))
        g = self.config.semilinear
        if g is not None:
            Mg = self.M @ g(U)
            out = -Mg if out is None else out - Mg
        return out


def initialize(config, mesh, system=None):
    """Starting pair ``(U^0, U^1)``.

    ``taylor2`` uses ``u0 + k u1 + k^2/2 u_tt(0)`` with the exact ``accel0``;
    ``taylor1`` drops the last term; ``discrete`` takes ``u_tt(0)`` from the
    semidiscrete equation through one mass-matrix solve.
    """
    if system is None:
        system = PrecomputedSystem(config, mesh, config.time_grid(mesh.h)[0])
    k = system.k
    U0 = nodal_interpolant(mesh, config.u0)
    V0 = nodal_interpolant(mesh, config.u1)
    scheme = config.startup
    if scheme == "taylor2" and config.accel0 is None:
        log.warning("taylor2 start needs an exact initial acceleration; using taylor1")
        scheme = "taylor1"
    if scheme == "taylor1":
        return U0, U0 + k * V0
    if scheme == "taylor2":
        A0 = nodal_interpolant(mesh, config.accel0)
    else:
        rhs = -(system.D @ V0) - system.L @ U0
        if config.forcing is not None:
            rhs = rhs + system.load(0)
        if config.semilinear is not None:
            rhs = rhs - system.M @ config.semilinear(U0)
        A0, rep = cg_solve(system.M, rhs, tol=config.cg_tol)
        if not rep.converged:
            raise NumericalError("mass-matrix solve failed during startup", step=0)
    return U0, U0 + k * V0 + 0.5 * k * k * A0


def _advance(state, system):
    cfg = system.config
    k = system.k
    M, D, L = system.M, system.D, system.L
    U, Um = state.U_curr, state.U_prev
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = (M @ (2 * U - Um)) / k**2 + (D @ Um) / (2 * k) - (L @ (2 * U + Um)) / 4
        src = system.source(state.n, U)
        if src is not None:
            rhs = rhs + src
        finite = np.isfinite(rhs @ rhs)
    if not finite:
        raise NumericalError(f"non-finite right-hand side at step {state.n}", step=state.n)
    # extrapolated start only speeds CG up; the stopping test is relative to ||rhs||
    x, rep = cg_solve(system.S, rhs, tol=cfg.cg_tol, max_iter=cfg.cg_max_iter,
                      x0=2 * U - Um)
    if not rep.converged:
        raise ConvergenceError(
            f"CG failed at step {state.n} (residual {rep.residual:.3e})", rep)
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite values at step {state.n}", step=state.n)
    return StepperState(U, x, state.n + 1, (state.n + 1) * k), src


def step(state, system):
    """Advance ``(U^{n-1}, U^n)`` to ``(U^n, U^{n+1})``."""
    if state.n < 1:
        raise ValueError("stepping starts from level n >= 1")
    return _advance(state, system)[0]


@dataclass
class Trajectory:
    """Output of :func:`run`.

    Row ``n`` of the per-level arrays refers to ``t_n = n k`` for
    ``n = 0..n_steps``. ``energy[n]`` is the energy of the pair
    ``(U^n, U^{n+1})``; ``dissipation[n]`` is ``k sum_{j<=n} dU_j' D dU_j``
    with ``dU_j`` the centered difference, and ``work[n]`` the matching
    sum against the source terms, so that
    ``E^n + dissipation[n] - work[n] = E^0``. For a nonlinearity with a
    ``potential`` attribute, ``energy_total`` adds that potential to ``E^n``.
    """

    mesh: object
    system: PrecomputedSystem
    k: float
    n_steps: int
    k_adjusted: bool
    t: np.ndarray
    energy: list
    dissipation: np.ndarray
    work: np.ndarray
    norm_M: np.ndarray
    norm_K: np.ndarray
    linf: np.ndarray
    U_final: np.ndarray
    snapshots: dict = field(default_factory=dict)
    energy_total: Optional[np.ndarray] = None

    @property
    def E(self):
        return np.array([r.E for r in self.energy])

    def identity_residual(self):
        """Relative defect of the energy balance at every level."""
        E = self.E
        return np.abs(E + self.dissipation - self.work - E[0]) / E[0]

    def write_snapshot(self, path, t):
        """Write ``x y u`` rows (boundary nodes included) for snapshot time ``t``."""
        U = self.mesh.lift(self.snapshots[t])
        with open(path, "w") as fh:
            fh.write("x y u\n")
            for (x, y), u in zip(self.mesh.nodes, U):
                fh.write(f"{x:.12e} {y:.12e} {u:.12e}\n")


def run(config, shift=None, mesh=None):
    """Integrate from ``t = 0`` to ``T`` and record per-level diagnostics.

    ``shift`` (e.g. a steady state) is subtracted from every level before
    energies and norms are recorded.
    """
    mesh = mesh if mesh is not None else config.mesh()
    k, n_steps, adjusted = config.time_grid(mesh.h)
    if adjusted:
        log.info("time step adjusted to k=%r (%d steps to T=%r)", k, n_steps, config.T)
    system = PrecomputedSystem(config, mesh, k)
    U0, U1 = initialize(config, mesh, system)

    M, K, D = system.M, system.K, system.D
    beta = system.beta
    off = np.zeros_like(U0) if shift is None else np.asarray(shift, dtype=float)
    snap_levels = {}
    for ts in config.snapshot_times:
        lvl = int(round(ts / k))
        if lvl < 0 or lvl > n_steps or not math.isclose(lvl * k, ts, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"snapshot time {ts} is not a time level (k={k})")
        snap_levels[lvl] = ts

    t = np.arange(n_steps + 1) * k
    energy = [discrete_energy(U0 - off, U1 - off, k, M, K, beta, t=0.0)]
    diss = np.zeros(n_steps + 1)
    work = np.zeros(n_steps + 1)
    nM = np.zeros(n_steps + 1)
    nK = np.zeros(n_steps + 1)
    linf = np.zeros(n_steps + 1)

    def record_level(n, U):
        W = U - off
        nM[n] = m_norm(W, M)
        nK[n] = m_norm(W, K)
        linf[n] = float(np.max(np.abs(W))) if W.size else 0.0
        if n in snap_levels:
            snaps[snap_levels[n]] = U.copy()

    potential = getattr(config.semilinear, "potential", None)
    total = None
    if potential is not None:
        total = np.zeros(n_steps + 1)
        total[0] = energy[0].E + potential(U0 - off, U1 - off, M)

    snaps = {}
    record_level(0, U0)
    state = StepperState(U0, U1, 1, k)
    for n in range(1, n_steps + 1):
        record_level(n, state.U_curr)
        new, src = _advance(state, system)
        dU = (new.U_curr - state.U_prev) / (2 * k)
        diss[n] = diss[n - 1] + k * float(dU @ (D @ dU))
        work[n] = work[n - 1] + (k * float(dU @ src) if src is not None else 0.0)
        if shift is not None:
            # the shift absorbs the constant part of the load
            work[n] -= k * float(dU @ (system.L @ off))
        energy.append(discrete_energy(state.U_curr - off, new.U_curr - off, k, M, K, beta, t=n * k))
        if total is not None:
            total[n] = energy[-1].E + potential(state.U_curr - off, new.U_curr - off, M)
        U_final = state.U_curr
        state = new

    return Trajectory(mesh, system, k, n_steps, adjusted, t, energy, diss, work,
                      nM, nK, linf, U_final, snaps, total)
