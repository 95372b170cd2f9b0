"""Discrete energies, error norms, convergence rates and decay-rate fits."""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .assembly import _PHI_AT_MID, _geometry
from .linalg import cg_solve, ConvergenceError


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    E: float
    kinetic: float
    potential: float


@dataclass(frozen=True)
class ErrorRecord:
    h: float
    k: float
    N: int
    L2: float
    H1: float
    Linf: float


@dataclass(frozen=True)
class DecayFit:
    window: tuple
    slope: float
    delta_est: float
    residual: float
    n_points: int
    status: str = "ok"


def discrete_energy(U_n, U_np1, k, M, K, beta=0.0, t=0.0):
    """Energy of the step pair ``(U^n, U^{n+1})``.

    Kinetic part is ``1/2 |(U^{n+1}-U^n)/k|_M^2``, potential part is
    ``1/2 V'(K + beta M)V`` with ``V`` the midpoint average.
    """
    if k <= 0:
        raise ValueError(f"time step must be positive, got {k}")
    U_n = np.asarray(U_n, dtype=float)
    U_np1 = np.asarray(U_np1, dtype=float)
    if U_n.shape != U_np1.shape:
        raise ValueError("state vectors differ in length")
    dU = (U_np1 - U_n) / k
    V = 0.5 * (U_np1 + U_n)
    kin = 0.5 * float(dU @ (M @ dU))
    pot = 0.5 * float(V @ (K @ V))
    if beta:
        pot += 0.5 * beta * float(V @ (M @ V))
    return EnergyRecord(float(t), kin + pot, kin, pot)


def cubic_potential(U_n, U_np1, M):
    """Potential of the nodal nonlinearity ``u**3 - u`` for the pair ``(U^n, U^{n+1})``.

    Differences of consecutive values reproduce the explicit middle-level
    work term: exactly for the linear part, up to O(k^3) for the cubic.
    """
    a, b = U_n, U_np1
    return float(-0.5 * a @ (M @ b) + (a @ (M @ b**3) + b @ (M @ a**3)) / 8.0)


def m_norm(U, M):
    return math.sqrt(max(float(U @ (M @ U)), 0.0))


def error_norms(mesh, U, exact, exact_grad=None, k=float("nan")):
    """L2, H1 and nodal max errors of the P1 function ``U`` against ``exact(x, y)``.

    ``U`` holds interior values (extended by zero on the boundary). The H1
    entry is the full norm ``sqrt(L2^2 + |.|_1^2)`` and is NaN when no
    gradient ``exact_grad(x, y) -> (ux, uy)`` is supplied.
    """
    full = mesh.lift(U) if len(U) == mesh.n_interior else np.asarray(U, dtype=float)
    area, g = _geometry(mesh)
    mid = mesh.edge_midpoints()
    xq, yq = mid[..., 0], mid[..., 1]
    local = full[mesh.triangles]                     # (t, 3)
    uh_q = local @ _PHI_AT_MID.T                     # (t, q)
    u_q = np.broadcast_to(exact(xq, yq), xq.shape)
    w = area[:, None] / 3.0
    l2 = math.sqrt(float(np.sum(w * (uh_q - u_q) ** 2)))

    h1 = float("nan")
    if exact_grad is not None:
        gh = np.einsum("ti,tid->td", local, g)       # (t, 2), constant per triangle
        ux, uy = exact_grad(xq, yq)
        ux = np.broadcast_to(ux, xq.shape)
        uy = np.broadcast_to(uy, xq.shape)
        semi = float(np.sum(w * ((gh[:, None, 0] - ux) ** 2 + (gh[:, None, 1] - uy) ** 2)))
        h1 = math.sqrt(l2 * l2 + semi)

    p = mesh.nodes
    linf = float(np.max(np.abs(full - np.broadcast_to(exact(p[:, 0], p[:, 1]), full.shape))))
    return ErrorRecord(mesh.h, k, mesh.nx, l2, h1, linf)


def rate(e_coarse, e_fine, h_coarse, h_fine):
    """``log(e_coarse / e_fine) / log(h_coarse / h_fine)``; NaN if undefined."""
    if not (e_coarse > 0 and e_fine > 0) or h_coarse == h_fine:
        return float("nan")
    return (math.log(e_coarse) - math.log(e_fine)) / math.log(h_coarse / h_fine)


def convergence_rates(records, norms=("L2", "Linf", "H1")):
    """Rates between adjacent records (ordered coarse to fine) for each norm."""
    if len(records) < 2:
        raise ValueError("need at least two error records")
    hs = [r.h for r in records]
    if len(set(hs)) != len(hs):
        raise ValueError("mesh sizes must be distinct")
    out = {}
    for name in norms:
        es = [getattr(r, name) for r in records]
        out[name] = [rate(es[i], es[i + 1], hs[i], hs[i + 1]) for i in range(len(es) - 1)]
    return out


class DecayRateEstimator(BaseEstimator):
    """Least-squares fit of ``log y = c - power * delta * t`` on a time window.

    ``power=2`` suits energies (``E ~ exp(-2 delta t)``), ``power=1`` suits
    norms. Only points inside ``window`` with ``y > floor`` are used.

    Attributes
    ----------
    slope_, intercept_ : float
        Coefficients of the fitted line through ``(t, log y)``.
    delta_ : float
        ``-slope_ / power``.
    residual_ : float
        RMS deviation of ``log y`` from the line.
    """

    def __init__(self, window=None, power=2, floor=1e-300):
        self.window = window
        self.power = power
        self.floor = floor

    def fit(self, t, y):
        t = np.asarray(t, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if t.shape != y.shape:
            raise ValueError(f"t and y differ in length: {t.shape} vs {y.shape}")
        lo, hi = self.window if self.window is not None else (t.min(), t.max())
        inside = (t >= lo - 1e-12) & (t <= hi + 1e-12)
        if not inside.any():
            raise ValueError(f"window [{lo}, {hi}] contains no samples")
        keep = inside & (y > self.floor)
        self.window_ = (float(lo), float(hi))
        self.n_points_ = int(keep.sum())
        if self.n_points_ == 0:
            self.status_ = "fully decayed"
            self.slope_ = self.intercept_ = self.delta_ = self.residual_ = float("nan")
            return self
        if self.n_points_ < 3:
            raise ValueError(f"need at least 3 positive samples in window, got {self.n_points_}")
        tt, ly = t[keep], np.log(y[keep])
        tm = tt.mean()
        dt = tt - tm
        slope = float(dt @ (ly - ly.mean()) / (dt @ dt))
        intercept = float(ly.mean() - slope * tm)
        self.slope_ = slope
        self.intercept_ = intercept
        self.delta_ = -slope / self.power
        self.residual_ = float(np.sqrt(np.mean((ly - (intercept + slope * tt)) ** 2)))
        self.status_ = "ok"
        return self

    def predict(self, t):
        check_is_fitted(self, "slope_")
        return np.exp(self.intercept_ + self.slope_ * np.asarray(t, dtype=float))

    def as_fit(self):
        check_is_fitted(self, "slope_")
        return DecayFit(self.window_, self.slope_, self.delta_, self.residual_,
                        self.n_points_, self.status_)


def fit_decay_rate(records, window=None):
    """Decay rate ``delta`` of energies ``E_n ~ exp(-2 delta t_n)``.

    ``records`` is a sequence of :class:`EnergyRecord`. The default window
    is the last 80% of the recorded time span.
    """
    t = np.array([r.t for r in records])
    E = np.array([r.E for r in records])
    if window is None:
        window = (0.2 * t[-1], t[-1])
    return DecayRateEstimator(window, power=2).fit(t, E).as_fit()


def fit_norm_decay(t, norms, window=None):
    """Decay rate of a norm history ``|U(t)| ~ exp(-delta t)``."""
    t = np.asarray(t, dtype=float)
    if window is None:
        window = (0.2 * t[-1], t[-1])
    return DecayRateEstimator(window, power=1).fit(t, norms).as_fit()


def theoretical_delta_max(alpha, lambda1):
    """Largest admissible rate ``min(alpha, lambda1 / (2 alpha)) / 3``."""
    if alpha <= 0 or lambda1 <= 0:
        raise ValueError("alpha and lambda1 must be positive")
    # one rounding per branch, so rational inputs like (10, 33) land exactly
    return min(alpha / 3.0, lambda1 / (6.0 * alpha))


def compensator_params(delta):
    """Damping and compensator achieving rate ``delta``.

    >>> compensator_params(2)
    (10, 32)
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    alpha = delta * (3 + delta)
    beta = delta * (2 + 3 * delta + 2 * delta * delta)
    return alpha, beta


def steady_state_solve(K, M, beta, F, tol=1e-12):
    """Discrete steady state: solve ``(K + beta M) u = F``."""
    L = K + beta * M if beta else K
    u, rep = cg_solve(L, F, tol=tol)
    if not rep.converged:
        raise ConvergenceError(f"steady-state CG failed (residual {rep.residual:.3e})", rep)
    return u
