"""Conjugate gradients and inverse power iteration for SPD pencils."""

from dataclasses import dataclass, field

import numpy as np


class ConvergenceError(RuntimeError):
    """An iterative method exhausted its iteration budget."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    history: list = field(default_factory=list, repr=False)


def cg_solve(A, b, tol=1e-12, max_iter=None, x0=None, raise_on_failure=False):
    """Unpreconditioned conjugate gradients for SPD ``A``.

    Stops once ``||b - A x|| <= tol * ||b||``. The start vector defaults to
    zero. Returns ``(x, SolveReport)``; the report's ``history`` holds the
    relative residual after every iteration.

    Examples
    --------
    >>> x, rep = cg_solve(np.diag([2.0, 3.0]), np.array([2.0, 3.0]))
    >>> np.allclose(x, 1.0), rep.converged
    (True, True)
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"shape mismatch: A is {A.shape}, b has length {n}")
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains non-finite entries")
    if max_iter is None:
        max_iter = max(10 * n, 100)

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x if x0 is not None else b.copy()
    history = [np.linalg.norm(r) / bnorm]
    it = 0
    res = history[-1]
    restarts = 0
    while res > tol and it < max_iter and restarts <= 3:
        restarts += 1
        p = r.copy()
        rr = r @ r
        while history[-1] > tol and it < max_iter:
            Ap = A @ p
            step = rr / (p @ Ap)
            x += step * p
            r -= step * Ap
            rr_new = r @ r
            p = r + (rr_new / rr) * p
            rr = rr_new
            it += 1
            history.append(np.sqrt(rr) / bnorm)
        # the recursive residual drifts; restart from the true one if it lied
        r = b - A @ x
        res = np.linalg.norm(r) / bnorm
        if res > tol:
            history[-1] = res
    report = SolveReport(it, float(res), bool(res <= tol), history)
    if raise_on_failure and not report.converged:
        raise ConvergenceError(
            f"CG did not reach tol={tol:g} in {max_iter} iterations "
            f"(residual {res:.3e})", report)
    return x, report


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)


def smallest_eigenvalue(K, M, tol=1e-13, max_iter=500, cg_tol=1e-14, full_output=False):
    """Smallest eigenvalue of ``K x = lam M x`` by inverse power iteration.

    Each iteration solves ``K y = M x`` with CG and M-normalizes ``y``; the
    estimate is the Rayleigh quotient ``x'Kx / x'Mx``. The start vector is
    all ones. Iteration stops when the relative change of the estimate
    drops below ``tol``.
    """
    n = K.shape[0]
    if K.shape != (n, n) or M.shape != (n, n):
        raise ValueError(f"dimension mismatch: K {K.shape}, M {M.shape}")
    if n == 0:
        raise ValueError("empty system")

    x = np.ones(n)
    x /= np.sqrt(x @ (M @ x))
    lam = x @ (K @ x)
    history = [lam]
    converged = False
    for it in range(1, max_iter + 1):
        y, rep = cg_solve(K, M @ x, tol=cg_tol)
        if not rep.converged and rep.residual > 1e3 * cg_tol:
            raise ConvergenceError(f"inner CG failed at iteration {it}", rep)
        x = y / np.sqrt(y @ (M @ y))
        lam_new = x @ (K @ x)
        history.append(lam_new)
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            converged = True
            break
        lam = lam_new
    if not converged:
        raise ConvergenceError(
            f"inverse iteration did not converge in {max_iter} iterations "
            f"(last estimate {lam!r})")
    if full_output:
        return EigenResult(float(lam), x, it, converged, history)
    return float(lam)
