"""Accelerated Riemannian proximal gradient method on F_v with a safeguard.

The outer loop extrapolates with a Nesterov-type momentum scalar. Every
``N`` iterations a monitored proximal step with backtracking is taken from
the last checkpoint ``z``; whenever it beats the accelerated iterate the
momentum is reset. This keeps ``F`` non-increasing across checkpoints.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .exceptions import NumericalBreakdown, SubproblemStalled
from .manifold import (
    RETRACTIONS,
    FeasiblePoint,
    normal_dim,
    project_tangent,
    project_to_manifold,
)
from .numerics import thin_qr_positive
from .objectives import eval_F, rgrad
from .proxmap import EXACT, INEXACT, ProxConfig, solve_subproblem, transport_multiplier

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    """Outer-loop settings.

    ``mu`` defaults to ``1 / Lf`` where ``Lf`` comes from the problem unless
    given here. ``prox`` holds keyword overrides for :class:`ProxConfig`.
    """

    Lf: float | None = None
    mu: float | None = None
    sigma: float = 1e-4
    nu_ls: float = 0.5
    N: int = 5
    Nmax: int = 5
    max_outer: int = 1000
    stop_ratio: float = 1e-3
    eta_tol: float = 1e-10
    mode: str = INEXACT
    retraction: str = "qr"
    seed: int = 0
    prox: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in (EXACT, INEXACT):
            raise ValueError(f"mode must be 'exact' or 'inexact', got {self.mode!r}")
        if self.retraction not in RETRACTIONS:
            raise ValueError(f"unknown retraction {self.retraction!r}")
        if not 0.0 < self.nu_ls < 1.0:
            raise ValueError("nu_ls must lie in (0, 1)")
        if self.N < 1 or self.Nmax < 1:
            raise ValueError("N and Nmax must be positive")
        if self.mu is None and self.Lf is not None:
            self.mu = 1.0 / self.Lf
        if self.mu is not None:
            self.check_sigma(self.mu)

    def check_sigma(self, mu):
        if not 0.0 < self.sigma <= 1.0 / (8.0 * mu):
            raise ValueError(f"sigma must lie in (0, 1/(8 mu)] = (0, {1 / (8 * mu):.4g}]")


@dataclass
class SolveReport:
    final_x: FeasiblePoint
    F_final: float
    iters: int = 0
    ssn_iters: int = 0
    nf: int = 0
    ng: int = 0
    nR: int = 0
    nSG: int = 0
    eta_ratio: float = float("nan")
    wall_time: float = 0.0
    converged: bool = False
    status: str = "ok"
    message: str = ""
    line_search_failures: int = 0
    stalled_subproblems: int = 0
    checkpoints: list = field(default_factory=list)

    def counters(self):
        return {
            "iter": self.iters,
            "SSNiter": self.ssn_iters,
            "nf": self.nf,
            "ng": self.ng,
            "nR": self.nR,
            "nSG": self.nSG,
        }


class _Counters:
    def __init__(self):
        self.nf = self.ng = self.nR = self.ssn = 0
        self.nSG = self.ls_fail = self.stalled = 0


def momentum_update(t):
    """Next momentum scalar ``(sqrt(4 t^2 + 1) + 1) / 2``."""
    return (np.sqrt(4.0 * t * t + 1.0) + 1.0) / 2.0


def extrapolate(x_next, x_prev, t_k, t_next, retraction="qr"):
    """Retract ``(1 - t_k)/t_next * P_T(x_prev - x_next)`` at ``x_next``."""
    coef = (1.0 - t_k) / t_next
    if coef == 0.0:
        return x_next
    V = coef * project_tangent(x_next, x_prev.X - x_next.X)
    return RETRACTIONS[retraction](x_next, V)


@dataclass
class SafeguardOutcome:
    z_next: FeasiblePoint
    x: FeasiblePoint
    y: FeasiblePoint
    t: float
    lam_z: np.ndarray
    took_effect: bool
    eta_norm: float
    F_z_next: float
    line_search_failed: bool = False
    step: float = 1.0
    theta_z: float | None = None


def safeguard_step(prob, z, x, y, t, F_x, lam_z, cfg, prox_cfg, F_z=None, counters=None,
                   theta_z=None):
    """Monitored proximal step from the checkpoint ``z``.

    ``lam_z`` (normal coordinates at ``z``) and ``theta_z`` warm-start the
    semi-smooth Newton solve.

    A failed line search is not fatal: the best trial point (or ``z``
    itself) is used, which keeps ``F(z_next) <= F(z)``.
    """
    c = counters if counters is not None else _Counters()
    retract = RETRACTIONS[cfg.retraction]
    if F_z is None:
        F_z = eval_F(prob, z)
        c.nf += 1
    xi = rgrad(prob, z)
    c.ng += 1
    res = solve_subproblem(z, xi, prox_cfg, lam_z, mode=cfg.mode, theta0=theta_z)
    c.ssn += res.ssn_iters
    eta = res.eta
    eta2 = float(np.sum(eta * eta))

    alpha = 1.0
    cand = retract(z, eta)
    c.nR += 1
    F_c = eval_F(prob, cand)
    c.nf += 1
    best, F_best, a_best = cand, F_c, alpha
    it = 0
    while F_c > F_z - cfg.sigma * alpha * eta2 and it < cfg.Nmax:
        alpha *= cfg.nu_ls
        it += 1
        cand = retract(z, alpha * eta)
        c.nR += 1
        F_c = eval_F(prob, cand)
        c.nf += 1
        if F_c < F_best:
            best, F_best, a_best = cand, F_c, alpha
    failed = F_c > F_z - cfg.sigma * alpha * eta2
    if failed:
        c.ls_fail += 1
        log.debug("safeguard line search failed after %d backtracks", it)
        cand, F_c, alpha = best, F_best, a_best
        if F_c > F_z:
            cand, F_c, alpha = z, F_z, 0.0

    took = F_c < F_x
    if took:
        x = y = cand
        t = 1.0
        F_x = F_c
        c.nSG += 1
    return SafeguardOutcome(
        z_next=x, x=x, y=y, t=t, lam_z=res.lam, theta_z=res.theta, took_effect=took,
        eta_norm=float(np.sqrt(eta2)), F_z_next=F_x,
        line_search_failed=failed, step=alpha,
    )


def spectral_init(prob, q, seed=0, rotate=True):
    """Start from the leading eigenvectors of the objective operator.

    The normalized weight vector is placed first and the eigenvectors (in
    decreasing eigenvalue order) are orthogonalized against it, so the
    result lies exactly on F_v. The frame is then turned by a seeded random
    rotation of its span unless ``rotate`` is False.
    """
    n = prob.n
    op = prob.objective.op
    k = min(q + 1, n)
    if n <= max(200, 4 * k) and hasattr(op, "to_dense"):
        w, U = np.linalg.eigh(op.to_dense())
        U = U[:, ::-1][:, :k]
    else:
        rng = np.random.default_rng(seed)
        lin = spla.LinearOperator((n, n), matvec=lambda s: op @ s, dtype=float)
        w, U = spla.eigsh(lin, k=k, which="LA", v0=rng.standard_normal(n))
        U = U[:, np.argsort(w)[::-1]]
    cols = [prob.v.unit]
    for j in range(U.shape[1]):
        if len(cols) == q:
            break
        B = np.column_stack(cols)
        r = U[:, j] - B @ (B.T @ U[:, j])
        r -= B @ (B.T @ r)
        nr = np.linalg.norm(r)
        if nr > 1e-6:
            cols.append(r / nr)
    if len(cols) < q:
        rng = np.random.default_rng(seed)
        extra = rng.standard_normal((n, q - len(cols)))
        B = np.column_stack(cols)
        extra -= B @ (B.T @ extra)
        Q, _ = thin_qr_positive(extra)
        cols.extend(Q.T)
    X = np.column_stack(cols[:q])
    if rotate and q > 1:
        # With v/|v| as a column the L1 term is stationary under rotations
        # inside the span (its derivative sums to zero over balanced
        # clusters), so the solver would stay on that saddle. A seeded
        # rotation keeps the span and breaks the symmetry.
        R, _ = thin_qr_positive(np.random.default_rng(seed).standard_normal((q, q)))
        X = X @ R
    return project_to_manifold(X, prob.v)


def random_init(prob, q, seed=0):
    rng = np.random.default_rng(seed)
    Q, _ = thin_qr_positive(rng.standard_normal((prob.n, q)))
    return project_to_manifold(Q, prob.v)


def initial_point(prob, q, init="spectral", seed=0):
    if init == "spectral":
        return spectral_init(prob, q, seed)
    if init == "random":
        return random_init(prob, q, seed)
    raise ValueError(f"unknown init {init!r}")


@dataclass
class SolverState:
    """Loop variables of the accelerated method.

    Multipliers are stored together with the point whose normal basis they
    refer to (``at_y``, ``at_z``) so they can be transported before reuse.
    """

    x: FeasiblePoint
    y: FeasiblePoint
    z: FeasiblePoint
    t: float = 1.0
    k: int = 0
    Lam_y: np.ndarray | None = None
    Lam_z: np.ndarray | None = None
    at_y: FeasiblePoint | None = None
    at_z: FeasiblePoint | None = None
    theta_y: float | None = None
    theta_z: float | None = None
    eta0_norm: float | None = None
    F_x: float = float("nan")
    F_z: float = float("nan")

    @classmethod
    def start(cls, x0, F0):
        m = normal_dim(*x0.X.shape)
        return cls(x=x0, y=x0, z=x0, Lam_y=np.zeros(m), Lam_z=np.zeros(m),
                   at_y=x0, at_z=x0, F_x=F0, F_z=F0)


def solve(prob, x0, cfg=None):
    """Minimize ``f + lambda ||.||_1`` over F_v starting from ``x0``.

    Stops once the safeguard direction norm has dropped by ``cfg.stop_ratio``
    relative to the first safeguard or below ``cfg.eta_tol``, or after
    ``cfg.max_outer`` iterations.
    The returned point is the last checkpoint, so ``F_final <= F(x0)``.
    """
    cfg = SolverConfig() if cfg is None else cfg
    t0 = time.perf_counter()
    Lf = cfg.Lf if cfg.Lf is not None else prob.Lf
    mu = cfg.mu if cfg.mu is not None else 1.0 / Lf
    cfg.check_sigma(mu)
    n, q = x0.X.shape
    prox_cfg = ProxConfig.for_shape(mu, prob.lambda1, n, q, **cfg.prox)
    retract = RETRACTIONS[cfg.retraction]
    c = _Counters()

    st = SolverState.start(x0, eval_F(prob, x0))
    c.nf += 1
    eta_ratio = float("nan")
    converged = False
    status, message = "ok", ""
    checkpoints = []

    for k in range(cfg.max_outer + 1):
        st.k = k
        if k % cfg.N == 0:
            try:
                sg = safeguard_step(prob, st.z, st.x, st.y, st.t, st.F_x,
                                    transport_multiplier(st.Lam_z, st.at_z, st.z), cfg,
                                    prox_cfg, F_z=st.F_z, counters=c, theta_z=st.theta_z)
            except SubproblemStalled as exc:
                status, message = "stalled", str(exc)
                c.stalled += 1
                break
            if st.eta0_norm is None:
                st.eta0_norm = sg.eta_norm
            eta_ratio = sg.eta_norm / st.eta0_norm if st.eta0_norm > 0 else 0.0
            checkpoints.append({"k": k, "F": st.F_z, "eta": sg.eta_norm,
                                "took_effect": sg.took_effect})
            st.Lam_z, st.at_z, st.theta_z = sg.lam_z, st.z, sg.theta_z
            st.z, st.x, st.y, st.t = sg.z_next, sg.x, sg.y, sg.t
            st.F_z = st.F_x = sg.F_z_next
            if not np.isfinite(st.F_z):
                raise NumericalBreakdown("objective became non-finite")
            # the absolute floor covers starts that are already stationary,
            # where the first direction norm is pure round-off
            if eta_ratio <= cfg.stop_ratio or sg.eta_norm <= cfg.eta_tol:
                converged = True
                break
            if k == cfg.max_outer:
                break

        xi = rgrad(prob, st.y)
        c.ng += 1
        try:
            res = solve_subproblem(st.y, xi, prox_cfg,
                                   transport_multiplier(st.Lam_y, st.at_y, st.y),
                                   mode=cfg.mode, theta0=st.theta_y)
        except SubproblemStalled as exc:
            # keep going with the best multiplier; the safeguard protects descent
            c.stalled += 1
            res = exc.best
        c.ssn += res.ssn_iters
        st.Lam_y, st.at_y, st.theta_y = res.lam, st.y, res.theta
        x_next = retract(st.y, res.eta)
        c.nR += 1
        t_next = momentum_update(st.t)
        st.y = extrapolate(x_next, st.x, st.t, t_next, cfg.retraction)
        if st.t != 1.0:
            c.nR += 1
        st.x, st.t = x_next, t_next
        st.F_x = eval_F(prob, st.x)
        c.nf += 1
        if not np.isfinite(st.F_x):
            raise NumericalBreakdown("objective became non-finite")

    if status == "ok" and not converged:
        status = "max_iter"
    return SolveReport(
        final_x=st.z, F_final=st.F_z, iters=st.k, ssn_iters=c.ssn,
        nf=c.nf, ng=c.ng, nR=c.nR, nSG=c.nSG, eta_ratio=eta_ratio,
        wall_time=time.perf_counter() - t0, converged=converged,
        status=status, message=message,
        line_search_failures=c.ls_fail, stalled_subproblems=c.stalled,
        checkpoints=checkpoints,
    )
