"""Riemannian proximal subproblem for the L1 penalty.

For a point x, Riemannian gradient xi and step mu the subproblem is

    min_{eta in T_x}  <xi, eta> + ||eta||^2 / (2 mu) + lambda ||x + eta||_1.

Its KKT system reduces to the nonlinear equation ``psi(Lam) = 0`` in the
normal-space multiplier ``Lam``, which is solved by a regularized
semi-smooth Newton method with conjugate-gradient inner solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import SubproblemStalled
from .manifold import basis_apply, basis_transpose_apply, normal_dim, project_tangent
from .numerics import cg_solve

EXACT = "exact"
_REG_FLOOR = 1e-14
INEXACT = "inexact"


@dataclass
class ProxConfig:
    mu: float
    lambda1: float
    Lg: float
    exact_tol: float = 1e-10
    max_ssn_iter: int = 100
    cg_tol: float = 1e-4
    cg_maxit: int = 100
    nu: float = 0.9999
    beta: float = 0.1
    kappa1: float = 0.2
    kappa2: float = 0.75
    gamma1: float = 2.0
    gamma2: float = 5.0
    lam_lower: float = 1e-5
    eps_psi_init: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.lambda1 < 0 or self.Lg < 0:
            raise ValueError("lambda1 and Lg must be non-negative")
        for name in ("exact_tol", "cg_tol", "nu", "beta", "gamma1", "gamma2",
                     "lam_lower", "eps_psi_init", "kappa1", "kappa2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.kappa1 < self.kappa2 < 1:
            raise ValueError("need kappa1 < kappa2 < 1")

    @classmethod
    def for_shape(cls, mu, lambda1, n, q, **kw):
        """Config with ``Lg = lambda1 * sqrt(n q)``, the Lipschitz constant of
        ``lambda1 * ||.||_1`` in the Frobenius norm."""
        return cls(mu=mu, lambda1=lambda1, Lg=lambda1 * np.sqrt(n * q), **kw)


@dataclass
class ProxResult:
    eta: np.ndarray
    lam: np.ndarray
    psi_norm: float
    ssn_iters: int
    mode: str
    v: np.ndarray
    theta: float = 1.0

    @property
    def lambda_mult(self):
        return self.lam


def soft_threshold(Z, tau):
    """Entrywise ``sign(z) * max(|z| - tau, 0)``."""
    Z = np.asarray(Z, dtype=float)
    return np.sign(Z) * np.maximum(np.abs(Z) - tau, 0.0)


def _shifted(x, xi, Lam, cfg):
    return x.X - cfg.mu * (xi - basis_apply(x, Lam))


def v_of_lambda(x, xi, Lam, cfg):
    """Ambient candidate ``Prox_{mu g}(x - mu (xi - B_x Lam)) - x``."""
    return soft_threshold(_shifted(x, xi, Lam, cfg), cfg.mu * cfg.lambda1) - x.X


def psi(x, xi, Lam, cfg):
    return basis_transpose_apply(x, v_of_lambda(x, xi, Lam, cfg))


def _active_mask(x, xi, Lam, cfg):
    return np.abs(_shifted(x, xi, Lam, cfg)) > cfg.mu * cfg.lambda1


def jacobian_apply(x, xi, Lam, d, cfg, mask=None):
    """Generalized Jacobian of ``psi`` at ``Lam`` applied to ``d``.

    Entries sitting exactly on the threshold get derivative 0.
    """
    if mask is None:
        mask = _active_mask(x, xi, Lam, cfg)
    return cfg.mu * basis_transpose_apply(x, mask * basis_apply(x, d))


def inexact_gate(eta_norm, cfg):
    """Right-hand side of the inexactness test on ``||psi||``."""
    a = 2.0 * cfg.mu * cfg.Lg
    return np.sqrt(a * a + 0.5 * eta_norm**2) - a


class _Eval:
    """Residual, candidate direction, active mask and dual merit at ``lam``."""

    __slots__ = ("lam", "z", "v", "psi", "r", "mask", "merit", "_eta")

    def __init__(self, x, xi, lam, cfg, xcoords):
        z = x.X - cfg.mu * (xi - basis_apply(x, lam))
        tau = cfg.mu * cfg.lambda1
        p = soft_threshold(z, tau)
        self.lam = lam
        self.z = z
        self.v = p - x.X
        self.psi = basis_transpose_apply(x, self.v)
        self.r = float(np.linalg.norm(self.psi))
        self.mask = np.abs(z) > tau
        # convex function whose gradient is psi
        self.merit = float(np.sum(p * p)) / (2.0 * cfg.mu) - float(xcoords @ lam)
        self._eta = None

    def eta(self, x):
        if self._eta is None:
            self._eta = project_tangent(x, self.v)
        return self._eta


def transport_multiplier(lam, x_from, x_to):
    """Re-express normal coordinates at ``x_from`` in the basis at ``x_to``.

    The ambient normal vector is rebuilt and projected onto the new normal
    space, so warm starts survive the change of basis between points.
    """
    if lam is None or x_from is None or x_from is x_to:
        return lam
    return basis_transpose_apply(x_to, basis_apply(x_from, lam))


def _merit_line_search(x, ev, d, cfg, xcoords):
    """Minimize the dual merit along ``d`` exactly.

    Along a line the merit is convex and piecewise quadratic, so its
    derivative is monotone and piecewise linear in the step; a bracket
    followed by Brent's method finds the root at O(nq) cost per evaluation.
    """
    tau = cfg.mu * cfg.lambda1
    w = cfg.mu * basis_apply(x, d)
    c = float(xcoords @ d)
    z0 = ev.z

    def slope(t):
        return float(np.sum(soft_threshold(z0 + t * w, tau) * w)) / cfg.mu - c

    if slope(0.0) >= 0.0:
        return 0.0
    hi = 1.0
    while slope(hi) < 0.0:
        hi *= 2.0
        if hi > 1e6:
            return hi
    return brentq(slope, 0.0, hi, xtol=1e-12 * hi, rtol=1e-10)


def _converged(ev, x, cfg, mode):
    if ev.r <= cfg.exact_tol:
        # an exact solve is always accurate enough; the inexact gate shrinks
        # to zero with eta and would otherwise be unreachable at stationarity
        return True
    if mode == EXACT:
        return False
    return ev.r <= inexact_gate(np.linalg.norm(ev.eta(x)), cfg)


def _result(ev, x, iters, mode, theta):
    return ProxResult(eta=ev.eta(x), lam=ev.lam, psi_norm=ev.r, ssn_iters=iters,
                      mode=mode, v=ev.v, theta=theta)


def solve_subproblem(x, xi, cfg, Lam0=None, mode=INEXACT, theta0=None):
    """Solve the proximal subproblem at ``x`` with regularized semi-smooth Newton.

    ``mode="inexact"`` stops as soon as the residual passes the
    inexactness gate; ``mode="exact"`` drives ``||psi||`` below
    ``cfg.exact_tol``. Raises ``SubproblemStalled`` (carrying the best
    iterate) when ``cfg.max_ssn_iter`` is exhausted.
    """
    if mode not in (EXACT, INEXACT):
        raise ValueError(f"unknown mode {mode!r}")
    n, q = x.X.shape
    m = normal_dim(n, q)
    lam = np.zeros(m) if Lam0 is None else np.array(Lam0, dtype=float)
    xcoords = basis_transpose_apply(x, x.X)
    ev = _Eval(x, xi, lam, cfg, xcoords)
    best = ev
    theta = cfg.eps_psi_init if theta0 is None else max(cfg.lam_lower, float(theta0))
    mu = cfg.mu
    for it in range(cfg.max_ssn_iter):
        if _converged(ev, x, cfg, mode):
            return _result(ev, x, it, mode, theta)
        # regularize in the scale of mu * Lam, where the Jacobian has norm <= 1
        reg = max(mu * theta * ev.r, _REG_FLOOR)

        def op(d, mask=ev.mask, reg=reg):
            return mu * basis_transpose_apply(x, mask * basis_apply(x, d)) + reg * d

        d = cg_solve(op, -ev.psi, tol=cfg.cg_tol, maxit=cfg.cg_maxit)
        trial = _Eval(x, xi, ev.lam + d, cfg, xcoords)
        newton_ok = trial.r <= cfg.nu * ev.r
        if not newton_ok:
            step = _merit_line_search(x, ev, d, cfg, xcoords)
            trial = _Eval(x, xi, ev.lam + step * d, cfg, xcoords)
        ratio = trial.r / ev.r if ev.r > 0 else 0.0
        if not newton_ok:
            theta = cfg.gamma1 * theta
        elif ratio <= cfg.kappa1:
            theta = max(cfg.lam_lower, theta / cfg.gamma2)
        elif ratio <= cfg.kappa2:
            theta = max(cfg.lam_lower, theta / cfg.gamma1)
        else:
            # accepted but slow: usually a flat (inactive) direction of the
            # merit that a smaller regularization crosses in fewer steps
            theta = max(cfg.lam_lower, theta / cfg.gamma1)
        ev = trial
        if ev.r < best.r:
            best = ev
    if _converged(ev, x, cfg, mode):
        return _result(ev, x, cfg.max_ssn_iter, mode, theta)
    raise SubproblemStalled(
        f"semi-smooth Newton did not meet the {mode} criterion in "
        f"{cfg.max_ssn_iter} iterations (||psi|| = {best.r:.3e})",
        best=_result(best, x, cfg.max_ssn_iter, mode, theta),
    )
