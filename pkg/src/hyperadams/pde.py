"""Variational solver for the curvature-type equation P_k u + Q1 = Q2 e^{2u}.

Two regimes, matching the two existence results:

* convex mode (Q2 <= 0, Q2 - Q1 square-integrable): minimize the smooth
  convex functional J by damped Newton with Armijo line search; the gradient
  of J is exactly the PDE residual, so the convergence certificate is a
  recomputed residual norm, not a solver internal.
* log-constrained mode (Q1, Q2 square-integrable): minimize
  J_Q(u) = <P_k u, u> + 2 int Q1 u - log int Q2 (e^{2u} - 1) over the open
  set where the log argument is positive; the reported solution is the
  minimizer shifted by -(1/2) log of that argument.

Minimization runs over radial grid functions vanishing at R_max (a
conforming radial subspace); the solver is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solveh_banded

from .ball import DimensionParams, RadialFunction, RadialGrid, volume_weight
from .errors import (
    DiscretizationError,
    DomainError,
    FeasibilityError,
    OverflowNodeError,
)
from .inequalities import EXP_OVERFLOW_LIMIT, beta0
from .operators import gjms_assemble

CONVEX = "convex"
LOG_CONSTRAINED = "log-constrained"

_FAMILIES = {}


def radial_family(name: str, **params) -> Callable[[np.ndarray], np.ndarray]:
    """Named radial data families for Q1/Q2 (gaussian, bump, rational-decay)."""
    try:
        factory = _FAMILIES[name]
    except KeyError:
        raise DomainError(
            f"unknown radial family {name!r}; choose from {sorted(_FAMILIES)}"
        ) from None
    return factory(**params)


def _register(name):
    def deco(fn):
        _FAMILIES[name] = fn
        return fn

    return deco


@_register("gaussian")
def _gaussian(amplitude: float = 1.0, width: float = 1.0, **_ignored):
    if width <= 0:
        raise DomainError("gaussian width must be positive")
    return lambda r: amplitude * np.exp(-((np.asarray(r) / width) ** 2))


@_register("bump")
def _bump(amplitude: float = 1.0, radius: float = 2.0, **_ignored):
    if radius <= 0:
        raise DomainError("bump radius must be positive")

    def fn(r):
        z = 1.0 - (np.asarray(r, dtype=float) / radius) ** 2
        return amplitude * np.clip(z, 0.0, None) ** 3

    return fn


@_register("rational-decay")
def _rational(amplitude: float = 1.0, power: float = 2.0, **_ignored):
    return lambda r: amplitude * (1.0 + np.asarray(r, dtype=float) ** 2) ** (-power)


def square_integrable_dv(
    fn: Callable[[np.ndarray], np.ndarray], dims: DimensionParams, r_max: float
) -> tuple[bool, float]:
    """Tail-quadrature check of int fn^2 dv_g < infinity.

    Integrates fn^2 against the hyperbolic density on [0, r_max] and on
    extension blocks beyond; growing block contributions mean the exponential
    volume beats the decay (not square-integrable).
    """
    from .mesh import Mesh1D, graded_edges

    mesh = Mesh1D(graded_edges(r_max, 24, 1.5), p=6)
    f2 = np.asarray(fn(mesh.nodes), dtype=float) ** 2
    base = mesh.integrate(f2 * volume_weight(mesh.nodes, dims))
    blocks = []
    for i in range(3):
        a, b = r_max + 4.0 * i, r_max + 4.0 * (i + 1)
        bm = Mesh1D(np.linspace(a, b, 5), p=6)
        blocks.append(
            bm.integrate(
                np.asarray(fn(bm.nodes), dtype=float) ** 2
                * volume_weight(bm.nodes, dims)
            )
        )
    growing = blocks[-1] > blocks[0] * 1.000001 and blocks[-1] > 1e-300
    tail_small = blocks[-1] <= 1e-10 * max(base, 1e-300)
    return (not growing) and tail_small, base + sum(blocks)


@dataclass
class PDEProblem:
    """Data and regime for the curvature-type equation."""

    dims: DimensionParams
    Q1: RadialFunction
    Q2: RadialFunction
    mode: str = CONVEX

    def __post_init__(self):
        if self.mode not in (CONVEX, LOG_CONSTRAINED):
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.Q1.grid is not self.Q2.grid:
            raise DomainError("Q1 and Q2 must share a grid")
        if self.mode == CONVEX and np.any(self.Q2.values > 1e-14):
            raise DomainError("convex mode requires Q2 <= 0 pointwise")

    @property
    def grid(self) -> RadialGrid:
        return self.Q1.grid

    @classmethod
    def from_families(
        cls,
        dims: DimensionParams,
        grid: RadialGrid,
        q1_spec: tuple[str, dict],
        q2_spec: tuple[str, dict],
        mode: str = CONVEX,
    ) -> "PDEProblem":
        """Build a problem from named families, enforcing the regime's
        square-integrability hypotheses by tail quadrature."""
        q1_fn = radial_family(q1_spec[0], **q1_spec[1])
        q2_fn = radial_family(q2_spec[0], **q2_spec[1])
        if mode == CONVEX:
            diff = lambda r: q2_fn(r) - q1_fn(r)
            ok, _ = square_integrable_dv(diff, dims, grid.R_max)
            if not ok:
                raise DomainError(
                    "convex mode requires Q2 - Q1 square-integrable against dv_g"
                )
        else:
            for nm, fn in (("Q1", q1_fn), ("Q2", q2_fn)):
                ok, _ = square_integrable_dv(fn, dims, grid.R_max)
                if not ok:
                    raise DomainError(
                        f"log-constrained mode requires {nm} square-integrable "
                        "against dv_g"
                    )
        return cls(
            dims=dims,
            Q1=RadialFunction.from_callable(grid, q1_fn),
            Q2=RadialFunction.from_callable(grid, q2_fn),
            mode=mode,
        )


@dataclass
class SolveResult:
    u: RadialFunction
    objective: float
    residual_norm: float
    iterations: int
    converged: bool
    additive_constant: float | None = None
    objective_history: tuple = ()
    message: str = ""


class _Discretization:
    """Restricted (Dirichlet at R_max) weighted matrices for one problem."""

    def __init__(self, problem: PDEProblem):
        dims, grid = problem.dims, problem.grid
        op = gjms_assemble(dims, grid)
        n = grid.n_nodes
        keep = np.arange(n - 1)  # drop the boundary node at R_max
        self.keep = keep
        K = op.stiffness.tocsc()[keep][:, keep].tocsr()
        M = op.mass[keep]
        self.omega = dims.omega_Nm1
        self.mass_dv = self.omega * M  # discrete dv_g weights
        self.shifts = op.shifts
        self.K = K
        self.M = M
        Minv = sp.diags(1.0 / M)
        weighted = None
        for sigma in self.shifts:
            B = (K + sigma * sp.diags(M)).tocsr()
            weighted = B if weighted is None else (weighted @ Minv @ B).tocsr()
        # omega * M P_k: symmetric positive definite energy matrix
        self.H0 = (self.omega * weighted).tocsr()
        self.Q1 = problem.Q1.values[keep]
        self.Q2 = problem.Q2.values[keep]
        self.grid = grid
        self.n = keep.size

    def apply_pk(self, u: np.ndarray) -> np.ndarray:
        """Pointwise P_k u by factor-by-factor application (raw route)."""
        z = u.copy()
        for sigma in self.shifts:
            z = (self.K @ z) / self.M + sigma * z
        return z

    def embed(self, u: np.ndarray) -> RadialFunction:
        full = np.zeros(self.grid.n_nodes)
        full[self.keep] = u
        return RadialFunction(self.grid, full)

    def dv_norm(self, r: np.ndarray) -> float:
        return math.sqrt(float(np.dot(self.mass_dv, r * r)))

    def dv_dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.dot(self.mass_dv, a * b))


def _exp2u(u: np.ndarray, strict: bool) -> np.ndarray:
    expo = 2.0 * u
    top = int(np.argmax(expo))
    if expo[top] > EXP_OVERFLOW_LIMIT:
        if strict:
            raise OverflowNodeError(top, float(expo[top]))
        return None
    return np.exp(expo)


def functional_J(u, problem: PDEProblem, disc: _Discretization | None = None) -> float:
    """Convex-mode objective
    J(u) = 1/2 <P_k u, u> - int Q u - 1/2 int Q2 (e^{2u} - 2u - 1) dv_g,
    with Q = Q2 - Q1.  The last term is nonnegative when Q2 <= 0."""
    if problem.mode != CONVEX:
        raise DomainError("functional_J belongs to the convex mode")
    disc = disc or _Discretization(problem)
    uv = u.values[disc.keep] if isinstance(u, RadialFunction) else np.asarray(u)
    return _J_value(uv, disc, strict=True)


def _J_value(u: np.ndarray, disc: _Discretization, strict: bool = False) -> float:
    e2u = _exp2u(u, strict)
    if e2u is None:
        return math.inf
    Q = disc.Q2 - disc.Q1
    quad = 0.5 * float(u @ (disc.H0 @ u))
    linear = disc.dv_dot(Q, u)
    nonlinear = 0.5 * disc.dv_dot(disc.Q2, e2u - 2.0 * u - 1.0)
    return quad - linear - nonlinear


def gradient_J(
    u, problem: PDEProblem, disc: _Discretization | None = None
) -> np.ndarray:
    """Gradient of J against the dv_g inner product:
    P_k u - Q - Q2 (e^{2u} - 1); identical to the equation residual."""
    if problem.mode != CONVEX:
        raise DomainError("gradient_J belongs to the convex mode")
    disc = disc or _Discretization(problem)
    uv = u.values[disc.keep] if isinstance(u, RadialFunction) else np.asarray(u)
    e2u = _exp2u(uv, True)
    Q = disc.Q2 - disc.Q1
    return disc.apply_pk(uv) - Q - disc.Q2 * (e2u - 1.0)


def hessian_action_J(
    u, w, problem: PDEProblem, disc: _Discretization | None = None
) -> np.ndarray:
    """Hessian action P_k w - 2 Q2 e^{2u} w (positive semidefinite, Q2 <= 0)."""
    if problem.mode != CONVEX:
        raise DomainError("hessian_action_J belongs to the convex mode")
    disc = disc or _Discretization(problem)
    uv = u.values[disc.keep] if isinstance(u, RadialFunction) else np.asarray(u)
    wv = w.values[disc.keep] if isinstance(w, RadialFunction) else np.asarray(w)
    e2u = _exp2u(uv, True)
    return disc.apply_pk(wv) - 2.0 * disc.Q2 * e2u * wv


def _sym_solve(H: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Symmetrically scaled dense solve (keeps axis-row scaling harmless)."""
    d = np.sqrt(np.abs(np.diag(H)))
    d[d == 0] = 1.0
    Hs = H / d[:, None] / d[None, :]
    ys = np.linalg.solve(Hs, rhs / d)
    return ys / d


def banded_direct_solve(disc: _Discretization, rhs_dv: np.ndarray) -> np.ndarray:
    """Oracle path: solve (omega M P_k) u = rhs via a banded Cholesky solve."""
    H = disc.H0.toarray()
    n = H.shape[0]
    bw = 0
    idx = np.nonzero(np.abs(H) > 0)
    if idx[0].size:
        bw = int(np.max(np.abs(idx[0] - idx[1])))
    ab = np.zeros((bw + 1, n))
    for i in range(bw + 1):
        ab[bw - i, i:] = np.diag(H, k=i)
    return solveh_banded(ab, rhs_dv)


def solve_convex(
    problem: PDEProblem, tol: float = 1e-10, max_iter: int = 60
) -> SolveResult:
    """Damped Newton minimization of J with an Armijo line search.

    Falls back to a preconditioned gradient step when the Newton direction
    fails to descend.  Convergence is certified by the dv_g-norm of the
    equation residual recomputed through raw factor applications.
    """
    if problem.mode != CONVEX:
        raise DomainError("solve_convex requires a convex-mode problem")
    disc = _Discretization(problem)
    u = np.zeros(disc.n)
    history = []
    J_u = _J_value(u, disc)
    history.append(J_u)
    converged = False
    message = ""
    it = 0
    best_res = math.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        e2u = _exp2u(u, False)
        if e2u is None:
            message = "iterate overflowed"
            break
        g = disc.apply_pk(u) - (disc.Q2 - disc.Q1) - disc.Q2 * (e2u - 1.0)
        res = disc.dv_norm(g)
        if res <= tol:
            converged = True
            break
        if res >= 0.9 * best_res:
            stalled += 1
            if stalled >= 5:
                message = f"stalled at residual {res:.3e} (numerical floor)"
                break
        else:
            stalled = 0
        best_res = min(best_res, res)
        H = disc.H0.toarray() + np.diag(disc.mass_dv * (-2.0 * disc.Q2) * e2u)
        curv_floor = -1e-10 * max(1.0, float(np.max(np.abs(np.diag(H)))))
        rhs = -disc.mass_dv * g
        try:
            step = _sym_solve(H, rhs)
        except np.linalg.LinAlgError:
            step = rhs / np.diag(H)
        if float(step @ (-rhs)) > 0:
            # direction is not a descent direction for a convex problem:
            # signals a discretization defect unless roundoff-small
            if float(step @ (-rhs)) > -curv_floor:
                raise DiscretizationError(
                    "negative curvature detected in the convex regime"
                )
        t = 1.0
        accepted = False
        slope = float(np.dot(disc.mass_dv * g, step))
        for _ in range(40):
            trial = u + t * step
            J_trial = _J_value(trial, disc)
            if np.isfinite(J_trial) and J_trial <= J_u + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # preconditioned gradient fallback
            precond = disc.H0.toarray() + 1e-6 * np.diag(disc.mass_dv)
            step = _sym_solve(precond, rhs)
            t = 1.0
            for _ in range(40):
                trial = u + t * step
                J_trial = _J_value(trial, disc)
                if np.isfinite(J_trial) and J_trial < J_u:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                message = "line search failed"
                break
        u = u + t * step
        J_u = _J_value(u, disc)
        history.append(J_u)
    e2u = _exp2u(u, False)
    residual = (
        disc.apply_pk(u) + disc.Q1 - disc.Q2 * e2u if e2u is not None else np.full_like(u, np.nan)
    )
    res_norm = disc.dv_norm(residual) if e2u is not None else math.inf
    if not converged and res_norm <= tol:
        converged = True
    return SolveResult(
        u=disc.embed(u),
        objective=J_u,
        residual_norm=res_norm,
        iterations=it,
        converged=converged,
        objective_history=tuple(history),
        message=message or ("converged" if converged else "max_iter reached"),
    )


def log_argument(u: np.ndarray, disc: _Discretization) -> float:
    """int Q2 (e^{2u} - 1) dv_g, the quantity kept positive in log mode."""
    e2u = _exp2u(u, False)
    if e2u is None:
        return math.inf
    return disc.dv_dot(disc.Q2, e2u - 1.0)


def functional_JQ(u, problem: PDEProblem, disc: _Discretization | None = None) -> float:
    """Log-constrained objective
    J_Q(u) = <P_k u, u> + 2 int Q1 u - log int Q2 (e^{2u} - 1) dv_g."""
    if problem.mode != LOG_CONSTRAINED:
        raise DomainError("functional_JQ belongs to the log-constrained mode")
    disc = disc or _Discretization(problem)
    uv = u.values[disc.keep] if isinstance(u, RadialFunction) else np.asarray(u)
    G = log_argument(uv, disc)
    if not G > 0:
        return math.inf
    return float(uv @ (disc.H0 @ uv)) + 2.0 * disc.dv_dot(disc.Q1, uv) - math.log(G)


def _feasible_start(disc: _Discretization) -> np.ndarray:
    """Small profiles aligned with sign(Q2) until the log argument is positive."""
    base = np.where(disc.Q2 > 0, 1.0, np.where(disc.Q2 < 0, -1.0, 0.0))
    for t in (0.1, 0.3, 1.0, 2.0):
        u = t * base
        if log_argument(u, disc) > 0:
            return u
    raise FeasibilityError(
        "no starting profile with positive int Q2 (e^{2u} - 1) dv_g found"
    )


def solve_log_constrained(
    problem: PDEProblem, tol: float = 1e-9, max_iter: int = 120
) -> SolveResult:
    """Minimize J_Q inside the open set {log argument > 0}.

    Newton steps with a Levenberg-style positive-definiteness fix; steps
    leaving the feasible set are rejected and halved.  The reported result
    carries the additive shift -(1/2) log G(u0); the residual certificate is
    evaluated for the shifted function, whose exponential term carries the
    factor 1/G(u0).
    """
    if problem.mode != LOG_CONSTRAINED:
        raise DomainError("solve_log_constrained requires log-constrained mode")
    disc = _Discretization(problem)
    u = _feasible_start(disc)
    J_u = functional_JQ(u, problem, disc)
    history = [J_u]
    converged = False
    message = ""
    it = 0
    for it in range(1, max_iter + 1):
        e2u = _exp2u(u, True)
        G = disc.dv_dot(disc.Q2, e2u - 1.0)
        q2e = disc.mass_dv * disc.Q2 * e2u
        # gradient of J_Q as a plain vector (not dv_g-represented)
        grad = 2.0 * (disc.H0 @ u) + 2.0 * disc.mass_dv * disc.Q1 - 2.0 * q2e / G
        # stationarity of J_Q == shifted-equation residual; certify via that
        shifted_res = disc.apply_pk(u) + disc.Q1 - disc.Q2 * e2u / G
        res = disc.dv_norm(shifted_res)
        if res <= tol:
            converged = True
            break
        H = (
            2.0 * disc.H0.toarray()
            + np.diag(-4.0 * q2e / G)
            + 4.0 * np.outer(q2e, q2e) / G**2
        )
        lam = 0.0
        step = None
        for _ in range(12):
            try:
                Hmod = H + lam * np.diag(disc.mass_dv)
                cand = _sym_solve(Hmod, -grad)
                if float(cand @ grad) < 0:
                    step = cand
                    break
            except np.linalg.LinAlgError:
                pass
            lam = max(10.0 * lam, 1e-6 * float(np.max(np.abs(np.diag(H)))))
        if step is None:
            message = "could not build a descent direction"
            break
        t = 1.0
        accepted = False
        slope = float(step @ grad)
        for _ in range(50):
            trial = u + t * step
            if log_argument(trial, disc) > 0:
                J_trial = functional_JQ(trial, problem, disc)
                if J_trial <= J_u + 1e-4 * t * slope:
                    accepted = True
                    break
            t *= 0.5  # reject steps that leave the feasible set
        if not accepted:
            message = "line search failed"
            break
        u = u + t * step
        J_u = functional_JQ(u, problem, disc)
        history.append(J_u)
    e2u = _exp2u(u, False)
    if e2u is not None:
        G = disc.dv_dot(disc.Q2, e2u - 1.0)
        shift = -0.5 * math.log(G) if G > 0 else math.nan
        shifted_res = disc.apply_pk(u) + disc.Q1 - disc.Q2 * e2u / G
        res_norm = disc.dv_norm(shifted_res)
    else:
        shift, res_norm = math.nan, math.inf
    if not converged and res_norm <= tol:
        converged = True
    return SolveResult(
        u=disc.embed(u),
        objective=J_u,
        residual_norm=res_norm,
        iterations=it,
        converged=converged,
        additive_constant=shift,
        objective_history=tuple(history),
        message=message or ("converged" if converged else "max_iter reached"),
    )


def ray_coercivity_table(
    problem: PDEProblem, direction: RadialFunction, t_values, delta: float = 0.9
) -> list[dict]:
    """J_Q along a ray t -> t u0, with the coercivity comparison
    (1 - 2/(beta0 delta)) E(t) - c0 sqrt(E(t)) implied by the linearized
    exponential-moment bound (c0 fitted from the data)."""
    disc = _Discretization(problem)
    dims = problem.dims
    b0 = beta0(dims.k, dims.N)
    rows = []
    for t in t_values:
        uv = t * direction.values[disc.keep]
        energy = float(uv @ (disc.H0 @ uv))
        J = functional_JQ(uv, problem, disc) if problem.mode == LOG_CONSTRAINED else _J_value(uv, disc)
        rows.append(
            {
                "t": float(t),
                "energy": energy,
                "objective": J,
                "coercive_part": (1.0 - 2.0 / (b0 * delta)) * energy,
            }
        )
    return rows
