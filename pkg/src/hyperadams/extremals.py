"""Concentration (Moser-type) profile family and the two asymptotic
experiments built on it: the supercritical blow-up rate and the
large-exponent decay of the best Sobolev constant.

The profile v_m on the Euclidean ball of radius 2 has a logarithmic core of
height ~ sqrt(log m / 2M), an inner polynomial correction, and a polynomial
cutoff on [1, 2] matching value and derivatives up to order k-1 at both ends.
The hyperbolic test function is u~_m(x) = v_m(2x): in the critical dimension
its GJMS energy equals the flat k-energy of v_m on the radius-2 ball exactly
(scale invariance of the critical energy), which is how the energy is
computed here, on a flat radial grid whose geometric grading is self-similar
in the concentration scale 1/sqrt(m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ball import (
    GEODESIC,
    DimensionParams,
    RadialFunction,
    RadialGrid,
    euclidean_to_geodesic,
)
from .errors import DomainError, ResolutionError
from .inequalities import adams_functional, beta0, moser_normalizer
from .operators import euclidean_gradk_energy

# grading phase of the energy grids relative to the inner junction; fixed so
# the junction lands at the same relative position inside its element for
# every m (self-similar kink error ~ 1/log m)
_H_FIRST_FRACTION = 1.0 / 7.0
_GRADING_RATIO = 1.5


def _cutoff_coefficients(k: int, b: float) -> np.ndarray:
    """Coefficients of the minimal-degree cutoff xi on [1, 2] in powers of
    w = 2 - rho.

    xi is the unique polynomial of degree 2k-1 with xi(1) = xi(2) = 0,
    d^l xi/d rho^l (1) = (-1)^l (l-1)! b for l = 1..k-1 and vanishing
    derivatives up to order k-1 at rho = 2.  The outer conditions make the
    first k coefficients exactly zero, so evaluation near rho = 2 is
    cancellation-free: xi = w^k (d_k + ... + d_{2k-1} w^{k-1}).  (Evaluating
    in a basis centered elsewhere leaves ~1e-17 absolute noise at rho -> 2,
    which the exponentially growing hyperbolic volume would amplify into
    garbage.)  For k = 1 the two value conditions force xi identically zero.
    """
    n = 2 * k
    coeffs = np.zeros(n)  # d_0 .. d_{k-1} = 0 by the rho = 2 conditions
    # remaining k coefficients from the k conditions at rho = 1 (w = 1):
    # value 0, and d^l/dw^l xi (1) = (l-1)! b for l = 1..k-1
    # (d/d rho = -d/dw flips the sign l times)
    A = np.zeros((k, k))
    rhs = np.zeros(k)
    for l in range(k):
        for col, j in enumerate(range(k, 2 * k)):
            A[l, col] = math.factorial(j) / math.factorial(j - l)
        rhs[l] = 0.0 if l == 0 else math.factorial(l - 1) * b
    coeffs[k:] = np.linalg.solve(A, rhs)
    return coeffs


def _cutoff_eval(coeffs: np.ndarray, l: int, w: np.ndarray) -> np.ndarray:
    """l-th derivative with respect to rho of the cutoff at w = 2 - rho."""
    w = np.asarray(w, dtype=float)
    out = np.zeros_like(w)
    for j in range(l, len(coeffs)):
        out += coeffs[j] * (math.factorial(j) / math.factorial(j - l)) * w ** (j - l)
    return (-1.0) ** l * out


@dataclass
class MoserProfile:
    """Parameters and samples of the concentration profile for one m."""

    m: int
    k: int
    M: float
    log_m: float
    peak: float  # sqrt(log m / 2M)
    slope: float  # b = sqrt(2 / (M log m))
    inner_coeffs: np.ndarray  # coefficient of (1 - m rho^2)^l, l = 1..k-1
    cutoff_spline: np.ndarray  # xi in powers of (rho - 1) on [1, 2]
    samples: RadialFunction
    r_inner: float = field(init=False)  # 1/sqrt(m), in v-coordinates

    def __post_init__(self):
        self.r_inner = 1.0 / math.sqrt(self.m)

    # -- evaluation ---------------------------------------------------------

    def v(self, rho, two_minus_rho=None) -> np.ndarray:
        """The profile on the Euclidean radius rho in [0, infty).

        ``two_minus_rho`` supplies a cancellation-free complement 2 - rho for
        evaluation points exponentially close to the outer edge (geodesic
        grids near the truncation radius).
        """
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        if two_minus_rho is None:
            two_minus_rho = 2.0 - rho
        w = np.atleast_1d(np.asarray(two_minus_rho, dtype=float))
        out = np.zeros_like(rho)
        inner = rho < self.r_inner
        mid = (rho >= self.r_inner) & (rho < 1.0)
        tail = (rho >= 1.0) & (w >= 0.0)
        if np.any(inner):
            z = 1.0 - self.m * rho[inner] ** 2
            acc = np.full(z.shape, self.peak)
            for l, c in enumerate(self.inner_coeffs, start=1):
                acc += c * z**l
            out[inner] = acc
        if np.any(mid):
            out[mid] = -self.slope * np.log(rho[mid])
        if np.any(tail):
            out[tail] = _cutoff_eval(self.cutoff_spline, 0, w[tail])
        return out

    def u_tilde(self, s, one_minus_s=None) -> np.ndarray:
        """The hyperbolic test profile u~(s) = v(2s) on the unit ball."""
        s = np.asarray(s, dtype=float)
        comp = None if one_minus_s is None else 2.0 * np.asarray(one_minus_s, float)
        return self.v(2.0 * s, two_minus_rho=comp)

    def cutoff_derivative(self, l: int, rho) -> np.ndarray:
        return _cutoff_eval(self.cutoff_spline, l, 2.0 - np.asarray(rho, dtype=float))

    def branch_mismatch(self) -> dict:
        """Continuity / matching diagnostics at the two junctions.

        Both branch formulas are evaluated at the junction radius itself:
        the inner polynomial at z = 1 - m rho^2 ~ 0 against the log branch
        at rho = 1/sqrt(m), and the log branch at rho = 1 against the
        cutoff value.
        """
        z0 = 1.0 - self.m * self.r_inner**2
        inner_val = self.peak + float(
            sum(c * z0**l for l, c in enumerate(self.inner_coeffs, start=1))
        )
        mid_val_in = -self.slope * math.log(self.r_inner)
        mid_val_out = -self.slope * math.log(1.0)
        tail_val = float(_cutoff_eval(self.cutoff_spline, 0, np.array([1.0]))[0])
        k = self.k
        jump_k = float(
            self.cutoff_derivative(k, np.array([1.0]))[0]
            - (-1.0) ** k * math.factorial(k - 1) * self.slope
        )
        return {
            "inner_junction": abs(inner_val - mid_val_in),
            "outer_junction": abs(tail_val - mid_val_out),
            "cutoff_order_k_jump": jump_k,
        }

    def cutoff_condition_residuals(self) -> np.ndarray:
        """All 2k boundary-condition residuals of the cutoff polynomial."""
        res = [
            float(self.cutoff_derivative(0, np.array([1.0]))[0]),
            float(self.cutoff_derivative(0, np.array([2.0]))[0]),
        ]
        for l in range(1, self.k):
            want = (-1.0) ** l * math.factorial(l - 1) * self.slope
            res.append(float(self.cutoff_derivative(l, np.array([1.0]))[0]) - want)
            res.append(float(self.cutoff_derivative(l, np.array([2.0]))[0]))
        return np.array(res)

    def cutoff_sup(self) -> float:
        rho = np.linspace(1.0, 2.0, 2001)
        return float(np.max(np.abs(self.v(rho))))


def moser_energy_grid(m: int, k: int, degree: int = 6) -> RadialGrid:
    """Flat radial grid on [0, 2] for the profile's k-energy.

    Geometric grading from h = (1/sqrt(m))/7 with a forced edge at the outer
    junction rho = 1; the inner junction is deliberately not an edge (the
    self-similar kink error is the measurable 1/log m deviation for k = 1).
    """
    h0 = _H_FIRST_FRACTION / math.sqrt(m)
    return RadialGrid.euclidean_geometric(
        2.0, h0, ratio=_GRADING_RATIO, degree=degree, h_cap=0.2, forced_edges=(1.0,)
    )


def moser_hyperbolic_grid(
    m: int, k: int, r_max: float | None = None, degree: int = 6
) -> RadialGrid:
    """Geodesic grid resolving u~_m for hyperbolic-measure functionals."""
    if r_max is None:
        r_max = 4.0 if k == 1 else 32.0
    r_junction = euclidean_to_geodesic(0.5 / math.sqrt(m))
    outer = euclidean_to_geodesic(0.5)  # image of rho = 1
    h0 = _H_FIRST_FRACTION * r_junction
    return RadialGrid.geodesic_geometric(
        r_max, h0, ratio=_GRADING_RATIO, degree=degree, h_cap=1.0,
        forced_edges=(outer,),
    )


def build_moser_profile(m: int, k: int, grid: RadialGrid) -> MoserProfile:
    """Construct the profile for concentration parameter m and sample it.

    Geodesic grids receive samples of u~_m = v_m(2 tanh(r/2)); Euclidean
    grids on [0, 2] receive v_m itself, on [0, 1] the rescaled u~_m.  The
    grid must resolve the concentration scale: node spacing around the inner
    junction below 1/(4 sqrt(m)).
    """
    if m < 2:
        raise DomainError("concentration parameter m must be >= 2")
    if k < 1:
        raise DomainError("k must be >= 1")
    L = math.log(m)
    M = moser_normalizer(k)
    peak = math.sqrt(L / (2.0 * M))
    b = math.sqrt(2.0 / (M * L))
    inner = np.array([1.0 / (math.sqrt(2.0 * M * L) * l) for l in range(1, k)])
    cutoff = _cutoff_coefficients(k, b)

    if grid.coordinate == GEODESIC:
        junction = euclidean_to_geodesic(0.5 / math.sqrt(m))
    else:
        junction = (
            1.0 / math.sqrt(m) if grid.R_max > 1.0 + 1e-12 else 0.5 / math.sqrt(m)
        )
    nodes = grid.mesh.nodes
    nearby = nodes[nodes <= 2.0 * junction]
    if nearby.size < 3 or np.min(np.diff(nearby)) > 1.0 / (4.0 * math.sqrt(m)):
        raise ResolutionError(
            f"grid spacing near the origin does not resolve 1/sqrt(m) for m={m}"
        )

    profile = MoserProfile(
        m=m,
        k=k,
        M=M,
        log_m=L,
        peak=peak,
        slope=b,
        inner_coeffs=inner,
        cutoff_spline=cutoff,
        samples=None,  # filled below
    )
    if grid.coordinate == GEODESIC:
        values = profile.u_tilde(grid.euclidean_nodes, one_minus_s=grid.one_minus_s)
    elif grid.R_max > 1.0 + 1e-12:
        values = profile.v(nodes)
    else:
        values = profile.u_tilde(nodes)
    profile.samples = RadialFunction(grid, values, support_radius=grid.R_max)
    return profile


@dataclass
class MoserEnergy:
    energy: float
    deviation_times_logm: float
    n_nodes: int


def moser_energy(profile: MoserProfile, dims: DimensionParams,
                 degree: int = 6) -> MoserEnergy:
    """Squared critical energy of u~_m via the flat identity.

    In the critical dimension the GJMS form of u~_m equals the flat
    k-energy of v_m over the radius-2 ball exactly (critical scale
    invariance), so the computation happens on a flat radial grid graded
    self-similarly in 1/sqrt(m).
    """
    if dims.k != profile.k:
        raise DomainError("dimension parameters do not match the profile")
    grid = moser_energy_grid(profile.m, profile.k, degree=degree)
    v = RadialFunction(grid, profile.v(grid.mesh.nodes), support_radius=2.0)
    energy = euclidean_gradk_energy(v, dims)
    return MoserEnergy(
        energy=energy,
        deviation_times_logm=(energy - 1.0) * profile.log_m,
        n_nodes=grid.n_nodes,
    )


@dataclass
class BlowupRecord:
    """One cell of the supercritical blow-up experiment."""

    m: int
    beta: float
    energy: float
    normalized: bool
    functional_value: float
    predicted_exponent: float


def blowup_experiment(
    beta_list, m_list, k: int, degree: int = 6, r_max: float | None = None
) -> list[BlowupRecord]:
    """Exponential functional of the normalized profiles over a (beta, m) sweep.

    Above the sharp exponent the functional grows like m^{beta/2M - k}; below
    it the values stay bounded along the family.
    """
    dims = DimensionParams(k)
    M = moser_normalizer(k)
    records = []
    for m in m_list:
        m = int(m)
        hgrid = moser_hyperbolic_grid(m, k, r_max=r_max, degree=degree)
        profile = build_moser_profile(m, k, hgrid)
        energy = moser_energy(profile, dims, degree=degree).energy
        u_norm = profile.samples.scaled(1.0 / math.sqrt(energy))
        for beta in beta_list:
            value = adams_functional(u_norm, float(beta), dims)
            records.append(
                BlowupRecord(
                    m=m,
                    beta=float(beta),
                    energy=energy,
                    normalized=True,
                    functional_value=value,
                    predicted_exponent=float(beta) / (2.0 * M) - k,
                )
            )
    return records


def blowup_slopes(records: list[BlowupRecord]) -> dict:
    """Log-log regression slope of the functional against m, per beta."""
    out = {}
    betas = sorted({rec.beta for rec in records})
    for beta in betas:
        pts = [
            (math.log(rec.m), math.log(rec.functional_value))
            for rec in records
            if rec.beta == beta and math.isfinite(rec.functional_value)
            and rec.functional_value > 0
        ]
        if len(pts) >= 2:
            x, y = np.array(pts).T
            slope = float(np.polyfit(x, y, 1)[0])
        else:
            slope = math.nan
        values = [rec.functional_value for rec in records if rec.beta == beta]
        finite = [v for v in values if math.isfinite(v) and v > 0]
        spread = max(finite) / min(finite) if finite else math.inf
        out[beta] = {
            "slope": slope,
            "predicted_exponent": next(
                rec.predicted_exponent for rec in records if rec.beta == beta
            ),
            "max_over_min": spread,
        }
    return out


def lp_norm_hyperbolic(u: RadialFunction, p: float, dims: DimensionParams) -> float:
    """(int |u|^p dv_g)^{1/p}, evaluated in log space against underflow."""
    vals = np.abs(u.values)
    density = u.grid.hyperbolic_density(dims)
    w = u.grid.quad_weights * density
    pos = vals > 0
    if not np.any(pos):
        return 0.0
    logs = p * np.log(vals[pos])
    top = np.max(logs)
    total = float(np.dot(w[pos], np.exp(logs - top)))
    return math.exp((top + math.log(total)) / p)


@dataclass
class SobolevUpperRow:
    m: int
    p: float
    s_upper: float
    p_s_upper: float
    target: float  # 2 beta0 e


def sobolev_upper_experiment(m_list, k: int, degree: int = 6) -> list[SobolevUpperRow]:
    """Rayleigh quotients of the profile family at exponent p = 2k log m.

    Each quotient is a rigorous upper bound for the best constant at that p,
    and p times the bound trends to 2 beta0 e as m grows.
    """
    dims = DimensionParams(k)
    target = 2.0 * beta0(k, 2 * k) * math.e
    rows = []
    for m in m_list:
        m = int(m)
        p = 2.0 * k * math.log(m)
        hgrid = moser_hyperbolic_grid(m, k, degree=degree)
        profile = build_moser_profile(m, k, hgrid)
        energy = moser_energy(profile, dims, degree=degree).energy
        lp = lp_norm_hyperbolic(profile.samples, p, dims)
        s_upper = energy / lp**2
        rows.append(
            SobolevUpperRow(m=m, p=p, s_upper=s_upper, p_s_upper=p * s_upper, target=target)
        )
    return rows
