"""Radial differential operators and the energy norms built from them.

The discrete Laplace operators are Galerkin pairs ``A = M^{-1} K`` with a
weighted stiffness matrix K and a positive diagonal mass M, so every
polynomial in A (in particular each GJMS factor and their product) is exactly
self-adjoint in the M-inner product and the assembled quadratic forms are
symmetric to roundoff.  The product operator keeps its factors, so
quadratic forms are evaluated with at most ceil((k-1)/2) pointwise operator
applications per side.

Sign conventions: ``*_laplacian_radial`` return Delta (resp. Delta_g); the
GJMS base operator is P_1 = -Delta_g - N(N-2)/4 and the critical product is
P_k = P_1 (P_1 + 2) ... (P_1 + k(k-1)).

The axis row of A is the natural weight-zero Galerkin closure: integral
quantities are unaffected, but the pointwise value of an operator application
at r = 0 is not a consistent Laplacian value.  Pointwise identities are
therefore checked on r > 0 nodes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .ball import GEODESIC, DimensionParams, RadialFunction, RadialGrid
from .errors import DiscretizationError, DomainError

ENERGY_CLAMP_REL = 1e-12
SCHEME_ORDER = 4  # conservative documented order for energy functionals


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, RadialFunction) else np.asarray(u, dtype=float)


def _laplacian_parts(dims: DimensionParams, grid: RadialGrid, metric: str):
    """Cached (K, M) for the weighted radial Laplacian of the given metric."""
    cache = getattr(grid, "_op_cache", None)
    if cache is None:
        cache = {}
        grid._op_cache = cache
    key = (metric, dims.N)
    if key not in cache:
        c_stiff, c_mass, axis_fn = grid.laplacian_coefficients(metric, dims)
        K = grid.mesh.stiffness(c_stiff)
        M = grid.mesh.lumped_mass(c_mass, axis_fn=axis_fn)
        M.flags.writeable = False
        cache[key] = (K, M)
    return cache[key]


@dataclass
class DiscreteOperator:
    """Banded sparse realization of a radial differential operator."""

    grid: RadialGrid
    matrix: sp.csr_matrix
    symbol: str
    order: int
    mass: np.ndarray = field(repr=False)

    def apply(self, u) -> np.ndarray:
        return self.matrix @ _values(u)

    def __call__(self, u) -> np.ndarray:
        return self.apply(u)

    @property
    def bandwidth(self) -> int:
        coo = self.matrix.tocoo()
        if coo.nnz == 0:
            return 0
        return int(np.max(np.abs(coo.row - coo.col)))


@dataclass
class GJMSOperator(DiscreteOperator):
    """Critical GJMS product P_k with access to its second-order factors."""

    shifts: tuple = ()
    stiffness: sp.csr_matrix = None
    dims: DimensionParams = None

    def factor_matrix(self, j: int) -> sp.csr_matrix:
        """B_j = K + sigma_j M, the M-weighted j-th factor (symmetric)."""
        return (self.stiffness + self.shifts[j] * sp.diags(self.mass)).tocsr()

    def apply_factors(self, u, js) -> np.ndarray:
        """Apply (A + sigma_j) for j in js pointwise, A = M^{-1} K."""
        z = _values(u).copy()
        for j in js:
            z = (self.stiffness @ z) / self.mass + self.shifts[j] * z
        return z

    def quadratic_form(self, u, w=None) -> float:
        """int (P_k u) w dv_g, exactly symmetric in (u, w)."""
        uv = _values(u)
        wv = _values(w) if w is not None else uv
        k = len(self.shifts)
        a = (k - 1) // 2
        b = k - 1 - a
        y = self.apply_factors(uv, range(a))
        z = self.apply_factors(wv, range(a + 1, a + 1 + b))
        Bmid = self.factor_matrix(a)
        return self.dims.omega_Nm1 * float(y @ (Bmid @ z))


def euclidean_laplacian_radial(dims: DimensionParams, grid: RadialGrid) -> DiscreteOperator:
    """Radial flat Laplacian Delta f = f'' + (N-1)/s f' as a DiscreteOperator."""
    K, M = _laplacian_parts(dims, grid, "euclidean")
    L = (-sp.diags(1.0 / M) @ K).tocsr()
    return DiscreteOperator(grid, L, symbol="euclidean_laplacian", order=2, mass=M)


def hyperbolic_laplacian_radial(dims: DimensionParams, grid: RadialGrid) -> DiscreteOperator:
    """Radial Laplace-Beltrami Delta_g f = f'' + (N-1) coth(r) f'."""
    K, M = _laplacian_parts(dims, grid, "hyperbolic")
    L = (-sp.diags(1.0 / M) @ K).tocsr()
    return DiscreteOperator(grid, L, symbol="hyperbolic_laplacian", order=2, mass=M)


def hyperbolic_laplacian_coordinate_form(
    dims: DimensionParams, grid: RadialGrid
) -> sp.csr_matrix:
    """Strong-form Delta_g assembled from its Euclidean-coordinate expression
    ((1-s^2)/2)^2 Delta + (N-2)((1-s^2)/2) s d/ds.

    Independent cross-check of the divergence-form assembly; the axis row is
    zeroed (the 1/s coefficient is singular there) and comparisons are for
    interior nodes.
    """
    if grid.coordinate != GEODESIC:
        raise DomainError("coordinate-form cross-check lives on geodesic grids")
    s = grid.euclidean_nodes
    oms = grid.one_minus_s
    one_minus_s2 = oms * (1.0 + s)
    D_r = grid.mesh.deriv_matrix()
    D_s = sp.diags(2.0 / one_minus_s2) @ D_r
    D_ss = (D_s @ D_s).tocsr()
    inv_s = np.zeros_like(s)
    inv_s[1:] = 1.0 / s[1:]
    conf2 = (one_minus_s2 / 2.0) ** 2
    first_order = sp.diags((dims.N - 1) * inv_s) @ D_s
    L = sp.diags(conf2) @ (D_ss + first_order) + sp.diags(
        (dims.N - 2) * (one_minus_s2 / 2.0) * s
    ) @ D_s
    L = L.tolil()
    L[0, :] = 0.0
    return L.tocsr()


def gjms_shifts(k: int) -> tuple:
    """Zeroth-order shifts sigma_j = j(j-1) - k(k-1) of the factors of P_k.

    sigma_j <= 0, and the last factor's shift is exactly zero: the j = k
    factor of the critical product reduces to -Delta_g.
    """
    c = k * (k - 1)
    return tuple(j * (j - 1) - c for j in range(1, k + 1))


def gjms_assemble(dims: DimensionParams, grid: RadialGrid) -> GJMSOperator:
    """Assemble P_k = prod_j (P_1 + j(j-1)) on H^{2k}, factor by factor.

    P_1 = -Delta_g - N(N-2)/4 with N(N-2)/4 = k(k-1) in the critical
    dimension, so each factor is A + sigma_j for the same A = -Delta_g.
    """
    if dims.N != 2 * dims.k:
        raise DomainError("critical GJMS assembly requires N = 2k")
    K, M = _laplacian_parts(dims, grid, "hyperbolic")
    shifts = gjms_shifts(dims.k)
    A = (sp.diags(1.0 / M) @ K).tocsr()
    P = None
    eye = sp.identity(grid.n_nodes, format="csr")
    for sigma in shifts:
        factor = (A + sigma * eye).tocsr()
        P = factor if P is None else (factor @ P).tocsr()
    return GJMSOperator(
        grid,
        P,
        symbol=f"gjms_P{dims.k}",
        order=2 * dims.k,
        mass=M,
        shifts=shifts,
        stiffness=K,
        dims=dims,
    )


@dataclass
class EnergyReport:
    """The three energies the critical theory compares, plus grid metadata."""

    gjms_energy: float
    euclidean_energy: float
    sobolev_energy: float
    n_nodes: int
    r_max: float
    degree: int
    notes: tuple = ()


def _clamped(value: float, scale: float, what: str, notes: list) -> float:
    if value < -ENERGY_CLAMP_REL * max(scale, 1.0):
        raise DiscretizationError(
            f"{what} = {value:.3e} is negative beyond roundoff (scale {scale:.3e})"
        )
    if value < 0.0:
        notes.append(f"{what} clamped from {value:.3e} to 0")
        return 0.0
    return value


def euclidean_gradk_energy(v: RadialFunction, dims: DimensionParams) -> float:
    """Flat k-th order energy int |grad^k v|^2 dx for a radial profile.

    grad^k is Delta^{k/2} for even k and grad Delta^{(k-1)/2} for odd k;
    both routes reduce to mass/stiffness forms of the flat radial Laplacian.
    """
    grid, k = v.grid, dims.k
    vals = v.values
    vmax = np.max(np.abs(vals))
    if vmax > 0 and abs(vals[-1]) > 1e-12 * vmax:
        warnings.warn(
            "profile support touches the quadrature boundary; "
            "the flat energy is truncated",
            stacklevel=2,
        )
    K, M = _laplacian_parts(dims, grid, "euclidean")
    z = vals.copy()
    for _ in range(k // 2 if k % 2 == 0 else (k - 1) // 2):
        z = (K @ z) / M
    if k % 2 == 0:
        # z holds (-Delta)^{k/2} v
        return dims.omega_Nm1 * float(np.dot(M, z * z))
    return dims.omega_Nm1 * float(z @ (K @ z))


def iterated_gradient_energy(u: RadialFunction, dims: DimensionParams, m: int) -> float:
    """int |grad_g^m u|^2_g dv_g for a radial profile (m >= 0)."""
    if m < 0:
        raise DomainError("gradient order must be nonnegative")
    K, M = _laplacian_parts(dims, u.grid, "hyperbolic")
    z = u.values.copy()
    for _ in range(m // 2 if m % 2 == 0 else (m - 1) // 2):
        z = (K @ z) / M
    if m % 2 == 0:
        return dims.omega_Nm1 * float(np.dot(M, z * z))
    return dims.omega_Nm1 * float(z @ (K @ z))


def sobolev_energy(u: RadialFunction, dims: DimensionParams) -> float:
    """Full squared Sobolev norm: sum of the gradient energies up to order k."""
    return sum(iterated_gradient_energy(u, dims, m) for m in range(dims.k + 1))


def gjms_energy(
    u: RadialFunction, dims: DimensionParams, operator: GJMSOperator | None = None
) -> EnergyReport:
    """Fill the GJMS, flat, and Sobolev energies of a radial profile.

    In the critical dimension the GJMS form equals the flat k-th order
    energy of the same profile; the two entries of the report are computed
    by independent routes (hyperbolic quadratic form vs flat-coordinate
    mass/stiffness forms) so their agreement is a real check.
    """
    if operator is None:
        operator = gjms_assemble(dims, u.grid)
    notes: list = []
    raw = operator.quadratic_form(u)
    scale = sobolev_energy(u, dims)
    gjms = _clamped(raw, scale, "gjms quadratic form", notes)
    flat = euclidean_gradk_energy(u, dims)
    return EnergyReport(
        gjms_energy=gjms,
        euclidean_energy=flat,
        sobolev_energy=scale,
        n_nodes=u.grid.n_nodes,
        r_max=u.grid.R_max,
        degree=u.grid.degree,
        notes=tuple(notes),
    )
