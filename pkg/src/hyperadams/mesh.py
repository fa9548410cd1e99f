"""Composite Gauss-Lobatto spectral mesh on an interval [0, X].

One mesh serves three jobs at once:

* positive-weight quadrature of ``int c(t) f(t) dt`` (element-wise
  Gauss-Lobatto rule, sub-interval integration exact at element edges),
* weighted stiffness forms ``int c(t) f'(t) g'(t) dt`` assembled per element
  from the exact differentiation matrix of the local interpolant, giving a
  symmetric positive-semidefinite sparse matrix, and
* pointwise differentiation of nodal data (interface values averaged).

Weighted Laplace-type operators are produced as ``A = M^{-1} K`` with a
diagonal (lumped) mass ``M`` and are therefore exactly self-adjoint in the
M-inner product.  Weights that vanish at the axis node t = 0 (such as
sinh^{N-1} or s^{N-1}) make the lumped axis entry zero; it is replaced by the
exact first-element integral of the axis cardinal function so that M stays
positive and ``(A u)_0`` remains a consistent axis value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre as npleg

__all__ = [
    "gauss_lobatto",
    "gauss_legendre",
    "barycentric_weights",
    "differentiation_matrix",
    "Mesh1D",
    "graded_edges",
    "geometric_edges",
]

_GLL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_lobatto(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto-Legendre nodes and weights (p + 1 points on [-1, 1])."""
    if p < 1:
        raise ValueError("polynomial degree must be >= 1")
    if p not in _GLL_CACHE:
        coeff = np.zeros(p + 1)
        coeff[-1] = 1.0
        interior = npleg.legroots(npleg.legder(coeff))
        x = np.concatenate(([-1.0], np.real(interior), [1.0]))
        w = 2.0 / (p * (p + 1) * npleg.legval(x, coeff) ** 2)
        x.flags.writeable = False
        w.flags.writeable = False
        _GLL_CACHE[p] = (x, w)
    return _GLL_CACHE[p]


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights (n points on [-1, 1])."""
    return np.polynomial.legendre.leggauss(n)


def barycentric_weights(x: np.ndarray) -> np.ndarray:
    """Barycentric weights for interpolation on distinct nodes ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    w = np.ones(n)
    for j in range(n):
        w[j] = 1.0 / np.prod(x[j] - np.delete(x, j))
    return w / np.max(np.abs(w))


def differentiation_matrix(x: np.ndarray) -> np.ndarray:
    """Exact differentiation matrix of the interpolant on nodes ``x``."""
    x = np.asarray(x, dtype=float)
    w = barycentric_weights(x)
    n = x.size
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (w[j] / w[i]) / (x[i] - x[j])
        D[i, i] = -np.sum(D[i, np.arange(n) != i])
    return D


def interpolate(x_nodes: np.ndarray, values: np.ndarray, x_eval: np.ndarray) -> np.ndarray:
    """Barycentric evaluation of the interpolant through (x_nodes, values)."""
    w = barycentric_weights(x_nodes)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    out = np.empty_like(x_eval)
    for idx, xe in enumerate(x_eval):
        diff = xe - x_nodes
        exact = np.nonzero(diff == 0.0)[0]
        if exact.size:
            out[idx] = values[exact[0]]
        else:
            q = w / diff
            out[idx] = np.dot(q, values) / np.sum(q)
    return out


def graded_edges(x_max: float, n_elements: int, grading: float = 1.0) -> np.ndarray:
    """Element edges ``x_max * (j/E)**grading`` clustering toward 0."""
    if n_elements < 1:
        raise ValueError("need at least one element")
    if grading <= 0:
        raise ValueError("grading exponent must be positive")
    j = np.arange(n_elements + 1, dtype=float) / n_elements
    return x_max * j**grading


def geometric_edges(
    x_max: float,
    h_first: float,
    ratio: float = 1.5,
    h_cap: float | None = None,
    forced: Sequence[float] = (),
) -> np.ndarray:
    """Geometric element edges 0, h, h*ratio, ... capped at ``h_cap``.

    ``forced`` points become exact edges; the running width continues across
    them.  Used by profile-resolving grids where a fixed grading phase
    relative to a shrinking feature scale matters.
    """
    if not (0 < h_first < x_max):
        raise ValueError("h_first must lie in (0, x_max)")
    if ratio <= 1.0:
        raise ValueError("ratio must exceed 1")
    targets = sorted(set(float(f) for f in forced if 0.0 < f < x_max)) + [float(x_max)]
    edges = [0.0]
    h = h_first
    for tgt in targets:
        while edges[-1] + h < tgt * (1.0 - 1e-12):
            nxt = edges[-1] + h
            # never leave a sliver shorter than 40% of the running width
            if tgt - nxt < 0.4 * h:
                break
            edges.append(nxt)
            h *= ratio
            if h_cap is not None:
                h = min(h, h_cap)
        edges.append(tgt)
    return np.array(edges)


@dataclass(frozen=True)
class Mesh1D:
    """Composite Gauss-Lobatto mesh on [edges[0], edges[-1]].

    Interface nodes are shared (C0 global node set).  ``nodes`` has length
    ``n_elements * p + 1``.
    """

    edges: np.ndarray
    p: int
    nodes: np.ndarray = field(init=False, repr=False)
    quad_w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing with >= 2 entries")
        object.__setattr__(self, "edges", edges)
        xi, wref = gauss_lobatto(self.p)
        n_el = edges.size - 1
        nodes = np.empty(n_el * self.p + 1)
        quad = np.zeros(n_el * self.p + 1)
        for e in range(n_el):
            a, b = edges[e], edges[e + 1]
            jac = 0.5 * (b - a)
            sl = slice(e * self.p, e * self.p + self.p + 1)
            nodes[sl] = 0.5 * (a + b) + jac * xi
            quad[sl] += wref * jac
        nodes.flags.writeable = False
        quad.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "quad_w", quad)

    @property
    def n_elements(self) -> int:
        return self.edges.size - 1

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def element_slice(self, e: int) -> slice:
        return slice(e * self.p, e * self.p + self.p + 1)

    def integrate(self, values: np.ndarray, x_max: float | None = None) -> float:
        """Quadrature of nodal data, optionally truncated at an element edge."""
        values = np.asarray(values, dtype=float)
        if x_max is None:
            return float(np.dot(self.quad_w, values))
        idx = int(np.argmin(np.abs(self.edges - x_max)))
        if abs(self.edges[idx] - x_max) > 1e-9 * max(1.0, abs(x_max)):
            raise ValueError(
                f"x_max={x_max} is not an element edge; nearest is {self.edges[idx]}"
            )
        stop = idx * self.p + 1
        return float(np.dot(self._left_weights(idx), values[:stop]))

    def _left_weights(self, edge_idx: int) -> np.ndarray:
        """Quadrature weights for [edges[0], edges[edge_idx]] only."""
        xi, wref = gauss_lobatto(self.p)
        w = np.zeros(edge_idx * self.p + 1)
        for e in range(edge_idx):
            jac = 0.5 * (self.edges[e + 1] - self.edges[e])
            sl = slice(e * self.p, e * self.p + self.p + 1)
            w[sl] += wref * jac
        return w

    def stiffness(self, coeff: np.ndarray) -> sp.csr_matrix:
        """Assemble ``K[i,j] = int coeff(t) phi_i'(t) phi_j'(t) dt``.

        ``coeff`` is sampled at the mesh nodes; K is symmetric PSD when
        coeff >= 0 and annihilates constants exactly.
        """
        coeff = np.asarray(coeff, dtype=float)
        xi, wref = gauss_lobatto(self.p)
        Dref = differentiation_matrix(xi)
        rows, cols, vals = [], [], []
        idx_local = np.arange(self.p + 1)
        for e in range(self.n_elements):
            jac = 0.5 * (self.edges[e + 1] - self.edges[e])
            sl = self.element_slice(e)
            w_el = wref * coeff[sl] / jac
            Ke = Dref.T @ (w_el[:, None] * Dref)
            gi = e * self.p + idx_local
            rows.append(np.repeat(gi, self.p + 1))
            cols.append(np.tile(gi, self.p + 1))
            vals.append(Ke.ravel())
        K = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_nodes, self.n_nodes),
        )
        K.sum_duplicates()
        return K

    def lumped_mass(
        self, coeff: np.ndarray, axis_fn: Callable[[np.ndarray], np.ndarray] | None = None
    ) -> np.ndarray:
        """Diagonal of ``int coeff(t) f g dt`` under Gauss-Lobatto lumping.

        If the weight vanishes at the first node (axis) and ``axis_fn`` is
        given, the axis entry is replaced by the exact positive integral
        ``int_elem0 phi_0(t)^2 axis_fn(t) dt``.  (The row-sum value
        ``int phi_0 axis_fn`` is useless here: Gauss-Lobatto exactness makes
        it vanish for polynomial weights of degree <= p-1 that are zero at
        the axis.)
        """
        coeff = np.asarray(coeff, dtype=float)
        m = self.quad_w * coeff
        if axis_fn is not None and m[0] == 0.0:
            m = m.copy()
            m[0] = self._axis_cardinal_integral(axis_fn)
            if m[0] <= 0.0:
                raise ValueError(
                    "axis mass correction came out non-positive; "
                    "raise the element degree"
                )
        return m

    def _axis_cardinal_integral(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """``int_elem0 phi_0^2 fn`` via dense Gauss quadrature (fn >= 0)."""
        xi, _ = gauss_lobatto(self.p)
        a, b = self.edges[0], self.edges[1]
        jac = 0.5 * (b - a)
        xg, wg = gauss_legendre(4 * (self.p + 1))
        card = np.zeros(self.p + 1)
        card[0] = 1.0
        phi0 = interpolate(xi, card, xg)
        x_phys = 0.5 * (a + b) + jac * xg
        return float(np.dot(wg * jac, phi0**2 * np.asarray(fn(x_phys), dtype=float)))

    def deriv_matrix(self) -> sp.csr_matrix:
        """Pointwise d/dt of nodal data (interface rows averaged)."""
        xi, _ = gauss_lobatto(self.p)
        Dref = differentiation_matrix(xi)
        rows, cols, vals = [], [], []
        share = np.ones(self.n_nodes)
        for e in range(1, self.n_elements):
            share[e * self.p] = 0.5
        idx_local = np.arange(self.p + 1)
        for e in range(self.n_elements):
            jac = 0.5 * (self.edges[e + 1] - self.edges[e])
            gi = e * self.p + idx_local
            Dl = Dref / jac
            scale = share[gi].copy()
            if e == 0:
                scale[0] = 1.0
            if e == self.n_elements - 1:
                scale[-1] = 1.0
            rows.append(np.repeat(gi, self.p + 1))
            cols.append(np.tile(gi, self.p + 1))
            vals.append((scale[:, None] * Dl).ravel())
        D = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_nodes, self.n_nodes),
        )
        D.sum_duplicates()
        return D

    def evaluate(self, values: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Evaluate the piecewise interpolant of nodal data at points ``x``."""
        values = np.asarray(values, dtype=float)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        el = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.n_elements - 1)
        for e in np.unique(el):
            mask = el == e
            sl = self.element_slice(int(e))
            out[mask] = interpolate(self.nodes[sl], values[sl], x[mask])
        return out
