"""Design-variable regularization: Helmholtz filter, projection, SIMP.

The raw element densities pass through a PDE filter and a smooth
threshold projection before they scale the material.  Both maps are
differentiable; `chain_rule_backprop` pulls objective gradients back
from projected space to raw space.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.sparse import coo_matrix, csc_matrix
from scipy.sparse.linalg import splu

from .mesh import Mesh

VOID_STIFFNESS = 1e-15


def default_filter_radius(char_length: float) -> float:
    return 3.0 * char_length / (2.0 * np.sqrt(3.0))


def simp_modulus(rho_t: NDArray, q: float, modulus: float,
                 void: float = VOID_STIFFNESS) -> NDArray[np.float64]:
    """Power-law interpolation of the Young's modulus.

    Keeps a tiny void stiffness so the assembled system stays positive
    definite when elements empty out.
    """
    rho_t = np.asarray(rho_t)
    return (void + (1.0 - void) * rho_t ** q) * modulus


def simp_modulus_derivative(rho_t: NDArray, q: float, modulus: float,
                            void: float = VOID_STIFFNESS) -> NDArray[np.float64]:
    rho_t = np.asarray(rho_t)
    return (1.0 - void) * q * rho_t ** (q - 1.0) * modulus


def project(rho_f: NDArray, beta: float, eta_thr: float) -> NDArray[np.float64]:
    """Smooth threshold projection, strictly increasing, fixes 0, eta, 1."""
    th_eta = np.tanh(beta * eta_thr)
    denom = th_eta + np.tanh(beta * (1.0 - eta_thr))
    return (th_eta + np.tanh(beta * (np.asarray(rho_f) - eta_thr))) / denom


def project_derivative(rho_f: NDArray, beta: float, eta_thr: float
                       ) -> NDArray[np.float64]:
    denom = np.tanh(beta * eta_thr) + np.tanh(beta * (1.0 - eta_thr))
    x = np.clip(beta * (np.asarray(rho_f) - eta_thr), -350.0, 350.0)
    sech2 = 1.0 / np.cosh(x) ** 2
    return beta * sech2 / denom


class HelmholtzFilter:
    """PDE density filter on the analysis mesh.

    Solves -r^2 lap(rho_f) + rho_f = rho with natural boundary
    conditions using P1 Galerkin elements: the element field enters as a
    piecewise-constant source, the nodal solution is averaged back to
    centroids.  The operator is factorized once per mesh and reused; the
    discrete map preserves constants and the volume integral exactly.
    """

    def __init__(self, mesh: Mesh, radius: Optional[float] = None):
        self.mesh = mesh
        self.radius = default_filter_radius(mesh.char_length) if radius is None \
            else float(radius)
        if self.radius <= 0:
            raise ValueError("filter radius must be positive")
        n_nodes = mesh.n_nodes
        npe = mesh.dimension + 1
        vols = mesh.volumes

        verts = mesh.nodes[mesh.elements]
        edges = verts[:, 1:, :] - verts[:, :1, :]
        grads_rest = np.linalg.inv(edges).transpose(0, 2, 1)
        grads = np.concatenate(
            [-grads_rest.sum(axis=1, keepdims=True), grads_rest], axis=1)

        ke = np.einsum("eik,ejk,e->eij", grads, grads, vols)
        # consistent mass: vol/(npe*(npe+1)) * (ones + identity)
        me = (np.ones((npe, npe)) + np.eye(npe)) / (npe * (npe + 1.0))
        me = vols[:, None, None] * me[None, :, :]

        rows = np.repeat(mesh.elements, npe, axis=1).ravel()
        cols = np.tile(mesh.elements, (1, npe)).ravel()
        a_data = (self.radius ** 2 * ke + me).ravel()
        a_mat = coo_matrix((a_data, (rows, cols)), shape=(n_nodes, n_nodes)).tocsc()
        self._lu = splu(a_mat)

        t_rows = mesh.elements.ravel()
        t_cols = np.repeat(np.arange(mesh.n_elements), npe)
        t_data = np.repeat(vols / npe, npe)
        self._transfer = coo_matrix(
            (t_data, (t_rows, t_cols)), shape=(n_nodes, mesh.n_elements)).tocsc()
        self._volumes = vols

    def apply(self, rho: NDArray) -> NDArray[np.float64]:
        """Filter an element density field."""
        rho = np.asarray(rho, dtype=np.float64)
        if rho.shape != (self.mesh.n_elements,):
            raise ValueError("density field must be per-element")
        nodal = self._lu.solve(self._transfer @ rho)
        return (self._transfer.T @ nodal) / self._volumes

    def adjoint(self, grad: NDArray) -> NDArray[np.float64]:
        """Transpose of `apply` acting on an element-space gradient."""
        grad = np.asarray(grad, dtype=np.float64)
        nodal = self._lu.solve(self._transfer @ (grad / self._volumes))
        return self._transfer.T @ nodal


@dataclass(frozen=True)
class DensityField:
    """One point of the regularization chain: raw, filtered, projected."""

    rho: NDArray[np.float64]
    rho_f: NDArray[np.float64]
    rho_t: NDArray[np.float64]
    radius: float
    beta: float
    eta_thr: float


def evaluate_chain(flt: HelmholtzFilter, rho: NDArray, beta: float,
                   eta_thr: float) -> DensityField:
    """Clamp raw densities to [0,1], filter, project."""
    rho = np.clip(np.asarray(rho, dtype=np.float64), 0.0, 1.0)
    rho_f = flt.apply(rho)
    rho_t = np.clip(project(rho_f, beta, eta_thr), 0.0, 1.0)
    return DensityField(rho=rho, rho_f=rho_f, rho_t=rho_t,
                        radius=flt.radius, beta=beta, eta_thr=eta_thr)


def chain_rule_backprop(flt: HelmholtzFilter, field: DensityField,
                        grad_rho_t: NDArray) -> NDArray[np.float64]:
    """Pull a gradient in projected space back to raw density space."""
    slope = project_derivative(field.rho_f, field.beta, field.eta_thr)
    return flt.adjoint(slope * np.asarray(grad_rho_t))


def volume_and_gradient(mesh: Mesh, rho_t: NDArray):
    """Material volume, its exact gradient, and the volume fraction."""
    rho_t = np.asarray(rho_t)
    volume = float(mesh.volumes @ rho_t)
    return volume, mesh.volumes.copy(), volume / mesh.total_volume
