"""Linear elastic finite elements on simplex meshes.

First-order displacement elements: constant-strain triangles in plane
stress, linear tets in 3D.  The element stiffness splits into
Poisson-independent component matrices so per-sample assembly under a
random Poisson ratio only recombines precomputed arrays.  Systems are
solved with a sparse direct factorization (kept for adjoint reuse) or,
above a size threshold, diagonally equilibrated ILU-preconditioned CG.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.sparse import coo_matrix, csc_matrix
from scipy.sparse.linalg import splu, spilu, cg, LinearOperator

from .mesh import Mesh

# Quadratic forms giving squared von Mises stress, engineering Voigt order.
VM_QUAD_2D = np.array([
    [1.0, -0.5, 0.0],
    [-0.5, 1.0, 0.0],
    [0.0, 0.0, 3.0],
])
VM_QUAD_3D = np.array([
    [1.0, -0.5, -0.5, 0.0, 0.0, 0.0],
    [-0.5, 1.0, -0.5, 0.0, 0.0, 0.0],
    [-0.5, -0.5, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 3.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 3.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 3.0],
])

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class ElasticityParams:
    """Isotropic material: Young's modulus and Poisson ratio.

    2D analyses assume plane stress with unit thickness.
    """
    modulus: float
    poisson: float

    def __post_init__(self):
        if self.modulus <= 0.0:
            raise ValueError("modulus must be positive")
        if not -1.0 < self.poisson < 0.5:
            raise ValueError("poisson must lie in (-1, 0.5)")


class SolverError(RuntimeError):
    """Linear solve failed the residual contract or the matrix is singular."""


def plane_stress_matrix(poisson: float) -> NDArray[np.float64]:
    """Unit-modulus plane stress constitutive matrix."""
    nu = poisson
    return np.array([
        [1.0, nu, 0.0],
        [nu, 1.0, 0.0],
        [0.0, 0.0, (1.0 - nu) / 2.0],
    ]) / (1.0 - nu * nu)


def isotropic_3d_matrix(poisson: float) -> NDArray[np.float64]:
    """Unit-modulus 3D constitutive matrix, engineering shear strains."""
    nu = poisson
    lam = nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = 1.0 / (2.0 * (1.0 + nu))
    d = np.zeros((6, 6))
    d[:3, :3] = lam
    d[np.arange(3), np.arange(3)] += 2.0 * mu
    d[np.arange(3, 6), np.arange(3, 6)] = mu
    return d


def constitutive_matrix(dimension: int, poisson: float) -> NDArray[np.float64]:
    if dimension == 2:
        return plane_stress_matrix(poisson)
    return isotropic_3d_matrix(poisson)


def _strain_matrices(mesh: Mesh) -> NDArray[np.float64]:
    """Element strain-displacement matrices, (n_ele, n_strain, dofs_per_ele)."""
    dim = mesh.dimension
    verts = mesh.nodes[mesh.elements]
    edges = verts[:, 1:, :] - verts[:, :1, :]
    # shape gradients: rows i of inv(edges)^T are grad of barycentric i+1
    grads_rest = np.linalg.inv(edges).transpose(0, 2, 1)
    grads = np.concatenate([-grads_rest.sum(axis=1, keepdims=True), grads_rest],
                           axis=1)  # (n_ele, dim+1, dim)
    n_ele = mesh.n_elements
    npe = dim + 1
    if dim == 2:
        b = np.zeros((n_ele, 3, 2 * npe))
        gx, gy = grads[:, :, 0], grads[:, :, 1]
        for i in range(npe):
            b[:, 0, 2 * i] = gx[:, i]
            b[:, 1, 2 * i + 1] = gy[:, i]
            b[:, 2, 2 * i] = gy[:, i]
            b[:, 2, 2 * i + 1] = gx[:, i]
        return b
    b = np.zeros((n_ele, 6, 3 * npe))
    gx, gy, gz = grads[:, :, 0], grads[:, :, 1], grads[:, :, 2]
    for i in range(npe):
        b[:, 0, 3 * i] = gx[:, i]
        b[:, 1, 3 * i + 1] = gy[:, i]
        b[:, 2, 3 * i + 2] = gz[:, i]
        b[:, 3, 3 * i] = gy[:, i]
        b[:, 3, 3 * i + 1] = gx[:, i]
        b[:, 4, 3 * i + 1] = gz[:, i]
        b[:, 4, 3 * i + 2] = gy[:, i]
        b[:, 5, 3 * i] = gz[:, i]
        b[:, 5, 3 * i + 2] = gx[:, i]
    return b


@dataclass
class FemSolution:
    """Result of one linear solve, with hooks for adjoint reuse."""

    displacements: NDArray[np.float64]
    compliance: float
    sigma: NDArray[np.float64]
    von_mises: NDArray[np.float64]
    strain_energy_unit: NDArray[np.float64]
    moduli: NDArray[np.float64]
    poisson: float
    load_magnitude: float
    _resolve: Callable[[NDArray], NDArray] = field(repr=False)

    def solve_adjoint(self, rhs: NDArray[np.float64]) -> NDArray[np.float64]:
        """Solve K'lambda = rhs with the factorization of the forward solve.

        `rhs` is a full-length dof vector; constrained entries are ignored
        and the returned vector is zero there.
        """
        return self._resolve(rhs)


class FemModel:
    """Mesh-bound precomputation for repeated sampled solves."""

    def __init__(self, mesh: Mesh, direct_max_dofs: int = 200_000):
        self.mesh = mesh
        self.direct_max_dofs = int(direct_max_dofs)
        dim = mesh.dimension
        npe = dim + 1
        dpe = dim * npe
        self.dofs_per_element = dpe
        self.b_matrices = _strain_matrices(mesh)
        self.edofs = (dim * mesh.elements[:, :, None]
                      + np.arange(dim)[None, None, :]).reshape(-1, dpe)

        vols = mesh.volumes
        b = self.b_matrices
        if dim == 2:
            d_parts = (
                np.diag([1.0, 1.0, 0.0]),
                np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
                np.diag([0.0, 0.0, 1.0]),
            )
        else:
            d_vol = np.zeros((6, 6))
            d_vol[:3, :3] = 1.0
            d_dev = np.diag([1.0, 1.0, 1.0, 0.5, 0.5, 0.5])
            d_parts = (d_vol, d_dev)
        self._k_parts = tuple(
            np.einsum("eji,jk,ekl,e->eil", b, dp, b, vols, optimize=True)
            for dp in d_parts)

        free_mask = np.ones(mesh.n_dofs, dtype=bool)
        free_mask[mesh.fixed_dofs] = False
        self.free_dofs = np.flatnonzero(free_mask)
        self.n_free = self.free_dofs.size
        full_to_free = -np.ones(mesh.n_dofs, dtype=np.int64)
        full_to_free[self.free_dofs] = np.arange(self.n_free)
        self._full_to_free = full_to_free

        rows = np.repeat(self.edofs, dpe, axis=1).ravel()
        cols = np.tile(self.edofs, (1, dpe)).ravel()
        keep = free_mask[rows] & free_mask[cols]
        self._entry_keep = keep
        self._rows_red = full_to_free[rows[keep]]
        self._cols_red = full_to_free[cols[keep]]

    def unit_stiffness(self, poisson: float) -> NDArray[np.float64]:
        """Per-element stiffness at unit modulus, (n_ele, dpe, dpe)."""
        nu = poisson
        if self.mesh.dimension == 2:
            ka, kb, kc = self._k_parts
            return (ka + nu * kb + 0.5 * (1.0 - nu) * kc) / (1.0 - nu * nu)
        kj, ki = self._k_parts
        lam = nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = 1.0 / (2.0 * (1.0 + nu))
        return lam * kj + 2.0 * mu * ki

    def element_stiffness(self, index: int, params: ElasticityParams
                          ) -> NDArray[np.float64]:
        """Dense stiffness of one element for the given material."""
        if not 0 <= index < self.mesh.n_elements:
            raise IndexError(f"element {index} out of range")
        return params.modulus * self.unit_stiffness(params.poisson)[index]

    def _assemble(self, moduli: NDArray, ke_unit: NDArray) -> csc_matrix:
        data = (moduli[:, None, None] * ke_unit).ravel()[self._entry_keep]
        k = coo_matrix((data, (self._rows_red, self._cols_red)),
                       shape=(self.n_free, self.n_free))
        return k.tocsc()

    def _make_resolver(self, k_red: csc_matrix) -> Callable[[NDArray], NDArray]:
        # symmetric matrix, so the 1-norm doubles as the infinity norm; it
        # scales the residual check so extreme void/solid contrast is judged
        # by backward error rather than by the load magnitude alone
        knorm = float(np.abs(k_red).sum(axis=0).max()) if k_red.nnz else 0.0

        def backward_error(b, x, bn):
            xn = np.linalg.norm(x)
            return np.linalg.norm(b - k_red @ x) / (knorm * xn + bn)

        if self.n_free <= self.direct_max_dofs:
            try:
                lu = splu(k_red)
            except RuntimeError as err:
                raise SolverError(f"direct factorization failed: {err}") from err

            def solve_free(b):
                x = lu.solve(b)
                # iterative refinement: each pass is one cheap pair of
                # triangular solves and the backward error shrinks
                # geometrically while progress lasts
                bn = np.linalg.norm(b)
                if bn == 0:
                    return x
                err = backward_error(b, x, bn)
                for _ in range(12):
                    if err <= 0.1 * RESIDUAL_TOL:
                        break
                    x_new = x + lu.solve(b - k_red @ x)
                    err_new = backward_error(b, x_new, bn)
                    if not err_new < 0.9 * err:
                        break  # stagnated; the outer check reports it
                    x, err = x_new, err_new
                return x
        else:
            dscale = 1.0 / np.sqrt(k_red.diagonal())
            keq = csc_matrix(k_red.multiply(dscale[:, None]).multiply(dscale[None, :]))
            try:
                ilu = spilu(keq, drop_tol=1e-6, fill_factor=30)
            except RuntimeError as err:
                raise SolverError(f"ilu factorization failed: {err}") from err
            precond = LinearOperator(keq.shape, ilu.solve)

            def solve_free(b):
                beq = b * dscale
                xeq, info = _run_cg(keq, beq, precond)
                if info != 0:
                    raise SolverError(f"pcg failed to converge (info={info})")
                return xeq * dscale

        def resolve(rhs_full):
            b = rhs_full[self.free_dofs]
            x = solve_free(b)
            out = np.zeros(self.mesh.n_dofs)
            out[self.free_dofs] = x
            bn = np.linalg.norm(b)
            if bn > 0:
                rel = backward_error(b, x, bn)
                if not np.isfinite(rel) or rel > RESIDUAL_TOL:
                    raise SolverError(
                        f"linear solve residual {rel:.3e} exceeds {RESIDUAL_TOL:.1e}")
            return out

        return resolve

    def load_vector(self, magnitude: float) -> NDArray[np.float64]:
        f = np.zeros(self.mesh.n_dofs)
        f[self.mesh.load_dofs] = magnitude * self.mesh.load_weights
        return f

    def solve(self, moduli: NDArray[np.float64], load_magnitude: float,
              poisson: float) -> FemSolution:
        """Assemble and solve for per-element moduli and a sampled load.

        Returns displacements, compliance, element stresses and von Mises
        values, and unit-modulus strain energies for sensitivities.
        """
        moduli = np.asarray(moduli, dtype=np.float64)
        if moduli.shape != (self.mesh.n_elements,):
            raise ValueError("moduli must be per-element")
        if np.any(moduli <= 0.0) or not np.all(np.isfinite(moduli)):
            raise ValueError("moduli must be positive and finite")
        if not -1.0 < poisson < 0.5:
            raise ValueError(f"poisson {poisson} outside (-1, 0.5)")

        ke_unit = self.unit_stiffness(poisson)
        k_red = self._assemble(moduli, ke_unit)
        resolve = self._make_resolver(k_red)
        f = self.load_vector(load_magnitude)
        u = resolve(f)
        if not np.all(np.isfinite(u)):
            raise SolverError("solution contains non-finite entries")

        ue = u[self.edofs]
        dmat = constitutive_matrix(self.mesh.dimension, poisson)
        sigma = moduli[:, None] * np.einsum("ij,ejk,ek->ei", dmat,
                                            self.b_matrices, ue)
        vm_quad = VM_QUAD_2D if self.mesh.dimension == 2 else VM_QUAD_3D
        s2 = np.einsum("ei,ij,ej->e", sigma, vm_quad, sigma)
        von_mises = np.sqrt(np.maximum(s2, 0.0))
        energy_unit = np.einsum("ei,eij,ej->e", ue, ke_unit, ue)
        compliance = float(f @ u)
        return FemSolution(
            displacements=u,
            compliance=compliance,
            sigma=sigma,
            von_mises=von_mises,
            strain_energy_unit=energy_unit,
            moduli=moduli,
            poisson=poisson,
            load_magnitude=load_magnitude,
            _resolve=resolve,
        )


def _run_cg(a, b, precond):
    try:
        return cg(a, b, M=precond, rtol=1e-13, atol=0.0, maxiter=5000)
    except TypeError:  # older scipy spells the tolerance differently
        return cg(a, b, M=precond, tol=1e-13, atol=0.0, maxiter=5000)


def compliance_sensitivity_modulus(solution: FemSolution) -> NDArray[np.float64]:
    """d(compliance)/d(element modulus), the negated unit strain energy."""
    return -solution.strain_energy_unit
