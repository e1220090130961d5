"""Performance measures g(rho; xi): compliance and p-norm von Mises stress.

Each evaluation solves one FEM system for a sampled (load, modulus,
Poisson) triple and, when requested, returns the full design gradient
in projected-density space.  The stress aggregate uses the adjoint
method, reusing the forward factorization.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from . import density
from .fem import FemModel, FemSolution, VM_QUAD_2D, VM_QUAD_3D, constitutive_matrix
from .uncertainty import UncertainSample

KINDS = ("compliance", "pnorm_stress")

# relative floor applied to von Mises values inside derivative denominators
STRESS_GUARD = 1e-12


@dataclass(frozen=True)
class PerformanceSpec:
    """What counts as failure: which measure, and the threshold it must stay under."""
    kind: str
    threshold: float
    p: float = 30.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown performance kind {self.kind!r}")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.p < 1:
            raise ValueError("aggregation exponent must be >= 1")


@dataclass
class PerformanceSample:
    """One evaluated sample: the g value, failure flag, and gradients."""

    g_value: float
    is_failure: bool
    sample: UncertainSample
    grad: Optional[NDArray[np.float64]] = None
    compliance: float = 0.0
    compliance_grad: Optional[NDArray[np.float64]] = None
    iteration: int = -1


def pnorm_aggregate(values: NDArray, p: float) -> float:
    """p-norm of a nonnegative field, scaled to avoid overflow at large p."""
    values = np.asarray(values, dtype=np.float64)
    top = values.max(initial=0.0)
    if top <= 0.0:
        return 0.0
    return float(top * np.sum((values / top) ** p) ** (1.0 / p))


def _pnorm_weights(values: NDArray, p: float) -> NDArray[np.float64]:
    """d(pnorm)/d(value_e), computed in scaled form; entries in [0, 1]."""
    top = values.max()
    r = values / top
    s = np.sum(r ** p) ** (1.0 / p)
    return s ** (1.0 - p) * r ** (p - 1.0)


def evaluate(model: FemModel, rho_t: NDArray, sample: UncertainSample,
             spec: PerformanceSpec, q: float = 3.0,
             void: float = density.VOID_STIFFNESS,
             need_gradient: bool = True) -> PerformanceSample:
    """Solve the sampled system and evaluate the performance measure.

    Gradients are reported with respect to the projected densities; the
    caller owns the filter/projection backprop.
    """
    rho_t = np.asarray(rho_t, dtype=np.float64)
    moduli = density.simp_modulus(rho_t, q, sample.modulus, void)
    solution = model.solve(moduli, sample.load, sample.poisson)
    dmod = density.simp_modulus_derivative(rho_t, q, sample.modulus, void)
    comp_grad = -dmod * solution.strain_energy_unit if need_gradient else None

    if spec.kind == "compliance":
        g = solution.compliance
        grad = comp_grad
    else:
        g = pnorm_aggregate(solution.von_mises, spec.p)
        grad = _stress_gradient(model, solution, spec, dmod, moduli) \
            if need_gradient else None

    return PerformanceSample(
        g_value=float(g),
        is_failure=bool(g >= spec.threshold),
        sample=sample,
        grad=grad,
        compliance=solution.compliance,
        compliance_grad=comp_grad,
    )


def _stress_gradient(model: FemModel, solution: FemSolution,
                     spec: PerformanceSpec, dmod: NDArray,
                     moduli: NDArray) -> NDArray[np.float64]:
    """Adjoint design gradient of the p-norm von Mises aggregate."""
    s = solution.von_mises
    if s.max() <= 0.0:
        return np.zeros(model.mesh.n_elements)
    wfac = _pnorm_weights(s, spec.p)
    guarded = np.maximum(s, STRESS_GUARD * spec.threshold)

    # stresses scale linearly with the element modulus at frozen displacements
    explicit = wfac * s * dmod / moduli

    vm_quad = VM_QUAD_2D if model.mesh.dimension == 2 else VM_QUAD_3D
    dmat = constitutive_matrix(model.mesh.dimension, solution.poisson)
    # d(s_e)/d(u_e) = (V sigma / s)^T E_e D B_e
    seed = (wfac * moduli / guarded)[:, None] * (solution.sigma @ vm_quad)
    contrib = np.einsum("ei,ij,ejk->ek", seed, dmat, model.b_matrices)
    rhs = np.zeros(model.mesh.n_dofs)
    np.add.at(rhs, model.edofs, contrib)

    lam = solution.solve_adjoint(rhs)
    lam_e = lam[model.edofs]
    ue = solution.displacements[model.edofs]
    ke_unit = model.unit_stiffness(solution.poisson)
    cross = np.einsum("ei,eij,ej->e", lam_e, ke_unit, ue)
    return explicit - dmod * cross


def make_g_evaluator(model: FemModel, rho_t: NDArray, spec: PerformanceSpec,
                     q: float = 3.0, void: float = density.VOID_STIFFNESS):
    """Cheap g(sample row) callable for reliability sweeps (no gradients)."""
    rho_t = np.asarray(rho_t, dtype=np.float64)

    def g_of(row) -> float:
        sample = UncertainSample(*np.asarray(row, dtype=np.float64))
        return evaluate(model, rho_t, sample, spec, q, void,
                        need_gradient=False).g_value

    return g_of
