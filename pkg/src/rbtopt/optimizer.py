"""Penalized-objective stochastic gradient descent driver.

Each iteration draws a small batch of uncertain inputs, evaluates the
performance measure and its design gradient per sample, estimates the
gradient of ln P_f by exponential tilting (with history fallbacks when
the batch sees no failures), assembles the penalized objective
gradient, and takes a projected gradient step on the raw densities.
Periodically the running failure-probability estimate is re-anchored
with subset simulation.
"""

import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional

import numpy as np
from numpy.typing import NDArray

from . import density, ldt, performance, reliability
from .density import DensityField, HelmholtzFilter
from .fem import FemModel, SolverError
from .mesh import Mesh
from .performance import PerformanceSpec
from .uncertainty import UncertaintyModel, substream

logger = logging.getLogger(__name__)

# spawn-key namespaces for the per-iteration random streams
_BATCH_KEY = 1
_CORRECTION_KEY = 2
VALIDATION_KEY = 3


@dataclass(frozen=True)
class RunConfig:
    performance: PerformanceSpec
    omega_c: float = 1.0
    omega_v: float = 0.2
    kappa_f: float = 1500.0
    p_a: float = 1e-2
    conservative_target: bool = True
    batch_size: int = 10
    history_reset: int = 50
    correction_every: int = 20
    learning_rate: float = 0.075
    lr_decay: float = 0.0
    max_iterations: int = 2000
    simp_q: float = 3.0
    void_stiffness: float = 1e-15
    beta: float = 8.0
    eta_thr: float = 0.5
    filter_radius: Optional[float] = None
    p_0: float = 0.1
    sus_samples: int = 200
    seed: int = 0
    grad_mean: bool = True
    early_stop: bool = True
    early_stop_window: int = 200
    early_stop_rtol: float = 1e-4
    passive_load_elements: bool = True

    def __post_init__(self):
        if self.omega_c < 0 or self.omega_v < 0 or self.kappa_f < 0:
            raise ValueError("objective weights must be nonnegative")
        if not 0.0 < self.p_a < 1.0:
            raise ValueError("p_a must lie in (0, 1)")
        if self.batch_size < 1 or self.history_reset < 1 \
                or self.correction_every < 1:
            raise ValueError("batch, history, and correction periods must be >= 1")
        if self.learning_rate <= 0 or self.max_iterations < 0:
            raise ValueError("learning rate must be positive, iterations >= 0")
        if self.simp_q < 1 or self.beta <= 0 or not 0 < self.eta_thr < 1:
            raise ValueError("invalid regularization parameters")

    @property
    def target_pf(self) -> float:
        return self.p_a / 2.0 if self.conservative_target else self.p_a

    @property
    def ln_target(self) -> float:
        return math.log(self.target_pf)


@dataclass
class LogRow:
    iteration: int
    objective: float
    batch_compliance: float
    volume_fraction: float
    pf_estimate: float
    pf_provenance: str
    t_star: float
    tilt_fallback: str
    penalty: float


@dataclass
class OptimizationResult:
    field: DensityField
    log: List[LogRow]
    config: RunConfig
    iterations_run: int
    stop_reason: str
    last_subset_estimate: Optional[reliability.ReliabilityEstimate] = None


def penalized_objective(batch_compliances: NDArray, volume: float,
                        ln_pf: float, config: RunConfig) -> float:
    """Weighted compliance mean + volume + squared log-violation penalty."""
    viol = max(ln_pf - config.ln_target, 0.0)
    return (config.omega_c * float(np.mean(batch_compliances))
            + config.omega_v * volume
            + 0.5 * config.kappa_f * viol * viol)


def sgd_step(rho: NDArray, grad_raw: NDArray, learning_rate: float) -> NDArray:
    """One projected descent step on the raw densities."""
    return np.clip(rho - learning_rate * grad_raw, 0.0, 1.0)


def run_optimization(mesh: Mesh, model: UncertaintyModel, config: RunConfig,
                     snapshot_hook: Optional[Callable[[int, DensityField], None]] = None,
                     snapshot_every: int = 0) -> OptimizationResult:
    """Run the full loop from an all-solid start; returns the final field and log."""
    fem_model = FemModel(mesh)
    flt = HelmholtzFilter(mesh, config.filter_radius)
    rho = np.ones(mesh.n_elements)
    # keeping the elements under the load solid prevents the design from
    # severing its own load introduction, which otherwise floods batches
    # with enormous outlier responses mid-run
    passive = _load_element_mask(mesh) if config.passive_load_elements \
        else np.zeros(mesh.n_elements, dtype=bool)
    state = density.evaluate_chain(flt, rho, config.beta, config.eta_thr)
    history = ldt.FailureHistory(config.history_reset)
    spec = config.performance

    # until any estimate exists the penalty is held at exactly zero
    ln_pf = config.ln_target
    provenance = "init"
    last_grad_lnpf: Optional[NDArray] = None
    last_subset: Optional[reliability.ReliabilityEstimate] = None
    log: List[LogRow] = []
    objective_trace: List[float] = []
    stop_reason = "max_iterations"
    iterations_run = 0

    for k in range(1, config.max_iterations + 1):
        history.maybe_reset(k)

        rng = substream(config.seed, _BATCH_KEY, k)
        samples = model.draw(rng, config.batch_size)
        evaluated: List[performance.PerformanceSample] = []
        for s in samples:
            try:
                ps = performance.evaluate(fem_model, state.rho_t, s, spec,
                                          config.simp_q, config.void_stiffness)
            except SolverError as err:
                logger.warning("iteration %d: sample skipped (%s)", k, err)
                continue
            ps.iteration = k
            evaluated.append(ps)
            history.record(ps)
        if not evaluated:
            raise RuntimeError(f"iteration {k}: every batch sample failed to solve")

        tilt, tilt_set, fallback = _tilt_with_fallbacks(evaluated, history, spec)
        grad_lnpf: Optional[NDArray] = None
        t_star = math.nan
        if tilt is not None:
            t_star = tilt.t_star
            provenance = "ldt"
            if tilt.failure_rare:
                grad_lnpf = ldt.grad_ln_pf(tilt, [ps.grad for ps in tilt_set])
                last_grad_lnpf = grad_lnpf
                ln_pf = -tilt.rate
            else:
                # threshold at or below the tilted mean: the one-sided
                # exponent is zero, so hold the estimate at one.  The
                # raw negative-t gradient would point the penalty toward
                # MORE failures; flipping its sign gives a fresh
                # restoring direction that lowers the responses the
                # current design actually produces, which targets the
                # live failure region far better than a direction saved
                # hundreds of iterations ago
                ln_pf = 0.0
                fallback = "nonrare"
                if tilt.t_star < 0.0:
                    grad_lnpf = -ldt.grad_ln_pf(
                        tilt, [ps.grad for ps in tilt_set])
                    last_grad_lnpf = grad_lnpf
                else:
                    # every sample beyond the threshold: t* is exactly
                    # zero and carries no direction, fall back to the
                    # most recent usable one
                    grad_lnpf = last_grad_lnpf
        else:
            if fallback == "reuse":
                grad_lnpf = last_grad_lnpf
            if provenance != "init":
                provenance = "carry"

        if k % config.correction_every == 0:
            g_eval = performance.make_g_evaluator(
                fem_model, state.rho_t, spec, config.simp_q,
                config.void_stiffness)

            def g_or_collapse(row, _g=g_eval):
                # a sampled system with no equilibrium solution has lost
                # its load path; that is failure by any measure, so the
                # correction counts it rather than aborting the run
                try:
                    return _g(row)
                except SolverError:
                    return math.inf

            last_subset = reliability.subset_simulation(
                g_or_collapse, model, spec.threshold, config.p_0,
                config.sus_samples,
                seed=np.random.SeedSequence(
                    config.seed, spawn_key=(_CORRECTION_KEY, k)))
            ln_pf = math.log(last_subset.p_f) if last_subset.p_f > 0 else -math.inf
            provenance = "subset_sim"

        volume, vol_grad, vol_frac = density.volume_and_gradient(mesh, state.rho_t)
        comp_grads = np.array([ps.compliance_grad for ps in evaluated])
        comp_term = comp_grads.mean(axis=0) if config.grad_mean \
            else comp_grads.sum(axis=0)
        penalty = config.kappa_f * max(ln_pf - config.ln_target, 0.0)
        grad_t = config.omega_c * comp_term + config.omega_v * vol_grad
        if penalty > 0.0 and grad_lnpf is not None:
            grad_t = grad_t + penalty * grad_lnpf
        elif penalty > 0.0 and fallback == "reuse":
            fallback = "unavailable"
        grad_raw = density.chain_rule_backprop(flt, state, grad_t)

        batch_c = np.array([ps.compliance for ps in evaluated])
        objective = penalized_objective(batch_c, volume, ln_pf, config)
        log.append(LogRow(
            iteration=k, objective=objective,
            batch_compliance=float(batch_c.mean()),
            volume_fraction=vol_frac,
            pf_estimate=math.exp(ln_pf) if ln_pf > -math.inf else 0.0,
            pf_provenance=provenance, t_star=t_star,
            tilt_fallback=fallback, penalty=penalty))
        objective_trace.append(objective)

        lr = config.learning_rate / (1.0 + config.lr_decay * k)
        rho = sgd_step(rho, grad_raw, lr)
        rho[passive] = 1.0
        state = density.evaluate_chain(flt, rho, config.beta, config.eta_thr)
        iterations_run = k

        if snapshot_hook is not None and snapshot_every > 0 \
                and k % snapshot_every == 0:
            snapshot_hook(k, state)

        if _should_stop(objective_trace, config, last_subset):
            stop_reason = "converged"
            break

    return OptimizationResult(field=state, log=log, config=config,
                              iterations_run=iterations_run,
                              stop_reason=stop_reason,
                              last_subset_estimate=last_subset)


def _load_element_mask(mesh: Mesh) -> np.ndarray:
    load_nodes = np.unique(mesh.load_dofs // mesh.dimension)
    return np.isin(mesh.elements, load_nodes).any(axis=1)


def _tilt_with_fallbacks(evaluated, history: ldt.FailureHistory,
                         spec: PerformanceSpec):
    """Batch tilt, then merged-history tilt, then signal gradient reuse."""
    g_batch = [ps.g_value for ps in evaluated]
    try:
        return ldt.solve_tilt(g_batch, spec.threshold), evaluated, "none"
    except ldt.NoTiltSolution:
        pass
    merged = history.merged_view(evaluated)
    if len(merged) > len(evaluated):
        try:
            tilt = ldt.solve_tilt([ps.g_value for ps in merged], spec.threshold)
            return tilt, merged, "history"
        except ldt.NoTiltSolution:
            pass
    return None, None, "reuse"


def _should_stop(trace: List[float], config: RunConfig,
                 last_subset: Optional[reliability.ReliabilityEstimate]) -> bool:
    w = config.early_stop_window
    if not config.early_stop or len(trace) < 2 * w:
        return False
    if last_subset is None or last_subset.p_f > config.p_a:
        return False
    recent = np.mean(trace[-w:])
    previous = np.mean(trace[-2 * w:-w])
    denom = max(abs(previous), 1e-300)
    return abs(recent - previous) / denom < config.early_stop_rtol
