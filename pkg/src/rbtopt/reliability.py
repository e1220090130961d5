"""Failure-probability estimators: subset simulation and crude Monte Carlo.

Subset simulation walks a sequence of nested intermediate failure
events, each conditioned on the previous level's worst performers, with
component-wise Metropolis chains in standard normal space.  Crude MC
shares the same inverse-CDF sampling path, so a run that terminates at
level zero reproduces the plain estimate sample for sample.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .uncertainty import UncertaintyModel


class ChainStagnation(RuntimeError):
    """No chain move was accepted across an entire level.

    Usually means the proposal width is mismatched to the target
    geometry; retune the proposal or enlarge the sample size.
    """


@dataclass
class ReliabilityEstimate:
    p_f: float
    method: str
    levels: int = 0
    thresholds: List[float] = field(default_factory=list)
    samples_per_level: int = 0
    total_evaluations: int = 0
    seed: Optional[int] = None
    standard_error: Optional[float] = None
    truncated: bool = False


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def subset_simulation(evaluate_g: Callable[[np.ndarray], float],
                      model: UncertaintyModel, z: float, p_0: float = 0.1,
                      n_samples: int = 200, seed=0,
                      max_levels: int = 30) -> ReliabilityEstimate:
    """Multi-level estimate of P(g >= z).

    Level 0 is crude MC.  While the running p_0-quantile threshold stays
    below z, the top floor(N p_0) performers seed Markov chains of
    length ceil(1/p_0) whose moves must keep g above the level
    threshold; the estimate multiplies p_0 per completed level.
    """
    if not 0.0 < p_0 < 1.0:
        raise ValueError("p_0 must lie in (0, 1)")
    n_seeds = int(math.floor(n_samples * p_0))
    if n_seeds < 1:
        raise ValueError("n_samples * p_0 must be at least 1")
    # long enough to refill the level even when n_samples * p_0 rounds down
    chain_len = max(int(math.ceil(1.0 / p_0)),
                    int(math.ceil(n_samples / n_seeds)))
    dim = model.dimension
    root = _as_seed_sequence(seed)
    seed_value = seed if isinstance(seed, (int, np.integer)) else None

    rng0 = np.random.default_rng(root.spawn(1)[0])
    u = rng0.standard_normal((n_samples, dim))
    x = model.sample_from_u(u)
    g = np.array([evaluate_g(row) for row in x], dtype=np.float64)
    evaluations = n_samples

    thresholds: List[float] = []
    for level in range(max_levels + 1):
        order = np.argsort(-g, kind="stable")
        b = float(g[order[n_seeds - 1]])
        if b >= z or level == max_levels:
            n_fail = int(np.count_nonzero(g >= z))
            p_f = (n_fail / n_samples) * p_0 ** level
            truncated = b < z
            return ReliabilityEstimate(
                p_f=float(p_f), method="subset_simulation", levels=level,
                thresholds=thresholds, samples_per_level=n_samples,
                total_evaluations=evaluations, seed=seed_value,
                standard_error=_subset_standard_error(
                    p_f, p_0, n_samples, level, n_fail),
                truncated=truncated)
        thresholds.append(b)

        seeds_u = u[order[:n_seeds]]
        seeds_g = g[order[:n_seeds]]
        new_u = np.empty((n_seeds * chain_len, dim))
        new_g = np.empty(n_seeds * chain_len)
        accepted = 0
        chain_rngs = root.spawn(n_seeds)
        for c in range(n_seeds):
            rng = np.random.default_rng(chain_rngs[c])
            state_u = seeds_u[c].copy()
            state_g = seeds_g[c]
            base = c * chain_len
            new_u[base] = state_u
            new_g[base] = state_g
            for step in range(1, chain_len):
                proposal = state_u.copy()
                moved = False
                for k in range(dim):
                    cand = state_u[k] + rng.standard_normal()
                    # stationary-density log ratio for the standard normal
                    log_ratio = 0.5 * (state_u[k] ** 2 - cand ** 2)
                    if log_ratio >= 0.0 or rng.random() < math.exp(log_ratio):
                        proposal[k] = cand
                        moved = True
                if moved:
                    cand_g = float(evaluate_g(model.sample_from_u(proposal)[0]))
                    evaluations += 1
                    if cand_g >= b:
                        state_u = proposal
                        state_g = cand_g
                        accepted += 1
                new_u[base + step] = state_u
                new_g[base + step] = state_g
        if accepted == 0 and chain_len > 1:
            raise ChainStagnation(
                f"all chains stagnant at level {level} (threshold {b:.6g})")
        u = new_u[:n_samples]
        g = new_g[:n_samples]
    raise AssertionError("unreachable")


def _subset_standard_error(p_f: float, p_0: float, n: int, levels: int,
                           n_fail: int) -> float:
    """Rough delta-method error bar with a flat chain-correlation allowance."""
    if p_f <= 0.0:
        return 0.0
    gamma = 2.0
    cov2 = levels * (1.0 - p_0) / (n * p_0) * (1.0 + gamma)
    r = n_fail / n
    if r < 1.0:
        cov2 += (1.0 - r) / (n * r)
    return float(p_f * math.sqrt(cov2))


def monte_carlo_pf(evaluate_g: Callable[[np.ndarray], float],
                   model: UncertaintyModel, z: float, n_samples: int,
                   seed=0) -> ReliabilityEstimate:
    """Plain Monte Carlo estimate of P(g >= z) with its standard error."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    root = _as_seed_sequence(seed)
    rng = np.random.default_rng(root.spawn(1)[0])
    x = model.sample_from_u(rng.standard_normal((n_samples, model.dimension)))
    g = np.array([evaluate_g(row) for row in x], dtype=np.float64)
    n_fail = int(np.count_nonzero(g >= z))
    p_f = n_fail / n_samples
    se = math.sqrt(max(p_f * (1.0 - p_f), 0.0) / n_samples)
    return ReliabilityEstimate(
        p_f=p_f, method="monte_carlo", levels=0, thresholds=[],
        samples_per_level=n_samples, total_evaluations=n_samples,
        seed=seed if isinstance(seed, (int, np.integer)) else None,
        standard_error=se)
