"""Tail machinery: empirical CGF, saddle-point tilt, rate function,
tilted weights, and the score-form gradient of ln P_f.

The tilt solve inverts the tilted-mean equation with safeguarded
Newton iterations; every exponential runs in max-shifted form so large
tilting parameters stay inside float range.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from numpy.typing import NDArray

from .performance import PerformanceSample


class NoTiltSolution(Exception):
    """The threshold sits at or beyond the sample maximum.

    Not fatal: the caller is expected to retry on a merged history view
    or fall back to the last usable gradient.
    """


@dataclass
class TiltSolution:
    t_star: float
    cgf_at_t: float
    rate: float
    weights: NDArray[np.float64]
    converged: bool
    iterations: int
    # False when the threshold is below the sample mean, where exceeding
    # it is not a rare event and the tilt loses its usual meaning
    failure_rare: bool = True


def empirical_cgf(g_samples: NDArray, t: float) -> float:
    """log mean exp(t g), shift-stabilized."""
    g = np.asarray(g_samples, dtype=np.float64)
    if g.size == 0:
        raise ValueError("need at least one sample")
    tg = t * g
    m = tg.max()
    return float(m + np.log(np.mean(np.exp(tg - m))))


def _tilted_state(g: NDArray, t: float):
    """Weights, tilted mean, tilted variance at parameter t."""
    tg = t * g
    w = np.exp(tg - tg.max())
    w /= w.sum()
    mean = float(w @ g)
    var = float(w @ (g - mean) ** 2)
    return w, mean, var


def tilted_weights(g_samples: NDArray, t: float) -> NDArray[np.float64]:
    w, _, _ = _tilted_state(np.asarray(g_samples, dtype=np.float64), t)
    return w


def solve_tilt(g_samples: Sequence[float], z: float, tol: float = 1e-8,
               max_iter: int = 100) -> TiltSolution:
    """Find t* with tilted mean equal to z; package rate and weights.

    Newton on the tilted-mean residual (derivative is the tilted
    variance) inside an expanding bracket, with bisection whenever a
    step escapes.  Raises NoTiltSolution for z at or above the sample
    maximum.  For z at or below the sample minimum every sample already
    fails, so the untilted solution with zero rate is returned, flagged
    as not rare.
    """
    g = np.asarray(g_samples, dtype=np.float64)
    if g.size < 1 or not np.all(np.isfinite(g)):
        raise ValueError("samples must be finite and nonempty")
    if not np.isfinite(z):
        raise ValueError("threshold must be finite")
    gmin, gmax = float(g.min()), float(g.max())
    if z >= gmax:
        raise NoTiltSolution(
            f"threshold {z!r} at or beyond sample maximum {gmax!r}")
    if z <= gmin:
        n = g.size
        return TiltSolution(t_star=0.0, cgf_at_t=0.0, rate=0.0,
                            weights=np.full(n, 1.0 / n), converged=True,
                            iterations=0, failure_rare=False)

    # residual tolerance is relative to the threshold, floored by the
    # sample spread so z near zero stays solvable
    scale = max(abs(z), 1e-3 * (gmax - gmin))

    def residual(t):
        w, mean, var = _tilted_state(g, t)
        return mean - z, var, w

    # bracket the root by doubling outward from t = 0
    r0, _, _ = residual(0.0)
    if r0 == 0.0:
        w, _, var = _tilted_state(g, 0.0)
        return TiltSolution(0.0, 0.0, 0.0, w, True, 0, True)
    direction = 1.0 if r0 < 0.0 else -1.0
    lo, r_lo = 0.0, r0
    step = 1.0 / max(gmax - gmin, 1e-300)
    hi = direction * step
    for _ in range(200):
        r_hi, _, _ = residual(hi)
        if r_hi == 0.0 or (r_hi > 0.0) != (r_lo > 0.0):
            break
        lo, r_lo = hi, r_hi
        hi *= 2.0
    else:
        raise NoTiltSolution(
            f"threshold {z!r} numerically unreachable within float range")
    lo, hi = (lo, hi) if lo < hi else (hi, lo)

    t = 0.5 * (lo + hi)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        r, var, w = residual(t)
        if abs(r) <= tol * scale:
            converged = True
            break
        if r > 0.0:
            hi = t
        else:
            lo = t
        t_new = t - r / var if var > 0.0 else t
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        t = t_new
    else:
        r, var, w = residual(t)
        if abs(r) > 100.0 * tol * scale:
            raise RuntimeError(
                f"tilt solve stalled: residual {r:.3e} after {max_iter} "
                f"iterations (threshold {z!r})")
    cgf = empirical_cgf(g, t)
    rate = t * z - cgf
    w, _, _ = _tilted_state(g, t)
    return TiltSolution(t_star=float(t), cgf_at_t=float(cgf),
                        rate=float(rate), weights=w, converged=converged,
                        iterations=iterations, failure_rare=bool(t >= 0.0))


def grad_ln_pf(tilt: TiltSolution, per_sample_grads: Sequence[NDArray]
               ) -> NDArray[np.float64]:
    """Score-form gradient estimate: t* times the tilted-weighted gradient."""
    grads = np.asarray(per_sample_grads, dtype=np.float64)
    if grads.ndim != 2 or grads.shape[0] != tilt.weights.size:
        raise ValueError(
            f"got {grads.shape[0] if grads.ndim == 2 else 'malformed'} "
            f"gradients for {tilt.weights.size} weights")
    return tilt.t_star * (tilt.weights @ grads)


class FailureHistory:
    """Failure samples accumulated between periodic resets.

    Keeps the evaluated samples (values and gradients) whose g reached
    the threshold, so iterations without fresh failures can still tilt
    on a merged view.
    """

    def __init__(self, reset_period: int):
        if reset_period < 1:
            raise ValueError("reset period must be >= 1")
        self.reset_period = int(reset_period)
        self._entries: List[PerformanceSample] = []

    def __len__(self) -> int:
        return len(self._entries)

    def record(self, sample: PerformanceSample) -> None:
        if sample.is_failure:
            self._entries.append(sample)

    def maybe_reset(self, iteration: int) -> bool:
        if iteration % self.reset_period == 0:
            self._entries.clear()
            return True
        return False

    def merged_view(self, batch: Sequence[PerformanceSample]
                    ) -> List[PerformanceSample]:
        """Current batch plus any recorded failures not already in it."""
        batch_ids = {id(s) for s in batch}
        return list(batch) + [s for s in self._entries if id(s) not in batch_ids]
