"""Scaled spatial guidance: the logit update, its step schedule, and checks.

The guided logits at step ``k`` are ``l_k + beta_k * (l_k - l_prior)``,
which is the unique maximiser of the concave surrogate

    L(l') = beta * <l', delta> - 0.5 * ||l' - l_k||^2,   delta = l_k - l_prior.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_grid, check_same_shape, check_vectors
from .dse import build_prior
from .exceptions import DomainError, ShapeError

DECAY_MODES = ("linear", "constant")


@dataclass(frozen=True)
class GuidanceSchedule:
    """Per-step guidance strength ``beta_k`` for ``k = 1..steps``."""

    beta0: float
    steps: int
    mode: str = "linear"

    def __post_init__(self):
        if not np.isfinite(self.beta0) or self.beta0 < 0:
            raise DomainError(f"beta0 must be finite and >= 0, got {self.beta0}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be a positive integer, got {self.steps}")
        if self.mode not in DECAY_MODES:
            raise DomainError(f"decay mode must be one of {DECAY_MODES}, got {self.mode!r}")

    def beta_at(self, k: int) -> float:
        return beta_at(self, k)

    def betas(self) -> list[float]:
        return [beta_at(self, k) for k in range(1, self.steps + 1)]


def beta_at(schedule: GuidanceSchedule, k: int) -> float:
    """``beta0 * (1 - (k - 1) / K)`` for linear decay, ``beta0`` for constant.

    Evaluated in exact rational arithmetic and rounded once, so the first
    step returns ``beta0`` and the last returns ``beta0 / K`` bit-exactly.
    """
    if int(k) != k or not 1 <= k <= schedule.steps:
        raise DomainError(f"step {k} outside 1..{schedule.steps}")
    if schedule.mode == "constant":
        return float(schedule.beta0)
    K = schedule.steps
    return float(Fraction(schedule.beta0) * Fraction(K - int(k) + 1, K))


def semantic_residual(lk, lprior) -> np.ndarray:
    """``lk - lprior``: what the current step adds on top of the prior."""
    a = check_grid(lk, name="lk")
    b = check_grid(lprior, name="lprior")
    check_same_shape(a, b, ("lk", "lprior"))
    return a - b


def _check_beta(beta) -> float:
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise DomainError(f"guidance scale must be finite and >= 0, got {beta}")
    return beta


def apply_ssg(lk, lprior, beta_k: float) -> np.ndarray:
    """Guided logits ``lk + beta_k * (lk - lprior)``.

    Total and pure: the step-1 pass-through is the caller's responsibility.
    """
    beta_k = _check_beta(beta_k)
    lk = np.asarray(lk, dtype=np.float64)
    lprior = np.asarray(lprior, dtype=np.float64)
    check_same_shape(lk, lprior, ("lk", "lprior"))
    # in place on the fresh residual; rounds exactly like lk + beta_k * delta
    out = lk - lprior
    out *= beta_k
    out += lk
    return out


def guide_step(lk, prev_logits, beta_k, k, mode="dse", **prior_kwargs) -> np.ndarray:
    """One guided sampling step: pass-through at ``k == 1``, else prior + SSG.

    ``prev_logits`` are the raw (unguided) logits of step ``k - 1``.
    """
    lk = check_grid(lk, ndim=3, name="lk")
    if k == 1 or prev_logits is None:
        return lk.copy()
    prior = build_prior(prev_logits, lk.shape[0], lk.shape[1], mode, **prior_kwargs)
    return apply_ssg(lk, prior, beta_k)


# -- surrogate objective ------------------------------------------------------


def surrogate_objective(lp, lk, delta, beta) -> float:
    lp, lk, delta = check_vectors(lp, lk, delta, names=("lp", "lk", "delta"))
    diff = lp - lk
    return float(beta * np.dot(lp, delta) - 0.5 * np.dot(diff, diff))


def surrogate_gradient(lp, lk, delta, beta) -> np.ndarray:
    lp, lk, delta = check_vectors(lp, lk, delta, names=("lp", "lk", "delta"))
    return beta * delta - (lp - lk)


def finite_difference_gradient(f, x, h=1e-6) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (f(up) - f(dn)) / (2 * h)
    return grad


def gradient_ascent(lk, delta, beta, step=0.5, tol=1e-12, max_iter=1000):
    """Maximise the surrogate by plain gradient ascent starting from ``lk``.

    Returns ``(solution, iterations)``.
    """
    x = np.asarray(lk, dtype=np.float64).copy()
    for it in range(1, max_iter + 1):
        g = surrogate_gradient(x, lk, delta, beta)
        x = x + step * g
        if np.max(np.abs(g)) <= tol:
            return x, it
    return x, max_iter


@dataclass
class ClosedFormCheck:
    trials: int
    max_fd_gradient_norm: float
    max_ascent_error: float
    max_ascent_iterations: int
    max_gap_rel_error: float


def verify_closed_form(dim=32, trials=100, seed=0, h=1e-6) -> ClosedFormCheck:
    """Check numerically that ``lk + beta * delta`` maximises the surrogate.

    For random instances this measures the finite-difference gradient norm at
    the closed form, the L-inf distance between gradient ascent and the
    closed form, and the relative error of the objective gain against
    ``beta**2 / 2 * ||delta||**2``.
    """
    if dim < 1 or trials < 1:
        raise DomainError("dim and trials must be positive")
    rng = np.random.default_rng(seed)
    fd_max = ascent_max = gap_max = 0.0
    it_max = 0
    for _ in range(trials):
        lk = rng.normal(size=dim)
        delta = rng.normal(size=dim)
        beta = rng.uniform(0.0, 2.5)
        star = lk + beta * delta

        fd = finite_difference_gradient(lambda v: surrogate_objective(v, lk, delta, beta), star, h)
        fd_max = max(fd_max, float(np.linalg.norm(fd)))

        sol, iters = gradient_ascent(lk, delta, beta, step=0.5)
        ascent_max = max(ascent_max, float(np.max(np.abs(sol - star))))
        it_max = max(it_max, iters)

        expected = 0.5 * beta**2 * float(np.dot(delta, delta))
        gap = surrogate_objective(star, lk, delta, beta) - surrogate_objective(lk, lk, delta, beta)
        if expected > 0:
            gap_max = max(gap_max, abs(gap - expected) / expected)
        else:
            gap_max = max(gap_max, abs(gap))
    return ClosedFormCheck(trials, fd_max, ascent_max, it_max, gap_max)


class ScaledSpatialGuidance(TransformerMixin, BaseEstimator):
    """Guide step-``k`` logits against the previous step's raw logits.

    ``fit`` caches the previous step's raw logits; ``transform`` builds the
    prior at the size of the logits it receives and applies the update. Not
    fitting (or fitting with ``None``) is the first-step pass-through.

    Examples
    --------
    >>> import numpy as np
    >>> g = ScaledSpatialGuidance(beta=0.5).fit(np.zeros((1, 1, 2)))
    >>> g.transform(np.array([[[1.0, 2.0]]])).ravel().tolist()
    [1.5, 3.0]
    """

    def __init__(self, beta=1.0, prior_mode="dse", amplitude_preserving=True, interp="linear"):
        self.beta = beta
        self.prior_mode = prior_mode
        self.amplitude_preserving = amplitude_preserving
        self.interp = interp

    def fit(self, X, y=None):
        _check_beta(self.beta)
        self.prev_logits_ = None if X is None else check_grid(X, ndim=3, name="X", copy=True)
        return self

    def transform(self, X):
        prev = getattr(self, "prev_logits_", None)
        x = check_grid(X, ndim=3, name="X")
        if prev is not None and prev.shape[2] != x.shape[2]:
            raise ShapeError(f"vocabulary changed: {prev.shape[2]} -> {x.shape[2]}")
        return guide_step(
            x,
            prev,
            self.beta,
            k=1 if prev is None else 2,
            mode=self.prior_mode,
            amplitude_preserving=self.amplitude_preserving,
            interp=self.interp,
        )
