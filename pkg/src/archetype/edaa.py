"""Entropic descent archetypal analysis.

Alternating minimization of ``0.5 * ||X - X B A||_F^2`` where the columns of
the abundances ``A`` (p x N) and of the pixel contributions ``B`` (N x p)
are kept on their probability simplices by mirror-descent steps in the
negative-entropy geometry. Each step is a columnwise softmax of
``log(z) - eta * grad``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from archetype.core import DataError, Prng, as_matrix, spectral_norm
from archetype.criteria import coherence, fit_l1

LOG_FLOOR = 1e-30
SIMPLEX_TOL = 1e-9
# leading draws of every run's stream reserved for the step-factor choice
RESERVED_DRAWS = 1


class DivergenceError(FloatingPointError):
    """Non-finite values appeared in the iterates."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    p: int
    T: int = 100
    K1: int = 5
    K2: int = 5
    gamma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"need at least 2 endmembers, got p={self.p}")
        if self.T < 1 or self.K1 < 1 or self.K2 < 1:
            raise ValueError("T, K1 and K2 must all be >= 1")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(eq=False)
class RunResult:
    endmembers: np.ndarray
    abundances: np.ndarray
    contributions: np.ndarray
    fit_l1: float
    coherence: float
    seed: int
    gamma: float
    objective_trace: list[float] = field(default_factory=list)
    """Objective at initialization followed by its value after each outer
    iteration (length T + 1)."""


def _data(x):
    return as_matrix(getattr(x, "data", x), "X")


def softmax(z, axis=0):
    z = np.asarray(z, dtype=np.float64)
    w = np.exp(z - z.max(axis=axis, keepdims=True))
    return w / w.sum(axis=axis, keepdims=True)


def init_abundances(p: int, n: int) -> np.ndarray:
    """Uniform abundances, the maximum-entropy point of every column."""
    if p < 1 or n < 1:
        raise ValueError(f"invalid abundance shape ({p}, {n})")
    return np.full((p, n), 1.0 / p)


def init_contributions(n: int, p: int, rng: Prng) -> np.ndarray:
    """Near-uniform contributions, column j = softmax(0.1 * u_j).

    Each column consumes its own n fresh uniform draws so the columns differ.
    """
    if n < 1 or p < 1:
        raise ValueError(f"invalid contribution shape ({n}, {p})")
    B = np.empty((n, p))
    for j in range(p):
        B[:, j] = softmax(0.1 * rng.units(n))
    return B


def step_sizes(x, b0, gamma: float) -> tuple[float, float]:
    """Step sizes ``gamma / sigma_max(X B0)^2`` for A and ``sqrt(p/N)`` times
    that for B."""
    X = _data(x)
    B0 = as_matrix(b0, "B0")
    try:
        sigma = spectral_norm(X @ B0)
    except DataError as exc:
        raise DataError("degenerate initialization: X B0 is zero") from exc
    if sigma == 0.0:
        raise DataError("degenerate initialization: X B0 is zero")
    p = B0.shape[1]
    N = X.shape[1]
    eta1 = gamma / sigma**2
    return eta1, float(np.sqrt(p / N)) * eta1


def entropic_step(z, grad, eta: float) -> np.ndarray:
    """One entropic mirror-descent step, ``softmax(log z - eta * grad)``.

    ``z`` may be a single point of the simplex or a matrix whose columns are;
    the softmax runs along the first axis.
    """
    g = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient in entropic step")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != g.shape:
        raise DataError(f"point {z.shape} and gradient {g.shape} differ in shape")
    return softmax(np.log(np.maximum(z, LOG_FLOOR)) - eta * g, axis=0)


def _check_shapes(X, B, A):
    L, N = X.shape
    if B.shape[0] != N or A.shape[1] != N or B.shape[1] != A.shape[0]:
        raise DataError(f"shape mismatch: X {X.shape}, B {B.shape}, A {A.shape}")


def objective_l2(x, b, a) -> float:
    X, B, A = _data(x), as_matrix(b, "B"), as_matrix(a, "A")
    _check_shapes(X, B, A)
    R = X - (X @ B) @ A
    return 0.5 * float(np.einsum("ij,ij->", R, R))


def grad_abundances(x, b, a, xb=None) -> np.ndarray:
    """Gradient of the objective in A: ``-(X B)^T (X - X B A)``.

    ``xb`` may carry a precomputed ``X @ B``.
    """
    X, B, A = _data(x), as_matrix(b, "B"), as_matrix(a, "A")
    _check_shapes(X, B, A)
    XB = X @ B if xb is None else xb
    return -(XB.T @ (X - XB @ A))


def grad_contributions(x, b, a) -> np.ndarray:
    """Gradient of the objective in B: ``-X^T (X - X B A) A^T``.

    The L x p product is formed first so no N x N matrix is ever built.
    """
    X, B, A = _data(x), as_matrix(b, "B"), as_matrix(a, "A")
    _check_shapes(X, B, A)
    R = X - (X @ B) @ A
    return -(X.T @ (R @ A.T))


def _guard(z, what, t):
    if not np.all(np.isfinite(z)):
        raise DivergenceError(f"non-finite {what} at outer iteration {t}", t)
    if np.any(z < 0) or np.max(np.abs(z.sum(axis=0) - 1.0)) > SIMPLEX_TOL:
        raise DivergenceError(f"{what} left the simplex at outer iteration {t}", t)


Callback = Callable[[str, int, int, np.ndarray, np.ndarray], None]


def run(x, config: SolverConfig, callback: Callback | None = None) -> RunResult:
    """Run the alternating entropic descent solver on l2-normalized data.

    ``callback(stage, t, k, A, B)`` is invoked after every inner step with
    stage ``"A"`` or ``"B"``; it must not modify the arrays.
    """
    X = _data(x)
    p, N = config.p, X.shape[1]

    A = init_abundances(p, N)
    rng = Prng(config.seed)
    rng.skip(RESERVED_DRAWS)
    B = init_contributions(N, p, rng)
    eta1, eta2 = step_sizes(X, B, config.gamma)

    trace = [objective_l2(X, B, A)]
    for t in range(1, config.T + 1):
        XB = X @ B
        for k in range(config.K1):
            G = grad_abundances(X, B, A, xb=XB)
            if not np.all(np.isfinite(G)):
                raise DivergenceError(f"non-finite gradient for A at outer iteration {t}", t)
            A = entropic_step(A, G, eta1)
            _guard(A, "abundances", t)
            if callback is not None:
                callback("A", t, k, A, B)
        for k in range(config.K2):
            G = grad_contributions(X, B, A)
            if not np.all(np.isfinite(G)):
                raise DivergenceError(f"non-finite gradient for B at outer iteration {t}", t)
            B = entropic_step(B, G, eta2)
            _guard(B, "contributions", t)
            if callback is not None:
                callback("B", t, k, A, B)
        trace.append(objective_l2(X, B, A))

    E = X @ B
    return RunResult(
        endmembers=E,
        abundances=A,
        contributions=B,
        fit_l1=fit_l1(X, E, A),
        coherence=coherence(E),
        seed=config.seed,
        gamma=config.gamma,
        objective_trace=trace,
    )


def estimate_abundances(x, e, iters: int = 1000, eta: float | None = None, history=None) -> np.ndarray:
    """Abundances for fixed endmembers by entropic descent from uniform.

    Minimizes ``0.5 * ||X - E A||^2`` with simplex columns. ``eta`` defaults
    to ``1 / max|E^T E|``, the inverse smoothness constant of the objective
    in the l1 geometry the entropic step works in. If ``history`` is a list,
    the objective after each iteration is appended to it.
    """
    X = _data(x)
    E = as_matrix(e, "endmembers")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(E))):
        raise DataError("non-finite input to estimate_abundances")
    if E.shape[0] != X.shape[0]:
        raise DataError(f"endmembers {E.shape} do not match data {X.shape}")
    p, N = E.shape[1], X.shape[1]
    A = init_abundances(p, N)
    if p == 1:
        return A
    EtX = E.T @ X
    EtE = E.T @ E
    if eta is None:
        peak = np.abs(EtE).max()
        if peak == 0.0:
            raise DataError("all endmembers are zero")
        eta = 1.0 / peak
    for _ in range(iters):
        A = entropic_step(A, EtE @ A - EtX, eta)
        if history is not None:
            R = X - E @ A
            history.append(0.5 * float(np.einsum("ij,ij->", R, R)))
    return A
