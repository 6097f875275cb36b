# ABOUTME: Gradient-based minimization and multi-restart selection for hyperparameter fits.
# ABOUTME: Wraps scipy's limited-memory quasi-Newton solver and runs restarts on a thread pool.

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import optimize

from mvpreg.errors import DomainError, FactorizationError, FitError

logger = logging.getLogger(__name__)

LBFGS_MEMORY = 10
# Stands in for a non-finite objective so the line search backs off.
_REJECT_OFFSET = 1e10


class FitOptions(BaseModel):
    """Settings for one hyperparameter fit.

    Attributes:
        restarts: Number of random initial points, seeds ``seed .. seed + restarts - 1``.
        max_iters: Iteration cap per restart.
        grad_tol: Convergence threshold on the max-norm of the gradient.
        seed: Base seed.
        init_prior: Distribution of initial values on unconstrained coordinates.
        workers: Threads used to run restarts.
    """

    model_config = ConfigDict(frozen=True)

    restarts: int = Field(default=10, ge=1)
    max_iters: int = Field(default=200, ge=1)
    grad_tol: float = Field(default=1e-6, gt=0)
    seed: int = 0
    init_prior: Literal["uniform01"] = "uniform01"
    workers: int = Field(default=1, ge=1)


class MinimizeResult(BaseModel):
    """Outcome of a single local minimization."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: np.ndarray
    fun: float
    converged: bool
    iterations: int
    history: list[float] = Field(default_factory=list)
    message: str = ""


class RestartOutcome(BaseModel):
    """Result of one restart as returned by a ``fit_one`` callable."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    seed: int
    params: Any
    nlml: float
    converged: bool


def minimize(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    opts: FitOptions,
) -> MinimizeResult:
    """Minimize a smooth function from ``x0`` with L-BFGS.

    Trial points where the objective fails to evaluate are rejected and the
    line search backtracks. ``history`` holds the objective at each accepted
    iterate, starting with ``x0``. ``converged`` holds only when the max-norm of
    the gradient at the returned point is within ``grad_tol``; stopping on a
    small relative decrease of the objective does not count.

    Args:
        objective: Maps a parameter vector to a scalar.
        gradient: Maps a parameter vector to the gradient of ``objective``.
        x0: Initial point.
        opts: Iteration cap and gradient tolerance.

    Returns:
        MinimizeResult with the best point found.

    Raises:
        FitError: If the objective or gradient is not finite at ``x0``.
    """
    x0 = np.asarray(x0, dtype=float).copy()
    f0 = _safe_eval(objective, x0)
    g0 = _safe_eval(gradient, x0)
    if f0 is None or not np.isfinite(f0):
        raise FitError("Objective is not finite at the initial point")
    if g0 is None or not np.all(np.isfinite(g0)):
        raise FitError("Gradient is not finite at the initial point")
    f0 = float(f0)
    if np.max(np.abs(g0), initial=0.0) <= opts.grad_tol:
        return MinimizeResult(x=x0, fun=f0, converged=True, iterations=0, history=[f0])

    penalty = abs(f0) + _REJECT_OFFSET
    last = {"x": x0, "f": f0, "g": np.asarray(g0, dtype=float)}
    history = [f0]

    def fun_and_grad(x: np.ndarray) -> tuple[float, np.ndarray]:
        f = _safe_eval(objective, x)
        g = _safe_eval(gradient, x) if f is not None and np.isfinite(f) else None
        if g is None or not np.all(np.isfinite(g)):
            logger.debug("Rejected trial point with non-finite objective or gradient")
            return penalty, last["g"]
        last.update(x=x.copy(), f=float(f), g=np.asarray(g, dtype=float))
        return float(f), last["g"]

    def record(xk: np.ndarray) -> None:
        f = last["f"] if np.array_equal(xk, last["x"]) else _safe_eval(objective, xk)
        history.append(float(f))

    res = optimize.minimize(
        fun_and_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={"maxiter": opts.max_iters, "maxcor": LBFGS_MEMORY, "gtol": opts.grad_tol, "ftol": 1e-12},
    )
    fun = float(res.fun)
    x = np.asarray(res.x, dtype=float)
    if fun >= penalty or fun > f0:
        x, fun = x0, f0
    return MinimizeResult(
        x=x,
        fun=fun,
        converged=_grad_norm(gradient, x) <= opts.grad_tol,
        iterations=int(res.nit),
        history=history,
        message=str(res.message),
    )


def _grad_norm(gradient: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> float:
    """Max-norm of the gradient at ``x``, infinite when it cannot be evaluated."""
    g = _safe_eval(gradient, x)
    if g is None or not np.all(np.isfinite(g)):
        return float("inf")
    return float(np.max(np.abs(g), initial=0.0))


def _safe_eval(fn: Callable[[np.ndarray], Any], x: np.ndarray):
    try:
        return fn(x)
    except (FactorizationError, DomainError, FloatingPointError, np.linalg.LinAlgError):
        return None


def multi_restart(fit_one: Callable[[int], RestartOutcome], opts: FitOptions) -> RestartOutcome:
    """Run ``fit_one`` for each restart seed and keep the best outcome.

    Selection is by lowest NLML among converged restarts, falling back to all
    restarts when none converged; exact ties go to the lowest seed.

    Args:
        fit_one: Maps a seed to a RestartOutcome. Must be safe to call from several threads.
        opts: Restart count, base seed and worker count.

    Returns:
        The selected RestartOutcome. ``converged`` is False when no restart converged.

    Raises:
        FitError: If every restart raised or returned a non-finite NLML.
    """
    seeds = [opts.seed + k for k in range(opts.restarts)]

    def attempt(seed: int) -> RestartOutcome | str:
        try:
            outcome = fit_one(seed)
        except (FitError, FactorizationError, DomainError, np.linalg.LinAlgError, ValueError) as e:
            return f"seed {seed}: {e}"
        if not np.isfinite(outcome.nlml):
            return f"seed {seed}: non-finite NLML"
        logger.debug("Restart seed=%d nlml=%.6f converged=%s", seed, outcome.nlml, outcome.converged)
        return outcome

    if opts.workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            results = list(pool.map(attempt, seeds))
    else:
        results = [attempt(seed) for seed in seeds]

    outcomes = [r for r in results if isinstance(r, RestartOutcome)]
    failures = [r for r in results if isinstance(r, str)]
    if not outcomes:
        raise FitError(f"All {len(seeds)} restarts failed", diagnostics=failures)

    candidates = [o for o in outcomes if o.converged]
    if not candidates:
        logger.warning("No restart converged; using the lowest NLML among %d runs", len(outcomes))
        candidates = outcomes
    return min(candidates, key=lambda o: (o.nlml, o.seed))
