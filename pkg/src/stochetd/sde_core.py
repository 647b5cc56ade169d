"""SDE problem description and the frozen-field change of variables.

Every Stratonovich scheme in this package is a deterministic one-step map
applied to the vector field

    f(t, u) + sum_m g_m(t, u) * dW_m / dt

with the increment held fixed over all stages of the step.  This module
owns that substitution; ``schemes`` only ever sees plain vector fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, NonFinite

Field = Callable[[float, np.ndarray], np.ndarray]
# (t, u, weights) -> sum_m weights[m] * g_m(t, u), weights shaped (M, *batch)
NoiseSum = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


def scale_channel(w, g):
    """Multiply a field value ``g`` (shape (*batch, n)) by a channel weight.

    ``w`` is a scalar or an array of batch shape; a trailing axis is added so
    that one weight multiplies a whole state vector.
    """
    w = np.asarray(w)
    if w.ndim == 0:
        return w * g
    return w[..., None] * g


@dataclass(frozen=True)
class SdeProblem:
    """du = (L u + N(t, u)) dt + sum_m g_m(t, u) o dW^m.

    ``nonlinear`` is the full drift when ``linear_part`` is None.  The optional
    ``noise_sum`` and ``forcing`` callables are fused fast paths that must agree
    with the per-channel definitions; ``forcing(t, u, w)`` returns
    ``N(t, u) + sum_m w_m g_m(t, u)``.  ``freeze(w)`` returns the same thing
    as a field, doing once whatever depends on the weights alone.
    """

    nonlinear: Field
    diffusions: tuple = ()
    linear_part: Optional[np.ndarray] = None
    dimension: int = 0
    noise_sum: Optional[NoiseSum] = None
    forcing: Optional[NoiseSum] = None
    # weights -> (t, u) -> N + sum_m w_m g_m, with per-step work hoisted out
    freeze: Optional[Callable[[np.ndarray], Field]] = None
    calculus: str = "stratonovich"
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "diffusions", tuple(self.diffusions))
        if self.linear_part is not None:
            lin = np.asarray(self.linear_part)
            object.__setattr__(self, "linear_part", lin)
            if self.dimension and lin.shape[-1] != self.dimension:
                raise DimensionMismatch("linear_part length differs from dimension")
            if not self.dimension:
                object.__setattr__(self, "dimension", lin.shape[-1])
        if self.calculus not in ("stratonovich", "ito"):
            raise InvalidConfig(f"unknown calculus {self.calculus!r}")

    @property
    def channels(self) -> int:
        return len(self.diffusions)

    @property
    def is_split(self) -> bool:
        return self.linear_part is not None

    def drift(self, t, u):
        if self.linear_part is None:
            return self.nonlinear(t, u)
        return self.linear_part * u + self.nonlinear(t, u)

    def noise(self, t, u, weights):
        """sum_m weights[m] * g_m(t, u)."""
        if self.noise_sum is not None:
            return self.noise_sum(t, u, weights)
        out = scale_channel(weights[0], self.diffusions[0](t, u))
        for w, g in zip(weights[1:], self.diffusions[1:]):
            out = out + scale_channel(w, g(t, u))
        return out

    def forced_nonlinear(self, t, u, weights):
        """N(t, u) + sum_m weights[m] * g_m(t, u)."""
        if self.forcing is not None:
            return self.forcing(t, u, weights)
        return self.nonlinear(t, u) + self.noise(t, u, weights)


@dataclass(frozen=True)
class Increment:
    """One step's worth of Brownian increments.

    ``dW`` has shape (M,) for a single trajectory or (M, B) for a batch of B
    trajectories advanced together.
    """

    dt: float
    dW: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidConfig(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "dW", np.asarray(self.dW, dtype=float))

    @property
    def channels(self) -> int:
        return 0 if self.dW.ndim == 0 else self.dW.shape[0]

    @property
    def weights(self) -> np.ndarray:
        # computed once per step, shared by every stage
        return self.dW / self.dt


def check_increment(problem: SdeProblem, inc: Increment):
    if inc.dW.ndim == 0 or inc.dW.shape[0] != problem.channels:
        raise DimensionMismatch(
            f"increment has {inc.channels} channels, problem has {problem.channels}"
        )


def _check_finite(value, what):
    if not np.all(np.isfinite(value)):
        raise NonFinite(f"non-finite value in {what}")
    return value


def modified_drift(problem: SdeProblem, t, u, inc: Increment, check=True):
    """f(t, u) + sum_m g_m(t, u) dW_m / dt."""
    check_increment(problem, inc)
    if problem.channels == 0:
        out = problem.drift(t, u)
    else:
        out = problem.drift(t, u) + problem.noise(t, u, inc.weights)
    if check:
        _check_finite(out, "modified drift")
    return out


def frozen_nonlinear(problem: SdeProblem, weights) -> Field:
    """The nonlinear remainder with the noise folded in for one step."""
    if problem.channels == 0:
        return problem.nonlinear
    if problem.freeze is not None:
        return problem.freeze(weights)

    def forced(t, u):
        return problem.forced_nonlinear(t, u, weights)

    return forced


def frozen_field(problem: SdeProblem, weights) -> Field:
    """The complete modified drift as a plain deterministic vector field."""
    if problem.channels == 0:
        return problem.drift
    lin = problem.linear_part
    forced = frozen_nonlinear(problem, weights)
    if lin is None:
        return forced

    def full(t, u):
        return lin * u + forced(t, u)

    return full


def frozen_problem(problem: SdeProblem, inc: Increment) -> SdeProblem:
    """A noise-free problem whose drift is the modified drift for ``inc``.

    Stepping this with any deterministic scheme reproduces the stochastic
    step exactly; used to check the change of variables.
    """
    check_increment(problem, inc)
    return SdeProblem(
        nonlinear=frozen_nonlinear(problem, inc.weights),
        diffusions=(),
        linear_part=problem.linear_part,
        dimension=problem.dimension,
        calculus=problem.calculus,
        name=f"{problem.name}-frozen",
    )


def scalar_problem(drift, diffusions: Sequence = (), linear=None, calculus="stratonovich",
                   dimension=1, name="") -> SdeProblem:
    """Convenience constructor for small test systems."""
    lin = None if linear is None else np.atleast_1d(np.asarray(linear))
    return SdeProblem(
        nonlinear=drift,
        diffusions=tuple(diffusions),
        linear_part=lin,
        dimension=dimension,
        calculus=calculus,
        name=name,
    )
