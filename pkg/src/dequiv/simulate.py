"""Fixed-step numerical integration of polynomial ODE systems.

The reductions themselves are exact; the integrator is the semantic
sanity gate that backs them with trajectories. Classic explicit
fourth-order Runge-Kutta with a fixed step is deterministic given its
inputs, which is what report reproducibility needs — adaptive stepping
would buy precision this gate does not require.

Derivatives are compiled to flat coefficient/index arrays and evaluated
in a numba-jitted kernel; set DEQUIV_NO_NUMBA=1 (or run without numba
installed) to fall back to the pure-numpy path, which produces bitwise
identical trajectories.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (DivergenceError, FreeParameterError,
                     MissingInitialError, SimulationError)
from .model import PolynomialODESystem

_BLOWUP_LIMIT = 1e12
_FULL_GRID_BUDGET = 4_000_000  # max recorded floats before subsampling
_SUBSAMPLE_TARGET = 1000


def _use_numba() -> bool:
    return os.environ.get("DEQUIV_NO_NUMBA", "") == ""


_kernel = None


def _build_kernel():
    """JIT-compile the integrator lazily; import cost is paid once."""
    global _kernel
    if _kernel is not None:
        return _kernel
    from numba import njit

    @njit(cache=True)
    def _eval(coeffs, term_ptr, fac_idx, fac_ptr, x, out):
        n = out.shape[0]
        for i in range(n):
            acc = 0.0
            for t in range(term_ptr[i], term_ptr[i + 1]):
                v = coeffs[t]
                for f in range(fac_ptr[t], fac_ptr[t + 1]):
                    v *= x[fac_idx[f]]
                acc += v
            out[i] = acc

    @njit(cache=True)
    def _rk4(coeffs, term_ptr, fac_idx, fac_ptr, x0, h, steps,
             sample_steps, out, limit):
        n = x0.shape[0]
        x = x0.copy()
        k1 = np.empty(n)
        k2 = np.empty(n)
        k3 = np.empty(n)
        k4 = np.empty(n)
        tmp = np.empty(n)
        si = 0
        if sample_steps[si] == 0:
            for j in range(n):
                out[si, j] = x[j]
            si += 1
        for step_i in range(1, steps + 1):
            _eval(coeffs, term_ptr, fac_idx, fac_ptr, x, k1)
            for j in range(n):
                tmp[j] = x[j] + 0.5 * h * k1[j]
            _eval(coeffs, term_ptr, fac_idx, fac_ptr, tmp, k2)
            for j in range(n):
                tmp[j] = x[j] + 0.5 * h * k2[j]
            _eval(coeffs, term_ptr, fac_idx, fac_ptr, tmp, k3)
            for j in range(n):
                tmp[j] = x[j] + h * k3[j]
            _eval(coeffs, term_ptr, fac_idx, fac_ptr, tmp, k4)
            for j in range(n):
                x[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            for j in range(n):
                if not (-limit <= x[j] <= limit):  # catches NaN and inf too
                    return (1, step_i)
            if si < sample_steps.shape[0] and sample_steps[si] == step_i:
                for j in range(n):
                    out[si, j] = x[j]
                si += 1
        return (0, steps)

    _kernel = _rk4
    return _kernel


def _eval_py(coeffs, term_ptr, fac_idx, fac_ptr, x, out):
    for i in range(out.shape[0]):
        acc = 0.0
        for t in range(term_ptr[i], term_ptr[i + 1]):
            v = coeffs[t]
            for f in range(fac_ptr[t], fac_ptr[t + 1]):
                v *= x[fac_idx[f]]
            acc += v
        out[i] = acc


def _rk4_py(coeffs, term_ptr, fac_idx, fac_ptr, x0, h, steps,
            sample_steps, out, limit):
    n = x0.shape[0]
    x = x0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    si = 0
    if sample_steps[si] == 0:
        out[si, :] = x
        si += 1
    for step_i in range(1, steps + 1):
        _eval_py(coeffs, term_ptr, fac_idx, fac_ptr, x, k1)
        np.multiply(k1, 0.5 * h, out=tmp)
        tmp += x
        _eval_py(coeffs, term_ptr, fac_idx, fac_ptr, tmp, k2)
        np.multiply(k2, 0.5 * h, out=tmp)
        tmp += x
        _eval_py(coeffs, term_ptr, fac_idx, fac_ptr, tmp, k3)
        np.multiply(k3, h, out=tmp)
        tmp += x
        _eval_py(coeffs, term_ptr, fac_idx, fac_ptr, tmp, k4)
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.abs(x) <= limit):
            return (1, step_i)
        if si < sample_steps.shape[0] and sample_steps[si] == step_i:
            out[si, :] = x
            si += 1
    return (0, steps)


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: strictly increasing times, one row per sample."""

    variables: tuple
    times: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return self.times.shape[0]

    def series(self, name: str) -> np.ndarray:
        return self.states[:, self.variables.index(name)]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _compile_terms(system: PolynomialODESystem):
    """Flatten derivatives into coefficient and factor-index arrays."""
    coeffs: list = []
    term_ptr = [0]
    fac_idx: list = []
    fac_ptr = [0]
    for f in system.derivatives:
        for mono, s in f.terms():
            coeffs.append(float(s))
            for v, e in mono:
                fac_idx.extend([v] * e)
            fac_ptr.append(len(fac_idx))
        term_ptr.append(len(coeffs))
    return (np.asarray(coeffs, dtype=np.float64),
            np.asarray(term_ptr, dtype=np.int64),
            np.asarray(fac_idx, dtype=np.int64),
            np.asarray(fac_ptr, dtype=np.int64))


def _sample_grid(steps: int, n: int) -> np.ndarray:
    """Deterministic recording grid: the full grid while it fits the
    memory budget, else about a thousand evenly spaced steps (both
    endpoints always included)."""
    if (steps + 1) * n <= _FULL_GRID_BUDGET:
        return np.arange(steps + 1, dtype=np.int64)
    marks = np.linspace(0, steps, _SUBSAMPLE_TARGET + 1)
    return np.unique(np.round(marks).astype(np.int64))


def simulate(system: PolynomialODESystem, horizon: float = 10.0,
             step: float = 1e-3) -> Trajectory:
    """Integrate from the system's initial condition.

    Requires every variable initialised and every parameter bound.
    Raises DivergenceError as soon as any component leaves
    [-1e12, 1e12] or turns non-finite.
    """
    if step <= 0:
        raise SimulationError("step must be positive")
    if horizon <= 0:
        raise SimulationError("horizon must be positive")
    resolved = system.resolve()
    free = sorted({p for f in resolved.derivatives for p in f.free_params()})
    if free:
        raise FreeParameterError(
            "cannot simulate with unbound parameters: " + ", ".join(free))
    init = resolved.initial_map
    missing = [resolved.variables[i] for i in range(resolved.n)
               if i not in init]
    if missing:
        raise MissingInitialError(
            "missing initial conditions for: " + ", ".join(missing))

    steps = int(round(horizon / step))
    if steps < 1:
        raise SimulationError("horizon shorter than one step")
    x0 = np.array([float(init[i]) for i in range(resolved.n)],
                  dtype=np.float64)
    arrays = _compile_terms(resolved)
    sample_steps = _sample_grid(steps, resolved.n)
    out = np.empty((sample_steps.shape[0], resolved.n), dtype=np.float64)

    runner = _build_kernel() if _use_numba() else _rk4_py
    status, at_step = runner(*arrays, x0, float(step), steps,
                             sample_steps, out, _BLOWUP_LIMIT)
    if status != 0:
        t = at_step * float(step)
        raise DivergenceError(
            f"trajectory diverged (|x| > {_BLOWUP_LIMIT:g} or non-finite)",
            time=t)
    times = sample_steps.astype(np.float64) * float(step)
    return Trajectory(variables=tuple(resolved.variables),
                      times=times, states=out)
