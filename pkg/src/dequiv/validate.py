"""Trajectory-level validation of a computed reduction.

The reductions are exact in theory; this gate integrates both systems
and checks that the claimed relations actually hold numerically:

- forward mode: each macro variable tracks the sum of its block,
- backward mode: members of a block track their representative (the
  original system must have blockwise-equal initials for this to be
  meaningful), and the quotient's macro tracks the representative.

Deviations are reported per block, absolute and relative (relative to
max(1, sup |reference|)); a row passes only when both stay within the
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnequalBlockInitialsError
from .model import PolynomialODESystem
from .quotient import QuotientModel
from .simulate import Trajectory, simulate


@dataclass(frozen=True)
class BlockDeviation:
    block: str
    members: tuple
    comparison: str
    max_abs_err: float
    max_rel_err: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "members": list(self.members),
            "comparison": self.comparison,
            "max_abs_err": self.max_abs_err,
            "max_rel_err": self.max_rel_err,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ValidationReport:
    mode: str
    tol: float
    horizon: float
    step: float
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def max_abs_err(self) -> float:
        return max((r.max_abs_err for r in self.rows), default=0.0)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "tol": self.tol,
            "horizon": self.horizon,
            "step": self.step,
            "passed": self.passed,
            "rows": [r.to_dict() for r in self.rows],
        }


def _align(a: Trajectory, b: Trajectory):
    """Row indices of the shared sample times (grids may differ when one
    side was subsampled)."""
    if a.times.shape == b.times.shape and np.array_equal(a.times, b.times):
        idx = np.arange(a.times.shape[0])
        return idx, idx
    _, ia, ib = np.intersect1d(a.times, b.times, return_indices=True)
    return ia, ib


def _deviation(ref: np.ndarray, got: np.ndarray, tol: float):
    abs_err = float(np.max(np.abs(got - ref)))
    rel_err = abs_err / max(1.0, float(np.max(np.abs(ref))))
    return abs_err, rel_err, (abs_err <= tol and rel_err <= tol)


def validate_reduction(original: PolynomialODESystem,
                       quotient: QuotientModel,
                       tol: float = 1e-6, horizon: float = 10.0,
                       step: float = 1e-3) -> ValidationReport:
    """Integrate original and quotient and compare them blockwise."""
    part = quotient.partition
    mode = quotient.mode
    resolved = original.resolve()
    macro_names = quotient.reduced.variables

    rows = []
    if mode == "bde":
        init = resolved.initial_map
        for block in part.blocks:
            vals = {init.get(i) for i in block}
            if len(vals) > 1:
                members = ", ".join(resolved.variables[i] for i in block)
                raise UnequalBlockInitialsError(
                    "BDE validation requires blockwise-equal initial "
                    f"conditions; block {{{members}}} has unequal values")
        orig_tr = simulate(resolved, horizon=horizon, step=step)
        quot_tr = simulate(quotient.reduced, horizon=horizon, step=step)
        io, iq = _align(orig_tr, quot_tr)
        for b, block in enumerate(part.blocks):
            rep = block[0]
            ref = orig_tr.states[:, rep]
            members = tuple(resolved.variables[i] for i in block)
            for i in block[1:]:
                abs_err, rel_err, ok = _deviation(
                    ref, orig_tr.states[:, i], tol)
                rows.append(BlockDeviation(
                    block=macro_names[b], members=members,
                    comparison=(f"{resolved.variables[i]} vs "
                                f"{resolved.variables[rep]}"),
                    max_abs_err=abs_err, max_rel_err=rel_err, passed=ok))
            abs_err, rel_err, ok = _deviation(
                ref[io], quot_tr.states[iq, b], tol)
            rows.append(BlockDeviation(
                block=macro_names[b], members=members,
                comparison=(f"quotient {macro_names[b]} vs "
                            f"{resolved.variables[rep]}"),
                max_abs_err=abs_err, max_rel_err=rel_err, passed=ok))
    elif mode == "fde":
        orig_tr = simulate(resolved, horizon=horizon, step=step)
        quot_tr = simulate(quotient.reduced, horizon=horizon, step=step)
        io, iq = _align(orig_tr, quot_tr)
        for b, block in enumerate(part.blocks):
            members = tuple(resolved.variables[i] for i in block)
            ref = orig_tr.states[:, list(block)].sum(axis=1)
            abs_err, rel_err, ok = _deviation(
                ref[io], quot_tr.states[iq, b], tol)
            rows.append(BlockDeviation(
                block=macro_names[b], members=members,
                comparison=f"{macro_names[b]} vs block sum",
                max_abs_err=abs_err, max_rel_err=rel_err, passed=ok))
    else:
        raise ValueError(f"unknown reduction mode {mode!r}")

    return ValidationReport(mode=mode, tol=tol, horizon=horizon, step=step,
                            rows=tuple(rows))
