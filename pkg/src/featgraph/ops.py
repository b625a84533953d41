"""Column transformation catalog.

Fifteen operations: eleven unary, four binary.  Three of the unary ones
(standardize, minmax, quantile_uniform) fit parameters on the column they
first see and carry them in a FitState so the same mapping can be replayed
on unseen rows.  With guards enabled every operation maps finite input to
finite output; the guard constants live here and nowhere else.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .errors import (
    ArityMismatch,
    FitStateMismatch,
    LengthMismatch,
    NonFiniteOutput,
    UnknownOperation,
)

EPS = 1e-6
EXP_CLIP = 50.0
# Overflow clamp: squares and products of already-huge columns would
# otherwise leave float64 range and violate the finite-output contract.
BIG = 1e300


class Arity(enum.Enum):
    UNARY = 1
    BINARY = 2


@dataclass(frozen=True)
class OperationKind:
    """One catalog entry.  ids are stable and double as edge relation ids."""

    id: int
    name: str
    arity: Arity
    stateful: bool = False
    commutative: bool = False


@dataclass
class FitState:
    """Parameters a stateful operation learned from its fit column.

    params holds only JSON-friendly values (floats or lists of floats) so
    graph files can embed it verbatim.
    """

    op: str
    params: dict[str, Any] = field(default_factory=dict)


_UNARY_NAMES = (
    "square",
    "sqrt_abs",
    "log_abs",
    "exp_clip",
    "sin",
    "cos",
    "tanh",
    "reciprocal",
    "standardize",
    "minmax",
    "quantile_uniform",
)
_BINARY_NAMES = ("add", "subtract", "multiply", "divide_safe")
_STATEFUL = {"standardize", "minmax", "quantile_uniform"}
_COMMUTATIVE = {"add", "multiply"}


def default_operation_set() -> list[OperationKind]:
    """The full catalog in id order (unary 0..10, then binary 11..14)."""
    ops = [
        OperationKind(i, name, Arity.UNARY, stateful=name in _STATEFUL)
        for i, name in enumerate(_UNARY_NAMES)
    ]
    base = len(ops)
    ops.extend(
        OperationKind(base + i, name, Arity.BINARY, commutative=name in _COMMUTATIVE)
        for i, name in enumerate(_BINARY_NAMES)
    )
    return ops


_BY_NAME = {op.name: op for op in default_operation_set()}


def operation_by_name(name: str) -> OperationKind:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise UnknownOperation(name) from None


def _signum(x: np.ndarray) -> np.ndarray:
    """Sign with sign(0) = +1, so safe divisions never collapse to zero."""
    return np.where(x < 0.0, -1.0, 1.0)


def _finalize(out: np.ndarray, op: str, guard: bool) -> np.ndarray:
    if guard:
        return np.clip(out, -BIG, BIG)
    if not np.all(np.isfinite(out)):
        raise NonFiniteOutput(op)
    return out


def _fit(name: str, col: np.ndarray) -> FitState:
    if name == "standardize":
        return FitState(name, {"mean": float(col.mean()), "std": float(col.std())})
    if name == "minmax":
        return FitState(name, {"min": float(col.min()), "max": float(col.max())})
    if name == "quantile_uniform":
        return FitState(name, {"sorted": np.sort(col).tolist()})
    raise UnknownOperation(name)


def _transform_stateful(name: str, col: np.ndarray, fit: FitState, guard: bool) -> np.ndarray:
    p = fit.params
    if name == "standardize":
        denom = max(p["std"], EPS) if guard else p["std"]
        return (col - p["mean"]) / denom
    if name == "minmax":
        span = p["max"] - p["min"]
        denom = max(span, EPS) if guard else span
        return (col - p["min"]) / denom
    if name == "quantile_uniform":
        ref = np.asarray(p["sorted"], dtype=np.float64)
        if ref.size == 1:
            return np.zeros_like(col)
        positions = np.linspace(0.0, 1.0, ref.size)
        return np.interp(col, ref, positions)
    raise UnknownOperation(name)


def apply_unary(
    kind: OperationKind,
    column: np.ndarray,
    fit: Optional[FitState] = None,
    guard: bool = True,
) -> tuple[np.ndarray, Optional[FitState]]:
    """Apply one unary operation to a column.

    Stateless kinds return (output, None).  Stateful kinds fit on the
    column when fit is None and otherwise replay the supplied FitState,
    returning (output, fit_state) either way.  Passing a FitState that
    belongs to a different operation raises FitStateMismatch.
    """
    if kind.arity is not Arity.UNARY:
        raise ArityMismatch(kind.name, 1, 2)
    if fit is not None and fit.op != kind.name:
        raise FitStateMismatch(kind.name, fit.op)
    x = np.asarray(column, dtype=np.float64)
    name = kind.name

    # Overflow and division are expected here: the guard clips the result
    # and the unguarded path raises NonFiniteOutput, so warnings add nothing.
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if kind.stateful:
            state = fit if fit is not None else _fit(name, x)
            out = _transform_stateful(name, x, state, guard)
            return _finalize(out, name, guard), state

        if name == "square":
            out = x * x
        elif name == "sqrt_abs":
            out = np.sqrt(np.abs(x))
        elif name == "log_abs":
            out = np.log(np.abs(x) + EPS) if guard else np.log(np.abs(x))
        elif name == "exp_clip":
            out = np.exp(np.minimum(x, EXP_CLIP)) if guard else np.exp(x)
        elif name == "sin":
            out = np.sin(x)
        elif name == "cos":
            out = np.cos(x)
        elif name == "tanh":
            out = np.tanh(x)
        elif name == "reciprocal":
            if guard:
                out = _signum(x) / np.maximum(np.abs(x), EPS)
            else:
                out = 1.0 / x
        else:
            raise UnknownOperation(name)
        return _finalize(out, name, guard), None


def apply_binary(
    kind: OperationKind,
    left: np.ndarray,
    right: np.ndarray,
    guard: bool = True,
) -> np.ndarray:
    """Apply one binary operation elementwise to two equal-length columns."""
    if kind.arity is not Arity.BINARY:
        raise ArityMismatch(kind.name, 2, 1)
    a = np.asarray(left, dtype=np.float64)
    b = np.asarray(right, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(a.shape[0], b.shape[0])
    name = kind.name

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if name == "add":
            out = a + b
        elif name == "subtract":
            out = a - b
        elif name == "multiply":
            out = a * b
        elif name == "divide_safe":
            if guard:
                out = a / (_signum(b) * np.maximum(np.abs(b), EPS))
            else:
                out = a / b
        else:
            raise UnknownOperation(name)
        return _finalize(out, name, guard)
