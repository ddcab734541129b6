"""Reverse-mode automatic differentiation over numpy arrays.

A Tape records every operation as it executes; backward() replays the records
in reverse, accumulating adjoints.  There is no graph optimization and no
higher-order differentiation: calling backward a second time on the same tape
raises, and gradients are plain numpy arrays outside the tape's view.
"""

from __future__ import annotations

import numpy as np


class TapeError(RuntimeError):
    pass


class ShapeError(ValueError):
    pass


class Var:
    """One node in the computation graph: a value array plus a gradient slot."""

    __slots__ = ("tape", "values", "grad", "_id")

    def __init__(self, tape: "Tape", values: np.ndarray, node_id: int):
        self.tape = tape
        self.values = values
        self.grad = None  # allocated lazily during backward
        self._id = node_id

    @property
    def shape(self):
        return self.values.shape

    def grad_or_zero(self) -> np.ndarray:
        """Gradient after backward; zero for Vars the loss does not reach."""
        if self.grad is None:
            return np.zeros_like(self.values)
        return self.grad

    # operator sugar; constants are lifted to tape dtype
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, Var):
            return ops.mul(self, other)
        return ops.scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


class Tape:
    """Single-worker operation recorder.

    dtype float64 is for gradient checking; float32 for training throughput.
    """

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self._records: list[tuple[Var, tuple[Var, ...], object]] = []
        self._next_id = 0
        self._finished = False

    def var(self, values) -> Var:
        v = Var(self, np.asarray(values, dtype=self.dtype), self._next_id)
        self._next_id += 1
        return v

    def lift(self, value) -> Var:
        if isinstance(value, Var):
            if value.tape is not self:
                raise TapeError("inputs belong to different tapes")
            return value
        return self.var(value)

    def record(self, out_values: np.ndarray, inputs: tuple[Var, ...], backward_fn) -> Var:
        """Register an op: backward_fn(adjoint) returns one adjoint per input."""
        out = self.var(out_values)
        self._records.append((out, inputs, backward_fn))
        return out

    def release(self) -> None:
        """Free recorded ops for a tape used forward-only (no backward)."""
        self._records.clear()

    def backward(self, loss: Var) -> None:
        """Accumulate dloss/dvar into every reachable Var's grad slot."""
        if loss.tape is not self:
            raise TapeError("loss does not belong to this tape")
        if self._finished:
            raise TapeError("tape already backpropagated; higher-order "
                            "derivatives are not supported")
        if loss.values.size != 1:
            raise ShapeError(f"loss must be scalar-shaped, got {loss.values.shape}")
        self._finished = True
        loss.grad = np.ones_like(loss.values)
        for out, inputs, backward_fn in reversed(self._records):
            if out.grad is None:
                continue
            adjoints = backward_fn(out.grad)
            for var, adj in zip(inputs, adjoints):
                if adj is None:
                    continue
                if adj.shape != var.values.shape:
                    raise ShapeError(
                        f"backward produced adjoint of shape {adj.shape} "
                        f"for input of shape {var.values.shape}")
                if var.grad is None:
                    var.grad = np.array(adj, dtype=self.dtype)
                else:
                    var.grad = var.grad + adj
        # drop records (and the buffers their closures capture) promptly;
        # the tape/var reference cycle would otherwise wait on the gc
        self._records.clear()
