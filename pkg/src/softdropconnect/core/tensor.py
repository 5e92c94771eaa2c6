"""
Dense float64 tensors and the reverse-mode tape.

A :class:`Tape` records every primitive executed while it is active (per
thread / per context). :meth:`Tape.backward` walks the recorded graph in
reverse topological order and fills ``grad`` on every reachable tensor that
requires a gradient.
"""

import itertools
import os
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from ..utils.errors import DimensionError, NumericalError

# Finite-input/NaN-output checks on every op; enabled for debug runs.
DEBUG_CHECKS = os.environ.get("SDC_DEBUG", "0") == "1"

_ids = itertools.count()
_active_tape: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)

BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    N-dimensional float64 array with an optional gradient.

    The data array is treated as immutable once the tensor took part in a
    forward pass; only ``grad`` accumulates.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "id")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.id = next(_ids)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {grad.shape} does not match tensor shape {self.shape}"
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad = self.grad + grad

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Operator sugar; the primitives live in ops.py.
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from .ops import scale
        return scale(self, -1.0)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)


def as_tensor(value) -> Tensor:
    """Wrap arrays and scalars; tensors pass through unchanged."""
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass
class Node:
    """One recorded primitive: inputs, output and the rule mapping the output
    gradient to input gradients."""

    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardRule


class Tape:
    """
    Recorder of primitive operations.

    Usage::

        with Tape() as tape:
            loss = cross_entropy(softmax_logits(model(x)), y)
        tape.backward(loss)
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self._tensors: Dict[int, Tensor] = {}
        self._producers: Dict[int, Node] = {}
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node) -> None:
        for tensor in (*node.inputs, node.output):
            self._tensors[tensor.id] = tensor
        self._producers[node.output.id] = node
        self.nodes.append(node)

    def graph(self) -> nx.DiGraph:
        """Dependency graph over tensor ids (edges run input -> output)."""
        graph = nx.DiGraph()
        for node in self.nodes:
            graph.add_node(node.output.id)
            for tensor in node.inputs:
                graph.add_edge(tensor.id, node.output.id)
        return graph

    def backward(self, loss: Tensor, grad: Optional[np.ndarray] = None) -> None:
        """
        Back-propagate from ``loss``.

        Args:
            loss: Tensor produced under this tape (usually a scalar)
            grad: Seed gradient; defaults to ones for a single-element loss
        """
        if grad is None:
            if loss.size != 1:
                raise DimensionError(
                    f"backward from non-scalar tensor of shape {loss.shape} needs a seed gradient"
                )
            grad = np.ones_like(loss.data)

        graph = self.graph()
        if loss.id not in graph:
            # Nothing recorded upstream of the loss.
            if loss.requires_grad:
                loss.accumulate_grad(np.asarray(grad, dtype=np.float64))
            return

        reachable = nx.ancestors(graph, loss.id) | {loss.id}
        order = list(nx.topological_sort(graph.subgraph(reachable)))

        pending: Dict[int, np.ndarray] = {loss.id: np.asarray(grad, dtype=np.float64)}
        for tensor_id in reversed(order):
            upstream = pending.get(tensor_id)
            node = self._producers.get(tensor_id)
            if upstream is None or node is None:
                continue
            input_grads = node.backward(upstream)
            for tensor, input_grad in zip(node.inputs, input_grads):
                if input_grad is None or not tensor.requires_grad:
                    continue
                if tensor.id in pending:
                    pending[tensor.id] = pending[tensor.id] + input_grad
                else:
                    pending[tensor.id] = input_grad

        for tensor_id in order:
            tensor = self._tensors.get(tensor_id, loss if tensor_id == loss.id else None)
            if tensor is not None and tensor.requires_grad and tensor_id in pending:
                tensor.accumulate_grad(pending[tensor_id])


def active_tape() -> Optional[Tape]:
    """The tape recording in the current context, if any."""
    return _active_tape.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording in the current context."""
    token = _active_tape.set(None)
    try:
        yield
    finally:
        _active_tape.reset(token)


def record_op(
    op: str,
    data: np.ndarray,
    inputs: Iterable[Tensor],
    backward: BackwardRule,
) -> Tensor:
    """
    Wrap the forward result of a primitive and record it on the active tape.

    Args:
        op: Primitive name
        data: Forward result
        inputs: Tensors the result depends on, in the order ``backward`` returns grads
        backward: Maps the output gradient to one gradient (or None) per input

    Returns:
        Output tensor
    """
    inputs = tuple(inputs)
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires_grad)

    if DEBUG_CHECKS and np.isnan(out.data).any():
        if all(np.isfinite(t.data).all() for t in inputs):
            raise NumericalError(f"NaN produced by '{op}' from finite inputs")

    tape = _active_tape.get()
    if tape is not None and requires_grad:
        tape.record(Node(op=op, inputs=inputs, output=out, backward=backward))
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate gradients of every tensor reachable from ``loss`` on ``tape``."""
    tape.backward(loss)
