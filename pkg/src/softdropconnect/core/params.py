"""Named parameter storage."""

from typing import Dict, Iterator, List, Tuple

import numpy as np

from ..utils.errors import ConfigurationError, DimensionError
from ..utils.helpers import setup_logging
from .tensor import Tensor

logger = setup_logging(__name__)


class ParamStore:
    """
    Map from dot-separated parameter path to a trainable Tensor.

    Iteration is lexicographic by path, which fixes the order of optimizer
    updates and of checkpoint payloads.
    """

    def __init__(self):
        self._params: Dict[str, Tensor] = {}

    def add(self, path: str, data: np.ndarray) -> Tensor:
        """
        Register a new parameter.

        Args:
            path: Unique dotted path, e.g. ``fc1.weight``
            data: Initial values

        Returns:
            The trainable tensor
        """
        if path in self._params:
            raise ConfigurationError(f"duplicate parameter path: {path}")
        tensor = Tensor(data, requires_grad=True, name=path)
        self._params[path] = tensor
        return tensor

    def __getitem__(self, path: str) -> Tensor:
        return self._params[path]

    def __contains__(self, path: str) -> bool:
        return path in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._params))

    def items(self) -> List[Tuple[str, Tensor]]:
        return [(path, self._params[path]) for path in sorted(self._params)]

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.zero_grad()

    def num_parameters(self) -> int:
        return sum(t.size for t in self._params.values())

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter array, keyed by path."""
        return {path: tensor.data.copy() for path, tensor in self.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Overwrite parameter values; paths and shapes must match exactly."""
        missing = set(self._params) - set(state)
        unexpected = set(state) - set(self._params)
        if missing or unexpected:
            raise ConfigurationError(
                f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
            )
        for path, values in state.items():
            tensor = self._params[path]
            values = np.asarray(values, dtype=np.float64)
            if values.shape != tensor.shape:
                raise DimensionError(
                    f"parameter '{path}' has shape {tensor.shape}, checkpoint holds {values.shape}"
                )
            tensor.data = values.copy()
        logger.debug(f"Loaded {len(state)} parameters")
