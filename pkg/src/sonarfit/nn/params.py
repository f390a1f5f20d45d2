"""Named parameter collections shared by models, optimizer, and checkpoints."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class ParameterSet:
    """Ordered map of uniquely named trainable tensors.

    Names use dotted group prefixes (e.g. "backbone.block1.conv.w") so a
    checkpoint from one model can be matched group-wise against another.
    """

    def __init__(self):
        self._items: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> None:
        if name in self._items:
            raise ValueError(f"duplicate parameter name: {name}")
        if not tensor.requires_grad:
            raise ValueError(f"parameter {name} must require grad")
        self._items[name] = tensor

    def extend(self, prefix: str, named_params) -> None:
        for name, tensor in named_params:
            self.add(f"{prefix}.{name}", tensor)

    def names(self) -> list[str]:
        return list(self._items)

    def items(self):
        return self._items.items()

    def __getitem__(self, name: str) -> Tensor:
        return self._items[name]

    def __contains__(self, name: str) -> bool:
        return name in self._items

    def __len__(self) -> int:
        return len(self._items)

    def count_values(self) -> int:
        return sum(t.data.size for t in self._items.values())

    def zero_grads(self) -> None:
        for t in self._items.values():
            t.grad = None

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: t.data for n, t in self._items.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Copy values in place so existing layer references stay live."""
        missing = set(self._items) - set(arrays)
        if missing:
            raise ValueError(f"checkpoint missing parameters: {sorted(missing)}")
        for name, tensor in self._items.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != tensor.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: checkpoint {arr.shape} vs model {tensor.data.shape}"
                )
            tensor.data[...] = arr
