"""Small feedforward maps with hand-written backpropagation, and SGD with momentum."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .exceptions import ConfigurationError, ShapeMismatchError
from .models import FloatArray, _matrix_from_dict, _matrix_to_dict

Elementwise = Callable[[FloatArray], FloatArray]

ACTIVATIONS: dict[str, tuple[Elementwise, Elementwise]] = {
    # name: (activation(z), derivative expressed through the activation output)
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "relu": (lambda z: np.maximum(z, 0.0), lambda y: (y > 0).astype(float)),
    "identity": (lambda z: z, np.ones_like),
}


def _check_activation(name: str) -> None:
    if name not in ACTIVATIONS:
        raise ConfigurationError(
            f"Unknown activation '{name}', expected one of {sorted(ACTIVATIONS)}"
        )


@dataclass(eq=False)
class FeedforwardMap:
    """
    Dense network ``x -> W_L(...act(W_1 x + b_1)...) + b_L``.

    Hidden layers use ``activation``; the last layer uses ``output_activation``.
    Weights are stored ``(out, in)`` and act on row-major batches ``(N, in)``.

    Attributes:
        layer_sizes: Input size followed by every layer's output size.
        weights: One matrix per layer.
        biases: One vector per layer.
        activation: Hidden-layer nonlinearity name.
        output_activation: Output-layer nonlinearity name.

    """

    layer_sizes: tuple[int, ...]
    weights: list[FloatArray]
    biases: list[FloatArray]
    activation: str = "tanh"
    output_activation: str = "identity"

    @staticmethod
    def initialize(
        layer_sizes: Sequence[int],
        rng: np.random.Generator,
        activation: str = "tanh",
        output_activation: str = "identity",
    ) -> "FeedforwardMap":
        """
        Create a map with seeded uniform fan-in initialization.

        Weights are drawn from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``, biases
        start at zero.

        Args:
            layer_sizes: Input size followed by each layer's output size.
            rng: Generator used for the draw.
            activation: Hidden-layer nonlinearity.
            output_activation: Output-layer nonlinearity.

        Returns:
            The initialized map.

        Raises:
            ConfigurationError: If fewer than two sizes are given, a size is
                not positive or an activation is unknown.

        """
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ConfigurationError(f"Invalid layer sizes {list(sizes)}")
        _check_activation(activation)
        _check_activation(output_activation)
        weights = []
        biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:], strict=True):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return FeedforwardMap(sizes, weights, biases, activation, output_activation)

    @property
    def input_dim(self) -> int:
        """Input size."""
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        """Output size."""
        return self.layer_sizes[-1]

    def parameters(self) -> list[FloatArray]:
        """Parameter arrays in ``[W_1, b_1, W_2, b_2, ...]`` order (live references)."""
        params: list[FloatArray] = []
        for w, b in zip(self.weights, self.biases, strict=True):
            params.extend((w, b))
        return params

    def _layer_activation(self, layer: int) -> str:
        return self.output_activation if layer == len(self.weights) - 1 else self.activation

    def forward(self, inputs: FloatArray) -> FloatArray:
        """
        Evaluate the map.

        Args:
            inputs: Batch ``(N, in)`` or a single vector ``(in,)``.

        Returns:
            Outputs with the same leading shape as ``inputs``.

        """
        return self.forward_cached(inputs)[0]

    def forward_cached(self, inputs: FloatArray) -> tuple[FloatArray, list[FloatArray]]:
        """
        Evaluate the map and keep every layer's output for backpropagation.

        Args:
            inputs: Batch ``(N, in)`` or a single vector ``(in,)``.

        Returns:
            The output and the list of layer outputs, input first.

        Raises:
            ShapeMismatchError: If the input width differs from ``input_dim``.

        """
        x = np.asarray(inputs, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ShapeMismatchError(
                f"Input width {x.shape[-1]} does not match map input {self.input_dim}"
            )
        single = x.ndim == 1
        h = x[None] if single else x
        cache = [h]
        for layer, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            act = ACTIVATIONS[self._layer_activation(layer)][0]
            h = act(h @ w.T + b)
            cache.append(h)
        return (h[0] if single else h), cache

    def backward(
        self, cache: list[FloatArray], upstream_grad: FloatArray
    ) -> tuple[list[FloatArray], FloatArray]:
        """
        Backpropagate an output gradient through a cached forward pass.

        Args:
            cache: Layer outputs from ``forward_cached``.
            upstream_grad: Gradient of the objective with respect to the output,
                shaped like the output.

        Returns:
            Parameter gradients in ``parameters()`` order, summed over the
            batch, and the gradient with respect to the input.

        Raises:
            ShapeMismatchError: If ``upstream_grad`` does not match the output.

        """
        out = cache[-1]
        grad = np.asarray(upstream_grad, dtype=float)
        single = grad.ndim == 1
        grad = grad[None] if single else grad
        if grad.shape != out.shape:
            raise ShapeMismatchError(
                f"Upstream gradient {grad.shape} does not match output {out.shape}"
            )
        grads: list[FloatArray] = [np.empty(0)] * (2 * len(self.weights))
        for layer in range(len(self.weights) - 1, -1, -1):
            derivative = ACTIVATIONS[self._layer_activation(layer)][1]
            dz = grad * derivative(cache[layer + 1])
            grads[2 * layer] = dz.T @ cache[layer]
            grads[2 * layer + 1] = dz.sum(axis=0)
            grad = dz @ self.weights[layer]
        return grads, (grad[0] if single else grad)

    def get_flat(self) -> FloatArray:
        """All parameters as one vector."""
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, vector: FloatArray) -> None:
        """
        Overwrite all parameters from one vector (``get_flat`` layout).

        Args:
            vector: Parameter values.

        Raises:
            ShapeMismatchError: If the vector has the wrong length.

        """
        params = self.parameters()
        total = sum(p.size for p in params)
        if vector.size != total:
            raise ShapeMismatchError(f"Expected {total} parameters, got {vector.size}")
        offset = 0
        for p in params:
            p[...] = vector[offset : offset + p.size].reshape(p.shape)
            offset += p.size

    def copy(self) -> "FeedforwardMap":
        """Deep copy of the map."""
        return FeedforwardMap(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
            self.output_activation,
        )

    def to_dict(self) -> dict[str, Any]:
        """Convert the map to a dictionary.

        Returns:
            Layer sizes, activations and parameters with shapes.
        """
        return {
            "layer_sizes": list(self.layer_sizes),
            "activation": self.activation,
            "output_activation": self.output_activation,
            "weights": [_matrix_to_dict(w) for w in self.weights],
            "biases": [_matrix_to_dict(b) for b in self.biases],
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "FeedforwardMap":
        """Create a map from a dictionary produced by ``to_dict``.

        Args:
            data: Dictionary representation.

        Returns:
            A new FeedforwardMap instance.
        """
        return FeedforwardMap(
            layer_sizes=tuple(int(s) for s in data["layer_sizes"]),
            weights=[_matrix_from_dict(w) for w in data["weights"]],
            biases=[_matrix_from_dict(b) for b in data["biases"]],
            activation=data.get("activation", "tanh"),
            output_activation=data.get("output_activation", "identity"),
        )


def mlp_forward_backward(
    network: FeedforwardMap, inputs: FloatArray, upstream_grad: FloatArray
) -> tuple[FloatArray, list[FloatArray], FloatArray]:
    """
    Forward pass followed by exact backpropagation.

    Args:
        network: The map.
        inputs: Batch ``(N, in)`` or vector ``(in,)``.
        upstream_grad: Gradient with respect to the output.

    Returns:
        Output, parameter gradients (``parameters()`` order) and input gradient.

    Raises:
        ShapeMismatchError: If the shapes are inconsistent.

    """
    output, cache = network.forward_cached(inputs)
    param_grads, input_grad = network.backward(cache, upstream_grad)
    return output, param_grads, input_grad


@dataclass
class SgdMomentum:
    """
    Stochastic gradient descent with heavy-ball momentum.

    ``v <- momentum * v - lr * grad``; ``p <- p + v``. One velocity buffer is
    kept per parameter array, keyed by position in the parameter list.
    """

    momentum: float = 0.9
    _velocity: list[FloatArray] = field(default_factory=list)

    def step(self, params: Sequence[FloatArray], grads: Sequence[FloatArray], lr: float) -> None:
        """
        Update parameters in place.

        Args:
            params: Parameter arrays (modified in place).
            grads: Gradients in the same order.
            lr: Step size.

        Raises:
            ShapeMismatchError: If the parameter list changes between steps.

        """
        if not self._velocity:
            self._velocity = [np.zeros_like(p) for p in params]
        if len(self._velocity) != len(params) or len(grads) != len(params):
            raise ShapeMismatchError("Parameter and gradient lists do not match")
        for p, g, v in zip(params, grads, self._velocity, strict=True):
            v *= self.momentum
            v -= lr * g
            p += v


def step_decay(lr: float, epoch: int, decay: float, every: int) -> float:
    """Learning rate after ``epoch`` epochs of a step schedule."""
    return lr * decay ** (epoch // every)
