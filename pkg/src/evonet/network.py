"""Dynamic-topology feed-forward network.

Sigmoid hidden layers feed either a softmax head (classification) or an
identity head (regression).  Training is single-pass, sample-wise SGD with
one learning rate per hidden layer plus one for the head.  The width of the
top hidden layer and the depth of the stack can change while streaming.

Snapshot format (``to_dict`` / ``from_dict``, JSON on disk)::

    {
      "format": "evonet-network",
      "version": 1,
      "mode": "classification" | "regression",
      "input_dim": n, "output_dim": m,
      "layers": [{"in": in_d, "out": R_d, "eta": float,
                  "W": [[...] * R_d] * in_d, "b": [...] * R_d}, ...],
      "head": {"in": R_D, "out": m, "eta": float,
               "W": [[...] * m] * R_D, "c": [...] * m}
    }

Floats are written with ``repr`` precision so a round trip is bit-exact for
finite doubles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import _kernels

CLASSIFICATION = "classification"
REGRESSION = "regression"
MODES = (CLASSIFICATION, REGRESSION)

NEW_UNIT_WEIGHT_RANGE = 0.05
BASE_RATE = 0.01


class ShapeError(ValueError):
    """Input dimensions do not match the network."""


class NumericError(FloatingPointError):
    """Training produced a non-finite loss."""


class UnsupportedOperation(RuntimeError):
    """Operation not defined for the network's mode."""


@dataclass
class HiddenLayer:
    W: np.ndarray  # (in_d, R_d)
    b: np.ndarray  # (R_d,)
    eta: float = BASE_RATE

    @property
    def width(self) -> int:
        return self.W.shape[1]


@dataclass
class OutputLayer:
    W: np.ndarray  # (R_D, m)
    c: np.ndarray  # (m,)
    eta: float = BASE_RATE


@dataclass
class ForwardTrace:
    hidden: list[np.ndarray]  # one (batch, R_d) matrix per layer
    output: np.ndarray  # (batch, m)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def confidence_ratio(output_row, mode: str = CLASSIFICATION) -> float:
    """Return ``y1 / (y1 + y2)`` for the two largest entries of a softmax row."""
    if mode != CLASSIFICATION:
        raise UnsupportedOperation("confidence ratio needs softmax outputs")
    row = np.asarray(output_row, dtype=float)
    if row.ndim != 1 or row.size < 2:
        raise ShapeError("confidence ratio needs at least two outputs")
    y2, y1 = np.partition(row, row.size - 2)[-2:]
    total = y1 + y2
    if total <= 0.0:
        return 1.0
    return float(y1 / total)


@dataclass
class EvolvingNetwork:
    layers: list[HiddenLayer]
    head: OutputLayer
    mode: str = CLASSIFICATION
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.layers:
            raise ValueError("network needs at least one hidden layer")
        self._pack()

    def _arrays(self):
        for layer in self.layers:
            yield layer.W
            yield layer.b
        yield self.head.W
        yield self.head.c

    def _pack(self) -> None:
        # all parameters share one flat buffer; layer arrays are views into it
        arrays = [np.asarray(a, dtype=float) for a in self._arrays()]
        theta = np.concatenate([a.ravel() for a in arrays])
        views = []
        off = 0
        for a in arrays:
            views.append(theta[off:off + a.size].reshape(a.shape))
            off += a.size
        it = iter(views)
        for layer in self.layers:
            layer.W = next(it)
            layer.b = next(it)
        self.head.W = next(it)
        self.head.c = next(it)
        self.theta = theta
        self.dims = np.array([self.input_dim] + self.widths + [self.output_dim], dtype=np.int64)

    def packed(self):
        """``(theta, dims)`` for the compiled kernels, repacking if needed."""
        theta = self.theta
        if any(a.base is not theta for a in self._arrays()):
            self._pack()
        return self.theta, self.dims

    @classmethod
    def create(cls, input_dim: int, output_dim: int, mode: str = CLASSIFICATION,
               width: int = 1, rng=None, seed=None) -> "EvolvingNetwork":
        """Scratch network with a single hidden layer of ``width`` units."""
        if rng is None:
            rng = np.random.default_rng(seed)
        layer = HiddenLayer(xavier(rng, input_dim, width), np.zeros(width))
        head = OutputLayer(xavier(rng, width, output_dim), np.zeros(output_dim))
        return cls([layer], head, mode, rng)

    # -- topology --------------------------------------------------------

    @property
    def input_dim(self) -> int:
        return self.layers[0].W.shape[0]

    @property
    def output_dim(self) -> int:
        return self.head.W.shape[1]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        return [layer.width for layer in self.layers]

    def param_count(self) -> int:
        total = sum(layer.W.size + layer.b.size for layer in self.layers)
        return total + self.head.W.size + self.head.c.size

    def rates(self) -> list[float]:
        return [layer.eta for layer in self.layers] + [self.head.eta]

    # -- evaluation ------------------------------------------------------

    def _check_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ShapeError(f"expected {self.input_dim} features, got shape {X.shape}")
        return X

    def head_output(self, z: np.ndarray) -> np.ndarray:
        if self.mode == CLASSIFICATION:
            return softmax(z)
        return z

    def forward(self, X) -> ForwardTrace:
        X = self._check_input(X)
        hidden = []
        a = X
        for layer in self.layers:
            a = expit(a @ layer.W + layer.b)
            hidden.append(a)
        z = a @ self.head.W + self.head.c
        return ForwardTrace(hidden, self.head_output(z))

    def predict(self, X) -> np.ndarray:
        return self.forward(X).output

    def sample_loss(self, x, y) -> float:
        """Per-sample training objective: cross-entropy or half squared error."""
        out = self.forward(x).output[0]
        y = np.asarray(y, dtype=float)
        if self.mode == CLASSIFICATION:
            return float(-np.sum(y * np.log(np.clip(out, 1e-300, None))))
        return float(0.5 * np.sum((out - y) ** 2))

    def gradients(self, x, y):
        """Analytic gradients of :meth:`sample_loss` for one sample.

        Returns ``(layer_grads, head_grad, output)`` where ``layer_grads`` is a
        list of ``(dW, db)`` pairs and ``head_grad`` is ``(dW_out, dc_out)``.
        """
        x = np.asarray(x, dtype=float)
        acts = [x]
        a = x
        for layer in self.layers:
            a = expit(a @ layer.W + layer.b)
            acts.append(a)
        z = a @ self.head.W + self.head.c
        out = softmax(z) if self.mode == CLASSIFICATION else z
        # softmax + cross-entropy and identity + half-SE share this delta
        delta = out - y
        head_grad = (np.outer(a, delta), delta)
        back = self.head.W @ delta
        layer_grads = []
        for d in range(self.depth - 1, -1, -1):
            h = acts[d + 1]
            dz = back * h * (1.0 - h)
            layer_grads.append((np.outer(acts[d], dz), dz))
            if d:
                back = self.layers[d].W @ dz
        layer_grads.reverse()
        return layer_grads, head_grad, out

    # -- training --------------------------------------------------------

    def train_step(self, X, Y, rates=None) -> float:
        """One sample-wise SGD pass over the batch, in arrival order.

        ``rates`` holds one learning rate per hidden layer followed by the
        head's rate; it defaults to the rates stored on the layers.  Returns
        the mean pre-update loss (cross-entropy, or MSE for regression).
        """
        X = self._check_input(X)
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[None, :]
        if Y.shape != (X.shape[0], self.output_dim):
            raise ShapeError(f"targets shape {Y.shape} does not match inputs {X.shape}")
        if rates is None:
            rates = self.rates()
        if len(rates) != self.depth + 1:
            raise ValueError(f"need {self.depth + 1} rates, got {len(rates)}")
        rates = np.asarray(rates, dtype=float)
        outputs = np.empty_like(Y)
        for t, (x, y) in enumerate(zip(X, Y)):
            outputs[t] = self.sgd_sample(x, y, rates)
        if self.mode == CLASSIFICATION:
            loss = float(-np.mean(np.sum(Y * np.log(np.clip(outputs, 1e-300, None)), axis=1)))
        else:
            loss = float(np.mean((outputs - Y) ** 2))
        if not np.isfinite(loss):
            raise NumericError("non-finite training loss")
        return loss

    def sgd_sample(self, x, y, rates: np.ndarray) -> np.ndarray:
        """Compiled SGD step on one sample; returns the pre-update output."""
        theta, dims = self.packed()
        return _kernels.sgd_sample(theta, dims, x, y, rates, self.mode == CLASSIFICATION)

    def predict_sample(self, x) -> np.ndarray:
        theta, dims = self.packed()
        return _kernels.forward_sample(theta, dims, x, self.mode == CLASSIFICATION)

    def apply_gradients(self, x, y, rates) -> None:
        """Reference (numpy) SGD step, used to check the compiled kernel."""
        layer_grads, (dWo, dco), _ = self.gradients(x, y)
        for layer, (dW, db), eta in zip(self.layers, layer_grads, rates):
            if eta:
                layer.W -= eta * dW
                layer.b -= eta * db
        if rates[-1]:
            self.head.W -= rates[-1] * dWo
            self.head.c -= rates[-1] * dco

    # -- structural mutation ---------------------------------------------

    def add_hidden_unit(self, error) -> None:
        """Append one unit to the top hidden layer.

        The unit's outgoing head row is set to ``-error`` so it pushes the
        current output error toward zero; incoming weights are small uniform
        draws and the bias is uniform on [-1, 1].
        """
        e = np.asarray(error, dtype=float).ravel()
        if e.shape != (self.output_dim,):
            raise ShapeError(f"error vector must have length {self.output_dim}")
        if not np.all(np.isfinite(e)):
            raise ValueError("error vector must be finite")
        top = self.layers[-1]
        w_in = self.rng.uniform(-NEW_UNIT_WEIGHT_RANGE, NEW_UNIT_WEIGHT_RANGE, size=(top.W.shape[0], 1))
        bias = self.rng.uniform(-1.0, 1.0)
        top.W = np.hstack([top.W, w_in])
        top.b = np.append(top.b, bias)
        self.head.W = np.vstack([self.head.W, -e])
        self._pack()

    def remove_hidden_unit(self, index: int) -> bool:
        """Drop top-layer unit ``index``; refuses (returns False) on the last unit."""
        top = self.layers[-1]
        if top.width < 2:
            return False
        if not 0 <= index < top.width:
            raise IndexError(f"unit index {index} out of range for width {top.width}")
        top.W = np.delete(top.W, index, axis=1)
        top.b = np.delete(top.b, index)
        self.head.W = np.delete(self.head.W, index, axis=0)
        self._pack()
        return True

    def add_hidden_layer(self, width: int = 1) -> None:
        """Insert a new top hidden layer and a fresh output head."""
        if width < 1:
            raise ValueError("layer width must be at least 1")
        below = self.layers[-1].width
        m = self.output_dim
        self.layers.append(HiddenLayer(xavier(self.rng, below, width), np.zeros(width)))
        self.head = OutputLayer(xavier(self.rng, width, m), np.zeros(m), self.head.eta)
        self._pack()

    # -- snapshot --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "evonet-network",
            "version": 1,
            "mode": self.mode,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "layers": [
                {"in": layer.W.shape[0], "out": layer.width, "eta": layer.eta,
                 "W": layer.W.tolist(), "b": layer.b.tolist()}
                for layer in self.layers
            ],
            "head": {"in": self.head.W.shape[0], "out": self.output_dim, "eta": self.head.eta,
                     "W": self.head.W.tolist(), "c": self.head.c.tolist()},
        }

    @classmethod
    def from_dict(cls, data: dict, rng=None) -> "EvolvingNetwork":
        if data.get("format") != "evonet-network":
            raise ValueError("not a network snapshot")

        def matrix(rows, shape):
            arr = np.array(rows, dtype=float).reshape(shape)
            return arr

        layers = [
            HiddenLayer(matrix(spec["W"], (spec["in"], spec["out"])),
                        np.array(spec["b"], dtype=float), float(spec["eta"]))
            for spec in data["layers"]
        ]
        h = data["head"]
        head = OutputLayer(matrix(h["W"], (h["in"], h["out"])), np.array(h["c"], dtype=float), float(h["eta"]))
        return cls(layers, head, data["mode"], rng if rng is not None else np.random.default_rng())

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path, rng=None) -> "EvolvingNetwork":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")), rng)
