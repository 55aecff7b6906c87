"""Network significance: analytic bias and variance of the network output.

Inputs are treated as Gaussian with the stream's running per-feature mean and
variance.  Each sigmoid unit's pre-activation is then approximately Gaussian
and the probit approximation ``s(a) ~ Phi(sqrt(pi/8) a)`` gives closed forms
for the unit's expected activation and its variance.  These moments are
chained layer by layer up to the head.

Growing and pruning of the top hidden layer are driven by two
statistical-process-control monitors: one on the squared bias (grow) and one
on the variance (prune).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtr, owens_t

from . import _kernels
from .network import CLASSIFICATION, EvolvingNetwork, softmax

PROBIT_SCALE = math.pi / 8.0
WARMUP = 10

GROW = "grow"
PRUNE = "prune"
HOLD = "hold"


@dataclass
class Moments:
    """Expected activations and activation variances for every hidden layer."""

    means: list[np.ndarray]
    variances: list[np.ndarray]
    head_mean: np.ndarray  # expected pre-softmax head output
    head_var: np.ndarray


def _unit_moments(mu_a: np.ndarray, var_a: np.ndarray):
    scale = np.sqrt(1.0 + PROBIT_SCALE * var_a)
    mean = expit(mu_a / scale)
    var = np.zeros_like(mu_a)
    spread = var_a > 0.0
    if np.any(spread):
        # E[Phi(l*a)^2] for a ~ N(mu_a, var_a) is a bivariate normal orthant
        # probability with correlation rho; Owen's T gives it in closed form.
        # sqrt((1 - rho) / (1 + rho)) simplifies to 1 / sqrt(1 + 2 lv)
        lv = PROBIT_SCALE * var_a[spread]
        h = math.sqrt(PROBIT_SCALE) * mu_a[spread] / np.sqrt(1.0 + lv)
        p = ndtr(h)
        second = p - 2.0 * owens_t(h, 1.0 / np.sqrt(1.0 + 2.0 * lv))
        var[spread] = np.maximum(second - p * p, 0.0)
    return mean, var


def moments(net: EvolvingNetwork, mu, sigma2) -> Moments:
    """Propagate input mean/variance through the network.

    Units within a layer are treated as independent, so a layer's
    pre-activation variance is ``var_prev @ W**2``.  With ``sigma2 == 0`` every
    step reduces to the plain forward pass at ``mu``.
    """
    mean = np.asarray(mu, dtype=float).reshape(1, -1)
    var = np.asarray(sigma2, dtype=float).reshape(1, -1)
    if mean.shape[1] != net.input_dim or var.shape != mean.shape:
        raise ValueError(f"input statistics must have length {net.input_dim}")
    means, variances = [], []
    for layer in net.layers:
        mu_a = mean @ layer.W + layer.b
        var_a = var @ (layer.W * layer.W)
        mean, var = _unit_moments(mu_a, var_a)
        means.append(mean[0])
        variances.append(var[0])
    head = net.head
    head_mean = mean @ head.W + head.c
    head_var = var @ (head.W * head.W)
    return Moments(means, variances, head_mean[0], head_var[0])


def expected_output(net: EvolvingNetwork, mu, sigma2) -> np.ndarray:
    m = moments(net, mu, sigma2)
    if net.mode == CLASSIFICATION:
        return softmax(m.head_mean)
    return m.head_mean


def _bias2(net, m: Moments, y) -> float:
    out = softmax(m.head_mean) if net.mode == CLASSIFICATION else m.head_mean
    diff = out - np.asarray(y, dtype=float)
    return float(np.mean(diff * diff))


def network_bias_squared(net: EvolvingNetwork, mu, sigma2, y) -> float:
    """Squared bias ``(E[y_hat] - y)^2`` averaged over outputs."""
    return _bias2(net, moments(net, mu, sigma2), y)


def network_variance(net: EvolvingNetwork, mu, sigma2) -> float:
    """Variance of the linear head output, averaged over outputs."""
    return float(np.mean(moments(net, mu, sigma2).head_var))


def unit_contributions(net: EvolvingNetwork, mu, sigma2) -> np.ndarray:
    """Expected activation of each top-layer unit scaled by its outgoing weight norm."""
    return output_contributions(moments(net, mu, sigma2).means[-1], net.head.W, net.mode == CLASSIFICATION)


def output_contributions(top_means, W_out, softmax: bool = False) -> np.ndarray:
    W_out = np.asarray(W_out, dtype=float)
    if softmax:
        # softmax ignores a shift shared by all logits, so only the centred row matters
        W_out = W_out - W_out.mean(axis=1, keepdims=True)
    return np.asarray(top_means) * np.linalg.norm(W_out, axis=1)


def weakest_unit(contributions) -> int:
    # np.argmin returns the first minimum: ties go to the lowest index
    return int(np.argmin(contributions))


def confidence_factor(value: float) -> float:
    """Adaptive k-sigma factor ``1.25 exp(-value) + 0.75``, in [0.75, 2]."""
    return 1.25 * math.exp(-value) + 0.75


class InputStatistics:
    """Running per-feature mean and variance (Welford)."""

    def __init__(self, n: int):
        self.count = 0
        self.mu = np.zeros(n)
        self._m2 = np.zeros(n)

    def update(self, x) -> None:
        self.count += 1
        delta = x - self.mu
        self.mu += delta / self.count
        self._m2 += delta * (x - self.mu)

    @property
    def sigma2(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mu)
        return np.maximum(self._m2 / self.count, 0.0)


class SpcAccumulator:
    """Running mean/std of a monitored scalar with a minimum-tracking pair."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self._m2 = 0.0
        self.mean_min = math.inf
        self.std_min = math.inf
        self.count = 0

    @property
    def std(self) -> float:
        return math.sqrt(self._m2 / self.n) if self.n else 0.0

    def update(self, value: float) -> None:
        self.n += 1
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.n
        self._m2 += delta * (value - self.mean)
        std = self.std
        if self.mean + std < self.mean_min + self.std_min:
            self.mean_min, self.std_min = self.mean, std

    def reset_mins(self) -> None:
        self.mean_min, self.std_min = self.mean, self.std
        self.count = 0

    def exceeds(self, factor: float) -> bool:
        """k-sigma rule against the minimum, with ``factor`` as k.

        The level must also sit strictly above the recorded minimum so that a
        flat monitor (std 0) never fires.
        """
        if self.count < WARMUP:
            return False
        level = self.mean + self.std
        return level >= self.mean_min + factor * self.std_min and level > self.mean_min + self.std_min


def grow_condition(mean, std, mean_min, std_min, bias2) -> bool:
    return mean + std >= mean_min + confidence_factor(bias2) * std_min


def prune_condition(mean, std, mean_min, std_min, var) -> bool:
    return mean + std >= mean_min + 2.0 * confidence_factor(var) * std_min


@dataclass
class SignificanceState:
    input_stats: InputStatistics
    bias_spc: SpcAccumulator = field(default_factory=SpcAccumulator)
    var_spc: SpcAccumulator = field(default_factory=SpcAccumulator)
    grown_flag: bool = False

    @classmethod
    def for_inputs(cls, n: int) -> "SignificanceState":
        return cls(InputStatistics(n))

    def reset_monitors(self) -> None:
        """Fresh accumulators for a new top layer; input statistics are kept."""
        self.bias_spc = SpcAccumulator()
        self.var_spc = SpcAccumulator()
        self.grown_flag = False

    def begin_batch(self) -> None:
        self.grown_flag = False


def update_and_check_grow(state: SignificanceState, bias2: float) -> str:
    acc = state.bias_spc
    acc.update(bias2)
    if acc.exceeds(confidence_factor(bias2)):
        acc.reset_mins()
        state.grown_flag = True
        return GROW
    return HOLD


def update_and_check_prune(state: SignificanceState, var: float) -> str:
    acc = state.var_spc
    acc.update(var)
    # cool-down: no pruning in the batch where a unit was just added
    if state.grown_flag:
        return HOLD
    if acc.exceeds(2.0 * confidence_factor(var)):
        acc.reset_mins()
        return PRUNE
    return HOLD


def adapt_width(net: EvolvingNetwork, state: SignificanceState, x, y,
                allow_prune: bool = True, observe: bool = True) -> str:
    """Per-sample width adaptation of the top hidden layer.

    Absorbs ``x`` into the input statistics (unless ``observe`` is false, as
    for replayed samples), evaluates bias and variance, and applies at most
    one structural change.  Returns GROW, PRUNE or HOLD.
    """
    if observe:
        state.input_stats.update(x)
    theta, dims = net.packed()
    top_means = np.empty(dims[-2])
    bias2, var = _kernels.moment_stats(theta, dims, state.input_stats.mu, state.input_stats.sigma2,
                                       y, net.mode == CLASSIFICATION, top_means)
    if update_and_check_grow(state, bias2) == GROW:
        net.add_hidden_unit(net.predict_sample(x) - y)
        return GROW
    if update_and_check_prune(state, var) == PRUNE and allow_prune:
        scores = output_contributions(top_means, net.head.W, net.mode == CLASSIFICATION)
        if net.remove_hidden_unit(weakest_unit(scores)):
            return PRUNE
    return HOLD
