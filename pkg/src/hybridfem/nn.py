"""Dense tanh multilayer perceptron with hand-rolled reverse mode and Adam.

A net with dims [N0, ..., NL] applies tanh after every layer except the
last, which stays affine.  The product of layer spectral norms is the
net's Lipschitz bound in the Euclidean norm (tanh is 1-Lipschitz), which
``lipschitz_constant`` computes via deterministic power iteration.  All
arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SplitMix64

__all__ = [
    "Mlp",
    "AdamState",
    "mlp_init",
    "forward",
    "gradients",
    "adam_step",
    "spectral_norm",
    "lipschitz_constant",
]


@dataclass
class Mlp:
    """Weights W_i of shape (N_i, N_{i-1}) and biases b_i of length N_i."""

    dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count inconsistent with dims")


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the parameters."""

    lr: float
    beta1: float
    beta2: float
    eps: float
    t: int
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]

    @classmethod
    def init(cls, net: Mlp, lr: float = 1e-3, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=0,
            m_w=[np.zeros_like(w) for w in net.weights],
            v_w=[np.zeros_like(w) for w in net.weights],
            m_b=[np.zeros_like(b) for b in net.biases],
            v_b=[np.zeros_like(b) for b in net.biases],
        )


def mlp_init(dims: list[int], seed: int) -> Mlp:
    """Glorot-uniform weights, zero biases, fully determined by the seed."""
    if len(dims) < 2:
        raise ValueError("dims must list at least input and output sizes")
    if any(d < 1 for d in dims):
        raise ValueError("all dims must be >= 1")
    rng = SplitMix64(seed)
    weights, biases = [], []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniforms(n_out * n_in, -bound, bound).reshape(n_out, n_in)
        weights.append(w)
        biases.append(np.zeros(n_out))
    return Mlp(dims=list(dims), weights=weights, biases=biases)


def forward(net: Mlp, y: np.ndarray) -> np.ndarray:
    """Evaluate the net on one input vector or a batch of rows."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    z = y[None, :] if single else y
    if z.shape[1] != net.dims[0]:
        raise ValueError(f"input length {z.shape[1]} != {net.dims[0]}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = z @ w.T + b
        if i < last:
            z = np.tanh(z)
    return z[0] if single else z


def gradients(net: Mlp, y: np.ndarray, residual: np.ndarray):
    """Reverse-mode parameter gradients of residual . forward(y).

    ``residual`` is dLoss/dOutput supplied by the caller, one row per
    input row; batch rows are summed.  Returns (grads_w, grads_b) shaped
    like (net.weights, net.biases).
    """
    y = np.asarray(y, dtype=float)
    residual = np.asarray(residual, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    if residual.ndim == 1:
        residual = residual[None, :]
    if residual.shape != (y.shape[0], net.dims[-1]):
        raise ValueError(
            f"residual shape {residual.shape} != {(y.shape[0], net.dims[-1])}"
        )
    last = len(net.weights) - 1
    acts = [y]  # post-activation outputs per layer
    z = y
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = z @ w.T + b
        if i < last:
            z = np.tanh(z)
        acts.append(z)
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    g = residual
    for i in range(last, -1, -1):
        grads_w[i] = g.T @ acts[i]
        grads_b[i] = g.sum(axis=0)
        if i > 0:
            g = (g @ net.weights[i]) * (1.0 - acts[i] ** 2)  # tanh' = 1 - tanh^2
    return grads_w, grads_b


def adam_step(state: AdamState, net: Mlp, grads) -> tuple[Mlp, AdamState]:
    """One bias-corrected Adam update, applied in place."""
    grads_w, grads_b = grads
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for params, gs, ms, vs in (
        (net.weights, grads_w, state.m_w, state.v_w),
        (net.biases, grads_b, state.m_b, state.v_b),
    ):
        for p, g, m_acc, v_acc in zip(params, gs, ms, vs):
            m_acc *= state.beta1
            m_acc += (1.0 - state.beta1) * g
            v_acc *= state.beta2
            v_acc += (1.0 - state.beta2) * g * g
            p -= state.lr * (m_acc / c1) / (np.sqrt(v_acc / c2) + state.eps)
    return net, state


def spectral_norm(W: np.ndarray, tol: float = 1e-8) -> float:
    """Largest singular value by power iteration on W^T W.

    Deterministic all-ones start; falls back to basis vectors if the start
    lands in the null space.  Iteration cap 10 * max(shape).
    """
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        raise ValueError("empty matrix")
    if not W.any():
        return 0.0
    n = W.shape[1]
    v = np.ones(n) / np.sqrt(n)
    if not (W @ v).any():
        for j in range(n):  # some column is nonzero since W != 0
            if W[:, j].any():
                v = np.zeros(n)
                v[j] = 1.0
                break
    sigma = 0.0
    for _ in range(10 * max(W.shape)):
        u = W @ v
        s = np.linalg.norm(u)
        if s == 0.0:
            return 0.0
        u /= s
        v = W.T @ u
        t = np.linalg.norm(v)
        v /= t
        if abs(t - sigma) <= tol * t:
            return float(t)
        sigma = t
    return float(sigma)


def lipschitz_constant(net: Mlp, tol: float = 1e-8) -> float:
    """Product of layer spectral norms; Euclidean Lipschitz bound of the net."""
    c = 1.0
    for w in net.weights:
        c *= spectral_norm(w, tol=tol)
    return c
