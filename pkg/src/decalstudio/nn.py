"""Sinusoidal input encoding, a fixed 3-layer MLP with analytic gradients,
and an Adam optimizer. No autodiff framework: the backward passes are exact
and cheap enough for the pixel-batch training this package does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_FREQUENCIES = 4
HIDDEN_WIDTH = 256


def encoded_dim(input_dim: int, n_frequencies: int = N_FREQUENCIES) -> int:
    return input_dim * (1 + 2 * n_frequencies)


def encode(p: np.ndarray, n_frequencies: int = N_FREQUENCIES) -> np.ndarray:
    """gamma(p) = (p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(L-1) pi p),
    cos(2^(L-1) pi p)) along the last axis."""
    p = np.asarray(p)
    parts = [p]
    for k in range(n_frequencies):
        arg = (2.0 ** k) * np.pi * p
        parts.append(np.sin(arg))
        parts.append(np.cos(arg))
    return np.concatenate(parts, axis=-1)


class Mlp:
    """Fully-connected net: sizes[0] -> ... -> sizes[-1], ReLU between layers.

    Weight layout is (fan_in, fan_out) so a batch forward is x @ W + b.
    Kaiming-uniform init with a recorded seed; the final layer can start at
    zero (identity-like multiplier heads) or with a fixed bias.
    """

    def __init__(self, sizes, seed: int = 0, zero_init_final: bool = False,
                 final_bias: float = 0.0, dtype=np.float64):
        self.sizes = list(sizes)
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        rng = np.random.Generator(np.random.PCG64(seed))
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for li, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = np.zeros(fan_out)
            if li == len(self.sizes) - 2:
                if zero_init_final:
                    w[:] = 0.0
                b[:] = final_bias
            self.weights.append(w.astype(self.dtype))
            self.biases.append(b.astype(self.dtype))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def astype(self, dtype) -> "Mlp":
        self.dtype = np.dtype(dtype)
        self.weights = [w.astype(self.dtype) for w in self.weights]
        self.biases = [b.astype(self.dtype) for b in self.biases]
        return self

    def forward(self, x: np.ndarray, keep_cache: bool = False):
        """Batch forward; returns y or (y, cache) for a later backward."""
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        a = np.atleast_2d(x)
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"input dim {a.shape[1]} != {self.sizes[0]}")
        inputs, masks = [], []
        for li, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ w + b
            if li < self.n_layers - 1:
                mask = z > 0
                a = z * mask
                masks.append(mask)
            else:
                a = z
        y = a[0] if squeeze else a
        if keep_cache:
            return y, {"inputs": inputs, "masks": masks, "squeeze": squeeze}
        return y

    def backward(self, cache, grad_out: np.ndarray):
        """Exact gradients: returns (grad_input, [(dW, db), ...])."""
        if cache is None:
            raise ValueError("backward requires the cache from forward(keep_cache=True)")
        g = np.atleast_2d(np.asarray(grad_out, dtype=self.dtype))
        grads = [None] * self.n_layers
        for li in range(self.n_layers - 1, -1, -1):
            if li < self.n_layers - 1:
                g = g * cache["masks"][li]
            a_in = cache["inputs"][li]
            grads[li] = (a_in.T @ g, g.sum(axis=0))
            g = g @ self.weights[li].T
        grad_in = g[0] if cache["squeeze"] else g
        return grad_in, grads

    def flat_grads(self, grads) -> list[np.ndarray]:
        out = []
        for dw, db in grads:
            out.extend((dw, db))
        return out


@dataclass
class AdamState:
    """Moment accumulators for one parameter group."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    skipped: int = field(default=0)

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr: float) -> AdamState:
    """Standard bias-corrected Adam update, in place on `params`.

    Non-finite gradients skip the whole step and bump `state.skipped`.
    """
    if any(not np.all(np.isfinite(g)) for g in grads):
        state.skipped += 1
        return state
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("non-finite parameter after Adam step")
    return state
