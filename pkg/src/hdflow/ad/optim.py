"""Adam optimizer with bias-corrected moment estimates."""

from __future__ import annotations

import numpy as np


def adam_step(param: np.ndarray, grad: np.ndarray, state: dict, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> np.ndarray:
    """One Adam update; mutates state ({'t', 'm', 'v'}) and returns the new param.

    An empty state dict is initialized in place on the first call.
    """
    if not state:
        state["t"] = 0
        state["m"] = np.zeros_like(param)
        state["v"] = np.zeros_like(param)
    state["t"] += 1
    t = state["t"]
    state["m"] = beta1 * state["m"] + (1.0 - beta1) * grad
    state["v"] = beta2 * state["v"] + (1.0 - beta2) * grad ** 2
    m_hat = state["m"] / (1.0 - beta1 ** t)
    v_hat = state["v"] / (1.0 - beta2 ** t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Named-parameter wrapper around adam_step; updates params in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state: dict[str, dict] = {name: {} for name in params}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, grad in grads.items():
            self.params[name] = adam_step(
                self.params[name], grad, self.state[name], self.lr,
                self.beta1, self.beta2, self.eps)
