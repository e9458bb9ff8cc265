from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GraphError
from .nn import ParameterRegistry


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"  # "adam" or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def optimizer_step(reg: ParameterRegistry, lr: float, config: OptimizerConfig = OptimizerConfig()) -> None:
    """Apply one update to every parameter holding a gradient, then clear grads.

    Adam moments and step counts are kept per parameter in ``reg.state`` so
    that freezing and unfreezing groups between stages stays consistent.
    """
    live = [(n, e.tensor) for n, e in reg.params.items() if e.tensor.grad is not None]
    if not live:
        raise GraphError("optimizer_step called before backward(): no gradients populated")
    if config.kind not in ("adam", "sgd"):
        raise ValueError(f"unknown optimizer kind {config.kind!r}")
    for name, t in live:
        g = t.grad
        if config.kind == "sgd":
            t.data = t.data - lr * g
            continue
        st = reg.state.get(name)
        if st is None:
            st = reg.state[name] = {"m": np.zeros_like(g), "v": np.zeros_like(g), "t": np.zeros(())}
        st["t"] += 1
        step = float(st["t"])
        st["m"] = config.beta1 * st["m"] + (1 - config.beta1) * g
        st["v"] = config.beta2 * st["v"] + (1 - config.beta2) * g * g
        mhat = st["m"] / (1 - config.beta1 ** step)
        vhat = st["v"] / (1 - config.beta2 ** step)
        t.data = t.data - lr * mhat / (np.sqrt(vhat) + config.eps)
    reg.step_count += 1
    reg.zero_grad()
