"""Central finite-difference checks for tensor-valued functions."""

from __future__ import annotations

import numpy as np

from .core import Tensor, backward, no_grad, sum_, mul


def numeric_grad(fn, inputs: list[np.ndarray], wrt: int, probe: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """d/d inputs[wrt] of sum(fn(*inputs) * probe), by central differences."""
    base = [np.array(a, dtype=float) for a in inputs]
    x = base[wrt]
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            fp = float((fn(*[Tensor(a) for a in base]).data * probe).sum())
            flat[i] = old - eps
            fm = float((fn(*[Tensor(a) for a in base]).data * probe).sum())
            flat[i] = old
            gflat[i] = (fp - fm) / (2 * eps)
    return g


def analytic_grads(fn, inputs: list[np.ndarray], probe: np.ndarray) -> list[np.ndarray]:
    ts = [Tensor(np.array(a, dtype=float), requires_grad=True) for a in inputs]
    out = fn(*ts)
    loss = sum_(mul(out, Tensor(probe)))
    backward(loss)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in ts]


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-3) -> float:
    """max|a - b| / max(|a|, |b|, floor); the floor keeps exactly-zero
    gradients (finite differences return ~1e-10 noise there) from blowing up."""
    num = np.abs(a - b).max() if a.size else 0.0
    den = max(np.abs(a).max() if a.size else 0.0, np.abs(b).max() if b.size else 0.0, floor)
    return float(num / den)


def check(fn, inputs: list[np.ndarray], rng: np.random.Generator, eps: float = 1e-5) -> float:
    """Worst relative error over all inputs between backprop and finite differences."""
    with no_grad():
        out_shape = fn(*[Tensor(np.array(a, dtype=float)) for a in inputs]).shape
    probe = rng.normal(size=out_shape)
    ana = analytic_grads(fn, inputs, probe)
    worst = 0.0
    for i in range(len(inputs)):
        num = numeric_grad(fn, inputs, i, probe, eps)
        worst = max(worst, relative_error(ana[i], num))
    return worst
