"""Random-instance generators for every differentiable op, shared by the
tensor tests and the acceptance gradient suite."""

import numpy as np

from articulate import tensor as T


def _away_from_zero(rng, shape, gap=0.1):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < gap, np.sign(x + 1e-12) * gap, x)


def _away_from_bounds(rng, shape, bounds=(-0.5, 0.5), gap=0.05):
    x = rng.uniform(-1, 1, size=shape)
    for b in bounds:
        near = np.abs(x - b) < gap
        x = np.where(near, b + np.sign(x - b + 1e-12) * gap, x)
    return x


def _distinct(rng, shape):
    # spaced values so an eps-sized nudge never changes an argmax
    n = int(np.prod(shape))
    return (rng.permutation(n) * 0.05 + rng.uniform(0, 0.01)).reshape(shape) - n * 0.025


def _bn_train(x, g, b):
    C = x.shape[1]
    return T.batch_norm(x, g, b, np.zeros(C), np.ones(C), use_batch_stats=True)


def _bn_infer(rm, rv):
    def fn(x, g, b):
        return T.batch_norm(x, g, b, rm.copy(), rv.copy(), use_batch_stats=False)
    return fn


def _attention(heads):
    def fn(x, wq, bq, wk, bk, wv, bv, wo, bo):
        return T.multi_head_attention(x, wq, bq, wk, bk, wv, bv, wo, bo, heads)
    return fn


def _attention_inputs(rng):
    B, Tn, D = 1, 4, 4  # two heads of width 2; small enough for 100 finite-difference checks
    out = [rng.normal(size=(B, Tn, D))]
    for _ in range(4):
        out += [rng.normal(size=(D, D)) * 0.5, rng.normal(size=D) * 0.1]
    return out


def cases():
    """name -> (fn, make_inputs(rng))"""
    rbn = np.random.default_rng(99)
    rm, rv = rbn.normal(size=3), rbn.uniform(0.5, 2.0, size=3)
    return {
        "matmul": (T.matmul, lambda r: [r.normal(size=(3, 4)), r.normal(size=(4, 2))]),
        "matmul_batched_shared": (T.matmul, lambda r: [r.normal(size=(2, 3, 4)), r.normal(size=(4, 5))]),
        "matmul_batched": (T.matmul, lambda r: [r.normal(size=(2, 2, 3, 4)), r.normal(size=(2, 2, 4, 3))]),
        "conv2d_k3": (lambda x, w, b: T.conv2d(x, w, b),
                      lambda r: [r.normal(size=(2, 2, 5, 5)), r.normal(size=(3, 2, 3, 3)), r.normal(size=3)]),
        "conv2d_k3_s2": (lambda x, w: T.conv2d(x, w, stride=2),
                         lambda r: [r.normal(size=(1, 2, 6, 6)), r.normal(size=(2, 2, 3, 3))]),
        "conv2d_pwconv": (lambda x, w, b: T.conv2d(x, w, b),
                          lambda r: [r.normal(size=(2, 3, 4, 4)), r.normal(size=(2, 3, 1, 1)), r.normal(size=2)]),
        "max_pool2d": (T.max_pool2d, lambda r: [_distinct(r, (2, 2, 4, 4))]),
        "global_avg_pool": (T.global_avg_pool, lambda r: [r.normal(size=(2, 3, 4, 4))]),
        "max_over_points": (lambda x: T.max_over(x, 1), lambda r: [_distinct(r, (2, 6, 3))]),
        "relu": (T.relu, lambda r: [_away_from_zero(r, (4, 5))]),
        "sigmoid": (T.sigmoid, lambda r: [r.normal(size=(4, 5)) * 3]),
        "softmax_last": (lambda x: T.softmax(x, -1), lambda r: [r.normal(size=(3, 5))]),
        "softmax_first": (lambda x: T.softmax(x, 0), lambda r: [r.normal(size=(4, 3))]),
        "layer_norm": (T.layer_norm, lambda r: [r.normal(size=(3, 6)), r.normal(size=6), r.normal(size=6)]),
        "batch_norm_batch": (_bn_train, lambda r: [r.normal(size=(4, 3, 2, 2)), r.normal(size=3), r.normal(size=3)]),
        "batch_norm_running": (_bn_infer(rm, rv),
                               lambda r: [r.normal(size=(4, 3, 2, 2)), r.normal(size=3), r.normal(size=3)]),
        "concat": (lambda a, b: T.concat([a, b], axis=1), lambda r: [r.normal(size=(2, 3)), r.normal(size=(2, 4))]),
        "mean": (lambda x: T.mean(x, axis=0), lambda r: [r.normal(size=(5, 3))]),
        "sum": (lambda x: T.sum_(x, axis=(0, 2)), lambda r: [r.normal(size=(2, 3, 4))]),
        "scalar_multiply": (T.mul, lambda r: [r.normal(size=(3, 4)), r.normal(size=())]),
        "add_trailing": (T.add, lambda r: [r.normal(size=(2, 3, 4)), r.normal(size=4)]),
        "sub": (T.sub, lambda r: [r.normal(size=(3, 4)), r.normal(size=(3, 4))]),
        "div": (T.div, lambda r: [r.normal(size=(3, 4)), r.uniform(0.5, 2.0, size=(3, 4))]),
        "log": (T.log, lambda r: [r.uniform(0.2, 3.0, size=(3, 4))]),
        "exp": (T.exp, lambda r: [r.normal(size=(3, 4))]),
        "abs": (T.abs_, lambda r: [_away_from_zero(r, (3, 4))]),
        "sqrt": (T.sqrt, lambda r: [r.uniform(0.2, 3.0, size=(3, 4))]),
        "arccos": (T.arccos, lambda r: [r.uniform(-0.95, 0.95, size=(3, 4))]),
        "norm": (lambda x: T.norm(x, axis=-1), lambda r: [r.normal(size=(5, 3))]),
        "cross": (T.cross, lambda r: [r.normal(size=(4, 3)), r.normal(size=(4, 3))]),
        "expand": (lambda x: T.expand(x, 1, 4), lambda r: [r.normal(size=(2, 1, 3))]),
        "transpose": (lambda x: T.transpose(x, (2, 0, 1)), lambda r: [r.normal(size=(2, 3, 4))]),
        "reshape": (lambda x: T.reshape(x, (6, 4)), lambda r: [r.normal(size=(2, 3, 4))]),
        "getitem": (lambda x: x[:, 1:3], lambda r: [r.normal(size=(3, 4))]),
        "getitem_gather": (lambda x: x[np.array([0, 2, 2])], lambda r: [r.normal(size=(3, 4))]),
        "clip": (lambda x: T.clip(x, -0.5, 0.5), lambda r: [_away_from_bounds(r, (3, 4))]),
        "attention": (_attention(2), _attention_inputs),
    }
