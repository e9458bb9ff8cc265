from .core import (Tensor, abs_, add, arccos, as_tensor, backward, batch_norm, clip, concat, conv2d, cross,
                   div, exp, expand, getitem, global_avg_pool, layer_norm, log, matmul, max_over, max_pool2d,
                   mean, mul, multi_head_attention, no_grad, norm, relu, reshape, sigmoid, softmax, sqrt, sub,
                   sum_, transpose)
from .nn import MLP, BatchNorm, Conv2d, EncoderLayer, LayerNorm, Linear, ParameterRegistry
from .optim import OptimizerConfig, optimizer_step

__all__ = [
    "Tensor", "abs_", "add", "arccos", "as_tensor", "backward", "batch_norm", "clip", "concat", "conv2d",
    "cross", "div", "exp", "expand", "getitem", "global_avg_pool", "layer_norm", "log", "matmul", "max_over",
    "max_pool2d", "mean", "mul", "multi_head_attention", "no_grad", "norm", "relu", "reshape", "sigmoid",
    "softmax", "sqrt", "sub", "sum_", "transpose", "MLP", "BatchNorm", "Conv2d", "EncoderLayer", "LayerNorm",
    "Linear", "ParameterRegistry", "OptimizerConfig", "optimizer_step",
]
