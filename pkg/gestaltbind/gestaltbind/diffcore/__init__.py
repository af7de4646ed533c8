from .graph import (
    OP_MAPPING,
    Constant,
    Node,
    Op,
    Variable,
    apply,
    backward,
    forward,
    leaves,
    register_op,
)
from .layers import Dense
from .ops import (
    ACTIVATIONS,
    affine,
    bce_with_logits,
    concat,
    cos,
    exp,
    gaussian_density,
    log,
    matmul,
    mean,
    norm,
    reshape,
    sigmoid,
    sin,
    softplus,
    sqrt,
    square,
    squared_error,
    stack,
    tanh,
    transpose,
)
from .ops import sum as reduce_sum
from .optim import Adam, AdamState, adam_step, momentum_step
from .serialization import load_arrays, save_arrays
