from .binding import (
    BindingGraph,
    BindingState,
    adapt_binding,
    argmax_accuracy,
    bind,
    fbe,
    hungarian_accuracy,
    init_binding,
    target_assignment,
    weights,
)
from .perspective import (
    Pose,
    SubmodalFrame,
    SubmodalGraph,
    adapt_pose,
    euler_rotation,
    extract_submodal,
    rotation_from_euler,
)
from .popcode import (
    Lattice,
    build_lattice,
    encode,
    encode_frame,
    encode_node,
    lattices_for_sequence,
)
