"""Graph flow convolutional networks: parallel-flow decompositions and 1D convolutions over them."""

from .decompose import DecomposeConfig, bfs_peel, centered_paths, decompose, lattice_flows, tree_decompose
from .equiv import Polynomial, compile_polynomial, compile_spec, dense_apply, verify
from .flows import FlowCover, load_cover, regularize, save_cover, validate_cover
from .graph import Graph, distance, is_non_extendable, are_parallel, load_graph, product
from .model import GFCN, ModelSpec
from .spread import SimParams, Snapshot, jordan_center, make_dataset, simulate, topx_accuracy
from .tensor import Tensor

__version__ = "0.1.0"
