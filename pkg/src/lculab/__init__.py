"""Block-partition prediction lab: partition trees, legality rules, codecs,
a numpy CNN+Transformer predictor and an RD-proxy oracle."""
from .codec import modes_to_tree, pack_edges, reshape_edges, tree_to_edges, tree_to_modes, unpack_edges
from .constraints import DEFAULT_RULES, ConstraintRules, ModeMask, allowed_modes, enumerate_legal_trees, masked_argmax, validate_tree
from .partition import CuRect, PartitionTree, SplitMode, child_rects, node_count
from .samples import LcuInput, LcuSample

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RULES",
    "ConstraintRules",
    "CuRect",
    "LcuInput",
    "LcuSample",
    "ModeMask",
    "PartitionTree",
    "SplitMode",
    "allowed_modes",
    "child_rects",
    "enumerate_legal_trees",
    "masked_argmax",
    "modes_to_tree",
    "node_count",
    "pack_edges",
    "reshape_edges",
    "tree_to_edges",
    "tree_to_modes",
    "unpack_edges",
    "validate_tree",
]
