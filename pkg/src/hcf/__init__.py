"""Summation-circuit synthesis for Hough-type pattern ensembles via partition trees."""

from .grid import ImageDomain, base_function, line_pattern, orbit, project, shift_pattern
from .partition import Ensemble, Partition, common_refinement, equality_partition, refines, span_partition
from .treebuilder import (
    PartitionTree,
    build_fht_tree,
    build_hough_tree,
    build_tree_fixed,
    build_tree_greedy,
    check_bounds,
    tree_metrics,
)
from .circuit import Circuit, chain_of_tree, circuit_depth, compile_chain, compile_tree, evaluate, prune

__version__ = "0.1.0"
