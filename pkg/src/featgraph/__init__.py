"""featgraph: reinforcement-driven feature construction over a transformation graph.

The package turns a plain tabular dataset into an enriched one by evolving
a directed acyclic graph of derived columns.  Three small Q-learning agents
pick, step by step, a cluster of source columns, a transformation, and (for
binary transformations) a cluster of partner columns.  Every derived column
remembers exactly how it was produced, so the whole graph can be replayed
on unseen rows without refitting anything.
"""

from .tabular import Dataset, Task, load_csv, split, compute_stats
from .graph import FSTGraph, init_graph, add_transform, materialize
from .config import PipelineConfig, parse_config

__all__ = [
    "Dataset",
    "Task",
    "load_csv",
    "split",
    "compute_stats",
    "FSTGraph",
    "init_graph",
    "add_transform",
    "materialize",
    "PipelineConfig",
    "parse_config",
]

__version__ = "0.1.0"
