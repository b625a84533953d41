"""The feature-state transformation graph.

Nodes are feature states: the original columns (roots) plus every derived
column, each carrying its materialized training values, its seven summary
statistics, and a provenance record (operation id plus ordered parent
ids).  Edges run from parent to child and are typed by operation id.  The
graph is append-only except for explicit node removal, ids are never
reused, and parents always have smaller ids than their children, so id
order is a topological order.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ArityMismatch,
    CorruptProgram,
    NonFiniteOutput,
    SchemaMismatch,
    UnknownNode,
    UnknownOperation,
    UnknownParent,
)
from .ops import (
    Arity,
    FitState,
    OperationKind,
    apply_binary,
    apply_unary,
    default_operation_set,
    operation_by_name,
)
from .tabular import ColumnStats, Dataset, compute_stats

PROGRAM_FORMAT_VERSION = 1


@dataclass(eq=False)
class Node:
    """One feature state.  Immutable once added to a graph."""

    id: int
    name: Optional[str]
    op_id: Optional[int]
    parents: tuple[int, ...]
    depth: int
    train_column: np.ndarray
    stats: ColumnStats
    fit_state: Optional[FitState]
    formula: str

    @property
    def is_root(self) -> bool:
        return self.op_id is None

    @property
    def embedding(self) -> np.ndarray:
        return self.stats.as_vector()


class AddStatus(enum.Enum):
    ADDED = "added"
    DUPLICATE = "duplicate"
    REJECTED = "rejected"


@dataclass(frozen=True)
class AddResult:
    status: AddStatus
    node_id: Optional[int]


class FSTGraph:
    """Transformation DAG over one training table.

    Mutation goes through add_transform and retain_nodes only.  Node and
    edge containers preserve insertion order; node ids ascend, so walking
    nodes() is always a valid evaluation order.
    """

    def __init__(self, train_rows: int):
        self.train_rows = train_rows
        self.nodes: dict[int, Node] = {}
        self.edges: list[tuple[int, int, int]] = []
        self.roots: list[int] = []
        self._dedup: dict[tuple, int] = {}
        self._next_id = 0

    # ------------------------------------------------------------ access

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def root_names(self) -> tuple[str, ...]:
        return tuple(self.nodes[i].name for i in self.roots)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes


def init_graph(train: Dataset) -> FSTGraph:
    """Root-only graph over the training table, one node per column."""
    g = FSTGraph(train.row_count)
    for i, name in enumerate(train.names):
        col = train.column(i).copy()
        col.setflags(write=False)
        node = Node(
            id=g._next_id,
            name=name,
            op_id=None,
            parents=(),
            depth=0,
            train_column=col,
            stats=compute_stats(col),
            fit_state=None,
            formula=name,
        )
        g.nodes[node.id] = node
        g.roots.append(node.id)
        g._next_id += 1
    return g


def _dedup_key(op: OperationKind, parents: tuple[int, ...]) -> tuple:
    if op.commutative:
        return (op.id, tuple(sorted(parents)))
    return (op.id, parents)


def add_transform(
    graph: FSTGraph,
    op: OperationKind,
    parents: tuple[int, ...],
    guard: bool = True,
) -> AddResult:
    """Derive one new column and append it as a node.

    Returns DUPLICATE (with the existing id) when the same operation over
    the same parents, up to order for commutative ones, already produced a
    live node.  Returns REJECTED when the output column is constant or,
    with guards disabled, non-finite.  The graph is unchanged in both of
    those cases.
    """
    parents = tuple(int(p) for p in parents)
    for p in parents:
        if p not in graph.nodes:
            raise UnknownParent(p)
    if len(parents) != op.arity.value:
        raise ArityMismatch(op.name, op.arity.value, len(parents))

    key = _dedup_key(op, parents)
    if key in graph._dedup:
        return AddResult(AddStatus.DUPLICATE, graph._dedup[key])

    fit = None
    try:
        if op.arity is Arity.UNARY:
            col, fit = apply_unary(op, graph.nodes[parents[0]].train_column, guard=guard)
        else:
            col = apply_binary(
                op,
                graph.nodes[parents[0]].train_column,
                graph.nodes[parents[1]].train_column,
                guard=guard,
            )
    except NonFiniteOutput:
        return AddResult(AddStatus.REJECTED, None)

    if col.max() == col.min():
        return AddResult(AddStatus.REJECTED, None)

    col.setflags(write=False)
    node = Node(
        id=graph._next_id,
        name=None,
        op_id=op.id,
        parents=parents,
        depth=1 + max(graph.nodes[p].depth for p in parents),
        train_column=col,
        stats=compute_stats(col),
        fit_state=fit,
        formula=f"{op.name}({', '.join(graph.nodes[p].formula for p in parents)})",
    )
    graph.nodes[node.id] = node
    graph._next_id += 1
    graph._dedup[key] = node.id
    for p in parents:
        graph.edges.append((p, node.id, op.id))
    return AddResult(AddStatus.ADDED, node.id)


def trace_formula(graph: FSTGraph, node_id: int) -> str:
    """Closed-form expression of a node over the root column names."""
    return graph.node(node_id).formula


def retain_nodes(graph: FSTGraph, keep: set[int]) -> list[int]:
    """Drop every non-root node outside keep, cascading to descendants.

    Roots always survive.  A non-root node survives only when it is in
    keep and all of its parents survived, so dropping a node drops its
    entire derived subtree even if parts of it were requested.  Dedup
    entries and edges touching removed nodes are dropped.  Returns the
    removed ids in ascending order.
    """
    survivors: set[int] = set(graph.roots)
    for nid in graph.node_ids():
        node = graph.nodes[nid]
        if node.is_root:
            continue
        if nid in keep and all(p in survivors for p in node.parents):
            survivors.add(nid)
    removed = sorted(set(graph.nodes) - survivors)
    for i in removed:
        del graph.nodes[i]
    if removed:
        gone = set(removed)
        graph.edges = [e for e in graph.edges if e[0] not in gone and e[1] not in gone]
        graph._dedup = {k: v for k, v in graph._dedup.items() if v not in gone}
    return removed


def snapshot(graph: FSTGraph) -> FSTGraph:
    """Deep, independent copy usable as a restore point."""
    return copy.deepcopy(graph)


def restore(checkpoint: FSTGraph) -> FSTGraph:
    """Fresh graph from a checkpoint; the checkpoint stays reusable."""
    return copy.deepcopy(checkpoint)


def feature_matrix(graph: FSTGraph) -> np.ndarray:
    """Training columns of every live node, stacked in id order."""
    ids = graph.node_ids()
    return np.column_stack([graph.nodes[i].train_column for i in ids])


def node_embeddings(graph: FSTGraph) -> np.ndarray:
    """Seven summary statistics per live node, stacked in id order."""
    ids = graph.node_ids()
    return np.vstack([graph.nodes[i].embedding for i in ids])


def symmetric_adjacency(graph: FSTGraph) -> np.ndarray:
    """0/1 adjacency over live nodes in id order, symmetrized, zero diagonal."""
    ids = graph.node_ids()
    pos = {nid: k for k, nid in enumerate(ids)}
    a = np.zeros((len(ids), len(ids)), dtype=np.float64)
    for parent, child, _ in graph.edges:
        i, j = pos[parent], pos[child]
        a[i, j] = 1.0
        a[j, i] = 1.0
    return a


def typed_neighbors(graph: FSTGraph) -> list[list[tuple[int, int]]]:
    """Per node (in id order): (relation id, neighbor position) pairs.

    Edges count in both directions, so parent and child see each other
    under the edge's operation relation.  A binary node therefore has two
    entries, one per parent, and each parent one entry back.
    """
    ids = graph.node_ids()
    pos = {nid: k for k, nid in enumerate(ids)}
    out: list[list[tuple[int, int]]] = [[] for _ in ids]
    for parent, child, op_id in graph.edges:
        i, j = pos[parent], pos[child]
        out[j].append((op_id, i))
        out[i].append((op_id, j))
    return out


def materialize(graph: FSTGraph, data: Dataset) -> np.ndarray:
    """Replay every live node on new rows; columns come back in id order.

    Stateful transformations reuse the parameters fitted when the node was
    created, so test rows never leak into fitting.  The dataset schema must
    match the graph roots by name and order.
    """
    if tuple(data.names) != graph.root_names():
        raise SchemaMismatch(graph.root_names(), data.names)
    ids = graph.node_ids()
    columns: dict[int, np.ndarray] = {}
    for root_pos, root_id in enumerate(graph.roots):
        columns[root_id] = np.asarray(data.column(root_pos), dtype=np.float64)
    ops_by_id = {op.id: op for op in default_operation_set()}
    for nid in ids:
        node = graph.nodes[nid]
        if node.is_root:
            continue
        op = ops_by_id[node.op_id]
        if op.arity is Arity.UNARY:
            col, _ = apply_unary(op, columns[node.parents[0]], fit=node.fit_state)
        else:
            col = apply_binary(op, columns[node.parents[0]], columns[node.parents[1]])
        columns[nid] = col
    return np.column_stack([columns[i] for i in ids])


# ----------------------------------------------------------------- exports


def to_program(graph: FSTGraph) -> dict:
    """JSON-ready replayable description of the graph.

    Self-contained: carries the schema, the operation table, and per-node
    fit parameters, so replay_program needs nothing but this dict and a
    table with matching column names.
    """
    ops_by_id = {op.id: op.name for op in default_operation_set()}
    derived = []
    for nid in graph.node_ids():
        node = graph.nodes[nid]
        if node.is_root:
            continue
        derived.append(
            {
                "id": node.id,
                "op": ops_by_id[node.op_id],
                "parents": list(node.parents),
                "depth": node.depth,
                "fit": dict(node.fit_state.params) if node.fit_state else None,
                "formula": node.formula,
            }
        )
    return {
        "format_version": PROGRAM_FORMAT_VERSION,
        "train_rows": graph.train_rows,
        "roots": list(graph.root_names()),
        "root_ids": list(graph.roots),
        "nodes": derived,
    }


def replay_program(program: dict, data: Dataset) -> tuple[np.ndarray, list[int]]:
    """Materialize a stored program on a dataset without an FSTGraph.

    Returns (matrix, node ids in column order).  Operations are resolved
    by name against the current catalog, and derived nodes are evaluated
    in ascending id order, which the export format guarantees is
    topological.
    """
    try:
        roots = list(program["roots"])
        root_ids = [int(i) for i in program["root_ids"]]
        entries = list(program["nodes"])
    except (KeyError, TypeError) as exc:
        raise CorruptProgram(f"missing program field: {exc}") from None
    if tuple(data.names) != tuple(roots):
        raise SchemaMismatch(roots, data.names)

    columns: dict[int, np.ndarray] = {}
    for pos, rid in enumerate(root_ids):
        columns[rid] = np.asarray(data.column(pos), dtype=np.float64)
    for entry in sorted(entries, key=lambda e: int(e["id"])):
        try:
            op = operation_by_name(entry["op"])
            parents = [int(p) for p in entry["parents"]]
            nid = int(entry["id"])
        except (KeyError, TypeError, ValueError, UnknownOperation) as exc:
            raise CorruptProgram(f"bad program node: {exc}") from None
        for p in parents:
            if p not in columns:
                raise CorruptProgram(f"node {nid} references unknown parent {p}")
        if op.arity is Arity.UNARY:
            fit = FitState(op.name, dict(entry["fit"])) if entry.get("fit") else None
            if op.stateful and fit is None:
                raise CorruptProgram(f"stateful node {nid} lacks fit parameters")
            col, _ = apply_unary(op, columns[parents[0]], fit=fit)
        else:
            if len(parents) != 2:
                raise CorruptProgram(f"binary node {nid} has {len(parents)} parents")
            col = apply_binary(op, columns[parents[0]], columns[parents[1]])
        columns[nid] = col

    order = sorted(columns)
    return np.column_stack([columns[i] for i in order]), order


def to_dot(graph: FSTGraph) -> str:
    """GraphViz rendering: roots as boxes, derived nodes labeled by op."""
    ops_by_id = {op.id: op.name for op in default_operation_set()}
    lines = ["digraph fstgraph {", "  rankdir=LR;"]
    for nid in graph.node_ids():
        node = graph.nodes[nid]
        if node.is_root:
            lines.append(f'  n{nid} [shape=box, label="{node.name}"];')
        else:
            label = f"{ops_by_id[node.op_id]}#{nid}"
            lines.append(f'  n{nid} [shape=ellipse, label="{label}"];')
    for parent, child, op_id in graph.edges:
        lines.append(f'  n{parent} -> n{child} [label="{ops_by_id[op_id]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
