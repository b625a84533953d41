"""The outer training loop and its two baselines.

One exploration step: cluster the graph, let the head agent pick a source
cluster, the operation agent a transformation, and (for binary ones) the
operand agent a partner cluster; apply the transformation cluster-wide,
score the enriched table by cross-validation, reward the agents with the
metric delta plus a complexity term, train them from replay, and keep the
graph in check with the scheduled pruning strategy.  Node-wise mutual
information pruning runs during the opening share of training episodes,
snapshot backtracking for the rest and for the greedy test episodes.

Everything a run produces lands in one JSON-ready report: per-step
actions, metrics, rewards, prune events, per-phase wall times, and the
final held-out evaluation of the best graph found.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .agents import (
    AgentBundle,
    EncoderContext,
    EpsilonSchedule,
    OperationEmbedding,
    Transition,
    maybe_sync_targets,
    select_head,
    select_operand,
    select_operation,
    store_transition,
    train_step,
)
from .config import PipelineConfig
from .errors import ArityMismatch, FeatGraphError
from .graph import (
    FSTGraph,
    add_transform,
    init_graph,
    materialize,
    node_embeddings,
    restore,
    retain_nodes,
    snapshot,
    to_program,
    typed_neighbors,
)
from .cluster import cluster_graph
from .graph import AddStatus
from .metrics import cross_validate, make_evaluator, mutual_information, score
from .nn import RGCNEncoder, SGD, parameter_count, rgcn_forward
from .ops import Arity, EPS, OperationKind, default_operation_set
from .tabular import Dataset, SplitSpec, Task, split

PHASES = ("reward_estimation", "agent_decision", "graph_update", "pruning", "clustering")


def encoder_features(graph: FSTGraph) -> np.ndarray:
    """Node statistics compressed and standardised for the state encoder.

    Chained transformations can push column statistics across hundreds of
    orders of magnitude, which would saturate the Q networks. Each entry is
    mapped onto a signed log scale and every statistic is standardised over
    the current node set, so encoder inputs stay O(1) regardless of how
    extreme the engineered columns get.
    """
    raw = node_embeddings(graph)
    squashed = np.sign(raw) * np.log1p(np.abs(raw))
    centered = squashed - squashed.mean(axis=0)
    return centered / np.maximum(squashed.std(axis=0), EPS)

# Reported alongside our own counts for the default 32/64/7 geometry; a
# reference size for comparison, not an equality target.
REFERENCE_HEAD_ASSEMBLY = 53993


class PhaseTimer:
    """Accumulates wall time per pipeline phase."""

    def __init__(self):
        self.totals = {p: 0.0 for p in PHASES}

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] += time.perf_counter() - t0

    def take(self) -> dict:
        out = dict(self.totals)
        self.totals = {p: 0.0 for p in PHASES}
        return out


class GraphEvaluator:
    """Cross-validated metric of a graph's full feature set, memoized.

    The cache key is the set of node formulas, so a graph restored to an
    earlier state costs nothing to re-score and reruns are bit-identical.
    """

    def __init__(self, train: Dataset, config: PipelineConfig):
        self.train = train
        self.config = config
        self._cache: dict[frozenset, float] = {}

    def metric(self, graph: FSTGraph) -> float:
        key = frozenset(graph.nodes[i].formula for i in graph.node_ids())
        hit = self._cache.get(key)
        if hit is None:
            matrix = np.column_stack(
                [graph.nodes[i].train_column for i in graph.node_ids()]
            )
            hit = cross_validate(
                matrix,
                self.train.labels,
                self.train.task,
                self.config,
                folds=self.config.cv_folds,
                seed=self.config.seed,
            )
            self._cache[key] = hit
        return hit


@dataclass
class EpisodeState:
    """Graph plus the best-snapshot bookkeeping for one episode."""

    graph: FSTGraph
    metric: float
    episode_best: FSTGraph
    episode_best_metric: float
    global_best: FSTGraph
    global_best_metric: float


def default_cluster_k(node_count: int) -> int:
    return min(node_count, max(2, round(math.sqrt(node_count))))


def compute_reward(
    prev_metric: float, new_metric: float, graph: FSTGraph
) -> tuple[float, float, float]:
    """(performance delta, mean exp(-depth) complexity term, their sum)."""
    depths = np.array([n.depth for n in graph.nodes.values()], dtype=np.float64)
    r_c = float(np.exp(-depths).mean())
    r_p = new_metric - prev_metric
    return r_p, r_c, r_p + r_c


def assign_rewards(reward: float, acting_agents: int, mode: str = "same") -> float:
    """Per-agent reward value: identical by default, split when configured."""
    if acting_agents not in (2, 3):
        raise ArityMismatch("reward assignment", 2, acting_agents)
    if mode == "divided":
        return reward / acting_agents
    return reward


def apply_cluster_transformation(
    graph: FSTGraph,
    head_nodes: tuple[int, ...],
    op: OperationKind,
    operand_nodes: Optional[tuple[int, ...]],
    cap: int,
    guard: bool = True,
) -> list[int]:
    """Cluster-wide application of one operation.

    Unary: the operation hits every head node.  Binary: every (head,
    operand) pair in ascending id order.  Creation stops once cap new
    nodes exist; duplicates and rejected children are skipped silently
    and do not count toward the cap.
    """
    created: list[int] = []
    if op.arity is Arity.UNARY:
        if operand_nodes is not None:
            raise ArityMismatch(op.name, 1, 2)
        for nid in sorted(head_nodes):
            if len(created) >= cap:
                break
            res = add_transform(graph, op, (nid,), guard=guard)
            if res.status is AddStatus.ADDED:
                created.append(res.node_id)
        return created
    if operand_nodes is None:
        raise ArityMismatch(op.name, 2, 1)
    for h in sorted(head_nodes):
        if len(created) >= cap:
            break
        for t in sorted(operand_nodes):
            if len(created) >= cap:
                break
            res = add_transform(graph, op, (h, t), guard=guard)
            if res.status is AddStatus.ADDED:
                created.append(res.node_id)
    return created


def node_wise_prune(
    graph: FSTGraph,
    labels: np.ndarray,
    top_k: int,
    task: Task,
    bins: int = 20,
) -> FSTGraph:
    """Keep roots plus the top_k non-root nodes by label mutual information.

    Score ties break toward the older (smaller-id) node.  Descendants of
    dropped nodes are dropped too, so the survivor count can undershoot
    roots + top_k but never exceeds it.  Returns the same, mutated graph.
    """
    non_roots = [i for i in graph.node_ids() if not graph.nodes[i].is_root]
    if len(non_roots) <= top_k:
        return graph
    scored = sorted(
        non_roots,
        key=lambda i: (
            -mutual_information(graph.nodes[i].train_column, labels, task, bins),
            i,
        ),
    )
    retain_nodes(graph, set(scored[:top_k]))
    return graph


def step_backtrack(state: EpisodeState, node_cap: int) -> bool:
    """Restore the episode-best snapshot after a bad step.

    Bad means the current metric fell below the episode best or the graph
    outgrew the node cap.  A good step instead becomes the new episode
    best.  Returns whether a restore happened.
    """
    if state.metric < state.episode_best_metric or state.graph.node_count > node_cap:
        state.graph = restore(state.episode_best)
        state.metric = state.episode_best_metric
        return True
    state.episode_best = snapshot(state.graph)
    state.episode_best_metric = state.metric
    return False


@dataclass
class RunResult:
    """Everything a run hands to the CLI: the report plus live objects."""

    report: dict
    best_graph: FSTGraph
    train: Dataset
    test: Dataset
    checkpoints: Optional[dict] = None


def _spawn_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _dataset_summary(dataset: Dataset, train: Dataset, test: Dataset) -> dict:
    return {
        "rows": dataset.row_count,
        "features": dataset.feature_count,
        "task": dataset.task.value,
        "label": dataset.label_name,
        "train_rows": train.row_count,
        "test_rows": test.row_count,
    }


def _artifact_names(kind: str) -> dict:
    return {
        "report": "report.json",
        "graph": "graph.json",
        "dot": "graph.dot",
        "train_csv": "transformed_train.csv",
        "test_csv": "transformed_test.csv",
        "checkpoints": "checkpoints.npz" if kind == "training" else None,
    }


def evaluate_final(
    graph: FSTGraph,
    train: Dataset,
    test: Dataset,
    config: PipelineConfig,
) -> float:
    """Held-out metric of a graph: fit on materialized train, score test."""
    x_train = materialize(graph, train)
    x_test = materialize(graph, test)
    model = make_evaluator(config.evaluator, train.task, config, config.seed)
    model.fit(x_train, train.labels)
    pred = model.predict(x_test)
    return score(test.task, test.labels, pred, config.metric_averaging)


def _cluster_positions(graph: FSTGraph, cluster: tuple[int, ...]) -> np.ndarray:
    ids = graph.node_ids()
    pos = {nid: k for k, nid in enumerate(ids)}
    return np.array([pos[i] for i in cluster], dtype=np.int64)


def run_training(config: PipelineConfig, dataset: Dataset) -> RunResult:
    """Full agent-driven run; see the module docstring for the loop shape."""
    started = time.perf_counter()
    train, test = split(dataset, SplitSpec(config.train_fraction, config.seed))
    operations = default_operation_set()
    n_ops = len(operations)
    unary_ids = [i for i, op in enumerate(operations) if op.arity is Arity.UNARY]

    enc_seed, head_seed, op_seed, nd_seed, loop_seed = _spawn_seeds(config.seed, 5)
    encoder = RGCNEncoder(
        n_ops, dims=(7, config.rgcn_hidden, config.rgcn_out), seed=enc_seed
    )
    dim = config.rgcn_out
    head = AgentBundle.build(
        2 * dim, 1, config.predictor_hidden, head_seed,
        config.buffer_capacity, config.target_sync,
    )
    op_agent = AgentBundle.build(
        2 * dim, n_ops, config.predictor_hidden, op_seed,
        config.buffer_capacity, config.target_sync,
    )
    operand = AgentBundle.build(
        4 * dim, 1, config.predictor_hidden, nd_seed,
        config.buffer_capacity, config.target_sync,
    )
    embedding = OperationEmbedding(n_ops, dim)
    opt = SGD(config.learning_rate)
    enc_opt = SGD(config.learning_rate)
    rng = np.random.default_rng(loop_seed)

    evaluator = GraphEvaluator(train, config)
    roots_graph = init_graph(train)
    node_cap = config.node_cap or 4 * train.feature_count
    top_k = config.prune_top_k or 2 * train.feature_count
    total_train_steps = config.train_episodes * config.steps_per_episode
    schedule = EpsilonSchedule(
        config.epsilon_start, config.epsilon_end, max(total_train_steps, 1)
    )
    nodewise_episodes = math.ceil(config.prune_schedule_fraction * config.train_episodes)

    timer = PhaseTimer()
    with timer.phase("reward_estimation"):
        raw_metric = evaluator.metric(roots_graph)
    state = EpisodeState(
        graph=restore(roots_graph),
        metric=raw_metric,
        episode_best=snapshot(roots_graph),
        episode_best_metric=raw_metric,
        global_best=snapshot(roots_graph),
        global_best_metric=raw_metric,
    )

    steps_log: list[dict] = []
    pending: dict[str, Optional[Transition]] = {"head": None, "op": None, "operand": None}
    global_step = 0
    total_episodes = config.train_episodes + config.test_episodes

    for episode in range(total_episodes):
        training = episode < config.train_episodes
        backtracking = not training or episode >= nodewise_episodes
        phase_name = "train" if training else "test"

        if config.episode_start == "global_best":
            state.graph = restore(state.global_best)
        else:
            state.graph = restore(roots_graph)
        with timer.phase("reward_estimation"):
            state.metric = evaluator.metric(state.graph)
        if backtracking:
            state.episode_best = restore(state.global_best)
            state.episode_best_metric = state.global_best_metric
        else:
            state.episode_best = snapshot(state.graph)
            state.episode_best_metric = state.metric
        pending = {"head": None, "op": None, "operand": None}

        for step_no in range(config.steps_per_episode):
            epsilon = schedule.value(global_step) if training else config.epsilon_end
            record = {
                "episode": episode,
                "step": step_no,
                "phase": phase_name,
                "epsilon": round(epsilon, 6),
                "error": None,
                "head_cluster": None,
                "operation": None,
                "operand_cluster": None,
                "nodes_created": 0,
                "pruned": 0,
                "backtracked": False,
                "node_count": state.graph.node_count,
                "metric_before": state.metric,
                "metric_after": None,
                "reward_performance": None,
                "reward_complexity": None,
                "reward_total": None,
                "losses": {"head": None, "operation": None, "operand": None},
                "timings": None,
            }
            rollback = snapshot(state.graph)
            rollback_metric = state.metric
            try:
                with timer.phase("clustering"):
                    k = config.cluster_k or default_cluster_k(state.graph.node_count)
                    k = min(k, state.graph.node_count)
                    clustering = cluster_graph(state.graph, k, config.cluster_signal)

                with timer.phase("agent_decision"):
                    feats = encoder_features(state.graph)
                    neighbors = typed_neighbors(state.graph)
                    encoded, _ = rgcn_forward(encoder, feats, neighbors)
                    rep_graph = encoded.mean(axis=0)
                    positions = [
                        _cluster_positions(state.graph, c) for c in clustering.clusters
                    ]
                    cluster_reps = [encoded[p].mean(axis=0) for p in positions]
                    head_inputs = [
                        np.concatenate([rep, rep_graph]) for rep in cluster_reps
                    ]

                    if training and pending["head"] is not None:
                        pending["head"].candidates = list(head_inputs)
                        store_transition(head, pending["head"])
                        pending["head"] = None

                    head_idx, _ = select_head(
                        head, cluster_reps, rep_graph, epsilon, rng
                    )
                    op_input = np.concatenate([cluster_reps[head_idx], rep_graph])

                    if training and pending["op"] is not None:
                        pending["op"].candidates = [op_input.copy()]
                        store_transition(op_agent, pending["op"])
                        pending["op"] = None

                    chosen = select_operation(
                        op_agent, cluster_reps[head_idx], rep_graph,
                        operations, epsilon, rng,
                    )
                    operand_idx = None
                    operand_input = None
                    if chosen.arity is Arity.BINARY:
                        eligible = [
                            i for i in range(len(clustering.clusters))
                            if not (config.operand_excludes_head and i == head_idx)
                        ]
                        if not eligible:
                            # Single-cluster graph: a binary operation has no
                            # partner, so re-pick among the unary ones.
                            chosen = select_operation(
                                op_agent, cluster_reps[head_idx], rep_graph,
                                operations, epsilon, rng, allowed=unary_ids,
                            )
                        else:
                            op_vec = embedding.vector(chosen.id)
                            cand_inputs = [
                                np.concatenate(
                                    [cluster_reps[head_idx], rep_graph, op_vec,
                                     cluster_reps[i]]
                                )
                                for i in eligible
                            ]
                            if training and pending["operand"] is not None:
                                pending["operand"].candidates = [
                                    c.copy() for c in cand_inputs
                                ]
                                store_transition(operand, pending["operand"])
                                pending["operand"] = None
                            pick = select_operand(
                                operand, cluster_reps[head_idx], rep_graph,
                                op_vec, [cluster_reps[i] for i in eligible],
                                epsilon, rng,
                            )
                            operand_idx = eligible[pick]
                            operand_input = cand_inputs[pick]

                with timer.phase("graph_update"):
                    created = apply_cluster_transformation(
                        state.graph,
                        clustering.clusters[head_idx],
                        chosen,
                        clustering.clusters[operand_idx]
                        if operand_idx is not None
                        else None,
                        config.max_new_features_per_step,
                        guard=config.safe_guards,
                    )

                with timer.phase("reward_estimation"):
                    new_metric = evaluator.metric(state.graph)
                r_p, r_c, r_total = compute_reward(state.metric, new_metric, state.graph)
                acting = 3 if operand_idx is not None else 2
                per_agent = assign_rewards(r_total, acting, config.reward_split)

                record.update(
                    head_cluster=head_idx,
                    operation=chosen.name,
                    operand_cluster=operand_idx,
                    nodes_created=len(created),
                    metric_after=new_metric,
                    reward_performance=r_p,
                    reward_complexity=r_c,
                    reward_total=r_total,
                )

                if training:
                    pending["head"] = Transition(
                        inputs=head_inputs[head_idx],
                        reward=per_agent,
                        candidates=[],
                        terminal=False,
                        encoder_ctx=EncoderContext(
                            feats, neighbors, positions[head_idx]
                        ),
                    )
                    pending["op"] = Transition(
                        inputs=op_input,
                        reward=per_agent,
                        candidates=[],
                        terminal=False,
                        action_index=chosen.id,
                    )
                    if operand_idx is not None:
                        pending["operand"] = Transition(
                            inputs=operand_input,
                            reward=per_agent,
                            candidates=[],
                            terminal=False,
                            embed_ref=(chosen.id, 2 * dim),
                        )

                    with timer.phase("agent_decision"):
                        record["losses"]["head"] = train_step(
                            head, config.gamma, opt, rng, config.batch_size,
                            encoder=encoder, encoder_optimizer=enc_opt,
                        )
                        record["losses"]["operation"] = train_step(
                            op_agent, config.gamma, opt, rng, config.batch_size
                        )
                        record["losses"]["operand"] = train_step(
                            operand, config.gamma, opt, rng, config.batch_size,
                            op_embedding=embedding,
                        )
                        maybe_sync_targets(head)
                        maybe_sync_targets(op_agent)
                        if operand_idx is not None:
                            maybe_sync_targets(operand)

                if new_metric > state.global_best_metric:
                    state.global_best = snapshot(state.graph)
                    state.global_best_metric = new_metric

                with timer.phase("pruning"):
                    if not backtracking:
                        state.metric = new_metric
                        if state.graph.node_count > node_cap:
                            before = state.graph.node_count
                            node_wise_prune(
                                state.graph, train.labels, top_k, train.task,
                                config.mi_bins,
                            )
                            record["pruned"] = before - state.graph.node_count
                            with timer.phase("reward_estimation"):
                                state.metric = evaluator.metric(state.graph)
                    else:
                        state.metric = new_metric
                        record["backtracked"] = step_backtrack(state, node_cap)
            except FeatGraphError as exc:
                # A failed step leaves no trace on the graph.
                state.graph = rollback
                state.metric = rollback_metric
                record["error"] = f"{type(exc).__name__}: {exc}"

            record["global_best"] = state.global_best_metric
            record["timings"] = {k: round(v, 6) for k, v in timer.take().items()}
            steps_log.append(record)
            if training:
                global_step += 1

        if training:
            for name, bundle in (("head", head), ("op", op_agent), ("operand", operand)):
                tr = pending[name]
                if tr is not None:
                    tr.terminal = True
                    tr.candidates = []
                    store_transition(bundle, tr)
                    pending[name] = None

    with timer.phase("reward_estimation"):
        final_test = evaluate_final(state.global_best, train, test, config)
        raw_test = evaluate_final(roots_graph, train, test, config)
    trailing = timer.take()

    totals = {p: 0.0 for p in PHASES}
    for rec in steps_log:
        for p in PHASES:
            totals[p] += rec["timings"][p]
    for p in PHASES:
        totals[p] = round(totals[p] + trailing[p], 6)

    best = state.global_best
    parameters = {
        "encoder": parameter_count(encoder),
        "head_network": parameter_count(head.prediction),
        "operation_network": parameter_count(op_agent.prediction),
        "operand_network": parameter_count(operand.prediction),
        "operation_embedding": int(embedding.table.size),
        "head_assembly": parameter_count(encoder) + parameter_count(head.prediction),
        "reference_head_assembly": REFERENCE_HEAD_ASSEMBLY,
    }
    report = {
        "kind": "training",
        "config": config.to_dict(),
        "dataset": _dataset_summary(dataset, train, test),
        "operations": [op.name for op in operations],
        "steps": steps_log,
        "summary": {
            "train_cv_raw": raw_metric,
            "train_cv_best": state.global_best_metric,
            "test_metric_best_graph": final_test,
            "test_metric_raw": raw_test,
            "best_node_count": best.node_count,
            "best_formulas": [best.nodes[i].formula for i in best.node_ids()],
            "parameters": parameters,
            "evaluations": len(evaluator._cache),
            "timings": totals,
            "wall_time_total": round(time.perf_counter() - started, 6),
        },
        "artifacts": _artifact_names("training"),
    }

    checkpoints = {}
    for prefix, net in (
        ("encoder", encoder),
        ("head_pred", head.prediction),
        ("head_target", head.target),
        ("operation_pred", op_agent.prediction),
        ("operation_target", op_agent.target),
        ("operand_pred", operand.prediction),
        ("operand_target", operand.target),
    ):
        for name, arr in net.named_parameters().items():
            checkpoints[f"{prefix}.{name}"] = arr.copy()
    checkpoints["operation_embedding.table"] = embedding.table.copy()

    return RunResult(report, best, train, test, checkpoints)


def _baseline_run(config: PipelineConfig, dataset: Dataset, kind: str) -> RunResult:
    started = time.perf_counter()
    train, test = split(dataset, SplitSpec(config.train_fraction, config.seed))
    operations = default_operation_set()
    (loop_seed,) = _spawn_seeds(config.seed, 1)
    rng = np.random.default_rng(loop_seed)
    evaluator = GraphEvaluator(train, config)
    roots_graph = init_graph(train)
    node_cap = config.node_cap or 4 * train.feature_count
    top_k = config.prune_top_k or 2 * train.feature_count

    timer = PhaseTimer()
    with timer.phase("reward_estimation"):
        raw_metric = evaluator.metric(roots_graph)
    graph = restore(roots_graph)
    metric = raw_metric
    best = snapshot(roots_graph)
    best_metric = raw_metric
    steps_log: list[dict] = []
    total_episodes = config.train_episodes + config.test_episodes

    for episode in range(total_episodes):
        if config.episode_start == "global_best":
            graph = restore(best)
        else:
            graph = restore(roots_graph)
        with timer.phase("reward_estimation"):
            metric = evaluator.metric(graph)

        for step_no in range(config.steps_per_episode):
            record = {
                "episode": episode,
                "step": step_no,
                "phase": "baseline",
                "epsilon": None,
                "error": None,
                "head_cluster": None,
                "operation": None,
                "operand_cluster": None,
                "nodes_created": 0,
                "pruned": 0,
                "backtracked": False,
                "node_count": graph.node_count,
                "metric_before": metric,
                "metric_after": None,
                "reward_performance": None,
                "reward_complexity": None,
                "reward_total": None,
                "losses": {"head": None, "operation": None, "operand": None},
                "timings": None,
            }
            rollback = snapshot(graph)
            rollback_metric = metric
            try:
                op = operations[int(rng.integers(len(operations)))]
                ids = graph.node_ids()
                with timer.phase("graph_update"):
                    if kind == "rdg":
                        if op.arity is Arity.UNARY:
                            parents = (ids[int(rng.integers(len(ids)))],)
                        else:
                            parents = (
                                ids[int(rng.integers(len(ids)))],
                                ids[int(rng.integers(len(ids)))],
                            )
                        res = add_transform(graph, op, parents, guard=config.safe_guards)
                        created = [res.node_id] if res.status is AddStatus.ADDED else []
                    else:  # erg: hit every node at once
                        created = []
                        for nid in ids:
                            if op.arity is Arity.UNARY:
                                parents = (nid,)
                            else:
                                parents = (nid, ids[int(rng.integers(len(ids)))])
                            res = add_transform(
                                graph, op, parents, guard=config.safe_guards
                            )
                            if res.status is AddStatus.ADDED:
                                created.append(res.node_id)

                with timer.phase("reward_estimation"):
                    new_metric = evaluator.metric(graph)
                record.update(
                    operation=op.name,
                    nodes_created=len(created),
                    metric_after=new_metric,
                )
                if new_metric > best_metric:
                    best = snapshot(graph)
                    best_metric = new_metric

                with timer.phase("pruning"):
                    if graph.node_count > node_cap:
                        before = graph.node_count
                        if kind == "rdg":
                            non_roots = [
                                i for i in graph.node_ids()
                                if not graph.nodes[i].is_root
                            ]
                            keep_n = max(node_cap - len(graph.roots), 0)
                            picks = rng.choice(
                                len(non_roots), size=keep_n, replace=False
                            )
                            retain_nodes(graph, {non_roots[int(i)] for i in picks})
                        else:
                            node_wise_prune(
                                graph, train.labels, top_k, train.task, config.mi_bins
                            )
                        record["pruned"] = before - graph.node_count
                        with timer.phase("reward_estimation"):
                            new_metric = evaluator.metric(graph)
                metric = new_metric
            except FeatGraphError as exc:
                graph = rollback
                metric = rollback_metric
                record["error"] = f"{type(exc).__name__}: {exc}"

            record["global_best"] = best_metric
            record["timings"] = {k: round(v, 6) for k, v in timer.take().items()}
            steps_log.append(record)

    with timer.phase("reward_estimation"):
        final_test = evaluate_final(best, train, test, config)
        raw_test = evaluate_final(roots_graph, train, test, config)
    trailing = timer.take()
    totals = {p: 0.0 for p in PHASES}
    for rec in steps_log:
        for p in PHASES:
            totals[p] += rec["timings"][p]
    for p in PHASES:
        totals[p] = round(totals[p] + trailing[p], 6)

    report = {
        "kind": kind,
        "config": config.to_dict(),
        "dataset": _dataset_summary(dataset, train, test),
        "operations": [op.name for op in operations],
        "steps": steps_log,
        "summary": {
            "train_cv_raw": raw_metric,
            "train_cv_best": best_metric,
            "test_metric_best_graph": final_test,
            "test_metric_raw": raw_test,
            "best_node_count": best.node_count,
            "best_formulas": [best.nodes[i].formula for i in best.node_ids()],
            "parameters": None,
            "evaluations": len(evaluator._cache),
            "timings": totals,
            "wall_time_total": round(time.perf_counter() - started, 6),
        },
        "artifacts": _artifact_names(kind),
    }
    return RunResult(report, best, train, test, None)


def run_baseline_rdg(config: PipelineConfig, dataset: Dataset) -> RunResult:
    """Random generation: one random op on random parents per step."""
    return _baseline_run(config, dataset, "rdg")


def run_baseline_erg(config: PipelineConfig, dataset: Dataset) -> RunResult:
    """Expand-reduce: one random op applied to every node, then MI pruning."""
    return _baseline_run(config, dataset, "erg")
