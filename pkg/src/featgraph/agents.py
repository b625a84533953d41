"""Cascading Q-learning agents.

Three agents act in sequence within one exploration step: the head agent
scores candidate clusters, the operation agent scores the fifteen
transformations, and (for binary operations) the operand agent scores
partner clusters.  Each agent is a dual-network Q-learner: a prediction
net trained on replayed transitions against a periodically synced frozen
target net.

Gradient flow is deliberately asymmetric: only the head agent's loss
reaches back into the graph encoder (its transitions carry the raw node
features needed to recompute the forward pass), and only the operand
agent's loss trains the operation embedding table.  The other inputs are
stored as constants, target-side candidates always are.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NoCandidates, NoClusters
from .nn import (
    DenseNet,
    RGCNEncoder,
    SGD,
    copy_parameters,
    dense_backward,
    dense_forward,
    rgcn_backward,
    rgcn_forward,
)
from .ops import OperationKind


@dataclass
class EpsilonSchedule:
    """Linear exploration decay, clamped to [end, start]."""

    start: float = 0.9
    end: float = 0.1
    horizon: int = 1

    def value(self, step: int) -> float:
        if self.horizon <= 1:
            return self.end if step > 0 else self.start
        frac = min(max(step / (self.horizon - 1), 0.0), 1.0)
        return self.start + (self.end - self.start) * frac


@dataclass
class EncoderContext:
    """Raw inputs of one graph encoding, kept so the head agent can
    recompute its state vector with the encoder's current weights."""

    features: np.ndarray
    neighbors: list[list[tuple[int, int]]]
    member_positions: np.ndarray


@dataclass
class Transition:
    """One replayable decision.

    inputs is the exact vector the prediction net consumed.  candidates
    holds the input vectors of every action available at the next step of
    this agent (empty only for terminal transitions); the target net's max
    over them forms the TD target.  action_index picks the scored output
    component for vector-output nets and is None for scalar nets.
    """

    inputs: np.ndarray
    reward: float
    candidates: list[np.ndarray]
    terminal: bool
    action_index: Optional[int] = None
    encoder_ctx: Optional[EncoderContext] = None
    embed_ref: Optional[tuple[int, int]] = None  # (op id, offset into inputs)


class OperationEmbedding:
    """Learned per-operation vectors, one row per catalog entry.

    Rows start one-hot (orthogonal) and are updated by the operand
    agent's gradients, so the representation drifts from the identity
    toward whatever the operand net finds useful.
    """

    def __init__(self, n_operations: int, dim: int = 64):
        if n_operations > dim:
            raise ValueError(f"embedding dim {dim} cannot one-hot {n_operations} rows")
        self.table = np.eye(dim, dtype=np.float64)[:n_operations].copy()

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    def vector(self, op_id: int) -> np.ndarray:
        return self.table[op_id]


@dataclass
class AgentBundle:
    """One agent's learning state: dual nets, replay buffer, sync counter."""

    prediction: DenseNet
    target: DenseNet
    buffer: deque = field(default_factory=lambda: deque(maxlen=16))
    sync_every: int = 10
    steps_since_sync: int = 0

    @classmethod
    def build(
        cls,
        input_dim: int,
        output_dim: int,
        hidden: int,
        seed: int,
        buffer_capacity: int = 16,
        sync_every: int = 10,
    ) -> "AgentBundle":
        dims = [input_dim, hidden, output_dim]
        prediction = DenseNet(dims, seed=seed)
        target = DenseNet(dims, seed=seed)
        copy_parameters(prediction, target)
        return cls(
            prediction=prediction,
            target=target,
            buffer=deque(maxlen=buffer_capacity),
            sync_every=sync_every,
        )


def _greedy_pick(scores: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy index selection; ties go to the lowest index."""
    if rng.random() < epsilon:
        return int(rng.integers(len(scores)))
    return int(np.argmax(scores))


def select_head(
    bundle: AgentBundle,
    cluster_reps: list[np.ndarray],
    graph_rep: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
) -> tuple[int, float]:
    """Score every cluster as Q(rep_cluster + rep_graph) and pick one.

    Returns (cluster index, Q-value of the choice).
    """
    if not cluster_reps:
        raise NoClusters("cannot select a head cluster from none")
    scores = np.empty(len(cluster_reps))
    for i, rep in enumerate(cluster_reps):
        out, _ = dense_forward(bundle.prediction, np.concatenate([rep, graph_rep]))
        scores[i] = out[0]
    idx = _greedy_pick(scores, epsilon, rng)
    return idx, float(scores[idx])


def select_operation(
    bundle: AgentBundle,
    head_rep: np.ndarray,
    graph_rep: np.ndarray,
    operations: list[OperationKind],
    epsilon: float,
    rng: np.random.Generator,
    allowed: Optional[list[int]] = None,
) -> OperationKind:
    """One forward pass scores all operations; ε-greedy over allowed ids.

    allowed restricts the choice to a subset of catalog indices (used when
    a binary operation is impossible); None means everything.
    """
    q, _ = dense_forward(bundle.prediction, np.concatenate([head_rep, graph_rep]))
    indices = list(range(len(operations))) if allowed is None else list(allowed)
    if not indices:
        raise NoCandidates("no operations permitted")
    sub = q[indices]
    pick = indices[_greedy_pick(sub, epsilon, rng)]
    return operations[pick]


def select_operand(
    bundle: AgentBundle,
    head_rep: np.ndarray,
    graph_rep: np.ndarray,
    op_vector: np.ndarray,
    candidate_reps: list[np.ndarray],
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Pick the partner cluster for a binary operation.

    Candidates are scored on head + graph + operation + candidate; the
    caller decides which clusters are eligible.
    """
    if not candidate_reps:
        raise NoCandidates("no operand clusters available")
    prefix = np.concatenate([head_rep, graph_rep, op_vector])
    scores = np.empty(len(candidate_reps))
    for i, rep in enumerate(candidate_reps):
        out, _ = dense_forward(bundle.prediction, np.concatenate([prefix, rep]))
        scores[i] = out[0]
    return _greedy_pick(scores, epsilon, rng)


def store_transition(bundle: AgentBundle, transition: Transition) -> None:
    """FIFO append; the deque drops the oldest entry at capacity."""
    bundle.buffer.append(transition)


def _target_value(bundle: AgentBundle, transition: Transition, gamma: float) -> float:
    if transition.terminal:
        return transition.reward
    best = -np.inf
    for cand in transition.candidates:
        out, _ = dense_forward(bundle.target, cand)
        best = max(best, float(out.max()))
    return transition.reward + gamma * best

def _head_input(encoder: RGCNEncoder, ctx: EncoderContext):
    """Recompute the head state vector through the current encoder."""
    h, cache = rgcn_forward(encoder, ctx.features, ctx.neighbors)
    rep_c = h[ctx.member_positions].mean(axis=0)
    rep_v = h.mean(axis=0)
    return np.concatenate([rep_c, rep_v]), (h, cache)


def train_step(
    bundle: AgentBundle,
    gamma: float,
    optimizer: SGD,
    rng: np.random.Generator,
    batch_size: int = 8,
    encoder: Optional[RGCNEncoder] = None,
    encoder_optimizer: Optional[SGD] = None,
    op_embedding: Optional[OperationEmbedding] = None,
) -> Optional[float]:
    """One squared-TD-error batch update of the prediction network.

    Samples batch_size transitions uniformly without replacement; returns
    the mean loss, or None when the buffer is still too small.  When
    encoder is given, transitions carrying an EncoderContext are pushed
    through it afresh and the input gradient flows into the encoder's
    weights.  When op_embedding is given, transitions carrying an
    embed_ref have that slice of their input re-read from (and their
    gradient applied to) the embedding table.
    """
    if len(bundle.buffer) < batch_size:
        return None
    picks = rng.choice(len(bundle.buffer), size=batch_size, replace=False)
    batch = [bundle.buffer[int(i)] for i in picks]

    param_grads = [np.zeros_like(p) for p in bundle.prediction.parameters()]
    encoder_grads = (
        [np.zeros_like(p) for p in encoder.parameters()] if encoder is not None else None
    )
    embed_grads = (
        np.zeros_like(op_embedding.table) if op_embedding is not None else None
    )
    total = 0.0
    scale = 1.0 / batch_size
    for tr in batch:
        enc_cache = None
        if tr.encoder_ctx is not None and encoder is not None:
            x, enc_cache = _head_input(encoder, tr.encoder_ctx)
        elif tr.embed_ref is not None and op_embedding is not None:
            op_id, offset = tr.embed_ref
            x = tr.inputs.copy()
            x[offset : offset + op_embedding.dim] = op_embedding.table[op_id]
        else:
            x = tr.inputs
        out, cache = dense_forward(bundle.prediction, x)
        slot = tr.action_index if tr.action_index is not None else 0
        q = float(out[slot])
        target = _target_value(bundle, tr, gamma)
        diff = q - target
        total += diff * diff

        upstream = np.zeros(bundle.prediction.output_dim)
        upstream[slot] = 2.0 * diff * scale
        grads, d_input = dense_backward(bundle.prediction, cache, upstream)
        for acc, g in zip(param_grads, grads):
            acc += g
        if enc_cache is not None:
            h, rcache = enc_cache
            n = h.shape[0]
            members = tr.encoder_ctx.member_positions
            dim = encoder.output_dim
            d_h = np.tile(d_input[dim:] / n, (n, 1))
            d_h[members] += d_input[:dim] / len(members)
            for acc, g in zip(encoder_grads, rgcn_backward(encoder, rcache, d_h)):
                acc += g
        elif tr.embed_ref is not None and embed_grads is not None:
            op_id, offset = tr.embed_ref
            embed_grads[op_id] += d_input[offset : offset + op_embedding.dim]

    optimizer.step(bundle.prediction.parameters(), param_grads)
    if encoder_grads is not None and encoder_optimizer is not None:
        encoder_optimizer.step(encoder.parameters(), encoder_grads)
    if embed_grads is not None:
        optimizer.step([op_embedding.table], [embed_grads])
    return total / batch_size


def maybe_sync_targets(bundle: AgentBundle) -> bool:
    """Count one exploration step; copy prediction into target on schedule."""
    bundle.steps_since_sync += 1
    if bundle.steps_since_sync >= bundle.sync_every:
        copy_parameters(bundle.prediction, bundle.target)
        bundle.steps_since_sync = 0
        return True
    return False
