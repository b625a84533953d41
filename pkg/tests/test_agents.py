"""Q-learning plumbing: schedule, replay buffer, target sync, selection,
and the TD update, ending with a toy-MDP control check."""

import numpy as np
import pytest

from featgraph.agents import (
    AgentBundle,
    EncoderContext,
    EpsilonSchedule,
    OperationEmbedding,
    Transition,
    _greedy_pick,
    maybe_sync_targets,
    select_head,
    select_operand,
    select_operation,
    store_transition,
    train_step,
)
from featgraph.errors import NoCandidates, NoClusters
from featgraph.nn import (
    SGD,
    DenseNet,
    RGCNEncoder,
    copy_parameters,
    dense_forward,
    rgcn_forward,
)
from featgraph.ops import Arity, default_operation_set


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def test_epsilon_schedule_linear():
    sched = EpsilonSchedule(0.9, 0.1, 5)
    assert sched.value(0) == pytest.approx(0.9)
    assert sched.value(2) == pytest.approx(0.5)
    assert sched.value(4) == pytest.approx(0.1)
    assert sched.value(100) == pytest.approx(0.1)  # clamped past the horizon


def test_operation_embedding_one_hot_init():
    emb = OperationEmbedding(4, dim=6)
    assert emb.table.shape == (4, 6)
    assert np.array_equal(emb.table[:, :4], np.eye(4))
    assert np.array_equal(emb.vector(2), emb.table[2])
    with pytest.raises(ValueError):
        OperationEmbedding(8, dim=4)


def test_bundle_build_targets_start_synced():
    bundle = AgentBundle.build(input_dim=6, output_dim=2, hidden=5, seed=0)
    for p, t in zip(bundle.prediction.parameters(), bundle.target.parameters()):
        assert np.array_equal(p, t)
        assert p is not t


def test_buffer_is_fifo_with_capacity():
    bundle = AgentBundle.build(
        input_dim=2, output_dim=1, hidden=3, seed=0, buffer_capacity=4
    )
    for i in range(6):
        store_transition(
            bundle,
            Transition(inputs=np.array([float(i), 0.0]), reward=float(i),
                       candidates=[], terminal=True),
        )
    assert len(bundle.buffer) == 4
    assert [tr.reward for tr in bundle.buffer] == [2.0, 3.0, 4.0, 5.0]


def test_greedy_pick_exploit_and_explore():
    scores = np.array([0.1, 2.0, -1.0])
    rng = np.random.default_rng(0)
    picks = {_greedy_pick(scores, 0.0, rng) for _ in range(20)}
    assert picks == {1}
    rng = np.random.default_rng(1)
    explored = {_greedy_pick(scores, 1.0, rng) for _ in range(200)}
    assert explored == {0, 1, 2}


def test_select_head_greedy_argmax():
    bundle = AgentBundle.build(input_dim=4, output_dim=1, hidden=6, seed=0)
    reps = [np.zeros(2), np.ones(2), np.full(2, -1.0)]
    graph_rep = np.ones(2) * 0.5
    rng = np.random.default_rng(0)
    idx, q = select_head(bundle, reps, graph_rep, 0.0, rng)
    scores = [
        dense_forward(bundle.prediction, np.concatenate([r, graph_rep]))[0][0]
        for r in reps
    ]
    assert idx == int(np.argmax(scores))
    assert q == pytest.approx(max(scores))
    with pytest.raises(NoClusters):
        select_head(bundle, [], graph_rep, 0.0, rng)


def test_select_operation_respects_allowed():
    ops = default_operation_set()
    bundle = AgentBundle.build(input_dim=4, output_dim=len(ops), hidden=6, seed=0)
    rng = np.random.default_rng(0)
    unary_ids = [op.id for op in ops if op.arity is Arity.UNARY]
    for _ in range(10):
        chosen = select_operation(
            bundle, np.ones(2), np.ones(2), ops, 1.0, rng, allowed=unary_ids
        )
        assert chosen.arity is Arity.UNARY
    with pytest.raises(NoCandidates):
        select_operation(bundle, np.ones(2), np.ones(2), ops, 0.0, rng, allowed=[])


def test_select_operand_prefers_higher_q():
    bundle = AgentBundle.build(input_dim=8, output_dim=1, hidden=6, seed=1)
    rng = np.random.default_rng(0)
    cands = [np.zeros(2), np.ones(2) * 3.0]
    pick = select_operand(
        bundle, np.ones(2), np.ones(2), np.ones(2), cands, 0.0, rng
    )
    scores = [
        dense_forward(
            bundle.prediction,
            np.concatenate([np.ones(2), np.ones(2), np.ones(2), c]),
        )[0][0]
        for c in cands
    ]
    assert pick == int(np.argmax(scores))
    with pytest.raises(NoCandidates):
        select_operand(bundle, np.ones(2), np.ones(2), np.ones(2), [], 0.0, rng)


def test_sync_happens_on_schedule():
    bundle = AgentBundle.build(
        input_dim=3, output_dim=1, hidden=4, seed=0, sync_every=3
    )
    bundle.prediction.weights[0][0, 0] += 1.0
    assert not maybe_sync_targets(bundle)
    assert not maybe_sync_targets(bundle)
    assert not np.array_equal(
        bundle.prediction.weights[0], bundle.target.weights[0]
    )
    assert maybe_sync_targets(bundle)  # third call lands the copy
    assert np.array_equal(bundle.prediction.weights[0], bundle.target.weights[0])
    assert bundle.steps_since_sync == 0


def test_train_step_waits_for_full_batch():
    bundle = AgentBundle.build(input_dim=2, output_dim=1, hidden=3, seed=0)
    store_transition(
        bundle, Transition(np.zeros(2), 1.0, [], True)
    )
    assert train_step(bundle, 0.9, SGD(0.01), np.random.default_rng(0), 8) is None


def test_train_step_regresses_to_terminal_reward():
    # With fixed terminal transitions the TD target is the reward itself;
    # enough updates must drive the Q values onto it.
    rng = np.random.default_rng(0)
    bundle = AgentBundle.build(
        input_dim=3, output_dim=1, hidden=8, seed=0, buffer_capacity=4
    )
    xs = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])]
    rs = [2.0, -1.0]
    for x, r in zip(xs, rs):
        store_transition(bundle, Transition(x, r, [], True))
        store_transition(bundle, Transition(x, r, [], True))
    opt = SGD(0.05)
    losses = []
    for _ in range(300):
        losses.append(train_step(bundle, 0.9, opt, rng, batch_size=4))
    assert losses[-1] < losses[0]
    assert losses[-1] < 1e-3
    for x, r in zip(xs, rs):
        out, _ = dense_forward(bundle.prediction, x)
        assert out[0] == pytest.approx(r, abs=0.05)


def test_train_step_bootstraps_from_target_net():
    # Non-terminal target is r + gamma * best candidate Q under the target
    # network; with one transition and one update the new prediction must
    # move toward exactly that number.
    bundle = AgentBundle.build(input_dim=2, output_dim=1, hidden=4, seed=3,
                               buffer_capacity=2)
    cand = np.array([0.3, -0.2])
    tr = Transition(np.array([1.0, 1.0]), 0.5, [cand], False)
    store_transition(bundle, tr)
    gamma = 0.8
    t_out, _ = dense_forward(bundle.target, cand)
    target = 0.5 + gamma * float(t_out.max())
    before, _ = dense_forward(bundle.prediction, tr.inputs)
    loss = train_step(bundle, gamma, SGD(0.01), np.random.default_rng(0), 1)
    assert loss == pytest.approx((float(before[0]) - target) ** 2)
    after, _ = dense_forward(bundle.prediction, tr.inputs)
    assert abs(float(after[0]) - target) < abs(float(before[0]) - target)


def test_encoder_gradient_flows_through_head_input():
    rng = np.random.default_rng(0)
    enc = RGCNEncoder(relations=3, dims=(4, 6, 5), seed=1)
    feats = rng.normal(size=(5, 4))
    nbrs = [[(0, 1), (2, 3)], [(0, 0)], [(1, 4)], [(0, 4), (1, 2)], []]
    members = np.array([1, 3])
    bundle = AgentBundle.build(input_dim=10, output_dim=1, hidden=8, seed=2,
                               buffer_capacity=4, sync_every=1000)
    reward = 0.7
    store_transition(
        bundle,
        Transition(np.zeros(10), reward, [], True,
                   encoder_ctx=EncoderContext(feats, nbrs, members)),
    )
    frozen = DenseNet([10, 8, 1], seed=99)
    copy_parameters(bundle.prediction, frozen)

    def loss():
        h, _ = rgcn_forward(enc, feats, nbrs)
        x = np.concatenate([h[members].mean(axis=0), h.mean(axis=0)])
        out, _ = dense_forward(frozen, x)
        return (float(out[0]) - reward) ** 2

    lr = 0.01
    before = [p.copy() for p in enc.parameters()]
    train_step(bundle, 0.9, SGD(lr), np.random.default_rng(3), batch_size=1,
               encoder=enc, encoder_optimizer=SGD(lr))
    implied = [(b - p) / lr for b, p in zip(before, enc.parameters())]
    for p, b in zip(enc.parameters(), before):
        p[...] = b

    eps = 1e-6
    for li, p in enumerate(enc.parameters()):
        flat = p.reshape(-1)
        idx = np.random.default_rng(li).choice(flat.size, size=20, replace=False)
        for i in idx:
            keep = flat[i]
            flat[i] = keep + eps
            up = loss()
            flat[i] = keep - eps
            down = loss()
            flat[i] = keep
            fd = (up - down) / (2 * eps)
            assert rel_err(fd, implied[li].reshape(-1)[i]) <= 1e-4


def test_embedding_gradient_flows_through_operand_input():
    emb = OperationEmbedding(4, dim=6)
    emb.table[:] = np.random.default_rng(5).normal(size=emb.table.shape)
    bundle = AgentBundle.build(input_dim=21, output_dim=1, hidden=8, seed=7,
                               buffer_capacity=4, sync_every=1000)
    x0 = np.random.default_rng(6).normal(size=21)
    store_transition(
        bundle, Transition(x0, -0.3, [], True, embed_ref=(2, 10))
    )
    frozen = DenseNet([21, 8, 1], seed=55)
    copy_parameters(bundle.prediction, frozen)

    def loss():
        x = x0.copy()
        x[10:16] = emb.table[2]
        out, _ = dense_forward(frozen, x)
        return (float(out[0]) + 0.3) ** 2

    lr = 0.01
    before = emb.table.copy()
    train_step(bundle, 0.9, SGD(lr), np.random.default_rng(8), batch_size=1,
               op_embedding=emb)
    implied = (before - emb.table) / lr
    emb.table[:] = before
    eps = 1e-6
    for i in range(4):
        for j in range(6):
            keep = emb.table[i, j]
            emb.table[i, j] = keep + eps
            up = loss()
            emb.table[i, j] = keep - eps
            down = loss()
            emb.table[i, j] = keep
            fd = (up - down) / (2 * eps)
            assert rel_err(fd, implied[i, j]) <= 1e-4
    # Rows other than the referenced one stay untouched.
    assert np.allclose(implied[0], 0.0) and np.allclose(implied[3], 0.0)


# Two-state control problem solved exactly by value iteration.  Staying in
# s0 pays 1 immediately, but the optimal policy gives that up, hops to s1,
# and harvests 6 on the way back, so greedy-on-Q has to actually learn.
MDP = {(0, 0): (1.0, 0), (0, 1): (0.0, 1), (1, 0): (6.0, 0), (1, 1): (0.0, 1)}
GAMMA = 0.5


def value_iteration_policy():
    q = np.zeros((2, 2))
    for _ in range(200):
        v = q.max(axis=1)
        q = np.array(
            [
                [MDP[(s, a)][0] + GAMMA * v[MDP[(s, a)][1]] for a in (0, 1)]
                for s in (0, 1)
            ]
        )
    return q.argmax(axis=1), q


def test_toy_mdp_policy_matches_value_iteration_all_seeds():
    oracle_policy, oracle_q = value_iteration_policy()
    assert oracle_policy.tolist() == [1, 0]
    assert np.allclose(oracle_q, [[3.0, 4.0], [8.0, 4.0]])

    s_hot, a_hot = np.eye(2), np.eye(2)

    def encode(s, a):
        return np.concatenate([s_hot[s], a_hot[a]])

    for seed in range(5):
        rng = np.random.default_rng(seed)
        bundle = AgentBundle.build(input_dim=4, output_dim=1, hidden=16,
                                   seed=seed, buffer_capacity=16, sync_every=10)
        sched = EpsilonSchedule(0.9, 0.1, 500)
        opt = SGD(0.01)
        state = 0
        for t in range(500):
            eps = sched.value(t)
            scores = np.array(
                [
                    dense_forward(bundle.prediction, encode(state, a))[0][0]
                    for a in (0, 1)
                ]
            )
            action = _greedy_pick(scores, eps, rng)
            reward, nxt = MDP[(state, action)]
            store_transition(
                bundle,
                Transition(encode(state, action), reward,
                           [encode(nxt, 0), encode(nxt, 1)], False),
            )
            train_step(bundle, GAMMA, opt, rng, batch_size=8)
            maybe_sync_targets(bundle)
            state = nxt
        learned = [
            int(
                np.argmax(
                    [
                        dense_forward(bundle.prediction, encode(s, a))[0][0]
                        for a in (0, 1)
                    ]
                )
            )
            for s in (0, 1)
        ]
        assert learned == oracle_policy.tolist(), f"seed {seed} learned {learned}"
