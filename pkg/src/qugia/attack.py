"""Query-based graph injection attack.

One node is injected per victim: edges go to the victim and a random
subset of its test-set neighbors, then the injected features are searched
by flipping a fixed number K of dimensions to their boundary values. The
flip mask is resampled from a Dirichlet-categorical posterior whose
concentrations accumulate per-dimension importance/visit statistics, with
a power-decayed exploration fraction. A candidate is kept only when it
strictly lowers the margin loss, so the accepted loss sequence is
non-increasing. Leftover edge budget is spent on the recorded
(injected, still-correct-target) pairs closest to the decision boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .graph import (
    ConstraintSpec,
    Graph,
    GraphError,
    InjectionPatch,
    compose,
    validate_constraints,
    test_neighbor_score,
)


class AttackError(RuntimeError):
    """Attack cannot proceed (bad budget, empty test set, ...)."""


@dataclass
class AttackConfig:
    flip_budget: int | None = None     # K; None derives max(1, ceil(0.02 * d))
    max_iters: int = 200               # T, search iterations per injected node
    decay_init: float = 1.0            # A
    decay_base: float = 0.97           # B
    gamma: float = 0.05                # margin confidence
    neighbor_edges: int = 3            # k, extra edges into the victim's test neighbors
    rng_seed: int = 0
    use_true_labels: bool = False      # default: attack the model's own clean predictions
    eq13_flip: bool = False            # ablation: reward improving instead of non-improving flips

    def __post_init__(self):
        if self.flip_budget is not None and self.flip_budget < 1:
            raise AttackError("flip budget must be >= 1")
        if self.max_iters < 1:
            raise AttackError("max_iters must be >= 1")
        if not 0.0 < self.decay_base < 1.0:
            raise AttackError("decay base must be in (0, 1)")
        if self.decay_init <= 0:
            raise AttackError("decay init must be > 0")

    def resolved_flip_budget(self, feature_dim: int) -> int:
        if self.flip_budget is not None:
            return self.flip_budget
        return max(1, math.ceil(0.02 * feature_dim))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SearchState:
    """Per-victim Bayesian search state over feature dimensions."""

    mask: np.ndarray        # s, binary, popcount K
    alpha: np.ndarray       # Dirichlet concentrations, >= 1
    importance: np.ndarray  # q
    visits: np.ndarray      # v
    iteration: int = 0
    best_loss: float = np.inf
    lambda_t: float = 1.0

    @classmethod
    def initial(cls, mask: np.ndarray) -> "SearchState":
        d = len(mask)
        return cls(mask=mask.copy(), alpha=np.ones(d),
                   importance=np.zeros(d), visits=np.zeros(d))

    def theta(self) -> np.ndarray:
        return self.alpha / self.alpha.sum()


@dataclass
class TripletRecord:
    src: int     # injected node index (patch-local until run_attack remaps)
    dst: int     # original node id, still correctly classified when recorded
    score: float


def cw_loss(logits_row: np.ndarray, true_label: int, gamma: float) -> float:
    """Margin loss max(-gamma, f_y - max_{c != y} f_c)."""
    row = np.asarray(logits_row, dtype=np.float64)
    if row.shape[0] < 2:
        raise AttackError("margin loss needs at least two classes")
    others = np.delete(row, true_label)
    return float(max(-gamma, row[true_label] - others.max()))


def attack_loss(logits: np.ndarray, targets, labels: np.ndarray,
                gamma: float) -> float:
    """Summed margin loss over the victim and its test neighbors."""
    return float(sum(cw_loss(logits[j], labels[j], gamma) for j in targets))


@dataclass
class VictimQueue:
    """Test nodes scored by their test-neighbor counts, highest first."""

    node_ids: np.ndarray
    scores: np.ndarray
    attacked: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.attacked is None:
            self.attacked = np.zeros(len(self.node_ids), dtype=bool)
        self._pos = {int(u): i for i, u in enumerate(self.node_ids)}

    def ordered(self) -> list[int]:
        order = np.lexsort((self.node_ids, -self.scores))
        return [int(self.node_ids[i]) for i in order]

    def pop_best(self, eligible) -> int | None:
        """Highest-scored unattacked node passing ``eligible``; ties to lower id."""
        for u in self.ordered():
            i = self._pos[u]
            if not self.attacked[i] and eligible(u):
                self.attacked[i] = True
                return u
        return None

    def decrement(self, node: int) -> None:
        i = self._pos.get(int(node))
        if i is not None and self.scores[i] > 0:
            self.scores[i] -= 1


def rank_victims(graph: Graph) -> VictimQueue:
    test_nodes = np.where(graph.test_mask)[0]
    if len(test_nodes) == 0:
        raise AttackError("graph has no test nodes")
    scores = np.array([test_neighbor_score(graph, int(u)) for u in test_nodes])
    return VictimQueue(node_ids=test_nodes, scores=scores)


def generate_edges(graph: Graph, victim: int, k: int, b: int,
                   rng: np.random.Generator,
                   max_edges: int | None = None) -> list[int]:
    """Original-node endpoints for one injected node: the victim first, then
    up to min(k, |p_u|, b-1) of its test neighbors, sampled uniformly."""
    if b < 1:
        raise AttackError("degree cap must be >= 1")
    p_u = sorted(int(v) for v in graph.neighbors(victim) if graph.test_mask[v])
    n_extra = min(k, len(p_u), b - 1)
    if max_edges is not None:
        n_extra = min(n_extra, max_edges - 1)
    targets = [victim]
    if n_extra > 0:
        picks = rng.choice(len(p_u), size=n_extra, replace=False)
        targets += [p_u[i] for i in sorted(picks)]
    return targets


def x_tilde(victim_features: np.ndarray, feature_min: float,
            feature_max: float) -> np.ndarray:
    """Opposite-boundary vector: min where the victim is above the midpoint,
    max otherwise (equality falls to max)."""
    mid = (feature_min + feature_max) / 2.0
    return np.where(victim_features > mid, feature_min, feature_max)


def apply_mask(mask: np.ndarray, victim_features: np.ndarray,
               boundary: np.ndarray) -> np.ndarray:
    if len(mask) != len(victim_features) or len(mask) != len(boundary):
        raise AttackError("mask/feature length mismatch")
    return np.where(mask == 1, boundary, victim_features)


def decay(a: float, b: float, t: int) -> float:
    """Exploration fraction a * b**t, clamped into [0, 1]."""
    return float(min(1.0, max(0.0, a * b ** t)))


def _weighted_sample(pool: np.ndarray, weights: np.ndarray, size: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Without replacement, probabilities renormalized after each draw."""
    if size == 0:
        return np.array([], dtype=np.int64)
    p = weights / weights.sum()
    return rng.choice(pool, size=size, replace=False, p=p)


def sample_mask(state: SearchState, lambda_t: float,
                rng: np.random.Generator) -> np.ndarray:
    """Candidate mask: resample ceil(K * lambda_t) positions from unflipped
    dimensions, keep the rest from flipped ones, weighted by the posterior
    mean restricted to each candidate set. Popcount stays K."""
    k = int(state.mask.sum())
    d = len(state.mask)
    if d < k:
        raise AttackError("flip budget exceeds feature dimension")
    zeros = np.where(state.mask == 0)[0]
    ones = np.where(state.mask == 1)[0]
    theta = state.theta()
    n_explore = min(math.ceil(k * lambda_t), len(zeros))
    n_exploit = k - n_explore
    new_pos = _weighted_sample(zeros, theta[zeros], n_explore, rng)
    kept_pos = _weighted_sample(ones, theta[ones], n_exploit, rng)
    candidate = np.zeros(d, dtype=np.int64)
    candidate[new_pos] = 1
    candidate[kept_pos] = 1
    return candidate


def update_posterior(state: SearchState, candidate: np.ndarray,
                     prev: np.ndarray, loss_t: float, loss_prev: float,
                     eq13_flip: bool = False) -> SearchState:
    """Accumulate per-dimension importance/visit counts and fold the
    observation ratio into the Dirichlet concentrations."""
    not_improved = loss_t >= loss_prev
    rewarded = not not_improved if eq13_flip else not_improved
    newly_flipped = (candidate == 1) & (prev == 0)
    if rewarded:
        state.importance[newly_flipped] += 1.0
    touched = (candidate == 1) | (prev == 1)
    state.visits[touched] += 1.0
    observation = (state.importance + 0.001) / (state.visits + 0.001)
    state.alpha = state.alpha + observation
    return state


def accept(state: SearchState, candidate: np.ndarray, loss_t: float,
           loss_prev: float) -> np.ndarray:
    """Keep the candidate only on strict improvement."""
    state.best_loss = min(state.best_loss, loss_t, loss_prev)
    if loss_t < loss_prev:
        state.mask = candidate.copy()
    return state.mask


@dataclass
class InjectionTrace:
    """Per-injected-node diagnostics for query accounting and monotonicity."""

    victim: int
    accepted_losses: list
    queries: int
    succeeded: bool


def attack_one(graph: Graph, oracle, victim: int, labels: np.ndarray,
               config: AttackConfig, constraints: ConstraintSpec,
               rng: np.random.Generator, max_edges: int | None = None):
    """Inject and optimize one node against ``victim`` on the (possibly
    already patched) ``graph``.

    Returns (patch delta, triplet records, trace, logits of the accepted
    composition). ``labels`` are the loss-evaluation labels for every node.
    """
    n = graph.num_nodes
    d = graph.feature_dim
    k_flip = config.resolved_flip_budget(d)
    if d < k_flip:
        raise AttackError("flip budget exceeds feature dimension")

    wired = generate_edges(graph, victim, config.neighbor_edges,
                           constraints.degree_cap, rng, max_edges)
    p_u = sorted(int(v) for v in graph.neighbors(victim) if graph.test_mask[v])
    targets = [victim] + p_u

    boundary = x_tilde(graph.features[victim],
                       constraints.feature_min, constraints.feature_max)
    mask0 = np.zeros(d, dtype=np.int64)
    mask0[rng.choice(d, size=k_flip, replace=False)] = 1
    feats = apply_mask(mask0, graph.features[victim], boundary)

    delta = InjectionPatch(1, feats.reshape(1, -1), [(0, t) for t in wired], [])
    working = compose(graph, delta)
    logits = oracle(working)
    queries = 1
    loss_prev = attack_loss(logits, targets, labels, config.gamma)
    state = SearchState.initial(mask0)
    state.best_loss = loss_prev
    best_feats = feats
    best_logits = logits
    accepted_losses = [loss_prev]

    def all_misclassified(lg):
        return all(int(np.argmax(lg[j])) != labels[j] for j in targets)

    for t in range(config.max_iters):
        if all_misclassified(best_logits):
            break
        state.lambda_t = decay(config.decay_init, config.decay_base, t)
        candidate = sample_mask(state, state.lambda_t, rng)
        cand_feats = apply_mask(candidate, graph.features[victim], boundary)
        # working is privately owned here; rewriting the injected row avoids
        # recomposing the whole graph for every query
        working.features[n] = cand_feats
        logits = oracle(working)
        queries += 1
        loss_t = attack_loss(logits, targets, labels, config.gamma)
        prev_mask = state.mask.copy()
        accept(state, candidate, loss_t, loss_prev)
        update_posterior(state, candidate, prev_mask, loss_t, loss_prev,
                         config.eq13_flip)
        if loss_t < loss_prev:
            loss_prev = loss_t
            best_feats = cand_feats
            best_logits = logits
            accepted_losses.append(loss_t)
        state.iteration = t + 1

    delta = InjectionPatch(1, best_feats.reshape(1, -1),
                           [(0, t) for t in wired], [])
    wired_set = set(wired)
    records = []
    for dst in p_u:
        if dst in wired_set:
            continue
        if int(np.argmax(best_logits[dst])) == labels[dst]:
            records.append(TripletRecord(
                src=0, dst=dst,
                score=cw_loss(best_logits[dst], labels[dst], config.gamma)))
    trace = InjectionTrace(
        victim=victim, accepted_losses=accepted_losses, queries=queries,
        succeeded=int(np.argmax(best_logits[victim])) != labels[victim])
    return delta, records, trace, best_logits


def allocate_remaining_edges(records: list[TripletRecord],
                             patch: InjectionPatch,
                             constraints: ConstraintSpec) -> InjectionPatch:
    """Spend leftover edge budget on recorded pairs, lowest score first."""
    budget = constraints.max_injected_edges - patch.num_edges
    if budget <= 0 or not records:
        return patch
    degrees = patch.injected_degrees().copy()
    existing = set(patch.cross_edges)
    extra = []
    for rec in sorted(records, key=lambda r: (r.score, r.src, r.dst)):
        if budget <= 0:
            break
        edge = (rec.src, rec.dst)
        if edge in existing or degrees[rec.src] >= constraints.degree_cap:
            continue
        extra.append(edge)
        existing.add(edge)
        degrees[rec.src] += 1
        budget -= 1
    if not extra:
        return patch
    return InjectionPatch(patch.num_injected, patch.injected_features,
                          patch.cross_edges + extra, patch.inter_edges)


@dataclass
class AttackResult:
    patch: InjectionPatch
    traces: list
    query_count: int
    labels_used: np.ndarray
    exhausted_victims: bool = False


def run_attack(graph: Graph, oracle, config: AttackConfig,
               constraints: ConstraintSpec) -> AttackResult:
    """Sequentially inject up to the node budget, one node per victim,
    highest test-neighbor score first, then spend leftover edge budget."""
    rng = np.random.default_rng(config.rng_seed)
    patch = InjectionPatch.empty(graph.feature_dim)
    if constraints.max_injected_nodes == 0:
        return AttackResult(patch, [], 0, graph.labels.copy())

    clean_logits = oracle(graph)
    clean_pred = np.argmax(clean_logits, axis=1)
    labels = graph.labels.copy() if config.use_true_labels else clean_pred.copy()
    queue = rank_victims(graph)

    current = graph
    current_logits = clean_logits
    traces = []
    all_records = []
    exhausted = False
    for _ in range(constraints.max_injected_nodes):
        edge_budget_left = constraints.max_injected_edges - patch.num_edges
        if edge_budget_left < 1:
            exhausted = True
            break
        victim = queue.pop_best(
            lambda u: int(np.argmax(current_logits[u])) == labels[u])
        if victim is None:
            exhausted = True
            break
        delta, records, trace, best_logits = attack_one(
            current, oracle, victim, labels, config, constraints, rng,
            max_edges=edge_budget_left)
        inj_global = patch.num_injected
        patch = InjectionPatch(
            patch.num_injected + 1,
            np.vstack([patch.injected_features, delta.injected_features]),
            patch.cross_edges + [(inj_global, dst) for _, dst in delta.cross_edges],
            patch.inter_edges)
        all_records += [TripletRecord(inj_global, r.dst, r.score) for r in records]
        current = compose(graph, patch)
        current_logits = best_logits
        traces.append(trace)
        if trace.succeeded:
            for m in graph.neighbors(victim):
                if graph.test_mask[m]:
                    queue.decrement(int(m))

    patch = allocate_remaining_edges(all_records, patch, constraints)
    violations = validate_constraints(graph, patch, constraints)
    if violations:
        raise AttackError(f"internal error: emitted patch violates budgets: {violations}")
    queries = getattr(oracle, "queries", sum(t.queries for t in traces) + 1)
    return AttackResult(patch, traces, queries, labels, exhausted)
