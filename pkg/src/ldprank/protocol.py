"""LDP-KwikSort: query planning, agent perturbation, curator aggregation.

The curator asks every agent ``K`` distinct pair questions "do you prefer
``a_j`` to ``a_l``?" (``j < l``). Each agent answers through a local
randomizer at budget ``epsilon / K`` per answer. The curator tallies the
answers per pair, estimates the comparison margins and runs KwikSort.

All randomness in :func:`run_ldp_kwiksort` comes from one master seed:

* the query plan from the curator stream,
* agent ``i``'s perturbation from its own stream keyed by ``(seed, i)``,
* the KwikSort pivots and tie coins from the sort stream.

:func:`run_kwiksort` and :func:`run_dp_kwiksort` use the same sort stream, so
solutions run with equal seeds are directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, ProtocolError
from .mechanisms import (
    PrivacyBudget,
    TransformationMatrix,
    central_lap_noise,
    laplace_from_uniform,
    lap_perturb,
    mle_reconstruct,
    p_rr,
    rr_flip,
    rr_perturb,
)
from .ranking import (
    CmpProfile,
    PairwiseTable,
    Profile,
    Ranking,
    canonical_pairs,
    exact_cmp,
    kwiksort,
    n_pairs,
)
from .theory import Mechanism, _mechanism

_CURATOR_KEY = 0
_AGENT_KEY = 1
_SORT_KEY = 2
_CENTRAL_KEY = 3

LAP_THRESHOLD = 0.5


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a named sub-stream of a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def agent_rng(seed: int, agent: int) -> np.random.Generator:
    return derive_rng(seed, _AGENT_KEY, agent)


def curator_rng(seed: int) -> np.random.Generator:
    return derive_rng(seed, _CURATOR_KEY)


def sort_rng(seed: int) -> np.random.Generator:
    return derive_rng(seed, _SORT_KEY)


@dataclass(frozen=True, eq=False)
class QueryPlan:
    """``pair_index[i, k]`` is the canonical-pair index of agent ``i``'s ``k``-th question."""

    m: int
    pair_index: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.pair_index, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] < 1:
            raise ProtocolError(f"pair_index must be (n, K) with K >= 1, got {idx.shape}")
        if idx.shape[1] > n_pairs(self.m):
            raise ProtocolError(f"K={idx.shape[1]} exceeds the {n_pairs(self.m)} pairs of m={self.m}")
        if idx.size and (idx.min() < 0 or idx.max() >= n_pairs(self.m)):
            raise ProtocolError("pair index out of range")
        ordered = np.sort(idx, axis=1)
        if (ordered[:, 1:] == ordered[:, :-1]).any():
            raise ProtocolError("an agent was asked the same pair twice")
        idx.setflags(write=False)
        object.__setattr__(self, "pair_index", idx)

    @property
    def n(self) -> int:
        return self.pair_index.shape[0]

    @property
    def k(self) -> int:
        return self.pair_index.shape[1]

    def pairs_for(self, agent: int) -> list[tuple[int, int]]:
        rows, cols = canonical_pairs(self.m)
        return [(int(rows[p]), int(cols[p])) for p in self.pair_index[agent]]

    def coverage(self) -> np.ndarray:
        """Number of agents asked about each canonical pair."""
        return np.bincount(self.pair_index.ravel(), minlength=n_pairs(self.m))


@dataclass(frozen=True, eq=False)
class AnswerSet:
    """Reported answers, row ``i`` aligned with the plan's row ``i``."""

    values: np.ndarray
    mechanism: Mechanism

    def __post_init__(self):
        object.__setattr__(self, "mechanism", _mechanism(self.mechanism))
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise ProtocolError(f"answers must be (n, K), got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def check(self, plan: QueryPlan) -> None:
        if self.values.shape != plan.pair_index.shape:
            raise ProtocolError(
                f"answers shaped {self.values.shape} do not match plan {plan.pair_index.shape}"
            )


@dataclass(frozen=True, eq=False)
class EstimatedCmpProfile(CmpProfile):
    """Estimated margins plus the per-pair sample sizes behind them.

    ``estimates[0]`` / ``estimates[1]`` hold the per-pair estimates of
    ``C_jl`` / ``C_lj`` (canonical pair order); ``counts`` the number of
    answers received per pair. Pairs nobody was asked score exactly 0.
    """

    counts: np.ndarray = field(default=None)
    estimates: np.ndarray = field(default=None)

    def clamped_estimates(self) -> np.ndarray:
        """Estimates projected to ``[0, counts]`` for reporting."""
        return np.clip(self.estimates, 0.0, self.counts)


def plan_queries(n: int, m: int, k: int, rng: np.random.Generator) -> QueryPlan:
    """Sample ``k`` distinct canonical pairs uniformly for each of ``n`` agents."""
    if m < 2:
        raise ValueError(f"need at least two alternatives, got m={m}")
    total = n_pairs(m)
    if not 1 <= k <= total:
        raise ValueError(f"K must lie in [1, {total}] for m={m}, got {k}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    keys = rng.random((n, total))
    if k == total:
        idx = np.argsort(keys, axis=1)
    else:
        idx = np.argpartition(keys, k - 1, axis=1)[:, :k]
    return QueryPlan(m, idx)


def true_answer(r: Ranking, pair: tuple[int, int]) -> int:
    """1 when ``r`` ranks ``a_j`` above ``a_l`` for the canonical pair ``(j, l)``."""
    j, l = pair
    if not 0 <= j < l < r.m:
        raise ValueError(f"invalid canonical pair {pair} for m={r.m}")
    return int(r.position[j] < r.position[l])


def agent_respond_rr(
    r: Ranking,
    queries: Sequence[tuple[int, int]],
    budget: PrivacyBudget,
    rng: np.random.Generator,
) -> np.ndarray:
    """Answer each query by randomized response at ``budget.epsilon_k``."""
    return np.array(
        [rr_perturb(true_answer(r, q), budget.epsilon_k, rng) for q in queries], dtype=np.int8
    )


def agent_respond_lap(
    r: Ranking,
    queries: Sequence[tuple[int, int]],
    budget: PrivacyBudget,
    rng: np.random.Generator,
) -> np.ndarray:
    """Answer each query as ``bit + Lap(K / epsilon)``."""
    return np.array([lap_perturb(true_answer(r, q), budget.epsilon_k, rng) for q in queries])


def respond_all(
    truth: np.ndarray,
    mechanism,
    budget: PrivacyBudget,
    seed: int,
    p_keep: float | None = None,
) -> AnswerSet:
    """Perturb every agent's true answers, agent ``i`` drawing from ``agent_rng(seed, i)``.

    Produces exactly what calling the single-agent functions with those
    generators would, one uniform per answer.

    Args:
        truth: ``(n, K)`` true answer bits.
        mechanism: ``"rr"`` or ``"lap"``.
        budget: Overall budget and query count.
        seed: Master seed.
        p_keep: Override the randomized-response keep probability
            (diagnostics only; ``1.0`` turns perturbation off).
    """
    mechanism = _mechanism(mechanism)
    truth = np.asarray(truth, dtype=np.int8)
    n, k = truth.shape
    if k != budget.k_queries:
        raise ProtocolError(f"{k} answers per agent but the budget is split over {budget.k_queries}")
    uniforms = np.empty((n, k))
    for i in range(n):
        uniforms[i] = agent_rng(seed, i).random(k)
    if mechanism is Mechanism.RR:
        p = p_rr(budget.epsilon_k) if p_keep is None else p_keep
        values = rr_flip(truth, p, uniforms)
    else:
        values = truth + laplace_from_uniform(uniforms, 1.0 / budget.epsilon_k)
    return AnswerSet(values, mechanism)


def _tally(plan: QueryPlan, yes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    total = n_pairs(plan.m)
    flat = plan.pair_index.ravel()
    counts = np.bincount(flat, minlength=total).astype(float)
    ones = np.bincount(flat, weights=yes.ravel().astype(float), minlength=total)
    return ones, counts - ones


def curator_aggregate_rr(
    plan: QueryPlan,
    answers: AnswerSet,
    budget: PrivacyBudget,
    p_keep: float | None = None,
) -> EstimatedCmpProfile:
    """Tally bits per pair, invert the flip matrix, and take the difference."""
    answers.check(plan)
    if not np.isin(answers.values, (0, 1)).all():
        raise ProtocolError("randomized-response answers must be bits")
    matrix = TransformationMatrix(p_rr(budget.epsilon_k) if p_keep is None else p_keep)
    noisy_yes, noisy_no = _tally(plan, answers.values)
    est_yes, est_no = mle_reconstruct(noisy_yes, noisy_no, matrix)
    counts = noisy_yes + noisy_no
    # unasked pairs give 0 - 0 already; keep them exactly zero
    margin = np.where(counts > 0, est_yes - est_no, 0.0)
    return EstimatedCmpProfile.from_upper(
        plan.m, margin, counts=counts, estimates=np.stack([est_yes, est_no])
    )


def rescaled_margin_rr(noisy_yes, noisy_no, p_keep: float):
    """Direct form of the RR margin estimate: ``(yes - no) / (2p - 1)``."""
    return (np.asarray(noisy_yes, dtype=float) - noisy_no) / (2.0 * p_keep - 1.0)


def curator_aggregate_lap(plan: QueryPlan, answers: AnswerSet) -> EstimatedCmpProfile:
    """Classify each real answer at the 0.5 threshold and subtract the tallies."""
    answers.check(plan)
    yes = (answers.values >= LAP_THRESHOLD).astype(np.int8)
    est_yes, est_no = _tally(plan, yes)
    counts = est_yes + est_no
    return EstimatedCmpProfile.from_upper(
        plan.m, est_yes - est_no, counts=counts, estimates=np.stack([est_yes, est_no])
    )


def _table(p) -> PairwiseTable:
    if isinstance(p, (Profile, PairwiseTable)):
        return p.pairwise_table()
    raise TypeError(f"expected a Profile or PairwiseTable, got {type(p).__name__}")


def run_ldp_kwiksort(
    p: Profile | PairwiseTable,
    mechanism,
    budget: PrivacyBudget,
    seed: int,
    p_keep: float | None = None,
) -> tuple[Ranking, EstimatedCmpProfile]:
    """Run the full LDP-KwikSort pipeline from one master seed.

    Args:
        p: Agents' private data (rankings, or pairwise answer tables).
        mechanism: ``"rr"`` or ``"lap"``.
        budget: Per-agent budget and number of queries ``K``.
        seed: Master seed.
        p_keep: RR keep-probability override (noise-free diagnostics).

    Returns:
        The aggregate ranking and the estimated comparison profile it was sorted from.
    """
    mechanism = _mechanism(mechanism)
    table = _table(p)
    plan = plan_queries(table.n, table.m, budget.k_queries, curator_rng(seed))
    truth = table.bits[np.arange(table.n)[:, None], plan.pair_index]
    answers = respond_all(truth, mechanism, budget, seed, p_keep=p_keep)
    if mechanism is Mechanism.RR:
        estimated = curator_aggregate_rr(plan, answers, budget, p_keep=p_keep)
    else:
        estimated = curator_aggregate_lap(plan, answers)
    return kwiksort(estimated, sort_rng(seed)), estimated


def run_kwiksort(p: Profile | PairwiseTable, seed: int) -> tuple[Ranking, CmpProfile]:
    """Non-private baseline: KwikSort on the exact comparison profile."""
    c = exact_cmp(_table(p))
    return kwiksort(c, sort_rng(seed)), c


def dp_epsilon_prime(epsilon: float, m: int) -> float:
    """Per-comparison budget ``epsilon / ((m - 1) ln m)`` of the central baseline."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if m < 2:
        raise ValueError(f"need at least two alternatives, got m={m}")
    return epsilon / ((m - 1) * math.log(m))


def run_dp_kwiksort(p: Profile | PairwiseTable, epsilon: float, seed: int) -> tuple[Ranking, CmpProfile]:
    """Central-model DP-KwikSort.

    Every canonical pair margin receives one Laplace(1/epsilon') draw before
    sorting, so comparisons stay consistent through the recursion.
    """
    table = _table(p)
    eps_prime = dp_epsilon_prime(epsilon, table.m)
    c = exact_cmp(table)
    noise = central_lap_noise(eps_prime, derive_rng(seed, _CENTRAL_KEY), size=n_pairs(table.m))
    noisy = CmpProfile.from_upper(table.m, c.upper() + noise)
    return kwiksort(noisy, sort_rng(seed)), noisy


def check_same_m(a: CmpProfile, b: CmpProfile) -> None:
    if a.m != b.m:
        raise DimensionError(f"profiles over different m: {a.m} vs {b.m}")
