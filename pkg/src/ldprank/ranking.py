"""Rankings, profiles, Kendall tau, pairwise comparison profiles and KwikSort.

Alternatives are dense integer indices ``0..m-1``. A ranking lists them from
best (position 0) to worst (position ``m-1``). Pairs of alternatives are
always handled in canonical orientation ``(j, l)`` with ``j < l``, enumerated
in the order of :func:`canonical_pairs`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DimensionError

KEMENY_MAX_M = 8


def n_pairs(m: int) -> int:
    return m * (m - 1) // 2


def canonical_pairs(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of all pairs ``j < l``, in lexicographic order."""
    return np.triu_indices(m, k=1)


@dataclass(frozen=True)
class Ranking:
    """A strict total order over ``m`` alternatives.

    ``order[k]`` is the alternative at position ``k``; ``position[a]`` is the
    inverse lookup.
    """

    order: tuple[int, ...]
    position: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __init__(self, order: Iterable[int]):
        order = tuple(int(a) for a in order)
        m = len(order)
        if m == 0 or sorted(order) != list(range(m)):
            raise ValueError(f"not a permutation of 0..{m - 1}: {order}")
        position = [0] * m
        for k, a in enumerate(order):
            position[a] = k
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "position", tuple(position))

    @property
    def m(self) -> int:
        return len(self.order)

    def prefers(self, a: int, b: int) -> bool:
        """True when ``a`` is ranked above ``b``."""
        return self.position[a] < self.position[b]

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def __getitem__(self, k: int) -> int:
        return self.order[k]


@dataclass(frozen=True, eq=False)
class PairwiseTable:
    """Per-agent answers to every canonical pair question.

    ``bits[i, p]`` is 1 when agent ``i`` prefers ``a_j`` to ``a_l`` for the
    ``p``-th canonical pair ``(j, l)``. Tables built from rankings are always
    transitive; tables drawn pair-by-pair may contain cycles.
    """

    m: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.int8)
        if bits.ndim != 2 or bits.shape[1] != n_pairs(self.m):
            raise DimensionError(
                f"expected shape (n, {n_pairs(self.m)}) for m={self.m}, got {bits.shape}"
            )
        if bits.shape[0] < 1:
            raise ValueError("table needs at least one agent")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("table entries must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    def pairwise_table(self) -> PairwiseTable:
        return self


class Profile:
    """A combined profile: ``n`` complete rankings over the same ``m`` alternatives.

    Stored as an ``(n, m)`` integer array of orders; individual :class:`Ranking`
    objects are built on demand.
    """

    __slots__ = ("orders", "positions", "_table")

    def __init__(self, rankings: Sequence[Ranking] | np.ndarray):
        if isinstance(rankings, np.ndarray):
            orders = np.array(rankings, dtype=np.int64)
        else:
            rankings = [r if isinstance(r, Ranking) else Ranking(r) for r in rankings]
            if not rankings:
                raise ValueError("profile needs at least one ranking")
            ms = {r.m for r in rankings}
            if len(ms) != 1:
                raise DimensionError(f"rankings disagree on m: {sorted(ms)}")
            orders = np.array([r.order for r in rankings], dtype=np.int64)
        if orders.ndim != 2 or orders.shape[0] < 1 or orders.shape[1] < 1:
            raise ValueError("profile needs at least one ranking")
        m = orders.shape[1]
        if not (np.sort(orders, axis=1) == np.arange(m)).all():
            raise ValueError("every row must be a permutation of 0..m-1")
        positions = np.empty_like(orders)
        rows = np.arange(orders.shape[0])[:, None]
        positions[rows, orders] = np.arange(m)
        orders.setflags(write=False)
        positions.setflags(write=False)
        self.orders = orders
        self.positions = positions
        self._table = None

    @property
    def n(self) -> int:
        return self.orders.shape[0]

    @property
    def m(self) -> int:
        return self.orders.shape[1]

    @property
    def rankings(self) -> tuple[Ranking, ...]:
        return tuple(Ranking(row) for row in self.orders.tolist())

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Ranking:
        return Ranking(self.orders[i].tolist())

    def __eq__(self, other) -> bool:
        return isinstance(other, Profile) and np.array_equal(self.orders, other.orders)

    def __repr__(self) -> str:
        return f"Profile(n={self.n}, m={self.m})"

    def pairwise_table(self) -> PairwiseTable:
        if self._table is None:
            rows, cols = canonical_pairs(self.m)
            bits = self.positions[:, rows] < self.positions[:, cols]
            self._table = PairwiseTable(self.m, bits)
        return self._table


@dataclass(frozen=True, eq=False)
class CmpProfile:
    """Antisymmetric matrix of aggregate pairwise margins.

    ``scores[j, l] > 0`` means ``a_j`` is preferred to ``a_l`` in aggregate.
    For an exact profile ``scores[j, l] = C_jl - C_lj``.
    """

    m: int
    scores: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=float)
        if scores.shape != (self.m, self.m):
            raise DimensionError(f"expected ({self.m}, {self.m}) scores, got {scores.shape}")
        if not np.array_equal(scores, -scores.T):
            raise ValueError("scores must be antisymmetric")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_upper(cls, m: int, upper: Sequence[float] | np.ndarray, **kwargs) -> "CmpProfile":
        """Build from one score per canonical pair."""
        upper = np.asarray(upper, dtype=float)
        if upper.shape != (n_pairs(m),):
            raise DimensionError(f"expected {n_pairs(m)} pair scores, got {upper.shape}")
        scores = np.zeros((m, m))
        rows, cols = canonical_pairs(m)
        scores[rows, cols] = upper
        scores[cols, rows] = -upper
        return cls(m, scores, **kwargs)

    def score(self, j: int, l: int) -> float:
        return float(self.scores[j, l])

    def upper(self) -> np.ndarray:
        """Scores of the canonical pairs as a flat vector."""
        rows, cols = canonical_pairs(self.m)
        return self.scores[rows, cols]


def _as_table(p) -> PairwiseTable:
    try:
        return p.pairwise_table()
    except AttributeError:
        raise TypeError(f"expected a Profile or PairwiseTable, got {type(p).__name__}") from None


def kendall_tau(a: Ranking, b: Ranking) -> int:
    """Number of alternative pairs ordered oppositely by ``a`` and ``b``."""
    if a.m != b.m:
        raise DimensionError(f"rankings over different m: {a.m} vs {b.m}")
    pa, pb = a.position, b.position
    m = a.m
    return sum(
        (pa[j] < pa[l]) != (pb[j] < pb[l]) for j in range(m) for l in range(j + 1, m)
    )


def kendall_tau_agreements(a: Ranking, b: Ranking) -> int:
    if a.m != b.m:
        raise DimensionError(f"rankings over different m: {a.m} vs {b.m}")
    return n_pairs(a.m) - kendall_tau(a, b)


def avg_kendall_tau(r: Ranking, p: Profile | PairwiseTable, normalized: bool = False) -> float:
    """Mean Kendall tau distance from ``r`` to every member of ``p``.

    Works on pairwise tables too, where it counts disagreements with each
    agent's pair answers (identical to Kendall tau for transitive rows).

    Args:
        r: Candidate aggregate ranking.
        p: Profile (or pairwise table) of ``n >= 1`` agents.
        normalized: Divide by ``m(m-1)/2`` so the result lies in ``[0, 1]``.
    """
    table = _as_table(p)
    if table.n < 1:
        raise ValueError("empty profile")
    if r.m != table.m:
        raise DimensionError(f"ranking has m={r.m}, profile has m={table.m}")
    mine = ranking_bits(r)
    total = np.count_nonzero(table.bits != mine) / table.n
    if normalized:
        pairs = n_pairs(r.m)
        return total / pairs if pairs else 0.0
    return float(total)


def ranking_bits(r: Ranking) -> np.ndarray:
    """Canonical-pair answers of a single ranking (1 = prefers ``a_j``)."""
    pos = np.asarray(r.position)
    rows, cols = canonical_pairs(r.m)
    return (pos[rows] < pos[cols]).astype(np.int8)


def pair_counts(p: Profile | PairwiseTable) -> np.ndarray:
    """``C[j, l]``: number of agents ranking ``a_j`` above ``a_l``."""
    table = _as_table(p)
    m = table.m
    yes = table.bits.sum(axis=0, dtype=np.int64)
    counts = np.zeros((m, m), dtype=np.int64)
    rows, cols = canonical_pairs(m)
    counts[rows, cols] = yes
    counts[cols, rows] = table.n - yes
    return counts


def exact_cmp(p: Profile | PairwiseTable) -> CmpProfile:
    """Exact pairwise margins ``C_jl - C_lj`` of a profile."""
    counts = pair_counts(p)
    return CmpProfile(counts.shape[0], counts - counts.T)


def kwiksort(c: CmpProfile, rng: np.random.Generator) -> Ranking:
    """Aggregate a comparison profile with randomized-pivot KwikSort.

    Alternatives with ``cmp(pivot, q) < 0`` go before the pivot, ``> 0`` after.
    An exactly zero margin places ``q`` on a fair-coin side. Random draws depend
    only on the signs of the scores, so two profiles with the same sign pattern
    sort identically under the same generator state.
    """
    scores = c.scores.tolist()

    def sort(items: list[int]) -> list[int]:
        if len(items) <= 1:
            return items
        pivot = items[int(rng.integers(len(items)))]
        row = scores[pivot]
        left, right = [], []
        for q in items:
            if q == pivot:
                continue
            s = row[q]
            if s < 0:
                left.append(q)
            elif s > 0:
                right.append(q)
            elif rng.random() < 0.5:
                left.append(q)
            else:
                right.append(q)
        return sort(left) + [pivot] + sort(right)

    return Ranking(sort(list(range(c.m))))


def kemeny_optimal(p: Profile | PairwiseTable) -> tuple[Ranking, float]:
    """Brute-force Kemeny ranking and its average Kendall tau distance.

    Ties go to the lexicographically smallest order.

    Raises:
        CapacityError: if ``m`` exceeds 8.
    """
    table = _as_table(p)
    m = table.m
    if m > KEMENY_MAX_M:
        raise CapacityError(f"exhaustive Kemeny search limited to m <= {KEMENY_MAX_M}, got {m}")
    counts = pair_counts(table)
    perms = np.array(list(itertools.permutations(range(m))), dtype=np.int64)
    pos = np.empty_like(perms)
    pos[np.arange(len(perms))[:, None], perms] = np.arange(m)
    cost = np.zeros(len(perms), dtype=np.int64)
    for j, l in zip(*canonical_pairs(m)):
        # ranking j above l disagrees with the C_lj agents preferring l
        cost += np.where(pos[:, j] < pos[:, l], counts[l, j], counts[j, l])
    best = int(np.argmin(cost))
    return Ranking(perms[best].tolist()), float(cost[best]) / table.n
