"""Permutation-based sparse private writes and reads for shared models.

Clients hold a secret permutation of the model's positions and send
sparse updates under permuted indices with one-time-pad masked values
(u = delta + a_n * zdot).  Each database holds a noisy
permutation-reversing matrix per segment,

    R_n = Pi + a_n X,

whose plain part places permuted coordinates back at their true rows
while the shared noise matrix X hides the permutation.  Model shares
are stored per position as w + a_n z_1 + a_n^2 z_2, so a read answer
<shares, R_n column> is a degree-3 polynomial in a_n whose constant
term is the true parameter; four or more databases decode it.

Splitting the model into B independently permuted segments divides the
matrix storage by B but reveals the per-segment sparse-update counts;
the exact entropy of that leak is computed here by enumeration.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .databank import DatabaseState
from .field import FieldElement, lagrange_at, solve_linear
from .pruw import EvaluationFrame


class SparsifyError(Exception):
    pass


class EnumerationCapError(SparsifyError):
    """Exact enumeration would be too large; use the sampled estimator."""


# ---------------------------------------------------------------------------
# segmentation


@dataclass(frozen=True)
class SegmentationPlan:
    """How the L positions split into B contiguous segments.

    The first B-1 segments have size floor(L/B); the last takes the
    remainder.  ``inter_segment_permutation`` is client-side data for
    the two-stage leakage model only; rearrangement mechanics require
    it unset (a block-stored reversing matrix cannot place a segment's
    updates without knowing which rows are its own, which is exactly
    the mapping the second stage hides).
    """

    L: int
    B: int
    inter_segment_permutation: tuple | None = None

    def __post_init__(self):
        if not 1 <= self.B <= self.L:
            raise SparsifyError(f"need 1 <= B <= L, got B={self.B}, L={self.L}")

    @property
    def base_size(self) -> int:
        return self.L // self.B

    def sizes(self) -> tuple:
        base = self.base_size
        return tuple(
            base if b < self.B - 1 else self.L - base * (self.B - 1)
            for b in range(self.B)
        )

    def starts(self) -> tuple:
        base = self.base_size
        return tuple(base * b for b in range(self.B))

    def segment_of(self, position: int) -> int:
        """Segment of a 0-based global position."""
        if not 0 <= position < self.L:
            raise SparsifyError(f"position {position} outside [0, {self.L})")
        return min(position // self.base_size, self.B - 1)

    @property
    def ragged(self) -> bool:
        return self.L % self.B != 0


def storage_overhead(L: int, B: int) -> int:
    """Reversing-matrix symbols per database: sum of squared segment sizes."""
    return sum(s * s for s in SegmentationPlan(L=L, B=B).sizes())


# ---------------------------------------------------------------------------
# setup


class ClientPermutation:
    """The client secret: one local permutation per segment.

    ``perms[b][j]`` is the 0-based local real position stored at local
    permuted position j, mirroring the convention that a permutation is
    written as the list of real indices in permuted order.
    """

    def __init__(self, plan: SegmentationPlan, perms):
        self.plan = plan
        self.perms = tuple(tuple(p) for p in perms)
        sizes = plan.sizes()
        if len(self.perms) != plan.B or any(
            sorted(p) != list(range(s)) for p, s in zip(self.perms, sizes)
        ):
            raise SparsifyError("need one local permutation per segment")
        self._inverse = tuple(
            tuple(p.index(i) for i in range(len(p))) for p in self.perms
        )

    def permuted_of(self, real_index: int) -> int:
        """Global 1-based permuted index of a 1-based real index."""
        g = real_index - 1
        b = self.plan.segment_of(g)
        local = g - self.plan.starts()[b]
        return self.plan.starts()[b] + self._inverse[b][local] + 1

    def real_of(self, permuted_index: int) -> int:
        """Global 1-based real index of a 1-based permuted index."""
        g = permuted_index - 1
        b = self.plan.segment_of(g)
        local = g - self.plan.starts()[b]
        return self.plan.starts()[b] + self.perms[b][local] + 1


def permutation_matrix(perm) -> tuple:
    """0/1 matrix with column j carrying a one at row perm[j]."""
    size = len(perm)
    return tuple(
        tuple(1 if perm[j] == i else 0 for j in range(size)) for i in range(size)
    )


class SparseDbStore:
    """One database's sparsification state.

    ``matrices[b]`` is the noisy reversing matrix of segment b at this
    database's evaluation point; ``shares`` is the L-vector of noisy
    model parameter shares.  ``index_history`` accumulates the permuted
    indices received, feeding next round's popularity selection.
    """

    def __init__(self, alpha: FieldElement, matrices, shares):
        self.alpha = alpha
        self.matrices = matrices
        self.shares = list(shares)
        self.index_history: list = []


def coordinator_setup(
    L: int, B: int, frame: EvaluationFrame, source, model=None
):
    """Trusted setup: secret permutations, noisy matrices, model shares.

    Returns (client secret, database states).  Databases receive only
    their own matrix evaluations and share vectors, never the
    permutations or the noise.  All evaluation points must be nonzero:
    data lives at the constant coefficient, and an evaluation at zero
    would be the plaintext itself.
    """
    if frame.N < 4:
        raise SparsifyError("read answers have degree 3; need N >= 4")
    if any(a.value == 0 for a in frame.alphas):
        raise SparsifyError("evaluation points must be nonzero")
    field = frame.field
    plan = SegmentationPlan(L=L, B=B)
    perms = [source.permutation(s) for s in plan.sizes()]
    client = ClientPermutation(plan, perms)

    model = [0] * L if model is None else list(model)
    if len(model) != L:
        raise SparsifyError(f"model must have length L={L}")
    model = [field(v) if isinstance(v, int) else v for v in model]

    # shared noise: one matrix per segment, two coefficients per position
    noise_matrices = [
        [[source.randbelow(field.q) for _ in range(s)] for _ in range(s)]
        for s in plan.sizes()
    ]
    share_noise = [
        (source.randbelow(field.q), source.randbelow(field.q)) for _ in range(L)
    ]

    dbs = []
    for n in range(1, frame.N + 1):
        alpha = frame.alphas[n - 1]
        matrices = []
        for b, perm in enumerate(perms):
            plain = permutation_matrix(perm)
            size = len(perm)
            matrices.append(
                tuple(
                    tuple(
                        field(plain[i][j]) + alpha * field(noise_matrices[b][i][j])
                        for j in range(size)
                    )
                    for i in range(size)
                )
            )
        shares = [
            model[pos] + alpha * field(z1) + alpha * alpha * field(z2)
            for pos, (z1, z2) in enumerate(share_noise)
        ]
        dbs.append(
            DatabaseState(index=n, store=SparseDbStore(alpha, matrices, shares))
        )
    return client, dbs


# ---------------------------------------------------------------------------
# writing


@dataclass(frozen=True)
class SparseWriteMessage:
    """What one database receives: permuted indices with masked values."""

    entries: tuple  # (global 1-based permuted index, FieldElement) ascending

    def permuted_indices(self) -> tuple:
        return tuple(i for i, _ in self.entries)

    def segment_counts(self, plan: SegmentationPlan) -> tuple:
        counts = [0] * plan.B
        for i, _ in self.entries:
            counts[plan.segment_of(i - 1)] += 1
        return tuple(counts)


def sparse_update_value(frame: EvaluationFrame, n: int, delta, zdot) -> FieldElement:
    """Masked update for database n: delta + a_n * zdot."""
    field = frame.field
    delta = field(delta) if isinstance(delta, int) else delta
    zdot = field(zdot) if isinstance(zdot, int) else zdot
    return delta + frame.alphas[n - 1] * zdot


def client_write_sparse(
    client: ClientPermutation, frame: EvaluationFrame, updates, source, *, zdots=None
):
    """Build the N per-database messages for a sparse update set.

    ``updates`` maps 1-based real indices to update values.  Indices
    must be distinct; each value is masked with a fresh noise symbol
    shared across databases, so the messages differ between databases
    only through the evaluation points.
    """
    if client.plan.inter_segment_permutation is not None:
        raise SparsifyError(
            "two-stage permutation is a leakage model only; rearrangement "
            "requires the single-stage plan"
        )
    items = list(updates.items() if hasattr(updates, "items") else updates)
    reals = [i for i, _ in items]
    if len(set(reals)) != len(reals):
        raise SparsifyError("duplicate real index in sparse update set")
    field = frame.field
    if zdots is None:
        zdots = {i: source.randbelow(field.q) for i, _ in items}
    placed = sorted(
        (client.permuted_of(i), field(v) if isinstance(v, int) else v, zdots[i])
        for i, v in items
    )
    messages = []
    for n in range(1, frame.N + 1):
        entries = tuple(
            (j, delta + frame.alphas[n - 1] * field(zd)) for j, delta, zd in placed
        )
        messages.append(SparseWriteMessage(entries=entries))
    return messages


def db_rearrange_and_apply(db: DatabaseState, message: SparseWriteMessage, plan: SegmentationPlan):
    """Database side: multiply by the noisy reversing matrix and accumulate.

    The plain part of the matrix lands each masked update at its true
    row; the noise part only perturbs the share vector's alpha
    coefficients, so the plaintext (constant coefficient) gains exactly
    the updates at the real positions.
    """
    store = db.store
    starts = plan.starts()
    sizes = plan.sizes()
    field = store.shares[0].field
    seen = set()
    by_segment = [[] for _ in range(plan.B)]
    for j, value in message.entries:
        if not 1 <= j <= plan.L:
            raise SparsifyError(f"permuted index {j} outside [1, {plan.L}]")
        if j in seen:
            raise SparsifyError(f"duplicate permuted index {j}")
        seen.add(j)
        b = plan.segment_of(j - 1)
        by_segment[b].append((j - 1 - starts[b], value))
    for b, entries in enumerate(by_segment):
        if not entries:
            continue
        size = sizes[b]
        embedded = [field.zero()] * size
        for local_j, value in entries:
            embedded[local_j] = value
        matrix = store.matrices[b]
        for i in range(size):
            acc = field.zero()
            for j in range(size):
                if embedded[j].value:
                    acc = acc + matrix[i][j] * embedded[j]
            store.shares[starts[b] + i] = store.shares[starts[b] + i] + acc
    store.index_history.append(message.permuted_indices())


# ---------------------------------------------------------------------------
# reading


def db_select_popular(index_multisets, L: int, r_prime) -> tuple:
    """Most popular ceil(r' * L) permuted indices from last round's traffic.

    Descending count, ties broken by ascending permuted index.  An
    empty history is an error: there is nothing to rank.
    """
    r_prime = Fraction(r_prime)
    if not 0 < r_prime <= 1:
        raise SparsifyError("need 0 < r' <= 1")
    multisets = [tuple(m) for m in index_multisets]
    if not multisets:
        raise SparsifyError("no received-index history to rank")
    counts = {j: 0 for j in range(1, L + 1)}
    for m in multisets:
        for j in m:
            if not 1 <= j <= L:
                raise SparsifyError(f"permuted index {j} outside [1, {L}]")
            counts[j] += 1
    take = math.ceil(r_prime * L)
    ranked = sorted(counts, key=lambda j: (-counts[j], j))
    return tuple(sorted(ranked[:take]))


def db_answer_read(db: DatabaseState, jprimes, plan: SegmentationPlan) -> tuple:
    """Dot products of the share vector with reversing-matrix columns."""
    store = db.store
    starts = plan.starts()
    field = store.shares[0].field
    out = []
    for j in jprimes:
        b = plan.segment_of(j - 1)
        local_j = j - 1 - starts[b]
        size = plan.sizes()[b]
        matrix = store.matrices[b]
        acc = field.zero()
        for i in range(size):
            acc = acc + store.shares[starts[b] + i] * matrix[i][local_j]
        out.append(acc)
    return tuple(out)


def client_read_sparse(
    client: ClientPermutation, frame: EvaluationFrame, jprimes, answers_by_db
) -> dict:
    """Decode read answers into {1-based real index: value}.

    Each answer sequence is a degree-3 polynomial in the database's
    evaluation point with the true parameter as constant term; the N
    evaluations are solved jointly and mapped back through the secret
    permutation.
    """
    field = frame.field
    jprimes = list(jprimes)
    answers_by_db = [list(a) for a in answers_by_db]
    if len(answers_by_db) != frame.N or any(
        len(a) != len(jprimes) for a in answers_by_db
    ):
        raise SparsifyError("need one answer per database per requested index")
    out = {}
    for pos, j in enumerate(jprimes):
        rows = []
        rhs = []
        for n in range(frame.N):
            alpha = frame.alphas[n]
            row = []
            power = field.one()
            for _ in range(frame.N):
                row.append(power)
                power = power * alpha
            rows.append(row)
            rhs.append(answers_by_db[n][pos])
        coeffs = solve_linear(rows, rhs)
        out[client.real_of(j)] = coeffs[0]
    return out


def decode_share_vector(frame: EvaluationFrame, share_vectors) -> list:
    """Oracle: interpolate per-position shares at zero to read plaintext."""
    L = len(share_vectors[0])
    out = []
    for pos in range(L):
        points = [(frame.alphas[n], share_vectors[n][pos]) for n in range(frame.N)]
        out.append(lagrange_at(points, frame.field.zero()))
    return out


# ---------------------------------------------------------------------------
# leakage accounting

ENUMERATION_CAP_L = 24


def _segment_count_distribution(L: int, B: int, s: int, two_stage: bool) -> dict:
    plan = SegmentationPlan(L=L, B=B)
    counts: dict = {}
    total = 0
    for support in itertools.combinations(range(L), s):
        per_segment = [0] * B
        for position in support:
            per_segment[plan.segment_of(position)] += 1
        key = tuple(sorted(per_segment)) if two_stage else tuple(per_segment)
        counts[key] = counts.get(key, 0) + 1
        total += 1
    return {k: Fraction(v, total) for k, v in counts.items()}


def leakage_entropy(L: int, B: int, s: int, two_stage: bool = False) -> float:
    """Exact entropy (bits) of the per-segment sparse-update counts.

    The sparsity model is a uniformly random s-subset of the L
    positions.  Single-stage leaks the ordered count vector; two-stage
    leaks only the multiset of counts, which can never carry more
    information.  Enumeration is capped at L <= 24; beyond that use
    ``leakage_entropy_sampled``.
    """
    if not 0 <= s <= L:
        raise SparsifyError(f"need 0 <= s <= L, got s={s}")
    if L > ENUMERATION_CAP_L:
        raise EnumerationCapError(
            f"L={L} exceeds the exact-enumeration cap ({ENUMERATION_CAP_L}); "
            "use leakage_entropy_sampled"
        )
    dist = _segment_count_distribution(L, B, s, two_stage)
    return -sum(float(p) * math.log2(float(p)) for p in dist.values()) + 0.0


def leakage_entropy_sampled(
    L: int, B: int, s: int, two_stage: bool, draws: int, source
) -> float:
    """Plug-in entropy estimate from sampled supports; exploration only."""
    plan = SegmentationPlan(L=L, B=B)
    counts: dict = {}
    for _ in range(draws):
        support = source.sample_indices(L, s)
        per_segment = [0] * B
        for position in support:
            per_segment[plan.segment_of(position)] += 1
        key = tuple(sorted(per_segment)) if two_stage else tuple(per_segment)
        counts[key] = counts.get(key, 0) + 1
    return -sum((c / draws) * math.log2(c / draws) for c in counts.values()) + 0.0
