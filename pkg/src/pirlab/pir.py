"""Multi-database private retrieval schemes.

Four schemes over replicated storage, in increasing sophistication:

* ``cgks``      -- two databases, one masked unit-vector offset, rate 1/2.
* ``residual``  -- N databases reusing one masked answer, rate (N-1)/N.
* ``sunjafar``  -- capacity-achieving deterministic scheme built from
                   per-subset symbol sums and cross-database side
                   information; rate equals c_pir(N, K) exactly.
* ``tian``      -- capacity-achieving probabilistic scheme keyed by a
                   base-N vector; one key makes a database's answer known
                   in advance, which is where the rate gain comes from.
* ``leaky``     -- the four-row query-option table for N=2, K=2 with
                   expected rate 2/3.

Every scheme exposes its full randomness space so the audit module can
enumerate query distributions exactly.  Desired-message indices are
1-based throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .databank import (
    IndexSumQuery,
    LinearQuery,
    MessageCombinationQuery,
    MessageStore,
    SchemeTranscript,
    SymbolSumQuery,
    replicate,
    serve,
)
from .field import PrimeField


class SchemeError(Exception):
    pass


def _index_bits(N: int) -> int:
    return max(1, (N - 1).bit_length())


# ---------------------------------------------------------------------------
# cgks: two databases, single-symbol messages


def cgks_queries(field: PrimeField, K: int, theta: int, h) -> tuple:
    """The masked pair: h to database 1, h + unit(theta) to database 2."""
    h = tuple(int(v) % field.q for v in h)
    if len(h) != K:
        raise SchemeError(f"mask length {len(h)} != K={K}")
    bumped = tuple(
        (v + 1) % field.q if k == theta - 1 else v for k, v in enumerate(h)
    )
    q1 = LinearQuery(coeffs=tuple((v,) for v in h))
    q2 = LinearQuery(coeffs=tuple((v,) for v in bumped))
    return q1, q2


def cgks_round(store: MessageStore, theta: int, source=None, *, h=None):
    """Run the two-database scheme; returns (transcript, decoded message).

    Requires single-symbol messages.  The decoded symbol is the
    difference of the two answers.
    """
    if store.L != 1:
        raise SchemeError("cgks operates on single-symbol messages")
    if h is None:
        h = [source.randbelow(store.field.q) for _ in range(store.K)]
    dbs = replicate(store, 2)
    t = SchemeTranscript("cgks", 2, store.K, 1, store.field, theta)
    q1, q2 = cgks_queries(store.field, store.K, theta, h)
    answers = []
    for db, q in zip(dbs, (q1, q2)):
        t.record_query(db.index, q)
        a = serve(db, q)
        t.record_answer(db.index, a)
        answers.append(a[0])
    decoded = (answers[1] - answers[0],)
    return t, decoded


def cgks_randomness_space(q: int, K: int):
    return itertools.product(range(q), repeat=K)


def cgks_randomness_size(q: int, K: int) -> int:
    return q**K


# ---------------------------------------------------------------------------
# residual: N databases, one reused masked answer per subpacket


def residual_queries(field: PrimeField, N: int, K: int, theta: int, h, offset: int = 0):
    """Queries for one (N-1)-symbol subpacket at ``offset``.

    ``h`` is a flat tuple of K*(N-1) mask values, row per message.
    Database 1 gets the bare mask; database j+1 gets a +1 at the
    desired message's j-th subpacket column.
    """
    width = N - 1
    h = tuple(int(v) % field.q for v in h)
    if len(h) != K * width:
        raise SchemeError(f"mask length {len(h)} != K*(N-1)={K * width}")
    rows = tuple(h[k * width : (k + 1) * width] for k in range(K))
    queries = [LinearQuery(coeffs=rows, offset=offset)]
    for j in range(width):
        bumped = tuple(
            tuple(
                (v + 1) % field.q if (k == theta - 1 and col == j) else v
                for col, v in enumerate(row)
            )
            for k, row in enumerate(rows)
        )
        queries.append(LinearQuery(coeffs=bumped, offset=offset))
    return queries


def residual_round(store: MessageStore, theta: int, N: int, source=None, *, h=None):
    """Run the reuse scheme over every subpacket; rate (N-1)/N exactly."""
    width = N - 1
    if width < 1:
        raise SchemeError("need N >= 2")
    if store.L % width:
        raise SchemeError(f"L={store.L} not a multiple of N-1={width}")
    subpackets = store.L // width
    if h is None:
        h = [
            [source.randbelow(store.field.q) for _ in range(store.K * width)]
            for _ in range(subpackets)
        ]
    elif subpackets == 1 and h and isinstance(h[0], int):
        h = [h]
    dbs = replicate(store, N)
    t = SchemeTranscript("residual", N, store.K, store.L, store.field, theta)
    decoded = [None] * store.L
    for sp in range(subpackets):
        offset = sp * width
        queries = residual_queries(store.field, N, store.K, theta, h[sp], offset)
        answers = []
        for db, q in zip(dbs, queries):
            t.record_query(db.index, q)
            a = serve(db, q)
            t.record_answer(db.index, a)
            answers.append(a[0])
        for j in range(width):
            decoded[offset + j] = answers[j + 1] - answers[0]
    return t, tuple(decoded)


def residual_randomness_space(q: int, N: int, K: int):
    return itertools.product(range(q), repeat=K * (N - 1))


def residual_randomness_size(q: int, N: int, K: int) -> int:
    return q ** (K * (N - 1))


# ---------------------------------------------------------------------------
# sunjafar: subset sums with cross-database side information


@dataclass(frozen=True)
class PlanRequest:
    """One downloadable sum: fresh virtual symbol indices per message.

    ``side`` names the (database, request) whose already-downloaded
    value this sum embeds, for every desired-message sum past stage 1.
    """

    subset: tuple  # ascending 1-based message indices
    virtuals: dict  # message index -> virtual symbol index in [0, N^K)
    side: tuple | None  # (db position 0-based, request position) or None


class SunJafarPlan:
    """Download plan for one subpacket of size N^K per message.

    Per database the plan holds, for every t and every t-subset of
    messages, exactly (N-1)^(t-1) sums; every sum containing the desired
    message past stage 1 reuses a (t-1)-sum fetched from another
    database.  Virtual indices are mapped to stored positions through
    uniform per-message permutations, which is the only randomness.
    """

    def __init__(self, N: int, K: int, theta: int, perms):
        if N < 2 or K < 1:
            raise SchemeError("need N >= 2 and K >= 1")
        if not 1 <= theta <= K:
            raise SchemeError(f"theta={theta} outside [1, {K}]")
        self.N = N
        self.K = K
        self.theta = theta
        self.subpacket = N**K
        perms = tuple(tuple(p) for p in perms)
        if len(perms) != K or any(sorted(p) != list(range(self.subpacket)) for p in perms):
            raise SchemeError("need one permutation of range(N^K) per message")
        self.perms = perms
        self.requests = self._build()

    def _build(self):
        N, K, theta = self.N, self.K, self.theta
        requests = [[] for _ in range(N)]
        fresh = [0] * (K + 1)  # next virtual index, 1-based message slots

        def take(k):
            v = fresh[k]
            fresh[k] += 1
            return v

        blocks = {}  # (subset, db position) -> request positions
        for t in range(1, K + 1):
            for subset in itertools.combinations(range(1, K + 1), t):
                count = (N - 1) ** (t - 1)
                if theta not in subset:
                    for n in range(N):
                        positions = []
                        for _ in range(count):
                            req = PlanRequest(
                                subset, {k: take(k) for k in subset}, None
                            )
                            positions.append(len(requests[n]))
                            requests[n].append(req)
                        blocks[(subset, n)] = positions
                else:
                    rest = tuple(k for k in subset if k != theta)
                    for n in range(N):
                        others = [m for m in range(N) if m != n]
                        for i in range(count):
                            virtuals = {theta: take(theta)}
                            side = None
                            if rest:
                                m = others[i % (N - 1)]
                                pos = blocks[(rest, m)][i // (N - 1)]
                                side = (m, pos)
                                virtuals.update(requests[m][pos].virtuals)
                            requests[n].append(PlanRequest(subset, virtuals, side))
        assert fresh[theta] == self.subpacket, "desired virtuals must cover the subpacket"
        return requests

    def downloads_per_db(self) -> int:
        return len(self.requests[0])

    def queries(self, offset: int = 0):
        """Transmitted form: per database, sums of (message, position)."""
        out = []
        for reqs in self.requests:
            sums = tuple(
                tuple(
                    (k, offset + self.perms[k - 1][req.virtuals[k]])
                    for k in req.subset
                )
                for req in reqs
            )
            out.append(SymbolSumQuery(sums=sums))
        return out


def sunjafar_plan(N: int, K: int, theta: int, source=None, *, perms=None) -> SunJafarPlan:
    """Fresh plan with uniform per-message symbol permutations."""
    if perms is None:
        perms = [source.permutation(N**K) for _ in range(K)]
    return SunJafarPlan(N, K, theta, perms)


def sunjafar_round(store: MessageStore, plan: SunJafarPlan):
    """Execute a plan over every subpacket; returns (transcript, decoded)."""
    sub = plan.subpacket
    if store.L % sub:
        raise SchemeError(f"L={store.L} not a multiple of N^K={sub}")
    if store.K != plan.K:
        raise SchemeError("plan message count != store message count")
    dbs = replicate(store, plan.N)
    t = SchemeTranscript("sunjafar", plan.N, store.K, store.L, store.field, plan.theta)
    decoded = [None] * store.L
    for sp in range(store.L // sub):
        offset = sp * sub
        queries = plan.queries(offset)
        values = []  # per db, answer symbols in request order
        for db, q in zip(dbs, queries):
            t.record_query(db.index, q)
            a = serve(db, q)
            t.record_answer(db.index, a)
            values.append(a)
        for n in range(plan.N):
            for pos, req in enumerate(plan.requests[n]):
                if plan.theta not in req.subset:
                    continue
                v = values[n][pos]
                if req.side is not None:
                    m, side_pos = req.side
                    v = v - values[m][side_pos]
                virtual = req.virtuals[plan.theta]
                decoded[offset + plan.perms[plan.theta - 1][virtual]] = v
    assert all(v is not None for v in decoded)
    return t, tuple(decoded)


def sunjafar_downloads_per_db(N: int, K: int) -> int:
    return sum(math.comb(K, t) * (N - 1) ** (t - 1) for t in range(1, K + 1))


def sunjafar_randomness_space(N: int, K: int):
    sub = N**K
    return itertools.product(itertools.permutations(range(sub)), repeat=K)


def sunjafar_randomness_size(N: int, K: int) -> int:
    return math.factorial(N**K) ** K


# ---------------------------------------------------------------------------
# tian: probabilistic base-N key scheme


@dataclass(frozen=True)
class TianQuery:
    """Per-database digit vectors derived from one random key.

    All non-desired coordinates copy the key F; the desired coordinate
    of database n is fixed so the digits of query n sum to n-1 mod N.
    """

    N: int
    theta: int
    F: tuple
    digit_vectors: tuple  # N tuples of K digits


def tian_query(N: int, K: int, theta: int, F) -> TianQuery:
    F = tuple(int(v) for v in F)
    if len(F) != K - 1 or any(not 0 <= v < N for v in F):
        raise SchemeError(f"key must be {K - 1} digits in [0, {N})")
    if not 1 <= theta <= K:
        raise SchemeError(f"theta={theta} outside [1, {K}]")
    vectors = []
    for n in range(1, N + 1):
        own = (n - 1 - sum(F)) % N
        digits = F[: theta - 1] + (own,) + F[theta - 1 :]
        vectors.append(digits)
    return TianQuery(N=N, theta=theta, F=F, digit_vectors=tuple(vectors))


def tian_round(store: MessageStore, theta: int, N: int, F=None, source=None):
    """Run the key scheme; returns (transcript, decoded message).

    Messages are processed in (N-1)-symbol subpackets with an implicit
    zero dummy symbol at digit 0.  A database whose digit vector is
    all-zero is not downloaded: its answer is zero a priori.
    """
    width = N - 1
    if store.L % width:
        raise SchemeError(f"L={store.L} not a multiple of N-1={width}")
    if F is None:
        F = tuple(source.randbelow(N) for _ in range(store.K - 1))
    tq = tian_query(N, store.K, theta, F)
    dbs = replicate(store, N)
    t = SchemeTranscript("tian", N, store.K, store.L, store.field, theta)
    skipped = [n + 1 for n, digits in enumerate(tq.digit_vectors) if not any(digits)]
    t.extras["skipped_dbs"] = skipped
    decoded = [None] * store.L
    base_db = next(n for n, d in enumerate(tq.digit_vectors) if d[theta - 1] == 0)
    for sp in range(store.L // width):
        offset = sp * width
        answers = {}
        for db, digits in zip(dbs, tq.digit_vectors):
            q = IndexSumQuery(digits=digits, offset=offset)
            t.record_query(db.index, q, bits_per_symbol=_index_bits(N))
            if not any(digits):
                continue  # answer is the known zero; nothing to download
            a = serve(db, q)
            t.record_answer(db.index, a)
            answers[db.index - 1] = a[0]
        base = answers.get(base_db, store.field.zero())
        for n, digits in enumerate(tq.digit_vectors):
            j = digits[theta - 1]
            if j == 0:
                continue
            decoded[offset + j - 1] = answers[n] - base
    return t, tuple(decoded)


def tian_key_space(N: int, K: int):
    return itertools.product(range(N), repeat=K - 1)


def tian_key_count(N: int, K: int) -> int:
    return N ** (K - 1)


def tian_expected_rate(N: int, K: int) -> Fraction:
    """Exact expected rate over the uniform key: equals c_pir(N, K).

    All keys download N symbols per subpacket except the all-zero key,
    which downloads N-1; each subpacket yields N-1 desired symbols.
    """
    if N < 2 or K < 1:
        raise SchemeError("need N >= 2 and K >= 1")
    keys = N ** (K - 1)
    return Fraction((N - 1) * keys, N * (keys - 1) + (N - 1))


# ---------------------------------------------------------------------------
# leaky: fixed query-option table for N=2, K=2

_LEAKY_ROWS = {
    1: (
        ((1, 0), None),
        (None, (1, 0)),
        ((0, 1), (1, 1)),
        ((1, 1), (0, 1)),
    ),
    2: (
        ((0, 1), None),
        (None, (0, 1)),
        ((1, 0), (1, 1)),
        ((1, 1), (1, 0)),
    ),
}


def leaky_option(theta: int, row: int) -> tuple:
    """Row of the query-option table: per-database combination or None."""
    return _LEAKY_ROWS[theta][row]


def leaky_round(store: MessageStore, theta: int, source=None, *, row=None):
    """Run one uniformly selected row of the option table; N=2, K=2 only."""
    if store.K != 2:
        raise SchemeError("query-option table is defined for K=2 only")
    if not 1 <= theta <= 2:
        raise SchemeError("theta must be 1 or 2")
    if row is None:
        row = source.randbelow(4)
    if not 0 <= row <= 3:
        raise SchemeError("row must be in [0, 4)")
    option = _LEAKY_ROWS[theta][row]
    dbs = replicate(store, 2)
    t = SchemeTranscript("leaky", 2, 2, store.L, store.field, theta)
    t.extras["row"] = row
    answers = []
    for db, coeffs in zip(dbs, option):
        if coeffs is None:
            answers.append(None)
            continue
        q = MessageCombinationQuery(coeffs=coeffs)
        t.record_query(db.index, q)
        a = serve(db, q)
        t.record_answer(db.index, a)
        answers.append(a)
    if row < 2:
        decoded = answers[0] if answers[0] is not None else answers[1]
    else:
        single, both = (answers[0], answers[1]) if row == 2 else (answers[1], answers[0])
        decoded = tuple(b - s for s, b in zip(single, both))
    return t, tuple(decoded)


def leaky_row_space():
    return range(4)


def leaky_expected_rate() -> Fraction:
    """Inverse of the expected per-message download over the four rows."""
    downloads = Fraction(0)
    for row in leaky_row_space():
        option = _LEAKY_ROWS[1][row]
        downloads += Fraction(sum(1 for c in option if c is not None), 4)
    return 1 / downloads
