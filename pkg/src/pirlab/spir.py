"""Symmetric private retrieval: the databases keep their secrets too.

Adding one shared, user-hidden random symbol to every answer of a round
makes the user's view reveal nothing beyond the requested message: the
differences the decoder takes cancel the symbol, while any other
combination of answers stays masked.  Two constructions are provided,
one on the residual-reuse queries and one on the probabilistic key
scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

from .databank import (
    IndexSumQuery,
    MaskedQuery,
    MessageStore,
    SchemeTranscript,
    replicate,
    serve,
)
from .field import PrimeField
from .pir import SchemeError, _index_bits, residual_queries, tian_query


class PoolExhaustedError(Exception):
    """No fresh common randomness left for the round."""


class CommonRandomnessPool:
    """Server-side shared randomness, invisible to the user.

    All databases read the same symbol for a given slot; slots are
    assigned by the round orchestrator and never reused.
    """

    def __init__(self, field: PrimeField, values):
        self.field = field
        self.symbols = tuple(field(v) if isinstance(v, int) else v for v in values)
        self.cursor = 0

    @classmethod
    def generate(cls, field: PrimeField, count: int, source) -> "CommonRandomnessPool":
        return cls(field, [source.randbelow(field.q) for _ in range(count)])

    def assign_next(self) -> int:
        if self.cursor >= len(self.symbols):
            raise PoolExhaustedError("common randomness pool exhausted")
        slot = self.cursor
        self.cursor += 1
        return slot

    def get(self, slot: int):
        if not 0 <= slot < len(self.symbols):
            raise PoolExhaustedError(f"slot {slot} was never provisioned")
        return self.symbols[slot]

    @property
    def remaining(self) -> int:
        return len(self.symbols) - self.cursor


@dataclass(frozen=True)
class UserView:
    """Exactly what the user received, in database order.

    ``answers`` holds one tuple of symbols per database; a database the
    user did not download from contributes an empty tuple.
    """

    scheme: str
    theta: int
    answers: tuple

    def canonical(self) -> tuple:
        return tuple(
            tuple(v.value for v in per_db) for per_db in self.answers
        )


def spir_user_view(transcript: SchemeTranscript) -> UserView:
    """Collect the received symbols from a completed round."""
    per_db = {n: [] for n in range(1, transcript.N + 1)}
    for rec in transcript.answers:
        per_db[rec.db_index].extend(rec.values)
    return UserView(
        scheme=transcript.scheme,
        theta=transcript.theta,
        answers=tuple(tuple(per_db[n]) for n in range(1, transcript.N + 1)),
    )


def spir_round_deterministic(
    store: MessageStore,
    theta: int,
    N: int,
    pool: CommonRandomnessPool,
    source=None,
    *,
    h=None,
):
    """Residual-reuse queries with one pool symbol added to each answer.

    One fresh pool symbol per subpacket round; it cancels in every
    decoder difference, so correctness and the (N-1)/N rate carry over
    unchanged while the user learns nothing about other messages.
    """
    width = N - 1
    if width < 1:
        raise SchemeError("need N >= 2")
    if store.L % width:
        raise SchemeError(f"L={store.L} not a multiple of N-1={width}")
    subpackets = store.L // width
    if pool.remaining < subpackets:
        raise PoolExhaustedError(
            f"round needs {subpackets} fresh symbols, pool has {pool.remaining}"
        )
    if h is None:
        h = [
            [source.randbelow(store.field.q) for _ in range(store.K * width)]
            for _ in range(subpackets)
        ]
    elif subpackets == 1 and h and isinstance(h[0], int):
        h = [h]
    dbs = replicate(store, N)
    for db in dbs:
        db.pool = pool
    t = SchemeTranscript("spir-det", N, store.K, store.L, store.field, theta)
    decoded = [None] * store.L
    consumed = 0
    for sp in range(subpackets):
        offset = sp * width
        slot = pool.assign_next()
        consumed += 1
        queries = residual_queries(store.field, N, store.K, theta, h[sp], offset)
        answers = []
        for db, base in zip(dbs, queries):
            q = MaskedQuery(base=base, slot=slot)
            t.record_query(db.index, q)
            a = serve(db, q)
            t.record_answer(db.index, a)
            answers.append(a[0])
        for j in range(width):
            decoded[offset + j] = answers[j + 1] - answers[0]
    t.extras["pool_symbols"] = consumed
    return t, tuple(decoded)


def spir_round_probabilistic(
    store: MessageStore,
    theta: int,
    N: int,
    pool: CommonRandomnessPool,
    F=None,
    source=None,
):
    """Key-scheme queries with one pool symbol added to each answer.

    Unlike the plain key scheme, every database is downloaded: the
    database whose digits are all zero answers with the bare pool
    symbol, which the decoder needs as its baseline.  N symbols come
    down per subpacket for N-1 desired ones, so the measured rate is
    exactly 1 - 1/N regardless of the key.
    """
    width = N - 1
    if store.L % width:
        raise SchemeError(f"L={store.L} not a multiple of N-1={width}")
    subpackets = store.L // width
    if pool.remaining < subpackets:
        raise PoolExhaustedError(
            f"round needs {subpackets} fresh symbols, pool has {pool.remaining}"
        )
    if F is None:
        F = tuple(source.randbelow(N) for _ in range(store.K - 1))
    tq = tian_query(N, store.K, theta, F)
    dbs = replicate(store, N)
    for db in dbs:
        db.pool = pool
    t = SchemeTranscript("spir-prob", N, store.K, store.L, store.field, theta)
    decoded = [None] * store.L
    consumed = 0
    base_db = next(n for n, d in enumerate(tq.digit_vectors) if d[theta - 1] == 0)
    for sp in range(subpackets):
        offset = sp * width
        slot = pool.assign_next()
        consumed += 1
        answers = []
        for db, digits in zip(dbs, tq.digit_vectors):
            q = MaskedQuery(
                base=IndexSumQuery(digits=digits, offset=offset), slot=slot
            )
            t.record_query(db.index, q, bits_per_symbol=_index_bits(N))
            a = serve(db, q)
            t.record_answer(db.index, a)
            answers.append(a[0])
        for n, digits in enumerate(tq.digit_vectors):
            j = digits[theta - 1]
            if j == 0:
                continue
            decoded[offset + j - 1] = answers[n] - answers[base_db]
    t.extras["pool_symbols"] = consumed
    return t, tuple(decoded)
