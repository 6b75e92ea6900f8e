"""Simulated replicated databases, transcripts, and exact cost accounting.

The databank knows nothing about any particular retrieval scheme.  A
scheme expresses itself as tagged query objects; each tag has a
registered answer rule that maps (database state, query) to a tuple of
field elements computed from that database's state alone.  Non-collusion
is structural: states share no mutable data and each one only ever sees
its own queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .field import FieldElement, PrimeField


class DatabankError(Exception):
    pass


class UnknownSchemeError(DatabankError):
    """Query tag has no registered answer rule."""


class MalformedQueryError(DatabankError):
    """Query shape does not match the store."""


class EmptyTranscriptError(DatabankError):
    """Rate is undefined without downloads."""


# ---------------------------------------------------------------------------
# storage


class MessageStore:
    """K messages of L symbols each, all from one field. Immutable."""

    __slots__ = ("field", "messages")

    def __init__(self, field: PrimeField, messages):
        msgs = tuple(tuple(field(v) if isinstance(v, int) else v for v in m) for m in messages)
        if not msgs:
            raise ValueError("need at least one message")
        length = len(msgs[0])
        if length < 1 or any(len(m) != length for m in msgs):
            raise ValueError("all messages must share one length >= 1")
        self.field = field
        self.messages = msgs

    @property
    def K(self) -> int:
        return len(self.messages)

    @property
    def L(self) -> int:
        return len(self.messages[0])

    def message(self, k: int) -> tuple:
        """Message k, 1-indexed."""
        return self.messages[k - 1]

    def symbol(self, k: int, position: int) -> FieldElement:
        """Symbol at 0-based ``position`` of 1-indexed message k."""
        return self.messages[k - 1][position]

    @classmethod
    def random(cls, field: PrimeField, K: int, L: int, source) -> "MessageStore":
        return cls(field, [[source.randbelow(field.q) for _ in range(L)] for _ in range(K)])


@dataclass
class DatabaseState:
    """One simulated database: replicated store plus private logs.

    ``store`` is a MessageStore for replicated schemes or a mutable
    share table for secret-shared storage.  ``round_cache`` lets a
    scheme stash per-round data the database legitimately holds (e.g. a
    read query reused by a later write).
    """

    index: int
    store: object
    pool: object | None = None
    query_log: list = dc_field(default_factory=list)
    round_cache: dict = dc_field(default_factory=dict)


def replicate(store: MessageStore, N: int) -> list:
    """N independent database states holding the same content."""
    if N < 1:
        raise ValueError("need at least one database")
    return [DatabaseState(index=n, store=store) for n in range(1, N + 1)]


# ---------------------------------------------------------------------------
# queries and answer rules

_ANSWER_RULES: dict = {}


def register_answer_rule(kind: str, rule) -> None:
    _ANSWER_RULES[kind] = rule


def serve(db: DatabaseState, query) -> tuple:
    """Answer a query from this database's own state only.

    Appends the query to the database's log and returns a tuple of
    FieldElement.  Raises UnknownSchemeError for unregistered tags and
    MalformedQueryError when the query does not fit the store.
    """
    kind = getattr(query, "kind", None)
    rule = _ANSWER_RULES.get(kind)
    if rule is None:
        raise UnknownSchemeError(f"no answer rule for query kind {kind!r}")
    db.query_log.append(query)
    return rule(db, query)


@dataclass(frozen=True)
class LinearQuery:
    """Per-message coefficient rows applied to one subpacket.

    ``coeffs[k][j]`` multiplies symbol ``offset + j`` of message k+1;
    the answer is the single summed symbol.
    """

    coeffs: tuple  # K rows of subpacket-width value tuples (ints mod q)
    offset: int = 0
    kind = "linear"

    def width(self) -> int:
        return len(self.coeffs[0]) if self.coeffs else 0

    def symbols(self) -> int:
        return sum(len(row) for row in self.coeffs)

    def canonical(self) -> str:
        rows = "|".join(",".join(str(v) for v in row) for row in self.coeffs)
        return f"lin:o={self.offset};{rows}"


def _serve_linear(db: DatabaseState, query: LinearQuery):
    store = db.store
    if len(query.coeffs) != store.K:
        raise MalformedQueryError("coefficient rows != message count")
    w = query.width()
    if query.offset < 0 or query.offset + w > store.L:
        raise MalformedQueryError("subpacket window outside the store")
    total = store.field.zero()
    for k, row in enumerate(query.coeffs, start=1):
        if len(row) != w:
            raise MalformedQueryError("ragged coefficient rows")
        for j, c in enumerate(row):
            total = total + store.field(c) * store.symbol(k, query.offset + j)
    return (total,)


@dataclass(frozen=True)
class MessageCombinationQuery:
    """Request one linear combination of whole messages; answer has L symbols."""

    coeffs: tuple  # K scalars (ints mod q)
    kind = "msg-linear"

    def symbols(self) -> int:
        return len(self.coeffs)

    def canonical(self) -> str:
        return "msg:" + ",".join(str(v) for v in self.coeffs)


def _serve_msg_linear(db: DatabaseState, query: MessageCombinationQuery):
    store = db.store
    if len(query.coeffs) != store.K:
        raise MalformedQueryError("coefficient count != message count")
    out = []
    for position in range(store.L):
        total = store.field.zero()
        for k, c in enumerate(query.coeffs, start=1):
            total = total + store.field(c) * store.symbol(k, position)
        out.append(total)
    return tuple(out)


@dataclass(frozen=True)
class SymbolSumQuery:
    """Explicit sums of named symbols: each sum is ((message, position), ...)."""

    sums: tuple
    kind = "symbol-sums"

    def symbols(self) -> int:
        return sum(len(s) for s in self.sums)

    def canonical(self) -> str:
        return "sum:" + "|".join(
            "+".join(f"{k}.{pos}" for k, pos in s) for s in self.sums
        )


def _serve_symbol_sums(db: DatabaseState, query: SymbolSumQuery):
    store = db.store
    out = []
    for s in query.sums:
        total = store.field.zero()
        for k, pos in s:
            if not (1 <= k <= store.K) or not (0 <= pos < store.L):
                raise MalformedQueryError(f"symbol ({k},{pos}) outside the store")
            total = total + store.symbol(k, pos)
        out.append(total)
    return tuple(out)


@dataclass(frozen=True)
class IndexSumQuery:
    """One base-N digit per message; answer sums the addressed symbols.

    Digit 0 addresses the implicit dummy symbol (value 0) prepended to
    each message's subpacket; digit j >= 1 addresses real symbol
    ``offset + j - 1``.
    """

    digits: tuple  # K ints in [0, N)
    offset: int = 0
    kind = "index-sum"

    def symbols(self) -> int:
        return len(self.digits)

    def canonical(self) -> str:
        return f"idx:o={self.offset};" + ",".join(str(d) for d in self.digits)


def _serve_index_sum(db: DatabaseState, query: IndexSumQuery):
    store = db.store
    if len(query.digits) != store.K:
        raise MalformedQueryError("digit count != message count")
    total = store.field.zero()
    for k, digit in enumerate(query.digits, start=1):
        if digit == 0:
            continue
        pos = query.offset + digit - 1
        if not (0 <= pos < store.L):
            raise MalformedQueryError("digit addresses outside the store")
        total = total + store.symbol(k, pos)
    return (total,)


@dataclass(frozen=True)
class MaskedQuery:
    """Wraps a base query; the answer gains the shared pool symbol ``slot``."""

    base: object
    slot: int
    kind = "masked"

    def symbols(self) -> int:
        return self.base.symbols()

    def canonical(self) -> str:
        return f"{self.base.canonical()};crs={self.slot}"


def _serve_masked(db: DatabaseState, query: MaskedQuery):
    if db.pool is None:
        raise MalformedQueryError("database holds no common randomness pool")
    base_rule = _ANSWER_RULES.get(query.base.kind)
    if base_rule is None:
        raise UnknownSchemeError(f"no answer rule for query kind {query.base.kind!r}")
    s = db.pool.get(query.slot)
    return tuple(a + s for a in base_rule(db, query.base))


register_answer_rule("linear", _serve_linear)
register_answer_rule("msg-linear", _serve_msg_linear)
register_answer_rule("symbol-sums", _serve_symbol_sums)
register_answer_rule("index-sum", _serve_index_sum)
register_answer_rule("masked", _serve_masked)


# ---------------------------------------------------------------------------
# transcripts


@dataclass(frozen=True)
class QueryRecord:
    db_index: int
    query: object
    symbols: int
    bits_per_symbol: int


@dataclass(frozen=True)
class AnswerRecord:
    db_index: int
    values: tuple  # FieldElement
    bits_per_symbol: int


class SchemeTranscript:
    """Complete record of one protocol run, the input to all accounting."""

    def __init__(self, scheme: str, N: int, K: int, L: int, field: PrimeField, theta: int):
        if not 1 <= theta <= K:
            raise ValueError(f"theta={theta} outside [1, {K}]")
        self.scheme = scheme
        self.N = N
        self.K = K
        self.L = L
        self.field = field
        self.theta = theta
        self.queries: list[QueryRecord] = []
        self.answers: list[AnswerRecord] = []
        self.extras: dict = {}

    def record_query(self, db_index: int, query, bits_per_symbol: int | None = None):
        bps = self.field.symbol_bits if bits_per_symbol is None else bits_per_symbol
        self.queries.append(QueryRecord(db_index, query, query.symbols(), bps))

    def record_query_symbols(
        self, db_index: int, symbols: int, bits_per_symbol: int | None = None
    ):
        """Account an upload that is not a databank query object."""
        bps = self.field.symbol_bits if bits_per_symbol is None else bits_per_symbol
        self.queries.append(QueryRecord(db_index, None, symbols, bps))

    def record_answer(self, db_index: int, values):
        values = tuple(values)
        self.answers.append(AnswerRecord(db_index, values, self.field.symbol_bits))

    def uploaded_symbols(self, db_index: int | None = None) -> int:
        return sum(
            r.symbols for r in self.queries if db_index is None or r.db_index == db_index
        )

    def downloaded_symbols(self, db_index: int | None = None) -> int:
        return sum(
            len(r.values) for r in self.answers if db_index is None or r.db_index == db_index
        )

    def uploaded_bits(self) -> int:
        return sum(r.symbols * r.bits_per_symbol for r in self.queries)

    def downloaded_bits(self) -> int:
        return sum(len(r.values) * r.bits_per_symbol for r in self.answers)

    def rate(self) -> Fraction:
        down = self.downloaded_symbols()
        if down == 0:
            raise EmptyTranscriptError("no downloads recorded")
        return Fraction(self.L, down)

    def to_json(self) -> dict:
        """Transcript object under the shared report schema.

        Values that may exceed 2^53 (the modulus, the rate) are decimal
        strings so any JSON reader round-trips them losslessly.
        """
        rate = self.rate()
        doc = {
            "scheme": self.scheme,
            "N": self.N,
            "K": self.K,
            "L": self.L,
            "q": str(self.field.q),
            "theta": self.theta,
            "per_db": [
                {
                    "n": n,
                    "uploaded_symbols": self.uploaded_symbols(n),
                    "downloaded_symbols": self.downloaded_symbols(n),
                }
                for n in range(1, self.N + 1)
            ],
            "rate": f"{rate.numerator}/{rate.denominator}",
        }
        doc.update(self.extras)
        return doc


@dataclass(frozen=True)
class CostReport:
    """Measured rates/costs as exact rationals, next to their closed forms."""

    rate: Fraction | None = None
    capacity: Fraction | None = None
    reading_cost: Fraction | None = None
    writing_cost: Fraction | None = None
    query_symbols: int | None = None
    pool_symbols: int | None = None

    def matches_capacity(self) -> bool:
        return self.capacity is not None and self.rate == self.capacity

    def to_json(self) -> dict:
        def enc(x):
            if x is None:
                return None
            if isinstance(x, Fraction):
                return f"{x.numerator}/{x.denominator}"
            return x

        return {
            "rate": enc(self.rate),
            "capacity": enc(self.capacity),
            "reading_cost": enc(self.reading_cost),
            "writing_cost": enc(self.writing_cost),
            "query_symbols": self.query_symbols,
            "pool_symbols": self.pool_symbols,
        }


def empirical_rate(transcript: SchemeTranscript, capacity: Fraction | None = None) -> CostReport:
    """Exact measured rate of a completed run: L / downloaded symbols."""
    return CostReport(
        rate=transcript.rate(),
        capacity=capacity,
        query_symbols=transcript.uploaded_symbols(),
        pool_symbols=transcript.extras.get("pool_symbols"),
    )
