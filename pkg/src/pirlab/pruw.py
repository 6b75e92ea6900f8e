"""Private read-update-write over secret-shared submodel storage.

Each of M submodels is stored as per-position evaluations of a noisy
polynomial: database n holds, for submodel k and position l,

    S = w + (f - a_n) * (Z_0 + Z_1 a_n + ... + Z_{N-3} a_n^{N-3})

where w is the plaintext symbol, f and the pairwise-distinct a_n are
public constants, and the Z_i are fresh uniform noise shared across
databases.  A single evaluation is one-time-pad uniform; the value at
f of the interpolated polynomial is w.

Reading submodel t sends database n the vector e_t / (f - a_n) + Zbar;
its dot product with the stored shares has the shape

    A = w_t / (f - a_n) + V_0 + V_1 a_n + ... + V_{N-2} a_n^{N-2}

so the N answers solve an N x N system for {w_t, V_i}.  Writing sends
U = delta + (f - a_n) Zdot; the database folds it into storage through
the cached read query as (f - a_n) * U * Q, which adds delta to the
desired submodel's plaintext and only refreshes noise elsewhere.

Writes preserve the storage form only when the noise degree N-3 is at
least 1, hence N >= 4 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .databank import CostReport, DatabaseState, SchemeTranscript
from .field import FieldElement, PrimeField, lagrange_at, solve_linear


class PruwError(Exception):
    pass


@dataclass(frozen=True)
class EvaluationFrame:
    """Public evaluation geometry: the constant f and one alpha per database."""

    field: PrimeField
    f: FieldElement
    alphas: tuple
    M: int
    L: int

    def __post_init__(self):
        values = [a.value for a in self.alphas]
        if len(set(values)) != len(values):
            raise PruwError("evaluation points must be pairwise distinct")
        if self.f.value in values:
            raise PruwError("f must differ from every evaluation point")
        if self.field.q < self.N + 1:
            raise PruwError(f"need q >= N+1 = {self.N + 1}, got q = {self.field.q}")
        if self.M < 1 or self.L < 1:
            raise PruwError("need M >= 1 and L >= 1")

    @property
    def N(self) -> int:
        return len(self.alphas)

    @classmethod
    def standard(cls, field: PrimeField, N: int, M: int, L: int) -> "EvaluationFrame":
        """Evaluation points 1..N and f = N+1 (or f = 0 when q = N+1)."""
        f_value = N + 1 if field.q > N + 1 else 0
        return cls(
            field=field,
            f=field(f_value),
            alphas=tuple(field(n) for n in range(1, N + 1)),
            M=M,
            L=L,
        )

    def gaps(self) -> tuple:
        """(f - a_n) for every database; all nonzero by construction."""
        return tuple(self.f - a for a in self.alphas)


class ShareTable:
    """One database's storage: M x L noisy evaluations at its alpha."""

    def __init__(self, alpha: FieldElement, values):
        self.alpha = alpha
        self.values = [list(row) for row in values]

    def add_increment(self, k: int, position: int, delta: FieldElement):
        self.values[k - 1][position] = self.values[k - 1][position] + delta


# ---------------------------------------------------------------------------
# polynomial shapes


def storage_noise_degree(N: int) -> int:
    return N - 3


def share_value(frame: EvaluationFrame, n: int, w, noise) -> FieldElement:
    """Evaluate one storage share at database n (1-based).

    ``noise`` lists the N-2 coefficients Z_0..Z_{N-3}.
    """
    field = frame.field
    w = field(w) if isinstance(w, int) else w
    alpha = frame.alphas[n - 1]
    gap = frame.f - alpha
    acc = field.zero()
    power = field.one()
    for z in noise:
        z = field(z) if isinstance(z, int) else z
        acc = acc + z * power
        power = power * alpha
    return w + gap * acc


def query_coordinate(frame: EvaluationFrame, n: int, desired: bool, zbar) -> FieldElement:
    field = frame.field
    zbar = field(zbar) if isinstance(zbar, int) else zbar
    if not desired:
        return zbar
    gap = frame.f - frame.alphas[n - 1]
    return gap.inv() + zbar


def query_vector(frame: EvaluationFrame, n: int, theta: int, zbar_vec) -> tuple:
    return tuple(
        query_coordinate(frame, n, k == theta, z)
        for k, z in enumerate(zbar_vec, start=1)
    )


def update_value(frame: EvaluationFrame, n: int, delta, zdot) -> FieldElement:
    field = frame.field
    delta = field(delta) if isinstance(delta, int) else delta
    zdot = field(zdot) if isinstance(zdot, int) else zdot
    return delta + (frame.f - frame.alphas[n - 1]) * zdot


def decode_share_plaintext(frame: EvaluationFrame, values) -> FieldElement:
    """Interpolate one (k, l) slice of shares and read the value at f.

    Independent of the read path; used as the verification oracle.
    """
    points = list(zip(frame.alphas, values))
    return lagrange_at(points, frame.f)


def shares_consistent(frame: EvaluationFrame, values) -> bool:
    """True when N evaluations agree with one degree <= N-2 polynomial."""
    values = list(values)
    points = list(zip(frame.alphas, values))[:-1]
    predicted = lagrange_at(points, frame.alphas[-1])
    return predicted == values[-1]


# ---------------------------------------------------------------------------
# protocol phases


def pruw_init(models, frame: EvaluationFrame, source) -> list:
    """Secret-share M x L plaintext models into N database states.

    Fresh noise per (submodel, position); every database's table is an
    evaluation of the same polynomials at its own point.
    """
    if frame.N < 4:
        raise PruwError("storage form needs N >= 4 (write-phase noise degree)")
    field = frame.field
    models = [[field(v) if isinstance(v, int) else v for v in row] for row in models]
    if len(models) != frame.M or any(len(row) != frame.L for row in models):
        raise PruwError(f"models must be {frame.M} x {frame.L}")
    degree = storage_noise_degree(frame.N)
    tables = [[] for _ in range(frame.N)]
    for k in range(frame.M):
        rows = [[] for _ in range(frame.N)]
        for l in range(frame.L):
            noise = [source.randbelow(field.q) for _ in range(degree + 1)]
            for n in range(1, frame.N + 1):
                rows[n - 1].append(share_value(frame, n, models[k][l], noise))
        for n in range(frame.N):
            tables[n].append(rows[n])
    return [
        DatabaseState(index=n, store=ShareTable(frame.alphas[n - 1], tables[n - 1]))
        for n in range(1, frame.N + 1)
    ]


def pruw_read(
    frame: EvaluationFrame,
    dbs: list,
    theta: int,
    source=None,
    *,
    zbar=None,
    round_id: str = "round",
    positions=None,
):
    """Reading phase: returns (transcript, decoded submodel values).

    ``positions`` restricts the read to a subset of 0-based positions
    (random-sparsification support); default is every position.  Each
    database caches the query under ``round_id`` for the writing phase.
    """
    if not 1 <= theta <= frame.M:
        raise PruwError(f"theta={theta} outside [1, {frame.M}]")
    field = frame.field
    if zbar is None:
        zbar = [source.randbelow(field.q) for _ in range(frame.M)]
    positions = list(range(frame.L)) if positions is None else sorted(positions)
    t = SchemeTranscript("pruw-read", frame.N, frame.M, frame.L, field, theta)
    answers = []  # per db, per position
    for db in dbs:
        q_n = query_vector(frame, db.index, theta, zbar)
        db.round_cache[round_id] = q_n
        db.query_log.append(("pruw-read", round_id, q_n))
        per_pos = []
        table = db.store
        for l in positions:
            acc = field.zero()
            for k in range(frame.M):
                acc = acc + table.values[k][l] * q_n[k]
            per_pos.append(acc)
        answers.append(per_pos)
        t.record_answer(db.index, per_pos)
        t.record_query_symbols(db.index, frame.M)
    decoded = {}
    gaps = frame.gaps()
    for idx, l in enumerate(positions):
        rows = []
        rhs = []
        for n in range(frame.N):
            alpha = frame.alphas[n]
            row = [gaps[n].inv()]
            power = field.one()
            for _ in range(frame.N - 1):
                row.append(power)
                power = power * alpha
            rows.append(row)
            rhs.append(answers[n][idx])
        solution = solve_linear(rows, rhs)
        decoded[l] = solution[0]
    t.extras["positions"] = positions
    return t, decoded


def pruw_write(
    frame: EvaluationFrame,
    dbs: list,
    theta: int,
    deltas,
    source=None,
    *,
    zdots=None,
    round_id: str = "round",
    positions=None,
):
    """Writing phase: fold masked updates into every database's storage.

    ``deltas`` maps the full submodel (length L); only ``positions``
    are transmitted.  Databases reuse the cached read query of the same
    round; writing without that read is an error.
    """
    field = frame.field
    deltas = [field(v) if isinstance(v, int) else v for v in deltas]
    if len(deltas) != frame.L:
        raise PruwError(f"update must have length L={frame.L}")
    positions = list(range(frame.L)) if positions is None else sorted(positions)
    if zdots is None:
        zdots = {l: source.randbelow(field.q) for l in positions}
    t = SchemeTranscript("pruw-write", frame.N, frame.M, frame.L, field, theta)
    for db in dbs:
        q_n = db.round_cache.get(round_id)
        if q_n is None:
            raise PruwError(f"database {db.index} has no cached query for {round_id!r}")
        gap = frame.f - frame.alphas[db.index - 1]
        sent = []
        for l in positions:
            u = deltas[l] + gap * field(zdots[l])
            sent.append(u)
            scaled = gap * u
            for k in range(1, frame.M + 1):
                db.store.add_increment(k, l, scaled * q_n[k - 1])
        db.query_log.append(("pruw-write", round_id, tuple(sent)))
        t.record_query_symbols(db.index, len(sent))
    t.extras["positions"] = positions
    return t


def read_cost(transcript: SchemeTranscript) -> Fraction:
    """Downloaded answer symbols per submodel symbol."""
    return Fraction(transcript.downloaded_symbols(), transcript.L)


def write_cost(transcript: SchemeTranscript) -> Fraction:
    """Uploaded update symbols per submodel symbol."""
    return Fraction(transcript.uploaded_symbols(), transcript.L)


@dataclass
class RoundtripReport:
    """Outcome of init -> read -> write -> read-back verification."""

    first_read_ok: bool
    updated_ok: bool
    others_ok: bool
    costs: CostReport

    @property
    def ok(self) -> bool:
        return self.first_read_ok and self.updated_ok and self.others_ok


def pruw_roundtrip(
    frame: EvaluationFrame, models, theta: int, deltas, source
) -> RoundtripReport:
    """Full protocol pass, verified against a plaintext shadow copy."""
    field = frame.field
    shadow = [
        [field(v) if isinstance(v, int) else v for v in row] for row in models
    ]
    dbs = pruw_init(shadow, frame, source.child("init"))
    rt, first = pruw_read(frame, dbs, theta, source.child("read"), round_id="t0")
    first_ok = all(first[l] == shadow[theta - 1][l] for l in range(frame.L))
    deltas = [field(v) if isinstance(v, int) else v for v in deltas]
    wt = pruw_write(frame, dbs, theta, deltas, source.child("write"), round_id="t0")
    expected = [
        [
            shadow[k][l] + (deltas[l] if k == theta - 1 else field.zero())
            for l in range(frame.L)
        ]
        for k in range(frame.M)
    ]
    updated_ok = True
    others_ok = True
    for k in range(1, frame.M + 1):
        _, back = pruw_read(frame, dbs, k, source.child(f"verify-{k}"), round_id=f"v{k}")
        match = all(back[l] == expected[k - 1][l] for l in range(frame.L))
        if k == theta:
            updated_ok = match
        else:
            others_ok = others_ok and match
    costs = CostReport(
        reading_cost=read_cost(rt),
        writing_cost=write_cost(wt),
        query_symbols=rt.uploaded_symbols(),
    )
    return RoundtripReport(first_ok, updated_ok, others_ok, costs)


def random_sparsification_costs(
    frame: EvaluationFrame, models, theta: int, deltas, d_read, d_write, source
) -> tuple:
    """Measured (reading, writing) costs when skipping random positions.

    ``d_read`` and ``d_write`` are distortion fractions whose products
    with L must be integers, so the measured costs are exact rationals.
    """
    d_read, d_write = Fraction(d_read), Fraction(d_write)
    for d in (d_read, d_write):
        if not 0 <= d <= 1 or (d * frame.L).denominator != 1:
            raise PruwError(f"distortion {d} must keep D*L integral")
    skip_r = int(d_read * frame.L)
    skip_w = int(d_write * frame.L)
    dbs = pruw_init(models, frame, source.child("init"))
    keep_read = source.child("pick-read").sample_indices(frame.L, frame.L - skip_r)
    keep_write = source.child("pick-write").sample_indices(frame.L, frame.L - skip_w)
    rt, _ = pruw_read(
        frame, dbs, theta, source.child("read"), round_id="rd", positions=keep_read
    )
    wt = pruw_write(
        frame,
        dbs,
        theta,
        deltas,
        source.child("write"),
        round_id="rd",
        positions=keep_write,
    )
    return read_cost(rt), write_cost(wt)


def share_tables_to_json(frame: EvaluationFrame, dbs: list) -> dict:
    """Exportable storage snapshot; values as decimal strings."""
    return {
        "M": frame.M,
        "L": frame.L,
        "q": str(frame.field.q),
        "f": str(frame.f.value),
        "per_db": [
            {
                "n": db.index,
                "alpha": str(db.store.alpha.value),
                "shares": [
                    [str(v.value) for v in row] for row in db.store.values
                ],
            }
            for db in dbs
        ],
    }
