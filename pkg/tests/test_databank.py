import json
from fractions import Fraction

import pytest

from pirlab.databank import (
    EmptyTranscriptError,
    IndexSumQuery,
    LinearQuery,
    MalformedQueryError,
    MessageCombinationQuery,
    MessageStore,
    SchemeTranscript,
    SymbolSumQuery,
    UnknownSchemeError,
    empirical_rate,
    replicate,
    serve,
)
from pirlab.field import PrimeField
from pirlab.pir import cgks_round, residual_round
from pirlab.rng import SeededSource

F7 = PrimeField(7)


def store_k3():
    return MessageStore(F7, [[1], [2], [3]])


def test_replicate_creates_independent_states():
    dbs = replicate(store_k3(), 2)
    assert len(dbs) == 2
    assert dbs[0].store.messages == dbs[1].store.messages
    dbs[0].query_log.append("poke")
    dbs[0].round_cache["r"] = 1
    assert dbs[1].query_log == [] and dbs[1].round_cache == {}
    assert replicate(store_k3(), 1)[0].index == 1
    with pytest.raises(ValueError):
        replicate(store_k3(), 0)


def test_store_validation():
    with pytest.raises(ValueError):
        MessageStore(F7, [])
    with pytest.raises(ValueError):
        MessageStore(F7, [[1], [2, 3]])


def test_serve_linear_dot_product():
    db = replicate(store_k3(), 1)[0]
    q = LinearQuery(coeffs=((2,), (3,), (1,)))
    # 2*1 + 3*2 + 1*3 = 11 = 4 mod 7
    assert serve(db, q)[0].value == 4
    assert db.query_log == [q]
    zero = LinearQuery(coeffs=((0,), (0,), (0,)))
    assert serve(db, zero)[0].value == 0


def test_serve_rejects_malformed_and_unknown():
    db = replicate(store_k3(), 1)[0]
    with pytest.raises(MalformedQueryError):
        serve(db, LinearQuery(coeffs=((1,), (1,))))  # wrong row count

    class Oddball:
        kind = "no-such-rule"

        def symbols(self):
            return 0

    with pytest.raises(UnknownSchemeError):
        serve(db, Oddball())


def test_serve_is_deterministic_on_cloned_states():
    q = LinearQuery(coeffs=((1,), (4,), (2,)))
    a = serve(replicate(store_k3(), 2)[0], q)
    b = serve(replicate(store_k3(), 2)[1], q)
    assert a == b


def test_index_sum_and_symbol_sum_rules():
    store = MessageStore(F7, [[1, 2], [3, 4]])
    db = replicate(store, 1)[0]
    # digits (0, 2): dummy for message 1, second symbol of message 2
    assert serve(db, IndexSumQuery(digits=(0, 2)))[0].value == 4
    assert serve(db, SymbolSumQuery(sums=(((1, 0), (2, 1)), ((2, 0),))))[0].value == 5
    with pytest.raises(MalformedQueryError):
        serve(db, IndexSumQuery(digits=(0, 3)))
    with pytest.raises(MalformedQueryError):
        serve(db, SymbolSumQuery(sums=(((3, 0),),)))


def test_msg_linear_rule_returns_whole_combination():
    store = MessageStore(F7, [[1, 2], [3, 4]])
    db = replicate(store, 1)[0]
    values = serve(db, MessageCombinationQuery(coeffs=(1, 1)))
    assert [v.value for v in values] == [4, 6]


def test_empirical_rates_from_scheme_runs():
    # two symbols down for one desired symbol
    t, _ = cgks_round(store_k3(), 2, SeededSource(1))
    assert empirical_rate(t).rate == Fraction(1, 2)
    # three symbols down for a two-symbol message
    store = MessageStore(F7, [[1, 2], [3, 4]])
    t2, _ = residual_round(store, 1, 3, SeededSource(2))
    assert empirical_rate(t2, capacity=Fraction(2, 3)).matches_capacity()


def test_rate_errors_without_downloads():
    t = SchemeTranscript("empty", 2, 3, 1, F7, 1)
    with pytest.raises(EmptyTranscriptError):
        t.rate()


def test_accounting_matches_served_answers():
    store = MessageStore(F7, [[1, 2], [3, 4]])
    t, _ = residual_round(store, 1, 3, SeededSource(3))
    total = sum(len(rec.values) for rec in t.answers)
    assert t.downloaded_symbols() == total == 3
    assert t.downloaded_bits() == total * F7.symbol_bits


def test_transcript_json_schema():
    t, _ = cgks_round(store_k3(), 2, SeededSource(4))
    doc = t.to_json()
    assert set(doc) >= {"scheme", "N", "K", "L", "q", "theta", "per_db", "rate"}
    assert doc["q"] == "7" and doc["rate"] == "1/2"
    assert [d["n"] for d in doc["per_db"]] == [1, 2]
    assert all(
        set(d) == {"n", "uploaded_symbols", "downloaded_symbols"}
        for d in doc["per_db"]
    )
    json.dumps(doc)  # must be serializable as-is


def test_transcript_rejects_bad_theta():
    with pytest.raises(ValueError):
        SchemeTranscript("x", 2, 3, 1, F7, 4)
