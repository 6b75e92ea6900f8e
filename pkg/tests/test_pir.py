import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pirlab.capacity import c_pir
from pirlab.databank import MessageStore
from pirlab.field import PrimeField
from pirlab.pir import (
    SchemeError,
    cgks_round,
    leaky_expected_rate,
    leaky_option,
    leaky_round,
    residual_round,
    sunjafar_downloads_per_db,
    sunjafar_plan,
    sunjafar_round,
    tian_expected_rate,
    tian_key_space,
    tian_query,
    tian_round,
)
from pirlab.rng import SeededSource

F3 = PrimeField(3)
F5 = PrimeField(5)
F7 = PrimeField(7)


def counter_store(field, K, L):
    return MessageStore(field, [[(k * L + l + 1) % field.q for l in range(L)] for k in range(K)])


# ---------------------------------------------------------------------------
# cgks


def test_cgks_difference_decode():
    store = MessageStore(F7, [[4], [6], [1]])
    t, decoded = cgks_round(store, 2, SeededSource("cgks"))
    assert decoded == (store.symbol(2, 0),)
    assert t.rate() == Fraction(1, 2)


def test_cgks_zero_mask_answers():
    store = MessageStore(F7, [[4], [6], [1]])
    t, decoded = cgks_round(store, 1, h=[0, 0, 0])
    assert t.answers[0].values[0].value == 0
    assert t.answers[1].values[0] == store.symbol(1, 0)
    assert decoded == (store.symbol(1, 0),)


def test_cgks_full_mask_enumeration_decodes():
    store = counter_store(F5, 4, 1)
    for theta in range(1, 5):
        for h in itertools.product(range(5), repeat=4):
            _, decoded = cgks_round(store, theta, h=list(h))
            assert decoded == store.message(theta)


def test_cgks_requires_single_symbol_messages():
    with pytest.raises(SchemeError):
        cgks_round(MessageStore(F7, [[1, 2]]), 1, SeededSource(0))


# ---------------------------------------------------------------------------
# residual


def test_residual_three_db_decode_and_rate():
    store = MessageStore(F7, [[1, 2], [3, 4]])
    t, decoded = residual_round(store, 1, 3, SeededSource("res"))
    assert decoded == store.message(1)
    assert t.rate() == Fraction(2, 3)


def test_residual_reduces_to_pair_scheme_at_n2():
    store = MessageStore(F7, [[5], [2], [0]])
    t, decoded = residual_round(store, 3, 2, SeededSource("res2"))
    assert decoded == store.message(3)
    assert t.rate() == Fraction(1, 2)


def test_residual_rate_and_decode_n5():
    store = counter_store(F7, 3, 4)
    t, decoded = residual_round(store, 2, 5, SeededSource("res5"))
    assert decoded == store.message(2)
    assert t.rate() == Fraction(4, 5)


def test_residual_length_precondition():
    with pytest.raises(SchemeError):
        residual_round(MessageStore(F7, [[1, 2, 3]]), 1, 3, SeededSource(0))


def test_residual_full_enumeration_small():
    store = counter_store(F3, 2, 2)
    for theta in (1, 2):
        for h in itertools.product(range(3), repeat=4):
            _, decoded = residual_round(store, theta, 3, h=list(h))
            assert decoded == store.message(theta)


# ---------------------------------------------------------------------------
# sunjafar


def test_plan_counts_per_subset():
    plan = sunjafar_plan(3, 2, 1, SeededSource("plan"))
    for reqs in plan.requests:
        by_subset = {}
        for r in reqs:
            by_subset[r.subset] = by_subset.get(r.subset, 0) + 1
        assert by_subset == {(1,): 1, (2,): 1, (1, 2): 2}
    assert plan.downloads_per_db() == sunjafar_downloads_per_db(3, 2) == 4


def test_plan_side_information_crosses_databases():
    plan = sunjafar_plan(2, 3, 2, SeededSource("side"))
    for n, reqs in enumerate(plan.requests):
        for r in reqs:
            if 2 in r.subset and len(r.subset) > 1:
                m, pos = r.side
                assert m != n
                donor = plan.requests[m][pos]
                assert donor.subset == tuple(k for k in r.subset if k != 2)
                assert all(donor.virtuals[k] == r.virtuals[k] for k in donor.subset)


def test_identity_permutation_reproduces_known_table():
    # N=2, K=2, desired message 1: db1 gets a1, b1, a3+b2; db2 gets a2, b2, a4+b1
    plan = sunjafar_plan(2, 2, 1, perms=[range(4), range(4)])
    q1, q2 = plan.queries()
    assert q1.sums == (((1, 0),), ((2, 0),), ((1, 2), (2, 1)))
    assert q2.sums == (((1, 1),), ((2, 1),), ((1, 3), (2, 0)))


def test_sunjafar_k1_single_download_per_db():
    store = counter_store(F3, 1, 3)
    plan = sunjafar_plan(3, 1, 1, SeededSource("k1"))
    t, decoded = sunjafar_round(store, plan)
    assert plan.downloads_per_db() == 1
    assert decoded == store.message(1)
    assert t.rate() == 1 == c_pir(3, 1)


@pytest.mark.parametrize("N,K", [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2)])
def test_sunjafar_rate_equals_capacity(N, K):
    store = counter_store(F5, K, N**K)
    plan = sunjafar_plan(N, K, 1, SeededSource(f"{N}-{K}"))
    t, decoded = sunjafar_round(store, plan)
    assert decoded == store.message(1)
    assert t.rate() == c_pir(N, K)


def test_sunjafar_full_permutation_enumeration_2x2():
    store = counter_store(F3, 2, 4)
    for theta in (1, 2):
        for p1 in itertools.permutations(range(4)):
            for p2 in itertools.permutations(range(4)):
                plan = sunjafar_plan(2, 2, theta, perms=[p1, p2])
                _, decoded = sunjafar_round(store, plan)
                assert decoded == store.message(theta)


def test_sunjafar_multi_subpacket():
    store = counter_store(F5, 2, 8)
    plan = sunjafar_plan(2, 2, 2, SeededSource("multi"))
    t, decoded = sunjafar_round(store, plan)
    assert decoded == store.message(2)
    assert t.rate() == Fraction(2, 3)


# ---------------------------------------------------------------------------
# tian

TABLE_THETA2 = {
    (0, 0): ("000", "010", "020"),
    (1, 0): ("120", "100", "110"),
    (2, 0): ("210", "220", "200"),
    (0, 1): ("021", "001", "011"),
    (1, 1): ("111", "121", "101"),
    (2, 1): ("201", "211", "221"),
    (0, 2): ("012", "022", "002"),
    (1, 2): ("102", "112", "122"),
    (2, 2): ("222", "202", "212"),
}

TABLE_THETA1 = {
    (0, 0): ("000", "100", "200"),
    (1, 0): ("210", "010", "110"),
    (2, 0): ("120", "220", "020"),
    (0, 1): ("201", "001", "101"),
    (1, 1): ("111", "211", "011"),
    (2, 1): ("021", "121", "221"),
    (0, 2): ("102", "202", "002"),
    (1, 2): ("012", "112", "212"),
    (2, 2): ("222", "022", "122"),
}


@pytest.mark.parametrize("theta,table", [(2, TABLE_THETA2), (1, TABLE_THETA1)])
def test_tian_queries_match_frozen_tables(theta, table):
    for F, expected in table.items():
        tq = tian_query(3, 3, theta, F)
        got = tuple("".join(str(d) for d in v) for v in tq.digit_vectors)
        assert got == expected, (F, got)


def test_tian_query_row_sums():
    for N, K in [(2, 2), (3, 3), (4, 2), (5, 4)]:
        for theta in range(1, K + 1):
            for F in itertools.product(range(N), repeat=K - 1):
                tq = tian_query(N, K, theta, F)
                for n, digits in enumerate(tq.digit_vectors, start=1):
                    assert sum(digits) % N == n - 1
                # desired digit runs over every residue exactly once
                desired = sorted(v[theta - 1] for v in tq.digit_vectors)
                assert desired == list(range(N))


def test_tian_query_rejects_bad_key():
    with pytest.raises(SchemeError):
        tian_query(3, 3, 1, (0, 3))
    with pytest.raises(SchemeError):
        tian_query(3, 3, 1, (0,))


def test_tian_worked_example_decode():
    # F = (0, 2), desired message 2: b1 = A1 - A3, b2 = A2 - A3
    store = MessageStore(F3, [[1, 2], [0, 1], [2, 2]])
    t, decoded = tian_round(store, 2, 3, F=(0, 2))
    assert decoded == store.message(2)
    a = {rec.db_index: rec.values[0] for rec in t.answers}
    assert decoded[0] == a[1] - a[3] and decoded[1] == a[2] - a[3]


def test_tian_all_zero_key_skips_exactly_one_database():
    store = MessageStore(F3, [[1, 2], [0, 1], [2, 2]])
    t, decoded = tian_round(store, 2, 3, F=(0, 0))
    assert decoded == store.message(2)
    assert t.extras["skipped_dbs"] == [1]
    assert t.downloaded_symbols() == 2


def test_tian_enumeration_roundtrip_2x2():
    store = counter_store(F3, 2, 1)
    for theta in (1, 2):
        for F in tian_key_space(2, 2):
            _, decoded = tian_round(store, theta, 2, F=F)
            assert decoded == store.message(theta)


def test_tian_expected_rate_closed_form():
    assert tian_expected_rate(3, 3) == Fraction(9, 13)
    assert tian_expected_rate(2, 2) == Fraction(2, 3)
    assert tian_expected_rate(5, 1) == 1
    for N in (2, 3, 4):
        for K in (1, 2, 3, 4):
            assert tian_expected_rate(N, K) == c_pir(N, K)


def test_tian_expected_rate_matches_measured_average():
    for N, K in [(2, 2), (3, 2), (2, 3), (3, 3)]:
        store = counter_store(F3, K, N - 1)
        downloads = Fraction(0)
        keys = list(tian_key_space(N, K))
        for F in keys:
            t, decoded = tian_round(store, 1, N, F=F)
            assert decoded == store.message(1)
            downloads += Fraction(t.downloaded_symbols(), len(keys))
        assert Fraction(N - 1) / downloads == c_pir(N, K)


# ---------------------------------------------------------------------------
# leaky


def test_leaky_rows_decode_both_messages():
    store = MessageStore(F7, [[2, 3], [4, 5]])
    for theta in (1, 2):
        for row in range(4):
            _, decoded = leaky_round(store, theta, row=row)
            assert decoded == store.message(theta), (theta, row)


def test_leaky_row_three_uses_difference():
    store = MessageStore(F7, [[2], [4]])
    t, decoded = leaky_round(store, 1, row=2)
    # db1 sends message 2, db2 sends the sum; decode subtracts
    assert [rec.values[0].value for rec in t.answers] == [4, 6]
    assert decoded == store.message(1)


def test_leaky_row_one_reads_direct_with_idle_database():
    store = MessageStore(F7, [[2], [4]])
    t, decoded = leaky_round(store, 2, row=0)
    assert decoded == store.message(2)
    assert t.downloaded_symbols(1) == 1 and t.downloaded_symbols(2) == 0


def test_leaky_expected_downloads_over_rows():
    store = MessageStore(F7, [[2, 3], [4, 5]])
    L = store.L
    total = sum(
        leaky_round(store, 1, row=row)[0].downloaded_symbols() for row in range(4)
    )
    assert Fraction(total, 4) == Fraction(3 * L, 2)
    assert leaky_expected_rate() == Fraction(2, 3)


def test_leaky_option_marginal_is_theta_invariant():
    for n in (0, 1):
        for_theta1 = sorted(str(leaky_option(1, r)[n]) for r in range(4))
        for_theta2 = sorted(str(leaky_option(2, r)[n]) for r in range(4))
        assert for_theta1 == for_theta2


def test_leaky_requires_2x2():
    with pytest.raises(SchemeError):
        leaky_round(MessageStore(F7, [[1], [2], [3]]), 1, row=0)


# ---------------------------------------------------------------------------
# cross-scheme decodability property


@given(st.integers(0, 10**9), st.integers(1, 3), st.integers(2, 4))
@settings(max_examples=60, deadline=None)
def test_any_seed_decodes_residual(seed, K, N):
    src = SeededSource(seed)
    store = MessageStore.random(F7, K, N - 1, src.child("store"))
    theta = 1 + src.randbelow(K)
    _, decoded = residual_round(store, theta, N, src.child("h"))
    assert decoded == store.message(theta)


@given(st.integers(0, 10**9), st.integers(1, 2), st.integers(2, 3))
@settings(max_examples=40, deadline=None)
def test_any_seed_decodes_sunjafar(seed, K, N):
    src = SeededSource(seed)
    store = MessageStore.random(F5, K, N**K, src.child("store"))
    theta = 1 + src.randbelow(K)
    plan = sunjafar_plan(N, K, theta, src.child("plan"))
    _, decoded = sunjafar_round(store, plan)
    assert decoded == store.message(theta)
