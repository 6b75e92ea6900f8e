import itertools
import json
from fractions import Fraction

import pytest

from pirlab.field import PrimeField, lagrange_at
from pirlab.pruw import (
    EvaluationFrame,
    PruwError,
    decode_share_plaintext,
    pruw_init,
    pruw_read,
    pruw_roundtrip,
    pruw_write,
    query_vector,
    random_sparsification_costs,
    share_tables_to_json,
    share_value,
    shares_consistent,
    update_value,
)
from pirlab.rng import SeededSource

F97 = PrimeField(97)
F101 = PrimeField(101)


def frame97(N=4, M=3, L=8):
    return EvaluationFrame.standard(F97, N, M, L)


def random_models(frame, seed):
    src = SeededSource(seed)
    return [
        [src.randbelow(frame.field.q) for _ in range(frame.L)]
        for _ in range(frame.M)
    ]


def test_frame_validation():
    with pytest.raises(PruwError):
        EvaluationFrame(F97, F97(1), (F97(1), F97(2)), 1, 1)  # f collides
    with pytest.raises(PruwError):
        EvaluationFrame(F97, F97(9), (F97(1), F97(1)), 1, 1)  # repeated alpha
    with pytest.raises(PruwError):
        EvaluationFrame.standard(PrimeField(3), 4, 1, 1)  # q < N+1
    f = EvaluationFrame.standard(PrimeField(5), 4, 1, 1)
    assert f.f.value == 0  # q = N+1 still admits a frame


def test_share_matches_explicit_quadratic_form():
    # N=4 storage: w + (f-a)(Z + aY)
    frame = frame97()
    w, Z, Y = 12, 30, 55
    for n in range(1, 5):
        a = frame.alphas[n - 1]
        expected = (
            F97(w) + (frame.f - a) * (F97(Z) + a * F97(Y))
        )
        assert share_value(frame, n, w, (Z, Y)) == expected


def test_share_all_zero_noise_is_plaintext():
    frame = frame97()
    assert all(
        share_value(frame, n, 7, (0, 0)).value == 7 for n in range(1, 5)
    )


def test_share_basis_solve_recovers_plaintext():
    # oracle: interpolate and evaluate at f
    frame = frame97()
    src = SeededSource("basis")
    for _ in range(25):
        w = src.randbelow(97)
        noise = (src.randbelow(97), src.randbelow(97))
        values = [share_value(frame, n, w, noise) for n in range(1, 5)]
        assert decode_share_plaintext(frame, values).value == w
        assert shares_consistent(frame, values)


def test_init_requires_four_databases():
    frame = EvaluationFrame.standard(F97, 3, 2, 2)
    with pytest.raises(PruwError):
        pruw_init([[1, 2], [3, 4]], frame, SeededSource(0))


def test_read_answer_has_the_declared_shape():
    # with all storage noise and query noise zero, A_n = w / (f - a_n)
    frame = frame97(M=3, L=1)
    field = frame.field
    models = [[5], [9], [23]]
    dbs = pruw_init(models, frame, SeededSource("noise-zero"))
    # overwrite storage with zero-noise shares
    for db in dbs:
        for k in range(3):
            db.store.values[k][0] = share_value(frame, db.index, models[k][0], (0, 0))
    t, decoded = pruw_read(frame, dbs, 2, zbar=[0, 0, 0], round_id="r")
    for db, rec in zip(dbs, t.answers):
        gap = frame.f - frame.alphas[db.index - 1]
        assert rec.values[0] == field(9) * gap.inv()
    assert decoded[0].value == 9


def test_read_decodes_under_full_noise():
    frame = EvaluationFrame.standard(F101, 5, 4, 6)
    models = random_models(frame, "n5")
    dbs = pruw_init(models, frame, SeededSource("init5"))
    t, decoded = pruw_read(frame, dbs, 3, SeededSource("read5"), round_id="r")
    assert [decoded[l].value for l in range(6)] == models[2]
    assert t.downloaded_symbols() == 5 * 6


def test_read_decode_agrees_with_lagrange_oracle():
    frame = frame97(M=2, L=3)
    models = random_models(frame, "oracle")
    dbs = pruw_init(models, frame, SeededSource("or-init"))
    t, decoded = pruw_read(frame, dbs, 1, SeededSource("or-read"), round_id="r")
    answers = {rec.db_index: rec.values for rec in t.answers}
    for idx in range(frame.L):
        # (f - a) * A(a) is a polynomial whose value at f is the plaintext
        points = [
            (
                frame.alphas[n - 1],
                (frame.f - frame.alphas[n - 1]) * answers[n][idx],
            )
            for n in range(1, frame.N + 1)
        ]
        assert lagrange_at(points, frame.f) == decoded[idx]


def test_write_updates_desired_and_preserves_form():
    frame = frame97()
    models = random_models(frame, "w")
    dbs = pruw_init(models, frame, SeededSource("w-init"))
    pruw_read(frame, dbs, 2, SeededSource("w-read"), round_id="rw")
    deltas = [3 * l % 97 for l in range(frame.L)]
    pruw_write(frame, dbs, 2, deltas, SeededSource("w-write"), round_id="rw")
    for k in range(1, frame.M + 1):
        for l in range(frame.L):
            values = [db.store.values[k - 1][l] for db in dbs]
            assert shares_consistent(frame, values)
            plain = decode_share_plaintext(frame, values).value
            want = (models[k - 1][l] + (deltas[l] if k == 2 else 0)) % 97
            assert plain == want


def test_write_zero_noise_zero_delta_is_identity():
    frame = frame97(M=2, L=2)
    models = [[1, 2], [3, 4]]
    dbs = pruw_init(models, frame, SeededSource("z"))
    pruw_read(frame, dbs, 1, zbar=[0, 0], round_id="r")
    before = [[list(row) for row in db.store.values] for db in dbs]
    pruw_write(frame, dbs, 1, [0, 0], zdots={0: 0, 1: 0}, round_id="r")
    after = [[list(row) for row in db.store.values] for db in dbs]
    assert before == after


def test_write_without_read_is_rejected():
    frame = frame97(M=2, L=2)
    dbs = pruw_init([[1, 2], [3, 4]], frame, SeededSource("x"))
    with pytest.raises(PruwError):
        pruw_write(frame, dbs, 1, [1, 1], SeededSource("y"), round_id="never-read")


def test_roundtrip_and_costs():
    frame = frame97()
    models = random_models(frame, "rt")
    report = pruw_roundtrip(frame, models, 2, [5] * 8, SeededSource("rt"))
    assert report.ok
    assert report.costs.reading_cost == 4
    assert report.costs.writing_cost == 4
    assert report.costs.query_symbols == 4 * 3  # M per database


def test_two_sequential_writes_accumulate():
    frame = frame97(M=3, L=4)
    field = frame.field
    models = random_models(frame, "seq")
    dbs = pruw_init(models, frame, SeededSource("seq-init"))
    pruw_read(frame, dbs, 1, SeededSource("r1"), round_id="a")
    pruw_write(frame, dbs, 1, [1, 1, 1, 1], SeededSource("w1"), round_id="a")
    pruw_read(frame, dbs, 3, SeededSource("r2"), round_id="b")
    pruw_write(frame, dbs, 3, [2, 0, 2, 0], SeededSource("w2"), round_id="b")
    _, m1 = pruw_read(frame, dbs, 1, SeededSource("r3"), round_id="c")
    _, m3 = pruw_read(frame, dbs, 3, SeededSource("r4"), round_id="d")
    _, m2 = pruw_read(frame, dbs, 2, SeededSource("r5"), round_id="e")
    assert [m1[l].value for l in range(4)] == [(v + 1) % 97 for v in models[0]]
    assert [m3[l].value for l in range(4)] == [
        (v + d) % 97 for v, d in zip(models[2], [2, 0, 2, 0])
    ]
    assert [m2[l].value for l in range(4)] == models[1]
    assert field.q == 97


def test_single_share_is_one_time_pad_uniform():
    frame = EvaluationFrame.standard(PrimeField(5), 4, 1, 1)
    for n in range(1, 5):
        for w in (0, 1):
            counts = {}
            for Z, Y in itertools.product(range(5), repeat=2):
                v = share_value(frame, n, w, (Z, Y)).value
                counts[v] = counts.get(v, 0) + 1
            assert counts == {v: 5 for v in range(5)}, (n, w)


def test_query_view_distribution_is_theta_independent():
    frame = EvaluationFrame.standard(PrimeField(3), 4, 2, 1)
    for n in range(1, 5):
        dists = []
        for theta in (1, 2):
            seen = {}
            for zbar in itertools.product(range(3), repeat=2):
                coords = tuple(
                    c.value for c in query_vector(frame, n, theta, zbar)
                )
                seen[coords] = seen.get(coords, 0) + 1
            dists.append(seen)
        assert dists[0] == dists[1]


def test_distortion_scales_costs_exactly():
    frame = frame97()
    models = random_models(frame, "dist")
    base_r, base_w = random_sparsification_costs(
        frame, models, 1, [1] * 8, 0, 0, SeededSource("d0")
    )
    for d in (Fraction(1, 4), Fraction(1, 2)):
        rc, wc = random_sparsification_costs(
            frame, models, 1, [1] * 8, d, d, SeededSource(f"d{d}")
        )
        assert rc == (1 - d) * base_r
        assert wc == (1 - d) * base_w
    with pytest.raises(PruwError):
        random_sparsification_costs(
            frame, models, 1, [1] * 8, Fraction(1, 3), 0, SeededSource("bad")
        )


def test_share_table_export_schema():
    frame = frame97(M=2, L=2)
    dbs = pruw_init([[1, 2], [3, 4]], frame, SeededSource("ex"))
    doc = share_tables_to_json(frame, dbs)
    assert doc["M"] == 2 and doc["L"] == 2 and doc["q"] == "97"
    assert len(doc["per_db"]) == 4
    assert all(isinstance(row["alpha"], str) for row in doc["per_db"])
    json.dumps(doc)


def test_update_value_form():
    frame = frame97()
    for n in range(1, 5):
        gap = frame.f - frame.alphas[n - 1]
        assert update_value(frame, n, 7, 3) == F97(7) + gap * F97(3)
