from fractions import Fraction

import pytest

from pirlab.capacity import (
    UncharacterizedRegime,
    c_byzantine,
    c_coded,
    c_colluding,
    c_mmpir,
    c_pir,
    c_spir,
    rd_costs,
)


def test_c_pir_known_points():
    assert c_pir(2, 2) == Fraction(2, 3)
    assert c_pir(2, 3) == Fraction(4, 7)
    assert c_pir(3, 3) == Fraction(9, 13)
    assert c_pir(5, 1) == 1


def test_c_pir_monotone_on_grid():
    for N in range(2, 9):
        for K in range(1, 8):
            assert c_pir(N, K + 1) < c_pir(N, K)
    # strict in N only once there is more than one message (K=1 pins rate 1)
    for K in range(2, 9):
        for N in range(2, 8):
            assert c_pir(N + 1, K) > c_pir(N, K)
    for N in range(2, 8):
        assert c_pir(N + 1, 1) == c_pir(N, 1) == 1


def test_c_spir_values_and_limit():
    assert c_spir(2) == Fraction(1, 2)
    # limit of c_pir in K: at K = 40 the gap is below 10^-15
    assert abs(c_pir(3, 40) - c_spir(3)) < Fraction(1, 10**15)
    for N in range(2, 7):
        for K in range(1, 7):
            assert c_spir(N) < c_pir(N, K)


def test_c_coded_reductions_and_value():
    assert c_coded(4, 2, 2) == Fraction(2, 3)
    assert c_coded(4, 1, 3) == 1
    for N in range(1, 7):
        for K in range(1, 7):
            assert c_coded(N, K, 1) == c_pir(N, K)
    with pytest.raises(ValueError):
        c_coded(2, 2, 3)


def test_c_colluding_reductions():
    assert c_colluding(4, 2, 2) == Fraction(2, 3) == c_pir(2, 2)
    for N in range(1, 7):
        for K in range(1, 7):
            assert c_colluding(N, K, 1) == c_pir(N, K)
    # full collusion degenerates to downloading everything
    for N in range(2, 6):
        for K in range(1, 6):
            assert c_colluding(N, K, N) == Fraction(1, K)
    with pytest.raises(ValueError):
        c_colluding(2, 2, 3)


def test_c_byzantine_values_and_reduction():
    assert c_byzantine(6, 2, 1, 1) == Fraction(8, 15)
    assert c_byzantine(3, 1, 1, 1) == Fraction(1, 3)
    for N in range(1, 7):
        for K in range(1, 7):
            for T in range(1, N + 1):
                assert c_byzantine(N, K, T, 0) == c_colluding(N, K, T)
    with pytest.raises(ValueError):
        c_byzantine(4, 2, 1, 2)


def test_c_mmpir_branches():
    assert c_mmpir(2, 4, 2) == Fraction(2, 3)  # boundary: both forms agree
    assert c_mmpir(2, 4, 1) == Fraction(8, 15) == c_pir(2, 4)
    assert c_mmpir(2, 4, 3) == 1 / (1 + Fraction(1, 6))
    with pytest.raises(UncharacterizedRegime):
        c_mmpir(2, 5, 2)


def test_rd_costs_linearity():
    assert rd_costs(0, 0, 2, 2) == (Fraction(2), Fraction(2))
    assert rd_costs(1, 0, 2, 2)[0] == 0
    assert rd_costs("0.25", 0, 2, 2)[0] == Fraction(3, 2)
    with pytest.raises(ValueError):
        rd_costs(2, 0, 1, 1)
