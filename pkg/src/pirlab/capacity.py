"""Closed-form capacity and cost calculators, all exact rationals.

These are the oracle side of every rate-equality test: a scheme's
measured rate must equal the matching calculator output exactly, never
within a tolerance.
"""

from __future__ import annotations

from fractions import Fraction


class UncharacterizedRegime(Exception):
    """Parameter region with no known closed form."""


def _inverse_geometric_sum(ratio: Fraction, terms: int) -> Fraction:
    """(sum_{i=0}^{terms-1} ratio^i)^-1 as an exact rational."""
    total = sum((ratio**i for i in range(terms)), Fraction(0))
    return 1 / total


def c_pir(N: int, K: int) -> Fraction:
    """Best achievable rate with N replicated databases and K messages."""
    if N < 1 or K < 1:
        raise ValueError("need N >= 1 and K >= 1")
    return _inverse_geometric_sum(Fraction(1, N), K)


def c_spir(N: int) -> Fraction:
    """Best rate when the user may learn nothing beyond the requested message."""
    if N < 2:
        raise ValueError("need N >= 2")
    return 1 - Fraction(1, N)


def c_coded(N: int, K: int, M_code: int) -> Fraction:
    """Best rate with (N, M_code) MDS-coded storage; M_code=1 is replication."""
    if not 1 <= M_code <= N:
        raise ValueError("need 1 <= M_code <= N")
    if K < 1:
        raise ValueError("need K >= 1")
    return _inverse_geometric_sum(Fraction(M_code, N), K)


def c_colluding(N: int, K: int, T: int) -> Fraction:
    """Best rate when any T of the N databases may pool their queries."""
    if not 1 <= T <= N:
        raise ValueError("need 1 <= T <= N")
    if K < 1:
        raise ValueError("need K >= 1")
    return _inverse_geometric_sum(Fraction(T, N), K)


def c_byzantine(N: int, K: int, T: int, B: int) -> Fraction:
    """Best rate with B adversarial databases among N, T-collusion allowed.

    Equivalent to discarding 2B databases from the T-colluding setting,
    scaled by the fraction of useful databases.
    """
    if B < 0 or N <= 2 * B:
        raise ValueError("need N > 2B")
    if T < 1:
        raise ValueError("need T >= 1")
    return Fraction(N - 2 * B, N) * c_colluding(N - 2 * B, K, T)


def c_mmpir(N: int, K: int, P: int) -> Fraction:
    """Best rate for retrieving P of the K messages in one shot.

    Characterized for P >= K/2 and for P <= K/2 with K/P integer; the
    remaining region raises UncharacterizedRegime.  At P = K/2 both
    closed forms apply and are asserted equal.
    """
    if not 1 <= P <= K:
        raise ValueError("need 1 <= P <= K")
    if N < 2:
        raise ValueError("need N >= 2")
    upper = 1 / (1 + Fraction(K - P, P * N))
    if 2 * P > K:
        return upper
    lower = None
    if K % P == 0:
        ninv = Fraction(1, N)
        lower = (1 - ninv) / (1 - ninv ** (K // P))
    if 2 * P == K:
        assert lower is not None and lower == upper, "boundary forms must agree"
        return upper
    if lower is None:
        raise UncharacterizedRegime(
            f"P={P} < K/2 with K/P = {K}/{P} not an integer has no known closed form"
        )
    return lower


def rd_costs(D_R, D_W, C_1, C_2) -> tuple:
    """Reading/writing costs under distortion budgets: linear trade-off.

    Budgets are fractions in [0, 1]; costs scale by (1 - budget).
    Accepts ints, Fractions, or decimal strings; exact throughout.
    """
    d_r, d_w = Fraction(D_R), Fraction(D_W)
    if not (0 <= d_r <= 1 and 0 <= d_w <= 1):
        raise ValueError("distortion budgets must lie in [0, 1]")
    return (1 - d_r) * Fraction(C_1), (1 - d_w) * Fraction(C_2)
