"""Enumeration-based verification of the privacy claims.

Three checks, all exact:

* user privacy -- the query a database receives must have the same
  distribution whichever message the user wants.  Every scheme exposes
  its finite randomness space; this module enumerates it, tabulates the
  canonical query encodings, and computes total-variation distances as
  exact rationals.  Zero means private.
* database privacy -- the user's complete view of a symmetric round,
  marginalized over the hidden pool symbol, must leave a uniform
  posterior over every message the user did not ask for.  Verified by
  Bayes over the full (messages, pool) product space.
* one-time-pad uniformity -- each individual masked value (share, query
  coordinate, update) must be exactly uniform once its noise inputs are
  enumerated.

Spaces larger than the enumeration cap are refused with a pointer to
the sampled chi-square mode, which is for exploration only and is never
part of acceptance runs.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist

from .databank import MessageStore
from .field import PrimeField
from . import pir, pruw, spir

DEFAULT_ENUMERATION_CAP = 10_000_000


class AuditError(Exception):
    pass


class EnumerationTooLarge(AuditError):
    """Randomness space exceeds the cap; use the sampled mode."""


# ---------------------------------------------------------------------------
# scheme adapters: randomness space + canonical per-database query encoding


@dataclass(frozen=True)
class SchemeAdapter:
    name: str
    databases: callable  # params -> N
    space_size: callable  # params -> int
    space: callable  # params -> iterable of randomness points
    encode: callable  # (params, theta, randomness, n) -> canonical string
    sample: callable  # (params, source) -> randomness point


def _cgks_encode(params, theta, h, n):
    field = PrimeField(params["q"])
    return pir.cgks_queries(field, params["K"], theta, h)[n - 1].canonical()


def _residual_encode(params, theta, h, n):
    field = PrimeField(params["q"])
    return pir.residual_queries(field, params["N"], params["K"], theta, h)[
        n - 1
    ].canonical()


def _sunjafar_encode(params, theta, perms, n):
    plan = pir.SunJafarPlan(params["N"], params["K"], theta, perms)
    return plan.queries()[n - 1].canonical()


def _tian_encode(params, theta, F, n):
    tq = pir.tian_query(params["N"], params["K"], theta, F)
    from .databank import IndexSumQuery

    return IndexSumQuery(digits=tq.digit_vectors[n - 1]).canonical()


def _leaky_encode(params, theta, row, n):
    option = pir.leaky_option(theta, row)[n - 1]
    if option is None:
        return "none"
    from .databank import MessageCombinationQuery

    return MessageCombinationQuery(coeffs=option).canonical()


def _spir_det_encode(params, theta, h, n):
    return _residual_encode(params, theta, h, n) + ";crs=0"


def _spir_prob_encode(params, theta, F, n):
    return _tian_encode(params, theta, F, n) + ";crs=0"


def _pruw_frame(params) -> pruw.EvaluationFrame:
    return pruw.EvaluationFrame.standard(
        PrimeField(params["q"]), params["N"], params["M"], 1
    )


def _pruw_encode(params, theta, zbar, n):
    frame = _pruw_frame(params)
    coords = pruw.query_vector(frame, n, theta, zbar)
    return "pruwq:" + ",".join(str(c.value) for c in coords)


def _fixture_leak_encode(params, theta, _randomness, n):
    coeffs = tuple(1 if k == theta else 0 for k in range(1, params["K"] + 1))
    return "leak:" + ",".join(str(c) for c in coeffs)


ADAPTERS = {
    "cgks": SchemeAdapter(
        name="cgks",
        databases=lambda p: 2,
        space_size=lambda p: p["q"] ** p["K"],
        space=lambda p: itertools.product(range(p["q"]), repeat=p["K"]),
        encode=_cgks_encode,
        sample=lambda p, src: tuple(src.randbelow(p["q"]) for _ in range(p["K"])),
    ),
    "residual": SchemeAdapter(
        name="residual",
        databases=lambda p: p["N"],
        space_size=lambda p: p["q"] ** (p["K"] * (p["N"] - 1)),
        space=lambda p: itertools.product(
            range(p["q"]), repeat=p["K"] * (p["N"] - 1)
        ),
        encode=_residual_encode,
        sample=lambda p, src: tuple(
            src.randbelow(p["q"]) for _ in range(p["K"] * (p["N"] - 1))
        ),
    ),
    "sunjafar": SchemeAdapter(
        name="sunjafar",
        databases=lambda p: p["N"],
        space_size=lambda p: pir.sunjafar_randomness_size(p["N"], p["K"]),
        space=lambda p: pir.sunjafar_randomness_space(p["N"], p["K"]),
        encode=_sunjafar_encode,
        sample=lambda p, src: tuple(
            src.permutation(p["N"] ** p["K"]) for _ in range(p["K"])
        ),
    ),
    "tian": SchemeAdapter(
        name="tian",
        databases=lambda p: p["N"],
        space_size=lambda p: pir.tian_key_count(p["N"], p["K"]),
        space=lambda p: pir.tian_key_space(p["N"], p["K"]),
        encode=_tian_encode,
        sample=lambda p, src: tuple(
            src.randbelow(p["N"]) for _ in range(p["K"] - 1)
        ),
    ),
    "leaky": SchemeAdapter(
        name="leaky",
        databases=lambda p: 2,
        space_size=lambda p: 4,
        space=lambda p: pir.leaky_row_space(),
        encode=_leaky_encode,
        sample=lambda p, src: src.randbelow(4),
    ),
    "spir-det": SchemeAdapter(
        name="spir-det",
        databases=lambda p: p["N"],
        space_size=lambda p: p["q"] ** (p["K"] * (p["N"] - 1)),
        space=lambda p: itertools.product(
            range(p["q"]), repeat=p["K"] * (p["N"] - 1)
        ),
        encode=_spir_det_encode,
        sample=lambda p, src: tuple(
            src.randbelow(p["q"]) for _ in range(p["K"] * (p["N"] - 1))
        ),
    ),
    "spir-prob": SchemeAdapter(
        name="spir-prob",
        databases=lambda p: p["N"],
        space_size=lambda p: pir.tian_key_count(p["N"], p["K"]),
        space=lambda p: pir.tian_key_space(p["N"], p["K"]),
        encode=_spir_prob_encode,
        sample=lambda p, src: tuple(
            src.randbelow(p["N"]) for _ in range(p["K"] - 1)
        ),
    ),
    "pruw": SchemeAdapter(
        name="pruw",
        databases=lambda p: p["N"],
        space_size=lambda p: p["q"] ** p["M"],
        space=lambda p: itertools.product(range(p["q"]), repeat=p["M"]),
        encode=_pruw_encode,
        sample=lambda p, src: tuple(src.randbelow(p["q"]) for _ in range(p["M"])),
    ),
    "fixture-leaky-theta": SchemeAdapter(
        name="fixture-leaky-theta",
        databases=lambda p: p.get("N", 2),
        space_size=lambda p: 1,
        space=lambda p: [()],
        encode=_fixture_leak_encode,
        sample=lambda p, src: (),
    ),
}


def adapter_for(scheme: str) -> SchemeAdapter:
    try:
        return ADAPTERS[scheme]
    except KeyError:
        raise AuditError(f"no audit adapter for scheme {scheme!r}") from None


# ---------------------------------------------------------------------------
# user privacy


@dataclass
class QueryDistribution:
    """Exact distribution of the query one database receives."""

    scheme: str
    db_index: int
    theta: int
    probs: dict  # canonical encoding -> Fraction

    def support(self):
        return set(self.probs)


def _tabulate(adapter, params, theta, n, points):
    counts = Counter(adapter.encode(params, theta, r, n) for r in points)
    return counts


def enumerate_query_dist(
    scheme: str,
    params: dict,
    theta: int,
    n: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
    workers: int | None = None,
) -> QueryDistribution:
    """Exact query distribution at database n by full enumeration.

    Raises EnumerationTooLarge when the randomness space exceeds
    ``cap``; partition across ``workers`` threads when asked (the
    tabulation merge is associative, so the result is identical).
    """
    adapter = adapter_for(scheme)
    size = adapter.space_size(params)
    if size > cap:
        raise EnumerationTooLarge(
            f"{scheme} randomness space has {size} points (cap {cap}); "
            "use sampled_query_chi2 for exploration"
        )
    if workers and workers > 1:
        points = list(adapter.space(params))
        chunk = (len(points) + workers - 1) // workers
        slices = [points[i : i + chunk] for i in range(0, len(points), chunk)]
        counts: Counter = Counter()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for partial in pool.map(
                lambda s: _tabulate(adapter, params, theta, n, s), slices
            ):
                counts.update(partial)
    else:
        counts = _tabulate(adapter, params, theta, n, adapter.space(params))
    total = sum(counts.values())
    probs = {enc: Fraction(c, total) for enc, c in counts.items()}
    return QueryDistribution(scheme=scheme, db_index=n, theta=theta, probs=probs)


def total_variation(p: QueryDistribution, q: QueryDistribution) -> Fraction:
    keys = p.support() | q.support()
    zero = Fraction(0)
    return sum(
        (abs(p.probs.get(k, zero) - q.probs.get(k, zero)) for k in keys),
        zero,
    ) / 2


def user_privacy_tv(
    scheme: str,
    params: dict,
    theta: int,
    theta_prime: int,
    n: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
    workers: int | None = None,
) -> Fraction:
    """Exact TV distance between database n's query distributions."""
    p = enumerate_query_dist(scheme, params, theta, n, cap=cap, workers=workers)
    q = enumerate_query_dist(scheme, params, theta_prime, n, cap=cap, workers=workers)
    return total_variation(p, q)


# ---------------------------------------------------------------------------
# database privacy


@dataclass
class PosteriorAudit:
    """Posterior table over non-desired messages, one row per user view."""

    uniform: bool
    view_count: int
    full_support: int  # assignments of the non-desired symbols
    rows: dict  # view -> Counter over non-desired assignments

    def worst_row(self):
        """The view whose posterior strays farthest from uniform."""
        worst, spread = None, -1
        for view, counter in self.rows.items():
            values = list(counter.values()) + [0] * (
                self.full_support - len(counter)
            )
            s = max(values) - min(values)
            if s > spread:
                worst, spread = view, s
        return worst, spread


def db_privacy_posterior(
    view_fn,
    q: int,
    K: int,
    symbols_per_message: int,
    theta: int,
    pool_draws: int,
) -> PosteriorAudit:
    """Bayes over every (message contents, pool symbols) assignment.

    ``view_fn(messages, pool_values)`` must return the user's complete
    view as a hashable value; messages is a K-tuple of symbol tuples.
    The posterior over the non-desired messages given a view is uniform
    iff every view's row has equal counts over the full assignment
    space of the other messages.
    """
    symbols = symbols_per_message
    rows: dict = {}
    message_space = itertools.product(
        itertools.product(range(q), repeat=symbols), repeat=K
    )
    for messages in message_space:
        others = tuple(m for k, m in enumerate(messages, start=1) if k != theta)
        for pool_values in itertools.product(range(q), repeat=pool_draws):
            view = view_fn(messages, pool_values)
            rows.setdefault(view, Counter())[others] += 1
    full = q ** ((K - 1) * symbols)
    uniform = all(
        len(counter) == full and len(set(counter.values())) == 1
        for counter in rows.values()
    )
    return PosteriorAudit(
        uniform=uniform, view_count=len(rows), full_support=full, rows=rows
    )


def spir_det_view(q: int, N: int, K: int, theta: int, h):
    """User view of the masked residual round with the mask fixed."""
    field = PrimeField(q)

    def view_fn(messages, pool_values):
        store = MessageStore(field, [list(m) for m in messages])
        pool = spir.CommonRandomnessPool(field, pool_values)
        transcript, _ = spir.spir_round_deterministic(
            store, theta, N, pool, h=list(h)
        )
        return spir.spir_user_view(transcript).canonical()

    return view_fn


def spir_prob_view(q: int, N: int, K: int, theta: int, F):
    """User view of the masked key-scheme round with the key fixed."""
    field = PrimeField(q)

    def view_fn(messages, pool_values):
        store = MessageStore(field, [list(m) for m in messages])
        pool = spir.CommonRandomnessPool(field, pool_values)
        transcript, _ = spir.spir_round_probabilistic(store, theta, N, pool, F=F)
        return spir.spir_user_view(transcript).canonical()

    return view_fn


def plain_pir_view(q: int, N: int, K: int, theta: int, h):
    """Fixture: unmasked residual round; leaks a combination of messages."""
    field = PrimeField(q)

    def view_fn(messages, pool_values):
        store = MessageStore(field, [list(m) for m in messages])
        transcript, _ = pir.residual_round(store, theta, N, h=list(h))
        return spir.spir_user_view(transcript).canonical()

    return view_fn


def pool_leak_view(q: int, N: int, K: int, theta: int, h):
    """Fixture: masked round whose view also exposes the pool symbol."""
    masked = spir_det_view(q, N, K, theta, h)

    def view_fn(messages, pool_values):
        return (masked(messages, pool_values), pool_values)

    return view_fn


# ---------------------------------------------------------------------------
# one-time-pad uniformity


@dataclass
class OtpReport:
    uniform: bool
    counts: dict  # value -> occurrences over the enumerated noise space


def otp_uniformity(value_fn, noise_space, q: int) -> OtpReport:
    """Exact marginal of ``value_fn(noise)`` over an enumerated noise space."""
    counts: Counter = Counter()
    for noise in noise_space:
        v = value_fn(noise)
        counts[getattr(v, "value", v)] += 1
    uniform = len(counts) == q and len(set(counts.values())) == 1
    return OtpReport(uniform=uniform, counts=dict(counts))


# ---------------------------------------------------------------------------
# sampled mode (exploration only)


@dataclass
class Chi2Report:
    """Two-sample chi-square comparison of sampled query distributions.

    Exploration aid for spaces beyond the enumeration cap.  The
    acceptance threshold is the 0.99 quantile of chi-square with
    (cells - 1) degrees of freedom (Wilson-Hilferty approximation);
    exact enumeration remains the only accepted evidence of privacy.
    """

    statistic: float
    dof: int
    critical_99: float
    consistent: bool
    draws: int


def _chi2_quantile_99(dof: int) -> float:
    z = NormalDist().inv_cdf(0.99)
    return dof * (1 - 2 / (9 * dof) + z * math.sqrt(2 / (9 * dof))) ** 3


def sampled_query_chi2(
    scheme: str,
    params: dict,
    theta: int,
    theta_prime: int,
    n: int,
    draws: int,
    source,
) -> Chi2Report:
    adapter = adapter_for(scheme)
    obs = []
    for t in (theta, theta_prime):
        src = source.child(f"theta-{t}")
        counter: Counter = Counter()
        for _ in range(draws):
            r = adapter.sample(params, src)
            counter[adapter.encode(params, t, r, n)] += 1
        obs.append(counter)
    cells = sorted(set(obs[0]) | set(obs[1]))
    statistic = 0.0
    for cell in cells:
        a, b = obs[0].get(cell, 0), obs[1].get(cell, 0)
        expected = (a + b) / 2
        if expected:
            statistic += (a - expected) ** 2 / expected
            statistic += (b - expected) ** 2 / expected
    dof = max(1, len(cells) - 1)
    critical = _chi2_quantile_99(dof)
    return Chi2Report(
        statistic=statistic,
        dof=dof,
        critical_99=critical,
        consistent=statistic <= critical,
        draws=draws,
    )


# ---------------------------------------------------------------------------
# report shape


def check_to_json(scheme: str, check: str, params: dict, passed: bool, tv=None) -> dict:
    doc = {
        "scheme": scheme,
        "check": check,
        "params": {k: str(v) for k, v in sorted(params.items())},
        "result": "pass" if passed else "fail",
        "tv": None if tv is None else f"{tv.numerator}/{tv.denominator}",
    }
    return doc
