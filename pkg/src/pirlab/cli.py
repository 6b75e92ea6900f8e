"""Command-line front end.

Subcommands:

* ``run``       -- execute one protocol round, verify decode and rate,
                   write a transcript report.
* ``audit``     -- run the enumeration privacy checks for a scheme.
* ``capacity``  -- evaluate the closed-form calculators.
* ``leakage``   -- emit segmentation-leakage CSV rows.
* ``pruw-demo`` -- full read-update-write pass with cost accounting.

Exit codes: 0 success, 2 configuration error, 3 correctness/rate
failure, 4 failed audit check.  All randomness derives from --seed via
labeled sub-streams, so identical invocations produce byte-identical
reports.  PIRLAB_THREADS caps audit worker threads.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import audit as audit_mod
from . import capacity as cap_mod
from . import pir, pruw, sparsify, spir
from .databank import MessageStore
from .field import PrimeField
from .rng import SeededSource

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CORRECTNESS = 3
EXIT_AUDIT = 4

RUN_SCHEMES = (
    "cgks",
    "residual",
    "sunjafar",
    "tian",
    "leaky",
    "spir-det",
    "spir-prob",
)


class ConfigError(Exception):
    pass


def _workers() -> int | None:
    raw = os.environ.get("PIRLAB_THREADS")
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"PIRLAB_THREADS must be an integer, got {raw!r}")
    return max(1, value)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}")


def _merge(args, config: dict, key: str, default=None):
    """Flag > config file > default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _write_report(doc, out: str | None, fmt: str) -> None:
    if fmt == "json":
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf)
        flat = {k: v for k, v in doc.items() if not isinstance(v, (list, dict))}
        writer.writerow(sorted(flat))
        writer.writerow([flat[k] for k in sorted(flat)])
        for row in doc.get("per_db", []):
            writer.writerow([row["n"], row["uploaded_symbols"], row["downloaded_symbols"]])
        text = buf.getvalue()
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# run


def _default_length(scheme: str, N: int, K: int) -> int:
    if scheme == "cgks":
        return 1
    if scheme == "sunjafar":
        return N**K
    if scheme == "leaky":
        return 1
    return N - 1


def _expected_rate(scheme: str, N: int, K: int) -> Fraction:
    if scheme == "cgks":
        return Fraction(1, 2)
    if scheme in ("residual", "spir-det", "spir-prob"):
        return Fraction(N - 1, N)
    if scheme == "sunjafar":
        return cap_mod.c_pir(N, K)
    if scheme == "tian":
        return pir.tian_expected_rate(N, K)
    if scheme == "leaky":
        return pir.leaky_expected_rate()
    raise ConfigError(f"unknown scheme {scheme!r}")


def _validate_run(scheme: str, N: int, K: int, L: int, theta: int) -> None:
    if scheme not in RUN_SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; choose from {RUN_SCHEMES}")
    if not 1 <= theta <= K:
        raise ConfigError(f"theta={theta} outside [1, {K}]")
    if scheme == "cgks":
        if N != 2:
            raise ConfigError("cgks supports exactly N=2")
        if L != 1:
            raise ConfigError("cgks operates on single-symbol messages (L=1)")
    elif scheme == "leaky":
        if N != 2 or K != 2:
            raise ConfigError("the query-option table is defined for N=2, K=2")
    elif scheme == "sunjafar":
        if N < 2 or L % (N**K):
            raise ConfigError(f"need N >= 2 and L a multiple of N^K={N**K}")
    else:
        if N < 2 or L % (N - 1):
            raise ConfigError(f"need N >= 2 and L a multiple of N-1={N - 1}")


def cmd_run(args) -> int:
    config = _load_config(args.config).get("run", _load_config(args.config))
    scheme = _merge(args, config, "scheme")
    if scheme is None:
        raise ConfigError("--scheme is required")
    N = int(_merge(args, config, "n", 2))
    K = int(_merge(args, config, "k", 2))
    q = int(_merge(args, config, "q", 3))
    theta = int(_merge(args, config, "theta", 1))
    seed = int(_merge(args, config, "seed", 0))
    fmt = _merge(args, config, "format", "json")
    out = _merge(args, config, "out")
    L = _merge(args, config, "l")
    L = _default_length(scheme, N, K) if L is None else int(L)
    _validate_run(scheme, N, K, L, theta)

    if args.expected:
        rate = _expected_rate(scheme, N, K)
        print(_frac_str(rate))
        return EXIT_OK

    try:
        field = PrimeField(q)
    except ValueError as exc:
        raise ConfigError(str(exc))
    source = SeededSource(seed)
    store = MessageStore.random(field, K, L, source.child("store"))
    scheme_src = source.child("scheme")

    extras: dict = {}
    if scheme == "cgks":
        transcript, decoded = pir.cgks_round(store, theta, scheme_src)
        gate = Fraction(1, 2)
    elif scheme == "residual":
        transcript, decoded = pir.residual_round(store, theta, N, scheme_src)
        gate = Fraction(N - 1, N)
    elif scheme == "sunjafar":
        plan = pir.sunjafar_plan(N, K, theta, scheme_src)
        transcript, decoded = pir.sunjafar_round(store, plan)
        gate = cap_mod.c_pir(N, K)
    elif scheme == "tian":
        F = tuple(scheme_src.randbelow(N) for _ in range(K - 1))
        transcript, decoded = pir.tian_round(store, theta, N, F=F)
        gate = Fraction(N - 1, N - 1 if not any(F) else N)
        extras["key"] = "".join(str(d) for d in F)
    elif scheme == "leaky":
        row = scheme_src.randbelow(4)
        transcript, decoded = pir.leaky_round(store, theta, row=row)
        gate = Fraction(1, 1 if row < 2 else 2)
        extras["row"] = row
    elif scheme == "spir-det":
        pool = spir.CommonRandomnessPool.generate(
            field, L // (N - 1), source.child("pool")
        )
        transcript, decoded = spir.spir_round_deterministic(
            store, theta, N, pool, scheme_src
        )
        gate = Fraction(N - 1, N)
    else:  # spir-prob
        pool = spir.CommonRandomnessPool.generate(
            field, L // (N - 1), source.child("pool")
        )
        transcript, decoded = spir.spir_round_probabilistic(
            store, theta, N, pool, source=scheme_src
        )
        gate = Fraction(N - 1, N)

    decode_ok = tuple(decoded) == store.message(theta)
    rate = transcript.rate()
    rate_ok = rate == gate
    doc = transcript.to_json()
    doc.update(extras)
    doc["capacity"] = _frac_str(cap_mod.c_pir(N, K))
    doc["expected_rate"] = _frac_str(_expected_rate(scheme, N, K))
    doc["decode_ok"] = decode_ok
    doc["rate_ok"] = rate_ok
    _write_report(doc, out, fmt)
    print(
        f"{scheme}: theta={theta} rate={_frac_str(rate)} "
        f"decode={'ok' if decode_ok else 'FAIL'} rate-gate={'ok' if rate_ok else 'FAIL'}"
    )
    return EXIT_OK if decode_ok and rate_ok else EXIT_CORRECTNESS


# ---------------------------------------------------------------------------
# audit


def _audit_defaults(scheme: str) -> dict:
    return {
        "cgks": {"q": 3, "N": 2, "K": 3},
        "residual": {"q": 3, "N": 3, "K": 2},
        "sunjafar": {"N": 2, "K": 2},
        "tian": {"N": 3, "K": 3},
        "leaky": {"N": 2, "K": 2},
        "spir-det": {"q": 3, "N": 2, "K": 3},
        "spir-prob": {"q": 3, "N": 3, "K": 3},
        "pruw": {"q": 5, "N": 4, "M": 3},
        "fixture-leaky-theta": {"N": 2, "K": 3},
    }[scheme]


def _user_privacy_checks(scheme: str, params: dict, K: int, checks: list) -> None:
    workers = _workers()
    N = audit_mod.adapter_for(scheme).databases(params)
    worst = Fraction(0)
    for n in range(1, N + 1):
        for theta in range(1, K + 1):
            for theta_prime in range(theta + 1, K + 1):
                tv = audit_mod.user_privacy_tv(
                    scheme, params, theta, theta_prime, n, workers=workers
                )
                worst = max(worst, tv)
    checks.append(
        audit_mod.check_to_json(
            scheme, "user-privacy-tv", params, worst == 0, tv=worst
        )
    )


def cmd_audit(args) -> int:
    scheme = args.scheme
    if scheme not in set(RUN_SCHEMES) | {"pruw", "fixture-leaky-theta"}:
        raise ConfigError(f"unknown scheme {scheme!r}")
    defaults = _audit_defaults(scheme)
    params = dict(defaults)
    for key, flag in (("q", args.q), ("N", args.n), ("K", args.k), ("M", args.m)):
        if flag is not None and key in params:
            params[key] = int(flag)
    seed = 0 if args.seed is None else int(args.seed)
    source = SeededSource(seed)
    checks: list = []

    if scheme == "pruw":
        q, N, M = params["q"], params["N"], params["M"]
        frame = pruw.EvaluationFrame.standard(PrimeField(q), N, M, 1)
        import itertools as it

        noise2 = list(it.product(range(q), repeat=2))
        noise1 = list(it.product(range(q), repeat=1))
        ok_share = all(
            audit_mod.otp_uniformity(
                lambda zy, n=n: pruw.share_value(frame, n, 1, zy), noise2, q
            ).uniform
            for n in range(1, N + 1)
        )
        checks.append(audit_mod.check_to_json(scheme, "otp-share", params, ok_share))
        ok_query = all(
            audit_mod.otp_uniformity(
                lambda z, n=n, d=d: pruw.query_coordinate(frame, n, d, z[0]),
                noise1,
                q,
            ).uniform
            for n in range(1, N + 1)
            for d in (True, False)
        )
        checks.append(audit_mod.check_to_json(scheme, "otp-query", params, ok_query))
        ok_update = all(
            audit_mod.otp_uniformity(
                lambda z, n=n: pruw.update_value(frame, n, 2, z[0]), noise1, q
            ).uniform
            for n in range(1, N + 1)
        )
        checks.append(audit_mod.check_to_json(scheme, "otp-update", params, ok_update))
        _user_privacy_checks("pruw", {"q": q, "N": N, "M": M}, M, checks)
    elif scheme == "fixture-leaky-theta":
        _user_privacy_checks(scheme, params, params["K"], checks)
    else:
        _user_privacy_checks(scheme, params, params["K"], checks)
        if scheme == "spir-det":
            q, N, K = params["q"], params["N"], params["K"]
            h = [source.child("audit-h").randbelow(q) for _ in range(K * (N - 1))]
            ok = all(
                audit_mod.db_privacy_posterior(
                    audit_mod.spir_det_view(q, N, K, theta, h), q, K, 1, theta, 1
                ).uniform
                for theta in range(1, K + 1)
            )
            checks.append(
                audit_mod.check_to_json(scheme, "db-privacy-posterior", params, ok)
            )
        if scheme == "spir-prob":
            q, N, K = params["q"], params["N"], params["K"]
            key_src = source.child("audit-key")
            F = tuple(key_src.randbelow(N) for _ in range(K - 1))
            ok = all(
                audit_mod.db_privacy_posterior(
                    audit_mod.spir_prob_view(q, N, K, theta, F), q, K, N - 1, theta, 1
                ).uniform
                for theta in range(1, K + 1)
            )
            checks.append(
                audit_mod.check_to_json(scheme, "db-privacy-posterior", params, ok)
            )

    doc = {"scheme": scheme, "checks": checks}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
    for check in checks:
        tv = f" tv={check['tv']}" if check["tv"] is not None else ""
        print(f"{check['check']}: {check['result']}{tv}")
    return EXIT_OK if all(c["result"] == "pass" for c in checks) else EXIT_AUDIT


# ---------------------------------------------------------------------------
# capacity


def cmd_capacity(args) -> int:
    kind = args.kind
    try:
        if kind == "pir":
            value = cap_mod.c_pir(args.n, args.k)
        elif kind == "spir":
            value = cap_mod.c_spir(args.n)
        elif kind == "coded":
            value = cap_mod.c_coded(args.n, args.k, args.m)
        elif kind == "colluding":
            value = cap_mod.c_colluding(args.n, args.k, args.t)
        elif kind == "byzantine":
            value = cap_mod.c_byzantine(args.n, args.k, args.t, args.b)
        elif kind == "mmpir":
            try:
                value = cap_mod.c_mmpir(args.n, args.k, args.p)
            except cap_mod.UncharacterizedRegime:
                print("uncharacterized regime")
                return EXIT_OK
        else:  # rd
            c_r, c_w = cap_mod.rd_costs(args.dr, args.dw, args.c1, args.c2)
            print(
                f"C_R={_frac_str(c_r)} ({float(c_r):g}) "
                f"C_W={_frac_str(c_w)} ({float(c_w):g})"
            )
            return EXIT_OK
    except ValueError as exc:
        raise ConfigError(str(exc))
    print(f"{_frac_str(value)} ({float(value):.6f})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# leakage


def cmd_leakage(args) -> int:
    L = args.l
    try:
        b_values = [int(b) for b in args.b.split(",")]
    except ValueError:
        raise ConfigError(f"--b must be a comma list of integers, got {args.b!r}")
    r = Fraction(args.r)
    if not 0 < r <= 1:
        raise ConfigError("--r must lie in (0, 1]")
    s = round(r * L)
    rows = []
    for B in b_values:
        if not 1 <= B <= L:
            raise ConfigError(f"B={B} outside [1, {L}]")
        single = sparsify.leakage_entropy(L, B, s, two_stage=False)
        two = sparsify.leakage_entropy(L, B, s, two_stage=True)
        if two > single + 1e-12:
            raise AssertionError(
                f"two-stage leakage exceeded single-stage at B={B}"
            )
        rows.append((B, single, two, sparsify.SegmentationPlan(L=L, B=B).ragged))
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["B", "single_stage_bits", "two_stage_bits", "ragged"])
    for B, single, two, ragged in rows:
        writer.writerow([B, f"{single:.12f}", f"{two:.12f}", int(ragged)])
    text = out.getvalue()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# pruw demo


def cmd_pruw_demo(args) -> int:
    q, N, M, L = args.q, args.n, args.m, args.l
    try:
        field = PrimeField(q)
        frame = pruw.EvaluationFrame.standard(field, N, M, L)
    except (ValueError, pruw.PruwError) as exc:
        raise ConfigError(str(exc))
    seed = 0 if args.seed is None else args.seed
    source = SeededSource(seed)
    models = [
        [source.child("models").randbelow(q) for _ in range(L)] for _ in range(M)
    ]
    deltas = [source.child("deltas").randbelow(q) for _ in range(L)]
    theta = args.theta
    if not 1 <= theta <= M:
        raise ConfigError(f"theta={theta} outside [1, {M}]")
    report = pruw.pruw_roundtrip(frame, models, theta, deltas, source.child("rt"))
    doc = {
        "scheme": "pruw",
        "N": N,
        "M": M,
        "L": L,
        "q": str(q),
        "theta": theta,
        "ok": report.ok,
        "costs": report.costs.to_json(),
    }
    d_r, d_w = Fraction(args.dr), Fraction(args.dw)
    if d_r or d_w:
        rc, wc = pruw.random_sparsification_costs(
            frame, models, theta, deltas, d_r, d_w, source.child("dist")
        )
        doc["distorted_costs"] = {
            "d_read": _frac_str(d_r),
            "d_write": _frac_str(d_w),
            "reading": _frac_str(rc),
            "writing": _frac_str(wc),
        }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
    print(
        f"pruw: roundtrip={'ok' if report.ok else 'FAIL'} "
        f"reading={_frac_str(report.costs.reading_cost)} "
        f"writing={_frac_str(report.costs.writing_cost)}"
    )
    if "distorted_costs" in doc:
        dc = doc["distorted_costs"]
        print(
            f"distorted: D_R={dc['d_read']} D_W={dc['d_write']} "
            f"reading={dc['reading']} writing={dc['writing']}"
        )
    return EXIT_OK if report.ok else EXIT_CORRECTNESS


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pirlab",
        description="simulate, audit, and account private retrieval protocols",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one protocol round")
    p_run.add_argument("--scheme", choices=RUN_SCHEMES)
    p_run.add_argument("--n", type=int)
    p_run.add_argument("--k", type=int)
    p_run.add_argument("--l", type=int)
    p_run.add_argument("--q", type=int)
    p_run.add_argument("--theta", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--format", choices=("json", "csv"))
    p_run.add_argument("--config")
    p_run.add_argument(
        "--expected",
        action="store_true",
        help="print the scheme's expected rate instead of running",
    )
    p_run.set_defaults(func=cmd_run)

    p_audit = sub.add_parser("audit", help="run privacy checks for a scheme")
    p_audit.add_argument("--scheme", required=True)
    p_audit.add_argument("--q", type=int)
    p_audit.add_argument("--n", type=int)
    p_audit.add_argument("--k", type=int)
    p_audit.add_argument("--m", type=int)
    p_audit.add_argument("--seed", type=int)
    p_audit.add_argument("--out")
    p_audit.set_defaults(func=cmd_audit)

    p_cap = sub.add_parser("capacity", help="closed-form calculators")
    cap_sub = p_cap.add_subparsers(dest="kind", required=True)
    for kind, flags in (
        ("pir", ("n", "k")),
        ("spir", ("n",)),
        ("coded", ("n", "k", "m")),
        ("colluding", ("n", "k", "t")),
        ("byzantine", ("n", "k", "t", "b")),
        ("mmpir", ("n", "k", "p")),
    ):
        p = cap_sub.add_parser(kind)
        for flag in flags:
            p.add_argument(f"--{flag}", type=int, required=True)
        p.set_defaults(func=cmd_capacity)
    p_rd = cap_sub.add_parser("rd")
    for flag in ("dr", "dw", "c1", "c2"):
        p_rd.add_argument(f"--{flag}", required=True)
    p_rd.set_defaults(func=cmd_capacity)

    p_leak = sub.add_parser("leakage", help="segmentation leakage CSV")
    p_leak.add_argument("--l", type=int, required=True)
    p_leak.add_argument("--b", required=True, help="comma list of segment counts")
    p_leak.add_argument("--r", required=True, help="sparsity fraction, e.g. 0.25")
    p_leak.add_argument("--out")
    p_leak.set_defaults(func=cmd_leakage)

    p_demo = sub.add_parser("pruw-demo", help="read-update-write roundtrip")
    p_demo.add_argument("--n", type=int, default=4)
    p_demo.add_argument("--m", type=int, default=3)
    p_demo.add_argument("--l", type=int, default=8)
    p_demo.add_argument("--q", type=int, default=97)
    p_demo.add_argument("--theta", type=int, default=1)
    p_demo.add_argument("--seed", type=int)
    p_demo.add_argument("--dr", default="0", help="reading distortion fraction")
    p_demo.add_argument("--dw", default="0", help="writing distortion fraction")
    p_demo.add_argument("--out")
    p_demo.set_defaults(func=cmd_pruw_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
