"""Run the whole chain for one parameter set and record it as a re-checkable certificate.

A certificate is a plain JSON-ready dict.  Every check is a verdict with
status ``pass``, ``fail`` or ``skipped`` (plus a reason); one ``fail`` makes
the whole certificate ``fail``.  Integers beyond 2**53 are written as decimal
strings so that any JSON reader keeps them exact.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .avoidance import build_beta, check_counting_inequality, kernel_generators
from .extension import (
    BetaMap,
    bic_bruteforce_oracle,
    bic_is_trivial,
    bic_of_beta,
    iota,
    theta,
    verify_cocycle,
)
from .fpcore import BudgetExceeded, FpMatrix, PrimeModulus, Wedge2, is_decomposable, wedge_dim
from .localcount import (
    DualWedge,
    SymplecticSpace,
    closed_climit,
    closed_xi,
    count_report,
    find_obstruction_witness,
    padic_valuation,
    axkatz_bound,
    pullback_wedge,
    rank_one_membership,
    tame_Ev,
    unramified_check,
    w_pairing,
)

log = logging.getLogger(__name__)

SCHEMA = "descentcert/certificate"
SCHEMA_VERSION = 1
SAFE_INT = 2**53
PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
CONGRUENCE_DEPTH = 6
BIC_LISTING_CAP = 256


class ConfigError(ValueError):
    pass


class CertificateError(ValueError):
    """Unreadable certificate or schema/version mismatch."""


@dataclass
class PipelineConfig:
    p: int
    r1: int
    r: int
    beta: BetaMap | None = None
    budget: int = 2**28
    witness_cap: int = 8
    seed: int = 0
    sample_budget: int = 10**6
    cocycle_samples: int = 2000
    partitions: int = 1
    threads: int | None = None
    record_timing: bool = False

    def validate(self) -> None:
        try:
            PrimeModulus(self.p)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.r < 0 or self.r % 2:
            raise ConfigError(f"r must be even and >= 0, got {self.r}")
        if self.r1 < 2:
            raise ConfigError(f"r1 must be >= 2, got {self.r1}")
        if self.beta is None and self.r1 < 4:
            raise ConfigError(f"constructing beta needs r1 >= 4, got {self.r1}; supply --beta instead")
        if self.beta is not None:
            if self.beta.p != self.p:
                raise ConfigError(f"beta is over F_{self.beta.p}, config says p={self.p}")
            if self.beta.r1 != self.r1:
                raise ConfigError(f"beta acts on rank {self.beta.r1}, config says r1={self.r1}")
        for name in ("budget", "witness_cap", "sample_budget", "partitions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")

    @property
    def mode(self) -> str:
        return "build" if self.beta is None else "supplied"

    def echo(self) -> dict:
        return {
            "p": self.p,
            "r1": self.r1,
            "r": self.r,
            "mode": self.mode,
            "budget": self.budget,
            "witness_cap": self.witness_cap,
            "seed": self.seed,
            "sample_budget": self.sample_budget,
            "cocycle_samples": self.cocycle_samples,
        }


@dataclass
class _Verdicts:
    items: dict[str, dict] = field(default_factory=dict)
    budget_hit: bool = False

    def add(self, name: str, ok: bool | None, reason: str | None = None) -> None:
        if ok is None:
            self.items[name] = {"status": SKIPPED, "reason": reason or "not applicable"}
        else:
            entry = {"status": PASS if ok else FAIL}
            if reason:
                entry["reason"] = reason
            self.items[name] = entry

    def skip_budget(self, name: str, err: BudgetExceeded) -> None:
        self.budget_hit = True
        self.add(name, None, f"budget exceeded: {err}")


def _wedge_list(ws) -> list[list[int]]:
    return sorted(list(w.coords) for w in ws)


def _digest(rows) -> str:
    return hashlib.sha256(json.dumps(rows, separators=(",", ":")).encode()).hexdigest()


def _bic_record(bic) -> dict:
    rows = _wedge_list(bic)
    out = {"size": len(rows), "sha256": _digest(rows), "trivial": bic_is_trivial(bic)}
    if len(rows) <= BIC_LISTING_CAP:
        out["elements"] = rows
    return out


def _cocycle_triples(p: int, r1: int, cfg: PipelineConfig):
    if p ** (3 * r1) <= cfg.cocycle_samples:
        return None, "exhaustive"
    rng = random.Random(cfg.seed)
    triples = [
        tuple(tuple(rng.randrange(p) for _ in range(r1)) for _ in range(3))
        for _ in range(cfg.cocycle_samples)
    ]
    return triples, "sampled"


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Build (or take) beta, then run every check and return the certificate dict."""
    cfg.validate()
    started = time.perf_counter_ns()
    p, r1, r = PrimeModulus(cfg.p), cfg.r1, cfg.r
    S = SymplecticSpace(p, r)
    v = _Verdicts()
    cert: dict[str, Any] = {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "config": cfg.echo(),
        "seeds": {"avoidance": cfg.seed, "bic_oracle": cfg.seed, "cocycle_sampling": cfg.seed},
    }

    # beta and its kernel
    if cfg.beta is None:
        lhs, rhs = check_counting_inequality(p, r1)
        v.add("counting_inequality", lhs < rhs, f"#Gr = {lhs} < #P^{2 * r1 - 3} = {rhs}")
        log.info("building beta for p=%d r1=%d", p, r1)
        beta = build_beta(p, r1, seed=cfg.seed, budget=cfg.budget)
    else:
        beta = cfg.beta
        v.add("counting_inequality", None, "beta supplied by the user")
    kern = kernel_generators(beta)
    kernel_rows = [list(kern.row(i)) for i in range(kern.rows)]
    gen_decomp = [is_decomposable(Wedge2(p, r1, row)) for row in kernel_rows]
    cert["beta"] = {
        "r2": beta.r2,
        "matrix": beta.matrix.tolist(),
        "surjective": beta.is_surjective,
    }
    cert["kernel"] = {
        "dim": kern.rows,
        "generators": kernel_rows,
        "generators_decomposable": gen_decomp,
    }
    v.add("beta_surjective", beta.is_surjective, "surjective beta makes the abelianization of G equal to A")
    if cfg.beta is None:
        v.add("kernel_generator_not_decomposable", not any(gen_decomp))
    else:
        v.add("kernel_generator_not_decomposable", None, "beta supplied by the user")

    # group level: the cocycle and its antisymmetrization
    c = iota(beta)
    triples, how = _cocycle_triples(p, r1, cfg)
    v.add("cocycle_identity", verify_cocycle(c, triples), how)
    v.add("theta_iota_identity", theta(c, p, r1, beta.r2) == beta)

    # bicyclic part along both routes
    bic = None
    try:
        bic = bic_of_beta(beta, cfg.budget)
        oracle = bic_bruteforce_oracle(beta, cfg.sample_budget, seed=cfg.seed)
        full = p ** (2 * (r1 + beta.r2)) <= cfg.sample_budget
        cert["bic"] = {
            "via_kernel": _bic_record(bic),
            "via_commutators": _bic_record(oracle),
            "oracle_mode": "all pairs" if full else "fixed central parts",
        }
        v.add("bic_paths_agree", bic == oracle)
        if cfg.beta is None:
            v.add("bic_trivial", bic_is_trivial(bic))
        else:
            v.add("bic_trivial", None, "beta supplied by the user; recorded only")
    except BudgetExceeded as e:
        cert["bic"] = None
        v.skip_budget("bic_paths_agree", e)
        v.skip_budget("bic_trivial", e)

    # closed forms
    climit = closed_climit(p, r)
    depth = max(CONGRUENCE_DEPTH, r1)
    congr = []
    for a in range(1, depth + 1):
        xi = closed_xi(p, a, r)
        congr.append({"a": a, "closed_xi": xi, "holds": (xi - climit) % p**a == 0})
    cert["closed_forms"] = {"climit": climit, "congruences": congr}
    v.add("congruence_climit", all(x["holds"] for x in congr), f"a = 1..{depth}")
    v.add("climit_nonzero", climit != 0)

    # counts
    report = None
    try:
        report = count_report(beta, S, budget=cfg.budget, partitions=cfg.partitions, threads=cfg.threads)
        cert["counts"] = {
            "count_Ev": report.count_Ev,
            "count_Cv": report.count_Cv,
            "val_Ev": report.val_Ev,
            "val_Cv": report.val_Cv,
            "axkatz_bound": report.axkatz_bound,
            "closed_xi": report.closed_xi,
            "closed_climit": report.closed_climit,
        }
        v.add("count_Cv_closed_form", report.count_Cv == report.closed_xi)
        v.add("axkatz", report.val_Ev >= report.axkatz_bound)
        vc = padic_valuation(climit, p)
        if r1 > vc:
            v.add("Cv_valuation", report.val_Cv == vc, f"v_p(C(r)) = {vc}")
        else:
            v.add("Cv_valuation", None, f"r1 = {r1} does not exceed v_p(C(r)) = {vc}")
    except BudgetExceeded as e:
        cert["counts"] = None
        for name in ("count_Cv_closed_form", "axkatz", "Cv_valuation"):
            v.skip_budget(name, e)

    # obstruction witness
    witness = None
    try:
        witness = find_obstruction_witness(beta, S, budget=cfg.budget)
        if witness is None:
            cert["witness"] = {"found": False}
            v.add("witness_valid", None, "no point of E_v has nonzero pullback: pairing constant on E_v")
        else:
            zero = FpMatrix.zeros(p, r1, r)
            in_ev = not any(beta(pullback_wedge(witness.xi, S)))
            base = w_pairing(witness.b, zero, S)
            cert["witness"] = {
                "found": True,
                "b": list(witness.b.coeffs),
                "xi": witness.xi.tolist(),
                "value": witness.value,
                "baseline_value": base,
            }
            v.add("witness_valid", in_ev and witness.value != 0 and base == 0)
        if report is not None:
            v.add("witness_consistency", (witness is not None) == (report.count_Cv < report.count_Ev))
        else:
            v.add("witness_consistency", None, "counts unavailable")
    except BudgetExceeded as e:
        cert["witness"] = None
        v.skip_budget("witness_valid", e)
        v.skip_budget("witness_consistency", e)

    # unramifiedness of the witness class
    if witness is None or bic is None:
        cert["unramified"] = None
        v.add("unramified_witness", None, "no witness class" if bic is not None else "Bic unavailable")
    else:
        ok = unramified_check(witness.b, beta, bic=bic)
        cert["unramified"] = {"witness_b": ok}
        if bic_is_trivial(bic):
            v.add("unramified_witness", ok)
        else:
            v.add("unramified_witness", None, "Bic(G,A) is not {0}; unramifiedness recorded only")

    # tame places: r = 2, pairs of elements of A
    if r == 2 and report is not None:
        try:
            tame = tame_Ev(beta, cfg.budget)
            cert["tame"] = {"count": len(tame)}
            v.add("tame_description", len(tame) == report.count_Ev)
        except BudgetExceeded as e:
            cert["tame"] = None
            v.skip_budget("tame_description", e)
    else:
        cert["tame"] = None
        v.add("tame_description", None, "only for r = 2")

    try:
        ro = rank_one_membership(S, r1, cfg.budget)
        cert["rank_one"] = {"count": ro.count, "span_dim": ro.span_dim, "all_in_Cv": ro.all_in_Cv}
        v.add("rank_one_span", ro.ok)
    except BudgetExceeded as e:
        cert["rank_one"] = None
        v.skip_budget("rank_one_span", e)

    cert["verdicts"] = v.items
    cert["budget_exhausted"] = v.budget_hit
    cert["status"] = FAIL if any(x["status"] == FAIL for x in v.items.values()) else PASS
    if cfg.record_timing:
        cert["timing_ms"] = (time.perf_counter_ns() - started) // 1_000_000
    cert["content_sha256"] = content_digest(cert)
    return cert


def content_digest(cert: dict) -> str:
    """sha256 of the canonical JSON of every field except the digest itself."""
    body = {k: x for k, x in cert.items() if k != "content_sha256"}
    return hashlib.sha256(emit_certificate(body)).hexdigest()


# -- serialization -----------------------------------------------------------------


def _json_safe(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        n = int(obj)
        return str(n) if abs(n) > SAFE_INT else n
    if isinstance(obj, float):
        raise TypeError("floating point values are not allowed in certificates")
    if isinstance(obj, dict):
        return {str(k): _json_safe(x) for k, x in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(x) for x in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _text_lines(obj, prefix="") -> list[str]:
    lines = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            x = obj[k]
            if isinstance(x, (dict, list)) and x and not _flat(x):
                lines.append(f"{prefix}{k}:")
                lines.extend(_text_lines(x, prefix + "  "))
            else:
                lines.append(f"{prefix}{k}: {json.dumps(_json_safe(x), sort_keys=True)}")
    elif isinstance(obj, list):
        for x in obj:
            lines.extend(_text_lines(x, prefix + "- ") if isinstance(x, dict) else [f"{prefix}- {x}"])
    return lines


def _flat(x) -> bool:
    if isinstance(x, list):
        return all(not isinstance(y, dict) for y in x)
    return False


def emit_certificate(cert: dict, format: str = "json") -> bytes:
    if format == "json":
        return (json.dumps(_json_safe(cert), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()
    if format == "text":
        head = [f"certificate {cert.get('schema')} v{cert.get('schema_version')}: {str(cert.get('status')).upper()}"]
        verdicts = cert.get("verdicts") or {}
        for name in sorted(verdicts):
            item = verdicts[name]
            reason = f" ({item['reason']})" if item.get("reason") else ""
            head.append(f"  [{item['status']:>7}] {name}{reason}")
        body = _text_lines({k: x for k, x in cert.items() if k != "verdicts"})
        return ("\n".join(head + [""] + body) + "\n").encode()
    raise ValueError(f"unknown format {format!r}")


def parse_certificate(data: bytes) -> dict:
    try:
        cert = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CertificateError(f"cannot parse certificate: {e}") from None
    if not isinstance(cert, dict) or cert.get("schema") != SCHEMA:
        raise CertificateError("not a descentcert certificate")
    if cert.get("schema_version") != SCHEMA_VERSION:
        raise CertificateError(
            f"schema version {cert.get('schema_version')!r} is not supported (expected {SCHEMA_VERSION})"
        )
    return cert


def _int(x) -> int:
    if isinstance(x, bool):
        raise TypeError("boolean where an integer was expected")
    if isinstance(x, str):
        return int(x)
    if isinstance(x, int):
        return x
    raise TypeError(f"expected an integer, got {type(x).__name__}")


# -- verification -----------------------------------------------------------------


@dataclass
class VerifyResult:
    ok: bool
    level: str
    problems: list[str]


REQUIRED = ("config", "beta", "kernel", "closed_forms", "verdicts", "status", "budget_exhausted", "content_sha256")


def _structural(cert: dict) -> list[str]:
    probs = []
    for k in REQUIRED:
        if k not in cert:
            probs.append(f"missing field {k!r}")
    if probs:
        return probs

    def walk(x, path):
        if isinstance(x, float):
            probs.append(f"floating point value at {path}")
        elif isinstance(x, dict):
            for k, y in x.items():
                walk(y, f"{path}.{k}")
        elif isinstance(x, list):
            for i, y in enumerate(x):
                walk(y, f"{path}[{i}]")

    walk(cert, "$")
    if probs:
        return probs
    if cert["content_sha256"] != content_digest(cert):
        probs.append("content_sha256 does not match the certificate body")
    verdicts = cert["verdicts"]
    for name, item in verdicts.items():
        if item.get("status") not in (PASS, FAIL, SKIPPED):
            probs.append(f"verdict {name!r} has invalid status {item.get('status')!r}")
    expected = FAIL if any(x.get("status") == FAIL for x in verdicts.values()) else PASS
    if cert["status"] != expected:
        probs.append(f"status {cert['status']!r} disagrees with verdicts ({expected!r})")

    try:
        cfg = cert["config"]
        p = PrimeModulus(_int(cfg["p"]))
        r1, r = _int(cfg["r1"]), _int(cfg["r"])
        m = cert["beta"]["matrix"]
        r2 = _int(cert["beta"]["r2"])
        if len(m) != r2 or any(len(row) != wedge_dim(r1) for row in m):
            probs.append("beta matrix has the wrong shape")
        counts = cert.get("counts")
        if counts:
            ev, cv = _int(counts["count_Ev"]), _int(counts["count_Cv"])
            if not 1 <= cv <= ev:
                probs.append(f"count_Cv = {cv} must satisfy 1 <= count_Cv <= count_Ev = {ev}")
            else:
                if _int(counts["val_Ev"]) != padic_valuation(ev, p):
                    probs.append("val_Ev does not match count_Ev")
                if _int(counts["val_Cv"]) != padic_valuation(cv, p):
                    probs.append("val_Cv does not match count_Cv")
            if _int(counts["axkatz_bound"]) != axkatz_bound(r1, r, r2):
                probs.append("axkatz_bound does not match the parameters")
        w = cert.get("witness")
        if w and w.get("found"):
            beta = BetaMap(p, r1, r2, FpMatrix(p, [[_int(x) for x in row] for row in m]))
            S = SymplecticSpace(p, r)
            xi = FpMatrix(p, [[_int(x) for x in row] for row in w["xi"]])
            b = DualWedge(p, r1, [_int(x) for x in w["b"]])
            if any(beta(pullback_wedge(xi, S))):
                probs.append("witness xi is not in E_v")
            if w_pairing(b, xi, S) != _int(w["value"]) or _int(w["value"]) == 0:
                probs.append("witness pairing value is wrong or zero")
    except (KeyError, TypeError, ValueError) as e:
        probs.append(f"malformed certificate: {e!r}")
    return probs


def config_from_certificate(cert: dict) -> PipelineConfig:
    c = cert["config"]
    p = _int(c["p"])
    r1 = _int(c["r1"])
    beta = None
    if c["mode"] == "supplied":
        beta = BetaMap.from_rows(p, r1, [[_int(x) for x in row] for row in cert["beta"]["matrix"]])
    return PipelineConfig(
        p=p,
        r1=r1,
        r=_int(c["r"]),
        beta=beta,
        budget=_int(c["budget"]),
        witness_cap=_int(c["witness_cap"]),
        seed=_int(c["seed"]),
        sample_budget=_int(c["sample_budget"]),
        cocycle_samples=_int(c["cocycle_samples"]),
    )


def _diff(a, b, path="$") -> list[str]:
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for k in sorted(set(a) | set(b)):
            if k not in a or k not in b:
                out.append(f"{path}.{k}: present on one side only")
            else:
                out.extend(_diff(a[k], b[k], f"{path}.{k}"))
        return out
    if isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        out = []
        for i, (x, y) in enumerate(zip(a, b)):
            out.extend(_diff(x, y, f"{path}[{i}]"))
        return out
    return [] if a == b else [f"{path}: recorded {a!r}, recomputed {b!r}"]


def verify_certificate(data: bytes, recheck_level: str = "structural") -> VerifyResult:
    """Check a serialized certificate; ``full`` re-runs the pipeline and compares every field."""
    if recheck_level not in ("structural", "full"):
        raise ValueError(f"unknown recheck level {recheck_level!r}")
    cert = parse_certificate(data)
    if cert.get("tool_version") != __version__:
        raise CertificateError(f"certificate from tool version {cert.get('tool_version')!r}, this is {__version__}")
    probs = _structural(cert)
    if recheck_level == "full" and not probs:
        try:
            cfg = config_from_certificate(cert)
            fresh = json.loads(emit_certificate(run_pipeline(cfg)))
        except (ConfigError, BudgetExceeded, KeyError, ValueError) as e:
            probs.append(f"re-run failed: {e}")
        else:
            skip = ("timing_ms", "content_sha256")
            recorded = {k: x for k, x in cert.items() if k not in skip}
            probs.extend(_diff(recorded, {k: x for k, x in fresh.items() if k not in skip}))
    if not probs and cert["status"] != PASS:
        probs.append("certificate status is fail")
    return VerifyResult(not probs, recheck_level, probs)
