"""Command line entry point: ``descentcert {build-beta,count,witness,certify,verify}``.

Exit codes: 0 pass, 1 a verdict failed, 2 usage or config error, 3 budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .avoidance import AvoidanceSearchExhausted, build_beta, kernel_generators
from .certify import (
    CertificateError,
    ConfigError,
    PipelineConfig,
    emit_certificate,
    run_pipeline,
    verify_certificate,
)
from .extension import BetaMap
from .fpcore import BudgetExceeded, Wedge2, is_decomposable
from .localcount import SymplecticSpace, count_report, find_obstruction_witness

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("descentcert")


def read_beta(path: str | Path) -> BetaMap:
    """Parse ``p rows cols`` followed by row-major entries; r1 is recovered from cols."""
    tokens = Path(path).read_text().split()
    try:
        p, rows, cols = (int(t) for t in tokens[:3])
        entries = [int(t) for t in tokens[3:]]
    except ValueError:
        raise ConfigError(f"{path}: entries must be integers") from None
    if len(entries) != rows * cols:
        raise ConfigError(f"{path}: expected {rows * cols} entries, found {len(entries)}")
    r1 = next((n for n in range(2, 256) if n * (n - 1) // 2 == cols), None)
    if r1 is None:
        raise ConfigError(f"{path}: {cols} columns is not r1(r1-1)/2 for any r1")
    try:
        return BetaMap.from_rows(p, r1, [entries[i * cols:(i + 1) * cols] for i in range(rows)])
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


def format_beta(beta: BetaMap) -> str:
    lines = [f"{int(beta.p)} {beta.r2} {beta.matrix.cols}"]
    lines += [" ".join(str(x) for x in row) for row in beta.matrix.tolist()]
    return "\n".join(lines) + "\n"


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for these flags")
    common.add_argument("--p", type=int)
    common.add_argument("--r1", type=int)
    common.add_argument("--r", type=int)
    common.add_argument("--beta", help="beta matrix file: 'p rows cols' then row-major entries")
    common.add_argument("--budget", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--partitions", type=int)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "text"))
    common.add_argument("-v", "--verbose", action="count", default=0)

    ap = argparse.ArgumentParser(
        prog="descentcert",
        description="Exact descent-set computations over F_p with re-checkable certificates.",
        epilog="exit codes: 0 pass, 1 a verdict failed, 2 usage or config error, 3 budget exhausted",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("build-beta", parents=[common], help="construct beta with trivial bicyclic part")
    sub.add_parser("count", parents=[common], help="count E_v and C_v and compare with closed forms")
    sub.add_parser("witness", parents=[common], help="find a class pairing non-constantly on E_v")
    sub.add_parser("certify", parents=[common], help="run every check and emit a certificate")
    v = sub.add_parser("verify", parents=[common], help="check a certificate")
    v.add_argument("certificate")
    v.add_argument("--level", choices=("structural", "full"), default="full")
    return ap


DEFAULTS = {"budget": 2**28, "seed": 0, "partitions": 1, "format": "json"}


def _settings(args) -> dict:
    vals = dict(DEFAULTS)
    if args.config:
        try:
            vals.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
    for k in ("p", "r1", "r", "beta", "budget", "seed", "partitions", "out", "format"):
        x = getattr(args, k)
        if x is not None:
            vals[k] = x
    return vals


def _beta_from(vals: dict) -> BetaMap | None:
    return read_beta(vals["beta"]) if vals.get("beta") else None


def _need(vals: dict, *keys: str) -> None:
    missing = [k for k in keys if vals.get(k) is None]
    if missing:
        raise ConfigError("missing " + ", ".join(f"--{k}" for k in missing))


def _config(vals: dict) -> PipelineConfig:
    beta = _beta_from(vals)
    if beta is not None:
        vals.setdefault("p", int(beta.p))
        vals.setdefault("r1", beta.r1)
    _need(vals, "p", "r1", "r")
    cfg = PipelineConfig(
        p=vals["p"],
        r1=vals["r1"],
        r=vals["r"],
        beta=beta,
        budget=vals["budget"],
        seed=vals["seed"],
        partitions=vals["partitions"],
    )
    cfg.validate()
    return cfg


def _beta_for(cfg: PipelineConfig) -> BetaMap:
    return cfg.beta if cfg.beta is not None else build_beta(cfg.p, cfg.r1, seed=cfg.seed, budget=cfg.budget)


def _write(vals: dict, data: bytes) -> None:
    if vals.get("out"):
        Path(vals["out"]).write_bytes(data)
    else:
        sys.stdout.write(data.decode())


def _dump(vals: dict, obj: dict) -> bytes:
    if vals["format"] == "json":
        return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode()
    return ("\n".join(f"{k}: {obj[k]}" for k in sorted(obj)) + "\n").encode()


def cmd_build_beta(vals: dict) -> int:
    _need(vals, "p", "r1")
    beta = build_beta(vals["p"], vals["r1"], seed=vals["seed"], budget=vals["budget"])
    kern = kernel_generators(beta)
    for i in range(kern.rows):
        log.info("kernel generator %s decomposable=%s", kern.row(i), is_decomposable(Wedge2(beta.p, beta.r1, kern.row(i))))
    _write(vals, format_beta(beta).encode())
    return EXIT_OK


def cmd_count(vals: dict) -> int:
    cfg = _config(vals)
    beta = _beta_for(cfg)
    rep = count_report(beta, SymplecticSpace(cfg.p, cfg.r), budget=cfg.budget, partitions=cfg.partitions)
    obj = dict(vars(rep))
    obj["axkatz_holds"] = rep.val_Ev >= rep.axkatz_bound
    obj["closed_form_matches"] = rep.count_Cv == rep.closed_xi
    _write(vals, _dump(vals, obj))
    return EXIT_OK if obj["axkatz_holds"] and obj["closed_form_matches"] else EXIT_FAIL


def cmd_witness(vals: dict) -> int:
    cfg = _config(vals)
    beta = _beta_for(cfg)
    w = find_obstruction_witness(beta, SymplecticSpace(cfg.p, cfg.r), budget=cfg.budget)
    if w is None:
        obj = {"found": False}
    else:
        obj = {"found": True, "b": list(w.b.coeffs), "xi": w.xi.tolist(), "value": w.value}
    _write(vals, _dump(vals, obj))
    return EXIT_OK


def cmd_certify(vals: dict) -> int:
    cfg = _config(vals)
    cert = run_pipeline(cfg)
    _write(vals, emit_certificate(cert, vals["format"]))
    if cert["status"] != "pass":
        return EXIT_FAIL
    return EXIT_BUDGET if cert["budget_exhausted"] else EXIT_OK


def cmd_verify(vals: dict, args) -> int:
    data = Path(args.certificate).read_bytes()
    res = verify_certificate(data, args.level)
    lines = [f"{res.level}: {'pass' if res.ok else 'fail'}"] + [f"  {x}" for x in res.problems]
    print("\n".join(lines))
    return EXIT_OK if res.ok else EXIT_FAIL


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        vals = _settings(args)
        if args.command == "verify":
            return cmd_verify(vals, args)
        return {
            "build-beta": cmd_build_beta,
            "count": cmd_count,
            "witness": cmd_witness,
            "certify": cmd_certify,
        }[args.command](vals)
    except (ConfigError, CertificateError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExceeded, AvoidanceSearchExhausted) as e:
        print(f"budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
