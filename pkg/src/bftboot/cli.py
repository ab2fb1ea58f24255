"""Command-line entry point.

Subcommands cover the full experiment surface: failure-probability tables,
bootstrap simulation runs, key generation, aggregate and ledger
verification, and the proof-of-work cost baseline.  Every file written
carries a provenance manifest; every run is deterministic given its flags.

Exit codes: 0 success, 1 verification rejected, 2 bad configuration or
arguments.  The BFTBOOT_LOG environment variable sets log verbosity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

from . import __version__, bls12381, modelgroup, protocol
from .encoding import MalformedInput
from .rng import SplitMix64, derive_seed
from .scheme import DigestMismatch, EndorsementScheme, SchemeError
from .selection import SelectionError, failure_probability
from .sim import ConfigInvalid, SimConfig, load_config, run_bootstrap
from .sim.powbaseline import run_pow_baseline
from .sim.report import RunManifest, write_json, write_timeseries_csv

log = logging.getLogger("bftboot")


class BadRange(ValueError):
    pass


def _fail(error: str, detail: str) -> int:
    print(json.dumps({"error": error, "detail": detail}), file=sys.stderr)
    return 2


def _params_digest(params: dict) -> str:
    payload = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def _backend(name: str):
    return modelgroup if name == "model" else bls12381


# -- probability-table --------------------------------------------------------


def _parse_ratio(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, _, den = text.partition("/")
        return float(num) / float(den)
    return float(text)


def cmd_probability_table(args) -> int:
    if args.n_min < 1 or args.n_min > args.n_max:
        raise BadRange(
            f"need 1 <= n_min <= n_max, got [{args.n_min}, {args.n_max}]"
        )
    ratio_labels = [r.strip() for r in args.ratios.split(",") if r.strip()]
    if not ratio_labels:
        raise BadRange("at least one adversary ratio is required")
    ratios = [_parse_ratio(label) for label in ratio_labels]

    manifest = RunManifest(
        tool_version=__version__,
        command="probability-table",
        seed=0,
        config_digest=_params_digest({
            "n_min": args.n_min, "n_max": args.n_max,
            "ratios": ratio_labels,
        }),
        backend="analytic",
        outputs=(os.path.basename(args.out),) if args.out else (),
    )
    lines = [
        "# manifest: " + json.dumps(manifest.to_dict(), sort_keys=True,
                                    separators=(",", ":")),
        ",".join(["n"] + [f"p={label}" for label in ratio_labels]),
    ]
    for n in range(args.n_min, args.n_max + 1):
        row = [str(n)]
        for ratio in ratios:
            row.append(f"{failure_probability(n, ratio):.5e}")
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)
    return 0


# -- simulate ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.config:
        config = load_config(args.config)
    else:
        config = SimConfig()
    if args.seed is not None:
        config = config.with_overrides(seed=args.seed)
    config.validate()
    for warning in config.warnings():
        log.warning("%s", warning)

    report = run_bootstrap(config)
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.json")
    series_path = os.path.join(args.out, "timeseries.csv")
    write_json(report, report_path)
    write_timeseries_csv(report, series_path)
    log.info("wrote %s and %s", report_path, series_path)

    if args.format == "json":
        json.dump(report.to_dict(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        with open(series_path, "r", encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    return 0


# -- keygen / verify -----------------------------------------------------------


def cmd_keygen(args) -> int:
    backend = _backend(args.backend)
    scheme = EndorsementScheme(backend)
    keypair = scheme.key_generate(SplitMix64(derive_seed(args.seed, "keygen")))
    manifest = RunManifest(
        tool_version=__version__,
        command="keygen",
        seed=args.seed,
        config_digest=_params_digest({"seed": args.seed,
                                      "backend": args.backend}),
        backend=args.backend,
        outputs=(os.path.basename(args.out),) if args.out else (),
    )
    payload = {
        "manifest": manifest.to_dict(),
        "secret": hex(keypair.secret),
        "public": bytes(backend.g2_to_bytes(keypair.public)).hex(),
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)
    return 0


def _read_hex_file(path: str) -> bytes:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise MalformedInput(f"{path} is not hex: {exc}") from exc


def _verify_bundle(scheme: EndorsementScheme, aggregate_bytes: bytes,
                   keys_bytes: bytes) -> bool:
    # content-level failures are verification rejections, not usage errors
    try:
        aggregate = scheme.aggregate_from_bytes(aggregate_bytes)
        key_set = scheme.key_set_from_bytes(keys_bytes)
        apk = scheme.aggregate_public_keys(aggregate.vector, key_set)
        return scheme.verify(aggregate, apk)
    except (MalformedInput, bls12381.MalformedPoint, DigestMismatch,
            SchemeError, ValueError):
        return False


def cmd_verify(args) -> int:
    scheme = EndorsementScheme(_backend(args.backend))
    if args.ledger:
        with open(args.ledger, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line.strip()]
        rejected = 0
        for index, line in enumerate(lines):
            try:
                record = protocol.parse_ledger_line(scheme, line)
                ok, reason = protocol.check_record(scheme, record)
            except (MalformedInput, bls12381.MalformedPoint, ValueError,
                    KeyError):
                ok, reason = False, "unparseable"
            if ok:
                print(f"record {index}: ACCEPT")
            else:
                print(f"record {index}: REJECT {reason}")
                rejected += 1
        print(f"{len(lines) - rejected}/{len(lines)} records accepted")
        return 1 if rejected else 0

    if not args.aggregate or not args.keys:
        raise MalformedInput(
            "verify needs --aggregate and --keys, or --ledger"
        )
    ok = _verify_bundle(scheme, _read_hex_file(args.aggregate),
                        _read_hex_file(args.keys))
    print("ACCEPT" if ok else "REJECT")
    return 0 if ok else 1


# -- pow-baseline --------------------------------------------------------------


def cmd_pow_baseline(args) -> int:
    report = run_pow_baseline(args.difficulty, args.trials, seed=args.seed,
                              hash_rate=args.hash_rate)
    if args.out:
        write_json(report, args.out)
        log.info("wrote %s", args.out)
    json.dump(report.to_dict(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bftboot",
        description="Endorsement-based bootstrap tooling: probability "
                    "tables, simulation, keys, and verification.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probability-table",
                       help="endorsement failure probability table (CSV)")
    p.add_argument("--n-min", type=int, default=10)
    p.add_argument("--n-max", type=int, default=30)
    p.add_argument("--ratios", default="1/2,1/3",
                   help="comma-separated adversary ratios, e.g. 1/2,1/3")
    p.add_argument("--out", default=None, help="output CSV path")
    p.set_defaults(func=cmd_probability_table)

    p = sub.add_parser("simulate", help="run one bootstrap simulation")
    p.add_argument("--config", default=None, help="SimConfig JSON path")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="stdout rendering")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("keygen", help="generate a key pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", choices=("pairing", "model"),
                   default="pairing")
    p.add_argument("--out", default=None, help="output JSON path")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("verify",
                       help="verify an aggregate bundle or a ledger export")
    p.add_argument("--aggregate", default=None,
                   help="hex file with a serialized aggregate endorsement")
    p.add_argument("--keys", default=None,
                   help="hex file with the serialized endorser key set")
    p.add_argument("--ledger", default=None,
                   help="ledger export file, one JSON record per line")
    p.add_argument("--backend", choices=("pairing", "model"),
                   default="pairing")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("pow-baseline",
                       help="proof-of-work admission cost baseline")
    p.add_argument("--difficulty", type=int, required=True)
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hash-rate", type=float, default=26214.4)
    p.add_argument("--out", default=None, help="output JSON path")
    p.set_defaults(func=cmd_pow_baseline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("BFTBOOT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BadRange, ConfigInvalid, SelectionError, MalformedInput,
            ValueError) as exc:
        return _fail(type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail("IoFailure", str(exc))


if __name__ == "__main__":
    sys.exit(main())
