"""Command-line front end.

    residue-lwe run     --config scenario.toml --out trace.csv [--seed S] [--profile test|demo]
    residue-lwe verify  [--profile test|demo] [--trials N] [--seed S]
    residue-lwe keygen  --out key.bin [--seed S] [--profile test|demo]
    residue-lwe inspect FILE

Exit codes: 0 success, 1 failed verification, 2 modulus too small,
3 configuration error, 4 malformed ciphertext file.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import struct
import sys
from pathlib import Path

import numpy as np

from .config import load_scenario, params_to_toml
from .errors import ConfigError, FormatError, ModulusTooSmall, NonFinite, ObservabilityFailure
from .lwe import CiphertextKind, from_bytes, keygen, make_rng
from .simulation import prepare, run_scenario
from .verify import run_checks

log = logging.getLogger("residue_lwe")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_MODULUS = 2
EXIT_CONFIG = 3
EXIT_FORMAT = 4

# test profile: fast, exact-arithmetic sizes; demo: realistic sizes
PROFILES = {
    "test": {"N": 4, "q": 97, "sigma": 1.0, "trials": 20},
    "demo": {"N": 1024, "q": 281474976710677, "sigma": 3.2, "trials": 100},
}
KEY_MAGIC = b"LWEK"


def _write_key(path: Path, key) -> None:
    header = struct.pack("<4sBxxxQId", KEY_MAGIC, 1, key.q, key.N, key.sigma)
    body = np.asarray(key.sk.data.ravel().astype(np.uint64), dtype="<u8").tobytes()
    path.write_bytes(header + body)


def cmd_run(args) -> int:
    try:
        cfg = load_scenario(args.config, seed=args.seed)
        if args.profile == "test":
            cfg = dataclasses.replace(cfg, N=PROFILES["test"]["N"])
        setup = prepare(cfg)
        trace = run_scenario(cfg, setup)
    except ModulusTooSmall as exc:
        print(f"error: modulus too small for {exc.quantity}: {exc}", file=sys.stderr)
        return EXIT_MODULUS
    except (ConfigError, ObservabilityFailure, NonFinite) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    csv_text = trace.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.params_out:
        Path(args.params_out).write_text(params_to_toml(setup.params, setup.realization))
    summary = trace.summary()
    if cfg.epsilon is not None:
        summary["epsilon"] = cfg.epsilon
        summary["within_epsilon"] = summary["max_residue_gap"] <= cfg.epsilon
    print(json.dumps(summary, indent=2), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_verify(args) -> int:
    trials = PROFILES[args.profile]["trials"] if args.trials is None else args.trials
    if trials == 0:
        print("warning: --trials 0 runs no checks; passing vacuously", file=sys.stderr)
    seed = 0 if args.seed is None else args.seed
    results = run_checks(seed, trials, args.profile, canary=args.canary)
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        line = f"{status}  {res.name} ({res.trials} trials)"
        if res.detail:
            line += f": {res.detail}"
        print(line)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAILED


def cmd_keygen(args) -> int:
    prof = PROFILES[args.profile]
    key = keygen(prof["N"], prof["q"], prof["sigma"], make_rng(args.seed))
    _write_key(Path(args.out), key)
    print(f"wrote key: N={key.N} q={key.q} sigma={key.sigma} -> {args.out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        ct = from_bytes(Path(args.file).read_bytes())
    except FormatError as exc:
        print(f"FormatError: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"kind: {ct.kind.name.lower()}")
    print(f"q: {ct.q}")
    print(f"N: {ct.N}")
    print(f"rows: {ct.rows}")
    print(f"width: {ct.body.cols}")
    if ct.kind is CiphertextKind.MODIFIED:
        print("disclosed column:", " ".join(str(v) for v in ct.disclosed_column.flat()))
    else:
        print("no disclosed column")
    print("masked body column:", " ".join(str(v) for v in ct.message_column.flat()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="residue-lwe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write a CSV trace")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--params-out", help="also write the scaled parameters as TOML")
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", choices=PROFILES, default="demo")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the randomized property checks")
    p.add_argument("--profile", choices=PROFILES, default="test")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--canary", action="store_true", help="corrupt one check on purpose")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("keygen", help="write a secret key")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=PROFILES, default="test")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("inspect", help="describe a serialized ciphertext")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
