"""Command-line entry point for the experiments and verification suites.

Usage: iscm <command> --seed N [--config PATH] [--out DIR] [--workers K] [--replicates R]

Exit codes: 0 success, 1 validation error, 2 runtime failure, 3 failed
verification suite.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import experiments as ex
from .errors import InvalidParameter, IscmError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3

COMMANDS = ("generate", "sortability", "chain-corr", "implied-noise",
            "noise-transfer", "benchmark", "verify")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="base seed (required here or in the config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--replicates", type=int, help="number of replicates / cases")

    p = _Parser(prog="iscm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "verify":
            sp.add_argument("suite", choices=sorted(ex.SUITES))
    return p


def load_config(args) -> ex.ExperimentConfig:
    obj = {}
    if args.config is not None:
        try:
            obj = json.loads(args.config.read_text())
        except OSError as e:
            raise InvalidParameter(f"cannot read config: {e}") from None
        except json.JSONDecodeError as e:
            raise InvalidParameter(f"config is not valid JSON: {e}") from None
        if not isinstance(obj, dict):
            raise InvalidParameter("config must be a JSON object")
    kind = obj.pop("kind", None)
    if kind is not None and kind != args.command:
        raise InvalidParameter(f"config is for {kind!r}, not {args.command!r}")
    for key in ("seed", "out", "workers", "replicates"):
        val = getattr(args, key)
        if val is not None:
            obj[key] = val
    cfg = ex.ExperimentConfig.from_dict(obj)
    cfg.kind = args.command
    cfg.explicit_replicates = "replicates" in obj
    cfg.validate()
    return cfg


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path: Path, rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if not rows:
            return path
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
    return path


def run(cfg: ex.ExperimentConfig, command: str, suite: str | None = None,
        cases: int | None = None) -> int:
    out = Path(cfg.out)
    if command == "generate":
        paths = ex.run_generate(cfg)
        print(f"wrote {len(paths)} datasets to {out}")
    elif command == "sortability":
        per, summary = ex.run_sortability(cfg)
        write_csv(out / "sortability_replicates.csv", per)
        write_csv(out / "sortability.csv", summary)
        for s in summary:
            print(f"{s['graph']}({s['d']},{s['k']:g}) {s['regime']:<12} {s['criterion']:<3} "
                  f"mean={s['mean']:.3f} std={s['std']:.3f}")
    elif command == "chain-corr":
        rows = ex.chain_corr(int(cfg.d[0]), cfg.weights, cfg.replicates, cfg.seed, cfg.noise_var)
        write_csv(out / "chain_corr.csv", rows)
        for r in rows:
            print(f"{r['pair']:>6} standardized={r['standardized']:.4f} iscm={r['iscm']:.4f}")
    elif command == "implied-noise":
        rows, summary = ex.run_implied_noise(cfg)
        write_csv(out / "implied_noise.csv", rows)
        write_csv(out / "implied_noise_summary.csv", summary)
        for s in summary:
            print(f"{s['regime']:<12} median 1/noise_var = {s['median']:.4g}")
    elif command == "noise-transfer":
        rows = ex.run_noise_transfer(cfg)
        write_csv(out / "noise_transfer.csv", rows)
        worst = max(r["max_abs_var_gap"] for r in rows)
        print(f"{len(rows)} systems, max |Var_t - Var_a| = {worst:.3g}")
    elif command == "benchmark":
        rows, summary = ex.run_benchmark(cfg)
        write_csv(out / "benchmark.csv", rows)
        write_csv(out / "benchmark_summary.csv", summary)
        for s in summary:
            print(f"{s['regime']:<12} {s['criterion']:<6} median F1={s['median_f1']:.3f} "
                  f"SHD={s['median_shd']:g}")
    elif command == "verify":
        report = ex.run_verify(suite, cfg.seed, cases)
        write_json(out / f"verify_{suite}.json", report)
        status = "PASS" if report["passed"] else "FAIL"
        print(f"{suite}: {status} ({len(report['cases']) - report['failures']}/{len(report['cases'])} cases)")
        return EXIT_OK if report["passed"] else EXIT_VERIFY
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (IscmError, TypeError) as e:
        print(f"iscm: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    try:
        # verification suites have their own default case counts
        cases = cfg.replicates if cfg.explicit_replicates else None
        return run(cfg, args.command, getattr(args, "suite", None), cases)
    except IscmError as e:
        print(f"iscm: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001  (any other failure is a runtime error)
        print(f"iscm: runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
