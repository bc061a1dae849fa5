"""Command-line driver: ``steerfid estimate|benchmark|oracle|compare``.

Exit status: 0 ok, 2 configuration or capacity problem, 3 solver failure,
4 consistency violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from pathlib import Path

from .errors import ConfigError, ConsistencyError, SolverError
from .oracle import OracleConfig, oracle_search
from .qcore import DensityMatrix
from .sdp import solve_benchmark1, solve_benchmark2
from .states import load_state
from .vqsa import VqsaConfig, run_vqsa

log = logging.getLogger("steerfid")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CONSISTENCY = 0, 2, 3, 4
ORDER_TOL = 1e-4


def parse_partition(text: str) -> list:
    parts = [[label.strip() for label in group.split(",") if label.strip()] for group in text.split("|")]
    if len(parts) < 2 or any(not p for p in parts):
        raise ConfigError(f"bad partition {text!r}; expected e.g. 'A1,A2|B1,B2'")
    return parts


def default_partition(rho: DensityMatrix) -> list:
    """Group labels by their alphabetic prefix; fall back to one label per party."""
    groups: dict[str, list] = {}
    for label in rho.layout.labels:
        groups.setdefault(re.sub(r"\d+$", "", label), []).append(label)
    if len(groups) >= 2:
        return list(groups.values())
    return [[label] for label in rho.layout.labels]


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"vqsa", "oracle", "k", "variant", "partition"}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    return data


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


class Experiment:
    def __init__(self, args):
        self.args = args
        self.cfg = _load_config(args.config)
        self.rho = load_state(args.state)
        part = args.partition or self.cfg.get("partition")
        self.partitions = parse_partition(part) if part else default_partition(self.rho)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def vqsa_config(self) -> VqsaConfig:
        data = dict(self.cfg.get("vqsa", {}))
        if self.args.seed is not None:
            data["seed"] = self.args.seed
        if self.args.shots is not None:
            data["shots"] = self.args.shots
        if self.args.reward is not None:
            data["reward"] = self.args.reward
        return VqsaConfig.from_dict(data)

    def oracle_config(self) -> OracleConfig:
        data = dict(self.cfg.get("oracle", {}))
        if self.args.seed is not None:
            data["seed"] = self.args.seed
        try:
            return OracleConfig(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad oracle section: {exc}") from exc

    def k(self) -> int:
        k = self.args.k if self.args.k is not None else self.cfg.get("k", 2)
        if not isinstance(k, int) or k < 1:
            raise ConfigError(f"k must be a positive integer, got {k!r}")
        return k

    def split(self):
        if len(self.partitions) != 2:
            raise ConfigError("benchmarks need exactly two partitions")
        return self.partitions


def cmd_estimate(exp: Experiment) -> int:
    cfg = exp.vqsa_config()
    trace = run_vqsa(exp.rho, exp.partitions, cfg)
    trace.write_csv(exp.out / "trace.csv")
    summary = {"final": trace.final_reward, "best": trace.best_reward, "config": cfg.to_dict(), "seed": cfg.seed}
    _dump(exp.out / "summary.json", summary)
    print(f"best {trace.best_reward:.6f} final {trace.final_reward:.6f}")
    return EXIT_OK


def _benchmark(exp: Experiment, variant: int, k: int):
    solve = solve_benchmark1 if variant == 1 else solve_benchmark2
    return solve(exp.rho, exp.split(), k)


def cmd_benchmark(exp: Experiment) -> int:
    variant = exp.args.variant or exp.cfg.get("variant", 1)
    if variant not in (1, 2):
        raise ConfigError(f"variant must be 1 or 2, got {variant!r}")
    res = _benchmark(exp, variant, exp.k())
    data = res.to_json()
    data["variant"] = variant
    _dump(exp.out / "benchmark.json", data)
    print(f"benchmark{variant} k={res.k} value {res.value:.8f}")
    return EXIT_OK


def cmd_oracle(exp: Experiment) -> int:
    res = oracle_search(exp.rho, exp.partitions, exp.oracle_config())
    data = {
        "value": res.value,
        "decomposition_value": res.decomposition_value,
        "witness_fidelity": res.witness_fidelity,
        "restart_values": [float(v) for v in res.restart_values],
        "spread": res.spread,
    }
    _dump(exp.out / "oracle.json", data)
    print(f"oracle {res.value:.8f}")
    return EXIT_OK


def cmd_compare(exp: Experiment) -> int:
    k = exp.k()
    rows = [("oracle", oracle_search(exp.rho, exp.split(), exp.oracle_config()).value)]
    rows.append((f"benchmark1_k{k}", _benchmark(exp, 1, k).value))
    rows.append((f"benchmark2_k{k}", _benchmark(exp, 2, k).value))
    if "vqsa" in exp.cfg or exp.args.with_vqsa:
        rows.append(("vqsa", run_vqsa(exp.rho, exp.partitions, exp.vqsa_config()).best_reward))
    with open(exp.out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "value"])
        for name, val in rows:
            w.writerow([name, repr(float(val))])
    values = dict(rows)
    upper = min(values[f"benchmark1_k{k}"], values[f"benchmark2_k{k}"])
    lower = [(name, v) for name, v in rows if name in ("oracle", "vqsa")]
    violations = [f"{name} {v:.8f} exceeds benchmark {upper:.8f}" for name, v in lower if v > upper + ORDER_TOL]
    _dump(exp.out / "compare.json", {"k": k, "values": {n: float(v) for n, v in rows}, "violations": violations})
    for name, val in rows:
        print(f"{name:>16} {val:.8f}")
    if violations:
        raise ConsistencyError("; ".join(violations))
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "benchmark": cmd_benchmark, "oracle": cmd_oracle, "compare": cmd_compare}


def _shots(text: str):
    if text == "exact":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("shots must be an integer or 'exact'")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="steerfid", description="Fidelity-of-separability estimation and benchmarks")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--state", required=True, help="named state or path to a state JSON file")
    ap.add_argument("--config", help="JSON file with vqsa/oracle/k/variant/partition sections")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--k", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--shots", type=_shots)
    ap.add_argument("--reward", choices=("global", "local"))
    ap.add_argument("--variant", type=int, choices=(1, 2))
    ap.add_argument("--partition", help="label groups, e.g. 'A1,A2|B1,B2'")
    ap.add_argument("--with-vqsa", action="store_true", help="compare: also run VQSA")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](Experiment(args))
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConsistencyError as exc:
        print(f"consistency error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (ValueError, KeyError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
