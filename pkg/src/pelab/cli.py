"""Command line entry point: pe-lab <experiment> [options].

Configuration comes from a JSON or TOML file (--config); individual flags
override file values.  Exit codes: 0 on verdict success, 2 on a numeric
verdict failure (for example a non-converged flow), 1 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigInvalid, PelabError
from .harness import EXPERIMENTS, ExperimentConfig, run


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:  # pragma: no cover - py 3.10 path
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pe-lab",
        description="Experiments on rotationally symmetric asymptotically hyperbolic metrics",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="JSON or TOML config file")
    parser.add_argument("--n", type=int, help="dimension (>= 3)")
    parser.add_argument("--N", type=int, dest="num_nodes", help="number of grid nodes")
    parser.add_argument("--Rmax", type=float, dest="r_max", help="truncation radius")
    parser.add_argument("--scheme", type=int, choices=(2, 4))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--amplitude", type=float, help="perturbation amplitude")
    parser.add_argument("--kind", help="perturbation kind")
    parser.add_argument("--out", dest="output_dir", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    data: dict = {}
    try:
        if args.config:
            data = _load_config_file(args.config)
        data["experiment"] = args.experiment
        for key in ("n", "num_nodes", "r_max", "scheme", "seed", "output_dir"):
            val = getattr(args, key)
            if val is not None:
                data[key] = val
        pert = dict(data.get("perturbation", {}))
        if args.amplitude is not None:
            pert["amplitude"] = args.amplitude
        if args.kind is not None:
            pert["kind"] = args.kind
        if pert:
            data["perturbation"] = pert
        config = ExperimentConfig.from_dict(data)
    except (ConfigInvalid, OSError, ValueError) as exc:
        print(f"pe-lab: invalid configuration: {exc}", file=sys.stderr)
        return 1
    try:
        manifest = run(config)
    except PelabError as exc:
        print(f"pe-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(
        f"pe-lab {config.experiment}: verdict={manifest.verdict} "
        f"wall={manifest.wall_time_s:.2f}s outputs={[o['name'] for o in manifest.outputs]}"
    )
    return manifest.exit_code


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
