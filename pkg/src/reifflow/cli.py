"""Command-line entry point: ``reifflow <verb> [--config FILE] [--set key=value ...]``.

Exit status is 0 on success, 1 on domain or numerical errors and 2 on usage
errors (unknown verb, missing or unparsable config file, malformed override).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import AvoidanceFailure, DomainError, FlowExtinctError, NumericalBlowupError
from .geom_core import write_curve

VERBS = {
    "gen": "write the configured shape as a .curve file",
    "approx": "build X^r for every scale; d_H and sup|A| scaling",
    "flow": "evolve the shape itself by level-set curve shortening flow",
    "certify": "flatness deviation of the shape over dyadic scales",
    "uniform": "curvature and distance estimates of the flows of X^r",
    "separation": "distance between flows of X^r and X^(r/2)",
    "nonfatten": "gap between flows of inner and outer barriers",
    "kernelconst": "gradient at the kink of a heat-smoothed step",
    "interior": "interior curvature checks and gradient-estimate runs",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reifflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", metavar="verb", required=True)
    for verb, text in VERBS.items():
        sp = sub.add_parser(verb, help=text, description=text)
        sp.add_argument("--config", type=Path, help="JSON config file (defaults are used for missing keys)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. grid.h=0.002 or scales=[0.04,0.02,0.01]")
    return p


def _load_config(parser: argparse.ArgumentParser, args) -> harness.ExperimentConfig:
    raw = {}
    if args.config is not None:
        if not args.config.is_file():
            parser.error(f"config file {args.config} does not exist")
        try:
            raw = json.loads(args.config.read_text())
        except json.JSONDecodeError as exc:
            parser.error(f"config file {args.config} is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            parser.error(f"config file {args.config} must hold a JSON object")
    for item in args.overrides:
        if "=" not in item:
            parser.error(f"override {item!r} is not of the form KEY=VALUE")
    return harness.ExperimentConfig.from_dict(raw).with_overrides(args.overrides)


def run(verb: str, cfg: harness.ExperimentConfig) -> list[Path]:
    """Run one verb and return the files written under ``cfg.out_dir``."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if verb == "gen":
        x = harness.build_shape(cfg)
        path = out / f"{cfg.shape['type']}.curve"
        write_curve(x, path)
        files = [path]
    elif verb == "approx":
        rep, curves = harness.run_approximation(cfg)
        files = harness.emit_report([rep], out)
        for r, xr in curves.items():
            path = out / f"approx_r{r:.6g}.curve"
            write_curve(xr, path)
            files.append(path)
    elif verb == "flow":
        rep, _ = harness.run_flow(cfg)
        files = harness.emit_report([rep], out)
    elif verb == "certify":
        files = harness.emit_report([harness.run_certificate(cfg)], out)
    elif verb == "uniform":
        files = harness.emit_report([harness.run_uniform_estimates(cfg)], out)
    elif verb == "separation":
        files = harness.emit_report([harness.run_separation(cfg)], out)
    elif verb == "nonfatten":
        files = harness.emit_report([harness.run_nonfattening(cfg)], out)
    elif verb == "kernelconst":
        files = harness.emit_report([harness.run_kernel_constant(cfg)], out)
    elif verb == "interior":
        files = harness.emit_report([harness.run_interior(cfg)], out)
    else:  # pragma: no cover - argparse rejects unknown verbs
        raise DomainError(f"unknown verb {verb!r}")
    echo = out / "config.json"
    echo.write_text(cfg.to_json())
    return files + [echo]


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(parser, args)
        files = run(args.verb, cfg)
    except (DomainError, NumericalBlowupError, FlowExtinctError, AvoidanceFailure) as exc:
        print(f"reifflow {args.verb}: error: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
