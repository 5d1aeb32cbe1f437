"""Command-line front end.

Subcommands
-----------
classify      ground-state classification of one spec -> JSON report
sweep         one- or two-axis parameter sweep -> CSV grid (plot-ready)
beta-hat      characteristic-value curve over a probe range -> JSON
solve-scalar  scalar ground-state profile -> CSV + metadata JSON
verify-pde    constrained PDE minimization -> CSV field + JSON report

Common flags: --config <path>, --out <path>, --seed <int>,
--threads <int>, --plot.  Exit codes: 0 success, 2 config error,
3 solver failure.  Identical config and seed give byte-identical
outputs; floats are printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import action, algebraic, mandel, scalar, variational
from .model import (
    Grid1D,
    InvalidSpecError,
    ProblemSpec,
    SolverError,
    UnsupportedRegimeError,
    validate_spec,
)
from .reduction import Verdict, classify

DEFAULT_SEED = 12345


class ConfigError(Exception):
    pass


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")


def _spec_from_config(config: dict) -> ProblemSpec:
    if "spec" not in config:
        raise ConfigError("config missing key 'spec'")
    try:
        spec = ProblemSpec.from_json_dict(config["spec"])
    except InvalidSpecError as exc:
        raise ConfigError(f"bad 'spec' section: {exc}")
    report = validate_spec(spec, check_p1=False)
    if not report.valid:
        raise ConfigError("invalid spec: " + "; ".join(report.structural_errors))
    return spec


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


# ---------------------------------------------------------------------------
# sweep machinery
# ---------------------------------------------------------------------------

_AXIS_RE = re.compile(r"^(?:K\[(\d+)\]\[(\d+)\]|omega\[(\d+)\]|beta)$")


@dataclass
class SweepAxis:
    name: str
    values: np.ndarray


def _parse_axis(doc: dict, spec: ProblemSpec) -> SweepAxis:
    for key in ("name", "min", "max", "n"):
        if key not in doc:
            raise ConfigError(f"sweep axis missing key '{key}'")
    name = doc["name"]
    m = _AXIS_RE.match(name)
    if not m:
        raise ConfigError(f"unknown sweep axis name '{name}' (use K[i][j], omega[i] or beta)")
    if name == "beta" and not spec.P:
        raise ConfigError("axis 'beta' requires a probe set P in the spec")
    if m.group(1):
        i, j = int(m.group(1)), int(m.group(2))
        if not (1 <= i <= spec.M and 1 <= j <= spec.M):
            raise ConfigError(f"axis '{name}' out of range for M={spec.M}")
    if m.group(3):
        i = int(m.group(3))
        if not (1 <= i <= spec.M):
            raise ConfigError(f"axis '{name}' out of range for M={spec.M}")
    n = int(doc["n"])
    if n < 2:
        raise ConfigError(f"axis '{name}' needs n >= 2")
    return SweepAxis(name=name, values=np.linspace(float(doc["min"]), float(doc["max"]), n))


def _apply_axis(spec: ProblemSpec, name: str, value: float) -> ProblemSpec:
    m = _AXIS_RE.match(name)
    if name == "beta":
        return spec.with_beta(value)
    if m.group(1):
        i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
        K = spec.K.copy()
        K[i, j] = K[j, i] = value
        return ProblemSpec(spec.M, spec.p, spec.N, spec.omega, K, spec.P, spec.beta)
    i = int(m.group(3)) - 1
    w = spec.omega.copy()
    w[i] = value
    return ProblemSpec(spec.M, spec.p, spec.N, w, spec.K, spec.P, spec.beta)


TIE_TOL = 1e-9


def _sweep_point(spec: ProblemSpec, seed: int) -> dict:
    """Winner among amplitude candidates plus the classification verdict."""
    try:
        cands = algebraic.enumerate_candidates(spec, use_maximizer_starts=False)
    except UnsupportedRegimeError:
        cands = []
    if not cands:
        return {"verdict": Verdict.NO_GROUND_STATES.value, "support_mask": "0" * spec.M,
                "action_coeff": math.inf, "boundary": False}
    winner = cands[0]
    boundary = len(cands) > 1 and (
        cands[1].reduced_action_coeff - winner.reduced_action_coeff
        <= TIE_TOL * max(1.0, winner.reduced_action_coeff)
    )
    if spec.p == 1:
        # positive solutions exist iff the sphere maximum is positive, and the
        # winning support carries the maximizer, so the verdict follows
        full = len(winner.support) == spec.M
        if boundary:
            verdict = Verdict.MIXED.value
        else:
            verdict = Verdict.ALL_NONTRIVIAL.value if full else Verdict.SEMITRIVIAL_ONLY.value
    else:
        verdict = classify(spec, n_random=32, seed=seed).verdict.value
    return {"verdict": verdict, "support_mask": winner.support_mask(),
            "action_coeff": winner.reduced_action_coeff, "boundary": boundary}


def run_sweep(spec: ProblemSpec, axes: list, seed: int, threads: int = 1) -> list:
    """Row per grid point, ordered by grid index (axis1 outer, axis2 inner)."""
    if not 1 <= len(axes) <= 2:
        raise ConfigError("sweep needs one or two axes")
    points = []
    if len(axes) == 1:
        for v in axes[0].values:
            points.append(((axes[0].name, float(v)),))
    else:
        for v1 in axes[0].values:
            for v2 in axes[1].values:
                points.append(((axes[0].name, float(v1)), (axes[1].name, float(v2))))

    def work(assignment):
        s = spec
        for name, value in assignment:
            s = _apply_axis(s, name, value)
        row = dict(assignment)
        row.update(_sweep_point(s, seed))
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, points))
    else:
        rows = [work(pt) for pt in points]
    return rows


def write_sweep_csv(rows: list, axes: list, path):
    names = [ax.name for ax in axes]
    cols = names + ["verdict", "support_mask", "action_coeff", "boundary"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            rec = [_fmt(row[n]) for n in names]
            rec += [row["verdict"], row["support_mask"], _fmt(row["action_coeff"]),
                    "boundary" if row["boundary"] else ""]
            fh.write(",".join(rec) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_classify(args) -> int:
    config = _load_config(args.config)
    spec = _spec_from_config(config)
    report = classify(spec, seed=args.seed)
    text = json.dumps(report.to_json_dict(), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    spec = _spec_from_config(config)
    section = config.get("sweep")
    if not section:
        raise ConfigError("config missing key 'sweep'")
    if "axes" not in section or not section["axes"]:
        raise ConfigError("sweep section missing key 'axes'")
    axes = [_parse_axis(doc, spec) for doc in section["axes"]]
    out = args.out or section.get("out")
    if not out:
        raise ConfigError("sweep needs an output path (--out or sweep.out)")
    rows = run_sweep(spec, axes, seed=args.seed, threads=args.threads)
    write_sweep_csv(rows, axes, out)
    if args.plot and len(axes) == 2:
        from . import figures

        figures.render_phase_diagram(rows, [ax.name for ax in axes],
                                     Path(out).with_suffix(".png"))
    return 0


def cmd_beta_hat(args) -> int:
    config = _load_config(args.config)
    spec = _spec_from_config(config)
    section = config.get("beta_hat")
    if not section:
        raise ConfigError("config missing key 'beta_hat'")
    if "betas" in section:
        betas = [float(b) for b in section["betas"]]
    elif all(k in section for k in ("min", "max", "n")):
        betas = list(np.linspace(float(section["min"]), float(section["max"]),
                                 int(section["n"])))
    elif "beta" in section:
        betas = [float(section["beta"])]
    else:
        raise ConfigError("beta_hat section needs 'betas', 'beta' or min/max/n")
    results = mandel.beta_hat_curve(spec, betas, seed=args.seed)
    doc = {"curve": [r.to_json_dict() for r in results]}
    text = json.dumps(doc, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        if args.plot:
            from . import figures

            figures.render_beta_hat_curve(doc["curve"], Path(args.out).with_suffix(".png"))
    else:
        print(text)
    return 0


def cmd_solve_scalar(args) -> int:
    gs = scalar.solve_scalar(args.p, args.N, args.omega)
    out = Path(args.out)
    scalar.write_profile_csv(gs, out)
    meta = scalar.metadata_dict(gs)
    out.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    if args.plot:
        from . import figures

        figures.render_scalar_profile(gs, out.with_suffix(".png"))
    return 0


def cmd_verify_pde(args) -> int:
    config = _load_config(args.config)
    spec = _spec_from_config(config)
    section = config.get("pde", {})
    grid = None
    if section:
        for key in ("left", "right", "nodes"):
            if key not in section:
                raise ConfigError(f"pde section missing key '{key}'")
        grid = Grid1D(left=float(section["left"]), right=float(section["right"]),
                      n=int(section["nodes"]))
    out = Path(args.out) if args.out else None

    try:
        result = variational.minimize_constrained(spec, grid=grid, seed=args.seed)
    except variational.NoGroundStatesError:
        doc = {"verdict": Verdict.NO_GROUND_STATES.value}
        text = json.dumps(doc, sort_keys=True, indent=2)
        if out:
            out.with_suffix(".json").write_text(text + "\n")
        else:
            print(text)
        return 0

    doc = {
        "I_value": result.I_value,
        "J_value": result.J_value,
        "lambda_G": result.lambda_G,
        "proportionality_defect": result.proportionality_defect,
        "amplitude_ratios": [float(v) for v in result.amplitude_ratios],
        "el_residual": result.el_residual,
        "converged": result.converged,
        "iterations": result.iterations,
        "seed_kind": result.seed_kind,
    }
    if spec.equal_omega():
        gs = scalar.solve_scalar(spec.p, spec.N, float(spec.omega[0]))
        rep = variational.verify_characterization(spec, result, gs)
        doc["characterization"] = {
            "proportionality_defect": rep.proportionality_defect,
            "fitted_amplitudes": [float(v) for v in rep.fitted_amplitudes],
            "predicted_amplitudes": [float(v) for v in rep.predicted_amplitudes],
            "amplitude_mismatch": rep.amplitude_mismatch,
            "profile_mismatch": rep.profile_mismatch,
            "action_relative_error": rep.action_relative_error,
            "passed": rep.passed,
        }
    text = json.dumps(doc, sort_keys=True, indent=2)
    if out:
        variational.write_field_csv(result, out)
        out.with_suffix(".json").write_text(text + "\n")
        if args.plot:
            from . import figures

            figures.render_field_components(result, out.with_suffix(".png"))
    else:
        print(text)
    return 0 if result.converged else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cnls",
        description="ground-state classification for coupled semilinear "
                    "Schrodinger systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", help="output file path")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--plot", action="store_true",
                       help="render a PNG figure next to the output")

    p = sub.add_parser("classify", help="classify ground states of one spec")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="parameter sweep over one or two axes")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("beta-hat", help="characteristic coupling value curve")
    common(p)
    p.set_defaults(func=cmd_beta_hat)

    p = sub.add_parser("solve-scalar", help="scalar ground-state profile")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--omega", type=float, required=True)
    common(p, config=False)
    p.set_defaults(func=cmd_solve_scalar)

    p = sub.add_parser("verify-pde", help="constrained PDE minimization")
    common(p)
    p.set_defaults(func=cmd_verify_pde)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (InvalidSpecError, UnsupportedRegimeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
