"""Command-line entry point: ``seirgame <command> ...``.

Outputs go under ``--output`` (default: ``$SEIRGAME_OUTPUT`` or
``./seirgame-out``), one sub-directory per command. Every CSV starts with a
comment line carrying the run-manifest digest; the digest covers the
resolved scenario, seed and command options but no timestamps, so repeated
runs write byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 profile/scenario mismatch,
4 solver abort, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import dfp_solver as ds
from . import evaluation as ev
from . import model_core as mc
from .sde_sim import TimeGrid, constant_policy, export_csv, simulate

log = logging.getLogger("seirgame")

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH, EXIT_ABORT, EXIT_VERIFY = 0, 2, 3, 4, 5
OUTPUT_ENV = "SEIRGAME_OUTPUT"
CSV_SCHEMA = 1
DIAGNOSTIC_FIELDS = ["stage", "player", "train_loss_mean", "validation_loss",
                     "convergence_metric", "wall_time"]


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---- manifest ------------------------------------------------------------

class Manifest:
    """Provenance of one command run; ``digest`` excludes timestamps."""

    def __init__(self, command: str, scenario: cfgmod.Scenario | None, seed, options: dict):
        self.body = {"artifact_version": __version__, "command": command,
                     "config_digest": scenario.digest if scenario else None,
                     "seed": seed, "options": options}
        canon = json.dumps(self.body, sort_keys=True, separators=(",", ":"))
        self.digest = hashlib.sha256(canon.encode()).hexdigest()
        self.outputs: list[str] = []

    @property
    def header(self) -> str:
        return f"# seirgame csv-schema={CSV_SCHEMA} manifest={self.digest}\n"

    def write(self, outdir: Path) -> Path:
        path = outdir / "manifest.json"
        doc = dict(self.body, digest=self.digest, outputs=sorted(self.outputs),
                   written_at=time.strftime("%Y-%m-%dT%H:%M:%S%z"))
        path.write_text(json.dumps(doc, indent=2) + "\n")
        return path


def _outdir(args, name: str) -> Path:
    root = Path(args.output or os.environ.get(OUTPUT_ENV) or "seirgame-out")
    out = root / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _open(outdir: Path, name: str, manifest: Manifest):
    manifest.outputs.append(name)
    return open(outdir / name, "w", newline="")


# ---- scenario handling ---------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(args) -> dict:
    out = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise CliError(EXIT_CONFIG, f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = _parse_value(val.strip())
    if getattr(args, "theta", None) is not None:
        out["epidemiology.theta"] = args.theta
    if getattr(args, "attention", None) is not None:
        out["cost.a"] = args.attention
    if getattr(args, "degenerate_zero_cost", False):
        out.update({"cost.w": 0.0, "cost.a": 0.0, "cost.eta": 0.0})
    return out


def _scenario(args) -> cfgmod.Scenario:
    return cfgmod.load_scenario(args.config, _overrides(args))


def _solver_config(args, scenario: cfgmod.Scenario) -> ds.SolverConfig:
    base = dict(scenario.resolved.get("solver", {}))
    flags = {"stages": args.stages, "sgd_steps": args.sgd_steps, "batch": args.batch,
             "n_steps": args.n_steps, "lr": args.lr, "tau": args.tau,
             "eps_conv": args.eps_conv, "seed": args.seed, "workers": args.workers}
    base.update({k: v for k, v in flags.items() if v is not None})
    if "hidden" in base:
        base["hidden"] = tuple(base["hidden"])
    try:
        return ds.SolverConfig(**base)
    except (TypeError, ValueError) as err:
        raise CliError(EXIT_CONFIG, f"solver: {err}") from None


# ---- commands ------------------------------------------------------------

def cmd_calibrate(args) -> int:
    sc = _scenario(args)
    manifest = Manifest("calibrate", sc, None, {"overrides": _overrides(args)})
    out = _outdir(args, "calibrate")
    with _open(out, "resolved.json", manifest) as fh:
        json.dump(dict(sc.resolved, digest=sc.digest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    ep = sc.resolved["epidemiology"]
    print(f"scenario {sc.resolved['scenario']['name']}  digest {sc.digest[:16]}")
    for key in ("beta", "gamma", "lam", "kappa", "theta"):
        print(f"  {key:6s} = {ep[key]:.10g}")
    print("  beta_matrix =")
    for row in ep["beta_matrix"]:
        print("    " + "  ".join(f"{v:.7f}" for v in row))
    manifest.write(out)
    print(f"wrote {out / 'resolved.json'}")
    return EXIT_OK


def _write_diagnostics(path: Path, rows, header: str, append: bool) -> None:
    new = not (append and path.exists())
    with open(path, "w" if new else "a", newline="") as fh:
        if new:
            fh.write(header)
        writer = csv.DictWriter(fh, DIAGNOSTIC_FIELDS, lineterminator="\n")
        if new:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{row[k]:.10g}" if isinstance(row[k], float) else row[k])
                             for k in DIAGNOSTIC_FIELDS})


def _read_diagnostics(path: Path) -> list[dict]:
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def cmd_solve(args) -> int:
    sc = _scenario(args)
    x0 = sc.x0
    solver = _solver_config(args, sc)
    options = {"solver": {k: (list(v) if isinstance(v, tuple) else v)
                          for k, v in solver.as_dict().items() if k != "workers"},
               "overrides": _overrides(args)}
    manifest = Manifest("solve", sc, solver.seed, options)
    out = _outdir(args, "solve")
    ckdir = out / "checkpoints"
    ckdir.mkdir(exist_ok=True)

    state = None
    if args.resume:
        state, ck = ds.load_state(args.resume)
        if ck["config_digest"] != sc.digest and not args.force:
            raise CliError(EXIT_MISMATCH, "checkpoint was trained on a different scenario "
                           f"({ck['config_digest'][:12]} vs {sc.digest[:12]}); use --force")
        print(f"resuming after stage {state.stage}")

    diag_path = out / "diagnostics.csv"
    if diag_path.exists():
        # a resumed run continues the table from the checkpoint's stage
        kept = _read_diagnostics(diag_path) if state is not None else []
        diag_path.unlink()
        kept = [r for r in kept if int(r["stage"]) <= state.stage] if kept else []
        if kept:
            _write_diagnostics(diag_path, kept, manifest.header, append=False)
    manifest.outputs.append("diagnostics.csv")
    extra = {"seed": solver.seed, "solver": options["solver"]}

    def on_stage(st: ds.StageState, rows):
        _write_diagnostics(diag_path, rows, manifest.header, append=True)
        if args.checkpoint_every and st.stage % args.checkpoint_every == 0:
            ds.save_state(ckdir / f"stage_{st.stage:04d}.json", st, sc.digest, extra)
        if not args.quiet:
            vals = " ".join(f"{r['validation_loss']:.3e}" for r in rows)
            print(f"stage {st.stage:4d}  val {vals}  change {rows[0]['convergence_metric']:.3e}"
                  f"  {rows[0]['wall_time']:.1f}s", flush=True)

    try:
        result = ds.run(solver, sc.params, x0, state=state, on_stage=on_stage)
    except ds.SolverAbort as err:
        print(f"solver aborted: {err}", file=sys.stderr)
        manifest.write(out)
        return EXIT_ABORT
    ds.save_state(out / "profile.json", result.state, sc.digest, extra)
    manifest.outputs.append("profile.json")
    for n, name in enumerate(sc.params.regions.names):
        v0 = float(ds.value_at(result.state, n, 0.0, x0)[0])
        print(f"V[{name}](0, x0) = {v0:.6g}")
    if diag_path.exists():
        from .plotting import plot_losses
        plot_losses(_read_diagnostics(diag_path), out / "losses.png",
                    sc.params.regions.names)
        manifest.outputs.append("losses.png")
    manifest.write(out)
    print(f"profile written to {out / 'profile.json'}")
    return EXIT_OK


def _fixed_policy(text: str, n: int):
    vals = [float(v) for v in text.split(",")]
    if len(vals) == 1:
        vals = vals * n
    if len(vals) != n or not all(0.0 <= v <= 1.0 for v in vals):
        raise CliError(EXIT_CONFIG, f"--fixed-policy needs 1 or {n} values in [0, 1]")
    return constant_policy(np.array(vals)), vals


def _profile(args, sc: cfgmod.Scenario):
    nreg = sc.params.n_regions
    if args.fixed_policy is not None:
        policy, vals = _fixed_policy(args.fixed_policy, nreg)
        return policy, {"fixed_policy": vals}
    if not args.profile:
        raise CliError(EXIT_CONFIG, "give --profile CHECKPOINT or --fixed-policy LEVEL")
    try:
        state, ck = ds.load_state(args.profile)
    except (OSError, KeyError, ValueError) as err:
        raise CliError(EXIT_CONFIG, f"cannot load profile {args.profile}: {err}") from None
    if ck["config_digest"] != sc.digest and not args.force:
        raise CliError(EXIT_MISMATCH, "profile was trained on a different scenario "
                       f"({ck['config_digest'][:12]} vs {sc.digest[:12]}); use --force")
    if state.n_players != nreg:
        raise CliError(EXIT_MISMATCH, "profile and scenario disagree on the region count")
    prof = ds.PolicyProfile(state.policy_nets, state.features, {"stage": state.stage})
    return prof, {"profile_stage": state.stage, "profile_digest": ck["config_digest"]}


def _evaluate(args, command: str, write_paths: bool) -> int:
    sc = _scenario(args)
    x0 = sc.x0
    policy, source = _profile(args, sc)
    options = {"paths": args.paths, "n_steps": args.n_steps, "threshold": args.threshold,
               "overrides": _overrides(args), **source}
    if command == "evaluate":
        options.update(probe=args.probe, tolerance=args.tolerance)
    manifest = Manifest(command, sc, args.seed, options)
    out = _outdir(args, command)
    grid = TimeGrid(sc.params.horizon, args.n_steps)
    paths = simulate(sc.params, policy, x0, grid, args.paths, args.seed, ("evaluate",))
    names = list(sc.params.regions.names)
    hdr = manifest.header
    if write_paths:
        with _open(out, "paths.csv", manifest) as fh:
            export_csv(paths, fh, header=hdr)
    report = ev.cost_report(paths)
    with _open(out, "cost.csv", manifest) as fh:
        ev.write_cost_report(report, fh, hdr)
    summary = ev.summarize(paths)
    with _open(out, "summary.csv", manifest) as fh:
        ev.write_summary(summary, fh, names, hdr)
    label = ev.classify(paths, args.threshold)
    with _open(out, "classification.csv", manifest) as fh:
        ev.write_classification(label, fh, names, hdr)
    from .plotting import plot_summary
    plot_summary(summary, out / "trajectories.png", names, title=label.label)
    manifest.outputs.append("trajectories.png")

    print(f"classification: {label.label} (threshold {label.threshold:g})")
    for n, name in enumerate(names):
        print(f"  {name}: S {label.initial_s[n]:.4f} -> {label.terminal_s[n]:.4f}, "
              f"cost {report.mean[n]:.4e} +/- {report.stderr[n]:.2e}")
    if paths.failed.any():
        print(f"warning: {int(paths.failed.sum())} paths failed", file=sys.stderr)
    if report.out_of_range:
        print(f"warning: {report.out_of_range} of {paths.batch_size} paths left "
              "[0, 1] in some compartment (states are not clamped)", file=sys.stderr)

    if command == "evaluate" and args.probe:
        results = [ev.exploitability_probe(policy, n, sc.params, x0, grid, args.paths,
                                           args.seed, tolerance=args.tolerance)
                   for n in range(sc.params.n_regions)]
        with _open(out, "probe.csv", manifest) as fh:
            ev.write_probe(results, fh, hdr)
        for res in results:
            print(f"  probe {names[res.player]}: best deviation {res.worst} gains "
                  f"{res.max_reduction:.4e} (tolerance {res.tolerance:.3e}) "
                  f"{'pass' if res.passed else 'FAIL'}")
    manifest.write(out)
    print(f"reports written to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    return _evaluate(args, "simulate", write_paths=True)


def cmd_evaluate(args) -> int:
    return _evaluate(args, "evaluate", write_paths=False)


def cmd_verify(args) -> int:
    from . import verification as vf
    if args.list:
        for name, fn in vf.SUITES.items():
            doc = (fn.__doc__ or "").strip().splitlines()
            print(f"{name:20s} {doc[0] if doc else ''}")
        return EXIT_OK
    names = args.suites or list(vf.SUITES)
    unknown = [n for n in names if n not in vf.SUITES]
    if unknown:
        raise CliError(EXIT_CONFIG, f"unknown suite(s): {', '.join(unknown)}")
    results = [vf.run_suite(n, seed=args.seed) for n in names]
    if args.json:
        print(json.dumps([r.to_dict() for r in results], indent=2))
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.seconds:.1f}s)")
            for c in r.checks:
                mark = "ok " if c.passed else "BAD"
                print(f"   {mark} {c.name}: {c.value:.3e} (tol {c.tolerance:.1e})")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failing suites: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_info(args) -> int:
    print(f"seirgame {__version__}")
    print(f"output root: ${OUTPUT_ENV} or ./seirgame-out (current: "
          f"{os.environ.get(OUTPUT_ENV, 'unset')})")
    print("shipped scenarios: " + ", ".join(cfgmod.SHIPPED))
    print(f"csv schema version: {CSV_SCHEMA}")
    if args.config:
        sc = _scenario(args)
        p = sc.params
        print(f"scenario {sc.resolved['scenario']['name']}: {p.n_regions} regions "
              f"({', '.join(p.regions.names)}), horizon {p.horizon:g} days, "
              f"digest {sc.digest[:16]}, initial state "
              f"{'given' if sc.has_x0 else 'missing'}")
    return EXIT_OK


# ---- argument parsing ----------------------------------------------------

def _add_scenario(p, required=True):
    if required:
        p.add_argument("config", help="scenario file (TOML/JSON) or shipped name")
    else:
        p.add_argument("config", nargs="?", help="scenario file or shipped name")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a scenario field, e.g. cost.a=25 (repeatable)")
    p.add_argument("--theta", type=float, help="shortcut for --set epidemiology.theta=")
    p.add_argument("--attention", type=float, help="shortcut for --set cost.a=")
    p.add_argument("--degenerate-zero-cost", action="store_true",
                   help="set w = a = eta = 0 (the value function is then zero)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seirgame", description=__doc__.splitlines()[0])
    parser.add_argument("--output", "-o", help=f"output root (default ${OUTPUT_ENV})")
    parser.add_argument("--verbose", "-v", action="store_true")
    parser.add_argument("--version", action="version", version=f"seirgame {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="resolve a scenario and print derived rates")
    _add_scenario(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("solve", help="train an equilibrium profile")
    _add_scenario(p)
    p.add_argument("--stages", type=int)
    p.add_argument("--sgd-steps", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--n-steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--eps-conv", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--checkpoint-every", type=int, default=10, metavar="K")
    p.add_argument("--resume", metavar="CHECKPOINT")
    p.add_argument("--force", action="store_true", help="ignore scenario digest mismatch")
    p.add_argument("--quiet", "-q", action="store_true")
    p.set_defaults(func=cmd_solve)

    for name, func, hlp in (("simulate", cmd_simulate, "simulate paths under a profile"),
                            ("evaluate", cmd_evaluate, "cost, bands, label and probes")):
        p = sub.add_parser(name, help=hlp)
        _add_scenario(p)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--profile", metavar="CHECKPOINT")
        src.add_argument("--fixed-policy", metavar="LEVEL[,LEVEL...]")
        p.add_argument("--paths", type=int, default=256)
        p.add_argument("--n-steps", type=int, default=40)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threshold", type=float, default=ev.CONTROL_THRESHOLD)
        p.add_argument("--force", action="store_true")
        if name == "evaluate":
            p.add_argument("--probe", action="store_true",
                           help="run the unilateral-deviation probe for every player")
            p.add_argument("--tolerance", type=float, default=ev.NASH_TOLERANCE,
                           help="probe tolerance as a fraction of the player's cost")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="run the self-check suites")
    p.add_argument("suites", nargs="*")
    p.add_argument("--list", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("info", help="version, schemas and scenario summary")
    _add_scenario(p, required=False)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except mc.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
