"""Command-line entry points.

Subcommands: solve-moment, evolve, equilibrium, verify.  Configuration is a
flat key = value text file (TOML-compatible subset: quoted strings, numbers,
booleans, # comments); unknown keys are rejected.  Exit codes: 0 success,
2 invalid config/usage, 3 non-positive density, 4 moment-solver
non-convergence, 5 density-floor breach.  Stdout carries human-readable
progress; all machine-readable data goes to files in output_dir.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checks import run_suite, write_report
from .equilibrium import convergence_experiment, density_gap_monitor, gibbs_from_mass
from .evolution import (
    DensityFloorError,
    EvolutionConfig,
    MomentSolveError,
    Trajectory,
    evolve,
    write_trajectory_csv,
)
from .maxwellian import (
    DensityPositivityError,
    SolveOptions,
    estimate_report,
    solve_moment,
)
from .spectral import SpectralSpace
from .states import DensityField, coherence, make_initial, read_density, write_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DENSITY = 3
EXIT_NO_CONVERGENCE = 4
EXIT_FLOOR = 5


class ConfigError(ValueError):
    pass


def _parse_scalar(raw: str, path, lineno: int):
    if raw == "true":
        return True
    if raw == "false":
        return False
    if len(raw) >= 2 and raw[0] == '"' and raw[-1] == '"':
        return raw[1:-1]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: cannot parse value {raw!r}") from None


def parse_config(path) -> dict:
    """Flat key = value parser; every malformed input raises ConfigError."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key or not raw:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = _parse_scalar(raw, path, lineno)
    return out


_KNOWN_KEYS = {
    "M": int, "Nx": int, "T": (int, float),
    "tau": (int, float), "dt": (int, float), "t_end": (int, float),
    "seed": int, "tol_inf": (int, float), "max_iter": int,
    "density_floor": (int, float), "snapshot_stride": int,
    "init": str, "init_mass": (int, float), "init_file": str,
    "coherence_amplitude": (int, float), "coherence_modes": str,
    "output_dir": str, "dist_target": (int, float),
    "density_const": (int, float), "scheme": str, "picard_iters": int,
}

_POSITIVE = {"T", "tau", "dt", "tol_inf", "density_floor", "init_mass",
             "dist_target", "max_iter"}


@dataclass
class RunConfig:
    raw: dict
    space: SpectralSpace
    output_dir: Path

    def get(self, key, default=None):
        return self.raw.get(key, default)


def load_run_config(path) -> RunConfig:
    raw = parse_config(path)
    for key, val in raw.items():
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        want = _KNOWN_KEYS[key]
        if not isinstance(val, want) or isinstance(val, bool):
            raise ConfigError(f"config key {key!r} has the wrong type")
        if key in _POSITIVE and not val > 0:
            raise ConfigError(f"config key {key!r} must be positive")
    if "M" not in raw:
        raise ConfigError("config key 'M' is required")
    try:
        space = SpectralSpace(
            M=raw["M"], Nx=raw.get("Nx", 0), T=float(raw.get("T", 1.0))
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    outdir = Path(raw.get("output_dir", "."))
    return RunConfig(raw=raw, space=space, output_dir=outdir)


def _solver_options(cfg: RunConfig) -> SolveOptions:
    return SolveOptions(
        tol_inf=float(cfg.get("tol_inf", 1e-9)),
        max_iter=int(cfg.get("max_iter", 60)),
    )


def _evolution_config(cfg: RunConfig) -> EvolutionConfig:
    try:
        return EvolutionConfig(
            tau=float(cfg.get("tau", 1.0)),
            dt=float(cfg.get("dt", 1e-2)),
            t_end=float(cfg.get("t_end", 1.0)),
            scheme=cfg.get("scheme", "exponential_integrator"),
            picard_iters=int(cfg.get("picard_iters", 8)),
            snapshot_stride=int(cfg.get("snapshot_stride", 0)),
            density_floor=float(cfg.get("density_floor", 1e-8)),
            solver=SolveOptions(
                tol_inf=float(cfg.get("tol_inf", 1e-10)),
                max_iter=int(cfg.get("max_iter", 60)),
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_initial_state(cfg: RunConfig):
    space = cfg.space
    recipe = cfg.get("init", "gibbs")
    mass = float(cfg.get("init_mass", 1.0))
    gibbs = gibbs_from_mass(mass, space)
    if recipe == "gibbs":
        return gibbs.state, gibbs
    if recipe == "gibbs_plus_coherence":
        amp = float(cfg.get("coherence_amplitude", 0.0))
        modes_raw = cfg.get("coherence_modes", "0,1")
        try:
            p, q = (int(s) for s in modes_raw.split(","))
        except ValueError:
            raise ConfigError("coherence_modes must be 'p,q'") from None
        delta = coherence(space, p, q, amp)
        a0 = gibbs.a0
        gamma = mass * (1.0 - 1e-9)  # roundoff headroom: sum of weights vs mass
        try:
            state = make_initial(
                space, lambda lam: np.exp(-(lam + a0) / space.T), delta, gamma=gamma
            )
        except ValueError as exc:
            raise ConfigError(f"initial state rejected: {exc}") from exc
        return state, gibbs
    if recipe == "file":
        path = cfg.get("init_file")
        if not path:
            raise ConfigError("init = \"file\" requires init_file")
        state = read_density(path)
        return state, gibbs_from_mass(state.trace(), space)
    raise ConfigError(f"unknown init recipe {recipe!r}")


def _write_error(outdir: Path | None, code: int, kind: str, message: str, **extra):
    doc = {"error": kind, "message": message, "exit_code": code, **extra}
    if outdir is not None:
        try:
            outdir.mkdir(parents=True, exist_ok=True)
            with open(outdir / "error.json", "w") as fh:
                json.dump(doc, fh)
                fh.write("\n")
            return
        except OSError:
            pass
    print(json.dumps(doc), file=sys.stderr)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def read_density_csv(path, space: SpectralSpace) -> DensityField:
    rows = []
    try:
        lines = Path(path).read_text().strip().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read density file {path}: {exc}") from exc
    for line in lines:
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"density file {path}: expected two columns x,n")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            if not rows:  # tolerate a single header row
                continue
            raise ConfigError(f"density file {path}: non-numeric row") from None
    if len(rows) != space.Nx:
        raise ConfigError(
            f"density file {path}: expected {space.Nx} rows, got {len(rows)}"
        )
    return DensityField(space, np.array([n for _, n in rows]))


def cmd_solve_moment(args) -> int:
    cfg = load_run_config(args.config)
    outdir = cfg.output_dir
    if args.density:
        field = read_density_csv(args.density, cfg.space)
    else:
        const = cfg.get("density_const")
        if const is None:
            raise ConfigError("need --density or config key density_const")
        field = DensityField(cfg.space, np.full(cfg.space.Nx, float(const)))
    if field.min() <= 0.0:
        _write_error(outdir, EXIT_DENSITY, "non_positive_density",
                     "density not bounded below", min_density=field.min())
        return EXIT_DENSITY
    sol = solve_moment(field, _solver_options(cfg))
    outdir.mkdir(parents=True, exist_ok=True)
    if not sol.converged:
        _write_error(outdir, EXIT_NO_CONVERGENCE, "no_convergence",
                     "moment solver hit the iteration cap",
                     residual=sol.residual, iterations=sol.iterations)
        return EXIT_NO_CONVERGENCE
    with open(outdir / "potential.csv", "w") as fh:
        fh.write("x,A\n")
        for x, a in zip(cfg.space.grid, sol.potential.values):
            fh.write(f"{_fmt(x)},{_fmt(a)}\n")
    write_state(outdir / "maxwellian.json", sol.maxwellian)
    report = estimate_report(field, sol)
    with open(outdir / "estimate_report.json", "w") as fh:
        json.dump({
            "h0": report.h0, "h1": report.h1,
            "e_norm": report.e_norm, "entropy_norm": report.entropy_norm,
            "a_h_minus1": report.a_h_minus1,
            "ratio_state": report.ratio_state,
            "ratio_potential": report.ratio_potential,
            "residual": sol.residual, "iterations": sol.iterations,
            "dual_value": sol.dual_value,
        }, fh)
        fh.write("\n")
    print(f"solve-moment: converged in {sol.iterations} iterations, "
          f"residual {sol.residual:.3e}")
    return EXIT_OK


def _run_evolution(cfg: RunConfig, write_verdict: bool) -> int:
    state, gibbs = build_initial_state(cfg)
    evo = _evolution_config(cfg)
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        if write_verdict:
            traj, verdict = convergence_experiment(
                state, evo, dist_target=float(cfg.get("dist_target", 1e-4)),
                gibbs=gibbs,
            )
        else:
            traj = evolve(state, evo, gibbs=gibbs.state)
            verdict = None
    except DensityFloorError as exc:
        _write_error(outdir, EXIT_FLOOR, "density_floor", str(exc), time=exc.time)
        return EXIT_FLOOR
    except MomentSolveError as exc:
        _write_error(outdir, EXIT_NO_CONVERGENCE, "no_convergence", str(exc),
                     time=exc.time)
        return EXIT_NO_CONVERGENCE
    write_trajectory_csv(traj, outdir / "trajectory.csv")
    for idx, (t, snap) in enumerate(traj.snapshots):
        write_state(outdir / f"snapshot_{idx:06d}.json", snap)
    write_state(outdir / "final_state.json", traj.final_state)
    if verdict is not None:
        with open(outdir / "verdict.json", "w") as fh:
            fh.write(verdict.to_json() + "\n")
        monitor = density_gap_monitor(traj, gibbs) if traj.snapshots else {}
        with open(outdir / "density_gap.json", "w") as fh:
            json.dump(monitor, fh)
            fh.write("\n")
        print(f"equilibrium: dist_J1_final = {verdict.dist_J1_final:.3e}, "
              f"{'PASS' if verdict.passed else 'RECORDED'}")
    else:
        print(f"evolve: {len(traj.diagnostics)} rows written")
    return EXIT_OK


def cmd_evolve(args) -> int:
    return _run_evolution(load_run_config(args.config), write_verdict=False)


def cmd_equilibrium(args) -> int:
    return _run_evolution(load_run_config(args.config), write_verdict=True)


def cmd_verify(args) -> int:
    space = SpectralSpace(M=args.m, T=args.temperature)
    results = run_suite(args.seed, args.samples, space)
    write_report(results, args.out)
    asserted_violations = sum(r.violations for r in results)
    for r in results:
        print(f"{r.name}: {r.violations} violations over {r.samples} samples")
    print(f"verify: report written to {args.out}")
    return EXIT_OK if asserted_violations == 0 else EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qlbk")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-moment", help="invert a density into its Maxwellian")
    p.add_argument("--config", required=True)
    p.add_argument("--density", default=None, help="CSV with columns x,n")
    p.set_defaults(fn=cmd_solve_moment)

    p = sub.add_parser("evolve", help="integrate the relaxation dynamics")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_evolve)

    p = sub.add_parser("equilibrium", help="long-time convergence experiment")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_equilibrium)

    p = sub.add_parser("verify", help="run the inequality suite")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--temperature", type=float, default=10.0)
    p.add_argument("--out", default="report.jsonl")
    p.set_defaults(fn=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        _write_error(None, EXIT_CONFIG, "invalid_config", str(exc))
        return EXIT_CONFIG
    except DensityPositivityError as exc:
        _write_error(None, EXIT_DENSITY, "non_positive_density", str(exc))
        return EXIT_DENSITY


if __name__ == "__main__":
    sys.exit(main())
