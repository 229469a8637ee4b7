"""Command-line front end.

Subcommands: scan, detect, optimize, propagate, validate.  Every command
reads one YAML config, writes CSV (plus a text report for optimize) into
the output directory, and is deterministic for a fixed config and seed.

Option precedence: command-line flag, then environment variable, then
config file.  Environment variables use the ATOMPROBE_ prefix:
ATOMPROBE_OUT, ATOMPROBE_SEED, ATOMPROBE_THREADS.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, NumericalError
from .objective import optimize as run_optimize
from .potential import (potential_from_laser, profile_to_potential,
                        segments_to_dicts)
from .scatter import solve_one_channel_batch
from .twochannel import compare_channels, solve_two_channel_batch
from .units import (rate_internal_to_per_s, velocity_to_wavenumber,
                    wavenumber_to_velocity)
from .wavepacket import propagate

_ENV_PREFIX = "ATOMPROBE_"


def _fmt(x: float) -> str:
    # 12 significant digits, fixed width; also used in the report so that
    # identical runs produce identical bytes.
    return f"{float(x):.11e}"


def _write_csv(path: str, header: list[str], rows, trailer: str | None = None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
        if trailer is not None:
            fh.write(trailer + "\n")


def _resolve(flag_value, env_name: str, config_value, cast):
    if flag_value is not None:
        return flag_value
    env = os.environ.get(_ENV_PREFIX + env_name)
    if env is not None:
        try:
            return cast(env)
        except ValueError as exc:
            raise ConfigError(f"environment {_ENV_PREFIX}{env_name}={env!r}: "
                              f"{exc}") from exc
    return config_value


def _need(cfg: RunConfig, block: str, command: str):
    value = getattr(cfg, block)
    if value is None:
        raise ConfigError(f"{command}: config needs a '{block}' block")
    return value


def _grid_velocities(cfg: RunConfig, command: str):
    grid_cfg = _need(cfg, "grid", command)
    return grid_cfg.velocities()


def cmd_scan(cfg: RunConfig, out_dir: str, seed, threads) -> list[str]:
    species = cfg.species.to_species()
    profile = _need(cfg, "profile", "scan").to_profile(species)
    velocities = _grid_velocities(cfg, "scan")
    k = np.array([velocity_to_wavenumber(v, species) for v in velocities])
    _, _, A = solve_one_channel_batch(k, profile_to_potential(profile), species)
    path = os.path.join(out_dir, "scan.csv")
    _write_csv(path, ["v_cm_per_s", "absorption"], zip(velocities, A))
    return [path]


def cmd_detect(cfg: RunConfig, out_dir: str, seed, threads) -> list[str]:
    species = cfg.species.to_species()
    profile = _need(cfg, "profile", "detect").to_profile(species)
    velocities = _grid_velocities(cfg, "detect")
    k = np.array([velocity_to_wavenumber(v, species) for v in velocities])
    A = solve_two_channel_batch(k, profile)
    path = os.path.join(out_dir, "detect.csv")
    _write_csv(path, ["v_cm_per_s", "detection_probability"],
               zip(velocities, A))
    return [path]


def cmd_validate(cfg: RunConfig, out_dir: str, seed, threads) -> list[str]:
    species = cfg.species.to_species()
    profile = _need(cfg, "profile", "validate").to_profile(species)
    velocities = _grid_velocities(cfg, "validate")
    k = np.array([velocity_to_wavenumber(v, species) for v in velocities])
    cmp = compare_channels(k, profile)
    rows = [(v, a1, a2, abs(a1 - a2))
            for v, a1, a2 in zip(velocities, cmp.absorption_adiabatic,
                                 cmp.absorption_two_channel)]
    trailer = ("# max_abs_diff=" + _fmt(cmp.max_difference)
               + " r_omega=" + _fmt(cmp.r_omega)
               + " r_energy=" + _fmt(cmp.r_energy)
               + " weak_driving_ok=" + ("true" if cmp.weak_driving_ok else "false"))
    path = os.path.join(out_dir, "validate.csv")
    _write_csv(path, ["v_cm_per_s", "A_one_channel", "A_two_channel",
                      "abs_diff"], rows, trailer=trailer)
    return [path]


def cmd_propagate(cfg: RunConfig, out_dir: str, seed, threads) -> list[str]:
    species = cfg.species.to_species()
    profile = _need(cfg, "profile", "propagate").to_profile(species)
    wp = _need(cfg, "wavepacket", "propagate")
    spec = wp.to_spec(species)
    times = np.linspace(0.0, wp.t_max_us, wp.n_times)
    records = propagate(spec, profile, times, mode=wp.mode, threads=threads)
    two = wp.mode == "two_channel"
    header = ["t_us", "N_t", "Pi_per_us"] + (["P2"] if two else [])
    rows = [(r.t, r.N_t, r.Pi_t) + ((r.P2_t,) if two else ())
            for r in records]
    path = os.path.join(out_dir, "propagate.csv")
    _write_csv(path, header, rows)
    return [path]


def _profile_yaml_block(profile) -> str:
    lines = ["profile:", f"  x_start_um: {profile.x_start!r}", "  segments:"]
    for row in segments_to_dicts(profile):
        lines.append("    - {width_um: %r, detuning_per_s: %r, rabi_per_s: %r}"
                     % (row["width_um"], row["detuning_per_s"],
                        row["rabi_per_s"]))
    return "\n".join(lines) + "\n"


def cmd_optimize(cfg: RunConfig, out_dir: str, seed, threads) -> list[str]:
    species = cfg.species.to_species()
    opt = _need(cfg, "optimize", "optimize")
    grid = _need(cfg, "grid", "optimize").to_grid(species)
    problem = opt.to_problem(species, grid)
    if seed is not None:
        problem = dataclasses.replace(problem, seed=seed)
    result = run_optimize(problem, threads=threads)
    profile = result.profile

    seg_rows = []
    for j, seg in enumerate(profile.segments):
        v = potential_from_laser(seg, species)
        seg_rows.append((float(j), seg.width,
                         rate_internal_to_per_s(seg.detuning),
                         rate_internal_to_per_s(seg.rabi),
                         rate_internal_to_per_s(v.real),
                         rate_internal_to_per_s(v.imag)))
    profile_path = os.path.join(out_dir, "optimize_profile.csv")
    _write_csv(profile_path,
               ["segment", "width_um", "detuning_per_s", "rabi_per_s",
                "re_v_per_s", "im_v_per_s"], seg_rows)

    yaml_path = os.path.join(out_dir, "optimize_profile.yaml")
    with open(yaml_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# optimal profile, ready to paste into a scan/detect config\n")
        fh.write(_profile_yaml_block(profile))

    velocities = [wavenumber_to_velocity(k, species) for k in grid.k_values]
    absorption_path = os.path.join(out_dir, "optimize_absorption.csv")
    _write_csv(absorption_path, ["v_cm_per_s", "absorption"],
               zip(velocities, result.per_k_absorption))

    # Constraint slacks, in s^-1: positive means strictly feasible.
    e_max = grid.energy_max(species)
    deltas = [seg.detuning for seg in profile.segments]
    omegas = [seg.rabi for seg in profile.segments]
    slack_lines = []
    for j, seg in enumerate(profile.segments):
        scale = problem.kappa * np.hypot(2.0 * seg.detuning, species.gamma)
        slack_lines.append(
            f"  segment {j}: omega_slack_per_s="
            + _fmt(rate_internal_to_per_s(scale - seg.rabi))
            + " energy_slack_per_s="
            + _fmt(rate_internal_to_per_s(scale - 2.0 * e_max)))

    report_path = os.path.join(out_dir, "optimize_report.txt")
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("command: optimize\n")
        fh.write(f"seed: {problem.seed}\n")
        fh.write(f"n_segments: {problem.n_segments}\n")
        fh.write("total_length_um: " + _fmt(problem.total_length) + "\n")
        fh.write("kappa: " + _fmt(problem.kappa) + "\n")
        fh.write(f"tie_detuning: {str(problem.tie_detuning).lower()}\n")
        fh.write(f"free_widths: {str(problem.free_widths).lower()}\n")
        fh.write("mean_absorption: " + _fmt(result.objective) + "\n")
        fh.write(f"converged: {str(result.converged).lower()}\n")
        fh.write(f"iterations: {result.iterations}\n")
        fh.write("kkt_residual: " + _fmt(result.kkt_residual) + "\n")
        fh.write("max_constraint_violation: "
                 + _fmt(result.max_constraint_violation) + "\n")
        fh.write("detunings_all_negative: "
                 + ("true" if all(d < 0 for d in deltas) else "false") + "\n")
        fh.write("rabi_nondecreasing_with_x: "
                 + ("true" if all(b >= a for a, b in zip(omegas, omegas[1:]))
                    else "false") + "\n")
        fh.write(f"restarts: {len(result.restarts_summary)}\n")
        for i, val in enumerate(result.restarts_summary):
            fh.write(f"  start {i}: objective=" + _fmt(val) + "\n")
        fh.write("constraint_slacks:\n")
        for line in slack_lines:
            fh.write(line + "\n")
    return [profile_path, yaml_path, absorption_path, report_path]


_COMMANDS = {
    "scan": cmd_scan,
    "detect": cmd_detect,
    "optimize": cmd_optimize,
    "propagate": cmd_propagate,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atomprobe",
        description="Scattering, detection, and laser-profile optimization "
                    "for slow atoms crossing structured light sheets.",
        epilog="Environment overrides (between flags and config in "
               "precedence): ATOMPROBE_OUT, ATOMPROBE_SEED, ATOMPROBE_THREADS.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("scan", "absorption vs velocity, adiabatic complex potential"),
            ("detect", "detection probability vs velocity, two-channel"),
            ("optimize", "maximize grid-averaged absorption over profiles"),
            ("propagate", "wavepacket detection statistics over time"),
            ("validate", "adiabatic vs two-channel cross-check")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--out", default=None, help="output directory "
                       "(default: output.directory from config, else '.')")
        p.add_argument("--seed", type=int, default=None,
                       help="override optimizer seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for restarts / k-batches")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out_dir = _resolve(args.out, "OUT", cfg.out_dir, str) or "."
        seed = _resolve(args.seed, "SEED", None, int)
        threads = _resolve(args.threads, "THREADS", cfg.threads, int) or 1
        if threads < 1:
            raise ConfigError(f"threads: must be at least 1, got {threads}")
        os.makedirs(out_dir, exist_ok=True)
        paths = _COMMANDS[args.command](cfg, out_dir, seed, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # Bad values that slipped past config validation into the core
        # constructors are still configuration mistakes.
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
