"""Command line front end: config-driven designs and experiment sweeps.

Subcommands
    design    solve one instance, write waveform.json + kpi.json
    ccdf      PAPR CCDF sweep over (rho, eta), write ccdf.csv
    sumrate   per-user rate sweep over (epsilon, eta), write sumrate.csv
    ser       SER versus SNR with zero-MUI baseline, write ser.csv

Every run writes a manifest.json next to its outputs.  Outputs are
written atomically (temp file + rename) and CSV bytes are reproducible
for a fixed config: floats are serialized with repr, the shortest
round-tripping decimal form.

Config files are JSON with a "design" section (design command) and an
"experiment" section (sweep commands).  Resolution order, later wins:
file, ISAC_<SECTION>_<FIELD> environment variables, repeated --set
section.field=value flags, then --seed.  Unknown keys anywhere are
rejected with the offending path.  The PAPR cap is given as exactly one
of "eta" (linear) or "eta_db".

Exit codes: 0 success; 1 bad config or arguments; 2 design finished but
violates a constraint beyond tolerance; 3 channel too ill-conditioned
to define the communication target.  Anything else is a bug and raises.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, kpi
from .admm import ProblemSpec, SingularChannelError, solve, zero_forcing_target
from .montecarlo import (
    SNR_CONVENTIONS,
    ExperimentConfig,
    run_ccdf,
    run_ser,
    run_sumrate,
)
from .signal_model import (
    ArrayConfig,
    ChannelRealization,
    chirp_reference,
    draw_channel,
    draw_symbols,
)

EXIT_OK = 0
EXIT_BAD_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_SINGULAR = 3

_ENV_PREFIX = "ISAC_"


class ConfigError(ValueError):
    """Raised with a dotted field path locating the offending entry."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"config error at {path}: {message}")


# field: (type tag, required, default); "number+" means positive scalar,
# "grid" a nonempty number list (scalars promoted), "u64" a nonnegative int
_DESIGN_FIELDS = {
    "n_antennas": ("int+", True, None),
    "k_users": ("int+", True, None),
    "n_samples": ("int+", True, None),
    "epsilon": ("number0+", True, None),
    "eta": ("number+", False, None),
    "eta_db": ("number", False, None),
    "rho": ("number+", False, 1.0),
    "m_iter": ("int+", False, 2000),
    "feasibility_tolerance": ("number+", False, 1e-3),
    "early_stop": ("bool", False, False),
    "channel_seed": ("u64", True, None),
    "symbol_seed": ("u64", True, None),
    "constellation": ("str", False, "qpsk"),
    # design solves the drawn instance as-is; the zf-normalized scaling
    # is an experiment-harness convention, opt in if you want it here
    "snr_convention": ("str", False, "raw"),
    "snr_db": ("number", False, 10.0),
}

_EXPERIMENT_FIELDS = {
    "n_antennas": ("int+", True, None),
    "k_users": ("int+", True, None),
    "n_samples": ("int+", True, None),
    "rho": ("grid", True, None),
    "eta": ("grid", False, None),
    "eta_db": ("grid", False, None),
    "epsilon": ("grid", True, None),
    "snr_db": ("grid", True, None),
    "n_trials": ("int+", False, 200),
    "base_seed": ("u64", False, 0),
    "constellation": ("str", False, "qpsk"),
    "m_iter": ("int+", False, 2000),
    "snr_convention": ("str", False, "zf-normalized"),
}

_SECTIONS = {"design": _DESIGN_FIELDS, "experiment": _EXPERIMENT_FIELDS}


def _check_type(path: str, tag: str, value):
    def fail(expected):
        raise ConfigError(path, f"expected {expected}, got {value!r}")

    is_int = isinstance(value, int) and not isinstance(value, bool)
    is_number = is_int or isinstance(value, float)
    if tag == "int+":
        if not is_int or value < 1:
            fail("a positive integer")
    elif tag == "u64":
        if not is_int or not 0 <= value < 2 ** 64:
            fail("an unsigned 64-bit integer")
    elif tag == "number":
        if not is_number or not math.isfinite(value):
            fail("a finite number")
    elif tag == "number+":
        if not is_number or not math.isfinite(value) or value <= 0:
            fail("a positive number")
    elif tag == "number0+":
        if not is_number or not math.isfinite(value) or value < 0:
            fail("a nonnegative number")
    elif tag == "bool":
        if not isinstance(value, bool):
            fail("true or false")
    elif tag == "str":
        if not isinstance(value, str):
            fail("a string")
    elif tag == "grid":
        entries = value if isinstance(value, list) else [value]
        if not entries:
            fail("a nonempty number or list of numbers")
        for i, entry in enumerate(entries):
            ok = (isinstance(entry, (int, float))
                  and not isinstance(entry, bool)
                  and math.isfinite(entry))
            if not ok:
                raise ConfigError(f"{path}[{i}]",
                                  f"expected a finite number, got {entry!r}")
        return [float(entry) for entry in entries]
    else:  # pragma: no cover - schema typo guard
        raise AssertionError(f"unknown type tag {tag}")
    return value


def _resolve_section(section: str, raw: dict) -> dict:
    """Validate one config section against its schema, filling defaults."""
    schema = _SECTIONS[section]
    if not isinstance(raw, dict):
        raise ConfigError(section, "expected an object")
    for key in raw:
        if key not in schema:
            raise ConfigError(f"{section}.{key}", "unknown key")
    if ("eta" in raw) == ("eta_db" in raw):
        raise ConfigError(section, "give exactly one of eta (linear) "
                                   "or eta_db")
    resolved = {}
    for key, (tag, required, default) in schema.items():
        if key in raw:
            resolved[key] = _check_type(f"{section}.{key}", tag, raw[key])
        elif required:
            raise ConfigError(f"{section}.{key}", "missing required field")
        elif default is not None:
            resolved[key] = default
    if resolved.get("snr_convention") not in SNR_CONVENTIONS:
        raise ConfigError(f"{section}.snr_convention",
                          f"expected one of {SNR_CONVENTIONS}")
    return resolved


def _eta_db_list(section_cfg: dict, path: str) -> list:
    if "eta_db" in section_cfg:
        values = section_cfg["eta_db"]
        return values if isinstance(values, list) else [values]
    values = section_cfg["eta"]
    if not isinstance(values, list):
        values = [values]
    for i, value in enumerate(values):
        if value <= 0:
            raise ConfigError(f"{path}.eta[{i}]",
                              "linear eta must be positive")
    return [10.0 * math.log10(value) for value in values]


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _section_dict(config: dict, section: str) -> dict:
    entry = config.setdefault(section, {})
    if not isinstance(entry, dict):
        raise ConfigError(section, "expected an object")
    return entry


def _apply_env(config: dict, environ) -> None:
    reserved = {"ISAC_SEED", "ISAC_OUT", "ISAC_THREADS", "ISAC_CONFIG"}
    for name, value in sorted(environ.items()):
        if not name.startswith(_ENV_PREFIX) or name in reserved:
            continue
        remainder = name[len(_ENV_PREFIX):].lower()
        section, _, field = remainder.partition("_")
        if section not in _SECTIONS or not field:
            raise ConfigError(name, "unrecognized environment override")
        _section_dict(config, section)[field] = _parse_scalar(value)


def _apply_sets(config: dict, assignments) -> None:
    for assignment in assignments or ():
        key, sep, value = assignment.partition("=")
        if not sep:
            raise ConfigError(assignment, "expected section.field=value")
        section, dot, field = key.partition(".")
        if not dot or section not in _SECTIONS or not field:
            raise ConfigError(key, "expected <design|experiment>.<field>")
        _section_dict(config, section)[field] = _parse_scalar(value)


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(path, "file not found")
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"not valid JSON ({exc})")
    if not isinstance(raw, dict):
        raise ConfigError(path, "top level must be an object")
    for key in raw:
        if key not in _SECTIONS:
            raise ConfigError(key, "unknown section")
    return raw


def serialize_config(config: dict) -> str:
    """Canonical form; parse(serialize(c)) == c."""
    return json.dumps(config, sort_keys=True, indent=2) + "\n"


def parse_config(text: str) -> dict:
    return json.loads(text)


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_value(value) -> str:
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return str(value)


def _table_to_csv(table) -> str:
    labels = list(table.series)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([table.axis_name] + labels)
    axis = np.asarray(table.axis_values)
    columns = [np.asarray(table.series[label]) for label in labels]
    for i in range(axis.size):
        writer.writerow([_format_value(axis[i])]
                        + [_format_value(col[i]) for col in columns])
    return buffer.getvalue()


def _write_manifest(out_dir: str, command: str, config: dict, seed,
                    duration: float, outputs: list) -> str:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "duration_seconds": duration,
        "outputs": outputs,
    }
    path = os.path.join(out_dir, "manifest.json")
    _atomic_write(path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def _design_instance(cfg: dict):
    channel = draw_channel(
        cfg["k_users"],
        ArrayConfig(n_antennas=cfg["n_antennas"]),
        noise_variance=10.0 ** (-cfg["snr_db"] / 10.0),
        rng_seed=cfg["channel_seed"],
    )
    symbols = draw_symbols(cfg["k_users"], cfg["n_samples"],
                           cfg["constellation"], rng_seed=cfg["symbol_seed"])
    if cfg["snr_convention"] == "zf-normalized":
        scale = float(np.linalg.norm(zero_forcing_target(channel, symbols)))
        channel = ChannelRealization(matrix=channel.matrix * scale,
                                     noise_variance=channel.noise_variance)
    return channel, symbols


def cmd_design(cfg: dict, out_dir: str):
    [eta_db] = _eta_db_list(cfg, "design")
    eta = 10.0 ** (eta_db / 10.0)
    n_total = float(cfg["n_antennas"] * cfg["n_samples"])
    if not (1.0 - 1e-9) <= eta <= n_total * (1.0 + 1e-9):
        raise ConfigError("design.eta",
                          f"PAPR cap must lie in [1, {n_total:g}]")
    # clamp only float roundoff from the dB conversion
    eta = min(max(eta, 1.0), n_total)
    channel, symbols = _design_instance(cfg)
    reference = chirp_reference(cfg["n_antennas"], cfg["n_samples"])
    try:
        spec = ProblemSpec(
            channel=channel, symbols=symbols, reference=reference,
            epsilon=cfg["epsilon"], eta=eta, rho=cfg["rho"],
            max_iterations=cfg["m_iter"],
            feasibility_tolerance=cfg["feasibility_tolerance"],
            early_stop=cfg["early_stop"],
        )
    except ValueError as exc:
        raise ConfigError("design", str(exc))
    result = solve(spec)

    entries = result.waveform.entries
    waveform_doc = {
        "n_antennas": int(entries.shape[0]),
        "n_samples": int(entries.shape[1]),
        "entries": [[[float(z.real), float(z.imag)] for z in row]
                    for row in entries],
        "objective": result.objective,
        "iterations_run": result.iterations_run,
        "constraint_violations": result.constraint_violations.as_dict(),
        "residual_history": result.residual_history.as_dict(),
    }
    report = kpi.build_report(channel, result.waveform, symbols, reference)
    paths = []
    for name, doc in (("waveform.json", waveform_doc),
                      ("kpi.json", report.as_dict())):
        path = os.path.join(out_dir, name)
        _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
        paths.append(name)
    feasible = (result.constraint_violations.max()
                <= cfg["feasibility_tolerance"])
    return (EXIT_OK if feasible else EXIT_INFEASIBLE), paths


def _experiment_config(cfg: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig(
            n_antennas=cfg["n_antennas"],
            k_users=cfg["k_users"],
            n_samples=cfg["n_samples"],
            rho_grid=tuple(cfg["rho"]),
            eta_grid_db=tuple(_eta_db_list(cfg, "experiment")),
            epsilon_grid=tuple(cfg["epsilon"]),
            snr_grid_db=tuple(cfg["snr_db"]),
            n_trials=cfg["n_trials"],
            base_seed=cfg["base_seed"],
            constellation=cfg["constellation"],
            m_iter=cfg["m_iter"],
            snr_convention=cfg["snr_convention"],
        )
    except ValueError as exc:
        raise ConfigError("experiment", str(exc))


_RUNNERS = {"ccdf": run_ccdf, "sumrate": run_sumrate, "ser": run_ser}


def cmd_experiment(command: str, cfg: dict, out_dir: str, threads: int):
    table = _RUNNERS[command](_experiment_config(cfg), threads=threads)
    name = f"{command}.csv"
    _atomic_write(os.path.join(out_dir, name), _table_to_csv(table))
    meta_name = f"{command}.meta.json"
    _atomic_write(os.path.join(out_dir, meta_name),
                  json.dumps(table.metadata, sort_keys=True, indent=2) + "\n")
    return EXIT_OK, [name, meta_name]


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="isacwave",
        description="Design chirp-similar PAPR-capped transmit blocks and "
                    "reproduce the PAPR/rate/SER experiment tables.",
    )
    parser.add_argument("command", choices=["design", "ccdf", "sumrate",
                                            "ser"])
    parser.add_argument("--config", required=False,
                        default=os.environ.get("ISAC_CONFIG"),
                        help="path to a JSON config with design/experiment "
                             "sections")
    parser.add_argument("--out", default=os.environ.get("ISAC_OUT", "out"),
                        help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override experiment.base_seed; for design, "
                             "fills channel_seed/symbol_seed when absent")
    parser.add_argument("--set", action="append", dest="assignments",
                        metavar="SECTION.FIELD=VALUE",
                        help="override one config field (repeatable)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes for experiment trials")
    return parser.parse_args(argv)


def _env_int(name: str):
    value = os.environ.get(name)
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(name, f"expected an integer, got {value!r}")


def main(argv=None) -> int:
    args = _parse_args(argv)
    started = time.time()
    try:
        if not args.config:
            raise ConfigError("--config", "a config file is required")
        seed = args.seed if args.seed is not None else _env_int("ISAC_SEED")
        threads = (args.threads if args.threads is not None
                   else _env_int("ISAC_THREADS"))
        if threads is None:
            threads = 1
        if threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        config = _load_config_file(args.config)
        _apply_env(config, os.environ)
        _apply_sets(config, args.assignments)

        section = "design" if args.command == "design" else "experiment"
        if seed is not None:
            if section == "experiment":
                _section_dict(config, "experiment")["base_seed"] = seed
            else:
                design = _section_dict(config, "design")
                design.setdefault("channel_seed", seed)
                design.setdefault("symbol_seed", seed + 1)
        if section not in config:
            raise ConfigError(section, "missing required section")
        resolved = _resolve_section(section, config[section])

        os.makedirs(args.out, exist_ok=True)
        if args.command == "design":
            code, outputs = cmd_design(resolved, args.out)
            run_seed = [resolved["channel_seed"], resolved["symbol_seed"]]
        else:
            code, outputs = cmd_experiment(args.command, resolved, args.out,
                                           threads)
            run_seed = resolved["base_seed"]
        _write_manifest(args.out, args.command, {section: resolved},
                        run_seed, time.time() - started, outputs)
        return code
    except ConfigError as exc:
        print(f"isacwave: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except SingularChannelError as exc:
        print(f"isacwave: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
