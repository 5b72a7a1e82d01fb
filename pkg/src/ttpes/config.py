"""Run configuration: TOML files, command-line overrides, resolved echoes.

Every command resolves defaults + file + overrides into one nested dict and
writes it back to the run directory before doing any work, so a run can be
reproduced from its echo alone.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import ConfigError
from .potentials import SopPotential, coupled_anharmonic, rotated_coupled_ho
from .sampling import SamplerConfig
from .training import Phase, SweepPlan, paper_schedule


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError as err:
        raise ConfigError(f"config file {path} not found") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config file {path} is not valid TOML: {err}") from err


def parse_override(text: str) -> tuple[list[str], object]:
    """Parse a ``dotted.key=value`` override; values use TOML syntax."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    keys = [part.strip() for part in key.strip().split(".")]
    if not all(keys):
        raise ConfigError(f"override {text!r} has an empty key component")
    try:
        value = tomllib.loads(f"x = {raw.strip()}")["x"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()  # bare string convenience
    return keys, value


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    for text in overrides:
        keys, value = parse_override(text)
        node = config
        for part in keys[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r} descends into a scalar")
        node[keys[-1]] = value
    return config


def merge(defaults: dict, overrides: dict) -> dict:
    """Recursive dict merge; override values win, tables merge."""
    out = dict(defaults)
    for key, value in overrides.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


# -- TOML writing ------------------------------------------------------------


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        out = repr(float(value))
        return out if any(c in out for c in ".einf") else out + ".0"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple, np.ndarray)):
        items = ", ".join(_format_value(v) for v in value)
        return f"[{items}]"
    raise ConfigError(f"cannot serialize {type(value).__name__} into TOML")


def dump_toml(config: dict) -> str:
    """Serialize a nested dict; scalars before subtables, document order."""

    def emit(table: dict, prefix: list[str], lines: list[str]):
        scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
        subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
        if prefix and (scalars or not subtables):
            lines.append(f"[{'.'.join(prefix)}]")
        for key, value in scalars.items():
            lines.append(f"{key} = {_format_value(value)}")
        if scalars:
            lines.append("")
        for key, value in subtables.items():
            emit(value, prefix + [key], lines)

    lines: list[str] = []
    emit(config, [], lines)
    return "\n".join(lines).rstrip() + "\n"


def echo_config(config: dict, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "config.toml"
    path.write_text(dump_toml(config))
    return path


# -- section builders ---------------------------------------------------------


def build_potential(section: dict) -> SopPotential:
    kind = section.get("kind")
    if kind == "rotated_ho":
        frequencies = section.get("frequencies")
        if frequencies is None:
            raise ConfigError("potential.frequencies is required")
        rotation = section.get("rotation")
        angle = section.get("rotation_angle")
        if rotation is not None:
            rotation = np.asarray(rotation, dtype=float)
        elif angle is not None:
            if len(frequencies) != 2:
                raise ConfigError("rotation_angle shorthand needs two modes")
            c, s = np.cos(angle), np.sin(angle)
            rotation = np.array([[c, s], [-s, c]])
        try:
            return rotated_coupled_ho(frequencies, rotation=rotation)
        except ValueError as err:
            raise ConfigError(str(err)) from err
    if kind == "coupled_anharmonic":
        frequencies = section.get("frequencies")
        if frequencies is None:
            raise ConfigError("potential.frequencies is required")
        cubic = {}
        for entry in section.get("cubic", []):
            if len(entry) != 3:
                raise ConfigError("cubic entries are [mode_i, mode_j, coefficient]")
            cubic[(int(entry[0]), int(entry[1]))] = float(entry[2])
        try:
            return coupled_anharmonic(
                len(frequencies),
                frequencies,
                morse_depth=section.get("morse_depth"),
                morse_rate=section.get("morse_rate"),
                cubic=cubic,
            )
        except ValueError as err:
            raise ConfigError(str(err)) from err
    raise ConfigError(f"unknown potential kind {kind!r}")


def build_sampler(section: dict, seed: int) -> SamplerConfig:
    try:
        return SamplerConfig(
            v_max=float(section["v_max"]),
            delta=float(section["delta"]),
            n_train=int(section.get("n_train", 0)),
            n_validation=int(section.get("n_validation", 0)),
            n_test=int(section.get("n_test", 0)),
            step_scale=float(section.get("step_scale", 0.1)),
            step_sizes=section.get("step_sizes"),
            burn_in=int(section.get("burn_in", 1000)),
            stride=int(section.get("stride", 10)),
            seed=seed,
            start=section.get("start"),
            energy_unit=section.get("energy_unit", "arb"),
            length_unit=section.get("length_unit", "arb"),
        )
    except KeyError as err:
        raise ConfigError(f"sampler section is missing {err.args[0]!r}") from err
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid sampler settings: {err}") from err


def build_plan(plan: dict, optimizer: dict) -> SweepPlan:
    lr_basis = float(optimizer.get("lr_basis", 1e-3))
    lr_transform = float(optimizer.get("lr_transform", 1e-3))
    checkpoint_every = int(optimizer.get("checkpoint_every", 500))
    phase_tables = plan.get("phase", {})
    if phase_tables:
        phases = []
        for name, table in phase_tables.items():
            try:
                phases.append(
                    Phase(
                        name=name,
                        epochs=int(table["epochs"]),
                        train_basis=bool(table.get("train_basis", True)),
                        train_transform=bool(table.get("train_transform", True)),
                        minibatches=int(table.get("minibatches", 5)),
                        sweep_every=int(table.get("sweep_every", 0)),
                        sweep_kind=table.get("kind", "onedot"),
                        solver=table.get("solver", "cg"),
                        cg_eps_rel=float(table.get("cg_eps_rel", 1e-6)),
                        cg_kmax=table.get("cg_kmax"),
                        max_bond=table.get("max_bond"),
                        converge_tol=table.get("converge_tol"),
                    )
                )
            except KeyError as err:
                raise ConfigError(
                    f"plan.phase.{name} is missing {err.args[0]!r}"
                ) from err
        try:
            schedule = SweepPlan(phases=phases)
        except ValueError as err:
            raise ConfigError(str(err)) from err
    else:
        if plan.get("preset", "paper") != "paper":
            raise ConfigError(f"unknown plan preset {plan.get('preset')!r}")
        if "max_bond" not in plan:
            raise ConfigError("plan.max_bond is required")
        schedule = paper_schedule(
            max_bond=int(plan["max_bond"]),
            warmup_epochs=int(plan.get("warmup_epochs", 1000)),
            warmup_period=int(plan.get("warmup_period", 50)),
            growth_epochs=int(plan.get("growth_epochs", 15000)),
            growth_period=int(plan.get("growth_period", 500)),
            refine_sweeps=int(plan.get("refine_sweeps", 50)),
            minibatches=int(plan.get("minibatches", 5)),
            refine_tol=float(plan.get("refine_tol", 1e-12)),
        )
    schedule.lr_basis = lr_basis
    schedule.lr_transform = lr_transform
    schedule.checkpoint_every = checkpoint_every
    return schedule
