"""Command-line pipeline: sample, train, eval, convert, solve.

Every subcommand reads one TOML config (plus ``key=value`` overrides), echoes
the fully resolved config into the run directory, and writes deterministic
CSV/JSON outputs with rendered figures alongside.  Exit codes: 0 ok,
2 configuration error, 3 numeric failure, 4 non-convergence.
"""

from __future__ import annotations

import os

if "TTPES_THREADS" in os.environ:  # cap BLAS pools before numpy spins them up
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["TTPES_THREADS"])

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_model, save_model
from .config import (
    apply_overrides,
    build_plan,
    build_potential,
    build_sampler,
    echo_config,
    load_toml,
    merge,
)
from .exceptions import (
    ConfigError,
    ConvergenceError,
    GuardExceededError,
    NumericalError,
    SamplingError,
    SchemaError,
    TtpesError,
)
from .model import initialize_model
from .operator import build_ho_dvr, kinetic_mpo, load_mpo, mpo_add, potential_mpo, save_mpo
from .sampling import load_dataset, metropolis_sample, save_dataset
from .solver import EigenResult, dense_eigs, dense_hamiltonian, dmrg_states, level_report
from .training import fit
from . import plots

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_NONCONVERGED = 4


def _resolve_config(args) -> tuple[dict, Path]:
    config = load_toml(args.config) if args.config else {}
    config = apply_overrides(config, args.overrides or [])
    if args.seed is not None:
        config["seed"] = args.seed
    config.setdefault("seed", 0)
    out_dir = Path(args.out if args.out else config.get("out", "."))
    config["out"] = str(out_dir)
    echo_config(config, out_dir)
    return config, out_dir


def _write_json(path: Path, doc: dict):
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# -- subcommands --------------------------------------------------------------


def cmd_sample(args) -> int:
    config, out_dir = _resolve_config(args)
    potential = build_potential(config.get("potential", {}))
    sampler = build_sampler(config.get("sampler", {}), int(config["seed"]))
    dataset = metropolis_sample(potential, sampler)
    save_dataset(dataset, out_dir / "dataset.csv")

    counts, edges = np.histogram(
        dataset.energies if len(dataset) else np.zeros(0), bins=10
    )
    summary = {
        "points": len(dataset),
        "splits": {k: list(v) for k, v in dataset.splits.items()},
        "acceptance_rate": dataset.provenance.get("acceptance_rate"),
        "energy_histogram": {
            "counts": counts.tolist(),
            "edges": edges.tolist(),
        },
    }
    _write_json(out_dir / "sample_summary.json", summary)
    if len(dataset):
        plots.energy_histogram(
            dataset.energies, out_dir / "energy_hist.png", v_max=sampler.v_max
        )
    print(
        f"sampled {len(dataset)} points "
        f"(acceptance rate {summary['acceptance_rate']:.3f})"
    )
    return EXIT_OK


def _load_dataset_from(config, key="dataset"):
    data = config.get("data", {})
    path = data.get(key)
    if not path:
        raise ConfigError(f"data.{key} is required")
    return load_dataset(path)


def cmd_train(args) -> int:
    config, out_dir = _resolve_config(args)
    dataset = _load_dataset_from(config)
    seed = int(config["seed"])
    model_cfg = config.get("model", {})
    x_train, e_train, _ = dataset.split("train")
    if x_train.shape[0] == 0:
        raise ConfigError("dataset has an empty training split")

    ninputs = dataset.ninputs
    nmodes = int(model_cfg.get("latent", ninputs))
    nbasis = int(model_cfg.get("basis", 9))
    bond_init = int(model_cfg.get("bond_init", 2))
    rng = np.random.default_rng(seed)
    model = initialize_model(
        ninputs,
        nmodes,
        nbasis,
        bond_init,
        x_train,
        rng,
        mean_energy=float(np.mean(e_train)),
        energy_unit=dataset.energy_unit,
        length_unit=dataset.length_unit,
    )
    plan = build_plan(config.get("plan", {}), config.get("optimizer", {}))

    checkpoint_dir = out_dir / "checkpoints"
    checkpoint_dir.mkdir(parents=True, exist_ok=True)

    def checkpoint_fn(epoch, snapshot):
        save_model(snapshot, checkpoint_dir / f"epoch-{epoch:06d}.json")

    trained, trace = fit(model, dataset, plan, seed=seed, checkpoint_fn=checkpoint_fn)
    trace.to_csv(out_dir / "trace.csv")
    save_model(trained, out_dir / "model.json")

    lines = [",".join(f"{v!r}" for v in row) for row in trained.transform]
    (out_dir / "transform.csv").write_text("\n".join(lines) + "\n")

    final = trace.rows[-1] if trace.rows else None
    summary = {
        "epochs": len(trace),
        "final_loss": None if final is None else final.loss,
        "final_val_rmse": None if final is None else final.val_rmse,
        "max_bond": None if final is None else final.max_bond,
        "seed": seed,
    }
    _write_json(out_dir / "train_summary.json", summary)
    if trace.rows:
        plots.training_trace(trace, out_dir / "trace.png")
    plots.transform_heatmap(trained.transform, out_dir / "transform.png")
    if final is not None:
        print(
            f"trained {len(trace)} epochs: loss {final.loss:.3e}, "
            f"validation RMSE {final.val_rmse:.3e}, max bond {final.max_bond}"
        )
    return EXIT_OK


def cmd_eval(args) -> int:
    config, out_dir = _resolve_config(args)
    data = config.get("data", {})
    if not data.get("checkpoint"):
        raise ConfigError("data.checkpoint is required")
    model = load_model(data["checkpoint"])
    dataset = _load_dataset_from(config)
    if model.ninputs != dataset.ninputs:
        raise ConfigError(
            f"checkpoint expects {model.ninputs} coordinates, "
            f"dataset provides {dataset.ninputs}"
        )
    split = data.get("split", "test")
    if split not in dataset.splits:
        raise ConfigError(f"dataset has no split {split!r}")
    x, energies, _ = dataset.split(split)
    if x.shape[0] == 0:
        raise ConfigError(f"split {split!r} is empty")

    predicted = model.evaluate(x)
    lines = ["reference,predicted"]
    for ref, pred in zip(energies, predicted):
        lines.append(f"{float(ref)!r},{float(pred)!r}")
    (out_dir / "scatter.csv").write_text("\n".join(lines) + "\n")

    mae = float(np.mean(np.abs(predicted - energies)))
    rmse = float(np.sqrt(np.mean((predicted - energies) ** 2)))
    _write_json(
        out_dir / "eval_summary.json",
        {"split": split, "points": int(x.shape[0]), "mae": mae, "rmse": rmse},
    )
    plots.prediction_scatter(energies, predicted, out_dir / "scatter.png")
    print(f"eval on {split}: MAE {mae:.6e}  RMSE {rmse:.6e}  ({x.shape[0]} points)")
    return EXIT_OK


def _latent_dvr_parameters(config, model):
    """Per-latent-mode (frequency, center) for grid construction."""
    dvr_cfg = config.get("dvr", {})
    freqs = dvr_cfg.get("frequencies", "auto")
    centers = dvr_cfg.get("centers")
    if isinstance(freqs, str) and freqs == "auto":
        dataset = _load_dataset_from(config)
        hessian = dataset.provenance.get("hessian")
        minimum = dataset.provenance.get("minimum")
        if hessian is None:
            raise ConfigError(
                "dvr.frequencies = 'auto' needs a dataset sidecar with a Hessian"
            )
        hessian = np.asarray(hessian, dtype=float)
        latent_hess = model.transform.T @ hessian @ model.transform
        diag = np.diag(latent_hess)
        if np.any(diag <= 0):
            raise ConfigError("latent Hessian diagonal is not positive")
        freqs = np.sqrt(diag)
        if centers is None and minimum is not None:
            centers = (np.asarray(minimum, dtype=float) @ model.transform).tolist()
    else:
        freqs = np.asarray(freqs, dtype=float)
        if freqs.size != model.nmodes:
            raise ConfigError("dvr.frequencies length must match the latent modes")
    if centers is None:
        centers = [0.0] * model.nmodes
    return np.asarray(freqs, dtype=float), np.asarray(centers, dtype=float)


def cmd_convert(args) -> int:
    config, out_dir = _resolve_config(args)
    data = config.get("data", {})
    if not data.get("checkpoint"):
        raise ConfigError("data.checkpoint is required")
    model = load_model(data["checkpoint"])
    dvr_cfg = config.get("dvr", {})
    size = int(dvr_cfg.get("size", 9))
    hbar = float(dvr_cfg.get("hbar", 1.0))
    freqs, centers = _latent_dvr_parameters(config, model)

    dvrs = [
        build_ho_dvr(size, float(w), float(c), hbar=hbar)
        for w, c in zip(freqs, centers)
    ]
    potential = potential_mpo(model, dvrs)
    kinetic = kinetic_mpo(dvrs)
    hamiltonian = mpo_add(potential, kinetic)
    save_mpo(potential, out_dir / "potential_mpo.json")
    save_mpo(kinetic, out_dir / "kinetic_mpo.json")
    save_mpo(hamiltonian, out_dir / "hamiltonian_mpo.json")
    summary = {
        "grid_size": size,
        "frequencies": freqs.tolist(),
        "centers": centers.tolist(),
        "potential_bond_dims": potential.bond_dims,
        "kinetic_bond_dims": kinetic.bond_dims,
        "hamiltonian_bond_dims": hamiltonian.bond_dims,
    }
    _write_json(out_dir / "convert_summary.json", summary)
    print(
        f"converted: potential bonds {potential.bond_dims}, "
        f"kinetic bonds {kinetic.bond_dims}"
    )
    return EXIT_OK


def _reference_from_csv(path) -> EigenResult:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0].startswith("index,energy"):
        raise SchemaError(f"{path} does not look like a level report")
    energies = [float(line.split(",")[1]) for line in lines[1:]]
    return EigenResult(
        energies=np.asarray(energies),
        converged=[True] * len(energies),
        variances=np.zeros(len(energies)),
    )


def cmd_solve(args) -> int:
    config, out_dir = _resolve_config(args)
    data = config.get("data", {})
    if not data.get("hamiltonian"):
        raise ConfigError("data.hamiltonian is required")
    hamiltonian = load_mpo(data["hamiltonian"])
    solve_cfg = config.get("solve", {})
    k = int(solve_cfg.get("states", 10))
    method = solve_cfg.get("method", "dmrg")
    if args.dense:
        method = "dense"

    if method == "dense":
        result = dense_eigs(dense_hamiltonian(hamiltonian), k)
    elif method == "dmrg":
        result = dmrg_states(
            hamiltonian,
            k=k,
            max_bond=int(solve_cfg.get("max_bond", 100)),
            sweeps=int(solve_cfg.get("sweeps", 30)),
            tol=float(solve_cfg.get("tol", 1e-10)),
            seed=int(config["seed"]),
            penalty_weight=solve_cfg.get("penalty_weight"),
        )
    else:
        raise ConfigError(f"unknown solve method {method!r}")

    reference = None
    ref_path = args.reference or data.get("reference")
    if ref_path:
        reference = _reference_from_csv(ref_path)
    report = level_report(result, reference=reference)
    report.to_csv(out_dir / "levels.csv")
    report.to_json(out_dir / "levels.json")
    plots.level_diagram(report, out_dir / "levels.png")

    print(f"zero-point energy {report.zpe!r}")
    if report.mae is not None:
        print(f"excited-level MAE vs reference {report.mae!r}")
    if not all(result.converged):
        bad = [i for i, ok in enumerate(result.converged) if not ok]
        raise ConvergenceError(
            f"states {bad} did not converge; partial results written"
        )
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttpes",
        description="Train tensor-train potentials and solve vibrational levels.",
    )
    parser.add_argument("--version", action="version", version=f"ttpes {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--out", help="output directory (default: config `out` or .)")
        p.add_argument(
            "overrides",
            nargs="*",
            metavar="key=value",
            help="dotted-key config overrides, TOML-typed values",
        )

    common(sub.add_parser("sample", help="draw a dataset from a model potential"))
    common(sub.add_parser("train", help="fit a model to a dataset"))
    common(sub.add_parser("eval", help="score a checkpoint against a dataset split"))
    common(sub.add_parser("convert", help="build grid-basis operators from a checkpoint"))
    solve = sub.add_parser("solve", help="compute vibrational levels of an operator")
    common(solve)
    solve.add_argument("--reference", help="levels.csv for per-level deviations")
    solve.add_argument(
        "--dense", action="store_true", help="force the dense oracle path"
    )
    return parser


_COMMANDS = {
    "sample": cmd_sample,
    "train": cmd_train,
    "eval": cmd_eval,
    "convert": cmd_convert,
    "solve": cmd_solve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, SchemaError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, GuardExceededError, SamplingError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConvergenceError as err:
        print(f"non-convergence: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except TtpesError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
