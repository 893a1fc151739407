"""Command-line interface.

Subcommands mirror the experiment pipeline: ``collect`` samples training
data on the PID-held plant, ``train`` builds the inversion network,
``run`` executes isolation / decoupling / comparison scenarios, and the
two ``*-check`` commands print one-shot numerical diagnostics.  Every
command writes a manifest before any other artifact, so an output
directory is reconstructible from its config and seed alone.

Exit codes: 0 success, 2 configuration error, 3 divergence or collision,
4 missing input artifact.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_hash, load_config, platform_from_config
from .errors import (ArtifactError, CollisionError, ConfigurationError,
                     DatasetError, DesignError, DivergenceError, MvipError)
from .dataset import (CollectionConfig, ExcitationConfig, collect_dataset,
                      load_dataset, save_dataset, split_dataset)
from .harness import (ControllerParams, DisturbanceSpec, PidParams,
                      ScenarioConfig, StepCommand, TransmissionPath,
                      attenuation_db, cross_coupling_metric, run_scenario,
                      step_response_check, transmissibility_spectrum)
from .inversion import jacobian
from .plant import actuation_map, params_from_dict
from .rbf import Normalization, load_network, network_rmse, save_network
from .training import TrainingConfig, train_network

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_MISSING = 4


def _out_dir(arg: str) -> Path:
    root = os.environ.get("MVIP_OUT_ROOT")
    path = Path(arg)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, command: str, cfg: dict, args) -> None:
    doc = {
        "command": command,
        "config_path": str(args.config) if args.config else None,
        "seed": args.seed,
        "out_dir": str(out),
        "tool_version": __version__,
        "config_hash": config_hash(cfg),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _controller_params(cfg: dict) -> ControllerParams:
    c = cfg["controller"]
    return ControllerParams(
        f_l=c["f_l"], f_h=c["f_h"], filter_length=c["filter_length"],
        mu=c["mu"], p=c["p"], lam=c["lambda"], eps1=c["eps1"], eps2=c["eps2"],
        reference_band=c.get("reference_band", True),
    )


def _scenario_from_config(cfg: dict, args, controller_mode: str,
                          inversion_mode: str, steps=None) -> ScenarioConfig:
    nominal, loaded = platform_from_config(cfg)
    sc = cfg["scenario"]
    d = cfg["disturbance"]
    seed = args.seed if args.seed is not None else d["seed"]
    duration = args.duration if args.duration else sc["duration"]
    return ScenarioConfig(
        params=loaded,
        nominal=nominal,
        controller_mode=controller_mode,
        inversion_mode=inversion_mode,
        duration=duration,
        control_rate=sc["control_rate"],
        substeps=sc["substeps"],
        disturbance=DisturbanceSpec(
            random_level=d["random_level"], band=tuple(d["band"]),
            tones=[tuple(t) for t in d["tones"]], axis=d["axis"], seed=seed),
        transmission=TransmissionPath(**cfg["transmission"]),
        steps=steps if steps is not None
        else [StepCommand(**s) for s in sc["steps"]],
        prefilter_tau=sc["prefilter_tau"],
        controller=_controller_params(cfg),
        pid=PidParams(**cfg["pid"]),
        accel_noise=sc["accel_noise"],
        pose_noise=sc["pose_noise"],
        seed=seed,
    )


def _load_network_arg(args):
    if not args.network:
        raise ArtifactError("this mode requires --network pointing to a "
                            "trained network file")
    path = Path(args.network)
    if not path.exists():
        raise ArtifactError(f"network file not found: {path}")
    return load_network(path)


# ---------------------------------------------------------------------------
# collect
# ---------------------------------------------------------------------------

def cmd_collect(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    _write_manifest(out, "collect", cfg, args)
    col = cfg["collection"]
    exc = col["excitation"]
    nominal, loaded = platform_from_config(cfg)
    seed = args.seed if args.seed is not None else 0
    duration = args.duration if args.duration else col["duration"]
    kind = args.excitation or exc["kind"]
    collection = CollectionConfig(
        duration=duration,
        sample_period=col["sample_period"],
        substeps=col["substeps"],
        pid_kp=col["pid"]["kp"], pid_ki=col["pid"]["ki"], pid_kd=col["pid"]["kd"],
        accel_noise=col["accel_noise"],
        excitation=ExcitationConfig(
            amplitude_translation=exc["amplitude_translation"],
            amplitude_rotation=exc["amplitude_rotation"],
            band=tuple(exc["band"]), sweep_range=tuple(exc["sweep_range"])),
    )
    data = collect_dataset(loaded, kind, collection, nominal=nominal, seed=seed)
    train, valid = split_dataset(data, col["train_fraction"])
    save_dataset(train, out / "train.csv")
    save_dataset(valid, out / "validation.csv")
    norm = Normalization.from_data(train.inputs, train.targets)
    with open(out / "normalization.json", "w") as fh:
        json.dump({
            "format": "mvip-normalization",
            "version": 1,
            "input_min": norm.input_min.tolist(),
            "input_max": norm.input_max.tolist(),
            "output_min": norm.output_min.tolist(),
            "output_max": norm.output_max.tolist(),
        }, fh, indent=2)
        fh.write("\n")
    print(f"collected {len(data)} samples ({kind}); "
          f"train {len(train)} / validation {len(valid)} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    _write_manifest(out, "train", cfg, args)
    data_dir = Path(args.data) if args.data else out
    train_path = data_dir / "train.csv"
    valid_path = data_dir / "validation.csv"
    for p in (train_path, valid_path):
        if not p.exists():
            raise ArtifactError(f"dataset file not found: {p}")
    train = load_dataset(train_path)
    valid = load_dataset(valid_path)

    t = cfg["training"]
    e_d = args.desired_rmse if args.desired_rmse else t["desired_rmse"]
    if e_d <= 0:
        raise ConfigurationError("desired RMSE must be positive")
    tc = TrainingConfig(desired_rmse=e_d, max_neurons=t["max_neurons"],
                        max_inner_iterations=t["max_inner_iterations"])
    sub = max(1, int(t["subsample"]))
    net, report = train_network(train.inputs[::sub], train.targets[::sub], tc)
    save_network(net, out / "network.json")

    train_rmse = network_rmse(net, train.inputs, train.targets)
    valid_rmse = network_rmse(net, valid.inputs, valid.targets)
    overfitting = bool(valid_rmse > 3.0 * train_rmse)
    doc = {
        "excitation": train.excitation_kind,
        "desired_rmse": e_d,
        "neurons": report.neurons,
        "fit_rmse": report.train_rmse,
        "train_rmse": train_rmse,
        "validation_rmse": valid_rmse,
        "overfitting": overfitting,
        "reached_target": report.reached_target,
        "stalled": report.stalled,
        "inner_iterations": report.inner_iterations,
        "rmse_per_insertion": [[int(p), float(r)]
                               for p, r in report.rmse_per_insertion],
    }
    with open(out / "training_report.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not args.no_plot:
        from .plotting import plot_training
        plot_training(report, out)
    print(f"trained {report.neurons} neurons; train RMSE {train_rmse:.3e}, "
          f"validation {valid_rmse:.3e}, overfitting={overfitting} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _finish_run(result, out, args, extra_metrics=None, ideal=None):
    result.save(out)
    if extra_metrics:
        with open(out / "metrics.json") as fh:
            doc = json.load(fh)
        doc.update(extra_metrics)
        with open(out / "metrics.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if not args.no_plot and len(result.time):
        from .plotting import plot_decoupling, plot_run
        spectrum = None
        if result.ok and (result.tones or np.any(result.stator_accel)):
            try:
                spectrum = transmissibility_spectrum(result)
            except ConfigurationError:
                spectrum = None
        plot_run(result, out, spectrum=spectrum)
        if ideal is not None or np.any(result.r_d):
            plot_decoupling(result, out, ideal=ideal)
    if result.status != "ok":
        print(f"run ended with status '{result.status}' at "
              f"t={result.fail_time:.3f} s; partial outputs in {out}")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    _write_manifest(out, f"run-{args.scenario}", cfg, args)

    if args.scenario == "isolation":
        network = _load_network_arg(args) if args.inversion == "learned" else None
        sc = _scenario_from_config(cfg, args, args.controller, args.inversion)
        result = run_scenario(sc, network=network)
        return _finish_run(result, out, args)

    if args.scenario == "decoupling":
        network = _load_network_arg(args) if args.inversion == "learned" else None
        steps = [StepCommand(**s) for s in cfg["scenario"]["steps"]] or [
            StepCommand(channel=0, time=2.0, amplitude=0.02),
            StepCommand(channel=1, time=4.0, amplitude=0.02),
        ]
        sc = _scenario_from_config(cfg, args, args.controller, args.inversion,
                                   steps=steps)
        sc.disturbance = DisturbanceSpec(axis=sc.disturbance.axis,
                                         seed=sc.disturbance.seed)
        if not args.duration:
            sc.duration = max(s.time for s in steps) + 2.0
        check = step_response_check(sc, network=network)
        result = check["result"]
        extra = {
            "cross_coupling": check["cross_coupling"],
            "tracking_rmse_rel": check["tracking_rmse_rel"],
        }
        return _finish_run(result, out, args, extra_metrics=extra,
                           ideal=check["ideal"])

    if args.scenario == "compare":
        network = _load_network_arg(args) if args.inversion == "learned" else None
        table = []
        status = EXIT_OK
        for mode in ("imc", "hafimc"):
            sc = _scenario_from_config(cfg, args, mode, args.inversion)
            result = run_scenario(sc, network=network)
            sub = out / mode
            code = _finish_run(result, sub, args)
            status = max(status, code)
            if result.ok:
                for f, _ in result.tones:
                    table.append({"frequency": f, "controller": mode,
                                  "attenuation_db": attenuation_db(result, f)})
        with open(out / "comparison.csv", "w") as fh:
            fh.write("frequency_hz,controller,attenuation_db\n")
            for row in sorted(table, key=lambda r: (r["frequency"],
                                                    r["controller"])):
                fh.write(f"{row['frequency']:g},{row['controller']},"
                         f"{row['attenuation_db']:.4f}\n")
        with open(out / "comparison.json", "w") as fh:
            json.dump(table, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if not args.no_plot and table:
            from .plotting import plot_compare
            plot_compare(table, out)
        for row in sorted(table, key=lambda r: (r["frequency"], r["controller"])):
            print(f"{row['frequency']:>6g} Hz  {row['controller']:<7s} "
                  f"{row['attenuation_db']:8.2f} dB")
        return status

    raise ConfigurationError(f"unknown scenario '{args.scenario}'")


# ---------------------------------------------------------------------------
# one-shot checks
# ---------------------------------------------------------------------------

def cmd_allocate_check(args) -> int:
    cfg = load_config(args.config)
    from .allocation import AllocationProblem, allocate
    nominal, loaded = platform_from_config(cfg)
    C = actuation_map(loaded)
    wrench = np.asarray(args.wrench if args.wrench else [0, 0, 4.0, 0, 0, 0],
                        dtype=float)
    q = loaded.stiffness_coeffs[:, 2]
    f = allocate(AllocationProblem(wrench=wrench, weight_diag=q, map=C))
    residual = C @ f - wrench
    print("actuator,force_n,current_a")
    for i in range(8):
        print(f"{i + 1},{f[i]:.9g},{f[i] / q[i]:.9g}")
    print("residual," + ",".join(f"{r:.3e}" for r in residual))
    return EXIT_OK


def cmd_invert_check(args) -> int:
    cfg = load_config(args.config)
    nominal, loaded = platform_from_config(cfg)
    rep = jacobian(loaded)
    np.set_printoptions(precision=6, suppress=False, linewidth=140)
    print("acceleration/wrench sensitivity:")
    print(rep.jacobian)
    print(f"determinant (numeric)    : {rep.determinant:.12e}")
    print(f"determinant (closed form): {rep.closed_form:.12e}")
    print(f"difference               : {rep.determinant - rep.closed_form:.3e}")
    print(f"relative order           : {rep.relative_order}, "
          f"invertible={rep.invertible}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvip",
        description="Maglev vibration isolation platform simulation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", default=None, help="JSON config overlay")
        p.add_argument("--seed", type=int, default=None)
        if needs_out:
            p.add_argument("--out", default="out",
                           help="output directory (MVIP_OUT_ROOT applies)")
        p.add_argument("--duration", type=float, default=None)
        p.add_argument("--no-plot", action="store_true",
                       help="skip figure rendering")

    p = sub.add_parser("collect", help="sample inversion training data")
    common(p)
    p.add_argument("--excitation", choices=["rgs", "sweep"], default=None)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="build the inversion network")
    common(p)
    p.add_argument("--data", default=None,
                   help="directory holding train.csv / validation.csv")
    p.add_argument("--desired-rmse", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="execute a closed-loop scenario")
    common(p)
    p.add_argument("--scenario", choices=["isolation", "decoupling", "compare"],
                   default="isolation")
    p.add_argument("--controller", choices=["pid", "imc", "hafimc"],
                   default="imc")
    p.add_argument("--inversion", choices=["analytic", "learned", "none"],
                   default="analytic")
    p.add_argument("--network", default=None, help="trained network JSON")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("allocate-check",
                       help="print one wrench allocation and its residual")
    common(p, needs_out=False)
    p.add_argument("--wrench", type=float, nargs=6, default=None,
                   metavar=("FX", "FY", "FZ", "TX", "TY", "TZ"))
    p.set_defaults(func=cmd_allocate_check)

    p = sub.add_parser("invert-check",
                       help="print the inversion sensitivity and determinant")
    common(p, needs_out=False)
    p.set_defaults(func=cmd_invert_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigurationError, DatasetError, DesignError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, CollisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except MvipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
