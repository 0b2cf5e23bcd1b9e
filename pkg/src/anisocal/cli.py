"""Command-line driver: sample, generate, train, identify, eval, surface, ellipticity, classify."""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from .errors import AnisocalError, IoError

log = logging.getLogger("anisocal")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.BadParameter(f"cannot read config {path}: {exc}") from exc


def _write_json(path, doc) -> None:
    try:
        Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True, default=_json_default))
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def _copy_config(out, resolved: dict) -> None:
    """Resolved run configuration stored next to the output."""
    out = Path(out)
    _write_json(out.with_name(out.name + ".config.json"), resolved)


def _emit(resolved: dict) -> None:
    click.echo(json.dumps(resolved, indent=1, sort_keys=True, default=_json_default))


def _parse_F(text: str | None) -> np.ndarray:
    if text is None:
        return np.eye(3)
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise click.BadParameter("F must be 9 comma-separated numbers") from exc
    if len(vals) != 9:
        raise click.BadParameter("F must be 9 comma-separated numbers (row-major)")
    return np.array(vals).reshape(3, 3)


def _train_objects(cfg: dict, seed, workers, restarts=None, epochs=None, qn_iters=None):
    from .training import LossWeights, TrainConfig

    tdict = dict(cfg.get("train", {}))
    if seed is not None:
        tdict["seed"] = seed
    if workers is not None:
        tdict["workers"] = workers
    if restarts is not None:
        tdict["restarts"] = restarts
    if epochs is not None:
        tdict.setdefault("adam", {})["epochs"] = epochs
    if qn_iters is not None:
        tdict.setdefault("qn", {})["max_iter"] = qn_iters
    tc = TrainConfig.from_dict(tdict)
    weights = LossWeights(**cfg.get("weights", {}))
    return tc, weights


common_seed = click.option("--seed", type=int, default=None, help="Seed for all randomness.")
common_config = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="JSON config file; flags override its values.")
common_dry = click.option("--dry-run", is_flag=True, help="Print the resolved configuration and exit.")
common_workers = click.option("--workers", type=int, default=None, help="Parallel workers (restarts).")


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def cli(verbose):
    """Calibrate anisotropic neural hyperelastic models and detect their symmetry."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--out", type=click.Path(dir_okay=False), default="paths.json", show_default=True)
@click.option("--n-samp", type=int, default=None)
@click.option("--d-tol", type=float, default=None)
@click.option("--no-filter", is_flag=True, help="Skip the distance filter.")
@common_seed
@common_config
@common_dry
@common_workers
def sample(out, n_samp, d_tol, no_filter, seed, config_path, dry_run, workers):
    """Latin-hypercube load paths with the distance filter."""
    from .datagen import SampleConfig, dedup_filter, sample_paths, write_paths

    cfg = _load_config(config_path)
    sdict = dict(cfg.get("sample", cfg if "n_samp" in cfg else {}))
    for key, val in (("seed", seed), ("n_samp", n_samp), ("d_tol", d_tol)):
        if val is not None:
            sdict[key] = val
    scfg = SampleConfig.from_dict(sdict)
    resolved = {"command": "sample", "sample": scfg.to_dict(), "filter": not no_filter, "out": str(out)}
    if dry_run:
        _emit(resolved)
        return
    paths = sample_paths(scfg)
    if not no_filter:
        paths = dedup_filter(paths, scfg.d_tol)
    write_paths(paths, out, scfg)
    _copy_config(out, resolved)
    click.echo(f"{len(paths)} paths -> {out}")


@cli.command()
@click.option("--paths", "paths_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--family", type=click.Choice(["neo_hooke", "ti", "orthotropic", "cubic", "hexagonal", "monoclinic"]), default=None)
@click.option("--orientation-seed", type=int, default=None, help="Seed of the random material orientation.")
@click.option("--out", type=click.Path(dir_okay=False), default="data.jsonl", show_default=True)
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
@click.option("--max-paths", type=int, default=None, help="Use a random subset of this many paths.")
@common_seed
@common_config
@common_dry
@common_workers
def generate(paths_file, family, orientation_seed, out, csv_out, max_paths, seed, config_path, dry_run, workers):
    """Evaluate an analytic ground-truth material along load paths."""
    from .datagen import GroundTruth, build_dataset, random_rotation, read_paths, write_csv, write_jsonl

    cfg = _load_config(config_path)
    gdict = dict(cfg.get("ground_truth", {}))
    if family is not None:
        gdict["family"] = family
    gdict.setdefault("family", "neo_hooke")
    seed = 0 if seed is None else seed
    if orientation_seed is not None or "Q" not in gdict:
        gdict["Q"] = random_rotation(seed if orientation_seed is None else orientation_seed).tolist()
    gt = GroundTruth.from_dict(gdict)
    resolved = {"command": "generate", "ground_truth": gt.to_dict(), "paths": str(paths_file), "max_paths": max_paths, "seed": seed}
    if dry_run:
        _emit(resolved)
        return
    paths = read_paths(paths_file)
    if max_paths is not None and max_paths < len(paths):
        pick = np.sort(np.random.default_rng(seed).choice(len(paths), max_paths, replace=False))
        paths = [paths[i] for i in pick]
    data = build_dataset(gt, paths)
    write_jsonl(data, out)
    if csv_out:
        write_csv(data, csv_out)
    _copy_config(out, resolved)
    click.echo(f"{len(data)} records -> {out}")


def _train_flags(f):
    f = click.option("--restarts", type=int, default=None)(f)
    f = click.option("--epochs", type=int, default=None, help="Adam epochs.")(f)
    f = click.option("--qn-iters", type=int, default=None, help="Quasi-Newton iterations.")(f)
    f = click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None, help="Training log (JSONL).")(f)
    f = click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)(f)
    return f


def _report_path(out, report_path):
    return report_path or str(Path(out).with_suffix(".report.json"))


@cli.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--kind", type=click.Choice(["g2", "g4", "g6", "pair", "coord"]), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default="model.json", show_default=True)
@_train_flags
@common_seed
@common_config
@common_dry
@common_workers
def train(data_path, kind, out, restarts, epochs, qn_iters, log_path, report_path, seed, config_path, dry_run, workers):
    """Train one model kind on a dataset (70/30 split)."""
    from .datagen import read_jsonl, split
    from .network import save_model
    from .training import train as run_train

    cfg = _load_config(config_path)
    tc, weights = _train_objects(cfg, seed, workers, restarts, epochs, qn_iters)
    resolved = {"command": "train", "kind": kind, "data": str(data_path), "train": tc.to_dict(), "weights": asdict(weights)}
    if dry_run:
        _emit(resolved)
        return
    data = read_jsonl(data_path)
    cal, test = split(data, tc.split_ratio, tc.seed)
    model, report = run_train(kind, cal, tc, weights, test=test, error_data=data, log_path=log_path)
    save_model(model, out)
    doc = report.to_dict()
    doc.pop("history")
    _write_json(_report_path(out, report_path), doc)
    _copy_config(out, resolved)
    click.echo(f"{kind}: eps_psi={report.eps_psi:.3g}% eps_sigma={report.eps_sigma:.3g}% eps_c={report.eps_c:.3g}% -> {out}")


@cli.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default="model.json", show_default=True)
@click.option("--eps-tol", type=float, default=0.01, show_default=True, help="Relative error tolerance (fraction).")
@click.option("--extrapolation", is_flag=True, help="Calibrate on all records; errors on calibration data.")
@_train_flags
@common_seed
@common_config
@common_dry
@common_workers
def identify(data_path, out, eps_tol, extrapolation, restarts, epochs, qn_iters, log_path, report_path, seed, config_path, dry_run, workers):
    """Escalate G2 -> G4 -> G6 -> pair until the errors drop below the tolerance."""
    from .datagen import read_jsonl
    from .errors import NoModelPassed
    from .network import save_model
    from .training import identify as run_identify

    cfg = _load_config(config_path)
    tc, weights = _train_objects(cfg, seed, workers, restarts, epochs, qn_iters)
    resolved = {
        "command": "identify",
        "data": str(data_path),
        "eps_tol": eps_tol,
        "extrapolation": extrapolation,
        "train": tc.to_dict(),
        "weights": asdict(weights),
    }
    if dry_run:
        _emit(resolved)
        return
    data = read_jsonl(data_path)
    _copy_config(out, resolved)
    try:
        model, report = run_identify(data, tc, weights, eps_tol, extrapolation, log_path=log_path)
    except NoModelPassed as exc:
        if exc.model is not None:
            save_model(exc.model, out)
            doc = exc.report.to_dict()
            doc.pop("history")
            doc["passed"] = False
            _write_json(_report_path(out, report_path), doc)
        raise
    save_model(model, out)
    doc = report.to_dict()
    doc.pop("history")
    doc["passed"] = True
    _write_json(_report_path(out, report_path), doc)
    click.echo(f"selected {report.kind} ({(report.symmetry or {}).get('group')}) -> {out}")


@cli.command(name="eval")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report JSON.")
@click.option("--correlation", type=click.Path(dir_okay=False), default=None, help="Correlation CSV.")
@common_seed
@common_config
@common_dry
@common_workers
def eval_cmd(model_path, data_path, out, correlation, seed, config_path, dry_run, workers):
    """Error measures of a model on a dataset."""
    from .analysis import correlation_export
    from .datagen import read_jsonl
    from .network import load_model
    from .training import error_measures

    resolved = {"command": "eval", "model": str(model_path), "data": str(data_path)}
    if dry_run:
        _emit(resolved)
        return
    model = load_model(model_path)
    data = read_jsonl(data_path)
    e = dict(zip(("eps_psi", "eps_sigma", "eps_c"), error_measures(model, data)))
    e["records"] = len(data)
    if out:
        _write_json(out, e)
        _copy_config(out, resolved)
    if correlation:
        correlation_export(model, data, correlation)
    click.echo(json.dumps(e, default=_json_default))


def _tangent_from(model_path, family, orientation_seed, F, spatial: bool):
    from .datagen import GroundTruth, ground_truth_eval, random_rotation
    from .energy import evaluate
    from .network import load_model

    if (model_path is None) == (family is None):
        raise click.UsageError("give exactly one of --model or --family")
    if model_path is not None:
        r = evaluate(load_model(model_path), F)
    else:
        Q = np.eye(3) if orientation_seed is None else random_rotation(orientation_seed)
        r = ground_truth_eval(GroundTruth(family, Q=Q), F)
    return r.c if spatial else r.A


_source_opts = [
    click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--family", type=click.Choice(["neo_hooke", "ti", "orthotropic", "cubic", "hexagonal", "monoclinic"]), default=None),
    click.option("--orientation-seed", type=int, default=None),
    click.option("--F", "F_text", default=None, help="Deformation gradient, 9 numbers row-major (default identity)."),
]


def _source(f):
    for opt in reversed(_source_opts):
        f = opt(f)
    return f


@cli.command()
@_source
@click.option("--out", type=click.Path(dir_okay=False), default="surface.csv", show_default=True)
@click.option("--step-deg", type=float, default=2.0, show_default=True)
@common_seed
@common_config
@common_dry
@common_workers
def surface(model_path, family, orientation_seed, F_text, out, step_deg, seed, config_path, dry_run, workers):
    """Directional Young's modulus surface (CSV + gnuplot script)."""
    from .analysis import elastic_surface, write_surface

    F = _parse_F(F_text)
    resolved = {"command": "surface", "model": model_path, "family": family, "orientation_seed": orientation_seed, "F": F.tolist(), "step_deg": step_deg}
    if dry_run:
        _emit(resolved)
        return
    c = _tangent_from(model_path, family, orientation_seed, F, spatial=True)
    s = elastic_surface(c, np.radians(step_deg))
    write_surface(s, out)
    _copy_config(out, resolved)
    ext = s.extrema()
    click.echo(f"E in [{ext['min']:.6g}, {ext['max']:.6g}] MPa over {len(s)} directions -> {out}")


@cli.command()
@_source
@click.option("--step-deg", type=float, default=1.0, show_default=True)
@common_seed
@common_config
@common_dry
@common_workers
def ellipticity(model_path, family, orientation_seed, F_text, step_deg, seed, config_path, dry_run, workers):
    """Minimum acoustic-tensor eigenvalue over all directions."""
    from .analysis import ellipticity_scan

    F = _parse_F(F_text)
    resolved = {"command": "ellipticity", "model": model_path, "family": family, "F": F.tolist(), "step_deg": step_deg}
    if dry_run:
        _emit(resolved)
        return
    A = _tangent_from(model_path, family, orientation_seed, F, spatial=False)
    res = ellipticity_scan(A, np.radians(step_deg))
    click.echo(json.dumps(res.to_dict()))


@cli.command()
@click.option("--structure", "structure_path", type=click.Path(exists=True, dir_okay=False), default=None, help='JSON {"kind": ..., "params": [...]}.')
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--tol", type=float, default=0.05, show_default=True)
@common_seed
@common_config
@common_dry
@common_workers
def classify(structure_path, model_path, tol, seed, config_path, dry_run, workers):
    """Symmetry label of a structure-tensor parameterization."""
    from .network import load_model
    from .structure import SetKind, StructureSpec
    from .structure import classify as run_classify

    if (structure_path is None) == (model_path is None):
        raise click.UsageError("give exactly one of --structure or --model")
    if dry_run:
        _emit({"command": "classify", "structure": structure_path, "model": model_path, "tol": tol})
        return
    if model_path is not None:
        m = load_model(model_path)
        if m.is_coord:
            raise click.UsageError("coordinate models carry no structure tensor")
        spec = StructureSpec(SetKind(m.kind), m.structure_params)
    else:
        doc = json.loads(Path(structure_path).read_text())
        spec = StructureSpec(SetKind(doc["kind"]), np.asarray(doc["params"], dtype=float))
    click.echo(json.dumps(run_classify(spec, tol).to_dict(), default=_json_default))


def main(argv=None) -> int:
    """Entry point mapping domain errors to exit code 1 and usage errors to 2."""
    try:
        cli.main(args=argv, standalone_mode=False, prog_name="anisocal")
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.ctx.get_help() if exc.ctx else str(exc), err=True)
        return 2
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.Abort:
        return 1
    except AnisocalError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
