"""Command line interface.

Five entry points: ``simulate`` builds particle banks, ``abc run`` attaches
kernel weights, ``recalibrate`` post-processes a weighted bank, ``diagnose
coverage`` replays an inference procedure over prior replicates, and
``experiment`` dispatches the built-in study drivers. Every CSV written here
gets a JSON manifest sidecar recording the resolved configuration, seed,
kernel, counts, estimator kinds, flag counters, and wall time.

Options resolve in three layers: explicit command line flags win, then the
``--config`` file (TOML or JSON), then built-in defaults. The config file
uses top-level keys for global options, a ``[model]`` table of constructor
keyword arguments for ``simulate``/``abc``/``recalibrate``, and per-experiment
tables (``[lognormal]``, ``[twisted]``, ``[stereo]``) whose ``model``
sub-table reaches the drivers unchanged.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .core import ParticleSet, particle_stream, write_manifest
from .diagnostics import coverage_diagnostic
from .errors import (
    ConfigError,
    DegenerateWeightsError,
    DomainError,
    FitFailureError,
    InsufficientDataError,
)
from .experiments.common import config_digest, observed_stream
from .kernels import KERNEL_FAMILIES
from .models import MODEL_NAMES, get_model
from .recalibration import ESTIMATORS, P_ADJUSTMENTS, recalibrate, target_marginals
from .rejection import weight_bank

_ERRORS = (
    ConfigError,
    DomainError,
    InsufficientDataError,
    DegenerateWeightsError,
    FitFailureError,
)


def _parse_floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated numbers, got {text!r}")


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    raw = Path(path).read_bytes()
    if path.suffix == ".json":
        return json.loads(raw)
    try:
        return tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError:
        try:
            return json.loads(raw)
        except json.JSONDecodeError:
            raise ConfigError(f"{path} is neither valid TOML nor valid JSON")


def _resolve(cli_value, section: dict, key: str, default):
    if cli_value is not None:
        return cli_value
    return section.get(key, default)


def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> int:
    count = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
            count += 1
    return count


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path} is empty")
        rows = list(reader)
    if not rows:
        raise ConfigError(f"{path} has a header but no rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError:
        raise ConfigError(f"{path} contains non-numeric cells")
    return header, data


def _split_bank(path: Path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Theta and summary blocks of a bank CSV, plus the parameter names."""
    header, data = _read_csv(path)
    t_cols = [i for i, h in enumerate(header) if h.startswith("theta_")]
    s_cols = [i for i, h in enumerate(header) if h.startswith("s") and h[1:].isdigit()]
    if not t_cols or not s_cols:
        raise ConfigError(f"{path} needs theta_* and s1..sK columns")
    names = [header[i][len("theta_") :] for i in t_cols]
    return data[:, t_cols], data[:, s_cols], names


def _tool_manifest(out_dir: Path, stem: str, command: str, resolved: dict,
                   kernel: str, counts: dict, estimators: list[str],
                   flags: dict, files: dict, wall: float) -> Path:
    path = out_dir / f"{stem}.manifest.json"
    write_manifest(
        path,
        {
            "command": command,
            "config": resolved,
            "config_hash": config_digest(resolved),
            "seed": resolved.get("seed"),
            "kernel": kernel,
            "counts": counts,
            "estimators": estimators,
            "flags": flags,
            "files": files,
            "threads_requested": resolved.get("threads", 1),
            "threads_effective": 1,
            "wall_seconds": wall,
        },
    )
    return path


class _CatchErrors(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except _ERRORS as exc:
            raise click.ClickException(str(exc))


@click.group(cls=_CatchErrors)
@click.option("--seed", type=int, default=None, help="Master seed; every stream derives from it. [default: 1]")
@click.option("--threads", type=int, default=None, help="Requested worker count, recorded in manifests; execution is sequential. [default: 1]")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory. [default: runs]")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="TOML or JSON file supplying option defaults.")
@click.pass_context
def main(ctx, seed, threads, out_dir, config_path):
    """Likelihood-free inference with marginal recalibration."""
    file_cfg = _load_config(config_path)
    seed = int(_resolve(seed, file_cfg, "seed", 1))
    threads = int(_resolve(threads, file_cfg, "threads", 1))
    out_dir = Path(_resolve(out_dir, file_cfg, "out", "runs"))
    if seed < 0:
        raise ConfigError("seed must be nonnegative")
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx.obj = {"seed": seed, "threads": threads, "out": out_dir, "file": file_cfg}


def _model_kwargs(obj: dict) -> dict:
    return dict(obj["file"].get("model", {}))


def _build_model(obj: dict, name: str):
    try:
        return get_model(name, **_model_kwargs(obj))
    except TypeError as exc:
        raise ConfigError(f"bad [model] option for {name}: {exc}")


@main.command()
@click.option("--model", "model_name", required=True, type=click.Choice(MODEL_NAMES))
@click.option("--n", type=int, default=None, help="Number of particles. [default: 1000]")
@click.option("--theta", default=None, help="Comma-separated parameter values; fixes every particle at this point instead of drawing from the prior.")
@click.pass_obj
def simulate(obj, model_name, n, theta):
    """Draw a particle bank (or datasets at a fixed parameter) and write bank.csv."""
    t0 = time.perf_counter()
    section = obj["file"].get("simulate", {})
    n = int(_resolve(n, section, "n", 1000))
    theta = _resolve(theta, section, "theta", None)
    if n < 1:
        raise ConfigError("n must be >= 1")
    model = _build_model(obj, model_name)
    if theta is not None:
        fixed = _parse_floats(str(theta), "--theta")
        if fixed.size != model.theta_dim:
            raise ConfigError(f"--theta needs {model.theta_dim} values")
        rows = []
        for i in range(n):
            rng = particle_stream(obj["seed"], i)
            summary = model.summarize(model.simulate(fixed, rng))
            rows.append(np.concatenate([fixed, np.atleast_1d(summary)]))
        thetas = np.tile(fixed, (n, 1))
        summaries = np.array([r[model.theta_dim :] for r in rows])
    else:
        bank = model.sample_particles(n, obj["seed"])
        thetas, summaries = bank.thetas, bank.summaries
    names = model.prior.names
    header = [f"theta_{name}" for name in names]
    header += [f"s{j + 1}" for j in range(summaries.shape[1])]
    path = obj["out"] / "bank.csv"
    count = _write_csv(path, header, np.column_stack([thetas, summaries]))
    resolved = {"seed": obj["seed"], "threads": obj["threads"], "model": model_name,
                "n": n, "theta": None if theta is None else str(theta),
                "model_kwargs": _model_kwargs(obj)}
    _tool_manifest(obj["out"], "bank", "simulate", resolved, kernel="none",
                   counts={"particles": count}, estimators=[], flags={},
                   files={"bank.csv": {"rows": count}},
                   wall=time.perf_counter() - t0)
    click.echo(f"wrote {path} ({count} particles)")


@main.group()
def abc():
    """ABC rejection/importance sampling."""


@abc.command("run")
@click.option("--model", "model_name", default=None, type=click.Choice(MODEL_NAMES), help="Simulate a fresh bank from this model (alternative to --bank).")
@click.option("--bank", "bank_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Existing bank.csv to weight instead of simulating.")
@click.option("--n", type=int, default=None, help="Bank size when simulating. [default: 10000]")
@click.option("--s-obs", default=None, help="Comma-separated observed summary vector.")
@click.option("--obs-theta", default=None, help="Simulate the observed dataset at this parameter instead of passing --s-obs.")
@click.option("--accept-count", type=int, default=None, help="Particles the kernel bandwidth admits. [default: 100]")
@click.option("--kernel", type=click.Choice(KERNEL_FAMILIES), default=None, help="[default: epanechnikov]")
@click.pass_obj
def abc_run(obj, model_name, bank_path, n, s_obs, obs_theta, accept_count, kernel):
    """Weight a bank against observed summaries and write weighted.csv."""
    t0 = time.perf_counter()
    section = obj["file"].get("abc", {})
    n = int(_resolve(n, section, "n", 10_000))
    accept_count = int(_resolve(accept_count, section, "accept_count", 100))
    kernel = _resolve(kernel, section, "kernel", "epanechnikov")
    s_obs = _resolve(s_obs, section, "s_obs", None)
    obs_theta = _resolve(obs_theta, section, "obs_theta", None)
    bank_path = _resolve(bank_path, section, "bank", None)

    if (model_name is None) == (bank_path is None):
        raise ConfigError("pass exactly one of --model or --bank")
    if bank_path is not None:
        thetas, summaries, names = _split_bank(Path(bank_path))
        bank = ParticleSet(thetas=thetas, summaries=summaries,
                           weights=np.ones(thetas.shape[0]))
    else:
        model = _build_model(obj, model_name)
        bank = model.sample_particles(n, obj["seed"])
        names = model.prior.names

    if (s_obs is None) == (obs_theta is None):
        raise ConfigError("pass exactly one of --s-obs or --obs-theta")
    if s_obs is not None:
        target = _parse_floats(str(s_obs), "--s-obs")
    else:
        if model_name is None:
            raise ConfigError("--obs-theta needs --model to simulate the dataset")
        fixed = _parse_floats(str(obs_theta), "--obs-theta")
        target = np.atleast_1d(model.summarize(model.simulate(fixed, observed_stream(obj["seed"]))))
    if target.size != bank.summary_dim:
        raise ConfigError(f"observed summary needs {bank.summary_dim} values")

    approx = weight_bank(bank, target, accept_count=accept_count, kernel_family=kernel)
    header = [f"theta_{name}" for name in names]
    header += [f"s{j + 1}" for j in range(bank.summary_dim)]
    header.append("weight")
    path = obj["out"] / "weighted.csv"
    count = _write_csv(
        path, header,
        np.column_stack([bank.thetas, bank.summaries, approx.particles.weights]),
    )
    resolved = {"seed": obj["seed"], "threads": obj["threads"], "model": model_name,
                "bank": None if bank_path is None else str(bank_path), "n": int(bank.n),
                "accept_count": accept_count, "kernel": kernel,
                "s_obs": [float(v) for v in target],
                "obs_theta": None if obs_theta is None else str(obs_theta)}
    _tool_manifest(obj["out"], "weighted", "abc run", resolved, kernel=kernel,
                   counts={"particles": count, "accepted": int(approx.accept_count)},
                   estimators=["rejection"], flags={},
                   files={"weighted.csv": {"rows": count}},
                   wall=time.perf_counter() - t0)
    click.echo(f"wrote {path} ({approx.accept_count} of {count} particles accepted)")


@main.command("recalibrate")
@click.option("--bank", "bank_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Bank CSV (theta_* and s* columns; weights are refit).")
@click.option("--s-obs", required=True, help="Comma-separated observed summary vector.")
@click.option("--accept-count", type=int, default=None, help="[default: 100]")
@click.option("--kernel", type=click.Choice(KERNEL_FAMILIES), default=None, help="[default: epanechnikov]")
@click.option("--estimator", type=click.Choice(ESTIMATORS), default=None, help="[default: ecdf]")
@click.option("--m-local", type=int, default=None, help="Neighborhood size for the leave-one-out marginals. [default: accept-count]")
@click.option("--p-adjust", type=click.Choice(P_ADJUSTMENTS), default=None, help="[default: none]")
@click.option("--log-margins", default=None, help="Comma-separated 0/1 flags marking strictly positive margins.")
@click.pass_obj
def recalibrate_cmd(obj, bank_path, s_obs, accept_count, kernel, estimator,
                    m_local, p_adjust, log_margins):
    """Recalibrate a weighted approximation and write recalibrated.csv."""
    t0 = time.perf_counter()
    section = obj["file"].get("recalibrate", {})
    accept_count = int(_resolve(accept_count, section, "accept_count", 100))
    kernel = _resolve(kernel, section, "kernel", "epanechnikov")
    estimator = _resolve(estimator, section, "estimator", "ecdf")
    p_adjust = _resolve(p_adjust, section, "p_adjust", "none")
    m_local = _resolve(m_local, section, "m_local", None)
    log_margins = _resolve(log_margins, section, "log_margins", None)

    thetas, summaries, names = _split_bank(Path(bank_path))
    target = _parse_floats(str(s_obs), "--s-obs")
    if target.size != summaries.shape[1]:
        raise ConfigError(f"--s-obs needs {summaries.shape[1]} values")
    flags_vec = None
    if log_margins is not None:
        flags_vec = _parse_floats(str(log_margins), "--log-margins").astype(bool)

    bank = ParticleSet(thetas=thetas, summaries=summaries, weights=np.ones(thetas.shape[0]))
    approx = weight_bank(bank, target, accept_count=accept_count, kernel_family=kernel)
    result = recalibrate(
        approx,
        estimator=estimator,
        m_local=None if m_local is None else int(m_local),
        p_adjust=p_adjust,
        log_margins=flags_vec,
    )
    header = [f"theta_hat_{name}" for name in names]
    header += [f"p_{name}" for name in names]
    header += [f"p_raw_{name}" for name in names]
    header.append("weight")
    path = obj["out"] / "recalibrated.csv"
    count = _write_csv(
        path, header,
        np.column_stack([result.theta_hat, result.p, result.p_raw, result.weights]),
    )
    resolved = {"seed": obj["seed"], "threads": obj["threads"], "bank": str(bank_path),
                "s_obs": [float(v) for v in target], "accept_count": accept_count,
                "kernel": kernel, "estimator": estimator,
                "m_local": result.m_local, "p_adjust": p_adjust,
                "log_margins": None if flags_vec is None else [bool(b) for b in flags_vec]}
    _tool_manifest(obj["out"], "recalibrated", "recalibrate", resolved, kernel=kernel,
                   counts={"particles": int(bank.n), "accepted": count},
                   estimators=[estimator],
                   flags={"degenerate_local": int(np.sum(result.flags != 0))},
                   files={"recalibrated.csv": {"rows": count}},
                   wall=time.perf_counter() - t0)
    click.echo(f"wrote {path} ({count} recalibrated particles)")


@main.group()
def diagnose():
    """Calibration diagnostics."""


@diagnose.command("coverage")
@click.option("--model", "model_name", default="conjugate-normal", type=click.Choice(MODEL_NAMES), show_default=True)
@click.option("--replicates", type=int, default=None, help="[default: 200]")
@click.option("--n", type=int, default=None, help="Bank size per replicate. [default: 1000]")
@click.option("--accept-count", type=int, default=None, help="[default: 100]")
@click.option("--kernel", type=click.Choice(KERNEL_FAMILIES), default=None, help="[default: epanechnikov]")
@click.option("--estimator", type=click.Choice(ESTIMATORS), default=None, help="[default: ecdf]")
@click.option("--interval-level", type=float, default=None, help="[default: 0.9]")
@click.pass_obj
def diagnose_coverage(obj, model_name, replicates, n, accept_count, kernel,
                      estimator, interval_level):
    """Replay the ABC procedure over prior draws and report coverage."""
    t0 = time.perf_counter()
    section = obj["file"].get("coverage", {})
    replicates = int(_resolve(replicates, section, "replicates", 200))
    n = int(_resolve(n, section, "n", 1000))
    accept_count = int(_resolve(accept_count, section, "accept_count", 100))
    kernel = _resolve(kernel, section, "kernel", "epanechnikov")
    estimator = _resolve(estimator, section, "estimator", "ecdf")
    interval_level = float(_resolve(interval_level, section, "interval_level", 0.9))
    model = _build_model(obj, model_name)

    def procedure(dataset, rng):
        s = np.atleast_1d(model.summarize(dataset))
        bank = model.sample_particles(n, int(rng.integers(2**62)))
        approx = weight_bank(bank, s, accept_count=accept_count, kernel_family=kernel)
        return target_marginals(approx, estimator=estimator)

    report = coverage_diagnostic(
        model, procedure, n_reps=replicates, seed=obj["seed"],
        interval_level=interval_level,
    )
    names = model.prior.names
    p_path = obj["out"] / "p_values.csv"
    p_rows = _write_csv(p_path, [f"p_{name}" for name in names], report.p)
    cov_rows = [
        (
            names[j],
            float(report.coverage[j]),
            interval_level,
            report.reports[j].d_stat,
            report.reports[j].p_value,
            report.reports[j].mean,
            report.reports[j].skewness,
            report.n_used,
        )
        for j in range(len(names))
    ]
    cov_path = obj["out"] / "coverage.csv"
    _write_csv(
        cov_path,
        ["margin", "coverage", "interval_level", "ks_d", "ks_p", "mean_p",
         "skewness", "n_used"],
        cov_rows,
    )
    resolved = {"seed": obj["seed"], "threads": obj["threads"], "model": model_name,
                "replicates": replicates, "n": n, "accept_count": accept_count,
                "kernel": kernel, "estimator": estimator,
                "interval_level": interval_level}
    _tool_manifest(obj["out"], "coverage", "diagnose coverage", resolved, kernel=kernel,
                   counts={"replicates": replicates, "used": report.n_used},
                   estimators=[estimator], flags={},
                   files={"coverage.csv": {"rows": len(cov_rows)},
                          "p_values.csv": {"rows": p_rows}},
                   wall=time.perf_counter() - t0)
    for j, name in enumerate(names):
        click.echo(
            f"{name}: coverage {report.coverage[j]:.3f} at level {interval_level}, "
            f"KS p {report.reports[j].p_value:.3g}"
        )
    click.echo(f"wrote {cov_path} and {p_path}")


def _experiment_config(obj, name, paper_scale, replicates, n, accept_count,
                       m_local, kernel, estimator, p_adjust, grid):
    from .experiments.common import ExperimentConfig

    section = obj["file"].get(name, {})
    grid = _resolve(grid, section, "grid", None)
    if isinstance(grid, str):
        grid = tuple(int(v) for v in _parse_floats(grid, "--grid"))
    return ExperimentConfig(
        experiment=name,
        out_dir=obj["out"],
        seed=obj["seed"],
        threads=obj["threads"],
        paper_scale=bool(_resolve(paper_scale or None, section, "paper_scale", False)),
        n=_resolve(n, section, "n", None),
        accept_count=_resolve(accept_count, section, "accept_count", None),
        m_local=_resolve(m_local, section, "m_local", None),
        kernel=_resolve(kernel, section, "kernel", None),
        estimator=_resolve(estimator, section, "estimator", None),
        p_adjust=_resolve(p_adjust, section, "p_adjust", None),
        replicates=_resolve(replicates, section, "replicates", None),
        grid=None if grid is None else tuple(grid),
        model=dict(section.get("model", {})),
    )


def _experiment_options(f):
    options = [
        click.option("--paper-scale", is_flag=True, default=False, help="Run the full-size study instead of the desk-scale default."),
        click.option("--replicates", type=int, default=None),
        click.option("--n", type=int, default=None, help="Bank or auxiliary-sample size."),
        click.option("--accept-count", type=int, default=None),
        click.option("--m-local", type=int, default=None),
        click.option("--kernel", type=click.Choice(KERNEL_FAMILIES), default=None),
        click.option("--estimator", type=click.Choice(ESTIMATORS), default=None),
        click.option("--p-adjust", type=click.Choice(P_ADJUSTMENTS), default=None),
        click.option("--grid", default=None, help="Comma-separated accepted-count grid (twisted only)."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _echo_run(result) -> None:
    for name, path in sorted(result["paths"].items()):
        click.echo(f"wrote {path}")
    click.echo(f"wall {result['manifest']['wall_seconds']:.1f}s")


@main.group()
def experiment():
    """Built-in study drivers."""


@experiment.command("lognormal")
@_experiment_options
@click.pass_obj
def experiment_lognormal(obj, **kw):
    """Gaussian auxiliary recalibration of a lognormal-sum analysis."""
    from .experiments.lognormal import run_lognormal_experiment

    _echo_run(run_lognormal_experiment(_experiment_config(obj, "lognormal", **kw)))


@experiment.command("twisted")
@_experiment_options
@click.pass_obj
def experiment_twisted(obj, **kw):
    """MSE study of seven pipelines on the twisted-normal posterior."""
    from .experiments.twisted import run_twisted_experiment

    _echo_run(run_twisted_experiment(_experiment_config(obj, "twisted", **kw)))


@experiment.command("stereo")
@_experiment_options
@click.pass_obj
def experiment_stereo(obj, **kw):
    """Shape-parameter study of the slab section model."""
    from .experiments.stereo import run_stereo_experiment

    _echo_run(run_stereo_experiment(_experiment_config(obj, "stereo", **kw)))


if __name__ == "__main__":
    main()
