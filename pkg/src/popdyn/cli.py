"""Command-line driver: models, simulation, datasets, training, sampling, evaluation.

Exit status: 0 success, 2 usage error, 3 data/model/file error, 4 numeric
divergence. A ``--config`` JSON document may supply any option (keys use
either dashes or underscores); explicit flags override it.
"""
from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .crn import BUILTIN_NAMES, ModelError, builtin_model, parse_network
from .crn.network import SimGrid
from .fileformat import FileFormatError

log = logging.getLogger("popdyn")

EXIT_DATA = 3
EXIT_DIVERGED = 4


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        from .gan.train import TrainingDiverged

        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (TrainingDiverged, ArithmeticError) as exc:
            _fail(EXIT_DIVERGED, f"numeric divergence: {exc}")
        except (ModelError, FileFormatError, OSError, ValueError, KeyError, TypeError) as exc:
            _fail(EXIT_DATA, str(exc))

    return wrapper


def _load_config(ctx, _param, value):
    if value is None:
        return None
    try:
        data = json.loads(Path(value).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.BadParameter(f"cannot read config: {exc}") from None
    if not isinstance(data, dict):
        raise click.BadParameter("config must be a JSON object")
    flat = {k.replace("-", "_"): v for k, v in data.items()}
    ctx.default_map = {name: flat for name in ctx.command.commands} if isinstance(ctx.command, click.Group) else flat
    return value


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _floats(text) -> tuple[float, ...]:
    if text is None:
        return ()
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)


def _resolve_model(model: str, grid_dt=None, grid_h=None):
    """Return (network, grid, library entry or None) for a built-in name or a model file."""
    entry = None
    if model.lower().replace("_", "-") in BUILTIN_NAMES:
        entry = builtin_model(model)
        net = entry.network
    else:
        path = Path(model)
        if not path.exists():
            raise ModelError(f"{model!r} is neither a built-in model ({', '.join(BUILTIN_NAMES)}) nor a file")
        net = parse_network(path.read_text())
    grid = net.grid or SimGrid()
    if grid_dt is not None or grid_h is not None:
        grid = SimGrid(grid.t0, grid.dt if grid_dt is None else grid_dt, grid.H if grid_h is None else grid_h)
    return net, grid, entry


def _model_options(fn):
    fn = click.option("--grid-h", type=int, default=None, help="Override the number of grid steps H.")(fn)
    fn = click.option("--grid-dt", type=float, default=None, help="Override the grid spacing.")(fn)
    fn = click.option("--model", required=True, help=f"Built-in model ({', '.join(BUILTIN_NAMES)}) or model file.")(fn)
    return fn


_seed = click.option("--seed", type=int, required=True, help="Random seed (required).")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", callback=_load_config, is_eager=True, expose_value=False,
              type=click.Path(dir_okay=False), help="JSON file supplying option values.")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Build and evaluate generative abstractions of reaction networks."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@main.command()
@_model_options
@_guarded
def validate(model, grid_dt, grid_h):
    """Parse a model, check it and print a JSON summary."""
    net, grid, _ = _resolve_model(model, grid_dt, grid_h)
    report = {
        "name": net.name,
        "species": list(net.species),
        "observables": list(net.observables),
        "reactions": [r.name for r in net.reactions],
        "parameters": {p.name: (p.value if not p.varying else list(p.bounds)) for p in net.parameters},
        "n_obs": net.n_obs,
        "m_cond": net.m_cond,
        "grid": {"t0": grid.t0, "dt": grid.dt, "H": grid.H},
        "valid": True,
    }
    click.echo(json.dumps(report, indent=2))


def _write_dataset_cmd(model, grid_dt, grid_h, role, n_settings, k_per_setting, method, tau, seed, out,
                       bounds_from):
    from .dataset import generate_test_set, generate_training_set, read_dataset, write_dataset

    net, grid, entry = _resolve_model(model, grid_dt, grid_h)
    if entry is not None:
        dN, dk = entry.train_size if role == "train" else entry.test_size
    else:
        dN, dk = ((1000, 50) if net.m_cond else (2000, 10)) if role == "train" else (25, 2000)
    N = n_settings or dN
    k = k_per_setting or dk
    if method == "tau" and tau is None:
        raise click.UsageError("--method tau needs --tau")
    if role == "train":
        ds = generate_training_set(net, grid, N, k, seed, method=method, tau=tau)
    else:
        bounds = read_dataset(bounds_from).bounds if bounds_from else None
        ds = generate_test_set(net, grid, N, k, seed, bounds=bounds, method=method, tau=tau)
    write_dataset(ds, out)
    click.echo(json.dumps({"out": str(out), "role": role, "N": N, "k": k, "H": grid.H, "model": net.name}))


def _dataset_options(fn):
    fn = click.option("--bounds-from", type=click.Path(dir_okay=False), default=None,
                      help="Training set whose scaling bounds a test set should reuse.")(fn)
    fn = click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output dataset file.")(fn)
    fn = _seed(fn)
    fn = click.option("--tau", type=float, default=None, help="Leap size for --method tau.")(fn)
    fn = click.option("--method", type=click.Choice(["ssa", "tau"]), default="ssa", show_default=True)(fn)
    fn = click.option("--k-per-setting", type=int, default=None, help="Replicas per setting.")(fn)
    fn = click.option("--n-settings", type=int, default=None, help="Number of initial settings.")(fn)
    return fn


@main.command()
@_model_options
@click.option("--role", type=click.Choice(["train", "test"]), default="train", show_default=True)
@_dataset_options
@_guarded
def simulate(model, grid_dt, grid_h, role, n_settings, k_per_setting, method, tau, seed, out, bounds_from):
    """Simulate trajectories into a dataset file."""
    _write_dataset_cmd(model, grid_dt, grid_h, role, n_settings, k_per_setting, method, tau, seed, out,
                       bounds_from)


@main.command("make-dataset")
@_model_options
@click.argument("role", type=click.Choice(["train", "test"]), required=False, default="train")
@_dataset_options
@_guarded
def make_dataset(model, grid_dt, grid_h, role, n_settings, k_per_setting, method, tau, seed, out, bounds_from):
    """Build a training or test set with the model's default sizes.

    Defaults: training 2000x10 (1000x50 when parameters vary), test 25x2000.
    """
    _write_dataset_cmd(model, grid_dt, grid_h, role, n_settings, k_per_setting, method, tau, seed, out,
                       bounds_from)


@main.command()
@click.option("--dataset", required=True, type=click.Path(dir_okay=False), help="Training set.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output weights file.")
@_seed
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--batch-size", type=int, default=256, show_default=True)
@click.option("--lambda-gp", type=float, default=10.0, show_default=True)
@click.option("--n-critic", type=int, default=5, show_default=True)
@click.option("--noise-dim", type=int, default=480, show_default=True)
@click.option("--lr", type=float, default=1e-4, show_default=True)
@click.option("--embed-channels", type=int, default=512, show_default=True)
@click.option("--generator-filters", default=None, help="Comma-separated deconvolution filters.")
@click.option("--critic-filters", default=None, help="Comma-separated critic filters.")
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None,
              help="Training log CSV (default: <out>.log.csv).")
@_guarded
def train(dataset, out, seed, epochs, batch_size, lambda_gp, n_critic, noise_dim, lr, embed_channels,
          generator_filters, critic_filters, log_path):
    """Train a generator on a dataset; writes weights and a loss log."""
    from .dataset import read_dataset
    from .gan import CriticConfig, GeneratorConfig, TrainConfig, save_params
    from .gan import train as run_training

    ds = read_dataset(dataset)
    H = ds.grid.H
    gf, cf = (128, 256, 256, 128), (64, 64)
    if ds.model in BUILTIN_NAMES or ds.model.replace("_", "-") in BUILTIN_NAMES:
        entry = builtin_model(ds.model)
        gf, cf = entry.generator_filters, entry.critic_filters
    gf = _ints(generator_filters) if generator_filters else gf
    cf = _ints(critic_filters) if critic_filters else cf
    gcfg = GeneratorConfig(ds.n_obs, ds.m_cond, H, noise_dim=noise_dim, embed_channels=embed_channels,
                           deconv_filters=gf)
    ccfg = CriticConfig(ds.n_obs, ds.m_cond, H, conv_filters=cf)
    tcfg = TrainConfig(lam=lambda_gp, n_critic=n_critic, m_batch=batch_size, epochs=epochs, lr=lr, seed=seed)
    gen, tlog = run_training(ds, gcfg, ccfg, tcfg)
    provenance = {
        "dataset": {"model": ds.model, "N": ds.N, "k": ds.k, "seed": ds.seed},
        "train": tcfg.to_dict(),
        "observables": list(ds.observables),
        "grid": {"t0": ds.grid.t0, "dt": ds.grid.dt, "H": H},
        "model_source": ds.model_source,
    }
    save_params(gen, out, ds.bounds, provenance)
    log_path = log_path or f"{out}.log.csv"
    tlog.write_csv(log_path, include_time=False)
    # wall-clock times are not reproducible, so they go to a separate sidecar
    tlog.write_csv(f"{log_path}.timing", include_time=True)
    click.echo(json.dumps({"out": str(out), "log": str(log_path), "generator_updates": tlog.generator_updates,
                           "final_critic_loss": tlog.critic_loss[-1] if len(tlog) else None}))


def _load_generator(weights):
    from .gan import Generator, load_params

    saved = load_params(weights)
    if not isinstance(saved.module, Generator):
        raise FileFormatError(f"{weights}: does not hold a generator")
    if saved.bounds is None:
        raise FileFormatError(f"{weights}: no scaling bounds stored")
    return saved


def _read_settings(path):
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return [(_floats(d["s0"]), _floats(d.get("theta", ()))) for d in data]


@main.command()
@click.option("--weights", required=True, type=click.Path(dir_okay=False))
@click.option("--s0", default=None, help="Observed initial state, comma separated.")
@click.option("--theta", default=None, help="Varying parameters, comma separated.")
@click.option("--settings", "settings_file", type=click.Path(dir_okay=False), default=None,
              help='JSON list of {"s0": [...], "theta": [...]} objects.')
@click.option("-p", "--n-samples", "p", type=int, default=2000, show_default=True,
              help="Trajectories per setting.")
@_seed
@click.option("--round/--no-round", "round_", default=False, help="Round outputs to integers.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output .npy file.")
@_guarded
def generate(weights, s0, theta, settings_file, p, seed, round_, out):
    """Sample abstract trajectories; writes a [settings, p, H+1, n_obs] .npy array."""
    from .gan import sample_trajectories

    saved = _load_generator(weights)
    if settings_file:
        settings = _read_settings(settings_file)
    elif s0 is not None:
        settings = [(_floats(s0), _floats(theta))]
    else:
        raise click.UsageError("give --s0 (and --theta) or --settings")
    arr = np.stack([
        sample_trajectories(saved.module, s, t, p, saved.bounds, seed + i, round=round_)
        for i, (s, t) in enumerate(settings)
    ])
    with open(out, "wb") as fh:
        np.save(fh, arr)
    click.echo(json.dumps({"out": str(out), "shape": list(arr.shape)}))


def _parse_property(text: str):
    from .evaluate import AbsorbingValidity, EventuallyAlways

    parts = text.split(":")
    if len(parts) == 3 and parts[1] == "absorbing":
        return AbsorbingValidity(parts[0], float(parts[2]))
    if len(parts) == 4 and parts[1] == "eventually-always":
        return EventuallyAlways(parts[0], parts[2], float(parts[3]))
    raise click.BadParameter(
        f"{text!r}: use SPECIES:absorbing:VALUE or SPECIES:eventually-always:<|>:THRESHOLD"
    )


@main.command()
@click.option("--test-dataset", required=True, type=click.Path(dir_okay=False))
@click.option("--weights", type=click.Path(dir_okay=False), default=None,
              help="Generator to evaluate.")
@click.option("--against", type=click.Path(dir_okay=False), default=None,
              help="Compare with another dataset's trajectories instead of a generator.")
@_seed
@click.option("--n-perm", type=int, default=999, show_default=True, help="Energy-test permutations.")
@click.option("--energy-samples", type=int, default=200, show_default=True,
              help="Per-set subsample size for the energy test.")
@click.option("--no-energy", is_flag=True, help="Skip the energy test.")
@click.option("--property", "properties", multiple=True,
              help="SPECIES:absorbing:VALUE or SPECIES:eventually-always:<|>:THRESHOLD (repeatable).")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
@_guarded
def evaluate(test_dataset, weights, against, seed, n_perm, energy_samples, no_energy, properties, out):
    """Histogram errors, energy tests and property satisfaction."""
    from .dataset import read_dataset
    from .evaluate import check_property, energy_test, histogram_errors
    from .evaluate import export
    from .gan import sample_trajectories

    if (weights is None) == (against is None):
        raise click.UsageError("give exactly one of --weights or --against")
    props = [_parse_property(t) for t in properties]
    test = read_dataset(test_dataset)
    cond, real = test.by_setting()
    n_obs = test.n_obs
    if weights is not None:
        saved = _load_generator(weights)
        if saved.bounds != test.bounds:
            log.warning("test set scaling bounds differ from the generator's; using the generator's")
        bounds = saved.bounds
        fake = np.stack([
            sample_trajectories(saved.module, c[:n_obs], c[n_obs:], test.k, bounds, seed + i)
            for i, c in enumerate(cond)
        ])
    else:
        other = read_dataset(against)
        bounds = test.bounds
        _, fake = other.by_setting()
    report = histogram_errors(real, fake, bounds, test.observables)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    export.write_error_csv(report, outdir / "errors.csv")
    names = [f"s0_{s}" for s in test.observables] + [f"theta_{i}" for i in range(test.m_cond)]
    export.write_landscape_csv(report, cond, names, outdir / "landscape.csv")
    summary = {"errors": report.summary(), "n_settings": int(real.shape[0]), "samples": int(real.shape[1])}
    if not no_energy:
        en = energy_test(real, fake, n_perm=n_perm, seed=seed, max_samples=energy_samples,
                         observables=test.observables)
        export.write_energy_csv(en, outdir / "energy.csv")
        summary["energy"] = en.summary()
    if props:
        rows = []
        flat_real = real.reshape(-1, *real.shape[2:])
        flat_fake = fake.reshape(-1, *fake.shape[2:])
        for text, prop in zip(properties, props):
            for src, trajs in (("ssa", flat_real), ("abstract", flat_fake)):
                rows.append({"property": text, "source": src,
                             "fraction": check_property(trajs, test.observables, prop)})
        export.write_property_csv(rows, outdir / "properties.csv")
        summary["properties"] = rows
    export.write_json(summary, outdir / "summary.json")
    click.echo(json.dumps({"out": str(outdir), "mean_wasserstein": summary["errors"]["wasserstein"]["overall_mean"]}))


@main.command()
@_model_options
@click.option("--weights", type=click.Path(dir_okay=False), default=None,
              help="Generator to time (omit to time simulators only).")
@click.option("--batch-sizes", default="1,200,2000", show_default=True)
@click.option("--methods", default=None, help="Comma-separated subset of ssa,tau,abstract.")
@click.option("--tau", type=float, default=None, help="Leap size (default dt/4).")
@_seed
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Timing CSV (default: stdout).")
@_guarded
def bench(model, grid_dt, grid_h, weights, batch_sizes, methods, tau, seed, out):
    """Per-trajectory timings of SSA, tau-leaping and the generator (single worker)."""
    from .evaluate import export
    from .evaluate.timing import timing_benchmark

    net, grid, _ = _resolve_model(model, grid_dt, grid_h)
    gen = bounds = None
    if weights:
        saved = _load_generator(weights)
        gen, bounds = saved.module, saved.bounds
    chosen = tuple(methods.split(",")) if methods else (("ssa", "tau", "abstract") if gen else ("ssa", "tau"))
    table = timing_benchmark(net, grid, gen, bounds, _ints(batch_sizes), seed=seed, tau=tau, methods=chosen)
    if out:
        export.write_timing_csv(table, out)
    else:
        w = click.get_text_stream("stdout")
        w.write(",".join(export.TIMING_COLUMNS) + "\n")
        for r in table.rows():
            w.write(",".join(str(r[c]) for c in export.TIMING_COLUMNS) + "\n")


if __name__ == "__main__":  # pragma: no cover
    main()
