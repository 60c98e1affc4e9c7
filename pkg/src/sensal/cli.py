"""Operator command line: preprocessing, training, active learning, sweeps,
benchmarks and the labeling service.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
Progress goes to stderr; machine-readable results go to files/stdout.
"""

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, data, experiment, model, serial
from .experiment import ExperimentPlan
from .model import HarnetConfig


def _echo(msg: str) -> None:
    click.echo(msg, err=True)


def _load_plan(plan_path, seed) -> tuple[ExperimentPlan, dict]:
    overrides = {}
    plan_dict = {}
    if plan_path:
        cfgdoc = json.loads(Path(plan_path).read_text())
        plan_dict = cfgdoc.get("plan", cfgdoc)
        overrides = cfgdoc.get("model", {})
    plan = ExperimentPlan.from_dict(plan_dict)
    if seed is not None:
        plan = ExperimentPlan.from_dict({**plan.to_dict(), "seeds": (seed,)})
    return plan, overrides


def _model_config(store, overrides: dict) -> HarnetConfig:
    base = {
        "input_length": store.feature_length,
        "num_classes": len(store.classes),
    }
    base.update(overrides)
    return HarnetConfig.from_dict({**HarnetConfig(**base).to_dict(), **overrides})


def _write_run_config(out_dir: Path, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.json").write_text(json.dumps(payload, indent=2, sort_keys=True))


@click.group()
@click.version_option(__version__)
def cli():
    """Bayesian active learning for wearable sensor windows."""


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--keep-raw/--no-keep-raw", default=True, show_default=True)
@click.option("--standardize", is_flag=True, default=False)
def prep(manifest_path, out_dir, keep_raw, standardize):
    """Ingest a manifest and write a preprocessed window store."""
    manifest = data.DatasetManifest.from_file(manifest_path)
    streams = data.ingest(manifest)
    skipped = sum(s.skipped_rows for ss in streams.values() for s in ss)
    store = data.preprocess_and_store(
        streams,
        manifest.classes,
        window_seconds=manifest.window_seconds,
        target_hz=manifest.target_hz,
        keep_raw=keep_raw,
        standardize=standardize,
        manifest_dict=manifest.to_dict(),
    )
    data.save_store(store, out_dir)
    _write_run_config(
        Path(out_dir),
        {"command": "prep", "manifest": manifest.to_dict(), "keep_raw": keep_raw,
         "standardize": standardize},
    )
    n = sum(len(w) for w in store.users.values())
    _echo(f"prep: {n} windows across {len(store.users)} users "
          f"(skipped rows: {skipped}, compression: {store.provenance['compression_ratio']:.3f})")


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
def baseline(store_dir, plan_path, out_dir, seed):
    """Leave-one-user-out baseline training; saves per-user model bundles."""
    store = data.load_store(store_dir)
    plan, overrides = _load_plan(plan_path, seed)
    cfg = _model_config(store, overrides)
    out = Path(out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    rows = []
    for user in sorted(store.users):
        for s in plan.seeds:
            _echo(f"baseline: user {user} seed {s}")
            cell = experiment.train_baseline_loocv_cell(store, user, plan, s, cfg)
            model.save(cell.bundle, out / "models" / f"{user}_seed{s}.model")
            rows.append(cell.metrics)
    experiment.write_results(out / "baseline_results.tsv", rows)
    accs = [r.accuracy for r in rows]
    summary = {
        "mean_accuracy": float(np.mean(accs)),
        "mean_macro_f1": float(np.mean([r.macro_f1 for r in rows])),
        "per_user": {r.user: r.accuracy for r in rows},
    }
    (out / "baseline_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    _write_run_config(out, {"command": "baseline", "plan": plan.to_dict(),
                            "model": cfg.to_dict(), "store": str(store_dir)})
    _echo(f"baseline: mean accuracy {summary['mean_accuracy']:.4f}")


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--user", required=True)
@click.option("--eta", required=True, type=float)
@click.option("--fn", "function", required=True,
              type=click.Choice(["maxentropy", "bald", "varratio", "random"]))
@click.option("--oracle", type=click.Choice(["simulated", "http"]), default="simulated",
              show_default=True)
@click.option("--oracle-url", default="http://127.0.0.1:8000")
@click.option("--oracle-noise", type=float, default=0.0, show_default=True)
@click.option("--plan", "plan_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
def active(store_dir, model_path, user, eta, function, oracle, oracle_url,
           oracle_noise, plan_path, out_dir, seed):
    """One single-shot incremental active-learning round for one user."""
    store = data.load_store(store_dir)
    plan, _ = _load_plan(plan_path, seed)
    if user not in store.users:
        raise click.UsageError(f"unknown user {user!r}")
    if oracle == "http":
        _run_http_session(oracle_url, user, eta, function)
        return
    bundle = model.load(model_path)
    x_all, y_all = store.features(user)
    pool_idx, test_idx = experiment.split_pool_test(len(x_all), plan.pool_fraction, seed)
    if plan.pool_cap is not None:
        pool_idx = pool_idx[: plan.pool_cap]
    out = experiment.run_incremental(
        bundle,
        x_all[pool_idx],
        x_all[test_idx],
        y_all[test_idx],
        eta,
        function,
        experiment.simulated_oracle(y_all[pool_idx], oracle_noise, seed),
        plan,
        seed,
        user=user,
    )
    rows = [out["pre"], out["post"]]
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        experiment.write_results(Path(out_dir) / "active_results.tsv", rows)
        _write_run_config(Path(out_dir), {
            "command": "active", "plan": plan.to_dict(), "user": user, "eta": eta,
            "function": function, "oracle": oracle, "oracle_noise": oracle_noise,
            "seed": seed, "store": str(store_dir), "model": str(model_path),
        })
    payload = {
        "pre_accuracy": out["pre"].accuracy,
        "post_accuracy": out["post"].accuracy,
        "pre_macro_f1": out["pre"].macro_f1,
        "post_macro_f1": out["post"].macro_f1,
        "n_acquired": len(out["acquired"]),
        "n_skipped": len(out["skipped"]),
    }
    click.echo(json.dumps(payload, sort_keys=True))


def _run_http_session(url, user, eta, function):
    import time
    import urllib.request

    def post(path, body):
        req = urllib.request.Request(
            url + path, data=json.dumps(body).encode(), method="POST",
            headers={"Content-Type": "application/json"},
        )
        with urllib.request.urlopen(req) as resp:
            return json.loads(resp.read())

    def get(path):
        with urllib.request.urlopen(url + path) as resp:
            return json.loads(resp.read())

    sess = post("/session", {"eta": eta, "function": function, "user": user})
    sid = sess["session_id"]
    _echo(f"active: created session {sid} with {sess['k']} tasks; waiting for labels")
    while True:
        status = get(f"/session/{sid}/status")
        if status["model_version"] > 0:
            click.echo(json.dumps({"pre": status["pre"], "post": status["post"]},
                                  sort_keys=True))
            return
        time.sleep(2.0)


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--oracle-noise", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=None)
def sweep(store_dir, plan_path, out_dir, oracle_noise, seed):
    """Full (user, eta, function, seed) grid; emits a results table."""
    store = data.load_store(store_dir)
    plan, overrides = _load_plan(plan_path, seed)
    cfg = _model_config(store, overrides)
    rows = experiment.sweep(store, plan, cfg, oracle_noise)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    experiment.write_results(out / "results.tsv", rows)
    post = [r for r in rows if r.phase == "post" and not r.error]
    summary: dict = {"cells": len(post), "errors": sum(1 for r in rows if r.error)}
    by_key: dict = {}
    for r in post:
        by_key.setdefault((r.function, r.eta), []).append(r.accuracy)
    summary["mean_accuracy_by_function_eta"] = {
        f"{fn}@eta={eta:g}": float(np.mean(v)) for (fn, eta), v in sorted(by_key.items())
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    _write_run_config(out, {"command": "sweep", "plan": plan.to_dict(),
                            "model": cfg.to_dict(), "oracle_noise": oracle_noise,
                            "store": str(store_dir)})
    _echo(f"sweep: {len(post)} cells done, {summary['errors']} errors")


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path())
@click.option("--seed", type=int, default=0)
def bench(store_dir, model_path, plan_path, out_path, seed):
    """Wall-clock medians per preprocessing/inference/training operation."""
    from .signal import SensorWindow

    store = data.load_store(store_dir)
    plan, _ = _load_plan(plan_path, seed)
    bundle = model.load(model_path)
    raws = []
    for user in sorted(store.users):
        for fw in store.users[user]:
            raw = fw.meta.get("raw")
            if raw is not None:
                raws.append(SensorWindow(axes=raw, rate_hz=fw.rate_hz))
            if len(raws) >= 32:
                break
        if len(raws) >= 32:
            break
    if len(raws) < 10:
        raise click.ClickException("store lacks raw windows; re-run prep with --keep-raw")
    report = experiment.bench_timing(bundle, raws, plan)
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text)
    click.echo(text)


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--plan", "plan_path", type=click.Path(exists=True))
@click.option("--static-dir", type=click.Path(exists=True), default=None,
              help="Frontend assets to serve at /")
@click.option("--seed", type=int, default=0, show_default=True)
def serve(store_dir, model_path, port, host, plan_path, static_dir, seed):
    """Start the labeling oracle service (and optionally the web UI)."""
    import uvicorn

    from .service import create_app

    store = data.load_store(store_dir)
    plan, _ = _load_plan(plan_path, seed)
    bundle = model.load(model_path)
    app = create_app(store, bundle, plan, seed, static_dir=static_dir)
    _echo(f"serve: listening on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main():
    try:
        cli.main(standalone_mode=False)
    except click.UsageError as exc:
        _echo(f"usage error: {exc.format_message()}")
        sys.exit(1)
    except click.ClickException as exc:
        _echo(f"error: {exc.format_message()}")
        sys.exit(2)
    except (data.IngestError, serial.SerializationError, FileNotFoundError) as exc:
        _echo(f"data error: {exc}")
        sys.exit(2)
    except click.exceptions.Abort:
        sys.exit(1)
    except Exception as exc:  # noqa: BLE001
        _echo(f"runtime failure: {exc}")
        sys.exit(3)


if __name__ == "__main__":
    main()
