"""Experiment protocols: LOOCV baselines, single-shot incremental active
learning under the acquisition fraction eta, grid sweeps and timing runs."""

import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .acquire import AcquisitionBatch, predict_mc, select
from .data import WindowStore
from .model import HarnetConfig, ModelBundle, build, clone, train
from .signal import decimate, dwt_approx

# rng context tags for the two training phases under one experiment seed
BASELINE_CTX = 0
INCREMENTAL_CTX = 1
# test-window ids must never collide with pool ids in the MC streams
TEST_ID_OFFSET = 1_000_000

TIMING_FIELDS = (
    "inference_ms",
    "dwt_ms",
    "decimation_ms",
    "epoch_ms",
    "stochastic_pass_ms",
)


@dataclass
class ExperimentPlan:
    pool_fraction: float = 0.7
    eta_grid: tuple = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    functions: tuple = ("varratio",)
    baseline_epochs: int = 50
    incremental_epochs: int = 10
    t_passes: int = 10
    seeds: tuple = (0,)
    batch_size: int = 32
    pool_cap: int | None = None
    iterative_steps: int = 1  # 1 = the canonical single-shot protocol

    def __post_init__(self):
        if not (0.0 < self.pool_fraction < 1.0):
            raise ValueError("pool_fraction must be in (0, 1)")
        if min(self.baseline_epochs, self.incremental_epochs) < 1:
            raise ValueError("epoch counts must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        for key in ("eta_grid", "functions", "seeds"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class MetricsRecord:
    user: str
    eta: float
    function: str
    seed: int
    phase: str  # baseline | pre | post
    accuracy: float
    macro_f1: float
    per_class_f1: list
    confusion: list
    n_acquired: int = 0
    timings: dict = field(default_factory=dict)
    error: str = ""


def confusion_matrix(y_true, y_pred, num_classes: int) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[t, p] += 1
    return cm


def scores_from_confusion(cm: np.ndarray) -> tuple[float, float, list]:
    """(accuracy, macro_f1, per-class f1) from a confusion matrix."""
    total = cm.sum()
    acc = float(np.trace(cm) / total) if total else 0.0
    f1s = []
    for c in range(cm.shape[0]):
        tp = cm[c, c]
        fp = cm[:, c].sum() - tp
        fn = cm[c, :].sum() - tp
        denom = 2 * tp + fp + fn
        f1s.append(float(2 * tp / denom) if denom else 0.0)
    return acc, float(np.mean(f1s)), f1s


def evaluate(
    bundle: ModelBundle,
    x: np.ndarray,
    y: np.ndarray,
    t_passes: int,
    seed: int,
    *,
    user: str = "",
    eta: float = 0.0,
    function: str = "",
    phase: str = "baseline",
) -> MetricsRecord:
    """Argmax of the T-pass MC mean per window, scored against labels."""
    preds = np.empty(len(x), dtype=int)
    for i in range(len(x)):
        sample = predict_mc(bundle, x[i], t_passes, seed, window_id=TEST_ID_OFFSET + i)
        preds[i] = int(sample.mean.argmax())
    cm = confusion_matrix(y, preds, bundle.config.num_classes)
    acc, macro, f1s = scores_from_confusion(cm)
    return MetricsRecord(
        user=user,
        eta=eta,
        function=function,
        seed=seed,
        phase=phase,
        accuracy=acc,
        macro_f1=macro,
        per_class_f1=f1s,
        confusion=cm.tolist(),
    )


def split_pool_test(n: int, pool_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle; first ceil(fraction*n) indices to pool, rest to test."""
    if n < 2:
        raise ValueError(f"need at least 2 windows to split, got {n}")
    order = rngmod.stream(seed, rngmod.SPLIT).permutation(n)
    k = math.ceil(pool_fraction * n)
    return order[:k].copy(), order[k:].copy()


@dataclass
class BaselineCell:
    user: str
    seed: int
    bundle: ModelBundle
    pool_idx: np.ndarray
    test_idx: np.ndarray
    metrics: MetricsRecord


def train_baseline_loocv_cell(
    store: WindowStore,
    held_out_user: str,
    plan: ExperimentPlan,
    seed: int,
    model_config: HarnetConfig | None = None,
) -> BaselineCell:
    """Train on every other user, split the held-out user 70/30, evaluate."""
    users = sorted(store.users)
    if len(users) < 2:
        raise ValueError("LOOCV needs at least 2 users")
    train_parts = []
    for u in users:
        if u == held_out_user:
            continue
        xu, yu = store.features(u)
        labeled = yu >= 0
        if labeled.any():
            train_parts.append((xu[labeled], yu[labeled]))
    x_train = np.concatenate([p[0] for p in train_parts])
    y_train = np.concatenate([p[1] for p in train_parts])

    cfg = model_config or HarnetConfig(
        input_length=store.feature_length, num_classes=len(store.classes)
    )
    bundle = build(cfg, seed)
    train(bundle, x_train, y_train, plan.baseline_epochs, plan.batch_size, seed, BASELINE_CTX)

    x_held, y_held = store.features(held_out_user)
    pool_idx, test_idx = split_pool_test(len(x_held), plan.pool_fraction, seed)
    if plan.pool_cap is not None:
        pool_idx = pool_idx[: plan.pool_cap]
    metrics = evaluate(
        bundle,
        x_held[test_idx],
        y_held[test_idx],
        plan.t_passes,
        seed,
        user=held_out_user,
        phase="baseline",
    )
    return BaselineCell(held_out_user, seed, bundle, pool_idx, test_idx, metrics)


def train_baseline_loocv(
    store: WindowStore,
    plan: ExperimentPlan,
    model_config: HarnetConfig | None = None,
) -> dict:
    """One BaselineCell per (user, seed); users without windows are skipped."""
    cells = {}
    for user in sorted(store.users):
        if not store.users[user]:
            continue
        for seed in plan.seeds:
            cells[(user, seed)] = train_baseline_loocv_cell(store, user, plan, seed, model_config)
    return cells


def run_incremental(
    bundle: ModelBundle,
    pool_x: np.ndarray,
    test_x: np.ndarray,
    test_y: np.ndarray,
    eta: float,
    function: str,
    oracle,
    plan: ExperimentPlan,
    seed: int,
    *,
    user: str = "",
    batch: AcquisitionBatch | None = None,
    pre: MetricsRecord | None = None,
) -> dict:
    """Single-shot protocol: score, acquire, fine-tune, evaluate before/after.

    `oracle(pool_index) -> class index or None` supplies labels; None marks
    a refusal and the window is skipped. The input bundle is not mutated.
    `batch`/`pre` allow a sweep to reuse scoring and the pre-update
    evaluation, which are identical across eta cells by construction.
    """
    if batch is None:
        batch = select(pool_x, bundle, function, eta, plan.t_passes, seed)
    else:
        k = math.ceil(eta * len(pool_x))
        batch = AcquisitionBatch(
            scores=batch.scores,
            ranking=batch.ranking,
            selected=batch.ranking[:k].copy(),
            eta=eta,
            function_name=batch.function_name,
        )
    if pre is None:
        pre = evaluate(
            bundle, test_x, test_y, plan.t_passes, seed,
            user=user, eta=eta, function=function, phase="pre",
        )
    # Fresh copy per cell: a sweep reuses one pre-evaluation across etas.
    pre = replace(pre, per_class_f1=list(pre.per_class_f1), timings=dict(pre.timings))
    acquired_idx, acquired_y, skipped = [], [], []
    for idx in batch.selected:
        label = oracle(int(idx))
        if label is None:
            skipped.append(int(idx))
            continue
        acquired_idx.append(int(idx))
        acquired_y.append(int(label))

    updated = clone(bundle)
    if acquired_idx:
        if plan.iterative_steps > 1:
            _iterative_finetune(updated, pool_x, acquired_idx, acquired_y, plan, seed)
        else:
            train(
                updated,
                pool_x[acquired_idx],
                np.array(acquired_y),
                plan.incremental_epochs,
                plan.batch_size,
                seed,
                INCREMENTAL_CTX,
            )
    post = evaluate(
        updated, test_x, test_y, plan.t_passes, seed,
        user=user, eta=eta, function=function, phase="post",
    )
    for rec in (pre, post):
        rec.user, rec.eta, rec.function, rec.seed = user, eta, function, seed
        rec.n_acquired = len(acquired_idx)
    return {
        "pre": pre,
        "post": post,
        "bundle": updated,
        "batch": batch,
        "acquired": acquired_idx,
        "skipped": skipped,
    }


def _iterative_finetune(bundle, pool_x, acquired_idx, acquired_y, plan, seed):
    """Exploration mode: spread the fine-tune over several equal chunks."""
    steps = plan.iterative_steps
    per = max(1, math.ceil(len(acquired_idx) / steps))
    for s in range(steps):
        chunk = slice(0, (s + 1) * per)
        idx = acquired_idx[chunk]
        if not idx:
            break
        train(
            bundle,
            pool_x[idx],
            np.array(acquired_y[chunk]),
            max(1, plan.incremental_epochs // steps),
            plan.batch_size,
            seed,
            INCREMENTAL_CTX + 1 + s,
        )


def simulated_oracle(hidden_labels: np.ndarray, noise_rate: float = 0.0, seed: int = 0):
    """Oracle answering with ground truth; with probability noise_rate the
    answer flips to a uniformly random wrong class."""
    num_classes = int(hidden_labels.max()) + 1 if len(hidden_labels) else 0

    def oracle(index: int):
        true = int(hidden_labels[index])
        if true < 0:
            return None
        if noise_rate > 0.0:
            r = rngmod.stream(seed, rngmod.ORACLE_NOISE, index)
            if r.random() < noise_rate:
                wrong = [c for c in range(num_classes) if c != true]
                if wrong:
                    return int(wrong[r.integers(len(wrong))])
        return true

    return oracle


def sweep(
    store: WindowStore,
    plan: ExperimentPlan,
    model_config: HarnetConfig | None = None,
    oracle_noise: float = 0.0,
    users: list | None = None,
) -> list[MetricsRecord]:
    """Full (user, eta, function, seed) grid from shared baseline checkpoints.

    Every eta cell of a (user, function, seed) triple starts from the same
    baseline model, so columns are comparable. Per-cell failures are
    recorded in the row and the sweep continues.
    """
    rows: list[MetricsRecord] = []
    for user in users or sorted(store.users):
        x_all, y_all = store.features(user)
        for seed in plan.seeds:
            try:
                cell = train_baseline_loocv_cell(store, user, plan, seed, model_config)
            except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
                for eta in plan.eta_grid:
                    for fn in plan.functions:
                        rows.append(_error_row(user, eta, fn, seed, str(exc)))
                continue
            pool_x = x_all[cell.pool_idx]
            pool_hidden = y_all[cell.pool_idx]
            test_x, test_y = x_all[cell.test_idx], y_all[cell.test_idx]
            assert not set(cell.pool_idx) & set(cell.test_idx)
            oracle = simulated_oracle(pool_hidden, oracle_noise, seed)
            for fn in plan.functions:
                batch = select(pool_x, cell.bundle, fn, 1.0, plan.t_passes, seed)
                pre = None
                for eta in plan.eta_grid:
                    try:
                        out = run_incremental(
                            cell.bundle, pool_x, test_x, test_y, eta, fn, oracle,
                            plan, seed, user=user, batch=batch, pre=pre,
                        )
                    except Exception as exc:  # noqa: BLE001
                        rows.append(_error_row(user, eta, fn, seed, str(exc)))
                        continue
                    pre = out["pre"]
                    rows.append(out["pre"])
                    rows.append(out["post"])
    return rows


def _error_row(user, eta, fn, seed, message) -> MetricsRecord:
    return MetricsRecord(
        user=user, eta=eta, function=fn, seed=seed, phase="post",
        accuracy=float("nan"), macro_f1=float("nan"), per_class_f1=[], confusion=[],
        error=message,
    )


def bench_timing(
    bundle: ModelBundle,
    raw_windows: list,
    plan: ExperimentPlan,
) -> dict:
    """Median wall-clock per operation; report-only, no asserted targets.

    raw_windows: SensorWindow objects (>= 10 for stable medians).
    """
    if len(raw_windows) < 10:
        raise ValueError("need at least 10 sample windows for stable medians")

    feats = []
    dwt_times, dec_times = [], []
    for w in raw_windows:
        t0 = time.perf_counter()
        half = decimate(w, w.rate_hz / 2.0)
        dec_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        fw = dwt_approx(w)
        dwt_times.append(time.perf_counter() - t0)
        feats.append(fw.coefficients)
    # Feature windows at the model's input length for the network timings.
    L = bundle.config.input_length
    x = np.stack([f[:, :L] if f.shape[1] >= L else np.pad(f, ((0, 0), (0, L - f.shape[1]))) for f in feats])

    inf_times = []
    for i in range(len(x)):
        t0 = time.perf_counter()
        predict_mc(bundle, x[i], 1, seed=0, window_id=i)
        inf_times.append(time.perf_counter() - t0)

    pass_times = []
    for t in range(plan.t_passes):
        t0 = time.perf_counter()
        for i in range(len(x)):
            predict_mc(bundle, x[i], 1, seed=1, window_id=i)
        pass_times.append(time.perf_counter() - t0)
    total_acquisition_s = float(np.sum(pass_times))

    work = clone(bundle)
    y = np.zeros(len(x), dtype=int)
    epoch_times = []
    for e in range(3):
        t0 = time.perf_counter()
        train(work, x, y, 1, plan.batch_size, seed=0, context=90 + e)
        epoch_times.append(time.perf_counter() - t0)

    med = lambda v: float(np.median(v) * 1000.0)
    return {
        "inference_ms": med(inf_times),
        "dwt_ms": med(dwt_times),
        "decimation_ms": med(dec_times),
        "epoch_ms": med(epoch_times),
        "stochastic_pass_ms": med(pass_times),
        "t_passes": plan.t_passes,
        "total_acquisition_ms": total_acquisition_s * 1000.0,
        "pool_size": len(x),
    }


# ---------------------------------------------------------------------------
# Results table persistence

TABLE_COLUMNS = [
    "user",
    "eta",
    "function",
    "seed",
    "phase",
    "accuracy",
    "macro_f1",
    "per_class_f1",
    "n_acquired",
    "error",
] + list(TIMING_FIELDS)


def write_results(path, rows: list[MetricsRecord]) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(TABLE_COLUMNS) + "\n")
        for r in rows:
            rec = [
                r.user,
                f"{r.eta:g}",
                r.function,
                str(r.seed),
                r.phase,
                f"{r.accuracy:.10g}",
                f"{r.macro_f1:.10g}",
                ";".join(f"{v:.10g}" for v in r.per_class_f1),
                str(r.n_acquired),
                r.error,
            ]
            rec += [f"{r.timings[f]:.6g}" if f in r.timings else "" for f in TIMING_FIELDS]
            fh.write("\t".join(rec) + "\n")


def read_results(path) -> list[dict]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    header = lines[0].split("\t")
    return [dict(zip(header, ln.split("\t"))) for ln in lines[1:] if ln]
