"""HTTP oracle service: a human (or script) labels acquired windows and the
service fine-tunes the model once the whole batch is resolved.

The scoring, selection, fine-tuning and evaluation paths are the exact
functions the headless runner uses, with the same seed discipline, so a
session answered with ground truth reproduces the headless metrics
bit-for-bit.
"""

import threading
from dataclasses import dataclass, field, asdict

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .acquire import select
from .data import WindowStore
from .experiment import (
    INCREMENTAL_CTX,
    ExperimentPlan,
    MetricsRecord,
    evaluate,
    split_pool_test,
)
from .model import ModelBundle, clone, train
from .signal import SQRT2


class SessionRequest(BaseModel):
    eta: float
    function: str
    user: str


class LabelRequest(BaseModel):
    task_id: str
    class_index: int


class SkipRequest(BaseModel):
    task_id: str


@dataclass
class LabelTask:
    task_id: str
    pool_index: int
    score: float
    state: str = "pending"  # pending | labeled | skipped
    label: int | None = None


@dataclass
class Session:
    session_id: str
    user: str
    eta: float
    function: str
    seed: int
    tasks: list = field(default_factory=list)
    pool_x: np.ndarray | None = None
    test_x: np.ndarray | None = None
    test_y: np.ndarray | None = None
    raw_windows: list = field(default_factory=list)
    model_version: int = 0
    pre: MetricsRecord | None = None
    post: MetricsRecord | None = None
    retrained: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


def _metrics_dict(rec: MetricsRecord | None):
    if rec is None:
        return None
    d = asdict(rec)
    return d


def _display_waveform(fw) -> list:
    """Decimated raw samples when stored, else the Haar reconstruction."""
    raw = fw.meta.get("raw")
    if raw is None:
        raw = np.repeat(fw.coefficients / SQRT2, 2, axis=1)
    return [np.asarray(ax, dtype=float).tolist() for ax in raw]


def create_app(
    store: WindowStore,
    bundle: ModelBundle,
    plan: ExperimentPlan,
    seed: int,
    static_dir=None,
) -> FastAPI:
    app = FastAPI(title="sensal oracle service")
    sessions: dict[str, Session] = {}
    counter = {"n": 0}
    create_lock = threading.Lock()

    @app.get("/config")
    def config():
        return {
            "classes": store.classes,
            "users": sorted(store.users),
            "eta_default": 0.5,
            "functions": ["maxentropy", "bald", "varratio", "random"],
            "t_passes": plan.t_passes,
        }

    @app.post("/session")
    def create_session(req: SessionRequest):
        if req.user not in store.users:
            raise HTTPException(404, f"unknown user {req.user!r}")
        if not (0.0 <= req.eta <= 1.0):
            raise HTTPException(400, "eta must be in [0, 1]")
        with create_lock:
            counter["n"] += 1
            sid = f"s{counter['n']:04d}"
        x_all, _ = store.features(req.user)
        pool_idx, test_idx = split_pool_test(len(x_all), plan.pool_fraction, seed)
        if plan.pool_cap is not None:
            pool_idx = pool_idx[: plan.pool_cap]
        _, y_all = store.features(req.user)
        pool_x = x_all[pool_idx]
        test_x, test_y = x_all[test_idx], y_all[test_idx]
        try:
            batch = select(pool_x, bundle, req.function, req.eta, plan.t_passes, seed)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc
        pre = evaluate(
            bundle, test_x, test_y, plan.t_passes, seed,
            user=req.user, eta=req.eta, function=req.function, phase="pre",
        )
        sess = Session(
            session_id=sid,
            user=req.user,
            eta=req.eta,
            function=req.function,
            seed=seed,
            pool_x=pool_x,
            test_x=test_x,
            test_y=test_y,
            raw_windows=[store.users[req.user][i] for i in pool_idx],
            pre=pre,
        )
        for rank, pool_i in enumerate(batch.selected):
            sess.tasks.append(
                LabelTask(
                    task_id=f"{sid}-t{rank:04d}",
                    pool_index=int(pool_i),
                    score=float(batch.scores[pool_i]),
                )
            )
        sessions[sid] = sess
        return {"session_id": sid, "k": len(sess.tasks), "classes": store.classes}

    def _get_session(sid: str) -> Session:
        sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(404, f"unknown session {sid!r}")
        return sess

    @app.get("/session/{sid}/next", status_code=200)
    def next_task(sid: str):
        sess = _get_session(sid)
        with sess.lock:
            for task in sess.tasks:
                if task.state == "pending":
                    fw = sess.raw_windows[task.pool_index]
                    return {
                        "task_id": task.task_id,
                        "axes": _display_waveform(fw),
                        "rate_hz": fw.rate_hz,
                        "classes": store.classes,
                        "score": task.score,
                        "function": sess.function,
                        "remaining": sum(t.state == "pending" for t in sess.tasks),
                    }
        return Response(status_code=204)

    def _find_task(sess: Session, task_id: str) -> LabelTask:
        for task in sess.tasks:
            if task.task_id == task_id:
                return task
        raise HTTPException(404, f"unknown task {task_id!r}")

    def _maybe_retrain(sess: Session):
        # Caller holds the session lock; fires exactly once, after the
        # final pending task resolves.
        if sess.retrained or any(t.state == "pending" for t in sess.tasks):
            return
        sess.retrained = True
        acquired = [(t.pool_index, t.label) for t in sess.tasks if t.state == "labeled"]
        updated = clone(_bundle())
        if acquired:
            idx = [i for i, _ in acquired]
            y = np.array([l for _, l in acquired])
            train(
                updated,
                sess.pool_x[idx],
                y,
                plan.incremental_epochs,
                plan.batch_size,
                sess.seed,
                INCREMENTAL_CTX,
            )
        sess.post = evaluate(
            updated, sess.test_x, sess.test_y, plan.t_passes, sess.seed,
            user=sess.user, eta=sess.eta, function=sess.function, phase="post",
        )
        sess.post.n_acquired = len(acquired)
        sess.pre.n_acquired = len(acquired)
        sess.model_version += 1

    def _bundle() -> ModelBundle:
        return bundle

    @app.post("/session/{sid}/label")
    def label(sid: str, req: LabelRequest):
        sess = _get_session(sid)
        with sess.lock:
            task = _find_task(sess, req.task_id)
            if not (0 <= req.class_index < len(store.classes)):
                raise HTTPException(400, f"class index {req.class_index} out of range")
            if task.state != "pending":
                raise HTTPException(409, f"task {req.task_id} already {task.state}")
            task.state = "labeled"
            task.label = int(req.class_index)
            _maybe_retrain(sess)
            return {
                "accepted": True,
                "remaining": sum(t.state == "pending" for t in sess.tasks),
                "model_version": sess.model_version,
            }

    @app.post("/session/{sid}/skip")
    def skip(sid: str, req: SkipRequest):
        sess = _get_session(sid)
        with sess.lock:
            task = _find_task(sess, req.task_id)
            if task.state != "pending":
                raise HTTPException(409, f"task {req.task_id} already {task.state}")
            task.state = "skipped"
            _maybe_retrain(sess)
            return {
                "accepted": True,
                "remaining": sum(t.state == "pending" for t in sess.tasks),
                "model_version": sess.model_version,
            }

    @app.get("/session/{sid}/status")
    def status(sid: str):
        sess = _get_session(sid)
        with sess.lock:
            return {
                "session_id": sid,
                "user": sess.user,
                "eta": sess.eta,
                "function": sess.function,
                "k": len(sess.tasks),
                "labeled": sum(t.state == "labeled" for t in sess.tasks),
                "skipped": sum(t.state == "skipped" for t in sess.tasks),
                "pending": sum(t.state == "pending" for t in sess.tasks),
                "model_version": sess.model_version,
                "pre": _metrics_dict(sess.pre),
                "post": _metrics_dict(sess.post),
            }

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
