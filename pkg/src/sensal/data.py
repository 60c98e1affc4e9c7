"""Dataset ingestion, synthetic corpus generation and the window store.

Input corpora are delimited-text sensor logs described by a JSON manifest
(column mapping, per-device sampling rates, class list). The store keeps
preprocessed feature windows per user in the same binary tensor-record
container as model bundles.
"""

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngmod
from . import serial
from .signal import FeatureWindow, dwt_approx, decimate, segment


class IngestError(ValueError):
    pass


@dataclass
class DatasetManifest:
    dataset_id: str
    classes: list
    files: list = field(default_factory=list)
    columns: dict = field(default_factory=dict)  # timestamp/x/y/z/user/device/label
    rates: dict = field(default_factory=dict)  # device -> Hz; "default" key allowed
    target_hz: float | None = 100.0
    window_seconds: float = 2.0
    delimiter: str = ","
    has_header: bool = True

    def __post_init__(self):
        if not self.classes:
            raise IngestError("manifest needs a non-empty class list")
        if len(set(self.classes)) != len(self.classes):
            raise IngestError("duplicate class names in manifest")

    @classmethod
    def from_file(cls, path) -> "DatasetManifest":
        d = json.loads(Path(path).read_text())
        base = Path(path).parent
        d["files"] = [str(base / f) if not Path(f).is_absolute() else f for f in d.get("files", [])]
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "classes": list(self.classes),
            "files": list(self.files),
            "columns": dict(self.columns),
            "rates": dict(self.rates),
            "target_hz": self.target_hz,
            "window_seconds": self.window_seconds,
            "delimiter": self.delimiter,
            "has_header": self.has_header,
        }


@dataclass
class RawStream:
    user_id: str
    device_id: str
    rate_hz: float
    samples: np.ndarray  # (n, 3)
    labels: np.ndarray  # (n,) int class indices, -1 for unlabeled
    skipped_rows: int = 0


def _col_index(columns, key, header):
    spec = columns.get(key)
    if spec is None:
        return None
    if isinstance(spec, int):
        return spec
    if header is None or spec not in header:
        raise IngestError(f"cannot resolve column {spec!r} for {key!r}")
    return header.index(spec)


def ingest(manifest: DatasetManifest) -> dict:
    """Parse manifest files into per-(user, device) streams.

    Malformed rows are counted and skipped. Rows out of order by at most
    two sample periods are stable-sorted; worse disorder is an error.
    """
    class_to_idx = {str(c): i for i, c in enumerate(manifest.classes)}
    rows_by_stream: dict = {}
    skipped: dict = {}
    for fpath in manifest.files:
        path = Path(fpath)
        if not path.exists():
            raise IngestError(f"missing data file {fpath}")
        with path.open(newline="") as fh:
            reader = csv.reader(fh, delimiter=manifest.delimiter)
            header = next(reader) if manifest.has_header else None
            cols = {
                k: _col_index(manifest.columns, k, header)
                for k in ("timestamp", "x", "y", "z", "user", "device", "label")
            }
            for k in ("timestamp", "x", "y", "z", "user"):
                if cols[k] is None:
                    raise IngestError(f"manifest does not map required column {k!r}")
            for row in reader:
                try:
                    t = float(row[cols["timestamp"]])
                    xyz = (
                        float(row[cols["x"]]),
                        float(row[cols["y"]]),
                        float(row[cols["z"]]),
                    )
                    user = str(row[cols["user"]])
                    device = str(row[cols["device"]]) if cols["device"] is not None else "default"
                    label = -1
                    if cols["label"] is not None:
                        raw = str(row[cols["label"]])
                        if raw in class_to_idx:
                            label = class_to_idx[raw]
                        elif raw.strip() != "":
                            label = int(raw)
                except (IndexError, ValueError):
                    key = (path.name,)
                    skipped[key] = skipped.get(key, 0) + 1
                    continue
                rows_by_stream.setdefault((user, device), []).append((t, *xyz, label))
    if not rows_by_stream:
        raise IngestError("zero valid rows across all files")

    streams = {}
    total_skipped = sum(skipped.values())
    for (user, device), rows in sorted(rows_by_stream.items()):
        rate = manifest.rates.get(device, manifest.rates.get("default"))
        if rate is None:
            raise IngestError(f"no sampling rate for device {device!r}")
        arr = np.array(rows, dtype=np.float64)
        t = arr[:, 0]
        drop = np.maximum.accumulate(t) - t
        if drop.max() > 2.0 / rate + 1e-12:
            raise IngestError(
                f"timestamps for ({user}, {device}) out of order by {drop.max():.4g}s"
            )
        order = np.argsort(t, kind="stable")
        arr = arr[order]
        streams.setdefault(user, []).append(
            RawStream(
                user_id=user,
                device_id=device,
                rate_hz=float(rate),
                samples=arr[:, 1:4],
                labels=arr[:, 4].astype(int),
                skipped_rows=0,
            )
        )
    # Attribute the skip count to the first stream for reporting.
    first = streams[sorted(streams)[0]][0]
    first.skipped_rows = total_skipped
    return streams


# ---------------------------------------------------------------------------
# Synthetic corpus


def synthetic_classes(num_classes: int) -> list:
    return [f"activity_{c}" for c in range(num_classes)]


def generate_synthetic(
    num_users: int,
    num_classes: int,
    windows_per_class: int,
    rate_hz: float = 32.0,
    seed: int = 0,
    noise: float = 0.25,
    user_spread: float = 0.35,
    window_seconds: float = 2.0,
) -> dict:
    """Per-user labeled streams with class-specific oscillation signatures.

    Each class is a distinct frequency/amplitude pattern across the three
    axes; each user applies their own amplitude scaling, frequency warp and
    phase habits (the "execution style"), so a model trained on other users
    transfers imperfectly but adapts quickly when fine-tuned. Style only
    touches the upper half of the classes — simple activities look alike
    across people, personal ones do not — which concentrates transfer error
    where an uncertainty-driven learner can find it.
    """
    if min(num_users, num_classes, windows_per_class) < 1:
        raise ValueError("all synthetic corpus counts must be >= 1")
    wlen = round(window_seconds * rate_hz)
    t = np.arange(wlen) / rate_hz
    streams = {}
    for u in range(num_users):
        urng = rngmod.stream(seed, rngmod.SYNTH, u)
        # Per-user style: deterministic draw from the user's stream.
        freq_warp = 1.0 + user_spread * (urng.random() * 2 - 1)
        amp_scale = 1.0 + user_spread * (urng.random(3) * 2 - 1)
        chunks, labels = [], []
        for c in range(num_classes):
            base_freq = 1.0 + 0.8 * c
            styled = c >= num_classes - num_classes // 2
            c_warp = freq_warp if styled else 1.0
            c_amp = amp_scale if styled else np.ones(3)
            axis_amp = 1.0 + 0.5 * np.array(
                [np.cos(2.4 * c), np.sin(1.7 * c + 1.0), np.cos(0.9 * c + 2.0)]
            )
            for _ in range(windows_per_class):
                phase = urng.random(3) * 2 * np.pi
                # Styled classes also vary between repetitions of the same
                # activity, so adapting to them takes many labeled windows.
                jitter = 1.0 + 0.25 * (urng.random() * 2 - 1) if styled else 1.0
                sig = np.empty((wlen, 3))
                for a in range(3):
                    f = base_freq * c_warp * jitter * (1.0 + 0.07 * a)
                    sig[:, a] = c_amp[a] * axis_amp[a] * np.sin(2 * np.pi * f * t + phase[a])
                    sig[:, a] += 0.3 * axis_amp[a] * np.sin(2 * np.pi * 2 * f * t + phase[a] / 2)
                sig += noise * urng.standard_normal(sig.shape)
                chunks.append(sig)
                labels.append(np.full(wlen, c))
        order = urng.permutation(len(chunks))
        samples = np.concatenate([chunks[i] for i in order])
        lab = np.concatenate([labels[i] for i in order])
        streams[f"user_{u}"] = [
            RawStream(
                user_id=f"user_{u}",
                device_id="synthetic",
                rate_hz=rate_hz,
                samples=samples,
                labels=lab,
            )
        ]
    return streams


def write_synthetic_csv(streams: dict, out_dir, classes: list, rate_hz: float) -> Path:
    """Materialize a synthetic corpus as CSV files plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for user, ss in sorted(streams.items()):
        for s in ss:
            fname = f"{user}.csv"
            with (out / fname).open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["timestamp", "x", "y", "z", "user", "device", "label"])
                for i in range(len(s.samples)):
                    w.writerow(
                        [
                            f"{i / s.rate_hz:.6f}",
                            f"{s.samples[i, 0]:.6f}",
                            f"{s.samples[i, 1]:.6f}",
                            f"{s.samples[i, 2]:.6f}",
                            user,
                            s.device_id,
                            classes[s.labels[i]],
                        ]
                    )
            files.append(fname)
    manifest = {
        "dataset_id": "synthetic",
        "classes": classes,
        "files": files,
        "columns": {
            "timestamp": "timestamp",
            "x": "x",
            "y": "y",
            "z": "z",
            "user": "user",
            "device": "device",
            "label": "label",
        },
        "rates": {"default": rate_hz},
        "target_hz": rate_hz,
        "window_seconds": 2.0,
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2))
    return mpath


# ---------------------------------------------------------------------------
# Window store


@dataclass
class WindowStore:
    classes: list
    users: dict  # user_id -> list[FeatureWindow]
    provenance: dict = field(default_factory=dict)

    def features(self, user: str) -> tuple[np.ndarray, np.ndarray]:
        """(n, 3, L) coefficient array and (n,) label array for one user."""
        wins = self.users[user]
        x = np.stack([w.coefficients for w in wins])
        y = np.array([-1 if w.label is None else w.label for w in wins])
        return x, y

    @property
    def feature_length(self) -> int:
        for wins in self.users.values():
            if wins:
                return wins[0].coefficients.shape[1]
        raise ValueError("empty store")


def provenance_hash(manifest_dict: dict, params: dict) -> str:
    blob = serial.canonical_json({"manifest": manifest_dict, "params": params})
    return hashlib.sha256(blob.encode()).hexdigest()


def preprocess_and_store(
    streams: dict,
    classes: list,
    window_seconds: float = 2.0,
    target_hz: float | None = None,
    keep_raw: bool = True,
    standardize: bool = False,
    manifest_dict: dict | None = None,
) -> WindowStore:
    """segment -> decimate -> Haar transform, grouped by user.

    Reports the achieved compression (stored f32 feature bytes over raw
    f64 sample bytes) in the store provenance.
    """
    params = {
        "window_seconds": window_seconds,
        "target_hz": target_hz,
        "keep_raw": keep_raw,
        "standardize": standardize,
    }
    users: dict = {}
    raw_bytes = 0
    feat_bytes = 0
    for user in sorted(streams):
        wins: list = []
        for s in streams[user]:
            raw_bytes += s.samples.nbytes
            for w in segment(
                s.samples,
                s.labels,
                s.rate_hz,
                window_seconds,
                user_id=user,
                device_id=s.device_id,
            ):
                if target_hz is not None and w.rate_hz != target_hz:
                    w = decimate(w, target_hz)
                fw = dwt_approx(w)
                if keep_raw:
                    fw.meta["raw"] = w.axes
                feat_bytes += fw.coefficients.size * 4
                wins.append(fw)
        users[user] = wins
    store = WindowStore(classes=list(classes), users=users)
    if standardize:
        allc = np.concatenate([w.coefficients for u in users.values() for w in u], axis=1)
        mean, std = allc.mean(axis=1), allc.std(axis=1) + 1e-12
        for u in users.values():
            for w in u:
                w.coefficients = (w.coefficients - mean[:, None]) / std[:, None]
        store.provenance["standardize_mean"] = mean.tolist()
        store.provenance["standardize_std"] = std.tolist()
    store.provenance.update(
        {
            "params": params,
            "hash": provenance_hash(manifest_dict or {}, params),
            "compression_ratio": (feat_bytes / raw_bytes) if raw_bytes else None,
        }
    )
    return store


def save_store(store: WindowStore, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for user, wins in sorted(store.users.items()):
        header = {
            "user": user,
            "labels": [-1 if w.label is None else int(w.label) for w in wins],
            "rates": [w.rate_hz for w in wins],
            "devices": [w.device_id for w in wins],
        }
        tensors = []
        for i, w in enumerate(wins):
            tensors.append((f"f{i:06d}", w.coefficients))
            if "raw" in w.meta:
                tensors.append((f"r{i:06d}", w.meta["raw"]))
        (out / f"{user}.win").write_bytes(serial.pack(header, tensors))
    meta = {
        "classes": store.classes,
        "users": sorted(store.users),
        "provenance": store.provenance,
    }
    (out / "store.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_store(in_dir) -> WindowStore:
    path = Path(in_dir)
    meta = json.loads((path / "store.json").read_text())
    users: dict = {}
    for user in meta["users"]:
        header, tensors = serial.unpack((path / f"{user}.win").read_bytes())
        by_name = dict(tensors)
        wins = []
        for i, label in enumerate(header["labels"]):
            fw = FeatureWindow(
                coefficients=by_name[f"f{i:06d}"],
                rate_hz=header["rates"][i],
                user_id=user,
                device_id=header["devices"][i],
                label=None if label < 0 else int(label),
            )
            raw = by_name.get(f"r{i:06d}")
            if raw is not None:
                fw.meta["raw"] = raw
            wins.append(fw)
        users[user] = wins
    return WindowStore(classes=meta["classes"], users=users, provenance=meta["provenance"])
