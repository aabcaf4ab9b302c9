"""End-to-end runs: ingest -> split -> index -> features -> scale -> train -> evaluate.

Stage order is fixed so that nothing computed from the test split can reach
training: the index holds only real-news *training* embeddings and the
scaler is fitted on training rows only.

A run directory holds::

    manifest.json   config snapshot, input digests, seeds, stage timings
    index.nxidx     real-news training embeddings (vector_index format)
    scaler.json     feature scaler
    model.ckpt      classifier checkpoint
    history.csv     epoch,loss,train_accuracy
    metrics.json    EvalReport (after evaluate)
    roc.csv         threshold,fpr,tpr (after evaluate)
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.cluster.vq import kmeans2

from . import __version__
from .data_model import Dataset, SplitSpec, load_jsonl, split, synthesize
from .errors import (
    ArtifactMismatch,
    ConfigError,
    MissingArtifact,
    RetrievalNetError,
    StageError,
)
from .metrics import EvalReport, RankedList, ranking_metrics, roc_curve, write_roc_csv
from .neural_net import (
    ARCHITECTURES,
    MODEL_I,
    MODEL_II,
    VARIANTS,
    AttentionRetrieval,
    gate,
    ClassifierModel,
    EpochRecord,
    TrainConfig,
    init_model,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
    write_history_csv,
)
from .preprocess import (
    ScalerParams,
    extract_feature_matrix,
    fit_scaler,
    transform,
    write_feature_csv,
)
from .vector_index import FlatIndex, batch_search, build_index, load_index, save_index

CONFIG_SCHEMA_VERSION = 1

INDEX_FILE = "index.nxidx"
SCALER_FILE = "scaler.json"
CHECKPOINT_FILE = "model.ckpt"
HISTORY_FILE = "history.csv"
MANIFEST_FILE = "manifest.json"
METRICS_FILE = "metrics.json"
ROC_FILE = "roc.csv"
REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"


@dataclass
class PipelineConfig:
    """Flat run configuration.  ``source`` is a JSONL path or ``"synthetic"``.

    ``dropout_p`` and ``batchnorm`` left as null take the variant defaults
    (model2: dropout 0.5 with batch-norm, model1: neither).
    """

    schema_version: int = CONFIG_SCHEMA_VERSION
    source: str = "synthetic"
    synthetic_n_real: int = 500
    synthetic_n_fake: int = 500
    synthetic_dim: int = 32
    synthetic_separation: float = 2.0
    model_tag: str | None = None
    variant: str = MODEL_II
    k: int = 5
    train_fraction: float = 0.8
    stratified: bool = True
    scale: bool = True
    include_cosines: bool = False
    embed_features: bool = True
    hidden: str = "128-64"
    dropout_p: float | None = None
    batchnorm: bool | None = None
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    relevance_rule: str = "cluster"
    relevance_path: str | None = None
    relevance_clusters: int = 8
    rank_cutoffs: list = field(default_factory=lambda: [10, 100])
    out_dir: str = "run"

    def validate(self, check_paths: bool = True) -> "PipelineConfig":
        if self.schema_version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version {self.schema_version}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.hidden not in ARCHITECTURES:
            raise ConfigError(f"hidden must be one of {sorted(ARCHITECTURES)}")
        if self.include_cosines and self.variant != MODEL_I:
            raise ConfigError("include_cosines applies to model1 only")
        if self.learning_rate < 0 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("learning_rate >= 0, epochs >= 1 and batch_size >= 1 are required")
        if self.dropout_p is not None and not 0 <= self.dropout_p < 1:
            raise ConfigError("dropout_p must lie in [0, 1)")
        if self.relevance_rule not in ("cluster", "file"):
            raise ConfigError("relevance_rule must be 'cluster' or 'file'")
        if self.relevance_rule == "file" and not self.relevance_path:
            raise ConfigError("relevance_rule 'file' needs relevance_path")
        if self.relevance_clusters < 1:
            raise ConfigError("relevance_clusters must be >= 1")
        if not self.rank_cutoffs or any(int(c) < 1 for c in self.rank_cutoffs):
            raise ConfigError("rank_cutoffs must be a non-empty list of positive integers")
        if check_paths:
            if self.source != "synthetic" and not Path(self.source).is_file():
                raise ConfigError(f"data source {self.source!r} does not exist")
            if self.relevance_rule == "file" and not Path(self.relevance_path).is_file():
                raise ConfigError(f"relevance file {self.relevance_path!r} does not exist")
        return self

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - set(fields))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        defaults = cls()
        for key, value in obj.items():
            _check_type(key, value, getattr(defaults, key), fields[key].type)
        return cls(**obj)


def _check_type(key: str, value, default, annotation: str) -> None:
    optional = "None" in str(annotation)
    if value is None:
        if not optional:
            raise ConfigError(f"config key {key!r} may not be null")
        return
    if "bool" in str(annotation):
        ok = isinstance(value, bool)
    elif "float" in str(annotation):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif "int" in str(annotation):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif "str" in str(annotation):
        ok = isinstance(value, str)
    elif "list" in str(annotation):
        ok = isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"config key {key!r} has the wrong type ({type(value).__name__})")


def load_config(path: str | os.PathLike | None, **overrides) -> PipelineConfig:
    obj: dict = {}
    if path is not None:
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
    cfg = PipelineConfig.from_json(obj)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def derive_seeds(root: int) -> dict[str, int]:
    """Independent per-stage seeds from the single root seed."""
    names = ("split", "init", "train", "relevance", "grid")
    states = np.random.SeedSequence(root).generate_state(len(names), dtype=np.uint64)
    return {name: int(s) for name, s in zip(names, states)}


# ---------------------------------------------------------------------------
# stages


@contextmanager
def stage(name: str, timings: dict | None = None):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except RetrievalNetError as exc:
        raise StageError(name, exc) from exc
    finally:
        if timings is not None:
            timings[name] = round(time.perf_counter() - start, 6)


def load_dataset(cfg: PipelineConfig, seed: int | None = None) -> Dataset:
    """Load the configured source and apply the model-tag filter."""
    if cfg.source == "synthetic":
        ds = synthesize(
            cfg.seed if seed is None else seed,
            cfg.synthetic_n_real, cfg.synthetic_n_fake,
            cfg.synthetic_dim, cfg.synthetic_separation,
        )
    else:
        ds = load_jsonl(cfg.source)
    return select_model_tag(ds, cfg.model_tag)


def select_model_tag(ds: Dataset, tag: str | None) -> Dataset:
    tags = ds.model_tags
    if tag is None:
        if len(tags) > 1:
            raise ConfigError(f"dataset holds several model tags {tags}; set model_tag")
        return ds
    out = ds.for_model(tag)
    if len(out) == 0:
        raise ConfigError(f"no records with model tag {tag!r} (available: {tags})")
    return out


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class TrainArtifacts:
    index: FlatIndex
    model: ClassifierModel
    scaler: ScalerParams | None
    history: list[EpochRecord]


def _model1_features(cfg: PipelineConfig, index: FlatIndex, records) -> np.ndarray:
    return extract_feature_matrix(index, records, cfg.k, cfg.include_cosines)


def _feature_width(cfg: PipelineConfig) -> int:
    """Retrieval columns the classifier reads: k distances, doubled when cosines are on."""
    return 2 * cfg.k if cfg.include_cosines else cfg.k


def train_stage(
    train_ds: Dataset,
    cfg: PipelineConfig,
    seeds: dict[str, int],
    timings: dict | None = None,
    export_features: str | os.PathLike | None = None,
) -> TrainArtifacts:
    """Everything from the training split to a fitted model.

    Only ``train_ds`` is visible here, which is what keeps the test split
    out of the index, the scaler and the weights.
    """
    with stage("index", timings):
        bank = train_ds.real()
        if len(bank) == 0:
            raise ConfigError("training split holds no real-news records to index")
        index = build_index(zip(bank.ids, bank.vectors), train_ds.dim)

    scaler = None
    with stage("features", timings):
        if cfg.variant == MODEL_I:
            features = _model1_features(cfg, index, train_ds.records)
            if export_features is not None:
                write_feature_csv(export_features, features, train_ds.labels, cfg.k, cfg.include_cosines)
            if cfg.scale:
                scaler = fit_scaler(features)
                features = transform(scaler, features)
        else:
            features = AttentionRetrieval(index.ids, index.vectors, train_ds.ids, train_ds.vectors, cfg.k)
            if export_features is not None:
                raw = _model1_features(cfg, index, train_ds.records)
                write_feature_csv(export_features, raw, train_ds.labels, cfg.k)
            # Fail on an unsatisfiable k before any training happens.
            probe = init_model(MODEL_II, cfg.k, train_ds.dim, hidden=(1,), seed=0)
            features.select(probe.attention)

    with stage("train", timings):
        model = init_model(
            cfg.variant, _feature_width(cfg),
            embed_dim=train_ds.dim,
            hidden=ARCHITECTURES[cfg.hidden],
            dropout_p=cfg.dropout_p,
            batchnorm=cfg.batchnorm,
            seed=seeds["init"],
            embed_features=cfg.embed_features if cfg.variant == MODEL_II else False,
        )
        tcfg = TrainConfig(cfg.learning_rate, cfg.epochs, cfg.batch_size, seeds["train"], cfg.k)
        model, history = train(model, features, train_ds.labels, tcfg, scale_inputs=cfg.scale)
        if cfg.variant == MODEL_II:
            scaler = model.input_scaler
    return TrainArtifacts(index, model, scaler, history)


def split_dataset(ds: Dataset, cfg: PipelineConfig, seeds: dict[str, int]) -> tuple[Dataset, Dataset]:
    return split(ds, SplitSpec(cfg.train_fraction, seeds["split"], cfg.stratified))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_manifest(out: Path, cfg: PipelineConfig, seeds: dict, timings: dict, status: str) -> None:
    digests = {}
    if cfg.source != "synthetic":
        digests[cfg.source] = file_digest(cfg.source)
    if cfg.relevance_rule == "file" and cfg.relevance_path:
        digests[cfg.relevance_path] = file_digest(cfg.relevance_path)
    _write_json(out / MANIFEST_FILE, {
        "status": status,
        "config": cfg.to_json(),
        "seed": cfg.seed,
        "derived_seeds": seeds,
        "input_digests": digests,
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "timings": timings,
    })


def run_train(
    cfg: PipelineConfig,
    grid: bool = False,
    export_features: bool = False,
) -> TrainArtifacts:
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = derive_seeds(cfg.seed)
    timings: dict[str, float] = {}
    write_manifest(out, cfg, seeds, timings, "started")

    with stage("ingest", timings):
        ds = load_dataset(cfg)
    with stage("split", timings):
        train_ds, _ = split_dataset(ds, cfg, seeds)
    if grid:
        with stage("grid", timings):
            cfg = grid_search(train_ds, cfg, seeds, out / "grid.csv")
    feats_path = out / "features_train.csv" if export_features else None
    arts = train_stage(train_ds, cfg, seeds, timings, feats_path)

    with stage("persist", timings):
        save_index(arts.index, out / INDEX_FILE)
        save_checkpoint(arts.model, out / CHECKPOINT_FILE)
        write_history_csv(arts.history, out / HISTORY_FILE)
        _write_json(out / SCALER_FILE, None if arts.scaler is None else arts.scaler.to_json())
    write_manifest(out, cfg, seeds, timings, "trained")
    return arts


# ---------------------------------------------------------------------------
# grid search (optional)

GRID = {
    "learning_rate": (0.01, 0.05),
    "batch_size": (32, 64),
    "hidden": ("128-64", "64-32"),
}


def grid_search(train_ds: Dataset, cfg: PipelineConfig, seeds: dict, report_path: Path) -> PipelineConfig:
    """Pick learning rate, batch size and hidden preset by validation accuracy.

    The validation rows are carved out of the training split, so the test
    split stays untouched.
    """
    inner_train, valid = split(train_ds, SplitSpec(0.8, seeds["grid"], True))
    rows = []
    best = None
    for lr in GRID["learning_rate"]:
        for bs in GRID["batch_size"]:
            for hidden in GRID["hidden"]:
                trial = dataclasses.replace(cfg, learning_rate=lr, batch_size=bs, hidden=hidden)
                arts = train_stage(inner_train, trial, seeds)
                labels, _ = predict_dataset(arts, trial, valid)
                acc = float(np.mean(labels == valid.labels))
                rows.append((lr, bs, hidden, acc))
                if best is None or acc > best[0]:
                    best = (acc, trial)
    with open(report_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["learning_rate", "batch_size", "hidden", "valid_accuracy"])
        writer.writerows(rows)
    return best[1]


# ---------------------------------------------------------------------------
# evaluation


def predict_dataset(arts: TrainArtifacts, cfg: PipelineConfig, ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    if arts.model.variant == MODEL_I:
        features = _model1_features(cfg, arts.index, ds.records)
        if arts.scaler is not None:
            features = transform(arts.scaler, features)
    else:
        features = AttentionRetrieval(arts.index.ids, arts.index.vectors, ds.ids, ds.vectors, cfg.k)
    return predict(arts.model, features)


def load_artifacts(run_dir: str | os.PathLike) -> tuple[PipelineConfig, TrainArtifacts]:
    run_dir = Path(run_dir)
    for name in (MANIFEST_FILE, INDEX_FILE, CHECKPOINT_FILE, SCALER_FILE):
        if not (run_dir / name).is_file():
            raise MissingArtifact(f"{run_dir / name} is missing; run 'train' first")
    manifest = json.loads((run_dir / MANIFEST_FILE).read_text(encoding="utf-8"))
    cfg = PipelineConfig.from_json(manifest["config"])
    index = load_index(run_dir / INDEX_FILE)
    model = load_checkpoint(run_dir / CHECKPOINT_FILE)
    scaler_obj = json.loads((run_dir / SCALER_FILE).read_text(encoding="utf-8"))
    scaler = None if scaler_obj is None else ScalerParams.from_json(scaler_obj)
    if model.k != _feature_width(cfg) or model.variant != cfg.variant:
        raise ArtifactMismatch("checkpoint does not match the run config (k or variant)")
    if model.embed_dim is not None and model.embed_dim != index.dim:
        raise ArtifactMismatch("checkpoint attention dim differs from the index dim")
    return cfg, TrainArtifacts(index, model, scaler, [])


def _cluster_relevance(index: FlatIndex, n_clusters: int, seed: int):
    """Relevance by nearest-centroid membership over the indexed embeddings."""
    data = index.vectors.astype(np.float64)
    n_clusters = min(n_clusters, len(index))
    centroids, assign = kmeans2(data, n_clusters, minit="++", seed=np.random.default_rng(seed))
    used = np.unique(assign)
    centroids = centroids[used]
    members = {c: {index.ids[i] for i in np.flatnonzero(assign == u)} for c, u in enumerate(used)}

    def relevant(query_id: str, vector: np.ndarray) -> set[str]:
        d = np.square(centroids - vector[None, :]).sum(axis=1)
        return members[int(np.argmin(d))]

    return relevant


def _file_relevance(path: str):
    """Judgments file: JSONL lines {"query": id, "relevant": [ids]} or CSV query_id,relevant_id."""
    table: dict[str, set[str]] = {}
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".jsonl"):
        for line in text.splitlines():
            if line.strip():
                obj = json.loads(line)
                table.setdefault(str(obj["query"]), set()).update(str(r) for r in obj["relevant"])
    else:
        reader = csv.reader(text.splitlines())
        for row in reader:
            if row and row[0] != "query_id":
                table.setdefault(row[0], set()).add(row[1])

    def relevant(query_id: str, vector: np.ndarray) -> set[str]:
        return table.get(query_id, set())

    return relevant


def ranked_lists(
    arts: TrainArtifacts,
    cfg: PipelineConfig,
    queries: Dataset,
    seeds: dict[str, int],
) -> list[RankedList]:
    """Each fake query's full ranking of the indexed real articles.

    Ranking happens in the space the classifier retrieves in (attention-gated
    for model2).  Queries with no relevant items are skipped.
    """
    fakes = queries.fake()
    if len(fakes) == 0:
        return []
    if cfg.relevance_rule == "cluster":
        relevant = _cluster_relevance(arts.index, cfg.relevance_clusters, seeds["relevance"])
    else:
        relevant = _file_relevance(cfg.relevance_path)

    if arts.model.attention is not None:
        retrieval = AttentionRetrieval(arts.index.ids, arts.index.vectors, fakes.ids, fakes.vectors, cfg.k)
        search_index = retrieval.gated_index(arts.model.attention)
        query_vectors, _ = gate(arts.model.attention.W_a.astype(np.float64), fakes.vectors)
    else:
        search_index = arts.index
        query_vectors = fakes.vectors
    hits = batch_search(search_index, query_vectors, len(search_index), exclusions=fakes.ids)
    lists = []
    for rec, hit in zip(fakes, hits):
        rel = relevant(rec.article_id, rec.vector) & set(search_index.ids)
        if not rel:
            continue
        lists.append(RankedList(hit.ids, tuple(int(i in rel) for i in hit.ids), len(rel)))
    return lists


def evaluate(
    arts: TrainArtifacts,
    cfg: PipelineConfig,
    ds: Dataset,
    seeds: dict[str, int],
) -> tuple[EvalReport, list]:
    labels, scores = predict_dataset(arts, cfg, ds)
    lists = ranked_lists(arts, cfg, ds, seeds)
    ranking = {}
    if lists:
        cutoffs = sorted({min(int(c), len(arts.index)) for c in cfg.rank_cutoffs})
        ranking = ranking_metrics(lists, cutoffs)
        ranking["n_queries"] = len(lists)
    report = EvalReport.build(ds.labels, labels, scores, ranking)
    curve = roc_curve(ds.labels, scores) if len(set(ds.labels.tolist())) == 2 else []
    return report, curve


def fit_and_score(cfg: PipelineConfig, ranking: bool = False) -> tuple[TrainArtifacts, EvalReport]:
    """Train on the split of ``cfg`` and score its test half, all in memory."""
    cfg.validate()
    seeds = derive_seeds(cfg.seed)
    train_ds, test_ds = split_dataset(load_dataset(cfg), cfg, seeds)
    arts = train_stage(train_ds, cfg, seeds)
    if ranking:
        report, _ = evaluate(arts, cfg, test_ds, seeds)
    else:
        labels, scores = predict_dataset(arts, cfg, test_ds)
        report = EvalReport.build(test_ds.labels, labels, scores)
    return arts, report


def run_evaluate(run_dir: str | os.PathLike, data: str | None = None) -> EvalReport:
    run_dir = Path(run_dir)
    with stage("load-artifacts"):
        cfg, arts = load_artifacts(run_dir)
    seeds = derive_seeds(cfg.seed)
    with stage("ingest"):
        if data is None:
            cfg.validate()
            ds = load_dataset(cfg)
            _, ds = split_dataset(ds, cfg, seeds)
        else:
            ds = select_model_tag(load_jsonl(data), cfg.model_tag)
        if ds.dim != arts.index.dim:
            raise ArtifactMismatch(f"data dim {ds.dim} differs from the index dim {arts.index.dim}")
    with stage("evaluate"):
        report, curve = evaluate(arts, cfg, ds, seeds)
    (run_dir / METRICS_FILE).write_text(report.dumps() + "\n", encoding="utf-8")
    if curve:
        write_roc_csv(curve, run_dir / ROC_FILE)
    return report


# ---------------------------------------------------------------------------
# report

REPORT_SCHEMA = {
    "type": "object",
    "required": ["manifest", "history", "metrics"],
    "additionalProperties": False,
    "properties": {
        "manifest": {
            "type": "object",
            "required": ["config", "seed", "derived_seeds", "input_digests", "code_version", "timings"],
        },
        "history": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["epoch", "loss", "train_accuracy"],
                "properties": {
                    "epoch": {"type": "integer", "minimum": 1},
                    "loss": {"type": "number", "minimum": 0},
                    "train_accuracy": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
        "metrics": {
            "type": "object",
            "required": ["accuracy", "precision", "recall", "f1", "auc", "confusion",
                         "per_class", "macro", "weighted", "ranking"],
            "properties": {
                key: {"type": "number", "minimum": 0, "maximum": 1}
                for key in ("accuracy", "precision", "recall", "f1", "auc")
            },
        },
    },
}


def read_history(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {"epoch": int(r["epoch"]), "loss": float(r["loss"]), "train_accuracy": float(r["train_accuracy"])}
            for r in csv.DictReader(fh)
        ]


def build_report(run_dir: str | os.PathLike) -> tuple[dict, str]:
    run_dir = Path(run_dir)
    missing = [n for n in (MANIFEST_FILE, HISTORY_FILE, METRICS_FILE) if not (run_dir / n).is_file()]
    if missing:
        raise MissingArtifact(f"{run_dir}: missing {', '.join(missing)}")
    manifest = json.loads((run_dir / MANIFEST_FILE).read_text(encoding="utf-8"))
    history = read_history(run_dir / HISTORY_FILE)
    metrics = json.loads((run_dir / METRICS_FILE).read_text(encoding="utf-8"))
    merged = {"manifest": manifest, "history": history, "metrics": metrics}

    cfg = manifest["config"]
    lines = [
        f"run directory : {run_dir}",
        f"variant       : {cfg['variant']}  k={cfg['k']}  hidden={cfg['hidden']}",
        f"source        : {cfg['source']}  model_tag={cfg['model_tag']}",
        f"seed          : {manifest['seed']}  code {manifest['code_version']}",
        f"epochs        : {len(history)}  final loss {history[-1]['loss']:.6f}" if history else "epochs        : 0",
        "",
        EvalReport.from_json(metrics).to_table(),
    ]
    return merged, "\n".join(lines)


def run_report(run_dir: str | os.PathLike) -> tuple[dict, str]:
    merged, text = build_report(run_dir)
    run_dir = Path(run_dir)
    _write_json(run_dir / REPORT_JSON, merged)
    (run_dir / REPORT_TEXT).write_text(text + "\n", encoding="utf-8")
    return merged, text


def run_search(index_path: str | os.PathLike, k: int, vector: Sequence[float] | None = None,
               article_id: str | None = None, exclude_self: bool = False):
    from .vector_index import search

    index = load_index(index_path)
    if (vector is None) == (article_id is None):
        raise ConfigError("give exactly one of a query vector or an indexed id")
    exclude = None
    if article_id is not None:
        if article_id not in index:
            raise ConfigError(f"id {article_id!r} is not in the index")
        vector = index.vector(article_id)
        exclude = article_id if exclude_self else None
    return search(index, vector, k, exclude_id=exclude)
