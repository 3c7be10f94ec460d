"""HTTP service tying the engine together.

Endpoints cover graph ingestion, document classification, query
execution with stored re-filterable results, synthetic-data training and
generation, and reviewer feedback appended to the training corpus. All
endpoints require the shared bearer token and fail uniformly with 401
when it is absent or wrong.

Stored queries keep the full score list (computed at threshold 0), so a
later GET with any threshold is a pure filter of an already-sorted,
already-deduplicated list — no re-scoring, and raising the threshold
always yields a prefix.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
import secrets
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from . import matching, nlp, synth
from . import query as querydsl
from .store import GraphStore, KnowledgeGraph, load_graph
from .taxonomy import IndicatorTaxonomy

logger = logging.getLogger(__name__)

CLASSIFIER_FILENAME = "classifier.json"
_SYNTH_MODEL_RE = re.compile(r"^m(\d+)\.json$")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    """Service configuration, loaded from a JSON file.

    Optional paths may be omitted; the corresponding feature then answers
    409 (classify without a model, synth without trajectories, feedback
    without a corpus). default_threshold is used for queries whose DSL
    omits a threshold clause.
    """

    auth_token: str
    listen: str = "127.0.0.1:8712"
    graph_path: str | None = None
    taxonomy_path: str | None = None
    gazetteer_path: str | None = None
    corpus_path: str | None = None
    model_dir: str | None = None
    trajectory_path: str | None = None
    default_threshold: float = 0.7

    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        return host or "127.0.0.1", int(port)

    @staticmethod
    def from_dict(record: dict) -> "ServiceConfig":
        known = {
            "auth_token", "listen", "graph_path", "taxonomy_path",
            "gazetteer_path", "corpus_path", "model_dir", "trajectory_path",
            "default_threshold",
        }
        unknown = set(record) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        token = record.get("auth_token")
        if not token or not isinstance(token, str):
            raise ConfigError("auth_token is required")
        cfg = ServiceConfig(
            auth_token=token,
            listen=record.get("listen", "127.0.0.1:8712"),
            graph_path=record.get("graph_path"),
            taxonomy_path=record.get("taxonomy_path"),
            gazetteer_path=record.get("gazetteer_path"),
            corpus_path=record.get("corpus_path"),
            model_dir=record.get("model_dir"),
            trajectory_path=record.get("trajectory_path"),
            default_threshold=float(record.get("default_threshold", 0.7)),
        )
        if not 0.0 <= cfg.default_threshold <= 1.0:
            raise ConfigError("default_threshold must be in [0, 1]")
        try:
            cfg.host_port()
        except ValueError as exc:
            raise ConfigError(f"bad listen address {cfg.listen!r}") from exc
        return cfg

    @staticmethod
    def load(path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as source:
            return ServiceConfig.from_dict(json.load(source))


@dataclass
class QueryJob:
    """A stored query: results computed once, re-filtered on read."""

    id: str
    dsl_text: str
    query: querydsl.QueryGraph
    graph_version: int
    status: str
    full: matching.RankedResults  # ranked at threshold 0


# Request bodies live at module scope: with postponed annotation evaluation,
# FastAPI resolves the handlers' type hints through module globals, and a
# class local to create_app would not be found there.

class ClassifyRequest(BaseModel):
    text: str


class GenerateRequest(BaseModel):
    model_id: str
    n: int = Field(ge=0)
    seed: int = 0


class FeedbackRequest(BaseModel):
    text: str
    predicted: list[str] = []
    corrected: list[str]
    note: str = ""
    timestamp: str | None = None


class EngineState:
    """Everything the endpoints share, loaded once at startup."""

    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.taxonomy = (IndicatorTaxonomy.from_file(cfg.taxonomy_path)
                         if cfg.taxonomy_path else IndicatorTaxonomy.default())

        graph = KnowledgeGraph(self.taxonomy)
        if cfg.graph_path and Path(cfg.graph_path).exists():
            graph = load_graph(cfg.graph_path, self.taxonomy)
        self.store = GraphStore(graph)

        self.gazetteer = (nlp.Gazetteer.load(cfg.gazetteer_path)
                          if cfg.gazetteer_path else nlp.Gazetteer({}, {}))

        self.classifier: nlp.IndicatorModel | None = None
        if cfg.model_dir:
            model_path = Path(cfg.model_dir) / CLASSIFIER_FILENAME
            if model_path.exists():
                self.classifier = nlp.IndicatorModel.load(model_path)
                logger.info("loaded classifier from %s", model_path)

        self.trajectories: list[synth.Trajectory] = []
        if cfg.trajectory_path and Path(cfg.trajectory_path).exists():
            with open(cfg.trajectory_path, encoding="utf-8") as source:
                self.trajectories = synth.load_trajectories(source)

        self.queries: dict[str, QueryJob] = {}
        self.query_seq = 0
        self.queries_lock = threading.Lock()

        self.synth_models: dict[str, tuple[synth.AAEModel, synth.FeatureMapper]] = {}
        self.model_seq = 0
        self.synth_lock = threading.Lock()
        if cfg.model_dir:
            Path(cfg.model_dir).mkdir(parents=True, exist_ok=True)
            for path in sorted(Path(cfg.model_dir).glob("m*.json")):
                m = _SYNTH_MODEL_RE.match(path.name)
                if not m:
                    continue
                model, mapper = synth.load_model(path)
                self.synth_models[f"m{m.group(1)}"] = (model, mapper)
                self.model_seq = max(self.model_seq, int(m.group(1)))

        self.corpus_lock = threading.Lock()


def _query_response(job: QueryJob, threshold: float) -> dict:
    results = [matching.match_result_to_dict(e)
               for e in job.full.entries if e.score >= threshold]
    return {
        "id": job.id,
        "status": job.status,
        "graph_version": job.graph_version,
        "name": job.query.name,
        "mode": job.query.mode.value,
        "threshold": threshold,
        "results": results,
    }


def create_app(cfg: ServiceConfig) -> FastAPI:
    """Build the FastAPI application around a loaded engine state."""
    state = EngineState(cfg)
    app = FastAPI(title="investigative pattern search", docs_url=None,
                  redoc_url=None, openapi_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])
    app.state.engine = state

    def require_auth(request: Request) -> None:
        got = request.headers.get("authorization") or ""
        want = f"Bearer {cfg.auth_token}"
        if not secrets.compare_digest(got.encode(), want.encode()):
            raise HTTPException(status_code=401, detail="unauthorized")

    auth = [Depends(require_auth)]

    async def _utf8_body(request: Request) -> str:
        raw = await request.body()
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise HTTPException(status_code=400,
                                detail="body is not valid UTF-8") from None

    # -- graph -------------------------------------------------------------

    @app.post("/graph/ingest", dependencies=auth)
    async def graph_ingest(request: Request) -> dict:
        text = await _utf8_body(request)
        report = state.store.ingest(text.splitlines())
        return report.to_dict()

    # -- documents ----------------------------------------------------------

    @app.post("/documents/classify", dependencies=auth)
    def classify(body: ClassifyRequest) -> dict:
        model = state.classifier
        if model is None:
            raise HTTPException(status_code=409,
                                detail="no classifier model loaded")
        sentences = []
        for sentence in nlp.split_sentences(body.text):
            probabilities = nlp.predict(model, sentence)
            entities = nlp.extract_entities(sentence, state.gazetteer)
            sentences.append({
                "text": sentence,
                "labels": [
                    {"category": c, "probability": probabilities[c]}
                    for c in model.categories
                ],
                "entities": entities.to_dict(),
            })
        return {"sentences": sentences}

    # -- queries -------------------------------------------------------------

    @app.post("/queries", dependencies=auth)
    async def post_query(request: Request) -> dict:
        text = await _utf8_body(request)
        try:
            parsed = querydsl.parse(text, cfg.default_threshold)
        except querydsl.QueryError as exc:
            raise HTTPException(status_code=400, detail={
                "line": exc.line,
                "column": exc.column,
                "message": f"{exc.code}: {exc.message}",
                "code": exc.code,
            }) from None
        snapshot = state.store.snapshot()
        full = matching.rank(snapshot, parsed, threshold=0.0)
        with state.queries_lock:
            state.query_seq += 1
            job = QueryJob(f"q{state.query_seq}", text, parsed,
                           snapshot.version, "Done", full)
            state.queries[job.id] = job
        return _query_response(job, parsed.threshold)

    @app.get("/queries/{query_id}", dependencies=auth)
    def get_query(
        query_id: str,
        threshold: float | None = Query(default=None, ge=0.0, le=1.0),
    ) -> dict:
        job = state.queries.get(query_id)
        if job is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown query id {query_id!r}")
        cut = job.query.threshold if threshold is None else threshold
        return _query_response(job, cut)

    # -- synthetic data -------------------------------------------------------

    @app.post("/synth/train", dependencies=auth)
    async def synth_train(request: Request) -> dict:
        raw = await _utf8_body(request)
        try:
            record = json.loads(raw) if raw.strip() else {}
        except json.JSONDecodeError as exc:
            raise HTTPException(status_code=400,
                                detail=f"bad JSON body: {exc}") from None
        if not state.trajectories:
            raise HTTPException(status_code=409,
                                detail="no trajectory dataset configured")
        try:
            config = synth.AAEConfig.from_dict(record)
        except synth.ConfigInvalidError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        with state.synth_lock:
            mapper = synth.fit_mapper(state.trajectories, state.taxonomy)
            try:
                model, curve = synth.train_aae(state.trajectories, mapper,
                                               config)
            except synth.NonFiniteLossError as exc:
                raise HTTPException(status_code=422,
                                    detail=f"training diverged: {exc}") from None
            state.model_seq += 1
            model_id = f"m{state.model_seq}"
            state.synth_models[model_id] = (model, mapper)
            if cfg.model_dir:
                synth.save_model(model, mapper,
                                 Path(cfg.model_dir) / f"{model_id}.json")
        return {"model_id": model_id, "curve_entries": len(curve)}

    @app.post("/synth/generate", dependencies=auth)
    def synth_generate(body: GenerateRequest) -> PlainTextResponse:
        entry = state.synth_models.get(body.model_id)
        if entry is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown model {body.model_id!r}")
        model, mapper = entry
        trajectories = synth.sample(model, mapper, body.n, body.seed)
        lines = [synth.trajectory_line(t) for t in trajectories]
        text = "\n".join(lines) + ("\n" if lines else "")
        return PlainTextResponse(text, media_type="application/x-ndjson")

    # -- feedback ----------------------------------------------------------

    @app.post("/feedback", dependencies=auth)
    def feedback(body: FeedbackRequest) -> dict:
        if cfg.corpus_path is None:
            raise HTTPException(status_code=409, detail="no corpus configured")
        corrected = sorted(set(body.corrected))
        if not corrected:
            raise HTTPException(status_code=422,
                                detail="at least one corrected label required")
        if len(corrected) > nlp.MAX_LABELS_PER_SNIPPET:
            raise HTTPException(
                status_code=422,
                detail=f"{len(corrected)} corrected labels exceed the "
                       f"{nlp.MAX_LABELS_PER_SNIPPET}-label limit")
        unknown = [c for c in corrected if c not in state.taxonomy]
        if unknown:
            raise HTTPException(status_code=422,
                                detail=f"unknown categories: {unknown}")
        stamp = body.timestamp or dt.datetime.now(dt.timezone.utc).isoformat()
        line = nlp.corpus_line(
            nlp.LabeledSnippet.make(body.text, corrected),
            source="feedback", predicted=sorted(set(body.predicted)),
            note=body.note, timestamp=stamp)
        with state.corpus_lock:
            path = Path(cfg.corpus_path)
            with open(path, "a", encoding="utf-8") as sink:
                sink.write(line + "\n")
            with open(path, encoding="utf-8") as source:
                count = sum(1 for record in source if record.strip())
        return {"appended_corpus_size": count}

    return app


def create_app_from_file(config_path) -> FastAPI:
    return create_app(ServiceConfig.load(config_path))
