"""HTTP services: per-shard search endpoints and the federating aggregator.

Shard API:
    GET  /search?q&k&mode=lexical|dense&field=body|title|url[&stored=full]
    POST /search                       (same, plus injected global statistics)
    GET  /doc/{docid}
    GET  /stats[?field=body]
    GET  /termstats?field&terms=a,b    (per-term document frequencies)
    GET  /health

Aggregator API:
    GET  /search?q&k&mode&stats=per-shard|global
    GET  /rerank?q&depth&out&scorer=builtin|remote
    GET  /health
"""

from __future__ import annotations

import logging
import time

from fastapi import FastAPI, HTTPException, Query, Request

from .errors import AllShardsFailed, InvalidArgs, NotFound, SearchError
from .federation import (
    FederatedResult,
    LatencyStats,
    LocalShard,
    ShardClient,
    federated_search,
    fetch_stored,
)
from .lexindex import GlobalStats
from .rerank import RemoteScorer, RerankConfig, overlap_scorer, rerank_candidates
from .results import RankedList

logger = logging.getLogger(__name__)

MODES = ("lexical", "dense")
FIELDS = ("body", "title", "url")


def _results_payload(ranked: RankedList, stored: bool = False) -> list[dict]:
    payload = []
    for entry in ranked.entries:
        hit = {
            "docid": entry.doc_id,
            "score": entry.score,
            "url": entry.url or "",
            "title": entry.title or "",
        }
        if stored:
            hit["body"] = entry.body or ""
        payload.append(hit)
    return payload


def create_shard_app(shard: LocalShard) -> FastAPI:
    app = FastAPI(title="shardsearch shard")

    def run_search(q, k, mode, field, stored, stats=None):
        if mode not in MODES:
            raise HTTPException(400, f"mode must be one of {MODES}")
        if field not in FIELDS:
            raise HTTPException(400, f"field must be one of {FIELDS}")
        if k < 0:
            raise HTTPException(400, "k must be >= 0")
        started = time.perf_counter()
        try:
            ranked = shard.search(
                q, k, mode=mode, field=field, stats=stats, stored=stored == "full"
            )
        except InvalidArgs as exc:
            raise HTTPException(400, str(exc)) from exc
        took_ms = (time.perf_counter() - started) * 1000.0
        return {
            "results": _results_payload(ranked, stored=stored == "full"),
            "took_ms": took_ms,
        }

    @app.get("/search")
    def search(
        q: str = Query(...),
        k: int = Query(10),
        mode: str = Query("lexical"),
        field: str = Query("body"),
        stored: str = Query("ids"),
    ):
        return run_search(q, k, mode, field, stored)

    @app.post("/search")
    async def search_with_stats(request: Request):
        body = await request.json()
        stats = None
        if body.get("stats"):
            raw = body["stats"]
            stats = GlobalStats(
                doc_count=int(raw["N"]),
                avgdl=float(raw["avgdl"]),
                df={term: int(df) for term, df in raw.get("df", {}).items()},
            )
        return run_search(
            body.get("q", ""),
            int(body.get("k", 10)),
            body.get("mode", "lexical"),
            body.get("field", "body"),
            body.get("stored", "ids"),
            stats=stats,
        )

    @app.get("/doc/{docid}")
    def doc(docid: str):
        found = shard.get_doc(docid)
        if found is None:
            raise HTTPException(404, f"no document {docid!r}")
        return found

    @app.get("/stats")
    def stats(field: str = Query("body")):
        if field not in FIELDS:
            raise HTTPException(400, f"field must be one of {FIELDS}")
        shard_stats = shard.stats(field)
        return {
            "mode_stats": {
                "N": shard_stats["N"],
                "avgdl": shard_stats["avgdl"],
                "df_available": shard_stats["df_available"],
            },
            "total_tokens": shard_stats.get("total_tokens", 0),
        }

    @app.get("/termstats")
    def termstats(terms: str = Query(""), field: str = Query("body")):
        if field not in FIELDS:
            raise HTTPException(400, f"field must be one of {FIELDS}")
        wanted = [term for term in terms.split(",") if term]
        return {"df": shard.term_df(wanted, field)}

    @app.get("/health")
    def health():
        return {"status": "ok"}

    return app


def create_aggregator_app(
    shards: list[ShardClient],
    default_k: int = 10,
    rerank_cfg: RerankConfig = RerankConfig(),
    remote_scorer_endpoint: str | None = None,
) -> FastAPI:
    app = FastAPI(title="shardsearch aggregator")
    latency = LatencyStats()

    def federated(q, k, mode, stats_mode, field="body", stored=False) -> FederatedResult:
        try:
            return federated_search(
                q, k, shards, mode=mode, stats_mode=stats_mode, field=field,
                stored=stored,
            )
        except AllShardsFailed as exc:
            raise HTTPException(502, str(exc)) from exc
        except InvalidArgs as exc:
            raise HTTPException(400, str(exc)) from exc

    @app.get("/search")
    def search(
        q: str = Query(...),
        k: int | None = Query(None),
        mode: str = Query("lexical"),
        stats: str = Query("per-shard"),
        field: str = Query("body"),
    ):
        if mode not in MODES:
            raise HTTPException(400, f"mode must be one of {MODES}")
        if stats not in ("per-shard", "global"):
            raise HTTPException(400, "stats must be per-shard or global")
        if field not in FIELDS:
            raise HTTPException(400, f"field must be one of {FIELDS}")
        started = time.perf_counter()
        result = federated(q, k if k is not None else default_k, mode, stats, field)
        took_ms = (time.perf_counter() - started) * 1000.0
        latency.record(took_ms)
        return {
            "query": q,
            "results": [
                {
                    "docid": e.doc_id,
                    "score": e.score,
                    "shard": e.shard,
                    "url": e.url or "",
                    "title": e.title or "",
                }
                for e in result.ranked.entries
            ],
            "took_ms": took_ms,
            "shard_times_ms": {str(i): t for i, t in result.shard_times_ms.items()},
            "degraded": result.degraded,
            "failed_shards": result.failed_shards,
        }

    @app.get("/rerank")
    def rerank(
        q: str = Query(...),
        depth: int = Query(None),
        out: int = Query(None),
        scorer: str = Query("builtin"),
        first: str = Query("lexical"),
    ):
        cfg = RerankConfig(
            first_stage_depth=depth if depth is not None else rerank_cfg.first_stage_depth,
            output_size=out if out is not None else rerank_cfg.output_size,
        )
        if scorer == "builtin":
            scoring = overlap_scorer
        elif scorer == "remote":
            if not remote_scorer_endpoint:
                raise HTTPException(400, "no remote scorer endpoint configured")
            scoring = RemoteScorer(remote_scorer_endpoint)
        else:
            raise HTTPException(400, "scorer must be builtin or remote")
        if first not in MODES:
            raise HTTPException(400, f"first must be one of {MODES}")
        started = time.perf_counter()
        result = federated(q, cfg.first_stage_depth, first, "per-shard", stored=True)
        if first == "dense":
            # dense hits may lack stored text; fill from whichever shard has it
            for entry in result.ranked.entries:
                if entry.body is None:
                    try:
                        doc = fetch_stored(shards, entry.doc_id)
                    except NotFound:
                        continue
                    entry.url = doc.get("url")
                    entry.title = doc.get("title")
                    entry.body = doc.get("body")
        try:
            reranked = rerank_candidates(q, result.ranked, cfg, scoring)
        except SearchError as exc:
            raise HTTPException(502, str(exc)) from exc
        took_ms = (time.perf_counter() - started) * 1000.0
        return {
            "query": q,
            "results": [
                {
                    "docid": e.doc_id,
                    "score": e.score,
                    "first_stage_score": e.first_stage_score,
                    "shard": e.shard,
                    "url": e.url or "",
                    "title": e.title or "",
                }
                for e in reranked.entries
            ],
            "took_ms": took_ms,
            "degraded": result.degraded,
        }

    @app.get("/latency")
    def latency_summary():
        if len(latency) == 0:
            return {"count": 0}
        return latency.summary()

    @app.get("/health")
    def health():
        return {"status": "ok"}

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8080) -> None:
    """Run an app under uvicorn until interrupted."""
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
