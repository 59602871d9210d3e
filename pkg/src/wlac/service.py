"""JSON suggestion service over loaded checkpoints.

Models are loaded once at startup and never mutated, so concurrent requests
see a consistent pipeline and responses are deterministic functions of the
request and the checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .checkpoint import load_pipeline
from .inference import DEFAULT_K, NoCandidateError, SuggestionRequest, SuggestPipeline


@dataclass
class ServiceConfig:
    baseline_path: str
    energy_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8077
    default_k: int = DEFAULT_K
    max_source_tokens: int = 128
    max_context_tokens: int = 127
    max_typed_chars: int = 64
    emit_trace: bool = False

    def __post_init__(self) -> None:
        if self.default_k < 1:
            raise ValueError("default_k must be >= 1")
        if min(self.max_source_tokens, self.max_context_tokens, self.max_typed_chars) < 1:
            raise ValueError("request size limits must be positive")


class SuggestBody(BaseModel):
    source: list[str] | str
    left_ctx: list[str] | str = []
    right_ctx: list[str] | str = []
    typed: str
    k: int | None = None


def _tokens(value: list[str] | str) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(value.split())
    return tuple(value)


def create_app(config: ServiceConfig, pipeline: SuggestPipeline | None = None) -> FastAPI:
    """Build the application; `pipeline` overrides checkpoint loading in tests."""
    if pipeline is None:
        pipeline = load_pipeline(config.baseline_path, config.energy_path)

    app = FastAPI(title="wlac suggestion service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.pipeline = pipeline
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed-request", "detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        kinds = ["baseline"] + (["energy"] if pipeline.energy is not None else [])
        return {
            "status": "ok",
            "model_kinds": kinds,
            "vocab_sizes": {
                "source": len(pipeline.src_vocab),
                "target": len(pipeline.tgt_vocab),
            },
        }

    @app.post("/suggest")
    def suggest(body: SuggestBody):
        source = _tokens(body.source)
        left = _tokens(body.left_ctx)
        right = _tokens(body.right_ctx)
        if len(source) > config.max_source_tokens:
            return JSONResponse(status_code=413, content={"error": "source-too-long"})
        if len(left) + len(right) > config.max_context_tokens:
            return JSONResponse(status_code=413, content={"error": "context-too-long"})
        if len(body.typed) > config.max_typed_chars:
            return JSONResponse(status_code=413, content={"error": "typed-too-long"})
        try:
            request = SuggestionRequest(
                source=source,
                left_ctx=left,
                right_ctx=right,
                typed=body.typed,
                k=body.k if body.k is not None else config.default_k,
            )
            result = pipeline.suggest(request, with_trace=config.emit_trace)
        except NoCandidateError:
            return JSONResponse(status_code=400, content={"error": "no-candidate"})
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"error": "bad-request", "detail": str(exc)})
        return result.to_json()

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
