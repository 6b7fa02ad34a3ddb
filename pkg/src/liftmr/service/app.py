"""FastAPI application exposing the lifting pipeline."""

from __future__ import annotations

from fastapi import FastAPI

from . import handlers, models


def create_app() -> FastAPI:
    app = FastAPI(
        title="liftmr",
        description="Lifts sequential MJ loops to verified MapReduce jobs and runs them",
    )

    @app.get("/v1/health", response_model=models.HealthResponse)
    def health():
        return handlers.health()

    @app.post("/v1/lift", response_model=models.LiftResponse)
    def lift(req: models.LiftRequest):
        return handlers.lift(req)

    @app.post("/v1/run", response_model=models.RunResponse)
    def run(req: models.RunRequest):
        return handlers.run(req)

    @app.post("/v1/check", response_model=models.CheckResponse)
    def check(req: models.CheckRequest):
        return handlers.check(req)

    @app.post("/v1/bench", response_model=models.BenchResponse)
    def bench(req: models.BenchRequest):
        return handlers.bench(req)

    return app


app = create_app()
