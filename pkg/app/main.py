"""Main application module.

Serves the similarity and architecture endpoints with request logging and a
JSON error body for engine errors.
"""

import time

import structlog
from fastapi import FastAPI, Request, status
from fastapi.responses import JSONResponse

from app.api.v1 import architectures, similarity
from app.core.config import get_settings
from app.core.exceptions import CkaRefineError
from app.core.logging import configure_logging

settings = get_settings()
configure_logging(settings.LOG_LEVEL, settings.LOG_JSON)
logger = structlog.get_logger(__name__)

# Create FastAPI app
app = FastAPI(
    title=settings.PROJECT_NAME,
    version=settings.VERSION,
    debug=settings.DEBUG,
    openapi_url=f"{settings.API_V1_PREFIX}/openapi.json"
)


@app.middleware("http")
async def logging_middleware(request: Request, call_next):
    """Log every request with its duration."""
    start_time = time.time()
    try:
        response = await call_next(request)
    except Exception as e:
        logger.error(
            "request_failed",
            method=request.method,
            path=request.url.path,
            process_time=round(time.time() - start_time, 4),
            error=str(e),
            exc_info=True
        )
        return JSONResponse(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            content={"error": {"kind": "internal", "message": "An unexpected error occurred"}}
        )

    process_time = time.time() - start_time
    logger.info(
        "request_completed",
        method=request.method,
        path=request.url.path,
        status_code=response.status_code,
        process_time=round(process_time, 4)
    )
    response.headers["X-Process-Time"] = str(process_time)
    return response


@app.exception_handler(CkaRefineError)
async def engine_error_handler(request: Request, exc: CkaRefineError) -> JSONResponse:
    logger.warning("engine_error", path=request.url.path, kind=exc.kind, message=exc.message)
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={"error": exc.to_dict()}
    )


# Include routers
app.include_router(
    similarity.router,
    prefix=f"{settings.API_V1_PREFIX}/similarity",
    tags=["similarity"]
)
app.include_router(
    architectures.router,
    prefix=f"{settings.API_V1_PREFIX}/architectures",
    tags=["architectures"]
)


@app.get("/")
async def root():
    return {"name": settings.PROJECT_NAME, "version": settings.VERSION}


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy"}


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("app.main:app", host=settings.HOST, port=settings.PORT, reload=settings.DEBUG)
