"""FastAPI service over an output directory of analyzed videos.

GET endpoints are read-only views of the artifacts; POST /api/analyze runs
the pipeline on server-side media paths. The browser UI consumes only these
endpoints.
"""
from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse

from .. import pipeline
from ..errors import PvkitError
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    HealthResponse,
    VideoEntry,
    VideoListResponse,
)

TIMELINE_NAME = pipeline.ARTIFACTS["timeline"]


def _video_dirs(root: Path) -> dict[str, Path]:
    """Analyzed videos under root: either root itself or its subdirectories."""
    if (root / TIMELINE_NAME).exists():
        return {root.name or "video": root}
    found = {}
    if root.is_dir():
        for child in sorted(root.iterdir()):
            if (child / TIMELINE_NAME).exists():
                found[child.name] = child
    return found


def create_app(output_root, ui_dir=None) -> FastAPI:
    root = Path(output_root)
    app = FastAPI(title="pvkit", version="0.1.0")

    @app.get("/api/health", response_model=HealthResponse)
    def health():
        return HealthResponse()

    @app.get("/api/videos", response_model=VideoListResponse)
    def list_videos():
        entries = []
        for vid, directory in _video_dirs(root).items():
            doc = json.loads((directory / TIMELINE_NAME).read_text())
            entries.append(
                VideoEntry(id=vid, duration_s=doc["duration_s"], width_px=doc["width_px"])
            )
        return VideoListResponse(videos=entries)

    def _video_dir(vid: str) -> Path:
        directory = _video_dirs(root).get(vid)
        if directory is None:
            raise HTTPException(status_code=404, detail=f"no analyzed video {vid!r}")
        return directory

    @app.get("/api/videos/{vid}/timeline")
    def get_timeline(vid: str):
        return JSONResponse(json.loads((_video_dir(vid) / TIMELINE_NAME).read_text()))

    @app.get("/api/videos/{vid}/files/{relpath:path}")
    def get_file(vid: str, relpath: str):
        directory = _video_dir(vid).resolve()
        target = (directory / relpath).resolve()
        if directory not in target.parents and target != directory:
            raise HTTPException(status_code=403, detail="path escapes the video directory")
        if not target.is_file():
            raise HTTPException(status_code=404, detail=f"no file {relpath!r}")
        media_type = "image/x-portable-pixmap" if target.suffix == ".ppm" else None
        return FileResponse(target, media_type=media_type)

    @app.post("/api/analyze", response_model=AnalyzeResponse)
    def analyze(request: AnalyzeRequest):
        overrides = dict(request.settings)
        for key in ("audio", "frames", "histogram_cache", "transcript", "theme_list", "slides"):
            value = getattr(request, key)
            if value is not None:
                overrides[key] = value
        if request.fps is not None:
            overrides["fps"] = repr(request.fps)
        if request.frames_per_pixel is not None:
            overrides["frames_per_pixel"] = str(request.frames_per_pixel)
        overrides["video_id"] = request.video_id
        overrides["output_dir"] = str(root / request.video_id)
        try:
            cfg = pipeline.load_config(None, overrides)
            produced = pipeline.analyze(cfg)
        except (PvkitError, ValueError, OSError) as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        return AnalyzeResponse(
            video_id=request.video_id,
            artifacts={name: str(path) for name, path in produced.items()},
        )

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index():
            return {"service": "pvkit", "videos": sorted(_video_dirs(root))}

    return app
