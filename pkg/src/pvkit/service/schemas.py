"""Request/response models for the HTTP service."""
from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"


class VideoEntry(BaseModel):
    id: str
    duration_s: float
    width_px: int


class VideoListResponse(BaseModel):
    videos: list[VideoEntry]


class AnalyzeRequest(BaseModel):
    """Server-side paths of the media to analyze, plus stage settings."""

    video_id: str = "video"
    audio: str | None = None
    frames: str | None = None
    histogram_cache: str | None = None
    transcript: str | None = None
    theme_list: str | None = None
    slides: str | None = None
    fps: float | None = None
    frames_per_pixel: int | None = None
    settings: dict[str, str] = Field(
        default_factory=dict,
        description="extra flat config keys, e.g. {'bic.penalty_weight': '1.5'}",
    )


class AnalyzeResponse(BaseModel):
    video_id: str
    artifacts: dict[str, str]


class ErrorResponse(BaseModel):
    detail: str
