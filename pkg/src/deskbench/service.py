"""HTTP service for the pointing-language console, plus the optional
remote-embedder endpoint."""

# no `from __future__ import annotations` here: fastapi must resolve the
# function-local pydantic request models at runtime

import base64
import io
import threading
from dataclasses import dataclass, field

import numpy as np

from .bench import RunConfig, run_episode
from .coords import IMAGE_SIZE
from .render import png_bytes, render_observation
from .tasks import generate_task


@dataclass
class PointingSession:
    """Serializes one episode at a time: render, wait for clicks, execute."""

    cfg: RunConfig
    idle_timeout_s: float = 120.0
    expose_debug_targets: bool = False
    episode_id: int = -1
    phase: str = "idle"  # idle | awaiting_points | executing | done
    instruction: str = ""
    observation: np.ndarray | None = None
    points: list[tuple[int, int]] | None = None
    outcomes: list[dict] = field(default_factory=list)
    debug_targets: list[tuple[int, int]] = field(default_factory=list)
    _points_event: threading.Event = field(default_factory=threading.Event)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def _episodes(self):
        n = 0
        for meta_task in self.cfg.tasks:
            for level in self.cfg.levels:
                for root in self.cfg.seeds:
                    for ep in range(self.cfg.episodes_per_cell):
                        yield n, meta_task, level, int(root) * 100000 + ep
                        n += 1

    def _loop(self) -> None:
        for idx, meta_task, level, seed in self._episodes():
            task = generate_task(meta_task, level, seed)
            bundle = task.instruction_for("pointing")
            with self._lock:
                self.episode_id = idx
                self.instruction = bundle.text
                self.observation = render_observation(task.initial_world)
                self.debug_targets = list(bundle.points)
                self.points = None
                self.phase = "awaiting_points"
                self._points_event.clear()

            got = self._points_event.wait(timeout=self.idle_timeout_s)
            with self._lock:
                self.phase = "executing"
                points = self.points

            if not got or not points:
                self.outcomes.append(
                    {"episode_id": idx, "success": False, "reason": "no_user_input"}
                )
                continue

            cfg = RunConfig(
                tasks=(meta_task,), levels=(level,), episodes_per_cell=1,
                seeds=(0,), mode=self.cfg.mode, modality="pointing",
                perception=self.cfg.perception, max_trials=self.cfg.max_trials,
            )
            override = task.instruction_for("pointing")
            override.points[:] = points
            try:
                success, kind = run_episode(task, cfg, seed)
                reason = kind
            except Exception as exc:
                success, reason = False, type(exc).__name__
            self.outcomes.append(
                {"episode_id": idx, "success": success, "reason": reason}
            )
            with self._lock:
                self.phase = "done"
        with self._lock:
            self.phase = "done"

    # -- endpoint helpers -------------------------------------------------

    def status(self) -> dict:
        with self._lock:
            doc = {
                "episode_id": self.episode_id,
                "instruction": self.instruction,
                "awaiting_points": self.phase == "awaiting_points",
                "phase": self.phase,
                "episodes_done": len(self.outcomes),
                "last_outcome": self.outcomes[-1] if self.outcomes else None,
            }
            if self.expose_debug_targets:
                doc["debug_targets"] = [list(p) for p in self.debug_targets]
        return doc

    def observation_png(self) -> bytes | None:
        with self._lock:
            if self.observation is None:
                return None
            return png_bytes(self.observation)

    def submit_points(self, points: list[tuple[int, int]]) -> None:
        with self._lock:
            self.points = points
            self._points_event.set()

    def set_instruction(self, text: str) -> bool:
        with self._lock:
            if self.phase != "awaiting_points":
                return False
            self.instruction = text
            return True


def build_app(session: PointingSession):
    """FastAPI app over a running pointing session."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import JSONResponse, Response
    from pydantic import BaseModel

    class PointsBody(BaseModel):
        points: list[dict]

    class InstructionBody(BaseModel):
        text: str

    app = FastAPI(title="deskbench pointing service")

    @app.get("/status")
    def status():
        return JSONResponse(session.status())

    @app.get("/observation")
    def observation():
        png = session.observation_png()
        if png is None:
            raise HTTPException(404, "no episode running")
        return Response(content=png, media_type="image/png")

    @app.post("/instruction")
    def instruction(body: InstructionBody):
        if not body.text.strip():
            raise HTTPException(400, "instruction text must be nonempty")
        if not session.set_instruction(body.text):
            raise HTTPException(409, "no episode awaiting input")
        return {"ok": True}

    @app.post("/points")
    def points(body: PointsBody):
        parsed: list[tuple[int, int]] = []
        for p in body.points:
            if "x" not in p or "y" not in p:
                raise HTTPException(400, "points need x and y")
            x, y = p["x"], p["y"]
            if not (isinstance(x, int) and isinstance(y, int)):
                raise HTTPException(400, "point coordinates must be integers")
            if not (0 <= x < IMAGE_SIZE and 0 <= y < IMAGE_SIZE):
                raise HTTPException(400, f"point ({x}, {y}) outside the image")
            parsed.append((x, y))
        if not parsed:
            raise HTTPException(400, "at least one point is required")
        session.submit_points(parsed)
        return {"ok": True, "count": len(parsed)}

    return app


def build_embed_app():
    """Remote-embedder protocol: POST /embed {kind, payload} -> {vector}."""
    from fastapi import FastAPI, HTTPException
    from PIL import Image
    from pydantic import BaseModel

    from .perception import ObjectCrop
    from .retrieval import EmptyCrop, UnparsableQuery, embed_image, embed_text

    class EmbedBody(BaseModel):
        kind: str
        payload: str

    app = FastAPI(title="deskbench embedder")

    @app.post("/embed")
    def embed(body: EmbedBody):
        try:
            if body.kind == "text":
                emb = embed_text(body.payload)
            elif body.kind == "image":
                raw = base64.b64decode(body.payload)
                arr = np.asarray(Image.open(io.BytesIO(raw)).convert("RGB"))
                crop = ObjectCrop(
                    image=arr,
                    bbox=(0, 0, arr.shape[1] - 1, arr.shape[0] - 1),
                    source_index=0,
                )
                emb = embed_image(crop)
            else:
                raise HTTPException(400, f"unknown kind {body.kind!r}")
        except (UnparsableQuery, EmptyCrop) as exc:
            raise HTTPException(422, str(exc))
        return {"vector": emb.vector.tolist()}

    return app


def serve(cfg: RunConfig, host: str = "127.0.0.1", port: int = 8008,
          idle_timeout_s: float = 120.0, expose_debug_targets: bool = False):
    """Run the pointing service until interrupted."""
    import uvicorn

    session = PointingSession(
        cfg=cfg, idle_timeout_s=idle_timeout_s,
        expose_debug_targets=expose_debug_targets,
    )
    session.start()
    app = build_app(session)
    uvicorn.run(app, host=host, port=port, log_level="warning")
