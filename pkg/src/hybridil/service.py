"""Local HTTP service for browsing demos and annotating click labels.

Endpoints (JSON):

    GET  /demos                 -> [{id, length, dt, has_clicks, has_labels,
                                     version}]
    GET  /demos/{id}            -> {id, dt, length, version, frames: [...]}
    PUT  /demos/{id}/clicks     <- [bool, ...]      -> {ok, version}
    POST /demos/{id}/preview    <- {clicks?: [...]} -> segmentation payload

Frames carry the render primitives of the planar scene, the stored click
bit, and (when labels exist on disk) the stored mode and waypoint index.
Clicks are persisted into the dataset's own demo documents with a
write-then-rename; a per-demo version counter implements last-writer-wins.
"""

from __future__ import annotations

import json
import os
import threading
from typing import Optional

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from .errors import NotFoundError, PersistenceError, ValidationError
from .segmentation import Segmentation, label_modes
from .sim import render_primitives
from .trajectory import (Demonstration, _load_doc, _parse_step, _step_dict,
                         _write_doc)

_WRITE_LOCKS: dict[str, threading.Lock] = {}
_LOCKS_GUARD = threading.Lock()


def _lock_for(demo_id: str) -> threading.Lock:
    with _LOCKS_GUARD:
        return _WRITE_LOCKS.setdefault(demo_id, threading.Lock())


def segmentation_payload(seg: Segmentation) -> dict:
    """Canonical JSON shape for a segmentation preview."""
    return {
        "modes": [int(m) for m in seg.modes],
        "waypoint_indices": [int(i) for i in seg.waypoint_indices],
        "segments": [
            {"kind": s.kind, "start": s.start, "end": s.end,
             "target": s.target}
            for s in seg.segments
        ],
    }


class DemoStore:
    """Disk-backed access to one dataset directory."""

    def __init__(self, dataset_dir: str):
        self.dir = dataset_dir

    def _manifest(self) -> dict:
        path = os.path.join(self.dir, "manifest.json")
        if not os.path.exists(path):
            raise NotFoundError(f"no dataset at {self.dir}")
        return _load_doc(path)

    def ids(self) -> list[str]:
        return sorted(self._manifest()["demos"])

    def demo_path(self, demo_id: str) -> str:
        return os.path.join(self.dir, "demos", f"{demo_id}.json")

    def load_doc(self, demo_id: str) -> dict:
        if demo_id not in set(self._manifest()["demos"]):
            raise NotFoundError(f"no demo with id {demo_id!r}")
        return _load_doc(self.demo_path(demo_id))

    def load_demo(self, demo_id: str) -> tuple[Demonstration, dict]:
        doc = self.load_doc(demo_id)
        demo = Demonstration(
            id=doc["id"], dt=doc["dt"], meta=doc.get("meta", {}),
            steps=tuple(_parse_step(s) for s in doc["steps"]),
        )
        return demo, doc

    def labels(self, demo_id: str) -> Optional[list[dict]]:
        path = os.path.join(self.dir, "labeled", f"{demo_id}.json")
        if not os.path.exists(path):
            return None
        return _load_doc(path)["steps"]

    def write_clicks(self, demo_id: str, clicks: list[bool]) -> int:
        with _lock_for(demo_id):
            demo, doc = self.load_demo(demo_id)
            if len(clicks) != len(demo.steps):
                raise ValidationError(
                    f"expected {len(demo.steps)} clicks, got {len(clicks)}")
            version = int(doc.get("meta", {}).get("click_version", 0)) + 1
            meta = dict(doc.get("meta", {}))
            meta["click_version"] = version
            updated = demo.with_clicks(clicks)
            _write_doc(self.demo_path(demo_id),
                       {"id": demo.id, "dt": demo.dt, "meta": meta},
                       (_step_dict(s) for s in updated.steps))
            return version


def create_app(dataset_dir: str, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="demo annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    store = DemoStore(dataset_dir)

    def _guard(fn):
        try:
            return fn()
        except NotFoundError as e:
            raise HTTPException(status_code=404, detail=str(e))
        except ValidationError as e:
            raise HTTPException(status_code=400, detail=str(e))
        except PersistenceError as e:
            raise HTTPException(status_code=500, detail=str(e))

    @app.get("/demos")
    def list_demos():
        def run():
            out = []
            for demo_id in store.ids():
                demo, doc = store.load_demo(demo_id)
                out.append({
                    "id": demo_id,
                    "length": len(demo.steps),
                    "dt": demo.dt,
                    "has_clicks": any(demo.clicks),
                    "has_labels": store.labels(demo_id) is not None,
                    "version": int(doc.get("meta", {})
                                   .get("click_version", 0)),
                })
            return out
        return _guard(run)

    @app.get("/demos/{demo_id}")
    def get_demo(demo_id: str):
        def run():
            demo, doc = store.load_demo(demo_id)
            labels = store.labels(demo_id)
            frames = []
            for t, step in enumerate(demo.steps):
                frame = {
                    "index": t,
                    "click": step.click,
                    "proprio": {
                        "x": step.obs.proprio.x, "y": step.obs.proprio.y,
                        "theta": step.obs.proprio.theta,
                        "grip": step.obs.proprio.grip,
                    },
                    "primitives": render_primitives(step.obs),
                }
                if labels is not None:
                    frame["mode"] = labels[t]["mode"]
                    frame["waypoint"] = labels[t]["waypoint"]
                frames.append(frame)
            return {
                "id": demo_id,
                "dt": demo.dt,
                "length": len(demo.steps),
                "version": int(doc.get("meta", {}).get("click_version", 0)),
                "frames": frames,
            }
        return _guard(run)

    @app.put("/demos/{demo_id}/clicks")
    def put_clicks(demo_id: str, clicks: list[bool] = Body(...)):
        def run():
            version = store.write_clicks(demo_id, [bool(c) for c in clicks])
            return {"ok": True, "version": version}
        return _guard(run)

    @app.post("/demos/{demo_id}/preview")
    def preview(demo_id: str, body: Optional[dict] = Body(None)):
        def run():
            demo, _ = store.load_demo(demo_id)
            clicks = (body or {}).get("clicks")
            if clicks is None:
                clicks = demo.clicks
            if len(clicks) != len(demo.steps):
                raise ValidationError(
                    f"expected {len(demo.steps)} clicks, got {len(clicks)}")
            seg = label_modes([bool(c) for c in clicks], demo.proprios)
            return segmentation_payload(seg)
        return _guard(run)

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def serve(dataset_dir: str, port: int = 8765, host: str = "127.0.0.1",
          ui_dir: Optional[str] = None) -> None:
    import uvicorn
    uvicorn.run(create_app(dataset_dir, ui_dir), host=host, port=port)
