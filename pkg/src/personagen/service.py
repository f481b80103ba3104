"""HTTP facade over sampling, interpolation, rendering and identity storage.

Design constraints the handlers enforce:

* the service holds a read-only generator snapshot; nothing here trains;
* every piece of randomness is derived from a persisted ``server_seed``
  and recorded next to its result, so any state is reproducible from the
  store plus the checkpoint;
* rendering runs on a single worker thread (the renderer is the
  bottleneck); HTTP reads never block on it.
"""
from __future__ import annotations

import contextlib
import json
import queue
import secrets
import threading
from pathlib import Path

import torch
from fastapi import Body, FastAPI
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .context import PLACEHOLDER
from .errors import RenderError
from .inference import (
    GeneratorHandle,
    RenderRequest,
    interpolate,
    load_generator,
    load_identity,
    render,
    sample_identity,
    save_identity,
)
from .pipelines import DiffusionPipeline, load_pipeline

ANCHOR_PROMPT = f"a photo of {PLACEHOLDER}"
PREVIEW_SEED = 0


class StudioStore:
    """Identities, jobs and counters in one JSON document plus flat files.

    All mutation goes through ``update`` under the lock; the JSON file is
    replaced atomically so a crash never leaves a half-written store.
    """

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "images").mkdir(exist_ok=True)
        (self.root / "identities").mkdir(exist_ok=True)
        self.path = self.root / "store.json"
        self.lock = threading.Lock()
        if self.path.is_file():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.data = {
                "server_seed": secrets.randbits(31),
                "next_identity": 1,
                "next_job": 1,
                "identities": {},
                "jobs": {},
            }
            self._flush()
        # Jobs cut short by a previous shutdown can never complete now.
        dirty = False
        for job in self.data["jobs"].values():
            if job["status"] in ("queued", "running"):
                job["status"] = "failed"
                job["error"] = "interrupted by server restart"
                dirty = True
        if dirty:
            self._flush()

    def _flush(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.data, indent=2, sort_keys=True), encoding="utf-8")
        tmp.replace(self.path)

    def update(self, fn) -> object:
        with self.lock:
            result = fn(self.data)
            self._flush()
            return result

    def snapshot(self) -> dict:
        with self.lock:
            return json.loads(json.dumps(self.data))

    def identity_path(self, identity_id: str) -> Path:
        return self.root / "identities" / f"{identity_id}.pt"

    def image_path(self, name: str) -> Path:
        return self.root / "images" / name


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"detail": message}, status_code=status)


def create_app(
    checkpoint_path: str | Path,
    data_dir: str | Path,
    *,
    pipeline_spec: str | None = None,
    static_dir: str | Path | None = None,
    preview_size: int | None = None,
) -> FastAPI:
    handle: GeneratorHandle = load_generator(checkpoint_path)
    pipeline: DiffusionPipeline = load_pipeline(pipeline_spec or handle.base_model_id)
    store = StudioStore(data_dir)
    jobs: queue.Queue[str | None] = queue.Queue()
    model_mismatch = handle.base_model_id != pipeline.base_model_id

    def run_job(job_id: str) -> None:
        job = store.snapshot()["jobs"][job_id]
        store.update(lambda d: d["jobs"][job_id].__setitem__("status", "running"))
        try:
            identity = load_identity(store.identity_path(job["identity"]))
            request = RenderRequest(
                identity,
                job["prompt"],
                seed=job["seed"],
                guidance=job.get("guidance", 8.5),
                steps=job.get("steps", 50),
                size=job.get("size"),
            )
            image = render(request, pipeline)
            name = f"{job_id}.png"
            Image.fromarray(image).save(store.image_path(name))

            def done(d):
                d["jobs"][job_id]["status"] = "done"
                d["jobs"][job_id]["image"] = f"/images/{name}"

            store.update(done)
        except Exception as exc:  # noqa: BLE001 - job must record any failure

            def failed(d):
                d["jobs"][job_id]["status"] = "failed"
                d["jobs"][job_id]["error"] = str(exc)

            store.update(failed)

    def worker() -> None:
        while True:
            job_id = jobs.get()
            if job_id is None:
                return
            run_job(job_id)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        thread = threading.Thread(target=worker, name="render-worker", daemon=True)
        thread.start()
        yield
        jobs.put(None)
        thread.join(timeout=30)

    app = FastAPI(title="character studio service", lifespan=lifespan)
    app.state.store = store

    def enqueue_render(identity_id: str, prompt: str, seed: int | None, kind: str, **extra) -> str:
        def add(d):
            job_id = f"job-{d['next_job']:04d}"
            # Omitted seeds are derived, not drawn, so the store alone can
            # replay every render.
            job_seed = seed if seed is not None else (d["server_seed"] * 31 + d["next_job"]) % (2**31 - 1)
            d["next_job"] += 1
            d["jobs"][job_id] = {
                "id": job_id,
                "kind": kind,
                "identity": identity_id,
                "prompt": prompt,
                "seed": job_seed,
                "status": "queued",
                "image": None,
                "error": None,
                **extra,
            }
            return job_id

        job_id = store.update(add)
        jobs.put(job_id)
        return job_id

    def identity_card(data: dict, identity_id: str) -> dict:
        card = dict(data["identities"][identity_id])
        preview = card.get("preview_job")
        if preview and preview in data["jobs"]:
            card["preview_image"] = data["jobs"][preview].get("image")
            card["preview_status"] = data["jobs"][preview]["status"]
        return card

    def register_identity(latent: torch.Tensor | None, label: str | None) -> str:
        """Reserve an id (and, when drawing, a derived seed) atomically."""

        def reserve(d):
            n = d["next_identity"]
            d["next_identity"] += 1
            return n, d["server_seed"]

        n, server_seed = store.update(reserve)
        identity_id = f"id-{n:04d}"
        latent_seed = None
        if latent is None:
            latent_seed = server_seed + n
            latent = torch.randn(handle.z_dim, generator=torch.Generator().manual_seed(latent_seed))
        identity = sample_identity(handle, latent=latent)
        save_identity(identity, store.identity_path(identity_id))

        def add(d):
            d["identities"][identity_id] = {
                "id": identity_id,
                "label": label or identity_id,
                "created_at": identity.created_at,
                "base_model_id": identity.base_model_id,
                "checkpoint_id": identity.checkpoint_id,
                "latent": [float(x) for x in identity.latent],
                "latent_seed": latent_seed,
                "preview_job": None,
            }

        store.update(add)
        preview = enqueue_render(identity_id, ANCHOR_PROMPT, PREVIEW_SEED, "preview", size=preview_size)
        store.update(lambda d: d["identities"][identity_id].__setitem__("preview_job", preview))
        return identity_id

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "base_model_id": handle.base_model_id,
            "checkpoint_id": handle.checkpoint_id,
            "z_dim": handle.z_dim,
            "step": handle.step,
        }

    @app.post("/identities/sample", status_code=201)
    def sample(body: dict = Body(default={})):
        if model_mismatch:
            return _error(409, "checkpoint and renderer are bound to different base models")
        latent = body.get("latent")
        tensor = None
        if latent is not None:
            if not isinstance(latent, list) or len(latent) != handle.z_dim:
                return _error(400, f"latent must be a list of {handle.z_dim} numbers")
            try:
                tensor = torch.tensor([float(x) for x in latent], dtype=torch.float32)
            except (TypeError, ValueError):
                return _error(400, "latent entries must be numbers")
            if not torch.isfinite(tensor).all():
                return _error(400, "latent entries must be finite")
        identity_id = register_identity(tensor, body.get("label"))
        return {"id": identity_id, "preview_job": store.snapshot()["identities"][identity_id]["preview_job"]}

    @app.post("/identities/interpolate", status_code=201)
    def interpolate_endpoint(body: dict = Body(...)):
        if model_mismatch:
            return _error(409, "checkpoint and renderer are bound to different base models")
        data = store.snapshot()
        for key in ("a", "b"):
            if body.get(key) not in data["identities"]:
                return _error(404, f"unknown identity {body.get(key)!r}")
        t = body.get("t")
        if not isinstance(t, (int, float)) or not (0.0 <= float(t) <= 1.0):
            return _error(422, "t must lie in [0, 1]")
        z_a = load_identity(store.identity_path(body["a"])).latent
        z_b = load_identity(store.identity_path(body["b"])).latent
        label = body.get("label") or f"{body['a']} x {body['b']} @ {float(t):.2f}"
        identity_id = register_identity(interpolate(z_a, z_b, float(t)), label)
        return {"id": identity_id}

    @app.get("/identities")
    def list_identities():
        data = store.snapshot()
        return {"identities": [identity_card(data, i) for i in sorted(data["identities"])]}

    @app.get("/identities/{identity_id}")
    def get_identity(identity_id: str):
        data = store.snapshot()
        if identity_id not in data["identities"]:
            return _error(404, f"unknown identity {identity_id!r}")
        return identity_card(data, identity_id)

    @app.delete("/identities/{identity_id}", status_code=204)
    def delete_identity(identity_id: str):
        data = store.snapshot()
        if identity_id not in data["identities"]:
            return _error(404, f"unknown identity {identity_id!r}")
        store.update(lambda d: d["identities"].pop(identity_id))
        store.identity_path(identity_id).unlink(missing_ok=True)
        return Response(status_code=204)

    @app.post("/render", status_code=202)
    def render_endpoint(body: dict = Body(...)):
        if model_mismatch:
            return _error(409, "checkpoint and renderer are bound to different base models")
        data = store.snapshot()
        identity_id = body.get("identity")
        if identity_id not in data["identities"]:
            return _error(404, f"unknown identity {identity_id!r}")
        prompt = body.get("prompt")
        if not isinstance(prompt, str) or prompt.count(PLACEHOLDER) != 1:
            return _error(422, f"prompt must contain {PLACEHOLDER} exactly once")
        try:
            RenderRequest(
                load_identity(store.identity_path(identity_id)),
                prompt,
                seed=0,
                guidance=body.get("guidance", 8.5),
                steps=body.get("steps", 50),
            )
        except RenderError as exc:
            return _error(422, str(exc))
        seed = body.get("seed")
        if seed is not None and not isinstance(seed, int):
            return _error(422, "seed must be an integer")
        job_id = enqueue_render(
            identity_id,
            prompt,
            seed,
            "render",
            guidance=body.get("guidance", 8.5),
            steps=body.get("steps", 50),
            size=body.get("size"),
        )
        return {"job": job_id, "seed": store.snapshot()["jobs"][job_id]["seed"]}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        data = store.snapshot()
        if job_id not in data["jobs"]:
            return _error(404, f"unknown job {job_id!r}")
        return data["jobs"][job_id]

    @app.get("/jobs")
    def list_jobs(identity: str | None = None):
        data = store.snapshot()
        rows = [data["jobs"][j] for j in sorted(data["jobs"])]
        if identity is not None:
            rows = [r for r in rows if r["identity"] == identity]
        return {"jobs": rows}

    @app.get("/images/{name}")
    def get_image(name: str):
        path = store.image_path(name)
        if "/" in name or "\\" in name or not path.is_file():
            return _error(404, f"unknown image {name!r}")
        return FileResponse(path, media_type="image/png")

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="studio")

    return app
