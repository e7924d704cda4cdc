"""JSON-over-HTTP service exposing rollouts, scoring, and surrogate math."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

import numpy as np

from .config import Runtime
from .parsing import check_format, has_trailing_text
from .rewards import (
    GrpoConfig,
    LogProbBatch,
    check_answer,
    grpo_loss,
    reward_from_flags,
    surrogate_token_terms,
)
from .rollout import attach_rewards, rollout_group
from .wire import WIRE_SCHEMA_VERSION, group_to_wire

logger = logging.getLogger(__name__)


class PayloadError(ValueError):
    """Client-side payload problem; maps to a 400 with a field message."""

    def __init__(self, fieldname: str, message: str) -> None:
        super().__init__(f"{fieldname}: {message}")
        self.fieldname = fieldname
        self.message = message


def _require(payload: dict, fieldname: str, kind=None):
    if fieldname not in payload:
        raise PayloadError(fieldname, "missing required field")
    value = payload[fieldname]
    if kind is not None and not isinstance(value, kind):
        raise PayloadError(fieldname, f"expected {getattr(kind, '__name__', kind)}")
    return value


@dataclass
class RolloutJob:
    job_id: str
    status: str = "queued"  # queued -> running -> done | failed
    result: Optional[dict] = None
    error: Optional[str] = None


class JobTable:
    def __init__(self) -> None:
        self._jobs: dict[str, RolloutJob] = {}
        self._lock = threading.Lock()
        self._next = 0

    def create(self) -> RolloutJob:
        with self._lock:
            self._next += 1
            job = RolloutJob(job_id=f"job-{self._next:06d}")
            self._jobs[job.job_id] = job
            return job

    def get(self, job_id: str) -> Optional[RolloutJob]:
        with self._lock:
            return self._jobs.get(job_id)

    def update(self, job_id: str, **fields) -> None:
        with self._lock:
            job = self._jobs[job_id]
            if job.status in ("done", "failed"):  # terminal states immutable
                return
            for key, value in fields.items():
                setattr(job, key, value)


class RolloutService:
    """Request handlers, independent of the HTTP plumbing for testability."""

    def __init__(self, runtime: Runtime) -> None:
        self.runtime = runtime
        self.jobs = JobTable()
        self._workers = ThreadPoolExecutor(max_workers=2, thread_name_prefix="rollout-job")

    # -- endpoint bodies ---------------------------------------------------

    def health(self) -> dict:
        return {"status": "ok", "schema_version": WIRE_SCHEMA_VERSION}

    def interfaces(self) -> dict:
        return {
            "schema_version": WIRE_SCHEMA_VERSION,
            "interfaces": [
                {
                    "name": s.name,
                    "description": s.description,
                    "start_tag": s.start_tag,
                    "end_tag": s.end_tag,
                    "invoke_limit": s.invoke_limit,
                    "backend_id": s.backend_id,
                }
                for s in self.runtime.registry.specs
            ],
        }

    def score(self, payload: dict) -> dict:
        response = _require(payload, "response", str)
        gold = _require(payload, "gold")
        if not isinstance(gold, (str, list)):
            raise PayloadError("gold", "expected string or list of strings")
        mode = payload.get("mode", "string_em")
        ok, _, boxed = check_format(response)
        record = reward_from_flags(ok, check_answer(boxed, gold, mode))
        return {
            "schema_version": WIRE_SCHEMA_VERSION,
            **record.as_dict(),
            "boxed_answer": boxed,
            "trailing_text": has_trailing_text(response),
        }

    def grpo(self, payload: dict) -> dict:
        offsets = _require(payload, "offsets", list)
        old_flat = np.asarray(_require(payload, "old_flat", list), dtype=np.float64)
        new_flat = np.asarray(_require(payload, "new_flat", list), dtype=np.float64)
        mask_flat = np.asarray(_require(payload, "mask_flat", list))
        if not (len(old_flat) == len(new_flat) == len(mask_flat) == offsets[-1]):
            raise PayloadError("offsets", "flat array lengths disagree with offsets")
        spans = list(zip(offsets[:-1], offsets[1:]))
        batch = LogProbBatch(
            old_logprobs=[old_flat[a:b] for a, b in spans],
            new_logprobs=[new_flat[a:b] for a, b in spans],
            masks=[mask_flat[a:b].astype(bool) for a, b in spans],
        )
        if "advantages_flat" in payload and payload["advantages_flat"] is not None:
            adv_flat = np.asarray(payload["advantages_flat"], dtype=np.float64)
            if len(adv_flat) != offsets[-1]:
                raise PayloadError("advantages_flat", "length disagrees with offsets")
            adv = [adv_flat[a:b] for a, b in spans]
        else:
            adv = [float(x) for x in _require(payload, "advantages", list)]
        cfg = GrpoConfig(
            eps_min=payload.get("eps_min", self.runtime.grpo.eps_min),
            eps_max=payload.get("eps_max", self.runtime.grpo.eps_max),
        )
        try:
            objective, grads = grpo_loss(batch, adv, cfg)
            terms = surrogate_token_terms(batch, adv, cfg)
        except ValueError as exc:
            raise PayloadError("batch", str(exc)) from exc
        return {
            "schema_version": WIRE_SCHEMA_VERSION,
            "objective": objective,
            "terms_flat": [float(x) for row in terms for x in row],
            "gradient_flat": [float(x) for row in grads for x in row],
        }

    def _run_group(self, question: str, g: int, payload: dict) -> dict:
        registry = self.runtime.registry
        if payload.get("interfaces"):
            registry = registry.subset(payload["interfaces"])
        config = self.runtime.rollout
        if "seed" in payload:
            config = replace(config, seed=int(payload["seed"]))
        batch = rollout_group(question, self.runtime.policy, registry, config, group_size=g)
        if payload.get("gold") is not None:
            attach_rewards(batch, payload["gold"], payload.get("mode", "string_em"))
        return group_to_wire(batch, mask_injected=self.runtime.grpo.mask_injected)

    def rollout(self, payload: dict) -> tuple[int, dict]:
        if "questions" in payload:
            questions = _require(payload, "questions", list)
        else:
            questions = [_require(payload, "question", str)]
        if not questions:
            raise PayloadError("questions", "must not be empty")
        g = int(payload.get("g", self.runtime.rollout.group_size))
        if g < 1:
            raise PayloadError("g", "must be >= 1")

        wants_async = bool(payload.get("async", False)) or g > self.runtime.server.async_threshold
        if not wants_async:
            groups = [self._run_group(q, g, payload) for q in questions]
            return 200, {"schema_version": WIRE_SCHEMA_VERSION, "groups": groups}

        job = self.jobs.create()

        def work() -> None:
            self.jobs.update(job.job_id, status="running")
            try:
                groups = [self._run_group(q, g, payload) for q in questions]
                self.jobs.update(
                    job.job_id,
                    status="done",
                    result={"schema_version": WIRE_SCHEMA_VERSION, "groups": groups},
                )
            except Exception as exc:  # job failure is reported, not raised
                logger.exception("job %s failed", job.job_id)
                self.jobs.update(job.job_id, status="failed", error=str(exc))

        self._workers.submit(work)
        return 202, {"schema_version": WIRE_SCHEMA_VERSION, "job_id": job.job_id, "status": job.status}

    def job_status(self, job_id: str) -> Optional[dict]:
        job = self.jobs.get(job_id)
        if job is None:
            return None
        body = {"schema_version": WIRE_SCHEMA_VERSION, "job_id": job.job_id, "status": job.status}
        if job.result is not None:
            body["result"] = job.result
        if job.error is not None:
            body["error"] = job.error
        return body


def make_server(runtime: Runtime, host: Optional[str] = None, port: Optional[int] = None) -> ThreadingHTTPServer:
    service = RolloutService(runtime)
    auth_token = runtime.server.auth_token

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route through logging, not stderr
            logger.debug("http: " + fmt, *args)

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _authorized(self) -> bool:
            if not auth_token:
                return True
            return self.headers.get("Authorization") == f"Bearer {auth_token}"

        def _read_json(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            try:
                payload = json.loads(raw or b"{}")
            except json.JSONDecodeError as exc:
                raise PayloadError("body", f"invalid JSON: {exc}") from exc
            if not isinstance(payload, dict):
                raise PayloadError("body", "expected a JSON object")
            return payload

        def do_GET(self) -> None:
            if not self._authorized():
                self._send(401, {"error": {"auth": "missing or bad token"}})
                return
            if self.path == "/v1/health":
                self._send(200, service.health())
            elif self.path == "/v1/interfaces":
                self._send(200, service.interfaces())
            elif self.path.startswith("/v1/jobs/"):
                body = service.job_status(self.path.rsplit("/", 1)[-1])
                if body is None:
                    self._send(404, {"error": {"job_id": "unknown job"}})
                else:
                    self._send(200, body)
            else:
                self._send(404, {"error": {"path": f"unknown endpoint {self.path}"}})

        def do_POST(self) -> None:
            if not self._authorized():
                self._send(401, {"error": {"auth": "missing or bad token"}})
                return
            try:
                payload = self._read_json()
                if self.path == "/v1/rollout":
                    status, body = service.rollout(payload)
                    self._send(status, body)
                elif self.path == "/v1/score":
                    self._send(200, service.score(payload))
                elif self.path == "/v1/grpo":
                    self._send(200, service.grpo(payload))
                else:
                    self._send(404, {"error": {"path": f"unknown endpoint {self.path}"}})
            except PayloadError as exc:
                self._send(400, {"error": {exc.fieldname: exc.message}})
            except Exception as exc:  # pragma: no cover - defensive 500
                logger.exception("request failed")
                self._send(500, {"error": {"server": str(exc)}})

    host = host or runtime.server.host
    port = runtime.server.port if port is None else port
    return ThreadingHTTPServer((host, port), Handler)


def serve_forever(runtime: Runtime, host: Optional[str] = None, port: Optional[int] = None) -> None:
    httpd = make_server(runtime, host, port)
    logger.info("serving on %s:%d", *httpd.server_address)
    try:
        httpd.serve_forever()
    finally:
        httpd.server_close()
