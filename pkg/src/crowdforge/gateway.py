"""HTTP surface: requester API under /api/v1 plus the worker-facing
ExternalQuestion pages.

Requester routes use bearer-token auth. Worker routes implement the
marketplace iframe contract: a preview request (assignmentId sentinel)
renders read-only and never writes; a real request binds the worker to an
exam attempt or a task lease and issues a one-time submit token, and an
accepted submit answers with a self-submitting form POST back to
``turkSubmitTo`` carrying the marketplace assignmentId.
"""

from __future__ import annotations

import json
import os
import secrets as _secrets
import time
import uuid
from dataclasses import dataclass, field

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import HTMLResponse, JSONResponse, Response

from . import analytics
from .bundle import export_bundle, import_bundle
from .canonical import context_doc, task_doc
from .conditions import ResponseState
from .connector import MarketplaceConnector, MockConnector
from .constraints import ConstraintRegistry
from .errors import (
    AlreadyPassedError,
    AttemptsExhaustedError,
    CrowdforgeError,
)
from .exam import STATUS_PASSED, ExamEngine
from .model import McQuestion
from .parsing import parse_pipeline_document
from .rendering import render_instruction
from .storage import AnnotationStore, KVStore, PipelineRecord

PREVIEW_SENTINEL = "ASSIGNMENT_ID_NOT_AVAILABLE"

_ERROR_STATUS = {
    "unknown-entity": 404,
    "not-launched": 409,
    "attempts-exhausted": 403,
    "already-passed": 409,
    "already-submitted": 409,
    "invalid-option": 422,
    "lease-expired": 410,
    "digest-mismatch": 422,
    "unsupported-format-version": 422,
    "unknown-attempt": 404,
}


@dataclass
class GatewayConfig:
    tokens: tuple[str, ...] = ()
    external_url: str = "http://127.0.0.1:8787"
    data_dir: str | None = None
    secret: bytes | None = None
    lease_seconds: float = 3600.0
    addr: str = "127.0.0.1:8787"
    static_dir: str | None = None  # built web UI, served at /static

    @classmethod
    def from_env(cls, env=None) -> "GatewayConfig":
        env = env if env is not None else os.environ
        tokens = tuple(t for t in env.get("CROWDFORGE_TOKENS", "").split(",") if t)
        addr = env.get("CROWDFORGE_ADDR", "127.0.0.1:8787")
        secret_hex = env.get("CROWDFORGE_SECRET", "")
        return cls(
            tokens=tokens,
            external_url=env.get("CROWDFORGE_EXTERNAL_URL", f"http://{addr}"),
            data_dir=env.get("CROWDFORGE_DATA_DIR") or None,
            secret=bytes.fromhex(secret_hex) if secret_hex else None,
            addr=addr,
            static_dir=env.get("CROWDFORGE_STATIC_DIR") or None,
        )


@dataclass
class GatewayContext:
    config: GatewayConfig
    store: AnnotationStore
    engine: ExamEngine
    connector: MarketplaceConnector
    registry: ConstraintRegistry | None = None


def _http_error(exc: CrowdforgeError) -> HTTPException:
    return HTTPException(
        status_code=_ERROR_STATUS.get(exc.code, 500),
        detail={"error": exc.code, "message": str(exc)},
    )


def _public_question_doc(q: McQuestion) -> dict:
    """Exam-facing question document: no answer, no explanations."""
    return {
        "question_id": q.question_id,
        "context": [context_doc(c) for c in q.context],
        "question": {"question_text": q.question_text, "options": dict(q.options)},
    }


def _wants_html(request: Request) -> bool:
    return "text/html" in request.headers.get("accept", "")


def _page(payload: dict, title: str) -> HTMLResponse:
    data = json.dumps(payload, ensure_ascii=False).replace("</", "<\\/")
    body = (
        "<!doctype html><html><head><meta charset=\"utf-8\">"
        f"<title>{title}</title></head><body><div id=\"app\"></div>"
        f"<script id=\"page-data\" type=\"application/json\">{data}</script>"
        "<script src=\"/static/app.js\"></script></body></html>"
    )
    return HTMLResponse(body)


def _respond(request: Request, payload: dict, title: str,
             status_code: int = 200) -> Response:
    if _wants_html(request):
        resp = _page(payload, title)
        resp.status_code = status_code
        return resp
    return JSONResponse(payload, status_code=status_code)


def create_app(config: GatewayConfig | None = None, *,
               kv: KVStore | None = None,
               store: AnnotationStore | None = None,
               connector: MarketplaceConnector | None = None,
               registry: ConstraintRegistry | None = None) -> FastAPI:
    config = config or GatewayConfig.from_env()
    if store is None:
        if kv is None:
            path = (os.path.join(config.data_dir, "journal.log")
                    if config.data_dir else None)
            kv = KVStore(path)
        store = AnnotationStore(kv, secret=config.secret,
                                lease_seconds=config.lease_seconds,
                                registry=registry)
    connector = connector or MockConnector()
    ctx = GatewayContext(config=config, store=store, engine=ExamEngine(store),
                         connector=connector, registry=registry)

    app = FastAPI(title="crowdforge", docs_url=None, redoc_url=None)
    app.state.ctx = ctx
    if config.static_dir and os.path.isdir(config.static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/static", StaticFiles(directory=config.static_dir),
                  name="static")

    def require_token(authorization: str = Header(default="")) -> None:
        token = authorization.removeprefix("Bearer ").strip()
        if not authorization.startswith("Bearer ") or token not in config.tokens:
            raise HTTPException(401, detail={"error": "unauthorized"})

    auth = Depends(require_token)

    @app.get("/")
    def root():
        return {"service": "crowdforge", "pipelines": store.pipeline_names()}

    # -- requester API -------------------------------------------------------

    @app.put("/api/v1/pipelines/{name}", dependencies=[auth])
    async def put_pipeline(name: str, request: Request):
        body = await request.body()
        parsed = parse_pipeline_document(body, registry=ctx.registry, name=name)
        diagnostics = [d.to_dict() for d in parsed.diagnostics]
        if not parsed.ok:
            return JSONResponse({"diagnostics": diagnostics}, status_code=422)
        record = store.save_pipeline(
            parsed.name,
            instruction=parsed.instruction,
            tutorial=parsed.tutorial,
            exam=parsed.exam,
            exam_config=parsed.exam_config,
            task_set=parsed.task_set,
        )
        return {"name": record.name, "version": record.version,
                "diagnostics": diagnostics}

    def _load(name: str, version: int | None = None) -> PipelineRecord:
        try:
            return store.load_pipeline(name, version)
        except CrowdforgeError as exc:
            raise _http_error(exc)

    @app.get("/api/v1/pipelines/{name}", dependencies=[auth])
    def get_pipeline(name: str, version: int | None = Query(default=None)):
        record = _load(name, version)
        doc: dict = {"name": record.name, "version": record.version,
                     "instruction": record.instruction}
        for key, raw in (("tutorial", record.tutorial_doc),
                         ("exam", record.exam_doc),
                         ("exam_config", record.exam_config_doc),
                         ("task_set", record.taskset_doc)):
            doc[key] = json.loads(raw) if raw is not None else None
        return doc

    @app.post("/api/v1/pipelines/{name}/launch", dependencies=[auth])
    async def launch(name: str, request: Request):
        body = await request.json()
        kind = {"taskset": "task_set"}.get(body.get("kind"), body.get("kind"))
        if kind not in ("exam", "task_set"):
            raise HTTPException(422, detail={"error": "invalid-config",
                                             "message": "kind must be exam or taskset"})
        record = _load(name)
        if kind == "exam" and (record.exam_doc is None or record.exam_config_doc is None):
            raise HTTPException(422, detail={"error": "invalid-config",
                                             "message": "pipeline has no exam + exam_config"})
        if kind == "task_set" and record.taskset_doc is None:
            raise HTTPException(422, detail={"error": "invalid-config",
                                             "message": "pipeline has no task set"})
        try:
            reward = float(body["reward"])
            count = int(body["count"])
        except (KeyError, TypeError, ValueError):
            raise HTTPException(422, detail={"error": "invalid-config",
                                             "message": "reward and count are required"})
        if reward < 0 or count < 1:
            raise HTTPException(422, detail={"error": "invalid-config",
                                             "message": "reward must be >= 0 and count >= 1"})
        gate = body.get("gate")
        if isinstance(gate, str):
            gate = [gate]
        if gate is None:
            # a launched exam on the same pipeline gates its task set by default
            gate = [name] if (kind == "task_set"
                              and store.get_launch(name, "exam") is not None) else []
        if kind == "task_set":
            for g in gate:
                if store.get_launch(g, "exam") is None:
                    raise HTTPException(422, detail={
                        "error": "invalid-config",
                        "message": f"gate {g!r} has no launched exam"})
        token = body.get("idempotency_token") or uuid.uuid4().hex
        existing = store.get_launch(name, kind)
        if existing is not None and existing.get("idempotency_token") == token:
            return existing
        path_kind = "exam" if kind == "exam" else "task"
        external = f"{config.external_url}/w/{path_kind}/{name}"
        hit_ids = connector.create_hit(kind, external, reward, count,
                                       client_token=token)
        doc = {
            "kind": kind,
            "version": record.version,
            "reward": reward,
            "count": count,
            "gate": list(gate),
            "hit_ids": hit_ids,
            "idempotency_token": token,
            "external_url": external,
            "launched_at": time.time(),
        }
        store.record_launch(name, kind, doc)
        return doc

    @app.get("/api/v1/pipelines/{name}/report", dependencies=[auth])
    def report(name: str):
        record = _load(name)
        out: dict = {"name": name, "version": record.version, "exam": None,
                     "task_set": None}
        exam_launch = store.get_launch(name, "exam")
        exam_version = (exam_launch or {}).get("version", record.version)
        exam_record = _load(name, exam_version) if exam_version != record.version else record
        pool = exam_record.exam()
        if pool is not None:
            sessions = ctx.engine.sessions(name, exam_version)
            questions = {q.question_id: q for q in pool.questions}
            out["exam"] = analytics.exam_report(sessions, questions).to_dict()
        ts_launch = store.get_launch(name, "task_set")
        ts_version = (ts_launch or {}).get("version", record.version)
        ts_record = _load(name, ts_version) if ts_version != record.version else record
        task_set = ts_record.task_set()
        if task_set is not None:
            rows = [
                analytics.AssignmentRow(
                    task_id=a.task_id, worker_id=a.worker_id, state=a.state,
                    started=a.started, submitted=a.submitted,
                    values=(a.response or {}).get("values", {}),
                )
                for a in store.assignments(name)
            ]
            reward = (ts_launch or {}).get("reward")
            out["task_set"] = analytics.task_progress(task_set, rows,
                                                      reward=reward).to_dict()
        return out

    @app.get("/api/v1/pipelines/{name}/export.jsonl", dependencies=[auth])
    def export_jsonl(name: str):
        _load(name)
        body = "".join(line + "\n" for line in store.export_dataset(name))
        return Response(body, media_type="application/x-ndjson")

    @app.get("/api/v1/pipelines/{name}/bundle.zip", dependencies=[auth])
    def bundle_zip(name: str):
        record = _load(name)
        return Response(export_bundle(record), media_type="application/zip")

    @app.post("/api/v1/pipelines/{name}/import", dependencies=[auth])
    async def import_pipeline(name: str, request: Request):
        data = await request.body()
        try:
            record = import_bundle(store, data, name)
        except CrowdforgeError as exc:
            raise _http_error(exc)
        return {"name": record.name, "version": record.version}

    @app.get("/api/v1/pipelines/{name}/annotators", dependencies=[auth])
    def annotators(name: str):
        _load(name)
        return {"annotators": [row.to_dict() for row in store.list_annotators(name)]}

    # -- worker-facing ExternalQuestion routes --------------------------------

    def _external_params(assignmentId: str | None, hitId: str | None,
                         workerId: str | None, turkSubmitTo: str | None) -> dict:
        preview = assignmentId == PREVIEW_SENTINEL or assignmentId is None
        if not preview and not all((assignmentId, hitId, workerId, turkSubmitTo)):
            raise HTTPException(422, detail={
                "error": "bad-request",
                "message": "non-preview requests require assignmentId, hitId, "
                           "workerId, and turkSubmitTo"})
        return {"preview": preview, "assignment_id": assignmentId,
                "hit_id": hitId, "worker_id": workerId,
                "submit_to": turkSubmitTo}

    def _issue_token(key: str, doc: dict) -> str:
        """One token per bind target; page reloads re-serve the same token."""
        with store.locks.lock(("token-issue", key)):
            existing = store.kv.get(key)
            if existing is not None:
                return existing
            token = _secrets.token_urlsafe(16)
            store.kv.put(f"token/{token}", doc)
            store.kv.put(key, token)
            return token

    @app.get("/w/tutorial/{name}")
    def tutorial_page(name: str, request: Request):
        record = _load(name)
        tutorial = record.tutorial()
        if tutorial is None:
            raise HTTPException(404, detail={"error": "unknown-entity",
                                             "message": "pipeline has no tutorial"})
        payload = {
            "kind": "tutorial",
            "pipeline": name,
            "instruction_html": render_instruction(record.instruction),
            "tutorial": json.loads(record.tutorial_doc),
        }
        return _respond(request, payload, f"Tutorial: {name}")

    @app.get("/w/exam/{name}")
    def exam_page(name: str, request: Request,
                  assignmentId: str | None = None, hitId: str | None = None,
                  workerId: str | None = None, turkSubmitTo: str | None = None):
        params = _external_params(assignmentId, hitId, workerId, turkSubmitTo)
        launch_doc = store.get_launch(name, "exam")
        if launch_doc is None:
            raise HTTPException(409, detail={"error": "not-launched",
                                             "message": "exam is not launched"})
        record = _load(name, launch_doc["version"])
        exam = record.exam()
        cfg = record.exam_config()
        pool = [q.question_id for q in exam.questions]
        by_id = {q.question_id: q for q in exam.questions}

        if params["preview"]:
            from .exam import derive_seed, sample_questions

            seed = derive_seed(store.secret, record.version, "preview", 0)
            sampled = sample_questions(pool, cfg.sample_size, seed)
            payload = {
                "kind": "exam", "pipeline": name, "preview": True,
                "instruction_html": render_instruction(record.instruction),
                "sample_size": cfg.sample_size,
                "max_attempts": cfg.max_attempts,
                "questions": [_public_question_doc(by_id[qid]) for qid in sampled],
            }
            return _respond(request, payload, f"Exam preview: {name}")

        worker = params["worker_id"]
        try:
            attempt = ctx.engine.current_or_open_attempt(
                name, record.version, cfg, pool, worker)
        except AlreadyPassedError:
            payload = {"kind": "exam", "pipeline": name, "preview": False,
                       "status": "passed", "attempts_remaining": 0}
            return _respond(request, payload, f"Exam: {name}")
        except AttemptsExhaustedError as exc:
            raise _http_error(exc)

        token = _issue_token(
            f"attempt-token/{name}/v{record.version}/{worker}/{attempt.index}",
            {
                "kind": "exam", "pipeline": name, "version": record.version,
                "worker": worker, "attempt_index": attempt.index,
                "submit_to": params["submit_to"],
                "external_assignment_id": params["assignment_id"],
                "hit_id": params["hit_id"], "used": False,
            },
        )
        session = ctx.engine.load_session(name, record.version, worker)
        payload = {
            "kind": "exam", "pipeline": name, "preview": False,
            "status": "in-progress",
            "instruction_html": render_instruction(record.instruction),
            "attempt_index": attempt.index,
            "attempts_remaining": cfg.max_attempts - len(session.attempts),
            "sample_size": cfg.sample_size,
            "questions": [_public_question_doc(by_id[qid]) for qid in attempt.sampled],
            "submit_token": token,
        }
        return _respond(request, payload, f"Exam: {name}")

    @app.get("/w/task/{name}")
    def task_page(name: str, request: Request,
                  assignmentId: str | None = None, hitId: str | None = None,
                  workerId: str | None = None, turkSubmitTo: str | None = None):
        params = _external_params(assignmentId, hitId, workerId, turkSubmitTo)
        launch_doc = store.get_launch(name, "task_set")
        if launch_doc is None:
            raise HTTPException(409, detail={"error": "not-launched",
                                             "message": "task set is not launched"})
        record = _load(name, launch_doc["version"])
        ts = record.task_set()

        if params["preview"]:
            payload = {
                "kind": "task", "pipeline": name, "preview": True,
                "instruction_html": render_instruction(record.instruction),
                "shared": [context_doc(c) for c in ts.shared],
                "task": task_doc(ts.tasks[0]),
            }
            return _respond(request, payload, f"Task preview: {name}")

        worker = params["worker_id"]
        for gate_name in launch_doc.get("gate", []):
            gate_launch = store.get_launch(gate_name, "exam")
            if gate_launch is None:
                raise HTTPException(403, detail={"error": "not-qualified",
                                                 "message": "gating exam unavailable"})
            gate_record = _load(gate_name, gate_launch["version"])
            status = ctx.engine.qualification_status(
                gate_name, gate_launch["version"], gate_record.exam_config(), worker)
            if status != STATUS_PASSED:
                payload = {
                    "kind": "task", "pipeline": name, "error": "not-qualified",
                    "gate": gate_name, "qualification_status": status,
                    "exam_url": f"{config.external_url}/w/exam/{gate_name}",
                }
                return _respond(request, payload, f"Task: {name}", status_code=403)

        assignment = store.next_assignment(
            name, worker, version=launch_doc["version"],
            external={"hit_id": params["hit_id"],
                      "assignment_id": params["assignment_id"]})
        if assignment is None:
            payload = {"kind": "task", "pipeline": name, "status": "complete"}
            return _respond(request, payload, f"Task: {name}")
        task = ts.task_by_id(assignment.task_id)
        token = _issue_token(
            f"assignment-token/{assignment.assignment_id}",
            {
                "kind": "task", "pipeline": name, "version": record.version,
                "worker": worker, "assignment_id": assignment.assignment_id,
                "submit_to": params["submit_to"],
                "external_assignment_id": params["assignment_id"],
                "hit_id": params["hit_id"], "used": False,
            },
        )
        payload = {
            "kind": "task", "pipeline": name, "preview": False,
            "status": "leased",
            "instruction_html": render_instruction(record.instruction),
            "task": task_doc(task),
            "shared": [context_doc(c) for c in ts.shared],
            "assignment_id": assignment.assignment_id,
            "lease_deadline": assignment.lease_deadline,
            "submit_token": token,
        }
        return _respond(request, payload, f"Task: {name}")

    @app.post("/w/submit/{token}")
    async def submit(token: str, request: Request):
        payload = await request.json()
        key = f"token/{token}"
        with store.locks.lock(("token", token)):
            doc = store.kv.get(key)
            if doc is None:
                raise HTTPException(404, detail={"error": "unknown-token"})
            if doc.get("used"):
                raise HTTPException(409, detail={"error": "already-submitted",
                                                 "message": "submit token already used"})
            if doc["kind"] == "exam":
                result_payload = _submit_exam(doc, payload)
            else:
                result_payload, accepted = _submit_task(doc, payload)
                if not accepted:
                    return _respond(request, result_payload, "Submission",
                                    status_code=422)
            doc["used"] = True
            store.kv.put(key, doc)
        result_payload["submit_form"] = {
            "action": doc["submit_to"],
            "method": "POST",
            "fields": {"assignmentId": doc["external_assignment_id"]},
        }
        return _respond(request, result_payload, "Submitted")

    def _submit_exam(doc: dict, payload: dict) -> dict:
        answers = payload.get("answers")
        if not isinstance(answers, dict):
            raise HTTPException(422, detail={"error": "bad-request",
                                             "message": "body requires 'answers'"})
        record = _load(doc["pipeline"], doc["version"])
        cfg = record.exam_config()
        questions = {q.question_id: q for q in record.exam().questions}
        try:
            result, session = ctx.engine.grade(
                doc["pipeline"], doc["version"], cfg, questions,
                doc["worker"], doc["attempt_index"], answers)
        except CrowdforgeError as exc:
            raise _http_error(exc)
        if result.passed:
            connector.grant_qualification(
                doc["worker"], f"{doc['pipeline']}:exam:v{doc['version']}")
        if doc.get("external_assignment_id"):
            record_submit = getattr(connector, "record_submit", None)
            if record_submit is not None:
                record_submit(doc["external_assignment_id"])
        # aggregate feedback only: mistakes and pass/fail, never per question
        return {
            "kind": "exam",
            "mistakes": result.mistakes,
            "passed": result.passed,
            "score": result.score,
            "status": session.status,
            "attempts_remaining": cfg.max_attempts - len(session.attempts),
        }

    def _submit_task(doc: dict, payload: dict) -> tuple[dict, bool]:
        try:
            state = ResponseState.from_wire(payload)
        except ValueError as exc:
            raise HTTPException(422, detail={"error": "bad-request",
                                             "message": str(exc)})
        try:
            result = store.submit_assignment(doc["assignment_id"], state)
        except CrowdforgeError as exc:
            raise _http_error(exc)
        if not result.accepted:
            return ({"kind": "task", "accepted": False,
                     "violations": [v.to_dict() for v in result.violations]},
                    False)
        if doc.get("external_assignment_id"):
            record_submit = getattr(connector, "record_submit", None)
            if record_submit is not None:
                record_submit(doc["external_assignment_id"])
        return ({"kind": "task", "accepted": True,
                 "cleared": [list(k) for k in result.cleared]}, True)

    return app


def main() -> None:
    """Entry point for ``crowdforge serve`` / ``python -m crowdforge.gateway``."""
    import uvicorn

    config = GatewayConfig.from_env()
    host, _, port = config.addr.partition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1",
                port=int(port or 8787), log_level="warning")


if __name__ == "__main__":
    main()
