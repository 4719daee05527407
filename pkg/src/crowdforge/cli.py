"""Requester command-line client.

Thin mappings onto the requester API: push specs, launch to the
marketplace, monitor progress, download datasets and bundles.
``validate`` runs fully offline. Exit codes: 0 success, 1 validation
failure, 2 transport/configuration failure.

Config precedence: flags > environment (CROWDFORGE_API_URL,
CROWDFORGE_TOKEN, CROWDFORGE_PIPELINE) > config file (JSON).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import httpx

from . import analytics
from .parsing import (
    parse_exam_config,
    parse_pipeline_document,
    parse_pipeline_spec,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_TRANSPORT = 2


class CliError(click.ClickException):
    def __init__(self, message: str, exit_code: int = EXIT_TRANSPORT):
        super().__init__(message)
        self.exit_code = exit_code


def _load_config_file(path: str | None) -> dict:
    candidates = [path] if path else [
        os.path.join(os.path.expanduser("~"), ".config", "crowdforge.json")
    ]
    for candidate in candidates:
        if candidate and os.path.exists(candidate):
            try:
                return json.loads(Path(candidate).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise CliError(f"cannot read config file {candidate}: {exc}")
    return {}


class Settings:
    def __init__(self, api_url, token, pipeline, fmt, config_path):
        file_cfg = _load_config_file(config_path)
        env = os.environ
        self.api_url = (api_url or env.get("CROWDFORGE_API_URL")
                        or file_cfg.get("api_url") or "http://127.0.0.1:8787")
        self.token = token or env.get("CROWDFORGE_TOKEN") or file_cfg.get("token") or ""
        self.pipeline = (pipeline or env.get("CROWDFORGE_PIPELINE")
                         or file_cfg.get("pipeline") or None)
        self.fmt = fmt or file_cfg.get("format") or "table"

    def client(self) -> httpx.Client:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return httpx.Client(base_url=self.api_url.rstrip("/"), headers=headers,
                            timeout=30.0)

    def require_pipeline(self, override: str | None = None) -> str:
        name = override or self.pipeline
        if not name:
            raise CliError("no pipeline name; pass --pipeline or set "
                           "CROWDFORGE_PIPELINE")
        return name


pass_settings = click.make_pass_decorator(Settings)


@click.group()
@click.option("--api-url", default=None, help="Requester API base URL.")
@click.option("--token", default=None, help="Bearer token for the API.")
@click.option("--pipeline", "-p", default=None, help="Default pipeline name.")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default=None,
              help="Output format.")
@click.option("--config", "config_path", default=None,
              help="Path to a JSON config file.")
@click.pass_context
def main(ctx, api_url, token, pipeline, fmt, config_path):
    """Crowdforge requester client."""
    ctx.obj = Settings(api_url, token, pipeline, fmt, config_path)


def _request(settings: Settings, method: str, path: str, **kwargs) -> httpx.Response:
    try:
        with settings.client() as client:
            resp = client.request(method, path, **kwargs)
    except httpx.HTTPError as exc:
        raise CliError(f"transport failure: {exc}")
    if resp.status_code == 401:
        raise CliError("unauthorized: check --token / CROWDFORGE_TOKEN")
    if resp.status_code >= 500:
        raise CliError(f"server error {resp.status_code}: {resp.text[:200]}")
    return resp


def _emit(settings: Settings, payload, table: str | None = None) -> None:
    if settings.fmt == "json" or table is None:
        click.echo(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True))
    else:
        click.echo(table)


def _print_diagnostics(diags: list[dict]) -> None:
    for d in diags:
        click.echo(f"{d['severity']}: {d['path'] or '/'} [{d['code']}] {d['message']}")


# ---------------------------------------------------------------------------


def _detect_kind(doc: dict) -> str:
    if "question_set" in doc:
        return "question_set"
    if "sample_size" in doc and "tasks" not in doc:
        return "exam_config"
    if any(k in doc for k in ("tasks", "contexts", "annotations", "annotation_groups")):
        return "task_set"
    return "pipeline"


@main.command()
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@pass_settings
def validate(settings: Settings, spec_file: str):
    """Validate a spec document offline; prints diagnostics with paths."""
    raw = Path(spec_file).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        click.echo(f"error: / [malformed-document] {exc}")
        click.echo("1 error(s), 0 warning(s)")
        sys.exit(EXIT_VALIDATION)
    kind = _detect_kind(doc)
    if kind == "pipeline":
        diags = parse_pipeline_document(raw).diagnostics
    elif kind == "exam_config":
        diags = parse_exam_config(raw).diagnostics
    elif kind == "question_set":
        diags = parse_pipeline_spec(raw, "exam").diagnostics
    else:
        diags = parse_pipeline_spec(raw, "task_set").diagnostics
    errors = sum(1 for d in diags if d.is_error)
    warnings = len(diags) - errors
    _print_diagnostics([d.to_dict() for d in diags])
    click.echo(f"{errors} error(s), {warnings} warning(s)")
    sys.exit(EXIT_OK if errors == 0 else EXIT_VALIDATION)


@main.command()
@click.argument("spec_files", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@pass_settings
def push(settings: Settings, spec_files: tuple[str, ...]):
    """Upload pipeline documents; the server re-validates and versions them."""
    failures = 0
    for spec_file in spec_files:
        raw = Path(spec_file).read_text(encoding="utf-8")
        try:
            name = json.loads(raw).get("name")
        except json.JSONDecodeError as exc:
            click.echo(f"{spec_file}: not JSON: {exc}")
            failures += 1
            continue
        if not name:
            click.echo(f"{spec_file}: pipeline document requires a 'name'")
            failures += 1
            continue
        resp = _request(settings, "PUT", f"/api/v1/pipelines/{name}",
                        content=raw.encode())
        body = resp.json()
        _print_diagnostics(body.get("diagnostics", []))
        if resp.status_code == 422:
            click.echo(f"{spec_file}: rejected")
            failures += 1
        else:
            click.echo(f"{spec_file}: saved {name} version {body['version']}")
    sys.exit(EXIT_VALIDATION if failures else EXIT_OK)


@main.command()
@click.argument("kind", type=click.Choice(["exam", "taskset"]))
@click.option("--reward", type=float, required=True, help="Reward per HIT.")
@click.option("--count", type=int, required=True, help="Assignment count.")
@click.option("--gate", multiple=True, help="Exam pipeline(s) required to pass.")
@click.option("--pipeline", "-p", "pipeline_opt", default=None)
@click.option("--idempotency-token", default=None)
@pass_settings
def launch(settings: Settings, kind, reward, count, gate, pipeline_opt,
           idempotency_token):
    """Launch the exam or task set to the marketplace."""
    name = settings.require_pipeline(pipeline_opt)
    body = {"kind": kind, "reward": reward, "count": count}
    if gate:
        body["gate"] = list(gate)
    if idempotency_token:
        body["idempotency_token"] = idempotency_token
    resp = _request(settings, "POST", f"/api/v1/pipelines/{name}/launch", json=body)
    if resp.status_code == 422:
        detail = resp.json().get("detail", {})
        click.echo(f"launch rejected: {detail.get('message', resp.text)}")
        sys.exit(EXIT_VALIDATION)
    doc = resp.json()
    table = analytics.format_table(
        ["kind", "version", "reward", "count", "hit ids"],
        [[doc["kind"], doc["version"], f"{doc['reward']:.2f}", doc["count"],
          " ".join(doc["hit_ids"])]],
    )
    _emit(settings, doc, table)


def _fetch_report(settings: Settings, name: str) -> dict:
    resp = _request(settings, "GET", f"/api/v1/pipelines/{name}/report")
    if resp.status_code == 404:
        raise CliError(f"no pipeline named {name!r}")
    return resp.json()


@main.command()
@click.option("--pipeline", "-p", "pipeline_opt", default=None)
@pass_settings
def status(settings: Settings, pipeline_opt):
    """Progress summary: attempts, passes, task completion."""
    name = settings.require_pipeline(pipeline_opt)
    doc = _fetch_report(settings, name)
    rows = []
    exam = doc.get("exam")
    if exam:
        rows.append(["exam attempts", exam["graded_attempts"]])
        rows.append(["exam participants", exam["participants"]])
        rows.append(["exam passed", exam["passed"]])
    ts = doc.get("task_set")
    if ts:
        rows.append(["tasks complete",
                     f"{ts['tasks_complete']}/{ts['tasks_total']}"])
        rows.append(["submissions", ts["submissions"]])
        if ts["mean_duration_seconds"] is not None:
            rows.append(["mean task seconds", f"{ts['mean_duration_seconds']:.1f}"])
    _emit(settings, doc, analytics.format_table(["metric", "value"], rows))


@main.command()
@click.option("--pipeline", "-p", "pipeline_opt", default=None)
@pass_settings
def report(settings: Settings, pipeline_opt):
    """Full exam and task-set report."""
    name = settings.require_pipeline(pipeline_opt)
    doc = _fetch_report(settings, name)
    lines = []
    exam = doc.get("exam")
    if exam:
        lines.append("Exam score histogram:")
        rows = [[score, count] for score, count in exam["histogram"].items()]
        lines.append(analytics.format_table(["score", "attempts"], rows))
        lines.append("")
        lines.append("Per-question error rates:")
        qrows = [[qid, q["shown"], q["errors"], f"{q['error_rate']:.3f}"]
                 for qid, q in exam["questions"].items()]
        lines.append(analytics.format_table(["question", "shown", "errors", "rate"],
                                            qrows))
    ts = doc.get("task_set")
    if ts:
        lines.append("")
        lines.append("Task set:")
        lines.append(analytics.format_table(
            ["total", "complete", "in progress", "submissions"],
            [[ts["tasks_total"], ts["tasks_complete"], ts["tasks_in_progress"],
              ts["submissions"]]]))
        if ts["agreement"]:
            lines.append("")
            lines.append("Agreement:")
            arows = [[aid, f"{a['percent_agreement']:.3f}", f"{a['kappa']:.3f}"]
                     for aid, a in ts["agreement"].items()]
            lines.append(analytics.format_table(["annotation", "percent", "kappa"],
                                                arows))
    _emit(settings, doc, "\n".join(lines))


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write JSONL here instead of stdout.")
@click.option("--pipeline", "-p", "pipeline_opt", default=None)
@pass_settings
def export(settings: Settings, out, pipeline_opt):
    """Download the submitted-annotation dataset (JSON Lines)."""
    name = settings.require_pipeline(pipeline_opt)
    resp = _request(settings, "GET", f"/api/v1/pipelines/{name}/export.jsonl")
    if resp.status_code == 404:
        raise CliError(f"no pipeline named {name!r}")
    if out:
        Path(out).write_text(resp.text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(resp.text, nl=False)


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--pipeline", "-p", "pipeline_opt", default=None)
@pass_settings
def bundle(settings: Settings, out, pipeline_opt):
    """Download the re-launchable pipeline bundle (zip)."""
    name = settings.require_pipeline(pipeline_opt)
    resp = _request(settings, "GET", f"/api/v1/pipelines/{name}/bundle.zip")
    if resp.status_code == 404:
        raise CliError(f"no pipeline named {name!r}")
    Path(out).write_bytes(resp.content)
    click.echo(f"wrote {out} ({len(resp.content)} bytes)")


@main.command()
@click.option("--pipeline", "-p", "pipeline_opt", default=None)
@pass_settings
def annotators(settings: Settings, pipeline_opt):
    """List annotators with exam passes, task counts, and mean duration."""
    name = settings.require_pipeline(pipeline_opt)
    resp = _request(settings, "GET", f"/api/v1/pipelines/{name}/annotators")
    if resp.status_code == 404:
        raise CliError(f"no pipeline named {name!r}")
    doc = resp.json()
    rows = [[a["worker_id"], a["exams_passed"], a["tasks_submitted"],
             "-" if a["mean_task_seconds"] is None
             else f"{a['mean_task_seconds']:.1f}"]
            for a in doc["annotators"]]
    table = analytics.format_table(
        ["worker", "exams passed", "tasks", "mean seconds"], rows)
    _emit(settings, doc, table)


@main.command()
@click.option("--addr", default=None, help="host:port to bind (CROWDFORGE_ADDR).")
def serve(addr):
    """Run the annotation service."""
    import uvicorn

    from .gateway import GatewayConfig, create_app

    config = GatewayConfig.from_env()
    if addr:
        config.addr = addr
    host, _, port = config.addr.partition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1",
                port=int(port or 8787), log_level="info")


if __name__ == "__main__":
    main()
