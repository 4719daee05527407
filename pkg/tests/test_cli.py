"""CLI behavior: offline validation, exit codes, and a live-server run."""

from __future__ import annotations

import json
import socket
import threading
import time

import pytest
import uvicorn
from click.testing import CliRunner

from crowdforge import fixtures
from crowdforge.cli import main
from crowdforge.gateway import GatewayConfig, create_app
from crowdforge.parsing import parse_pipeline_spec

runner = CliRunner()


def invoke(*args, env=None):
    return runner.invoke(main, list(args), env=env or {}, catch_exceptions=False)


class TestValidateOffline:
    def test_valid_fixture_exits_zero(self):
        result = invoke("validate", str(fixtures.fixture_path("covid_taskset")))
        assert result.exit_code == 0, result.output
        assert "0 error(s)" in result.output

    def test_bad_bounds_exits_one_and_names_code(self):
        result = invoke("validate", str(fixtures.fixture_path("bad_bounds")))
        assert result.exit_code == 1
        assert "bounds-inverted" in result.output

    def test_pipeline_document_detected(self):
        result = invoke("validate", str(fixtures.fixture_path("covid_pipeline")))
        assert result.exit_code == 0, result.output

    def test_malformed_json(self, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text("{nope")
        result = invoke("validate", str(bad))
        assert result.exit_code == 1
        assert "malformed-document" in result.output

    def test_offline_codes_match_server_side(self, app_client):
        """Offline validate and PUT produce identical diagnostic codes."""
        from conftest import AUTH

        client, _, _ = app_client
        for name in fixtures.TASK_SET_FIXTURES + ("bad_bounds",):
            raw = fixtures.load_text(name)
            offline = sorted(
                d.code for d in parse_pipeline_spec(raw, "task_set").diagnostics)
            doc = {"name": "probe", "task_set": json.loads(raw)}
            resp = client.put("/api/v1/pipelines/probe", json=doc, headers=AUTH)
            server = sorted(d["code"] for d in resp.json()["diagnostics"])
            assert offline == server, name


class TestTransportErrors:
    def test_unreachable_server_exits_two(self):
        result = invoke("--api-url", "http://127.0.0.1:9", "--token", "x",
                        "status", "-p", "nope")
        assert result.exit_code == 2

    def test_missing_pipeline_name_exits_two(self):
        result = invoke("--api-url", "http://127.0.0.1:9", "--token", "x",
                        "status")
        assert result.exit_code == 2


@pytest.fixture(scope="module")
def live_server():
    """A real uvicorn server on a random port, mock marketplace behind it."""
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    config = GatewayConfig(tokens=("cli-token",),
                           external_url=f"http://127.0.0.1:{port}")
    app = create_app(config)
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


@pytest.fixture(scope="module")
def cli_env(live_server):
    return {"CROWDFORGE_API_URL": live_server,
            "CROWDFORGE_TOKEN": "cli-token",
            "CROWDFORGE_PIPELINE": "covid-quantities"}


class TestAgainstLiveServer:
    def test_full_requester_workflow(self, cli_env, tmp_path):
        result = invoke("push", str(fixtures.fixture_path("covid_pipeline")),
                        env=cli_env)
        assert result.exit_code == 0, result.output
        assert "version 1" in result.output

        result = invoke("launch", "exam", "--reward", "0.50", "--count", "100",
                        env=cli_env)
        assert result.exit_code == 0, result.output
        assert "HIT-" in result.output

        result = invoke("launch", "taskset", "--reward", "1.00", "--count", "9",
                        env=cli_env)
        assert result.exit_code == 0, result.output

        result = invoke("status", env=cli_env)
        assert result.exit_code == 0, result.output
        assert "tasks complete" in result.output

        result = invoke("--format", "json", "status", env=cli_env)
        doc = json.loads(result.output)
        assert doc["task_set"]["tasks_total"] == 3

        result = invoke("report", env=cli_env)
        assert result.exit_code == 0, result.output

        out = tmp_path / "data.jsonl"
        result = invoke("export", "--out", str(out), env=cli_env)
        assert result.exit_code == 0, result.output
        assert out.exists()

        bundle_path = tmp_path / "bundle.zip"
        result = invoke("bundle", "--out", str(bundle_path), env=cli_env)
        assert result.exit_code == 0, result.output
        from crowdforge.bundle import read_bundle

        assert read_bundle(bundle_path.read_bytes()).pipeline_version == 1

        result = invoke("annotators", env=cli_env)
        assert result.exit_code == 0, result.output

    def test_push_invalid_spec_exits_one(self, cli_env, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({
            "name": "bad-pipeline",
            "task_set": json.loads(fixtures.load_text("bad_bounds"))}))
        result = invoke("push", str(bad), env=cli_env)
        assert result.exit_code == 1
        assert "bounds-inverted" in result.output

    def test_wrong_token_exits_two(self, live_server):
        env = {"CROWDFORGE_API_URL": live_server, "CROWDFORGE_TOKEN": "nope",
               "CROWDFORGE_PIPELINE": "covid-quantities"}
        result = invoke("status", env=env)
        assert result.exit_code == 2

    def test_json_and_table_show_same_fields(self, cli_env):
        as_json = json.loads(invoke("--format", "json", "annotators",
                                    env=cli_env).output)
        as_table = invoke("--format", "table", "annotators", env=cli_env).output
        for row in as_json["annotators"]:
            assert row["worker_id"] in as_table


class TestConfigPrecedence:
    def test_flags_beat_env_beat_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"api_url": "http://file.invalid",
                                   "pipeline": "from-file"}))
        from crowdforge.cli import Settings, _load_config_file

        assert _load_config_file(str(cfg))["pipeline"] == "from-file"
        import os

        os.environ["CROWDFORGE_PIPELINE"] = "from-env"
        try:
            s = Settings(None, None, None, None, str(cfg))
            assert s.pipeline == "from-env"
            assert s.api_url == "http://file.invalid"
            s = Settings(None, None, "from-flag", None, str(cfg))
            assert s.pipeline == "from-flag"
        finally:
            del os.environ["CROWDFORGE_PIPELINE"]
