"""Small-scale end to end: fused decoding vs. plain chain-of-thought over
the sidecar with the bundled tiny model, driven through the decoding
package's CLI and the wire protocol only.

No accuracy target is asserted; the model is a deterministically
initialized toy.  The run must complete without per-question errors and
emit well-formed reports.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest
import requests
import uvicorn

from logit_server.app import create_app
from logit_server.model import ModelRunner

REPO_ROOT = Path(__file__).resolve().parents[2]
DATASET = REPO_ROOT / "src" / "choir" / "data" / "gsm8k_sample.jsonl"
PERSONAS = REPO_ROOT / "src" / "choir" / "data" / "personas_demographics.jsonl"


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def server_url():
    port = _free_port()
    app = create_app(ModelRunner.from_spec("tiny:5"))
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    deadline = time.time() + 30
    while time.time() < deadline:
        try:
            if requests.get(f"{url}/v1/model", timeout=1).status_code == 200:
                break
        except requests.RequestException:
            time.sleep(0.1)
    else:
        raise RuntimeError("sidecar did not come up")
    yield url
    server.should_exit = True
    thread.join(timeout=5)


def _run_cli(config: dict, out_dir: Path) -> subprocess.CompletedProcess:
    config_path = out_dir / "config.json"
    config_path.write_text(json.dumps(config))
    return subprocess.run(
        [sys.executable, "-m", "choir.cli", "run", "--config", str(config_path)],
        capture_output=True,
        text=True,
        timeout=600,
    )


@pytest.mark.parametrize("method", ["zscot", "choir"])
def test_twenty_questions_through_the_sidecar(server_url, tmp_path, method):
    out = tmp_path / method
    config = {
        "backend": f"remote:{server_url}",
        "dataset": str(DATASET),
        "method": method,
        "max_tokens": 12,
        "extraction_max_tokens": 8,
        "seed": 5,
        "out": str(out),
    }
    if method == "choir":
        config["personas"] = str(PERSONAS)
        config["attribute"] = "gender"
    proc = _run_cli(config, tmp_path)
    assert proc.returncode == 0, proc.stderr

    records = [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]
    assert len(records) == 20
    assert all(r["error"] is None for r in records)
    assert all(r["method"] == method for r in records)
    if method == "choir":
        # 4 streams (3 gender personas + pretrained) x 12 generated tokens.
        assert all(r["step_count"] == 4 * 12 for r in records)
        assert all(r["attribute"] == "gender" for r in records)
    else:
        assert all(r["step_count"] == 12 for r in records)
    assert all(r["latency_ms"] > 0 for r in records)

    summary = json.loads((out / "summary.json").read_text())
    assert method in summary["methods"]
    assert 0.0 <= summary["methods"][method]["overall"] <= 100.0
    assert (out / "summary.csv").exists()
    assert (out / "manifest.json").exists()


def test_no_streams_leak_after_runs(server_url):
    assert requests.get(f"{server_url}/v1/streams", timeout=5).json() == {"live_count": 0}
