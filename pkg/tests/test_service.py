"""HTTP service: session lifecycle, SSE delivery, and resume semantics."""

import threading
import time

import httpx
import pytest
import uvicorn
from fastapi.testclient import TestClient

from sopflow import assets
from sopflow.service import create_app, parse_sse_stream

TABLE6_API = {
    "user_status_check": [{"respond": "Active"}],
    "listing_status_check": [{"respond": "Active"}],
}


@pytest.fixture(scope="module")
def base_url():
    config = assets.load_default_config()
    config["engine"]["turn_timeout"] = 10.0
    app = create_app(config)
    uv_config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="critical")
    server = uvicorn.Server(uv_config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


@pytest.fixture()
def client():
    return TestClient(create_app())


def read_frames(response, until_kind, limit=20):
    """Consume SSE frames until one of kind until_kind (inclusive)."""
    frames = []
    for frame in parse_sse_stream(response.iter_lines()):
        frames.append(frame)
        if frame[1] == until_kind or len(frames) >= limit:
            break
    return frames


class TestLifecycleEndpoints:
    def test_sops_listing(self, client):
        names = [row["name"] for row in client.get("/sops").json()]
        assert names == ["brand_approval", "email_update", "listing_blocked"]
        body = client.get("/sops").json()
        assert all("check user status" in row["text"] or row["text"] for row in body)

    def test_create_unknown_sop_is_404(self, client):
        assert client.post("/sessions", json={"sop": "nope"}).status_code == 404

    def test_create_without_sop_is_422(self, client):
        assert client.post("/sessions", json={}).status_code == 422

    def test_create_with_bad_blueprint_is_422(self, client):
        response = client.post(
            "/sessions", json={"sop": "listing_blocked", "api": {"user_status_check": []}}
        )
        assert response.status_code == 422

    def test_unconfigured_remote_backend_is_503(self):
        config = assets.load_default_config()
        config["backend"]["kind"] = "remote"
        config["backend"]["endpoint"] = None
        bad = TestClient(create_app(config))
        assert bad.post("/sessions", json={"sop": "listing_blocked"}).status_code == 503

    def test_reply_to_unknown_session_is_404(self, client):
        assert (
            client.post("/sessions/s999999/reply", json={"text": "hi"}).status_code == 404
        )

    def test_info_of_unknown_session_is_404(self, client):
        assert client.get("/sessions/s999999").status_code == 404


class TestTurnTimeout:
    def test_silent_user_session_graces_out(self):
        config = assets.load_default_config()
        config["engine"]["turn_timeout"] = 0.4
        app_client = TestClient(create_app(config))
        created = app_client.post(
            "/sessions", json={"sop": "listing_blocked", "api": TABLE6_API}
        )
        sid = created.json()["session_id"]
        deadline = time.time() + 5
        while time.time() < deadline:
            info = app_client.get(f"/sessions/{sid}").json()
            if info["status"] == "terminated":
                break
            time.sleep(0.05)
        assert info["status"] == "terminated"
        assert info["reason"] == "turn_timeout"
        replied = app_client.post(f"/sessions/{sid}/reply", json={"text": "late"})
        assert replied.status_code == 409


class TestLiveConversation:
    def test_full_conversation_with_reconnect(self, base_url):
        with httpx.Client(base_url=base_url, timeout=10.0) as http:
            created = http.post(
                "/sessions", json={"sop": "listing_blocked", "api": TABLE6_API}
            )
            assert created.status_code == 201
            sid = created.json()["session_id"]

            collected = []

            # first connection: up to the knowledge detour's second question
            with http.stream("GET", f"/sessions/{sid}/events") as response:
                assert response.headers["content-type"].startswith("text/event-stream")
                frames = read_frames(response, until_kind="agent_question")
                collected.extend(frames)
                assert frames[-1][2]["text"] == "Could you please provide the listing ID?"

            assert http.post(f"/sessions/{sid}/reply", json={"text": "how to find it"}).status_code == 202

            # second connection resumes where the first left off
            last_seen = collected[-1][0]
            with http.stream(
                "GET",
                f"/sessions/{sid}/events",
                headers={"Last-Event-ID": str(last_seen)},
            ) as response:
                frames = read_frames(response, until_kind="agent_question")
                collected.extend(frames)
            assert "Seller Portal" in collected[-2][2]["text"]

            assert http.post(f"/sessions/{sid}/reply", json={"text": "LSTHFKKFL"}).status_code == 202

            last_seen = collected[-1][0]
            with http.stream(
                "GET",
                f"/sessions/{sid}/events",
                params={"last_event_id": last_seen},
            ) as response:
                frames = read_frames(response, until_kind="session_terminated")
                collected.extend(frames)

            seqs = [frame[0] for frame in collected]
            assert seqs == list(range(1, len(seqs) + 1))  # exactly once, in order
            assert collected[-1][1] == "session_terminated"
            assert collected[-1][2]["meta"]["reason"] == "completed"

            info = http.get(f"/sessions/{sid}").json()
            assert info["status"] == "terminated"
            assert info["reason"] == "completed"
            assert http.post(f"/sessions/{sid}/reply", json={"text": "more"}).status_code == 409

    def test_stream_replays_whole_history_after_completion(self, base_url):
        with httpx.Client(base_url=base_url, timeout=10.0) as http:
            created = http.post(
                "/sessions", json={"sop": "listing_blocked", "api": TABLE6_API}
            )
            sid = created.json()["session_id"]
            with http.stream("GET", f"/sessions/{sid}/events") as response:
                read_frames(response, until_kind="agent_question")
            http.post(f"/sessions/{sid}/reply", json={"text": "LSTHFKKFL"})
            deadline = time.time() + 5
            while time.time() < deadline:
                if http.get(f"/sessions/{sid}").json()["status"] == "terminated":
                    break
                time.sleep(0.05)
            # a late subscriber still gets every frame, then the stream closes
            with http.stream("GET", f"/sessions/{sid}/events") as response:
                frames = list(parse_sse_stream(response.iter_lines()))
            assert [f[0] for f in frames] == list(range(1, len(frames) + 1))
            assert frames[-1][1] == "session_terminated"

    def test_debug_flag_gates_state_trace(self, base_url):
        with httpx.Client(base_url=base_url, timeout=10.0) as http:
            created = http.post(
                "/sessions", json={"sop": "listing_blocked", "api": TABLE6_API}
            )
            sid = created.json()["session_id"]
            plain = http.get(f"/sessions/{sid}").json()
            assert "state_trace" not in plain
            debug = http.get(f"/sessions/{sid}", params={"debug": 1}).json()
            assert "state_trace" in debug
            assert debug["state_trace"], "trace should not be empty after the first turn"
            assert "thought" in debug["state_trace"][0]
