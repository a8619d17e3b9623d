"""API registry, knowledge lookup, and user channel behavior."""

import threading

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sopflow import assets
from sopflow.environments import (
    API_CALL_FAILED,
    ApiResult,
    QueueUserChannel,
    RemoteApiClient,
    RemoteKnowledgeClient,
    ScriptedUserChannel,
    StubKnowledge,
    error_shaped,
    load_registry,
    query_knowledge,
)
from sopflow.errors import (
    KnowledgeUnavailable,
    SchemaError,
    SessionClosed,
    TurnTimeout,
    UnregisteredEndpoint,
)


@pytest.fixture()
def registry():
    return load_registry(assets.load_registry_blueprint())


def test_listing_status_valid_and_invalid(registry):
    api = registry.session()
    assert api.call("listing_status_check", {"listing_id": "LSTFYDF12G"}) == ApiResult(
        "Active", "success"
    )
    assert api.call("listing_status_check", {"listing_id": "LST1234"}) == ApiResult(
        "invalid listing id", "fail"
    )


def test_scripted_outage_then_recovery():
    registry = load_registry(
        {
            "listing_status_check": [
                {"respond": {"error": "api call failed"}, "times": 1},
                {"respond": "Active"},
            ]
        }
    )
    api = registry.session()
    assert api.call("listing_status_check", {"listing_id": "X"}).feedback == "fail"
    assert api.call("listing_status_check", {"listing_id": "X"}) == ApiResult("Active", "success")
    # counters are per session, not per blueprint
    fresh = registry.session()
    assert fresh.call("listing_status_check", {}).observation == API_CALL_FAILED


def test_unregistered_endpoint(registry):
    with pytest.raises(UnregisteredEndpoint):
        registry.session().call("warp_drive", {})


def test_rule_exhaustion_is_transport_failure():
    registry = load_registry({"ep": [{"respond": "ok", "times": 1}]})
    api = registry.session()
    assert api.call("ep", {}).ok
    assert api.call("ep", {}) == ApiResult(API_CALL_FAILED, "fail")


def test_registry_schema_validation():
    with pytest.raises(SchemaError):
        load_registry({"ep": []})
    with pytest.raises(SchemaError):
        load_registry({"ep": [{"respond": {"oops": "x"}}]})
    with pytest.raises(SchemaError):
        load_registry({"ep": [{"respond": {"error": "all good"}}]})  # not error-shaped
    with pytest.raises(SchemaError):
        load_registry({"ep": [{"respond": "invalid tea"}]})  # success text shaped like error
    with pytest.raises(SchemaError):
        load_registry({"ep": [{"respond": "ok", "times": 0}]})


def test_error_strings_normalized_lowercase():
    registry = load_registry({"ep": [{"respond": {"error": "Invalid Listing ID"}}]})
    assert registry.session().call("ep", {}).observation == "invalid listing id"


@given(st.text(min_size=1, max_size=20))
def test_api_result_invariant_over_blueprint(text):
    # fail iff error-shaped, for whatever rules the loader accepts
    if error_shaped(text):
        registry = load_registry({"ep": [{"respond": {"error": text}}]})
    else:
        registry = load_registry({"ep": [{"respond": text}]})
    result = registry.session().call("ep", {})
    assert (result.feedback == "fail") == error_shaped(result.observation)


def test_registry_replay_identical(registry):
    calls = [
        ("user_status_check", {}),
        ("listing_status_check", {"listing_id": "LSTHFKKFL"}),
        ("listing_status_check", {"listing_id": "nope"}),
        ("otp_validate", {"otp": "123456"}),
        ("otp_validate", {"otp": "999"}),
        ("request_status_check", {"request_id": "REQA77"}),
        ("request_status_check", {"request_id": "REQP55"}),
    ]
    a = [registry.session().call(e, p) for e, p in calls]
    b = [load_registry(assets.load_registry_blueprint()).session().call(e, p) for e, p in calls]
    assert a == b


def test_remote_api_client_paths():
    def handler(request):
        if request.url.path.endswith("/down"):
            raise httpx.ConnectError("refused")
        if request.url.path.endswith("/bad_id"):
            return httpx.Response(200, json={"result": "invalid listing id"})
        return httpx.Response(200, json={"result": "Active"})

    client = RemoteApiClient("http://api.test", transport=httpx.MockTransport(handler))
    assert client.call("status", {}) == ApiResult("Active", "success")
    assert client.call("bad_id", {}) == ApiResult("invalid listing id", "fail")
    assert client.call("down", {}) == ApiResult(API_CALL_FAILED, "fail")


# --- knowledge ---


def test_stub_knowledge_exact_hit():
    stub = StubKnowledge(assets.load_knowledge())
    answer, feedback = query_knowledge(stub, "How to find my listing ID?")
    assert feedback == "success"
    assert answer.startswith("To find your Listing ID, follow these steps:")
    assert "6. Under the 'Status Details', check the 'Listing Status'" in answer


def test_stub_knowledge_fallback():
    stub = StubKnowledge(assets.load_knowledge())
    answer, feedback = query_knowledge(stub, "what is the meaning of life")
    assert feedback == "success"
    assert answer == StubKnowledge.FALLBACK


def test_query_knowledge_rejects_empty():
    with pytest.raises(ValueError):
        query_knowledge(StubKnowledge({}), "  ")


def test_remote_knowledge_unreachable_is_fail():
    def handler(request):
        raise httpx.ConnectError("refused")

    client = RemoteKnowledgeClient("http://kb.test", transport=httpx.MockTransport(handler))
    answer, feedback = query_knowledge(client, "How to find my listing ID?")
    assert feedback == "fail"


def test_remote_knowledge_empty_answer_is_fail():
    def handler(request):
        return httpx.Response(200, json={"answer": ""})

    client = RemoteKnowledgeClient("http://kb.test", transport=httpx.MockTransport(handler))
    assert query_knowledge(client, "anything?") == ("no answer found", "fail")


def test_remote_knowledge_roundtrip():
    def handler(request):
        return httpx.Response(200, json={"answer": "All good."})

    client = RemoteKnowledgeClient("http://kb.test", transport=httpx.MockTransport(handler))
    assert query_knowledge(client, "anything?") == ("All good.", "success")


# --- user channels ---


def test_scripted_channel_replays_in_order():
    channel = ScriptedUserChannel(["LSTFYDF12G", "yes"])
    assert channel.ask("Could you please provide the listing ID?") == "LSTFYDF12G"
    assert channel.ask("Do you have access?") == "yes"
    assert channel.outbox == ["Could you please provide the listing ID?", "Do you have access?"]


def test_scripted_channel_exhaustion_times_out():
    channel = ScriptedUserChannel([])
    with pytest.raises(TurnTimeout):
        channel.ask("Anyone there?")


def test_scripted_channel_unicode_passthrough():
    reply = "my id is LSTÉÉÉ ✓"
    channel = ScriptedUserChannel([reply])
    assert channel.ask("id?") == reply


def test_queue_channel_threaded_reply():
    channel = QueueUserChannel(timeout=5.0)
    got = {}

    def agent():
        got["reply"] = channel.ask("Please provide the listing ID")

    thread = threading.Thread(target=agent)
    thread.start()
    assert channel.awaiting.wait(2.0)
    channel.push_reply("LSTHFKKFL")
    thread.join(2.0)
    assert got["reply"] == "LSTHFKKFL"
    assert channel.outbox == ["Please provide the listing ID"]


def test_queue_channel_timeout():
    channel = QueueUserChannel(timeout=0.05)
    with pytest.raises(TurnTimeout):
        channel.ask("Hello?")


def test_queue_channel_closed():
    channel = QueueUserChannel(timeout=1.0)
    channel.close()
    with pytest.raises(SessionClosed):
        channel.push_reply("too late")
    with pytest.raises(SessionClosed):
        channel.send("message after close")
