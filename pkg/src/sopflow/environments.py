"""The three environments the agent acts on: APIs, knowledge, the user.

The scripted API registry drives offline runs: a blueprint maps each
endpoint to an ordered list of match rules (param predicate -> response),
and a per-session view tracks per-rule usage so scripts can say "fail twice,
then succeed". Domain errors are normalized to lowercase phrases; transport
failure is the fixed observation "api call failed".
"""

from __future__ import annotations

import queue
import re
import threading
from dataclasses import dataclass, field

import httpx

from .errors import (
    KnowledgeUnavailable,
    SchemaError,
    SessionClosed,
    TurnTimeout,
    UnregisteredEndpoint,
)
from .memory import FAIL, SUCCESS

API_CALL_FAILED = "api call failed"

_ERROR_PREFIXES = ("invalid", "missing parameter", "unknown", "no such")


def error_shaped(observation: str) -> bool:
    """True when an observation text encodes an error rather than a result."""
    low = observation.lower()
    return low == API_CALL_FAILED or low.startswith(_ERROR_PREFIXES)


@dataclass(frozen=True)
class ApiResult:
    observation: str
    feedback: str

    @property
    def ok(self) -> bool:
        return self.feedback == SUCCESS


@dataclass
class _Rule:
    when: dict[str, object]  # param -> literal or compiled pattern
    observation: str
    feedback: str
    times: int | None  # uses before the rule stops matching; None = unlimited

    def matches(self, params: dict[str, str]) -> bool:
        for key, predicate in self.when.items():
            value = params.get(key)
            if value is None:
                return False
            if isinstance(predicate, re.Pattern):
                if not predicate.search(str(value)):
                    return False
            elif str(value) != str(predicate):
                return False
        return True


@dataclass
class ApiRegistry:
    """Immutable blueprint: endpoint name -> ordered rules."""

    rules: dict[str, list[_Rule]] = field(default_factory=dict)

    def endpoints(self) -> set[str]:
        return set(self.rules)

    def session(self) -> "ApiSession":
        return ApiSession(self)


def load_registry(blueprint: dict) -> ApiRegistry:
    """Validate and compile the JSON blueprint format.

    Rule shape: {"when": {param: literal | {"pattern": regex}}, "respond":
    text | {"error": message}, "times": n}. Rules are tried in order; error
    messages are normalized to lowercase and must look like errors.
    """
    registry = ApiRegistry()
    if not isinstance(blueprint, dict):
        raise SchemaError("registry blueprint must be an object")
    for endpoint, raw_rules in blueprint.items():
        if not isinstance(raw_rules, list) or not raw_rules:
            raise SchemaError(f"{endpoint}: rules must be a non-empty list")
        compiled = []
        for i, raw in enumerate(raw_rules):
            when = {}
            for param, predicate in (raw.get("when") or {}).items():
                if isinstance(predicate, dict):
                    if set(predicate) != {"pattern"}:
                        raise SchemaError(f"{endpoint} rule {i}: bad predicate {predicate}")
                    when[param] = re.compile(predicate["pattern"])
                else:
                    when[param] = predicate
            respond = raw.get("respond")
            if isinstance(respond, dict):
                if set(respond) != {"error"}:
                    raise SchemaError(f"{endpoint} rule {i}: bad respond object {respond}")
                observation = str(respond["error"]).lower()
                if not error_shaped(observation) and observation != API_CALL_FAILED:
                    raise SchemaError(
                        f"{endpoint} rule {i}: error text {observation!r} is not error-shaped"
                    )
                feedback = FAIL
            elif isinstance(respond, str) and respond:
                if error_shaped(respond):
                    raise SchemaError(
                        f"{endpoint} rule {i}: success text {respond!r} looks like an error"
                    )
                observation = respond
                feedback = SUCCESS
            else:
                raise SchemaError(f"{endpoint} rule {i}: respond must be text or {{'error': msg}}")
            times = raw.get("times")
            if times is not None and (not isinstance(times, int) or times < 1):
                raise SchemaError(f"{endpoint} rule {i}: times must be a positive integer")
            compiled.append(_Rule(when=when, observation=observation, feedback=feedback, times=times))
        registry.rules[endpoint] = compiled
    return registry


@dataclass
class ApiSession:
    """Per-session view over a registry; consumes limited-use rules in order."""

    registry: ApiRegistry
    _used: dict[int, int] = field(default_factory=dict)

    def call(self, endpoint: str, params: dict[str, str]) -> ApiResult:
        rules = self.registry.rules.get(endpoint)
        if rules is None:
            raise UnregisteredEndpoint(f"no handler for endpoint {endpoint!r}")
        for rule in rules:
            if rule.times is not None and self._used.get(id(rule), 0) >= rule.times:
                continue
            if rule.matches(params):
                self._used[id(rule)] = self._used.get(id(rule), 0) + 1
                return ApiResult(rule.observation, rule.feedback)
        # script exhausted or nothing matched: surface as a transport failure
        return ApiResult(API_CALL_FAILED, FAIL)


def call_api(session: ApiSession, endpoint: str, params: dict[str, str]) -> ApiResult:
    return session.call(endpoint, params)


class RemoteApiClient:
    """HTTP bridge for real endpoints: POST {endpoint, params} -> {result}."""

    def __init__(self, base_url: str, timeout: float = 10.0, transport=None):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def call(self, endpoint: str, params: dict[str, str]) -> ApiResult:
        try:
            response = self._client.post(
                f"{self.base_url}/{endpoint}", json={"params": params}
            )
            response.raise_for_status()
        except httpx.HTTPError:
            return ApiResult(API_CALL_FAILED, FAIL)
        payload = response.json()
        observation = str(payload.get("result", ""))
        if not observation:
            return ApiResult(API_CALL_FAILED, FAIL)
        if error_shaped(observation):
            return ApiResult(observation.lower(), FAIL)
        return ApiResult(observation, SUCCESS)


_WORD = re.compile(r"[a-z0-9]+")


class StubKnowledge:
    """Canned question -> answer table with keyword-overlap fallback matching."""

    FALLBACK = (
        "I could not find an exact answer to your question. "
        "A support executive will follow up with more details if needed."
    )

    def __init__(self, table: dict[str, str]):
        self._rows = [(self._tokens(q), q, a) for q, a in table.items()]

    @staticmethod
    def _tokens(text: str) -> frozenset[str]:
        return frozenset(_WORD.findall(text.lower()))

    def lookup(self, query: str) -> str:
        asked = self._tokens(query)
        if not asked:
            return self.FALLBACK
        best_score, best_answer = 0.0, None
        for tokens, _, answer in self._rows:
            if not tokens:
                continue
            overlap = len(asked & tokens) / len(asked | tokens)
            if overlap > best_score:
                best_score, best_answer = overlap, answer
        if best_answer is not None and best_score >= 0.5:
            return best_answer
        return self.FALLBACK


class RemoteKnowledgeClient:
    """HTTP question answering: POST {"query": ...} -> {"answer": ...}."""

    def __init__(self, endpoint: str, timeout: float = 10.0, transport=None):
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def lookup(self, query: str) -> str:
        try:
            response = self._client.post(self.endpoint, json={"query": query})
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise KnowledgeUnavailable(f"knowledge endpoint unreachable: {exc}") from None
        return str(response.json().get("answer", ""))


def query_knowledge(client, search_query: str) -> tuple[str, str]:
    """Answer text plus feedback; unavailability and empty answers are failures."""
    if not search_query or not search_query.strip():
        raise ValueError("search query must be non-empty")
    try:
        answer = client.lookup(search_query)
    except KnowledgeUnavailable as exc:
        return str(exc), FAIL
    if not answer:
        return "no answer found", FAIL
    return answer, SUCCESS


class ScriptedUserChannel:
    """Replays a fixed list of user replies; exhaustion models a silent user."""

    def __init__(self, replies: list[str]):
        self._replies = list(replies)
        self._cursor = 0
        self.outbox: list[str] = []

    def send(self, message: str) -> None:
        self.outbox.append(message)

    def ask(self, question: str) -> str:
        self.send(question)
        if self._cursor >= len(self._replies):
            raise TurnTimeout("scripted replies exhausted")
        reply = self._replies[self._cursor]
        self._cursor += 1
        return reply


class QueueUserChannel:
    """Thread-safe channel bridging a live session to the HTTP service."""

    def __init__(self, timeout: float = 600.0):
        self._replies: queue.Queue[str] = queue.Queue()
        self.timeout = timeout
        self._closed = threading.Event()
        self.outbox: list[str] = []
        self.awaiting = threading.Event()

    def close(self) -> None:
        self._closed.set()
        self._replies.put("")  # wake any blocked ask()

    def push_reply(self, text: str) -> None:
        if self._closed.is_set():
            raise SessionClosed("session is closed")
        self._replies.put(text)

    def send(self, message: str) -> None:
        if self._closed.is_set():
            raise SessionClosed("session is closed")
        self.outbox.append(message)

    def ask(self, question: str) -> str:
        self.send(question)
        self.awaiting.set()
        try:
            reply = self._replies.get(timeout=self.timeout)
        except queue.Empty:
            raise TurnTimeout(f"no user reply within {self.timeout}s") from None
        finally:
            self.awaiting.clear()
        if self._closed.is_set():
            raise SessionClosed("session closed while awaiting reply")
        return reply
