"""Session engine: drives one workflow conversation end to end.

A session owns one parsed workflow, an execution memory, and a set of
effectors (API session, knowledge source, user channel). Each turn asks the
backend where the session is in the workflow, resolves that decision onto a
repository action, executes the action through the matching effector, and
records the outcome. The engine is the only writer of memory, slots, and
events, so a finished session replays deterministically from its transcript.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from . import retrieval
from .backends import SEEK_KNOWLEDGE, TERMINATE, ActionContext, spell_correct
from .environments import query_knowledge
from .errors import (
    BelowThreshold,
    LintFailure,
    MalformedResponse,
    MissingParam,
    NoMatchingBranch,
    ProviderUnavailable,
    SessionClosed,
    TurnTimeout,
)
from .gar import API_CALL, ASK_USER_INPUT, EXTERNAL_KNOWLEDGE, MESSAGE_TO_USER
from .memory import DONE, FAIL, SUCCESS, ExecutionMemory
from .parser import lint_sop

# session status values
RUNNING = "running"
TERMINATED = "terminated"
CLOSED = "closed"

# termination reasons
COMPLETED = "completed"
LOOP_GUARD = "loop_guard"
STEP_CEILING = "step_ceiling"
TURN_TIMEOUT = "turn_timeout"
BACKEND_ERROR = "backend_error"
NO_MATCHING_BRANCH = "no_matching_branch"

_GRACE_REASONS = (LOOP_GUARD, STEP_CEILING, TURN_TIMEOUT, BACKEND_ERROR, NO_MATCHING_BRANCH)

_session_counter = itertools.count(1)


@dataclass(frozen=True)
class SessionEvent:
    """One user-visible occurrence, ordered by seq within a session."""

    seq: int
    kind: str  # agent_message | agent_question | session_terminated
    text: str
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "kind": self.kind, "text": self.text, "meta": self.meta},
            ensure_ascii=False,
        )


@dataclass
class Transcript:
    """Immutable record of a finished session."""

    sop_name: str
    status: str
    reason: str
    events: list[SessionEvent]
    memory: ExecutionMemory
    state_trace: list[dict]

    @property
    def agent_messages(self) -> list[str]:
        return [e.text for e in self.events if e.kind in ("agent_message", "agent_question")]

    def memory_pairs(self) -> list[tuple[str, str]]:
        return [(e.action, e.feedback) for e in self.memory]

    def to_json(self) -> str:
        return json.dumps(
            {
                "sop": self.sop_name,
                "status": self.status,
                "reason": self.reason,
                "events": [json.loads(e.to_json()) for e in self.events],
                "memory": [
                    {"action": e.action, "observation": e.observation, "feedback": e.feedback}
                    for e in self.memory
                ],
                "state_trace": self.state_trace,
            },
            ensure_ascii=False,
            indent=2,
        )


class Session:
    """Mutable state of one running conversation."""

    def __init__(
        self,
        workflow,
        repo,
        backend,
        index,
        api_session,
        knowledge,
        channel,
        *,
        max_action_repeats: int = 3,
        max_retries: int = 2,
        grace_message: str,
    ):
        self.id = f"s{next(_session_counter):06d}"
        self.workflow = workflow
        self.repo = repo
        self.backend = backend
        self.index = index
        self.api = api_session
        self.knowledge = knowledge
        self.channel = channel
        self.max_action_repeats = max_action_repeats
        self.max_retries = max_retries
        self.grace_message = grace_message

        self.memory = ExecutionMemory()
        self.slot_store: dict[str, str] = {}
        self.slot_order: list[str] = []
        self.events: list[SessionEvent] = []
        self.state_trace: list[dict] = []
        self.status = RUNNING
        self.reason: str | None = None
        self._seq = 0
        # every executed action counts against this, looping or not
        self.step_ceiling = 4 * len(workflow.nodes)

    # -- event plumbing ------------------------------------------------------

    def _emit(self, kind: str, text: str, **meta) -> SessionEvent:
        self._seq += 1
        event = SessionEvent(self._seq, kind, text, dict(meta))
        self.events.append(event)
        return event

    def say(self, text: str, **meta) -> None:
        self._emit("agent_message", text, **meta)
        self.channel.send(text)

    # -- lifecycle -----------------------------------------------------------

    @property
    def done(self) -> bool:
        return self.status != RUNNING

    @property
    def awaiting_input(self) -> bool:
        flag = getattr(self.channel, "awaiting", None)
        return bool(flag.is_set()) if flag is not None else False

    def _terminate(self, reason: str) -> None:
        if reason in _GRACE_REASONS:
            self.say(self.grace_message, reason=reason)
        self.status = TERMINATED
        self.reason = reason
        self._emit("session_terminated", reason, reason=reason)

    def _close(self) -> None:
        self.status = CLOSED
        self.reason = CLOSED

    def transcript(self) -> Transcript:
        return Transcript(
            sop_name=self.workflow.name,
            status=self.status,
            reason=self.reason or "",
            events=list(self.events),
            memory=self.memory,
            state_trace=list(self.state_trace),
        )

    # -- the decide half of a turn --------------------------------------------

    def _decide(self) -> str | None:
        """Resolved repository action id for this turn, or None after grace."""
        last_error: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                decision = self.backend.decide_state(self.workflow, self.memory)
                action_id, score = retrieval.match_action(self.index, decision.next_action)
            except (BelowThreshold, MalformedResponse, ProviderUnavailable) as exc:
                last_error = exc
                continue
            except NoMatchingBranch as exc:
                self.state_trace.append({"turn": len(self.state_trace) + 1, "error": str(exc)})
                self._terminate(NO_MATCHING_BRANCH)
                return None
            self.state_trace.append(
                {
                    "turn": len(self.state_trace) + 1,
                    "thought": decision.thought,
                    "next_action": decision.next_action,
                    "resolved_action": action_id,
                    "score": round(score, 4),
                }
            )
            return action_id
        self.state_trace.append(
            {"turn": len(self.state_trace) + 1, "error": str(last_error)}
        )
        self._terminate(BACKEND_ERROR)
        return None

    # -- the execute half of a turn ---------------------------------------------

    def _action_context(self) -> ActionContext:
        return ActionContext(
            slot_store=self.slot_store, slot_order=self.slot_order, memory=self.memory
        )

    def _record_slots(self, slots: dict[str, str]) -> None:
        for key, value in slots.items():
            self.slot_store[key] = value
            self.slot_order.append(key)

    def _execute(self, action_id: str) -> None:
        entry = self.repo.get_entry(action_id)

        if action_id == TERMINATE:
            if entry.user_interaction_metadata:
                self.say(entry.user_interaction_metadata)
            self.memory.add(action_id, DONE, SUCCESS)
            self._terminate(COMPLETED)
            return

        if EXTERNAL_KNOWLEDGE in entry.action_types:
            data = self._action_data(entry)
            if data is None:
                return
            answer, feedback = query_knowledge(self.knowledge, data.search_query)
            if feedback == SUCCESS:
                self.say(answer, source="knowledge")
                self.memory.add(action_id, DONE, SUCCESS)
            else:
                self.memory.add(action_id, answer, FAIL)
            return

        if ASK_USER_INPUT in entry.action_types:
            data = self._action_data(entry)
            if data is None:
                return
            if API_CALL in entry.action_types:
                # the send half happens before the ask half
                result = self.api.call(entry.api, data.params or {})
                if not result.ok:
                    status = self.backend.status_message(entry, data.params or {}, result)
                    if status:
                        self.say(status, subtype="status")
                    self.memory.add(action_id, result.observation, FAIL)
                    return
            question = data.user_interaction or ""
            self._emit(
                "agent_question",
                question,
                expected_format=entry.user_interaction_metadata or "",
            )
            try:
                reply = self.channel.ask(question)
            except TurnTimeout:
                self._terminate(TURN_TIMEOUT)
                return
            except SessionClosed:
                self._close()
                return
            corrected = spell_correct(reply)
            turn = self._user_turn(question, reply, entry.user_interaction_metadata or "")
            if turn is None:
                return
            if turn.input_validation == SUCCESS:
                self._record_slots(turn.slots)
            if turn.user_response:
                self.say(turn.user_response, subtype="acknowledgment")
            self.memory.add(action_id, corrected, turn.input_validation)
            return

        if API_CALL in entry.action_types:
            data = self._action_data(entry)
            if data is None:
                return
            result = self.api.call(entry.api, data.params or {})
            status = self.backend.status_message(entry, data.params or {}, result)
            if status:
                self.say(status, subtype="status")
            self.memory.add(action_id, result.observation, result.feedback)
            return

        if MESSAGE_TO_USER in entry.action_types:
            data = self._action_data(entry)
            if data is None:
                return
            if data.user_interaction:
                self.say(data.user_interaction)
            self.memory.add(action_id, DONE, SUCCESS)
            return

        raise AssertionError(f"unhandled action type set: {entry.action_types}")

    def _action_data(self, entry):
        try:
            return self.backend.action_data(entry, self._action_context())
        except MissingParam as exc:
            # recorded as a failure so the state role can route to the ask step
            self.memory.add(entry.action, str(exc), FAIL)
            return None
        except (MalformedResponse, ProviderUnavailable):
            self._terminate(BACKEND_ERROR)
            return None

    def _user_turn(self, question, reply, expected_format):
        try:
            return self.backend.user_turn(question, reply, expected_format)
        except (MalformedResponse, ProviderUnavailable):
            self._terminate(BACKEND_ERROR)
            return None

    # -- turn loop -----------------------------------------------------------------

    def run_turn(self) -> None:
        """One decide-and-execute cycle; no-op on a finished session."""
        if self.done:
            return
        if len(self.memory) >= self.step_ceiling:
            self._terminate(STEP_CEILING)
            return
        action_id = self._decide()
        if action_id is None:
            return
        if self.memory.repeat_count(action_id) >= self.max_action_repeats:
            # a fourth execution of the same action is never attempted
            self._terminate(LOOP_GUARD)
            return
        self._execute(action_id)

    def run_to_completion(self) -> Transcript:
        while not self.done:
            self.run_turn()
        return self.transcript()


def start_session(
    workflow,
    repo,
    backend,
    index,
    api_session,
    knowledge,
    channel,
    config: dict,
    *,
    lint: bool = True,
    first_turn: bool = True,
) -> Session:
    """Build a session, gate it on lint, and run its first turn."""
    if lint:
        diagnostics = lint_sop(workflow, repo, index=index)
        if diagnostics:
            raise LintFailure(
                "; ".join(str(d) for d in diagnostics[:5])
                + (f" (+{len(diagnostics) - 5} more)" if len(diagnostics) > 5 else "")
            )
    engine_cfg = config.get("engine", {})
    backend_cfg = config.get("backend", {})
    session = Session(
        workflow,
        repo,
        backend,
        index,
        api_session,
        knowledge,
        channel,
        max_action_repeats=int(engine_cfg.get("max_action_repeats", 3)),
        max_retries=int(backend_cfg.get("max_retries", 2)),
        grace_message=engine_cfg.get(
            "grace_message",
            "I am sorry, I am unable to resolve this issue right now. "
            "Let me connect you to a support executive who can help you further.",
        ),
    )
    if first_turn:
        session.run_turn()
    return session


def run_script(script: dict, config: dict | None = None, backend=None, index=None) -> Transcript:
    """Run one scripted conversation to completion and return its transcript.

    The script names a workflow and supplies the user replies and the API
    behavior; everything else comes from packaged defaults. Callers looping
    over many scripts should pass a prebuilt retrieval index.
    """
    from . import assets
    from .backends import make_backend
    from .environments import ApiRegistry, ScriptedUserChannel, StubKnowledge, load_registry

    if config is None:
        config = assets.load_default_config()
    workflow = assets.load_workflow(script["sop"])
    repo = assets.load_repository()
    if index is None:
        index = retrieval.build_index(
            repo, retrieval.HashingEmbeddingProvider(), threshold=config["retrieval"]["threshold"]
        )
    if backend is None:
        backend = make_backend(config)
    registry: ApiRegistry = load_registry(script.get("api") or assets.load_registry_blueprint())
    channel = ScriptedUserChannel(script.get("user_replies", []))
    knowledge = StubKnowledge(assets.load_knowledge())
    session = start_session(
        workflow, repo, backend, index, registry.session(), knowledge, channel, config
    )
    return session.run_to_completion()
