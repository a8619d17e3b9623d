"""Role backends: the deterministic scripted oracle and the remote HTTP client.

The scripted backend is the executable form of the three role contracts. It
consumes the parsed workflow graph directly (not the prompt text) and serves
as the labeling reference the evaluation harness scores other backends
against. The remote backend sends the actual role prompts to a hosted
chat-completion endpoint and parses the JSON replies.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

import httpx

from .environments import API_CALL_FAILED, ApiResult
from .errors import (
    MissingParam,
    NoMatchingBranch,
    ProviderUnavailable,
    Timeout,
)
from .gar import (
    API_CALL,
    ASK_USER_INPUT,
    EXTERNAL_KNOWLEDGE,
    MESSAGE_TO_USER,
    GarEntry,
)
from .memory import FAIL, SUCCESS, ExecutionMemory, serialize_for_prompt
from .parser import SopWorkflow, render_sop
from .roles import (
    ActionData,
    StateDecision,
    UserTurn,
    build_action_prompt,
    build_state_prompt,
    build_user_prompt,
    parse_role_response,
)

SEEK_KNOWLEDGE = "seek external knowledge"
TERMINATE = "terminate the flow"

_WORD = re.compile(r"[a-z0-9]+")

# words that carry no branching signal in guard text
_GUARD_STOPWORDS = frozenset({"if", "else", "its", "is", "the", "a", "an", "or", "and", "then", "to"})

_NEGATION = frozenset({"no", "not", "nope", "dont", "doesnt", "cant", "cannot", "never", "lost", "without"})
_AFFIRMATION = frozenset({"yes", "yeah", "yep", "sure", "correct", "ok", "okay", "have", "has", "do", "does", "still"})
_POLARITY_VOCAB = _NEGATION | _AFFIRMATION

_GREETING = re.compile(r"^(hi|hello|hey|hii+|good (morning|afternoon|evening))[\s,!.]*", re.IGNORECASE)
_INTERROGATIVE = frozenset(
    {"how", "what", "where", "when", "why", "who", "which", "can", "could", "do", "does", "is", "are", "should", "would", "will"}
)

_GO_BACK_PHRASES = ("go back", "previous", "earlier step")

# function words ignored when matching a go-back request onto earlier steps
_GO_BACK_NOISE = frozenset({"to", "the", "a", "an", "please", "i", "me", "my", "you", "want", "step"})

_COMPARATOR = re.compile(
    r"(less than or equal to|greater than or equal to|less than|greater than|more than|at least|at most|equal to)\s+(\d+(?:\.\d+)?)"
)

_NUMBER = re.compile(r"\d+(?:\.\d+)?")

# word-level typo fixes applied to user replies before they become observations
_TYPO_MAP = {
    "lisint": "listing",
    "lsting": "listing",
    "listng": "listing",
    "emial": "email",
    "emali": "email",
    "recieved": "received",
    "adress": "address",
    "numbr": "number",
    "requst": "request",
    "stauts": "status",
}

# display casing for identifier-ish words inside questions and queries
_DISPLAY_CASE = {"id": "ID", "otp": "OTP", "fsn": "FSN", "sku": "SKU"}


def tokens(text: str) -> list[str]:
    return _WORD.findall(text.lower().replace("-", " ").replace("_", " "))


def spell_correct(text: str) -> str:
    """Word-wise typo repair; unknown words pass through untouched."""

    def fix(match: re.Match) -> str:
        word = match.group(0)
        repl = _TYPO_MAP.get(word.lower())
        if repl is None:
            return word
        if word.isupper():
            return repl.upper()
        if word[0].isupper():
            return repl.capitalize()
        return repl

    return re.sub(r"[A-Za-z]+", fix, text)


def strip_greeting(text: str) -> str:
    return _GREETING.sub("", text.strip())


def is_question(text: str) -> bool:
    """Loose doubt/question detector used by the state and user oracles."""
    body = strip_greeting(text)
    if "?" in body:
        return True
    toks = tokens(body)
    return bool(toks) and toks[0] in _INTERROGATIVE


def display_phrase(text: str) -> str:
    """Human casing for entity phrases: 'listing id' -> 'listing ID'."""
    out = []
    for word in text.replace("_", " ").split():
        out.append(_DISPLAY_CASE.get(word.lower(), word))
    return " ".join(out)


def snake_case(text: str) -> str:
    return "_".join(tokens(text))


# --- guard matching -------------------------------------------------------


def _guard_content(guard: str) -> list[str]:
    return [t for t in tokens(guard) if t not in _GUARD_STOPWORDS]


def _is_else(guard: str) -> bool:
    return not _guard_content(guard) and tokens(guard)[:1] == ["else"]


def _observation_polarity(obs_tokens: set[str]) -> str | None:
    if obs_tokens & _NEGATION:
        return "negative"
    if obs_tokens & _AFFIRMATION:
        return "affirmative"
    return None


def _guard_score(guard: str, observation: str) -> float:
    """Positive score means the observation supports this guard."""
    content = _guard_content(guard)
    obs_tokens = set(tokens(observation))

    comparator = _COMPARATOR.search(" ".join(tokens(guard)))
    if comparator:
        op, bound_text = comparator.groups()
        bound = float(bound_text)
        numbers = [float(n) for n in _NUMBER.findall(observation)]
        if not numbers:
            return 0.0
        checks = {
            "less than or equal to": lambda x: x <= bound,
            "at most": lambda x: x <= bound,
            "less than": lambda x: x < bound,
            "greater than or equal to": lambda x: x >= bound,
            "at least": lambda x: x >= bound,
            "greater than": lambda x: x > bound,
            "more than": lambda x: x > bound,
            "equal to": lambda x: x == bound,
        }
        return 10.0 if any(checks[op](n) for n in numbers) else -5.0

    score = float(len(obs_tokens & set(content)))
    if set(content) & _POLARITY_VOCAB:
        guard_negative = bool(set(content) & _NEGATION)
        polarity = _observation_polarity(obs_tokens)
        if polarity == "negative":
            score += 2.0 if guard_negative else -2.0
        elif polarity == "affirmative":
            score += -2.0 if guard_negative else 2.0
    return score


def choose_branch(guards: list[str], observation: str) -> int:
    """Index of the guard the observation satisfies.

    Best positive score wins, first wins ties, 'else' is the fallback when
    nothing scores positive. NoMatchingBranch when there is no fallback.
    """
    else_index = None
    best_index, best_score = None, 0.0
    for i, guard in enumerate(guards):
        if _is_else(guard):
            if else_index is None:
                else_index = i
            continue
        score = _guard_score(guard, observation)
        if score > best_score:
            best_index, best_score = i, score
    if best_index is not None:
        return best_index
    if else_index is not None:
        return else_index
    raise NoMatchingBranch(
        f"observation {observation!r} matches none of {guards!r} and there is no else branch"
    )


# --- workflow navigation --------------------------------------------------


def _resolve_to_executable(workflow: SopWorkflow, node_id: str, observation: str) -> str:
    """Descend through chained condition nodes until an executable node."""
    node = workflow.nodes[node_id]
    while node.is_condition:
        child_guards = [g or "" for g, _ in node.children]
        child_ids = [c for _, c in node.children]
        all_conditions = all(workflow.nodes[c].is_condition for c in child_ids)
        if all_conditions and len(child_ids) > 1:
            pick = choose_branch(child_guards, observation)
        else:
            pick = 0
        node = workflow.nodes[child_ids[pick]]
    return node.id


def next_node(workflow: SopWorkflow, node_id: str, observation: str) -> str | None:
    """The executable node that follows node_id given its observation."""
    node = workflow.nodes[node_id]
    if not node.children:
        return None
    guarded = [(g, c) for g, c in node.children if workflow.nodes[c].is_condition]
    if guarded and len(guarded) == len(node.children):
        guards = [g or "" for g, _ in node.children]
        pick = choose_branch(guards, observation)
        return _resolve_to_executable(workflow, node.children[pick][1], observation)
    # single unguarded successor
    return _resolve_to_executable(workflow, node.children[0][1], observation)


def _label_index(workflow: SopWorkflow) -> dict[str, list[str]]:
    by_label: dict[str, list[str]] = {}
    for node_id, node in workflow.nodes.items():
        if not node.is_condition:
            by_label.setdefault(node.label, []).append(node_id)
    return by_label


def walk_memory(workflow: SopWorkflow, memory: ExecutionMemory) -> str | None:
    """Node the last non-knowledge memory entry sits on, or None if empty.

    Replays the history: repeats stay put, the natural successor advances,
    anything else is a recovery jump onto an earlier node with that label
    (or, failing that, the first graph node with that label).
    """
    by_label = _label_index(workflow)
    cur: str | None = None
    path: list[str] = []
    prev_obs = ""
    for entry in memory:
        if entry.action == SEEK_KNOWLEDGE:
            continue
        if cur is None:
            candidates = by_label.get(entry.action)
            cur = candidates[0] if candidates else workflow.root
        elif entry.action == workflow.nodes[cur].label:
            pass  # retry of the same step
        else:
            advanced = None
            try:
                nxt = next_node(workflow, cur, prev_obs)
            except NoMatchingBranch:
                nxt = None
            if nxt is not None and workflow.nodes[nxt].label == entry.action:
                advanced = nxt
            else:
                for earlier in reversed(path):
                    if workflow.nodes[earlier].label == entry.action:
                        advanced = earlier
                        break
                if advanced is None:
                    candidates = by_label.get(entry.action)
                    if candidates:
                        advanced = candidates[0]
            if advanced is not None:
                cur = advanced
        path.append(cur)
        prev_obs = entry.observation
    return cur


# --- scripted state role --------------------------------------------------


@dataclass
class ScriptedStateBackend:
    """Rule-based next-action decisions over the parsed workflow."""

    def decide(self, workflow: SopWorkflow, memory: ExecutionMemory) -> StateDecision:
        if len(memory) == 0:
            root = workflow.nodes[workflow.root]
            if root.is_condition:
                raise NoMatchingBranch("workflow begins with a condition and memory is empty")
            return StateDecision(
                thought="execution memory is empty, starting with the first action",
                next_action=root.label,
            )

        last = memory.last
        assert last is not None

        if last.action == SEEK_KNOWLEDGE and last.ok:
            for entry in reversed(memory.entries[:-1]):
                if entry.action != SEEK_KNOWLEDGE:
                    return StateDecision(
                        thought="knowledge delivered, resuming the interrupted action",
                        next_action=entry.action,
                    )
            root = workflow.nodes[workflow.root]
            return StateDecision(
                thought="knowledge delivered with no prior action, starting over",
                next_action=root.label,
            )

        if last.ok:
            cur = walk_memory(workflow, memory)
            if cur is None:
                root = workflow.nodes[workflow.root]
                return StateDecision(
                    thought="no workflow actions executed yet, starting with the first action",
                    next_action=root.label,
                )
            nxt = next_node(workflow, cur, last.observation)
            if nxt is None:
                return StateDecision(
                    thought="reached the end of the workflow",
                    next_action=TERMINATE,
                )
            return StateDecision(
                thought="last action succeeded, following the workflow",
                next_action=workflow.nodes[nxt].label,
            )

        # last action failed
        low = last.observation.lower()

        if any(phrase in low for phrase in _GO_BACK_PHRASES):
            target = self._go_back_target(memory)
            if target is not None:
                return StateDecision(
                    thought="user wants to return to an earlier step",
                    next_action=target,
                )

        if is_question(last.observation):
            return StateDecision(
                thought="user raised a question, consulting external knowledge",
                next_action=SEEK_KNOWLEDGE,
            )

        if low == API_CALL_FAILED:
            return StateDecision(
                thought="the api call failed, retrying the same action",
                next_action=last.action,
            )

        entity = self._failed_entity(low)
        if entity:
            target = self._collection_action(memory, entity)
            if target is not None:
                return StateDecision(
                    thought="the input was rejected, repeating the step that collected it",
                    next_action=target,
                )

        return StateDecision(
            thought="the action failed without a clearer signal, retrying it",
            next_action=last.action,
        )

    @staticmethod
    def _failed_entity(observation: str) -> list[str]:
        """Tokens of the entity named by an invalid/missing-parameter error."""
        for prefix in ("invalid ", "missing parameter: ", "unknown "):
            if observation.startswith(prefix):
                return tokens(observation[len(prefix):])
        return []

    @staticmethod
    def _collection_action(memory: ExecutionMemory, entity: list[str]) -> str | None:
        wanted = set(entity)
        for entry in reversed(memory.entries):
            label = entry.action
            if label.startswith("ask") or " ask " in label:
                if wanted & set(tokens(label)):
                    return label
        return None

    @staticmethod
    def _go_back_target(memory: ExecutionMemory) -> str | None:
        last = memory.last
        assert last is not None
        noise = set(tokens(" ".join(_GO_BACK_PHRASES))) | _GO_BACK_NOISE
        wanted = set(tokens(last.observation)) - noise
        best, best_score = None, 0.0
        for entry in reversed(memory.entries[:-1]):
            if entry.action == SEEK_KNOWLEDGE:
                continue
            label_tokens = set(tokens(entry.action)) - noise
            if not label_tokens:
                continue
            score = len(wanted & label_tokens) / len(wanted | label_tokens) if wanted else 0.0
            if score > best_score:
                best, best_score = entry.action, score
        if best is not None:
            return best
        for entry in reversed(memory.entries[:-1]):
            if entry.action != SEEK_KNOWLEDGE:
                return entry.action
        return None


# --- scripted action role -------------------------------------------------


@dataclass
class ActionContext:
    """What the action role may look at: collected slots and the history."""

    slot_store: dict[str, str] = field(default_factory=dict)
    slot_order: list[str] = field(default_factory=list)
    memory: ExecutionMemory = field(default_factory=ExecutionMemory)


def question_for(action: str, metadata: str | None = None) -> str:
    """Deterministic polite question for an ask-type action label."""
    low = action.lower()
    otp_match = re.search(r"otp received on (.+)$", low)
    if otp_match:
        return f"Could you please provide the OTP received on {otp_match.group(1).strip()}?"
    if low.startswith("ask user about access to"):
        thing = low.removeprefix("ask user about access to").strip()
        return f"Do you still have access to {thing}? Please reply yes or no."
    provide = re.search(r"ask user to provide (.+)$", low)
    if provide:
        return f"Could you please provide the {display_phrase(provide.group(1).strip())}?"
    ask = re.search(r"ask user (.+)$", low)
    if ask:
        return f"Could you please tell me {display_phrase(ask.group(1).strip())}?"
    return f"Could you please help me with the following: {action}?"


def question_subject(question: str) -> str:
    """The entity a question asks for, as displayed in the question text."""
    body = question.strip().rstrip("?")
    match = re.search(r"provide the (.+)$", body, re.IGNORECASE)
    if match:
        return match.group(1).strip()
    match = re.search(r"(?:still have|have) (.+)$", body, re.IGNORECASE)
    if match:
        return re.sub(r"[.!?].*$", "", match.group(1)).split("? ")[0].strip()
    match = re.search(r"tell me (.+)$", body, re.IGNORECASE)
    if match:
        return match.group(1).strip()
    return body


def fill_params(entry: GarEntry, context: ActionContext) -> dict[str, str]:
    """Map required params onto collected slots: exact key, then token overlap."""
    out: dict[str, str] = {}
    for param in entry.params:
        if param in context.slot_store:
            out[param] = context.slot_store[param]
            continue
        wanted = set(tokens(param))
        best_key, best_score, best_recency = None, 0.0, -1
        for recency, key in enumerate(context.slot_order):
            key_tokens = set(tokens(key))
            if not key_tokens:
                continue
            overlap = len(wanted & key_tokens)
            if not overlap:
                continue
            score = overlap / len(wanted | key_tokens)
            if score > best_score or (score == best_score and recency > best_recency):
                best_key, best_score, best_recency = key, score, recency
        if best_key is None:
            raise MissingParam(param)
        out[param] = context.slot_store[best_key]
    return out


def _entity_from_ask_action(action: str) -> str:
    low = action.lower()
    otp_match = re.search(r"otp received on (.+)$", low)
    if otp_match:
        return f"OTP received on {otp_match.group(1).strip()}"
    provide = re.search(r"ask user to provide (.+)$", low)
    if provide:
        return display_phrase(provide.group(1).strip())
    about = re.search(r"ask user about (.+)$", low)
    if about:
        return about.group(1).strip()
    return display_phrase(low)


def search_query_from_memory(memory: ExecutionMemory) -> str:
    """Short search query from the user's doubt, pronouns resolved."""
    trigger = None
    for entry in reversed(memory.entries):
        if entry.action != SEEK_KNOWLEDGE and not entry.ok:
            trigger = entry
            break
    if trigger is None and len(memory):
        trigger = memory.entries[-1]
    if trigger is None:
        raise ValueError("no memory to form a search query from")
    doubt = strip_greeting(spell_correct(trigger.observation)).strip()
    subject = _entity_from_ask_action(trigger.action)
    resolved = re.sub(r"\b(it|this|that)\b", f"my {subject}", doubt, flags=re.IGNORECASE)
    resolved = re.sub(
        r"\b(id|otp|fsn|sku)\b",
        lambda m: _DISPLAY_CASE[m.group(0).lower()],
        resolved,
        flags=re.IGNORECASE,
    )
    resolved = resolved.strip().rstrip(".!").strip()
    if not resolved:
        resolved = f"about my {subject}"
    resolved = resolved[0].upper() + resolved[1:]
    if not resolved.endswith("?"):
        resolved += "?"
    return resolved


def status_message_for(
    entry: GarEntry, params: dict[str, str], result: ApiResult
) -> str | None:
    """User-facing status line after an api call; None means stay silent."""
    if not entry.params:
        return None
    value_param = entry.params[-1]
    subject = display_phrase(value_param)
    value = params.get(value_param, "")
    if result.feedback == FAIL:
        if result.observation == API_CALL_FAILED:
            return (
                f"The status of your {subject} ({value}) could not be retrieved "
                "due to an error. I am retrying the check for you."
            )
        return f"The status of the {subject} '{value}' is invalid. I am retrying the {entry.action}."
    return f"The status of the {subject} '{value}' is {result.observation}."


@dataclass
class ScriptedActionBackend:
    """Deterministic action-data generation for all four task shapes."""

    def action_data(self, entry: GarEntry, context: ActionContext) -> ActionData:
        params = None
        user_interaction = None
        search_query = None
        if API_CALL in entry.action_types:
            params = fill_params(entry, context)
        if ASK_USER_INPUT in entry.action_types:
            user_interaction = question_for(entry.action, entry.user_interaction_metadata)
        elif MESSAGE_TO_USER in entry.action_types and API_CALL not in entry.action_types:
            user_interaction = entry.user_interaction_metadata or ""
        if EXTERNAL_KNOWLEDGE in entry.action_types:
            search_query = search_query_from_memory(context.memory)
        return ActionData(
            thought=f"preparing data to execute: {entry.action}",
            user_interaction=user_interaction,
            params=params,
            search_query=search_query,
        )

    def status_message(
        self, entry: GarEntry, params: dict[str, str], result: ApiResult
    ) -> str | None:
        return status_message_for(entry, params, result)


# --- scripted user role ---------------------------------------------------

_EMAIL = re.compile(r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b")
_OTP = re.compile(r"\b\d{4,8}\b")
_PHONE = re.compile(r"\+?\d[\d\s().-]{6,}\d")
_ID_TOKEN = re.compile(r"\b[A-Za-z][A-Za-z0-9]{4,}\b")


def _find_id_token(text: str) -> str | None:
    for token in _ID_TOKEN.findall(text):
        has_digit = any(c.isdigit() for c in token)
        if has_digit or token.isupper():
            return token
    return None


def _extract_for_format(reply: str, expected_format: str) -> tuple[str | None, str | None]:
    """(value, kind) extracted per the expected-format description."""
    fmt = expected_format.lower()
    if "yes or no" in fmt:
        toks = set(tokens(reply))
        if toks & _NEGATION:
            return "no", "yes_no"
        if toks & _AFFIRMATION:
            return "yes", "yes_no"
        return None, "yes_no"
    if "email" in fmt:
        match = _EMAIL.search(reply)
        return (match.group(0), "email") if match else (None, "email")
    if "phone" in fmt:
        match = _PHONE.search(reply)
        if match:
            digits = re.sub(r"[^\d+]", "", match.group(0))
            return digits, "phone"
        return None, "phone"
    # "alphanumeric" contains "numeric", so ID formats must be tested first
    if "alphanumeric" in fmt or re.search(r"\bid\b", fmt):
        return _find_id_token(reply), "id"
    if "otp" in fmt or "numeric" in fmt:
        match = _OTP.search(reply)
        return (match.group(0), "otp") if match else (None, "otp")
    # unconstrained format: any non-empty reply counts
    cleaned = reply.strip()
    return (cleaned or None), "text"


@dataclass
class ScriptedUserBackend:
    """Validation, slot extraction, and acknowledgment for user replies."""

    WAIT_MESSAGE = "I am working on it. Please wait a moment."

    def user_turn(self, question: str, user_reply: str, expected_format: str) -> UserTurn:
        corrected = spell_correct(user_reply)
        subject = question_subject(question)
        slot_key = snake_case(subject)

        if is_question(corrected):
            return UserTurn(
                thought="the reply is a question, asking the user to wait",
                input_validation=FAIL,
                user_response=self.WAIT_MESSAGE,
                slots={},
            )

        value, kind = _extract_for_format(corrected, expected_format)
        if value is None:
            return UserTurn(
                thought="the reply does not satisfy the expected format",
                input_validation=FAIL,
                user_response="Thank you. That does not look like what I need, let me ask again.",
                slots={},
            )

        if kind == "yes_no":
            response = "Thank you for confirming."
        else:
            response = f"Thank you for providing the {subject}."
        return UserTurn(
            thought="the reply satisfies the expected format",
            input_validation=SUCCESS,
            user_response=response,
            slots={slot_key: value},
        )


# --- composite scripted backend --------------------------------------------


@dataclass
class ScriptedBackend:
    """All three roles behind one object; engine-facing contract."""

    state: ScriptedStateBackend = field(default_factory=ScriptedStateBackend)
    action: ScriptedActionBackend = field(default_factory=ScriptedActionBackend)
    user: ScriptedUserBackend = field(default_factory=ScriptedUserBackend)

    kind = "scripted"

    def decide_state(self, workflow: SopWorkflow, memory: ExecutionMemory) -> StateDecision:
        return self.state.decide(workflow, memory)

    def action_data(self, entry: GarEntry, context: ActionContext) -> ActionData:
        return self.action.action_data(entry, context)

    def status_message(self, entry, params, result) -> str | None:
        return self.action.status_message(entry, params, result)

    def user_turn(self, question: str, user_reply: str, expected_format: str) -> UserTurn:
        return self.user.user_turn(question, user_reply, expected_format)


# --- remote backend ---------------------------------------------------------


@dataclass
class RemoteBackend:
    """Chat-completion client speaking the documented single-turn wire format.

    Request: {"model": ..., "messages": [{"role": "user", "content": prompt}]}
    Reply text is read from choices[0].message.content. The role prompts are
    built from the shipped templates, so a hosted model sees exactly the
    contract text.
    """

    endpoint: str
    model_name: str = "gpt-4o-mini"
    timeout: float = 30.0
    max_retries: int = 2
    api_key: str | None = None
    transport: object | None = None

    kind = "remote"

    def __post_init__(self):
        self._client = httpx.Client(timeout=self.timeout, transport=self.transport)

    def complete(self, role: str, prompt: str) -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                response = self._client.post(self.endpoint, json=payload, headers=headers)
                response.raise_for_status()
                data = response.json()
                return data["choices"][0]["message"]["content"]
            except httpx.TimeoutException as exc:
                last_error = Timeout(f"backend timed out: {exc}")
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = ProviderUnavailable(f"backend request failed: {exc}")
            if attempt < self.max_retries:
                time.sleep(min(0.2 * (attempt + 1), 1.0))
        assert last_error is not None
        raise last_error

    def decide_state(self, workflow: SopWorkflow, memory: ExecutionMemory) -> StateDecision:
        prompt = build_state_prompt(render_sop(workflow), serialize_for_prompt(memory))
        return parse_role_response("state", self.complete("state", prompt))

    def action_data(self, entry: GarEntry, context: ActionContext) -> ActionData:
        parts = []
        if entry.params:
            known = "; ".join(f"{k}={v}" for k, v in context.slot_store.items()) or "none"
            parts.append(f"required params: {', '.join(entry.params)}. known slots: {known}.")
        if entry.user_interaction_metadata:
            parts.append(f"user interaction: {entry.user_interaction_metadata}.")
        if EXTERNAL_KNOWLEDGE in entry.action_types:
            parts.append("execution memory:\n" + serialize_for_prompt(context.memory))
        prompt = build_action_prompt(
            entry.action, ", ".join(sorted(entry.action_types)), "\n".join(parts) or "none"
        )
        return parse_role_response("action", self.complete("action", prompt))

    def status_message(self, entry: GarEntry, params: dict[str, str], result: ApiResult) -> str | None:
        if not entry.params:
            return None
        context = (
            f"api result: {result.observation}. outcome: "
            f"{'failure' if result.feedback == FAIL else 'success'}. "
            f"params used: {params}."
        )
        prompt = build_action_prompt(entry.action, "message_to_user", context)
        data = parse_role_response("action", self.complete("action", prompt))
        return data.user_interaction

    def user_turn(self, question: str, user_reply: str, expected_format: str) -> UserTurn:
        prompt = build_user_prompt(question, user_reply, expected_format)
        return parse_role_response("user", self.complete("user", prompt))


def make_backend(config: dict, transport=None):
    """Backend from the `backend` config section."""
    backend_cfg = config.get("backend", config)
    kind = backend_cfg.get("kind", "scripted")
    if kind == "scripted":
        return ScriptedBackend()
    if kind == "remote":
        endpoint = backend_cfg.get("endpoint")
        if not endpoint:
            raise ProviderUnavailable("remote backend configured without an endpoint")
        return RemoteBackend(
            endpoint=endpoint,
            model_name=backend_cfg.get("model_name") or "gpt-4o-mini",
            timeout=float(backend_cfg.get("timeout", 30.0)),
            max_retries=int(backend_cfg.get("max_retries", 2)),
            api_key=backend_cfg.get("api_key"),
            transport=transport,
        )
    raise ValueError(f"unknown backend kind {kind!r}")
