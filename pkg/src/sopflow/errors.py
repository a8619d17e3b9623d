"""Exception types shared across the package."""


class SopError(Exception):
    """Base class for all errors raised by this package."""


# -- SOP parsing --------------------------------------------------------------

class IndentationError(SopError):  # noqa: A001 - intentionally shadows builtin inside this package
    """A line dedents to an indentation level that was never opened, or uses tabs."""


class EmptyWorkflow(SopError):
    """The SOP source contains no non-blank lines."""


class DanglingBranch(SopError):
    """A condition line has no indented body to branch into."""


class InvalidStructure(SopError):
    """The SOP text parses but violates a structural rule (multiple roots, children under a terminal)."""


# -- Action repository ---------------------------------------------------------

class SchemaError(SopError):
    """A repository row is missing a required column."""


class InvariantError(SopError):
    """A repository row violates a field invariant."""


class DuplicateAction(SopError):
    """Two repository rows share the same action identifier."""


class EmptyRepository(SopError):
    """The repository contains no rows."""


class UnknownAction(SopError):
    """Lookup of an action identifier that is not in the repository."""


# -- Retrieval -----------------------------------------------------------------

class ProviderUnavailable(SopError):
    """A remote provider (embeddings or completions) could not be reached."""


class Timeout(ProviderUnavailable):
    """A remote call exceeded its configured deadline."""


class BelowThreshold(SopError):
    """The best retrieval match scored below the configured threshold."""

    def __init__(self, query: str, best_action: str, score: float, threshold: float):
        super().__init__(
            f"best match {best_action!r} for {query!r} scored {score:.3f} < threshold {threshold}"
        )
        self.query = query
        self.best_action = best_action
        self.score = score
        self.threshold = threshold


# -- LLM roles / backends --------------------------------------------------------

class MalformedResponse(SopError):
    """A backend reply had no JSON object or was missing a required key."""


class NoMatchingBranch(SopError):
    """No outgoing branch guard matches the last observation."""


class MissingParam(SopError):
    """A required API parameter has no value in the slot store."""

    def __init__(self, param: str):
        super().__init__(f"missing parameter: {param}")
        self.param = param


# -- Environments ----------------------------------------------------------------

class UnregisteredEndpoint(SopError):
    """An API endpoint named by the repository is absent from the registry."""


class KnowledgeUnavailable(SopError):
    """The external knowledge source could not produce an answer."""


class SessionClosed(SopError):
    """The user channel was closed while the session still needed it."""


class TurnTimeout(SopError):
    """The user did not reply within the session's turn timeout."""


# -- Engine ------------------------------------------------------------------------

class LintFailure(SopError):
    """A workflow failed lint against the repository at session start."""


class EmptyPool(SopError):
    """A synthetic input pool required for a step has no items."""
