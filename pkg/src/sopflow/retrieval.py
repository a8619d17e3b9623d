"""Vector matching of generated action text onto repository actions.

The state role emits free text; this module maps it to a repository entry by
cosine similarity over an exact scan of the (small) action index. The default
provider is a dependency-free character 3-gram hashing embedder; a remote
HTTP provider can be swapped in for neural embeddings via config.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import httpx
import numpy as np

from .errors import BelowThreshold, EmptyRepository, ProviderUnavailable, Timeout
from .gar import ActionRepository

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def _normalize(text: str) -> str:
    return _NON_ALNUM.sub(" ", text.lower()).strip()


class HashingEmbeddingProvider:
    """Character 3-gram hashing into a fixed-width L2-normalized vector."""

    def __init__(self, dim: int = 512):
        self._dim = dim

    def dim(self) -> int:
        return self._dim

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        padded = f" {_normalize(text)} "
        vec = np.zeros(self._dim, dtype=np.float64)
        for i in range(len(padded) - 2):
            gram = padded[i : i + 3]
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
            vec[int.from_bytes(digest, "big") % self._dim] += 1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class RemoteEmbeddingProvider:
    """HTTP provider: POST {"texts": [...]} -> {"embeddings": [[...], ...]}."""

    def __init__(self, endpoint: str, timeout: float = 10.0, transport=None):
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._dim: int | None = None

    def dim(self) -> int:
        if self._dim is None:
            raise ProviderUnavailable("remote embedding dimension unknown before first call")
        return self._dim

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        if any(not t for t in texts):
            raise ValueError("cannot embed empty text")
        try:
            response = self._client.post(self.endpoint, json={"texts": texts})
            response.raise_for_status()
        except httpx.TimeoutException as exc:
            raise Timeout(f"embedding endpoint timed out: {exc}") from None
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"embedding endpoint unreachable: {exc}") from None
        payload = response.json()
        vectors = [np.asarray(v, dtype=np.float64) for v in payload["embeddings"]]
        out = []
        for vec in vectors:
            if self._dim is None:
                self._dim = vec.shape[0]
            norm = np.linalg.norm(vec)
            out.append(vec / norm if norm else vec)
        return out


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


@dataclass
class RetrievalIndex:
    actions: list[str]
    matrix: np.ndarray  # one unit row per action, repository load order
    provider: object
    threshold: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def build_index(
    repo: ActionRepository, provider, threshold: float | None = None
) -> RetrievalIndex:
    """Embed every repository action once; index is immutable afterwards."""
    if len(repo) == 0:
        raise EmptyRepository("cannot index an empty repository")
    if threshold is None:
        from .config import default_threshold

        threshold = default_threshold()
    actions = repo.actions()
    vectors = provider.embed_batch(actions)
    return RetrievalIndex(
        actions=actions,
        matrix=np.vstack(vectors),
        provider=provider,
        threshold=threshold,
    )


def match_action(
    index: RetrievalIndex, generated_action: str, threshold: float | None = None
) -> tuple[str, float]:
    """Best-cosine repository action for the generated text.

    Ties break toward repository load order. Scores below the threshold raise
    BelowThreshold so the engine can treat the decision as unresolvable.
    """
    if not generated_action or not generated_action.strip():
        raise ValueError("cannot match empty action text")
    if threshold is None:
        threshold = index.threshold
    query = index.provider.embed(generated_action)
    scores = index.matrix @ query
    best = int(np.argmax(scores))
    score = float(scores[best])
    if score < threshold:
        raise BelowThreshold(generated_action, index.actions[best], score, threshold)
    return index.actions[best], score
