"""Theory-versus-method classification of (focal, top reference) pairs.

The model is asked for an option number and the answer is read from the
token log-probabilities at the first generated position that carries an
option token, not from the sampled text: ``p_theory`` is the renormalised
probability of option 1 among the option tokens present there.

Any chat-completions-compatible endpoint works. Requests are sent with
``temperature = 0``, ``logprobs = true`` and a small ``max_tokens``; the API
key, if any, comes from the ``DISPLACE_LLM_API_KEY`` environment variable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import httpx

from .errors import (
    JournalCorruptError,
    LogprobsUnavailableError,
    TransportError,
    UnparseableResponseError,
)

logger = logging.getLogger(__name__)

API_KEY_ENV = "DISPLACE_LLM_API_KEY"
PROMPT_MODES = ("zero_shot", "few_shot", "concrete_wording", "three_option")
JOURNAL_VERSION = 1

ZERO_SHOT_TEMPLATE = (
    "Given two papers - Paper A {focal_title} with abstract {focal_abstract}, and its primary "
    "reference Paper B {ref_title} with abstract {ref_abstract} - Paper A is better considered as "
    "an innovation in 'theory' (such as a different conceptual difference from its reference paper "
    "above), (2): an innovation in 'method' (such as an improvement on or formalization of the latter "
    "in mathematical frameworks)? Only give the option number."
)

THREE_OPTION_TEMPLATE = (
    "Given two papers - Paper A {focal_title} with abstract {focal_abstract}, and its primary "
    "reference Paper B {ref_title} with abstract {ref_abstract} - Paper A is better considered as "
    "(1): an innovation in 'theory' (such as a different conceptual difference from its reference paper "
    "above), (2): an innovation in 'method' (such as an improvement on or formalization of the latter "
    "in mathematical frameworks), or (3) others? Only give the option number."
)

CONCRETE_WORDING_TEMPLATE = (
    "For the following two papers: Paper A {focal_title}, whose abstract is {focal_abstract}, and its "
    "top reference Paper B {ref_title}, whose abstract is {ref_abstract}, Paper A is better considered "
    "as (1): an innovation in 'conceptual difference' (a different conceptual angle from its reference "
    "paper above), (2): an innovation in 'formalism difference' (an improvement on or formalization of "
    "the latter, such as in methodological or in mathematical frameworks)? Only give the option number."
)

FEW_SHOT_EXAMPLES = (
    'Example of "method innovation": [[Paper B, "The small world problem" by Milgram (1967), is a '
    'seminal work that introduced the concept of the "small world problem," which suggests that any two '
    "people in the world are connected through a short chain of acquaintances. The paper presented "
    'empirical evidence for this phenomenon through a series of experiments. Paper A, "Collective '
    "dynamics of 'small-world' networks\" by Watts and Strogatz (1998), builds upon Milgram's work by "
    "providing a mathematical framework to understand the small-world phenomenon. Watts and Strogatz "
    'introduced a new type of network model, known as the "small-world network," which exhibits both '
    "local clustering and long-range connections. They also developed a set of mathematical tools to "
    "analyze the properties of these networks. The key innovation in Paper A is methodological "
    "refinement of the small-world concept using graph theory and network analysis. Watts and Strogatz "
    "provided a rigorous mathematical framework to study the small-world phenomenon, which was "
    "previously described only empirically by Milgram. This formalization enabled the development of "
    "new models and simulations to understand the behavior of complex networks. Therefore, Paper A is "
    "an innovation in 'method']; Example of \"theory innovation\": [[Paper B, \"A note on the "
    'Entscheidungsproblem" by Church focuses on the Entscheidungsproblem (decision problem) and uses a '
    "lambda calculus-based approach to show that there is no general method for determining the "
    'validity of a mathematical statement. In contrast, Paper A "On computable numbers, with an '
    'application to the Entscheidungs problem" by Turing introduces the concept of a machine that can '
    "perform computations. The key innovation in Paper A is a new theory of computability, which is a "
    "quite different conceptual approach from Church's approach of understanding the "
    "Entscheidungsproblem. Therefore, Paper A is an innovation in 'theory']]"
)

_TEMPLATES = {
    "zero_shot": ZERO_SHOT_TEMPLATE,
    "few_shot": FEW_SHOT_EXAMPLES + "\n\n" + ZERO_SHOT_TEMPLATE,
    "concrete_wording": CONCRETE_WORDING_TEMPLATE,
    "three_option": THREE_OPTION_TEMPLATE,
}


# -- requests and prompts ---------------------------------------------------


@dataclass(frozen=True)
class ClassificationRequest:
    focal_title: str
    focal_abstract: str
    ref_title: str
    ref_abstract: str
    prompt_mode: str = "zero_shot"
    key: str | None = None

    def __post_init__(self):
        if self.prompt_mode not in PROMPT_MODES:
            raise ValueError(f"unknown prompt mode {self.prompt_mode!r}; expected one of {PROMPT_MODES}")

    @property
    def options(self) -> tuple[str, ...]:
        return ("1", "2", "3") if self.prompt_mode == "three_option" else ("1", "2")

    @classmethod
    def from_dict(cls, d: dict, prompt_mode: str | None = None) -> "ClassificationRequest":
        return cls(
            focal_title=d["focal_title"],
            focal_abstract=d["focal_abstract"],
            ref_title=d["ref_title"],
            ref_abstract=d["ref_abstract"],
            prompt_mode=prompt_mode or d.get("prompt_mode", "zero_shot"),
            key=d.get("key", d.get("focal")),
        )


def build_prompt(request: ClassificationRequest) -> str:
    """Fill the template of ``request.prompt_mode`` with the four texts.

    Raises
    ------
    ValueError
        If any of the four texts is empty or blank.
    """
    slots = {
        "focal_title": request.focal_title,
        "focal_abstract": request.focal_abstract,
        "ref_title": request.ref_title,
        "ref_abstract": request.ref_abstract,
    }
    for name, text in slots.items():
        if not isinstance(text, str) or not text.strip():
            raise ValueError(f"empty {name}")
    return _TEMPLATES[request.prompt_mode].format(**slots)


# -- results ----------------------------------------------------------------


@dataclass(frozen=True)
class ClassificationResult:
    p_theory: float
    chosen_option: int
    option_probs: dict[str, float]
    raw_token_logprobs: dict[str, float]
    model_id: str

    @property
    def p_method(self) -> float:
        return self.option_probs.get("2", 0.0)

    @property
    def p_other(self) -> float | None:
        return self.option_probs.get("3")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ClassificationResult":
        return cls(
            p_theory=float(d["p_theory"]),
            chosen_option=int(d["chosen_option"]),
            option_probs={k: float(v) for k, v in d["option_probs"].items()},
            raw_token_logprobs={k: float(v) for k, v in d["raw_token_logprobs"].items()},
            model_id=str(d["model_id"]),
        )


_OPTION_STRIP = re.compile(r"^[\s\(\[\{\"'*]*(\d)[\s\)\]\}\"'.:,*]*$")


def normalize_option_token(token: str) -> str | None:
    """Option number carried by a token, tolerating whitespace and brackets.

    ``" 1"``, ``"(1"``, ``"1)"``, ``"1."`` all map to ``"1"``; anything with
    other letters or digits maps to ``None``.

    >>> normalize_option_token(" (2)")
    '2'
    >>> normalize_option_token("12") is None
    True
    """
    m = _OPTION_STRIP.match(token)
    return m.group(1) if m else None


def _logsumexp(values: Sequence[float]) -> float:
    top = max(values)
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(math.exp(v - top) for v in values))


def probabilities_from_logprobs(position: dict, options: Sequence[str]) -> tuple[dict[str, float], dict[str, float]]:
    """Renormalised option probabilities at one generated position.

    ``position`` is one entry of ``choices[0].logprobs.content``. Surface
    forms that normalise to the same option are pooled. Returns the option
    probabilities and the raw token log-probabilities that were used.
    """
    candidates = [(position.get("token", ""), position.get("logprob"))]
    for alt in position.get("top_logprobs") or ():
        candidates.append((alt.get("token", ""), alt.get("logprob")))
    raw: dict[str, float] = {}
    for token, lp in candidates:
        if lp is None or token in raw:
            continue
        if normalize_option_token(token) in options:
            raw[token] = float(lp)
    pooled: dict[str, list[float]] = {}
    for token, lp in raw.items():
        pooled.setdefault(normalize_option_token(token), []).append(lp)
    log_opt = {opt: _logsumexp(lps) for opt, lps in pooled.items()}
    if not log_opt or all(v == -math.inf for v in log_opt.values()):
        raise UnparseableResponseError("no option token with finite log-probability")
    total = _logsumexp(list(log_opt.values()))
    probs = {opt: math.exp(log_opt.get(opt, -math.inf) - total) for opt in options}
    return probs, raw


def parse_completion(body: dict, options: Sequence[str], model: str) -> ClassificationResult:
    """Extract the classification from a chat-completions response body."""
    try:
        choice = body["choices"][0]
    except (KeyError, IndexError, TypeError):
        raise UnparseableResponseError("response has no choices") from None
    logprobs = choice.get("logprobs")
    content = logprobs.get("content") if isinstance(logprobs, dict) else None
    if not content:
        raise LogprobsUnavailableError("response carries no token log-probabilities")
    for position in content:
        # the prediction point is the first position that generated a number,
        # even one outside ``options`` (a "3" in two-option mode)
        if normalize_option_token(position.get("token", "")) is not None:
            probs, raw = probabilities_from_logprobs(position, options)
            chosen = max(options, key=lambda o: (probs[o], -int(o)))
            return ClassificationResult(
                p_theory=probs["1"],
                chosen_option=int(chosen),
                option_probs=probs,
                raw_token_logprobs=raw,
                model_id=str(body.get("model") or model),
            )
    raise UnparseableResponseError("no generated position carries an option token")


# -- transport ----------------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    """Retries for transport failures and transient HTTP statuses.

    Waits grow geometrically from ``backoff_initial`` by ``backoff_factor``,
    capped at ``backoff_max`` seconds.
    """

    max_attempts: int = 4
    backoff_initial: float = 0.5
    backoff_factor: float = 2.0
    backoff_max: float = 8.0
    timeout: float = 60.0
    retry_statuses: frozenset[int] = field(default_factory=lambda: frozenset({408, 429, 500, 502, 503, 504}))

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def delay(self, attempt: int) -> float:
        return min(self.backoff_initial * self.backoff_factor**attempt, self.backoff_max)


def completions_url(endpoint: str) -> str:
    endpoint = endpoint.rstrip("/")
    return endpoint if endpoint.endswith("/chat/completions") else endpoint + "/chat/completions"


def request_payload(model: str, prompt: str) -> dict:
    return {
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
        "max_tokens": 2,
        "logprobs": True,
        "top_logprobs": 5,
    }


class AuditLog:
    """Append-only JSONL record of every request/response exchange (thread-safe)."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def write(self, entry: dict) -> None:
        line = json.dumps(entry, sort_keys=True, ensure_ascii=False)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


def _post(client, url, payload, headers, policy, sleep):
    last = None
    for attempt in range(policy.max_attempts):
        try:
            resp = client.post(url, json=payload, headers=headers, timeout=policy.timeout)
        except httpx.HTTPError as exc:
            last = f"{type(exc).__name__}: {exc}"
        else:
            if resp.status_code == 200:
                try:
                    return resp.json()
                except ValueError:
                    raise UnparseableResponseError("response is not valid JSON") from None
            last = f"HTTP {resp.status_code}"
            if resp.status_code not in policy.retry_statuses:
                raise TransportError(f"{url}: {last}")
        if attempt + 1 < policy.max_attempts:
            logger.debug("attempt %d failed (%s); retrying", attempt + 1, last)
            sleep(policy.delay(attempt))
    raise TransportError(f"{url}: giving up after {policy.max_attempts} attempts ({last})")


def classify_pair(
    endpoint: str,
    model: str,
    request: ClassificationRequest,
    retry_policy: RetryPolicy | None = None,
    client: httpx.Client | None = None,
    api_key: str | None = None,
    audit: AuditLog | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ClassificationResult:
    """Send one pair to the endpoint and read ``p_theory`` off the logprobs.

    Raises
    ------
    TransportError
        Endpoint unreachable, or still failing after all retries.
    LogprobsUnavailableError
        The reply has no token log-probabilities; the sampled text is never
        used as a fallback.
    UnparseableResponseError
        No generated position carries an option token.
    """
    policy = retry_policy or RetryPolicy()
    key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
    headers = {"Authorization": f"Bearer {key}"} if key else {}
    payload = request_payload(model, build_prompt(request))
    url = completions_url(endpoint)
    own = client is None
    client = client or httpx.Client()
    try:
        body = None
        try:
            body = _post(client, url, payload, headers, policy, sleep)
            return parse_completion(body, request.options, model)
        finally:
            if audit is not None:
                audit.write({"key": request.key, "url": url, "request": payload, "response": body})
    finally:
        if own:
            client.close()


# -- batches ------------------------------------------------------------------


@dataclass(frozen=True)
class BatchItem:
    index: int
    key: str | None
    result: ClassificationResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None

    def to_dict(self) -> dict:
        d = {"index": self.index, "key": self.key, "status": "ok" if self.ok else "error"}
        if self.ok:
            d["result"] = self.result.to_dict()
        else:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BatchItem":
        if d["status"] == "ok":
            return cls(int(d["index"]), d.get("key"), result=ClassificationResult.from_dict(d["result"]))
        return cls(int(d["index"]), d.get("key"), error=str(d["error"]))


def batch_fingerprint(model: str, requests: Sequence[ClassificationRequest]) -> str:
    """Digest of the model and the prompts; the endpoint URL may change between runs."""
    h = hashlib.sha256()
    h.update(json.dumps(model, ensure_ascii=False).encode())
    for r in requests:
        h.update(json.dumps([r.key, build_prompt(r)], ensure_ascii=False).encode())
    return h.hexdigest()


class ProgressJournal:
    """Single-writer JSONL journal of finished batch items.

    The first line is a header carrying the batch fingerprint; each further
    line is one :class:`BatchItem`. A final line without a newline is a torn
    write from an interrupted run and is dropped; any other unreadable line,
    a foreign header or an out-of-range index makes the journal corrupt.
    """

    def __init__(self, path, fingerprint: str, n_requests: int):
        self.path = Path(path)
        self.fingerprint = fingerprint
        self.n_requests = n_requests
        self._fh = None

    def _header(self) -> dict:
        return {
            "journal": "displace-classify",
            "version": JOURNAL_VERSION,
            "fingerprint": self.fingerprint,
            "n_requests": self.n_requests,
        }

    def load(self) -> dict[int, BatchItem]:
        if not self.path.exists() or self.path.stat().st_size == 0:
            return {}
        text = self.path.read_text(encoding="utf-8")
        lines = text.split("\n")
        if not text.endswith("\n"):
            lines = lines[:-1]  # torn final write
        lines = [ln for ln in lines if ln]
        if not lines:
            return {}
        try:
            header = json.loads(lines[0])
        except ValueError:
            raise JournalCorruptError(f"{self.path}: unreadable header") from None
        if header != self._header():
            raise JournalCorruptError(f"{self.path}: journal belongs to a different batch")
        done: dict[int, BatchItem] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            try:
                item = BatchItem.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError):
                raise JournalCorruptError(f"{self.path}:{lineno}: unreadable entry") from None
            if not 0 <= item.index < self.n_requests:
                raise JournalCorruptError(f"{self.path}:{lineno}: index {item.index} out of range")
            done[item.index] = item
        return done

    def open(self, restart: bool) -> dict[int, BatchItem]:
        done = {} if restart else self.load()
        if restart or not done:
            self._fh = open(self.path, "w", encoding="utf-8")
            self._fh.write(json.dumps(self._header(), sort_keys=True) + "\n")
        else:
            self._fh = open(self.path, "r+", encoding="utf-8")
            content = self._fh.read()
            if not content.endswith("\n"):
                # drop the torn tail before appending
                self._fh.seek(0)
                self._fh.truncate(content.rfind("\n") + 1)
            self._fh.seek(0, os.SEEK_END)
        self._fh.flush()
        return done

    def append(self, item: BatchItem) -> None:
        self._fh.write(json.dumps(item.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def classify_batch(
    endpoint: str,
    model: str,
    requests: Iterable[ClassificationRequest],
    max_in_flight: int = 8,
    journal=None,
    restart: bool = False,
    retry_failed: bool = True,
    retry_policy: RetryPolicy | None = None,
    api_key: str | None = None,
    audit: AuditLog | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Iterator[BatchItem]:
    """Classify many pairs with bounded concurrency, yielding in request order.

    At most ``max_in_flight`` requests are outstanding at once. A failing
    request becomes a :class:`BatchItem` with ``error`` set and does not stop
    the batch. With ``journal`` set, every yielded item is recorded there
    first; a later call with the same inputs skips the recorded items
    (failed ones are retried when ``retry_failed``) and replays them from
    the journal.

    Raises
    ------
    JournalCorruptError
        The journal cannot be trusted; pass ``restart=True`` to discard it.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    requests = list(requests)
    for r in requests:
        build_prompt(r)  # validate every request before sending anything
    jr = None
    done: dict[int, BatchItem] = {}
    if journal is not None:
        jr = ProgressJournal(journal, batch_fingerprint(model, requests), len(requests))
        done = jr.open(restart)
        if retry_failed:
            done = {i: it for i, it in done.items() if it.ok}

    client = httpx.Client(limits=httpx.Limits(max_connections=max_in_flight))

    def run(i: int) -> BatchItem:
        req = requests[i]
        try:
            res = classify_pair(endpoint, model, req, retry_policy, client, api_key, audit, sleep)
            return BatchItem(i, req.key, result=res)
        except Exception as exc:  # recorded per request, never aborts the batch
            return BatchItem(i, req.key, error=f"{type(exc).__name__}: {exc}")

    todo = iter(i for i in range(len(requests)) if i not in done)
    try:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            window: deque = deque()

            def refill():
                while len(window) < max_in_flight:
                    nxt = next(todo, None)
                    if nxt is None:
                        return
                    window.append((nxt, pool.submit(run, nxt)))

            refill()
            for i in range(len(requests)):
                if i in done:
                    yield done[i]
                    continue
                idx, fut = window.popleft()
                assert idx == i
                item = fut.result()
                refill()
                if jr is not None:
                    jr.append(item)
                yield item
    finally:
        client.close()
        if jr is not None:
            jr.close()


def read_pairs(path, prompt_mode: str | None = None) -> list[ClassificationRequest]:
    """Requests from a JSONL file of ``focal_title``/``focal_abstract``/``ref_title``/``ref_abstract`` records."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(ClassificationRequest.from_dict(json.loads(line), prompt_mode))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
