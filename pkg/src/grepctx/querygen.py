"""Turn a completion site into a set of grep-style queries.

Two sources are supported: a deterministic lexical heuristic that reads only
the tail of the local context, and an external generator (typically an LLM
service) reached over a line-delimited JSON protocol.
"""

from __future__ import annotations

import json
import logging
import os
import re
import shlex
import subprocess
import urllib.request
from dataclasses import dataclass, field
from typing import Optional

from .corpus import language_of

logger = logging.getLogger(__name__)

CLASS_NAME = "class_name"
METHOD_NAME = "method_name"
VARIABLE_NAME = "variable_name"
OTHER = "other"
KINDS = (CLASS_NAME, METHOD_NAME, VARIABLE_NAME, OTHER)
_STRENGTH = {CLASS_NAME: 3, METHOD_NAME: 2, VARIABLE_NAME: 1, OTHER: 0}

ENDPOINT_ENV = "GREPCTX_GENERATOR_ENDPOINT"

PYTHON_KEYWORDS = frozenset(
    """False None True and as assert async await break class continue def del elif
    else except finally for from global if import in is lambda nonlocal not or pass
    raise return try while with yield match case self cls""".split()
)
JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue default
    do double else enum extends final finally float for goto if implements import
    instanceof int interface long native new package private protected public return
    short static strictfp super switch synchronized this throw throws transient try
    void volatile while var record sealed permits yield true false null""".split()
)
# Ubiquitous builtins make poor grep keys; they match nearly every file.
_GENERIC = frozenset(
    """print len range str int float bool list dict set tuple object type super
    isinstance getattr setattr hasattr open enumerate zip map filter sorted min max
    sum any all repr id iter next String Object Integer System out println
    Override List Map""".split()
)
_CLASS_INTRO = frozenset({"class", "interface", "enum", "extends", "implements", "new", "record"})
_DEF_INTRO = frozenset({"def", "function", "fun", "func", "fn"})

_LEX = re.compile(
    r"""(?P<comment>\#[^\n]*|//[^\n]*)
      |(?P<string>"(?:\\.|[^"\\\n])*"?|'(?:\\.|[^'\\\n])*'?)
      |(?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      |(?P<number>\d[\w.]*)
      |(?P<punct>[^\s\w])""",
    re.VERBOSE,
)
_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_BIND_ASSIGN = re.compile(r"\b([a-z_]\w*)\s*(?::\s*|=\s*(?:new\s+)?)([A-Z]\w*)")
_BIND_DECL = re.compile(r"\b([A-Z]\w*)(?:<[^>]*>)?\s+([a-z_]\w*)\s*[=;]")
_CAMEL = re.compile(r"[A-Z][a-z0-9]+|[A-Z]+(?![a-z])|[a-z0-9]+")


class ProtocolError(ValueError):
    """External generator returned something outside the wire schema."""


@dataclass(frozen=True)
class CompletionTask:
    task_id: str
    file: str
    cursor: tuple[int, int]
    local_context: str
    ground_truth: Optional[str] = None
    ground_truth_identifiers: Optional[frozenset[str]] = None
    repo: Optional[str] = None

    @property
    def language(self) -> str:
        return language_of(self.file)


@dataclass(frozen=True)
class Identifier:
    name: str
    kind: str


@dataclass(frozen=True)
class LexicalQuery:
    query_id: str
    pattern: str
    kind: str
    uses_wildcard: bool
    case_sensitive: bool = True

    def compile(self) -> re.Pattern:
        flags = re.MULTILINE | (0 if self.case_sensitive else re.IGNORECASE)
        return re.compile(self.pattern, flags)


@dataclass(frozen=True)
class QuerySet:
    task_id: str
    queries: tuple[LexicalQuery, ...]
    source: str
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.queries)


def is_wildcard(pattern: str) -> bool:
    """True if the pattern is more than a literal token (optionally ``\\b``-bounded)."""
    core = pattern
    if core.startswith(r"\b"):
        core = core[2:]
    if core.endswith(r"\b") and not core.endswith(r"\\b"):
        core = core[:-2]
    return _unescape(core) is None


def _unescape(core: str) -> Optional[str]:
    """Literal text of ``core`` if it contains no live metacharacters, else None."""
    out, i = [], 0
    while i < len(core):
        ch = core[i]
        if ch == "\\":
            if i + 1 >= len(core) or core[i + 1].isalnum():
                return None
            out.append(core[i + 1])
            i += 2
            continue
        if ch in ".^$*+?{}[]|()":
            return None
        out.append(ch)
        i += 1
    return "".join(out)


def _is_dunder(name: str) -> bool:
    return len(name) > 4 and name.startswith("__") and name.endswith("__")


def _keywords(language: str) -> frozenset[str]:
    if language == "python":
        return PYTHON_KEYWORDS
    if language == "java":
        return JAVA_KEYWORDS
    return PYTHON_KEYWORDS | JAVA_KEYWORDS


def _is_type_like(name: str) -> bool:
    return name[0].isupper() and not name.isupper() and any(c.islower() for c in name)


def extract_identifiers(local_context: str, language: str, window: int = 20) -> list[Identifier]:
    """Classify identifiers in the last ``window`` lines, nearest to the cursor first.

    A name seen several times keeps its strongest classification
    (class > method > variable > other).
    """
    lines = local_context.split("\n")
    if window > 0:
        lines = lines[-window:]
    keywords = _keywords(language)
    best: dict[str, str] = {}
    last_seen: dict[str, int] = {}
    pos = 0

    for line in lines:
        tokens = [(m.lastgroup, m.group()) for m in _LEX.finditer(line)]
        tokens = [t for t in tokens if t[0] != "comment"]
        for i, (group, value) in enumerate(tokens):
            pos += 1
            kind = None
            if group == "string":
                inner = value.strip("'\"")
                if _WORD.fullmatch(inner) and len(inner) > 2:
                    value, kind = inner, OTHER
            elif group == "ident":
                prev = tokens[i - 1][1] if i > 0 else ""
                nxt = tokens[i + 1][1] if i + 1 < len(tokens) else ""
                if value in keywords or value in _GENERIC or _is_dunder(value):
                    continue
                if prev in _CLASS_INTRO or _is_type_like(value):
                    kind = CLASS_NAME
                elif prev in _DEF_INTRO or nxt == "(":
                    kind = METHOD_NAME
                else:
                    kind = VARIABLE_NAME
            if kind is None:
                continue
            current = best.get(value)
            if current is None or _STRENGTH[kind] > _STRENGTH[current]:
                best[value] = kind
            last_seen[value] = pos

    order = sorted(last_seen, key=lambda n: -last_seen[n])
    # a receiver's bound type travels with it: deck = Deck(), deck: Deck, Deck deck = ...
    text = "\n".join(lines)
    bindings: dict[str, str] = {}
    for var, typ in _BIND_ASSIGN.findall(text):
        bindings.setdefault(var, typ)
    for typ, var in _BIND_DECL.findall(text):
        bindings.setdefault(var, typ)
    for var, typ in bindings.items():
        if var in last_seen and typ in last_seen and typ not in keywords and typ not in _GENERIC:
            best[typ] = CLASS_NAME
            order.remove(typ)
            order.insert(order.index(var) + 1, typ)
    return [Identifier(name, best[name]) for name in order]


def _camel_tail(name: str) -> Optional[str]:
    parts = _CAMEL.findall(name)
    if len(parts) < 3:
        return None
    return "".join(parts[-2:]) if name[0].isupper() else None


def _patterns_for(ident: Identifier, language: str) -> list[str]:
    name = re.escape(ident.name)
    if ident.kind == CLASS_NAME:
        if language == "java":
            return [rf"\b(?:class|interface|enum|record) {name}\b"]
        return [rf"\bclass {name}\b"]
    if ident.kind == METHOD_NAME:
        if language == "java":
            definition = rf"[\w>\]] +{name} *\([^;]*$"
        else:
            definition = rf"\bdef {name}\b"
        return [definition, rf"\b{name}\("]
    if ident.kind == VARIABLE_NAME:
        return [rf"\b{name}\b"]
    return [name]


def _wildcards_for(ident: Identifier, language: str) -> list[str]:
    name = re.escape(ident.name)
    if ident.kind == CLASS_NAME:
        keyword = "(?:class|interface)" if language == "java" else "class"
        out = [rf"{keyword}.*{name}"]
        tail = _camel_tail(ident.name)
        if tail:
            out.append(rf"{keyword}.*{re.escape(tail)}")
        return out
    if ident.kind == METHOD_NAME:
        return [rf"\b{name}\w*\("]
    if ident.kind == VARIABLE_NAME:
        return [rf"\b{name}\w* *="]
    return []


def generate_queries(task: CompletionTask, m: int = 10, window: int = 20) -> QuerySet:
    """Heuristic query set for ``task``; pure in (local_context, language, m, window)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    language = task.language
    idents = extract_identifiers(task.local_context, language, window)
    seen: set[str] = set()
    queries: list[LexicalQuery] = []

    def add(pattern: str, kind: str) -> bool:
        if len(queries) >= m:
            return False
        if pattern in seen:
            return True
        seen.add(pattern)
        queries.append(LexicalQuery(f"q{len(queries):02d}", pattern, kind, is_wildcard(pattern)))
        return True

    # single-letter names are weak grep keys; spend budget on them last
    idents.sort(key=lambda ident: len(ident.name) < 2)
    patterns = [(_patterns_for(ident, language), ident.kind) for ident in idents]
    # one primary pattern per identifier first, then secondary ones (call sites)
    for pats, kind in patterns:
        add(pats[0], kind)
    for pats, kind in patterns:
        for pat in pats[1:]:
            add(pat, kind)
    # fuzzy variants only fill an undersubscribed budget
    for ident in idents:
        for pat in _wildcards_for(ident, language):
            add(pat, ident.kind)
    return QuerySet(task.task_id, tuple(queries), "heuristic")


def _kind_of_pattern(pattern: str) -> str:
    words = _WORD.findall(pattern.replace(r"\b", " ").replace(r"\w", " ").replace(r"\s", " "))
    if re.search(r"\b(?:class|interface|enum|extends|implements)\b", pattern):
        return CLASS_NAME
    if re.search(r"\b(?:def|function|fn|func)\b", pattern) or "(" in pattern:
        return METHOD_NAME
    if len(words) == 1:
        return CLASS_NAME if _is_type_like(words[0]) else VARIABLE_NAME
    return OTHER


def parse_external_queries(task_id: str, payload, m: int = 10) -> QuerySet:
    """Map an external generator response onto a QuerySet.

    Invalid regexes are dropped with a warning; unknown command keys are
    ignored and noted. Anything structurally off raises ProtocolError.
    """
    if isinstance(payload, (str, bytes)):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"response is not JSON: {exc}: {payload!r}") from None
    if not isinstance(payload, dict):
        raise ProtocolError(f"response must be a JSON object, got {payload!r}")
    if payload.get("task_id") != task_id:
        raise ProtocolError(f"task_id mismatch: expected {task_id!r}, record {payload!r}")
    commands = payload.get("commands")
    if not isinstance(commands, list):
        raise ProtocolError(f"'commands' must be a list, record {payload!r}")

    warnings: list[str] = []
    queries: list[LexicalQuery] = []
    for idx, cmd in enumerate(commands):
        if not isinstance(cmd, dict) or not isinstance(cmd.get("pattern"), str):
            raise ProtocolError(f"command {idx} lacks a string 'pattern': {cmd!r}")
        case_sensitive = cmd.get("case_sensitive", True)
        if not isinstance(case_sensitive, bool):
            raise ProtocolError(f"command {idx} has non-boolean 'case_sensitive': {cmd!r}")
        extra = sorted(set(cmd) - {"pattern", "case_sensitive"})
        if extra:
            warnings.append(f"command {idx}: ignored unsupported fields {extra}")
        pattern = cmd["pattern"]
        if not pattern:
            warnings.append(f"command {idx}: empty pattern dropped")
            continue
        try:
            re.compile(pattern)
        except re.error as exc:
            warnings.append(f"command {idx}: pattern {pattern!r} does not compile ({exc}); dropped")
            continue
        if len(queries) >= m:
            continue
        queries.append(
            LexicalQuery(
                f"q{len(queries):02d}",
                pattern,
                _kind_of_pattern(pattern),
                is_wildcard(pattern),
                case_sensitive,
            )
        )
    if len(commands) > m:
        warnings.append(f"{len(commands)} commands received, kept at most {m}")
    for w in warnings:
        logger.warning("%s: %s", task_id, w)
    return QuerySet(task_id, tuple(queries), "external", tuple(warnings))


def request_payload(task: CompletionTask, m: int) -> dict:
    return {
        "task_id": task.task_id,
        "local_context": task.local_context,
        "language": task.language,
        "m": m,
    }


class ExternalGenerator:
    """Client for an out-of-process query generator.

    ``endpoint`` is either an ``http(s)://`` URL (one JSON POST per task) or a
    shell command whose stdin/stdout carry one JSON object per line.
    """

    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None

    @classmethod
    def from_env(cls) -> Optional["ExternalGenerator"]:
        endpoint = os.environ.get(ENDPOINT_ENV)
        return cls(endpoint) if endpoint else None

    @property
    def is_http(self) -> bool:
        return self.endpoint.startswith(("http://", "https://"))

    def _exchange_http(self, line: bytes) -> bytes:
        req = urllib.request.Request(
            self.endpoint, data=line, headers={"Content-Type": "application/json"}, method="POST"
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return resp.read().strip().split(b"\n", 1)[0]

    def _exchange_subprocess(self, line: bytes) -> bytes:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.endpoint), stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(line + b"\n")
        self._proc.stdin.flush()
        reply = self._proc.stdout.readline()
        if not reply:
            raise ProtocolError(f"generator process {self.endpoint!r} closed its output")
        return reply.strip()

    def generate(self, task: CompletionTask, m: int = 10) -> QuerySet:
        line = json.dumps(request_payload(task, m)).encode()
        raw = self._exchange_http(line) if self.is_http else self._exchange_subprocess(line)
        return parse_external_queries(task.task_id, raw.decode("utf-8"), m)

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=self.timeout)
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
