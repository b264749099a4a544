"""Session log ingestion, vocabularies, chronological splits, and synthetic corpora.

File formats (all UTF-8):
  sessions: JSON Lines, one session per line
      {"id": str, "ts": int, "events": [[item_id, "view"|"atc"], ...]}
  catalog:  JSON Lines, one item per line
      {"item": str, "attrs": {name: value}}
  schema:   single JSON object
      {attr_name: "numeric"|"categorical"|"text"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

SPARSE_ITEM_THRESHOLD = 5


class ActionType(Enum):
    """The two interaction types. Total order: view < atc."""

    VIEW = "view"
    ATC = "atc"

    def __lt__(self, other: "ActionType") -> bool:
        return ACTION_ORDER[self] < ACTION_ORDER[other]

    @classmethod
    def parse(cls, token: str) -> "ActionType":
        try:
            return cls(token)
        except ValueError:
            raise DataError(f"unknown action '{token}'") from None


ACTION_ORDER = {ActionType.VIEW: 0, ActionType.ATC: 1}
ACTIONS = (ActionType.VIEW, ActionType.ATC)


@dataclass(frozen=True)
class Event:
    item: str
    action: ActionType


@dataclass(frozen=True)
class Session:
    id: str
    events: tuple[Event, ...]
    ts: int
    split: str | None = None  # "train" | "valid" | "test", assigned by chronological_split

    def items(self) -> list[str]:
        return [e.item for e in self.events]


class Vocabulary:
    """Bijection between item-id strings and dense indices in [0, size)."""

    def __init__(self, ids: list[str]):
        self._ids = list(ids)
        self._index = {item: i for i, item in enumerate(self._ids)}
        if len(self._index) != len(self._ids):
            raise DataError("duplicate item ids in vocabulary")

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, item: str) -> bool:
        return item in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._ids == other._ids

    def index(self, item: str) -> int:
        try:
            return self._index[item]
        except KeyError:
            raise DataError(f"item '{item}' not in vocabulary") from None

    def item(self, index: int) -> str:
        if not 0 <= index < len(self._ids):
            raise DataError(f"item index {index} out of range [0, {len(self._ids)})")
        return self._ids[index]

    @property
    def ids(self) -> list[str]:
        return list(self._ids)


@dataclass
class ItemCatalog:
    """Per-item meta-attributes plus the attribute schema.

    Items without a catalog entry are permitted (ID-only mode).
    """

    schema: dict[str, str]  # attr name -> "numeric" | "categorical" | "text"
    attrs: dict[str, dict[str, object]] = field(default_factory=dict)

    def get(self, item: str) -> dict[str, object]:
        return self.attrs.get(item, {})

    def validate(self) -> None:
        for name, kind in self.schema.items():
            if kind not in ("numeric", "categorical", "text"):
                raise DataError(f"schema attribute '{name}' has unknown type '{kind}'")
        for item, attrs in self.attrs.items():
            for name, value in attrs.items():
                if name not in self.schema:
                    raise DataError(f"item '{item}' has undeclared attribute '{name}'")
                kind = self.schema[name]
                if kind == "numeric" and not isinstance(value, (int, float)):
                    raise DataError(f"item '{item}' attribute '{name}' is not numeric: {value!r}")
                if kind in ("categorical", "text") and not isinstance(value, str):
                    raise DataError(f"item '{item}' attribute '{name}' is not a string: {value!r}")


@dataclass
class Corpus:
    sessions: list[Session]
    vocab: Vocabulary
    item_frequency: dict[str, int]
    sparse_session_flags: set[str] = field(default_factory=set)

    def split_sessions(self, split: str) -> list[Session]:
        return [s for s in self.sessions if s.split == split]

    def usable_sessions(self, split: str | None = None) -> list[Session]:
        """Sessions long enough to train/evaluate on: prefix plus a target event."""
        pool = self.sessions if split is None else self.split_sessions(split)
        return [s for s in pool if len(s.events) >= 2]


def _build_corpus(sessions: list[Session]) -> Corpus:
    ids: list[str] = []
    seen: set[str] = set()
    freq: dict[str, int] = {}
    for sess in sessions:
        for ev in sess.events:
            if ev.item not in seen:
                seen.add(ev.item)
                ids.append(ev.item)
            freq[ev.item] = freq.get(ev.item, 0) + 1
    corpus = Corpus(sessions=sessions, vocab=Vocabulary(ids), item_frequency=freq)
    corpus.sparse_session_flags = flag_sparse_sessions(corpus)
    return corpus


def load_sessions(path: str | Path, schema_path: str | Path | None = None) -> Corpus:
    """Load a JSON Lines session file into a Corpus.

    The vocabulary is indexed in first-appearance order, so loading is
    deterministic. When schema_path is given, the catalog schema file is
    parsed and validated up front so a bad schema fails before any work.
    """
    if schema_path is not None:
        load_schema(schema_path)
    path = Path(path)
    if not path.exists():
        raise DataError(f"session file not found: {path}")
    sessions: list[Session] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed session record at line {lineno}: {exc.msg}") from None
            sessions.append(_parse_session(record, lineno, seen_ids))
    if not sessions:
        raise DataError(f"session file is empty: {path}")
    return _build_corpus(sessions)


def _parse_session(record: object, lineno: int, seen_ids: set[str]) -> Session:
    if not isinstance(record, dict):
        raise DataError(f"malformed session record at line {lineno}: not an object")
    try:
        sid = record["id"]
        ts = record["ts"]
        raw_events = record["events"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed session record at line {lineno}: missing field {exc}") from None
    if not isinstance(sid, str) or not sid:
        raise DataError(f"malformed session record at line {lineno}: bad session id")
    if sid in seen_ids:
        raise DataError(f"duplicate session id '{sid}' at line {lineno}")
    seen_ids.add(sid)
    if not isinstance(ts, int):
        raise DataError(f"malformed session record at line {lineno}: ts must be an integer")
    if not isinstance(raw_events, list) or not raw_events:
        raise DataError(f"malformed session record at line {lineno}: events must be a non-empty list")
    events = []
    for ev in raw_events:
        if not isinstance(ev, list) or len(ev) != 2 or not isinstance(ev[0], str) or not ev[0]:
            raise DataError(f"malformed event in session '{sid}' at line {lineno}: {ev!r}")
        try:
            action = ActionType.parse(ev[1])
        except DataError:
            raise DataError(f"unknown action '{ev[1]}' at line {lineno}") from None
        events.append(Event(item=ev[0], action=action))
    return Session(id=sid, events=tuple(events), ts=ts)


def save_sessions(sessions: list[Session], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sess in sessions:
            record = {
                "id": sess.id,
                "ts": sess.ts,
                "events": [[ev.item, ev.action.value] for ev in sess.events],
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def load_schema(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"schema file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            schema = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed schema file {path}: {exc.msg}") from None
    if not isinstance(schema, dict):
        raise DataError(f"schema file {path} must hold a JSON object")
    catalog = ItemCatalog(schema=schema)
    catalog.validate()
    return schema


def load_catalog(catalog_path: str | Path, schema_path: str | Path) -> ItemCatalog:
    """Load the item catalog (JSON Lines) against its schema file."""
    schema = load_schema(schema_path)
    path = Path(catalog_path)
    if not path.exists():
        raise DataError(f"catalog file not found: {path}")
    attrs: dict[str, dict[str, object]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed catalog record at line {lineno}: {exc.msg}") from None
            if not isinstance(record, dict) or "item" not in record or "attrs" not in record:
                raise DataError(f"malformed catalog record at line {lineno}")
            attrs[record["item"]] = dict(record["attrs"])
    catalog = ItemCatalog(schema=schema, attrs=attrs)
    catalog.validate()
    return catalog


def save_catalog(catalog: ItemCatalog, catalog_path: str | Path, schema_path: str | Path) -> None:
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(catalog.schema, fh, sort_keys=True)
        fh.write("\n")
    with open(catalog_path, "w", encoding="utf-8") as fh:
        for item in sorted(catalog.attrs):
            fh.write(json.dumps({"item": item, "attrs": catalog.attrs[item]}, sort_keys=True) + "\n")


def chronological_split(corpus: Corpus, valid_frac: float, test_frac: float) -> Corpus:
    """Assign train/valid/test splits by session start time.

    The latest test_frac of sessions become test, the preceding valid_frac
    valid, the remainder train. Ties on ts break by session id ascending.
    """
    if valid_frac <= 0 or test_frac <= 0:
        raise ConfigError("split fractions must be positive")
    if valid_frac + test_frac >= 1:
        raise ConfigError("fractions exceed 1")
    n = len(corpus.sessions)
    if n < 3:
        raise ConfigError(f"cannot split corpus with {n} sessions into three parts")
    ordered = sorted(corpus.sessions, key=lambda s: (s.ts, s.id))
    n_test = max(1, int(n * test_frac + 0.5))
    n_valid = max(1, int(n * valid_frac + 0.5))
    n_train = n - n_valid - n_test
    if n_train < 1:
        raise ConfigError("fractions leave no training sessions")
    assigned = []
    for i, sess in enumerate(ordered):
        if i < n_train:
            split = "train"
        elif i < n_train + n_valid:
            split = "valid"
        else:
            split = "test"
        assigned.append(replace(sess, split=split))
    return Corpus(
        sessions=assigned,
        vocab=corpus.vocab,
        item_frequency=dict(corpus.item_frequency),
        sparse_session_flags=set(corpus.sparse_session_flags),
    )


def split_at_timestamps(corpus: Corpus, valid_ts: int, test_ts: int) -> Corpus:
    """Boundary-timestamp alternative to fractional splitting.

    Sessions with ts >= test_ts become test, ts >= valid_ts valid, the rest train.
    """
    if not valid_ts < test_ts:
        raise ConfigError("valid boundary must precede test boundary")
    assigned = []
    for sess in sorted(corpus.sessions, key=lambda s: (s.ts, s.id)):
        if sess.ts >= test_ts:
            split = "test"
        elif sess.ts >= valid_ts:
            split = "valid"
        else:
            split = "train"
        assigned.append(replace(sess, split=split))
    return Corpus(
        sessions=assigned,
        vocab=corpus.vocab,
        item_frequency=dict(corpus.item_frequency),
        sparse_session_flags=set(corpus.sparse_session_flags),
    )


def flag_sparse_sessions(corpus: Corpus, threshold: int = SPARSE_ITEM_THRESHOLD) -> set[str]:
    """Ids of sessions containing at least one item with global frequency < threshold.

    Frequencies are counted over the whole dataset, all splits included.
    """
    flagged = set()
    for sess in corpus.sessions:
        if any(corpus.item_frequency[ev.item] < threshold for ev in sess.events):
            flagged.add(sess.id)
    return flagged


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for the planted-block synthetic corpus generator.

    Items are partitioned into n_blocks contiguous intent blocks. Each session
    is assigned one block; every event (including the final target event) draws
    its item from the assigned block with probability p_in and uniformly from
    the other blocks otherwise, so the next item is statistically predictable
    from block membership.
    """

    n_items: int = 200
    n_blocks: int = 10
    n_sessions: int = 2000
    min_len: int = 5
    max_len: int = 5
    p_in: float = 0.9
    atc_prob: float = 0.2

    def validate(self) -> None:
        if not 0.0 <= self.p_in <= 1.0:
            raise ConfigError(f"p_in must lie in [0, 1], got {self.p_in}")
        if not 0.0 <= self.atc_prob <= 1.0:
            raise ConfigError(f"atc_prob must lie in [0, 1], got {self.atc_prob}")
        if self.n_blocks < 2 or self.n_items < self.n_blocks:
            raise ConfigError("need at least 2 blocks and one item per block")
        if self.min_len < 1 or self.max_len < self.min_len:
            raise ConfigError("bad session length range")
        if self.n_sessions < 1:
            raise ConfigError("n_sessions must be positive")

    def item_id(self, index: int) -> str:
        return f"i{index:04d}"

    def block_of(self, index: int) -> int:
        return index * self.n_blocks // self.n_items

    def block_label(self, index: int) -> str:
        return f"b{self.block_of(index):02d}"

    def block_members(self, block: int) -> list[int]:
        return [i for i in range(self.n_items) if self.block_of(i) == block]


def generate_synthetic(spec: SynthSpec, seed: int) -> Corpus:
    """Deterministic synthetic corpus with planted within-block transitions."""
    spec.validate()
    rng = np.random.default_rng(seed)
    members = [np.array(spec.block_members(b)) for b in range(spec.n_blocks)]
    outsiders = [
        np.array([i for i in range(spec.n_items) if spec.block_of(i) != b])
        for b in range(spec.n_blocks)
    ]
    sessions = []
    for s in range(spec.n_sessions):
        block = int(rng.integers(spec.n_blocks))
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        events = []
        for _ in range(length):
            if rng.random() < spec.p_in:
                idx = int(rng.choice(members[block]))
            else:
                idx = int(rng.choice(outsiders[block]))
            action = ActionType.ATC if rng.random() < spec.atc_prob else ActionType.VIEW
            events.append(Event(item=spec.item_id(idx), action=action))
        sessions.append(Session(id=f"s{s:06d}", events=tuple(events), ts=s))
    return _build_corpus(sessions)


def synthetic_catalog(spec: SynthSpec) -> ItemCatalog:
    """Ground-truth block labels of the generator as a categorical attribute."""
    attrs = {spec.item_id(i): {"block": spec.block_label(i)} for i in range(spec.n_items)}
    return ItemCatalog(schema={"block": "categorical"}, attrs=attrs)
