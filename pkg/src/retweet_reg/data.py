"""Dataset ingestion and feature engineering.

Input is a UTF-8 TSV with one tweet per line. The default column order is

    tweet_id, username, timestamp, followers, friends, favorites,
    entities, sentiment, mentions, hashtags, urls, retweets [, text]

A sidecar file ``<data>.schema.json`` with ``{"columns": [...]}`` may
override the order. ``null;`` marks an empty field.

Each record yields 12 numeric features in a fixed order (six timestamp
components, three count features, two sentiment scores, mention count),
plus a token-id sequence of length 30 for the tweet text.
"""

import string
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataFormatError, ValidationError
from .jsonio import read_json, write_json

EMPTY_MARKER = "null;"
URL_TOKEN = "<url>"
SEQUENCE_LENGTH = 30

DEFAULT_COLUMNS = (
    "tweet_id",
    "username",
    "timestamp",
    "followers",
    "friends",
    "favorites",
    "entities",
    "sentiment",
    "mentions",
    "hashtags",
    "urls",
    "retweets",
)
TEXT_COLUMN = "text"

FEATURE_NAMES = (
    "month",
    "iso_week",
    "day",
    "hour",
    "minute",
    "day_of_week",
    "followers",
    "friends",
    "favorites",
    "sentiment_pos",
    "sentiment_neg",
    "mention_count",
)

# Fixed-offset abbreviations accepted in the textual timestamp form.
# Ambiguous abbreviations resolve to the most common reading; anything
# not listed here is rejected.
TZ_OFFSETS = {
    "UTC": 0.0,
    "GMT": 0.0,
    "CET": 1.0,
    "CEST": 2.0,
    "BST": 1.0,
    "EST": -5.0,
    "EDT": -4.0,
    "CST": -6.0,
    "CDT": -5.0,
    "MST": -7.0,
    "MDT": -6.0,
    "PST": -8.0,
    "PDT": -7.0,
}

_MONTHS = {
    "Jan": 1, "Feb": 2, "Mar": 3, "Apr": 4, "May": 5, "Jun": 6,
    "Jul": 7, "Aug": 8, "Sep": 9, "Oct": 10, "Nov": 11, "Dec": 12,
}
_MONTH_NAMES = {v: k for k, v in _MONTHS.items()}
_WEEKDAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


@dataclass
class TweetRecord:
    """One parsed TSV row. Entities/hashtags/urls are retained opaquely."""

    tweet_id: str
    username: str
    timestamp: datetime
    followers: int
    friends: int
    favorites: int
    entities: str
    sentiment_raw: str
    mentions_raw: str
    hashtags_raw: str
    urls_raw: str
    retweets: int
    text: Optional[str] = None


@dataclass
class NumericFeatures:
    """The 12 engineered numeric features, in serialization order."""

    month: int
    iso_week: int
    day: int
    hour: int
    minute: int
    day_of_week: int
    followers: int
    friends: int
    favorites: int
    sentiment_pos: int
    sentiment_neg: int
    mention_count: int

    def as_array(self) -> np.ndarray:
        return np.array(
            [getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64
        )


class Vocabulary:
    """Token/id bijection with id 0 reserved for padding and 1 for
    out-of-vocabulary tokens."""

    PAD_ID = 0
    OOV_ID = 1
    PAD_TOKEN = "<pad>"
    OOV_TOKEN = "<unk>"

    def __init__(self, tokens: Sequence[str] = ()):
        self.id_to_token = [self.PAD_TOKEN, self.OOV_TOKEN, *tokens]
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValidationError("vocabulary tokens are not unique")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, self.OOV_ID)

    def to_dict(self) -> dict:
        return {"version": 1, "tokens": self.id_to_token[2:]}

    @classmethod
    def from_dict(cls, payload: dict) -> "Vocabulary":
        if payload.get("version") != 1:
            raise DataFormatError(f"unsupported vocabulary version {payload.get('version')!r}")
        return cls(payload["tokens"])


@dataclass
class Scaler:
    """Per-feature mean and population standard deviation fitted on the
    training split. Constant columns keep std 1.0 so scaling never divides
    by zero."""

    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "feature_names": list(FEATURE_NAMES),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Scaler":
        if payload.get("version") != 1:
            raise DataFormatError(f"unsupported scaler version {payload.get('version')!r}")
        return cls(
            mean=np.asarray(payload["mean"], dtype=np.float64),
            std=np.asarray(payload["std"], dtype=np.float64),
        )


@dataclass
class EncodedExample:
    """Model-ready example: standardized numeric features, a fixed-length
    token-id sequence, and the retweet-count label."""

    numeric: np.ndarray
    token_ids: np.ndarray
    label: float


# ---------------------------------------------------------------------------
# timestamps

def parse_timestamp(value: str) -> datetime:
    """Parse either the textual form ``EEE MMM dd HH:mm:ss zzz yyyy``
    (e.g. ``Thu Oct 03 21:12:56 CEST 2019``) or integer epoch seconds.
    Anything else is rejected."""
    value = value.strip()
    if _is_int(value):
        return datetime.fromtimestamp(int(value), tz=timezone.utc)
    parts = value.split()
    if len(parts) != 6:
        raise DataFormatError(f"unrecognized timestamp format: {value!r}")
    _, month_name, day_s, clock, tz_name, year_s = parts
    if month_name not in _MONTHS:
        raise DataFormatError(f"unknown month name {month_name!r} in timestamp")
    if tz_name not in TZ_OFFSETS:
        raise DataFormatError(f"unknown timezone abbreviation {tz_name!r} in timestamp")
    clock_parts = clock.split(":")
    if len(clock_parts) != 3:
        raise DataFormatError(f"bad clock field {clock!r} in timestamp")
    try:
        day, year = int(day_s), int(year_s)
        hour, minute, second = (int(p) for p in clock_parts)
        tz = timezone(timedelta(hours=TZ_OFFSETS[tz_name]), tz_name)
        return datetime(year, _MONTHS[month_name], day, hour, minute, second, tzinfo=tz)
    except ValueError as exc:
        raise DataFormatError(f"invalid timestamp {value!r}: {exc}") from exc


def format_timestamp(ts: datetime) -> str:
    """Render the textual timestamp form parse_timestamp accepts."""
    tz_name = ts.tzname() or "UTC"
    return (
        f"{_WEEKDAY_NAMES[ts.weekday()]} {_MONTH_NAMES[ts.month]} "
        f"{ts.day:02d} {ts.hour:02d}:{ts.minute:02d}:{ts.second:02d} "
        f"{tz_name} {ts.year}"
    )


def decompose_timestamp(ts: datetime):
    """Split an instant into (month, iso_week, day, hour, minute,
    day_of_week), with ISO-8601 week numbers and Monday = 0."""
    return (ts.month, ts.isocalendar()[1], ts.day, ts.hour, ts.minute, ts.weekday())


def _is_int(s: str) -> bool:
    if s.startswith(("-", "+")):
        s = s[1:]
    return s.isdigit()


# ---------------------------------------------------------------------------
# TSV parsing

def resolve_schema(path, explicit: Optional[Sequence[str]] = None) -> tuple:
    """Column order for a TSV file: explicit list, else sidecar
    ``<path>.schema.json``, else sniffed from the first line's field count
    (12 columns -> no text, 13 -> text last)."""
    if explicit is not None:
        return _check_schema(tuple(explicit))
    sidecar = Path(str(path) + ".schema.json")
    if sidecar.exists():
        return _check_schema(tuple(read_json(sidecar)["columns"]))
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            n = len(line.rstrip("\n").split("\t"))
            if n == len(DEFAULT_COLUMNS):
                return DEFAULT_COLUMNS
            if n == len(DEFAULT_COLUMNS) + 1:
                return DEFAULT_COLUMNS + (TEXT_COLUMN,)
            raise DataFormatError(
                f"cannot infer schema from a {n}-column file; "
                f"expected {len(DEFAULT_COLUMNS)} or {len(DEFAULT_COLUMNS) + 1} columns"
            )
    raise DataFormatError(f"{path}: file is empty")


def _check_schema(schema: tuple) -> tuple:
    missing = [c for c in DEFAULT_COLUMNS if c not in schema]
    if missing:
        raise DataFormatError(f"schema is missing required columns: {missing}")
    unknown = [c for c in schema if c not in DEFAULT_COLUMNS + (TEXT_COLUMN,)]
    if unknown:
        raise DataFormatError(f"schema names unknown columns: {unknown}")
    if len(set(schema)) != len(schema):
        raise DataFormatError("schema repeats a column name")
    return schema


def parse_tsv_line(
    line: str,
    schema: Sequence[str] = DEFAULT_COLUMNS,
    line_number: Optional[int] = None,
    allow_missing_label: bool = False,
) -> TweetRecord:
    """Parse one tab-separated record.

    Empty-marker fields ("null;") become empty values. With
    allow_missing_label, an empty retweets field parses as 0 (used by
    predict, where labels are optional).
    """
    fields = line.rstrip("\n").split("\t")
    if len(fields) != len(schema):
        raise DataFormatError(
            f"expected {len(schema)} tab-separated fields, got {len(fields)}",
            line_number=line_number,
        )
    row = dict(zip(schema, fields))

    def _clean(name):
        value = row[name].strip()
        return "" if value == EMPTY_MARKER else value

    def _count(name):
        value = _clean(name)
        if value == "" and name == "retweets" and allow_missing_label:
            return 0
        try:
            parsed = int(value)
        except ValueError:
            raise DataFormatError(
                f"unparseable integer {value!r}",
                line_number=line_number,
                column=name,
            ) from None
        if parsed < 0:
            raise ValidationError(f"column '{name}' must be non-negative, got {parsed}")
        return parsed

    sentiment = _clean("sentiment")
    if len(sentiment.split()) != 2:
        raise DataFormatError(
            f"sentiment must hold two whitespace-separated integers, got {sentiment!r}",
            line_number=line_number,
            column="sentiment",
        )

    text = _clean(TEXT_COLUMN) if TEXT_COLUMN in row else None
    return TweetRecord(
        tweet_id=_clean("tweet_id"),
        username=_clean("username"),
        timestamp=parse_timestamp(row["timestamp"]),
        followers=_count("followers"),
        friends=_count("friends"),
        favorites=_count("favorites"),
        entities=_clean("entities"),
        sentiment_raw=sentiment,
        mentions_raw=_clean("mentions"),
        hashtags_raw=_clean("hashtags"),
        urls_raw=_clean("urls"),
        retweets=_count("retweets"),
        text=text or None,
    )


def record_to_tsv_line(record: TweetRecord, schema: Sequence[str] = DEFAULT_COLUMNS) -> str:
    """Inverse of parse_tsv_line; empty optional fields are written back
    as the empty marker."""
    values = {
        "tweet_id": record.tweet_id,
        "username": record.username,
        "timestamp": format_timestamp(record.timestamp),
        "followers": str(record.followers),
        "friends": str(record.friends),
        "favorites": str(record.favorites),
        "entities": record.entities or EMPTY_MARKER,
        "sentiment": record.sentiment_raw,
        "mentions": record.mentions_raw or EMPTY_MARKER,
        "hashtags": record.hashtags_raw or EMPTY_MARKER,
        "urls": record.urls_raw or EMPTY_MARKER,
        "retweets": str(record.retweets),
        TEXT_COLUMN: record.text or EMPTY_MARKER,
    }
    return "\t".join(values[name] for name in schema)


def load_tsv(
    path,
    schema: Optional[Sequence[str]] = None,
    allow_missing_label: bool = False,
    strict: bool = False,
):
    """Read a TSV file, returning (records, dropped_count).

    A record counts as valid only if it both parses and feature-engineers
    cleanly; anything else is dropped (or, with strict, raised). Record
    ordinals used in split files index into the returned list.
    """
    schema = resolve_schema(path, schema)
    records = []
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = parse_tsv_line(
                    line, schema, line_number=line_number,
                    allow_missing_label=allow_missing_label,
                )
                engineer_features(record)
            except (DataFormatError, ValidationError) as exc:
                if strict:
                    if getattr(exc, "line_number", None) is not None:
                        raise
                    raise DataFormatError(str(exc), line_number=line_number) from exc
                dropped += 1
                continue
            records.append(record)
    return records, dropped


# ---------------------------------------------------------------------------
# feature engineering

def parse_sentiment(s: str):
    """Split "pos neg" into two scores; pos must lie in [1, 5] and neg in
    [-5, -1]."""
    parts = s.split()
    if len(parts) != 2:
        raise DataFormatError(f"sentiment must hold two integers, got {s!r}")
    try:
        pos, neg = int(parts[0]), int(parts[1])
    except ValueError:
        raise DataFormatError(f"sentiment scores must be integers, got {s!r}") from None
    if not 1 <= pos <= 5:
        raise ValidationError(f"positive sentiment score {pos} outside [1, 5]")
    if not -5 <= neg <= -1:
        raise ValidationError(f"negative sentiment score {neg} outside [-5, -1]")
    return pos, neg


def count_mentions(s: str) -> int:
    """Number of whitespace-separated mentioned names; empty input or the
    empty marker count as zero."""
    s = s.strip()
    if not s or s == EMPTY_MARKER:
        return 0
    return len(s.split())


def engineer_features(record: TweetRecord) -> NumericFeatures:
    month, iso_week, day, hour, minute, day_of_week = decompose_timestamp(record.timestamp)
    pos, neg = parse_sentiment(record.sentiment_raw)
    return NumericFeatures(
        month=month,
        iso_week=iso_week,
        day=day,
        hour=hour,
        minute=minute,
        day_of_week=day_of_week,
        followers=record.followers,
        friends=record.friends,
        favorites=record.favorites,
        sentiment_pos=pos,
        sentiment_neg=neg,
        mention_count=count_mentions(record.mentions_raw),
    )


def fit_scaler(examples: Sequence[NumericFeatures]) -> Scaler:
    """Fit per-feature mean/std. Call on the training split only."""
    if not examples:
        raise ValidationError("cannot fit a scaler on an empty feature set")
    matrix = np.stack([f.as_array() for f in examples])
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)  # population std (divide by N)
    std = np.where(std > 0.0, std, 1.0)
    return Scaler(mean=mean, std=std)


def apply_scaler(scaler: Scaler, features: NumericFeatures) -> np.ndarray:
    return (features.as_array() - scaler.mean) / scaler.std


# ---------------------------------------------------------------------------
# text

def tokenize(text: str):
    """Lowercase, split on whitespace, strip leading/trailing punctuation,
    drop empties, and collapse anything starting with "http" to <url>."""
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(string.punctuation)
        if not token:
            continue
        tokens.append(URL_TOKEN if token.startswith("http") else token)
    return tokens


def build_vocab(corpus) -> Vocabulary:
    """Assign ids in first-occurrence order starting at 2. Build from the
    training split only."""
    seen = {}
    for tokens in corpus:
        for token in tokens:
            if token not in seen:
                seen[token] = len(seen)
    return Vocabulary(list(seen))


def encode_text(tokens, vocab: Vocabulary, length: int = SEQUENCE_LENGTH) -> np.ndarray:
    """Fixed-length id sequence: keep the first `length` tokens, map
    unknowns to the OOV id, right-pad with the padding id."""
    ids = np.full(length, Vocabulary.PAD_ID, dtype=np.int64)
    for i, token in enumerate(tokens[:length]):
        ids[i] = vocab.id_of(token)
    return ids


# ---------------------------------------------------------------------------
# splits and encoding

def split_indices(n: int, seed: int, ratios=(4, 1, 1)):
    """Deterministic disjoint (train, validation, test) index arrays.
    Sizes follow the ratios with any remainder going to train; each array
    comes back sorted ascending."""
    if n <= 0:
        raise ValidationError("cannot split an empty dataset")
    unit = n // sum(ratios)
    valid_n = unit * ratios[1]
    test_n = unit * ratios[2]
    perm = np.random.default_rng(seed).permutation(n)
    train = np.sort(perm[: n - valid_n - test_n])
    valid = np.sort(perm[n - valid_n - test_n : n - test_n])
    test = np.sort(perm[n - test_n :])
    return train, valid, test


def split_dataset(records: Sequence, seed: int, ratios=(4, 1, 1)):
    """Partition records into (train, validation, test) lists."""
    train_idx, valid_idx, test_idx = split_indices(len(records), seed, ratios)
    pick = lambda idx: [records[i] for i in idx]
    return pick(train_idx), pick(valid_idx), pick(test_idx)


class EncodedDataset:
    """Column-stacked encoded examples ready for batched model passes."""

    def __init__(self, numeric: np.ndarray, token_ids: np.ndarray, labels: np.ndarray):
        self.numeric = np.asarray(numeric, dtype=np.float64)
        self.token_ids = np.asarray(token_ids, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.labels)

    def select(self, indices) -> "EncodedDataset":
        return EncodedDataset(
            self.numeric[indices], self.token_ids[indices], self.labels[indices]
        )

    @classmethod
    def from_examples(cls, examples: Sequence[EncodedExample]) -> "EncodedDataset":
        return cls(
            np.stack([e.numeric for e in examples]),
            np.stack([e.token_ids for e in examples]),
            np.array([e.label for e in examples], dtype=np.float64),
        )


def encode_record(
    record: TweetRecord,
    scaler: Scaler,
    vocab: Vocabulary,
    length: int = SEQUENCE_LENGTH,
) -> EncodedExample:
    tokens = tokenize(record.text) if record.text else []
    return EncodedExample(
        numeric=apply_scaler(scaler, engineer_features(record)),
        token_ids=encode_text(tokens, vocab, length),
        label=float(record.retweets),
    )


def encode_records(records, scaler, vocab, length: int = SEQUENCE_LENGTH) -> EncodedDataset:
    return EncodedDataset.from_examples(
        [encode_record(r, scaler, vocab, length) for r in records]
    )


# ---------------------------------------------------------------------------
# artifact files

def save_vocab(vocab: Vocabulary, path) -> None:
    write_json(path, vocab.to_dict())


def load_vocab(path) -> Vocabulary:
    return Vocabulary.from_dict(read_json(path))


def save_scaler(scaler: Scaler, path) -> None:
    write_json(path, scaler.to_dict())


def load_scaler(path) -> Scaler:
    return Scaler.from_dict(read_json(path))


def save_splits(path, seed, ratios, train_idx, valid_idx, test_idx) -> None:
    write_json(
        path,
        {
            "version": 1,
            "seed": seed,
            "ratios": list(ratios),
            "train": [int(i) for i in train_idx],
            "validation": [int(i) for i in valid_idx],
            "test": [int(i) for i in test_idx],
        },
    )


def load_splits(path) -> dict:
    payload = read_json(path)
    if payload.get("version") != 1:
        raise DataFormatError(f"unsupported splits version {payload.get('version')!r}")
    return payload
