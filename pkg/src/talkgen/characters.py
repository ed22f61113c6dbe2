"""Character pool: typed profiles, symmetric relations, participant sampling.

A pool file is a UTF-8 JSON object with a top-level "characters" array.
Each character carries an id, display name, language ("CN" or "EN"), a
profile (age, gender, personality, speaking_style, plus any extra keys,
which are preserved verbatim and surfaced to prompts), a reference-audio
path, and typed relations to other members.  Relations are symmetric:
if A lists B as kinship, B must list A as kinship.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field

from .errors import InsufficientCharacters, ParseError, ValidationError, Violation

LANGUAGES = ("CN", "EN")
RELATION_KINDS = ("kinship", "friendship", "colleague")

_REQUIRED_PROFILE = ("age", "gender", "personality", "speaking_style")


@dataclass(frozen=True)
class Relation:
    """A typed edge to another pool member; note is free text for prompts."""

    peer: str
    kind: str
    note: str = ""


@dataclass(frozen=True)
class Character:
    id: str
    name: str
    language: str
    age: int
    gender: str
    personality: str
    speaking_style: str
    audio_ref: str
    relations: tuple[Relation, ...] = ()
    extras: tuple[tuple[str, object], ...] = ()

    def resolved_audio(self, base_dir: str | None) -> str:
        """Resolve audio_ref against the pool file directory.

        Absolute paths and URI-style references pass through untouched.
        """
        if "://" in self.audio_ref or os.path.isabs(self.audio_ref) or not base_dir:
            return self.audio_ref
        return os.path.join(base_dir, self.audio_ref)


@dataclass(frozen=True)
class CharacterPool:
    """Ordered collection of characters plus the directory they loaded from."""

    characters: tuple[Character, ...]
    base_dir: str | None = None
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_index", {c.id: c for c in self.characters})

    def __len__(self) -> int:
        return len(self.characters)

    def __iter__(self):
        return iter(self.characters)

    def get(self, character_id: str) -> Character | None:
        return self._index.get(character_id)

    def members(self, language: str) -> tuple[Character, ...]:
        return tuple(c for c in self.characters if c.language == language)


def _build_character(raw: object, position: int, violations: list[Violation]) -> Character | None:
    subject = f"characters[{position}]"
    if not isinstance(raw, dict):
        violations.append(Violation("BAD_FIELD", subject, "character entry must be an object"))
        return None
    subject = raw.get("id") if isinstance(raw.get("id"), str) and raw.get("id") else subject

    missing = [k for k in ("id", "name", "language", "profile", "audio_ref") if k not in raw]
    if missing:
        violations.append(Violation("MISSING_FIELD", str(subject), f"missing {', '.join(missing)}"))
        return None

    language = raw["language"]
    if language not in LANGUAGES:
        violations.append(Violation(
            "BAD_LANGUAGE", str(subject),
            f"language must be one of {LANGUAGES}, got {language!r}"))
        return None

    profile = raw["profile"]
    if not isinstance(profile, dict):
        violations.append(Violation("BAD_FIELD", str(subject), "profile must be an object"))
        return None
    missing = [k for k in _REQUIRED_PROFILE if k not in profile]
    if missing:
        violations.append(Violation(
            "MISSING_FIELD", str(subject), f"profile missing {', '.join(missing)}"))
        return None
    if not isinstance(profile["age"], int) or isinstance(profile["age"], bool):
        violations.append(Violation("BAD_FIELD", str(subject), "profile.age must be an integer"))
        return None

    relations = []
    for entry in raw.get("relations", ()):
        if not isinstance(entry, dict) or "peer" not in entry or "kind" not in entry:
            violations.append(Violation(
                "BAD_FIELD", str(subject), "relation entries need peer and kind"))
            return None
        if entry["kind"] not in RELATION_KINDS:
            violations.append(Violation(
                "BAD_RELATION_KIND", str(subject),
                f"relation kind must be one of {RELATION_KINDS}, got {entry['kind']!r}"))
            return None
        relations.append(Relation(peer=entry["peer"], kind=entry["kind"],
                                  note=entry.get("note", "")))

    extras = tuple((k, v) for k, v in profile.items() if k not in _REQUIRED_PROFILE)
    return Character(
        id=raw["id"],
        name=raw["name"],
        language=language,
        age=profile["age"],
        gender=str(profile["gender"]),
        personality=str(profile["personality"]),
        speaking_style=str(profile["speaking_style"]),
        audio_ref=raw["audio_ref"],
        relations=tuple(relations),
        extras=extras,
    )


def validate_pool(pool: CharacterPool, check_audio: bool = True) -> list[Violation]:
    """Check pool invariants; returns all findings instead of stopping at one."""
    violations: list[Violation] = []

    if len(pool) < 2:
        violations.append(Violation(
            "POOL_TOO_SMALL", "pool", f"need at least 2 characters, found {len(pool)}"))

    seen: dict[str, int] = {}
    for position, char in enumerate(pool.characters):
        if char.id in seen:
            violations.append(Violation(
                "DUPLICATE_ID", char.id,
                f"id also used at index {seen[char.id]} (duplicate at index {position})"))
        else:
            seen[char.id] = position

    for char in pool.characters:
        for rel in char.relations:
            if rel.peer == char.id:
                violations.append(Violation(
                    "SELF_RELATION", char.id, "relation points at the character itself"))
                continue
            peer = pool.get(rel.peer)
            if peer is None:
                violations.append(Violation(
                    "UNKNOWN_PEER", char.id, f"relation names unknown character {rel.peer!r}"))
                continue
            if not any(back.peer == char.id and back.kind == rel.kind
                       for back in peer.relations):
                violations.append(Violation(
                    "ASYMMETRIC_RELATION", char.id,
                    f"{rel.kind} edge to {rel.peer!r} has no matching reverse edge"))

        if check_audio and "://" not in char.audio_ref:
            path = char.resolved_audio(pool.base_dir)
            if not (os.path.isfile(path) and os.access(path, os.R_OK)):
                violations.append(Violation(
                    "UNREADABLE_AUDIO", char.id, f"audio_ref {path!r} is not a readable file"))

    return violations


def load_pool(path: str, check_audio: bool = True) -> CharacterPool:
    """Load and validate a pool file.

    Raises ParseError for JSON syntax problems and ValidationError (with
    the full violation list) for invariant failures.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read pool file: {exc}", source=path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", source=path, line=exc.lineno) from exc

    if not isinstance(raw, dict) or not isinstance(raw.get("characters"), list):
        raise ParseError("pool file must be an object with a 'characters' array", source=path)

    violations: list[Violation] = []
    characters = []
    for position, entry in enumerate(raw["characters"]):
        char = _build_character(entry, position, violations)
        if char is not None:
            characters.append(char)
    if violations:
        raise ValidationError(violations)

    pool = CharacterPool(characters=tuple(characters),
                         base_dir=os.path.dirname(os.path.abspath(path)))
    violations = validate_pool(pool, check_audio=check_audio)
    if violations:
        raise ValidationError(violations)
    return pool


def pool_to_dict(pool: CharacterPool) -> dict:
    """Serialize back to the pool file schema; inverse of load_pool."""
    out = []
    for char in pool.characters:
        profile: dict[str, object] = {
            "age": char.age,
            "gender": char.gender,
            "personality": char.personality,
            "speaking_style": char.speaking_style,
        }
        profile.update(dict(char.extras))
        entry: dict[str, object] = {
            "id": char.id,
            "name": char.name,
            "language": char.language,
            "profile": profile,
            "audio_ref": char.audio_ref,
        }
        if char.relations:
            entry["relations"] = [
                {"peer": r.peer, "kind": r.kind, **({"note": r.note} if r.note else {})}
                for r in char.relations
            ]
        out.append(entry)
    return {"characters": out}


def sample_participants(
    pool: CharacterPool,
    count: int,
    language: str,
    rng_seed: int,
    prefer_related: bool = False,
) -> tuple[Character, ...]:
    """Pick `count` distinct characters of one language, deterministically.

    With prefer_related, selection starts from a random member and then
    greedily adds the candidate with the most relation edges into the
    already-chosen set (ties broken by shuffled order), which biases
    dialogues toward connected groups.
    """
    if count < 2:
        raise ValueError(f"count must be at least 2, got {count}")
    candidates = list(pool.members(language))
    if count > len(candidates):
        raise InsufficientCharacters(
            f"need {count} characters with language {language}, pool has {len(candidates)}")

    rng = random.Random(rng_seed)
    if not prefer_related:
        return tuple(rng.sample(candidates, count))

    shuffled = candidates[:]
    rng.shuffle(shuffled)
    chosen = [shuffled[0]]
    remaining = shuffled[1:]
    while len(chosen) < count:
        chosen_ids = {c.id for c in chosen}
        best = max(remaining,
                   key=lambda c: sum(1 for r in c.relations if r.peer in chosen_ids))
        remaining.remove(best)
        chosen.append(best)
    return tuple(chosen)
