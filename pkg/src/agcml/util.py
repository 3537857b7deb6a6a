"""Small helpers: stable seed derivation, canonical JSON, float formatting."""

from __future__ import annotations

import hashlib
import json
from typing import Any

TOOL_VERSION = "0.1.0"

_SEED_SPACE = 2**63


def derive_seed(base: int, *keys: object) -> int:
    """Derive a child seed from a base seed and a key path.

    Uses SHA-256 over the rendered key path, so the result is stable across
    platforms, Python versions and evaluation order. Children with different
    key paths are independent for all practical purposes.
    """
    text = ":".join([str(int(base))] + [str(k) for k in keys])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % _SEED_SPACE


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and no incidental whitespace.

    Equal inputs produce byte-equal output, which makes the result safe to
    hash and to compare across reruns.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def stable_hash(obj: Any) -> str:
    """Short hex digest of an object's canonical JSON form."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal form; byte-stable for identical floats."""
    return repr(float(x))
