"""Eventually-consistent object stores standing in for a synced folder.

Objects are write-once and never deleted during a run. Every backend honours
the same naming grammar (``migrant-<node>-<seq>.rec`` and ``done-<node>.rec``)
and the same visibility contract: a writer sees its own puts at once, other
participants see them after a backend-specific propagation delay, and nothing
that became visible ever disappears.

``DirectoryStore`` publishes through a hidden temporary file and an atomic
link/rename, so it can sit on top of any folder synchronised by an external
service. ``LatencySimStore`` keeps objects in memory and delays visibility by
``base_ms + uniform(0, jitter_ms)`` drawn from a seeded stream.
"""
from __future__ import annotations

import abc
import errno
import os
import re
import secrets
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .clock import VirtualClock, WallClock
from .errors import ConflictError, InvalidArgument, NotFoundError, StoreError
from .genome import make_rng

NODE_ID_PATTERN = r"[A-Za-z0-9][A-Za-z0-9_]*"
OBJECT_NAME = re.compile(rf"^(?:migrant-(?P<node>{NODE_ID_PATTERN})-(?P<seq>\d+)|done-(?P<done>{NODE_ID_PATTERN}))\.rec$")
TMP_PREFIX = ".tmp-"


def check_object_name(name: str) -> None:
    if not OBJECT_NAME.match(name):
        raise InvalidArgument(f"invalid store object name {name!r}")


class SharedStore(abc.ABC):
    """One participant's view of a shared object namespace."""

    @abc.abstractmethod
    def put(self, name: str, payload: bytes) -> None: ...

    @abc.abstractmethod
    def list(self, prefix: str = "") -> set[str]: ...

    @abc.abstractmethod
    def get(self, name: str) -> bytes: ...


def _check_put(name: str, payload: bytes) -> None:
    check_object_name(name)
    if not payload:
        raise InvalidArgument("store payloads must be non-empty")


class DirectoryStore(SharedStore):
    """Objects as files under ``<root>/<experiment_id>/``.

    Readers never see partial objects: the payload is written to a dot-prefixed
    temporary file and hard-linked into place (or renamed, on filesystems
    without hard links). Listings ignore anything outside the naming grammar.
    """

    def __init__(self, root, experiment_id: str = "default", fsync: bool = True):
        if not re.fullmatch(r"[A-Za-z0-9][A-Za-z0-9_.\-]*", experiment_id):
            raise InvalidArgument(f"invalid experiment id {experiment_id!r}")
        self.root = Path(root)
        self.experiment_id = experiment_id
        self.path = self.root / experiment_id
        self.fsync = fsync
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreError(f"cannot create store directory {self.path}: {exc}") from exc

    def put(self, name: str, payload: bytes) -> None:
        _check_put(name, payload)
        final = self.path / name
        tmp = self.path / f"{TMP_PREFIX}{secrets.token_hex(8)}"
        try:
            with open(tmp, "xb") as fh:
                fh.write(payload)
                fh.flush()
                if self.fsync:
                    os.fsync(fh.fileno())
            try:
                # link fails if the target exists, which gives write-once for free
                os.link(tmp, final)
            except FileExistsError:
                raise ConflictError(f"object {name!r} already exists") from None
            except OSError as exc:
                if exc.errno not in (errno.EPERM, errno.ENOTSUP, errno.EXDEV, errno.EMLINK):
                    raise
                if final.exists():
                    raise ConflictError(f"object {name!r} already exists") from None
                os.replace(tmp, final)
        except StoreError:
            raise
        except OSError as exc:
            raise StoreError(f"write of {name!r} failed: {exc}") from exc
        finally:
            try:
                tmp.unlink()
            except FileNotFoundError:
                pass

    def list(self, prefix: str = "") -> set[str]:
        try:
            entries = os.listdir(self.path)
        except OSError as exc:
            raise StoreError(f"cannot list {self.path}: {exc}") from exc
        return {n for n in entries if n.startswith(prefix) and OBJECT_NAME.match(n)}

    def get(self, name: str) -> bytes:
        check_object_name(name)
        try:
            return (self.path / name).read_bytes()
        except FileNotFoundError:
            raise NotFoundError(f"object {name!r} not found") from None
        except OSError as exc:
            raise StoreError(f"read of {name!r} failed: {exc}") from exc


@dataclass
class _SimObject:
    payload: bytes
    writer: Optional[str]
    written_at: float
    visible_at: float


class LatencySimStore:
    """In-memory store with seeded per-put propagation delays.

    The store itself is shared; each node works through its own view obtained
    from :meth:`participant`. With a :class:`VirtualClock` the visibility time
    of every object is a pure function of the seed and the put order.
    """

    def __init__(self, base_ms: float = 1000.0, jitter_ms: float = 500.0, seed: int = 0, clock=None):
        if base_ms < 0 or jitter_ms < 0:
            raise InvalidArgument("latency base and jitter must be non-negative")
        self.base_ms = float(base_ms)
        self.jitter_ms = float(jitter_ms)
        self.clock = clock if clock is not None else WallClock()
        self._rng = make_rng(seed)
        self._objects: dict[str, _SimObject] = {}
        self._lock = threading.Lock()

    @property
    def max_delay_ms(self) -> float:
        return self.base_ms + self.jitter_ms

    def participant(self, node_id: Optional[str]) -> "SimParticipant":
        """View for ``node_id``; ``None`` gives a read-only observer."""
        return SimParticipant(self, node_id)

    def visibility_log(self) -> list[tuple[str, Optional[str], float, float]]:
        """``(name, writer, written_at, visible_at)`` for every object, in put order."""
        with self._lock:
            return [(n, o.writer, o.written_at, o.visible_at) for n, o in self._objects.items()]

    def _put(self, writer: Optional[str], name: str, payload: bytes) -> None:
        _check_put(name, payload)
        with self._lock:
            if name in self._objects:
                raise ConflictError(f"object {name!r} already exists")
            now = self.clock.now_ms()
            delay = self.base_ms + (self._rng.uniform(0.0, self.jitter_ms) if self.jitter_ms else 0.0)
            self._objects[name] = _SimObject(bytes(payload), writer, now, now + delay)

    def _visible(self, obj: _SimObject, reader: Optional[str], now: float) -> bool:
        return (reader is not None and obj.writer == reader) or obj.visible_at <= now

    def _list(self, reader: Optional[str], prefix: str) -> set[str]:
        with self._lock:
            now = self.clock.now_ms()
            return {
                n for n, o in self._objects.items()
                if n.startswith(prefix) and self._visible(o, reader, now)
            }

    def _get(self, reader: Optional[str], name: str) -> bytes:
        check_object_name(name)
        with self._lock:
            obj = self._objects.get(name)
            if obj is None or not self._visible(obj, reader, self.clock.now_ms()):
                raise NotFoundError(f"object {name!r} not visible")
            return obj.payload


class SimParticipant(SharedStore):
    def __init__(self, backend: LatencySimStore, node_id: Optional[str]):
        self.backend = backend
        self.node_id = node_id

    def put(self, name: str, payload: bytes) -> None:
        if self.node_id is None:
            raise StoreError("observer views are read-only")
        self.backend._put(self.node_id, name, payload)

    def list(self, prefix: str = "") -> set[str]:
        return self.backend._list(self.node_id, prefix)

    def get(self, name: str) -> bytes:
        return self.backend._get(self.node_id, name)


__all__ = [
    "SharedStore",
    "DirectoryStore",
    "LatencySimStore",
    "SimParticipant",
    "VirtualClock",
    "WallClock",
    "OBJECT_NAME",
    "check_object_name",
]
