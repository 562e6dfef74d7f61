"""
Run manifests and all-or-nothing output writing.

A manifest records what a run read, how it was configured and what it
wrote, with SHA-256 checksums of every input and output file. It holds no
wall-clock data, so identical runs produce identical manifests.
"""
from __future__ import annotations

import hashlib
import logging
import os
import tempfile
from pathlib import Path

from rest_framework import serializers
from rest_framework.renderers import JSONRenderer

import trajpub

logger = logging.getLogger(__name__)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


# ────────────────────────────────
#  MANIFEST
# ────────────────────────────────
class FileChecksumSerializer(serializers.Serializer):
    path = serializers.CharField()
    sha256 = serializers.CharField(max_length=64)


class RunManifestSerializer(serializers.Serializer):
    command = serializers.CharField()
    tool_version = serializers.CharField(default=trajpub.__version__)
    mechanism = serializers.CharField()
    seed = serializers.IntegerField()
    config = serializers.DictField()
    inputs = FileChecksumSerializer(many=True)
    outputs = FileChecksumSerializer(many=True)
    ledger = serializers.DictField()


def render_manifest(data: dict) -> bytes:
    ser = RunManifestSerializer(data=data)
    ser.is_valid(raise_exception=True)
    body = JSONRenderer().render(ser.validated_data, renderer_context={"indent": 2})
    return body + b"\n"


# ────────────────────────────────
#  ATOMIC OUTPUTS
# ────────────────────────────────
class AtomicOutputs:
    """
    Stage every output in a temp file beside its target, then rename them
    all in `commit()`. Leaving the `with` block without committing (or on
    an exception) deletes the temp files and leaves the targets untouched.
    """

    def __init__(self):
        self._staged: list[tuple[str, Path]] = []
        self._committed = False

    def __enter__(self) -> "AtomicOutputs":
        return self

    def stage(self, target: str | Path, content: str | bytes) -> str:
        """Write `content` to a temp file for `target`; returns its SHA-256."""
        data = content.encode("utf-8") if isinstance(content, str) else content
        target = Path(target)
        directory = target.parent if str(target.parent) else Path(".")
        directory.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=directory)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        self._staged.append((tmp, target))
        return sha256_bytes(data)

    def commit(self) -> list[Path]:
        for tmp, target in self._staged:
            os.replace(tmp, target)
        self._committed = True
        written = [target for _, target in self._staged]
        logger.debug("committed %d output file(s)", len(written))
        return written

    def discard(self) -> None:
        for tmp, _ in self._staged:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
        self._staged.clear()

    def __exit__(self, exc_type, exc, tb):
        if not self._committed:
            self.discard()
        return False
