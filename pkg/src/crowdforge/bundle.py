"""Re-launchable pipeline bundles.

A bundle is ``bundle.zip`` holding the canonical spec documents plus a
manifest with per-member digests and a content digest over all of them.
Importing under a new name reproduces byte-identical canonical documents
and (with equal seeds) identical exam samples; the manifest records the
source pipeline version so seed derivation lines up after import.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass

from .errors import DigestMismatchError, UnsupportedFormatError
from .storage import AnnotationStore, PipelineRecord

BUNDLE_FORMAT_VERSION = 1

# fixed zip metadata so identical content yields identical archive bytes
_ZIP_DATE = (2020, 1, 1, 0, 0, 0)

MEMBER_INSTRUCTION = "instruction.md"
MEMBER_TUTORIAL = "tutorial.json"
MEMBER_EXAM = "exam.json"
MEMBER_EXAM_CONFIG = "exam_config.json"
MEMBER_TASKSET = "taskset.json"
MEMBER_MANIFEST = "manifest.json"


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def content_digest(digests: dict[str, str]) -> str:
    lines = "".join(f"{name}:{digests[name]}\n" for name in sorted(digests))
    return _digest(lines.encode())


def export_bundle(record: PipelineRecord) -> bytes:
    members: dict[str, bytes] = {MEMBER_INSTRUCTION: record.instruction.encode()}
    if record.tutorial_doc is not None:
        members[MEMBER_TUTORIAL] = record.tutorial_doc.encode()
    if record.exam_doc is not None:
        members[MEMBER_EXAM] = record.exam_doc.encode()
    if record.exam_config_doc is not None:
        members[MEMBER_EXAM_CONFIG] = record.exam_config_doc.encode()
    if record.taskset_doc is not None:
        members[MEMBER_TASKSET] = record.taskset_doc.encode()

    digests = {name: _digest(data) for name, data in members.items()}
    manifest = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "pipeline_version": record.version,
        "digests": digests,
        "content_digest": content_digest(digests),
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(members) + [MEMBER_MANIFEST]:
            data = (json.dumps(manifest, indent=2, sort_keys=True).encode()
                    if name == MEMBER_MANIFEST else members[name])
            info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
            info.external_attr = 0o644 << 16
            zf.writestr(info, data)
    return buf.getvalue()


@dataclass
class BundleContents:
    pipeline_version: int
    content_digest: str
    instruction: str
    tutorial_doc: str | None
    exam_doc: str | None
    exam_config_doc: str | None
    taskset_doc: str | None


def read_bundle(data: bytes) -> BundleContents:
    """Open and verify a bundle archive; digest mismatches raise."""
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise UnsupportedFormatError(f"not a bundle archive: {exc}")
    with zf:
        names = set(zf.namelist())
        if MEMBER_MANIFEST not in names:
            raise UnsupportedFormatError("bundle has no manifest.json")
        manifest = json.loads(zf.read(MEMBER_MANIFEST))
        if manifest.get("format_version") != BUNDLE_FORMAT_VERSION:
            raise UnsupportedFormatError(
                f"unsupported bundle format version {manifest.get('format_version')!r}"
            )
        digests = manifest.get("digests", {})
        members: dict[str, bytes] = {}
        for name, expected in digests.items():
            if name not in names:
                raise DigestMismatchError(f"bundle member {name!r} is missing")
            blob = zf.read(name)
            if _digest(blob) != expected:
                raise DigestMismatchError(f"digest mismatch for {name!r}")
            members[name] = blob
        for name in names - set(digests) - {MEMBER_MANIFEST}:
            raise DigestMismatchError(f"unlisted member {name!r} in bundle")
        if manifest.get("content_digest") != content_digest(digests):
            raise DigestMismatchError("bundle content digest does not verify")

    def text(name: str) -> str | None:
        return members[name].decode() if name in members else None

    return BundleContents(
        pipeline_version=int(manifest.get("pipeline_version", 1)),
        content_digest=manifest["content_digest"],
        instruction=text(MEMBER_INSTRUCTION) or "",
        tutorial_doc=text(MEMBER_TUTORIAL),
        exam_doc=text(MEMBER_EXAM),
        exam_config_doc=text(MEMBER_EXAM_CONFIG),
        taskset_doc=text(MEMBER_TASKSET),
    )


def import_bundle(store: AnnotationStore, data: bytes, new_name: str) -> PipelineRecord:
    """Install a verified bundle as a fresh pipeline under a new name.

    The imported version number matches the bundle's source version so
    seeded exam sampling replays identically.
    """
    contents = read_bundle(data)
    from .parsing import parse_exam_config, parse_pipeline_spec

    def parse(doc: str | None, kind: str):
        if doc is None:
            return None
        result = parse_pipeline_spec(doc, kind)
        if result.spec is None:
            raise UnsupportedFormatError(f"bundle member for {kind} fails validation")
        return result.spec

    tutorial = parse(contents.tutorial_doc, "tutorial")
    exam = parse(contents.exam_doc, "exam")
    task_set = parse(contents.taskset_doc, "task_set")
    exam_config = None
    if contents.exam_config_doc is not None:
        cfg = parse_exam_config(contents.exam_config_doc)
        if cfg.spec is None:
            raise UnsupportedFormatError("bundle exam config fails validation")
        exam_config = cfg.spec
    return store.save_pipeline(
        new_name,
        instruction=contents.instruction,
        tutorial=tutorial,
        exam=exam,
        exam_config=exam_config,
        task_set=task_set,
        initial_version=contents.pipeline_version,
    )
