"""Index and corpus persistence.

Corpora travel as JSON lines (one document object per line). Built indexes are
stored in a binary container:

    magic            4 bytes  b"QEVI"
    format version   u16
    vocabulary count u32
      per entry:     u32 phrase byte length, UTF-8 phrase text (tokens joined
                     by single spaces), u32 document frequency
    vector count     u32
      per document:  u32 id byte length, UTF-8 doc id,
                     u32 word count, that many little-endian u64 words

All integers are little-endian, so the file is bit-exact across platforms.
"""

from __future__ import annotations

import io
import json
import struct
from array import array
from pathlib import Path
from typing import Sequence

from .corpus import Document, DocBitVector, Label, Source, VocabularyIndex, Phrase

MAGIC = b"QEVI"
FORMAT_VERSION = 1


class IndexFormatError(ValueError):
    """The bytes being read are not a valid index container."""


def load_corpus(path: str | Path) -> list[Document]:
    """Read a JSON-lines corpus file into Document records."""
    docs: list[Document] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            try:
                docs.append(
                    Document(
                        id=str(raw["id"]),
                        text=str(raw["text"]),
                        label=Label(raw.get("label", "unlabeled")),
                        source=Source(raw.get("source", "seed-corpus")),
                        fetched_at=raw.get("fetched_at"),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad document record: {exc}") from exc
    return docs


def save_corpus(path: str | Path, docs: Sequence[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record: dict = {"id": doc.id, "text": doc.text}
            if doc.label is not Label.UNLABELED:
                record["label"] = doc.label.value
            if doc.source is not Source.SEED_CORPUS:
                record["source"] = doc.source.value
            if doc.fetched_at is not None:
                record["fetched_at"] = doc.fetched_at
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def dump_index(vocab: VocabularyIndex, vectors: Sequence[DocBitVector]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", FORMAT_VERSION))

    buf.write(struct.pack("<I", len(vocab)))
    for phrase, freq in vocab:
        text = phrase.text.encode("utf-8")
        buf.write(struct.pack("<I", len(text)))
        buf.write(text)
        buf.write(struct.pack("<I", freq))

    buf.write(struct.pack("<I", len(vectors)))
    for vec in vectors:
        doc_id = vec.doc_id.encode("utf-8")
        buf.write(struct.pack("<I", len(doc_id)))
        buf.write(doc_id)
        buf.write(struct.pack("<I", len(vec.words)))
        buf.write(struct.pack(f"<{len(vec.words)}Q", *vec.words))
    return buf.getvalue()


def save_index(path: str | Path, vocab: VocabularyIndex, vectors: Sequence[DocBitVector]) -> None:
    Path(path).write_bytes(dump_index(vocab, vectors))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise IndexFormatError("truncated index file")
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def parse_index(data: bytes) -> tuple[VocabularyIndex, list[DocBitVector]]:
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise IndexFormatError("bad magic bytes")
    version = reader.u16()
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"unsupported format version {version}")

    entries: list[tuple[Phrase, int]] = []
    for _ in range(reader.u32()):
        text = reader.take(reader.u32()).decode("utf-8")
        freq = reader.u32()
        entries.append((Phrase.from_text(text), freq))
    vocab = VocabularyIndex(entries)

    vectors: list[DocBitVector] = []
    for _ in range(reader.u32()):
        doc_id = reader.take(reader.u32()).decode("utf-8")
        n_words = reader.u32()
        words = array("Q", struct.unpack(f"<{n_words}Q", reader.take(n_words * 8)))
        vectors.append(DocBitVector(doc_id, words, vocab.size))
    if reader.pos != len(data):
        raise IndexFormatError(f"{len(data) - reader.pos} trailing bytes")
    return vocab, vectors


def load_index(path: str | Path) -> tuple[VocabularyIndex, list[DocBitVector]]:
    return parse_index(Path(path).read_bytes())
