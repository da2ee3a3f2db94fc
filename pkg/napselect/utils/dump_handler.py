"""
Activation dumps, pattern caches, bank files and small binary sidecars.
"""

import json
import logging
import os
import re
import struct
from collections import OrderedDict
from pathlib import Path
from typing import BinaryIO, Dict, List, Sequence, Tuple, Union

import numpy as np

from napselect.config import (
    DUMP_MAGIC, DUMP_VERSION, PATTERN_INDEX_FILE, PATTERN_MAGIC, PATTERN_VERSION,
)
from napselect.exceptions import DataFormatError, DimensionMismatchError
from napselect.models import ActivationRecord, Role
from napselect.selection.bank import PatternBank
from napselect.selection.patterns import LayerPatterns, n_words

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_HEADER = struct.Struct("<4sBIQ")  # magic, version, dim, count
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_REQUIRED_KEYS = ("frame", "box", "layer", "role", "values")
_SAFE_NAME = re.compile(r"[^A-Za-z0-9._-]")


def _read_exact(handle: BinaryIO, size: int, source: PathLike, what: str) -> bytes:
    data = handle.read(size)
    if len(data) != size:
        raise DataFormatError(f"truncated file while reading {what}", source=source)
    return data


def _read_header(handle: BinaryIO, source: PathLike, magic: bytes, version: int) -> Tuple[int, int]:
    found, found_version, dim, count = _HEADER.unpack(_read_exact(handle, _HEADER.size, source, "header"))
    if found != magic:
        raise DataFormatError(f"bad magic {found!r}, expected {magic!r}", source=source)
    if found_version != version:
        raise DataFormatError(f"unsupported version {found_version}", source=source)
    return dim, count


def _napd_dtype(dim: int) -> np.dtype:
    return np.dtype([
        ("frame", "<u4"), ("box", "<u4"), ("layer", "<u4"),
        ("role", "u1"), ("score", "<f4"), ("values", "<f4", (dim,)),
    ])


class DumpHandler:
    """
    Reads and writes the pipeline's binary and JSONL artifacts.
    """

    @staticmethod
    def read_activation_dump(file_path: PathLike) -> List[ActivationRecord]:
        """
        Read an activation dump, JSONL or packed NAPD (detected by magic bytes).

        Args:
            file_path: Path to the dump

        Returns:
            Records in file order

        Raises:
            FileNotFoundError: If the file doesn't exist
            DataFormatError: On a schema violation, an unknown role or a
                (frame, box, layer) key carrying two roles
            DimensionMismatchError: If one layer mixes vector dimensions
        """
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"File not found: {file_path}")
        with open(file_path, "rb") as handle:
            head = handle.read(len(DUMP_MAGIC))

        if head == DUMP_MAGIC:
            records = DumpHandler._read_napd(file_path)
        else:
            records = DumpHandler._read_jsonl(file_path)
        logger.info(f"Read {len(records)} activation records from {file_path}")
        return records

    @staticmethod
    def _record_from_json(obj: dict) -> ActivationRecord:
        if not isinstance(obj, dict):
            raise DataFormatError("record must be a JSON object")
        missing = [key for key in _REQUIRED_KEYS if key not in obj]
        if missing:
            raise DataFormatError(f"missing keys {', '.join(missing)}")
        for key in ("frame", "box", "layer", "role"):
            if not isinstance(obj[key], str):
                raise DataFormatError(f"{key!r} must be a string")
        values = obj["values"]
        if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
        ):
            raise DataFormatError("'values' must be a list of numbers")
        score = obj.get("score")
        if score is not None and (not isinstance(score, (int, float)) or isinstance(score, bool)):
            raise DataFormatError("'score' must be a number")
        return ActivationRecord(
            frame_id=obj["frame"],
            box_id=obj["box"],
            layer_id=obj["layer"],
            role=Role.parse(obj["role"]),
            values=np.asarray(values, dtype=np.float64),
            score=None if score is None else float(score),
        )

    @staticmethod
    def _read_jsonl(file_path: PathLike) -> List[ActivationRecord]:
        records = []
        checker = _DumpChecker(file_path)
        with open(file_path, "r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = DumpHandler._record_from_json(json.loads(line))
                except json.JSONDecodeError as error:
                    raise DataFormatError(f"invalid JSON: {error.msg}", source=file_path, line=line_number) from None
                except DataFormatError as error:
                    raise error.with_context(source=file_path, line=line_number) from None
                checker.check(record, line_number)
                records.append(record)
        return records

    @staticmethod
    def _read_napd(file_path: PathLike) -> List[ActivationRecord]:
        with open(file_path, "rb") as handle:
            dim, count = _read_header(handle, file_path, DUMP_MAGIC, DUMP_VERSION)
            (n_strings,) = _U32.unpack(_read_exact(handle, _U32.size, file_path, "string table"))
            strings = []
            for _ in range(n_strings):
                (length,) = _U32.unpack(_read_exact(handle, _U32.size, file_path, "string length"))
                raw = _read_exact(handle, length, file_path, "string")
                try:
                    strings.append(raw.decode("utf-8"))
                except UnicodeDecodeError:
                    raise DataFormatError("string table entry is not UTF-8", source=file_path) from None
            dtype = _napd_dtype(dim)
            body = _read_exact(handle, dtype.itemsize * count, file_path, "records")
            if handle.read(1):
                raise DataFormatError("trailing bytes after last record", source=file_path)

        table = np.frombuffer(body, dtype=dtype, count=count)
        roles = {role.value: role for role in Role}
        checker = _DumpChecker(file_path)
        records = []
        for index, row in enumerate(table):
            for key in ("frame", "box", "layer"):
                if row[key] >= len(strings):
                    raise DataFormatError(f"record {index}: string index {row[key]} out of range", source=file_path)
            if int(row["role"]) not in roles:
                raise DataFormatError(f"record {index}: unknown role code {int(row['role'])}", source=file_path)
            score = float(row["score"])
            try:
                record = ActivationRecord(
                    frame_id=strings[row["frame"]],
                    box_id=strings[row["box"]],
                    layer_id=strings[row["layer"]],
                    role=roles[int(row["role"])],
                    values=row["values"].astype(np.float64),
                    score=None if np.isnan(score) else score,
                )
            except DataFormatError as error:
                raise DataFormatError(f"record {index}: {error.message}", source=file_path) from None
            checker.check(record, None)
            records.append(record)
        return records

    @staticmethod
    def write_activation_dump(file_path: PathLike, records: Sequence[ActivationRecord], binary: bool = False) -> None:
        """
        Write records as JSONL, or as NAPD when ``binary`` (all records must share one dimension).
        """
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        if not binary:
            with open(file_path, "w", encoding="utf-8", newline="\n") as handle:
                for record in records:
                    handle.write(json.dumps(record.to_dict()) + "\n")
            return

        dims = {record.dim for record in records}
        if len(dims) > 1:
            raise DimensionMismatchError(f"NAPD holds one vector dimension, records have {sorted(dims)}")
        dim = dims.pop() if dims else 0

        strings: Dict[str, int] = OrderedDict()
        for record in records:
            for text in (record.frame_id, record.box_id, record.layer_id):
                strings.setdefault(text, len(strings))

        table = np.zeros(len(records), dtype=_napd_dtype(dim))
        for index, record in enumerate(records):
            table[index] = (
                strings[record.frame_id], strings[record.box_id], strings[record.layer_id],
                record.role.value, np.nan if record.score is None else record.score, record.values,
            )
        with open(file_path, "wb") as handle:
            handle.write(_HEADER.pack(DUMP_MAGIC, DUMP_VERSION, dim, len(records)))
            handle.write(_U32.pack(len(strings)))
            for text in strings:
                raw = text.encode("utf-8")
                handle.write(_U32.pack(len(raw)))
                handle.write(raw)
            handle.write(table.tobytes())

    @staticmethod
    def write_patterns(file_path: PathLike, dim: int, words: np.ndarray) -> None:
        """Write bit-packed patterns in the NAPB format."""
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        words = np.ascontiguousarray(words, dtype="<u8").reshape(-1, n_words(dim))
        with open(file_path, "wb") as handle:
            handle.write(_HEADER.pack(PATTERN_MAGIC, PATTERN_VERSION, dim, words.shape[0]))
            handle.write(words.tobytes())

    @staticmethod
    def read_patterns(file_path: PathLike) -> Tuple[int, np.ndarray]:
        """
        Returns:
            (dim, words) with words of shape (count, ceil(dim / 64))
        """
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"File not found: {file_path}")
        with open(file_path, "rb") as handle:
            dim, count = _read_header(handle, file_path, PATTERN_MAGIC, PATTERN_VERSION)
            width = n_words(dim)
            body = _read_exact(handle, 8 * width * count, file_path, "pattern words")
            if handle.read(1):
                raise DataFormatError("trailing bytes after last pattern", source=file_path)
        words = np.frombuffer(body, dtype="<u8").reshape(count, width).astype(np.uint64)
        return dim, words

    @staticmethod
    def write_bank(file_path: PathLike, bank: PatternBank) -> None:
        DumpHandler.write_patterns(file_path, bank.dim, bank.words)

    @staticmethod
    def read_bank(file_path: PathLike) -> PatternBank:
        dim, words = DumpHandler.read_patterns(file_path)
        try:
            return PatternBank.from_words(words, dim)
        except DataFormatError as error:
            raise error.with_context(source=file_path) from None

    @staticmethod
    def write_pattern_cache(directory: PathLike, layers: Dict[str, LayerPatterns]) -> None:
        """
        Write one NAPB file plus a ``.meta.jsonl`` row sidecar per layer and an index.
        """
        directory = Path(directory)
        os.makedirs(directory, exist_ok=True)
        index = []
        used = set()
        for layer_id in sorted(layers):
            layer = layers[layer_id]
            stem = _SAFE_NAME.sub("_", layer_id) or "layer"
            while stem in used:
                stem += "_"
            used.add(stem)

            DumpHandler.write_patterns(directory / f"{stem}.napb", layer.dim, layer.words)
            with open(directory / f"{stem}.meta.jsonl", "w", encoding="utf-8", newline="\n") as handle:
                for frame_id, box_id, role, score in zip(layer.frame_ids, layer.box_ids, layer.roles, layer.scores):
                    row = {"frame": frame_id, "box": box_id, "role": role.label, "score": score}
                    handle.write(json.dumps(row, sort_keys=True) + "\n")
            index.append({"layer": layer_id, "file": stem, "dim": layer.dim, "count": len(layer)})

        with open(directory / PATTERN_INDEX_FILE, "w", encoding="utf-8", newline="\n") as handle:
            json.dump({"layers": index}, handle, indent=2, sort_keys=True)
            handle.write("\n")
        logger.info(f"Wrote pattern cache for {len(index)} layers to {directory}")

    @staticmethod
    def read_pattern_cache(directory: PathLike) -> Dict[str, LayerPatterns]:
        """
        Returns:
            Mapping layer_id -> LayerPatterns, layers in identifier order
        """
        directory = Path(directory)
        index_path = directory / PATTERN_INDEX_FILE
        if not index_path.exists():
            raise FileNotFoundError(f"Pattern cache index not found: {index_path}")
        with open(index_path, "r", encoding="utf-8") as handle:
            try:
                entries = json.load(handle)["layers"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise DataFormatError("malformed pattern cache index", source=index_path) from None

        layers: Dict[str, LayerPatterns] = OrderedDict()
        for entry in sorted(entries, key=lambda e: e["layer"]):
            stem = entry["file"]
            dim, words = DumpHandler.read_patterns(directory / f"{stem}.napb")
            meta_path = directory / f"{stem}.meta.jsonl"
            frames, boxes, roles, scores = [], [], [], []
            with open(meta_path, "r", encoding="utf-8") as handle:
                for line_number, line in enumerate(handle, start=1):
                    try:
                        row = json.loads(line)
                        frames.append(row["frame"])
                        boxes.append(row["box"])
                        roles.append(Role.parse(row["role"]))
                        scores.append(row["score"])
                    except (json.JSONDecodeError, KeyError, TypeError):
                        raise DataFormatError("malformed metadata row", source=meta_path, line=line_number) from None
                    except DataFormatError as error:
                        raise error.with_context(source=meta_path, line=line_number) from None
            try:
                layers[entry["layer"]] = LayerPatterns(
                    layer_id=entry["layer"], dim=dim, words=words,
                    frame_ids=tuple(frames), box_ids=tuple(boxes), roles=tuple(roles), scores=tuple(scores),
                )
            except DataFormatError as error:
                raise error.with_context(source=meta_path) from None
        return layers

    @staticmethod
    def write_beam_ids(file_path: PathLike, beam_ids: np.ndarray) -> None:
        """Beam sidecar: one u16-LE beam id per point."""
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        beam_ids = np.asarray(beam_ids)
        if beam_ids.size and (beam_ids.min() < 0 or beam_ids.max() > np.iinfo(np.uint16).max):
            raise DataFormatError("beam ids must fit in an unsigned 16-bit integer")
        with open(file_path, "wb") as handle:
            handle.write(beam_ids.astype("<u2").tobytes())

    @staticmethod
    def read_beam_ids(file_path: PathLike) -> np.ndarray:
        with open(file_path, "rb") as handle:
            data = handle.read()
        if len(data) % 2:
            raise DataFormatError("beam sidecar length is odd", source=file_path)
        return np.frombuffer(data, dtype="<u2").astype(np.int64)

    @staticmethod
    def write_weights(file_path: PathLike, values: np.ndarray) -> None:
        """Flat weight file: u64-LE count followed by f32-LE values."""
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        values = np.asarray(values, dtype="<f4").reshape(-1)
        with open(file_path, "wb") as handle:
            handle.write(_U64.pack(values.shape[0]))
            handle.write(values.tobytes())

    @staticmethod
    def read_weights(file_path: PathLike) -> np.ndarray:
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"File not found: {file_path}")
        with open(file_path, "rb") as handle:
            (count,) = _U64.unpack(_read_exact(handle, _U64.size, file_path, "weight count"))
            body = _read_exact(handle, 4 * count, file_path, "weights")
            if handle.read(1):
                raise DataFormatError("trailing bytes after last weight", source=file_path)
        return np.frombuffer(body, dtype="<f4").astype(np.float64)


class _DumpChecker:
    """Per-layer dimension and duplicate-key checks while streaming a dump."""

    def __init__(self, source: PathLike):
        self.source = source
        self.layer_dims: Dict[str, int] = {}
        self.seen: Dict[tuple, Role] = {}

    def check(self, record: ActivationRecord, line: Union[int, None]) -> None:
        where = f"{self.source}:line {line}" if line is not None else str(self.source)
        expected = self.layer_dims.setdefault(record.layer_id, record.dim)
        if record.dim != expected:
            raise DimensionMismatchError(
                f"{where}: layer {record.layer_id} has d={record.dim}, earlier records have d={expected}"
            )
        if record.key in self.seen:
            raise DataFormatError(
                f"({record.frame_id}, {record.box_id}, {record.layer_id}) already has role "
                f"{self.seen[record.key].label}; a record may not carry two roles",
                source=self.source, line=line,
            )
        self.seen[record.key] = record.role
