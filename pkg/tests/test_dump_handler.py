import json

import numpy as np
import pytest

from napselect.exceptions import DataFormatError, DimensionMismatchError
from napselect.models import ActivationRecord, Role
from napselect.selection import BinaryPattern, build_bank, extract_layer_patterns
from napselect.utils import DumpHandler


def _write_jsonl(path, rows):
    path.write_text("".join(json.dumps(row) + "\n" for row in rows))
    return path


def _record_tuple(record):
    return (record.frame_id, record.box_id, record.layer_id, record.role, record.score, tuple(record.values))


class TestActivationDump:

    def test_reads_single_jsonl_record(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [
            {"frame": "000001", "box": "b0", "layer": "roi.0", "role": "gt", "values": [0.0, 1.5]},
        ])
        (record,) = DumpHandler.read_activation_dump(path)
        assert record.dim == 2
        assert record.role is Role.GT
        assert record.score is None
        np.testing.assert_array_equal(record.values, [0.0, 1.5])

    def test_dimension_mismatch_within_layer(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [
            {"frame": "1", "box": "b0", "layer": "roi.0", "role": "gt", "values": [0.0, 1.5]},
            {"frame": "1", "box": "b1", "layer": "roi.0", "role": "gt", "values": [0.0, 1.5, 2.0]},
        ])
        with pytest.raises(DimensionMismatchError, match="line 2"):
            DumpHandler.read_activation_dump(path)

    def test_layers_may_differ_in_dimension(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [
            {"frame": "1", "box": "b0", "layer": "roi.0", "role": "gt", "values": [0.0, 1.5]},
            {"frame": "1", "box": "b0", "layer": "backbone", "role": "gt", "values": [0.0, 1.5, 2.0]},
        ])
        assert [r.dim for r in DumpHandler.read_activation_dump(path)] == [2, 3]

    def test_unknown_role(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [
            {"frame": "1", "box": "b0", "layer": "roi.0", "role": "maybe", "values": [1.0]},
        ])
        with pytest.raises(DataFormatError, match="unknown role"):
            DumpHandler.read_activation_dump(path)

    @pytest.mark.parametrize("role", ["GT", "Det", " tp"])
    def test_roles_are_lowercase_only(self, tmp_path, role):
        path = _write_jsonl(tmp_path / "d.jsonl", [
            {"frame": "1", "box": "b0", "layer": "roi.0", "role": role, "values": [1.0]},
        ])
        with pytest.raises(DataFormatError, match="unknown role"):
            DumpHandler.read_activation_dump(path)

    def test_role_labels_parse(self):
        assert [Role.parse(label) for label in ("gt", "tp", "fp", "det")] == list(Role)

    def test_key_with_two_roles(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [
            {"frame": "1", "box": "b0", "layer": "roi.0", "role": "tp", "score": 0.9, "values": [1.0]},
            {"frame": "1", "box": "b0", "layer": "roi.0", "role": "fp", "score": 0.9, "values": [1.0]},
        ])
        with pytest.raises(DataFormatError, match="two roles"):
            DumpHandler.read_activation_dump(path)

    def test_negative_activation_rejected(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [
            {"frame": "1", "box": "b0", "layer": "roi.0", "role": "gt", "values": [-3.0, 1.0]},
        ])
        with pytest.raises(DataFormatError, match="line 1"):
            DumpHandler.read_activation_dump(path)

    def test_missing_keys(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [{"frame": "1", "values": [1.0]}])
        with pytest.raises(DataFormatError, match="missing keys"):
            DumpHandler.read_activation_dump(path)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"frame": "1", "box": "b0", "layer": "l", "role": "gt", "values": [1.0]}\n{oops\n')
        with pytest.raises(DataFormatError) as info:
            DumpHandler.read_activation_dump(path)
        assert info.value.line == 2

    def test_napd_matches_jsonl(self, tmp_path, rng):
        records = [
            ActivationRecord(f"{i // 3:06d}", f"b{i}", "roi.0", Role(i % 4),
                             rng.uniform(0, 2, size=16).astype(np.float32).astype(np.float64),
                             None if i % 4 == 0 else float(np.float32(rng.uniform())))
            for i in range(12)
        ]
        DumpHandler.write_activation_dump(tmp_path / "d.jsonl", records)
        DumpHandler.write_activation_dump(tmp_path / "d.napd", records, binary=True)

        from_jsonl = DumpHandler.read_activation_dump(tmp_path / "d.jsonl")
        from_napd = DumpHandler.read_activation_dump(tmp_path / "d.napd")
        assert (tmp_path / "d.napd").read_bytes()[:4] == b"NAPD"
        assert [_record_tuple(r) for r in from_napd] == [_record_tuple(r) for r in from_jsonl]

    def test_napd_rejects_mixed_dimensions(self, tmp_path):
        records = [
            ActivationRecord("1", "b0", "a", Role.GT, np.ones(2)),
            ActivationRecord("1", "b0", "b", Role.GT, np.ones(3)),
        ]
        with pytest.raises(DimensionMismatchError):
            DumpHandler.write_activation_dump(tmp_path / "d.napd", records, binary=True)

    def test_napd_truncated(self, tmp_path):
        records = [ActivationRecord("1", "b0", "a", Role.GT, np.ones(4))]
        path = tmp_path / "d.napd"
        DumpHandler.write_activation_dump(path, records, binary=True)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(DataFormatError, match="truncated"):
            DumpHandler.read_activation_dump(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            DumpHandler.read_activation_dump(tmp_path / "nope.jsonl")


class TestPatternFiles:

    def test_bank_file_layout(self, tmp_path):
        bank = build_bank([BinaryPattern.from_string("0000"), BinaryPattern.from_string("1111")])
        path = tmp_path / "bank.napb"
        DumpHandler.write_bank(path, bank)
        data = path.read_bytes()
        assert data[:4] == b"NAPB"
        assert data[4] == 1
        assert int.from_bytes(data[5:9], "little") == 4
        assert int.from_bytes(data[9:17], "little") == 2
        assert int.from_bytes(data[25:33], "little") == 0b1111

        loaded = DumpHandler.read_bank(path)
        assert loaded.dim == 4
        np.testing.assert_array_equal(loaded.words, bank.words)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bank.napb"
        path.write_bytes(b"XXXX" + bytes(13))
        with pytest.raises(DataFormatError, match="bad magic"):
            DumpHandler.read_bank(path)

    def test_pattern_cache(self, tmp_path, selection_dump):
        layers = extract_layer_patterns(DumpHandler.read_activation_dump(selection_dump))
        cache = tmp_path / "patterns"
        DumpHandler.write_pattern_cache(cache, layers)

        index = json.loads((cache / "index.json").read_text())
        assert index == {"layers": [{"count": len(layers["roi.0"]), "dim": 8, "file": "roi.0", "layer": "roi.0"}]}

        loaded = DumpHandler.read_pattern_cache(cache)["roi.0"]
        original = layers["roi.0"]
        np.testing.assert_array_equal(loaded.words, original.words)
        assert loaded.frame_ids == original.frame_ids
        assert loaded.roles == original.roles
        assert loaded.scores == original.scores

    def test_pattern_cache_sanitizes_layer_names(self, tmp_path):
        records = [ActivationRecord("1", "b0", "roi/head:0", Role.GT, np.ones(4))]
        cache = tmp_path / "patterns"
        DumpHandler.write_pattern_cache(cache, extract_layer_patterns(records))
        assert (cache / "roi_head_0.napb").exists()
        assert list(DumpHandler.read_pattern_cache(cache)) == ["roi/head:0"]


class TestSidecars:

    def test_beam_ids(self, tmp_path):
        path = tmp_path / "000000.beam"
        DumpHandler.write_beam_ids(path, np.array([0, 1, 63, 2]))
        assert path.read_bytes() == bytes([0, 0, 1, 0, 63, 0, 2, 0])
        np.testing.assert_array_equal(DumpHandler.read_beam_ids(path), [0, 1, 63, 2])

    def test_odd_beam_file(self, tmp_path):
        path = tmp_path / "000000.beam"
        path.write_bytes(bytes(3))
        with pytest.raises(DataFormatError, match="odd"):
            DumpHandler.read_beam_ids(path)

    def test_weights(self, tmp_path):
        path = tmp_path / "w.bin"
        DumpHandler.write_weights(path, [1.0, -2.5, 0.25])
        assert int.from_bytes(path.read_bytes()[:8], "little") == 3
        np.testing.assert_array_equal(DumpHandler.read_weights(path), [1.0, -2.5, 0.25])

    def test_weights_trailing_bytes(self, tmp_path):
        path = tmp_path / "w.bin"
        DumpHandler.write_weights(path, [1.0])
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(DataFormatError, match="trailing"):
            DumpHandler.read_weights(path)
