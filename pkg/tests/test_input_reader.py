# tests/test_input_reader.py

import json
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from src.exceptions import PathFileError
from src.input_reader import parse_path_text, read_file_content, read_path_file


@pytest.fixture
def path_dir(tmp_path):
    """Directory holding sample path files in every accepted layout."""
    (tmp_path / "plain.txt").write_text("# simulated\n3\n4\n6\n\n9\n", encoding='utf-8')
    (tmp_path / "simulate.csv").write_text("# command=\"simulate\"\nx\n2\n3\n5\n", encoding='utf-8')
    (tmp_path / "array.json").write_text("[1, 2, 4]", encoding='utf-8')
    (tmp_path / "simulate.json").write_text(json.dumps({
        "command": "simulate",
        "config": {},
        "result": {"path": [5, 7, 12], "origin_included": True},
    }), encoding='utf-8')
    (tmp_path / "bad.txt").write_text("3\n4\nfive\n", encoding='utf-8')
    return tmp_path


def test_read_file_content_success(path_dir):
    assert read_file_content(str(path_dir / "array.json")) == "[1, 2, 4]"


def test_read_file_content_not_found(path_dir):
    with pytest.raises(PathFileError, match="not found"):
        read_file_content(str(path_dir / "missing.txt"))


def test_read_file_content_not_a_file(path_dir):
    with pytest.raises(PathFileError, match="not a file"):
        read_file_content(str(path_dir))


def test_read_file_content_not_utf8(path_dir):
    target = path_dir / "binary.txt"
    target.write_bytes(b"\xff\xfe\x00\x81")
    with pytest.raises(PathFileError, match="UTF-8"):
        read_file_content(str(target))


def test_plain_lines_with_comments(path_dir):
    path = read_path_file(str(path_dir / "plain.txt"))
    assert path.values == (3, 4, 6, 9)
    assert not path.origin_included


def test_plain_lines_with_origin(path_dir):
    path = read_path_file(str(path_dir / "plain.txt"), drop_origin=True)
    assert path.origin_included
    assert path.observed == (4, 6, 9)


def test_simulate_csv_header(path_dir):
    assert read_path_file(str(path_dir / "simulate.csv")).values == (2, 3, 5)


def test_json_array(path_dir):
    assert read_path_file(str(path_dir / "array.json")).values == (1, 2, 4)


def test_simulate_json_keeps_origin_flag(path_dir):
    path = read_path_file(str(path_dir / "simulate.json"))
    assert path.values == (5, 7, 12)
    assert path.origin_included


def test_malformed_line_is_reported(path_dir):
    with pytest.raises(PathFileError) as excinfo:
        read_path_file(str(path_dir / "bad.txt"))
    assert excinfo.value.line_number == 3
    assert str(excinfo.value).startswith("line 3:")


@pytest.mark.parametrize("text", ["", "# only a comment\n", "[]"])
def test_empty_paths_are_rejected(text):
    with pytest.raises(PathFileError):
        parse_path_text(text)


@pytest.mark.parametrize("text", ["1\n0\n", "1\n-2\n", "[1, true]", "[1, 2.5]", "{\"other\": 1}", "[1, 2"])
def test_malformed_values_are_rejected(text):
    with pytest.raises(PathFileError):
        parse_path_text(text)


def test_header_only_allowed_first():
    with pytest.raises(PathFileError):
        parse_path_text("1\nx\n2\n")


@pytest.mark.parametrize("flag, drop_origin, expected", [
    ("true", False, True),
    ("false", False, False),
    ("false", True, True),
])
def test_csv_origin_echo(flag, drop_origin, expected):
    text = f"# command=\"simulate\"\n# result.origin_included={flag}\nx\n4\n6\n8\n"
    path = parse_path_text(text, drop_origin=drop_origin)
    assert path.values == (4, 6, 8)
    assert path.origin_included is expected


def test_csv_origin_echo_must_be_boolean():
    with pytest.raises(PathFileError) as excinfo:
        parse_path_text("# result.origin_included=maybe\n4\n6\n")
    assert excinfo.value.line_number == 1
