# tests/test_output_formatter.py

import json
import math
import os
import sys
from fractions import Fraction

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from src.output_formatter import format_csv, format_json, format_json_lines, to_jsonable, write_output


def test_to_jsonable_converts_numeric_types():
    payload = {
        'fraction': Fraction(3, 4),
        'whole': Fraction(6, 3),
        'array': np.array([1.5, 2.5]),
        'int': np.int64(7),
        'flag': np.bool_(True),
        'inf': math.inf,
        'pair': (1, 2),
        'range': range(2, 4),
    }
    assert to_jsonable(payload) == {
        'fraction': "3/4",
        'whole': 2,
        'array': [1.5, 2.5],
        'int': 7,
        'flag': True,
        'inf': "inf",
        'pair': [1, 2],
        'range': [2, 3],
    }


def test_format_json_round_trips():
    text = format_json({'command': 'limit', 'result': {'probs': np.array([0.25, 0.75])}})
    assert text.endswith("\n")
    assert json.loads(text) == {'command': 'limit', 'result': {'probs': [0.25, 0.75]}}


def test_format_json_lines():
    text = format_json_lines([{'b': 1, 'a': Fraction(1, 2)}, {'c': 3}])
    lines = text.splitlines()
    assert lines == ['{"a": "1/2", "b": 1}', '{"c": 3}']


def test_format_csv_with_config_echo():
    text = format_csv(["y", "prob"], [(1, 0.25), (2, 0.75)],
                      {'command': 'limit', 'params': {'r': Fraction(1), 'x': 2}, 'seed': None})
    lines = text.splitlines()
    assert lines[:4] == ['# command="limit"', '# params.r=1', '# params.x=2', '# seed=null']
    assert lines[4:] == ['y,prob', '1,0.25', '2,0.75']


def test_format_csv_rejects_ragged_rows():
    with pytest.raises(ValueError):
        format_csv(["a", "b"], [(1,)])


def test_write_output_to_stdout(capsys):
    write_output("hello\n")
    assert capsys.readouterr().out == "hello\n"


def test_write_output_creates_directories(tmp_path):
    target = tmp_path / "nested" / "out.csv"
    write_output("x\n1\n", str(target))
    assert target.read_text(encoding='utf-8') == "x\n1\n"
