"""
Tests for result persistence: canonical JSON, CSV tables, checksums and manifests
"""

import hashlib
import json
import math
import os
import sys
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from results_io import (TOOL_NAME, TOOL_VERSION, RunManifest, build_id, dumps_json, git_describe,
                        sha256_file, write_csv, write_json)


class TestJson:
    """Canonical JSON output"""

    def test_sorted_keys_and_newline(self):
        text = dumps_json({'b': 1, 'a': 2})
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("}\n")

    def test_numpy_and_nonfinite_values(self):
        data = json.loads(dumps_json({
            'array': np.array([1.5, 2.5]),
            'count': np.int64(3),
            'flag': np.bool_(True),
            'inf': math.inf,
            'nan': float('nan'),
        }))
        assert data['array'] == [1.5, 2.5]
        assert data['count'] == 3
        assert data['flag'] is True
        assert data['inf'] == 'inf'
        assert data['nan'] == 'nan'

    def test_complex_and_paths(self):
        data = json.loads(dumps_json({'z': complex(1.0, -2.0), 'p': Path('a') / 'b'}))
        assert data['z'] == {'re': 1.0, 'im': -2.0}
        assert data['p'] == os.path.join('a', 'b')

    def test_floats_round_trip(self):
        value = 0.1 + 0.2
        assert json.loads(dumps_json({'x': value}))['x'] == value

    def test_write_creates_parents_and_leaves_no_temp_files(self, tmp_path):
        path = write_json(tmp_path / 'nested' / 'report.json', {'ok': True})
        assert path.read_text(encoding='utf-8') == dumps_json({'ok': True})
        assert sorted(p.name for p in path.parent.iterdir()) == ['report.json']


class TestCsv:
    """CSV tables"""

    def test_full_precision(self, tmp_path):
        frame = pd.DataFrame({'t': [0.0, 1.0 / 3.0], 're': [1.0, math.pi], 'im': [0.0, -1e-17]})
        path = write_csv(tmp_path / 'trace.csv', frame)
        lines = path.read_text(encoding='utf-8').splitlines()
        assert lines[0] == 't,re,im'
        restored = pd.read_csv(path, float_precision='round_trip')
        np.testing.assert_array_equal(restored.to_numpy(), frame.to_numpy())

    def test_overwrite_is_atomic(self, tmp_path):
        path = tmp_path / 'table.csv'
        write_csv(path, pd.DataFrame({'x': [1.0]}))
        write_csv(path, pd.DataFrame({'x': [2.0, 3.0]}))
        assert len(pd.read_csv(path)) == 2
        assert [p.name for p in tmp_path.iterdir()] == ['table.csv']


class TestManifest:
    """Run manifests with output checksums"""

    def test_sha256(self, tmp_path):
        path = tmp_path / 'blob.bin'
        path.write_bytes(b'sle' * 1000)
        assert sha256_file(path, block_size=7) == hashlib.sha256(b'sle' * 1000).hexdigest()

    def test_finalize(self, tmp_path):
        output = write_json(tmp_path / 'result.json', {'value': 1.0})
        manifest = RunManifest(command='trace', config={'kappa': 2.0}, settings={'engine': {}})
        manifest.add_output(output)
        path = manifest.finalize(tmp_path)

        data = json.loads(path.read_text(encoding='utf-8'))
        assert data['tool'] == TOOL_NAME
        assert data['version'] == TOOL_VERSION
        assert data['command'] == 'trace'
        assert data['outputs'] == ['result.json']
        assert data['checksums']['result.json'] == sha256_file(output)
        assert data['wall_time'] >= 0.0
        assert data['exit_status'] is None

    def test_custom_name(self, tmp_path):
        manifest = RunManifest(command='check', config={}, build='v0-test')
        path = manifest.finalize(tmp_path, name='run.json')
        assert path.name == 'run.json'
        assert json.loads(path.read_text(encoding='utf-8'))['build'] == 'v0-test'

    def test_git_unavailable(self):
        with patch('results_io.subprocess.run', side_effect=OSError("no git")):
            assert git_describe() is None

    def test_build_id_is_cached(self):
        build_id.cache_clear()
        try:
            with patch('results_io.git_describe', return_value='v1-3-gabc') as describe:
                assert build_id() == 'v1-3-gabc'
                assert build_id() == 'v1-3-gabc'
            assert describe.call_count == 1
        finally:
            build_id.cache_clear()

    def test_exit_status_is_recorded(self, tmp_path):
        manifest = RunManifest(command='crmoment', config={}, build='v0-test')
        manifest.exit_status = 3
        data = json.loads(manifest.finalize(tmp_path).read_text(encoding='utf-8'))
        assert data['exit_status'] == 3

    def test_failed_write_leaves_target_untouched(self, tmp_path):
        path = write_json(tmp_path / 'report.json', {'version': 1})
        with patch('results_io.os.replace', side_effect=OSError("disk full")):
            with pytest.raises(OSError):
                write_json(path, {'version': 2})
        assert json.loads(path.read_text(encoding='utf-8')) == {'version': 1}
        assert [p.name for p in tmp_path.iterdir()] == ['report.json']
