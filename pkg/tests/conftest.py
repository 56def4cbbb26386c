"""
Shared pytest setup: src/ on the import path and the ``slow`` marker
"""

import os
import sys

import pytest

SRC_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src')
if SRC_DIR not in sys.path:
    sys.path.insert(0, SRC_DIR)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-size Monte Carlo runs (deselect with -m 'not slow')")


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """Run in a scratch directory so logs and results stay out of the repository"""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SLE_LAB_OUT_DIR", raising=False)
    return tmp_path
