"""pytest 公共夹具"""

import os
import sys

import pytest

SRC = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src")
if SRC not in sys.path:
    sys.path.insert(0, SRC)

from warp_model import PRESETS, make_preset  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_environment(tmp_path, monkeypatch):
    """每个测试使用独立的配置目录，且不受外部线程数设置影响"""
    monkeypatch.setenv("WARPISO_CONFIG_DIR", str(tmp_path / "warpiso-config"))
    monkeypatch.delenv("WARPISO_THREADS", raising=False)


@pytest.fixture
def euclidean_spec():
    return make_preset("euclidean", n=2)


@pytest.fixture
def spaceform_spec():
    return make_preset("spaceform", n=2)


@pytest.fixture
def ads_spec():
    return make_preset("ads", n=2)


@pytest.fixture
def paper_spec():
    return make_preset("paper", n=2)


@pytest.fixture(params=sorted(PRESETS))
def preset_spec(request):
    return make_preset(request.param, n=2)
