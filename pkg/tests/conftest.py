import os

os.environ.setdefault("SSF_LAB_LOG_FILE", os.devnull)

import json

import pytest

from potential import Potential


@pytest.fixture
def zero():
    return Potential.zero()


@pytest.fixture
def well():
    return Potential.square_well(-1.0, 1.0)


@pytest.fixture
def deep_well():
    """Dirichlet half-line operator with one bound state near -0.42."""
    return Potential.square_well(-4.0, 1.0)


@pytest.fixture
def expo():
    return Potential.exponential(-2.0, 1.0)


@pytest.fixture
def bump():
    return Potential.gaussian_bump(2.0, 1.0, 0.3)


@pytest.fixture
def write_config(tmp_path):
    def write(data, name="experiment.json"):
        data = dict(data)
        data.setdefault("output_dir", str(tmp_path / "out"))
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write
