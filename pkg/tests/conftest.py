import pytest

from designc.bundle import bundled_language, load_bundle
from designc.vocabulary import load_schema

LENGTH = {"L": "1"}
TIME = {"T": "1"}
MASS_FLOW = {"M": "1", "T": "-1"}


def small_vocabulary():
    """ three classes: Part, Pipe(Part), Box(Part), with a 'feeds' association between parts """
    return {
        "classes": [
            {"name": "Part",
             "attributes": [{"name": "length", "kind": "number", "dimension": LENGTH},
                            {"name": "label", "kind": "string"}],
             "associations": [{"name": "feeds", "target": "Part", "min": 0, "max": "*"}]},
            {"name": "Pipe", "parent": "Part",
             "attributes": [{"name": "flow", "kind": "number", "dimension": MASS_FLOW}]},
            {"name": "Box", "parent": "Part",
             "attributes": [{"name": "open", "kind": "boolean", "default": False}]},
        ]
    }


@pytest.fixture
def small_schema():
    return load_schema(small_vocabulary())


@pytest.fixture
def exhaust_path():
    return bundled_language('exhaust')


@pytest.fixture
def exhaust_bundle(exhaust_path):
    return load_bundle(exhaust_path)


@pytest.fixture
def exhaust_schema(exhaust_bundle):
    return exhaust_bundle.schema


@pytest.fixture(autouse=True)
def chain_tmpdir(tmp_path, monkeypatch):
    monkeypatch.setenv('DESIGNC_TMPDIR', str(tmp_path / 'chains'))
    return tmp_path / 'chains'
