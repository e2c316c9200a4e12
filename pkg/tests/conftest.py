import importlib.resources
import sys
from pathlib import Path

import pytest

from cise.parser import parse_spec
from cise.tokens import parse_tokens

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = importlib.resources.files("cise") / "fixtures"
SPEC_FIXTURES = ["school.cise", "school_crdt.cise", "school_crdt_enrolled.cise", "generic.cise"]


def fixture_path(name):
    return str(FIXTURES / name)


def load(name):
    return parse_spec((FIXTURES / name).read_text(encoding="utf-8"), name)


def load_tokens(name, spec):
    return parse_tokens((FIXTURES / name).read_text(encoding="utf-8"), spec, name)


@pytest.fixture(scope="session")
def school():
    return load("school.cise")


@pytest.fixture(scope="session")
def school_crdt():
    return load("school_crdt.cise")


@pytest.fixture(scope="session")
def generic():
    return load("generic.cise")
