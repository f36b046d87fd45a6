from pathlib import Path

import pytest

from farkas_check.network import load_network, load_property
from farkas_check.proof import parse_proof
from farkas_check.query import load_query

DATA = Path(__file__).parent / "data"


def data_text(name: str) -> str:
    return (DATA / name).read_text()


@pytest.fixture
def ex_net():
    return load_network(data_text("example1_network.json"))


@pytest.fixture
def ex_prop():
    return load_property(data_text("example1_property.json"))


@pytest.fixture
def ex_query():
    return load_query(data_text("example1_query.json"))


@pytest.fixture
def ex_tree():
    return parse_proof(data_text("example2_proof.json"), expected_rows=5)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance")
    for line in RESULTS:
        terminalreporter.write_line(line)
