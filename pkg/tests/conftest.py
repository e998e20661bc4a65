import importlib.resources as resources
import re

import pytest

from underhood.ontology import OntologyGraph, load_ontology


def fixture_text(name: str) -> str:
    return resources.files("underhood").joinpath(f"fixtures/{name}").read_text()


@pytest.fixture(scope="session")
def seed_ontology_text() -> str:
    return fixture_text("seed.ontology")


@pytest.fixture(scope="session")
def seed_graph(seed_ontology_text) -> OntologyGraph:
    return load_ontology(seed_ontology_text)


@pytest.hookimpl(trylast=True)
def pytest_runtest_logreport(report):
    # One terminal line per passed gate test, visible even under capture.
    if report.when != "call" or not report.passed:
        return
    hit = re.search(r"test_criterion_(\d+)", report.nodeid)
    if hit:
        print(f"\n[ACCEPTANCE] criterion {int(hit.group(1))}: PASS")
