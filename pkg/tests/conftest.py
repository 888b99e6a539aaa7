from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile("ci")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def corpus_revisions():
    from edithist.ingest import ingest_xml_dump

    return sorted(ingest_xml_dump(FIXTURES / "corpus.xml"), key=lambda r: r.order_key)


@pytest.fixture(scope="session")
def corpus_store(tmp_path_factory, corpus_revisions):
    from edithist.ingest import Store, build_store

    d = tmp_path_factory.mktemp("store")
    build_store(corpus_revisions, d)
    return Store(d)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acceptance_log.RESULTS):
            terminalreporter.write_line(acceptance_log.RESULTS[n])
