import pytest

from nftledger.synthetic import fixture_collection

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    collection = fixture_collection()
    paths = collection.write(tmp_path_factory.mktemp("fixture"))
    return collection, paths


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
