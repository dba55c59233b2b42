import pytest

from epcalc.langs import load_abcde, load_ccs


@pytest.fixture(scope="session")
def ccs():
    return load_ccs(("a", "b", "c"))


@pytest.fixture(scope="session")
def abcde():
    return load_abcde(("c", "d"), ("b",), ("s",))
