import pytest

from ausokit.frame_store import load_family


@pytest.fixture(scope="session")
def cunningham_frames():
    return load_family("cunningham")


@pytest.fixture(scope="session")
def johnson_frames():
    return load_family("johnson")


@pytest.fixture(scope="session")
def zadeh_frames():
    return load_family("zadeh")


@pytest.fixture(scope="session")
def built_levels():
    """Realized construction chains, shared across test modules."""
    from ausokit.constructions import realize_range
    return {
        "cunningham": realize_range("cunningham", 3),
        "johnson": realize_range("johnson", 3),
        "zadeh": realize_range("zadeh", 2),
    }
