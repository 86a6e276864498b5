import pytest

from veilmod.corpus import ingest_manifest
from veilmod.fixture import generate_placeholder_corpus


@pytest.fixture(scope="session")
def fixture_corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    generate_placeholder_corpus(out, seed=0)
    return out


@pytest.fixture(scope="session")
def fixture_corpus(fixture_corpus_dir):
    return ingest_manifest(fixture_corpus_dir / "manifest.jsonl")


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    """A 30-image corpus (5 per cell) for fast server and simulation tests."""
    out = tmp_path_factory.mktemp("small_corpus")
    distribution = {
        ("sex_nudity", "realistic"): 5,
        ("sex_nudity", "synthetic"): 5,
        ("graphic", "realistic"): 5,
        ("graphic", "synthetic"): 5,
        ("safe", "realistic"): 5,
        ("safe", "synthetic"): 5,
    }
    generate_placeholder_corpus(out, seed=1, width=48, height=40, distribution=distribution)
    return out


@pytest.fixture(scope="session")
def small_corpus(small_corpus_dir):
    return ingest_manifest(small_corpus_dir / "manifest.jsonl")
