import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles / stub_scorer

from rankcascade.synthetic import build_dataset

STUB_SCORER = Path(__file__).parent / "stub_scorer.py"
BRIDGE_DIR = Path(__file__).parent.parent / "bridge"
BRIDGE_MAIN = BRIDGE_DIR / "dist" / "main.js"


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """The constructed 2000-passage / 50-query corpus, built once."""
    root = tmp_path_factory.mktemp("synthetic")
    return build_dataset(root, seed=7)


@pytest.fixture(scope="session")
def synthetic_config(synthetic_dataset):
    """Base config mapping for pipeline runs over the synthetic corpus."""
    ds = synthetic_dataset

    def make(**overrides):
        mapping = {
            "corpus": str(ds.corpus),
            "queries": str(ds.queries),
            "expansions": str(ds.expansions),
            "mode": "hybrid",
            "k_sparse": 100,
            "k_dense": 50,
            "embeddings": {
                "passages": str(ds.passage_embeddings),
                "queries": str(ds.query_embeddings),
            },
            "tag": "synthetic",
        }
        mapping.update(overrides)
        return mapping

    return make
