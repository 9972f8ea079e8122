import pytest

from pedcc.io import EmbeddingDataset
from synth import make_blobs


@pytest.fixture
def blob_dataset():
    data, labels = make_blobs(n=600, d_in=16, clusters=3, seed=7)
    return EmbeddingDataset(data=data, labels=labels)
