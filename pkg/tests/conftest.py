import pytest

from stlstm import gen_synthetic, load_dataset, load_manifest


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    """The c=5, m=3, 800-day, coupling 0.6, seed 7 dataset used by the slow tests."""
    out = tmp_path_factory.mktemp("synthetic")
    manifest_path = gen_synthetic(out, locations=5, vars_per_location=3, days=800,
                                  coupling=0.6, seed=7)
    return manifest_path


@pytest.fixture(scope="session")
def synthetic_dataset(synthetic_dir):
    return load_dataset(load_manifest(synthetic_dir))
