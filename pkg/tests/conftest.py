import pytest
import torch

from aste_dual.toy import toy_config, write_toy_dataset


@pytest.fixture(scope="session")
def toy_paths(tmp_path_factory):
    return write_toy_dataset(tmp_path_factory.mktemp("toy"))


@pytest.fixture(scope="session")
def toy_cfg():
    return toy_config()


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)
