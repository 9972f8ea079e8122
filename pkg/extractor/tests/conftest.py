import pytest
import torch

from extractor.backbones import build_backbone, save_checkpoint
from imghelpers import write_image_folder


@pytest.fixture(scope="session")
def image_folder(tmp_path_factory):
    return write_image_folder(tmp_path_factory.mktemp("images"))


@pytest.fixture(scope="session")
def simclr_ckpt(tmp_path_factory):
    torch.manual_seed(0)
    path = tmp_path_factory.mktemp("ckpt") / "simclr.ckpt"
    save_checkpoint(build_backbone("simclr"), str(path))
    return str(path)


@pytest.fixture(scope="session")
def barlow_ckpt(tmp_path_factory):
    torch.manual_seed(1)
    path = tmp_path_factory.mktemp("ckpt") / "bt.ckpt"
    save_checkpoint(build_backbone("barlow-twins"), str(path))
    return str(path)
