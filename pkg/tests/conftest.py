import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthdigits import make_digit_images  # noqa: E402

from rctbias import mnist  # noqa: E402


@pytest.fixture(scope="session")
def digit_archive():
    """Small synthetic digit archive shared across tests."""
    images, labels = make_digit_images(6000, seed=20240)
    return mnist.MnistArchive(images=images, labels=labels)


@pytest.fixture(scope="session")
def digit_archive_paths(tmp_path_factory):
    """IDX files of a mid-sized synthetic archive, for harness/CLI tests."""
    out = tmp_path_factory.mktemp("archive")
    images, labels = make_digit_images(12000, seed=77)
    images_path = out / "images.idx"
    labels_path = out / "labels.idx"
    mnist.write_idx(images_path, images)
    mnist.write_idx(labels_path, labels.astype(np.uint8))
    return str(images_path), str(labels_path)
