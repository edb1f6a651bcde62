"""Shared fixtures: the micro spec and a deterministic image directory."""

from pathlib import Path

import pytest
from PIL import Image

DATA = Path(__file__).parent / "data"

MICRO_IMAGE_IDS = (
    "img-man",
    "img-woman",
    "img-man-lawyer",
    "img-woman-lawyer",
    "img-man-teacher",
    "img-woman-teacher",
)

# The full grounded cross product for the micro spec: 2 targets x 2
# target images + 2 attribute texts x 4 attribute images.
MICRO_PAIRS = (
    ("lawyer", "img-man-lawyer"),
    ("lawyer", "img-man-teacher"),
    ("lawyer", "img-woman-lawyer"),
    ("lawyer", "img-woman-teacher"),
    ("man", "img-man"),
    ("man", "img-woman"),
    ("teacher", "img-man-lawyer"),
    ("teacher", "img-man-teacher"),
    ("teacher", "img-woman-lawyer"),
    ("teacher", "img-woman-teacher"),
    ("woman", "img-man"),
    ("woman", "img-woman"),
)


def write_test_image(path: Path, index: int) -> None:
    img = Image.new("RGB", (16, 16), (index * 37 % 256, index * 91 % 256, index * 13 % 256))
    img.putpixel((index % 16, (index * 3) % 16), (255, 255, 255))
    # explicit format: some tests use extensionless or mislabeled names
    img.save(path, format="PNG")


@pytest.fixture(scope="session")
def micro_spec_path() -> Path:
    return DATA / "micro.json"


@pytest.fixture(scope="session")
def micro_images(tmp_path_factory) -> Path:
    directory = tmp_path_factory.mktemp("micro-images")
    for i, image_id in enumerate(MICRO_IMAGE_IDS):
        write_test_image(directory / f"{image_id}.png", i)
    return directory
