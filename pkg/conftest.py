import pytest

from forgery_synth.services import synthesize_case
from forgery_synth.sources import synthetic_source, textured_image
from jpeg_model.services import encode, parse_jpeg


def make_case(seed, q1, q2, size=256, coverage=0.25, rgb=False):
    """Synthesized forgery on generated textures; the tampered region is a rectangle."""
    original, tampered, mask = synthetic_source(seed, size, size, rgb=rgb, coverage=coverage)
    return synthesize_case(original, tampered, mask, q1, q2)


@pytest.fixture
def texture():
    return textured_image(7, 128, 128)


@pytest.fixture
def single_jpeg():
    """Singly compressed texture at quality 90."""
    return parse_jpeg(encode(textured_image(21, 256, 256), 90))


@pytest.fixture(scope='session')
def forgery_case():
    """Aligned double-JPEG forgery, q1=80, q2=95."""
    return make_case(5, 80, 95)


@pytest.fixture(scope='session')
def forgery_jpeg(forgery_case):
    return parse_jpeg(forgery_case.jpeg)
