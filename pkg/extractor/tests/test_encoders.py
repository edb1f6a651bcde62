import numpy as np
import pytest

from embedextract import (
    EncodeFailure,
    HashedProjectionEncoder,
    UnknownModel,
    get_encoder,
    list_encoders,
)
from embedextract.encoders import GRANULARITIES

from conftest import write_test_image


@pytest.fixture
def encoder():
    return HashedProjectionEncoder(dimension=16)


@pytest.fixture
def image_vec(encoder, tmp_path):
    path = tmp_path / "img.png"
    write_test_image(path, 3)
    return encoder.image_vector(path)


class TestRegistry:
    def test_lists_bundled_model(self):
        assert "hashed-projection" in list_encoders()

    def test_get_returns_class(self):
        assert get_encoder("hashed-projection") is HashedProjectionEncoder

    def test_unknown_model(self):
        with pytest.raises(UnknownModel, match="clip-large"):
            get_encoder("clip-large")


class TestImageVector:
    def test_deterministic(self, encoder, tmp_path):
        path = tmp_path / "img.png"
        write_test_image(path, 5)
        first = encoder.image_vector(path)
        second = encoder.image_vector(path)
        np.testing.assert_array_equal(first, second)

    def test_depends_on_pixels(self, encoder, tmp_path):
        write_test_image(tmp_path / "a.png", 1)
        write_test_image(tmp_path / "b.png", 2)
        a = encoder.image_vector(tmp_path / "a.png")
        b = encoder.image_vector(tmp_path / "b.png")
        assert not np.array_equal(a, b)

    def test_format_invariant(self, encoder, tmp_path):
        # same pixels, different container: the 8x8 grayscale thumbnail
        # is what gets hashed
        from PIL import Image

        write_test_image(tmp_path / "a.png", 4)
        with Image.open(tmp_path / "a.png") as img:
            img.save(tmp_path / "a.bmp")
        a = encoder.image_vector(tmp_path / "a.png")
        b = encoder.image_vector(tmp_path / "a.bmp")
        np.testing.assert_array_equal(a, b)

    def test_undecodable_file(self, encoder, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"this is not an image")
        with pytest.raises(EncodeFailure, match="cannot decode"):
            encoder.image_vector(path)

    def test_missing_file(self, encoder, tmp_path):
        with pytest.raises(EncodeFailure):
            encoder.image_vector(tmp_path / "absent.png")


class TestEncode:
    def test_all_granularities_unit_norm(self, encoder, image_vec):
        out = encoder.encode("lawyer", image_vec)
        assert set(out) == set(GRANULARITIES)
        for vec in out.values():
            assert vec.shape == (16,)
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)

    def test_granularities_differ_when_grounded(self, encoder, image_vec):
        out = encoder.encode("lawyer", image_vec)
        assert not np.allclose(out["W"], out["S"])
        assert not np.allclose(out["W"], out["C"])
        assert not np.allclose(out["S"], out["C"])

    def test_deterministic(self, encoder, image_vec):
        a = encoder.encode("judge", image_vec)
        b = encoder.encode("judge", image_vec)
        for g in GRANULARITIES:
            np.testing.assert_array_equal(a[g], b[g])

    def test_text_sensitivity(self, encoder, image_vec):
        a = encoder.encode("judge", image_vec)
        b = encoder.encode("nurse", image_vec)
        assert not np.allclose(a["W"], b["W"])

    def test_multi_token_mean(self, encoder):
        # subword aggregation by mean: W of a two-token text without an
        # image is the normalized mean of the token vectors
        va = encoder._token_vector("chief")
        vb = encoder._token_vector("engineer")
        mean = (va + vb) / 2
        expected = mean / np.linalg.norm(mean)
        out = encoder.encode("Chief Engineer", None)  # lowercased
        np.testing.assert_allclose(out["W"], expected, atol=1e-12)

    def test_ungrounded_collapses_to_token_pooling(self, encoder):
        out = encoder.encode("nurse", None)
        token = encoder._token_vector("nurse")
        expected = token / np.linalg.norm(token)
        for g in GRANULARITIES:
            np.testing.assert_allclose(out[g], expected, atol=1e-12)

    def test_layer_changes_vectors(self, image_vec):
        shallow = HashedProjectionEncoder(dimension=16, layer=3)
        deep = HashedProjectionEncoder(dimension=16, layer=9)
        a = shallow.encode("lawyer", None)
        b = deep.encode("lawyer", None)
        assert not np.allclose(a["W"], b["W"])

    def test_empty_text_rejected(self, encoder):
        with pytest.raises(EncodeFailure, match="empty text"):
            encoder.encode("   ", None)

    def test_dimension_respected(self):
        enc = HashedProjectionEncoder(dimension=7)
        out = enc.encode("word", None)
        assert all(v.shape == (7,) for v in out.values())

    def test_bad_dimension_rejected(self):
        with pytest.raises(EncodeFailure):
            HashedProjectionEncoder(dimension=0)
