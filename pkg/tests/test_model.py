import pytest
from hypothesis import given
from hypothesis import strategies as st

from groundedbias import (
    Experiment,
    Granularity,
    GroundedBiasTest,
    ImageCategory,
    ImageLabel,
    PValueMethod,
    StimulusKey,
    TargetElement,
    make_key,
    parse_key,
    ungrounded_key,
    validate_image_labels,
)
from groundedbias import TestResult as Result
from groundedbias.errors import (
    CategoryMismatch,
    DanglingReference,
    InvalidIdentifier,
    InvalidTest,
)


def identifier(min_size=1):
    # no "::", junction-safe: text ids must not end with ":", image ids
    # must not start with ":"; keep both ends colon-free here
    return st.text(
        alphabet=st.characters(blacklist_characters=":", blacklist_categories=("Cs",)),
        min_size=min_size,
        max_size=12,
    )


class TestStimulusKey:
    def test_make_key_serializes_with_separator(self):
        assert make_key("man", "img07").serialize() == "man::img07"

    def test_ungrounded_key_uses_reserved_id(self):
        key = make_key("lawyer", "-")
        assert key.serialize() == "lawyer::-"
        assert not key.grounded
        assert key == ungrounded_key("lawyer")

    def test_separator_in_text_rejected(self):
        with pytest.raises(InvalidIdentifier):
            make_key("a::b", "img1")

    def test_separator_in_image_rejected(self):
        with pytest.raises(InvalidIdentifier):
            make_key("a", "im::g1")

    @pytest.mark.parametrize("text,image", [("", "img"), ("w", ""), ("", "")])
    def test_empty_identifiers_rejected(self, text, image):
        with pytest.raises(InvalidIdentifier):
            make_key(text, image)

    def test_trailing_colon_in_text_rejected(self):
        # "a:" + "::" + "b" and "a" + "::" + ":b" would serialize alike
        with pytest.raises(InvalidIdentifier):
            make_key("a:", "b")

    def test_leading_colon_in_image_rejected(self):
        with pytest.raises(InvalidIdentifier):
            make_key("a", ":b")

    def test_interior_colons_allowed(self):
        key = make_key("a:b", "c:d")
        assert parse_key(key.serialize()) == key

    @given(identifier(), identifier())
    def test_round_trip(self, text, image):
        key = make_key(text, image)
        assert parse_key(key.serialize()) == key

    def test_parse_rejects_missing_separator(self):
        with pytest.raises(InvalidIdentifier):
            parse_key("manimg07")

    def test_grounded_flag(self):
        assert make_key("man", "img1").grounded
        assert not ungrounded_key("man").grounded


class TestTargetElement:
    def test_duplicate_image_rejected(self):
        with pytest.raises(InvalidTest):
            TargetElement("man", ("i1", "i1"))

    def test_grounded_keys_sorted(self):
        element = TargetElement("man", ("b", "a", "c"))
        assert [k.image_id for k in element.grounded_keys()] == ["a", "b", "c"]

    def test_empty_images_allowed(self):
        assert TargetElement("man").grounded_keys() == ()


def small_test(**overrides):
    base = dict(
        name="t",
        x_targets=(TargetElement("x0", ("ix",)),),
        y_targets=(TargetElement("y0", ("iy",)),),
        a_x=(("a", "ia_x"),),
        a_y=(("a", "ia_y"),),
        b_x=(("b", "ib_x"),),
        b_y=(("b", "ib_y"),),
        a_text=("a",),
        b_text=("b",),
    )
    base.update(overrides)
    return GroundedBiasTest(**base)


class TestGroundedBiasTest:
    def test_valid_construction(self):
        test = small_test()
        assert test.has_grounded_attributes
        assert test.has_ungrounded_attributes
        assert test.granularity is None

    def test_empty_target_set_rejected(self):
        with pytest.raises(InvalidTest):
            small_test(x_targets=())

    def test_duplicate_target_text_rejected(self):
        with pytest.raises(InvalidTest):
            small_test(y_targets=(TargetElement("x0", ("iy",)),))

    def test_duplicate_key_within_group_rejected(self):
        with pytest.raises(InvalidTest):
            small_test(a_x=(("a", "i"), ("a", "i")))

    def test_overlapping_groups_rejected(self):
        with pytest.raises(InvalidTest) as err:
            small_test(a_y=(("a", "ia_x"),))
        assert "a_x" in str(err.value) and "a_y" in str(err.value)

    def test_no_attributes_at_all_rejected(self):
        with pytest.raises(InvalidTest):
            small_test(a_x=(), a_y=(), b_x=(), b_y=(), a_text=(), b_text=())

    def test_ungrounded_only_is_valid(self):
        test = small_test(a_x=(), a_y=(), b_x=(), b_y=())
        assert not test.has_grounded_attributes
        with pytest.raises(InvalidTest):
            test.require_grounded()
        test.require_ungrounded()

    def test_require_grounded_needs_target_images(self):
        test = small_test(x_targets=(TargetElement("x0"),))
        with pytest.raises(InvalidTest):
            test.require_grounded()

    def test_granularity_coerced(self):
        assert small_test(granularity="W").granularity is Granularity.W

    def test_referenced_images_excludes_ungrounded_marker(self):
        test = small_test(x_targets=(TargetElement("x0", ("ix",)),))
        assert "-" not in test.referenced_images()
        assert "ix" in test.referenced_images()


def full_manifest():
    return {
        "ix": ImageLabel(ImageCategory.X),
        "iy": ImageLabel(ImageCategory.Y),
        "ia_x": ImageLabel(ImageCategory.X, "A"),
        "ia_y": ImageLabel(ImageCategory.Y, "A"),
        "ib_x": ImageLabel(ImageCategory.X, "B"),
        "ib_y": ImageLabel(ImageCategory.Y, "B"),
    }


class TestImageLabels:
    def test_consistent_manifest_passes(self):
        validate_image_labels(small_test(), full_manifest())

    def test_missing_image_is_dangling(self):
        manifest = full_manifest()
        del manifest["ia_y"]
        with pytest.raises(DanglingReference) as err:
            validate_image_labels(small_test(), manifest)
        assert "ia_y" in str(err.value)

    def test_target_with_wrong_category(self):
        manifest = full_manifest()
        manifest["ix"] = ImageLabel(ImageCategory.Y)
        with pytest.raises(CategoryMismatch):
            validate_image_labels(small_test(), manifest)

    def test_attribute_group_with_wrong_category(self):
        manifest = full_manifest()
        manifest["ia_x"] = ImageLabel(ImageCategory.Y, "A")
        with pytest.raises(CategoryMismatch) as err:
            validate_image_labels(small_test(), manifest)
        assert "a_x" in str(err.value)

    def test_attribute_group_with_wrong_side(self):
        manifest = full_manifest()
        manifest["ib_y"] = ImageLabel(ImageCategory.Y, "A")
        with pytest.raises(CategoryMismatch):
            validate_image_labels(small_test(), manifest)

    def test_ungrounded_key_in_grounded_group(self):
        test = small_test(a_x=(("a", "-"),))
        with pytest.raises(CategoryMismatch):
            validate_image_labels(test, full_manifest())


class TestTestResult:
    def build(self, p):
        return Result.build(
            test_name="t",
            experiment=Experiment.E1,
            granularity=Granularity.W,
            statistic=0.5,
            effect_size=1.0,
            p_value=p,
            p_method=PValueMethod.EXACT,
            n_permutations=70,
        )

    def test_out_of_range_p_rejected(self):
        with pytest.raises(ValueError):
            self.build(1.5)

    def test_significance_is_strictly_below_threshold(self):
        assert self.build(0.049999).significant
        assert not self.build(0.05).significant
        assert not self.build(0.050001).significant

    def test_custom_threshold(self):
        result = Result.build(
            test_name="t",
            experiment="E2",
            granularity="S",
            statistic=0.0,
            effect_size=0.0,
            p_value=0.09,
            p_method="monte-carlo",
            n_permutations=99999,
            seed=7,
            threshold=0.1,
        )
        assert result.significant
        assert result.experiment is Experiment.E2
        assert result.granularity is Granularity.S
        assert result.seed == 7

    def test_granularity_may_be_absent(self):
        result = Result.build(
            test_name="t",
            experiment="E1",
            granularity=None,
            statistic=0.0,
            effect_size=0.0,
            p_value=0.5,
            p_method="exact",
            n_permutations=2,
        )
        assert result.granularity is None


def test_experiment_enum_values():
    assert {e.value for e in Experiment} == {"E1", "E2", "E3", "UNGROUNDED"}
    assert Experiment("E3") is Experiment.E3


def test_granularity_enum_values():
    assert {g.value for g in Granularity} == {"W", "S", "C"}
