import pytest
from hypothesis import given
from hypothesis import strategies as st

import vischeck as v
from vischeck.extraction import dedup_parts, parse_extraction, _FIXTURES, _PLACEHOLDER

ALL_ASPECTS = list(v.ASPECT_ORDER)


class TestTemplates:
    @pytest.mark.parametrize("aspect", ALL_ASPECTS)
    def test_placeholder_appears_exactly_once(self, aspect):
        from importlib import resources
        text = resources.files("vischeck.fixtures").joinpath(_FIXTURES[aspect]).read_text("utf-8")
        assert text.count(_PLACEHOLDER) == 1

    def test_render_substitutes_description(self):
        rendered = v.render_prompt(v.AspectKind.EXISTENCE, "A dog.")
        assert _PLACEHOLDER not in rendered
        assert rendered.rstrip().endswith("[DESP]: A dog.")

    def test_render_rejects_empty(self):
        with pytest.raises(ValueError):
            v.render_prompt(v.AspectKind.EXISTENCE, "")


class TestAnswerRegion:
    def test_last_tag_occurrence_wins(self):
        raw = "[ENT]: (cat)\nsome chatter\n[ENT]: (dog, tree)\ntrailing"
        out = parse_extraction(v.AspectKind.EXISTENCE, raw)
        assert out.parts == [v.ExistencePart("dog"), v.ExistencePart("tree")]

    def test_tag_rest_of_line_only(self):
        raw = "[ENT]: (dog)\n(cat)"
        out = parse_extraction(v.AspectKind.EXISTENCE, raw)
        assert out.parts == [v.ExistencePart("dog")]

    def test_tagless_fallback_uses_whole_output(self):
        out = parse_extraction(v.AspectKind.EXISTENCE, "  (dog, cat) ")
        assert out.parts == [v.ExistencePart("dog"), v.ExistencePart("cat")]

    @pytest.mark.parametrize("marker", ["NONE", "none", "None", "NONE.", " none . "])
    def test_none_markers(self, marker):
        out = parse_extraction(v.AspectKind.COUNT, f"[COUNT]: {marker}")
        assert out.parts == []
        assert out.parse_warnings == []

    def test_empty_reply(self):
        out = parse_extraction(v.AspectKind.RELATION, "")
        assert out.parts == []
        assert out.parse_warnings == []


class TestListingAspects:
    def test_existence_comma_split(self):
        out = parse_extraction(v.AspectKind.EXISTENCE, "[ENT]: (a dog, The Cat, bowl, bowl)")
        assert out.parts == [
            v.ExistencePart("dog"), v.ExistencePart("cat"),
            v.ExistencePart("bowl"), v.ExistencePart("bowl"),
        ]

    def test_existence_multiple_groups(self):
        out = parse_extraction(v.AspectKind.EXISTENCE, "[ENT]: (dog) and (cat, tree)")
        assert [p.entity for p in out.parts] == ["dog", "cat", "tree"]
        assert any("unparsed" in w for w in out.parse_warnings)

    def test_image_text_semicolon_split_preserves_case(self):
        out = parse_extraction(
            v.AspectKind.IMAGE_TEXT, "[TEXT]: (Broadway; Tickets $25; Visit Central Park.)")
        assert [p.text for p in out.parts] == [
            "Broadway", "Tickets $25", "Visit Central Park."]

    def test_image_text_commas_stay_inside_one_item(self):
        out = parse_extraction(v.AspectKind.IMAGE_TEXT, "[TEXT]: (Private Beach, No Dogs)")
        assert [p.text for p in out.parts] == ["Private Beach, No Dogs"]

    def test_no_list_found_warns(self):
        out = parse_extraction(v.AspectKind.EXISTENCE, "[ENT]: dog, cat")
        assert out.parts == []
        assert any("no parenthesized list" in w for w in out.parse_warnings)

    def test_empty_item_warns(self):
        out = parse_extraction(v.AspectKind.EXISTENCE, "[ENT]: (dog, , cat)")
        assert [p.entity for p in out.parts] == ["dog", "cat"]
        assert any("empty item" in w for w in out.parse_warnings)

    def test_article_only_item_warns(self):
        out = parse_extraction(v.AspectKind.EXISTENCE, "[ENT]: (dog, the)")
        assert [p.entity for p in out.parts] == ["dog"]
        assert any("dropped item" in w for w in out.parse_warnings)


class TestTupleAspects:
    def test_relation_tuples(self):
        out = parse_extraction(
            v.AspectKind.RELATION, "[RELA]: (orange, on, counter); (bottle, near, counter)")
        assert out.parts == [
            v.RelationPart("orange", "on", "counter"),
            v.RelationPart("bottle", "near", "counter"),
        ]

    def test_trailing_period_after_tuple(self):
        out = parse_extraction(v.AspectKind.ATTRIBUTE, "[ATTR]: (white, plate).")
        assert out.parts == [v.AttributePart("white", "plate")]
        assert out.parse_warnings == []

    def test_malformed_tuple_warns_and_keeps_rest(self):
        out = parse_extraction(
            v.AspectKind.ATTRIBUTE, "[ATTR]: (shirtless, man); (broken tuple")
        assert out.parts == [v.AttributePart("shirtless", "man")]
        assert any("malformed tuple" in w for w in out.parse_warnings)

    def test_wrong_field_count_warns(self):
        out = parse_extraction(v.AspectKind.RELATION, "[RELA]: (dog, cat)")
        assert out.parts == []
        assert any("expected 3 fields" in w for w in out.parse_warnings)

    def test_count_number_words_and_digits(self):
        out = parse_extraction(v.AspectKind.COUNT, "[COUNT]: (five, potted plants); (3, clocks)")
        assert out.parts == [v.CountPart(5, "potted plants"), v.CountPart(3, "clocks")]

    def test_bad_count_token_warns(self):
        out = parse_extraction(v.AspectKind.COUNT, "[COUNT]: (many, dogs); (zero, cats)")
        assert out.parts == []
        assert len(out.parse_warnings) == 2


class TestParseCountNumber:
    def test_words(self):
        assert v.parse_count_number("one") == 1
        assert v.parse_count_number(" Twenty ") == 20

    def test_digits(self):
        assert v.parse_count_number("7") == 7
        assert v.parse_count_number("42") == 42

    @pytest.mark.parametrize("bad", ["zero", "0", "-3", "many", "", "twenty one"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            v.parse_count_number(bad)


class TestTotality:
    @given(
        aspect=st.sampled_from(ALL_ASPECTS),
        raw=st.lists(
            st.sampled_from(list("abcXYZNOE ();,.$\n\t[]:123") + ["NONE", "[ENT]:"]),
            max_size=60,
        ).map("".join),
    )
    def test_parse_extraction_never_raises(self, aspect, raw):
        out = parse_extraction(aspect, raw)
        assert isinstance(out.parts, list)
        assert isinstance(out.parse_warnings, list)


class _ScriptedGenerator:
    def __init__(self, replies, fail_on=None):
        self.replies = replies
        self.fail_on = fail_on
        self.prompts = []

    def generate(self, prompt):
        self.prompts.append(prompt)
        for aspect in v.ASPECT_ORDER:
            if v.render_prompt(aspect, self._desc) == prompt:
                if aspect is self.fail_on:
                    raise v.ExpertUnavailable("backend down")
                return self.replies.get(aspect, "NONE")
        raise AssertionError(f"unexpected prompt: {prompt[:60]}...")


class TestRunExtraction:
    def _gen(self, desc, replies, fail_on=None):
        g = _ScriptedGenerator(replies, fail_on)
        g._desc = desc
        return g

    def test_aspect_order_and_outputs(self):
        desc = "A dog chasing a ball."
        gen = self._gen(desc, {
            v.AspectKind.EXISTENCE: "[ENT]: (dog, ball)",
            v.AspectKind.RELATION: "[RELA]: (dog, chasing, ball)",
        })
        outputs = v.run_extraction(desc, gen)
        assert [o.aspect for o in outputs] == list(v.ASPECT_ORDER)
        assert len(gen.prompts) == 5
        assert outputs[0].parts == [v.ExistencePart("dog"), v.ExistencePart("ball")]
        assert outputs[1].parts == [v.RelationPart("dog", "chasing", "ball")]
        assert outputs[2].parts == []

    def test_generator_failure_names_the_aspect(self):
        desc = "A dog."
        gen = self._gen(desc, {}, fail_on=v.AspectKind.ATTRIBUTE)
        with pytest.raises(v.GeneratorUnavailable) as exc_info:
            v.run_extraction(desc, gen)
        assert exc_info.value.aspect is v.AspectKind.ATTRIBUTE
        assert "attribute" in str(exc_info.value)

    def test_extract_all_dedups_keeping_first(self):
        desc = "Dogs everywhere."
        gen = self._gen(desc, {
            v.AspectKind.EXISTENCE: "[ENT]: (dog, Dog, cat, dog)",
        })
        parts = v.extract_all(desc, gen)
        assert parts == [v.ExistencePart("dog"), v.ExistencePart("cat")]


class TestDedupParts:
    def test_cross_type_kept(self):
        parts = [
            v.ExistencePart("dog"),
            v.AttributePart("brown", "dog"),
            v.ExistencePart("dog"),
            v.AttributePart("brown", "dog"),
        ]
        assert dedup_parts(parts) == [v.ExistencePart("dog"), v.AttributePart("brown", "dog")]
