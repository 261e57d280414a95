import json
from importlib import resources

import pytest
from hypothesis import given, strategies as st

from vlmbench.postprocess import RiderLabel
from vlmbench.prompts import (
    AliasMap,
    CascadeSpec,
    DirectPrompt,
    LabelPair,
    PromptLookupError,
    Task,
    TextualDetectionPrompt,
    Verdict,
    build_followup,
    catalog_lookup,
    compose_followup,
    export_catalog,
    parse_label,
    textual_detection_prompts,
    valid_ids,
)


class TestCatalogLookup:
    def test_congestion_a5(self):
        pair = catalog_lookup("congestion", "A5")
        assert pair.labels == ["Congested lanes", "Free-lanes"]

    def test_crack_b2(self):
        pair = catalog_lookup(Task.CRACK, "B2")
        assert pair.labels == ["Cracks present", "Cracks absent"]

    def test_unknown_id_lists_valid_ones(self):
        with pytest.raises(PromptLookupError) as err:
            catalog_lookup("congestion", "Z9")
        message = str(err.value)
        for expected in ("A1", "A2", "A3", "A4", "A5"):
            assert expected in message

    def test_lookup_is_case_insensitive(self):
        assert catalog_lookup("congestion", "a5") is catalog_lookup("congestion", "A5")
        assert catalog_lookup("crack", "p2-f2").id == "P2-F2"

    def test_p1_and_p2_congestion_are_identical_strings(self):
        p1 = catalog_lookup("congestion", "P1-F1")
        p2 = catalog_lookup("congestion", "P2-F2")
        assert p1.initial_prompt == p2.initial_prompt
        assert p1.id != p2.id

    def test_cascade_followup_alias_styles(self):
        f1 = catalog_lookup("congestion", "P1-F1")
        assert f1.alias_map.positive == ("Yes",)
        f2 = catalog_lookup("congestion", "P2-F2")
        assert f2.alias_map.positive == ("Congested lanes",)
        assert f2.alias_map.negative == ("Free-lanes",)

    def test_textual_prompts_mapping(self):
        one, two, three = textual_detection_prompts()
        assert one.query == "A person on a motorbike wearing helmet"
        assert one.mapped_class is RiderLabel.HELMET
        assert two.mapped_class is RiderLabel.NOHELMET
        assert three.query == "A person on a motorbike without wearing helmet"
        assert three.mapped_class is RiderLabel.NOHELMET

    def test_helmet_direct_prompts_exist(self):
        for pid in ("llava-helmet", "llava-helmet-followup", "gpt-helmet"):
            entry = catalog_lookup("helmet", pid)
            assert isinstance(entry, DirectPrompt)
            assert entry.text

    def test_every_valid_id_resolves(self):
        for task in Task:
            for pid in valid_ids(task):
                assert catalog_lookup(task, pid) is not None


class TestCatalogGolden:
    def test_export_matches_shipped_fixture(self):
        shipped = json.loads(
            resources.files("vlmbench")
            .joinpath("data/prompt_catalog.json")
            .read_text("utf-8")
        )
        assert export_catalog() == shipped

    def test_known_verbatim_strings(self):
        f1 = catalog_lookup("congestion", "P1-F1")
        assert f1.follow_up_prompt == "Write Yes for congested, No for non-congested."
        f4 = catalog_lookup("congestion", "P4-F4")
        # the catalog's double space is intentional
        assert f4.follow_up_prompt.startswith("Write  Congested lanes")
        gpt = catalog_lookup("helmet", "gpt-helmet")
        assert gpt.text.endswith("otherwise result nohelmet")

    def test_catalog_is_stable_between_calls(self):
        assert export_catalog() == export_catalog()

    def test_catalog_entries_are_immutable(self):
        entry = catalog_lookup("congestion", "A5")
        with pytest.raises(Exception):
            entry.positive_label = "tampered"
        spec = catalog_lookup("crack", "P1-F1")
        with pytest.raises(Exception):
            spec.alias_map = None


class TestParseLabel:
    def test_exact_class_name(self):
        a2 = AliasMap(positive=("Congested lanes",), negative=("Non-congested lanes",))
        assert parse_label("Congested lanes", a2) is Verdict.POSITIVE

    def test_alias_embedded_in_sentence(self):
        a5 = AliasMap(positive=("Congested lanes",), negative=("Free-lanes",))
        text = "The image shows free-flowing traffic, so: Free-lanes"
        assert parse_label(text, a5) is Verdict.NEGATIVE

    def test_both_classes_is_unknown(self):
        yes_no = AliasMap(positive=("Yes",), negative=("No",))
        assert parse_label("Yes and no", yes_no) is Verdict.UNKNOWN

    def test_no_match_is_unknown(self):
        yes_no = AliasMap(positive=("Yes",), negative=("No",))
        assert parse_label("cannot tell", yes_no) is Verdict.UNKNOWN

    def test_negated_class_does_not_match_positive(self):
        crack = AliasMap(positive=("Cracked",), negative=("Non-cracked",))
        assert parse_label("Non-cracked", crack) is Verdict.NEGATIVE
        assert parse_label("the surface is cracked", crack) is Verdict.POSITIVE

    def test_whole_word_only(self):
        helmet = catalog_lookup("helmet", "gpt-helmet").alias_map
        assert parse_label("nohelmet", helmet) is Verdict.NEGATIVE
        assert parse_label("helmeted riders", helmet) is Verdict.UNKNOWN

    def test_not_wearing_helmet_never_positive(self):
        for pid in ("llava-helmet", "llava-helmet-followup", "gpt-helmet"):
            alias_map = catalog_lookup("helmet", pid).alias_map
            verdict = parse_label("The person is not wearing helmet.", alias_map)
            assert verdict is not Verdict.POSITIVE

    def test_case_insensitive(self):
        a5 = catalog_lookup("congestion", "A5")
        alias_map = AliasMap(positive=(a5.positive_label,), negative=(a5.negative_label,))
        assert parse_label("free-lanes", alias_map) is Verdict.NEGATIVE
        assert parse_label("CONGESTED LANES!", alias_map) is Verdict.POSITIVE

    def test_gpt_congestion_vocabulary(self):
        alias_map = catalog_lookup("congestion", "gpt-congestion").alias_map
        assert parse_label("non-Congested", alias_map) is Verdict.NEGATIVE
        assert parse_label("congested", alias_map) is Verdict.POSITIVE


def _all_parsing_maps() -> list[AliasMap]:
    maps = []
    for task in Task:
        for pid in valid_ids(task):
            entry = catalog_lookup(task, pid)
            if isinstance(entry, (CascadeSpec, DirectPrompt)):
                maps.append(entry.alias_map)
    return maps


FILLER = st.text(
    alphabet="qwzxjv ,.!",  # letters that appear in no catalog alias
    max_size=30,
)


class TestParseLabelProperties:
    @given(data=st.data(), filler_before=FILLER, filler_after=FILLER)
    def test_single_alias_maps_to_its_class(self, data, filler_before, filler_after):
        alias_map = data.draw(st.sampled_from(_all_parsing_maps()))
        entries = alias_map.entries()
        alias, verdict = data.draw(st.sampled_from(entries))
        text = f"{filler_before} {alias} {filler_after}"
        other_aliases = [a for a, v in entries if v is not verdict]
        # only assert when no other-class alias is lexically present
        if any(other.lower() in text.lower() for other in other_aliases):
            return
        assert parse_label(text, alias_map) is verdict

    @given(data=st.data(), suffix=FILLER)
    def test_appending_alias_free_text_keeps_verdict(self, data, suffix):
        alias_map = data.draw(st.sampled_from(_all_parsing_maps()))
        alias, verdict = data.draw(st.sampled_from(alias_map.entries()))
        base = f"answer: {alias}"
        first = parse_label(base, alias_map)
        assert parse_label(base + " " + suffix, alias_map) is first

    @given(st.text(max_size=80))
    def test_total_and_deterministic(self, text):
        alias_map = AliasMap(positive=("Yes",), negative=("No",))
        assert parse_label(text, alias_map) is parse_label(text, alias_map)


class TestBuildFollowup:
    def test_concatenation(self):
        spec = catalog_lookup("congestion", "P1-F1")
        assert (
            build_followup("Traffic is dense.", spec)
            == "Traffic is dense.\nWrite Yes for congested, No for non-congested."
        )

    def test_empty_description_raises(self):
        spec = catalog_lookup("congestion", "P2-F2")
        with pytest.raises(ValueError):
            build_followup("", spec)

    def test_composition_shape(self):
        spec = catalog_lookup("crack", "P5-F5")
        assert build_followup("x", spec) == "x\n" + spec.follow_up_prompt

    def test_compose_followup_used_by_crop_chat(self):
        followup = catalog_lookup("helmet", "llava-helmet-followup")
        assert compose_followup("desc", followup.text) == "desc\n" + followup.text


class TestAliasMapValidation:
    def test_must_cover_both_classes(self):
        with pytest.raises(ValueError):
            AliasMap(positive=(), negative=("No",))

    def test_shared_alias_rejected(self):
        with pytest.raises(ValueError):
            AliasMap(positive=("yes",), negative=("Yes",))

    def test_label_pair_validation(self):
        with pytest.raises(ValueError):
            LabelPair("X", "same", "same")
        with pytest.raises(ValueError):
            LabelPair("X", "", "b")


def test_textual_prompt_types():
    for prompt in textual_detection_prompts():
        assert isinstance(prompt, TextualDetectionPrompt)
        assert prompt.mapped_class in (RiderLabel.HELMET, RiderLabel.NOHELMET)
