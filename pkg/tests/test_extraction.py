from __future__ import annotations

import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import turn
from typedmem.core import TemporalAnchor
from typedmem.errors import ParseError, TemporalError
from typedmem.extraction import (
    ExtractorConfig,
    ExtractorMode,
    episodic_prompt,
    extract_episodic,
    extract_procedural,
    extract_semantic,
    procedural_prompt,
    semantic_prompt,
)
from typedmem.providers import ScriptedProvider

CONV = "2024-07-22T10:55"
TEMPLATE = ExtractorConfig(conversation_timestamp=CONV)
LLM = ExtractorConfig(mode=ExtractorMode.LLM, conversation_timestamp=CONV, fallback_to_reference=False)
RELATIVE_WORDS = re.compile(
    r"\b(yesterday|today|tomorrow|tonight|last (week|month|year)|next (week|month|year)|\w+ (days?|weeks?|months?|years?) ago)\b",
    re.IGNORECASE,
)


def test_episodic_template_examples():
    rec = extract_episodic(turn("I went to Cheesequake park yesterday with my friends"), TEMPLATE)
    assert rec.anchor == TemporalAnchor(2024, 7, 21, precision="day")
    assert "yesterday" not in rec.summary.lower() and "2024-07-21" in rec.summary
    assert rec.summary.startswith("Speaker A reported: ")
    assert extract_episodic(turn("I went camping in Banff last month"), TEMPLATE).anchor == TemporalAnchor(2024, 6, precision="month")
    assert extract_episodic(turn("We played chess together"), TEMPLATE).anchor == TemporalAnchor(2024, 7, 22, precision="day")


def test_episodic_title_is_first_content_words():
    rec = extract_episodic(turn("I went to the old Cheesequake park with my three best friends and a dog"), TEMPLATE)
    assert 1 <= len(rec.title.split()) <= 8


def test_episodic_llm_mode():
    t = turn("I went to Cheesequake park yesterday with my friends")
    provider = ScriptedProvider()
    reply = {"title": "Park visit", "summary": "The user visited Cheesequake park with friends.", "timestamp": "July 21 2024"}
    provider.add(episodic_prompt(t, LLM), "Here you go: " + json.dumps(reply) + " done")
    rec = extract_episodic(t, LLM, provider)
    assert (rec.title, rec.anchor) == ("Park visit", TemporalAnchor(2024, 7, 21, precision="day"))


def test_episodic_llm_errors():
    t = turn("I went to the park")
    bad_json, bad_time = ScriptedProvider(), ScriptedProvider()
    bad_json.add(episodic_prompt(t, LLM), "not json")
    bad_time.add(episodic_prompt(t, LLM), json.dumps({"title": "x", "summary": "y", "timestamp": "whenever"}))
    with pytest.raises(ParseError):
        extract_episodic(t, LLM, bad_json)
    with pytest.raises(TemporalError):
        extract_episodic(t, LLM, bad_time)
    lenient = ExtractorConfig(mode=ExtractorMode.LLM, conversation_timestamp=CONV)
    assert extract_episodic(t, lenient, bad_time).anchor == TemporalAnchor(2024, 7, 22, precision="day")


def test_semantic_template_examples():
    assert extract_semantic(turn("My favorite color is teal"), TEMPLATE).fact == "Speaker A's favorite color is teal"
    fact = extract_semantic(turn("Audrey's dogs are named Bella and Max", "Audrey"), TEMPLATE).fact
    assert "Bella" in fact and "Max" in fact and "Audrey" in fact


def test_semantic_llm_mode():
    t = turn("Audrey's dogs are named Bella and Max")
    provider = ScriptedProvider()
    provider.add(semantic_prompt(t), '{"fact": "Audrey has two dogs named Bella and Max."}')
    assert extract_semantic(t, LLM, provider).fact == "Audrey has two dogs named Bella and Max."


def test_procedural_template_examples():
    rec = extract_procedural(turn("How to reset the router: first unplug it, then wait ten seconds"), TEMPLATE)
    assert rec.title == "How to reset the router"
    assert rec.content == ("unplug it", "wait ten seconds")
    assert extract_procedural(turn("Always water orchids with ice cubes."), TEMPLATE).content == "Always water orchids with ice cubes."
    numbered = extract_procedural(turn("Pancakes: 1. mix flour 2. add eggs 3. fry"), TEMPLATE)
    assert numbered.content == ("mix flour", "add eggs", "fry")


def test_procedural_llm_mode():
    t = turn("To brew coffee, rinse the filter then bloom")
    provider = ScriptedProvider()
    provider.add(procedural_prompt(t), '{"title": "Brew coffee", "content": ["rinse the filter", "bloom"]}')
    assert extract_procedural(t, LLM, provider).content == ("rinse the filter", "bloom")
    empty = ScriptedProvider()
    empty.add(procedural_prompt(t), '{"title": "Brew coffee", "content": ["rinse", ""]}')
    with pytest.raises(ParseError):
        extract_procedural(t, LLM, empty)


_PHRASES = ["yesterday", "last week", "last month", "last year", "3 days ago", "two weeks ago", "tomorrow", "next month"]
_WORDS = st.sampled_from("I we saw went met Paris Bella a the dog museum with friends played".split())


@settings(max_examples=200)
@given(st.lists(_WORDS, min_size=1, max_size=6), st.sampled_from(_PHRASES), st.lists(_WORDS, max_size=4))
def test_template_summary_has_no_relative_words(before, phrase, after):
    text = " ".join(before + [phrase] + after)
    assert not RELATIVE_WORDS.search(extract_episodic(turn(text), TEMPLATE).summary)


_CAP = st.sampled_from(["Bella", "Max", "Paris", "New York", "Cheesequake Park", "Audrey", "Calvin"])
_LOWER = st.sampled_from("likes visited the dog and is near with her".split())


@settings(max_examples=200)
@given(st.lists(st.one_of(_CAP, _LOWER), min_size=1, max_size=8))
def test_semantic_preserves_capitalized_sequences(tokens):
    text = " ".join(tokens)
    fact = extract_semantic(turn(text, "Z"), TEMPLATE).fact
    for seq in re.findall(r"[A-Z]\w*(?:\s+[A-Z]\w*)*", text):
        assert seq in fact


def test_third_person_does_not_rewrite_inserted_ids():
    from typedmem.extraction import third_person

    assert third_person("My favorite tea is oolong.", "me") == "Speaker me's favorite tea is oolong."
    assert third_person("I love my dog and Max loves me", "I") == "Speaker I loves Speaker I's dog and Max loves Speaker I"
    assert third_person("I myself built it", "A") == "Speaker A built it"
