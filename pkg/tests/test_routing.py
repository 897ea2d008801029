from __future__ import annotations

import json
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import turn
from typedmem.core import RouteMask, Turn
from typedmem.errors import ParseError, ProviderError, ValidationError
from typedmem.providers import ScriptedProvider
from typedmem.routing import RouterConfig, RouterMode, route, router_prompt, rule_route

LLM = RouterConfig(mode=RouterMode.LLM, fallback_to_rules=False)
LLM_FALLBACK = RouterConfig(mode=RouterMode.LLM, fallback_to_rules=True)


@pytest.mark.parametrize(
    "text,mask",
    [
        ("I went to Cheesequake park yesterday with my friends", RouteMask(epi=True)),
        ("To brew pour-over coffee: first rinse the filter, then bloom for 30 seconds", RouteMask(pro=True)),
        ("My favorite color is teal", RouteMask(sem=True)),
        ("Yesterday I adopted a puppy", RouteMask(epi=True)),
        ("How to reset the router: first unplug it, then wait ten seconds", RouteMask(pro=True)),
    ],
)
def test_rule_route_examples(text, mask):
    assert route(turn(text)) == mask
    assert rule_route(turn(text)) == mask


def test_blank_turn_rejected_upstream():
    with pytest.raises(ValidationError):
        turn("   ")


def test_questions_do_not_trigger_semantic_routing():
    assert rule_route(turn("What is your favorite color? I went hiking last week.")) == RouteMask(epi=True)


def test_default_mask_when_nothing_matches():
    assert rule_route(turn("hmm ok")) == RouteMask(epi=True)
    assert rule_route(turn("hmm ok"), RouteMask(sem=True)) == RouteMask(sem=True)


def test_config_rejects_empty_default():
    with pytest.raises(ValidationError):
        RouterConfig(default_mask_on_empty=RouteMask())


@given(st.text(min_size=1).filter(lambda s: s.strip()))
def test_route_never_zero_and_pure(text):
    t = Turn("A", text, "2024-01-01")
    first = rule_route(t)
    assert first.to_int() != 0
    assert rule_route(t) == first


@pytest.mark.parametrize("bits", range(1, 8))
def test_llm_mode_returns_scripted_mask(bits):
    mask = RouteMask.from_int(bits)
    t = turn("anything at all")
    provider = ScriptedProvider()
    provider.add(router_prompt(t), "Sure:\n" + json.dumps({"episodic": mask.epi, "semantic": mask.sem, "procedural": mask.pro}))
    assert route(t, LLM, provider) == mask


def test_router_prompt_substitutes_message():
    prompt = router_prompt(turn("I love hiking"))
    assert "I love hiking" in prompt and "{message}" not in prompt
    assert re.search(r"\"episodic\"", prompt)


def test_llm_all_false_falls_back_to_rules():
    t = turn("My favorite color is teal")
    provider = ScriptedProvider()
    provider.add(router_prompt(t), '{"episodic": false, "semantic": false, "procedural": false}')
    assert route(t, LLM, provider) == RouteMask(sem=True)


def test_llm_malformed_verdict():
    t = turn("My favorite color is teal")
    provider = ScriptedProvider()
    provider.add(router_prompt(t), '{"episodic": "yes"}')
    with pytest.raises(ParseError):
        route(t, LLM, provider)
    assert route(t, LLM_FALLBACK, provider) == RouteMask(sem=True)


def test_llm_transport_failure():
    t = turn("My favorite color is teal")
    with pytest.raises(ProviderError):
        route(t, LLM, ScriptedProvider())
    assert route(t, LLM_FALLBACK, ScriptedProvider()) == RouteMask(sem=True)
