from __future__ import annotations

import httpx
import pytest

from answering_fixture import BANK_A, BANK_B, BREAD, DOGS, QUESTION, bank
from conftest import FIXTURES
from typedmem.answering import (
    EMPTY_BANK,
    NO_ANSWER,
    ExtractiveAnswerer,
    answer,
    assemble_prompt,
    serialize_record,
)
from typedmem.core import EvidenceSet, SemanticRecord, TemporalAnchor
from typedmem.engine import SteppingClock
from typedmem.errors import ProviderError
from typedmem.providers import ChatCompletionProvider, ScriptedProvider

EMPTY = EvidenceSet((), 25)


def test_serialize_examples():
    assert serialize_record(DOGS) == "2023-05-04: Audrey's dogs are named Bella and Max"
    month = SemanticRecord("A", "Speaker A moved to Lisbon", TemporalAnchor(2024, 6, precision="month"))
    assert serialize_record(month) == "June 2024: Speaker A moved to Lisbon"
    assert serialize_record(BREAD) == "June 2023: Bake sourdough: feed the starter; bake at 250C"


def test_golden_prompt_byte_exact():
    golden = (FIXTURES / "golden_prompt.txt").read_text(encoding="utf-8")
    assert assemble_prompt(QUESTION, BANK_A, BANK_B, ("Audrey", "Calvin")) == golden
    assert "{" not in golden


def test_empty_banks_render_sentinel():
    prompt = assemble_prompt("Anything?", EMPTY, EMPTY, ("A", "B"))
    assert prompt.count(EMPTY_BANK) == 2


def test_swapping_banks_swaps_sections():
    ab = assemble_prompt(QUESTION, BANK_A, BANK_B, ("Audrey", "Calvin"))
    ba = assemble_prompt(QUESTION, BANK_B, BANK_A, ("Calvin", "Audrey"))
    assert ab != ba
    assert ab.index("Memories for user Audrey") < ab.index("Memories for user Calvin")
    assert ba.index("Memories for user Calvin") < ba.index("Memories for user Audrey")
    assert ab.endswith(f"Question: {QUESTION}") and ba.endswith(f"Question: {QUESTION}")


def test_evidence_order_follows_evidence_set():
    prompt = assemble_prompt(QUESTION, BANK_A, EMPTY, ("Audrey", "Calvin"))
    assert prompt.index("Bella and Max\n") < prompt.index("Hike with the dogs")


def test_scripted_answer_and_latency():
    provider = ScriptedProvider()
    prompt = assemble_prompt(QUESTION, BANK_A, BANK_B, ("Audrey", "Calvin"))
    provider.add(prompt, "  Bella and Max  ")
    result = answer(QUESTION, [BANK_A, BANK_B], provider, ("Audrey", "Calvin"), SteppingClock())
    assert result.text == "Bella and Max"
    assert result.gen_latency_s == pytest.approx(0.001)
    assert result.prompt == prompt


def test_extractive_answerer_picks_planted_evidence():
    result = answer(QUESTION, [BANK_A, BANK_B], ExtractiveAnswerer(), ("Audrey", "Calvin"))
    assert "Bella" in result.text and "Max" in result.text
    assert answer("Who won the match?", [EMPTY, EMPTY], ExtractiveAnswerer(), ("A", "B")).text == NO_ANSWER


def test_provider_timeout_carries_elapsed():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    provider = ChatCompletionProvider(base_url="http://llm.test/v1", transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderError) as info:
        answer(QUESTION, [BANK_A, BANK_B], provider, ("Audrey", "Calvin"))
    assert info.value.elapsed_s is not None and info.value.elapsed_s >= 0.0
    assert "timed out" in str(info.value)


def test_chat_provider_request_shape(monkeypatch):
    monkeypatch.setenv("TEST_KEY", "sk-test")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = request.read()
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    provider = ChatCompletionProvider(
        model_id="m", base_url="http://llm.test/v1", api_key_env="TEST_KEY", transport=httpx.MockTransport(handler)
    )
    assert provider.complete("hi") == "ok"
    assert seen["auth"] == "Bearer sk-test"
    assert b'"temperature":0.0' in seen["body"].replace(b" ", b"")


def test_scripted_provider_lists_and_missing():
    provider = ScriptedProvider()
    provider.add("p", ["one", "two"])
    assert [provider.complete("p") for _ in range(3)] == ["one", "two", "two"]
    with pytest.raises(ProviderError):
        provider.complete("unknown")
    assert bank((DOGS, 0.5)).records == [DOGS]
