from __future__ import annotations

import pytest

from groundloop.parsing import whitespace_token_count
from groundloop.prompts import PromptTemplate, build_prompt, load_template

from conftest import make_spec

RETRIEVAL = make_spec(
    "Retrieval Information", "retrieval", 5,
    "This interface retrieves the necessary information based on the given query.",
)
CODE = make_spec(
    "Code Execution", "code", 5,
    "This interface executes provided Python code snippets and returns the results.",
)


class TestBuildPrompt:
    def test_contains_result_convention_and_blocks(self):
        prompt = build_prompt(PromptTemplate(), [RETRIEVAL, CODE], "What is 2+2?")
        assert "`<result> ...results... </result>`" in prompt
        assert "Interface For Retrieval Information" in prompt
        assert "Interface For Code Execution" in prompt
        assert prompt.rstrip().endswith("Question: What is 2+2?")

    def test_single_interface_single_block(self):
        prompt = build_prompt(PromptTemplate(), [RETRIEVAL], "q")
        assert prompt.count("Interface For ") == 1

    def test_prompt_fits_budget_for_fixture_questions(self):
        question = (
            "A regular hexagon is divided into six equilateral triangles. If the "
            "perimeter of one triangle is 21 inches, what is the perimeter of the hexagon?"
        )
        prompt = build_prompt(PromptTemplate(), [RETRIEVAL, CODE], question)
        assert whitespace_token_count(prompt) <= 2048

    def test_tags_appear_verbatim(self):
        prompt = build_prompt(PromptTemplate(), [RETRIEVAL, CODE], "q")
        for spec in (RETRIEVAL, CODE):
            assert spec.start_tag in prompt and spec.end_tag in prompt

    def test_global_limit_sentence_uses_max(self):
        specs = [make_spec("A", "a", 3), make_spec("B", "b", 50)]
        prompt = build_prompt(PromptTemplate(), specs, "q")
        assert "cannot invoke each interface more than 50 times" in prompt

    def test_empty_question_rejected(self):
        with pytest.raises(ValueError):
            build_prompt(PromptTemplate(), [RETRIEVAL], "   ")

    def test_no_interfaces_rejected(self):
        with pytest.raises(ValueError):
            build_prompt(PromptTemplate(), [], "q")

    def test_byte_deterministic_and_injective(self):
        a1 = build_prompt(PromptTemplate(), [RETRIEVAL], "question one")
        a2 = build_prompt(PromptTemplate(), [RETRIEVAL], "question one")
        b = build_prompt(PromptTemplate(), [RETRIEVAL], "question two")
        assert a1 == a2
        assert a1 != b

    def test_conclusion_convention_stated(self):
        prompt = build_prompt(PromptTemplate(), [RETRIEVAL], "q")
        assert "`<conclusion>` and `</conclusion>`" in prompt
        assert "\\boxed{...final answer...}" in prompt


class TestTemplateValidation:
    def test_reasoning_block_must_mention_conventions(self):
        with pytest.raises(ValueError):
            PromptTemplate(reasoning_block="just think hard")

    def test_preamble_needs_placeholder(self):
        with pytest.raises(ValueError):
            PromptTemplate(interfaces_preamble="no placeholder here")

    def test_override_file_round_trip(self, tmp_path):
        custom = PromptTemplate()
        path = tmp_path / "template.txt"
        path.write_text(
            custom.reasoning_block + "\n---\n" + custom.interfaces_preamble + "\n---\n" + custom.question_wrapper,
            encoding="utf-8",
        )
        loaded = load_template(path)
        assert loaded == custom

    def test_override_file_needs_three_sections(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("only one section", encoding="utf-8")
        with pytest.raises(ValueError):
            load_template(path)
