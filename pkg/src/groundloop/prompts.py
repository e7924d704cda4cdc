"""Assembly of the exact prompt the policy sees."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .interfaces import InterfaceSpec, render_prompt_block

DEFAULT_REASONING_BLOCK = """\
A conversation between a User and an Assistant. The User poses a question, and the Assistant provides a solution. The Assistant's response follows these structured steps:

1. **Reasoning Process**: The Assistant comprehensively thinks about the problem through a reasoning process.

2. **Conclusion**: The Assistant reaches a conclusion, which is enclosed within `<conclusion>` and `</conclusion>` tags. The final answer is highlighted within `\\boxed{...final answer...}`.

3. **Response Format**: The complete response should be formatted as:

...reasoning process...

<conclusion>

...conclusion...

The answer is \\boxed{...final answer...}

</conclusion>"""

DEFAULT_INTERFACES_PREAMBLE = """\
During the reasoning process, the Assistant can interact with the system by invoking given interfaces and placing queries within `<interface_start_tag> ...query here... </interface_end_tag>` tags. The system processes these queries and returns results in the format `<result> ...results... </result>`. After gathering all necessary information, the Assistant continues with the reasoning process to finalize the answer. The assistant cannot invoke each interface more than {invoke_limit} times.

The following are the interfaces provided for the Assistant:"""

DEFAULT_QUESTION_WRAPPER = "Question: {question}"


@dataclass(frozen=True)
class PromptTemplate:
    reasoning_block: str = DEFAULT_REASONING_BLOCK
    interfaces_preamble: str = DEFAULT_INTERFACES_PREAMBLE
    question_wrapper: str = DEFAULT_QUESTION_WRAPPER

    def __post_init__(self) -> None:
        if "<conclusion>" not in self.reasoning_block or "\\boxed{" not in self.reasoning_block:
            raise ValueError("reasoning block must describe the conclusion tags and \\boxed convention")
        if "{invoke_limit}" not in self.interfaces_preamble:
            raise ValueError("interfaces preamble must carry the {invoke_limit} placeholder")
        if "{question}" not in self.question_wrapper:
            raise ValueError("question wrapper must carry the {question} placeholder")


def load_template(path: str | Path) -> PromptTemplate:
    """Read a template override file: three sections split on '---' lines."""
    text = Path(path).read_text(encoding="utf-8")
    sections = [s.strip("\n") for s in text.split("\n---\n")]
    if len(sections) != 3:
        raise ValueError(f"{path}: expected 3 sections separated by '---' lines, got {len(sections)}")
    return PromptTemplate(*sections)


def build_prompt(template: PromptTemplate, specs: Sequence[InterfaceSpec], question: str) -> str:
    """Reasoning block, interfaces preamble, interface blocks, then the question.

    Byte-deterministic in its inputs. The global invoke-limit sentence is
    filled with the maximum limit across the provided interfaces; each block
    carries its own exact limit.
    """
    if not specs:
        raise ValueError("at least one interface is required")
    if not question.strip():
        raise ValueError("question must be non-empty")
    preamble = template.interfaces_preamble.format(invoke_limit=max(s.invoke_limit for s in specs))
    return "\n\n".join(
        [
            template.reasoning_block,
            preamble,
            render_prompt_block(specs),
            template.question_wrapper.format(question=question),
        ]
    )
