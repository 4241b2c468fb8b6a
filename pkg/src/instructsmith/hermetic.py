"""Canned chat backends: pure-function replies for offline runs and tests.

Each reply is computed only from the request text (via a content hash), so a
pipeline wired to these backends needs no network, no credentials, and no
stored fixtures — and produces byte-identical artifacts on every run. The
generation backend answers any generation prompt with a well-formed labeled
reply derived from the raw code block; the discrimination backend echoes the
rules it finds in the prompt with deterministic verdicts.
"""

from __future__ import annotations

import hashlib
import re

from .errors import ScriptedMissError
from .llm_backend import MockChatBackend, ScriptEntry

DEFAULT_NO_INFORMATION_MODULUS = 3

_RAW_CODE_RE = re.compile(r"Raw code:\n```\n(.*?)\n```", re.DOTALL)
_RULE_LINE_RE = re.compile(r"^\s*\d+\.\s*\[([A-Za-z0-9_]+)\]\s*(.+?)\s*$",
                           re.MULTILINE)
_INSTANCE_SOLUTION_RE = re.compile(r"solution:\n(.*?)\n\n- Step ", re.DOTALL)


def code_tag(code: str) -> str:
    """Short stable fingerprint of a code snippet."""
    return hashlib.sha1(code.encode("utf-8")).hexdigest()[:10]


def _digest(text: str) -> int:
    return int(hashlib.sha1(text.encode("utf-8")).hexdigest(), 16)


def canned_generation_reply(prompt_text: str,
                            no_information_modulus: int = DEFAULT_NO_INFORMATION_MODULUS) -> str:
    """Labeled four-field reply derived from the prompt's raw code block.

    Distinct snippets get distinct instructions and solutions. When
    ``no_information_modulus`` is m > 0, roughly one in m snippets gets an
    empty information field (exercising the no-input prompt path downstream).
    """
    blocks = _RAW_CODE_RE.findall(prompt_text)
    if not blocks:
        raise ScriptedMissError("generation prompt has no raw-code block")
    tag = code_tag(blocks[-1])
    n = int(tag, 16)
    if no_information_modulus and n % no_information_modulus == 0:
        information = ""
    else:
        information = (f"The reference snippet is tagged {tag}; the function "
                       f"must return the constant derived from that tag.")
    return (
        f"task_name: Canned Task {tag}\n"
        f"instruction: Write a Python function named f_{tag} that reproduces "
        f"the behavior of the snippet tagged {tag}.\n"
        f"information: {information}\n"
        f"solution:\ndef f_{tag}():\n    return {n % 100000}"
    )


def canned_generation_backend(model_name: str = "mock-gen",
                              no_information_modulus: int = DEFAULT_NO_INFORMATION_MODULUS) -> MockChatBackend:
    """A chat backend that answers every generation prompt deterministically."""
    def reply(request) -> str:
        return canned_generation_reply(request.user_text, no_information_modulus)

    return MockChatBackend([ScriptEntry(None, reply, times=None)],
                           model_name=model_name)


def canned_discrimination_reply(prompt_text: str, bad_modulus: int = 0) -> str:
    """Echo every bracketed rule with a verdict, then an overall answer.

    With ``bad_modulus`` k > 0, roughly one in k instances (keyed on a hash
    of the judged solution) gets a single "no" verdict and an overall "no";
    everything else is all-yes. k = 0 means always Good.
    """
    rules = _RULE_LINE_RE.findall(prompt_text)
    if not rules:
        raise ScriptedMissError("discrimination prompt has no rule lines")
    sol_m = _INSTANCE_SOLUTION_RE.search(prompt_text)
    solution = sol_m.group(1) if sol_m else prompt_text
    n = _digest(solution)
    is_bad = bool(bad_modulus) and n % bad_modulus == 0
    bad_index = n % len(rules) if is_bad else -1

    lines = ["Analysis:"]
    for i, (rule_id, text) in enumerate(rules, start=1):
        if i - 1 == bad_index:
            lines.append(f"  {i}. {text} <answer: no, the instance does not "
                         f"satisfy rule {rule_id}>")
        else:
            lines.append(f"  {i}. {text} <answer: yes, the instance satisfies "
                         f"rule {rule_id}>")
    if is_bad:
        lines.append("- Overall answer: no")
        lines.append(f"- Reasons: Rule {rules[bad_index][0]} is not satisfied.")
    else:
        lines.append("- Overall answer: yes")
        lines.append("- Reasons: All the rules are satisfied.")
    return "\n".join(lines)


def canned_discrimination_backend(bad_modulus: int = 0,
                                  model_name: str = "mock-disc") -> MockChatBackend:
    """A chat backend that judges every discrimination prompt deterministically."""
    def reply(request) -> str:
        return canned_discrimination_reply(request.user_text, bad_modulus)

    return MockChatBackend([ScriptEntry(None, reply, times=None)],
                           model_name=model_name)
