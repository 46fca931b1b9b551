# tests/test_loader.py
import json

import pytest

from loader import (
    TEMPLATE_FIELDS,
    PromptAssetError,
    PromptTemplate,
    _validate_template,
    load_prompt_templates,
)


def test_bundled_templates_cover_every_use():
    templates = load_prompt_templates()
    assert set(TEMPLATE_FIELDS) <= set(templates)
    for name, (required, _) in TEMPLATE_FIELDS.items():
        assert required <= templates[name].fields


def test_render_puts_system_first():
    t = PromptTemplate(name="x", user="Q: {question}", system="Be brief.")
    assert t.render(question="why?") == [("system", "Be brief."), ("user", "Q: why?")]


def test_validate_appends_required_and_drops_unknown():
    fixed = _validate_template("claim_answer", "Q: {foo}")
    assert "{question}" in fixed
    assert "{foo}" not in fixed


def test_env_override_replaces_user_text(monkeypatch):
    monkeypatch.setenv("PROMPT_CLAIM_ANSWER", "Answer briefly: {question}")
    templates = load_prompt_templates()
    assert templates["claim_answer"].user == "Answer briefly: {question}"


def test_missing_templates_raise(tmp_path):
    path = tmp_path / "prompts.json"
    path.write_text(json.dumps({"judge": "Q {question} A {answer}"}), encoding="utf-8")
    with pytest.raises(PromptAssetError, match="missing prompt templates"):
        load_prompt_templates(path)


def test_missing_file_raises(tmp_path):
    with pytest.raises(PromptAssetError, match="not found"):
        load_prompt_templates(tmp_path / "nope.json")


def test_empty_user_text_rejected():
    with pytest.raises(ValueError, match="user text cannot be empty"):
        PromptTemplate(name="x", user="  ")
