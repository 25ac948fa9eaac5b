import json
import math
import os

import pytest

import grpokit

FIXTURES = os.environ.get("GRPOKIT_FIXTURES", os.path.join(os.path.dirname(__file__), "..", "fixtures"))


def test_extraction():
    assert grpokit.extract_boxed(r"x \boxed{\frac{1}{2}} y \boxed{7}") == "7"
    assert grpokit.extract_boxed(r"\boxed{open") is None
    choice = grpokit.extract_choice("I think the answer is (C).")
    assert (choice.kind, choice.value) == ("choice", "C")
    assert grpokit.parse_tags("<think>a</think><answer>b</answer>") == ("a", "b")


def test_answers_match_with_tolerance():
    got = grpokit.extract_free_form(r"so \boxed{0.333}")
    assert grpokit.answers_match(got, "numeric", "1/3", tolerance=0.01)
    assert not grpokit.answers_match(got, "numeric", "1/3")
    with pytest.raises(ValueError):
        grpokit.answers_match(got, "numeric", "1/3", tolerance=-1.0)


def test_rewards():
    assert grpokit.format_reward("<think>x</think><answer>y</answer>") == 1.0
    assert grpokit.iou((0, 0, 2, 2), (1, 1, 3, 3)) == 1 / 7
    boxes = [(0, 0, 1, 1), (2, 2, 4, 4)]
    assert grpokit.detection_reward(boxes, list(reversed(boxes))) == 1.0


def test_advantages_and_loss():
    adv = grpokit.normalize_rewards([1.0, 0.0, 0.0, 1.0])
    assert abs(sum(adv)) < 1e-12
    assert grpokit.normalize_rewards([2.0, 2.0]) == [0.0, 0.0]
    logp = [[-0.5, -1.0], [-0.7, -0.2]]
    same = grpokit.grpo_loss(logp, logp, [1.0, 0.0])
    assert abs(same["loss"]) < 1e-12 and same["kl"] == 0.0
    moved = grpokit.grpo_loss([[-0.4, -1.0], [-0.7, -0.3]], logp, [1.0, 0.0], {"beta": 0.0})
    assert moved["loss"] == pytest.approx(moved["surrogate"])
    with pytest.raises(ValueError):
        grpokit.grpo_loss(logp, logp, [1.0, 0.0], {"epsilom": 0.1})


def test_train_toy_is_reproducible():
    a = grpokit.train_toy("format", 40, seed=3)
    b = grpokit.train_toy("format", 40, seed=3)
    assert len(a) == 40 and a == b
    assert all(math.isfinite(m["loss"]) for m in a)


def test_prompts_match_fixture():
    with open(os.path.join(FIXTURES, "prompts", "roleplay.txt"), encoding="utf-8") as f:
        expected = f.read().replace("{cot}", "step one")
    assert grpokit.render_prompt("roleplay", {"cot": "step one"}) == expected
    with pytest.raises(KeyError):
        grpokit.render_prompt("filter", {"gt": "3"})
    assert grpokit.parse_verdict("Looks right.\nValid") == "valid"


def test_pipeline_and_resume(tmp_path):
    src = tmp_path / "in.jsonl"
    with open(src, "w") as f:
        for i in range(12):
            f.write(json.dumps({"id": f"r{i}", "caption": "c", "question": f"q{i}", "ground_truth": "1"}) + "\n")
        f.write("{broken\n")
    out = tmp_path / "out.jsonl"
    summary = grpokit.run_pipeline(src, out, max_in_flight=3, accept_rate=0.5)
    assert summary["processed"] == 12 and summary["quarantined"] == 1
    again = grpokit.run_pipeline(src, out, max_in_flight=3, accept_rate=0.5)
    assert again["backend_calls"] == 0


def test_eval_score(tmp_path):
    manifest = tmp_path / "m.jsonl"
    responses = tmp_path / "r.jsonl"
    items = [("a", "math", "A", "(A)"), ("b", "math", "B", "(C)"), ("c", "physics", "D", "(B)")]
    with open(manifest, "w") as m, open(responses, "w") as r:
        for item_id, cat, answer, response in items:
            m.write(json.dumps({"id": item_id, "grade": "college", "category": cat, "subcategory": "s",
                                "question": "q", "question_type": "multiple_choice", "answer": answer}) + "\n")
            r.write(json.dumps({"id": item_id, "response": response}) + "\n")
    report = grpokit.score(manifest, responses)
    assert report["overall"]["accuracy"] == pytest.approx(1 / 3)
    assert grpokit.validate_manifest(manifest, published=True)["warnings"]
