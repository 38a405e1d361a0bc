import json

from conftest import run_worker


def model_lines(tiny_model, input_text, args=None):
    out, err, rc = run_worker(["--model", tiny_model, *(args or [])], input_text)
    assert rc == 0, err
    lines = out.splitlines()
    return json.loads(lines[0]), lines[1:]


class TestModelMode:
    def test_handshake_and_basic_scores(self, tiny_model):
        requests = "\n".join(
            json.dumps({"id": i, "query": q, "text": t})
            for i, (q, t) in enumerate(
                [
                    ("solar power", "deep sea mining"),
                    ("solar power", "solar power panel"),
                    ("river", ""),
                    ("", "anything"),
                ]
            )
        )
        handshake, lines = model_lines(tiny_model, requests + "\n")
        assert handshake["protocol"] == "sentence-scorer/1"
        assert handshake["name"] == "scorer-worker-model"
        assert len(lines) == 4
        for line in lines:
            obj = json.loads(line)
            assert "score" in obj, line
            assert 0.0 <= obj["score"] <= 1.0

    def test_overlength_input_truncated_not_crashed(self, tiny_model):
        huge = " ".join(["solar"] * 10_000)
        req = json.dumps({"id": 0, "query": "solar power", "text": huge})
        _, lines = model_lines(tiny_model, req + "\n")
        obj = json.loads(lines[0])
        assert "score" in obj
        assert 0.0 <= obj["score"] <= 1.0

    def test_unknown_words_map_to_unk(self, tiny_model):
        req = json.dumps({"id": 0, "query": "zzzzz qqqqq", "text": "wwwww"})
        _, lines = model_lines(tiny_model, req + "\n")
        assert 0.0 <= json.loads(lines[0])["score"] <= 1.0

    def test_deterministic_across_invocations(self, tiny_model):
        requests = "\n".join(
            json.dumps({"id": i, "query": "solar power", "text": f"deep sea {i} mining"})
            for i in range(5)
        )
        _, first = model_lines(tiny_model, requests + "\n")
        _, second = model_lines(tiny_model, requests + "\n")
        assert first == second

    def test_load_failure_exits_nonzero_before_handshake(self, tmp_path):
        out, err, rc = run_worker(["--model", str(tmp_path / "no-model-here")], "")
        assert rc != 0
        assert out == ""
        assert "cannot load model" in err


class TestScorePairApi:
    def test_bit_identical_repeat_scores(self, tiny_model):
        from scorer_worker.model import CrossEncoder

        encoder = CrossEncoder(tiny_model)
        a = encoder.score_pair("solar power", "deep sea mining")
        b = encoder.score_pair("solar power", "deep sea mining")
        assert a == b
        assert 0.0 <= a <= 1.0

    def test_truncation_limit_from_config(self, tiny_model):
        from scorer_worker.model import CrossEncoder

        encoder = CrossEncoder(tiny_model)
        assert encoder.max_length == 64
        long_text = " ".join(["solar"] * 3000)
        score = encoder.score_pair("power", long_text)
        assert 0.0 <= score <= 1.0
