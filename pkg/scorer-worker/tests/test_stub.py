import json

from conftest import run_worker


def stub_lines(input_text: str, args=None):
    out, err, rc = run_worker(["--stub", *(args or [])], input_text)
    assert rc == 0, err
    lines = out.splitlines()
    handshake = json.loads(lines[0])
    return handshake, lines[1:]


class TestHandshake:
    def test_fields(self):
        handshake, rest = stub_lines("")
        assert handshake == {
            "protocol": "sentence-scorer/1",
            "name": "scorer-worker-stub",
            "max_tokens": 256,
        }
        assert rest == []

    def test_max_tokens_flag(self):
        handshake, _ = stub_lines("", args=["--max-tokens", "32"])
        assert handshake["max_tokens"] == 32

    def test_max_tokens_floor(self):
        out, err, rc = run_worker(["--stub", "--max-tokens", "4"], "")
        assert rc != 0
        assert out == ""

    def test_mode_is_required(self):
        out, _, rc = run_worker([], "")
        assert rc != 0
        assert out == ""


class TestScoring:
    def test_exact_overlap(self):
        _, lines = stub_lines('{"id":0,"query":"a","text":"a"}\n')
        assert lines == ['{"id":0,"score":1.0}']

    def test_partial_overlap_rounding(self):
        _, lines = stub_lines('{"id":3,"query":"x y z","text":"z and x and q"}\n')
        assert lines == ['{"id":3,"score":0.666667}']

    def test_empty_query_tokens(self):
        _, lines = stub_lines('{"id":4,"query":"!!!","text":"whatever"}\n')
        assert lines == ['{"id":4,"score":0.0}']

    def test_case_and_punctuation_insensitive(self):
        _, lines = stub_lines('{"id":5,"query":"Solar-Power","text":"power... SOLAR!"}\n')
        assert lines == ['{"id":5,"score":1.0}']

    def test_scores_in_range_fuzz(self):
        import random

        rng = random.Random(5)
        words = ["alpha", "beta", "42", "Ångstrom", "x!", "...", "same"]
        requests = []
        for i in range(200):
            q = " ".join(rng.choice(words) for _ in range(rng.randint(1, 5)))
            t = " ".join(rng.choice(words) for _ in range(rng.randint(0, 9)))
            requests.append(json.dumps({"id": i, "query": q, "text": t}))
        _, lines = stub_lines("\n".join(requests) + "\n")
        assert len(lines) == 200
        for line in lines:
            obj = json.loads(line)
            assert 0.0 <= obj["score"] <= 1.0


class TestErrorHandling:
    def test_malformed_line_then_recovery(self):
        text = 'not json\n{"id":7,"query":"a","text":"a"}\n'
        _, lines = stub_lines(text)
        first = json.loads(lines[0])
        assert first["id"] == -1 and "error" in first
        assert lines[1] == '{"id":7,"score":1.0}'

    def test_missing_fields_error_carries_id(self):
        _, lines = stub_lines('{"id":9,"query":"a"}\n')
        obj = json.loads(lines[0])
        assert obj["id"] == 9 and "error" in obj

    def test_non_integer_id(self):
        _, lines = stub_lines('{"id":"x","query":"a","text":"a"}\n')
        obj = json.loads(lines[0])
        assert obj["id"] == -1 and "error" in obj

    def test_blank_lines_ignored(self):
        _, lines = stub_lines('\n\n{"id":1,"query":"a","text":"a"}\n\n')
        assert lines == ['{"id":1,"score":1.0}']


class TestStreamDiscipline:
    def test_only_protocol_lines_on_stdout(self):
        text = 'garbage\n{"id":0,"query":"q","text":"q"}\n'
        out, _, rc = run_worker(["--stub"], text)
        assert rc == 0
        for line in out.splitlines():
            json.loads(line)

    def test_exit_zero_on_input_close(self):
        _, _, rc = run_worker(["--stub"], "")
        assert rc == 0

    def test_unicode_round_trip(self):
        _, lines = stub_lines('{"id":2,"query":"café","text":"CAFÉ"}\n')
        assert lines == ['{"id":2,"score":1.0}']
