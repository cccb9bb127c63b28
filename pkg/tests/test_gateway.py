import json

import httpx
import pytest

from paraforge.errors import BackendTimeout, BackendUnavailable, MalformedResponse, RoundTripError
from paraforge.gateway import (
    BackendDescriptor,
    FileBackend,
    HttpBackend,
    MockBackend,
    TranslationRequest,
    fetch_batch,
    fetch_candidates,
    round_trip_batch,
    round_trip_paraphrase,
)


def req(text="hello world", n=2, rid="r1", **kw):
    return TranslationRequest(text, num_candidates=n, request_id=rid, **kw)


def test_mock_truncates_to_num_candidates():
    assert fetch_candidates(req(n=2), MockBackend(["y0", "y1", "y2"])) == ["y0", "y1"]


def test_request_validation():
    with pytest.raises(ValueError):
        TranslationRequest("x", num_candidates=0)
    with pytest.raises(ValueError):
        TranslationRequest("x", num_candidates=4, beam_size=2)
    assert TranslationRequest("x", num_candidates=3).beam_size == 3


def test_descriptor_validation():
    with pytest.raises(ValueError):
        BackendDescriptor(kind="http")
    with pytest.raises(ValueError):
        BackendDescriptor(kind="file")
    with pytest.raises(ValueError):
        BackendDescriptor(kind="carrier-pigeon")
    assert BackendDescriptor(kind="http", endpoint="http://x").in_flight == 4
    assert BackendDescriptor(kind="mock").in_flight is None


def test_file_backend_passthrough(tmp_path):
    f = tmp_path / "nbest.tsv"
    f.write_text("".join(f"r1\t{i}\thyp {i}\n" for i in range(5)) + "r2\t0\tother\n", encoding="utf-8")
    be = FileBackend(f)
    got = fetch_candidates(req(n=8, rid="r1"), be)
    assert got == [f"hyp {i}" for i in range(5)]
    with pytest.raises(BackendUnavailable):
        fetch_candidates(req(rid="missing", text="nope"), be)


def test_file_backend_via_descriptor(tmp_path):
    f = tmp_path / "nbest.jsonl"
    f.write_text(json.dumps({"id": "r1", "candidates": ["a", "b", "c"]}) + "\n", encoding="utf-8")
    assert fetch_candidates(req(n=8), BackendDescriptor(kind="file", path=str(f))) == ["a", "b", "c"]


def _transport(handler):
    return httpx.MockTransport(handler)


def test_http_success_and_wire_format():
    seen = []

    def handler(request):
        seen.append((json.loads(request.content), request.headers.get("authorization")))
        return httpx.Response(200, json={"candidates": [{"text": "b0", "score": -1.0}, {"text": "b1", "score": -2.0}, {"text": "b2", "score": -3.0}]})

    be = HttpBackend("http://mt/translate", transport=_transport(handler), token="sekrit", sleep=lambda s: None)
    assert fetch_candidates(req(n=2, source_lang="en", target_lang="de"), be) == ["b0", "b1"]
    body, auth = seen[0]
    assert body == {"text": "hello world", "source_lang": "en", "target_lang": "de", "num_candidates": 2, "beam_size": 2}
    assert auth == "Bearer sekrit"


def test_http_token_from_env(monkeypatch):
    monkeypatch.setenv("PARAFORGE_BACKEND_TOKEN", "envtok")
    seen = []

    def handler(request):
        seen.append(request.headers.get("authorization"))
        return httpx.Response(200, json={"candidates": []})

    HttpBackend("http://mt", transport=_transport(handler)).translate(req())
    assert seen == ["Bearer envtok"]


def test_http_503_thrice_is_unavailable():
    calls = []
    sleeps = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503)

    be = HttpBackend("http://mt", transport=_transport(handler), max_attempts=3, backoff_s=1.0, sleep=sleeps.append)
    with pytest.raises(BackendUnavailable) as exc:
        be.translate(req(rid="abc"))
    assert exc.value.request_id == "abc"
    assert len(calls) == 3
    assert sleeps == [1.0, 2.0]


def test_http_recovers_after_transient_failure():
    state = {"n": 0}

    def handler(request):
        state["n"] += 1
        if state["n"] == 1:
            return httpx.Response(500)
        return httpx.Response(200, json={"candidates": [{"text": "ok"}]})

    be = HttpBackend("http://mt", transport=_transport(handler), sleep=lambda s: None)
    assert be.translate(req()) == ["ok"]
    assert be.attempts == 2


def test_http_timeout():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    be = HttpBackend("http://mt", transport=_transport(handler), max_attempts=2, sleep=lambda s: None)
    with pytest.raises(BackendTimeout):
        be.translate(req(rid="t1"))


@pytest.mark.parametrize("payload", [{"nope": 1}, {"candidates": [{"score": 1}]}, {"candidates": "x"}])
def test_http_malformed(payload):
    be = HttpBackend("http://mt", transport=_transport(lambda r: httpx.Response(200, json=payload)), sleep=lambda s: None)
    with pytest.raises(MalformedResponse):
        be.translate(req())


def test_http_non_json_body():
    be = HttpBackend("http://mt", transport=_transport(lambda r: httpx.Response(200, text="<html>")), sleep=lambda s: None)
    with pytest.raises(MalformedResponse):
        be.translate(req())


def test_http_client_error_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400)

    be = HttpBackend("http://mt", transport=_transport(handler), sleep=lambda s: None)
    with pytest.raises(BackendUnavailable):
        be.translate(req())
    assert len(calls) == 1


def test_batch_call_budget_and_order():
    calls = []

    def handler(request):
        body = json.loads(request.content)
        calls.append(body["text"])
        if body["text"].startswith("bad"):
            return httpx.Response(503)
        return httpx.Response(200, json={"candidates": [{"text": body["text"].upper()}]})

    be = HttpBackend("http://mt", transport=_transport(handler), max_attempts=3, max_in_flight=4, sleep=lambda s: None)
    texts = [f"t{i}" if i % 3 else f"bad{i}" for i in range(12)]
    reqs = [req(text=t, n=1, rid=str(i)) for i, t in enumerate(texts)]
    got = fetch_batch(reqs, be, return_exceptions=True)
    assert len(calls) <= len(reqs) * 3
    for t, g in zip(texts, got):
        if t.startswith("bad"):
            assert isinstance(g, BackendUnavailable)
        else:
            assert g == [t.upper()]


def test_round_trip_identity():
    rt = round_trip_paraphrase("Some sentence here.", "de", MockBackend(mode="identity"))
    assert rt.paraphrase == "Some sentence here." and rt.pivot == "Some sentence here."


def test_round_trip_composition():
    def fn(r):
        return {"en": ["s-prime"], "de": ["p"]}[r.target_lang]

    be = MockBackend(fn=fn)
    rt = round_trip_paraphrase("s", "de", be)
    assert (rt.pivot, rt.paraphrase) == ("p", "s-prime")
    assert [(c.source_lang, c.target_lang) for c in be.calls] == [("en", "de"), ("de", "en")]


def test_round_trip_forward_failure_skips_backward():
    be = MockBackend(mode="identity", fail={"s": BackendUnavailable("down")})
    with pytest.raises(RoundTripError) as exc:
        round_trip_paraphrase("s", "de", be)
    assert exc.value.leg == "forward"
    assert len(be.calls) == 1


def test_round_trip_backward_failure_labelled():
    be = MockBackend(fn=lambda r: ["pivot"] if r.target_lang == "de" else [], mode="identity")
    with pytest.raises(RoundTripError) as exc:
        round_trip_paraphrase("s", "de", be)
    assert exc.value.leg == "backward"


def test_round_trip_identity_over_corpus():
    items = [(str(i), f"sentence number {i}!") for i in range(40)]
    out = round_trip_batch(items, "fr", MockBackend(mode="identity"))
    assert [o.paraphrase for o in out] == [t for _, t in items]
