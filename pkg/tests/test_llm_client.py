import datetime as dt
import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from blview.errors import CacheIntegrityError, ConfigError, SchemaViolationError, TransportError
from blview.llm_client import (
    EndpointConfig,
    LLMProvider,
    PromptBundle,
    build_prompts,
    cached_batch,
    query_forecast,
)
from blview.marketdata import AssetMeta
from blview.viewcache import append_records, read_cache

AAPL = AssetMeta(
    ticker="AAPL",
    company_name="Apple Inc.",
    gics_sector="Information Technology",
    gics_sub_industry="Technology Hardware, Storage & Peripherals",
)

AS_OF = dt.date(2024, 9, 2)


class ScriptedHandler(BaseHTTPRequestHandler):
    """Serves a scripted list of responses; records request bodies."""

    script = []
    requests = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        type(self).requests.append((self.path, body))
        if type(self).script:
            status, payload = type(self).script.pop(0)
        else:
            status, payload = 200, chat_payload('{"prediction": 0.12}')
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def chat_payload(content):
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


@pytest.fixture
def fake_server():
    handler = type("Handler", (ScriptedHandler,), {"script": [], "requests": []})
    server = HTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", handler
    server.shutdown()
    thread.join()


def endpoint(base_url, **overrides):
    defaults = dict(base_url=base_url, model_name="test-model", max_retries=2, timeout=5.0)
    defaults.update(overrides)
    return EndpointConfig(**defaults)


def sample_bundle():
    returns = [-1.17, -0.92, -2.31, -0.36, -3.02, 2.53, 0.1, -0.23, 0.45]
    return build_prompts(AS_OF, AAPL, returns, returns, returns)


class TestBuildPrompts:
    def test_two_decimal_rendering(self):
        bundle = build_prompts(AS_OF, AAPL, [100 * -0.0036], [0.0], [0.0])
        assert "[-0.36]" in bundle.user_text

    def test_company_information_block(self):
        bundle = sample_bundle()
        assert "Ticker: AAPL" in bundle.user_text
        assert (
            "GICS sub-industry: Technology Hardware, Storage & Peripherals"
            in bundle.user_text
        )
        assert "Company Sector: Information Technology" in bundle.user_text

    def test_system_prompt_carries_the_date(self):
        bundle = sample_bundle()
        assert "2024-09-02" in bundle.system_text

    def test_byte_identical_determinism(self):
        assert sample_bundle() == sample_bundle()

    def test_negative_zero_never_rendered(self):
        bundle = build_prompts(AS_OF, AAPL, [-0.001], [0.0], [0.0])
        assert "-0.00" not in bundle.user_text

    def test_all_five_blocks_present(self):
        text = sample_bundle().user_text
        for label in (
            "Daily Returns:",
            "Company Sector:",
            "Sector Returns:",
            "Market Returns:",
            "Company Information:",
        ):
            assert label in text

    def test_bundle_without_blocks_rejected(self):
        with pytest.raises(Exception):
            PromptBundle(system_text="on 2024-09-02", user_text="nothing here")


class TestQueryForecast:
    def test_parses_prediction(self, fake_server):
        url, handler = fake_server
        handler.script.append((200, chat_payload('{"prediction": 0.12}')))
        assert query_forecast(endpoint(url), sample_bundle()) == 0.12

    def test_prose_then_valid_json_consumes_one_retry(self, fake_server):
        url, handler = fake_server
        handler.script.append((200, chat_payload("certainly! here is my analysis")))
        handler.script.append((200, chat_payload('{"prediction": 0.12}')))
        assert query_forecast(endpoint(url), sample_bundle()) == 0.12
        assert len(handler.requests) == 2

    def test_persistent_prose_exhausts_retries(self, fake_server):
        url, handler = fake_server
        for _ in range(3):
            handler.script.append((200, chat_payload("prose only")))
        with pytest.raises(SchemaViolationError):
            query_forecast(endpoint(url, max_retries=2), sample_bundle())
        assert len(handler.requests) == 3

    def test_http_error_surfaces_as_transport(self, fake_server):
        url, handler = fake_server
        for _ in range(2):
            handler.script.append((500, {"error": "boom"}))
        with pytest.raises(TransportError, match="HTTP 500"):
            query_forecast(endpoint(url, max_retries=1), sample_bundle())

    def test_unreachable_endpoint_is_transport_error(self):
        config = endpoint("http://127.0.0.1:9", max_retries=0, timeout=0.2)
        with pytest.raises(TransportError):
            query_forecast(config, sample_bundle())

    def test_non_numeric_prediction_rejected(self, fake_server):
        url, handler = fake_server
        handler.script.append((200, chat_payload('{"prediction": "high"}')))
        with pytest.raises(SchemaViolationError):
            query_forecast(endpoint(url, max_retries=0), sample_bundle())

    def test_request_carries_schema_and_messages(self, fake_server):
        url, handler = fake_server
        query_forecast(endpoint(url), sample_bundle())
        _, body = handler.requests[0]
        assert body["model"] == "test-model"
        assert [m["role"] for m in body["messages"]] == ["system", "user"]
        schema = body["response_format"]["json_schema"]["schema"]
        assert schema["required"] == ["prediction"]

    def test_missing_api_key_env_is_config_error(self, fake_server):
        url, _ = fake_server
        config = endpoint(url, api_key_env_var_name="BLVIEW_NO_SUCH_KEY")
        with pytest.raises(ConfigError, match="BLVIEW_NO_SUCH_KEY"):
            query_forecast(config, sample_bundle())


class TestCachedBatch:
    def bundles(self, tickers=("AAA", "BBB")):
        out = []
        for t in tickers:
            meta = AssetMeta(t, f"{t} Corp", "Information Technology", "Tech")
            out.append((t, build_prompts(AS_OF, meta, [0.1] * 5, [0.2] * 5, [0.3] * 5)))
        return out

    def test_cold_cache_queries_once_per_sample(self, fake_server, tmp_path):
        url, handler = fake_server
        cache = tmp_path / "views.jsonl"
        samples = cached_batch(endpoint(url), AS_OF, self.bundles(), 2, cache)
        assert samples.samples.shape == (2, 2)
        assert len(handler.requests) == 4
        assert len(cache.read_text().strip().splitlines()) == 2

    def test_warm_cache_makes_no_network_calls(self, fake_server, tmp_path):
        url, handler = fake_server
        cache = tmp_path / "views.jsonl"
        append_records(cache, AS_OF, [("AAA", [0.5, 0.6]), ("BBB", [0.7, 0.8])])
        samples = cached_batch(endpoint(url), AS_OF, self.bundles(), 2, cache)
        assert len(handler.requests) == 0
        assert samples.for_ticker("AAA") == pytest.approx([0.5, 0.6])

    def test_partial_cache_tops_up(self, fake_server, tmp_path):
        url, handler = fake_server
        cache = tmp_path / "views.jsonl"
        append_records(cache, AS_OF, [("AAA", [0.5, 0.6])])
        samples = cached_batch(endpoint(url), AS_OF, self.bundles(), 2, cache)
        assert len(handler.requests) == 2  # only BBB was missing
        assert samples.for_ticker("AAA") == pytest.approx([0.5, 0.6])
        records = read_cache(cache)
        assert len(records[(AS_OF.isoformat(), "BBB")]) == 2

    def test_truncated_cache_line_is_integrity_error(self, fake_server, tmp_path):
        url, _ = fake_server
        cache = tmp_path / "views.jsonl"
        append_records(cache, AS_OF, [("AAA", [0.5, 0.6])])
        with open(cache, "a", encoding="utf-8") as fh:
            fh.write('{"date": "2024-09-02", "ticker": "BBB", "samples": [0.1')
        with pytest.raises(CacheIntegrityError):
            cached_batch(endpoint(url), AS_OF, self.bundles(), 2, cache)

    def test_cache_round_trips_floats_exactly(self, tmp_path):
        cache = tmp_path / "views.jsonl"
        values = list(np.random.default_rng(1).normal(0, 1, 20))
        append_records(cache, AS_OF, [("AAA", values)])
        back = read_cache(cache)[(AS_OF.isoformat(), "AAA")]
        assert back == values

    def test_rerun_with_complete_cache_is_identical(self, fake_server, tmp_path):
        url, handler = fake_server
        cache = tmp_path / "views.jsonl"
        first = cached_batch(endpoint(url), AS_OF, self.bundles(), 2, cache)
        before = cache.read_bytes()
        second = cached_batch(endpoint(url), AS_OF, self.bundles(), 2, cache)
        assert np.array_equal(first.samples, second.samples)
        assert cache.read_bytes() == before


class TestLLMProvider:
    def test_provider_builds_prompts_from_context(self, fake_server):
        url, handler = fake_server
        from blview.views import AssetContext, ForecastRequest

        context = AssetContext(
            meta=AAPL,
            asset_returns_pct=(0.1,) * 10,
            sector_returns_pct=(0.2,) * 10,
            market_returns_pct=(0.3,) * 10,
        )
        provider = LLMProvider(endpoint(url))
        value = provider.forecast(ForecastRequest(AS_OF, context, 0))
        assert value == 0.12
        _, body = handler.requests[0]
        assert "Ticker: AAPL" in body["messages"][1]["content"]
