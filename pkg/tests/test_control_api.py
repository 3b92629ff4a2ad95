"""Live-socket tests of the HTTP control API against an interactive run."""

import threading
import time
from pathlib import Path

import pytest
import requests

from queryevolve.control_api import ControlApiServer
from queryevolve.orchestrator import Runner, load_config

from .test_orchestrator import write_config, write_corpus

POLL_TIMEOUT = 15.0


class LiveRun:
    def __init__(self, tmp_path: Path, **config_extra):
        hidden = tmp_path / "hidden.jsonl"
        write_corpus(hidden, n_docs=250, seed=55, prefix="h")
        path = write_config(
            tmp_path,
            mode="interactive",
            generations=0,
            hidden_corpus=str(hidden),
            budget={"total": 3},
            ga={"population_size": 16, "fetch_every": 6, "rng_seed": 9},
            **config_extra,
        )
        self.runner = Runner(load_config(path))
        self.server = ControlApiServer(self.runner, "127.0.0.1", 0)
        self.server.start()
        host, port = self.server.address
        self.base = f"http://{host}:{port}"
        self.thread = threading.Thread(target=self.runner.run, daemon=True)
        self.thread.start()

    def get(self, path, **kw):
        return requests.get(self.base + path, timeout=5, **kw)

    def post(self, path, payload=None):
        return requests.post(self.base + path, json=payload, timeout=5)

    def wait_for(self, predicate, message="condition"):
        deadline = time.monotonic() + POLL_TIMEOUT
        while time.monotonic() < deadline:
            status = self.get("/status").json()
            if predicate(status):
                return status
            time.sleep(0.02)
        raise AssertionError(f"timed out waiting for {message}")

    def shutdown(self):
        try:
            self.post("/stop")
        finally:
            self.thread.join(timeout=10)
            self.server.stop()
        assert not self.thread.is_alive()


@pytest.fixture
def live(tmp_path):
    run = LiveRun(tmp_path)
    try:
        yield run
    finally:
        run.shutdown()


class TestStatusAndHistory:
    def test_status_progresses(self, live):
        status = live.wait_for(lambda s: s["generation"] >= 3, "three generations")
        assert status["status"] == "running"
        assert status["metrics"]["generation"] <= status["generation"]
        assert status["budget"]["total"] == 3

    def test_history_matches_generations(self, live):
        live.wait_for(lambda s: s["generation"] >= 5, "five generations")
        live.post("/pause")
        status = live.wait_for(lambda s: s["status"] == "paused", "pause ack")
        history = live.get("/history").json()["generations"]
        assert len(history) == status["generation"]
        assert [row["generation"] for row in history] == list(range(1, status["generation"] + 1))

    def test_population_endpoint(self, live):
        live.wait_for(lambda s: s["generation"] >= 2, "two generations")
        population = live.get("/population", params={"top": 5}).json()["population"]
        assert 0 < len(population) <= 5
        best = population[0]
        assert set(best) == {"loss", "length", "genome", "query", "f_p", "f_n"}
        assert 0.0 <= best["f_p"] <= 1.0 and 0.0 <= best["f_n"] <= 1.0
        losses = [p["loss"] for p in population if p["loss"] is not None]
        assert losses == sorted(losses)

    def test_unknown_route_404(self, live):
        assert live.get("/nope").status_code == 404


class TestLifecycle:
    def test_pause_resume_round_trip(self, live):
        live.wait_for(lambda s: s["generation"] >= 1, "first generation")
        assert live.post("/pause").status_code == 202
        paused = live.wait_for(lambda s: s["status"] == "paused", "pause ack")
        frozen = paused["generation"]
        time.sleep(0.2)
        assert live.get("/status").json()["generation"] == frozen
        # checkpoint written on pause
        checkpoint = Path(live.runner.config.checkpoint_dir) / "checkpoint.json"
        assert checkpoint.exists()
        assert live.post("/resume").status_code == 202
        live.wait_for(
            lambda s: s["status"] == "running" and s["generation"] > frozen,
            "resume and progress",
        )

    def test_stop_is_terminal(self, tmp_path):
        run = LiveRun(tmp_path)
        run.wait_for(lambda s: s["generation"] >= 1, "first generation")
        run.shutdown()
        assert run.runner.state.status.value == "stopped"


class TestInject:
    def test_inject_appears_within_one_generation_of_resume(self, tmp_path):
        # pause_every=1 freezes the run right after each generation, so the
        # population can be inspected exactly one generation after resume
        run = LiveRun(tmp_path, pause_every=1)
        try:
            run.wait_for(lambda s: s["status"] == "paused", "scheduled pause")

            reply = run.post("/inject", {"queries": ["(t000 OR t001) AND (NOT t002)"]})
            assert reply.status_code == 202
            queued = reply.json()["queued"]
            assert len(queued) == 1
            injected = tuple(queued[0])

            gen_before = run.get("/status").json()["generation"]
            run.post("/resume")
            status = run.wait_for(
                lambda s: s["status"] == "paused" and s["generation"] > gen_before,
                "one more generation",
            )
            assert status["generation"] == gen_before + 1
            genomes = {
                tuple(p["genome"])
                for p in run.get("/population", params={"top": 100}).json()["population"]
            }
            assert injected in genomes
        finally:
            run.shutdown()

    def test_inject_parse_error_400_with_offset(self, live):
        reply = live.post("/inject", {"queries": ["(t000 AND"]})
        assert reply.status_code == 400
        body = reply.json()
        assert body["offset"] == 9
        assert "dangling" in body["error"] or "parenthesis" in body["error"]

    def test_inject_unknown_phrase_400(self, live):
        reply = live.post("/inject", {"queries": ["neverseenphrase12345"]})
        assert reply.status_code == 400
        assert "vocabulary" in reply.json()["error"]

    def test_inject_bad_body_400(self, live):
        assert live.post("/inject", {"queries": "not-a-list"}).status_code == 400
        assert live.post("/inject", {}).status_code == 400

    def test_inject_after_stop_409(self, tmp_path):
        run = LiveRun(tmp_path)
        run.wait_for(lambda s: s["generation"] >= 1, "first generation")
        run.post("/stop")
        run.thread.join(timeout=10)
        reply = run.post("/inject", {"queries": ["t000"]})
        run.server.stop()
        assert reply.status_code == 409


class TestLabels:
    def test_pending_queue_drains(self, live):
        # wait until a fetch happened and queued pending docs
        status = live.wait_for(lambda s: s["pending_labels"] > 0, "pending labels")
        pending = live.get("/labels/pending").json()["pending"]
        assert pending and {"id", "text"} <= set(pending[0])
        before_rel = status["labeled_relevant"]

        first = pending[0]["id"]
        reply = live.post("/labels", {"id": first, "label": "relevant"})
        assert reply.status_code == 200
        after = live.get("/labels/pending").json()["pending"]
        assert first not in {row["id"] for row in after}
        live.wait_for(
            lambda s: s["labeled_relevant"] == before_rel + 1,
            "relevant count increments",
        )

    def test_unknown_doc_404(self, live):
        reply = live.post("/labels", {"id": "nope-nope", "label": "relevant"})
        assert reply.status_code == 404

    def test_bad_label_400(self, live):
        reply = live.post("/labels", {"id": "x", "label": "meh"})
        assert reply.status_code == 400
