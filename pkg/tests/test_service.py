from __future__ import annotations

import json
import math
import threading
import time

import numpy as np
import pytest
import requests

from groundloop.config import fixture_path, load_runtime
from groundloop.rewards import GrpoConfig, LogProbBatch, grpo_loss
from groundloop.rollout import attach_rewards, rollout_group
from groundloop.server import make_server
from groundloop.wire import group_from_wire, group_to_wire

MUSIQUE_STYLE_RESPONSE = (
    "Alright, I need to find out who is the president. Let me check.\n"
    "<retrieval>Who is the current president of East Timor?</retrieval>"
    "<result> Francisco Guterres is the current president. </result>\n"
    "<conclusion>\nThe answer is \\boxed{Francisco Guterres}\n</conclusion>"
)


@pytest.fixture(scope="module")
def server_url():
    runtime = load_runtime(fixture_path("configs", "qa.json"))
    httpd = make_server(runtime, host="127.0.0.1", port=0)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_address[1]}"
    httpd.shutdown()
    httpd.server_close()


class TestEndpoints:
    def test_health(self, server_url):
        body = requests.get(f"{server_url}/v1/health").json()
        assert body["status"] == "ok"

    def test_interfaces_lists_registered(self, server_url):
        body = requests.get(f"{server_url}/v1/interfaces").json()
        assert len(body["interfaces"]) == 2
        names = {i["name"] for i in body["interfaces"]}
        assert names == {"Retrieval Information", "Code Execution"}

    def test_score_musique_case(self, server_url):
        body = requests.post(
            f"{server_url}/v1/score",
            json={"response": MUSIQUE_STYLE_RESPONSE, "gold": "francisco guterres"},
        ).json()
        assert body["reward"] == 1.0
        assert body["c_format"] and body["c_answer"]

    def test_score_missing_field_is_400(self, server_url):
        resp = requests.post(f"{server_url}/v1/score", json={"gold": "x"})
        assert resp.status_code == 400
        assert "response" in resp.json()["error"]

    def test_rollout_group_zero_sum_advantages(self, server_url):
        resp = requests.post(
            f"{server_url}/v1/rollout",
            json={
                "question": "In what year did East Timor declare independence?",
                "g": 8,
                "gold": ["2002"],
                "seed": 0,
            },
        )
        assert resp.status_code == 200
        group = resp.json()["groups"][0]
        assert group["g"] == 8
        assert len(group["trajectories"]) == 8
        assert abs(math.fsum(group["advantages"])) <= 1e-12
        assert group["token_offsets"][-1] == len(group["mask_flat"])

    def test_rollout_bad_g_is_400(self, server_url):
        resp = requests.post(f"{server_url}/v1/rollout", json={"question": "q", "g": 0})
        assert resp.status_code == 400

    def test_rollout_multiple_questions(self, server_url):
        resp = requests.post(
            f"{server_url}/v1/rollout",
            json={"questions": ["What is 2 + 2?", "What is 128 + 56?"], "g": 1},
        )
        groups = resp.json()["groups"]
        assert len(groups) == 2
        assert groups[0]["question"] == "What is 2 + 2?"

    def test_score_flags_trailing_text(self, server_url):
        body = requests.post(
            f"{server_url}/v1/score",
            json={"response": "<conclusion>\\boxed{4}</conclusion> post-script", "gold": "4"},
        ).json()
        assert body["trailing_text"] is True
        assert body["reward"] == 1.0

    def test_unknown_endpoint_404(self, server_url):
        assert requests.get(f"{server_url}/v1/nope").status_code == 404

    def test_async_job_lifecycle(self, server_url):
        resp = requests.post(
            f"{server_url}/v1/rollout",
            json={"question": "What is 2 + 2?", "g": 2, "gold": ["4"], "async": True},
        )
        assert resp.status_code == 202
        job_id = resp.json()["job_id"]
        deadline = time.time() + 10
        while time.time() < deadline:
            body = requests.get(f"{server_url}/v1/jobs/{job_id}").json()
            if body["status"] == "done":
                break
            time.sleep(0.05)
        assert body["status"] == "done"
        assert body["result"]["groups"][0]["g"] == 2

    def test_unknown_job_404(self, server_url):
        assert requests.get(f"{server_url}/v1/jobs/job-999999").status_code == 404

    def test_terminal_job_states_immutable(self):
        from groundloop.server import JobTable

        table = JobTable()
        job = table.create()
        table.update(job.job_id, status="done", result={"x": 1})
        table.update(job.job_id, status="failed", error="late")
        final = table.get(job.job_id)
        assert final.status == "done" and final.error is None

    def test_grpo_endpoint_matches_local(self, server_url):
        rng = np.random.default_rng(5)
        offsets = [0, 3, 7]
        old = rng.uniform(-1, 0, size=7)
        new = old + rng.uniform(-0.3, 0.3, size=7)
        mask = [1, 1, 0, 1, 1, 1, 0]
        adv = [0.5, -0.5]
        body = requests.post(
            f"{server_url}/v1/grpo",
            json={
                "offsets": offsets,
                "old_flat": old.tolist(),
                "new_flat": new.tolist(),
                "mask_flat": mask,
                "advantages": adv,
            },
        ).json()
        batch = LogProbBatch(
            [old[0:3], old[3:7]], [new[0:3], new[3:7]],
            [np.array(mask[0:3], bool), np.array(mask[3:7], bool)],
        )
        objective, grads = grpo_loss(batch, adv, GrpoConfig())
        assert body["objective"] == pytest.approx(objective, rel=1e-12)
        flat_grads = [g for row in grads for g in row]
        assert body["gradient_flat"] == pytest.approx(flat_grads, rel=1e-12)

    def test_grpo_shape_mismatch_400(self, server_url):
        resp = requests.post(
            f"{server_url}/v1/grpo",
            json={"offsets": [0, 2], "old_flat": [0.0], "new_flat": [0.0], "mask_flat": [1], "advantages": [1.0]},
        )
        assert resp.status_code == 400


class TestWireRoundTrip:
    def test_bit_exact_round_trip(self, qa_runtime):
        batch = rollout_group(
            "In what year did East Timor declare independence?",
            qa_runtime.policy,
            qa_runtime.registry,
            qa_runtime.rollout,
            group_size=4,
        )
        attach_rewards(batch, ["2002"])
        wire = group_to_wire(batch)
        json_text = json.dumps(wire)
        reparsed = json.loads(json_text)
        assert reparsed == wire  # bit-exact numbers through JSON
        restored = group_from_wire(reparsed)
        assert restored.question == batch.question
        assert [t.response_text() for t in restored.trajectories] == [
            t.response_text() for t in batch.trajectories
        ]
        assert [r.reward for r in restored.rewards] == [r.reward for r in batch.rewards]
        assert restored.advantages == batch.advantages

    def test_mask_flat_respects_provenance(self, qa_runtime):
        batch = rollout_group(
            "What is the capital of Texas?",
            qa_runtime.policy, qa_runtime.registry, qa_runtime.rollout, group_size=1,
        )
        wire = group_to_wire(batch, mask_injected=True)
        traj = batch.trajectories[0]
        expected = [
            int(seg.provenance == "policy")
            for seg in traj.segments
            for _ in range(seg.token_length)
        ]
        assert wire["mask_flat"] == expected


class TestRestartReproducibility:
    def test_same_fixture_same_response(self):
        payload = {
            "question": "What is the capital of Texas?",
            "g": 2,
            "gold": ["Austin"],
            "seed": 3,
        }
        bodies = []
        for _ in range(2):
            runtime = load_runtime(fixture_path("configs", "qa.json"))
            httpd = make_server(runtime, host="127.0.0.1", port=0)
            thread = threading.Thread(target=httpd.serve_forever, daemon=True)
            thread.start()
            url = f"http://127.0.0.1:{httpd.server_address[1]}"
            bodies.append(requests.post(f"{url}/v1/rollout", json=payload).text)
            httpd.shutdown()
            httpd.server_close()
        assert bodies[0] == bodies[1]
