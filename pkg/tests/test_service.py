import json
import random
import urllib.error
import urllib.request

import pytest

from tkey.chain import Params
from tkey.encoding import enrollment_to_uri, password_to_base32
from tkey.prover import PlanConfig, gen_password, init
from tkey.service import make_server, serve_in_thread

I = 30


class Clock:
    def __init__(self, slot):
        self.now = slot * I + 1.0

    def set_slot(self, slot):
        self.now = slot * I + 7.5

    def __call__(self):
        return self.now


@pytest.fixture
def server(tmp_path):
    clock = Clock(1000)
    srv = make_server(("127.0.0.1", 0), tmp_path / "creds.log", clock=clock)
    serve_in_thread(srv)
    yield srv, clock
    srv.shutdown()
    srv.server_close()


def post(srv, path, body):
    host, port = srv.server_address[:2]
    data = body if isinstance(body, bytes) else json.dumps(body).encode()
    req = urllib.request.Request(f"http://{host}:{port}{path}", data=data,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def enrolled(srv, cred_id="alice", k=400, now=1000):
    state, enr = init(Params(k=k, I=I), random.Random(8), now, PlanConfig(q_total=4, q_worst=1, mean_gap=30.0))
    status, body = post(srv, "/enroll", {"v": 1, "cred_id": cred_id, "uri": enrollment_to_uri(enr)})
    assert status == 200 and body["status"] == "enrolled"
    return state


def test_round_trip_replay_and_expiry(server):
    srv, clock = server
    state = enrolled(srv)
    clock.set_slot(1010)
    otp = password_to_base32(gen_password(state, 1010).value)
    assert post(srv, "/verify", {"v": 1, "cred_id": "alice", "otp": otp}) == (200, {"v": 1, "status": "accepted", "t_accepted": 1010})
    status, body = post(srv, "/verify", {"v": 1, "cred_id": "alice", "otp": otp})
    assert status == 409 and body["reason"] == "replay_or_stale"
    clock.set_slot(state.t_max + 3)
    status, body = post(srv, "/verify", {"v": 1, "cred_id": "alice", "otp": password_to_base32(state.sk)})
    assert status == 410 and body["reason"] == "expired"


def test_skewed_client_accepted(server):
    srv, clock = server
    state = enrolled(srv)
    otp = password_to_base32(gen_password(state, 1050).value)
    clock.set_slot(1052)
    status, body = post(srv, "/verify", {"v": 1, "cred_id": "alice", "otp": otp, "client_time": 12345})
    assert status == 200 and body["t_accepted"] == 1050


def test_bad_password_and_malformed(server):
    srv, clock = server
    enrolled(srv)
    clock.set_slot(1005)
    assert post(srv, "/verify", {"v": 1, "cred_id": "alice", "otp": "b" * 26})[0] == 401
    assert post(srv, "/verify", {"v": 1, "cred_id": "nobody", "otp": "b" * 26})[0] == 401
    for bad in ({"v": 1, "cred_id": "alice", "otp": "b" * 25}, {"v": 1, "cred_id": "alice", "otp": "1" * 26},
                {"v": 1, "cred_id": "alice"}, {"v": 1, "otp": "b" * 26}, {"cred_id": "alice", "otp": "b" * 26}):
        status, body = post(srv, "/verify", bad)
        assert status == 400, bad
    assert post(srv, "/verify", b"{not json")[0] == 400
    assert post(srv, "/verify", {"v": 2, "cred_id": "alice", "otp": "b" * 26}) == (
        400, {"v": 1, "status": "rejected", "reason": "unsupported_version"})


def test_enroll_errors(server):
    srv, _ = server
    enrolled(srv, "bob")
    _, enr = init(Params(k=10, I=I), random.Random(1), 1000)
    uri = enrollment_to_uri(enr)
    assert post(srv, "/enroll", {"v": 1, "cred_id": "bob", "uri": uri})[0] == 409
    assert post(srv, "/enroll", {"v": 1, "cred_id": "bob", "uri": uri, "replace": True})[0] == 200
    assert post(srv, "/enroll", {"v": 1, "cred_id": "c", "uri": uri.replace("v=1", "v=2")})[0] == 400
    assert post(srv, "/enroll", {"v": 1, "cred_id": "c", "uri": uri.replace("&k=10", "")})[0] == 400


def test_state_survives_restart(tmp_path):
    clock = Clock(1000)
    srv = make_server(("127.0.0.1", 0), tmp_path / "s.log", clock=clock)
    serve_in_thread(srv)
    state = enrolled(srv)
    clock.set_slot(1100)
    otp = password_to_base32(gen_password(state, 1100).value)
    assert post(srv, "/verify", {"v": 1, "cred_id": "alice", "otp": otp})[0] == 200
    srv.shutdown()
    srv.server_close()
    srv2 = make_server(("127.0.0.1", 0), tmp_path / "s.log", clock=clock)
    serve_in_thread(srv2)
    try:
        assert post(srv2, "/verify", {"v": 1, "cred_id": "alice", "otp": otp})[0] == 409
    finally:
        srv2.shutdown()
        srv2.server_close()
