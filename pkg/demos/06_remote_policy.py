"""Run a policy in another process (here, another thread) over the wire.

python3 demos/06_remote_policy.py

The harness talks to policies through a line-JSON protocol (PROTOCOL.md),
so a policy can live anywhere a socket reaches.  This demo checks the
wire is transparent: a remote policy must score exactly what the same
policy scores in process.
"""

from oevla import bench, harness, rpc
from oevla.policy import OraclePolicy, RandomPolicy
from oevla.types import InstructionForm

suite = bench.build_suite("D", InstructionForm.LANG, "base", 5, seed=13)

# A random-policy server on an ephemeral loopback port.
server = rpc.RpcServer("random", seed=9)
server.start()
print(f"serving a random policy on 127.0.0.1:{server.port}")


def dial():
    return rpc.connect_policy("127.0.0.1", server.port, suite.store)


_, remote = harness.run_suite(dial, suite)
_, local = harness.run_suite(lambda: RandomPolicy(9), suite)
print("remote random == in-process random:", remote.to_json() == local.to_json())

# echo-oracle just replays the expert chunk the harness includes when
# debug hints are on.  Scoring identical to the in-process expert proves
# nothing is lost or reordered in transit.
echo = rpc.RpcServer("echo-oracle", seed=0)
echo.start()


def dial_echo():
    return rpc.connect_policy("127.0.0.1", echo.port, suite.store, debug_hints=True)


_, echoed = harness.run_suite(dial_echo, suite)
_, expert = harness.run_suite(lambda: OraclePolicy(), suite)
print("echoed hints == in-process expert:", echoed.to_json() == expert.to_json())
print("echo Len:", echoed.display()["Len"])

# Misbehavior is classified, logged, and reported back to the peer.
# Without hints the echo policy answers with a typed error; the harness
# folds that into the log instead of crashing.
def dial_echo_blind():
    return rpc.connect_policy("127.0.0.1", echo.port, suite.store, debug_hints=False)


logs, report = harness.run_suite(dial_echo_blind, suite)
print("echo without hints fails as:", logs[0].subtasks[0].reason,
      "| Len:", report.display()["Len"])

server.stop()
echo.stop()
