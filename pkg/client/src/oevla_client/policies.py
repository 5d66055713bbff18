"""Policies runnable through run_client.

RandomPolicy reproduces the evaluator's in-process random baseline bit
for bit: same per-sequence seed derivation, same draw order (PROTOCOL.md
pins both), so a loopback run scores identically to a local one.  That
makes it the standard check that a deployment's wiring is transparent.

EchoOraclePolicy returns the expert chunk the evaluator includes when
debug hints are on; useful for the same reason from the other direction.

TokenModelAdapter is the skeleton to copy when hooking up a real model
that emits action tokens.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .protocol import ACTION_DIM, CHUNK_LEN, MissingHintsError


def derive_policy_seed(base_seed: int, sequence_id: str) -> int:
    """Per-sequence rng seed, identical on both ends of the wire."""
    digest = hashlib.sha256(f"{base_seed}:{sequence_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RandomPolicy:
    """Uniform random chunks, bit-identical to the evaluator's baseline."""

    name = "random"

    def __init__(self, seed: int):
        self.seed = seed
        self._sequence_id = None
        self._rng = None

    def reset(self, instruction, sequence_id, reset_seed, subtask_index):
        if sequence_id != self._sequence_id:
            self._sequence_id = sequence_id
            self._rng = np.random.default_rng(derive_policy_seed(self.seed, sequence_id))

    def act(self, step):
        # draw order matters for reproducibility: positions first, then
        # the gripper coin flips
        chunk = np.empty((CHUNK_LEN, ACTION_DIM))
        chunk[:, :6] = self._rng.uniform(-1.0, 1.0, size=(CHUNK_LEN, 6))
        chunk[:, 6] = np.where(self._rng.random(CHUNK_LEN) < 0.5, -1.0, 1.0)
        return chunk


class EchoOraclePolicy:
    """Replays the expert chunk from the step's debug hints."""

    name = "echo-oracle"

    def reset(self, instruction, sequence_id, reset_seed, subtask_index):
        pass

    def act(self, step):
        if not step.debug or "oracle_chunk" not in step.debug:
            raise MissingHintsError()
        return np.asarray(step.debug["oracle_chunk"], dtype=np.float64)


class TokenModelAdapter:
    """Adapter skeleton for a learned model that emits action tokens.

    Plug your model in as the `model` callable: it receives the Step
    (obs pixels, proprio, step index) plus the decoded instruction from
    the latest reset, and must return 35 token ids, timestep-major, each
    in [151808, 152064).  run_client range-checks them before sending;
    the evaluator enforces the length and reports violations back.

    Example:

        def my_model(instruction, step):
            prompt = build_prompt(instruction, step.obs, step.proprio)
            return generate_action_tokens(prompt)   # list of 35 ints

        run_client("127.0.0.1:4242", TokenModelAdapter(my_model))
    """

    name = "model"

    def __init__(self, model):
        self.model = model
        self.instruction = None

    def reset(self, instruction, sequence_id, reset_seed, subtask_index):
        self.instruction = instruction

    def act(self, step):
        return list(self.model(self.instruction, step))
