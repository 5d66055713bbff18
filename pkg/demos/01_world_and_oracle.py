"""Drive the tabletop world by hand and with the scripted expert.

python3 demos/01_world_and_oracle.py
"""

import numpy as np

from oevla import bench
from oevla import world as W
from oevla.policy import oracle_act
from oevla.tasks import TASK_IDS, feasible, success

# A reset profile fixes the things that stay put across an episode:
# table color, drawer geometry, camera pan.  The seed scrambles the rest.
state = W.reset("A", seed=123)
print("profile A, seed 123")
print("  gripper at", np.round(state.proprio()[:3], 3))
print("  objects:", [oid for oid, _ in state.objects])

# Actions are 7 floats in [-1, 1]: dx, dy, dz, three rotation values we
# carry but the world ignores, and the gripper command.
state = W.step(state, np.array([0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]))
print("after one step, gripper at", np.round(state.proprio()[:3], 3))

print()
print(len(TASK_IDS), "tasks:", ", ".join(TASK_IDS[:5]), "...")
print("feasible right now:", sum(feasible(t, state) for t in TASK_IDS))

# The scripted expert emits 5-step chunks toward a given task.  Run it
# in closed loop until the success predicate fires.
task = "lift_red_block"
initial = state
steps = 0
while not success(task, initial, state) and steps < 64:
    for row in oracle_act(state, task):
        state = W.step(state, row)
        steps += 1
        if success(task, initial, state):
            break
print()
print(f"expert finished {task!r} in {steps} steps")

# Evaluation chains five tasks back to back in the same episode.  The
# sampler simulates the expert through each link so every task in the
# chain is feasible in the state its predecessor leaves behind.
plans = bench.gen_sequences("D", n=2, seed=7)
for plan in plans:
    print(plan["id"], "->", plan["tasks"])
