"""Pick representative observations on two mazes and compare them.

A random walker collects egocentric views on each level. Greedy
facility-location selection keeps a handful per level, and the pooled cosine
match between those handfuls is the level's diversity score. Scores are
driven by local views, not by layouts: the corridor's edge-of-map views look
much like the border of an open room, so it is not the most distinct level here.
"""

import numpy as np

from uedlab.diversity import DiversityConfig, div_scores, select_representatives
from uedlab.learner import PolicyParams, rollout
from uedlab.maze import MazeEnv, observation_dim, parse_ascii, render_ascii

LEVELS = {
    "corridor": "A...........G\n",
    "room": "A....\n.....\n.....\n.....\n....G\n",
    "room-again": "A....\n.....\n.....\n.....\n...G.\n",
}

rng = np.random.default_rng(0)
policy = PolicyParams.zeros(3, observation_dim(5))   # uniform random walker
cfg = DiversityConfig(n=4, m_prime=32)

env = MazeEnv(horizon=60)
reps = []
for name, text in LEVELS.items():
    level = parse_ascii(text)
    obs = np.vstack([rollout(env, policy, rng, level=level).obs for _ in range(8)])
    r = select_representatives(obs, cfg, rng, level_ref=name)
    reps.append(r)
    print(f"{name}: {len(obs)} observations -> {len(r)} representatives")
    print(render_ascii(level))

scores = div_scores([r.vectors for r in reps])
for name, s in zip(LEVELS, scores):
    print(f"F_div({name}) = {s:.3f}   (lower means more distinct from the rest)")
