"""Train a student with DivSP on small mazes, then evaluate it.

Uses a 7x7 family and a short budget so it finishes in well under a minute.
"""

import numpy as np

from uedlab import ExperimentConfig
from uedlab.evaluation import evaluate
from uedlab.maze import parse_ascii
from uedlab.strategies import run_strategy

cfg = ExperimentConfig().replace(**{
    "env.width": 7, "env.height": 7, "env.max_blocks": 8, "env.horizon": 40,
    "curriculum.K": 8, "curriculum.n": 4, "curriculum.m_prime": 16,
    "total_env_steps": 20_000, "seed": 1,
})
report = run_strategy(cfg)
print(f"{len(report.rows)} iterations, {report.env_steps} env steps")

branches = {}
for row in report.rows:
    branches[row["branch"]] = branches.get(row["branch"], 0) + 1
print("iterations per branch:", branches)
print("final buffer diversity:", report.rows[-1]["buffer_diversity"])

probes = [
    ("corridor", parse_ascii("A.....G\n")),
    ("open", parse_ascii("A......\n.......\n.......\n......G\n")),
    ("wall", parse_ascii("A..#...\n...#...\n...#...\n......G\n")),
]
res = evaluate(report.student, probes, episodes=5, seed=0, horizon=40)
print(res.summary())
print("mean greedy return per probe:",
      {name: round(float(np.mean([r.ret for r in res.per_level if r.name == name])), 3) for name, _ in probes})
