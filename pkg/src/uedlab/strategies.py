"""Curriculum strategies: the self-play diversity loop and its baselines.

Every strategy is one configuration of a shared loop that differs along
three axes: where new levels come from (a learned generator or uniform
random construction), which students act on them (a single student, an
Alice/Bob self-play pair, or a protagonist/antagonist pair), and whether a
replay buffer curates previously seen levels.

=========  =========  ==============  =======================
strategy   levels     students        buffer
=========  =========  ==============  =======================
divsp      generator  self-play pair  diversity replacement
dr         random     single          none
plr        random     single          learning-potential only
minimax    generator  single          none
paired     generator  prot./antag.    none
=========  =========  ==============  =======================
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import ExperimentConfig
from .core import LevelParams, NumericalError, Trajectory
from .curriculum import BufferEntry, LevelBuffer
from .diversity import select_representatives
from .evaluation import evaluate, load_suite
from .learner import (
    AgentPair,
    PolicyParams,
    act,
    episode_returns,
    gae_magnitude_regret,
    gae_score,
    grad_log_prob,
    paired_regret,
    rollout,
    self_play_regret,
    sync_bob,
    train_step,
)
from .maze import MazeEnv, MazeFamily, NUM_STUDENT_ACTIONS, observation_dim

METRIC_COLUMNS = ("iteration", "env_steps", "strategy", "branch", "level_id", "regret", "f_gae",
                  "buffer_size", "buffer_diversity", "eval_solved_rate", "eval_mean_return", "seed")


# ---------------------------------------------------------------------------
# level generator

@dataclass
class DesignTrajectory:
    obs: np.ndarray        # (steps, d)
    actions: np.ndarray    # (steps,)
    masks: np.ndarray      # (steps, num_actions) bool

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class GeneratorPolicy:
    """Sequential maze designer.

    Step 0 places the start, step 1 the goal and later steps drop blocks or
    take the extra stop action. The observation is a one-hot of the step
    index followed by the grid occupancy built so far.
    """

    family: MazeFamily
    params: PolicyParams
    baseline: float = 0.0
    baseline_decay: float = 0.99
    learning_rate: float = 0.05

    @classmethod
    def uniform(cls, family: MazeFamily, learning_rate: float = 0.05,
                baseline_decay: float = 0.99) -> "GeneratorPolicy":
        d = family.max_design_steps + family.num_cells
        return cls(family, PolicyParams.zeros(family.num_cells + 1, d), 0.0, baseline_decay, learning_rate)

    @property
    def stop_action(self) -> int:
        return self.family.num_cells

    @property
    def obs_dim(self) -> int:
        return self.family.max_design_steps + self.family.num_cells

    def observation(self, step: int, occupancy: np.ndarray) -> np.ndarray:
        x = np.zeros(self.obs_dim)
        x[step] = 1.0
        x[self.family.max_design_steps:] = occupancy
        return x

    def action_mask(self, step: int, start_cell: int | None) -> np.ndarray:
        mask = np.ones(self.family.num_cells + 1, dtype=bool)
        if step < 2:
            mask[self.stop_action] = False
        if step == 1:
            mask[start_cell] = False
        return mask

    def copy(self) -> "GeneratorPolicy":
        return GeneratorPolicy(self.family, self.params.copy(), self.baseline,
                               self.baseline_decay, self.learning_rate)


def generate_level(gen: GeneratorPolicy, rng: np.random.Generator) -> tuple[LevelParams, DesignTrajectory]:
    fam = gen.family
    occupancy = np.zeros(fam.num_cells)
    cells: list[int] = []
    obs, actions, masks = [], [], []
    n_walls = 0
    for step in range(fam.max_design_steps):
        x = gen.observation(step, occupancy)
        mask = gen.action_mask(step, cells[0] if cells else None)
        a, _ = act(gen.params, x, rng, mask)
        obs.append(x)
        actions.append(a)
        masks.append(mask)
        if a == gen.stop_action:
            break
        cells.append(a)
        # occupancy mirrors build_level: colliding or over-budget blocks are no-ops
        if step < 2 or (occupancy[a] == 0 and n_walls < fam.max_blocks):
            n_walls += step >= 2
            occupancy[a] = 1.0
    seed = int(rng.integers(0, 2**63))
    level = fam.encode(cells, seed)
    return level, DesignTrajectory(np.array(obs), np.array(actions), np.array(masks))


def generator_gradient(gen: GeneratorPolicy, traj: DesignTrajectory, advantage: float) -> np.ndarray:
    """Gradient of ``advantage * sum_t log pi(a_t | o_t)`` w.r.t. the actor weights."""
    g = np.zeros_like(gen.params.actor_weights)
    for x, a, m in zip(traj.obs, traj.actions, traj.masks):
        g += grad_log_prob(gen.params.actor_weights, x, int(a), m)
    return advantage * g


def train_generator(gen: GeneratorPolicy, traj: DesignTrajectory, regret: float) -> GeneratorPolicy:
    """REINFORCE step: every design action gets return ``regret`` minus a running-mean baseline."""
    if not np.isfinite(regret):
        raise NumericalError("non-finite regret passed to the generator", {"regret": regret})
    grad = generator_gradient(gen, traj, regret - gen.baseline)
    W = gen.params.actor_weights + gen.learning_rate * grad
    if not np.all(np.isfinite(W)):
        raise NumericalError("non-finite generator weights", {"regret": regret, "baseline": gen.baseline})
    params = PolicyParams(W, gen.params.critic_weights.copy(), gen.params.version + 1)
    baseline = gen.baseline_decay * gen.baseline + (1.0 - gen.baseline_decay) * regret
    return GeneratorPolicy(gen.family, params, baseline, gen.baseline_decay, gen.learning_rate)


def occupancy_counts(levels, family: MazeFamily) -> np.ndarray:
    """Per-cell count of how often a cell holds the start, the goal or a wall."""
    counts = np.zeros(family.num_cells)
    for lp in levels:
        lvl = family.decode(lp)
        for xy in (lvl.start, lvl.goal, *lvl.walls):
            counts[xy[1] * family.width + xy[0]] += 1
    return counts


# ---------------------------------------------------------------------------
# strategy loop

@dataclass(frozen=True)
class LoopOptions:
    level_source: str = "generator"      # generator | random
    students: str = "self_play"          # single | self_play | paired
    generator_reward: str | None = "self_play_regret"   # None | self_play_regret | neg_return | paired_regret
    buffer: bool = True


PRESETS = {
    "divsp": LoopOptions("generator", "self_play", "self_play_regret", True),
    "dr": LoopOptions("random", "single", None, False),
    "plr": LoopOptions("random", "single", None, True),
    "minimax": LoopOptions("generator", "single", "neg_return", False),
    "paired": LoopOptions("generator", "paired", "paired_regret", False),
}


@dataclass
class TraceEvent:
    name: str
    iteration: int
    info: dict = field(default_factory=dict)


@dataclass
class RunReport:
    strategy: str
    seed: int
    rows: list[dict]
    student: PolicyParams
    family_id: str
    generator: GeneratorPolicy | None = None
    buffer: LevelBuffer | None = None
    antagonist: PolicyParams | None = None
    bob: PolicyParams | None = None
    trace: list[TraceEvent] | None = None
    env_steps: int = 0

    def metrics_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])
        return out.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.metrics_csv())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _Loop:
    def __init__(self, cfg: ExperimentConfig, rng: np.random.Generator, tag: str, opts: LoopOptions,
                 buffer: LevelBuffer | None, trace: list | None, generator: GeneratorPolicy | None):
        self.cfg, self.rng, self.tag, self.opts = cfg, rng, tag, opts
        self.trace = trace
        self.family = cfg.family
        self.env = MazeEnv(cfg.env.horizon, cfg.env.view_size)
        self.train_cfg = cfg.train_config()
        self.gae_cfg = cfg.gae_config()
        d = observation_dim(cfg.env.view_size)
        self.pair = AgentPair.fresh(NUM_STUDENT_ACTIONS, d)
        self.antagonist = PolicyParams.zeros(NUM_STUDENT_ACTIONS, d) if opts.students == "paired" else None
        self.generator = generator
        if self.generator is None and opts.level_source == "generator":
            self.generator = GeneratorPolicy.uniform(self.family, cfg.strategy.generator_learning_rate,
                                                     cfg.strategy.generator_baseline_decay)
        self.buffer = buffer
        if self.buffer is None and opts.buffer:
            self.buffer = LevelBuffer(cfg.replay_config(), cfg.diversity_config())
        self.div_cfg = cfg.diversity_config()
        self.k = cfg.curriculum.episodes_per_eval
        self.env_steps = 0
        self.iteration = 0
        self.next_level_id = 0
        self.rows: list[dict] = []
        self.suite = load_suite(cfg.eval_suite_path) if cfg.eval_interval > 0 else None

    # -- helpers -----------------------------------------------------------

    def emit(self, name: str, **info):
        if self.trace is not None:
            self.trace.append(TraceEvent(name, self.iteration, info))

    def collect(self, params: PolicyParams, level: LevelParams, seeds) -> list[Trajectory]:
        trajs = []
        for s in seeds:
            trajs.append(rollout(self.env, params, np.random.default_rng(s), level=level))
        self.env_steps += sum(len(t) for t in trajs)
        return trajs

    def episode_seeds(self):
        return self.rng.integers(0, 2**63, size=self.k)

    def returns(self, trajs):
        return episode_returns(trajs, self.gae_cfg.gamma)

    def level_gae(self, trajs) -> float:
        return float(np.mean([gae_score(t, self.gae_cfg) for t in trajs]))

    def observations(self, trajs) -> np.ndarray:
        return np.concatenate([t.obs for t in trajs])

    def regret_of(self, a_trajs, b_trajs) -> float:
        if self.cfg.strategy.regret_estimator == "gae":
            return gae_magnitude_regret(a_trajs, b_trajs, self.gae_cfg)
        return self_play_regret(self.returns(a_trajs), self.returns(b_trajs))

    def new_level(self):
        if self.opts.level_source == "random":
            return self.family.random_level(self.rng), None
        return generate_level(self.generator, self.rng)

    # -- student phase shared by both branches -------------------------------

    def play(self, level: LevelParams):
        """Collect episodes with every acting student; train them. Returns (trained trajs, regret)."""
        seeds = self.episode_seeds()
        regret = None
        if self.opts.students == "self_play":
            a_trajs = self.collect(self.pair.alice, level, seeds)
            b_trajs = self.collect(self.pair.bob, level, seeds)
            self.emit("collect", alice_version=self.pair.alice.version, bob_version=self.pair.bob.version)
            regret = self.regret_of(a_trajs, b_trajs)
            self.emit("regret", value=regret, alice_version=self.pair.alice.version,
                      bob_version=self.pair.bob.version,
                      alice_returns=self.returns(a_trajs), bob_returns=self.returns(b_trajs))
            self.pair = sync_bob(self.pair)
            self.emit("sync_bob", version=self.pair.bob.version)
        elif self.opts.students == "paired":
            # independent episode seeds: with shared ones, two zero-initialised students
            # would see identical data, receive identical updates and never diverge
            a_trajs = self.collect(self.pair.alice, level, seeds)
            ant_trajs = self.collect(self.antagonist, level, self.episode_seeds())
            self.emit("collect", returns=self.returns(a_trajs))
            regret = paired_regret(self.returns(a_trajs), self.returns(ant_trajs))
            self.emit("regret", value=regret, protagonist_returns=self.returns(a_trajs),
                      antagonist_returns=self.returns(ant_trajs))
            self.antagonist = train_step(self.antagonist, ant_trajs, self.train_cfg)
        else:
            a_trajs = self.collect(self.pair.alice, level, seeds)
            self.emit("collect", returns=self.returns(a_trajs))
        f_gae = self.level_gae(a_trajs)
        self.pair = AgentPair(train_step(self.pair.alice, a_trajs, self.train_cfg), self.pair.bob)
        self.emit("train_student", version=self.pair.alice.version)
        return a_trajs, regret, f_gae

    # -- branches ------------------------------------------------------------

    def generation_branch(self):
        level, design = self.new_level()
        level_id = self.next_level_id
        self.next_level_id += 1
        self.emit("generate", level_id=level_id)
        a_trajs, regret, f_gae = self.play(level)
        reward = None
        if self.opts.generator_reward == "neg_return":
            reward = -float(np.mean(self.returns(a_trajs)))
        elif self.opts.generator_reward is not None:
            reward = regret
        if reward is not None and design is not None:
            self.generator = train_generator(self.generator, design, reward)
            self.emit("train_generator", reward=reward, regret=regret)
        if self.buffer is not None:
            reps = select_representatives(self.observations(a_trajs), self.div_cfg, self.rng, level_id)
            self.emit("select_reps", size=len(reps))
            outcome = self.buffer.try_insert(BufferEntry(level_id, level, reps, f_gae))
            self.emit("try_insert", outcome=outcome)
            self.emit("update_replay", distribution=self.buffer.replay_distribution())
        return "gen", level_id, regret, f_gae

    def replay_branch(self):
        level_id = self.buffer.sample_level(self.rng)
        self.emit("sample_level", level_id=level_id)
        level = self.buffer.get(level_id).level
        a_trajs, regret, f_gae = self.play(level)
        self.buffer.update_entry(level_id, self.observations(a_trajs), f_gae, self.rng)
        self.emit("update_entry", level_id=level_id)
        self.emit("update_replay", distribution=self.buffer.replay_distribution())
        return "replay", level_id, regret, f_gae

    def step(self):
        self.iteration += 1
        eps = self.rng.random()
        use_replay = self.buffer is not None and len(self.buffer) > 0 and eps > self.buffer.cfg.p
        branch, level_id, regret, f_gae = self.replay_branch() if use_replay else self.generation_branch()
        row = {
            "iteration": self.iteration, "env_steps": self.env_steps, "strategy": self.tag,
            "branch": branch, "level_id": level_id, "regret": regret, "f_gae": f_gae,
            "buffer_size": len(self.buffer) if self.buffer is not None else 0,
            "buffer_diversity": self.buffer.diversity() if self.buffer is not None else None,
            "eval_solved_rate": None, "eval_mean_return": None, "seed": self.cfg.seed,
        }
        if self.suite is not None and self.iteration % self.cfg.eval_interval == 0:
            res = evaluate(self.pair.alice, self.suite, self.cfg.eval_episodes, seed=self.cfg.seed,
                           horizon=self.cfg.env.horizon, view_size=self.cfg.env.view_size)
            row["eval_solved_rate"] = res.solved_rate
            row["eval_mean_return"] = res.mean_return
        self.rows.append(row)

    def run(self, max_iterations: int | None = None) -> RunReport:
        while self.env_steps < self.cfg.total_env_steps:
            if max_iterations is not None and self.iteration >= max_iterations:
                break
            try:
                self.step()
            except NumericalError as exc:
                payload = dict(exc.payload, iteration=self.iteration, strategy=self.tag)
                raise NumericalError(f"{exc} (iteration {self.iteration})", payload) from exc
        return RunReport(
            strategy=self.tag, seed=self.cfg.seed, rows=self.rows, student=self.pair.alice,
            family_id=self.family.family_id, generator=self.generator, buffer=self.buffer,
            antagonist=self.antagonist,
            bob=self.pair.bob if self.opts.students == "self_play" else None,
            trace=self.trace, env_steps=self.env_steps)


def _rng_for(cfg: ExperimentConfig, rng):
    return np.random.default_rng(cfg.seed) if rng is None else rng


def run_strategy(cfg: ExperimentConfig, rng: np.random.Generator | None = None, *,
                 options: LoopOptions | None = None, tag: str | None = None,
                 buffer: LevelBuffer | None = None, generator: GeneratorPolicy | None = None,
                 trace: list | None = None, max_iterations: int | None = None) -> RunReport:
    """Run the strategy named by ``cfg.strategy.kind`` (or explicit loop options).

    The run stops once ``cfg.total_env_steps`` student steps have been taken
    or, when given, after ``max_iterations`` loop iterations.
    """
    kind = cfg.strategy.kind
    opts = options or PRESETS[kind]
    loop = _Loop(cfg, _rng_for(cfg, rng), tag or kind, opts, buffer, trace, generator)
    return loop.run(max_iterations)


def run_divsp(cfg: ExperimentConfig, rng=None, **kw) -> RunReport:
    return run_strategy(cfg.replace(**{"strategy.kind": "divsp"}), rng, **kw)


def run_dr(cfg: ExperimentConfig, rng=None, **kw) -> RunReport:
    return run_strategy(cfg.replace(**{"strategy.kind": "dr"}), rng, **kw)


def run_plr(cfg: ExperimentConfig, rng=None, **kw) -> RunReport:
    return run_strategy(cfg.replace(**{"strategy.kind": "plr"}), rng, **kw)


def run_minimax(cfg: ExperimentConfig, rng=None, **kw) -> RunReport:
    return run_strategy(cfg.replace(**{"strategy.kind": "minimax"}), rng, **kw)


def run_paired(cfg: ExperimentConfig, rng=None, **kw) -> RunReport:
    return run_strategy(cfg.replace(**{"strategy.kind": "paired"}), rng, **kw)


RUNNERS: dict[str, Callable[..., RunReport]] = {
    "divsp": run_divsp, "dr": run_dr, "plr": run_plr, "minimax": run_minimax, "paired": run_paired,
}
