"""Bandit agents and the retrain-on-an-exponential-schedule control loop.

Contextual agents score each action by unrolling ``(context, one-hot action)``
pairs through a single network. Thompson agents draw one dropout noise sample
per decision and reuse it for every action, so each decision is made under a
single posterior weight sample.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .nn import AdamState, Network, NumericalError, adam_update

log = logging.getLogger(__name__)

AGENT_KINDS = (
    "non-contextual-ts",
    "epsilon-greedy",
    "bernoulli-dropout-ts",
    "concrete-dropout-ts",
)


@dataclass
class AgentConfig:
    kind: str = "concrete-dropout-ts"
    name: str | None = None
    epsilon: float = 0.05
    fixed_p: float = 0.2
    # concrete agents start at the entropy-maximising rate and learn down from it
    initial_p: float = 0.5
    temperature: float = 0.1
    length_scale: float = 0.01
    hidden: tuple = (256, 256)
    lr: float = 1e-3
    warmup: int = 128
    growth: float = 2.0
    epochs: int = 64
    batch_size: int = 64
    retrain_mode: str = "warm"

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}; expected one of {AGENT_KINDS}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.fixed_p < 1.0:
            raise ValueError("fixed_p must lie in (0, 1)")
        if not 0.0 < self.initial_p < 1.0:
            raise ValueError("initial_p must lie in (0, 1)")
        if self.retrain_mode not in ("warm", "scratch"):
            raise ValueError("retrain_mode must be 'warm' or 'scratch'")
        if self.warmup < 1 or self.growth <= 1:
            raise ValueError("warmup must be >= 1 and growth > 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        self.hidden = tuple(int(h) for h in self.hidden)

    @property
    def label(self):
        return self.name or self.kind


# -- small pieces -----------------------------------------------------------

class ExperienceBuffer:
    """Append-only store of (context, action, reward) triplets."""

    def __init__(self, context_dim, capacity=256):
        self._x = np.empty((capacity, context_dim))
        self._a = np.empty(capacity, dtype=np.int64)
        self._r = np.empty(capacity, dtype=np.int8)
        self._n = 0

    def __len__(self):
        return self._n

    def append(self, context, action, reward):
        if reward not in (0, 1):
            raise ValueError(f"reward must be 0 or 1, got {reward!r}")
        if self._n == self._x.shape[0]:
            cap = 2 * self._x.shape[0]
            self._x = np.resize(self._x, (cap, self._x.shape[1]))
            self._a = np.resize(self._a, cap)
            self._r = np.resize(self._r, cap)
        self._x[self._n] = context
        self._a[self._n] = action
        self._r[self._n] = reward
        self._n += 1

    @property
    def contexts(self):
        return self._x[: self._n]

    @property
    def actions(self):
        return self._a[: self._n]

    @property
    def rewards(self):
        return self._r[: self._n]


class RetrainSchedule:
    """Retrain points ``N, K N, K^2 N, ...`` in the number of observed examples."""

    def __init__(self, initial=128, growth=2.0):
        self.initial = initial
        self.growth = growth
        self.next_retrain = initial

    def due(self, count):
        return count >= self.next_retrain

    def advance(self):
        nxt = self.next_retrain * self.growth
        self.next_retrain = int(nxt) if float(nxt).is_integer() else nxt
        return self.next_retrain


@dataclass(frozen=True)
class BetaArm:
    alpha: float = 1.0
    beta: float = 1.0


def beta_binomial_update(arm, reward):
    if reward not in (0, 1):
        raise ValueError(f"reward must be 0 or 1, got {reward!r}")
    return BetaArm(arm.alpha + reward, arm.beta + 1 - reward)


def beta_binomial_select(arms, rng):
    if any(a.alpha <= 0 or a.beta <= 0 for a in arms):
        raise ValueError("Beta parameters must be positive")
    theta = rng.beta([a.alpha for a in arms], [a.beta for a in arms])
    return int(np.argmax(theta))


def action_encodings(m):
    return np.eye(m)


def unroll(context, actions):
    """Stack ``context`` next to each action encoding, one row per action."""
    context = np.asarray(context, dtype=np.float64).reshape(1, -1)
    return np.hstack([np.repeat(context, actions.shape[0], axis=0), actions])


def select_action_thompson(net, context, actions, rng):
    """Argmax over actions under ONE sampled dropout mask (lowest index wins ties)."""
    if len(actions) == 0:
        raise ValueError("no actions to choose from")
    noise = net.sample_noise(rng, rows=1)
    scores = net.forward(unroll(context, actions), noise=noise)
    return int(np.argmax(scores))


def select_action_epsilon(net, context, actions, rng, epsilon):
    m = len(actions)
    if m == 0:
        raise ValueError("no actions to choose from")
    if rng.random() < epsilon:
        return int(rng.integers(m))
    scores = net.forward(unroll(context, actions), deterministic=True)
    return int(np.argmax(scores))


# -- agents -----------------------------------------------------------------

@dataclass
class RetrainEvent:
    buffer_size: int
    dropout_rates: list
    loss: float

    @property
    def mean_dropout_rate(self):
        return float(np.mean(self.dropout_rates)) if self.dropout_rates else 0.0


@dataclass
class AgentStreams:
    """Independent random streams owned by one agent."""

    noise: np.random.Generator
    warmup: np.random.Generator
    train: np.random.Generator

    @classmethod
    def from_seed(cls, seed):
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        return cls(*(np.random.default_rng(s) for s in ss.spawn(3)))


class Agent:
    """Common warm-up, experience and retrain bookkeeping.

    The first ``warmup`` decisions are uniformly random. Subclasses provide
    :meth:`select` and, if they learn in batches, :meth:`retrain`.
    """

    def __init__(self, config, n_actions, context_dim, streams):
        self.config = config
        self.n_actions = n_actions
        self.context_dim = context_dim
        self.streams = streams
        self.buffer = ExperienceBuffer(context_dim)
        self.schedule = RetrainSchedule(config.warmup, config.growth)
        self.retrain_events = []

    @property
    def label(self):
        return self.config.label

    def choose(self, env_step):
        return self.act(env_step.context)

    def act(self, context):
        if len(self.buffer) < self.config.warmup:
            return int(self.streams.warmup.integers(self.n_actions))
        return self.select(context)

    def select(self, context):
        raise NotImplementedError

    def observe(self, context, action, reward):
        self.buffer.append(context, action, reward)

    def maybe_retrain(self):
        if not self.schedule.due(len(self.buffer)):
            return False
        event = self.retrain()
        if event is not None:
            self.retrain_events.append(event)
        self.schedule.advance()
        return True

    def retrain(self):
        return None


class NonContextualAgent(Agent):
    """Beta/Bernoulli Thompson sampling that ignores the context."""

    def __init__(self, config, n_actions, context_dim, streams):
        super().__init__(config, n_actions, context_dim, streams)
        self.arms = [BetaArm() for _ in range(n_actions)]

    def select(self, context):
        return beta_binomial_select(self.arms, self.streams.noise)

    def observe(self, context, action, reward):
        super().observe(context, action, reward)
        self.arms[action] = beta_binomial_update(self.arms[action], reward)

    def maybe_retrain(self):
        # conjugate updates happen online in observe()
        return False


class NeuralAgent(Agent):
    """Contextual agent backed by a :class:`~dcbandit.nn.Network`.

    ``predictor`` replaces the network for action selection and freezes
    learning; tests use it to plug in a perfect model.
    """

    dropout = "none"

    def __init__(self, config, n_actions, context_dim, streams, predictor=None):
        super().__init__(config, n_actions, context_dim, streams)
        self.actions = action_encodings(n_actions)
        self.predictor = predictor
        self.net = self._build_network()

    def _build_network(self):
        cfg = self.config
        p = cfg.fixed_p if self.dropout == "bernoulli" else cfg.initial_p
        return Network.mlp(
            self.context_dim + self.n_actions, cfg.hidden, dropout=self.dropout,
            p=p, temperature=cfg.temperature, rng=self.streams.train,
        )

    @property
    def model(self):
        return self.predictor if self.predictor is not None else self.net

    def training_set(self):
        buf = self.buffer
        x = np.hstack([buf.contexts, self.actions[buf.actions]])
        return x, buf.rewards.astype(np.float64)

    def retrain(self):
        if self.predictor is not None:
            return None
        cfg = self.config
        if cfg.retrain_mode == "scratch":
            self.net = self._build_network()
        net = self.net
        x, y = self.training_set()
        n = x.shape[0]
        rng = self.streams.train
        params = net.parameters()
        state = AdamState.for_params(params, lr=cfg.lr)
        epoch_loss = float("nan")
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                noise = net.sample_noise(rng, rows=len(idx)) if net.stochastic else None
                try:
                    loss, grads = net.loss_and_gradients(
                        x[idx], y[idx], n, noise, cfg.length_scale
                    )
                    adam_update(params, grads, state)
                except NumericalError as exc:
                    raise NumericalError(
                        f"{self.label}: training diverged at buffer size {n}, epoch {epoch}: {exc}"
                    ) from exc
                total += loss * len(idx)
            epoch_loss = total / n
        event = RetrainEvent(n, net.dropout_rates(), epoch_loss)
        log.debug("%s retrained on %d examples, loss %.4f, p %s",
                  self.label, n, epoch_loss, event.dropout_rates)
        return event


class EpsilonGreedyAgent(NeuralAgent):
    dropout = "none"

    def select(self, context):
        return select_action_epsilon(
            self.model, context, self.actions, self.streams.noise, self.config.epsilon
        )


class ThompsonDropoutAgent(NeuralAgent):
    def select(self, context):
        return select_action_thompson(self.model, context, self.actions, self.streams.noise)


class BernoulliDropoutAgent(ThompsonDropoutAgent):
    dropout = "bernoulli"


class ConcreteDropoutAgent(ThompsonDropoutAgent):
    dropout = "concrete"


AGENT_CLASSES = {
    "non-contextual-ts": NonContextualAgent,
    "epsilon-greedy": EpsilonGreedyAgent,
    "bernoulli-dropout-ts": BernoulliDropoutAgent,
    "concrete-dropout-ts": ConcreteDropoutAgent,
}


def make_agent(config, n_actions, context_dim, streams):
    return AGENT_CLASSES[config.kind](config, n_actions, context_dim, streams)


def step(agent, env_step):
    """One round: choose, reveal the reward of the chosen action only, record it."""
    action = agent.choose(env_step)
    reward = env_step.realize(action)
    agent.observe(env_step.context, action, reward)
    return action


class OracleAgent(Agent):
    """Cheating reference that reads the hidden expected rewards. Tests only."""

    def __init__(self, config=None, n_actions=2, context_dim=1, streams=None):
        config = config or AgentConfig(kind="non-contextual-ts", name="oracle", warmup=1)
        super().__init__(config, n_actions, context_dim, streams or AgentStreams.from_seed(0))

    def choose(self, env_step):
        return env_step.oracle_action


__all__ = [
    "AGENT_KINDS", "AgentConfig", "ExperienceBuffer", "RetrainSchedule", "BetaArm",
    "beta_binomial_update", "beta_binomial_select", "select_action_thompson",
    "select_action_epsilon", "unroll", "make_agent", "step", "Agent",
    "NonContextualAgent", "EpsilonGreedyAgent", "BernoulliDropoutAgent",
    "ConcreteDropoutAgent", "OracleAgent", "RetrainEvent", "AgentStreams",
]
