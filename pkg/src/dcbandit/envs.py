"""Bandit environments: the UCI mushroom task and the casino parity task.

Each timestep yields an :class:`EnvStep` carrying the context shown to the
agent together with the per-action expected rewards, which only the regret
bookkeeping is allowed to look at.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MUSHROOM_FEATURES = (
    "cap-shape", "cap-surface", "cap-color", "bruises", "odor",
    "gill-attachment", "gill-spacing", "gill-size", "gill-color",
    "stalk-shape", "stalk-root", "stalk-surface-above-ring",
    "stalk-surface-below-ring", "stalk-color-above-ring",
    "stalk-color-below-ring", "veil-type", "veil-color", "ring-number",
    "ring-type", "spore-print-color", "population", "habitat",
)
MUSHROOM_FILENAME = "agaricus-lepiota.data"
MUSHROOM_ROWS = 8124
MUSHROOM_BYTES = 373704
MUSHROOM_ACTIONS = ("eat", "decline")
CASINO_ACTIONS = ("play", "decline")


class DatasetError(ValueError):
    """Malformed mushroom data. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class EnvStep:
    context: np.ndarray
    actions: tuple
    expected: np.ndarray
    uniforms: np.ndarray

    @property
    def n_actions(self):
        return len(self.actions)

    def realize(self, action):
        """Bernoulli reward for ``action``.

        Draws reuse one uniform per action, so two policies taking the same
        action on the same step see the same reward.
        """
        return int(self.uniforms[action] < self.expected[action])

    @property
    def oracle_action(self):
        return int(np.argmax(self.expected))


def oracle_expected_reward(step):
    return float(np.max(step.expected))


# -- mushroom ---------------------------------------------------------------

@dataclass
class EncodedDataset:
    """One-hot mushroom contexts.

    ``columns[j]`` is the ``(feature index, category code)`` pair behind
    column ``j`` of ``contexts``; ``codes`` keeps the raw characters.
    """

    contexts: np.ndarray
    edible: np.ndarray
    columns: list
    codes: np.ndarray

    @property
    def rows(self):
        return self.contexts.shape[0]

    @property
    def dim(self):
        return self.contexts.shape[1]

    def decode(self, row):
        """Recover the 22 categorical codes from a one-hot row."""
        out = [""] * self.codes.shape[1]
        for j in np.flatnonzero(row):
            feat, code = self.columns[j]
            out[feat] = code
        return out


def _read_lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    if isinstance(data, bytes):
        data = data.decode("ascii")
    return io.StringIO(data).read().splitlines()


def load_mushroom_dataset(source):
    """Parse and one-hot encode ``agaricus-lepiota.data``.

    ``source`` may be a path, raw bytes or a binary/text stream. The category
    vocabulary comes from the data; ``?`` is an ordinary category. Columns
    are ordered by feature, then by category code.
    """
    labels = []
    rows = []
    n_feat = len(MUSHROOM_FEATURES)
    for lineno, line in enumerate(_read_lines(source), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != n_feat + 1:
            raise DatasetError(f"expected {n_feat + 1} fields, got {len(fields)}", lineno)
        if any(len(f) != 1 for f in fields):
            raise DatasetError("fields must be single characters", lineno)
        if fields[0] not in ("e", "p"):
            raise DatasetError(f"unknown class code {fields[0]!r}", lineno)
        labels.append(fields[0] == "e")
        rows.append(fields[1:])
    if not rows:
        raise DatasetError("no mushroom records found")

    codes = np.array(rows, dtype="<U1")
    columns = []
    for feat in range(n_feat):
        columns += [(feat, c) for c in sorted(set(codes[:, feat]))]
    index = {col: j for j, col in enumerate(columns)}
    contexts = np.zeros((len(rows), len(columns)))
    for i, row in enumerate(rows):
        for feat, c in enumerate(row):
            contexts[i, index[(feat, c)]] = 1.0
    return EncodedDataset(contexts, np.array(labels), columns, codes)


def mushroom_step(dataset, rng, decline_reward=0.5):
    if dataset.rows == 0:
        raise ValueError("empty mushroom dataset")
    i = int(rng.integers(dataset.rows))
    eat = 1.0 if dataset.edible[i] else 0.0
    return EnvStep(
        context=dataset.contexts[i],
        actions=MUSHROOM_ACTIONS,
        expected=np.array([eat, decline_reward]),
        uniforms=rng.random(2),
    )


def default_data_dir():
    return Path(os.environ.get("BANDIT_DATA_DIR", Path.home() / ".cache" / "dcbandit"))


# -- casino parity ----------------------------------------------------------

def parity(bits):
    """``"even"`` if the number of set bits is even, else ``"odd"``."""
    bits = np.asarray(bits)
    if bits.size == 0:
        raise ValueError("parity of an empty bit vector")
    return "even" if int(np.count_nonzero(bits)) % 2 == 0 else "odd"


@dataclass(frozen=True)
class CasinoConfig:
    n_bandits: int = 32
    p_a: float = 0.7
    p_b: float = 0.3

    def __post_init__(self):
        if self.n_bandits < 2:
            raise ValueError("the casino needs at least two bandits")
        for p in (self.p_a, self.p_b):
            if not 0.0 <= p <= 1.0:
                raise ValueError("payout probabilities must lie in [0, 1]")

    @property
    def id_bits(self):
        return max(1, math.ceil(math.log2(self.n_bandits)))

    def id_matrix(self):
        """Row ``i`` is the big-endian binary encoding of bandit ``i``."""
        shifts = np.arange(self.id_bits - 1, -1, -1)
        ids = np.arange(self.n_bandits)[:, None]
        return ((ids >> shifts) & 1).astype(np.float64)

    def payouts(self):
        ids = self.id_matrix()
        even = ids.sum(axis=1) % 2 == 0
        return np.where(even, self.p_a, self.p_b)

    @property
    def decline_value(self):
        return float(self.payouts().mean())


def casino_step(cfg, rng, _ids=None, _payouts=None):
    ids = cfg.id_matrix() if _ids is None else _ids
    payouts = cfg.payouts() if _payouts is None else _payouts
    i = int(rng.integers(cfg.n_bandits))
    return EnvStep(
        context=ids[i],
        actions=CASINO_ACTIONS,
        expected=np.array([payouts[i], float(payouts.mean())]),
        uniforms=rng.random(2),
    )


# -- environment objects used by the simulator ------------------------------

class CasinoEnv:
    name = "casino"

    def __init__(self, cfg, rng):
        self.cfg = cfg
        self.rng = rng
        self._ids = cfg.id_matrix()
        self._payouts = cfg.payouts()

    @property
    def context_dim(self):
        return self.cfg.id_bits

    n_actions = len(CASINO_ACTIONS)

    def step(self):
        return casino_step(self.cfg, self.rng, self._ids, self._payouts)


class MushroomEnv:
    name = "mushroom"
    n_actions = len(MUSHROOM_ACTIONS)

    def __init__(self, dataset, rng, decline_reward=0.5):
        self.dataset = dataset
        self.rng = rng
        self.decline_reward = decline_reward

    @property
    def context_dim(self):
        return self.dataset.dim

    def step(self):
        return mushroom_step(self.dataset, self.rng, self.decline_reward)
