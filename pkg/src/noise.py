import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

import config.settings as settings
from src.errors import ConfigError
from src.parallel import ExecutionOptions, parallel_map
from src.scene import freeze_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CurrentTrace:
    """Per-shot detector current I = signal_mean + dark_mean + signal_fluct + dark_fluct."""
    n_samples: int
    signal_mean: float
    dark_mean: float
    signal_fluct: np.ndarray
    dark_fluct: np.ndarray
    rng_seed: int

    def __post_init__(self):
        for name in ('signal_fluct', 'dark_fluct'):
            values = np.asarray(getattr(self, name), dtype=float)
            if values.shape != (self.n_samples,):
                raise ConfigError(f"{name} must have length {self.n_samples}, got shape {values.shape}")
            object.__setattr__(self, name, freeze_array(values))

    def current(self) -> np.ndarray:
        return (self.signal_mean + self.dark_mean) + self.signal_fluct + self.dark_fluct

    def without_dark(self) -> 'CurrentTrace':
        """Same trace with the dark fluctuations removed; the dark mean stays."""
        return replace(self, dark_fluct=np.zeros(self.n_samples))


@dataclass(frozen=True)
class CorrelationEstimate:
    g2: float
    stderr: float
    n_samples: int


def generate_traces(n: int, correlation: float, signal_std: float, dark_std_1: float, dark_std_2: float,
                    signal_mean: float = 1.0, dark_mean: float = 0.0,
                    seed: int = settings.SEED) -> Tuple[CurrentTrace, CurrentTrace]:
    """
    Gaussian zero-mean fluctuations. The signals share covariance
    correlation * signal_std^2; dark currents are independent of everything.
    """
    if n < 2:
        raise ConfigError(f"need at least 2 samples, got {n}")
    if not -1.0 <= correlation <= 1.0:
        raise ConfigError(f"signal correlation must lie in [-1, 1], got {correlation}")
    if min(signal_std, dark_std_1, dark_std_2) < 0:
        raise ConfigError(f"standard deviations must be non-negative, got {signal_std}, {dark_std_1}, {dark_std_2}")

    rng = np.random.default_rng(seed)
    z = rng.standard_normal((4, n))
    s1 = signal_std * z[0]
    s2 = signal_std * (correlation * z[0] + math.sqrt(1.0 - correlation * correlation) * z[1])
    d1 = dark_std_1 * z[2]
    d2 = dark_std_2 * z[3]
    return (CurrentTrace(n, signal_mean, dark_mean, s1, d1, seed),
            CurrentTrace(n, signal_mean, dark_mean, s2, d2, seed))


def _leave_block_out(a: np.ndarray, b: np.ndarray, n_blocks: int) -> np.ndarray:
    """Covariance estimates with one contiguous block deleted at a time."""
    pieces = list(zip(np.array_split(a, n_blocks), np.array_split(b, n_blocks)))
    counts = np.array([len(pa) for pa, _ in pieces], dtype=float)
    sum_a = np.array([pa.sum() for pa, _ in pieces])
    sum_b = np.array([pb.sum() for _, pb in pieces])
    sum_ab = np.array([(pa * pb).sum() for pa, pb in pieces])
    rest = counts.sum() - counts
    mean_a = (sum_a.sum() - sum_a) / rest
    mean_b = (sum_b.sum() - sum_b) / rest
    return (sum_ab.sum() - sum_ab) / rest - mean_a * mean_b


def _jackknife_stderr(values: np.ndarray) -> float:
    count = len(values)
    spread = values - values.mean()
    return float(math.sqrt((count - 1) / count * np.sum(spread * spread)))


def _centred_pair(trace1: CurrentTrace, trace2: CurrentTrace) -> Tuple[np.ndarray, np.ndarray]:
    if trace1.n_samples != trace2.n_samples:
        raise ConfigError(f"trace lengths differ: {trace1.n_samples} vs {trace2.n_samples}")
    a = trace1.current()
    b = trace2.current()
    return a - a.mean(), b - b.mean()


def estimate_g2(trace1: CurrentTrace, trace2: CurrentTrace,
                jackknife_blocks: int = settings.NOISE_JACKKNIFE_BLOCKS) -> CorrelationEstimate:
    """
    <I1 I2> - <I1><I2>, evaluated on mean-centred currents, with a
    delete-one-block jackknife standard error.
    """
    a, b = _centred_pair(trace1, trace2)
    g2 = float(np.mean(a * b) - a.mean() * b.mean())
    n_blocks = max(2, min(jackknife_blocks, len(a)))
    stderr = _jackknife_stderr(_leave_block_out(a, b, n_blocks))
    return CorrelationEstimate(g2, stderr, len(a))


@dataclass(frozen=True)
class NoiseSettings:
    ladder: Tuple[int, ...] = tuple(settings.NOISE_LADDER)
    replicates: int = settings.NOISE_REPLICATES
    correlation: float = 0.8
    signal_std: float = 1.0
    dark_std: Tuple[float, float] = (5.0, 5.0)
    signal_mean: float = 10.0
    dark_mean: float = 2.0
    jackknife_blocks: int = settings.NOISE_JACKKNIFE_BLOCKS
    seed: int = settings.SEED

    def __post_init__(self):
        object.__setattr__(self, 'ladder', tuple(int(n) for n in self.ladder))
        object.__setattr__(self, 'dark_std', tuple(float(s) for s in self.dark_std))
        if not self.ladder or any(n < 2 for n in self.ladder):
            raise ConfigError(f"ladder entries must be >= 2, got {self.ladder}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if len(self.dark_std) != 2:
            raise ConfigError(f"dark_std needs one value per detector, got {self.dark_std}")
        if self.jackknife_blocks < 2:
            raise ConfigError(f"jackknife_blocks must be >= 2, got {self.jackknife_blocks}")


@dataclass(frozen=True)
class Rung:
    n: int
    g2_with_dark: float
    g2_without: float
    delta: float  # replicate mean of |g2_with_dark - g2_without|
    stderr: float  # replicate mean of the jackknife stderr of g2_with_dark
    delta_stderr: float  # replicate mean of the jackknife stderr of the paired difference


@dataclass(frozen=True)
class NoiseReport:
    rungs: Tuple[Rung, ...]
    slope: Optional[float]
    shrinks: bool
    within_bound: bool
    replicates: int
    seed: int
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            'rungs': [vars(r).copy() for r in self.rungs],
            'slope': self.slope,
            'shrinks': self.shrinks,
            'within_bound': self.within_bound,
            'replicates': self.replicates,
            'seed': self.seed,
            'notes': list(self.notes),
        }


def _paired_experiment(config: NoiseSettings, n: int, seed: int) -> Tuple[float, float, float, float]:
    t1, t2 = generate_traces(n, config.correlation, config.signal_std, config.dark_std[0], config.dark_std[1],
                             config.signal_mean, config.dark_mean, seed)
    with_dark = estimate_g2(t1, t2, config.jackknife_blocks)
    c1, c2 = t1.without_dark(), t2.without_dark()
    without = estimate_g2(c1, c2, config.jackknife_blocks)

    n_blocks = max(2, min(config.jackknife_blocks, n))
    loo_with = _leave_block_out(*_centred_pair(t1, t2), n_blocks)
    loo_without = _leave_block_out(*_centred_pair(c1, c2), n_blocks)
    delta_stderr = _jackknife_stderr(loo_with - loo_without)
    return with_dark.g2, without.g2, with_dark.stderr, delta_stderr


def _shrink_ok(rungs: Sequence[Rung]) -> bool:
    # each step may shrink by sqrt(n_i / n_{i+1}) with a tolerance factor of 2
    for lo, hi in zip(rungs, rungs[1:]):
        if hi.delta > 2.0 * math.sqrt(lo.n / hi.n) * lo.delta:
            return False
    return True


def cancellation_report(config: NoiseSettings, options: Optional[ExecutionOptions] = None) -> NoiseReport:
    """
    Paired with/without-dark experiments over the n ladder. Replicate r uses
    seed config.seed + r, so every rung sees the same seed family.
    """
    options = options or ExecutionOptions()
    rungs: List[Rung] = []
    for n in config.ladder:
        seeds = [config.seed + r for r in range(config.replicates)]
        results = parallel_map(lambda s: _paired_experiment(config, n, s), seeds, options, desc=f"n={n}")
        g_with = np.array([r[0] for r in results])
        g_without = np.array([r[1] for r in results])
        rung = Rung(
            n=n,
            g2_with_dark=float(g_with.mean()),
            g2_without=float(g_without.mean()),
            delta=float(np.mean(np.abs(g_with - g_without))),
            stderr=float(np.mean([r[2] for r in results])),
            delta_stderr=float(np.mean([r[3] for r in results])),
        )
        logger.info(f"n={n}: g2 with dark {rung.g2_with_dark:.6g}, without {rung.g2_without:.6g}, "
                    f"|delta| {rung.delta:.3g} (stderr {rung.stderr:.3g})")
        rungs.append(rung)

    deltas = np.array([r.delta for r in rungs])
    notes = []
    if np.all(deltas > 0) and len(rungs) > 1:
        slope = float(np.polyfit(np.log([r.n for r in rungs]), np.log(deltas), 1)[0])
    else:
        slope = None
        notes.append("log-log slope undefined: a delta is zero or the ladder has one rung")
    within = bool(rungs[-1].delta <= 5.0 * rungs[-1].stderr)
    return NoiseReport(tuple(rungs), slope, _shrink_ok(rungs), within, config.replicates, config.seed, tuple(notes))
