"""Seeded Monte Carlo orchestration of the link-level experiments.

Every experiment reduces to the same trial: draw fresh relay cascades,
optionally train the adaptive equalizers on pilot blocks, transmit data
blocks and count bit errors per detector. Taps hold still within a block
and, under nonzero Doppler, take one Gauss-Markov step between consecutive
blocks. Trials are independent and embarrassingly parallel.

A trial's random stream is derived purely from (master seed, experiment
tag, trial index) and re-instantiated at every grid point, so points of
one sweep share their channel and noise draws (paired comparisons across
the grid) and aggregate results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import (ChannelRealization, LinkState, SvParams, evolve_channel,
                      generate_channel, path_gain, quantize_to_taps, sv_profile)
from .detectors import (FdeWeights, MlDetector, RlsState, effective_channel,
                        lms_step, mmse_error_floor, mmse_weights, mrc_weights,
                        rls_step)
from .relay import af_gain, relay_forward, relay_receive
from .txrx import (BlockFrame, ModulationScheme, append_cp, demodulate,
                   modulate, unitary_fft, unitary_ifft)

DETECTOR_NAMES = ("mrc", "mmse", "ml", "lms", "rls")
ADAPTIVE_DETECTORS = ("lms", "rls")
WORKERS_ENV_VAR = "UWFDE_WORKERS"


@dataclass
class SimConfig:
    """Full description of one simulation setup.

    ``snr_grid`` entries are destination energy-per-bit to noise-density
    ratios in dB for unit-energy constellations; relay noise is that times
    ``relay_noise_factor``. ``cp_len`` defaults to ``num_taps - 1``.
    """

    block_size: int = 64
    cp_len: int | None = None
    scheme: str = "bpsk"
    sv: SvParams = field(default_factory=lambda: sv_profile(15))
    num_taps: int = 15
    snr_grid: tuple[float, ...] = tuple(float(s) for s in range(0, 31, 2))
    detectors: tuple[str, ...] = ("mmse",)
    num_relays: int = 1
    fd_norm: float = 0.0
    delta: float = 0.5
    eta: float = 2.0
    mu: float = 0.05
    lambda_rls: float = 0.995
    pilot_frames: int = 50
    data_frames: int = 20
    trials: int = 200
    master_seed: int = 0
    relay_noise_factor: float = 1.0
    channel_model: str = "sv"
    workers: int = 1

    def __post_init__(self) -> None:
        self.snr_grid = tuple(float(s) for s in self.snr_grid)
        self.detectors = tuple(self.detectors)
        if isinstance(self.sv, dict):
            self.sv = SvParams(**self.sv)
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.num_taps < 1 or self.num_taps > self.block_size:
            raise ValueError("num_taps must be in [1, block_size]")
        if not 0 <= self.effective_cp_len <= self.block_size:
            raise ValueError("cp_len must be in [0, block_size]")
        if self.effective_cp_len < self.num_taps - 1:
            raise ValueError("cp_len must cover the channel memory")
        if self.scheme.lower() not in ("bpsk", "qpsk"):
            raise ValueError(f"unknown scheme: {self.scheme!r}")
        unknown = set(self.detectors) - set(DETECTOR_NAMES)
        if unknown:
            raise ValueError(f"unknown detectors: {sorted(unknown)}")
        if self.num_relays < 1:
            raise ValueError("num_relays must be >= 1")
        if not 0.0 <= self.fd_norm < 0.5:
            raise ValueError("fd_norm must be in [0, 0.5)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if not 0.0 < self.lambda_rls <= 1.0:
            raise ValueError("lambda_rls must be in (0, 1]")
        if self.pilot_frames < 0 or self.data_frames < 0:
            raise ValueError("frame counts must be nonnegative")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not all(math.isfinite(s) for s in self.snr_grid):
            raise ValueError("snr_grid values must be finite")
        if self.relay_noise_factor < 0:
            raise ValueError("relay_noise_factor must be nonnegative")
        if self.channel_model not in ("sv", "flat"):
            raise ValueError(f"unknown channel_model: {self.channel_model!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def effective_cp_len(self) -> int:
        return self.num_taps - 1 if self.cp_len is None else self.cp_len

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class GridPoint:
    """One cell of an experiment grid."""

    snr_db: float
    fd_norm: float = 0.0
    delta: float = 0.5
    num_relays: int = 1


@dataclass
class BerRecord:
    """Aggregated bit-error outcome for one grid point and detector."""

    experiment: str
    detector: str
    snr_db: float
    fd_norm: float
    delta: float
    num_relays: int
    bits: int
    errors: int
    seed: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0

    @property
    def std_error(self) -> float:
        if self.bits == 0:
            return 0.0
        p = self.ber
        return math.sqrt(p * (1.0 - p) / self.bits)

    @property
    def ci_half_width(self) -> float:
        return wilson_half_width(self.errors, self.bits)


@dataclass
class ExperimentResult:
    """Records of one experiment, plus convergence traces when collected."""

    experiment: str
    config: SimConfig
    records: list[BerRecord]
    mse_traces: dict[str, np.ndarray] | None = None
    mmse_floor: float | None = None

    def record(self, detector: str, **matches) -> BerRecord:
        hits = [r for r in self.records if r.detector == detector
                and all(getattr(r, k) == v for k, v in matches.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} records match {detector!r} {matches}")
        return hits[0]


def wilson_half_width(errors: int, bits: int, z: float = 1.96) -> float:
    """Half-width of the Wilson score interval for a binomial proportion."""
    if bits == 0:
        return 0.0
    p = errors / bits
    denom = 1.0 + z * z / bits
    return z * math.sqrt(p * (1.0 - p) / bits + z * z / (4.0 * bits * bits)) / denom


def trial_seed(master_seed: int, experiment: str, trial_index: int) -> np.random.SeedSequence:
    """Pure seed derivation; the experiment tag is folded in as a CRC."""
    tag = zlib.crc32(experiment.encode("utf-8"))
    return np.random.SeedSequence((int(master_seed), tag, int(trial_index)))


def noise_powers(config: SimConfig, snr_db: float,
                 scheme: ModulationScheme) -> tuple[float, float]:
    """(destination, relay) complex noise variances for a grid SNR."""
    sigma_dest = 10.0 ** (-snr_db / 10.0) / scheme.bits_per_symbol
    return sigma_dest, config.relay_noise_factor * sigma_dest


@dataclass
class _TrialChannels:
    links: list[LinkState]
    powers_sr: list[np.ndarray]
    powers_rd: list[np.ndarray]


def _draw_taps(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    if config.channel_model == "flat":
        taps = np.zeros(config.num_taps, dtype=complex)
        taps[0] = 1.0
        return taps
    realization = generate_channel(config.sv, rng)
    return quantize_to_taps(realization, config.sv.sample_period, config.num_taps)


def _build_links(config: SimConfig, point: GridPoint,
                 rng: np.random.Generator) -> _TrialChannels:
    gain_sr, gain_rd = path_gain(point.delta, config.eta)
    scheme = ModulationScheme.from_name(config.scheme)
    sigma_dest, sigma_relay = noise_powers(config, point.snr_db, scheme)
    links, powers_sr, powers_rd = [], [], []
    for _ in range(point.num_relays):
        taps_sr = _draw_taps(config, rng) * math.sqrt(gain_sr)
        taps_rd = _draw_taps(config, rng) * math.sqrt(gain_rd)
        links.append(LinkState(
            h_sr=ChannelRealization(np.array([]), np.array([]), taps_sr),
            h_rd=ChannelRealization(np.array([]), np.array([]), taps_rd),
            zeta=af_gain(gain_sr, sigma_relay),
            sigma2_relay=sigma_relay,
            sigma2_dest=sigma_dest,
            sigma2_hsr=gain_sr,
        ))
        powers_sr.append(np.abs(taps_sr) ** 2)
        powers_rd.append(np.abs(taps_rd) ** 2)
    return _TrialChannels(links, powers_sr, powers_rd)


def _evolve_links(chans: _TrialChannels, fd_norm: float,
                  rng: np.random.Generator) -> None:
    for link, p_sr, p_rd in zip(chans.links, chans.powers_sr, chans.powers_rd):
        link.h_sr.taps = evolve_channel(link.h_sr.taps, fd_norm, rng, p_sr)
        link.h_rd.taps = evolve_channel(link.h_rd.taps, fd_norm, rng, p_rd)


def transmit_block(x: np.ndarray, links: list[LinkState], cp_len: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Send one symbol block through every relay slot; return the combined
    frequency-domain observation."""
    tx = append_cp(BlockFrame(x), cp_len)
    total = np.zeros(len(x), dtype=complex)
    for link in links:
        at_relay = relay_receive(tx, link.h_sr.taps, link.sigma2_relay, rng)
        forwarded = relay_forward(at_relay, link.zeta, cp_len)
        at_dest = relay_receive(forwarded, link.h_rd.taps, link.sigma2_dest, rng)
        total += at_dest.symbols
    return unitary_fft(total)


@dataclass
class TrialOutput:
    errors: dict[str, int]
    bits: int
    mse_traces: dict[str, np.ndarray] | None = None
    mmse_floor: float | None = None


def run_point_trial(config: SimConfig, point: GridPoint,
                    rng: np.random.Generator,
                    collect_mse: bool = False) -> TrialOutput:
    """One trial at one grid point.

    Draws fresh cascades, trains the adaptive detectors on pilot blocks,
    then counts bit errors over the data blocks. Taps are constant within
    a block; with nonzero Doppler they take one Gauss-Markov step between
    consecutive blocks, pilots and data alike, so the adaptive weights
    carry a tracking lag while ideal-CSI detectors follow the drift.
    """
    scheme = ModulationScheme.from_name(config.scheme)
    chans = _build_links(config, point, rng)
    cp_len = config.effective_cp_len
    n = config.block_size
    fd = point.fd_norm

    adaptive = [d for d in config.detectors if d in ADAPTIVE_DETECTORS]
    ideal = [d for d in config.detectors if d not in ADAPTIVE_DETECTORS]
    train_lms = "lms" in adaptive or collect_mse
    train_rls = "rls" in adaptive or collect_mse

    blocks_sent = 0

    def next_block_channel() -> None:
        nonlocal blocks_sent
        if fd > 0 and blocks_sent > 0:
            _evolve_links(chans, fd, rng)
        blocks_sent += 1

    lms_w = FdeWeights.zeros(n)
    rls_state = RlsState.initial(n, config.lambda_rls)
    lms_trace = np.zeros(config.pilot_frames)
    rls_trace = np.zeros(config.pilot_frames)

    if train_lms or train_rls:
        for i in range(config.pilot_frames):
            next_block_channel()
            bits = rng.integers(0, 2, size=n * scheme.bits_per_symbol)
            x = modulate(bits, scheme).symbols
            r_f = transmit_block(x, chans.links, cp_len, rng)
            s_f = unitary_fft(x)
            if train_lms:
                lms_w, err = lms_step(lms_w, r_f, s_f, config.mu)
                lms_trace[i] = np.mean(np.abs(err) ** 2)
            if train_rls:
                rls_state, err = rls_step(rls_state, r_f, s_f)
                rls_trace[i] = np.mean(np.abs(err) ** 2)

    floor = None
    if collect_mse:
        floor = mmse_error_floor(effective_channel(chans.links, n))

    trained = {"lms": lms_w, "rls": rls_state.weights}
    errors = {d: 0 for d in config.detectors}
    bits_total = 0
    ch = ml = None

    for _ in range(config.data_frames):
        next_block_channel()
        if ideal and (ch is None or fd > 0):
            ch = effective_channel(chans.links, n)
            ml = MlDetector(ch, scheme, n) if "ml" in ideal else None
        bits = rng.integers(0, 2, size=n * scheme.bits_per_symbol)
        x = modulate(bits, scheme).symbols
        r_f = transmit_block(x, chans.links, cp_len, rng)
        for det in config.detectors:
            if det == "ml":
                decided = ml.detect(r_f)
            else:
                if det == "mrc":
                    w = mrc_weights(ch)
                elif det == "mmse":
                    w = mmse_weights(ch)
                else:
                    w = trained[det]
                decided = unitary_ifft(w.apply(r_f))
            got = demodulate(BlockFrame(decided), scheme)
            errors[det] += int(np.count_nonzero(got != bits))
        bits_total += bits.size

    traces = {"lms": lms_trace, "rls": rls_trace} if collect_mse else None
    return TrialOutput(errors, bits_total, traces, floor)


def run_trial(config: SimConfig, trial_seed_value) -> dict[str, tuple[int, int]]:
    """Run one trial at the first grid point; deterministic in the seed."""
    rng = np.random.default_rng(trial_seed_value)
    point = GridPoint(config.snr_grid[0], config.fd_norm, config.delta,
                      config.num_relays)
    out = run_point_trial(config, point, rng)
    return {det: (err, out.bits) for det, err in out.errors.items()}


def _trial_job(args) -> list[TrialOutput]:
    config, points, experiment, index, collect_mse = args
    outputs = []
    for point in points:
        rng = np.random.default_rng(
            trial_seed(config.master_seed, experiment, index))
        outputs.append(run_point_trial(config, point, rng, collect_mse))
    return outputs


def _worker_count(config: SimConfig) -> int:
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        return max(1, int(env))
    return config.workers


def run_points(config: SimConfig, points: list[GridPoint], experiment: str,
               collect_mse: bool = False) -> ExperimentResult:
    """Map trials over a grid and reduce the counts in trial order."""
    jobs = [(config, points, experiment, t, collect_mse)
            for t in range(config.trials)]
    workers = _worker_count(config)
    if workers > 1:
        chunk = max(1, config.trials // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_trial_job, jobs, chunksize=chunk))
    else:
        per_trial = [_trial_job(job) for job in jobs]

    records = []
    for i, point in enumerate(points):
        bits = sum(trial[i].bits for trial in per_trial)
        for det in config.detectors:
            errs = sum(trial[i].errors[det] for trial in per_trial)
            records.append(BerRecord(
                experiment=experiment, detector=det, snr_db=point.snr_db,
                fd_norm=point.fd_norm, delta=point.delta,
                num_relays=point.num_relays, bits=bits, errors=errs,
                seed=config.master_seed))

    traces = floor = None
    if collect_mse:
        # Single-point experiments only; summation runs in trial order so
        # the float reduction is identical for any worker count.
        traces = {}
        for det in ("lms", "rls"):
            total = np.zeros(config.pilot_frames)
            for trial in per_trial:
                total += trial[0].mse_traces[det]
            traces[det] = total / config.trials
        floor = sum(trial[0].mmse_floor for trial in per_trial) / config.trials

    return ExperimentResult(experiment, config, records, traces, floor)


def run_ber_sweep(config: SimConfig, experiment: str = "ber") -> ExperimentResult:
    """Bit error rate over the configured SNR grid."""
    points = [GridPoint(s, config.fd_norm, config.delta, config.num_relays)
              for s in config.snr_grid]
    return run_points(config, points, experiment)


def run_convergence(config: SimConfig,
                    experiment: str = "converge") -> ExperimentResult:
    """Ensemble learning curves of both adaptive detectors at one SNR."""
    if config.pilot_frames < 1:
        raise ValueError("convergence needs at least one pilot frame")
    config = replace(config, data_frames=0, detectors=("lms", "rls"))
    point = GridPoint(config.snr_grid[0], config.fd_norm, config.delta,
                      config.num_relays)
    return run_points(config, [point], experiment, collect_mse=True)


def run_placement_sweep(config: SimConfig, delta_grid,
                        experiment: str = "placement") -> ExperimentResult:
    """Bit error rate over relay positions for each configured SNR.

    Reported BER at position ``d`` is the two-direction service average:
    counts from the sweeps at ``d`` and ``1 - d`` are pooled whenever the
    mirror position is on the grid. A one-way fixed-gain cascade has no
    interior optimum (forwarded relay noise rides the second hop, so a
    relay near the destination sees effectively single-hop fading); the
    round-trip average is the quantity with a midpoint optimum.
    """
    deltas = [float(d) for d in delta_grid]
    if not all(0.0 < d < 1.0 for d in deltas):
        raise ValueError("delta grid values must be in (0, 1)")
    points = [GridPoint(s, config.fd_norm, d, config.num_relays)
              for d in deltas for s in config.snr_grid]
    result = run_points(config, points, experiment)
    one_way = {(r.detector, r.snr_db, round(r.delta, 9)): r
               for r in result.records}
    pooled = []
    for r in result.records:
        mirror = one_way.get((r.detector, r.snr_db, round(1.0 - r.delta, 9)))
        if mirror is None:
            pooled.append(r)
            continue
        pooled.append(replace(r, bits=r.bits + mirror.bits,
                              errors=r.errors + mirror.errors))
    result.records = pooled
    return result


def run_multirelay(config: SimConfig, relay_grid,
                   experiment: str = "multirelay") -> ExperimentResult:
    """Bit error rate as the number of forwarding relays grows."""
    counts = [int(u) for u in relay_grid]
    if not all(u >= 1 for u in counts):
        raise ValueError("relay counts must be >= 1")
    points = [GridPoint(s, config.fd_norm, config.delta, u)
              for u in counts for s in config.snr_grid]
    return run_points(config, points, experiment)
