"""From run-to-failure record to labeled training set.

Pipeline order is denoise -> segment -> decompose: snapshots are cleaned
with wavelet soft-thresholding plus Savitzky-Golay smoothing, grouped into
overlapping windows of consecutive snapshots, and each window's per-channel
signal is turned into a time-frequency image via level-3 wavelet packet
decomposition. Degradation onset (FPT) comes from a kurtosis control chart;
labels decay linearly from 1 at onset to 0 at failure.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import wavelets
from .errors import (
    BaselineTooShort,
    FptOutOfRange,
    NoPostFptWindows,
    RecordTooShort,
    ZeroVariance,
)

IMAGE_SIDE = 64

CHANNELS = ("horizontal", "vertical")


@dataclass
class BearingRecord:
    """Chronological two-channel vibration snapshots from one bearing.

    horizontal/vertical are (n_snapshots, samples_per_snapshot) arrays;
    every snapshot shares the sample rate and length.
    """

    horizontal: np.ndarray
    vertical: np.ndarray
    sample_rate_hz: float
    snapshot_period_s: float = 10.0
    bearing_id: str = ""
    condition_id: int = 0

    def __post_init__(self):
        self.horizontal = np.asarray(self.horizontal, dtype=np.float64)
        self.vertical = np.asarray(self.vertical, dtype=np.float64)
        if self.horizontal.ndim != 2 or self.horizontal.shape[0] < 1:
            raise ValueError("record needs at least one snapshot")
        if self.horizontal.shape != self.vertical.shape:
            raise ValueError("channel arrays must have identical shape")
        if not (np.all(np.isfinite(self.horizontal))
                and np.all(np.isfinite(self.vertical))):
            raise ValueError("record samples must be finite")

    @property
    def n_snapshots(self) -> int:
        return self.horizontal.shape[0]

    @property
    def samples_per_snapshot(self) -> int:
        return self.horizontal.shape[1]

    def channel(self, name: str) -> np.ndarray:
        if name not in CHANNELS:
            raise ValueError(f"unknown channel {name!r}")
        return self.horizontal if name == "horizontal" else self.vertical


@dataclass(frozen=True)
class Window:
    """A run of consecutive snapshot indices."""

    start: int
    size: int

    @property
    def indices(self) -> range:
        return range(self.start, self.start + self.size)

    @property
    def last(self) -> int:
        return self.start + self.size - 1


def sliding_windows(record, size: int = 10, stride: int = 5):
    """Windows at starts 0, stride, 2*stride, ...; trailing remainder dropped."""
    n = record.n_snapshots if isinstance(record, BearingRecord) else int(record)
    if size < 1 or stride < 1:
        raise ValueError("size and stride must be >= 1")
    if n < size:
        raise RecordTooShort(f"{n} snapshots < window size {size}")
    count = (n - size) // stride + 1
    return [Window(start=i * stride, size=size) for i in range(count)]


def kurtosis_series(record: BearingRecord, channel: str = "horizontal"):
    """One kurtosis value per snapshot on the selected channel."""
    data = record.channel(channel)
    out = np.empty(record.n_snapshots)
    for i in range(record.n_snapshots):
        try:
            out[i] = wavelets.kurtosis(data[i])
        except ZeroVariance as exc:
            raise ZeroVariance(f"snapshot {i}: {exc}") from exc
    return out


@dataclass
class FptConfig:
    """Kurtosis control-chart parameters for degradation-onset detection.

    baseline_count=None resolves to min(40, 20% of the series, but at
    least 4) when the detector runs.
    """

    baseline_count: Optional[int] = None
    consecutive_required: int = 3
    sigma_multiplier: float = 3.0
    channel_policy: str = "horizontal"

    def __post_init__(self):
        if self.baseline_count is not None and self.baseline_count < 4:
            raise ValueError("baseline_count must be >= 4")
        if self.consecutive_required < 1:
            raise ValueError("consecutive_required must be >= 1")
        if self.channel_policy not in CHANNELS + ("either",):
            raise ValueError(f"unknown channel_policy {self.channel_policy!r}")

    def resolve_baseline(self, n: int) -> int:
        if self.baseline_count is not None:
            return self.baseline_count
        return min(40, max(4, n // 5))


def detect_fpt(k, cfg: FptConfig = None):
    """First index whose run of `consecutive_required` values leaves the band.

    The band is mu +/- sigma_multiplier * sigma over the first
    baseline_count entries (sample std, ddof=1). Returns the first index of
    the exceedance run, or None when no qualifying run exists.
    """
    if cfg is None:
        cfg = FptConfig()
    k = np.asarray(k, dtype=np.float64)
    baseline = cfg.resolve_baseline(k.size)
    if baseline < 4:
        raise BaselineTooShort(f"baseline_count {baseline} < 4")
    if k.size <= baseline:
        raise BaselineTooShort(
            f"series length {k.size} must exceed baseline {baseline}")
    mu = k[:baseline].mean()
    sigma = k[:baseline].std(ddof=1)
    lo = mu - cfg.sigma_multiplier * sigma
    hi = mu + cfg.sigma_multiplier * sigma
    outside = (k < lo) | (k > hi)
    run = cfg.consecutive_required
    for i in range(baseline, k.size - run + 1):
        if outside[i:i + run].all():
            return i
    return None


def detect_fpt_record(record: BearingRecord, cfg: FptConfig = None):
    """Run detect_fpt on the record per the configured channel policy.

    Policy "either" takes the earliest FPT over both channels.
    """
    if cfg is None:
        cfg = FptConfig()
    channels = CHANNELS if cfg.channel_policy == "either" else (cfg.channel_policy,)
    hits = [f for ch in channels
            if (f := detect_fpt(kurtosis_series(record, ch), cfg)) is not None]
    return min(hits) if hits else None


def assign_labels(record_length: int, fpt: int):
    """Label 1 through the FPT, then linear decay hitting exactly 0 at the end."""
    if not 0 <= fpt < record_length - 1:
        raise FptOutOfRange(
            f"fpt {fpt} outside [0, {record_length - 1})")
    i = np.arange(record_length, dtype=np.float64)
    labels = 1.0 - (i - fpt) / (record_length - 1 - fpt)
    labels[:fpt + 1] = 1.0
    return labels


@dataclass
class WpdImage:
    """64x64 time-frequency image of one window on one channel.

    Pixels are stored as float32 (the at-rest precision of the dataset
    container) and min-max normalized to [0, 1]; a constant raw image
    degenerates to all zeros.
    """

    pixels: np.ndarray
    channel: str = ""
    source_window: Optional[Window] = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.shape != (IMAGE_SIDE, IMAGE_SIDE):
            raise ValueError(f"pixels must be {IMAGE_SIDE}x{IMAGE_SIDE}")
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("pixels must be finite")


def normalize_image(raw: np.ndarray) -> np.ndarray:
    """Min-max to [0, 1]; all zeros when the raw image is constant."""
    lo = raw.min()
    hi = raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def _resample_linear(band: np.ndarray, length: int) -> np.ndarray:
    if band.size == length:
        return band.astype(np.float64)
    if band.size == 1:
        return np.full(length, float(band[0]))
    return np.interp(np.linspace(0.0, band.size - 1, length),
                     np.arange(band.size), band)


def wpd_image(window_signal, level: int = 3, fb=None, channel: str = "",
              source_window: Optional[Window] = None) -> WpdImage:
    """Level-`level` WPD laid out as row blocks of a 64x64 image.

    Each of the 2^level subbands (natural order) is linearly resampled to
    4096 / 2^level points and fills its own contiguous block of rows in
    row-major order; the assembled image is then min-max normalized.
    """
    tree = wavelets.wpd(window_signal, level, fb)
    n_bands = len(tree.subbands)
    rows_per_band = IMAGE_SIDE // n_bands
    if rows_per_band < 1:
        raise ValueError(f"level {level} yields more subbands than image rows")
    per_band = rows_per_band * IMAGE_SIDE
    raw = np.empty((IMAGE_SIDE, IMAGE_SIDE))
    for b, band in enumerate(tree.subbands):
        block = _resample_linear(band, per_band)
        raw[b * rows_per_band:(b + 1) * rows_per_band, :] = block.reshape(
            rows_per_band, IMAGE_SIDE)
    return WpdImage(pixels=normalize_image(raw), channel=channel,
                    source_window=source_window)


@dataclass
class LabeledSample:
    """Paired-channel images with a normalized RUL label in [0, 1].

    The label is quantized to float32 so that dataset containers
    round-trip bit-exactly.
    """

    hor: WpdImage
    ver: WpdImage
    label: float
    bearing_id: str = ""

    def __post_init__(self):
        self.label = float(np.float32(self.label))
        if not 0.0 <= self.label <= 1.0:
            raise ValueError(f"label {self.label} outside [0, 1]")


def preprocess_record(record: BearingRecord, denoise_levels: int = 2,
                      savgol_window: int = 5, savgol_order: int = 2,
                      fb=None) -> BearingRecord:
    """Denoise every snapshot on both channels, identically.

    Wavelet soft-thresholding (universal rule) followed by Savitzky-Golay
    smoothing, per snapshot.
    """
    if fb is None:
        fb = wavelets.db5_filters()
    kernel = wavelets.savgol_kernel(savgol_window, savgol_order)
    cleaned = {}
    for name in CHANNELS:
        data = record.channel(name)
        out = np.empty_like(data)
        for i in range(record.n_snapshots):
            denoised = wavelets.wavelet_denoise(data[i], denoise_levels, fb)
            out[i] = wavelets.savgol_filter(denoised, kernel)
        cleaned[name] = out
    return BearingRecord(horizontal=cleaned["horizontal"],
                         vertical=cleaned["vertical"],
                         sample_rate_hz=record.sample_rate_hz,
                         snapshot_period_s=record.snapshot_period_s,
                         bearing_id=record.bearing_id,
                         condition_id=record.condition_id)


def build_dataset(record: BearingRecord, fpt: int, size: int = 10,
                  stride: int = 5, level: int = 3, denoise: bool = True,
                  fb=None):
    """Featurize every window whose last snapshot is at or past the FPT.

    Each retained window becomes one LabeledSample: both channels'
    concatenated (denoised) snapshots turned into WPD images, labeled with
    the RUL label of the window's final snapshot. Output is ordered by
    window start.
    """
    labels = assign_labels(record.n_snapshots, fpt)
    if denoise:
        record = preprocess_record(record, fb=fb)
    windows = [w for w in sliding_windows(record, size, stride) if w.last >= fpt]
    if not windows:
        raise NoPostFptWindows(f"no windows end at or after fpt {fpt}")
    samples = []
    for w in windows:
        sample_args = {}
        for name in CHANNELS:
            signal = record.channel(name)[w.start:w.start + w.size].reshape(-1)
            sample_args[name] = wpd_image(signal, level, fb, channel=name,
                                          source_window=w)
        samples.append(LabeledSample(hor=sample_args["horizontal"],
                                     ver=sample_args["vertical"],
                                     label=float(labels[w.last]),
                                     bearing_id=record.bearing_id))
    return samples
