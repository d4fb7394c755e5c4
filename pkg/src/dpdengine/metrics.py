"""Signal-quality metrics: Welch PSD, ACPR, EVM, NMSE, PAPR.

PSD convention: ``power`` holds linear power per bin on fftshift-centered
frequencies, so summing bins in a band integrates power and the full sum
equals the (window-weighted) mean |x|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import OfdmConfig, Waveform, _occupied_bins

__all__ = ["PsdEstimate", "MetricReport", "psd_welch", "acpr", "evm", "nmse", "papr"]

NMSE_FLOOR_DB = -300.0


@dataclass
class PsdEstimate:
    freqs: np.ndarray       # Hz, centered at 0, strictly increasing
    power: np.ndarray       # linear power per bin
    resolution_bw: float    # Hz per bin


@dataclass
class MetricReport:
    acpr_left_db: float
    acpr_right_db: float
    evm_db: float | None
    nmse_db: float | None
    papr_db: float

    @property
    def acpr_worst_db(self) -> float:
        return max(self.acpr_left_db, self.acpr_right_db)


def psd_welch(
    wave: Waveform,
    segment_len: int = 1024,
    overlap: float = 0.5,
    window: str = "hann",
) -> PsdEstimate:
    """Two-sided Welch PSD of the complex baseband."""
    x = np.asarray(wave.samples, dtype=np.complex128)
    if x.size < segment_len:
        raise ValueError(f"waveform ({x.size}) shorter than segment ({segment_len})")
    if window == "hann":
        w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(segment_len) / segment_len)
    elif window == "rect":
        w = np.ones(segment_len)
    else:
        raise ValueError(f"unknown window {window!r}")

    step = max(1, int(round(segment_len * (1.0 - overlap))))
    starts = range(0, x.size - segment_len + 1, step)
    acc = np.zeros(segment_len, dtype=np.float64)
    count = 0
    for s in starts:
        seg = x[s:s + segment_len] * w
        acc += np.abs(np.fft.fft(seg)) ** 2
        count += 1
    power = acc / (count * segment_len * np.sum(w * w))
    freqs = np.fft.fftshift(np.fft.fftfreq(segment_len, d=1.0 / wave.sample_rate_hz))
    return PsdEstimate(freqs, np.fft.fftshift(power), wave.sample_rate_hz / segment_len)


def acpr(
    wave: Waveform,
    channel_bw: float,
    adjacent_offset: float | None = None,
    segment_len: int = 1024,
) -> tuple[float, float]:
    """Adjacent-channel power ratio in dBc: (left, right).

    Adjacent bands have the main channel's width, centered at +/- offset
    (default: one channel bandwidth, i.e. contiguous adjacency).
    """
    offset = channel_bw if adjacent_offset is None else adjacent_offset
    if wave.sample_rate_hz < 2.0 * (offset + channel_bw / 2.0):
        raise ValueError("adjacent band exceeds Nyquist range")
    est = psd_welch(wave, segment_len=segment_len)

    def band_power(center: float) -> float:
        lo, hi = center - channel_bw / 2.0, center + channel_bw / 2.0
        mask = (est.freqs >= lo) & (est.freqs < hi)
        return float(np.sum(est.power[mask]))

    p_main = band_power(0.0)
    if p_main <= 0.0:
        raise ValueError("main channel power is zero")
    left = 10.0 * np.log10(max(band_power(-offset), 1e-300) / p_main)
    right = 10.0 * np.log10(max(band_power(+offset), 1e-300) / p_main)
    return float(left), float(right)


def evm(measured: Waveform, cfg: OfdmConfig, reference_symbols: np.ndarray) -> float:
    """EVM in dB after OFDM demodulation and a single-tap LS equalizer.

    Demodulates (drop CP, FFT, occupied bins), fits one complex scalar that
    maps measured constellation points onto the references, and reports
    20*log10(rms(error)/rms(reference)).
    """
    x = np.asarray(measured.samples, dtype=np.complex128)
    sps = cfg.samples_per_symbol
    if x.size % sps != 0:
        raise ValueError(f"length {x.size} is not a multiple of the symbol span {sps}")
    nsym = x.size // sps
    ref = np.asarray(reference_symbols, dtype=np.complex128)
    if ref.shape != (nsym, cfg.occupied_subcarriers):
        raise ValueError("reference symbol matrix shape mismatch")

    nfft = cfg.fft_size * cfg.oversample
    frames = x.reshape(nsym, sps)[:, cfg.cp_len * cfg.oversample:]
    spec = np.fft.fft(frames, axis=1) * (np.sqrt(cfg.occupied_subcarriers) / nfft)
    meas = spec[:, _occupied_bins(cfg)].ravel()
    refv = ref.ravel()

    denom = np.vdot(meas, meas).real
    if denom == 0.0:
        raise ValueError("measured signal has zero in-band power")
    c = np.vdot(meas, refv) / denom  # LS fit: minimize ||c*meas - ref||
    err = c * meas - refv
    ratio = np.sqrt(np.mean(np.abs(err) ** 2) / np.mean(np.abs(refv) ** 2))
    return float(max(20.0 * np.log10(max(ratio, 0.0)), NMSE_FLOOR_DB)) if ratio > 0 \
        else NMSE_FLOOR_DB


def nmse(y: Waveform | np.ndarray, ref: Waveform | np.ndarray) -> float:
    """10*log10(sum|y-ref|^2 / sum|ref|^2), floored at -300 dB."""
    ya = np.asarray(y.samples if isinstance(y, Waveform) else y, dtype=np.complex128)
    ra = np.asarray(ref.samples if isinstance(ref, Waveform) else ref,
                    dtype=np.complex128)
    if ya.shape != ra.shape:
        raise ValueError("length mismatch")
    p_ref = np.sum(np.abs(ra) ** 2)
    if p_ref == 0.0:
        raise ValueError("reference is all-zero")
    p_err = np.sum(np.abs(ya - ra) ** 2)
    if p_err == 0.0:
        return NMSE_FLOOR_DB
    return float(max(10.0 * np.log10(p_err / p_ref), NMSE_FLOOR_DB))


def papr(wave: Waveform | np.ndarray) -> float:
    """Peak-to-average power ratio in dB."""
    x = np.asarray(wave.samples if isinstance(wave, Waveform) else wave,
                   dtype=np.complex128)
    if x.size == 0:
        raise ValueError("waveform is empty")
    p = np.abs(x) ** 2
    mean = np.mean(p)
    if mean == 0.0:
        raise ValueError("waveform is all-zero")
    return float(10.0 * np.log10(np.max(p) / mean))
