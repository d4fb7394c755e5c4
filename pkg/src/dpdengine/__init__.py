"""Fixed-point GRU digital pre-distortion engine.

Bit-accurate fixed-point GRU-DPD forward path, quantization-aware training
through a behavioral PA, OFDM signal generation, ACPR/EVM/NMSE/PAPR metrics,
and a cycle-level performance model of the PE-array accelerator.
"""

from .fxp import FxpFormat, FxpValue, Q2_10, quantize, dequantize, fxp_add, fxp_mul, fxp_dot
from .gru import DpdModel, GruWeights, FcWeights, HiddenState, dpd_forward, reset_state
from .quant import QuantConfig, fake_quantize, quantize_model, dpd_forward_fakequant
from .signals import Waveform, OfdmConfig, generate_ofdm
from .pa import PaModel, Dataset, pa_apply, make_default_pa, make_dataset, split_dataset
from .metrics import MetricReport, psd_welch, acpr, evm, nmse, papr
from .perf import PeArrayConfig, PerfReport, count_ops, schedule, throughput_report

__version__ = "0.1.0"
