"""Wavelet-domain denoising diffusion for 1-D audio."""
from ._backend import BACKEND
from .audio import SyntheticSpec, read_wav, synth_pair, write_wav
from .conditional import cond_sample, interpolation_schedule, reverse_coefficients
from .denoiser import ArchSpec, GaussianOracleDenoiser, TinyDenoiser, train_loop
from .diffusion import NoiseSchedule, forward_marginal, linear_schedule, reverse_step, sample
from .enhancer import EnhancedDenoiser, FrequencyBottleneckBlock, MultiLevelEnhancer
from .wavelets import (BASIS_NAMES, Waveform, WaveletBasis, WaveletPacket, basis_by_name,
                       decompose, dwt_single, idwt_single, reconstruct)

__version__ = "0.1.0"
