//! Time-domain signals, WAV persistence, convolution and the STFT engine.
//!
//! Everything in the pipeline runs at [`SAMPLE_RATE`]. Spectrogram helpers
//! operate on plain slices so the autodiff layer can reuse them for its
//! spectral primitives.

mod conv;
mod fft;
mod stft;
mod wav;
mod waveform;

pub use conv::{convolve, convolve_direct, convolve_fft, correlate_for_kernel};
pub use stft::{
    istft, istft_adjoint_frames, istft_frames, stft, stft_adjoint_frames, stft_frames,
    ComplexSpectrogram, StftConfig, WindowKind,
};
pub use wav::{quantize, read_wav, write_wav};
pub use waveform::{db_ratio, energy, gain_for_ratio, Waveform};

pub use realfft::num_complex::Complex64;

/// Pipeline sample rate in Hz.
pub const SAMPLE_RATE: u32 = 16_000;
