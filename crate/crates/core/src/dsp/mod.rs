//! Block-level spectral features.

mod fft;
mod mel;
mod mfcc;
mod spectrogram;

pub use fft::Fft;
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank, DEFAULT_F_MAX, DEFAULT_F_MIN, DEFAULT_N_FILTERS};
pub use mfcc::{
    fft_magnitude, magnitude_spectrum, mfcc, MfccExtractor, MfccVector, Window, LOG_FLOOR,
    MFCC_FRAC_BITS, MFCC_ONE, N_MFCC,
};
pub use spectrogram::{spectrogram, Spectrogram, DB_FLOOR};
