//! Host-side implementation of a bird-borne acoustic sensor node's data path.
//!
//! * [`audio`]: block framing and the voiced/silent gate
//! * [`codecs`]: ADPCM, DM and CFDM with packet-resumable state
//! * [`protocol`]: silence-counter packet stream and time-domain reconstruction
//! * [`dsp`]: FFT, Mel filterbank, MFCCs and spectrograms
//! * [`tinyml`]: int8 syllable detector and classifier, `.tbm` weight files
//! * [`pipeline`]: on-line syllable segmentation, classification and SER
//! * [`energy`]: current and battery lifetime model
//! * [`corpus`]: deterministic synthetic song generator

pub mod audio;
pub mod codecs;
pub mod corpus;
pub mod dsp;
pub mod energy;
mod error;
pub mod pipeline;
pub mod protocol;
pub mod tinyml;
pub mod wav;

pub use audio::{frame_signal, gate_block, AudioBlock, GateDecision, GateMode, GateState};
pub use codecs::{CodecId, CodecState};
pub use dsp::{MelFilterbank, MfccVector};
pub use error::{Error, Result};
pub use pipeline::SyllableEvent;
pub use protocol::{Packet, StreamHeader};
pub use tinyml::{ClassifierModel, DetectorModel, Models};
