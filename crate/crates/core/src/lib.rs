//! Streaming vibration and acoustic analysis for in-situ monitoring of
//! filament 3D printers.
//!
//! The pipeline takes accelerometer and microphone samples in chunks of any
//! size and emits debounced condition events:
//!
//! * [`signal`]: channels, integer-microsecond timestamps, sliding windows.
//! * [`preprocess`]: linear-phase FIR band-pass and DC removal.
//! * [`features`]: mean, std, RMS, crest factor and kurtosis per window.
//! * [`spectral`]: FFT, spectra, spectrograms, peaks and harmonic series.
//! * [`classify`]: interval classifier, motion rules, debouncing, events.
//! * [`pipeline`]: [`pipeline::Monitor`], the whole chain behind a push API.
//! * [`simulate`]: seeded, labelled synthetic recordings.
//! * [`ingest`]: WAV, accelerometer CSV and the line-framed stream protocol.
//!
//! ```
//! use printsense::features::extract_features;
//! use printsense::signal::{ChannelConfig, Windower};
//!
//! let ch = ChannelConfig::acoustic(5000.0).unwrap();
//! let xs: Vec<f64> = (0..8192).map(|i| if i % 50 == 0 { 1.0 } else { 0.0 }).collect();
//! let mut w = Windower::new(ch, 2048, 1024, 0).unwrap();
//! for win in w.push_and_emit(&xs) {
//!     let fv = extract_features(&win);
//!     assert!(fv.ki > 10.0);
//! }
//! ```
//!
//! The guide in `book/` covers each stage in more depth; its listings run as
//! doc-tests of this crate.

pub mod features;
pub mod preprocess;
pub mod rng;
pub mod signal;
pub mod spectral;
pub mod classify;
pub mod config;
pub mod jsonl;
pub mod simulate;
pub mod ingest;
pub mod pipeline;
pub mod calibrate;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/signals.md")]
    mod signals {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/filtering.md")]
    mod filtering {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/monitoring.md")]
    mod monitoring {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
}
