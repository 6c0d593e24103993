//! Shared inputs for the benchmarks under `benches/`.

use tinybird_core::tinyml::Models;

pub const SAMPLE_RATE: u32 = 16_000;

/// Linear chirp from 500 Hz to 6 kHz at half scale, `n` samples long.
pub fn chirp(n: usize) -> Vec<i16> {
    let sr = f64::from(SAMPLE_RATE);
    let secs = n as f64 / sr;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let phase = 2.0 * std::f64::consts::PI * (500.0 * t + (6000.0 - 500.0) * t * t / (2.0 * secs));
            (16_000.0 * phase.sin()) as i16
        })
        .collect()
}

pub fn fixture_models() -> Models {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/model.tbm");
    let bytes = std::fs::read(path).expect("fixture present");
    Models::from_bytes(&bytes).expect("fixture loads").0
}
