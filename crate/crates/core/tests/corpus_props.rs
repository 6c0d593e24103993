use proptest::prelude::*;
use tinybird_core::audio::{frame_signal, gate_stream, GateState};
use tinybird_core::corpus::{chi_squared_uniform, generate, CorpusConfig, TEMPLATES};
use tinybird_core::dsp::MfccExtractor;
use tinybird_core::wav::wav_bytes;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn events_are_ordered_and_in_bounds(seed in any::<u64>(), n in 1usize..6, snr in 10.0f64..40.0) {
        let c = generate(&CorpusConfig::new(seed, n, snr)).unwrap();
        let sr = f64::from(c.sample_rate);
        for e in &c.events {
            prop_assert!(e.onset_sample < e.offset_sample && e.offset_sample <= c.samples.len());
            prop_assert!((e.label as usize) < TEMPLATES.len());
            let ms = (e.offset_sample - e.onset_sample) as f64 * 1000.0 / sr;
            prop_assert!((30.0..=300.0).contains(&ms), "duration {ms} ms");
        }
        for w in c.events.windows(2) {
            let gap_ms = (w[1].onset_sample - w[0].offset_sample) as f64 * 1000.0 / sr;
            prop_assert!(gap_ms >= 5.0 - 1e-9, "gap {gap_ms} ms");
        }
    }

    #[test]
    fn same_seed_same_bytes(seed in any::<u64>()) {
        let a = generate(&CorpusConfig::new(seed, 3, 20.0)).unwrap();
        let b = generate(&CorpusConfig::new(seed, 3, 20.0)).unwrap();
        prop_assert_eq!(wav_bytes(&a.samples, 16_000).unwrap(), wav_bytes(&b.samples, 16_000).unwrap());
        prop_assert_eq!(a.events_jsonl(), b.events_jsonl());
    }
}

#[test]
fn different_seeds_differ() {
    let a = generate(&CorpusConfig::new(1, 3, 20.0)).unwrap();
    let b = generate(&CorpusConfig::new(2, 3, 20.0)).unwrap();
    assert_ne!(a.samples, b.samples);
}

#[test]
fn noiseless_gate_recovers_voicing() {
    let c = generate(&CorpusConfig::new(11, 40, f64::INFINITY)).unwrap();
    let blocks = frame_signal(&c.samples, 256, 16_000).unwrap();
    let gated = gate_stream(&blocks, GateState::fixed(), 1.0);
    let measured = gated.iter().filter(|d| d.is_voiced()).count() as f64 / gated.len() as f64;
    let truth = c.voiced_fraction(256);
    assert!((measured - truth).abs() <= 0.01, "gate {measured:.4} vs labels {truth:.4}");
}

#[test]
fn classes_are_balanced() {
    let c = generate(&CorpusConfig::new(5, 100, 20.0)).unwrap();
    // 99th percentile of chi-squared with 7 degrees of freedom
    let chi2 = chi_squared_uniform(&c.class_histogram());
    assert!(chi2 < 18.48, "chi2 {chi2}");
}

#[test]
fn syllable_level_follows_snr() {
    let clean = generate(&CorpusConfig::new(9, 10, f64::INFINITY)).unwrap();
    let noisy = generate(&CorpusConfig::new(9, 10, 20.0)).unwrap();
    // in the gaps, the clean corpus is exactly zero and the noisy one has
    // sigma = 4000 / 10
    let gap: Vec<usize> = (0..clean.events[0].onset_sample).collect();
    assert!(gap.iter().all(|&i| clean.samples[i] == 0));
    let var = gap.iter().map(|&i| f64::from(noisy.samples[i]).powi(2)).sum::<f64>() / gap.len() as f64;
    assert!((var.sqrt() - 400.0).abs() < 20.0, "noise rms {}", var.sqrt());
}

#[test]
fn templates_have_distinct_mean_features() {
    let ex = MfccExtractor::standard(256, 16_000).unwrap();
    let c = generate(&CorpusConfig::new(12, 60, f64::INFINITY)).unwrap();
    let mut sums = vec![[0.0f64; 16]; TEMPLATES.len()];
    let mut counts = vec![0usize; TEMPLATES.len()];
    for e in &c.events {
        let mid = (e.onset_sample + e.offset_sample) / 2 - 128;
        let f = ex.coefficients(&c.samples[mid..mid + 256]).unwrap();
        for k in 0..16 {
            sums[e.label as usize][k] += f[k];
        }
        counts[e.label as usize] += 1;
    }
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|v| v / n.max(1) as f64).collect())
        .collect();
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            let d: f64 = means[a].iter().zip(&means[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(d > 1.0, "classes {a} and {b} too close ({d:.3})");
        }
    }
}
