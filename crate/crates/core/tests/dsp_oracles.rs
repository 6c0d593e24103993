mod common;

use common::{naive_dft, reference_mfcc};
use num_complex::Complex;
use proptest::prelude::*;
use tinybird_core::dsp::{spectrogram, Fft, MfccExtractor, DB_FLOOR};

const SR: u32 = 16_000;

fn sine(freq: f64, amp: f64, n: usize) -> Vec<i16> {
    (0..n)
        .map(|t| (amp * (2.0 * std::f64::consts::PI * freq * t as f64 / f64::from(SR)).sin()).round() as i16)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_matches_direct_dft(log_n in 1u32..9, seed in proptest::collection::vec(-1.0f64..1.0, 1024)) {
        let n = 1usize << log_n;
        let re = &seed[..n];
        let im = &seed[512..512 + n];
        let mut buf: Vec<Complex<f64>> = re.iter().zip(im).map(|(&a, &b)| Complex::new(a, b)).collect();
        Fft::<f64>::new(n).unwrap().process(&mut buf);
        let (er, ei) = naive_dft(re, im);
        for k in 0..n {
            prop_assert!((buf[k].re - er[k]).abs() < 1e-9 * n as f64);
            prop_assert!((buf[k].im - ei[k]).abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn real_forward_is_hermitian_half(input in proptest::collection::vec(-1.0f32..1.0, 256)) {
        let fft = Fft::<f32>::new(256).unwrap();
        let half = fft.real_forward(&input);
        prop_assert_eq!(half.len(), 129);
        let re: Vec<f64> = input.iter().map(|&v| f64::from(v)).collect();
        let (er, ei) = naive_dft(&re, &[0.0; 256]);
        for (k, c) in half.iter().enumerate() {
            prop_assert!((f64::from(c.re) - er[k]).abs() < 1e-3);
            prop_assert!((f64::from(c.im) - ei[k]).abs() < 1e-3);
        }
    }

    #[test]
    fn mfcc_within_two_steps_of_reference(block in proptest::collection::vec(any::<i16>(), 256), shift in 0u32..15) {
        // shift spreads the level over ~90 dB of dynamic range
        let block: Vec<i16> = block.iter().map(|&s| s >> shift).collect();
        let got = MfccExtractor::standard(256, SR).unwrap().compute(&block).unwrap();
        let want = reference_mfcc(&block, f64::from(SR));
        for k in 0..16 {
            prop_assert!((f64::from(got.coeffs[k]) - want[k] * 256.0).abs() <= 2.0, "coeff {k}");
        }
    }

    #[test]
    fn spectrogram_frame_count(len in 0usize..5000, hop in 1usize..=256) {
        let pcm = vec![0i16; len];
        let s = spectrogram(&pcm, SR, 256, hop).unwrap();
        let expected = if len <= 256 { 1 } else { 1 + (len - 256).div_ceil(hop) };
        prop_assert_eq!(s.n_frames, expected);
        prop_assert_eq!(s.n_bins, 129);
        prop_assert!(s.db.iter().all(|&v| v == DB_FLOOR));
    }
}

#[test]
fn spectrogram_ridge_follows_tone() {
    for bin in [10usize, 32, 64, 100] {
        let freq = bin as f64 * f64::from(SR) / 256.0;
        let s = spectrogram(&sine(freq, 20_000.0, 4096), SR, 256, 128).unwrap();
        assert!(s.ridge().iter().all(|&b| b == bin), "bin {bin}");
        // full-scale reference: a -4.3 dB sine (20000/32768) peaks near that level
        let peak = s.get(bin, 3);
        assert!((peak - 20.0 * (20_000.0f64 / 32_768.0).log10()).abs() < 0.05, "peak {peak}");
    }
}

#[test]
fn spectrogram_rejects_bad_hop() {
    assert!(spectrogram(&[0; 512], SR, 256, 0).is_err());
    assert!(spectrogram(&[0; 512], SR, 256, 257).is_err());
}

#[test]
fn mfcc_separates_tones_from_noise_floor() {
    let ex = MfccExtractor::standard(256, SR).unwrap();
    let silent = ex.compute(&[0; 256]).unwrap();
    let tone = ex.compute(&sine(2000.0, 8000.0, 256)).unwrap();
    // c0 carries overall log energy
    assert!(tone.coeffs[0] > silent.coeffs[0]);
    for k in 1..16 {
        assert_eq!(silent.coeffs[k], 0, "flat log spectrum has no shape");
    }
}
