//! Metric cross-check against the independently written float64 reference
//! (tools/oracle_baseline.py). Inputs are regenerated from the shared LCG so
//! both sides score bit-identical images.

use srlab::eval::{msssim, psnr, ssim};
use srlab::Tensor;

fn lcg_stream(seed: u64, n: usize) -> Vec<f64> {
    let mut state = seed;
    (0..n)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

#[test]
fn ssim_and_psnr_match_reference() {
    let a = Tensor::new(1, 48, 40, lcg_stream(7, 48 * 40)).unwrap();
    let noise = lcg_stream(9, 48 * 40);
    let b = Tensor::new(
        1,
        48,
        40,
        a.data()
            .iter()
            .zip(&noise)
            .map(|(&v, &n)| (0.75 * v + 0.1 + 0.08 * n).clamp(0.0, 1.0))
            .collect(),
    )
    .unwrap();
    let s = ssim(&a, &b).unwrap();
    assert!((s - 0.954854952564755).abs() < 1e-9, "ssim {}", s);
    let p = psnr(&a, &b).unwrap();
    assert!((p - 22.376742555757264).abs() < 1e-9, "psnr {}", p);
}

#[test]
fn msssim_matches_reference() {
    let a = Tensor::new(1, 200, 184, lcg_stream(11, 200 * 184)).unwrap();
    let noise = lcg_stream(13, 200 * 184);
    let b = Tensor::new(
        1,
        200,
        184,
        a.data()
            .iter()
            .zip(&noise)
            .map(|(&v, &n)| (v + 0.05 * (n - 0.5)).clamp(0.0, 1.0))
            .collect(),
    )
    .unwrap();
    let ms = msssim(&a, &b).unwrap();
    assert_eq!(ms.levels, 5);
    assert!((ms.value - 0.998826257604074).abs() < 1e-9, "msssim {}", ms.value);
    let s = ssim(&a, &b).unwrap();
    assert!((s - 0.998718478059206).abs() < 1e-9, "ssim {}", s);
}
