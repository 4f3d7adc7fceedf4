use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::HrrpSequence;

/// Mean squared amplitude over all bins.
pub fn mean_power(bins: &[f64]) -> f64 {
    if bins.is_empty() {
        return 0.0;
    }
    bins.iter().map(|b| b * b).sum::<f64>() / bins.len() as f64
}

/// Adds circular complex white Gaussian noise at `snr_db` and re-detects the
/// magnitude.
///
/// Noise power is `mean_power(clean) / 10^(snr_db / 10)`. The input carries
/// only magnitudes; since circular noise is phase-invariant, `|x + n|` with `x`
/// real has the same distribution as `|x e^{j psi} + n|`, so this equals adding
/// noise to the complex profile. `snr_db = +inf` returns the input unchanged.
pub fn add_noise(hrrp: &HrrpSequence, snr_db: f64, seed: u64) -> HrrpSequence {
    if snr_db == f64::INFINITY {
        return hrrp.clone();
    }
    let noise_power = mean_power(&hrrp.bins) / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bins = hrrp
        .bins
        .iter()
        .map(|&x| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            (Complex64::new(x, 0.0) + Complex64::new(sigma * re, sigma * im)).norm()
        })
        .collect();
    HrrpSequence {
        bins,
        range_resolution: hrrp.range_resolution,
        snr_db: Some(snr_db),
        label_d: hrrp.label_d,
    }
}
