//! Photon-number statistics of the twin-beam state.
//!
//! Each `(q, -q)` mode pair holds equal photon numbers drawn from the
//! geometric (Bose-Einstein) law `<n>^n / (1 + <n>)^(n + 1)`; either beam on
//! its own is thermal.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::engine::{apply_planewave_gain, sample_vacuum};
use crate::error::{Error, Result};
use crate::gain::GainTable;

/// Tail mass below which the photon-number distribution is truncated.
pub const TAIL_MASS: f64 = 1e-12;

/// Probability of `n` photons in a thermal mode of mean `mean_n`.
pub fn thermal_pmf(n: i64, mean_n: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::Domain(format!("photon number {n} is negative")));
    }
    if !(mean_n >= 0.0 && mean_n.is_finite()) {
        return Err(Error::Domain(format!("mean photon number {mean_n} is invalid")));
    }
    if mean_n == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let ln = n as f64 * (mean_n / (1.0 + mean_n)).ln() - (1.0 + mean_n).ln();
    Ok(ln.exp())
}

/// Draws the common photon number `(n_S, n_I)` of one mirror-mode pair.
///
/// Inverse CDF of the geometric law: `P(N >= n) = r^n`, `r = <n>/(1+<n>)`.
pub fn sample_pair_numbers<R: Rng + ?Sized>(mean_n: f64, rng: &mut R) -> (u64, u64) {
    let n = sample_thermal(mean_n, rng);
    (n, n)
}

pub(crate) fn sample_thermal<R: Rng + ?Sized>(mean_n: f64, rng: &mut R) -> u64 {
    if mean_n <= 0.0 {
        return 0;
    }
    let r = mean_n / (1.0 + mean_n);
    // u in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    (u.ln() / r.ln()).floor() as u64
}

/// Thermal photon-number law of one mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeStatistics {
    pub mean_n: f64,
}

impl ModeStatistics {
    pub fn new(mean_n: f64) -> Result<Self> {
        if !(mean_n >= 0.0 && mean_n.is_finite()) {
            return Err(Error::Domain(format!("mean photon number {mean_n} is invalid")));
        }
        Ok(ModeStatistics { mean_n })
    }

    /// Smallest `n_max` whose neglected tail `r^(n_max + 1)` is below [`TAIL_MASS`].
    pub fn n_max(&self) -> u64 {
        if self.mean_n == 0.0 {
            return 0;
        }
        let r = self.mean_n / (1.0 + self.mean_n);
        ((TAIL_MASS.ln() / r.ln()).ceil() as u64).saturating_sub(1).max(1)
    }

    pub fn tail_mass(&self, n_max: u64) -> f64 {
        let r = self.mean_n / (1.0 + self.mean_n);
        r.powf(n_max as f64 + 1.0)
    }

    /// Truncated pmf `p(0..=n_max)`.
    pub fn pmf(&self) -> Vec<f64> {
        (0..=self.n_max())
            .map(|n| thermal_pmf(n as i64, self.mean_n).unwrap_or(0.0))
            .collect()
    }
}

/// Outcome of [`reduced_beam_is_thermal`].
#[derive(Clone, Debug)]
pub struct ThermalReport {
    pub samples: usize,
    /// Pearson statistic of normalized intensities against `Exp(1)`.
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Pooled sample mean of `|alpha|^2 / (<n> + 1/2)`; 1 for a thermal beam.
    pub mean_ratio: f64,
    /// Largest |z| of the per-`q` vacuum-subtracted photon number against the table.
    pub max_profile_z: f64,
}

/// Checks that one beam alone carries thermal statistics.
///
/// Draws Wigner realizations, normalizes every signal-mode intensity by its
/// expected mean `<n> + 1/2`, and tests the pool against the unit exponential
/// with equiprobable bins. Per-`q` means are also compared with the table.
pub fn reduced_beam_is_thermal<R: Rng + ?Sized>(
    table: &GainTable,
    rng: &mut R,
    n_samples: usize,
) -> Result<ThermalReport> {
    if n_samples < 1000 {
        return Err(Error::Statistics(format!(
            "{n_samples} samples are too few for a goodness-of-fit test (need >= 1000)"
        )));
    }
    let grid = &table.grid;
    let n_x = grid.n_x();
    let per_draw = grid.len();
    let draws = n_samples.div_ceil(per_draw);

    let bins = 20usize;
    let mut counts = vec![0u64; bins];
    let mut total = 0usize;
    let mut ratio_sum = 0.0;
    let mut q_sum = vec![0.0; n_x];
    let mut q_expected = vec![0.0; n_x];
    let mut q_var = vec![0.0; n_x];
    let mut q_count = vec![0usize; n_x];

    for _ in 0..draws {
        let out = apply_planewave_gain(&sample_vacuum(grid, rng), table)?;
        for (i, a) in out.signal.values.iter().enumerate() {
            let mean = table.mean_n_signal(i) + 0.5;
            let w = a.norm_sqr();
            let jx = i % n_x;
            q_sum[jx] += w - 0.5;
            q_expected[jx] += mean - 0.5;
            q_var[jx] += mean * mean;
            q_count[jx] += 1;
            if total < n_samples {
                let y = w / mean;
                ratio_sum += y;
                // Exp(1) quantile bins: k/bins <= 1 - e^{-y}
                let cdf = 1.0 - (-y).exp();
                let b = ((cdf * bins as f64) as usize).min(bins - 1);
                counts[b] += 1;
                total += 1;
            }
        }
    }
    let expected = total as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = bins - 1;
    let p_value = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Numeric(e.to_string()))?
        .sf(chi2);
    let max_profile_z = (0..n_x)
        .map(|j| {
            let sd = q_var[j].sqrt();
            ((q_sum[j] - q_expected[j]) / sd).abs()
        })
        .fold(0.0, f64::max);
    Ok(ThermalReport {
        samples: total,
        chi2,
        dof,
        p_value,
        mean_ratio: ratio_sum / total as f64,
        max_profile_z,
    })
}
