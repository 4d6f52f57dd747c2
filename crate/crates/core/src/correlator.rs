//! Detection-time averaging and mergeable correlation statistics.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::grid::{slot_of, Axis, Field, Grid};

/// Time samples integrated by a detector, centered on `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionWindow {
    /// Time slots in the DFT layout.
    pub slots: Vec<usize>,
    pub tau_d: f64,
}

impl DetectionWindow {
    /// `max(1, round(tau_d / dt))` samples; `tau_d` longer than the grid's
    /// time window is rejected.
    pub fn new(grid: &Grid, tau_d: f64) -> Result<Self> {
        if !(tau_d.is_finite() && tau_d > 0.0) {
            return Err(Error::Config(format!("tau_D = {tau_d:e} s must be positive")));
        }
        if tau_d > grid.t_window() * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "tau_D = {tau_d:e} s exceeds the {:e} s time window",
                grid.t_window()
            )));
        }
        let n_t = grid.n_t();
        let len = ((tau_d / grid.dt()).round() as usize).clamp(1, n_t);
        let start = -((len / 2) as i64);
        let slots = (0..len as i64).map(|k| slot_of(start + k, n_t)).collect();
        Ok(DetectionWindow { slots, tau_d })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Number of ordered sample pairs `(t, t')` in the window with
    /// `t - t' = l`, for `l` in the DFT layout of length `n_t`.
    pub fn lag_multiplicity(&self, n_t: usize) -> Vec<f64> {
        let len = self.len() as i64;
        let mut mult = vec![0.0; n_t];
        for l in -(len - 1)..len {
            mult[slot_of(l, n_t)] += (len - l.abs()) as f64;
        }
        mult
    }
}

/// Time-averaged intensity per pixel minus `offset`.
///
/// `offset` is the Wigner vacuum contribution (1/2 per sample for quantum
/// fields, 0 for classical fields).
pub fn detect(grid: &Grid, field: &Field, window: &DetectionWindow, offset: f64) -> Result<Vec<f64>> {
    if field.domain.is_spectral(Axis::Space) || field.domain.is_spectral(Axis::Time) {
        return Err(Error::Logic("detection needs an (x, t) field".into()));
    }
    let n_x = grid.n_x();
    let mut out = vec![0.0; n_x];
    for &jt in &window.slots {
        let row = &field.values[jt * n_x..(jt + 1) * n_x];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a.norm_sqr();
        }
    }
    let norm = window.len() as f64;
    out.iter_mut().for_each(|v| *v = *v / norm - offset);
    Ok(out)
}

/// Running sums for the covariance between one point detector (`a`) and
/// every pixel of a detector array (`b`).
#[derive(Clone, Debug, PartialEq)]
pub struct CorrAccumulator {
    pub count: u64,
    pub sum_a: f64,
    pub sum_a2: f64,
    pub sum_b: Vec<f64>,
    pub sum_b2: Vec<f64>,
    pub sum_ab: Vec<f64>,
    pub sum_a2b: Vec<f64>,
    pub sum_ab2: Vec<f64>,
    pub sum_a2b2: Vec<f64>,
}

/// Finalized statistics, one entry per array pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrResult {
    pub count: u64,
    /// Fluctuation correlation `<I_a I_b> - <I_a><I_b>`.
    pub g: Vec<f64>,
    /// Jackknife standard error of `g`.
    pub stderr: Vec<f64>,
    /// `<I_a><I_b>`.
    pub background: Vec<f64>,
    /// `<I_a I_b>`.
    pub full: Vec<f64>,
    pub mean_array: Vec<f64>,
    pub mean_point: f64,
}

impl CorrResult {
    /// `g` divided by its maximum.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        let peak = self.g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(peak > 0.0) {
            return Err(Error::Statistics("correlation has no positive maximum".into()));
        }
        Ok(self.g.iter().map(|v| v / peak).collect())
    }
}

impl CorrAccumulator {
    pub fn new(pixels: usize) -> Self {
        CorrAccumulator {
            count: 0,
            sum_a: 0.0,
            sum_a2: 0.0,
            sum_b: vec![0.0; pixels],
            sum_b2: vec![0.0; pixels],
            sum_ab: vec![0.0; pixels],
            sum_a2b: vec![0.0; pixels],
            sum_ab2: vec![0.0; pixels],
            sum_a2b2: vec![0.0; pixels],
        }
    }

    pub fn pixels(&self) -> usize {
        self.sum_b.len()
    }

    pub fn accumulate(&mut self, array: &[f64], point: f64) -> Result<()> {
        if array.len() != self.pixels() {
            return Err(Error::Logic(format!(
                "intensity array has {} pixels, accumulator has {}",
                array.len(),
                self.pixels()
            )));
        }
        let a = point;
        let a2 = a * a;
        self.count += 1;
        self.sum_a += a;
        self.sum_a2 += a2;
        for (j, &b) in array.iter().enumerate() {
            let b2 = b * b;
            self.sum_b[j] += b;
            self.sum_b2[j] += b2;
            self.sum_ab[j] += a * b;
            self.sum_a2b[j] += a2 * b;
            self.sum_ab2[j] += a * b2;
            self.sum_a2b2[j] += a2 * b2;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &CorrAccumulator) -> Result<()> {
        if other.pixels() != self.pixels() {
            return Err(Error::Logic("merging accumulators of different size".into()));
        }
        self.count += other.count;
        self.sum_a += other.sum_a;
        self.sum_a2 += other.sum_a2;
        let pairs = [
            (&mut self.sum_b, &other.sum_b),
            (&mut self.sum_b2, &other.sum_b2),
            (&mut self.sum_ab, &other.sum_ab),
            (&mut self.sum_a2b, &other.sum_a2b),
            (&mut self.sum_ab2, &other.sum_ab2),
            (&mut self.sum_a2b2, &other.sum_a2b2),
        ];
        for (dst, src) in pairs {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
        Ok(())
    }

    /// Unbiased covariance with a leave-one-out jackknife error evaluated in
    /// closed form from the stored power sums.
    pub fn finalize(&self) -> Result<CorrResult> {
        if self.count < 2 {
            return Err(Error::Statistics(format!(
                "{} pulses accumulated; at least 2 are needed for G",
                self.count
            )));
        }
        let n = self.count as f64;
        let k1 = 1.0 / (n - 1.0);
        let k2 = n / (n - 1.0);
        let a_sum = self.sum_a;
        let mean_point = a_sum / n;
        let m = self.pixels();
        let mut out = CorrResult {
            count: self.count,
            g: Vec::with_capacity(m),
            stderr: Vec::with_capacity(m),
            background: Vec::with_capacity(m),
            full: Vec::with_capacity(m),
            mean_array: Vec::with_capacity(m),
            mean_point,
        };
        for j in 0..m {
            let b_sum = self.sum_b[j];
            let p = self.sum_ab[j];
            let mean_b = b_sum / n;
            out.g.push(k2 * (p / n - mean_point * mean_b));
            out.background.push(mean_point * mean_b);
            out.full.push(p / n);
            out.mean_array.push(mean_b);

            let sy = 2.0 * k1 * a_sum * b_sum - k2 * p;
            let sy2 = k1 * k1
                * (a_sum * a_sum * self.sum_b2[j]
                    + 2.0 * a_sum * b_sum * p
                    + b_sum * b_sum * self.sum_a2)
                - 2.0 * k1 * k2 * (a_sum * self.sum_ab2[j] + b_sum * self.sum_a2b[j])
                + k2 * k2 * self.sum_a2b2[j];
            if self.count == 2 {
                // a leave-one-out covariance of one pulse is undefined
                out.stderr.push(f64::INFINITY);
                continue;
            }
            let spread = (sy2 - sy * sy / n).max(0.0);
            let var = (n - 1.0) / n * spread / ((n - 2.0) * (n - 2.0));
            out.stderr.push(var.sqrt());
        }
        Ok(out)
    }
}

/// `(max - min) / (max + min)` over `window`, negative values clipped to 0.
pub fn visibility(pattern: &[f64], window: Range<usize>) -> Result<f64> {
    let slice = pattern
        .get(window.clone())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Logic(format!("window {window:?} outside a {}-point pattern", pattern.len())))?;
    let clipped = slice.iter().map(|v| v.max(0.0));
    let max = clipped.clone().fold(0.0, f64::max);
    let min = clipped.fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        return Err(Error::Statistics("visibility of an all-zero pattern is undefined".into()));
    }
    Ok((max - min) / (max + min))
}

/// Relative strength of the spatial frequency `1 / period` (in samples)
/// against the mean level of `pattern`.
pub fn frequency_component(pattern: &[f64], period: f64) -> Result<f64> {
    let total: f64 = pattern.iter().sum();
    if total.abs() == 0.0 || !(period > 0.0) {
        return Err(Error::Statistics("frequency component of an empty pattern".into()));
    }
    let w = 2.0 * std::f64::consts::PI / period;
    let (re, im) = pattern.iter().enumerate().fold((0.0, 0.0), |(re, im), (k, v)| {
        let ph = w * k as f64;
        (re + v * ph.cos(), im - v * ph.sin())
    });
    Ok(re.hypot(im) / total.abs())
}
