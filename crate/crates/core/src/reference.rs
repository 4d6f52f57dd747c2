//! Quadrature oracles for the correlation function, classical mixture
//! samplers, and the biphoton coincidence mode.
//!
//! With `P(q, W) = <a_S(q, W) a_I(-q, -W)> = U_S(q, W) V_I(-q, -W)` and the
//! detector kernels `h~` of [`crate::optics::Kernels`]:
//!
//! * pure state: `G = | sum_q h~_S(x_S, q) h~_I(x_I, -q) P(q) |^2`,
//! * mixture W (number-correlated far-field pairs, random phases):
//!   `G = sum_q |h~_S(x_S, q)|^2 |h~_I(x_I, -q)|^2 |P(q)|^2`,
//! * mixture W' (number-correlated near-field pairs):
//!   `G = sum_x |h_S(x_S, x)|^2 |h_I(x_I, x)|^2 |P(0, 0)|^2`.
//!
//! The first follows from Gaussian moment factorization; `|P|^2 = <n>(<n> + 1)`
//! is the pair-number variance that both mixtures reproduce. The plain oracles
//! use the `W = 0` slice only. The `detected_*` variants evaluate the exact
//! expectation of the Monte-Carlo estimator, including the temporal modes
//! integrated by a finite detection window.

use num_complex::Complex64;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::correlator::DetectionWindow;
use crate::error::{Error, Result};
use crate::gain::GainTable;
use crate::grid::{mirror_index, Direction, Domain, Field, FieldPair, Grid};
use crate::optics::{Arm, ImagingSetup, Kernels, Scheme};
use crate::photon::sample_thermal;

/// Source state feeding the bench.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    Pure,
    W,
    WPrime,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Pure, Model::W, Model::WPrime];

    pub fn name(self) -> &'static str {
        match self {
            Model::Pure => "pure",
            Model::W => "W",
            Model::WPrime => "Wprime",
        }
    }

    /// Classical mixtures carry no vacuum noise.
    pub fn is_quantum(self) -> bool {
        self == Model::Pure
    }
}

/// Oracle curve over the detector-array pixels (DFT slot order).
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub model: Model,
    pub scheme: Scheme,
    /// Slot of the point detector.
    pub point_pixel: usize,
    /// Array-plane coordinates per slot.
    pub x: Vec<f64>,
    pub g: Vec<f64>,
}

impl OracleResult {
    pub fn peak(&self) -> f64 {
        self.g.iter().cloned().fold(0.0, f64::max)
    }
}

/// Pre-computed oracle ingredients for one setup and gain table.
pub struct Oracle<'a> {
    pub setup: &'a ImagingSetup,
    pub table: &'a GainTable,
    pub kernels: Kernels,
}

impl<'a> Oracle<'a> {
    pub fn new(setup: &'a ImagingSetup, table: &'a GainTable) -> Result<Self> {
        setup.validate(&table.grid)?;
        Ok(Oracle { setup, table, kernels: Kernels::new(&table.grid, setup) })
    }

    fn grid(&self) -> &Grid {
        &self.table.grid
    }

    /// Pair amplitudes `P(q)` on one frequency row.
    fn pair_row(&self, jt: usize) -> Vec<Complex64> {
        let g = self.grid();
        (0..g.n_x()).map(|m| self.table.exit_pair_amplitude(g.idx(jt, m))).collect()
    }

    /// `A(j) = sum_m h~_S(j_S, m) h~_I(j_I, -m) P(m, jt)` along the array.
    fn amplitude_row(&self, point: usize, jt: usize) -> Vec<Complex64> {
        let n = self.grid().n_x();
        let p = self.pair_row(jt);
        let k = &self.kernels;
        match self.setup.scheme {
            Scheme::A => {
                // reindex m -> -m so the idler kernel acts on w directly
                let w: Vec<Complex64> = (0..n)
                    .map(|mp| {
                        let m = mirror_index(mp, n);
                        k.spectral(Arm::S, point, m) * p[m]
                    })
                    .collect();
                k.apply_spectral(Arm::I, &w)
            }
            Scheme::B => {
                let v: Vec<Complex64> = (0..n)
                    .map(|m| k.spectral(Arm::I, point, mirror_index(m, n)) * p[m])
                    .collect();
                k.apply_spectral(Arm::S, &v)
            }
        }
    }

    /// `(point slot, array slot)` mapped to `(signal slot, idler slot)`.
    fn arms(&self, point: usize, j: usize) -> (usize, usize) {
        match self.setup.scheme {
            Scheme::A => (point, j),
            Scheme::B => (j, point),
        }
    }

    fn result(&self, model: Model, point: usize, g: Vec<f64>) -> OracleResult {
        let plane = self.setup.plane(self.grid(), self.setup.array_arm());
        OracleResult {
            model,
            scheme: self.setup.scheme,
            point_pixel: point,
            x: (0..plane.n).map(|j| plane.coordinate(j)).collect(),
            g,
        }
    }

    /// Incoherent spectral sum on one frequency row with weight `weight(m)`.
    fn incoherent_row(&self, point: usize, j: usize, jt: usize, var: impl Fn(usize) -> f64) -> f64 {
        let g = self.grid();
        let n = g.n_x();
        let (js, ji) = self.arms(point, j);
        let k = &self.kernels;
        (0..n)
            .map(|m| {
                let ws = k.spectral_weight(Arm::S, js, m);
                if ws == 0.0 {
                    return 0.0;
                }
                ws * k.spectral_weight(Arm::I, ji, mirror_index(m, n)) * var(g.idx(jt, m))
            })
            .sum()
    }

    fn wprime_value(&self, point: usize, j: usize) -> f64 {
        let n = self.grid().n_x();
        let (js, ji) = self.arms(point, j);
        let k = &self.kernels;
        (0..n)
            .map(|x| k.positional_weight(Arm::S, js, x) * k.positional_weight(Arm::I, ji, x))
            .sum()
    }

    /// `|P(0, 0)|^2`, the near-field pair-number variance.
    pub fn near_field_strength(&self) -> f64 {
        self.table.pair_amplitude(0).norm_sqr()
    }

    /// Quasi-monochromatic oracle curve.
    pub fn curve(&self, model: Model) -> Result<OracleResult> {
        let point = self.setup.point_pixel(self.grid())?;
        let n = self.grid().n_x();
        let g = match model {
            Model::Pure => self.amplitude_row(point, 0).iter().map(|a| a.norm_sqr()).collect(),
            Model::W => (0..n)
                .map(|j| self.incoherent_row(point, j, 0, |i| self.table.pair_amplitude(i).norm_sqr()))
                .collect(),
            Model::WPrime => {
                let c = self.near_field_strength();
                (0..n).map(|j| c * self.wprime_value(point, j)).collect()
            }
        };
        Ok(self.result(model, point, g))
    }

    /// Exact expectation of the Monte-Carlo covariance estimator for a
    /// detection window (vacuum-subtracted photon numbers per sample).
    pub fn detected(&self, model: Model, window: &DetectionWindow) -> Result<OracleResult> {
        let grid = self.grid();
        let (n, n_t) = (grid.n_x(), grid.n_t());
        let point = self.setup.point_pixel(grid)?;
        let ntau = window.len() as f64;
        let g = match model {
            Model::Pure => {
                let rows: Vec<Vec<Complex64>> = (0..n_t).map(|jt| self.amplitude_row(point, jt)).collect();
                let mult = window.lag_multiplicity(n_t);
                let scale = 1.0 / (n_t as f64).sqrt();
                let mut trace = vec![Complex64::default(); n_t];
                (0..n)
                    .map(|j| {
                        for (jt, t) in trace.iter_mut().enumerate() {
                            *t = rows[jt][j];
                        }
                        grid.fft_time(&mut trace, Direction::Inverse);
                        trace
                            .iter()
                            .zip(&mult)
                            .map(|(c, m)| m * (c * scale).norm_sqr())
                            .sum::<f64>()
                            / (ntau * ntau)
                    })
                    .collect()
            }
            Model::W => {
                let var = |i: usize| {
                    let nm = self.table.mean_n[grid.partner(i)];
                    nm * (nm + 1.0)
                };
                (0..n)
                    .map(|j| {
                        (0..n_t).map(|jt| self.incoherent_row(point, j, jt, var)).sum::<f64>()
                            / (n_t * n_t) as f64
                    })
                    .collect()
            }
            Model::WPrime => {
                let c = self.near_field_strength();
                (0..n).map(|j| c * self.wprime_value(point, j) / ntau).collect()
            }
        };
        Ok(self.result(model, point, g))
    }

    /// Expected vacuum-subtracted intensities `(array, point)` seen by the
    /// detectors of the setup. The source is stationary, so the values do not
    /// depend on the detection window. W' has no spectral occupation and is
    /// rejected.
    pub fn mean_intensities(&self, model: Model) -> Result<(Vec<f64>, f64)> {
        if model == Model::WPrime {
            return Err(Error::Config("mean intensities are defined for the pure state and W".into()));
        }
        let grid = self.grid();
        let (n, n_t) = (grid.n_x(), grid.n_t());
        let k = &self.kernels;
        let level = |arm: Arm, j: usize| -> f64 {
            let mut s = 0.0;
            for jt in 0..n_t {
                for m in 0..n {
                    let w = k.spectral_weight(arm, j, m);
                    if w == 0.0 {
                        continue;
                    }
                    let i = grid.idx(jt, m);
                    let occ = match arm {
                        Arm::S => self.table.mean_n_signal(i),
                        Arm::I => self.table.mean_n[i],
                    };
                    s += w * occ;
                }
            }
            s / n_t as f64
        };
        let point = self.setup.point_pixel(grid)?;
        let array = (0..n).map(|j| level(self.setup.array_arm(), j)).collect();
        Ok((array, level(self.setup.point_arm(), point)))
    }

    /// Coherent amplitude `A(x_S, x_I)` for every signal slot (rows) and
    /// idler slot (columns) on the `W = 0` slice.
    pub fn biphoton_amplitudes(&self) -> Vec<Vec<Complex64>> {
        let n = self.grid().n_x();
        let p = self.pair_row(0);
        let k = &self.kernels;
        (0..n)
            .map(|js| {
                let w: Vec<Complex64> = (0..n)
                    .map(|mp| {
                        let m = mirror_index(mp, n);
                        k.spectral(Arm::S, js, m) * p[m]
                    })
                    .collect();
                k.apply_spectral(Arm::I, &w)
            })
            .collect()
    }
}

/// Point form of the pure-state oracle at detector coordinates `(x_S, x_I)`.
pub fn g_pure(setup: &ImagingSetup, table: &GainTable, x_s: f64, x_i: f64) -> Result<f64> {
    point_value(setup, table, Model::Pure, x_s, x_i)
}

/// Point form of the mixture-W oracle.
pub fn g_mixture_w(setup: &ImagingSetup, table: &GainTable, x_s: f64, x_i: f64) -> Result<f64> {
    point_value(setup, table, Model::W, x_s, x_i)
}

/// Point form of the mixture-W' oracle.
pub fn g_mixture_wprime(setup: &ImagingSetup, table: &GainTable, x_s: f64, x_i: f64) -> Result<f64> {
    point_value(setup, table, Model::WPrime, x_s, x_i)
}

fn point_value(setup: &ImagingSetup, table: &GainTable, model: Model, x_s: f64, x_i: f64) -> Result<f64> {
    let grid = &table.grid;
    let snap = |arm: Arm, x: f64| {
        setup.plane(grid, arm).nearest(x).ok_or_else(|| {
            Error::Config(format!("detector coordinate {x:e} m lies outside the {arm:?} plane"))
        })
    };
    let js = snap(Arm::S, x_s)?;
    let ji = snap(Arm::I, x_i)?;
    let kernels = Kernels::new(grid, setup);
    let n = grid.n_x();
    let value = match model {
        Model::Pure => (0..n)
            .map(|m| {
                kernels.spectral(Arm::S, js, m)
                    * kernels.spectral(Arm::I, ji, mirror_index(m, n))
                    * table.exit_pair_amplitude(m)
            })
            .sum::<Complex64>()
            .norm_sqr(),
        Model::W => (0..n)
            .map(|m| {
                kernels.spectral_weight(Arm::S, js, m)
                    * kernels.spectral_weight(Arm::I, ji, mirror_index(m, n))
                    * table.pair_amplitude(m).norm_sqr()
            })
            .sum(),
        Model::WPrime => {
            let c = table.pair_amplitude(0).norm_sqr();
            (0..n)
                .map(|x| kernels.positional_weight(Arm::S, js, x) * kernels.positional_weight(Arm::I, ji, x))
                .sum::<f64>()
                * c
        }
    };
    Ok(value)
}

/// Classical number-correlated fields realizing the mixtures.
///
/// W: every `(q, W)` signal mode and its `(-q, -W)` idler partner share one
/// Bose-Einstein photon number of mean `|V(q, W)|^2`, with independent uniform
/// phases; fields are returned in the `(q, W)` domain.
/// W': the same construction per near-field sample `(x, t)` with mean
/// `|V(0, 0)|^2`, returned in the `(x, t)` domain.
pub fn sample_mixture_fields<R: Rng + ?Sized>(
    model: Model,
    table: &GainTable,
    rng: &mut R,
) -> Result<FieldPair> {
    let grid = &table.grid;
    let len = grid.len();
    let mut s = vec![Complex64::default(); len];
    let mut id = vec![Complex64::default(); len];
    let tau = std::f64::consts::TAU;
    let domain = match model {
        Model::Pure => {
            return Err(Error::Logic("the pure state has no classical sampler".into()));
        }
        Model::W => {
            for i in 0..len {
                let nbar = table.mean_n_signal(i);
                let amp = (sample_thermal(nbar, rng) as f64).sqrt();
                s[i] = Complex64::from_polar(amp, tau * rng.random::<f64>());
                id[grid.partner(i)] = Complex64::from_polar(amp, tau * rng.random::<f64>());
            }
            Domain::QOmega
        }
        Model::WPrime => {
            let nbar = table.mean_n_signal(0);
            for i in 0..len {
                let amp = (sample_thermal(nbar, rng) as f64).sqrt();
                s[i] = Complex64::from_polar(amp, tau * rng.random::<f64>());
                id[i] = Complex64::from_polar(amp, tau * rng.random::<f64>());
            }
            Domain::XT
        }
    };
    FieldPair::new(Field::new(s, domain), Field::new(id, domain))
}

/// Coincidence counts from the biphoton density.
#[derive(Clone, Debug, PartialEq)]
pub struct Coincidences {
    /// Rows: signal slots, columns: idler slots; or one row when conditioned.
    pub counts: Vec<Vec<u64>>,
    /// Normalized density with the layout of `counts`.
    pub density: Vec<Vec<f64>>,
    pub events: u64,
}

impl Coincidences {
    /// Pearson chi-square of counts against the density, pooling cells with
    /// fewer than 5 expected events into one.
    pub fn chi_square(&self) -> Result<(f64, usize, f64)> {
        let n = self.events as f64;
        let mut chi2 = 0.0;
        let mut cells = 0usize;
        let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
        for (crow, drow) in self.counts.iter().zip(&self.density) {
            for (&c, &p) in crow.iter().zip(drow) {
                let e = n * p;
                if e < 5.0 {
                    pool_obs += c as f64;
                    pool_exp += e;
                } else {
                    chi2 += (c as f64 - e).powi(2) / e;
                    cells += 1;
                }
            }
        }
        if pool_exp > 0.0 {
            chi2 += (pool_obs - pool_exp).powi(2) / pool_exp;
            cells += 1;
        }
        if cells < 2 {
            return Err(Error::Statistics("too few populated cells for chi-square".into()));
        }
        let dof = cells - 1;
        let p = ChiSquared::new(dof as f64)
            .map_err(|e| Error::Numeric(e.to_string()))?
            .sf(chi2);
        Ok((chi2, dof, p))
    }
}

fn sample_from_density<R: Rng + ?Sized>(
    density: Vec<Vec<f64>>,
    n_events: u64,
    rng: &mut R,
) -> Result<Coincidences> {
    let total: f64 = density.iter().flatten().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Config("biphoton density vanishes everywhere".into()));
    }
    let cols = density[0].len();
    let density: Vec<Vec<f64>> = density
        .into_iter()
        .map(|row| row.into_iter().map(|v| v / total).collect())
        .collect();
    let mut cdf = Vec::with_capacity(density.len() * cols);
    let mut acc = 0.0;
    for v in density.iter().flatten() {
        acc += v;
        cdf.push(acc);
    }
    let mut counts = vec![vec![0u64; cols]; density.len()];
    for _ in 0..n_events {
        let u = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        counts[k / cols][k % cols] += 1;
    }
    Ok(Coincidences { counts, density, events: n_events })
}

/// Samples `n_events` pair detections from `|A(x_S, x_I)|^2` over both arrays.
pub fn biphoton_coincidences<R: Rng + ?Sized>(
    setup: &ImagingSetup,
    table: &GainTable,
    n_events: u64,
    rng: &mut R,
) -> Result<Coincidences> {
    check_events(n_events)?;
    let oracle = Oracle::new(setup, table)?;
    let density = oracle
        .biphoton_amplitudes()
        .into_iter()
        .map(|row| row.into_iter().map(|a| a.norm_sqr()).collect())
        .collect();
    sample_from_density(density, n_events, rng)
}

/// Coincidences conditioned on the point detector: samples the array
/// coordinate from `|A|^2` at the setup's fixed point.
pub fn biphoton_conditioned<R: Rng + ?Sized>(
    setup: &ImagingSetup,
    table: &GainTable,
    n_events: u64,
    rng: &mut R,
) -> Result<Coincidences> {
    check_events(n_events)?;
    let oracle = Oracle::new(setup, table)?;
    let point = setup.point_pixel(&table.grid)?;
    let row = oracle.amplitude_row(point, 0).iter().map(|a| a.norm_sqr()).collect();
    sample_from_density(vec![row], n_events, rng)
}

fn check_events(n_events: u64) -> Result<()> {
    if n_events < 1000 {
        return Err(Error::Config(format!("n_events = {n_events} is below the minimum of 1000")));
    }
    Ok(())
}

/// Pixel range `[center - half, center + half]` in ascending-coordinate order,
/// as indices into an ascending-ordered pattern of length `n`.
pub fn centered_range(n: usize, half: usize) -> std::ops::Range<usize> {
    let c = n / 2;
    c.saturating_sub(half)..(c + half + 1).min(n)
}

/// Reorders a DFT-layout curve by increasing coordinate.
pub fn ascending(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n).map(|k| values[(k + n / 2) % n]).collect()
}

/// Contrast of a two-band image: `(band - gap) / (band + gap)`, where `band`
/// is the mean of `g` over the open pixels of `object` and `gap` is `g` at
/// `x = 0`. A gap brighter than the bands is no image and gives 0.
pub fn image_contrast(g: &[f64], object: &[Complex64]) -> Result<f64> {
    let open: Vec<f64> = g
        .iter()
        .zip(object)
        .filter(|(_, t)| t.norm_sqr() > 0.5)
        .map(|(v, _)| v.max(0.0))
        .collect();
    if open.is_empty() {
        return Err(Error::Config("object has no open pixels".into()));
    }
    let band = open.iter().sum::<f64>() / open.len() as f64;
    let gap = g[0].max(0.0);
    if band + gap <= 0.0 {
        return Err(Error::Statistics("image contrast of an all-zero pattern is undefined".into()));
    }
    Ok(((band - gap) / (band + gap)).max(0.0))
}
