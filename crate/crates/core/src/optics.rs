//! Object, lens systems and detection-plane kernels of the imaging bench.
//!
//! The signal arm is fixed: object in the near field right after the beam
//! splitter, lens at `f`, detector at `f` (far field of the object). The idler
//! arm is either the same `f`-`f` Fourier system (`z = f`) or a `2f`-`2f`
//! unit-magnification imaging system (`z = 2f`).
//!
//! A lens Fourier plane is sampled with pitch `lambda f / (n_x dx)`, so that
//! detector slot `j` sees exactly wave-vector slot `j`. The image plane keeps
//! the near-field pitch `dx`. Both use the DFT slot layout.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;

use crate::engine::complex_gaussian;
use crate::error::{Error, Result};
use crate::grid::{mirror_index, nearest_slot, signed_index, Axis, Direction, Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Idler detector array, signal point detector.
    A,
    /// Signal detector array, idler point detector.
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZConfig {
    /// Lens at `f`, detector at `f`: far field.
    F,
    /// Lens at `2f`, detector at `2f`: inverted image of the crystal exit.
    TwoF,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    S,
    I,
}

/// Detector-plane lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorPlane {
    pub pitch: f64,
    pub n: usize,
}

impl DetectorPlane {
    pub fn coordinate(&self, j: usize) -> f64 {
        signed_index(j, self.n) as f64 * self.pitch
    }
    pub fn nearest(&self, x: f64) -> Option<usize> {
        nearest_slot(x, self.pitch, self.n)
    }
    /// Slots sorted by increasing coordinate.
    pub fn ascending(&self) -> Vec<usize> {
        let h = self.n / 2;
        (h..self.n).chain(0..h).collect()
    }
}

/// Complete description of the bench.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagingSetup {
    pub scheme: Scheme,
    pub z_config: ZConfig,
    /// Transmission `T(x)` on the grid's position lattice (DFT layout).
    pub object: Vec<Complex64>,
    /// Position of the point-like detector in its own detection plane.
    pub fixed_point: f64,
    /// Lens focal length.
    pub f: f64,
    /// Carrier wavelength used for the Fourier-plane scaling.
    pub lambda: f64,
}

impl ImagingSetup {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.object.len() != grid.n_x() {
            return Err(Error::Config(format!(
                "object has {} samples, grid has {}",
                self.object.len(),
                grid.n_x()
            )));
        }
        if let Some(j) = self.object.iter().position(|t| !(t.norm() <= 1.0 + 1e-12)) {
            return Err(Error::Config(format!(
                "object transmission |T| = {} exceeds 1 at x = {:e} m",
                self.object[j].norm(),
                grid.x(j)
            )));
        }
        for (name, v) in [("f", self.f), ("lambda", self.lambda)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        self.point_pixel(grid)?;
        Ok(())
    }

    /// Detection plane of one arm.
    pub fn plane(&self, grid: &Grid, arm: Arm) -> DetectorPlane {
        let far = DetectorPlane {
            pitch: fourier_pitch(grid, self.f, self.lambda),
            n: grid.n_x(),
        };
        match (arm, self.z_config) {
            (Arm::S, _) | (Arm::I, ZConfig::F) => far,
            (Arm::I, ZConfig::TwoF) => DetectorPlane { pitch: grid.dx(), n: grid.n_x() },
        }
    }

    /// Arm carrying the point-like detector.
    pub fn point_arm(&self) -> Arm {
        match self.scheme {
            Scheme::A => Arm::S,
            Scheme::B => Arm::I,
        }
    }

    pub fn array_arm(&self) -> Arm {
        match self.scheme {
            Scheme::A => Arm::I,
            Scheme::B => Arm::S,
        }
    }

    /// Slot of the point detector; it must fall on its detection lattice.
    pub fn point_pixel(&self, grid: &Grid) -> Result<usize> {
        let plane = self.plane(grid, self.point_arm());
        plane.nearest(self.fixed_point).ok_or_else(|| {
            Error::Config(format!(
                "fixed_point = {:e} m lies outside the detection lattice (pitch {:e} m, {} pixels)",
                self.fixed_point, plane.pitch, plane.n
            ))
        })
    }
}

/// Pixel pitch of a lens Fourier plane.
pub fn fourier_pitch(grid: &Grid, f: f64, lambda: f64) -> f64 {
    lambda * f / grid.x_window()
}

/// Double slit: `T(x) = 1` where `| |x| - d/2 | < a/2`.
pub fn double_slit(grid: &Grid, a: f64, d: f64) -> Result<Vec<Complex64>> {
    if !(a > 0.0 && a < d) {
        return Err(Error::Config(format!("slit geometry needs 0 < a < d (a = {a:e}, d = {d:e})")));
    }
    if d + a >= grid.x_window() {
        return Err(Error::Config(format!(
            "slits span {:e} m, wider than the {:e} m window",
            d + a,
            grid.x_window()
        )));
    }
    Ok((0..grid.n_x())
        .map(|j| {
            let open = (grid.x(j).abs() - d / 2.0).abs() < a / 2.0;
            Complex64::new(if open { 1.0 } else { 0.0 }, 0.0)
        })
        .collect())
}

/// Fully transparent object.
pub fn uniform_object(grid: &Grid) -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0); grid.n_x()]
}

/// Reads a one-column transmission profile listed in increasing `x`
/// (`-n_x/2 dx` first). Blank lines and `#` comments are skipped.
pub fn load_object(path: &Path, grid: &Grid) -> Result<Vec<Complex64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read object file {}: {e}", path.display())))?;
    let mut ascending = Vec::with_capacity(grid.n_x());
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::ConfigLine {
            line: k + 1,
            msg: format!("object file {}: '{line}' is not a number", path.display()),
        })?;
        if !(v.is_finite() && v.abs() <= 1.0) {
            return Err(Error::ConfigLine {
                line: k + 1,
                msg: format!("object transmission {v} outside [-1, 1]"),
            });
        }
        ascending.push(v);
    }
    let n = grid.n_x();
    if ascending.len() != n {
        return Err(Error::Config(format!(
            "object file {} has {} samples, grid needs {n}",
            path.display(),
            ascending.len()
        )));
    }
    let mut t = vec![Complex64::default(); n];
    for (k, v) in ascending.into_iter().enumerate() {
        t[(k + n / 2) % n] = Complex64::new(v, 0.0);
    }
    Ok(t)
}

/// Ideal thin-lens `f`-`f` system applied to every time row of a
/// position-domain field: `out = -i DFT(in)` on the Fourier-plane lattice.
pub fn propagate_f_f(grid: &Grid, field: &Field) -> Result<Field> {
    if field.domain.is_spectral(Axis::Space) {
        return Err(Error::Logic("f-f propagation needs a position-domain field".into()));
    }
    let mut out = field.clone();
    for row in out.values.chunks_exact_mut(grid.n_x()) {
        grid.fft_space(row, Direction::Forward);
        row.iter_mut().for_each(|v| *v *= Complex64::new(0.0, -1.0));
    }
    Ok(out)
}

/// `2f`-`2f` imaging: `out(x) = -in(-x)`; the `-1` is the product of the two
/// `-i` Fourier-stage phases.
pub fn propagate_2f_2f(grid: &Grid, field: &Field) -> Result<Field> {
    if field.domain.is_spectral(Axis::Space) {
        return Err(Error::Logic("2f-2f propagation needs a position-domain field".into()));
    }
    let n = grid.n_x();
    let mut out = field.clone();
    for (src, dst) in field.values.chunks_exact(n).zip(out.values.chunks_exact_mut(n)) {
        for j in 0..n {
            dst[j] = -src[mirror_index(j, n)];
        }
    }
    Ok(out)
}

/// Multiplies by `T(x)`. With `refill`, the blocked fraction is replaced by
/// fresh vacuum noise (`sqrt(1 - |T|^2)` times a `<|xi|^2> = 1/2` sample),
/// which keeps the Wigner field a valid quantum state after loss.
pub fn apply_object<R: Rng + ?Sized>(
    grid: &Grid,
    field: &mut Field,
    object: &[Complex64],
    refill: Option<&mut R>,
) -> Result<()> {
    if field.domain.is_spectral(Axis::Space) {
        return Err(Error::Logic("object acts on a position-domain field".into()));
    }
    let n = grid.n_x();
    match refill {
        Some(rng) => {
            for row in field.values.chunks_exact_mut(n) {
                for (v, t) in row.iter_mut().zip(object) {
                    let loss = (1.0 - t.norm_sqr()).max(0.0);
                    *v *= t;
                    if loss > 0.0 {
                        *v += loss.sqrt() * complex_gaussian(rng, 0.5);
                    }
                }
            }
        }
        None => {
            for row in field.values.chunks_exact_mut(n) {
                for (v, t) in row.iter_mut().zip(object) {
                    *v *= t;
                }
            }
        }
    }
    Ok(())
}

/// Matrix elements of the linear map from crystal-exit modes to detector
/// pixels of each arm (vacuum refill excluded).
#[derive(Clone, Debug)]
pub struct Kernels {
    grid: Grid,
    z_config: ZConfig,
    object: Vec<Complex64>,
    /// Unitary DFT of the object.
    t_hat: Vec<Complex64>,
}

impl Kernels {
    pub fn new(grid: &Grid, setup: &ImagingSetup) -> Self {
        let mut t_hat = setup.object.clone();
        grid.fft_space(&mut t_hat, Direction::Forward);
        Kernels {
            grid: grid.clone(),
            z_config: setup.z_config,
            object: setup.object.clone(),
            t_hat,
        }
    }

    fn n(&self) -> usize {
        self.grid.n_x()
    }

    /// `h~(j, m)`: weight of crystal-exit wave-vector slot `m` at detector slot `j`.
    pub fn spectral(&self, arm: Arm, j: usize, m: usize) -> Complex64 {
        let n = self.n();
        let sq = (n as f64).sqrt();
        match (arm, self.z_config) {
            (Arm::S, _) => Complex64::new(0.0, -1.0) * self.t_hat[(j + n - m) % n] / sq,
            (Arm::I, ZConfig::F) => {
                if j == m {
                    Complex64::new(0.0, -1.0)
                } else {
                    Complex64::default()
                }
            }
            (Arm::I, ZConfig::TwoF) => {
                let phase = -2.0 * std::f64::consts::PI * ((m * j) % n) as f64 / n as f64;
                -Complex64::from_polar(1.0, phase) / sq
            }
        }
    }

    /// `h(j, k)`: weight of crystal-exit position slot `k` at detector slot `j`.
    pub fn positional(&self, arm: Arm, j: usize, k: usize) -> Complex64 {
        let n = self.n();
        let sq = (n as f64).sqrt();
        let fourier = || {
            let phase = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
            Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, phase) / sq
        };
        match (arm, self.z_config) {
            (Arm::S, _) => fourier() * self.object[k],
            (Arm::I, ZConfig::F) => fourier(),
            (Arm::I, ZConfig::TwoF) => {
                if k == mirror_index(j, n) {
                    Complex64::new(-1.0, 0.0)
                } else {
                    Complex64::default()
                }
            }
        }
    }

    /// `|h~(j, m)|^2` without forming the complex value.
    pub fn spectral_weight(&self, arm: Arm, j: usize, m: usize) -> f64 {
        let n = self.n();
        match (arm, self.z_config) {
            (Arm::S, _) => self.t_hat[(j + n - m) % n].norm_sqr() / n as f64,
            (Arm::I, ZConfig::F) => {
                if j == m {
                    1.0
                } else {
                    0.0
                }
            }
            (Arm::I, ZConfig::TwoF) => 1.0 / n as f64,
        }
    }

    /// `|h(j, k)|^2`.
    pub fn positional_weight(&self, arm: Arm, j: usize, k: usize) -> f64 {
        let n = self.n();
        match (arm, self.z_config) {
            (Arm::S, _) => self.object[k].norm_sqr() / n as f64,
            (Arm::I, ZConfig::F) => 1.0 / n as f64,
            (Arm::I, ZConfig::TwoF) => {
                if k == mirror_index(j, n) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `sum_m h~(j, m) v(m)` for every detector slot `j`, via the propagator.
    pub fn apply_spectral(&self, arm: Arm, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut line = spectrum.to_vec();
        self.grid.fft_space(&mut line, Direction::Inverse);
        self.apply_positional(arm, &line)
    }

    /// `sum_k h(j, k) u(k)` for every detector slot `j`.
    pub fn apply_positional(&self, arm: Arm, line: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        let mut out: Vec<Complex64> = match arm {
            Arm::S => line.iter().zip(&self.object).map(|(u, t)| u * t).collect(),
            Arm::I => line.to_vec(),
        };
        match (arm, self.z_config) {
            (Arm::S, _) | (Arm::I, ZConfig::F) => {
                self.grid.fft_space(&mut out, Direction::Forward);
                out.iter_mut().for_each(|v| *v *= Complex64::new(0.0, -1.0));
                out
            }
            (Arm::I, ZConfig::TwoF) => (0..n).map(|j| -out[mirror_index(j, n)]).collect(),
        }
    }
}

/// Coordinate form of [`Kernels::spectral`]: `x_det` in the arm's detection
/// plane, `q` on the grid's wave-vector lattice (both snapped to the nearest slot).
pub fn kernel_spectrum(
    kernels: &Kernels,
    setup: &ImagingSetup,
    grid: &Grid,
    arm: Arm,
    x_det: f64,
    q: f64,
) -> Result<Complex64> {
    let j = setup
        .plane(grid, arm)
        .nearest(x_det)
        .ok_or_else(|| Error::Config(format!("detector coordinate {x_det:e} off the lattice")))?;
    let m = nearest_slot(q, grid.dq(), grid.n_x())
        .ok_or_else(|| Error::Config(format!("wave-vector {q:e} off the lattice")))?;
    Ok(kernels.spectral(arm, j, m))
}
