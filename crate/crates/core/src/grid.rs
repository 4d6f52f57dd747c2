//! Sampling lattices and field containers.
//!
//! Every array in the crate uses the standard DFT layout on both axes:
//! index `j < n/2` carries the non-negative coordinate `j`, indices in the
//! upper half carry `j - n`. This holds for positions, times, transverse
//! wave-vectors and frequencies alike, so forward and inverse transforms are
//! plain FFTs with no shifting. Transforms are unitary (`1/sqrt(n)` both ways)
//! with `exp(-i q x)` in the forward direction.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Signed lattice index of DFT slot `j` on a lattice of `n` points.
#[inline]
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Slot holding the negated coordinate of slot `j` (`-k mod n`).
#[inline]
pub fn mirror_index(j: usize, n: usize) -> usize {
    (n - j) % n
}

/// Slot of a signed index, wrapping around the lattice.
#[inline]
pub fn slot_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Space-time lattice with its conjugate wave-vector/frequency lattices.
#[derive(Clone)]
pub struct Grid {
    n_x: usize,
    dx: f64,
    n_t: usize,
    dt: f64,
    space_fwd: Arc<dyn Fft<f64>>,
    space_inv: Arc<dyn Fft<f64>>,
    time_fwd: Arc<dyn Fft<f64>>,
    time_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_x", &self.n_x)
            .field("dx", &self.dx)
            .field("n_t", &self.n_t)
            .field("dt", &self.dt)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n_x == other.n_x && self.n_t == other.n_t && self.dx == other.dx && self.dt == other.dt
    }
}

/// Builds a grid, validating sizes and spacings.
pub fn make_grid(n_x: usize, dx: f64, n_t: usize, dt: f64) -> Result<Grid> {
    Grid::new(n_x, dx, n_t, dt)
}

impl Grid {
    pub fn new(n_x: usize, dx: f64, n_t: usize, dt: f64) -> Result<Self> {
        for (name, n) in [("n_x", n_x), ("n_t", n_t)] {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::Config(format!("{name} = {n} must be a power of two >= 2")));
            }
        }
        for (name, v) in [("dx", dx), ("dt", dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Grid {
            n_x,
            dx,
            n_t,
            dt,
            space_fwd: planner.plan_fft_forward(n_x),
            space_inv: planner.plan_fft_inverse(n_x),
            time_fwd: planner.plan_fft_forward(n_t),
            time_inv: planner.plan_fft_inverse(n_t),
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn len(&self) -> usize {
        self.n_x * self.n_t
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wave-vector spacing `2 pi / (n_x dx)`.
    pub fn dq(&self) -> f64 {
        2.0 * PI / (self.n_x as f64 * self.dx)
    }
    pub fn d_omega(&self) -> f64 {
        2.0 * PI / (self.n_t as f64 * self.dt)
    }
    /// Width of the transverse window.
    pub fn x_window(&self) -> f64 {
        self.n_x as f64 * self.dx
    }
    pub fn t_window(&self) -> f64 {
        self.n_t as f64 * self.dt
    }

    pub fn x(&self, j: usize) -> f64 {
        signed_index(j, self.n_x) as f64 * self.dx
    }
    pub fn t(&self, j: usize) -> f64 {
        signed_index(j, self.n_t) as f64 * self.dt
    }
    pub fn q(&self, j: usize) -> f64 {
        signed_index(j, self.n_x) as f64 * self.dq()
    }
    pub fn omega(&self, j: usize) -> f64 {
        signed_index(j, self.n_t) as f64 * self.d_omega()
    }

    pub fn q_lattice(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.q(j)).collect()
    }
    pub fn omega_lattice(&self) -> Vec<f64> {
        (0..self.n_t).map(|j| self.omega(j)).collect()
    }
    pub fn x_lattice(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.x(j)).collect()
    }

    /// Flat index of `(time-or-frequency row, space-or-wavevector column)`.
    #[inline]
    pub fn idx(&self, jt: usize, jx: usize) -> usize {
        jt * self.n_x + jx
    }

    /// Flat index of the `(-q, -Omega)` partner of a spectral slot.
    #[inline]
    pub fn partner(&self, i: usize) -> usize {
        let jt = i / self.n_x;
        let jx = i % self.n_x;
        self.idx(mirror_index(jt, self.n_t), mirror_index(jx, self.n_x))
    }

    /// Slot nearest to position `x`, or `None` outside the lattice.
    pub fn nearest_x(&self, x: f64) -> Option<usize> {
        nearest_slot(x, self.dx, self.n_x)
    }

    /// Unitary DFT of a single transverse line, in place.
    pub fn fft_space(&self, line: &mut [Complex64], direction: Direction) {
        let plan = match direction {
            Direction::Forward => &self.space_fwd,
            Direction::Inverse => &self.space_inv,
        };
        plan.process(line);
        let norm = 1.0 / (self.n_x as f64).sqrt();
        line.iter_mut().for_each(|v| *v *= norm);
    }

    /// Unitary DFT of a single time trace, in place.
    pub fn fft_time(&self, trace: &mut [Complex64], direction: Direction) {
        let plan = match direction {
            Direction::Forward => &self.time_fwd,
            Direction::Inverse => &self.time_inv,
        };
        plan.process(trace);
        let norm = 1.0 / (self.n_t as f64).sqrt();
        trace.iter_mut().for_each(|v| *v *= norm);
    }

    /// Transforms `field` along one axis, flipping its domain tag.
    pub fn transform(&self, field: &Field, axis: Axis, direction: Direction) -> Result<Field> {
        let mut out = field.clone();
        self.transform_in_place(&mut out, axis, direction)?;
        Ok(out)
    }

    pub fn transform_in_place(&self, field: &mut Field, axis: Axis, direction: Direction) -> Result<()> {
        if field.values.len() != self.len() {
            return Err(Error::Logic(format!(
                "field of {} samples does not match grid of {}",
                field.values.len(),
                self.len()
            )));
        }
        let spectral = field.domain.is_spectral(axis);
        match (direction, spectral) {
            (Direction::Forward, true) | (Direction::Inverse, false) => {
                return Err(Error::Logic(format!(
                    "{direction:?} {axis:?} transform requested on a field in {:?} domain",
                    field.domain
                )));
            }
            _ => {}
        }
        match axis {
            Axis::Space => {
                for row in field.values.chunks_exact_mut(self.n_x) {
                    self.fft_space(row, direction);
                }
            }
            Axis::Time => {
                let mut trace = vec![Complex64::default(); self.n_t];
                for jx in 0..self.n_x {
                    for (jt, v) in trace.iter_mut().enumerate() {
                        *v = field.values[jt * self.n_x + jx];
                    }
                    self.fft_time(&mut trace, direction);
                    for (jt, v) in trace.iter().enumerate() {
                        field.values[jt * self.n_x + jx] = *v;
                    }
                }
            }
        }
        field.domain = field.domain.flipped(axis);
        Ok(())
    }

    /// Brings a field to `(q, Omega)` whatever its current domain.
    pub fn to_spectral(&self, field: &mut Field) -> Result<()> {
        if !field.domain.is_spectral(Axis::Space) {
            self.transform_in_place(field, Axis::Space, Direction::Forward)?;
        }
        if !field.domain.is_spectral(Axis::Time) {
            self.transform_in_place(field, Axis::Time, Direction::Forward)?;
        }
        Ok(())
    }

    /// Brings a field to `(x, t)` whatever its current domain.
    pub fn to_direct(&self, field: &mut Field) -> Result<()> {
        if field.domain.is_spectral(Axis::Space) {
            self.transform_in_place(field, Axis::Space, Direction::Inverse)?;
        }
        if field.domain.is_spectral(Axis::Time) {
            self.transform_in_place(field, Axis::Time, Direction::Inverse)?;
        }
        Ok(())
    }

    pub fn zeros(&self, domain: Domain) -> Field {
        Field {
            values: vec![Complex64::default(); self.len()],
            domain,
        }
    }
}

/// Slot nearest to coordinate `x` on a DFT-ordered lattice of pitch `pitch`.
pub fn nearest_slot(x: f64, pitch: f64, n: usize) -> Option<usize> {
    let k = (x / pitch).round();
    let half = (n / 2) as f64;
    if !k.is_finite() || k < -half || k > half - 1.0 {
        return None;
    }
    Some(slot_of(k as i64, n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Which representation each axis of a field is in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    XT,
    QOmega,
    XOmega,
    QT,
}

impl Domain {
    pub fn is_spectral(self, axis: Axis) -> bool {
        match axis {
            Axis::Space => matches!(self, Domain::QOmega | Domain::QT),
            Axis::Time => matches!(self, Domain::QOmega | Domain::XOmega),
        }
    }

    fn from_flags(space_spectral: bool, time_spectral: bool) -> Domain {
        match (space_spectral, time_spectral) {
            (false, false) => Domain::XT,
            (true, true) => Domain::QOmega,
            (false, true) => Domain::XOmega,
            (true, false) => Domain::QT,
        }
    }

    fn flipped(self, axis: Axis) -> Domain {
        let s = self.is_spectral(Axis::Space);
        let t = self.is_spectral(Axis::Time);
        match axis {
            Axis::Space => Domain::from_flags(!s, t),
            Axis::Time => Domain::from_flags(s, !t),
        }
    }
}

/// Complex envelope samples, row-major `(time-or-frequency, space-or-wavevector)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub values: Vec<Complex64>,
    pub domain: Domain,
}

impl Field {
    pub fn new(values: Vec<Complex64>, domain: Domain) -> Self {
        Field { values, domain }
    }

    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            Some(i) => Err(Error::Numeric(format!("non-finite field sample at flat index {i}"))),
            None => Ok(()),
        }
    }
}

/// Signal and idler envelopes on one grid, in one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPair {
    pub signal: Field,
    pub idler: Field,
}

impl FieldPair {
    pub fn new(signal: Field, idler: Field) -> Result<Self> {
        if signal.domain != idler.domain {
            return Err(Error::Logic(format!(
                "signal in {:?} but idler in {:?}",
                signal.domain, idler.domain
            )));
        }
        if signal.values.len() != idler.values.len() {
            return Err(Error::Logic("signal and idler sizes differ".into()));
        }
        Ok(FieldPair { signal, idler })
    }

    pub fn domain(&self) -> Domain {
        self.signal.domain
    }

    pub fn to_spectral(&mut self, grid: &Grid) -> Result<()> {
        grid.to_spectral(&mut self.signal)?;
        grid.to_spectral(&mut self.idler)
    }

    pub fn to_direct(&mut self, grid: &Grid) -> Result<()> {
        grid.to_direct(&mut self.signal)?;
        grid.to_direct(&mut self.idler)
    }
}
