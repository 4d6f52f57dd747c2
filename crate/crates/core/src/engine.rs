//! Stochastic field engine in the Wigner representation.
//!
//! Input vacuum is white circular Gaussian noise with `<|alpha|^2> = 1/2` per
//! mode. Because the pump is undepleted the dynamics is linear in
//! `(alpha, alpha*)`, so propagating Wigner samples through the classical
//! equations is exact.
//!
//! Ordering contract: all moments of the samples are symmetrically ordered.
//! Mean intensities exceed photon numbers by 1/2 per mode and are corrected by
//! the detector stage; covariances between signal and idler need no
//! correction since the two beams commute.
//!
//! Both engines report the field at the crystal exit in the frame co-moving
//! with free propagation through the crystal, i.e. with the linear phase
//! `exp(i k l_c)` of the undriven crystal removed. With no pump the output
//! equals the input.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gain::{mismatch, CrystalParams, GainTable};
use crate::grid::{Domain, Field, FieldPair, Grid};

/// Which crystal model produces the output fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    /// Plane-wave cw pump, closed-form `U`, `V` per mode.
    PlaneWave,
    /// Gaussian pump in space and time, split-step integration.
    FinitePump,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub engine: EngineKind,
    /// Split-step count (finite-pump engine).
    pub steps: usize,
    pub seed: u64,
    pub pulses: usize,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pulses < 1 {
            return Err(Error::Config("pulses must be >= 1".into()));
        }
        if self.engine == EngineKind::FinitePump && self.steps < 1 {
            return Err(Error::Config("steps must be >= 1 for the finite-pump engine".into()));
        }
        Ok(())
    }
}

/// Independent random stream for one pulse.
pub fn pulse_rng(master_seed: u64, pulse_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(pulse_index);
    rng
}

/// Circular complex Gaussian with `<|z|^2> = 2 var`.
#[inline]
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// Vacuum Wigner noise for both beams, in the `(q, Omega)` domain.
pub fn sample_vacuum<R: Rng + ?Sized>(grid: &Grid, rng: &mut R) -> FieldPair {
    let sd = 0.5; // per quadrature: var 1/4, so <|alpha|^2> = 1/2
    let mut draw = || -> Field {
        let values = (0..grid.len()).map(|_| complex_gaussian(rng, sd)).collect();
        Field::new(values, Domain::QOmega)
    };
    let signal = draw();
    let idler = draw();
    FieldPair { signal, idler }
}

/// Applies the plane-wave input-output relation mode by mode.
///
/// `a_S(q, W) <- U_S a_S(q, W) + V_S conj(a_I(-q, -W))`, and symmetrically for
/// the idler. The partner map is the exact lattice mirror, so self-paired
/// slots (zero and Nyquist) couple to themselves across the two beams.
pub fn apply_planewave_gain(pair: &FieldPair, table: &GainTable) -> Result<FieldPair> {
    if pair.domain() != Domain::QOmega {
        return Err(Error::Logic(format!(
            "plane-wave gain needs (q, Omega) fields, got {:?}",
            pair.domain()
        )));
    }
    let grid = &table.grid;
    if pair.signal.values.len() != grid.len() {
        return Err(Error::Logic("field does not match the gain table grid".into()));
    }
    let s_in = &pair.signal.values;
    let i_in = &pair.idler.values;
    let mut s_out = Vec::with_capacity(grid.len());
    let mut i_out = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let p = grid.partner(i);
        s_out.push(table.u_s[i] * s_in[i] + table.v_s[i] * i_in[p].conj());
        i_out.push(table.u_i[i] * i_in[i] + table.v_i[i] * s_in[p].conj());
    }
    Ok(FieldPair {
        signal: Field::new(s_out, Domain::QOmega),
        idler: Field::new(i_out, Domain::QOmega),
    })
}

/// Moves crystal-exit fields from the co-moving frame to the lab frame at
/// the exit face by restoring the free-propagation phase of each beam.
///
/// Imaging of the near field (`z = 2f`) relies on this: in the co-moving
/// frame the pair amplitude carries a quadratic phase `exp(i Delta l_c)`,
/// which is a defocus by one crystal length.
pub fn to_exit_face(pair: &mut FieldPair, table: &GainTable) -> Result<()> {
    if pair.domain() != Domain::QOmega {
        return Err(Error::Logic(format!(
            "exit-face phase needs (q, Omega) fields, got {:?}",
            pair.domain()
        )));
    }
    for (i, v) in pair.signal.values.iter_mut().enumerate() {
        *v *= table.exit_phase_signal(i);
    }
    for (i, v) in pair.idler.values.iter_mut().enumerate() {
        *v *= table.exit_phase_idler(i);
    }
    Ok(())
}

/// Pump field amplitude profile `exp(-x^2/w_p^2) exp(-t^2/tau_p^2)`.
pub fn pump_profile(grid: &Grid, params: &CrystalParams) -> Vec<f64> {
    let mut p = Vec::with_capacity(grid.len());
    for jt in 0..grid.n_t() {
        let ft = (-(grid.t(jt) / params.tau_p).powi(2)).exp();
        for jx in 0..grid.n_x() {
            p.push(ft * (-(grid.x(jx) / params.w_p).powi(2)).exp());
        }
    }
    p
}

/// Symmetric split-step propagator for the finite-pump crystal.
///
/// Integrates
/// `d a_S/dz = L_S a_S + sigma p(x,t) conj(a_I)`,
/// `d a_I/dz = L_I a_I + sigma p(x,t) conj(a_S)`
/// with `L = i k(q, Omega)` applied as half-steps in the spectral domain and
/// the local coupling solved exactly per cell in the direct domain. The
/// linear wave numbers split the mismatch evenly,
/// `k_S(q, W) = k_I(-q, -W) = -Delta(q, W) / 2`, which reproduces the
/// plane-wave `U`, `V` when `p = 1`.
#[derive(Clone, Debug)]
pub struct SplitStep {
    grid: Grid,
    steps: usize,
    half_s: Vec<Complex64>,
    half_i: Vec<Complex64>,
    full_s: Vec<Complex64>,
    full_i: Vec<Complex64>,
    last_s: Vec<Complex64>,
    last_i: Vec<Complex64>,
    cosh: Vec<f64>,
    sinh: Vec<f64>,
}

impl SplitStep {
    pub fn new(grid: &Grid, params: &CrystalParams, steps: usize) -> Result<Self> {
        params.validate()?;
        if steps < 1 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        let n = grid.len();
        let frac = 1.0 / steps as f64;
        // dimensionless mismatch per slot; k l_c = -D/2
        let mut d_s = Vec::with_capacity(n);
        for jt in 0..grid.n_t() {
            for jx in 0..grid.n_x() {
                d_s.push(mismatch(grid.q(jx), grid.omega(jt), params));
            }
        }
        let d_i: Vec<f64> = (0..n).map(|i| d_s[grid.partner(i)]).collect();
        let phase = |d: &[f64], f: f64| -> Vec<Complex64> {
            d.iter().map(|&d| Complex64::from_polar(1.0, -0.5 * d * f)).collect()
        };
        let half_s = phase(&d_s, 0.5 * frac);
        let half_i = phase(&d_i, 0.5 * frac);
        let full_s = phase(&d_s, frac);
        let full_i = phase(&d_i, frac);
        // final half step followed by removal of the free-crystal phase
        let last_s = phase(&d_s, 0.5 * frac - 1.0);
        let last_i = phase(&d_i, 0.5 * frac - 1.0);
        let h_gain = params.gain() * frac;
        let pump = pump_profile(grid, params);
        let cosh = pump.iter().map(|p| (h_gain * p).cosh()).collect();
        let sinh = pump.iter().map(|p| (h_gain * p).sinh()).collect();
        Ok(SplitStep {
            grid: grid.clone(),
            steps,
            half_s,
            half_i,
            full_s,
            full_i,
            last_s,
            last_i,
            cosh,
            sinh,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Propagates a pair through the crystal; the output is returned in the
    /// domain of the input.
    pub fn propagate(&self, pair: &FieldPair) -> Result<FieldPair> {
        let grid = &self.grid;
        let domain = pair.domain();
        let mut s = pair.signal.clone();
        let mut i = pair.idler.clone();
        if s.values.len() != grid.len() || i.values.len() != grid.len() {
            return Err(Error::Logic("field does not match the propagator grid".into()));
        }
        grid.to_spectral(&mut s)?;
        grid.to_spectral(&mut i)?;
        mul(&mut s.values, &self.half_s);
        mul(&mut i.values, &self.half_i);
        for step in 0..self.steps {
            grid.to_direct(&mut s)?;
            grid.to_direct(&mut i)?;
            for k in 0..grid.len() {
                let (a, b) = (s.values[k], i.values[k]);
                let (c, sh) = (self.cosh[k], self.sinh[k]);
                s.values[k] = c * a + sh * b.conj();
                i.values[k] = c * b + sh * a.conj();
            }
            grid.to_spectral(&mut s)?;
            grid.to_spectral(&mut i)?;
            if step + 1 < self.steps {
                mul(&mut s.values, &self.full_s);
                mul(&mut i.values, &self.full_i);
            } else {
                mul(&mut s.values, &self.last_s);
                mul(&mut i.values, &self.last_i);
            }
            if s.check_finite().is_err() || i.check_finite().is_err() {
                return Err(Error::Numeric(format!(
                    "split-step field became non-finite at step {}",
                    step + 1
                )));
            }
        }
        restore_domain(grid, &mut s, domain)?;
        restore_domain(grid, &mut i, domain)?;
        Ok(FieldPair { signal: s, idler: i })
    }
}

/// Free-function form of [`SplitStep::propagate`].
pub fn propagate_crystal_splitstep(
    pair: &FieldPair,
    grid: &Grid,
    params: &CrystalParams,
    steps: usize,
) -> Result<FieldPair> {
    SplitStep::new(grid, params, steps)?.propagate(pair)
}

fn mul(values: &mut [Complex64], factors: &[Complex64]) {
    for (v, f) in values.iter_mut().zip(factors) {
        *v *= f;
    }
}

fn restore_domain(grid: &Grid, f: &mut Field, domain: Domain) -> Result<()> {
    use crate::grid::{Axis, Direction};
    if f.domain.is_spectral(Axis::Space) && !domain.is_spectral(Axis::Space) {
        grid.transform_in_place(f, Axis::Space, Direction::Inverse)?;
    }
    if f.domain.is_spectral(Axis::Time) && !domain.is_spectral(Axis::Time) {
        grid.transform_in_place(f, Axis::Time, Direction::Inverse)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::gain_functions;
    use crate::grid::make_grid;

    #[test]
    fn gain_rejects_direct_domain() {
        let g = make_grid(8, 1e-5, 4, 1e-13).unwrap();
        let t = gain_functions(&CrystalParams::default(), &g).unwrap();
        let mut rng = pulse_rng(0, 0);
        let mut pair = sample_vacuum(&g, &mut rng);
        pair.to_direct(&g).unwrap();
        assert!(matches!(apply_planewave_gain(&pair, &t), Err(Error::Logic(_))));
    }

    #[test]
    fn no_pump_keeps_mode_moduli() {
        let g = make_grid(32, 4e-6, 8, 0.2e-12).unwrap();
        let t = gain_functions(&CrystalParams::default().with_gain(0.0), &g).unwrap();
        let mut rng = pulse_rng(3, 0);
        let pair = sample_vacuum(&g, &mut rng);
        let out = apply_planewave_gain(&pair, &t).unwrap();
        for (a, b) in pair.signal.values.iter().zip(&out.signal.values) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn pulse_streams_are_deterministic() {
        let g = make_grid(16, 1e-5, 2, 1e-13).unwrap();
        let a = sample_vacuum(&g, &mut pulse_rng(9, 4));
        let b = sample_vacuum(&g, &mut pulse_rng(9, 4));
        let c = sample_vacuum(&g, &mut pulse_rng(9, 5));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn splitstep_without_pump_conserves_power() {
        let g = make_grid(64, 4e-6, 8, 0.2e-12).unwrap();
        let p = CrystalParams { c_walkoff_q: 2e-5, c_gvm_t: 1e-12, ..CrystalParams::default() }.with_gain(0.0);
        let mut pair = sample_vacuum(&g, &mut pulse_rng(1, 0));
        pair.to_direct(&g).unwrap();
        let before = pair.signal.power() + pair.idler.power();
        let out = propagate_crystal_splitstep(&pair, &g, &p, 7).unwrap();
        assert_eq!(out.domain(), Domain::XT);
        let after = out.signal.power() + out.idler.power();
        assert!(((after - before) / before).abs() < 1e-10);
    }

    #[test]
    fn invalid_engine_config() {
        let c = EngineConfig { engine: EngineKind::FinitePump, steps: 0, seed: 0, pulses: 1 };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = EngineConfig { engine: EngineKind::PlaneWave, steps: 0, seed: 0, pulses: 0 };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
