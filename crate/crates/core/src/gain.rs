//! Phase mismatch and plane-wave parametric gain.
//!
//! The transfer functions are the undepleted-pump two-mode solution
//!
//! ```text
//! U = e^{i D/2} [cosh(G) - i (D/2) sinh(G)/G]
//! V = e^{i D/2} S sinh(G)/G,        G^2 = S^2 - D^2/4
//! ```
//!
//! with `S = sigma l_c` and `D = Delta(q, Omega) l_c`. `cosh(G)` and
//! `sinh(G)/G` are even in `G`, so they are evaluated as functions of `G^2`
//! and continue smoothly to the oscillating branch `G^2 < 0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{mirror_index, Grid};

/// Below this `|G|` the hyperbolic pair is replaced by its Taylor series.
const SERIES_THRESHOLD: f64 = 1e-4;

/// Default crystal length: 4 mm.
pub const DEFAULT_L_C: f64 = 4e-3;
/// Default gain `sigma l_c` of the reference configuration.
pub const DEFAULT_GAIN: f64 = 5.0;
/// Spatial coherence length the defaults are calibrated to.
pub const DEFAULT_L_COH: f64 = 16.6e-6;
/// Temporal coherence time the defaults are calibrated to.
pub const DEFAULT_TAU_COH: f64 = 0.87e-12;

/// Crystal, pump and mismatch-polynomial parameters (SI units).
#[derive(Clone, Debug, PartialEq)]
pub struct CrystalParams {
    /// Parametric gain rate, 1/m.
    pub sigma: f64,
    pub l_c: f64,
    /// Mismatch at `q = 0, Omega = 0` times `l_c`.
    pub delta0: f64,
    /// Linear spatial walk-off coefficient, m.
    pub c_walkoff_q: f64,
    /// Diffraction coefficient, m^2.
    pub c_diffr_q: f64,
    /// Group-velocity mismatch coefficient, s.
    pub c_gvm_t: f64,
    /// Group-velocity dispersion coefficient, s^2.
    pub c_gvd_t: f64,
    /// Down-converted carrier wavelength.
    pub lambda: f64,
    /// Pump waist (field amplitude `exp(-x^2/w_p^2)`).
    pub w_p: f64,
    /// Pump duration (field amplitude `exp(-t^2/tau_p^2)`).
    pub tau_p: f64,
}

impl Default for CrystalParams {
    /// The reference 4 mm crystal with mismatch coefficients calibrated to a
    /// 16.6 um coherence length and a 0.87 ps coherence time.
    fn default() -> Self {
        let mut p = CrystalParams {
            sigma: DEFAULT_GAIN / DEFAULT_L_C,
            l_c: DEFAULT_L_C,
            delta0: 0.0,
            c_walkoff_q: 0.0,
            c_diffr_q: 0.0,
            c_gvm_t: 0.0,
            c_gvd_t: 0.0,
            lambda: 702e-9,
            w_p: 332e-6,
            tau_p: 1.5e-12,
        };
        let (cq, ct) = calibrate(DEFAULT_GAIN, DEFAULT_L_COH, DEFAULT_TAU_COH)
            .expect("reference calibration is solvable");
        p.c_diffr_q = cq;
        p.c_gvd_t = ct;
        p
    }
}

impl CrystalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l_c", self.l_c),
            ("lambda", self.lambda),
            ("w_p", self.w_p),
            ("tau_p", self.tau_p),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!("sigma = {} must be >= 0", self.sigma)));
        }
        let finite = [
            ("delta0", self.delta0),
            ("c_walkoff_q", self.c_walkoff_q),
            ("c_diffr_q", self.c_diffr_q),
            ("c_gvm_t", self.c_gvm_t),
            ("c_gvd_t", self.c_gvd_t),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} must be finite")));
            }
        }
        Ok(())
    }

    /// Dimensionless gain `sigma l_c`.
    pub fn gain(&self) -> f64 {
        self.sigma * self.l_c
    }

    /// Copy with `sigma` set so that `sigma l_c = gain`.
    pub fn with_gain(&self, gain: f64) -> Self {
        CrystalParams {
            sigma: gain / self.l_c,
            ..self.clone()
        }
    }
}

/// Signal-beam mismatch `Delta(q, Omega) l_c`.
pub fn mismatch(q: f64, omega: f64, p: &CrystalParams) -> f64 {
    p.delta0 + p.c_walkoff_q * q + p.c_diffr_q * q * q + p.c_gvm_t * omega + p.c_gvd_t * omega * omega
}

/// Idler-beam mismatch: linear terms change sign, so that the idler at
/// `(-q, -Omega)` shares the signal's mismatch at `(q, Omega)`.
pub fn mismatch_idler(q: f64, omega: f64, p: &CrystalParams) -> f64 {
    mismatch(-q, -omega, p)
}

/// `(cosh G, sinh(G)/G)` as functions of `G^2`.
fn hyperbolic_pair(g2: f64) -> (f64, f64) {
    if g2.abs() < SERIES_THRESHOLD * SERIES_THRESHOLD {
        (1.0 + g2 / 2.0 + g2 * g2 / 24.0, 1.0 + g2 / 6.0 + g2 * g2 / 120.0)
    } else if g2 > 0.0 {
        let g = g2.sqrt();
        (g.cosh(), g.sinh() / g)
    } else {
        let k = (-g2).sqrt();
        (k.cos(), k.sin() / k)
    }
}

/// `(U, V)` for dimensionless mismatch `d = Delta l_c` and gain `s = sigma l_c`.
pub fn transfer(d: f64, s: f64) -> (Complex64, Complex64) {
    let (c, sn) = hyperbolic_pair(s * s - d * d / 4.0);
    let phase = Complex64::from_polar(1.0, d / 2.0);
    let u = phase * Complex64::new(c, -(d / 2.0) * sn);
    let v = phase * (s * sn);
    (u, v)
}

/// Mean photon number `|V|^2` at mismatch `d` and gain `s`.
pub fn mean_photons(d: f64, s: f64) -> f64 {
    let (_, sn) = hyperbolic_pair(s * s - d * d / 4.0);
    (s * sn).powi(2)
}

/// Plane-wave gain functions sampled on a grid's `(q, Omega)` lattice.
///
/// Arrays use the grid layout: row = frequency slot, column = wave-vector
/// slot. The idler arrays are filled by mirroring so that
/// `U_I[partner(i)] == U_S[i]` holds exactly, including self-paired slots.
#[derive(Clone, Debug)]
pub struct GainTable {
    pub params: CrystalParams,
    pub grid: Grid,
    pub u_s: Vec<Complex64>,
    pub v_s: Vec<Complex64>,
    pub u_i: Vec<Complex64>,
    pub v_i: Vec<Complex64>,
    /// Idler mean photon number `|V_I|^2`.
    pub mean_n: Vec<f64>,
    /// Signal mismatch `Delta(q, Omega) l_c` per lattice point.
    pub mismatch_s: Vec<f64>,
}

impl GainTable {
    /// Pair amplitude `U_S(q, Omega) V_I(-q, -Omega)` at flat spectral index `i`.
    pub fn pair_amplitude(&self, i: usize) -> Complex64 {
        self.u_s[i] * self.v_i[self.grid.partner(i)]
    }

    /// Free-propagation phase `exp(-i Delta l_c / 2)` of the signal mode `i`
    /// over the crystal. Multiplying the engine output by it (and the idler by
    /// the mirrored value) moves the fields from the co-moving frame to the
    /// lab frame at the exit face.
    pub fn exit_phase_signal(&self, i: usize) -> Complex64 {
        Complex64::from_polar(1.0, -0.5 * self.mismatch_s[i])
    }

    pub fn exit_phase_idler(&self, i: usize) -> Complex64 {
        self.exit_phase_signal(self.grid.partner(i))
    }

    /// Pair amplitude `<a_S(q, Omega) a_I(-q, -Omega)>` at the exit face.
    ///
    /// The quadratic phases of `U_S` and `V_I` cancel against free
    /// propagation, leaving only the phase of the hyperbolic bracket.
    pub fn exit_pair_amplitude(&self, i: usize) -> Complex64 {
        self.pair_amplitude(i) * Complex64::from_polar(1.0, -self.mismatch_s[i])
    }

    /// Signal mean photon number `|V_S|^2`.
    pub fn mean_n_signal(&self, i: usize) -> f64 {
        self.v_s[i].norm_sqr()
    }
}

/// Evaluates `U`, `V` for both beams at every lattice point.
pub fn gain_functions(params: &CrystalParams, grid: &Grid) -> Result<GainTable> {
    params.validate()?;
    let (n_x, n_t) = (grid.n_x(), grid.n_t());
    let s = params.gain();
    let mut u_s = Vec::with_capacity(grid.len());
    let mut v_s = Vec::with_capacity(grid.len());
    let mut mismatch_s = Vec::with_capacity(grid.len());
    for jt in 0..n_t {
        let omega = grid.omega(jt);
        for jx in 0..n_x {
            let d = mismatch(grid.q(jx), omega, params);
            let (u, v) = transfer(d, s);
            if !(u.re.is_finite() && u.im.is_finite() && v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numeric(format!(
                    "gain functions not finite at q = {:e} rad/m, Omega = {:e} rad/s (mismatch {d}, gain {s})",
                    grid.q(jx),
                    omega
                )));
            }
            u_s.push(u);
            v_s.push(v);
            mismatch_s.push(d);
        }
    }
    let mut u_i = vec![Complex64::default(); grid.len()];
    let mut v_i = vec![Complex64::default(); grid.len()];
    for jt in 0..n_t {
        for jx in 0..n_x {
            let src = grid.idx(mirror_index(jt, n_t), mirror_index(jx, n_x));
            let dst = grid.idx(jt, jx);
            u_i[dst] = u_s[src];
            v_i[dst] = v_s[src];
        }
    }
    let mean_n = v_i.iter().map(|v| v.norm_sqr()).collect();
    Ok(GainTable {
        params: params.clone(),
        grid: grid.clone(),
        u_s,
        v_s,
        u_i,
        v_i,
        mean_n,
        mismatch_s,
    })
}

/// Emission bandwidths and the matching coherence scales.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bandwidths {
    pub q0: f64,
    pub omega0: f64,
    pub l_coh: f64,
    pub tau_coh: f64,
}

/// Half-width at half-maximum of `<n>` along `q` (at `Omega = 0`) and along
/// `Omega` (at `q = 0`).
///
/// The crossing is bracketed on the lattice and then refined by bisection on
/// the continuous gain curve, so coarse lattices still give accurate widths.
pub fn bandwidths(table: &GainTable) -> Result<Bandwidths> {
    let grid = &table.grid;
    let p = &table.params;
    let s = p.gain();
    if table.mean_n.iter().all(|&n| n == 0.0) {
        return Err(Error::Numeric("zero-gain table has no emission bandwidth".into()));
    }
    let q_profile = |q: f64| mean_photons(mismatch(q, 0.0, p), s);
    let w_profile = |w: f64| mean_photons(mismatch(0.0, w, p), s);
    let q0 = half_width(&q_profile, grid.dq(), grid.n_x() / 2).ok_or_else(|| {
        Error::Numeric("spatial half maximum not reached inside the q lattice".into())
    })?;
    let omega0 = half_width(&w_profile, grid.d_omega(), grid.n_t() / 2).ok_or_else(|| {
        Error::Numeric("temporal half maximum not reached inside the Omega lattice".into())
    })?;
    Ok(Bandwidths {
        q0,
        omega0,
        l_coh: 1.0 / q0,
        tau_coh: 1.0 / omega0,
    })
}

fn half_width(profile: &dyn Fn(f64) -> f64, step: f64, n_pos: usize) -> Option<f64> {
    let peak = profile(0.0);
    if peak <= 0.0 {
        return None;
    }
    let half = peak / 2.0;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..n_pos {
        let x = k as f64 * step;
        if profile(x) < half {
            hi = Some(x);
            break;
        }
        lo = x;
    }
    let mut hi = hi?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if profile(mid) >= half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Dimensionless mismatch at which `<n>` falls to half its phase-matched value.
pub fn half_max_mismatch(gain: f64) -> Result<f64> {
    let peak = mean_photons(0.0, gain);
    if peak <= 0.0 {
        return Err(Error::Numeric("half maximum undefined at zero gain".into()));
    }
    // <n> decreases monotonically until its first zero at D/2 = sqrt(S^2 + pi^2).
    let mut lo = 0.0;
    let mut hi = 2.0 * (gain * gain + std::f64::consts::PI.powi(2)).sqrt();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_photons(mid, gain) >= peak / 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Diffraction and dispersion coefficients `(c_diffr_q, c_gvd_t)` placing the
/// half maxima of `<n>` at `1/l_coh` and `1/tau_coh` for gain `sigma l_c`.
///
/// Diffraction and group-velocity dispersion enter with opposite signs, as in
/// a crystal with normal dispersion, so the phase-matched region in
/// `(q, Omega)` is the X-shaped hyperbola `c_diffr_q q^2 + c_gvd_t Omega^2 = 0`.
pub fn calibrate(gain: f64, l_coh: f64, tau_coh: f64) -> Result<(f64, f64)> {
    if !(l_coh > 0.0 && tau_coh > 0.0) {
        return Err(Error::Config("coherence scales must be positive".into()));
    }
    let d_half = half_max_mismatch(gain)?;
    Ok((-d_half * l_coh * l_coh, d_half * tau_coh * tau_coh))
}

/// Number of resolvable pixels `(w_p / l_coh)^2`.
pub fn resolvable_pixels(params: &CrystalParams, bw: &Bandwidths) -> f64 {
    (params.w_p / bw.l_coh).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;

    #[test]
    fn mismatch_polynomial() {
        let p = CrystalParams {
            delta0: 0.0,
            c_walkoff_q: 0.0,
            c_diffr_q: 2.0,
            c_gvm_t: 0.0,
            c_gvd_t: 0.0,
            ..CrystalParams::default()
        };
        assert_eq!(mismatch(0.0, 0.0, &p), 0.0);
        assert_eq!(mismatch(3.0, 0.0, &p), 18.0);
        assert_eq!(mismatch(-3.0, 0.0, &p), 18.0);
        let p = CrystalParams { c_walkoff_q: 1.5, c_gvm_t: 0.5, ..p };
        assert_eq!(mismatch_idler(1.0, 2.0, &p), mismatch(-1.0, -2.0, &p));
    }

    #[test]
    fn degenerate_point_values() {
        let (u, v) = transfer(0.0, 1.0);
        assert_relative_eq!(u.re, 1.0f64.cosh(), max_relative = 1e-14);
        assert!(u.im.abs() < 1e-15);
        assert_relative_eq!(v.re, 1.0f64.sinh(), max_relative = 1e-14);
        assert_relative_eq!(v.norm_sqr(), 1.3810978455418157, max_relative = 1e-12);
        assert!((u.re - 1.5431).abs() < 1e-4 && (v.re - 1.1752).abs() < 1e-4);
    }

    #[test]
    fn no_pump_is_identity() {
        for d in [-7.0, -1.0, 0.0, 0.3, 12.0] {
            let (u, v) = transfer(d, 0.0);
            assert!((u - Complex64::new(1.0, 0.0)).norm() < 1e-14);
            assert_eq!(v.norm(), 0.0);
        }
    }

    #[test]
    fn low_gain_limit_is_sinc_squared() {
        let s = 0.1;
        for k in 0..=100 {
            let d = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / 100.0;
            let x = d / 2.0;
            let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
            let approx = s * s * sinc * sinc;
            assert_relative_eq!(mean_photons(d, s), approx, max_relative = 0.01);
        }
    }

    #[test]
    fn continuity_across_zero_gamma() {
        let s = 0.8;
        let n = 20001;
        let (lo, hi) = (2.0 * s - 1e-3, 2.0 * s + 1e-3);
        let mut prev = transfer(lo, s);
        for k in 1..n {
            let d = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let cur = transfer(d, s);
            assert!((cur.0 - prev.0).norm() < 1e-6 && (cur.1 - prev.1).norm() < 1e-6);
            prev = cur;
        }
        // Series branch against the closed form just outside its threshold.
        let d_in = 2.0 * (s * s - 0.99e-8f64).sqrt();
        let d_out = 2.0 * (s * s - 1.01e-8f64).sqrt();
        let (a, b) = (transfer(d_in, s), transfer(d_out, s));
        assert!((a.0 - b.0).norm() < 1e-8 && (a.1 - b.1).norm() < 1e-8);
    }

    #[test]
    fn table_is_unitary_and_mirrored() {
        let g = make_grid(64, 4e-6, 16, 0.2e-12).unwrap();
        let p = CrystalParams {
            c_walkoff_q: 3e-6,
            c_gvm_t: 2e-13,
            delta0: 0.4,
            ..CrystalParams::default()
        };
        let t = gain_functions(&p, &g).unwrap();
        for i in 0..g.len() {
            let uni = t.u_s[i].norm_sqr() - t.v_s[i].norm_sqr();
            // a few ulps of |U|^2 exceed 1e-12 once |U|^2 is in the thousands
            let tol = (2e-15 * t.u_s[i].norm_sqr()).max(1e-12);
            assert!((uni - 1.0).abs() < tol);
            let j = g.partner(i);
            assert_eq!(t.u_i[j], t.u_s[i]);
            assert_eq!(t.mean_n[j], t.v_s[i].norm_sqr());
            assert!(t.mean_n[i] >= 0.0);
        }
    }

    #[test]
    fn zero_gain_table_has_no_bandwidth() {
        let g = make_grid(64, 4e-6, 16, 0.2e-12).unwrap();
        let t = gain_functions(&CrystalParams::default().with_gain(0.0), &g).unwrap();
        assert!(t.mean_n.iter().all(|&n| n == 0.0));
        assert!(matches!(bandwidths(&t), Err(Error::Numeric(_))));
    }

    #[test]
    fn resolvable_pixel_counts() {
        let p = CrystalParams::default();
        let bw = |l| Bandwidths { q0: 1.0 / l, omega0: 1.0, l_coh: l, tau_coh: 1.0 };
        assert_relative_eq!(resolvable_pixels(&p, &bw(16.6e-6)), 400.0, max_relative = 1e-12);
        assert_relative_eq!(resolvable_pixels(&p, &bw(p.w_p)), 1.0, max_relative = 1e-12);
        assert_relative_eq!(resolvable_pixels(&p, &bw(p.w_p / 2.0)), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = CrystalParams { l_c: 0.0, ..CrystalParams::default() };
        assert!(matches!(p.validate(), Err(Error::Config(_))));
        let p = CrystalParams { sigma: -1.0, ..CrystalParams::default() };
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }
}
