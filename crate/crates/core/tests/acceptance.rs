//! Acceptance suite. Every test prints one `criterion N PASS|FAIL` line to the
//! real stdout (bypassing capture) and then asserts the same outcome.

use std::io::Write;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twinbeam::config::RunConfig;
use twinbeam::correlator::{CorrAccumulator, DetectionWindow};
use twinbeam::engine::{apply_planewave_gain, sample_vacuum, EngineConfig, EngineKind, SplitStep};
use twinbeam::experiment::Experiment;
use twinbeam::gain::{bandwidths, gain_functions, mean_photons, CrystalParams, DEFAULT_L_COH};
use twinbeam::grid::{make_grid, mirror_index, FieldPair};
use twinbeam::optics::{double_slit, Arm, ImagingSetup, Scheme, ZConfig};
use twinbeam::reference::{ascending, biphoton_conditioned, Model, Oracle};
use twinbeam::runner::{discriminate, fringe_period_pixels, load_config, stats};

fn report(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n:>2} {}  {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn preset() -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets/fig3.cfg");
    let mut cfg = load_config(&path).expect("preset parses");
    cfg.out_dir = std::env::temp_dir().join("twinbeam-acceptance");
    cfg
}

fn no_progress(_: u64, _: u64) {}

/// Sub-pixel position of the local minimum at `k` from a three-point parabola.
fn vertex(g: &[f64], k: usize) -> f64 {
    let (a, b, c) = (g[k - 1], g[k], g[k + 1]);
    let den = a - 2.0 * b + c;
    if den.abs() < f64::MIN_POSITIVE {
        return k as f64;
    }
    k as f64 + 0.5 * (a - c) / den
}

fn local_minima(g: &[f64], lo: usize, hi: usize) -> Vec<f64> {
    (lo.max(1)..hi.min(g.len() - 1))
        .filter(|&k| g[k] < g[k - 1] && g[k] <= g[k + 1])
        .map(|k| vertex(g, k))
        .collect()
}

#[test]
fn unitarity_sweep() {
    let grid = make_grid(64, 4e-6, 16, 2e-13).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let base = CrystalParams::default();
    let (mut worst_abs, mut worst_rel) = (0.0f64, 0.0f64);
    let (mut low, mut high) = (0usize, 0usize);
    for k in 0..100 {
        let gain = if k % 2 == 0 { rng.random_range(0.0..3.0) } else { rng.random_range(3.0..6.0) };
        let p = CrystalParams {
            delta0: rng.random_range(-8.0..8.0),
            c_walkoff_q: rng.random_range(-2e-5..2e-5),
            c_diffr_q: base.c_diffr_q * rng.random_range(-2.0..2.0),
            c_gvm_t: rng.random_range(-1e-12..1e-12),
            c_gvd_t: base.c_gvd_t * rng.random_range(-2.0..2.0),
            ..base.clone()
        }
        .with_gain(gain);
        let t = gain_functions(&p, &grid).unwrap();
        for i in 0..grid.len() {
            let (u2, v2) = (t.u_s[i].norm_sqr(), t.v_s[i].norm_sqr());
            let err = (u2 - v2 - 1.0).abs();
            if gain < 3.0 {
                worst_abs = worst_abs.max(err);
                low += 1;
            } else {
                worst_rel = worst_rel.max(err / (u2 * f64::EPSILON));
                high += 1;
            }
        }
    }
    let pass = worst_abs <= 1e-12 && worst_rel <= 10.0;
    report(
        1,
        pass,
        &format!(
            "gain < 3: max ||U|^2-|V|^2-1| = {worst_abs:.2e} <= 1e-12 over {low} points; \
             gain 3..6: max error = {worst_rel:.2} ulp(|U|^2) over {high} points"
        ),
    );
    assert!(pass);
}

#[test]
fn coherence_calibration() {
    let cfg = preset();
    let exp = cfg.experiment().unwrap();
    let bw = bandwidths(&exp.table).unwrap();
    let dl = (bw.l_coh / 16.6e-6 - 1.0).abs();
    let dt = (bw.tau_coh / 0.87e-12 - 1.0).abs();
    let pass = dl <= 0.02 && dt <= 0.02;
    report(
        2,
        pass,
        &format!("l_coh = {:.3} um, tau_coh = {:.4} ps (targets 16.6 um, 0.87 ps, 2%)", bw.l_coh * 1e6, bw.tau_coh * 1e12),
    );
    assert!(pass);
}

#[test]
fn thermal_single_beam_and_pair_law() {
    let mut cfg = preset();
    cfg.crystal = cfg.crystal.with_gain(1.0);
    cfg.out_dir = tempfile::tempdir().unwrap().keep();
    let r = stats(&cfg, 100_000).unwrap();
    let mean_ok = (r.expected_mean - 1f64.sinh().powi(2)).abs() < 1e-12 && (r.beam_mean_ratio - 1.0).abs() < 5.0 / 100_000f64.sqrt();
    let pass = r.beam_p_value > 0.01 && r.pair_p_value > 0.01 && mean_ok;
    report(
        3,
        pass,
        &format!(
            "beam p = {:.3}, mean ratio {:.4}; pair sampler p = {:.3} (chi2 {:.1})",
            r.beam_p_value, r.beam_mean_ratio, r.pair_p_value, r.pair_chi2
        ),
    );
    assert!(pass);
}

#[test]
fn twin_mode_covariance() {
    let grid = make_grid(16, 4e-6, 8, 2e-13).unwrap();
    let table = gain_functions(&CrystalParams::default(), &grid).unwrap();
    let modes: Vec<usize> = [(0, 0), (0, 1), (1, 2), (3, 5)].iter().map(|&(jt, jx)| grid.idx(jt, jx)).collect();
    let mut accs: Vec<CorrAccumulator> = modes.iter().map(|_| CorrAccumulator::new(1)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let out = apply_planewave_gain(&sample_vacuum(&grid, &mut rng), &table).unwrap();
        for (acc, &i) in accs.iter_mut().zip(&modes) {
            let s = out.signal.values[i].norm_sqr();
            let id = out.idler.values[grid.partner(i)].norm_sqr();
            acc.accumulate(&[id], s).unwrap();
        }
    }
    let mut worst_z = 0.0f64;
    for (acc, &i) in accs.iter().zip(&modes) {
        let r = acc.finalize().unwrap();
        let expect = (table.u_s[i] * table.v_s[i]).norm_sqr();
        let n = table.mean_n_signal(i);
        assert!((expect / (n * (n + 1.0)) - 1.0).abs() < 1e-9);
        worst_z = worst_z.max(((r.g[0] - expect) / r.stderr[0]).abs());
    }
    let mut diff2 = 0.0;
    let mean = mean_photons(0.0, 1.0);
    for _ in 0..10_000 {
        let (a, b) = twinbeam::photon::sample_pair_numbers(mean, &mut rng);
        diff2 += (a as f64 - b as f64).powi(2);
    }
    let pass = worst_z < 5.0 && diff2 == 0.0;
    report(
        4,
        pass,
        &format!("max |cov - |UV|^2| = {worst_z:.2} sigma over 4 mode pairs; pair-number difference variance {diff2}"),
    );
    assert!(pass);
}

#[test]
fn double_slit_far_field_pattern() {
    let cfg = preset();
    let exp = cfg.experiment().unwrap();
    assert_eq!(exp.setup.z_config, ZConfig::F);
    let pulses = cfg.engine.pulses as u64;
    let r = exp.run(pulses, &no_progress).unwrap().finalize().unwrap();
    let oracle = Oracle::new(&exp.setup, &exp.table).unwrap();
    let det = oracle.detected(Model::Pure, &exp.window).unwrap();
    let grid = &exp.grid;
    let n = grid.n_x();
    let pitch = exp.setup.plane(grid, Arm::I).pitch;
    let l_coh = bandwidths(&exp.table).unwrap().l_coh;
    let x0 = exp.setup.lambda * exp.setup.f / (2.0 * std::f64::consts::PI * l_coh);
    let peak = det.peak();
    let sel: Vec<usize> = (0..n).filter(|&j| det.x[j].abs() <= 3.0 * x0).collect();
    let m = sel.len() as f64;
    let rms = (sel.iter().map(|&j| ((r.g[j] - det.g[j]) / peak).powi(2)).sum::<f64>() / m).sqrt();
    let rms_se = (sel.iter().map(|&j| (r.stderr[j] / peak).powi(2)).sum::<f64>() / m).sqrt();
    let shape_ok = rms < 3.0 * rms_se;

    let period = fringe_period_pixels(&exp.setup, grid, 104e-6);
    // fringe minima inside the emission half-width, where the object dominates
    let det_asc = ascending(&det.g);
    let c = n / 2;
    let span = (x0 / pitch) as usize;
    let mins = local_minima(&det_asc, c - span, c + span);
    let spacing = (mins[mins.len() - 1] - mins[0]) / (mins.len() - 1) as f64;
    let spacing_ok = mins.len() >= 2 && (spacing - period).abs() <= 1.0;

    let null_expected = exp.setup.lambda * exp.setup.f / 17e-6 / pitch;
    let search = (period / 4.0).floor() as i64;
    let mut nulls = Vec::new();
    for side in [-1.0, 1.0] {
        let centre = (c as f64 + side * null_expected).round() as i64;
        let k = (centre - search..=centre + search)
            .min_by(|&a, &b| det_asc[a as usize].total_cmp(&det_asc[b as usize]))
            .unwrap();
        nulls.push(((k - c as i64) as f64, det_asc[k as usize] / peak));
    }
    let nulls_ok = nulls.iter().all(|&(k, depth)| (k.abs() - null_expected).abs() <= 2.0 && depth < 1e-6);

    let pass = shape_ok && spacing_ok && nulls_ok;
    report(
        5,
        pass,
        &format!(
            "{pulses} pulses: RMS dev {rms:.3e} vs 3 x stderr {:.3e} over {} px; fringe spacing {spacing:.2} px from {} minima vs {period:.2} px; \
             envelope nulls at {:+.0}, {:+.0} px (depth {:.0e}, {:.0e}) vs +-{null_expected:.1} px",
            3.0 * rms_se,
            sel.len(),
            mins.len(),
            nulls[0].0,
            nulls[1].0,
            nulls[0].1,
            nulls[1].1
        ),
    );
    assert!(pass);
}

#[test]
fn double_slit_near_field_image() {
    let mut cfg = preset();
    cfg.z_config = ZConfig::TwoF;
    let exp = cfg.experiment().unwrap();
    let pulses = cfg.engine.pulses as u64;
    let r = exp.run(pulses, &no_progress).unwrap().finalize().unwrap();
    let grid = &exp.grid;
    let n = grid.n_x();
    let x: Vec<f64> = (0..n).map(|j| exp.setup.plane(grid, Arm::I).coordinate(j)).collect();
    let peak = r.g.iter().cloned().fold(f64::MIN, f64::max);
    let (a, d) = (17e-6, 104e-6);
    let l_coh = bandwidths(&exp.table).unwrap().l_coh;
    let mut bands = Vec::new();
    for side in [-1.0, 1.0] {
        let idx: Vec<usize> = (0..n).filter(|&j| side * x[j] > 0.0 && side * x[j] <= d).collect();
        let w: f64 = idx.iter().map(|&j| r.g[j].max(0.0)).sum();
        let centre = idx.iter().map(|&j| r.g[j].max(0.0) * x[j]).sum::<f64>() / w;
        let top = idx.iter().map(|&j| r.g[j]).fold(f64::MIN, f64::max);
        let above: Vec<f64> = idx.iter().filter(|&&j| r.g[j] >= top / 2.0).map(|&j| x[j]).collect();
        let fwhm = above.iter().cloned().fold(f64::MIN, f64::max) - above.iter().cloned().fold(f64::MAX, f64::min) + grid.dx();
        bands.push((centre, fwhm));
    }
    let bands_ok = bands.iter().enumerate().all(|(k, &(centre, fwhm))| {
        let target = if k == 0 { -d / 2.0 } else { d / 2.0 };
        (centre - target).abs() <= a / 2.0 && fwhm >= a && fwhm <= a + 2.0 * l_coh
    });
    let gap = r.g[0] / peak;
    let pass = bands_ok && gap < 0.05;
    report(
        6,
        pass,
        &format!(
            "bands at {:+.1} um / {:+.1} um, FWHM {:.1} / {:.1} um; G(0)/peak = {gap:.4} +- {:.4} (< 0.05)",
            bands[0].0 * 1e6,
            bands[1].0 * 1e6,
            bands[0].1 * 1e6,
            bands[1].1 * 1e6,
            r.stderr[0] / peak
        ),
    );
    assert!(pass);
}

#[test]
fn entanglement_discriminator() {
    let mut cfg = preset();
    cfg.out_dir = tempfile::tempdir().unwrap().keep();
    let d = discriminate(&cfg).unwrap();
    let w_flat = d
        .cells
        .iter()
        .find(|c| c.model == Model::W && c.z == ZConfig::TwoF)
        .map(|c| c.flatness)
        .unwrap();
    let verdicts_ok = d.verdicts.iter().all(|v| v.1);
    let pass = verdicts_ok && w_flat < 1e-10;
    let detail: Vec<String> = d.verdicts.iter().map(|(m, _, why)| format!("{}: {why}", m.name())).collect();
    report(7, pass, &format!("{}; W 2f flatness {w_flat:.1e}", detail.join("; ")));
    assert!(pass);
}

#[test]
fn visibility_loss_with_detection_time() {
    let cfg = preset();
    let exp = cfg.experiment().unwrap();
    let oracle = Oracle::new(&exp.setup, &exp.table).unwrap();
    let tau_coh = bandwidths(&exp.table).unwrap().tau_coh;
    let (mean_array, mean_point) = oracle.mean_intensities(Model::Pure).unwrap();
    let ratio_at = |tau_d: f64| {
        let w = DetectionWindow::new(&exp.grid, tau_d).unwrap();
        let g = oracle.detected(Model::Pure, &w).unwrap().g[0];
        (g / (mean_array[0] * mean_point), w.len())
    };
    let (r1, n1) = ratio_at(tau_coh);
    let (r10, n10) = ratio_at(10.0 * tau_coh);
    let drop = r1 / r10;
    let pass = (5.0..=20.0).contains(&drop);
    report(
        8,
        pass,
        &format!(
            "G/background at the central fringe: {r1:.3e} ({n1} samples) -> {r10:.3e} ({n10} samples); drop x{drop:.2} (1/tau_D: x10, accepted 5..20)"
        ),
    );
    assert!(pass);
}

#[test]
fn resolution_loss_with_narrow_pump() {
    let grid = make_grid(512, 4.25e-6, 2, 10e-12).unwrap();
    let object = double_slit(&grid, 17e-6, 104e-6).unwrap();
    let n = grid.n_x();
    let open: Vec<usize> = (0..n).filter(|&j| object[mirror_index(j, n)].norm_sqr() > 0.5).collect();
    let mut rows = Vec::new();
    for ratio in [20.0, 10.0, 5.0, 3.0, 2.0, 1.0] {
        let p = CrystalParams { w_p: ratio * DEFAULT_L_COH, tau_p: 1e-9, ..CrystalParams::default() };
        let setup = ImagingSetup {
            scheme: Scheme::A,
            z_config: ZConfig::TwoF,
            object: object.clone(),
            fixed_point: 0.0,
            f: 0.05,
            lambda: p.lambda,
        };
        let engine = EngineConfig { engine: EngineKind::FinitePump, steps: 64, seed: 20240917, pulses: 4000 };
        let exp = Experiment::new(grid.clone(), &p, setup, engine, Model::Pure, 20e-12).unwrap();
        let r = exp.run(4000, &no_progress).unwrap().finalize().unwrap();
        let band = open.iter().map(|&j| r.g[j]).sum::<f64>() / open.len() as f64;
        let band_se = open.iter().map(|&j| r.stderr[j].powi(2)).sum::<f64>().sqrt() / open.len() as f64;
        let gap = r.g[0];
        let raw = (band - gap) / (band + gap);
        let se = 2.0 / (band + gap).powi(2) * ((gap * band_se).powi(2) + (band * r.stderr[0]).powi(2)).sqrt();
        rows.push((ratio, raw.max(0.0), se, raw));
    }
    let monotone = rows.windows(2).all(|w| w[1].1 <= w[0].1 + (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let last = rows.last().unwrap().1;
    let pass = monotone && last < 0.2;
    let table: Vec<String> = rows.iter().map(|r| format!("{}:{:.3}+-{:.3}", r.0, r.1, r.2)).collect();
    report(9, pass, &format!("w_p/l_coh:contrast {}", table.join(" ")));
    assert!(pass);
}

#[test]
fn biphoton_histogram_matches_macroscopic_fringes() {
    let cfg = preset();
    let grid = cfg.grid().unwrap();
    let setup = cfg.setup(&grid).unwrap();
    let micro = gain_functions(&cfg.crystal.with_gain(0.05), &grid).unwrap();
    let macro_table = gain_functions(&cfg.crystal.with_gain(1.0), &grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.engine.seed);
    let hist = biphoton_conditioned(&setup, &micro, 100_000, &mut rng).unwrap();
    let (chi2, dof, p) = hist.chi_square().unwrap();

    let macro_g = Oracle::new(&setup, &macro_table).unwrap().curve(Model::Pure).unwrap();
    let peak = macro_g.peak();
    let norm: Vec<f64> = macro_g.g.iter().map(|v| v / peak).collect();
    let asc_macro = ascending(&norm);
    let counts: Vec<f64> = hist.counts[0].iter().map(|&c| c as f64).collect();
    let asc_counts = ascending(&counts);
    let n = grid.n_x();
    let c = n / 2;
    let pitch = setup.plane(&grid, Arm::I).pitch;
    let l_coh = bandwidths(&macro_table).unwrap().l_coh;
    let span = (2.0 * setup.lambda * setup.f / (2.0 * std::f64::consts::PI * l_coh) / pitch) as usize;
    let period = fringe_period_pixels(&setup, &grid, 104e-6);
    let half = (period / 2.0).round() as i64;
    // only minima flanked by a resolved fringe in the histogram
    let macro_mins: Vec<f64> = local_minima(&asc_macro, c - span, c + span)
        .into_iter()
        .filter(|&m| {
            let k0 = m.round() as i64;
            let flank = |r: std::ops::RangeInclusive<i64>| r.map(|k| asc_counts[k as usize]).fold(0.0, f64::max);
            flank(k0 - half..=k0 - 1).min(flank(k0 + 1..=k0 + half)) >= 100.0
        })
        .collect();
    let mut worst = 0.0f64;
    for &m in &macro_mins {
        // least-squares parabola through the counts around the macroscopic minimum
        let k0 = m.round() as i64;
        let (mut s, mut sx, mut sx2, mut sx3, mut sx4, mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for dk in -6..=6i64 {
            let y = asc_counts[(k0 + dk) as usize];
            let xk = dk as f64;
            s += 1.0;
            sx += xk;
            sx2 += xk * xk;
            sx3 += xk.powi(3);
            sx4 += xk.powi(4);
            sy += y;
            sxy += xk * y;
            sx2y += xk * xk * y;
        }
        let a = solve3([[sx4, sx3, sx2], [sx3, sx2, sx], [sx2, sx, s]], [sx2y, sxy, sy]);
        let v = k0 as f64 - a[1] / (2.0 * a[0]);
        worst = worst.max((v - m).abs());
    }
    let pass = p > 0.01 && !macro_mins.is_empty() && worst <= 1.0;
    report(
        10,
        pass,
        &format!(
            "1e5 events at gain 0.05: chi2 {chi2:.1}/{dof} (p = {p:.3}); {} resolved fringe minima of the gain-1 pattern at {:?} px, worst offset {worst:.2} px",
            macro_mins.len(),
            macro_mins.iter().map(|m| format!("{:+.2}", m - c as f64)).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

/// Cramer's rule for the 3x3 normal equations.
fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = b[r];
        }
        *o = det(mk) / d;
    }
    out
}

#[test]
fn splitstep_matches_planewave() {
    let grid = make_grid(64, 20e-6, 16, 1e-12).unwrap();
    let params = CrystalParams { w_p: 1e3, tau_p: 1e3, ..CrystalParams::default() };
    let table = gain_functions(&params, &grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vacuum = sample_vacuum(&grid, &mut rng);
    let exact = apply_planewave_gain(&vacuum, &table).unwrap();
    let norm = (exact.signal.power() + exact.idler.power()).sqrt();
    let error = |steps: usize| -> f64 {
        let out: FieldPair = SplitStep::new(&grid, &params, steps).unwrap().propagate(&vacuum).unwrap();
        let diff: f64 = out
            .signal
            .values
            .iter()
            .zip(&exact.signal.values)
            .chain(out.idler.values.iter().zip(&exact.idler.values))
            .map(|(a, b): (&Complex64, &Complex64)| (a - b).norm_sqr())
            .sum();
        diff.sqrt() / norm
    };
    let steps = [16usize, 32, 64, 128];
    let errs: Vec<f64> = steps.iter().map(|&s| error(s)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let e64 = errs[2];
    let pass = e64 < 1e-3 && orders.iter().all(|o| (1.8..=2.2).contains(o));
    report(
        11,
        pass,
        &format!(
            "relative RMS vs plane wave at 64 steps {e64:.2e}; errors {:?}; observed orders {:?}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}
