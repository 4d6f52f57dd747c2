//! Command orchestration: Monte-Carlo runs, oracle curves, the discriminator
//! matrix and the photon-statistics suite, with CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::config::RunConfig;
use crate::correlator::{frequency_component, visibility, CorrResult};
use crate::error::{Error, Result};
use crate::gain::{gain_functions, mean_photons};
use crate::grid::{make_grid, mirror_index};
use crate::optics::{Arm, ImagingSetup, ZConfig};
use crate::photon::{reduced_beam_is_thermal, sample_pair_numbers, ModeStatistics};
use crate::reference::{ascending, image_contrast, Model, Oracle, OracleResult};

/// Environment variable overriding the worker-thread count.
pub const WORKERS_ENV: &str = "TWINBEAM_WORKERS";

/// Command-line overrides applied on top of a parsed configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub pulses: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.engine.seed = s;
        }
        if let Some(p) = self.pulses {
            if p < 1 {
                return Err(Error::Config(format!("pulses: {p} must be >= 1")));
            }
            cfg.engine.pulses = p;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        Ok(())
    }
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{WORKERS_ENV} = '{v}' must be a positive integer"))),
        },
    }
}

/// Finalized Monte-Carlo run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Array-plane coordinates in DFT slot order.
    pub x: Vec<f64>,
    pub result: CorrResult,
    pub wall_seconds: f64,
    pub files: Vec<PathBuf>,
}

/// Runs the configured experiment and writes `correlation.csv`,
/// `g_norm.csv` and `manifest.cfg` into the output directory.
pub fn run_experiment(cfg: &RunConfig, workers: Option<usize>, quiet: bool) -> Result<RunOutput> {
    let start = Instant::now();
    let exp = cfg.experiment()?;
    let pulses = cfg.engine.pulses as u64;
    let progress = |done: u64, total: u64| {
        if !quiet && (done == total || done % 16 == 0) {
            eprintln!("[twinbeam] batch {done}/{total} ({:.1} s)", start.elapsed().as_secs_f64());
        }
    };
    let acc = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(|| exp.run(pulses, &progress))?,
        None => exp.run(pulses, &progress)?,
    };
    let result = acc.finalize()?;
    if let Some(j) = result.g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("correlation is not finite at pixel {j}")));
    }
    let plane = exp.setup.plane(&exp.grid, exp.setup.array_arm());
    let x: Vec<f64> = (0..plane.n).map(|j| plane.coordinate(j)).collect();
    let wall_seconds = start.elapsed().as_secs_f64();

    fs::create_dir_all(&cfg.out_dir)?;
    let corr = cfg.out_dir.join("correlation.csv");
    fs::write(&corr, correlation_csv(&x, &result))?;
    let norm = cfg.out_dir.join("g_norm.csv");
    let mut text = String::from("x_m,G_norm\n");
    if let Ok(gn) = result.normalized() {
        for j in plane.ascending() {
            let _ = writeln!(text, "{:e},{:e}", x[j], gn[j]);
        }
    }
    fs::write(&norm, text)?;
    let manifest = cfg.out_dir.join("manifest.cfg");
    fs::write(&manifest, manifest_text(cfg, wall_seconds, workers))?;
    if !quiet {
        eprintln!("[twinbeam] {} pulses in {wall_seconds:.1} s -> {}", pulses, cfg.out_dir.display());
    }
    Ok(RunOutput { x, result, wall_seconds, files: vec![corr, norm, manifest] })
}

/// CSV with columns `x_m,G,G_stderr,background,mean_I_array,mean_I_point`,
/// rows in increasing `x`.
pub fn correlation_csv(x: &[f64], r: &CorrResult) -> String {
    let n = x.len();
    let mut s = String::from("x_m,G,G_stderr,background,mean_I_array,mean_I_point\n");
    for k in 0..n {
        let j = (k + n / 2) % n;
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            x[j], r.g[j], r.stderr[j], r.background[j], r.mean_array[j], r.mean_point
        );
    }
    s
}

fn manifest_text(cfg: &RunConfig, wall: f64, workers: Option<usize>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# twinbeam {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# seed {}", cfg.engine.seed);
    let _ = writeln!(s, "# wall_time_s {wall:.3}");
    match workers {
        Some(n) => {
            let _ = writeln!(s, "# workers {n}");
        }
        None => {
            let _ = writeln!(s, "# workers {}", rayon::current_num_threads());
        }
    }
    s.push_str(&cfg.to_config_text());
    s
}

/// Plain and detection-window oracle curves for the configured model.
pub struct OracleOutput {
    pub plain: OracleResult,
    pub detected: OracleResult,
    pub file: PathBuf,
}

/// Writes `oracle.csv` (`x_m,G,G_detected`, increasing `x`).
pub fn run_oracle(cfg: &RunConfig) -> Result<OracleOutput> {
    let exp = cfg.experiment()?;
    let oracle = Oracle::new(&exp.setup, &exp.table)?;
    let plain = oracle.curve(cfg.model)?;
    let detected = oracle.detected(cfg.model, &exp.window)?;
    let n = plain.x.len();
    let mut s = String::from("x_m,G,G_detected\n");
    for k in 0..n {
        let j = (k + n / 2) % n;
        let _ = writeln!(s, "{:e},{:e},{:e}", plain.x[j], plain.g[j], detected.g[j]);
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let file = cfg.out_dir.join("oracle.csv");
    fs::write(&file, s)?;
    Ok(OracleOutput { plain, detected, file })
}

/// Fringe spacing `lambda f / d` in detector pixels.
pub fn fringe_period_pixels(setup: &ImagingSetup, grid: &crate::grid::Grid, d: f64) -> f64 {
    let pitch = setup.plane(grid, Arm::S).pitch;
    setup.lambda * setup.f / d / pitch
}

/// Contrast figures of one curve (DFT slot order).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contrasts {
    /// Visibility within one fringe spacing of the pattern center.
    pub fringe: f64,
    /// Strength of the fringe frequency relative to the mean over four periods.
    pub fringe_component: f64,
    /// Two-band image contrast against the (inverted) object.
    pub image: f64,
}

/// Contrasts of an array-plane curve; `period` is the fringe spacing in pixels.
pub fn contrasts(g: &[f64], object: &[Complex64], period: f64) -> Result<Contrasts> {
    let n = g.len();
    let asc = ascending(g);
    let c = n / 2;
    let half = period.round().max(1.0) as usize;
    let fringe = visibility(&asc, c.saturating_sub(half)..(c + half + 1).min(n))?;
    let span = ((4.0 * period).round() as usize).clamp(2, n);
    let lo = c.saturating_sub(span / 2);
    let fringe_component = frequency_component(&asc[lo..(lo + span).min(n)], period)?;
    // the 2f idler arm inverts the object
    let inverted: Vec<Complex64> = (0..n).map(|j| object[mirror_index(j, n)]).collect();
    let image = image_contrast(g, &inverted)?;
    Ok(Contrasts { fringe, fringe_component, image })
}

/// One cell of the discriminator matrix.
#[derive(Clone, Debug)]
pub struct MatrixCell {
    pub model: Model,
    pub z: ZConfig,
    /// Quasi-monochromatic oracle contrasts.
    pub oracle: Contrasts,
    /// Contrasts of the exact Monte-Carlo expectation for the detection window.
    pub detected: Contrasts,
    /// Relative spread of the oracle curve, `(max - min) / max`.
    pub flatness: f64,
}

/// Expected signature of each model and the resulting verdicts.
#[derive(Clone, Debug)]
pub struct Discrimination {
    pub cells: Vec<MatrixCell>,
    pub verdicts: Vec<(Model, bool, String)>,
    pub file: PathBuf,
}

/// Evaluates pure, W and W' at `z = f` and `z = 2f` with the configured
/// object and writes `discriminate.csv`.
///
/// Pass criteria: pure shows fringes (> 0.9) and an image (> 0.9); W shows
/// fringes (> 0.9) but no image (< 0.05); W' shows no fringe frequency
/// (< 1%) but an image (> 0.9).
pub fn discriminate(cfg: &RunConfig) -> Result<Discrimination> {
    let grid = cfg.grid()?;
    let d = match cfg.object {
        crate::config::ObjectSpec::DoubleSlit { d, .. } => d,
        _ => return Err(Error::Config("object: discriminate needs object = double-slit".into())),
    };
    let mut cells = Vec::new();
    for model in Model::ALL {
        for z in [ZConfig::F, ZConfig::TwoF] {
            let mut c = cfg.clone();
            c.model = model;
            c.z_config = z;
            c.engine.engine = crate::engine::EngineKind::PlaneWave;
            let exp = c.experiment()?;
            let oracle = Oracle::new(&exp.setup, &exp.table)?;
            let period = fringe_period_pixels(&exp.setup, &grid, d);
            let plain = oracle.curve(model)?;
            let det = oracle.detected(model, &exp.window)?;
            let max = plain.peak();
            let min = plain.g.iter().cloned().fold(f64::INFINITY, f64::min);
            cells.push(MatrixCell {
                model,
                z,
                oracle: contrasts(&plain.g, &exp.setup.object, period)?,
                detected: contrasts(&det.g, &exp.setup.object, period)?,
                flatness: (max - min) / max,
            });
        }
    }
    let get = |m: Model, z: ZConfig| cells.iter().find(|c| c.model == m && c.z == z).expect("cell");
    let mut verdicts = Vec::new();
    for model in Model::ALL {
        let f = &get(model, ZConfig::F).oracle;
        let i = &get(model, ZConfig::TwoF).oracle;
        let (ok, why) = match model {
            Model::Pure => (
                f.fringe > 0.9 && i.image > 0.9,
                format!("fringe {:.4} > 0.9, image {:.4} > 0.9", f.fringe, i.image),
            ),
            Model::W => (
                f.fringe > 0.9 && i.image < 0.05,
                format!("fringe {:.4} > 0.9, image {:.2e} < 0.05", f.fringe, i.image),
            ),
            Model::WPrime => (
                f.fringe_component < 0.01 && i.image > 0.9,
                format!("fringe component {:.2e} < 0.01, image {:.4} > 0.9", f.fringe_component, i.image),
            ),
        };
        verdicts.push((model, ok, why));
    }

    let mut s = String::from(
        "model,z,fringe,fringe_component,image,flatness,fringe_detected,fringe_component_detected,image_detected\n",
    );
    for c in &cells {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6e},{:.6},{:.6e},{:.6},{:.6e},{:.6}",
            c.model.name(),
            if c.z == ZConfig::F { "f" } else { "2f" },
            c.oracle.fringe,
            c.oracle.fringe_component,
            c.oracle.image,
            c.flatness,
            c.detected.fringe,
            c.detected.fringe_component,
            c.detected.image
        );
    }
    for (m, ok, why) in &verdicts {
        let _ = writeln!(s, "# {} {}: {why}", m.name(), if *ok { "PASS" } else { "FAIL" });
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let file = cfg.out_dir.join("discriminate.csv");
    fs::write(&file, s)?;
    Ok(Discrimination { cells, verdicts, file })
}

/// Photon-statistics summary.
#[derive(Clone, Debug)]
pub struct StatsReport {
    pub gain: f64,
    pub expected_mean: f64,
    pub beam_p_value: f64,
    pub beam_mean_ratio: f64,
    pub pair_chi2: f64,
    pub pair_p_value: f64,
    pub pair_difference_variance: f64,
    pub file: PathBuf,
}

/// Single-mode thermal checks at the configured gain and `Delta = 0`:
/// Wigner beam intensities against `Exp`, and the direct pair sampler
/// against the Bose-Einstein law.
pub fn stats(cfg: &RunConfig, samples: usize) -> Result<StatsReport> {
    let gain = cfg.crystal.gain();
    let params = crate::gain::CrystalParams {
        delta0: 0.0,
        c_walkoff_q: 0.0,
        c_diffr_q: 0.0,
        c_gvm_t: 0.0,
        c_gvd_t: 0.0,
        ..cfg.crystal.clone()
    };
    let grid = make_grid(16, cfg.dx, 16, cfg.dt)?;
    let table = gain_functions(&params, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.engine.seed);
    let beam = reduced_beam_is_thermal(&table, &mut rng, samples)?;

    let mean = mean_photons(0.0, gain);
    let law = ModeStatistics::new(mean)?;
    let pmf = law.pmf();
    let mut counts = vec![0u64; pmf.len() + 1];
    let mut diff2 = 0.0;
    for _ in 0..samples {
        let (a, b) = sample_pair_numbers(mean, &mut rng);
        diff2 += (a as f64 - b as f64).powi(2);
        counts[(a as usize).min(pmf.len())] += 1;
    }
    // pool the tail so every bin expects at least 5 events
    let n = samples as f64;
    let (mut chi2, mut bins) = (0.0, 0usize);
    let (mut obs, mut exp) = (0.0, 0.0);
    for (k, &c) in counts.iter().enumerate() {
        let p = pmf.get(k).copied().unwrap_or(law.tail_mass(law.n_max()));
        obs += c as f64;
        exp += n * p;
        if exp >= 5.0 {
            chi2 += (obs - exp).powi(2) / exp;
            bins += 1;
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 {
        chi2 += (obs - exp).powi(2) / exp;
        bins += 1;
    }
    let pair_p = ChiSquared::new((bins.max(2) - 1) as f64)
        .map_err(|e| Error::Numeric(e.to_string()))?
        .sf(chi2);

    let report = StatsReport {
        gain,
        expected_mean: mean,
        beam_p_value: beam.p_value,
        beam_mean_ratio: beam.mean_ratio,
        pair_chi2: chi2,
        pair_p_value: pair_p,
        pair_difference_variance: diff2 / n,
        file: cfg.out_dir.join("stats.csv"),
    };
    fs::create_dir_all(&cfg.out_dir)?;
    let text = format!(
        "quantity,value\ngain,{:e}\nmean_n,{:e}\nbeam_chi2,{:e}\nbeam_p_value,{:e}\nbeam_mean_ratio,{:e}\npair_chi2,{:e}\npair_p_value,{:e}\npair_difference_variance,{:e}\n",
        gain, mean, beam.chi2, beam.p_value, beam.mean_ratio, chi2, pair_p, report.pair_difference_variance
    );
    fs::write(&report.file, text)?;
    Ok(report)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    crate::config::parse_config(&text)
}
