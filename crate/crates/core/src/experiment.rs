//! One simulated experiment: source, crystal engine, bench and detectors.

use rayon::prelude::*;

use crate::correlator::{detect, CorrAccumulator, DetectionWindow};
use crate::engine::{apply_planewave_gain, pulse_rng, sample_vacuum, to_exit_face, EngineConfig, EngineKind, SplitStep};
use crate::error::{Error, Result};
use crate::gain::{gain_functions, CrystalParams, GainTable};
use crate::grid::{FieldPair, Grid};
use crate::optics::{apply_object, propagate_2f_2f, propagate_f_f, Arm, ImagingSetup, ZConfig};
use crate::reference::{sample_mixture_fields, Model};

/// Pulses per work unit; fixed so results do not depend on the thread count.
pub const BATCH: u64 = 64;

/// Validated ingredients shared read-only by all pulses.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub grid: Grid,
    pub table: GainTable,
    pub setup: ImagingSetup,
    pub engine: EngineConfig,
    pub model: Model,
    pub window: DetectionWindow,
    pub point_pixel: usize,
    splitstep: Option<SplitStep>,
}

/// Vacuum-subtracted intensities of one pulse.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectedPair {
    pub array: Vec<f64>,
    pub point: f64,
}

impl Experiment {
    pub fn new(
        grid: Grid,
        params: &CrystalParams,
        setup: ImagingSetup,
        engine: EngineConfig,
        model: Model,
        tau_d: f64,
    ) -> Result<Self> {
        engine.validate()?;
        setup.validate(&grid)?;
        let table = gain_functions(params, &grid)?;
        let window = DetectionWindow::new(&grid, tau_d)?;
        let point_pixel = setup.point_pixel(&grid)?;
        let splitstep = match (engine.engine, model) {
            (EngineKind::FinitePump, Model::Pure) => Some(SplitStep::new(&grid, params, engine.steps)?),
            (EngineKind::FinitePump, _) => {
                return Err(Error::Config(
                    "the finite-pump engine drives the pure state only; mixtures use engine = planewave".into(),
                ))
            }
            _ => None,
        };
        Ok(Experiment { grid, table, setup, engine, model, window, point_pixel, splitstep })
    }

    /// Crystal-exit fields of one pulse.
    pub fn source(&self, pulse_index: u64) -> Result<(FieldPair, rand_chacha::ChaCha8Rng)> {
        let mut rng = pulse_rng(self.engine.seed, pulse_index);
        let pair = match self.model {
            Model::Pure => {
                let vacuum = sample_vacuum(&self.grid, &mut rng);
                let mut out = match &self.splitstep {
                    Some(ss) => ss.propagate(&vacuum)?,
                    None => apply_planewave_gain(&vacuum, &self.table)?,
                };
                to_exit_face(&mut out, &self.table)?;
                out
            }
            m => sample_mixture_fields(m, &self.table, &mut rng)?,
        };
        Ok((pair, rng))
    }

    /// Full pipeline for one pulse; deterministic in `(seed, pulse_index)`.
    pub fn run_pulse(&self, pulse_index: u64) -> Result<DetectedPair> {
        let grid = &self.grid;
        let (mut pair, mut rng) = self.source(pulse_index)?;
        pair.to_direct(grid)?;
        let quantum = self.model.is_quantum();

        let mut signal = pair.signal;
        if quantum {
            apply_object(grid, &mut signal, &self.setup.object, Some(&mut rng))?;
        } else {
            apply_object::<rand_chacha::ChaCha8Rng>(grid, &mut signal, &self.setup.object, None)?;
        }
        let signal = propagate_f_f(grid, &signal)?;
        let idler = match self.setup.z_config {
            ZConfig::F => propagate_f_f(grid, &pair.idler)?,
            ZConfig::TwoF => propagate_2f_2f(grid, &pair.idler)?,
        };

        let offset = if quantum { 0.5 } else { 0.0 };
        let i_s = detect(grid, &signal, &self.window, offset)?;
        let i_i = detect(grid, &idler, &self.window, offset)?;
        let (array, point) = match self.setup.array_arm() {
            Arm::I => (i_i, i_s[self.point_pixel]),
            Arm::S => (i_s, i_i[self.point_pixel]),
        };
        Ok(DetectedPair { array, point })
    }

    fn run_batch(&self, start: u64, end: u64) -> Result<CorrAccumulator> {
        let mut acc = CorrAccumulator::new(self.grid.n_x());
        for k in start..end {
            let d = self.run_pulse(k)?;
            acc.accumulate(&d.array, d.point)?;
        }
        Ok(acc)
    }

    /// Runs pulses `0..pulses` in fixed batches on the current rayon pool and
    /// merges batch accumulators in index order. `progress` is called with the
    /// number of finished batches.
    pub fn run(&self, pulses: u64, progress: &(dyn Fn(u64, u64) + Sync)) -> Result<CorrAccumulator> {
        let batches = pulses.div_ceil(BATCH);
        let done = std::sync::atomic::AtomicU64::new(0);
        let parts: Vec<Result<CorrAccumulator>> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let r = self.run_batch(b * BATCH, ((b + 1) * BATCH).min(pulses));
                let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(k, batches);
                r
            })
            .collect();
        let mut total = CorrAccumulator::new(self.grid.n_x());
        for part in parts {
            total.merge(&part?)?;
        }
        Ok(total)
    }
}

/// Free-function form of [`Experiment::run_pulse`] for an explicit seed.
pub fn run_pulse(pulse_index: u64, master_seed: u64, experiment: &Experiment) -> Result<DetectedPair> {
    if master_seed == experiment.engine.seed {
        return experiment.run_pulse(pulse_index);
    }
    let mut e = experiment.clone();
    e.engine.seed = master_seed;
    e.run_pulse(pulse_index)
}
