//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, SI units throughout. Unknown and
//! duplicate keys are rejected; every range check names its key and line.

use std::collections::HashMap;
use std::path::PathBuf;

use crate::engine::{EngineConfig, EngineKind};
use crate::error::{Error, Result};
use crate::experiment::Experiment;
use crate::gain::CrystalParams;
use crate::grid::{make_grid, Grid};
use crate::optics::{double_slit, load_object, uniform_object, ImagingSetup, Scheme, ZConfig};
use crate::reference::Model;

/// Transmission profile source.
#[derive(Clone, Debug, PartialEq)]
pub enum ObjectSpec {
    DoubleSlit { a: f64, d: f64 },
    Uniform,
    File(PathBuf),
}

/// Every parameter of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n_x: usize,
    pub dx: f64,
    pub n_t: usize,
    pub dt: f64,
    pub crystal: CrystalParams,
    pub engine: EngineConfig,
    pub scheme: Scheme,
    pub z_config: ZConfig,
    pub object: ObjectSpec,
    pub fixed_point: f64,
    pub f: f64,
    pub model: Model,
    pub tau_d: f64,
    pub out_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "n_x", "dx", "n_t", "dt", "gain", "sigma", "l_c", "delta0", "c_walkoff_q", "c_diffr_q",
    "c_gvm_t", "c_gvd_t", "lambda", "w_p", "tau_p", "engine", "steps", "seed", "pulses", "scheme",
    "z", "object", "slit_a", "slit_d", "object_file", "fixed_point", "f", "model", "tau_d", "out",
];

const REQUIRED: &[&str] = &["n_x", "dx", "n_t", "dt", "pulses", "scheme", "z", "object", "model", "tau_d"];

struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map(|e| e.0).unwrap_or(0)
    }

    fn err(&self, key: &str, msg: String) -> Error {
        match self.map.get(key) {
            Some((line, _)) => Error::ConfigLine { line: *line, msg: format!("{key}: {msg}") },
            None => Error::Config(format!("{key}: {msg}")),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::ConfigLine { line, msg: format!("{key}: '{v}' is not a finite number") }),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        self.f64_or(key, f64::NAN)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64_or(key, default)?;
        if !(v > 0.0) {
            return Err(self.err(key, format!("{v} must be positive")));
        }
        Ok(v)
    }

    fn int_or(&self, key: &str, default: i64) -> Result<i64> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<i64>()
                .map_err(|_| Error::ConfigLine { line, msg: format!("{key}: '{v}' is not an integer") }),
        }
    }

    fn choice<T: Copy>(&self, key: &str, default: Option<T>, options: &[(&str, T)]) -> Result<T> {
        match self.raw(key) {
            None => default.ok_or_else(|| Error::Config(format!("missing required key '{key}'"))),
            Some((line, v)) => options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                Error::ConfigLine { line, msg: format!("{key}: '{v}' is not one of {}", names.join(", ")) }
            }),
        }
    }
}

fn power_of_two(e: &Entries, key: &str) -> Result<usize> {
    let v = e.int_or(key, -1)?;
    if v < 2 || (v as u64).count_ones() != 1 {
        return Err(e.err(key, format!("{v} must be a power of two >= 2")));
    }
    Ok(v as usize)
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map: HashMap<String, (usize, String)> = HashMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::ConfigLine { line, msg: format!("expected 'key = value', found '{body}'") })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::ConfigLine { line, msg: format!("unknown key '{key}'") });
        }
        if value.is_empty() {
            return Err(Error::ConfigLine { line, msg: format!("{key}: empty value") });
        }
        if let Some((first, _)) = map.get(key) {
            return Err(Error::ConfigLine {
                line,
                msg: format!("duplicate key '{key}' (lines {first} and {line})"),
            });
        }
        map.insert(key.to_string(), (line, value.to_string()));
    }
    let e = Entries { map };
    for key in REQUIRED {
        if e.raw(key).is_none() {
            return Err(Error::Config(format!("missing required key '{key}'")));
        }
    }

    let n_x = power_of_two(&e, "n_x")?;
    let n_t = power_of_two(&e, "n_t")?;
    let dx = e.positive("dx", f64::NAN)?;
    let dt = e.positive("dt", f64::NAN)?;

    let base = CrystalParams::default();
    let l_c = e.positive("l_c", base.l_c)?;
    let sigma = match (e.raw("gain"), e.raw("sigma")) {
        (Some(_), Some(_)) => {
            return Err(e.err("sigma", format!("conflicts with gain on line {}", e.line("gain"))));
        }
        (Some(_), None) => e.f64_req("gain")? / l_c,
        _ => e.f64_or("sigma", base.sigma)?,
    };
    if sigma < 0.0 {
        let key = if e.raw("gain").is_some() { "gain" } else { "sigma" };
        return Err(e.err(key, "must be >= 0".into()));
    }
    let crystal = CrystalParams {
        sigma,
        l_c,
        delta0: e.f64_or("delta0", base.delta0)?,
        c_walkoff_q: e.f64_or("c_walkoff_q", base.c_walkoff_q)?,
        c_diffr_q: e.f64_or("c_diffr_q", base.c_diffr_q)?,
        c_gvm_t: e.f64_or("c_gvm_t", base.c_gvm_t)?,
        c_gvd_t: e.f64_or("c_gvd_t", base.c_gvd_t)?,
        lambda: e.positive("lambda", base.lambda)?,
        w_p: e.positive("w_p", base.w_p)?,
        tau_p: e.positive("tau_p", base.tau_p)?,
    };

    let engine_kind = e.choice(
        "engine",
        Some(EngineKind::PlaneWave),
        &[("planewave", EngineKind::PlaneWave), ("finite-pump", EngineKind::FinitePump)],
    )?;
    let steps = e.int_or("steps", 64)?;
    if steps < 1 {
        return Err(e.err("steps", format!("{steps} must be >= 1")));
    }
    let pulses = e.int_or("pulses", -1)?;
    if pulses < 1 {
        return Err(e.err("pulses", format!("{pulses} must be >= 1")));
    }
    let seed = match e.raw("seed") {
        None => 1,
        Some((line, v)) => v
            .parse::<u64>()
            .map_err(|_| Error::ConfigLine { line, msg: format!("seed: '{v}' is not a 64-bit unsigned integer") })?,
    };
    let engine = EngineConfig { engine: engine_kind, steps: steps as usize, seed, pulses: pulses as usize };

    let scheme = e.choice("scheme", None, &[("a", Scheme::A), ("b", Scheme::B)])?;
    let z_config = e.choice("z", None, &[("f", ZConfig::F), ("2f", ZConfig::TwoF)])?;
    let model = e.choice("model", None, &[("pure", Model::Pure), ("W", Model::W), ("Wprime", Model::WPrime)])?;

    #[derive(Clone, Copy)]
    enum Kind {
        Slit,
        Uniform,
        File,
    }
    let kind = e.choice(
        "object",
        None,
        &[("double-slit", Kind::Slit), ("uniform", Kind::Uniform), ("file", Kind::File)],
    )?;
    let object = match kind {
        Kind::Slit => {
            let a = e.positive("slit_a", 17e-6)?;
            let d = e.positive("slit_d", 104e-6)?;
            ObjectSpec::DoubleSlit { a, d }
        }
        Kind::Uniform => ObjectSpec::Uniform,
        Kind::File => match e.raw("object_file") {
            Some((_, p)) => ObjectSpec::File(PathBuf::from(p)),
            None => return Err(e.err("object", "'file' needs object_file".into())),
        },
    };
    let fixed_point = e.f64_or("fixed_point", 0.0)?;
    let f = e.positive("f", 0.05)?;
    let tau_d = e.positive("tau_d", f64::NAN)?;
    let out_dir = PathBuf::from(e.raw("out").map(|r| r.1).unwrap_or("out"));

    let cfg = RunConfig {
        n_x,
        dx,
        n_t,
        dt,
        crystal,
        engine,
        scheme,
        z_config,
        object,
        fixed_point,
        f,
        model,
        tau_d,
        out_dir,
    };
    cfg.validate_with(&e)?;
    Ok(cfg)
}

impl RunConfig {
    fn validate_with(&self, e: &Entries) -> Result<()> {
        let relabel = |key: &str, r: Result<()>| r.map_err(|err| e.err(key, err.to_string()));
        let grid = make_grid(self.n_x, self.dx, self.n_t, self.dt)?;
        relabel("tau_d", crate::correlator::DetectionWindow::new(&grid, self.tau_d).map(|_| ()))?;
        if let ObjectSpec::DoubleSlit { a, d } = self.object {
            relabel("slit_d", double_slit(&grid, a, d).map(|_| ()))?;
        }
        if let ObjectSpec::File(_) = self.object {
            relabel("object_file", self.object_profile(&grid).map(|_| ()))?;
        }
        relabel("fixed_point", self.setup(&grid).and_then(|s| s.point_pixel(&grid)).map(|_| ()))?;
        if self.engine.engine == EngineKind::FinitePump && self.model != Model::Pure {
            return Err(e.err("engine", "finite-pump drives the pure model only".into()));
        }
        self.crystal.validate()
    }

    /// Full validation without line information (for programmatically built configs).
    pub fn validate(&self) -> Result<()> {
        self.validate_with(&Entries { map: HashMap::new() })
    }

    pub fn grid(&self) -> Result<Grid> {
        make_grid(self.n_x, self.dx, self.n_t, self.dt)
    }

    pub fn object_profile(&self, grid: &Grid) -> Result<Vec<num_complex::Complex64>> {
        match &self.object {
            ObjectSpec::DoubleSlit { a, d } => double_slit(grid, *a, *d),
            ObjectSpec::Uniform => Ok(uniform_object(grid)),
            ObjectSpec::File(p) => load_object(p, grid),
        }
    }

    pub fn setup(&self, grid: &Grid) -> Result<ImagingSetup> {
        Ok(ImagingSetup {
            scheme: self.scheme,
            z_config: self.z_config,
            object: self.object_profile(grid)?,
            fixed_point: self.fixed_point,
            f: self.f,
            lambda: self.crystal.lambda,
        })
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let grid = self.grid()?;
        let setup = self.setup(&grid)?;
        Experiment::new(grid, &self.crystal, setup, self.engine.clone(), self.model, self.tau_d)
    }

    /// Canonical text that parses back to an identical configuration.
    pub fn to_config_text(&self) -> String {
        let c = &self.crystal;
        let mut lines = vec![
            format!("n_x = {}", self.n_x),
            format!("dx = {:e}", self.dx),
            format!("n_t = {}", self.n_t),
            format!("dt = {:e}", self.dt),
            format!("sigma = {:e}", c.sigma),
            format!("l_c = {:e}", c.l_c),
            format!("delta0 = {:e}", c.delta0),
            format!("c_walkoff_q = {:e}", c.c_walkoff_q),
            format!("c_diffr_q = {:e}", c.c_diffr_q),
            format!("c_gvm_t = {:e}", c.c_gvm_t),
            format!("c_gvd_t = {:e}", c.c_gvd_t),
            format!("lambda = {:e}", c.lambda),
            format!("w_p = {:e}", c.w_p),
            format!("tau_p = {:e}", c.tau_p),
            format!(
                "engine = {}",
                match self.engine.engine {
                    EngineKind::PlaneWave => "planewave",
                    EngineKind::FinitePump => "finite-pump",
                }
            ),
            format!("steps = {}", self.engine.steps),
            format!("seed = {}", self.engine.seed),
            format!("pulses = {}", self.engine.pulses),
            format!("scheme = {}", if self.scheme == Scheme::A { "a" } else { "b" }),
            format!("z = {}", if self.z_config == ZConfig::F { "f" } else { "2f" }),
        ];
        match &self.object {
            ObjectSpec::DoubleSlit { a, d } => {
                lines.push("object = double-slit".into());
                lines.push(format!("slit_a = {a:e}"));
                lines.push(format!("slit_d = {d:e}"));
            }
            ObjectSpec::Uniform => lines.push("object = uniform".into()),
            ObjectSpec::File(p) => {
                lines.push("object = file".into());
                lines.push(format!("object_file = {}", p.display()));
            }
        }
        lines.push(format!("fixed_point = {:e}", self.fixed_point));
        lines.push(format!("f = {:e}", self.f));
        lines.push(format!("model = {}", self.model.name()));
        lines.push(format!("tau_d = {:e}", self.tau_d));
        lines.push(format!("out = {}", self.out_dir.display()));
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }
}
