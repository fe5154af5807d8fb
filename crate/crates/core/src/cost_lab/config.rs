use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat1d::DEFAULT_BLOWUP_CAP;
use crate::linctrl::{Constants, ControlMode, ControllerSettings};
use crate::numerics::{Grid, SpaceField, SpaceTimeField};
use crate::semictrl::{HomotopyOptions, NPolicy, Nonlinearity, TPrimePolicy};

/// Key reference printed by `heatctl --help`.
pub const CONFIG_HELP: &str = r#"CONFIGURATION (single JSON document; unknown keys are rejected)

  seed                          integer, default 0; seeds "random" profiles
  problem.nx                    interior nodes, >= 3 (required)
  problem.nt                    time steps, >= 2 (required)
  problem.t_final               horizon T > 0, default 1.0
  problem.omega                 [lo, hi] with 0 <= lo < hi <= 1 (required)
  problem.nonlinearity          f, default {"kind": "zero"}; kinds:
                                  zero | sine {shift} (sin s + shift)
                                  affine {slope, intercept}
                                  power {coeff, exponent} (coeff*s^exponent)
  problem.u0, problem.u_d       profiles (required); kinds:
                                  zero | constant {value}
                                  sine {k, amplitude=1} (amplitude*sin(k pi x))
                                  bump {center=0.5, width=0.1, amplitude=1}
                                  parabola {amplitude=1} (amplitude*x(1-x))
                                  tabulated {values} (uniform samples on [0,1],
                                    linearly interpolated)
                                  random {modes, amplitude=1} (seeded sine series)
  problem.potential             profile q(x) for linear runs, default zero
  problem.source                constant source lambda for linear runs, default 0
  controller.t_prime_policy     "growth-adapted" | "epsilon-t" | {"fixed": T'}
                                default "growth-adapted"
  controller.n_policy           "adaptive" | "closed-form", default "adaptive"
  controller.mode               "adaptive" (E = 1) | "closed-form", default "adaptive"
  controller.constants          {c0..c6, n_o}, defaults 1.0 and n_o = 1
  controller.eta_rel            initial HUM penalty / mu_1, default 1e-6
  controller.null_retries       penalty reductions, default 4
  controller.cg_tol             CG relative tolerance, default 1e-10
  controller.blowup_cap         sup-norm cap, default 1e12
  controller.homotopy.sigma_step          default 0.25
  controller.homotopy.damping             Picard damping in (0,1], default 1.0
  controller.homotopy.tol_fp              sup-norm increment, default 1e-6
  controller.homotopy.max_picard          per sigma, default 60
  controller.homotopy.tol_pde             residual certificate, default 1e-4
  controller.homotopy.freeze_basis_after  increment below which the spectral
                                          basis is reused, default null (never)
  sweep.epsilons                list of epsilon in (0,1], default []
  sweep.repetitions             runs per epsilon (runtime is averaged), default 1
  sweep.workers                 worker threads, default min(#epsilons, 8);
                                HEATCTL_THREADS caps it
  output.directory              default "heatctl_out"
  output.csv_name               default "sweep.csv"
  output.emit_plot_data         write fit_<model>.dat files, default true
"#;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub nx: usize,
    pub nt: usize,
    #[serde(default = "one")]
    pub t_final: f64,
    pub omega: [f64; 2],
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    pub u0: Profile,
    pub u_d: Profile,
    #[serde(default)]
    pub potential: Profile,
    #[serde(default)]
    pub source: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    #[default]
    Zero,
    Sine {
        #[serde(default)]
        shift: f64,
    },
    Affine {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    Power {
        #[serde(default = "one")]
        coeff: f64,
        exponent: u32,
    },
}

impl NonlinearityConfig {
    pub fn build(&self) -> Nonlinearity {
        match *self {
            NonlinearityConfig::Zero => Nonlinearity::zero(),
            NonlinearityConfig::Sine { shift } => Nonlinearity::sine_plus(shift),
            NonlinearityConfig::Affine { slope, intercept } => Nonlinearity::affine(slope, intercept),
            NonlinearityConfig::Power { coeff, exponent } => Nonlinearity::power(coeff, exponent),
        }
    }

    fn check(&self, problems: &mut Vec<String>) {
        match *self {
            NonlinearityConfig::Zero => {}
            NonlinearityConfig::Sine { shift } => finite("problem.nonlinearity.shift", shift, problems),
            NonlinearityConfig::Affine { slope, intercept } => {
                finite("problem.nonlinearity.slope", slope, problems);
                finite("problem.nonlinearity.intercept", intercept, problems);
            }
            NonlinearityConfig::Power { coeff, exponent } => {
                finite("problem.nonlinearity.coeff", coeff, problems);
                if exponent == 0 {
                    problems.push("problem.nonlinearity.exponent must be >= 1".into());
                }
            }
        }
    }
}

/// Named functions of x on [0, 1].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Sine {
        k: u32,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Bump {
        #[serde(default = "half")]
        center: f64,
        #[serde(default = "tenth")]
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Parabola {
        #[serde(default = "one")]
        amplitude: f64,
    },
    Tabulated {
        values: Vec<f64>,
    },
    Random {
        modes: u32,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn half() -> f64 {
    0.5
}

fn tenth() -> f64 {
    0.1
}

impl Profile {
    /// Nodal values on the grid; `salt` separates the random streams of
    /// different profiles drawn from one seed.
    pub fn sample(&self, grid: &Grid, seed: u64, salt: u64) -> SpaceField {
        match self {
            Profile::Zero => SpaceField::zeros(grid.nx()),
            Profile::Constant { value } => SpaceField::from_fn(grid, |_| *value),
            Profile::Sine { k, amplitude } => {
                SpaceField::from_fn(grid, |x| amplitude * (*k as f64 * std::f64::consts::PI * x).sin())
            }
            Profile::Bump {
                center,
                width,
                amplitude,
            } => SpaceField::from_fn(grid, |x| {
                let r = (x - center) / width;
                if r.abs() < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            }),
            Profile::Parabola { amplitude } => SpaceField::from_fn(grid, |x| amplitude * x * (1.0 - x)),
            Profile::Tabulated { values } => {
                let n = values.len() - 1;
                SpaceField::from_fn(grid, |x| {
                    let s = x * n as f64;
                    let i = (s.floor() as usize).min(n - 1);
                    let w = s - i as f64;
                    (1.0 - w) * values[i] + w * values[i + 1]
                })
            }
            Profile::Random { modes, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let coeffs: Vec<f64> = (1..=*modes).map(|k| rng.gen_range(-1.0..1.0) / k as f64).collect();
                SpaceField::from_fn(grid, |x| {
                    amplitude
                        * coeffs
                            .iter()
                            .enumerate()
                            .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * x).sin())
                            .sum::<f64>()
                })
            }
        }
    }

    fn check(&self, key: &str, problems: &mut Vec<String>) {
        match self {
            Profile::Zero => {}
            Profile::Constant { value } => finite(&format!("{key}.value"), *value, problems),
            Profile::Sine { k, amplitude } => {
                if *k == 0 {
                    problems.push(format!("{key}.k must be >= 1"));
                }
                finite(&format!("{key}.amplitude"), *amplitude, problems);
            }
            Profile::Bump {
                center,
                width,
                amplitude,
            } => {
                finite(&format!("{key}.center"), *center, problems);
                finite(&format!("{key}.amplitude"), *amplitude, problems);
                if !(*width > 0.0 && width.is_finite()) {
                    problems.push(format!("{key}.width must be positive"));
                }
            }
            Profile::Parabola { amplitude } => finite(&format!("{key}.amplitude"), *amplitude, problems),
            Profile::Tabulated { values } => {
                if values.len() < 2 {
                    problems.push(format!("{key}.values needs at least 2 samples"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    problems.push(format!("{key}.values must be finite"));
                }
            }
            Profile::Random { modes, amplitude } => {
                if *modes == 0 {
                    problems.push(format!("{key}.modes must be >= 1"));
                }
                finite(&format!("{key}.amplitude"), *amplitude, problems);
            }
        }
    }
}

fn finite(key: &str, v: f64, problems: &mut Vec<String>) {
    if !v.is_finite() {
        problems.push(format!("{key} must be finite"));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub t_prime_policy: TPrimePolicy,
    pub n_policy: NPolicy,
    pub mode: ControlMode,
    pub constants: Constants,
    pub eta_rel: f64,
    pub null_retries: usize,
    pub cg_tol: f64,
    pub blowup_cap: f64,
    pub homotopy: HomotopyConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let s = ControllerSettings::default();
        ControllerConfig {
            t_prime_policy: TPrimePolicy::GrowthAdapted,
            n_policy: NPolicy::Adaptive,
            mode: s.mode,
            constants: s.constants,
            eta_rel: s.eta_rel,
            null_retries: s.null_retries,
            cg_tol: s.cg_tol,
            blowup_cap: DEFAULT_BLOWUP_CAP,
            homotopy: HomotopyConfig::default(),
        }
    }
}

impl ControllerConfig {
    pub fn settings(&self) -> ControllerSettings {
        ControllerSettings {
            constants: self.constants.clone(),
            mode: self.mode,
            eta_rel: self.eta_rel,
            null_retries: self.null_retries,
            cg_tol: self.cg_tol,
            blowup_cap: self.blowup_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomotopyConfig {
    pub sigma_step: f64,
    pub damping: f64,
    pub tol_fp: f64,
    pub max_picard: usize,
    pub tol_pde: f64,
    pub freeze_basis_after: Option<f64>,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        let h = HomotopyOptions::default();
        HomotopyConfig {
            sigma_step: h.sigma_step,
            damping: h.damping,
            tol_fp: h.tol_fp,
            max_picard: h.max_picard,
            tol_pde: h.tol_pde,
            freeze_basis_after: h.freeze_basis_after,
        }
    }
}

impl From<&HomotopyConfig> for HomotopyOptions {
    fn from(c: &HomotopyConfig) -> Self {
        HomotopyOptions {
            sigma_step: c.sigma_step,
            damping: c.damping,
            tol_fp: c.tol_fp,
            max_picard: c.max_picard,
            tol_pde: c.tol_pde,
            freeze_basis_after: c.freeze_basis_after,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub repetitions: usize,
    pub workers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            epsilons: Vec::new(),
            repetitions: 1,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub csv_name: String,
    pub emit_plot_data: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "heatctl_out".into(),
            csv_name: "sweep.csv".into(),
            emit_plot_data: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pretty JSON with every default filled in.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let p = &self.problem;
        if let Err(Error::InvalidGrid(msg)) = Grid::new(p.nx, p.t_final, p.nt, (p.omega[0], p.omega[1])) {
            problems.push(format!("problem: {msg}"));
        }
        p.nonlinearity.check(&mut problems);
        p.u0.check("problem.u0", &mut problems);
        p.u_d.check("problem.u_d", &mut problems);
        p.potential.check("problem.potential", &mut problems);
        finite("problem.source", p.source, &mut problems);

        let c = &self.controller;
        if let TPrimePolicy::Fixed(v) = c.t_prime_policy {
            if !(v > 0.0 && v.is_finite()) {
                problems.push("controller.t_prime_policy.fixed must be positive".into());
            }
        }
        let k = &c.constants;
        for (name, v) in [("c0", k.c0), ("c1", k.c1), ("c2", k.c2), ("c3", k.c3), ("c4", k.c4), ("c5", k.c5), ("c6", k.c6)] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("controller.constants.{name} must be positive"));
            }
        }
        for (name, v) in [("eta_rel", c.eta_rel), ("cg_tol", c.cg_tol), ("blowup_cap", c.blowup_cap)] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("controller.{name} must be positive"));
            }
        }
        let h = &c.homotopy;
        if !(h.sigma_step > 0.0 && h.sigma_step <= 1.0) {
            problems.push("controller.homotopy.sigma_step must lie in (0, 1]".into());
        }
        if !(h.damping > 0.0 && h.damping <= 1.0) {
            problems.push("controller.homotopy.damping must lie in (0, 1]".into());
        }
        for (name, v) in [("tol_fp", h.tol_fp), ("tol_pde", h.tol_pde)] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("controller.homotopy.{name} must be positive"));
            }
        }
        if h.max_picard == 0 {
            problems.push("controller.homotopy.max_picard must be >= 1".into());
        }
        if let Some(f) = h.freeze_basis_after {
            if !(f > 0.0) {
                problems.push("controller.homotopy.freeze_basis_after must be positive".into());
            }
        }

        for (i, e) in self.sweep.epsilons.iter().enumerate() {
            if !(*e > 0.0 && *e <= 1.0) {
                problems.push(format!("sweep.epsilons[{i}] = {e}: epsilon must lie in (0, 1]"));
            }
        }
        if self.sweep.repetitions == 0 {
            problems.push("sweep.repetitions must be >= 1".into());
        }
        if self.sweep.workers == Some(0) {
            problems.push("sweep.workers must be >= 1".into());
        }
        if self.output.csv_name.is_empty() || self.output.csv_name.contains(['/', '\\']) {
            problems.push("output.csv_name must be a plain file name".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let p = &self.problem;
        Grid::new(p.nx, p.t_final, p.nt, (p.omega[0], p.omega[1]))
    }

    pub fn u0(&self, grid: &Grid) -> SpaceField {
        self.problem.u0.sample(grid, self.seed, 1)
    }

    pub fn u_d(&self, grid: &Grid) -> SpaceField {
        self.problem.u_d.sample(grid, self.seed, 2)
    }

    /// Time-independent potential on the full horizon.
    pub fn potential(&self, grid: &Grid) -> SpaceTimeField {
        let q = self.problem.potential.sample(grid, self.seed, 3);
        let values = q.values().repeat(grid.nt() + 1);
        SpaceTimeField::from_values(grid.nx(), grid.nt() + 1, values).expect("sizes match")
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json(&text)
}
