use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost_lab::config::{ExperimentConfig, NonlinearityConfig};
use crate::cost_lab::fit::{fit_cost_curve, write_plot_data};
use crate::error::{Error, Result};
use crate::linctrl::{linear_approx_control, plan_window, LinearControlSpec};
use crate::semictrl::{solve_semilinear, HomotopyOptions, SemilinearSpec};

pub const CSV_HEADER: [&str; 9] = [
    "epsilon",
    "T_prime",
    "N_used",
    "cost_L2",
    "err_L2",
    "u_sup",
    "picard_iters_total",
    "converged",
    "runtime_s",
];

pub const THREADS_ENV: &str = "HEATCTL_THREADS";

/// One ε point of a sweep. Failed points carry NaN measurements and
/// `converged = false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    #[serde(rename = "T_prime")]
    pub t_prime: f64,
    #[serde(rename = "N_used")]
    pub n_used: usize,
    #[serde(rename = "cost_L2")]
    pub cost_l2: f64,
    #[serde(rename = "err_L2")]
    pub err_l2: f64,
    pub u_sup: f64,
    pub picard_iters_total: usize,
    pub converged: bool,
    pub runtime_s: f64,
}

impl SweepRow {
    fn failed(epsilon: f64, runtime_s: f64) -> Self {
        SweepRow {
            epsilon,
            t_prime: f64::NAN,
            n_used: 0,
            cost_l2: f64::NAN,
            err_l2: f64::NAN,
            u_sup: f64::NAN,
            picard_iters_total: 0,
            converged: false,
            runtime_s,
        }
    }

    /// CSV fields; floats in shortest round-trip form.
    pub fn record(&self) -> [String; 9] {
        [
            self.epsilon.to_string(),
            self.t_prime.to_string(),
            self.n_used.to_string(),
            self.cost_l2.to_string(),
            self.err_l2.to_string(),
            self.u_sup.to_string(),
            self.picard_iters_total.to_string(),
            self.converged.to_string(),
            self.runtime_s.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Linear,
    Semilinear,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Linear => "linear",
            SweepKind::Semilinear => "semilinear",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
    /// One human-readable line per row.
    pub log: Vec<String>,
}

impl SweepReport {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

/// Worker count: `sweep.workers` or min(points, 8), capped by
/// HEATCTL_THREADS when that is a positive integer.
pub fn worker_count(cfg: &ExperimentConfig, points: usize) -> usize {
    let base = cfg.sweep.workers.unwrap_or(points.min(8));
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    cap.map_or(base, |c| base.min(c)).max(1)
}

fn sweep(cfg: &ExperimentConfig, kind: SweepKind) -> Result<SweepReport> {
    cfg.validate()?;
    let eps = &cfg.sweep.epsilons;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg, eps.len()))
        .build()
        .map_err(|e| Error::Validation(vec![format!("cannot start worker pool: {e}")]))?;
    let point = |&e: &f64| -> (SweepRow, String) {
        let mut total = 0.0;
        let mut first = None;
        for _ in 0..cfg.sweep.repetitions {
            let start = Instant::now();
            let out = match kind {
                SweepKind::Linear => linear_point(cfg, e),
                SweepKind::Semilinear => semilinear_point(cfg, e),
            };
            total += start.elapsed().as_secs_f64();
            first.get_or_insert(out);
        }
        let runtime = total / cfg.sweep.repetitions as f64;
        match first.expect("repetitions >= 1") {
            Ok((mut row, line)) => {
                row.runtime_s = runtime;
                (row, line)
            }
            Err(err) => (SweepRow::failed(e, runtime), format!("epsilon={e} status=error error=\"{err}\"")),
        }
    };
    let results: Vec<(SweepRow, String)> = pool.install(|| eps.par_iter().map(point).collect());
    let (rows, log) = results.into_iter().unzip();
    Ok(SweepReport { kind, rows, log })
}

fn linear_point(cfg: &ExperimentConfig, epsilon: f64) -> Result<(SweepRow, String)> {
    let grid = cfg.grid()?;
    let spec = LinearControlSpec {
        q: cfg.potential(&grid),
        u0: cfg.u0(&grid),
        z_d: cfg.u_d(&grid),
        lambda: cfg.problem.source,
        epsilon,
        n_policy: cfg.controller.n_policy,
        t_prime_policy: cfg.controller.t_prime_policy,
        settings: cfg.controller.settings(),
    };
    let wp = plan_window(&spec, &grid)?;
    let r = linear_approx_control(&spec, &wp)?;
    let d = &r.diagnostics;
    let row = SweepRow {
        epsilon,
        t_prime: r.t_prime,
        n_used: r.n_used,
        cost_l2: r.cost_l2,
        err_l2: r.err_l2,
        u_sup: r.state.sup(),
        picard_iters_total: 0,
        converged: r.target_met,
        runtime_s: 0.0,
    };
    let mut line = format!(
        "epsilon={epsilon} status={} T'={} N={} err={:e} cost={:e}",
        if r.target_met { "ok" } else { "missed" },
        r.t_prime,
        r.n_used,
        r.err_l2,
        r.cost_l2
    );
    let _ = write!(
        line,
        " mu1={:e} bands={:?} discarded={} truncation={:e} null_residual={:e} null_eta={:e} preimage={:e} E={} G={:e} D={:e} bound={:e}",
        d.mu1,
        d.band_populations,
        d.discarded_modes,
        d.truncation_error,
        d.null_residual,
        d.null_eta,
        d.preimage_norm,
        d.e_scale,
        d.g_factor,
        d.d_factor,
        d.closed_form_error_bound
    );
    Ok((row, line))
}

fn semilinear_point(cfg: &ExperimentConfig, epsilon: f64) -> Result<(SweepRow, String)> {
    let grid = cfg.grid()?;
    let spec = SemilinearSpec {
        u0: cfg.u0(&grid),
        u_d: cfg.u_d(&grid),
        grid,
        nonlinearity: cfg.problem.nonlinearity.build(),
        epsilon,
        t_prime_policy: cfg.controller.t_prime_policy,
        n_policy: cfg.controller.n_policy,
        homotopy: HomotopyOptions::from(&cfg.controller.homotopy),
        settings: cfg.controller.settings(),
    };
    let r = solve_semilinear(&spec)?;
    let row = SweepRow {
        epsilon,
        t_prime: r.t_prime,
        n_used: r.n_used,
        cost_l2: r.cost_l2,
        err_l2: r.err_l2,
        u_sup: r.u_sup,
        picard_iters_total: r.picard_iterations_total,
        converged: r.converged,
        runtime_s: 0.0,
    };
    let gmax = r.h_calls.iter().map(|c| c.gnorm).fold(0.0f64, f64::max);
    let path: Vec<String> = r
        .sigma_path
        .iter()
        .map(|s| format!("{}:{}{}", s.sigma, s.iterations, if s.converged { "" } else { "!" }))
        .collect();
    let line = format!(
        "epsilon={epsilon} status={} picard_converged={} T'={} N={} err={:e} cost={:e} pde_residual={:e} u_sup={} max_gnorm={} sigma_path=[{}]",
        if r.converged { "ok" } else { "not-converged" },
        r.picard_converged,
        r.t_prime,
        r.n_used,
        r.err_l2,
        r.cost_l2,
        r.pde_residual,
        r.u_sup,
        gmax,
        path.join(" ")
    );
    Ok((row, line))
}

/// Linear sweep; the nonlinearity must be zero.
pub fn run_linear(cfg: &ExperimentConfig) -> Result<SweepReport> {
    if cfg.problem.nonlinearity != NonlinearityConfig::Zero {
        return Err(Error::Validation(vec![
            "linear runs need problem.nonlinearity = {\"kind\": \"zero\"}".into(),
        ]));
    }
    sweep(cfg, SweepKind::Linear)
}

pub fn run_semilinear(cfg: &ExperimentConfig) -> Result<SweepReport> {
    sweep(cfg, SweepKind::Semilinear)
}

pub fn csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: "<csv buffer>".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    fs::write(path, csv_string(rows)?).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!(
            "{}: header must be {}",
            path.display(),
            CSV_HEADER.join(",")
        )));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Parse(format!("{}: {e}", path.display()))))
        .collect()
}

/// Files written for one sweep.
#[derive(Debug, Clone)]
pub struct WrittenFiles {
    pub csv: PathBuf,
    pub log: PathBuf,
    pub plots: Vec<PathBuf>,
    /// Why no fit was written, when none was.
    pub fit_note: Option<String>,
}

/// CSV, run.log and (optionally) fit plot data into `dir`.
pub fn write_report(dir: &Path, cfg: &ExperimentConfig, report: &SweepReport) -> Result<WrittenFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(&cfg.output.csv_name);
    write_csv(&csv, &report.rows)?;
    let mut plots = Vec::new();
    let mut fit_note = None;
    let mut log = format!("heatctl {} sweep, {} points\n", report.kind.name(), report.rows.len());
    for line in &report.log {
        log.push_str(line);
        log.push('\n');
    }
    if cfg.output.emit_plot_data {
        match fit_cost_curve(&report.rows) {
            Ok(fit) => {
                plots = write_plot_data(&fit, dir)?;
                log.push_str(&fit.to_string());
            }
            Err(Error::InsufficientData(why)) => {
                let _ = writeln!(log, "no fit: {why}");
                fit_note = Some(why);
            }
            Err(e) => return Err(e),
        }
    }
    let log_path = dir.join("run.log");
    fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
    Ok(WrittenFiles {
        csv,
        log: log_path,
        plots,
        fit_note,
    })
}

/// Echo of the resolved configuration.
pub fn write_resolved_config(dir: &Path, cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("resolved_config.json");
    fs::write(&path, cfg.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// The linear leg of a combined sweep: same config with f replaced by zero.
pub fn linear_leg(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.problem.nonlinearity = NonlinearityConfig::Zero;
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: &[f64]) -> ExperimentConfig {
        let text = format!(
            r#"{{"problem": {{"nx": 24, "nt": 24, "omega": [0.3, 0.8],
                "u0": {{"kind": "parabola"}}, "u_d": {{"kind": "sine", "k": 1}}}},
              "sweep": {{"epsilons": {eps:?}}}}}"#
        );
        ExperimentConfig::from_json(&text).unwrap()
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let r = run_linear(&cfg(&[])).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(csv_string(&r.rows).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn csv_round_trips() {
        let row = SweepRow {
            epsilon: 0.1,
            t_prime: 0.5,
            n_used: 2,
            cost_l2: 1.0 / 3.0,
            err_l2: f64::NAN,
            u_sup: 1e-300,
            picard_iters_total: 7,
            converged: false,
            runtime_s: 0.25,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_csv(&p, std::slice::from_ref(&row)).unwrap();
        let back = read_csv(&p).unwrap();
        assert_eq!(back[0].cost_l2, row.cost_l2);
        assert_eq!(back[0].u_sup, row.u_sup);
        assert!(back[0].err_l2.is_nan());
        assert_eq!(back[0].n_used, 2);
    }

    #[test]
    fn rows_follow_epsilon_order_and_are_isolated() {
        let a = run_linear(&cfg(&[0.2, 0.05, 0.1])).unwrap();
        let b = run_linear(&cfg(&[0.1, 0.2, 0.05])).unwrap();
        let eps: Vec<f64> = a.rows.iter().map(|r| r.epsilon).collect();
        assert_eq!(eps, vec![0.2, 0.05, 0.1]);
        for ra in &a.rows {
            let rb = b.rows.iter().find(|r| r.epsilon == ra.epsilon).unwrap();
            assert_eq!(ra.record()[..8], rb.record()[..8]);
        }
    }

    #[test]
    fn linear_run_refuses_nonlinearity() {
        let mut c = cfg(&[0.1]);
        c.problem.nonlinearity = NonlinearityConfig::Sine { shift: 0.0 };
        assert!(matches!(run_linear(&c), Err(Error::Validation(_))));
        assert!(run_linear(&linear_leg(&c)).is_ok());
    }
}
