use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cost_lab::sweep::SweepRow;
use crate::error::{Error, Result};

/// δ in ln ln max(cost, 1 + δ), keeping the double log finite.
pub const LOGLOG_DELTA: f64 = 1e-6;

pub const EMPIRICAL_LABEL: &str = "empirical fit; the constants of the theoretical cost bound are not computable";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// ln cost = a/ε + b
    Exp,
    /// ln ln cost = a/ε + b
    DoubleExp,
    /// ln cost = a/ε² + b
    ExpSquare,
}

impl FitModel {
    pub const ALL: [FitModel; 3] = [FitModel::Exp, FitModel::DoubleExp, FitModel::ExpSquare];

    pub fn name(self) -> &'static str {
        match self {
            FitModel::Exp => "exp_inv_eps",
            FitModel::DoubleExp => "double_exp_inv_eps",
            FitModel::ExpSquare => "exp_inv_eps2",
        }
    }

    pub fn x_label(self) -> &'static str {
        match self {
            FitModel::ExpSquare => "1/eps^2",
            _ => "1/eps",
        }
    }

    pub fn y_label(self) -> &'static str {
        match self {
            FitModel::DoubleExp => "ln(ln(max(cost, 1+delta)))",
            _ => "ln(cost)",
        }
    }

    fn x(self, eps: f64) -> f64 {
        match self {
            FitModel::ExpSquare => 1.0 / (eps * eps),
            _ => 1.0 / eps,
        }
    }

    fn y(self, cost: f64) -> f64 {
        match self {
            FitModel::DoubleExp => cost.max(1.0 + LOGLOG_DELTA).ln().ln(),
            _ => cost.ln(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    /// Residual sum of squares in the model's own y variable.
    pub rss: f64,
    /// rss / total sum of squares; comparable across models.
    pub relative_rss: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub fits: Vec<ModelFit>,
    pub selected: FitModel,
    pub rows_used: usize,
}

impl FitReport {
    pub fn fit(&self, model: FitModel) -> &ModelFit {
        self.fits.iter().find(|f| f.model == model).expect("all models fitted")
    }
}

fn least_squares(model: FitModel, points: Vec<(f64, f64)>) -> ModelFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let tss: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let relative_rss = if tss > 0.0 { rss / tss } else { 0.0 };
    ModelFit {
        model,
        slope,
        intercept,
        rss,
        relative_rss,
        points,
    }
}

/// Least-squares fits of the three growth models to the converged rows
/// with positive finite cost. The model with the smallest relative residual
/// is selected.
pub fn fit_cost_curve(rows: &[SweepRow]) -> Result<FitReport> {
    let mut used: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if r.converged
            && r.cost_l2.is_finite()
            && r.cost_l2 > 0.0
            && r.epsilon > 0.0
            && !used.iter().any(|(e, _)| *e == r.epsilon)
        {
            used.push((r.epsilon, r.cost_l2));
        }
    }
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 converged rows with distinct epsilon and positive cost, have {}",
            used.len()
        )));
    }
    let fits: Vec<ModelFit> = FitModel::ALL
        .iter()
        .map(|&m| least_squares(m, used.iter().map(|&(e, c)| (m.x(e), m.y(c))).collect()))
        .collect();
    let selected = fits
        .iter()
        .min_by(|a, b| a.relative_rss.total_cmp(&b.relative_rss))
        .map(|f| f.model)
        .expect("three fits");
    Ok(FitReport {
        fits,
        selected,
        rows_used: used.len(),
    })
}

/// `fit_<model>.dat`: comment header, then "x y" per row.
pub fn write_plot_data(report: &FitReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for f in &report.fits {
        let mut text = format!("# {EMPIRICAL_LABEL}\n");
        text.push_str(&format!(
            "# model {}: {} = slope * {} + intercept\n# slope {} intercept {} rss {} relative_rss {}\n# {} {}\n",
            f.model.name(),
            f.model.y_label(),
            f.model.x_label(),
            f.slope,
            f.intercept,
            f.rss,
            f.relative_rss,
            f.model.x_label(),
            f.model.y_label()
        ));
        for (x, y) in &f.points {
            text.push_str(&format!("{x} {y}\n"));
        }
        let path = dir.join(format!("fit_{}.dat", f.model.name()));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{EMPIRICAL_LABEL}")?;
        writeln!(f, "rows used: {}", self.rows_used)?;
        for m in &self.fits {
            writeln!(
                f,
                "{:<20} {} vs {}: slope {:.6e} intercept {:.6e} rss {:.3e} relative_rss {:.3e}{}",
                m.model.name(),
                m.model.y_label(),
                m.model.x_label(),
                m.slope,
                m.intercept,
                m.rss,
                m.relative_rss,
                if m.model == self.selected { "  <- selected" } else { "" }
            )?;
        }
        Ok(())
    }
}
