//! Ensembles over an (eta, lambda) grid for each highlighting mode.

use std::path::Path;

use log::{error, info};
use serde::{Deserialize, Serialize};

use crate::config::{BenchmarkMode, HighlightMode, ModeKind, ModelConfig};
use crate::error::{Error, Result};
use crate::metrics::{IndexReport, DEFAULT_PSI};
use crate::report::{self, format_real, Table, HISTOGRAM_COLUMNS};
use crate::scalar::Scalar;
use crate::sim::{self, Ensemble};

/// Outputs a sweep can be asked for (each is data for one figure kind).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    ClickingHist,
    HighlightingHist,
    EngSurface,
    PolSurface,
    MisSurface,
    HhiSurface,
    WelfareSurface,
    BenchmarkCompare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "F: Scalar")]
pub struct SweepSpec<F> {
    pub base: ModelConfig<F>,
    pub eta_grid: Vec<F>,
    pub lambda_grid: Vec<F>,
    pub modes: Vec<HighlightMode<F>>,
    #[serde(default = "default_psi")]
    pub psi_list: Vec<F>,
    #[serde(default)]
    pub figures: Vec<FigureKind>,
}

fn default_psi<F: Scalar>() -> Vec<F> {
    DEFAULT_PSI.iter().map(|&p| F::of(p)).collect()
}

impl<F: Scalar> SweepSpec<F> {
    /// Both modes at their defaults on the given grids.
    pub fn new(base: ModelConfig<F>, eta_grid: Vec<F>, lambda_grid: Vec<F>) -> Self {
        SweepSpec {
            base,
            eta_grid,
            lambda_grid,
            modes: vec![HighlightMode::non_flat_default(), HighlightMode::flat_default()],
            psi_list: default_psi(),
            figures: Vec::new(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| Error::Json { path: path.into(), source: e })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let increasing = |g: &[F]| !g.is_empty() && g.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.eta_grid) || !increasing(&self.lambda_grid) {
            return Err(Error::Config("grids must be nonempty and strictly increasing".into()));
        }
        if self.eta_grid[0] < F::zero() {
            return Err(Error::Config("eta grid must be non-negative".into()));
        }
        if self.lambda_grid[0] < F::zero() || *self.lambda_grid.last().unwrap() > F::one() {
            return Err(Error::Config("lambda grid must lie in [0, 1]".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("no highlighting modes".into()));
        }
        if self.psi_list.iter().any(|&p| p < F::zero() || p > F::one()) {
            return Err(Error::Config("psi values must lie in [0, 1]".into()));
        }
        for &mode in &self.modes {
            self.cell_config(mode, self.eta_grid[0], self.lambda_grid[0]).validate()?;
        }
        Ok(())
    }

    pub fn cell_config(&self, mode: HighlightMode<F>, eta: F, lambda: F) -> ModelConfig<F> {
        ModelConfig { highlight_mode: mode, eta, lambda, ..self.base.clone() }
    }

    pub fn cell_count(&self) -> usize {
        self.modes.len() * self.eta_grid.len() * self.lambda_grid.len()
    }

    pub fn wants(&self, f: FigureKind) -> bool {
        self.figures.contains(&f)
    }
}

/// Seed of a sweep cell. Every cell reuses the master seed, so cells differ
/// only through their parameters.
pub fn cell_seed(master_seed: u64) -> u64 {
    master_seed
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell<F> {
    pub mode: ModeKind,
    pub eta: F,
    pub lambda: F,
    pub cell_seed: u64,
    pub outcome: std::result::Result<CellResult<F>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult<F> {
    pub ensemble: Ensemble<F>,
    /// Report with the sweep's welfare weights.
    pub report: IndexReport<F>,
    /// Heterogeneous-benchmark counterpart, when requested.
    pub heterogeneous: Option<IndexReport<F>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<F> {
    pub spec: SweepSpec<F>,
    pub cells: Vec<Cell<F>>,
}

impl<F: Scalar> SweepResult<F> {
    pub fn cell(&self, mode: ModeKind, eta: F, lambda: F) -> Option<&Cell<F>> {
        self.cells.iter().find(|c| c.mode == mode && c.eta == eta && c.lambda == lambda)
    }

    pub fn report(&self, mode: ModeKind, eta: F, lambda: F) -> Option<&IndexReport<F>> {
        self.cell(mode, eta, lambda).and_then(|c| c.outcome.as_ref().ok()).map(|r| &r.report)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Cell<F>> {
        self.cells.iter().filter(|c| c.outcome.is_err())
    }
}

fn report_with_psi<F: Scalar>(e: &Ensemble<F>, psi: &[F]) -> IndexReport<F> {
    let runs: Vec<_> = e.runs.iter().map(|r| r.indices.clone()).collect();
    IndexReport::from_runs(&runs, e.config.eng_normalization, psi)
}

/// Runs every (mode, eta, lambda) cell in that nesting order. A failing cell
/// is recorded and the sweep goes on.
pub fn run_sweep<F: Scalar>(spec: &SweepSpec<F>, threads: Option<usize>) -> Result<SweepResult<F>> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.cell_count());
    for &mode in &spec.modes {
        for &eta in &spec.eta_grid {
            for &lambda in &spec.lambda_grid {
                let mut cfg = spec.cell_config(mode, eta, lambda);
                cfg.master_seed = cell_seed(spec.base.master_seed);
                info!("cell {} eta={} lambda={}", mode.kind(), eta, lambda);
                let outcome = run_cell(spec, &cfg, threads).map_err(|e| {
                    error!("cell {} eta={eta} lambda={lambda} failed: {e}", mode.kind());
                    e.to_string()
                });
                cells.push(Cell { mode: mode.kind(), eta, lambda, cell_seed: cfg.master_seed, outcome });
            }
        }
    }
    Ok(SweepResult { spec: spec.clone(), cells })
}

fn run_cell<F: Scalar>(spec: &SweepSpec<F>, cfg: &ModelConfig<F>, threads: Option<usize>) -> Result<CellResult<F>> {
    let ensemble = sim::run_ensemble(cfg, threads)?;
    let report = report_with_psi(&ensemble, &spec.psi_list);
    let heterogeneous = if spec.wants(FigureKind::BenchmarkCompare) {
        let sigma = heterogeneous_sigma(cfg);
        let het = sim::run_variant_heterogeneous(cfg, sigma, threads)?;
        Some(report_with_psi(&het, &spec.psi_list))
    } else {
        None
    };
    Ok(CellResult { ensemble, report, heterogeneous })
}

/// Widest benchmark dispersion of the narrow regime, `min(sigma_x, sigma_y)/4`.
pub fn heterogeneous_sigma<F: Scalar>(cfg: &ModelConfig<F>) -> F {
    match cfg.benchmark_mode {
        BenchmarkMode::Heterogeneous { sigma_theta_hat } if sigma_theta_hat > F::zero() => sigma_theta_hat,
        _ => cfg.sigma_x.min(cfg.sigma_y) / F::of(4.0),
    }
}

/// Index rows of every successful cell, with seeds.
pub fn sweep_table<F: Scalar>(result: &SweepResult<F>) -> Table {
    let mut t = report::sweep_table();
    for c in &result.cells {
        if let Ok(r) = &c.outcome {
            let extra = [result.spec.base.master_seed.to_string(), c.cell_seed.to_string()];
            report::push_report(&mut t, c.eta, c.lambda, c.mode, &r.report, &extra);
        }
    }
    t
}

pub fn failure_table<F: Scalar>(result: &SweepResult<F>) -> Table {
    use report::ColumnKind::*;
    let mut t = Table::new(&[("mode", Text), ("eta", Real), ("lambda", Real), ("error", Text)]);
    for c in result.failures() {
        t.push(vec![
            c.mode.to_string(),
            format_real(c.eta.as_f64()),
            format_real(c.lambda.as_f64()),
            c.outcome.clone().err().unwrap_or_default(),
        ]);
    }
    t
}

pub fn histogram_table<F: Scalar>(result: &SweepResult<F>, clicks: bool, highlights: bool) -> Table {
    let mut t = Table::new(&HISTOGRAM_COLUMNS);
    for c in &result.cells {
        if let Ok(r) = &c.outcome {
            let e = &r.ensemble;
            let events = (e.report.runs * e.report.window) as u64;
            if clicks {
                report::push_histogram(&mut t, c.mode, c.eta, c.lambda, "clicks", &e.click_histogram(), events);
            }
            if highlights {
                report::push_histogram(&mut t, c.mode, c.eta, c.lambda, "highlights", &e.highlight_histogram(), events);
            }
        }
    }
    t
}

pub fn benchmark_table<F: Scalar>(result: &SweepResult<F>) -> Table {
    let mut cols = report::INDEX_COLUMNS.to_vec();
    cols.insert(0, ("benchmark", report::ColumnKind::Text));
    let mut t = Table::new(&cols);
    for c in &result.cells {
        if let Ok(r) = &c.outcome {
            for (label, rep) in [("common", Some(&r.report)), ("heterogeneous", r.heterogeneous.as_ref())] {
                if let Some(rep) = rep {
                    let mut part = report::index_table();
                    report::push_report(&mut part, c.eta, c.lambda, c.mode, rep, &[]);
                    for mut row in part.rows {
                        row.insert(0, label.to_string());
                        t.push(row);
                    }
                }
            }
        }
    }
    t
}

/// Writes `sweep.csv`/`.json`, the requested histogram and benchmark
/// tables, any failures, and the frozen spec and base configuration.
pub fn emit_sweep<F: Scalar>(result: &SweepResult<F>, dir: &Path) -> Result<()> {
    report::create_dir(dir)?;
    sweep_table(result).write_pair(dir, "sweep")?;
    let spec = &result.spec;
    let (clicks, highlights) = (spec.wants(FigureKind::ClickingHist), spec.wants(FigureKind::HighlightingHist));
    if clicks || highlights {
        histogram_table(result, clicks, highlights).write_pair(dir, "histograms")?;
    }
    if spec.wants(FigureKind::BenchmarkCompare) {
        benchmark_table(result).write_pair(dir, "benchmark_compare")?;
    }
    if result.failures().next().is_some() {
        failure_table(result).write_pair(dir, "failures")?;
    }
    report::write_json(&dir.join("sweep_spec.json"), spec)?;
    report::write_config_echo(dir, &spec.base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::HighlightMode;

    type Cfg = ModelConfig<f64>;

    fn base() -> Cfg {
        Cfg { agents: 1500, runs: 4, window: 300, ..Cfg::default() }
    }

    #[test]
    fn spec_validation() {
        let mut s = SweepSpec::new(base(), vec![0.0, 10.0], vec![0.5, 1.0]);
        assert!(s.validate().is_ok());
        s.eta_grid = vec![10.0, 0.0];
        assert!(s.validate().is_err());
        s.eta_grid = vec![0.0];
        s.lambda_grid = vec![1.5];
        assert!(s.validate().is_err());
        s.lambda_grid = vec![];
        assert!(s.validate().is_err());
    }

    #[test]
    fn spec_json() {
        let text = r#"{"base": {"N": 1000, "T": 2, "window": 100}, "eta_grid": [0, 10],
            "lambda_grid": [1], "modes": [{"Flat": {"p_A_const": 0.3}}],
            "figures": ["clicking_hist", "eng_surface"]}"#;
        let s: SweepSpec<f64> = serde_json::from_str(text).unwrap();
        assert!(s.validate().is_ok());
        assert_eq!(s.psi_list.len(), DEFAULT_PSI.len());
        assert!(s.wants(FigureKind::ClickingHist));
        assert!(serde_json::from_str::<SweepSpec<f64>>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn single_cell_matches_ensemble() {
        let b = base();
        let s = SweepSpec {
            modes: vec![HighlightMode::non_flat_default()],
            ..SweepSpec::new(b.clone(), vec![10.0], vec![0.5])
        };
        let r = run_sweep(&s, None).unwrap();
        let direct = sim::run_ensemble(&Cfg { eta: 10.0, lambda: 0.5, ..b }, None).unwrap();
        assert_eq!(r.report(ModeKind::NonFlat, 10.0, 0.5).unwrap(), &direct.report);
        let t = sweep_table(&r);
        assert_eq!(t.rows.len(), direct.report.rows().len());
    }

    #[test]
    fn row_count() {
        let s = SweepSpec::new(base(), vec![0.0, 10.0], vec![0.5, 1.0]);
        let r = run_sweep(&s, None).unwrap();
        let per_cell = 8 + s.psi_list.len();
        assert_eq!(sweep_table(&r).rows.len(), 2 * 2 * 2 * per_cell);
        assert_eq!(histogram_table(&r, true, true).rows.len(), 8 * 2 * crate::metrics::SIGNAL_BINS);
    }
}
