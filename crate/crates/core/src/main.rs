use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use poprank::analytic::{self, AnalyticModel, FitProtocol, PopularityMeasure};
use poprank::report::{self, format_real, ColumnKind, Table};
use poprank::sim;
use poprank::sweep::{self, SweepSpec};
use poprank::{Config, Error, Group, HighlightMode};

#[derive(Parser)]
#[command(name = "poprank", version, about = "Popularity and personalization ranking simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Model configuration (JSON); defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Flat,
    NonFlat,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Highlighting mode at its default parameters.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble and write its index report.
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        runs: Option<usize>,
        /// Report CSV (default: <out-dir>/simulate.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Event log CSV of every run, or `off`.
        #[arg(long, default_value = "off")]
        emit_events: String,
    },
    /// Run ensembles over an (eta, lambda) grid.
    Sweep {
        /// Sweep specification (JSON). Without it the grids below are used
        /// with the base configuration and both modes.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,10,50,100")]
        eta_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        lambda_grid: Vec<f64>,
    },
    /// Tabulate pi, LCD and LHD on a signal grid.
    Analytic {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, requires = "zeta1")]
        zeta0: Option<f64>,
        #[arg(long)]
        zeta1: Option<f64>,
        /// Simulation runs of the rank fit used when no zeta is given.
        #[arg(long, default_value_t = 1000)]
        fit_runs: usize,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 8.0)]
        y_max: f64,
    },
    /// Fit the linear rank approximation on simulations.
    FitRank {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long, default_value_t = 5000)]
        agents: usize,
        #[arg(long, value_enum, default_value = "limit")]
        popularity: Popularity,
    },
    /// Heterogeneous or non-centred benchmark ensembles over an eta grid.
    Variants {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_enum)]
        kind: VariantKind,
        /// Benchmark dispersion (default: min(sigma_x, sigma_y)/4).
        #[arg(long)]
        sigma_theta_hat: Option<f64>,
        #[arg(long, default_value_t = 6.0)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        theta_hat: f64,
        #[arg(long, value_delimiter = ',', default_value = "0,1,10,50,100")]
        eta_grid: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Popularity {
    Limit,
    PerWorld,
    Observed,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantKind {
    Heterogeneous,
    Noncentered,
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn load_config(g: &Global, o: Option<&Overrides>) -> Result<Config, Failure> {
    let mut cfg = match &g.config {
        Some(p) => Config::from_json_file(p).map_err(Failure::Config)?,
        None => Config::default(),
    };
    if let Some(s) = g.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = o {
        if let Some(v) = o.eta {
            cfg.eta = v;
        }
        if let Some(v) = o.lambda {
            cfg.lambda = v;
        }
        match o.mode {
            Some(Mode::Flat) => cfg.highlight_mode = HighlightMode::flat_default(),
            Some(Mode::NonFlat) => cfg.highlight_mode = HighlightMode::non_flat_default(),
            None => {}
        }
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    let out_dir = &g.out_dir;
    match &cli.command {
        Command::Simulate { overrides, runs, out, emit_events } => {
            let mut cfg = load_config(g, Some(overrides))?;
            if let Some(t) = runs {
                cfg.runs = *t;
            }
            let e = sim::run_ensemble(&cfg, g.threads)?;
            let mut t = report::index_table();
            report::push_report(&mut t, cfg.eta, cfg.lambda, cfg.mode_kind(), &e.report, &[]);
            let path = out.clone().unwrap_or_else(|| out_dir.join("simulate.csv"));
            let dir = parent_dir(&path);
            report::create_dir(&dir)?;
            t.write_csv(&path)?;
            report::write_json(&path.with_extension("json"), &t.to_json())?;
            report::write_config_echo(&dir, &cfg)?;
            if emit_events != "off" {
                report::write_event_log(Path::new(emit_events), &cfg)?;
            }
            print_summary(&t);
        }
        Command::Sweep { spec, eta_grid, lambda_grid } => {
            let mut s = match spec {
                Some(p) => SweepSpec::from_json_file(p).map_err(Failure::Config)?,
                None => SweepSpec::new(load_config(g, None)?, eta_grid.clone(), lambda_grid.clone()),
            };
            if let Some(seed) = g.seed {
                s.base.master_seed = seed;
            }
            s.validate().map_err(Failure::Config)?;
            let r = sweep::run_sweep(&s, g.threads)?;
            sweep::emit_sweep(&r, out_dir)?;
            let failed = r.failures().count();
            println!("{} cells, {failed} failed; written to {}", r.cells.len(), out_dir.display());
        }
        Command::Analytic { overrides, zeta0, zeta1, fit_runs, step, y_max } => {
            let cfg = load_config(g, Some(overrides))?;
            let (z0, z1, r2) = match (zeta0, zeta1) {
                (Some(a), Some(b)) => (*a, *b, None),
                _ => {
                    let p = FitProtocol { runs: *fit_runs, ..FitProtocol::default() };
                    let fit = analytic::fit_linear_rank(&cfg, &p, g.threads)?;
                    (fit.zeta0, fit.zeta1, Some(fit.r_squared))
                }
            };
            if *step <= 0.0 || *y_max <= 0.0 {
                return Err(Failure::Config(Error::Argument("step and y-max must be positive".into())));
            }
            let m = AnalyticModel::new(&cfg, z0, z1);
            let mut t = Table::new(&[
                ("y", ColumnKind::Real),
                ("mu_h", ColumnKind::Real),
                ("pi", ColumnKind::Real),
                ("lcd", ColumnKind::Real),
                ("lhd", ColumnKind::Real),
                ("lcd_l", ColumnKind::Real),
                ("lcd_r", ColumnKind::Real),
            ]);
            let n = (y_max / step).round() as i64;
            for i in -n..=n {
                let y = cfg.theta + i as f64 * step;
                t.push(
                    [m.mu_h(y), m.pi(y), m.lcd(y), m.lhd(y), m.group_lcd(y, Group::L), m.group_lcd(y, Group::R)]
                        .iter()
                        .fold(vec![format_real(y)], |mut row, &v| {
                            row.push(format_real(v));
                            row
                        }),
                );
            }
            report::create_dir(out_dir)?;
            t.write_pair(out_dir, "analytic")?;
            let ix = m.analytic_indices();
            let summary = serde_json::json!({
                "zeta0": z0, "zeta1": z1, "fit_r_squared": r2,
                "mu_bar": m.mu_bar(), "x_star": m.x_star, "gamma_bar": m.gamma_bar,
                "pi_normalization": m.pi_normalization(),
                "eng": ix.eng, "mis": ix.mis, "pol": ix.pol,
            });
            report::write_json(&out_dir.join("analytic_summary.json"), &summary)?;
            report::write_config_echo(out_dir, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
        }
        Command::FitRank { overrides, runs, agents, popularity } => {
            let cfg = load_config(g, Some(overrides))?;
            let p = FitProtocol {
                runs: *runs,
                agents: *agents,
                items: cfg.items,
                popularity: match popularity {
                    Popularity::Limit => PopularityMeasure::Limit,
                    Popularity::PerWorld => PopularityMeasure::PerWorld,
                    Popularity::Observed => PopularityMeasure::Observed,
                },
            };
            let fit = analytic::fit_linear_rank(&cfg, &p, g.threads)?;
            let mut t = Table::new(&[
                ("bin_centre", ColumnKind::Real),
                ("count", ColumnKind::Integer),
                ("mean_popularity", ColumnKind::Real),
                ("mean_rank", ColumnKind::Real),
            ]);
            for b in &fit.bins {
                t.push(vec![
                    format_real(b.centre),
                    b.count.to_string(),
                    format_real(b.mean_popularity),
                    format_real(b.mean_rank),
                ]);
            }
            report::create_dir(out_dir)?;
            t.write_pair(out_dir, "fit_rank")?;
            let summary = serde_json::json!({
                "eta": cfg.eta, "mode": cfg.mode_kind().to_string(), "popularity": p.popularity,
                "runs": p.runs, "agents": p.agents,
                "zeta0": fit.zeta0, "zeta1": fit.zeta1, "r_squared": fit.r_squared,
            });
            report::write_json(&out_dir.join("fit_rank_summary.json"), &summary)?;
            report::write_config_echo(out_dir, &cfg)?;
            println!("zeta0 = {}, zeta1 = {}, R^2 = {}", fit.zeta0, fit.zeta1, fit.r_squared);
        }
        Command::Variants { overrides, kind, sigma_theta_hat, theta, theta_hat, eta_grid } => {
            let cfg = load_config(g, Some(overrides))?;
            let mut cols = report::INDEX_COLUMNS.to_vec();
            cols.insert(0, ("variant", ColumnKind::Text));
            let mut t = Table::new(&cols);
            for &eta in eta_grid {
                let base = Config { eta, ..cfg.clone() };
                let (label, e) = match kind {
                    VariantKind::Heterogeneous => {
                        let s = sigma_theta_hat.unwrap_or_else(|| sweep::heterogeneous_sigma(&base));
                        ("heterogeneous", sim::run_variant_heterogeneous(&base, s, g.threads)?)
                    }
                    VariantKind::Noncentered => {
                        ("noncentered", sim::run_variant_noncentered(&base, *theta, *theta_hat, g.threads)?)
                    }
                };
                let mut part = report::index_table();
                report::push_report(&mut part, eta, base.lambda, base.mode_kind(), &e.report, &[]);
                for mut row in part.rows {
                    row.insert(0, label.to_string());
                    t.push(row);
                }
            }
            report::create_dir(out_dir)?;
            t.write_pair(out_dir, "variants")?;
            report::write_config_echo(out_dir, &cfg)?;
            print_summary(&t);
        }
    }
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => {
            warn!("writing config echo to the current directory");
            PathBuf::from(".")
        }
    }
}

fn print_summary(t: &Table) {
    let Some(n) = t.columns.iter().position(|(name, _)| name == "index_name") else {
        return;
    };
    for row in t.rows.iter().filter(|r| ["ENG_PC", "MIS", "POL", "POL_G", "HHI"].contains(&r[n].as_str())) {
        println!("{}", row.join(" "));
    }
}
