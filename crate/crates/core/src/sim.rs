//! The sequential N-agent process of one run and parallel ensembles of runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BenchmarkMode, ModelConfig};
use crate::error::{Error, Result};
use crate::metrics::{self, IndexReport, WindowIndices, DEFAULT_PSI, SIGNAL_BINS};
use crate::model::{propensities_into, sample_click, sample_world, wants_highlight, AttentionWeights, ItemSet};
use crate::ranking::{Group, RankingState};
use crate::rng;
use crate::scalar::Scalar;

/// One agent's outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickEvent<F> {
    /// Agent index within the run (0-based).
    pub n: usize,
    pub group: Group,
    pub item: usize,
    /// Signal of the clicked item.
    pub y: F,
    pub highlighted: bool,
    /// Rank of the clicked item in the agent's group ranking when clicking.
    pub rank_seen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<F> {
    pub run_seed: u64,
    pub items: ItemSet<F>,
    pub events: Vec<ClickEvent<F>>,
    pub final_state: RankingState<F>,
}

/// Runs the agent sequence of one run, passing every event to `sink`, and
/// returns the items and final ranking state. The configuration is not
/// validated here.
pub fn run_with<F: Scalar>(
    cfg: &ModelConfig<F>,
    run_seed: u64,
    mut sink: impl FnMut(&ClickEvent<F>),
) -> Result<(ItemSet<F>, RankingState<F>)> {
    let (items, agents) = sample_world(cfg, run_seed)?;
    let mut ranking_stream = rng::ranking_stream(run_seed);
    let mut state = RankingState::new(cfg, &mut ranking_stream);
    let att = AttentionWeights::new(cfg.beta, cfg.items);
    let mut phi = vec![F::zero(); cfg.items];

    for n in 0..cfg.agents {
        let (agent, mut stream) = agents.agent(n);
        let group = Group::of_sign(agent.sign);
        propensities_into(&agent, &items, &mut phi);
        let u = F::unit_uniform(&mut stream);
        let ranks = state.ranks(group);
        let item = sample_click(&phi, ranks, &att, u);
        let rank_seen = ranks[item];
        let y = items.y[item];
        let highlighted = wants_highlight(&agent, y, cfg.sigma_x);
        state.record_outcome(group, item, highlighted, &mut ranking_stream);
        sink(&ClickEvent { n, group, item, y, highlighted, rank_seen });
    }
    Ok((items, state))
}

/// One run with its full event log.
pub fn run_once<F: Scalar>(cfg: &ModelConfig<F>, run_seed: u64) -> Result<RunResult<F>> {
    let mut events = Vec::with_capacity(cfg.agents);
    let (items, final_state) = run_with(cfg, run_seed, |e| events.push(*e))?;
    Ok(RunResult { run_seed, items, events, final_state })
}

/// What an ensemble keeps of a run: the window indices and the binned
/// signals of the window's clicks and highlights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary<F> {
    pub run_index: usize,
    pub run_seed: u64,
    pub indices: WindowIndices<F>,
    pub click_bins: Vec<u32>,
    pub highlight_bins: Vec<u32>,
}

/// Runs `run_index` of the ensemble and summarizes its trailing window.
pub fn summarize_run<F: Scalar>(cfg: &ModelConfig<F>, run_index: usize) -> Result<RunSummary<F>> {
    let run_seed = rng::run_seed(cfg.master_seed, run_index);
    let start = cfg.agents - cfg.window;
    let mut window = Vec::with_capacity(cfg.window);
    run_with(cfg, run_seed, |e| {
        if e.n >= start {
            window.push(*e);
        }
    })?;
    let mut click_bins = vec![0; SIGNAL_BINS];
    let mut highlight_bins = vec![0; SIGNAL_BINS];
    for e in &window {
        if let Some(k) = metrics::signal_bin(e.y) {
            click_bins[k] += 1;
            if e.highlighted {
                highlight_bins[k] += 1;
            }
        }
    }
    Ok(RunSummary {
        run_index,
        run_seed,
        indices: WindowIndices::compute(&window, cfg.items, cfg.theta),
        click_bins,
        highlight_bins,
    })
}

/// Runs `f(run_index, run_seed)` for every run on a pool of `threads`
/// workers (rayon's default when `None`). Results come back in run order; the
/// first failure is reported with its run index.
pub fn map_runs<F, T, G>(cfg: &ModelConfig<F>, threads: Option<usize>, f: G) -> Result<Vec<T>>
where
    F: Scalar,
    T: Send,
    G: Fn(usize, u64) -> Result<T> + Sync,
{
    let work = || {
        (0..cfg.runs)
            .into_par_iter()
            .map(|i| f(i, rng::run_seed(cfg.master_seed, i)))
            .collect::<Vec<_>>()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Argument(format!("cannot start {n} worker threads: {e}")))?
            .install(work),
        None => work(),
    };
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|e| Error::Run { index, source: Box::new(e) }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Ensemble<F> {
    pub config: ModelConfig<F>,
    pub runs: Vec<RunSummary<F>>,
    pub report: IndexReport<F>,
}

impl<F: Scalar> Ensemble<F> {
    /// Window clicks per signal bin, summed over runs.
    pub fn click_histogram(&self) -> Vec<u64> {
        sum_bins(self.runs.iter().map(|r| &r.click_bins))
    }

    pub fn highlight_histogram(&self) -> Vec<u64> {
        sum_bins(self.runs.iter().map(|r| &r.highlight_bins))
    }
}

fn sum_bins<'a>(bins: impl Iterator<Item = &'a Vec<u32>>) -> Vec<u64> {
    let mut total = vec![0u64; SIGNAL_BINS];
    for b in bins {
        for (t, &c) in total.iter_mut().zip(b) {
            *t += u64::from(c);
        }
    }
    total
}

/// `T` runs with seeds derived from the master seed, summarized over the
/// trailing window.
pub fn run_ensemble<F: Scalar>(cfg: &ModelConfig<F>, threads: Option<usize>) -> Result<Ensemble<F>> {
    cfg.validate()?;
    let runs = map_runs(cfg, threads, |i, _| summarize_run(cfg, i))?;
    let indices: Vec<_> = runs.iter().map(|r| r.indices.clone()).collect();
    let psi: Vec<F> = DEFAULT_PSI.iter().map(|&p| F::of(p)).collect();
    let report = IndexReport::from_runs(&indices, cfg.eng_normalization, &psi);
    Ok(Ensemble { config: cfg.clone(), runs, report })
}

/// Ensemble with agent-specific benchmarks drawn around `theta_hat`.
pub fn run_variant_heterogeneous<F: Scalar>(
    cfg: &ModelConfig<F>,
    sigma_theta_hat: F,
    threads: Option<usize>,
) -> Result<Ensemble<F>> {
    let cfg = ModelConfig { benchmark_mode: BenchmarkMode::Heterogeneous { sigma_theta_hat }, ..cfg.clone() };
    run_ensemble(&cfg, threads)
}

/// Ensemble whose signals centre on `theta` while agents sort by `theta_hat`.
pub fn run_variant_noncentered<F: Scalar>(
    cfg: &ModelConfig<F>,
    theta: F,
    theta_hat: F,
    threads: Option<usize>,
) -> Result<Ensemble<F>> {
    let cfg = ModelConfig { theta, theta_hat, ..cfg.clone() };
    run_ensemble(&cfg, threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::HighlightMode;

    type Cfg = ModelConfig<f64>;

    fn small(eta: f64, lambda: f64) -> Cfg {
        Cfg { agents: 2_000, runs: 6, window: 500, eta, lambda, ..Cfg::default() }
    }

    #[test]
    fn one_agent_one_click() {
        let cfg = Cfg { items: 2, agents: 1, window: 1, ..Cfg::default() };
        let r = run_once(&cfg, 5).unwrap();
        assert_eq!(r.events.len(), 1);
        let total: u64 = Group::BOTH.iter().flat_map(|&g| r.final_state.clicks(g).iter()).sum();
        assert_eq!(total, 1);
    }

    #[test]
    fn run_is_deterministic_and_consistent() {
        let cfg = small(10.0, 0.5);
        let a = run_once(&cfg, 77).unwrap();
        let b = run_once(&cfg, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.events.len(), cfg.agents);
        for (i, e) in a.events.iter().enumerate() {
            assert_eq!(e.n, i);
            assert_eq!(e.y, a.items.y[e.item]);
        }
        let total: u64 = Group::BOTH.iter().flat_map(|&g| a.final_state.clicks(g).iter()).sum();
        assert_eq!(total, cfg.agents as u64);
    }

    #[test]
    fn full_window_matches_event_array() {
        let cfg = Cfg { window: 2_000, runs: 1, ..small(5.0, 1.0) };
        let s = summarize_run(&cfg, 0).unwrap();
        let r = run_once(&cfg, s.run_seed).unwrap();
        assert_eq!(s.indices, WindowIndices::compute(&r.events, cfg.items, cfg.theta));
    }

    #[test]
    fn zero_eta_mode_independent() {
        let nf = small(0.0, 0.5);
        let fl = Cfg { highlight_mode: HighlightMode::flat_default(), ..nf.clone() };
        let a = run_once(&nf, 3).unwrap();
        let b = run_once(&fl, 3).unwrap();
        let strip = |r: &RunResult<f64>| r.events.iter().map(|e| (e.item, e.group)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        let ea = run_ensemble(&nf, None).unwrap();
        let eb = run_ensemble(&fl, None).unwrap();
        assert_eq!(ea.report.mis, eb.report.mis);
        assert_eq!(ea.report.pol, eb.report.pol);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = small(10.0, 0.25);
        let one = run_ensemble(&cfg, Some(1)).unwrap();
        let three = run_ensemble(&cfg, Some(3)).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn degenerate_heterogeneous_is_common() {
        let cfg = small(10.0, 1.0);
        let common = run_ensemble(&cfg, None).unwrap();
        let het = run_variant_heterogeneous(&cfg, 0.0, None).unwrap();
        assert_eq!(common.report, het.report);
        let centred = run_variant_noncentered(&cfg, 0.0, 0.0, None).unwrap();
        assert_eq!(common.report, centred.report);
    }

    #[test]
    fn run_failure_carries_index() {
        let err = map_runs(&small(0.0, 1.0), Some(2), |i, _| {
            if i >= 4 {
                Err(Error::ResampleExhausted { attempts: 101 })
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Run { index: 4, .. }));
    }

    #[test]
    fn histograms_count_window() {
        let e = run_ensemble(&small(10.0, 1.0), None).unwrap();
        let clicks: u64 = e.click_histogram().iter().sum();
        assert!(clicks <= 6 * 500 && clicks > 6 * 490);
        let hl: u64 = e.highlight_histogram().iter().sum();
        let expect: usize = e.runs.iter().map(|r| r.indices.highlights).sum();
        assert!(hl <= expect as u64);
    }
}
