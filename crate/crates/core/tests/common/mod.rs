#![allow(dead_code)]

use poprank::analytic::AnalyticModel;
use poprank::sim;
use poprank::{Config, Group};

/// One outcome of the two-item, one-agent world.
#[derive(Debug, Clone, Copy)]
pub struct OracleCell {
    pub top_ranked: bool,
    pub like_minded: bool,
    pub frequency: f64,
    pub exact: f64,
    pub se: f64,
}

impl OracleCell {
    pub fn z(&self) -> f64 {
        if self.se > 0.0 {
            (self.frequency - self.exact).abs() / self.se
        } else if self.frequency == self.exact {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Exact click distribution over (rank of the clicked item, whether it is
/// like-minded) for M = 2, N = 1 and a centred benchmark. Item sets always
/// hold one item of each sign, and the initial order is a uniform shuffle,
/// so the top item is the like-minded one with probability 1/2.
pub fn m2_exact(cfg: &Config) -> [[f64; 2]; 2] {
    let types = [
        (cfg.p_confirmatory, cfg.gamma_confirmatory),
        (cfg.p_exploratory, cfg.gamma_exploratory),
        (cfg.p_indifferent, cfg.gamma_indifferent),
    ];
    // [top_ranked][like_minded]
    let mut p = [[0.0; 2]; 2];
    for (pk, gamma) in types {
        for top_like in [false, true] {
            let phi = |like: bool| if like { gamma } else { 1.0 - gamma };
            let (w1, w2) = (phi(top_like) * cfg.beta, phi(!top_like));
            let mass = pk * 0.5;
            p[1][usize::from(top_like)] += mass * w1 / (w1 + w2);
            p[0][usize::from(!top_like)] += mass * w2 / (w1 + w2);
        }
    }
    p
}

/// Monte Carlo frequencies of the same outcomes over `replicates` one-agent
/// runs, against the exact values.
pub fn m2_oracle(replicates: usize, master_seed: u64) -> Vec<OracleCell> {
    let cfg = Config { items: 2, agents: 1, runs: replicates, window: 1, master_seed, ..Config::default() };
    let mut counts = [[0u64; 2]; 2];
    for i in 0..replicates {
        let seed = poprank::rng::run_seed(master_seed, i);
        sim::run_with(&cfg, seed, |e| {
            let like = (e.y >= cfg.theta_hat) == (e.group == Group::R);
            counts[usize::from(e.rank_seen == 1)][usize::from(like)] += 1;
        })
        .expect("two-item run");
    }
    let exact = m2_exact(&cfg);
    let n = replicates as f64;
    let mut out = Vec::new();
    for top in [true, false] {
        for like in [true, false] {
            let q = exact[usize::from(top)][usize::from(like)];
            out.push(OracleCell {
                top_ranked: top,
                like_minded: like,
                frequency: counts[usize::from(top)][usize::from(like)] as f64 / n,
                exact: q,
                se: (q * (1.0 - q) / n).sqrt(),
            });
        }
    }
    out
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Correlation between the binned click density of an ensemble and the
/// limit clicking distribution at the bin centres.
pub fn click_density_correlation(cfg: &Config, model: &AnalyticModel<f64>) -> f64 {
    let e = sim::run_ensemble(cfg, None).expect("ensemble");
    let hist = e.click_histogram();
    let total: u64 = hist.iter().sum();
    let width = 0.2;
    let empirical: Vec<f64> = hist.iter().map(|&c| c as f64 / total as f64 / width).collect();
    let theory: Vec<f64> =
        (0..hist.len()).map(|k| model.lcd(poprank::metrics::signal_bin_centre(k))).collect();
    pearson(&empirical, &theory)
}
