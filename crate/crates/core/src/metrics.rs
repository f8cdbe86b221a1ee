//! Evaluation indices over a window of click events, ensemble statistics,
//! welfare and weighted affective polarization.

use serde::{Deserialize, Serialize};

use crate::config::EngNormalization;
use crate::error::{Error, Result};
use crate::ranking::Group;
use crate::scalar::Scalar;
use crate::sim::ClickEvent;

/// Welfare weights reported by default.
pub const DEFAULT_PSI: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Total engagement (clicks plus highlights) and its split by group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Engagement<F> {
    pub eng: F,
    pub eng_l: F,
    pub eng_r: F,
}

pub fn compute_eng<F: Scalar>(window: &[ClickEvent<F>]) -> Engagement<F> {
    let mut by_group = [0usize; 2];
    for e in window {
        by_group[e.group.index()] += 1 + usize::from(e.highlighted);
    }
    Engagement {
        eng: F::of_usize(by_group[0] + by_group[1]),
        eng_l: F::of_usize(by_group[Group::L.index()]),
        eng_r: F::of_usize(by_group[Group::R.index()]),
    }
}

/// Mean absolute distance of clicked signals from the truth.
pub fn compute_mis<F: Scalar>(window: &[ClickEvent<F>], theta: F) -> F {
    let total = window.iter().fold(F::zero(), |a, e| a + (e.y - theta).abs());
    total / F::of_usize(window.len())
}

/// Gap between the signal sums clicked by the two groups, per event.
pub fn compute_pol<F: Scalar>(window: &[ClickEvent<F>]) -> F {
    let mut sums = [F::zero(); 2];
    for e in window {
        let g = e.group.index();
        sums[g] = sums[g] + e.y;
    }
    (sums[Group::R.index()] - sums[Group::L.index()]).abs() / F::of_usize(window.len())
}

/// Gap between the mean signals clicked by the two groups; 0 when a group
/// is absent from the window.
pub fn compute_pol_group_means<F: Scalar>(window: &[ClickEvent<F>]) -> F {
    let mut sums = [F::zero(); 2];
    let mut counts = [0usize; 2];
    for e in window {
        let g = e.group.index();
        sums[g] = sums[g] + e.y;
        counts[g] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return F::zero();
    }
    let mean = |g: usize| sums[g] / F::of_usize(counts[g]);
    (mean(Group::R.index()) - mean(Group::L.index())).abs()
}

/// Clicks per item (both groups) within the window.
pub fn window_clicks<F>(window: &[ClickEvent<F>], items: usize) -> Vec<u64> {
    let mut clicks = vec![0; items];
    for e in window {
        clicks[e.item] += 1;
    }
    clicks
}

/// Herfindahl index of click shares on the 0 to 10000 scale.
pub fn compute_hhi<F: Scalar>(clicks: &[u64]) -> F {
    let total: u64 = clicks.iter().sum();
    let w = F::of(total as f64);
    clicks.iter().fold(F::zero(), |a, &c| {
        let share = F::of(100.0) * F::of(c as f64) / w;
        a + share * share
    })
}

/// `psi * eng_basis - (1 - psi) * mis * pol`.
pub fn compute_welfare<F: Scalar>(eng_basis: F, mis: F, pol: F, psi: F) -> F {
    psi * eng_basis - (F::one() - psi) * mis * pol
}

/// Weighted affective polarization: `sqrt(sum_p v_p |s_p - s_bar|)` with
/// `s_bar = sum_p v_p s_p`.
pub fn compute_wap<F: Scalar>(vote_shares: &[F], sympathy: &[F]) -> Result<F> {
    if vote_shares.len() != sympathy.len() {
        return Err(Error::Argument(format!(
            "{} vote shares but {} sympathy scores",
            vote_shares.len(),
            sympathy.len()
        )));
    }
    if vote_shares.iter().any(|&v| v < F::zero()) {
        return Err(Error::Argument("negative vote share".into()));
    }
    let total = vote_shares.iter().fold(0.0, |a, v| a + v.as_f64());
    if total > 1.0 + 1e-9 {
        return Err(Error::Argument(format!("vote shares sum to {total} > 1")));
    }
    let mean = vote_shares.iter().zip(sympathy).fold(F::zero(), |a, (&v, &s)| a + v * s);
    let dev = vote_shares.iter().zip(sympathy).fold(F::zero(), |a, (&v, &s)| a + v * (s - mean).abs());
    Ok(dev.sqrt())
}

/// Signal bins shared by the histograms and the rank fit: 81 bins of width
/// 0.2 centred on -8, -7.8, ..., 8.
pub const SIGNAL_BINS: usize = 81;
pub const SIGNAL_BIN_WIDTH: f64 = 0.2;
pub const SIGNAL_BIN_FIRST_CENTRE: f64 = -8.0;

/// Bin of a signal, or `None` outside `[-8.1, 8.1)`.
pub fn signal_bin<F: Scalar>(y: F) -> Option<usize> {
    let k = ((y.as_f64() - SIGNAL_BIN_FIRST_CENTRE) / SIGNAL_BIN_WIDTH + 0.5).floor();
    (k >= 0.0 && k < SIGNAL_BINS as f64).then_some(k as usize)
}

pub fn signal_bin_centre(k: usize) -> f64 {
    SIGNAL_BIN_FIRST_CENTRE + SIGNAL_BIN_WIDTH * k as f64
}

pub fn signal_bin_left(k: usize) -> f64 {
    signal_bin_centre(k) - SIGNAL_BIN_WIDTH / 2.0
}

/// Every index of one run's window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowIndices<F> {
    pub window: usize,
    pub highlights: usize,
    pub engagement: Engagement<F>,
    pub mis: F,
    pub pol: F,
    /// Polarization between group means, see [`compute_pol_group_means`].
    pub pol_group: F,
    pub hhi: F,
}

impl<F: Scalar> WindowIndices<F> {
    pub fn compute(window: &[ClickEvent<F>], items: usize, theta: F) -> Self {
        assert!(!window.is_empty(), "empty window");
        WindowIndices {
            window: window.len(),
            highlights: window.iter().filter(|e| e.highlighted).count(),
            engagement: compute_eng(window),
            mis: compute_mis(window, theta),
            pol: compute_pol(window),
            pol_group: compute_pol_group_means(window),
            hhi: compute_hhi(&window_clicks(window, items)),
        }
    }

    pub fn eng_per_capita(&self) -> F {
        self.engagement.eng / F::of_usize(self.window)
    }

    pub fn eng_basis(&self, norm: EngNormalization) -> F {
        match norm {
            EngNormalization::Raw => self.engagement.eng,
            EngNormalization::PerCapita => self.eng_per_capita(),
        }
    }
}

/// Mean and across-run standard deviation of one index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexStats<F> {
    pub mean: F,
    pub sd: F,
    pub runs: usize,
}

impl<F: Scalar> IndexStats<F> {
    /// Sample statistics (`n - 1` denominator; `sd = 0` for a single run),
    /// accumulated in input order.
    pub fn from_samples(xs: &[F]) -> Self {
        let n = xs.len();
        assert!(n > 0, "no samples");
        let mean = xs.iter().fold(F::zero(), |a, &x| a + x) / F::of_usize(n);
        let sd = if n > 1 {
            let ss = xs.iter().fold(F::zero(), |a, &x| a + (x - mean) * (x - mean));
            (ss / F::of_usize(n - 1)).sqrt()
        } else {
            F::zero()
        };
        IndexStats { mean, sd, runs: n }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> F {
        self.sd / F::of_usize(self.runs).sqrt()
    }

    /// Half-width of the normal 95% interval of the mean.
    pub fn ci95(&self) -> F {
        F::of(1.959_963_984_540_054) * self.se()
    }

    /// `mean -/+ 3 se`.
    pub fn band3(&self) -> (F, F) {
        let h = F::of(3.0) * self.se();
        (self.mean - h, self.mean + h)
    }
}

/// Welfare statistics for one `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareStats<F> {
    pub psi: F,
    pub stats: IndexStats<F>,
}

/// Ensemble summary of every index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport<F> {
    pub runs: usize,
    pub window: usize,
    pub eng: IndexStats<F>,
    pub eng_per_capita: IndexStats<F>,
    pub eng_l: IndexStats<F>,
    pub eng_r: IndexStats<F>,
    pub mis: IndexStats<F>,
    pub pol: IndexStats<F>,
    pub pol_group: IndexStats<F>,
    pub hhi: IndexStats<F>,
    pub welfare: Vec<WelfareStats<F>>,
}

impl<F: Scalar> IndexReport<F> {
    /// Welfare is evaluated per run and then averaged.
    pub fn from_runs(runs: &[WindowIndices<F>], norm: EngNormalization, psi: &[F]) -> Self {
        assert!(!runs.is_empty(), "no runs");
        let stats = |f: &dyn Fn(&WindowIndices<F>) -> F| {
            IndexStats::from_samples(&runs.iter().map(f).collect::<Vec<_>>())
        };
        let welfare = psi
            .iter()
            .map(|&p| WelfareStats {
                psi: p,
                stats: stats(&|r| compute_welfare(r.eng_basis(norm), r.mis, r.pol, p)),
            })
            .collect();
        IndexReport {
            runs: runs.len(),
            window: runs[0].window,
            eng: stats(&|r| r.engagement.eng),
            eng_per_capita: stats(&|r| r.eng_per_capita()),
            eng_l: stats(&|r| r.engagement.eng_l),
            eng_r: stats(&|r| r.engagement.eng_r),
            mis: stats(&|r| r.mis),
            pol: stats(&|r| r.pol),
            pol_group: stats(&|r| r.pol_group),
            hhi: stats(&|r| r.hhi),
            welfare,
        }
    }

    /// Named rows in output order.
    pub fn rows(&self) -> Vec<(String, IndexStats<F>)> {
        let mut rows = vec![
            ("ENG".to_string(), self.eng),
            ("ENG_PC".to_string(), self.eng_per_capita),
            ("ENG_L".to_string(), self.eng_l),
            ("ENG_R".to_string(), self.eng_r),
            ("MIS".to_string(), self.mis),
            ("POL".to_string(), self.pol),
            ("POL_G".to_string(), self.pol_group),
            ("HHI".to_string(), self.hhi),
        ];
        rows.extend(self.welfare.iter().map(|w| (format!("W_{}", w.psi), w.stats)));
        rows
    }

    pub fn welfare_at(&self, psi: F) -> Option<IndexStats<F>> {
        self.welfare.iter().find(|w| w.psi == psi).map(|w| w.stats)
    }
}
