//! Limit theory of the clicking and highlighting distributions: expected
//! popularity `pi(y)`, the rank-to-click map `Lambda_beta`, LCD/LHD, the
//! personalized popularity shares, analytic indices and their comparative
//! statics, and the linear rank approximation fitted on simulations.

use serde::{Deserialize, Serialize};

use crate::config::{ModeKind, ModelConfig};
use crate::error::{Error, Result};
use crate::metrics::{signal_bin, signal_bin_centre, SIGNAL_BINS};
use crate::model::active_probability;
use crate::quadrature::{GaussLegendre, DEFAULT_NODES};
use crate::ranking::Group;
use crate::scalar::{normal_pdf, Scalar};
use crate::sim;

/// Quadrature settings. Integrals over a density run over
/// `mean -/+ half_width * sd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub half_width: f64,
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes: DEFAULT_NODES, half_width: 6.0, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OuterNode<F> {
    y: F,
    /// Quadrature weight times `g(y)`.
    wg: F,
    mu: F,
    mu_group: [F; 2],
}

/// The analytic model at one configuration and one pair of rank
/// coefficients `zeta0`, `zeta1`.
#[derive(Debug, Clone)]
pub struct AnalyticModel<F> {
    pub cfg: ModelConfig<F>,
    pub zeta0: F,
    pub zeta1: F,
    pub quadrature: QuadratureSpec,
    /// Population-average same-sign click weight.
    pub gamma_bar: F,
    /// Location (above the centre of the highlighting propensity) where the
    /// highlighting mass `p_A(x) f(x)` peaks.
    pub x_star: F,
    rule: GaussLegendre,
    outer: Vec<OuterNode<F>>,
    mu_bar: F,
    mu_bar_group: [F; 2],
    share: [F; 2],
}

/// Analytic engagement, misinformation and polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticIndices<F> {
    pub eng: F,
    pub mis: F,
    pub pol: F,
}

impl<F: Scalar> AnalyticIndices<F> {
    pub fn as_array(&self) -> [F; 3] {
        [self.eng, self.mis, self.pol]
    }
}

impl<F: Scalar> AnalyticModel<F> {
    pub fn new(cfg: &ModelConfig<F>, zeta0: F, zeta1: F) -> Self {
        Self::with_quadrature(cfg, zeta0, zeta1, QuadratureSpec::default())
    }

    /// Rank coefficients that put an average item (`pi = 1/M`) at the mean
    /// rank `(M + 1)/2`.
    pub fn centred(cfg: &ModelConfig<F>, zeta1: F) -> Self {
        let m = F::of_usize(cfg.items);
        Self::new(cfg, (m + F::one()) / F::of(2.0) + zeta1 / m, zeta1)
    }

    pub fn with_quadrature(cfg: &ModelConfig<F>, zeta0: F, zeta1: F, quadrature: QuadratureSpec) -> Self {
        let mut model = AnalyticModel {
            cfg: cfg.clone(),
            zeta0,
            zeta1,
            quadrature,
            gamma_bar: cfg.gamma_bar(),
            x_star: F::zero(),
            rule: GaussLegendre::new(quadrature.nodes),
            outer: Vec::new(),
            mu_bar: F::zero(),
            mu_bar_group: [F::zero(); 2],
            share: [F::zero(); 2],
        };
        // Panels break at the kinks of |y - theta| and the click weights.
        let (lo, hi) = model.y_range();
        let mut edges = vec![lo, hi];
        for b in [cfg.theta, cfg.theta_hat] {
            if b > lo && b < hi && !edges.contains(&b) {
                edges.push(b);
            }
        }
        edges.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        let rule = &model.rule;
        let outer: Vec<_> = edges
            .windows(2)
            .flat_map(|p| rule.points(p[0], p[1]))
            .map(|(y, w)| OuterNode {
                y,
                wg: w * model.density_y(y),
                mu: model.mu_h(y),
                mu_group: [model.mu_h_group(y, Group::L), model.mu_h_group(y, Group::R)],
            })
            .collect();
        model.mu_bar = outer.iter().fold(F::zero(), |a, n| a + n.wg * n.mu);
        for g in Group::BOTH {
            let i = g.index();
            model.mu_bar_group[i] = outer.iter().fold(F::zero(), |a, n| a + n.wg * n.mu_group[i]);
            model.share[i] = model.group_mass(g);
        }
        model.outer = outer;
        model.x_star = model.locate_x_star();
        model
    }

    /// Same model with other rank coefficients (reuses every cached
    /// integral).
    pub fn with_zeta(&self, zeta0: F, zeta1: F) -> Self {
        AnalyticModel { zeta0, zeta1, ..self.clone() }
    }

    /// Same cached integrals with another `eta` and `lambda` (neither enters
    /// the highlighting mass).
    pub fn with_weights(&self, eta: F, lambda: F) -> Self {
        let mut m = self.clone();
        m.cfg.eta = eta;
        m.cfg.lambda = lambda;
        m
    }

    fn half(&self) -> F {
        F::of(self.quadrature.half_width)
    }

    fn y_range(&self) -> (F, F) {
        let h = self.half() * self.cfg.sigma_y;
        (self.cfg.theta - h, self.cfg.theta + h)
    }

    fn x_range(&self) -> (F, F) {
        let h = self.half() * self.cfg.sigma_x;
        (self.cfg.theta - h, self.cfg.theta + h)
    }

    /// Density of agent signals.
    pub fn density_x(&self, x: F) -> F {
        normal_pdf(x, self.cfg.theta, self.cfg.sigma_x)
    }

    /// Density of item signals.
    pub fn density_y(&self, y: F) -> F {
        normal_pdf(y, self.cfg.theta, self.cfg.sigma_y)
    }

    fn p_active(&self, x: F) -> F {
        let c = &self.cfg;
        active_probability(&c.highlight_mode, x, c.theta_hat, c.theta, c.sigma_x)
    }

    fn highlight_mass(&self, lo: F, hi: F) -> F {
        let (xlo, xhi) = self.x_range();
        let (lo, hi) = (lo.max(xlo), hi.min(xhi));
        if hi <= lo {
            return F::zero();
        }
        self.rule.integrate(lo, hi, |x| self.p_active(x) * self.density_x(x))
    }

    fn group_bounds(&self, g: Group, lo: F, hi: F) -> (F, F) {
        match g {
            Group::L => (lo, hi.min(self.cfg.theta_hat)),
            Group::R => (lo.max(self.cfg.theta_hat), hi),
        }
    }

    /// Mass of agents who would highlight an item with signal `y`:
    /// `int_{y - sigma_x/2}^{y + sigma_x/2} p_A(x) f(x) dx`.
    pub fn mu_h(&self, y: F) -> F {
        let h = self.cfg.sigma_x / F::of(2.0);
        self.highlight_mass(y - h, y + h)
    }

    /// [`mu_h`](Self::mu_h) and an error estimate.
    pub fn mu_h_checked(&self, y: F) -> (F, F) {
        let h = self.cfg.sigma_x / F::of(2.0);
        self.rule.integrate_checked(y - h, y + h, |x| self.p_active(x) * self.density_x(x))
    }

    /// Part of [`mu_h`](Self::mu_h) contributed by agents of group `g`.
    pub fn mu_h_group(&self, y: F, g: Group) -> F {
        let h = self.cfg.sigma_x / F::of(2.0);
        let (lo, hi) = self.group_bounds(g, y - h, y + h);
        self.highlight_mass(lo, hi)
    }

    /// `int mu_H(y) g(y) dy`.
    pub fn mu_bar(&self) -> F {
        self.mu_bar
    }

    pub fn mu_bar_group(&self, g: Group) -> F {
        self.mu_bar_group[g.index()]
    }

    fn group_mass(&self, g: Group) -> F {
        let (lo, hi) = self.x_range();
        let (lo, hi) = self.group_bounds(g, lo, hi);
        if hi <= lo {
            return F::zero();
        }
        self.rule.integrate(lo, hi, |x| self.density_x(x))
    }

    /// Population share of group `g`.
    pub fn group_share(&self, g: Group) -> F {
        self.share[g.index()]
    }

    /// `int h(y) g(y) dy` over the cached nodes, where `h` also receives
    /// `mu_H(y)` and the group parts.
    fn integrate_y(&self, mut h: impl FnMut(&OuterNode<F>) -> F) -> F {
        self.outer.iter().fold(F::zero(), |a, n| a + n.wg * h(n))
    }

    fn pi_from(&self, mu: F) -> F {
        let eta = self.cfg.eta;
        let m = F::of_usize(self.cfg.items);
        (F::one() + eta * mu) / (m * (F::one() + eta * self.mu_bar) + eta * (mu - self.mu_bar))
    }

    /// Expected popularity of an item with signal `y`.
    pub fn pi(&self, y: F) -> F {
        self.pi_from(self.mu_h(y))
    }

    /// `M int pi(y) g(y) dy`, which is 1 when the popularity shares add up.
    pub fn pi_normalization(&self) -> F {
        F::of_usize(self.cfg.items) * self.integrate_y(|n| self.pi_from(n.mu))
    }

    /// Linear approximation of the expected rank.
    pub fn expected_rank(&self, y: F) -> F {
        self.zeta0 - self.zeta1 * self.pi(y)
    }

    fn lambda_denominator(&self) -> F {
        let m = F::of_usize(self.cfg.items);
        m + self.cfg.beta.ln() * m * (m - F::one()) / F::of(2.0)
    }

    /// Per-capita click rate of an item with expected popularity `z`.
    pub fn lambda_beta(&self, z: F) -> F {
        let m = F::of_usize(self.cfg.items);
        (m + self.cfg.beta.ln() * (m - self.zeta0 + self.zeta1 * z)) / self.lambda_denominator()
    }

    /// Constant slope of [`lambda_beta`](Self::lambda_beta).
    pub fn lambda_slope(&self) -> F {
        self.zeta1 * self.cfg.beta.ln() / self.lambda_denominator()
    }

    /// Limit clicking distribution.
    pub fn lcd(&self, y: F) -> F {
        self.lambda_beta(self.pi(y)) * self.density_y(y)
    }

    /// Limit highlighting distribution.
    pub fn lhd(&self, y: F) -> F {
        self.mu_h(y) * self.lcd(y)
    }

    fn personalized_from(&self, g: Group, mu_own: F, mu_other: F) -> (F, F) {
        let eta = self.cfg.eta;
        let lambda = self.cfg.lambda;
        let m = F::of_usize(self.cfg.items);
        let (o, t) = (g.index(), g.other().index());
        let term = |q: F, mu: F, bar: F| m * (q + eta * bar) + eta * (mu - bar);
        let d = term(self.share[o], mu_own, self.mu_bar_group[o])
            + lambda * term(self.share[t], mu_other, self.mu_bar_group[t]);
        let own = (self.share[o] + eta * mu_own) / d;
        let other = lambda * (self.share[t] + eta * mu_other) / d;
        (own, other)
    }

    /// Popularity of an item in group `g`'s ranking, split into the part
    /// from `g`'s own members and the part from the other group.
    pub fn personalized_popularity(&self, y: F, g: Group) -> (F, F) {
        self.personalized_from(g, self.mu_h_group(y, g), self.mu_h_group(y, g.other()))
    }

    /// Total popularity of an item in group `g`'s ranking.
    pub fn personalized_share(&self, y: F, g: Group) -> F {
        let (own, other) = self.personalized_popularity(y, g);
        own + other
    }

    pub fn expected_rank_personalized(&self, y: F, g: Group) -> F {
        self.zeta0 - self.zeta1 * self.personalized_share(y, g)
    }

    /// Relative click weight of group `g` on an item with signal `y`:
    /// `2 gamma_bar` on the group's own side of the benchmark, `2 (1 -
    /// gamma_bar)` on the other.
    pub fn click_weight(&self, y: F, g: Group) -> F {
        let two = F::of(2.0);
        let own_side = match g {
            Group::R => y >= self.cfg.theta_hat,
            Group::L => y < self.cfg.theta_hat,
        };
        if own_side {
            two * self.gamma_bar
        } else {
            two * (F::one() - self.gamma_bar)
        }
    }

    /// Click rate per member of group `g` and highlight rate per capita.
    fn group_click_rate(&self, n: &OuterNode<F>, g: Group) -> (F, F) {
        let (own, other) = self.personalized_from(g, n.mu_group[g.index()], n.mu_group[g.other().index()]);
        let lam = self.lambda_beta(own + other);
        (self.click_weight(n.y, g) * lam, n.mu_group[g.index()] * lam)
    }

    /// Clicking distribution per member of group `g`.
    pub fn group_lcd(&self, y: F, g: Group) -> F {
        let n = OuterNode {
            y,
            wg: F::zero(),
            mu: F::zero(),
            mu_group: [self.mu_h_group(y, Group::L), self.mu_h_group(y, Group::R)],
        };
        self.group_click_rate(&n, g).0 * self.density_y(y)
    }

    /// Engagement, misinformation and polarization of the limit
    /// distributions. Polarization compares the mean clicked signal per
    /// member of each group.
    pub fn analytic_indices(&self) -> AnalyticIndices<F> {
        let theta = self.cfg.theta;
        let mut eng = F::zero();
        let mut mis = F::zero();
        let mut pol = F::zero();
        for n in &self.outer {
            let (click_l, hl_l) = self.group_click_rate(n, Group::L);
            let (click_r, hl_r) = self.group_click_rate(n, Group::R);
            let clicks = self.share[0] * click_l + self.share[1] * click_r;
            eng = eng + n.wg * (clicks + hl_l + hl_r);
            mis = mis + n.wg * (n.y - theta).abs() * clicks;
            pol = pol + n.wg * n.y * (click_r - click_l);
        }
        AnalyticIndices { eng, mis, pol: pol.abs() }
    }

    /// Expected popularity of each item of one concrete item set, averaging
    /// over agents and types and normalizing within the set.
    pub fn world_popularity(&self, y: &[F]) -> Vec<F> {
        let th = self.cfg.theta_hat;
        let plus = y.iter().filter(|&&v| v >= th).count();
        let minus = y.len() - plus;
        let gb = self.gamma_bar;
        let eta = self.cfg.eta;
        let raw: Vec<F> = y
            .iter()
            .map(|&v| {
                let (same, other, count) =
                    if v >= th { (Group::R, Group::L, plus) } else { (Group::L, Group::R, minus) };
                let (s, o) = (same.index(), other.index());
                let mass = gb * (self.share[s] + eta * self.mu_h_group(v, same))
                    + (F::one() - gb) * (self.share[o] + eta * self.mu_h_group(v, other));
                mass / F::of_usize(count)
            })
            .collect();
        let total = raw.iter().fold(F::zero(), |a, &b| a + b);
        raw.into_iter().map(|v| v / total).collect()
    }

    fn locate_x_star(&self) -> F {
        let c = &self.cfg;
        let centre = match c.highlight_mode {
            crate::config::HighlightMode::NonFlat { center: crate::config::HighlightCenter::Truth, .. } => c.theta,
            _ => c.theta_hat,
        };
        let h = |x: F| self.p_active(x) * self.density_x(x);
        let steps = 600;
        let span = self.half() * c.sigma_x;
        let at = |i: usize| centre + span * F::of_usize(i) / F::of_usize(steps);
        let best = (0..=steps).max_by(|&a, &b| h(at(a)).partial_cmp(&h(at(b))).unwrap()).unwrap();
        let mut lo = at(best.saturating_sub(1));
        let mut hi = at((best + 1).min(steps));
        let inv_phi = F::of(0.618_033_988_749_894_8);
        for _ in 0..200 {
            if hi - lo <= F::epsilon() * (F::one() + hi.abs()) {
                break;
            }
            let a = hi - inv_phi * (hi - lo);
            let b = lo + inv_phi * (hi - lo);
            if h(a) < h(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        (lo + hi) / F::of(2.0)
    }
}

/// Parameter of a comparative-statics scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parameter {
    Eta,
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Up,
    Down,
    Flat,
}

impl Trend {
    pub fn symbol(self) -> char {
        match self {
            Trend::Up => '+',
            Trend::Down => '-',
            Trend::Flat => '0',
        }
    }
}

/// Finite-difference trends of the analytic indices along a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTable<F> {
    pub parameter: Parameter,
    pub grid: Vec<F>,
    pub indices: Vec<AnalyticIndices<F>>,
    /// Trends of (ENG, MIS, POL) at each grid point.
    pub trends: Vec<[Trend; 3]>,
}

pub const INDEX_NAMES: [&str; 3] = ["ENG", "MIS", "POL"];

impl<F: Scalar> SignTable<F> {
    /// Grid cells and index names where the trend differs from `expected`
    /// (`None` entries are not checked).
    pub fn violations(&self, expected: [Option<Trend>; 3]) -> Vec<(usize, &'static str, Trend)> {
        let mut out = Vec::new();
        for (i, t) in self.trends.iter().enumerate() {
            for k in 0..3 {
                if let Some(e) = expected[k] {
                    if t[k] != e {
                        out.push((i, INDEX_NAMES[k], t[k]));
                    }
                }
            }
        }
        out
    }

    /// One line per index, e.g. `ENG ++++-`.
    pub fn pattern(&self) -> String {
        (0..3)
            .map(|k| {
                let s: String = self.trends.iter().map(|t| t[k].symbol()).collect();
                format!("{} {s}", INDEX_NAMES[k])
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Expected trends of (ENG, MIS, POL) along `parameter`.
pub fn expected_trends(mode: ModeKind, parameter: Parameter) -> [Option<Trend>; 3] {
    use Trend::*;
    match (parameter, mode) {
        (Parameter::Eta, ModeKind::NonFlat) => [Some(Up), Some(Up), Some(Up)],
        (Parameter::Eta, ModeKind::Flat) => [Some(Up), Some(Down), Some(Down)],
        (Parameter::Lambda, _) => [Some(Down), None, Some(Down)],
    }
}

/// Finite-difference trends of a sequence: central differences inside,
/// one-sided at the ends. Changes within rounding of the values count as
/// flat.
pub fn trends<F: Scalar>(grid: &[F], values: &[F]) -> Vec<Trend> {
    let n = grid.len();
    let scale = values.iter().fold(F::zero(), |a, v| a.max(v.abs()));
    let tol = F::of(1e-12) * scale;
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let dv = values[b] - values[a];
            if dv.abs() <= tol {
                Trend::Flat
            } else if dv > F::zero() {
                Trend::Up
            } else {
                Trend::Down
            }
        })
        .collect()
}

/// Analytic indices along `grid` for `parameter`, all else (including the
/// rank coefficients) held at `model`'s values.
pub fn comparative_statics_signs<F: Scalar>(
    model: &AnalyticModel<F>,
    parameter: Parameter,
    grid: &[F],
) -> Result<SignTable<F>> {
    if grid.len() < 5 {
        return Err(Error::Argument(format!("grid needs at least 5 values (got {})", grid.len())));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Argument("grid must be strictly increasing".into()));
    }
    let indices: Vec<_> = grid
        .iter()
        .map(|&v| {
            let (eta, lambda) = match parameter {
                Parameter::Eta => (v, model.cfg.lambda),
                Parameter::Lambda => (model.cfg.eta, v),
            };
            model.with_weights(eta, lambda).analytic_indices()
        })
        .collect();
    let per_index: Vec<Vec<Trend>> =
        (0..3).map(|k| trends(grid, &indices.iter().map(|ix| ix.as_array()[k]).collect::<Vec<_>>())).collect();
    let trends = (0..grid.len()).map(|i| [per_index[0][i], per_index[1][i], per_index[2][i]]).collect();
    Ok(SignTable { parameter, grid: grid.to_vec(), indices, trends })
}

/// Ordinary least squares of `y` on `x`: `(intercept, slope, r_squared)`.
pub fn ols<F: Scalar>(x: &[F], y: &[F]) -> Result<(F, F, F)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit(format!("need matching samples of length >= 2 (got {} and {})", x.len(), y.len())));
    }
    let n = F::of_usize(x.len());
    let mx = x.iter().fold(F::zero(), |a, &v| a + v) / n;
    let my = y.iter().fold(F::zero(), |a, &v| a + v) / n;
    let sxx = x.iter().fold(F::zero(), |a, &v| a + (v - mx) * (v - mx));
    let sxy = x.iter().zip(y).fold(F::zero(), |a, (&u, &v)| a + (u - mx) * (v - my));
    let syy = y.iter().fold(F::zero(), |a, &v| a + (v - my) * (v - my));
    if sxx <= F::of(1e-12) * (mx * mx).max(F::min_positive_value()) * n {
        return Err(Error::Fit("predictor is constant across bins".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > F::zero() { sxy * sxy / (sxx * syy) } else { F::one() };
    Ok((intercept, slope, r2))
}

/// Which expected popularity the rank fit regresses on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PopularityMeasure {
    /// `pi(y)`, a function of the signal alone.
    Limit,
    /// Expected popularity within each simulated item set.
    PerWorld,
    /// Final popularity share in the simulated ranking, averaged over the
    /// two group rankings.
    Observed,
}

/// Simulation protocol of the rank fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitProtocol {
    pub runs: usize,
    pub agents: usize,
    pub items: usize,
    pub popularity: PopularityMeasure,
}

impl Default for FitProtocol {
    fn default() -> Self {
        FitProtocol { runs: 1000, agents: 5000, items: 20, popularity: PopularityMeasure::Limit }
    }
}

/// Fewest populated bins a fit accepts.
pub const MIN_FIT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankBin<F> {
    pub centre: f64,
    pub count: usize,
    pub mean_popularity: F,
    pub mean_rank: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFit<F> {
    pub zeta0: F,
    pub zeta1: F,
    pub r_squared: F,
    pub bins: Vec<RankBin<F>>,
}

/// Simulates the protocol, bins item signals, and regresses the mean final
/// rank of each bin on its mean expected popularity. The final rank is the
/// average over the two group rankings (identical when `lambda = 1`).
pub fn fit_linear_rank<F: Scalar>(
    cfg: &ModelConfig<F>,
    protocol: &FitProtocol,
    threads: Option<usize>,
) -> Result<RankFit<F>> {
    let cfg = ModelConfig {
        runs: protocol.runs,
        agents: protocol.agents,
        items: protocol.items,
        window: cfg.window.min(protocol.agents),
        ..cfg.clone()
    };
    cfg.validate()?;
    let model = AnalyticModel::new(&cfg, F::zero(), F::zero());
    let per_run = sim::map_runs(&cfg, threads, |_, seed| {
        let (items, state) = sim::run_with(&cfg, seed, |_| {})?;
        let pop = match protocol.popularity {
            PopularityMeasure::Limit => items.y.iter().map(|&y| model.pi(y)).collect(),
            PopularityMeasure::PerWorld => model.world_popularity(&items.y),
            PopularityMeasure::Observed => {
                let share = |g: Group| {
                    let k = state.kappa(g);
                    let total = k.iter().fold(F::zero(), |a, &v| a + v);
                    k.iter().map(move |&v| v / total)
                };
                share(Group::L).zip(share(Group::R)).map(|(l, r)| (l + r) / F::of(2.0)).collect()
            }
        };
        let rows: Vec<(F, F, F)> = (0..items.len())
            .map(|m| {
                let r = F::of_usize(state.ranks(Group::L)[m] + state.ranks(Group::R)[m]) / F::of(2.0);
                (items.y[m], pop[m], r)
            })
            .collect();
        Ok(rows)
    })?;

    let mut count = vec![0usize; SIGNAL_BINS];
    let mut pop_sum = vec![F::zero(); SIGNAL_BINS];
    let mut rank_sum = vec![F::zero(); SIGNAL_BINS];
    for rows in &per_run {
        for &(y, p, r) in rows {
            if let Some(k) = signal_bin(y) {
                count[k] += 1;
                pop_sum[k] = pop_sum[k] + p;
                rank_sum[k] = rank_sum[k] + r;
            }
        }
    }
    let bins: Vec<RankBin<F>> = (0..SIGNAL_BINS)
        .filter(|&k| count[k] > 0)
        .map(|k| RankBin {
            centre: signal_bin_centre(k),
            count: count[k],
            mean_popularity: pop_sum[k] / F::of_usize(count[k]),
            mean_rank: rank_sum[k] / F::of_usize(count[k]),
        })
        .collect();
    if bins.len() < MIN_FIT_BINS {
        return Err(Error::Fit(format!("only {} populated bins (need {MIN_FIT_BINS})", bins.len())));
    }
    let x: Vec<F> = bins.iter().map(|b| b.mean_popularity).collect();
    let y: Vec<F> = bins.iter().map(|b| b.mean_rank).collect();
    let (intercept, slope, r_squared) = ols(&x, &y)?;
    Ok(RankFit { zeta0: intercept, zeta1: -slope, r_squared, bins })
}
