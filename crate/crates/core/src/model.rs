//! Information structure, agent types and the per-agent behavioural
//! primitives: clicking propensity absent ranking, click probabilities under
//! attention bias, and highlighting.

use crate::config::{BenchmarkMode, HighlightCenter, HighlightMode, ModelConfig};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::scalar::Scalar;

/// Redraws of a one-signed item set before giving up.
pub const MAX_ITEM_REDRAWS: usize = 100;

/// Binary signal relative to a benchmark; values at the benchmark are `Plus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    #[inline]
    pub fn of<F: Scalar>(value: F, benchmark: F) -> Sign {
        if value >= benchmark {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClickType {
    Confirmatory,
    Exploratory,
    Indifferent,
}

impl ClickType {
    /// Propensity weight on items of the agent's own sign.
    pub fn match_weight<F: Scalar>(self, cfg: &ModelConfig<F>) -> F {
        match self {
            ClickType::Confirmatory => cfg.gamma_confirmatory,
            ClickType::Exploratory => cfg.gamma_exploratory,
            ClickType::Indifferent => cfg.gamma_indifferent,
        }
    }
}

/// One individual's draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agent<F> {
    /// Private signal.
    pub x: F,
    /// Sign of `x` relative to `theta_hat`.
    pub sign: Sign,
    pub click_type: ClickType,
    /// Propensity weight on same-sign items (`gamma_k` of the click type).
    pub match_weight: F,
    /// Active types highlight items close to their own signal.
    pub active: bool,
    /// The agent's benchmark.
    pub theta_hat: F,
}

/// Item signals of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSet<F> {
    pub y: Vec<F>,
    pub sign: Vec<Sign>,
    pub m_minus: usize,
    pub m_plus: usize,
    /// Benchmark the signs refer to.
    pub theta_hat: F,
}

impl<F: Scalar> ItemSet<F> {
    pub fn new(y: Vec<F>, theta_hat: F) -> Self {
        let sign: Vec<Sign> = y.iter().map(|&v| Sign::of(v, theta_hat)).collect();
        let m_plus = sign.iter().filter(|s| **s == Sign::Plus).count();
        ItemSet { m_minus: y.len() - m_plus, m_plus, y, sign, theta_hat }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn count(&self, s: Sign) -> usize {
        match s {
            Sign::Minus => self.m_minus,
            Sign::Plus => self.m_plus,
        }
    }
}

/// Draws `M` item signals from `N(theta, sigma_y^2)`, redrawing the whole set
/// while one sign is empty.
pub fn sample_items<F: Scalar>(cfg: &ModelConfig<F>, stream: &mut Stream) -> Result<ItemSet<F>> {
    for _ in 0..=MAX_ITEM_REDRAWS {
        let y = (0..cfg.items)
            .map(|_| cfg.theta + cfg.sigma_y * F::standard_normal(stream))
            .collect();
        let set = ItemSet::new(y, cfg.theta_hat);
        if set.m_minus > 0 && set.m_plus > 0 {
            return Ok(set);
        }
    }
    Err(Error::ResampleExhausted { attempts: MAX_ITEM_REDRAWS + 1 })
}

/// Lazily generates the agents of one run from per-agent counter streams.
#[derive(Debug, Clone)]
pub struct AgentSampler<F> {
    key: u64,
    theta: F,
    theta_hat: F,
    sigma_x: F,
    sigma_theta_hat: F,
    p_confirmatory: F,
    p_exploratory: F,
    weights: [F; 3],
    mode: HighlightMode<F>,
}

impl<F: Scalar> AgentSampler<F> {
    pub fn new(cfg: &ModelConfig<F>, run_seed: u64) -> Self {
        let sigma_theta_hat = match cfg.benchmark_mode {
            BenchmarkMode::Common => F::zero(),
            BenchmarkMode::Heterogeneous { sigma_theta_hat } => sigma_theta_hat,
        };
        AgentSampler {
            key: rng::agents_key(run_seed),
            theta: cfg.theta,
            theta_hat: cfg.theta_hat,
            sigma_x: cfg.sigma_x,
            sigma_theta_hat,
            p_confirmatory: cfg.p_confirmatory,
            p_exploratory: cfg.p_exploratory,
            weights: [cfg.gamma_confirmatory, cfg.gamma_exploratory, cfg.gamma_indifferent],
            mode: cfg.highlight_mode,
        }
    }

    /// Agent `n` and its stream, positioned after the draws that define the
    /// agent. The draw order is fixed (signal, type, benchmark, activity)
    /// regardless of mode, so flat/non-flat and common/heterogeneous runs
    /// share every other random number.
    pub fn agent(&self, n: usize) -> (Agent<F>, Stream) {
        let mut s = rng::agent_stream(self.key, n);
        let x = self.theta + self.sigma_x * F::standard_normal(&mut s);
        let u_type = F::unit_uniform(&mut s);
        let z_hat = F::standard_normal(&mut s);
        let u_active = F::unit_uniform(&mut s);

        let (click_type, match_weight) = if u_type < self.p_confirmatory {
            (ClickType::Confirmatory, self.weights[0])
        } else if u_type < self.p_confirmatory + self.p_exploratory {
            (ClickType::Exploratory, self.weights[1])
        } else {
            (ClickType::Indifferent, self.weights[2])
        };
        let theta_hat = if self.sigma_theta_hat > F::zero() {
            self.theta_hat + self.sigma_theta_hat * z_hat
        } else {
            self.theta_hat
        };
        let p_active = active_probability(&self.mode, x, theta_hat, self.theta, self.sigma_x);
        let agent = Agent {
            x,
            sign: Sign::of(x, theta_hat),
            click_type,
            match_weight,
            active: u_active < p_active,
            theta_hat,
        };
        (agent, s)
    }

    pub fn iter(&self, count: usize) -> impl Iterator<Item = Agent<F>> + '_ {
        (0..count).map(move |n| self.agent(n).0)
    }
}

/// Items and the agent generator for one run.
pub fn sample_world<F: Scalar>(
    cfg: &ModelConfig<F>,
    run_seed: u64,
) -> Result<(ItemSet<F>, AgentSampler<F>)> {
    let items = sample_items(cfg, &mut rng::items_stream(run_seed))?;
    Ok((items, AgentSampler::new(cfg, run_seed)))
}

/// Clicking propensities absent ranking, written into `out`.
///
/// Items are sorted into like-minded or not with the agent's own benchmark,
/// and each sign class shares its propensity mass equally.
pub fn propensities_into<F: Scalar>(agent: &Agent<F>, items: &ItemSet<F>, out: &mut [F]) {
    debug_assert_eq!(out.len(), items.len());
    let same = agent.match_weight;
    let other = F::one() - same;
    if agent.theta_hat == items.theta_hat {
        let plus = F::of_usize(items.count(Sign::Plus));
        let minus = F::of_usize(items.count(Sign::Minus));
        let (phi_plus, phi_minus) = match agent.sign {
            Sign::Plus => (same / plus, other / minus),
            Sign::Minus => (other / plus, same / minus),
        };
        for (o, &s) in out.iter_mut().zip(&items.sign) {
            *o = if s == Sign::Plus { phi_plus } else { phi_minus };
        }
    } else {
        let plus = items.y.iter().filter(|&&v| v >= agent.theta_hat).count();
        let minus = F::of_usize(items.len() - plus);
        let plus = F::of_usize(plus);
        for (o, &v) in out.iter_mut().zip(&items.y) {
            let s = Sign::of(v, agent.theta_hat);
            let w = if s == agent.sign { same } else { other };
            *o = w / if s == Sign::Plus { plus } else { minus };
        }
    }
}

pub fn propensity_absent_ranking<F: Scalar>(agent: &Agent<F>, items: &ItemSet<F>) -> Vec<F> {
    let mut out = vec![F::zero(); items.len()];
    propensities_into(agent, items, &mut out);
    out
}

/// Attention weights indexed by rank.
///
/// Stores `beta^(1 - r)`, which differs from `beta^(M - r)` by the common
/// factor `beta^(M - 1)` and cannot overflow for large `M`.
#[derive(Debug, Clone)]
pub struct AttentionWeights<F> {
    by_rank: Vec<F>,
}

impl<F: Scalar> AttentionWeights<F> {
    pub fn new(beta: F, items: usize) -> Self {
        let inv = beta.recip();
        let mut by_rank = Vec::with_capacity(items);
        let mut w = F::one();
        for _ in 0..items {
            by_rank.push(w);
            w = w * inv;
        }
        AttentionWeights { by_rank }
    }

    /// Weight of 1-based rank `r`.
    #[inline]
    pub fn at(&self, rank: usize) -> F {
        self.by_rank[rank - 1]
    }
}

/// Click probabilities under attention bias:
/// `rho_m = beta^(M - r_m) phi_m / sum_m' beta^(M - r_m') phi_m'`.
pub fn click_probabilities<F: Scalar>(phi: &[F], ranks: &[usize], beta: F) -> Vec<F> {
    assert_eq!(phi.len(), ranks.len(), "phi and ranks differ in length");
    let att = AttentionWeights::new(beta, phi.len());
    let w: Vec<F> = phi.iter().zip(ranks).map(|(&p, &r)| att.at(r) * p).collect();
    // Summed in rank order, so relabelling items never changes the rounding.
    let mut by_rank = vec![F::zero(); w.len()];
    for (&v, &r) in w.iter().zip(ranks) {
        by_rank[r - 1] = v;
    }
    let total = by_rank.iter().fold(F::zero(), |a, &b| a + b);
    w.into_iter().map(|v| v / total).collect()
}

/// Inverse-CDF draw of the clicked item given a uniform `u` in `[0, 1)`.
#[inline]
pub fn sample_click<F: Scalar>(phi: &[F], ranks: &[usize], att: &AttentionWeights<F>, u: F) -> usize {
    let total = phi.iter().zip(ranks).fold(F::zero(), |a, (&p, &r)| a + att.at(r) * p);
    let target = u * total;
    let mut acc = F::zero();
    let mut last = 0;
    for (m, (&p, &r)) in phi.iter().zip(ranks).enumerate() {
        let w = att.at(r) * p;
        if w > F::zero() {
            acc = acc + w;
            last = m;
            if target < acc {
                return m;
            }
        }
    }
    // Rounding can leave `target` just above the accumulated total.
    last
}

/// Probability of being an active type for an agent with signal `x`.
pub fn highlight_probability<F: Scalar>(x: F, cfg: &ModelConfig<F>) -> F {
    active_probability(&cfg.highlight_mode, x, cfg.theta_hat, cfg.theta, cfg.sigma_x)
}

/// As [`highlight_probability`] with an explicit benchmark (heterogeneous
/// agents centre the non-flat propensity on their own benchmark).
pub fn active_probability<F: Scalar>(
    mode: &HighlightMode<F>,
    x: F,
    theta_hat: F,
    theta: F,
    sigma_x: F,
) -> F {
    match *mode {
        HighlightMode::Flat { p_a_const } => p_a_const,
        HighlightMode::NonFlat { alpha, center } => {
            let c = match center {
                HighlightCenter::Benchmark => theta_hat,
                HighlightCenter::Truth => theta,
            };
            let z = ((x - c) / sigma_x).abs();
            let k = F::of(2.0) * alpha;
            let zk = match k.to_i32() {
                Some(i) if F::of(i as f64) == k => z.powi(i),
                _ => z.powf(k),
            };
            -(-zk / k).exp_m1()
        }
    }
}

/// Whether the agent highlights an item with signal `y` after clicking it:
/// only active agents do, and only for items within `sigma_x / 2` of their
/// own signal (closed interval).
#[inline]
pub fn wants_highlight<F: Scalar>(agent: &Agent<F>, y: F, sigma_x: F) -> bool {
    agent.active && (y - agent.x).abs() <= sigma_x / F::of(2.0)
}
