//! Popularity, click and highlight tallies per group, and the rankings
//! derived from them.
//!
//! Each group `g` ranks items by its own popularity `kappa[g]`: a click by a
//! member of `g` adds `1` (or `1 + eta` when highlighted), a click by the
//! other group adds `lambda` times as much. With `lambda = 1` both groups see
//! the same ranking.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::model::Sign;
use crate::rng::Stream;
use crate::scalar::Scalar;

/// Personalization group, assigned by the sign of the agent's signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    L,
    R,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::L, Group::R];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Group::L => 0,
            Group::R => 1,
        }
    }

    #[inline]
    pub fn of_sign(sign: Sign) -> Group {
        match sign {
            Sign::Minus => Group::L,
            Sign::Plus => Group::R,
        }
    }

    #[inline]
    pub fn other(self) -> Group {
        match self {
            Group::L => Group::R,
            Group::R => Group::L,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::L => "L",
            Group::R => "R",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingState<F> {
    kappa: [Vec<F>; 2],
    clicks: [Vec<u64>; 2],
    highlights: [Vec<u64>; 2],
    /// `ranks[g][m]` is the 1-based rank of item `m` in group `g`'s ranking.
    ranks: [Vec<usize>; 2],
    /// `order[g][k]` is the item at position `k` (rank `k + 1`).
    order: [Vec<usize>; 2],
    /// `sorted[g][k] = kappa[g][order[g][k]]`.
    sorted: [Vec<F>; 2],
    eta: F,
    lambda: F,
    shared: bool,
    outcomes: u64,
}

impl<F: Scalar> RankingState<F> {
    /// Zero tallies and a uniformly random initial ranking per group (one
    /// shared ranking when `lambda = 1`).
    pub fn new(cfg: &ModelConfig<F>, stream: &mut Stream) -> Self {
        let m = cfg.items;
        let shared = cfg.lambda == F::one();
        let mut order_l: Vec<usize> = (0..m).collect();
        order_l.shuffle(stream);
        let order_r = if shared {
            order_l.clone()
        } else {
            let mut o: Vec<usize> = (0..m).collect();
            o.shuffle(stream);
            o
        };
        let mut state = RankingState {
            kappa: [vec![F::zero(); m], vec![F::zero(); m]],
            clicks: [vec![0; m], vec![0; m]],
            highlights: [vec![0; m], vec![0; m]],
            ranks: [vec![0; m], vec![0; m]],
            order: [order_l, order_r],
            sorted: [vec![F::zero(); m], vec![F::zero(); m]],
            eta: cfg.eta,
            lambda: cfg.lambda,
            shared,
            outcomes: 0,
        };
        state.sync_ranks(Group::L);
        state.sync_ranks(Group::R);
        state
    }

    pub fn items(&self) -> usize {
        self.kappa[0].len()
    }

    pub fn kappa(&self, g: Group) -> &[F] {
        &self.kappa[g.index()]
    }

    pub fn clicks(&self, g: Group) -> &[u64] {
        &self.clicks[g.index()]
    }

    pub fn highlights(&self, g: Group) -> &[u64] {
        &self.highlights[g.index()]
    }

    pub fn ranks(&self, g: Group) -> &[usize] {
        &self.ranks[g.index()]
    }

    /// Items ordered from rank 1 downwards.
    pub fn order(&self, g: Group) -> &[usize] {
        &self.order[g.index()]
    }

    pub fn eta(&self) -> F {
        self.eta
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    /// Number of outcomes recorded so far.
    pub fn outcomes(&self) -> u64 {
        self.outcomes
    }

    /// Records a click on `item` by a member of `group`, then recomputes both
    /// rankings.
    pub fn record_outcome(&mut self, group: Group, item: usize, highlighted: bool, stream: &mut Stream) {
        let own = group.index();
        let other = group.other().index();
        let weight = if highlighted { F::one() + self.eta } else { F::one() };
        self.kappa[own][item] = self.kappa[own][item] + weight;
        self.kappa[other][item] = self.kappa[other][item] + self.lambda * weight;
        self.clicks[own][item] += 1;
        if highlighted {
            self.highlights[own][item] += 1;
        }
        self.outcomes += 1;

        if self.shared {
            self.promote(Group::L, item, stream);
            let [order_l, order_r] = &mut self.order;
            order_r.copy_from_slice(order_l);
            let [ranks_l, ranks_r] = &mut self.ranks;
            ranks_r.copy_from_slice(ranks_l);
            let [sorted_l, sorted_r] = &mut self.sorted;
            sorted_r.copy_from_slice(sorted_l);
        } else {
            self.promote(Group::L, item, stream);
            self.promote(Group::R, item, stream);
        }
    }

    /// Sorts items by the group's popularity, most popular first. Items with
    /// equal popularity are put in a fresh uniformly random order on every
    /// call.
    pub fn rerank(&mut self, group: Group, stream: &mut Stream) -> &[usize] {
        let g = group.index();
        let kappa = &self.kappa[g];
        let order = &mut self.order[g];
        for i in 1..order.len() {
            let item = order[i];
            let k = kappa[item];
            let mut j = i;
            while j > 0 && kappa[order[j - 1]] < k {
                order[j] = order[j - 1];
                j -= 1;
            }
            order[j] = item;
        }
        for (s, &item) in self.sorted[g].iter_mut().zip(order.iter()) {
            *s = kappa[item];
        }
        self.sync_ranks(group);
        self.shuffle_ties(group, stream);
        &self.ranks[g]
    }

    /// Same result as [`rerank`](Self::rerank) when only `item`'s popularity
    /// has grown since the last ranking: the item moves up past every item
    /// that is now strictly less popular.
    fn promote(&mut self, group: Group, item: usize, stream: &mut Stream) {
        let g = group.index();
        let k = self.kappa[g][item];
        let order = &mut self.order[g];
        let sorted = &mut self.sorted[g];
        let ranks = &mut self.ranks[g];
        let mut pos = ranks[item] - 1;
        while pos > 0 && sorted[pos - 1] < k {
            let prev = order[pos - 1];
            order[pos] = prev;
            sorted[pos] = sorted[pos - 1];
            ranks[prev] = pos + 1;
            pos -= 1;
        }
        order[pos] = item;
        sorted[pos] = k;
        ranks[item] = pos + 1;
        self.shuffle_ties(group, stream);
    }

    /// Reorders every run of equally popular items uniformly at random,
    /// starting from index order so the draw depends only on the tied set.
    fn shuffle_ties(&mut self, group: Group, stream: &mut Stream) {
        let g = group.index();
        let sorted = &self.sorted[g];
        if !sorted.windows(2).any(|w| w[0] == w[1]) {
            return;
        }
        let order = &mut self.order[g];
        let ranks = &mut self.ranks[g];
        let mut start = 0;
        while start < sorted.len() {
            let mut end = start + 1;
            while end < sorted.len() && sorted[end] == sorted[start] {
                end += 1;
            }
            if end - start > 1 {
                let run = &mut order[start..end];
                run.sort_unstable();
                run.shuffle(stream);
                for (pos, &m) in run.iter().enumerate() {
                    ranks[m] = start + pos + 1;
                }
            }
            start = end;
        }
    }

    fn sync_ranks(&mut self, group: Group) {
        let g = group.index();
        for (pos, &item) in self.order[g].iter().enumerate() {
            self.ranks[g][item] = pos + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    type Cfg = ModelConfig<f64>;

    fn cfg(eta: f64, lambda: f64, items: usize) -> Cfg {
        Cfg { eta, lambda, items, ..Cfg::default() }
    }

    fn is_permutation(r: &[usize]) -> bool {
        let mut s = r.to_vec();
        s.sort_unstable();
        s.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    #[test]
    fn init_examples() {
        let s = RankingState::new(&cfg(0.0, 1.0, 20), &mut rng::stream(3));
        assert_eq!(s.ranks(Group::L), s.ranks(Group::R));
        assert!(is_permutation(s.ranks(Group::L)));
        assert!(s.kappa(Group::L).iter().all(|&k| k == 0.0));

        let a = RankingState::new(&cfg(0.0, 0.5, 20), &mut rng::stream(9));
        let b = RankingState::new(&cfg(0.0, 0.5, 20), &mut rng::stream(9));
        assert_eq!(a, b);
        assert!(is_permutation(a.ranks(Group::R)));
        assert_ne!(a.ranks(Group::L), a.ranks(Group::R));
    }

    #[test]
    fn record_examples() {
        let mut st = rng::stream(1);
        let mut s = RankingState::new(&cfg(0.0, 1.0, 5), &mut st);
        s.record_outcome(Group::L, 2, false, &mut st);
        assert_eq!(s.kappa(Group::L), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.kappa(Group::R), s.kappa(Group::L));
        assert_eq!(s.ranks(Group::L)[2], 1);

        let mut s = RankingState::new(&cfg(100.0, 0.0, 5), &mut st);
        s.record_outcome(Group::L, 4, true, &mut st);
        assert_eq!(s.kappa(Group::L)[4], 101.0);
        assert_eq!(s.kappa(Group::R)[4], 0.0);
        assert_eq!(s.highlights(Group::L)[4], 1);

        let mut s = RankingState::new(&cfg(2.0, 0.5, 5), &mut st);
        s.record_outcome(Group::R, 0, true, &mut st);
        assert_eq!(s.kappa(Group::R)[0], 3.0);
        assert_eq!(s.kappa(Group::L)[0], 1.5);
        assert_eq!(s.clicks(Group::R)[0], 1);
        assert_eq!(s.clicks(Group::L)[0], 0);
    }

    #[test]
    fn strict_sort() {
        let mut st = rng::stream(2);
        let mut s = RankingState::new(&cfg(0.0, 1.0, 3), &mut st);
        s.kappa = [vec![5.0, 3.0, 9.0], vec![5.0, 3.0, 9.0]];
        assert_eq!(s.rerank(Group::L, &mut st), &[2, 3, 1]);
    }

    #[test]
    fn unique_maximum_always_first() {
        let mut st = rng::stream(4);
        let mut s = RankingState::new(&cfg(0.0, 0.0, 6), &mut st);
        s.kappa[0] = vec![1.0, 1.0, 2.0, 1.0, 0.0, 1.0];
        for _ in 0..200 {
            assert_eq!(s.rerank(Group::L, &mut st)[2], 1);
            assert_eq!(s.ranks(Group::L)[4], 6);
        }
    }

    #[test]
    fn ties_are_uniform() {
        // Chi-square over the 6 orders of 3 tied items, 5 degrees of freedom.
        let mut st = rng::stream(11);
        let mut s = RankingState::new(&cfg(0.0, 0.0, 3), &mut st);
        let mut counts = std::collections::HashMap::new();
        let draws = 10_000;
        for _ in 0..draws {
            let r = s.rerank(Group::L, &mut st).to_vec();
            *counts.entry(r).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 0.999 quantile of chi-square with 5 dof.
        assert!(chi2 < 20.515, "chi2 = {chi2}");
    }

    /// Straightforward single-ranking implementation: full sort, then a
    /// shuffle of each tie run in index order.
    fn reference_ranks(kappa: &[f64], stream: &mut Stream) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..kappa.len()).collect();
        idx.sort_by(|&a, &b| kappa[b].partial_cmp(&kappa[a]).unwrap().then(a.cmp(&b)));
        let mut i = 0;
        while i < idx.len() {
            let mut j = i + 1;
            while j < idx.len() && kappa[idx[j]] == kappa[idx[i]] {
                j += 1;
            }
            if j - i > 1 {
                idx[i..j].shuffle(stream);
            }
            i = j;
        }
        let mut ranks = vec![0; kappa.len()];
        for (p, &m) in idx.iter().enumerate() {
            ranks[m] = p + 1;
        }
        ranks
    }

    #[derive(Debug, Clone)]
    struct Outcome {
        group: Group,
        item: usize,
        highlighted: bool,
    }

    fn arb_events(m: usize) -> impl Strategy<Value = Vec<Outcome>> {
        prop::collection::vec(
            (any::<bool>(), 0..m, any::<bool>())
                .prop_map(|(r, item, h)| Outcome { group: if r { Group::R } else { Group::L }, item, highlighted: h }),
            0..300,
        )
    }

    proptest! {
        #[test]
        fn shared_ranking_matches_reference(events in arb_events(8), eta in 0.0f64..5.0, seed: u64) {
            let c = cfg(eta, 1.0, 8);
            let mut st = rng::stream(seed);
            let mut s = RankingState::new(&c, &mut st);
            let mut ref_stream = st.clone();
            let mut kappa = vec![0.0; 8];
            for e in &events {
                s.record_outcome(e.group, e.item, e.highlighted, &mut st);
                kappa[e.item] += if e.highlighted { 1.0 + eta } else { 1.0 };
                let r = reference_ranks(&kappa, &mut ref_stream);
                prop_assert_eq!(s.ranks(Group::L), &r[..]);
                prop_assert_eq!(s.ranks(Group::R), &r[..]);
            }
        }

        #[test]
        fn incremental_matches_full_rerank(events in arb_events(7), eta in 0.0f64..3.0, lambda in 0.0f64..1.0, seed: u64) {
            let c = cfg(eta.round(), (lambda * 4.0).round() / 4.0, 7);
            let mut st = rng::stream(seed);
            let mut fast = RankingState::new(&c, &mut st);
            let mut slow = fast.clone();
            let mut slow_stream = st.clone();
            for e in &events {
                fast.record_outcome(e.group, e.item, e.highlighted, &mut st);
                let w = if e.highlighted { 1.0 + c.eta } else { 1.0 };
                slow.kappa[e.group.index()][e.item] += w;
                slow.kappa[e.group.other().index()][e.item] += c.lambda * w;
                slow.rerank(Group::L, &mut slow_stream);
                if slow.shared {
                    slow.ranks[1] = slow.ranks[0].clone();
                } else {
                    slow.rerank(Group::R, &mut slow_stream);
                }
                prop_assert_eq!(fast.ranks(Group::L), slow.ranks(Group::L));
                prop_assert_eq!(fast.ranks(Group::R), slow.ranks(Group::R));
            }
        }

        #[test]
        fn tallies_are_consistent(events in arb_events(6), eta in 0.0f64..10.0, lambda in 0.0f64..1.0, seed: u64) {
            let c = cfg(eta, lambda, 6);
            let mut st = rng::stream(seed);
            let mut s = RankingState::new(&c, &mut st);
            for e in &events {
                s.record_outcome(e.group, e.item, e.highlighted, &mut st);
            }
            let total: u64 = Group::BOTH.iter().flat_map(|&g| s.clicks(g).iter()).sum();
            prop_assert_eq!(total, events.len() as u64);
            for g in Group::BOTH {
                prop_assert!(is_permutation(s.ranks(g)));
                for m in 0..6 {
                    prop_assert!(s.highlights(g)[m] <= s.clicks(g)[m]);
                    // Popularity rebuilt from the event log.
                    let rebuilt: f64 = events.iter().filter(|e| e.item == m).map(|e| {
                        let w = if e.highlighted { 1.0 + eta } else { 1.0 };
                        if e.group == g { w } else { lambda * w }
                    }).sum();
                    prop_assert!((rebuilt - s.kappa(g)[m]).abs() < 1e-9);
                }
                let k = s.kappa(g);
                let r = s.ranks(g);
                for a in 0..6 {
                    for b in 0..6 {
                        if k[a] < k[b] {
                            prop_assert!(r[a] > r[b]);
                        }
                    }
                }
            }
        }

        #[test]
        fn zero_eta_ignores_highlights(events in arb_events(6), lambda in 0.0f64..1.0, seed: u64) {
            let c = cfg(0.0, lambda, 6);
            let mut sa = rng::stream(seed);
            let mut sb = rng::stream(seed);
            let mut a = RankingState::new(&c, &mut sa);
            let mut b = RankingState::new(&c, &mut sb);
            let mut flip = rng::stream(seed ^ 1);
            for e in &events {
                a.record_outcome(e.group, e.item, e.highlighted, &mut sa);
                b.record_outcome(e.group, e.item, flip.random(), &mut sb);
                prop_assert_eq!(a.ranks(Group::L), b.ranks(Group::L));
                prop_assert_eq!(a.ranks(Group::R), b.ranks(Group::R));
            }
        }
    }
}
