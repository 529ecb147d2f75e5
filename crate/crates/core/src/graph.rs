//! The time-indexed interference graph `G_{K,T}`.
//!
//! Vertex `v_j(t)` is user `j` transmitting in slot `t`, with `t` in
//! `1..=T`. A transmission by `j` at `t` lands in slot `t + l'_ij` at receiver
//! `i`, giving the directed edge `v_j(t) -> v_i(t + l'_ij)`. Feasibility only
//! depends on the undirected conflict relation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::NormalizedChannel;
use crate::error::{domain, size, Result};
use crate::mis;

/// Exhaustive search refuses graphs with more vertices than this.
pub const BRUTE_FORCE_MAX_VERTICES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Vertex {
    pub user: usize,
    pub time: usize,
}

#[derive(Debug, Clone)]
pub struct InterferenceGraph {
    users: usize,
    horizon: usize,
    cross: Vec<Vec<i64>>,
    /// distinct directed edges, sorted
    edges: Vec<(Vertex, Vertex)>,
    /// undirected conflict sets indexed by vertex id
    neighbours: Vec<BTreeSet<usize>>,
}

impl InterferenceGraph {
    pub fn build(nc: &NormalizedChannel, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(domain("horizon T must be at least 1"));
        }
        let k = nc.users();
        let t_max = horizon as i64;
        let mut edges = BTreeSet::new();
        let mut neighbours = vec![BTreeSet::new(); k * horizon];
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let d = nc.lp(i, j);
                for t in 1..=t_max {
                    let s = t + d;
                    if s < 1 || s > t_max {
                        continue;
                    }
                    let from = Vertex { user: j, time: t as usize };
                    let to = Vertex { user: i, time: s as usize };
                    edges.insert((from, to));
                    let (a, b) = (vertex_id(from, horizon), vertex_id(to, horizon));
                    neighbours[a].insert(b);
                    neighbours[b].insert(a);
                }
            }
        }
        Ok(Self {
            users: k,
            horizon,
            cross: nc.cross().to_vec(),
            edges: edges.into_iter().collect(),
            neighbours,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn vertex_count(&self) -> usize {
        self.users * self.horizon
    }

    /// Distinct directed edges `(from, to)`.
    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    pub fn has_edge(&self, from: Vertex, to: Vertex) -> bool {
        self.edges.binary_search(&(from, to)).is_ok()
    }

    pub fn conflicts(&self, a: Vertex, b: Vertex) -> bool {
        self.neighbours[vertex_id(a, self.horizon)].contains(&vertex_id(b, self.horizon))
    }

    pub fn out_degree(&self, v: Vertex) -> usize {
        self.edges.iter().filter(|(f, _)| *f == v).count()
    }

    pub fn in_degree(&self, v: Vertex) -> usize {
        self.edges.iter().filter(|(_, t)| *t == v).count()
    }

    /// Every edge reversed; feasibility is unchanged by construction.
    pub fn reversed(&self) -> Self {
        let mut edges: Vec<_> = self.edges.iter().map(|&(a, b)| (b, a)).collect();
        edges.sort();
        Self { edges, ..self.clone() }
    }

    pub fn is_feasible(&self, p: &TransmitPattern) -> Result<bool> {
        if p.users() != self.users || p.horizon() != self.horizon {
            return Err(domain(format!(
                "pattern is {}x{} but graph is {}x{}",
                p.users(),
                p.horizon(),
                self.users,
                self.horizon
            )));
        }
        Ok(self.edges.iter().all(|&(a, b)| !(p.contains(a) && p.contains(b))))
    }

    fn adjacency_masks(&self) -> Vec<u64> {
        self.neighbours
            .iter()
            .map(|ns| ns.iter().fold(0u64, |m, &u| m | 1 << u))
            .collect()
    }

    /// Exact maximum of `sum_i r_i N_i` over all independent sets.
    ///
    /// Among optimal patterns the one returned is lexicographically greatest
    /// in `(user, time)` order, i.e. earlier users and slots are preferred.
    pub fn brute_force_optimum(&self, rates: &[f64]) -> Result<(TransmitPattern, f64)> {
        let n = self.vertex_count();
        if n > BRUTE_FORCE_MAX_VERTICES {
            return Err(size(format!(
                "exhaustive search capped at {BRUTE_FORCE_MAX_VERTICES} vertices, got K*T = {n}; use the dynamic program"
            )));
        }
        if rates.len() != self.users {
            return Err(domain("one rate weight per user required"));
        }
        let adj = self.adjacency_masks();
        let weights: Vec<f64> = (0..n).map(|v| rates[v / self.horizon]).collect();
        let order: Vec<usize> = (0..n).collect();
        let sol = mis::max_weight_independent_set(&adj, &weights, &order);
        let mut slots = vec![Vec::new(); self.users];
        for v in 0..n {
            if sol.set >> v & 1 == 1 {
                slots[v / self.horizon].push(v % self.horizon + 1);
            }
        }
        let pattern = TransmitPattern::new(self.horizon, slots)?;
        let objective = pattern.objective(rates);
        debug_assert!((objective - sol.weight).abs() <= 1e-9 * objective.abs().max(1.0));
        Ok((pattern, objective))
    }

    /// Independence number `alpha(G)` (all weights one).
    pub fn independence_number(&self) -> Result<usize> {
        let (p, _) = self.brute_force_optimum(&vec![1.0; self.users])?;
        Ok(p.total())
    }

    /// Graphviz rendering; one row per user, edges keep their direction.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph interference {\n  rankdir=LR;\n  node [shape=circle];\n");
        for j in 0..self.users {
            let _ = write!(out, "  subgraph user{} {{ rank=same;", j + 1);
            for t in 1..=self.horizon {
                let _ = write!(out, " v{}_{t};", j + 1);
            }
            out.push_str(" }\n");
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "  v{}_{} -> v{}_{};", a.user + 1, a.time, b.user + 1, b.time);
        }
        out.push_str("}\n");
        out
    }

    pub fn cross(&self) -> &[Vec<i64>] {
        &self.cross
    }
}

fn vertex_id(v: Vertex, horizon: usize) -> usize {
    v.user * horizon + (v.time - 1)
}

/// Per-user sets of transmit slots within `1..=T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmitPattern {
    horizon: usize,
    slots: Vec<Vec<usize>>,
}

impl TransmitPattern {
    pub fn new(horizon: usize, mut slots: Vec<Vec<usize>>) -> Result<Self> {
        for (j, s) in slots.iter_mut().enumerate() {
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(domain(format!("user {} lists a slot twice", j + 1)));
            }
            if s.iter().any(|&t| t < 1 || t > horizon) {
                return Err(domain(format!("user {} has a slot outside 1..={horizon}", j + 1)));
            }
        }
        Ok(Self { horizon, slots })
    }

    pub fn empty(users: usize, horizon: usize) -> Self {
        Self {
            horizon,
            slots: vec![Vec::new(); users],
        }
    }

    pub fn users(&self) -> usize {
        self.slots.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn slots(&self) -> &[Vec<usize>] {
        &self.slots
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.slots[v.user].binary_search(&v.time).is_ok()
    }

    pub fn count(&self, user: usize) -> usize {
        self.slots[user].len()
    }

    pub fn total(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }

    pub fn objective(&self, rates: &[f64]) -> f64 {
        self.slots.iter().zip(rates).map(|(s, r)| s.len() as f64 * r).sum()
    }

    /// JSON form `{"slots":[[t,...],...]}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "slots": self.slots }).to_string()
    }

    pub fn from_json(text: &str, horizon: usize) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            slots: Vec<Vec<usize>>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| domain(format!("malformed pattern JSON: {e}")))?;
        Self::new(horizon, raw.slots)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    /// Symbols sent per user, `N_i`.
    pub symbols: Vec<usize>,
    /// `R_i = N_i r_i` over the whole block.
    pub user_rates: Vec<f64>,
    /// `R_i / T`.
    pub user_rates_per_slot: Vec<f64>,
    /// `sum_i r_i N_i`.
    pub objective: f64,
    pub objective_per_slot: f64,
}

pub fn rate_report(p: &TransmitPattern, nc: &NormalizedChannel) -> RateReport {
    let t = p.horizon() as f64;
    let symbols: Vec<usize> = (0..p.users()).map(|j| p.count(j)).collect();
    let user_rates: Vec<f64> = symbols.iter().zip(nc.rates()).map(|(&n, r)| n as f64 * r).collect();
    let objective = p.objective(nc.rates());
    RateReport {
        user_rates_per_slot: user_rates.iter().map(|r| r / t).collect(),
        symbols,
        user_rates,
        objective,
        objective_per_slot: objective / t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    fn v(user: usize, time: usize) -> Vertex {
        Vertex { user, time }
    }

    fn two_user_same_slot() -> NormalizedChannel {
        NormalizedChannel::uniform(vec![vec![0, 0], vec![0, 0]]).unwrap()
    }

    #[test]
    fn reference_channel_edges() {
        // slot 1 of tx 1 reaches rx 2 three slots later; tx 3 hits rx 2 in the same slot
        let g = InterferenceGraph::build(&presets::staggered_three_user().normalize(), 5).unwrap();
        assert!(g.has_edge(v(0, 1), v(1, 4)));
        assert!(g.has_edge(v(2, 1), v(1, 1)));
        assert!(!g.has_edge(v(1, 4), v(0, 1)));
    }

    #[test]
    fn single_user_has_no_edges() {
        let g = InterferenceGraph::build(&NormalizedChannel::uniform(vec![vec![0]]).unwrap(), 7).unwrap();
        assert!(g.edges().is_empty());
        let (p, obj) = g.brute_force_optimum(&[1.0]).unwrap();
        assert_eq!(p.count(0), 7);
        assert_eq!(obj, 7.0);
    }

    #[test]
    fn zero_delay_pair_has_six_edges() {
        let g = InterferenceGraph::build(&two_user_same_slot(), 3).unwrap();
        assert_eq!(g.edges().len(), 6);
        for t in 1..=3 {
            assert!(g.has_edge(v(0, t), v(1, t)) && g.has_edge(v(1, t), v(0, t)));
        }
        assert_eq!(InterferenceGraph::build(&two_user_same_slot(), 2).unwrap().independence_number().unwrap(), 2);
    }

    #[test]
    fn feasibility_cases() {
        let g = InterferenceGraph::build(&two_user_same_slot(), 3).unwrap();
        assert!(g.is_feasible(&TransmitPattern::empty(2, 3)).unwrap());
        let clash = TransmitPattern::new(3, vec![vec![1], vec![1]]).unwrap();
        assert!(!g.is_feasible(&clash).unwrap());
        assert!(g.is_feasible(&TransmitPattern::new(3, vec![vec![1, 3], vec![2]]).unwrap()).unwrap());
        assert!(g.is_feasible(&TransmitPattern::empty(2, 4)).is_err());
    }

    #[test]
    fn alternating_pattern_feasible_on_reference_channel() {
        // shaded pattern class: a maximum independent set is feasible and
        // the reference graph's optimum is found exactly
        let nc = presets::staggered_three_user().normalize();
        let g = InterferenceGraph::build(&nc, 12).unwrap();
        let (p, obj) = g.brute_force_optimum(nc.rates()).unwrap();
        assert!(g.is_feasible(&p).unwrap());
        assert_eq!(obj, p.total() as f64);
    }

    #[test]
    fn size_cap_enforced() {
        let g = InterferenceGraph::build(&presets::half_rate_three_user(), 14).unwrap();
        assert!(matches!(g.brute_force_optimum(&[1.0; 3]), Err(crate::Error::Size(_))));
    }

    #[test]
    fn rate_report_arithmetic() {
        let nc = NormalizedChannel::uniform(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let empty = rate_report(&TransmitPattern::empty(2, 6), &nc);
        assert_eq!(empty.objective, 0.0);
        assert!(empty.user_rates.iter().all(|&r| r == 0.0));
        let p = TransmitPattern::new(6, vec![vec![1, 3, 5], vec![]]).unwrap();
        let rep = rate_report(&p, &nc);
        assert_eq!(rep.symbols, vec![3, 0]);
        assert_eq!(rep.user_rates_per_slot[0], 0.5);
        assert_eq!(rep.objective_per_slot, 0.5);
    }

    #[test]
    fn pattern_json_round_trip_and_validation() {
        let p = TransmitPattern::new(5, vec![vec![4, 1], vec![2]]).unwrap();
        assert_eq!(p.to_json(), r#"{"slots":[[1,4],[2]]}"#);
        assert_eq!(TransmitPattern::from_json(&p.to_json(), 5).unwrap(), p);
        assert!(TransmitPattern::new(3, vec![vec![0]]).is_err());
        assert!(TransmitPattern::new(3, vec![vec![2, 2]]).is_err());
    }

    #[test]
    fn dot_export_lists_edges() {
        let g = InterferenceGraph::build(&two_user_same_slot(), 2).unwrap();
        let dot = g.to_dot();
        assert!(dot.contains("v1_1 -> v2_1;"));
        assert_eq!(dot.matches("->").count(), 4);
    }

    fn arb_channel(max_k: usize, max_d: i64) -> impl Strategy<Value = NormalizedChannel> {
        (1..=max_k).prop_flat_map(move |k| {
            proptest::collection::vec(-max_d..=max_d, k * k).prop_map(move |flat| {
                let cross = (0..k)
                    .map(|i| (0..k).map(|j| if i == j { 0 } else { flat[i * k + j] }).collect())
                    .collect();
                NormalizedChannel::uniform(cross).unwrap()
            })
        })
    }

    fn arb_pattern(k: usize, t: usize) -> impl Strategy<Value = TransmitPattern> {
        proptest::collection::vec(any::<bool>(), k * t).prop_map(move |bits| {
            let slots = (0..k)
                .map(|j| (1..=t).filter(|&s| bits[j * t + s - 1]).collect())
                .collect();
            TransmitPattern::new(t, slots).unwrap()
        })
    }

    proptest! {
        #[test]
        fn reversal_preserves_feasibility(
            (nc, p) in arb_channel(4, 3).prop_flat_map(|nc| { let k = nc.users(); (Just(nc), arb_pattern(k, 6)) })
        ) {
            let g = InterferenceGraph::build(&nc, 6).unwrap();
            prop_assert_eq!(g.is_feasible(&p).unwrap(), g.reversed().is_feasible(&p).unwrap());
        }

        #[test]
        fn degrees_bounded(nc in arb_channel(5, 3), t in 1usize..9) {
            let g = InterferenceGraph::build(&nc, t).unwrap();
            let k = nc.users();
            let far = nc.max_abs_delay() as usize;
            for j in 0..k {
                for s in 1..=t {
                    let vx = Vertex { user: j, time: s };
                    prop_assert!(g.out_degree(vx) <= k - 1);
                    prop_assert!(g.in_degree(vx) <= k - 1);
                    if s > far && s + far <= t {
                        prop_assert_eq!(g.out_degree(vx), k - 1);
                        prop_assert_eq!(g.in_degree(vx), k - 1);
                    }
                }
            }
        }

        #[test]
        fn independence_number_monotone_in_horizon(nc in arb_channel(3, 2), t in 1usize..8) {
            let a = InterferenceGraph::build(&nc, t).unwrap().independence_number().unwrap();
            let b = InterferenceGraph::build(&nc, t + 1).unwrap().independence_number().unwrap();
            prop_assert!(b >= a);
        }

        #[test]
        fn brute_force_matches_subset_enumeration(nc in arb_channel(3, 2), t in 1usize..5) {
            let g = InterferenceGraph::build(&nc, t).unwrap();
            let n = g.vertex_count();
            let mut best = 0;
            for mask in 0u32..(1 << n) {
                let slots = (0..nc.users())
                    .map(|j| (1..=t).filter(|&s| mask >> (j * t + s - 1) & 1 == 1).collect())
                    .collect();
                let p = TransmitPattern::new(t, slots).unwrap();
                if g.is_feasible(&p).unwrap() {
                    best = best.max(p.total());
                }
            }
            prop_assert_eq!(g.independence_number().unwrap(), best);
        }
    }
}
