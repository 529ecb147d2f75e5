//! The stationary dynamic program over sliding state windows.
//!
//! The state at time `t` records, for every user `j`, the transmit decisions
//! `v_j(t), v_j(t-1), ..., v_j(t-l_j*)`. Bit `(j, k)` sits at position
//! `offset_j + k`, users in order, so a state is an unsigned integer whose
//! least significant bit is `v_1(t)`. States are stored in ascending integer
//! order; the all-silent state has index 0.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::Serialize;

use crate::channel::NormalizedChannel;
use crate::error::{size, Error, Result};
use crate::graph::TransmitPattern;
use crate::karp;

/// Cap on the total window width `sum_j (l_j* + 1)`.
pub const MAX_WINDOW_BITS: usize = 30;
/// Cap on the number of enumerated states.
pub const MAX_STATES: usize = 1 << 20;
/// Cap on the state count for the maximum mean cycle computation.
pub const MAX_CYCLE_STATES: usize = 8192;

const EPS: f64 = 1e-9;

/// Per-user window lengths `l_j*`: the longest edge leaving or entering user
/// `j`, floored at zero.
pub fn window_lengths(nc: &NormalizedChannel) -> Vec<usize> {
    let k = nc.users();
    (0..k)
        .map(|j| {
            let mut m = 0i64;
            for i in (0..k).filter(|&i| i != j) {
                m = m.max(nc.lp(i, j)).max(-nc.lp(j, i));
            }
            m as usize
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DpStateSpace {
    window: Vec<usize>,
    offsets: Vec<usize>,
    width: usize,
    states: Vec<u32>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    /// bit mask of the `(j, 0)` positions
    current_mask: u32,
    rates: Vec<f64>,
}

impl DpStateSpace {
    pub fn enumerate(nc: &NormalizedChannel) -> Result<Self> {
        let k = nc.users();
        let window = window_lengths(nc);
        let width: usize = window.iter().map(|l| l + 1).sum();
        if width > MAX_WINDOW_BITS {
            return Err(size(format!(
                "state window has {width} bits, cap is {MAX_WINDOW_BITS} (2^{width} candidate states)"
            )));
        }
        let mut offsets = Vec::with_capacity(k);
        let mut acc = 0;
        for l in &window {
            offsets.push(acc);
            acc += l + 1;
        }
        // conflicts inside the window: (j,k1) ~ (i,k2) iff k1 - k2 = l'_ij
        let mut conflict = vec![0u32; width];
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                let d = nc.lp(i, j);
                for k1 in 0..=window[j] as i64 {
                    let k2 = k1 - d;
                    if (0..=window[i] as i64).contains(&k2) {
                        let a = offsets[j] + k1 as usize;
                        let b = offsets[i] + k2 as usize;
                        conflict[a] |= 1 << b;
                        conflict[b] |= 1 << a;
                    }
                }
            }
        }
        let mut states = Vec::new();
        enumerate_independent(&conflict, 0, 0, &mut states)?;
        states.sort_unstable();

        let current_mask = offsets.iter().fold(0u32, |m, &o| m | 1 << o);
        // a -> b iff b's history equals a shifted by one slot
        let older = |s: u32| -> u64 {
            let mut key = 0u64;
            for j in 0..k {
                let l = window[j];
                let bits = (s >> offsets[j]) & ((1u32 << l) - 1);
                key |= (bits as u64) << offsets[j];
            }
            key
        };
        let newer = |s: u32| -> u64 {
            let mut key = 0u64;
            for j in 0..k {
                let l = window[j];
                let bits = (s >> (offsets[j] + 1)) & ((1u32 << l) - 1);
                key |= (bits as u64) << offsets[j];
            }
            key
        };
        let mut by_key: HashMap<u64, Vec<usize>> = HashMap::new();
        for (a, &s) in states.iter().enumerate() {
            by_key.entry(older(s)).or_default().push(a);
        }
        let mut preds = vec![Vec::new(); states.len()];
        let mut succs = vec![Vec::new(); states.len()];
        for (b, &s) in states.iter().enumerate() {
            if let Some(ps) = by_key.get(&newer(s)) {
                preds[b] = ps.clone();
                for &a in ps {
                    succs[a].push(b);
                }
            }
        }
        Ok(Self {
            window,
            offsets,
            width,
            states,
            preds,
            succs,
            current_mask,
            rates: nc.rates().to_vec(),
        })
    }

    pub fn window(&self) -> &[usize] {
        &self.window
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Raw bit vectors of the states, ascending.
    pub fn states(&self) -> &[u32] {
        &self.states
    }

    /// Bit `(user, lag)` of the state with index `s`.
    pub fn bit(&self, s: usize, user: usize, lag: usize) -> bool {
        self.states[s] >> (self.offsets[user] + lag) & 1 == 1
    }

    pub fn transition_count(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    pub fn successors(&self, s: usize) -> &[usize] {
        &self.succs[s]
    }

    pub fn predecessors(&self, s: usize) -> &[usize] {
        &self.preds[s]
    }

    pub fn has_transition(&self, a: usize, b: usize) -> bool {
        self.succs[a].binary_search(&b).is_ok()
    }

    /// Users transmitting in the newest slot of state `s`.
    pub fn transmitters(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.window.len()).filter(move |&j| self.bit(s, j, 0))
    }

    /// Reward of entering state `s`: `sum_k r_k b^(k,0)`.
    pub fn reward(&self, s: usize) -> f64 {
        self.transmitters(s).map(|j| self.rates[j]).sum()
    }

    fn count(&self, s: usize) -> i64 {
        (self.states[s] & self.current_mask).count_ones() as i64
    }

    /// One CSV header line plus one data line.
    pub fn stats_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["users", "window_lengths", "window_bits", "states", "transitions"])
            .expect("in-memory write");
        let lens = self.window.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ");
        w.write_record([
            self.window.len().to_string(),
            lens,
            self.width.to_string(),
            self.len().to_string(),
            self.transition_count().to_string(),
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

fn enumerate_independent(conflict: &[u32], pos: usize, chosen: u32, out: &mut Vec<u32>) -> Result<()> {
    if pos == conflict.len() {
        if out.len() >= MAX_STATES {
            return Err(size(format!("more than {MAX_STATES} window states")));
        }
        out.push(chosen);
        return Ok(());
    }
    enumerate_independent(conflict, pos + 1, chosen, out)?;
    if conflict[pos] & chosen == 0 {
        enumerate_independent(conflict, pos + 1, chosen | 1 << pos, out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Any state may precede slot 1 at zero cost.
    Paper,
    /// Slots before 1 are silent.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub pattern: TransmitPattern,
    pub objective: f64,
    /// State index at each slot `1..=T`.
    pub trajectory: Vec<usize>,
    /// Smallest period of the trajectory's second half, when it repeats at
    /// least twice there.
    pub period: Option<usize>,
}

pub fn solve_finite(nc: &NormalizedChannel, horizon: usize, boundary: Boundary) -> Result<SolveResult> {
    let space = DpStateSpace::enumerate(nc)?;
    space.solve(horizon, boundary)
}

impl DpStateSpace {
    pub fn solve(&self, horizon: usize, boundary: Boundary) -> Result<SolveResult> {
        if horizon == 0 {
            return Err(crate::error::domain("horizon T must be at least 1"));
        }
        let n = self.len();
        let reward: Vec<f64> = (0..n).map(|s| self.reward(s)).collect();
        let mut cost: Vec<f64> = match boundary {
            Boundary::Exact => (0..n).map(|s| if s == 0 { 0.0 } else { f64::NEG_INFINITY }).collect(),
            Boundary::Paper => vec![0.0; n],
        };
        let mut back: Vec<Vec<u32>> = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut next = vec![f64::NEG_INFINITY; n];
            let mut arg = vec![u32::MAX; n];
            for b in 0..n {
                // predecessors are ascending, so the first maximiser is the lowest index
                for &a in &self.preds[b] {
                    if cost[a] > next[b] + EPS || (next[b] == f64::NEG_INFINITY && cost[a] > f64::NEG_INFINITY) {
                        next[b] = cost[a];
                        arg[b] = a as u32;
                    }
                }
                next[b] += reward[b];
            }
            cost = next;
            back.push(arg);
        }
        let mut end = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for (s, &c) in cost.iter().enumerate() {
            if c > best + EPS || (best == f64::NEG_INFINITY && c > f64::NEG_INFINITY) {
                best = c;
                end = s;
            }
        }
        if end == usize::MAX {
            return Err(Error::Internal("no reachable state".into()));
        }
        let mut trajectory = vec![0usize; horizon];
        let mut s = end;
        for t in (0..horizon).rev() {
            trajectory[t] = s;
            s = back[t][s] as usize;
        }
        let mut slots = vec![Vec::new(); self.window.len()];
        for (t, &st) in trajectory.iter().enumerate() {
            for j in self.transmitters(st) {
                slots[j].push(t + 1);
            }
        }
        let pattern = TransmitPattern::new(horizon, slots)?;
        let objective = pattern.objective(&self.rates);
        if (objective - best).abs() > 1e-6 * (1.0 + best.abs()) {
            return Err(Error::Internal(format!("backtrace objective {objective} differs from DP value {best}")));
        }
        let period = detect_period(&trajectory);
        Ok(SolveResult {
            pattern,
            objective,
            trajectory,
            period,
        })
    }
}

fn detect_period(traj: &[usize]) -> Option<usize> {
    let tail = &traj[traj.len() / 2..];
    (1..=tail.len() / 2).find(|&p| (p..tail.len()).all(|i| tail[i] == tail[i - p]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    /// Every transmission counts one; the result is the independence rate.
    Uniform,
    /// Transmissions weighted by the per-user rates `r_i`.
    Rates,
}

/// One period of an infinite periodic transmit pattern, slots in
/// `1..=period`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct PeriodicPattern {
    pub period: usize,
    pub slots: Vec<Vec<usize>>,
}

impl PeriodicPattern {
    /// `reps` consecutive copies over the horizon `reps * period`.
    pub fn unroll(&self, reps: usize) -> TransmitPattern {
        let slots = self
            .slots
            .iter()
            .map(|s| (0..reps).flat_map(|r| s.iter().map(move |&t| t + r * self.period)).collect())
            .collect();
        TransmitPattern::new(self.period * reps, slots).expect("slots within period")
    }

    /// Per-user fraction of slots used.
    pub fn density(&self, user: usize) -> Ratio<i64> {
        Ratio::new(self.slots[user].len() as i64, self.period as i64)
    }

    /// Shifts the pattern `by` slots later, cyclically.
    pub fn rotated(&self, by: usize) -> Self {
        let p = self.period;
        let slots = self
            .slots
            .iter()
            .map(|s| {
                let mut v: Vec<usize> = s.iter().map(|&t| (t - 1 + by) % p + 1).collect();
                v.sort_unstable();
                v
            })
            .collect();
        Self { period: p, slots }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceRate {
    /// Maximum mean reward per slot.
    pub rate: f64,
    /// Exact value for uniform weights.
    #[serde(serialize_with = "ser_ratio")]
    pub exact: Option<Ratio<i64>>,
    /// State indices around one optimal cycle.
    pub cycle: Vec<usize>,
    pub pattern: PeriodicPattern,
}

fn ser_ratio<S: serde::Serializer>(r: &Option<Ratio<i64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&format!("{}/{}", r.numer(), r.denom())),
        None => s.serialize_none(),
    }
}

pub fn independence_rate(nc: &NormalizedChannel, weights: Weights) -> Result<IndependenceRate> {
    DpStateSpace::enumerate(nc)?.independence_rate(weights)
}

impl DpStateSpace {
    pub fn independence_rate(&self, weights: Weights) -> Result<IndependenceRate> {
        let n = self.len();
        if n > MAX_CYCLE_STATES {
            return Err(size(format!(
                "{n} states exceed the maximum mean cycle cap of {MAX_CYCLE_STATES}"
            )));
        }
        // the silent state loops to itself, so a cycle always exists
        let (rate, exact, cycle) = match weights {
            Weights::Uniform => {
                let w: Vec<i64> = (0..n).map(|s| self.count(s)).collect();
                let mc = karp::max_mean_cycle(&self.succs, &w)?.ok_or_else(|| Error::Internal("state graph acyclic".into()))?;
                let r = *mc.mean.numer() as f64 / *mc.mean.denom() as f64;
                (r, Some(mc.mean), mc.cycle)
            }
            Weights::Rates => {
                let w: Vec<f64> = (0..n).map(|s| self.reward(s)).collect();
                let mc = karp::max_mean_cycle(&self.succs, &w)?.ok_or_else(|| Error::Internal("state graph acyclic".into()))?;
                (mc.mean, None, mc.cycle)
            }
        };
        let period = cycle.len();
        let mut slots = vec![Vec::new(); self.window.len()];
        for (t, &s) in cycle.iter().enumerate() {
            for j in self.transmitters(s) {
                slots[j].push(t + 1);
            }
        }
        Ok(IndependenceRate {
            rate,
            exact,
            cycle,
            pattern: PeriodicPattern { period, slots },
        })
    }
}
