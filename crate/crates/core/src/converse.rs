//! Per-slot conflict graphs for the bandwidth-scaling converse.
//!
//! Dropping every edge between different slots leaves `T` copies of one
//! column graph on the `K` users. With delays uniform on `L` values each
//! ordered pair collides in the same slot with probability `1/L`, so an
//! unordered pair is adjacent with probability `1 - (1 - 1/L)^2`.

use rand::Rng;
use serde::Serialize;

use crate::channel::NormalizedChannel;
use crate::error::{domain, size, Result};
use crate::mis;
use crate::seed;

/// Exact search refuses column graphs larger than this.
pub const EXACT_MAX_USERS: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnGraph {
    users: usize,
    adj: Vec<u64>,
}

impl ColumnGraph {
    pub fn from_edges(users: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if users > 64 {
            return Err(size("column graphs hold at most 64 vertices"));
        }
        let mut adj = vec![0u64; users];
        for &(a, b) in edges {
            if a >= users || b >= users || a == b {
                return Err(domain(format!("invalid edge ({a},{b})")));
            }
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        Ok(Self { users, adj })
    }

    /// Same-slot conflicts of a concrete channel: `i ~ j` iff `l'_ij = 0` or
    /// `l'_ji = 0`.
    pub fn of_channel(nc: &NormalizedChannel) -> Result<Self> {
        let k = nc.users();
        let mut edges = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                if nc.lp(i, j) == 0 || nc.lp(j, i) == 0 {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(k, &edges)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|a| a.count_ones() as usize).sum::<usize>() / 2
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a] >> b & 1 == 1
    }
}

/// Edge probability `1 - (1 - 1/L)^2`.
pub fn edge_probability(delay_bins: usize) -> f64 {
    1.0 - (1.0 - 1.0 / delay_bins as f64).powi(2)
}

pub fn sample_column_graph(users: usize, delay_bins: usize, seed: u64) -> Result<ColumnGraph> {
    let mut rng = seed::rng_for(seed, &[]);
    sample_with(users, delay_bins, &mut rng)
}

fn sample_with<R: Rng + ?Sized>(users: usize, delay_bins: usize, rng: &mut R) -> Result<ColumnGraph> {
    if users == 0 || delay_bins == 0 {
        return Err(domain("K and L must be at least 1"));
    }
    let q = 1.0 / delay_bins as f64;
    let mut edges = Vec::new();
    for a in 0..users {
        for b in a + 1..users {
            // one draw per direction of the pair
            let ab = rng.random::<f64>() < q;
            let ba = rng.random::<f64>() < q;
            if ab || ba {
                edges.push((a, b));
            }
        }
    }
    ColumnGraph::from_edges(users, &edges)
}

pub fn exact_independence_number(g: &ColumnGraph) -> Result<usize> {
    if g.users > EXACT_MAX_USERS {
        return Err(size(format!(
            "exact search capped at {EXACT_MAX_USERS} vertices, got {}; see greedy_independence_number",
            g.users
        )));
    }
    let order = mis::degree_order(&g.adj);
    let sol = mis::max_weight_independent_set(&g.adj, &vec![1.0; g.users], &order);
    Ok(sol.set.count_ones() as usize)
}

/// Minimum-degree greedy lower bound, for graphs beyond the exact cap.
pub fn greedy_independence_number(g: &ColumnGraph) -> usize {
    let mut alive: u64 = if g.users == 64 { u64::MAX } else { (1u64 << g.users) - 1 };
    let mut count = 0;
    while alive != 0 {
        let mut best = usize::MAX;
        let mut pick = 0;
        let mut m = alive;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            let d = (g.adj[v] & alive).count_ones() as usize;
            if d < best {
                best = d;
                pick = v;
            }
        }
        count += 1;
        alive &= !(g.adj[pick] | 1 << pick);
    }
    count
}

/// `2 ln K / ln(1/(1-p))`, the typical independence number of `G(K, p)`.
pub fn analytic_reference(users: usize, p: f64) -> f64 {
    if users <= 1 {
        return users as f64;
    }
    if p >= 1.0 {
        return 1.0;
    }
    2.0 * (users as f64).ln() / (1.0 / (1.0 - p)).ln()
}

/// How `L` depends on `K` in a scaling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelayBinsOfUsers {
    Constant { l: usize },
    /// `L = K^2`
    Square,
}

impl DelayBinsOfUsers {
    pub fn at(&self, users: usize) -> usize {
        match *self {
            DelayBinsOfUsers::Constant { l } => l,
            DelayBinsOfUsers::Square => users * users,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialAlpha {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "L")]
    pub delay_bins: usize,
    pub trial: usize,
    pub alpha: usize,
    pub analytic_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "L")]
    pub delay_bins: usize,
    pub mean_alpha: f64,
    pub std_alpha: f64,
    pub analytic_ref: f64,
    /// `L`, the limit of `alpha / ln K` bounded by the proof
    pub bound: f64,
    /// `mean_alpha / ln K`
    pub ratio: f64,
    /// standard error of `ratio`
    pub ratio_se: f64,
}

pub fn scaling_curve(
    users: &[usize],
    rule: DelayBinsOfUsers,
    trials: usize,
    seed: u64,
) -> Result<(Vec<CurvePoint>, Vec<TrialAlpha>)> {
    if trials == 0 {
        return Err(domain("at least one trial required"));
    }
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for &k in users {
        let l = rule.at(k);
        let p = edge_probability(l);
        let analytic_ref = analytic_reference(k, p);
        let mut alphas = Vec::with_capacity(trials);
        for t in 0..trials {
            let mut rng = seed::rng_for(seed, &[k as u64, t as u64]);
            let g = sample_with(k, l, &mut rng)?;
            let alpha = exact_independence_number(&g)?;
            alphas.push(alpha as f64);
            rows.push(TrialAlpha {
                users: k,
                delay_bins: l,
                trial: t,
                alpha,
                analytic_ref,
            });
        }
        let n = trials as f64;
        let mean = alphas.iter().sum::<f64>() / n;
        let std = if trials > 1 {
            (alphas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let ln_k = (k as f64).ln();
        points.push(CurvePoint {
            users: k,
            delay_bins: l,
            mean_alpha: mean,
            std_alpha: std,
            analytic_ref,
            bound: l as f64,
            ratio: mean / ln_k,
            ratio_se: std / n.sqrt() / ln_k,
        });
    }
    Ok((points, rows))
}

/// `K, L, trial, alpha, analytic_ref`, one row per trial.
pub fn trials_csv(rows: &[TrialAlpha]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
