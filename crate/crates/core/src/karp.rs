//! Maximum mean cycle on a directed graph whose edge weight depends only on
//! the target vertex.
//!
//! Karp's characterisation is evaluated per strongly connected component
//! with two passes over the walk-length recursion, so memory stays linear in
//! the component size. An optimal cycle is then read off the tight-edge
//! subgraph of longest-path potentials computed for the reweighted graph.

use num_rational::Ratio;
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};

pub(crate) trait KarpWeight: Copy + PartialOrd + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {
    type Mean: Copy + PartialOrd + std::fmt::Debug;
    fn zero() -> Self;
    /// `a / alen < b / blen` with positive lengths.
    fn frac_less(a: Self, alen: i64, b: Self, blen: i64) -> bool;
    fn mean(sum: Self, len: i64) -> Self::Mean;
    /// Weight shifted so that cycles of mean `m` have total weight zero.
    fn reweight(w: Self, m: Self::Mean) -> Self;
    /// Strict improvement, with a tolerance for floating point.
    fn improves(candidate: Self, current: Self) -> bool;
    fn tight(a: Self, b: Self) -> bool;
}

impl KarpWeight for i64 {
    type Mean = Ratio<i64>;
    fn zero() -> Self {
        0
    }
    fn frac_less(a: Self, alen: i64, b: Self, blen: i64) -> bool {
        (a as i128) * (blen as i128) < (b as i128) * (alen as i128)
    }
    fn mean(sum: Self, len: i64) -> Ratio<i64> {
        Ratio::new(sum, len)
    }
    fn reweight(w: Self, m: Ratio<i64>) -> Self {
        w * m.denom() - m.numer()
    }
    fn improves(candidate: Self, current: Self) -> bool {
        candidate > current
    }
    fn tight(a: Self, b: Self) -> bool {
        a == b
    }
}

const FLOAT_TOL: f64 = 1e-9;

impl KarpWeight for f64 {
    type Mean = f64;
    fn zero() -> Self {
        0.0
    }
    fn frac_less(a: Self, alen: i64, b: Self, blen: i64) -> bool {
        a / (alen as f64) < b / (blen as f64)
    }
    fn mean(sum: Self, len: i64) -> f64 {
        sum / len as f64
    }
    fn reweight(w: Self, m: f64) -> Self {
        w - m
    }
    fn improves(candidate: Self, current: Self) -> bool {
        candidate > current + FLOAT_TOL
    }
    fn tight(a: Self, b: Self) -> bool {
        (a - b).abs() <= 1e3 * FLOAT_TOL
    }
}

#[derive(Debug, Clone)]
pub(crate) struct MeanCycle<M> {
    pub mean: M,
    /// Vertices in walk order; the last one steps back to the first.
    pub cycle: Vec<usize>,
}

/// `succ[v]` lists the successors of `v`; `weight[v]` is the weight of every
/// edge entering `v`. Returns `None` for acyclic graphs.
pub(crate) fn max_mean_cycle<W: KarpWeight>(succ: &[Vec<usize>], weight: &[W]) -> Result<Option<MeanCycle<W::Mean>>> {
    let n = succ.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    for _ in 0..n {
        g.add_node(());
    }
    for (u, vs) in succ.iter().enumerate() {
        for &v in vs {
            g.add_edge(NodeIndex::new(u), NodeIndex::new(v), ());
        }
    }
    let mut comps = tarjan_scc(&g);
    for c in &mut comps {
        c.sort();
    }
    comps.sort_by_key(|c| c[0]);

    let mut best: Option<MeanCycle<W::Mean>> = None;
    let mut local = vec![usize::MAX; n];
    for comp in comps {
        let members: Vec<usize> = comp.iter().map(|x| x.index()).collect();
        let nontrivial = members.len() > 1 || succ[members[0]].contains(&members[0]);
        if !nontrivial {
            continue;
        }
        for (i, &v) in members.iter().enumerate() {
            local[v] = i;
        }
        let lsucc: Vec<Vec<usize>> = members
            .iter()
            .map(|&u| succ[u].iter().filter(|&&v| local[v] != usize::MAX).map(|&v| local[v]).collect())
            .collect();
        let lw: Vec<W> = members.iter().map(|&v| weight[v]).collect();
        let mean = component_mean(&lsucc, &lw);
        if best.as_ref().is_none_or(|b| mean > b.mean) {
            let cyc = tight_cycle(&lsucc, &lw, mean)?;
            best = Some(MeanCycle {
                mean,
                cycle: cyc.into_iter().map(|i| members[i]).collect(),
            });
        }
        for &v in &members {
            local[v] = usize::MAX;
        }
    }
    Ok(best)
}

fn relax_row<W: KarpWeight>(succ: &[Vec<usize>], w: &[W], prev: &[W], next: &mut [Option<W>]) {
    next.iter_mut().for_each(|x| *x = None);
    for (u, vs) in succ.iter().enumerate() {
        for &v in vs {
            let cand = prev[u] + w[v];
            if next[v].is_none_or(|cur| cand > cur) {
                next[v] = Some(cand);
            }
        }
    }
}

/// Karp's formula on a strongly connected component, where every walk
/// length is realisable at every vertex.
fn component_mean<W: KarpWeight>(succ: &[Vec<usize>], w: &[W]) -> W::Mean {
    let n = succ.len();
    let step = |prev: &[W]| -> Vec<W> {
        let mut next = vec![None; n];
        relax_row(succ, w, prev, &mut next);
        next.into_iter().map(|x| x.expect("strongly connected")).collect()
    };
    let mut row = vec![W::zero(); n];
    for _ in 0..n {
        row = step(&row);
    }
    let dn = row;
    // min over k of (D_n - D_k)/(n - k), computed as a fraction per vertex
    let mut worst: Vec<(W, i64)> = vec![(W::zero(), 0); n];
    let mut dk = vec![W::zero(); n];
    for k in 0..n {
        let len = (n - k) as i64;
        for v in 0..n {
            let diff = dn[v] - dk[v];
            if k == 0 || W::frac_less(diff, len, worst[v].0, worst[v].1) {
                worst[v] = (diff, len);
            }
        }
        if k + 1 < n {
            dk = step(&dk);
        }
    }
    let mut best = W::mean(worst[0].0, worst[0].1);
    for &(d, l) in &worst[1..] {
        let m = W::mean(d, l);
        if m > best {
            best = m;
        }
    }
    best
}

fn tight_cycle<W: KarpWeight>(succ: &[Vec<usize>], w: &[W], mean: W::Mean) -> Result<Vec<usize>> {
    let n = succ.len();
    let rw: Vec<W> = w.iter().map(|&x| W::reweight(x, mean)).collect();
    let mut pot = vec![W::zero(); n];
    let mut converged = false;
    for _ in 0..=n + 1 {
        let mut changed = false;
        for u in 0..n {
            for &v in &succ[u] {
                let cand = pot[u] + rw[v];
                if W::improves(cand, pot[v]) {
                    pot[v] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Internal("longest-path potentials did not converge at the optimal mean".into()));
    }
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|u| succ[u].iter().copied().filter(|&v| W::tight(pot[u] + rw[v], pot[v])).collect())
        .collect();
    // iterative DFS; a back edge closes the cycle
    let mut color = vec![0u8; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        color[root] = 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < tight[u].len() {
                let v = tight[u][*next];
                *next += 1;
                match color[v] {
                    0 => {
                        color[v] = 1;
                        stack.push((v, 0));
                    }
                    1 => {
                        let start = stack.iter().position(|&(x, _)| x == v).expect("on stack");
                        return Ok(stack[start..].iter().map(|&(x, _)| x).collect());
                    }
                    _ => {}
                }
            } else {
                color[u] = 2;
                stack.pop();
            }
        }
    }
    Err(Error::Internal("no tight cycle at the optimal mean".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Enumerates simple cycles by DFS from each minimum vertex.
    fn brute_max_mean(succ: &[Vec<usize>], w: &[i64]) -> Option<Ratio<i64>> {
        fn dfs(u: usize, start: usize, succ: &[Vec<usize>], w: &[i64], path: &mut Vec<usize>, best: &mut Option<Ratio<i64>>) {
            for &v in &succ[u] {
                if v == start {
                    let s: i64 = path.iter().map(|&x| w[x]).sum();
                    let m = Ratio::new(s, path.len() as i64);
                    if best.is_none_or(|b| m > b) {
                        *best = Some(m);
                    }
                } else if v > start && !path.contains(&v) {
                    path.push(v);
                    dfs(v, start, succ, w, path, best);
                    path.pop();
                }
            }
        }
        let mut best = None;
        for s in 0..succ.len() {
            dfs(s, s, succ, w, &mut vec![s], &mut best);
        }
        best
    }

    #[test]
    fn agrees_with_cycle_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..8);
            let succ: Vec<Vec<usize>> = (0..n)
                .map(|_| (0..n).filter(|_| rng.random::<f64>() < 0.3).collect())
                .collect();
            let w: Vec<i64> = (0..n).map(|_| rng.random_range(-3..4)).collect();
            let got = max_mean_cycle(&succ, &w).unwrap();
            assert_eq!(got.as_ref().map(|c| c.mean), brute_max_mean(&succ, &w));
            if let Some(c) = got {
                let len = c.cycle.len();
                for i in 0..len {
                    assert!(succ[c.cycle[i]].contains(&c.cycle[(i + 1) % len]));
                }
                let s: i64 = c.cycle.iter().map(|&v| w[v]).sum();
                assert_eq!(Ratio::new(s, len as i64), c.mean);
                let wf: Vec<f64> = w.iter().map(|&x| x as f64).collect();
                let f = max_mean_cycle(&succ, &wf).unwrap().unwrap();
                assert!((f.mean - *c.mean.numer() as f64 / *c.mean.denom() as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn acyclic_graph_has_no_cycle() {
        let succ = vec![vec![1], vec![2], vec![]];
        assert!(max_mean_cycle(&succ, &[1i64, 1, 1]).unwrap().is_none());
    }
}
