//! Exact maximum-weight independent set on graphs of at most 64 vertices.
//!
//! Vertices are explored in a caller-chosen order, include-branch first, and
//! the incumbent is replaced only on strict improvement. The returned set is
//! therefore the lexicographically greatest optimum with respect to that
//! order (earlier vertices preferred).

const EPS: f64 = 1e-9;

pub(crate) struct MisSolution {
    /// Chosen vertices as a bitmask over the original vertex ids.
    pub set: u64,
    pub weight: f64,
}

struct Search<'a> {
    /// adjacency in position space
    adj: Vec<u64>,
    weights: Vec<f64>,
    order: &'a [usize],
    best: f64,
    best_set: u64,
}

impl Search<'_> {
    /// Greedy clique cover of `cand`; each clique contributes its heaviest
    /// vertex.
    fn bound(&self, mut cand: u64) -> f64 {
        let mut total = 0.0;
        while cand != 0 {
            let v = cand.trailing_zeros() as usize;
            let mut clique_max = self.weights[v];
            cand &= !(1 << v);
            let mut pool = cand & self.adj[v];
            while pool != 0 {
                let u = pool.trailing_zeros() as usize;
                clique_max = clique_max.max(self.weights[u]);
                cand &= !(1 << u);
                pool &= self.adj[u] & !(1 << u);
            }
            total += clique_max;
        }
        total
    }

    fn run(&mut self, mut cand: u64, mut chosen: u64, mut weight: f64) {
        // vertices with no remaining neighbours are always taken
        loop {
            if cand == 0 {
                if weight > self.best + EPS {
                    self.best = weight;
                    self.best_set = chosen;
                }
                return;
            }
            if weight + self.bound(cand) <= self.best + EPS {
                return;
            }
            let v = cand.trailing_zeros() as usize;
            let bit = 1u64 << v;
            if self.adj[v] & cand == 0 {
                cand &= !bit;
                chosen |= bit;
                weight += self.weights[v];
                continue;
            }
            self.run(cand & !bit & !self.adj[v], chosen | bit, weight + self.weights[v]);
            cand &= !bit;
        }
    }
}

/// `adj[v]` is the neighbour mask of vertex `v`; `order[p]` is the vertex
/// explored at position `p`.
pub(crate) fn max_weight_independent_set(adj: &[u64], weights: &[f64], order: &[usize]) -> MisSolution {
    let n = adj.len();
    assert!(n <= 64, "bitmask solver handles at most 64 vertices");
    assert_eq!(order.len(), n);
    let mut pos = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let padj = order
        .iter()
        .map(|&v| {
            let mut m = 0u64;
            let mut a = adj[v];
            while a != 0 {
                let u = a.trailing_zeros() as usize;
                m |= 1 << pos[u];
                a &= a - 1;
            }
            m
        })
        .collect();
    let pweights = order.iter().map(|&v| weights[v]).collect();
    let mut s = Search {
        adj: padj,
        weights: pweights,
        order,
        best: -1.0,
        best_set: 0,
    };
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    s.run(all, 0, 0.0);
    let mut set = 0u64;
    let mut m = s.best_set;
    while m != 0 {
        let p = m.trailing_zeros() as usize;
        set |= 1 << s.order[p];
        m &= m - 1;
    }
    MisSolution { set, weight: s.best.max(0.0) }
}

/// Highest degree first, lowest id on ties.
pub(crate) fn degree_order(adj: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..adj.len()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(adj[v].count_ones()), v));
    order
}
