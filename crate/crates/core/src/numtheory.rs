//! Exact half-rate feasibility for three users and the chain-graph pattern
//! construction, plus the bounded cycle-valuation test for general `K`.
//!
//! Users are zero-based in code; comments quote the one-based labels, so
//! `l'_13` is `nc.lp(0, 2)`.

use std::collections::VecDeque;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::channel::NormalizedChannel;
use crate::dp::{self, PeriodicPattern, Weights};
use crate::error::{domain, Error, Result};

/// 2-adic valuation; zero has infinite valuation, ordered above every
/// finite one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Valuation::Finite(v) => s.serialize_u32(*v),
            Valuation::Infinite => s.serialize_str("inf"),
        }
    }
}

pub fn two_adic_valuation(n: i64) -> Valuation {
    if n == 0 {
        Valuation::Infinite
    } else {
        Valuation::Finite(n.trailing_zeros())
    }
}

/// The cycle sums of a three-user channel and their valuations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CycleSums {
    pub l: i64,
    pub l1: i64,
    pub l2: i64,
    pub l3: i64,
    pub gamma: Valuation,
    pub gamma1: Valuation,
    pub gamma2: Valuation,
    pub gamma3: Valuation,
}

impl CycleSums {
    pub fn new(nc: &NormalizedChannel) -> Result<Self> {
        if nc.users() != 3 {
            return Err(domain(format!("three users required, got {}", nc.users())));
        }
        let p = |i: usize, j: usize| nc.lp(i - 1, j - 1);
        let l = p(3, 1) + p(1, 3) + p(3, 2) + p(2, 1) + p(1, 2) + p(2, 3);
        let l1 = p(1, 3) + p(3, 2) + p(2, 1);
        let l2 = p(2, 1) + p(1, 2);
        let l3 = p(3, 1) + p(1, 3);
        Ok(Self::from_sums(l, l1, l2, l3))
    }

    pub fn from_sums(l: i64, l1: i64, l2: i64, l3: i64) -> Self {
        Self {
            l,
            l1,
            l2,
            l3,
            gamma: two_adic_valuation(l),
            gamma1: two_adic_valuation(l1),
            gamma2: two_adic_valuation(l2),
            gamma3: two_adic_valuation(l3),
        }
    }

    pub fn achievable(&self) -> bool {
        valuation_condition(self.gamma, self.gamma1, self.gamma2, self.gamma3)
    }

    /// `gcd(l_1, l_2/2, l_3/2, l/2)` over absolute values with zero terms
    /// dropped. Meaningful only when [`Self::achievable`] holds, in which case
    /// the halved terms are integers.
    pub fn gcd_exponent(&self) -> u64 {
        [self.l1, self.l2 / 2, self.l3 / 2, self.l / 2]
            .iter()
            .fold(0u64, |g, &x| g.gcd(&x.unsigned_abs()))
    }
}

fn valuation_condition(g: Valuation, g1: Valuation, g2: Valuation, g3: Valuation) -> bool {
    g1 < g2 && g1 < g3 && g1 < g
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfRateVerdict {
    pub sums: CycleSums,
    pub achievable: bool,
    /// `g` such that exactly `2^g` half-rate patterns exist.
    pub gcd_exponent: Option<u64>,
    /// The pattern built from all-`I` seeds.
    pub witness: Option<PeriodicPattern>,
}

impl HalfRateVerdict {
    pub fn pattern_count(&self) -> Option<u128> {
        self.gcd_exponent.filter(|&g| g < 128).map(|g| 1u128 << g)
    }
}

pub fn theorem3_check(nc: &NormalizedChannel) -> Result<HalfRateVerdict> {
    let sums = CycleSums::new(nc)?;
    if !sums.achievable() {
        return Ok(HalfRateVerdict {
            sums,
            achievable: false,
            gcd_exponent: None,
            witness: None,
        });
    }
    let g = sums.gcd_exponent();
    let witness = construct_half_rate_pattern(nc, &vec![Phase::In; g as usize])?;
    Ok(HalfRateVerdict {
        sums,
        achievable: true,
        gcd_exponent: Some(g),
        witness: Some(witness),
    })
}

/// Whether the first vertex of a chain is in the pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum Phase {
    #[serde(rename = "I")]
    In,
    #[serde(rename = "O")]
    Out,
}

impl Phase {
    fn flip(self) -> Self {
        match self {
            Phase::In => Phase::Out,
            Phase::Out => Phase::In,
        }
    }
}

/// Builds a half-rate periodic pattern by alternating along chain graphs.
///
/// Chain `c` is the path `v_3(c) - v_1(c+o_1) - v_3(c+o_2) - v_2(c+o_3) -
/// v_1(c+o_4) - v_2(c+o_5) - v_3(c+l) - ...` whose steps are the delays
/// `l'_13, l'_31, l'_23, l'_12, l'_21, l'_32`. Every vertex lies on exactly
/// two chains (twins), which ties the chain phases together:
///
/// * `phi(c) = phi(c + l_3)` through user 3,
/// * `phi(c) = phi(c + l_2)` through user 2,
/// * `phi(c) != phi(c - l_1)` through user 1.
///
/// Phases live on `Z_n` with `n = |l|`, or `n = 2g` when `l = 0`, and one seed
/// fixes each of the `g` cosets of the constraint lattice. The returned period
/// is `n`.
pub fn construct_half_rate_pattern(nc: &NormalizedChannel, seeds: &[Phase]) -> Result<PeriodicPattern> {
    let sums = CycleSums::new(nc)?;
    if !sums.achievable() {
        return Err(domain("channel does not admit a half-rate pattern"));
    }
    let g = sums.gcd_exponent() as usize;
    if seeds.len() != g {
        return Err(domain(format!("expected {g} seed phases, got {}", seeds.len())));
    }
    let n = if sums.l != 0 { sums.l.unsigned_abs() as usize } else { 2 * g };
    let ni = n as i64;
    let md = |x: i64| x.rem_euclid(ni) as usize;

    let mut phase: Vec<Option<Phase>> = vec![None; n];
    let mut queue = VecDeque::new();
    for (c, &s) in seeds.iter().enumerate() {
        if let Some(prev) = phase[c] {
            if prev != s {
                return Err(Error::Internal(format!("seed {c} lies in the coset of an earlier seed")));
            }
            continue;
        }
        phase[c] = Some(s);
        queue.push_back(c);
        while let Some(u) = queue.pop_front() {
            let pu = phase[u].expect("queued phases are set");
            let moves = [
                (sums.l3, false),
                (-sums.l3, false),
                (sums.l2, false),
                (-sums.l2, false),
                (sums.l1, true),
                (-sums.l1, true),
            ];
            for (d, flips) in moves {
                let v = md(u as i64 + d);
                let want = if flips { pu.flip() } else { pu };
                match phase[v] {
                    None => {
                        phase[v] = Some(want);
                        queue.push_back(v);
                    }
                    Some(have) if have != want => {
                        return Err(Error::Internal(format!("phase conflict on chain {v}")));
                    }
                    _ => {}
                }
            }
        }
    }
    let phase: Vec<Phase> = phase
        .into_iter()
        .enumerate()
        .map(|(c, p)| p.ok_or_else(|| Error::Internal(format!("chain {c} left without a phase"))))
        .collect::<Result<_>>()?;

    let p = |i: usize, j: usize| nc.lp(i - 1, j - 1);
    let o3 = p(1, 3) + p(3, 1) + p(2, 3);
    let o4 = o3 + p(1, 2);
    let mut slots = vec![Vec::new(); 3];
    for t in 1..=ni {
        if phase[md(t - o4)] == Phase::In {
            slots[0].push(t as usize);
        }
        if phase[md(t - o3)] == Phase::Out {
            slots[1].push(t as usize);
        }
        if phase[md(t)] == Phase::In {
            slots[2].push(t as usize);
        }
    }
    Ok(PeriodicPattern { period: n, slots })
}

/// All `2^g` seed vectors, `I` before `O` lexicographically.
pub fn all_seed_vectors(g: usize) -> Result<Vec<Vec<Phase>>> {
    if g > 20 {
        return Err(crate::error::size(format!("2^{g} seed vectors is too many to enumerate")));
    }
    Ok((0..1usize << g)
        .map(|m| {
            (0..g)
                .map(|b| if m >> (g - 1 - b) & 1 == 0 { Phase::In } else { Phase::Out })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleRecord {
    /// Users visited, starting from the smallest; the walk closes back.
    pub users: Vec<usize>,
    pub length: i64,
    pub valuation: Valuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Claim1Report {
    pub consistent: bool,
    /// Smallest valuation among odd cycles; `None` when there are none.
    pub odd_valuation: Option<Valuation>,
    pub cycles_checked: usize,
    pub violations: Vec<CycleRecord>,
}

/// Checks the cycle-valuation criterion over simple cycles of the complete
/// user digraph with at most `max_len` edges. Without odd cycles (two users)
/// the criterion holds vacuously.
pub fn claim1_check(nc: &NormalizedChannel, max_len: usize) -> Result<Claim1Report> {
    if max_len < 2 {
        return Err(domain("max_len must be at least 2"));
    }
    let k = nc.users();
    let mut cycles = Vec::new();
    let mut path = Vec::new();
    for start in 0..k {
        path.push(start);
        simple_cycles(nc, start, max_len.min(k), &mut path, &mut cycles);
        path.pop();
    }
    let odd_valuation = cycles.iter().filter(|c| c.users.len() % 2 == 1).map(|c| c.valuation).min();
    let violations: Vec<CycleRecord> = match odd_valuation {
        None => Vec::new(),
        Some(v) => cycles
            .iter()
            .filter(|c| if c.users.len() % 2 == 1 { c.valuation != v } else { c.valuation <= v })
            .cloned()
            .collect(),
    };
    Ok(Claim1Report {
        consistent: violations.is_empty(),
        odd_valuation,
        cycles_checked: cycles.len(),
        violations,
    })
}

fn simple_cycles(nc: &NormalizedChannel, start: usize, max_len: usize, path: &mut Vec<usize>, out: &mut Vec<CycleRecord>) {
    let u = *path.last().expect("non-empty path");
    for v in start..nc.users() {
        if v == u {
            continue;
        }
        if v == start {
            if path.len() >= 2 {
                let length: i64 = (0..path.len()).map(|e| nc.lp(path[e], path[(e + 1) % path.len()])).sum();
                out.push(CycleRecord {
                    users: path.clone(),
                    length,
                    valuation: two_adic_valuation(length),
                });
            }
        } else if path.len() < max_len && !path.contains(&v) {
            path.push(v);
            simple_cycles(nc, start, max_len, path, out);
            path.pop();
        }
    }
}

/// Both sides of the gcd characterisation for the quadruple
/// `(l_1, l_2, l_3, l)`: `(gcd test, valuation test)`.
pub fn lemma6_sides(l1: i64, l2: i64, l3: i64, l: i64) -> (bool, bool) {
    let g = |a: i64| [a, l2, l3, l].iter().fold(0u64, |acc, &x| acc.gcd(&x.unsigned_abs()));
    let gcd_side = g(l1) != g(2 * l1);
    let s = CycleSums::from_sums(l, l1, l2, l3);
    (gcd_side, s.achievable())
}

/// One channel of an exhaustive three-user scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// `l'_21, l'_31, l'_12, l'_32, l'_13, l'_23`
    pub lp: [i64; 6],
    pub sums: CycleSums,
    pub achievable: bool,
    pub gcd_exponent: Option<u64>,
    #[serde(serialize_with = "ser_ratio")]
    pub rate: Ratio<i64>,
}

fn ser_ratio<S: Serializer>(r: &Ratio<i64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

/// Builds the three-user channel with the given cross delays in sweep order.
pub fn channel_from_tuple(lp: [i64; 6]) -> NormalizedChannel {
    let [l21, l31, l12, l32, l13, l23] = lp;
    NormalizedChannel::uniform(vec![vec![0, l12, l13], vec![l21, 0, l23], vec![l31, l32, 0]]).expect("zero diagonal")
}

/// Every tuple in `{-range..=range}^6`, lexicographic order.
pub fn sweep_tuples(range: i64) -> Vec<[i64; 6]> {
    let side = (2 * range + 1) as usize;
    let total = side.pow(6);
    (0..total)
        .map(|mut idx| {
            let mut t = [0i64; 6];
            for slot in t.iter_mut().rev() {
                *slot = (idx % side) as i64 - range;
                idx /= side;
            }
            t
        })
        .collect()
}

pub fn sweep_row(lp: [i64; 6]) -> Result<SweepRow> {
    let nc = channel_from_tuple(lp);
    let sums = CycleSums::new(&nc)?;
    let ir = dp::independence_rate(&nc, Weights::Uniform)?;
    let achievable = sums.achievable();
    Ok(SweepRow {
        lp,
        sums,
        achievable,
        gcd_exponent: achievable.then(|| sums.gcd_exponent()),
        rate: ir.exact.expect("uniform weights give an exact rate"),
    })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "l21", "l31", "l12", "l32", "l13", "l23", "l", "l1", "l2", "l3", "gamma", "gamma1", "gamma2", "gamma3",
        "achievable", "gcd_exponent", "ir",
    ])
    .expect("in-memory write");
    for r in rows {
        let s = &r.sums;
        let mut rec: Vec<String> = r.lp.iter().map(i64::to_string).collect();
        rec.extend([s.l, s.l1, s.l2, s.l3].iter().map(i64::to_string));
        rec.extend([s.gamma, s.gamma1, s.gamma2, s.gamma3].iter().map(Valuation::to_string));
        rec.push(r.achievable.to_string());
        rec.push(r.gcd_exponent.map(|g| g.to_string()).unwrap_or_default());
        rec.push(format!("{}/{}", r.rate.numer(), r.rate.denom()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::InterferenceGraph;
    use crate::presets;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn valuations() {
        assert_eq!(two_adic_valuation(0), Valuation::Infinite);
        assert_eq!(two_adic_valuation(1), Valuation::Finite(0));
        assert_eq!(two_adic_valuation(12), Valuation::Finite(2));
        assert_eq!(two_adic_valuation(-8), Valuation::Finite(3));
        assert!(Valuation::Finite(40) < Valuation::Infinite);
        assert!(!(Valuation::Infinite < Valuation::Infinite));
    }

    #[test]
    fn reference_channel_verdict() {
        let v = theorem3_check(&presets::half_rate_three_user()).unwrap();
        assert_eq!((v.sums.l, v.sums.l1, v.sums.l2, v.sums.l3), (2, 1, 2, 2));
        assert_eq!(
            (v.sums.gamma, v.sums.gamma1, v.sums.gamma2, v.sums.gamma3),
            (Valuation::Finite(1), Valuation::Finite(0), Valuation::Finite(1), Valuation::Finite(1))
        );
        assert!(v.achievable);
        assert_eq!(v.pattern_count(), Some(2));
    }

    #[test]
    fn zero_channel_not_achievable() {
        let v = theorem3_check(&NormalizedChannel::uniform(vec![vec![0; 3]; 3]).unwrap()).unwrap();
        assert!(!v.achievable);
        assert!(v.witness.is_none());
        assert!(theorem3_check(&NormalizedChannel::uniform(vec![vec![0; 2]; 2]).unwrap()).is_err());
    }

    #[test]
    fn l_dividing_l1_not_achievable() {
        // l = 2, l1 = 2: l | l1
        let nc = channel_from_tuple([2, 0, 0, 0, 0, 0]);
        let s = CycleSums::new(&nc).unwrap();
        assert_eq!(s.l1 % s.l, 0);
        assert!(!s.achievable());
    }

    #[test]
    fn seeds_give_pattern_and_complement() {
        let nc = presets::half_rate_three_user();
        let a = construct_half_rate_pattern(&nc, &[Phase::In]).unwrap();
        let b = construct_half_rate_pattern(&nc, &[Phase::Out]).unwrap();
        assert_eq!(a.period, 2);
        for u in 0..3 {
            let sa: BTreeSet<_> = a.slots[u].iter().collect();
            let sb: BTreeSet<_> = b.slots[u].iter().collect();
            assert!(sa.is_disjoint(&sb));
            assert_eq!(sa.len() + sb.len(), a.period);
        }
        for p in [&a, &b] {
            let unrolled = p.unroll(4);
            assert!(InterferenceGraph::build(&nc, unrolled.horizon()).unwrap().is_feasible(&unrolled).unwrap());
        }
        assert!(construct_half_rate_pattern(&nc, &[]).is_err());
        let dead = NormalizedChannel::uniform(vec![vec![0; 3]; 3]).unwrap();
        assert!(construct_half_rate_pattern(&dead, &[]).is_err());
    }

    /// Counts half-rate patterns of period `n` by brute force on the
    /// cyclic conflict graph.
    fn cyclic_half_rate_count(nc: &NormalizedChannel, n: usize) -> usize {
        let ni = n as i64;
        let bit = |u: usize, t: i64| u * n + t.rem_euclid(ni) as usize;
        let mut conflicts = Vec::new();
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                for t in 0..ni {
                    conflicts.push((bit(j, t), bit(i, t + nc.lp(i, j))));
                }
            }
        }
        (0u64..1 << (3 * n))
            .filter(|&m| m.count_ones() as usize * 2 == 3 * n)
            .filter(|&m| conflicts.iter().all(|&(a, b)| m >> a & 1 == 0 || m >> b & 1 == 0))
            .count()
    }

    #[test]
    fn constructed_patterns_match_cyclic_enumeration() {
        let mut checked = 0;
        for lp in sweep_tuples(2) {
            let nc = channel_from_tuple(lp);
            let s = CycleSums::new(&nc).unwrap();
            if !s.achievable() || s.l == 0 || s.l.abs() > 6 {
                continue;
            }
            checked += 1;
            if checked % 40 != 0 {
                continue;
            }
            let n = s.l.unsigned_abs() as usize;
            let g = s.gcd_exponent() as usize;
            let mut distinct = BTreeSet::new();
            for seeds in all_seed_vectors(g).unwrap() {
                let p = construct_half_rate_pattern(&nc, &seeds).unwrap();
                for u in 0..3 {
                    assert_eq!(p.density(u), Ratio::new(1, 2));
                }
                let un = p.unroll(4);
                assert!(InterferenceGraph::build(&nc, un.horizon()).unwrap().is_feasible(&un).unwrap());
                distinct.insert(p.slots.clone());
            }
            assert_eq!(distinct.len(), 1 << g);
            assert_eq!(cyclic_half_rate_count(&nc, n), 1 << g, "channel {lp:?}");
        }
        assert!(checked > 0);
    }

    #[test]
    fn zero_length_sum_uses_cycle_graphs() {
        // l = 0 with l1 = 1: phases live on Z_{2g}
        let nc = channel_from_tuple([0, 1, 0, 0, -1, 0]);
        let s = CycleSums::new(&nc).unwrap();
        let (l, l1) = (s.l, s.l1);
        if s.achievable() {
            let g = s.gcd_exponent() as usize;
            let p = construct_half_rate_pattern(&nc, &vec![Phase::In; g]).unwrap();
            assert_eq!(p.period, 2 * g);
            let un = p.unroll(6);
            assert!(InterferenceGraph::build(&nc, un.horizon()).unwrap().is_feasible(&un).unwrap());
        } else {
            panic!("expected an achievable l = 0 channel, got l={l}, l1={l1}");
        }
    }

    #[test]
    fn odd_cycle_cases() {
        let r = claim1_check(&presets::half_rate_three_user(), 6).unwrap();
        assert!(r.consistent);
        assert_eq!(r.odd_valuation, Some(Valuation::Finite(0)));
        assert_eq!(r.cycles_checked, 5);
        for k in 2..6 {
            let r = claim1_check(&NormalizedChannel::uniform(vec![vec![0; k]; k]).unwrap(), 2 * k).unwrap();
            assert_eq!(r.consistent, k == 2, "k = {k}");
        }
        assert!(claim1_check(&presets::half_rate_three_user(), 1).is_err());
    }

    #[test]
    fn odd_cycle_criterion_agrees_on_scan() {
        for lp in sweep_tuples(2) {
            let nc = channel_from_tuple(lp);
            let c = claim1_check(&nc, 6).unwrap().consistent;
            assert_eq!(c, CycleSums::new(&nc).unwrap().achievable(), "{lp:?}");
        }
    }

    #[test]
    fn sweep_csv_header_and_row() {
        let rows = vec![sweep_row([0, 1, 2, 0, 1, -2]).unwrap()];
        let csv = sweep_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("l21,l31,l12"));
        assert_eq!(lines[1], "0,1,2,0,1,-2,2,1,2,2,1,0,1,1,true,1,3/2");
        assert_eq!(sweep_tuples(1).len(), 729);
    }

    proptest! {
        #[test]
        fn valuation_is_additive(a in -1_000_000i64..1_000_000, b in -1_000_000i64..1_000_000) {
            prop_assume!(a != 0 && b != 0);
            let (Valuation::Finite(x), Valuation::Finite(y), Valuation::Finite(z)) =
                (two_adic_valuation(a), two_adic_valuation(b), two_adic_valuation(a * b)) else { unreachable!() };
            prop_assert_eq!(z, x + y);
        }

        #[test]
        fn gcd_and_valuation_sides_agree(l1 in -64i64..64, l2 in -64i64..64, l3 in -64i64..64, l in -64i64..64) {
            let (a, b) = lemma6_sides(l1, l2, l3, l);
            prop_assert_eq!(a, b);
        }
    }
}
