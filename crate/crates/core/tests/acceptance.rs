//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Exits non-zero on failure only when `TDIA_STRICT_ACCEPTANCE` is set, so
//! the workspace test run reports a failing criterion without aborting.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;

use tdia::channel::{ChannelInstance, NormalizedChannel};
use tdia::converse::{scaling_curve, DelayBinsOfUsers};
use tdia::dp::{self, Boundary, DpStateSpace, Weights};
use tdia::gap::{self, DelayBinRule, GapExperiment, GapSchedule};
use tdia::graph::InterferenceGraph;
use tdia::numtheory;
use tdia::ofdm::{self, DecodeOutcome, RankConfig};
use tdia::{presets, seed};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = seed::rng_for(1, &[]);
    let instances = 2000;
    for n in 0..instances {
        let k = rng.random_range(2..=3usize);
        let t = rng.random_range(1..=8usize);
        let cross: Vec<Vec<i64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 0 } else { rng.random_range(-2..=2) }).collect())
            .collect();
        let nc = NormalizedChannel::uniform(cross.clone()).map_err(|e| e.to_string())?;
        let dp = dp::solve_finite(&nc, t, Boundary::Exact).map_err(|e| e.to_string())?;
        let g = InterferenceGraph::build(&nc, t).map_err(|e| e.to_string())?;
        let (_, bf) = g.brute_force_optimum(&vec![1.0; k]).map_err(|e| e.to_string())?;
        if dp.objective != bf {
            return Err(format!("instance {n}: cross {cross:?}, T={t}: dp {} vs brute force {bf}", dp.objective));
        }
    }
    Ok(format!("{instances} instances agree"))
}

fn state_count() -> Outcome {
    let s = DpStateSpace::enumerate(&presets::half_rate_three_user()).map_err(|e| e.to_string())?;
    check(s.len() == 28, "28 states".into(), format!("{} states", s.len()))
}

fn window_lengths() -> Outcome {
    let w = dp::window_lengths(&presets::staggered_three_user().normalize());
    check(w == [3, 4, 3], format!("l* = {w:?}"), format!("l* = {w:?}"))
}

fn half_rate_scan() -> Outcome {
    let half = Ratio::new(3, 2);
    let mut disagreements = 0;
    let mut above = 0;
    let tuples = numtheory::sweep_tuples(2);
    for lp in &tuples {
        let nc = numtheory::channel_from_tuple(*lp);
        let v = numtheory::theorem3_check(&nc).map_err(|e| e.to_string())?;
        let ir = dp::independence_rate(&nc, Weights::Uniform).map_err(|e| e.to_string())?;
        let r = ir.exact.ok_or("missing exact rate")?;
        if v.achievable != (r == half) {
            disagreements += 1;
        }
        if r > half {
            above += 1;
        }
    }
    check(
        disagreements == 0 && above == 0 && tuples.len() == 15625,
        format!("{} channels, 0 disagreements, IR <= 3/2 throughout", tuples.len()),
        format!("{disagreements} disagreements, {above} rates above 3/2"),
    )
}

fn pattern_count() -> Outcome {
    let nc = presets::half_rate_three_user();
    let v = numtheory::theorem3_check(&nc).map_err(|e| e.to_string())?;
    let g = v.gcd_exponent.ok_or("not achievable")? as usize;
    let seeds = numtheory::all_seed_vectors(g).map_err(|e| e.to_string())?;
    let mut pats = Vec::new();
    for s in &seeds {
        let p = numtheory::construct_half_rate_pattern(&nc, s).map_err(|e| e.to_string())?;
        let unrolled = p.unroll(4);
        let g = InterferenceGraph::build(&nc, unrolled.horizon()).map_err(|e| e.to_string())?;
        if !g.is_feasible(&unrolled).map_err(|e| e.to_string())? {
            return Err(format!("seed {s:?} gives an infeasible pattern"));
        }
        pats.push(p);
    }
    let distinct: BTreeSet<_> = pats.iter().map(|p| p.slots.clone()).collect();
    let complement = pats.len() == 2
        && pats[0].period == pats[1].period
        && (0..3).all(|u| {
            let a: BTreeSet<_> = pats[0].slots[u].iter().collect();
            let b: BTreeSet<_> = pats[1].slots[u].iter().collect();
            a.is_disjoint(&b) && a.len() + b.len() == pats[0].period
        });
    check(
        distinct.len() == 2 && complement,
        "2 patterns, complementary, feasible over 4 periods".into(),
        format!("{} distinct patterns, complementary = {complement}", distinct.len()),
    )
}

fn gcd_valuation() -> Outcome {
    let mut rng = seed::rng_for(6, &[]);
    let n = 100_000;
    for _ in 0..n {
        let mut q = [0i64; 4];
        for x in &mut q {
            // zeros appear about one time in nine
            *x = if rng.random_range(0..9) == 0 { 0 } else { rng.random_range(-64..=64) };
        }
        let (g, v) = numtheory::lemma6_sides(q[0], q[1], q[2], q[3]);
        if g != v {
            return Err(format!("counterexample (l1,l2,l3,l) = {q:?}: gcd side {g}, valuation side {v}"));
        }
    }
    Ok(format!("{n} quadruples, 0 counterexamples"))
}

fn gap_identity() -> Outcome {
    let mut rng = seed::rng_for(7, &[]);
    for t in 0..100 {
        let l = rng.random_range(60..=240usize);
        let ch = ChannelInstance::random(3, l, &mut rng).map_err(|e| e.to_string())?;
        let sched = GapSchedule::sample(&ch, 1.0, Some(3), &mut rng).map_err(|e| e.to_string())?;
        let s = &sched.s_set;
        for i in 0..3 {
            let f = gap::interference_set(&ch, s, i).len() as u64;
            let lhs = gap::clean_count_summed_over_direct_delay(&ch, s, i);
            let rhs = s.len() as u64 * (l as u64 - f);
            if lhs != rhs {
                return Err(format!("trial {t}, rx {i}: {lhs} != {rhs}"));
            }
        }
    }
    Ok("100 instances, identity exact at every receiver".into())
}

fn gap_bound() -> Outcome {
    let exp = GapExperiment {
        users: 2,
        epsilon: 1.0,
        rule: DelayBinRule::Theorem1,
        trials: 500,
        seed: 8,
        shifts: None,
    };
    let (_, s) = exp.run().map_err(|e| e.to_string())?;
    let within = s.density_residual.abs() <= 3.0 * s.density_residual_se;
    check(
        s.alignment_violations == 0 && within,
        format!(
            "L={}, A={}, 0 violations, density {:.4} vs {:.4} (residual {:.4}, se {:.4})",
            s.delay_bins, s.shifts, s.mean_density, s.mean_expected_density, s.density_residual, s.density_residual_se
        ),
        format!(
            "{} violations, density residual {:.4} with se {:.4}",
            s.alignment_violations, s.density_residual, s.density_residual_se
        ),
    )
}

fn converse_trend() -> Outcome {
    let ks = [10, 20, 30, 40];
    let l = 4;
    let (pts, _) = scaling_curve(&ks, DelayBinsOfUsers::Constant { l }, 200, 9).map_err(|e| e.to_string())?;
    let bounded = pts.iter().all(|p| p.mean_alpha <= l as f64 * (p.users as f64).ln() * 1.5);
    let mut rising = Vec::new();
    for w in pts.windows(2) {
        let noise = 3.0 * (w[0].ratio_se.powi(2) + w[1].ratio_se.powi(2)).sqrt();
        if w[1].ratio > w[0].ratio + noise {
            rising.push(format!("K={}->{}", w[0].users, w[1].users));
        }
    }
    let ratios: Vec<String> = pts.iter().map(|p| format!("{:.3}+-{:.3}", p.ratio, p.ratio_se)).collect();
    check(
        bounded && rising.is_empty(),
        format!("alpha/ln K = [{}]", ratios.join(", ")),
        format!(
            "alpha/ln K = [{}]; bounded = {bounded}; rises beyond noise at {}",
            ratios.join(", "),
            rising.join(", ")
        ),
    )
}

fn ofdm_reference() -> Outcome {
    let ch = presets::aligned_ofdm_three_user();
    let ps = ofdm::build_precoders(&ch, 13).map_err(|e| e.to_string())?;
    let sched = ofdm::build_schedule(&ch, &ps);
    let orth = ofdm::orthogonality_check(&ch, &ps);
    let mut rng = seed::rng_for(10, &[]);
    let data: [DVector<Complex64>; 3] = std::array::from_fn(|_| {
        DVector::from_fn(ps.n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    });
    let y = ofdm::transmit(&ch, &ps, &data).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        match ofdm::zf_decode(&ch, &ps, &y[i], i).map_err(|e| e.to_string())? {
            DecodeOutcome::Decoded { symbols } => worst = worst.max((&symbols - &data[i]).norm() / data[i].norm()),
            u => return Err(format!("receiver {}: {u:?}", i + 1)),
        }
    }
    let ok = ps.delays == [7, 4, 1]
        && ps.l == 4
        && ps.n == 6
        && sched.users[0].slots == [7, 11, 2, 6, 10, 1]
        && orth.orthogonal
        && worst <= 1e-9;
    let detail = format!(
        "d={:?}, l={}, n={}, slots {:?}, orthogonal {}, max relative error {worst:.2e}",
        ps.delays, ps.l, ps.n, sched.users[0].slots, orth.orthogonal
    );
    check(ok, detail.clone(), detail)
}

fn permutation() -> Outcome {
    let primes: Vec<usize> = (11..=101).filter(|&p| ofdm::is_prime(p)).collect();
    let mut rng = seed::rng_for(11, &[]);
    let mut valid = 0;
    let mut worst: f64 = 0.0;
    while valid < 50 {
        let m = primes[rng.random_range(0..primes.len())];
        let ch = ChannelInstance::random(3, m, &mut rng).map_err(|e| e.to_string())?;
        if ofdm::loop_exponent(&ch).rem_euclid(m as i64) == 0 {
            continue;
        }
        let ps = ofdm::build_precoders(&ch, m).map_err(|e| e.to_string())?;
        match ofdm::permutation_check(&ps) {
            ofdm::PermutationReport::Valid { map, max_residual } => {
                let distinct: BTreeSet<_> = map.iter().collect();
                if distinct.len() != map.len() {
                    return Err(format!("M={m}: map not injective"));
                }
                worst = worst.max(max_residual);
            }
            f => return Err(format!("M={m}: {f:?}")),
        }
        valid += 1;
    }
    let composite = ofdm::permutation_check_matrix(&ofdm::base_precoder(15, 7, 5));
    check(
        worst <= 1e-9 && !composite.is_valid(),
        format!("50 prime instances valid (max residual {worst:.1e}); M=15, l=5 rejected"),
        format!("max residual {worst:.1e}; composite report {composite:?}"),
    )
}

fn rank_collapse() -> Outcome {
    let flat = RankConfig {
        users: 4,
        n: 6,
        taps: 1,
        m: 191,
        seed: 12,
        max_columns: Some(5000),
        delay_spread: 8,
    };
    let r = ofdm::dof_rank_experiment(&flat).map_err(|e| e.to_string())?;
    if Some(r.rank) != r.distinct_exponents {
        return Err(format!("single tap: rank {} vs {:?} distinct exponents", r.rank, r.distinct_exponents));
    }
    let mut worst_rank = 0;
    let mut worst_ratio: f64 = 0.0;
    for s in 0..100 {
        let cfg = RankConfig {
            taps: 2,
            seed: s,
            delay_spread: 0,
            ..flat.clone()
        };
        let r = ofdm::dof_rank_experiment(&cfg).map_err(|e| e.to_string())?;
        if r.bound != 181 || r.total_columns != 7776 || r.columns_used != 5000 {
            return Err(format!("seed {s}: unexpected shape {r:?}"));
        }
        if !r.within_bound || r.rank_ratio > 0.05 {
            return Err(format!("seed {s}: rank {} of {} columns", r.rank, r.columns_used));
        }
        worst_rank = worst_rank.max(r.rank);
        worst_ratio = worst_ratio.max(r.rank_ratio);
    }
    Ok(format!(
        "single tap rank {} = distinct exponents; two taps: max rank {worst_rank} <= 181, max ratio {worst_ratio:.4}",
        r.rank
    ))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 12] = [
        ("oracle equivalence", Duration::from_secs(120), oracle_equivalence),
        ("state count", Duration::from_secs(1), state_count),
        ("window lengths", Duration::from_secs(1), window_lengths),
        ("half-rate test vs DP scan", Duration::from_secs(600), half_rate_scan),
        ("half-rate pattern count", Duration::from_secs(1), pattern_count),
        ("gcd vs valuation equivalence", Duration::from_secs(5), gcd_valuation),
        ("clean-slot identity", Duration::from_secs(60), gap_identity),
        ("alignment bound and density", Duration::from_secs(120), gap_bound),
        ("converse trend", Duration::from_secs(300), converse_trend),
        ("OFDM reference instance", Duration::from_secs(1), ofdm_reference),
        ("permutation property", Duration::from_secs(30), permutation),
        ("rank collapse", Duration::from_secs(300), rank_collapse),
    ];
    let mut failed = 0;
    for (n, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let over = took > *budget;
        let (tag, detail) = match (&out, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("[{tag}] {:>2} {name}: {detail} ({:.2?})", n + 1, took);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("TDIA_STRICT_ACCEPTANCE").is_some() {
        std::process::exit(1);
    }
}
