//! Cyclic-prefix OFDM view of the three-user alignment scheme, and the
//! rank-collapse experiment for more users.
//!
//! Conventions: `F[k][m] = e^{-j 2 pi k m / M} / sqrt(M)`, the unitary DFT,
//! and `Z = diag(e^{-j 2 pi k / M})`. A cyclic delay by `d` samples becomes
//! `Z^d` in the frequency domain and `Z^d F[:, m] = F[:, m + d]`, so every
//! precoder column is a DFT column and its index is the time slot the
//! corresponding data symbol occupies.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::channel::ChannelInstance;
use crate::error::{domain, size, Error, Result};
use crate::seed;

/// Cross-block Gram norms below this count as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;
/// Column residual tolerance for matching precoder and DFT columns.
pub const PERMUTATION_TOL: f64 = 1e-9;

type Diag = DVector<Complex64>;

/// Diagonal of `Z^e` for block length `m`.
pub fn z_power(m: usize, e: i64) -> Diag {
    let r = e.rem_euclid(m as i64);
    DVector::from_fn(m, |k, _| Complex64::from_polar(1.0, -2.0 * PI * ((k as i64 * r) % m as i64) as f64 / m as f64))
}

pub fn dft_matrix(m: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (m as f64).sqrt();
    DMatrix::from_fn(m, m, |k, c| {
        Complex64::from_polar(s, -2.0 * PI * ((k * c) % m) as f64 / m as f64)
    })
}

pub fn diag_matrix(d: &Diag) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(d)
}

/// `(1/sqrt(M)) [w, Z^l w, ..., Z^{l(n-1)} w]` with `w` all ones.
pub fn base_precoder(m: usize, n: usize, l: i64) -> DMatrix<Complex64> {
    let s = 1.0 / (m as f64).sqrt();
    let mut v = DMatrix::zeros(m, n);
    for c in 0..n {
        let col = z_power(m, c as i64 * l) * Complex64::new(s, 0.0);
        v.set_column(c, &col);
    }
    v
}

/// `l = l12 - l21 + l23 - l32 + l31 - l13` (one-based), the exponent of the
/// loop product of normalized links.
pub fn loop_exponent(ch: &ChannelInstance) -> i64 {
    let d = |i: usize, j: usize| ch.delay(i - 1, j - 1);
    d(1, 2) - d(2, 1) + d(2, 3) - d(3, 2) + d(3, 1) - d(1, 3)
}

/// Transmit delays `(d_1, d_2, d_3)` before reduction.
pub fn transmit_delays(ch: &ChannelInstance) -> [i64; 3] {
    let d = |i: usize, j: usize| ch.delay(i - 1, j - 1);
    let l = loop_exponent(ch);
    [l + d(3, 2) - d(3, 1) + l, l, d(1, 2) - d(1, 3)]
}

/// First slot of the aligned interference at each receiver, unreduced:
/// `s_1 = l12`, `s_2 = l12 - l13 + l23`, `s_3 = l + l32`.
pub fn interference_anchors(ch: &ChannelInstance) -> [i64; 3] {
    let d = |i: usize, j: usize| ch.delay(i - 1, j - 1);
    [d(1, 2), d(1, 2) - d(1, 3) + d(2, 3), loop_exponent(ch) + d(3, 2)]
}

#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub m: usize,
    pub n: usize,
    pub l: i64,
    /// `d_j mod M`
    pub delays: [usize; 3],
    pub f: DMatrix<Complex64>,
    /// Diagonals of `H_ij`, `[rx][tx]`.
    pub h: Vec<Vec<Diag>>,
    /// Diagonals of `H_ij` with gain and carrier phase removed.
    pub h_bar: Vec<Vec<Diag>>,
    pub t_mat: Diag,
    pub gamma: [Diag; 3],
    pub v: DMatrix<Complex64>,
    pub v_user: [DMatrix<Complex64>; 3],
    pub cp_len: usize,
}

pub fn build_precoders(ch: &ChannelInstance, m: usize) -> Result<PrecoderSet> {
    if ch.users() != 3 {
        return Err(domain(format!("three users required, got {}", ch.users())));
    }
    if m % 2 == 0 {
        return Err(domain(format!("block length M must be odd, got {m}")));
    }
    let l_max = ch.max_delay() as usize;
    if m <= l_max {
        return Err(domain(format!("block length M = {m} must exceed the largest delay {l_max}")));
    }
    let l = loop_exponent(ch);
    if l.rem_euclid(m as i64) == 0 {
        return Err(Error::Degenerate(format!("loop exponent l = {l} is 0 mod M = {m}")));
    }
    let n = (m - 1) / 2;
    let h_bar: Vec<Vec<Diag>> = (0..3).map(|i| (0..3).map(|j| z_power(m, ch.delay(i, j))).collect()).collect();
    let h: Vec<Vec<Diag>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| {
                    let s = ch.gain(i, j) * Complex64::from_polar(1.0, -2.0 * PI * ch.carrier_phase(i, j));
                    &h_bar[i][j] * s
                })
                .collect()
        })
        .collect();
    let hb = |i: usize, j: usize| &h_bar[i - 1][j - 1];
    let inv = |d: &Diag| d.map(|x| x.inv());
    let t_mat = hb(1, 2)
        .component_mul(&inv(hb(2, 1)))
        .component_mul(hb(2, 3))
        .component_mul(&inv(hb(3, 2)))
        .component_mul(hb(3, 1))
        .component_mul(&inv(hb(1, 3)));
    let g1 = inv(hb(3, 1)).component_mul(hb(3, 2)).component_mul(&t_mat).component_mul(&t_mat);
    let g2 = t_mat.clone();
    let g3 = inv(hb(1, 3)).component_mul(hb(1, 2));
    let s = 1.0 / (m as f64).sqrt();
    let mut v = DMatrix::zeros(m, n);
    let mut col = DVector::from_element(m, Complex64::new(s, 0.0));
    for c in 0..n {
        v.set_column(c, &col);
        col = col.component_mul(&t_mat);
    }
    let scale = |g: &Diag| DMatrix::from_fn(m, n, |r, c| g[r] * v[(r, c)]);
    let v_user = [scale(&g1), scale(&g2), scale(&g3)];
    let raw = transmit_delays(ch);
    let delays = raw.map(|d| d.rem_euclid(m as i64) as usize);
    Ok(PrecoderSet {
        m,
        n,
        l,
        delays,
        f: dft_matrix(m),
        h,
        h_bar,
        t_mat,
        gamma: [g1, g2, g3],
        v,
        v_user,
        cp_len: l_max,
    })
}

/// Smallest prime above `floor` that exceeds every delay and leaves the loop
/// exponent nonzero. Delays below a prime `M` never divide it except for
/// the trivial divisor 1.
pub fn choose_block_length(ch: &ChannelInstance, floor: usize) -> Result<usize> {
    let l = loop_exponent(ch);
    if l == 0 {
        return Err(Error::Degenerate("loop exponent l = 0 for every block length".into()));
    }
    let mut m = floor.max(ch.max_delay() as usize) + 1;
    loop {
        if m > 2 && is_prime(m) && l.rem_euclid(m as i64) != 0 {
            return Ok(m);
        }
        m += 1;
    }
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum PermutationReport {
    Valid {
        /// `map[c]` is the DFT column equal to precoder column `c`.
        map: Vec<usize>,
        max_residual: f64,
    },
    Failed {
        column: usize,
        reason: String,
    },
}

impl PermutationReport {
    pub fn is_valid(&self) -> bool {
        matches!(self, PermutationReport::Valid { .. })
    }
}

pub fn permutation_check(ps: &PrecoderSet) -> PermutationReport {
    permutation_check_matrix(&ps.v)
}

/// Matches each column of `v` (with `M` rows) to a distinct DFT column.
pub fn permutation_check_matrix(v: &DMatrix<Complex64>) -> PermutationReport {
    let m = v.nrows();
    let f = dft_matrix(m);
    let mut used = BTreeMap::new();
    let mut map = Vec::with_capacity(v.ncols());
    let mut max_residual: f64 = 0.0;
    for c in 0..v.ncols() {
        let col = v.column(c);
        let hit = (0..m)
            .map(|k| (k, (col - f.column(k)).norm()))
            .find(|&(_, r)| r <= PERMUTATION_TOL);
        match hit {
            None => {
                return PermutationReport::Failed {
                    column: c,
                    reason: "no DFT column within tolerance".into(),
                }
            }
            Some((k, r)) => {
                if let Some(prev) = used.insert(k, c) {
                    return PermutationReport::Failed {
                        column: c,
                        reason: format!("repeats DFT column {k} already matched by column {prev}"),
                    };
                }
                max_residual = max_residual.max(r);
                map.push(k);
            }
        }
    }
    PermutationReport::Valid { map, max_residual }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserSlots {
    pub tx: usize,
    /// slot of symbol `k`, `(k l + d_j) mod M`
    pub slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arrival {
    pub rx: usize,
    pub tx: usize,
    /// slot of symbol `k` at the receiver before wrapping, `slot_k + l_ij`
    pub slots: Vec<i64>,
    pub wrapped: Vec<usize>,
}

/// Time-slot view of one OFDM block; users are one-based in the
/// serialized form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotSchedule {
    #[serde(rename = "M")]
    pub m: usize,
    pub n: usize,
    pub l: i64,
    pub cp_len: usize,
    pub users: Vec<UserSlots>,
    pub arrivals: Vec<Arrival>,
}

pub fn build_schedule(ch: &ChannelInstance, ps: &PrecoderSet) -> SlotSchedule {
    let m = ps.m as i64;
    let users: Vec<UserSlots> = (0..3)
        .map(|j| UserSlots {
            tx: j + 1,
            slots: (0..ps.n as i64).map(|k| (k * ps.l + ps.delays[j] as i64).rem_euclid(m) as usize).collect(),
        })
        .collect();
    let mut arrivals = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            let slots: Vec<i64> = users[j].slots.iter().map(|&s| s as i64 + ch.delay(i, j)).collect();
            let wrapped = slots.iter().map(|&s| s.rem_euclid(m) as usize).collect();
            arrivals.push(Arrival {
                rx: i + 1,
                tx: j + 1,
                slots,
                wrapped,
            });
        }
    }
    SlotSchedule {
        m: ps.m,
        n: ps.n,
        l: ps.l,
        cp_len: ps.cp_len,
        users,
        arrivals,
    }
}

impl SlotSchedule {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Time-domain support of `F* Gamma_j F pi e_k`, the samples that carry
/// data symbol `k` of user `j`.
pub fn encoded_support(ps: &PrecoderSet, user: usize, k: usize) -> Vec<usize> {
    let x = ps.f.adjoint() * ps.v_user[user].column(k);
    (0..ps.m).filter(|&t| x[t].norm() > 1e-9).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityReport {
    /// `d_i + l_ii = s_i - n l (mod M)` per receiver.
    pub congruence: [bool; 3],
    /// `||(H_ii V_i)* [H_ij V_j]_{j != i}||_F / (|h_ii| max |h_ij|)`.
    pub gram_cross_norm: [f64; 3],
    pub orthogonal: bool,
    pub numeric_agrees: bool,
}

/// Tests whether the data subspace is orthogonal to interference at every
/// receiver.
///
/// With `l` invertible mod `M`, the interference at receiver `i` fills the
/// `n + 1` DFT columns `s_i + c l` for `c = 0..=n` and the data the `n`
/// columns `d_i + l_ii + c l`. Both runs together tile `Z_M`, so they are
/// disjoint exactly when the data run starts right after the interference
/// run, i.e. `d_i + l_ii = s_i + (n+1) l = s_i - n l (mod M)`.
pub fn orthogonality_check(ch: &ChannelInstance, ps: &PrecoderSet) -> OrthogonalityReport {
    let m = ps.m as i64;
    let anchors = interference_anchors(ch);
    let mut congruence = [false; 3];
    let mut gram = [0.0; 3];
    for i in 0..3 {
        let lhs = (ps.delays[i] as i64 + ch.delay(i, i)).rem_euclid(m);
        let rhs = (anchors[i] - ps.n as i64 * ps.l).rem_euclid(m);
        congruence[i] = lhs == rhs;
        let data = link_image(ps, i, i);
        let mut worst = 0.0f64;
        let mut norm = 0.0;
        for j in (0..3).filter(|&j| j != i) {
            let g = data.adjoint() * link_image(ps, i, j);
            norm += g.norm_squared();
            worst = worst.max(ch.gain(i, j).norm());
        }
        gram[i] = norm.sqrt() / (ch.gain(i, i).norm() * worst);
    }
    let orthogonal = congruence.iter().all(|&c| c);
    let numeric = gram.iter().all(|&g| g <= ORTHOGONALITY_TOL);
    OrthogonalityReport {
        congruence,
        gram_cross_norm: gram,
        orthogonal,
        numeric_agrees: orthogonal == numeric,
    }
}

/// `H_ij V_j`.
fn link_image(ps: &PrecoderSet, rx: usize, tx: usize) -> DMatrix<Complex64> {
    let d = &ps.h[rx][tx];
    let v = &ps.v_user[tx];
    DMatrix::from_fn(ps.m, ps.n, |r, c| d[r] * v[(r, c)])
}

/// Noiseless block transmission: precode, inverse DFT, cyclic prefix,
/// delayed superposition, prefix removal and DFT. Returns `y_i` per receiver.
pub fn transmit(ch: &ChannelInstance, ps: &PrecoderSet, data: &[DVector<Complex64>; 3]) -> Result<Vec<DVector<Complex64>>> {
    let (m, cp) = (ps.m, ps.cp_len);
    for (j, x) in data.iter().enumerate() {
        if x.len() != ps.n {
            return Err(domain(format!("user {} needs {} data symbols, got {}", j + 1, ps.n, x.len())));
        }
    }
    let fa = ps.f.adjoint();
    let sent: Vec<Vec<Complex64>> = (0..3)
        .map(|j| {
            let time = &fa * (&ps.v_user[j] * &data[j]);
            let mut s: Vec<Complex64> = time.iter().skip(m - cp).copied().collect();
            s.extend(time.iter().copied());
            s
        })
        .collect();
    let mut out = Vec::with_capacity(3);
    for i in 0..3 {
        let mut rx = vec![Complex64::new(0.0, 0.0); m + cp];
        for (j, s) in sent.iter().enumerate() {
            let g = ch.gain(i, j) * Complex64::from_polar(1.0, -2.0 * PI * ch.carrier_phase(i, j));
            let d = ch.delay(i, j) as usize;
            for t in d..m + cp {
                rx[t] += g * s[t - d];
            }
        }
        let y_time = DVector::from_iterator(m, rx[cp..].iter().copied());
        out.push(&ps.f * y_time);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum DecodeOutcome {
    Decoded {
        #[serde(serialize_with = "ser_cvec")]
        symbols: DVector<Complex64>,
    },
    /// The projected data matrix is rank deficient.
    Undefined { rx: usize, rank: usize, needed: usize },
}

fn ser_cvec<S: serde::Serializer>(v: &DVector<Complex64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v.iter() {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Interference slots at receiver `rx` as DFT column indices.
pub fn interference_columns(ch: &ChannelInstance, ps: &PrecoderSet, rx: usize) -> BTreeSet<usize> {
    let m = ps.m as i64;
    let mut set = BTreeSet::new();
    for j in (0..3).filter(|&j| j != rx) {
        for c in 0..ps.n as i64 {
            set.insert((c * ps.l + ps.delays[j] as i64 + ch.delay(rx, j)).rem_euclid(m) as usize);
        }
    }
    set
}

/// Zero-forcing decoder: project onto the DFT columns free of
/// interference, then invert the projected data matrix.
pub fn zf_decode(ch: &ChannelInstance, ps: &PrecoderSet, y: &DVector<Complex64>, rx: usize) -> Result<DecodeOutcome> {
    if rx >= 3 {
        return Err(domain(format!("receiver index {rx} out of range")));
    }
    if y.len() != ps.m {
        return Err(domain(format!("received block must have {} samples", ps.m)));
    }
    let blocked = interference_columns(ch, ps, rx);
    let free: Vec<usize> = (0..ps.m).filter(|c| !blocked.contains(c)).collect();
    let uc = DMatrix::from_fn(ps.m, free.len(), |r, c| ps.f[(r, free[c])]);
    let a = uc.adjoint() * link_image(ps, rx, rx);
    let rank = numeric_rank(&a);
    if rank < ps.n {
        return Ok(DecodeOutcome::Undefined { rx, rank, needed: ps.n });
    }
    let b = uc.adjoint() * y;
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-12).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(DecodeOutcome::Decoded { symbols: x })
}

/// Singular values above `max(rows, cols) * eps * sigma_max` count.
pub fn numeric_rank(a: &DMatrix<Complex64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Real and imaginary parts interleaved, one matrix row per line.
pub fn matrix_csv(a: &DMatrix<Complex64>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in 0..a.nrows() {
        let rec: Vec<String> = (0..a.ncols()).flat_map(|c| [a[(r, c)].re.to_string(), a[(r, c)].im.to_string()]).collect();
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Column cap applied when no explicit cap is configured.
pub const DEFAULT_MAX_COLUMNS: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RankConfig {
    #[serde(rename = "K")]
    pub users: usize,
    pub n: usize,
    pub taps: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    /// Larger column sets are sampled down to this many distinct columns;
    /// without a cap they are rejected beyond [`DEFAULT_MAX_COLUMNS`].
    #[serde(default)]
    pub max_columns: Option<usize>,
    /// Each link gets a pure delay drawn from `0..delay_spread` on top of
    /// its taps; 0 disables it.
    #[serde(default)]
    pub delay_spread: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub total_columns: u128,
    pub columns_used: usize,
    pub rank: usize,
    /// `6 n (taps - 1) ((K-1)(K-2) - 1) + 1`
    pub bound: usize,
    pub within_bound: bool,
    /// For single-tap links, the number of distinct `Z` exponents mod `M`.
    pub distinct_exponents: Option<usize>,
    /// `bound / total_columns`
    pub dof_ratio: f64,
    pub rank_ratio: f64,
}

/// Ordered pairs `(i, j)`, one-based, `i != j` in `2..=K`, except `(2, 3)`.
pub fn column_index_pairs(users: usize) -> Vec<(usize, usize)> {
    let mut p = Vec::new();
    for i in 2..=users {
        for j in 2..=users {
            if i != j && (i, j) != (2, 3) {
                p.push((i, j));
            }
        }
    }
    p
}

/// Builds the column set `{ prod_P (H_i1 H_1j H_23)^(n-a) (H_ij H_13 H_21)^a w }`
/// from random multipath links `H_ij = Z^delta sum_t a_t Z^t` and reports
/// its numeric rank.
pub fn dof_rank_experiment(cfg: &RankConfig) -> Result<RankReport> {
    let k = cfg.users;
    if k < 4 {
        return Err(domain(format!("at least four users required, got {k}")));
    }
    if cfg.n == 0 || cfg.taps == 0 || cfg.m == 0 {
        return Err(domain("n, taps and M must be positive"));
    }
    let pairs = column_index_pairs(k);
    let p = pairs.len();
    let bound = 6 * cfg.n * (cfg.taps - 1) * p + 1;
    if cfg.m <= bound - 1 {
        return Err(domain(format!("M = {} must exceed 6 n (taps-1) |P| = {}", cfg.m, bound - 1)));
    }
    let total = (cfg.n as u128).checked_pow(p as u32).ok_or_else(|| size("column count overflows"))?;
    let cap = match cfg.max_columns {
        Some(c) => c,
        None if total > DEFAULT_MAX_COLUMNS as u128 => {
            return Err(size(format!(
                "{total} columns exceed the cap of {DEFAULT_MAX_COLUMNS}; set max_columns to sample"
            )))
        }
        None => DEFAULT_MAX_COLUMNS,
    };
    let mut rng = seed::rng_for(cfg.seed, &[]);
    let m = cfg.m;
    // random multipath links, [rx][tx], one-based access helper below
    let mut links = vec![vec![DVector::from_element(m, Complex64::new(0.0, 0.0)); k]; k];
    let mut shift = vec![vec![0i64; k]; k];
    for i in 0..k {
        for j in 0..k {
            let delta = if cfg.delay_spread > 0 { rng.random_range(0..cfg.delay_spread) as i64 } else { 0 };
            shift[i][j] = delta;
            let mut hsum = DVector::from_element(m, Complex64::new(0.0, 0.0));
            for t in 0..cfg.taps {
                let a = Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
                hsum += z_power(m, t as i64) * a;
            }
            links[i][j] = z_power(m, delta).component_mul(&hsum);
        }
    }
    let hl = |i: usize, j: usize| &links[i - 1][j - 1];
    let dl = |i: usize, j: usize| shift[i - 1][j - 1];
    let mut pow_a = Vec::with_capacity(p);
    let mut pow_b = Vec::with_capacity(p);
    let mut exp_a = Vec::with_capacity(p);
    let mut exp_b = Vec::with_capacity(p);
    for &(i, j) in &pairs {
        let a = hl(i, 1).component_mul(hl(1, j)).component_mul(hl(2, 3));
        let b = hl(i, j).component_mul(hl(1, 3)).component_mul(hl(2, 1));
        exp_a.push(dl(i, 1) + dl(1, j) + dl(2, 3));
        exp_b.push(dl(i, j) + dl(1, 3) + dl(2, 1));
        pow_a.push(powers(&a, cfg.n));
        pow_b.push(powers(&b, cfg.n));
    }
    let indices: Vec<u128> = if total > cap as u128 {
        sample_distinct(&mut rng, total, cap)
    } else {
        (0..total).collect()
    };
    let mut c = DMatrix::zeros(m, indices.len());
    let mut exponents = BTreeSet::new();
    for (col, &idx) in indices.iter().enumerate() {
        let mut rest = idx;
        let mut v = DVector::from_element(m, Complex64::new(1.0, 0.0));
        let mut e = 0i64;
        for q in 0..p {
            let alpha = (rest % cfg.n as u128) as usize;
            rest /= cfg.n as u128;
            v = v.component_mul(&pow_a[q][cfg.n - alpha]).component_mul(&pow_b[q][alpha]);
            e += (cfg.n - alpha) as i64 * exp_a[q] + alpha as i64 * exp_b[q];
        }
        exponents.insert(e.rem_euclid(m as i64));
        let norm = v.norm();
        if norm > 0.0 {
            v /= Complex64::new(norm, 0.0);
        }
        c.set_column(col, &v);
    }
    let rank = rank_via_qr(&c);
    Ok(RankReport {
        total_columns: total,
        columns_used: indices.len(),
        rank,
        bound,
        within_bound: rank <= bound,
        distinct_exponents: (cfg.taps == 1).then_some(exponents.len()),
        dof_ratio: bound as f64 / total as f64,
        rank_ratio: rank as f64 / indices.len() as f64,
    })
}

fn powers(d: &Diag, n: usize) -> Vec<Diag> {
    let mut out = vec![DVector::from_element(d.len(), Complex64::new(1.0, 0.0))];
    for e in 1..=n {
        out.push(out[e - 1].component_mul(d));
    }
    out
}

fn sample_distinct<R: Rng + ?Sized>(rng: &mut R, total: u128, want: usize) -> Vec<u128> {
    let mut set = BTreeSet::new();
    while set.len() < want {
        set.insert(rng.random_range(0..total));
    }
    set.into_iter().collect()
}

/// Rank of a wide matrix from the SVD of the triangular factor of its
/// adjoint.
fn rank_via_qr(c: &DMatrix<Complex64>) -> usize {
    if c.ncols() <= c.nrows() {
        return numeric_rank(c);
    }
    let qr = c.adjoint().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = c.nrows() as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}
