//! Generalized arithmetic progression schedules over `Z_L`.
//!
//! The progression `T` collects bounded-coefficient combinations of the raw
//! cross delays. Interleaving `A` random shifts of `T` gives the transmit set
//! `S`; receiver `i` sees interference on `F_i = U_{j != i} (S + l_ij)` and
//! keeps the slots of `S + l_ii` outside it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::{CyclicBitset, MAX_MODULUS};
use crate::channel::{expand_dpath, ChannelInstance, DPathChannel};
use crate::error::{domain, size, Result};
use crate::seed;

/// `N = K(K-1)`, the number of cross links.
pub fn cross_link_count(users: usize) -> usize {
    users * users.saturating_sub(1)
}

/// Coefficient range of the progression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientRange {
    /// Coefficients `0..N`; `n` must equal `K(K-1)`.
    Theorem1 { n: usize },
    /// Coefficients `0..c`.
    Explicit(usize),
}

/// `{ sum_{i != j} a_ij l_ij mod L : 0 <= a_ij < c }` by iterated sumsets.
pub fn build_progression(ch: &ChannelInstance, range: CoefficientRange) -> Result<CyclicBitset> {
    let k = ch.users();
    let c = match range {
        CoefficientRange::Theorem1 { n } => {
            if n != cross_link_count(k) {
                return Err(domain(format!("N must equal K(K-1) = {}, got {n}", cross_link_count(k))));
            }
            n
        }
        CoefficientRange::Explicit(c) => c,
    };
    if c == 0 {
        return Err(domain("coefficient range must be non-empty"));
    }
    let l = ch.delay_bins();
    let mut t = CyclicBitset::from_elements(l, [0])?;
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            let d = ch.delay(i, j);
            let step = CyclicBitset::from_elements(l, (0..c as i64).map(|a| a * d))?;
            t = t.sumset(&step);
        }
    }
    Ok(t)
}

/// `U_a (m_a + T)`.
pub fn interleave(t: &CyclicBitset, offsets: &[i64]) -> CyclicBitset {
    let mut s = CyclicBitset::new(t.modulus()).expect("same modulus as T");
    for &m in offsets {
        s.union_with(&t.rotated(m));
    }
    s
}

/// `floor(L / N^(N + eps))`.
pub fn shift_count(delay_bins: usize, n: usize, epsilon: f64) -> usize {
    (delay_bins as f64 / (n as f64).powf(n as f64 + epsilon)).floor() as usize
}

/// `ceil((2N)^(N + eps))`.
pub fn theorem1_delay_bins(users: usize, epsilon: f64) -> usize {
    let n = cross_link_count(users) as f64;
    (2.0 * n).powf(n + epsilon).ceil() as usize
}

#[derive(Debug, Clone)]
pub struct GapSchedule {
    pub n: usize,
    pub epsilon: f64,
    pub delay_bins: usize,
    pub shifts: usize,
    pub offsets: Vec<i64>,
    pub t_set: CyclicBitset,
    pub s_set: CyclicBitset,
}

impl GapSchedule {
    /// Samples `A` offsets uniformly. `shifts` overrides `A` from its
    /// default `floor(L / N^(N + eps))`.
    pub fn sample<R: Rng + ?Sized>(ch: &ChannelInstance, epsilon: f64, shifts: Option<usize>, rng: &mut R) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(domain("epsilon must be positive"));
        }
        let n = cross_link_count(ch.users());
        let l = ch.delay_bins();
        let a = shifts.unwrap_or_else(|| shift_count(l, n, epsilon));
        if a == 0 {
            return Err(domain(format!(
                "L = {l} gives A = floor(L / N^(N+eps)) = 0 shifts; raise L or pass an explicit shift count"
            )));
        }
        let offsets: Vec<i64> = (0..a).map(|_| rng.random_range(0..l as i64)).collect();
        Self::with_offsets(ch, epsilon, offsets)
    }

    pub fn with_offsets(ch: &ChannelInstance, epsilon: f64, offsets: Vec<i64>) -> Result<Self> {
        let n = cross_link_count(ch.users());
        let t_set = build_progression(ch, CoefficientRange::Explicit(n.max(1)))?;
        let s_set = interleave(&t_set, &offsets);
        Ok(Self {
            n,
            epsilon,
            delay_bins: ch.delay_bins(),
            shifts: offsets.len(),
            offsets,
            t_set,
            s_set,
        })
    }

    pub fn density(&self) -> f64 {
        self.s_set.len() as f64 / self.delay_bins as f64
    }

    /// `1 - (1 - |T|/L)^A`, the density expected from uniform offsets.
    pub fn expected_density(&self) -> f64 {
        1.0 - (1.0 - self.t_set.len() as f64 / self.delay_bins as f64).powi(self.shifts as i32)
    }

    /// Whether every coefficient vector gives a distinct point, `|T| = N^N`.
    pub fn distinct(&self) -> bool {
        (self.n as f64).powi(self.n as i32) == self.t_set.len() as f64
    }

    pub fn report(&self, ch: &ChannelInstance) -> CleanSlotReport {
        let counts = clean_slots(ch, &self.s_set);
        let l = self.delay_bins as f64;
        let n = self.n as f64;
        CleanSlotReport {
            interference_fraction: counts.interference.iter().map(|&f| f as f64 / l).collect(),
            clean_fraction: counts.clean.iter().map(|&c| c as f64 / l).collect(),
            alignment_bound: std::f64::consts::E * n.powf(-self.epsilon),
            union_bound: self.shifts as f64 * (n + 1.0).powf(n) / l,
            distinct: self.distinct(),
            counts,
        }
    }
}

/// `|F_i|` and `S_i = |(S + l_ii) \ F_i|` per receiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CleanSlotCounts {
    pub interference: Vec<usize>,
    pub clean: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CleanSlotReport {
    pub counts: CleanSlotCounts,
    /// `|F_i| / L`
    pub interference_fraction: Vec<f64>,
    /// `S_i / L`
    pub clean_fraction: Vec<f64>,
    /// `e N^(-eps)`
    pub alignment_bound: f64,
    /// `A (N+1)^N / L`
    pub union_bound: f64,
    pub distinct: bool,
}

pub fn interference_set(ch: &ChannelInstance, s: &CyclicBitset, rx: usize) -> CyclicBitset {
    let mut f = CyclicBitset::new(s.modulus()).expect("same modulus as S");
    for j in (0..ch.users()).filter(|&j| j != rx) {
        f.union_with(&s.rotated(ch.delay(rx, j)));
    }
    f
}

pub fn clean_slots(ch: &ChannelInstance, s: &CyclicBitset) -> CleanSlotCounts {
    let (mut interference, mut clean) = (Vec::new(), Vec::new());
    for i in 0..ch.users() {
        let f = interference_set(ch, s, i);
        interference.push(f.len());
        clean.push(s.rotated(ch.delay(i, i)).difference_len(&f));
    }
    CleanSlotCounts { interference, clean }
}

/// `sum_x |(S + x) \ F_i|` over every direct delay `x` in `Z_L`, by direct
/// evaluation. Equals `|S| (L - |F_i|)`.
pub fn clean_count_summed_over_direct_delay(ch: &ChannelInstance, s: &CyclicBitset, rx: usize) -> u64 {
    let f = interference_set(ch, s, rx);
    (0..s.modulus() as i64).map(|x| s.rotated(x).difference_len(&f) as u64).sum()
}

/// Checks `U_{j != i} (T + l_ij)` against the progression with one extra
/// coefficient value, for every receiver.
pub fn containment_holds(ch: &ChannelInstance, t: &CyclicBitset, coeff_max: usize) -> Result<bool> {
    let wider = build_progression(ch, CoefficientRange::Explicit(coeff_max + 1))?;
    Ok((0..ch.users()).all(|i| interference_set(ch, t, i).is_subset(&wider)))
}

/// Clean-slot counts of the data users after expanding a D-path channel.
/// `s` is the transmit set shared by all virtual users.
pub fn dpath_clean_slots(dch: &DPathChannel, s: &CyclicBitset) -> Result<Vec<usize>> {
    let (ch, map) = expand_dpath(dch)?;
    if s.modulus() != ch.delay_bins() {
        return Err(domain("transmit set modulus must equal L"));
    }
    let counts = clean_slots(&ch, s);
    Ok((0..dch.users()).map(|u| counts.clean[map.data_user(u)]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelayBinRule {
    /// `L = ceil((2N)^(N + eps))`
    Theorem1,
    Explicit {
        #[serde(rename = "L")]
        l: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapExperiment {
    #[serde(rename = "K")]
    pub users: usize,
    pub epsilon: f64,
    #[serde(rename = "L_rule")]
    pub rule: DelayBinRule,
    pub trials: usize,
    pub seed: u64,
    /// Overrides the default shift count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub delay_bins: usize,
    pub shifts: usize,
    pub progression_size: usize,
    pub distinct: bool,
    pub density: f64,
    pub expected_density: f64,
    /// `max_i |F_i| / L`
    pub max_interference_fraction: f64,
    pub alignment_ok: bool,
    pub union_ok: bool,
    /// mean over users of `S_i / L`
    pub clean_fraction: f64,
    /// mean over users of `|S|/L (1 - |F_i|/L)`
    pub predicted_clean_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub trials: usize,
    pub delay_bins: usize,
    pub shifts: usize,
    pub mean_clean_fraction: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `N^(-eps) (1 - e N^(-eps))`
    pub target: f64,
    /// `N^(-eps)`
    pub limit: f64,
    pub mean_density: f64,
    pub mean_expected_density: f64,
    /// mean and standard error of `density - expected_density`
    pub density_residual: f64,
    pub density_residual_se: f64,
    pub mean_predicted_clean_fraction: f64,
    pub alignment_violations: usize,
    pub union_violations: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl GapExperiment {
    pub fn delay_bins(&self) -> usize {
        match self.rule {
            DelayBinRule::Theorem1 => theorem1_delay_bins(self.users, self.epsilon),
            DelayBinRule::Explicit { l } => l,
        }
    }

    pub fn run(&self) -> Result<(Vec<TrialRow>, GapSummary)> {
        if self.users < 2 {
            return Err(domain("at least two users required"));
        }
        if self.trials == 0 {
            return Err(domain("at least one trial required"));
        }
        let l = self.delay_bins();
        if l > MAX_MODULUS {
            return Err(size(format!(
                "L = {l} exceeds the bitset cap {MAX_MODULUS}; use smaller K or epsilon"
            )));
        }
        let rows = (0..self.trials).map(|t| self.trial(t, l)).collect::<Result<Vec<_>>>()?;
        let n = cross_link_count(self.users) as f64;
        let limit = n.powf(-self.epsilon);
        let clean: Vec<f64> = rows.iter().map(|r| r.clean_fraction).collect();
        let (mean, se) = mean_se(&clean);
        let resid: Vec<f64> = rows.iter().map(|r| r.density - r.expected_density).collect();
        let (rm, rse) = mean_se(&resid);
        let avg = |f: fn(&TrialRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
        let summary = GapSummary {
            trials: self.trials,
            delay_bins: l,
            shifts: rows[0].shifts,
            mean_clean_fraction: mean,
            std_error: se,
            ci_low: mean - 1.96 * se,
            ci_high: mean + 1.96 * se,
            target: limit * (1.0 - std::f64::consts::E * limit),
            limit,
            mean_density: avg(|r| r.density),
            mean_expected_density: avg(|r| r.expected_density),
            density_residual: rm,
            density_residual_se: rse,
            mean_predicted_clean_fraction: avg(|r| r.predicted_clean_fraction),
            alignment_violations: rows.iter().filter(|r| !r.alignment_ok).count(),
            union_violations: rows.iter().filter(|r| !r.union_ok).count(),
        };
        Ok((rows, summary))
    }

    fn trial(&self, trial: usize, l: usize) -> Result<TrialRow> {
        let mut rng = seed::rng_for(self.seed, &[trial as u64]);
        let ch = ChannelInstance::random(self.users, l, &mut rng)?;
        let sched = GapSchedule::sample(&ch, self.epsilon, self.shifts, &mut rng)?;
        let rep = sched.report(&ch);
        let k = self.users as f64;
        let density = sched.density();
        let max_f = rep.interference_fraction.iter().copied().fold(0.0, f64::max);
        Ok(TrialRow {
            trial,
            delay_bins: l,
            shifts: sched.shifts,
            progression_size: sched.t_set.len(),
            distinct: rep.distinct,
            density,
            expected_density: sched.expected_density(),
            max_interference_fraction: max_f,
            alignment_ok: rep.interference_fraction.iter().all(|&f| f < rep.alignment_bound),
            union_ok: rep.interference_fraction.iter().all(|&f| f <= rep.union_bound + 1e-12),
            clean_fraction: rep.clean_fraction.iter().sum::<f64>() / k,
            predicted_clean_fraction: rep.interference_fraction.iter().map(|f| density * (1.0 - f)).sum::<f64>() / k,
        })
    }
}

/// Per-trial rows followed by a summary row whose `trial` column reads
/// `summary`.
pub fn experiment_csv(rows: &[TrialRow], s: &GapSummary) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "trial",
        "L",
        "A",
        "T_size",
        "distinct",
        "density",
        "expected_density",
        "max_F_fraction",
        "alignment_ok",
        "union_ok",
        "clean_fraction",
        "predicted_clean_fraction",
    ])
    .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.delay_bins.to_string(),
            r.shifts.to_string(),
            r.progression_size.to_string(),
            r.distinct.to_string(),
            r.density.to_string(),
            r.expected_density.to_string(),
            r.max_interference_fraction.to_string(),
            r.alignment_ok.to_string(),
            r.union_ok.to_string(),
            r.clean_fraction.to_string(),
            r.predicted_clean_fraction.to_string(),
        ])
        .expect("in-memory write");
    }
    w.write_record([
        "summary".to_string(),
        s.delay_bins.to_string(),
        s.shifts.to_string(),
        String::new(),
        String::new(),
        s.mean_density.to_string(),
        s.mean_expected_density.to_string(),
        String::new(),
        (s.alignment_violations == 0).to_string(),
        (s.union_violations == 0).to_string(),
        s.mean_clean_fraction.to_string(),
        s.mean_predicted_clean_fraction.to_string(),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
