//! Channel model: integer link delays, complex gains and the derived
//! normalized cross-delays.
//!
//! Delays are indexed `[rx][tx]`, so `delays[i][j]` is the delay from
//! transmitter `j` to receiver `i`. Users are zero-based in code.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Relative slack used when deciding whether a product `tau * W` sits on a
/// rounding tie. Anything within this distance below `x.5` rounds up.
const TIE_TOLERANCE: f64 = 1e-9;

/// A K-user line-of-sight interference channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInstance {
    users: usize,
    delay_bins: usize,
    delays: Vec<Vec<i64>>,
    gains: Vec<Vec<Complex64>>,
    psd_over_n0: f64,
    carrier_phase: Option<Vec<Vec<f64>>>,
}

impl ChannelInstance {
    pub fn new(
        delay_bins: usize,
        delays: Vec<Vec<i64>>,
        gains: Vec<Vec<Complex64>>,
        psd_over_n0: f64,
    ) -> Result<Self> {
        let users = delays.len();
        if users == 0 {
            return Err(domain("channel needs at least one user"));
        }
        if delay_bins == 0 {
            return Err(domain("delay spread L must be at least 1"));
        }
        check_square(&delays, users, "delays")?;
        check_square(&gains, users, "gains")?;
        for (i, row) in delays.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                if d < 0 || d >= delay_bins as i64 {
                    return Err(domain(format!(
                        "delay l[{i}][{j}] = {d} outside {{0,...,{}}}",
                        delay_bins - 1
                    )));
                }
            }
        }
        for (i, row) in gains.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                if !(g.norm() > 0.0) || !g.re.is_finite() || !g.im.is_finite() {
                    return Err(domain(format!("gain h[{i}][{j}] must be finite and nonzero")));
                }
            }
        }
        if !(psd_over_n0 > 0.0) || !psd_over_n0.is_finite() {
            return Err(domain("psd_over_n0 must be a positive finite number"));
        }
        Ok(Self {
            users,
            delay_bins,
            delays,
            gains,
            psd_over_n0,
            carrier_phase: None,
        })
    }

    /// Unit gains and unit SNR; the usual setting for combinatorial work.
    pub fn with_unit_gains(delay_bins: usize, delays: Vec<Vec<i64>>) -> Result<Self> {
        let k = delays.len();
        let gains = vec![vec![Complex64::new(1.0, 0.0); k]; k];
        Self::new(delay_bins, delays, gains, 1.0)
    }

    /// Attach carrier-phase arguments `f_c * tau_ij` (only the OFDM module
    /// reads them).
    pub fn with_carrier_phase(mut self, phase: Vec<Vec<f64>>) -> Result<Self> {
        check_square(&phase, self.users, "carrier phase")?;
        self.carrier_phase = Some(phase);
        Ok(self)
    }

    /// Draw every delay i.i.d. uniform on `{0,...,L-1}` with unit-magnitude
    /// gains of uniform phase.
    pub fn random<R: Rng + ?Sized>(users: usize, delay_bins: usize, rng: &mut R) -> Result<Self> {
        if users == 0 || delay_bins == 0 {
            return Err(domain("random channel needs K >= 1 and L >= 1"));
        }
        let delays = (0..users)
            .map(|_| {
                (0..users)
                    .map(|_| rng.random_range(0..delay_bins as i64))
                    .collect()
            })
            .collect();
        let gains = (0..users)
            .map(|_| {
                (0..users)
                    .map(|_| {
                        let phase = rng.random::<f64>() * std::f64::consts::TAU;
                        Complex64::from_polar(1.0, phase)
                    })
                    .collect()
            })
            .collect();
        Self::new(delay_bins, delays, gains, 1.0)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn delay_bins(&self) -> usize {
        self.delay_bins
    }

    pub fn delays(&self) -> &[Vec<i64>] {
        &self.delays
    }

    pub fn delay(&self, rx: usize, tx: usize) -> i64 {
        self.delays[rx][tx]
    }

    pub fn gains(&self) -> &[Vec<Complex64>] {
        &self.gains
    }

    pub fn gain(&self, rx: usize, tx: usize) -> Complex64 {
        self.gains[rx][tx]
    }

    pub fn psd_over_n0(&self) -> f64 {
        self.psd_over_n0
    }

    /// `f_c * tau_ij`, zero when unspecified.
    pub fn carrier_phase(&self, rx: usize, tx: usize) -> f64 {
        self.carrier_phase.as_ref().map_or(0.0, |p| p[rx][tx])
    }

    pub fn max_delay(&self) -> i64 {
        self.delays.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Per-symbol rate `log2(1 + |h_ii|^2 PSD/N0)` of user `i`.
    pub fn rate(&self, user: usize) -> f64 {
        (1.0 + self.gains[user][user].norm_sqr() * self.psd_over_n0).log2()
    }

    /// Shift every transmitter so its direct delay becomes zero.
    pub fn normalize(&self) -> NormalizedChannel {
        let k = self.users;
        let cross = (0..k)
            .map(|i| (0..k).map(|j| self.delays[i][j] - self.delays[j][j]).collect())
            .collect();
        let rates = (0..k).map(|i| self.rate(i)).collect();
        NormalizedChannel { users: k, cross, rates }
    }

    pub fn to_spec(&self) -> ChannelSpec {
        ChannelSpec {
            users: self.users,
            delay_bins: self.delay_bins,
            delays: self.delays.clone(),
            gains_re: Some(self.gains.iter().map(|r| r.iter().map(|g| g.re).collect()).collect()),
            gains_im: Some(self.gains.iter().map(|r| r.iter().map(|g| g.im).collect()).collect()),
            psd_over_n0: Some(self.psd_over_n0),
            carrier_phase: self.carrier_phase.clone(),
        }
    }
}

fn check_square<T>(m: &[Vec<T>], k: usize, what: &str) -> Result<()> {
    if m.len() != k || m.iter().any(|r| r.len() != k) {
        return Err(domain(format!("{what} must be a {k}x{k} matrix")));
    }
    Ok(())
}

/// Normalized cross-delays `l'_ij = l_ij - l_jj` with per-user rate weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedChannel {
    users: usize,
    cross: Vec<Vec<i64>>,
    rates: Vec<f64>,
}

impl NormalizedChannel {
    /// Build directly from normalized cross-delays. The diagonal must be zero.
    pub fn from_cross_delays(cross: Vec<Vec<i64>>, rates: Vec<f64>) -> Result<Self> {
        let users = cross.len();
        if users == 0 {
            return Err(domain("channel needs at least one user"));
        }
        check_square(&cross, users, "cross-delays")?;
        if rates.len() != users {
            return Err(domain("one rate weight per user required"));
        }
        if let Some(j) = (0..users).find(|&j| cross[j][j] != 0) {
            return Err(domain(format!("normalized diagonal l'[{j}][{j}] must be zero")));
        }
        if rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(domain("rate weights must be positive"));
        }
        Ok(Self { users, cross, rates })
    }

    /// Unit rates (`|h_ii| = 1`, `PSD/N0 = 1`).
    pub fn uniform(cross: Vec<Vec<i64>>) -> Result<Self> {
        let k = cross.len();
        Self::from_cross_delays(cross, vec![1.0; k])
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn cross(&self) -> &[Vec<i64>] {
        &self.cross
    }

    /// `l'_ij`: offset from `v_j(t)` to the slot `v_i(t + l'_ij)` it hits.
    pub fn lp(&self, rx: usize, tx: usize) -> i64 {
        self.cross[rx][tx]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn max_abs_delay(&self) -> i64 {
        self.cross.iter().flatten().map(|d| d.abs()).max().unwrap_or(0)
    }
}

/// Round `x` to the nearest integer with ties going up.
fn round_half_up(x: f64) -> i64 {
    let shifted = x + 0.5;
    let mut n = shifted.floor();
    // treat values a hair below the tie as the tie itself
    if (n + 1.0) - shifted <= TIE_TOLERANCE * x.abs().max(1.0) {
        n += 1.0;
    }
    n as i64
}

/// Quantize physical delays (seconds) to integer sample delays.
///
/// Returns the `[rx][tx]` delay matrix together with `L = 1 + round(T_d W)`.
pub fn quantize_delays(taus: &[Vec<f64>], bandwidth: f64, delay_spread: f64) -> Result<(Vec<Vec<i64>>, usize)> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(domain("bandwidth W must be positive"));
    }
    if !(delay_spread > 0.0) || !delay_spread.is_finite() {
        return Err(domain("delay spread T_d must be positive"));
    }
    let k = taus.len();
    check_square(taus, k, "taus")?;
    let span = round_half_up(delay_spread * bandwidth);
    let bins = (1 + span) as usize;
    let mut delays = vec![vec![0i64; k]; k];
    for (i, row) in taus.iter().enumerate() {
        for (j, &tau) in row.iter().enumerate() {
            if !(0.0..delay_spread).contains(&tau) {
                return Err(domain(format!("tau[{i}][{j}] = {tau} outside [0, T_d)")));
            }
            // tau < T_d keeps the product at or below round(T_d W)
            delays[i][j] = round_half_up(tau * bandwidth).min(span);
        }
    }
    Ok((delays, bins))
}

/// A K-user channel with `D` physical paths per link.
#[derive(Debug, Clone, PartialEq)]
pub struct DPathChannel {
    users: usize,
    paths: usize,
    delay_bins: usize,
    /// `[rx][tx][path]`
    delays: Vec<Vec<Vec<i64>>>,
    gains: Vec<Vec<Vec<Complex64>>>,
    psd_over_n0: f64,
}

impl DPathChannel {
    pub fn new(
        delay_bins: usize,
        delays: Vec<Vec<Vec<i64>>>,
        gains: Vec<Vec<Vec<Complex64>>>,
        psd_over_n0: f64,
    ) -> Result<Self> {
        let users = delays.len();
        if users == 0 {
            return Err(domain("channel needs at least one user"));
        }
        check_square(&delays, users, "path delays")?;
        check_square(&gains, users, "path gains")?;
        let paths = delays[0][0].len();
        if paths == 0 {
            return Err(domain("every link needs at least one path"));
        }
        for i in 0..users {
            for j in 0..users {
                if delays[i][j].len() != paths || gains[i][j].len() != paths {
                    return Err(domain(format!("link ({i},{j}) must list exactly {paths} paths")));
                }
                if delays[i][j].iter().any(|&d| d < 0 || d >= delay_bins as i64) {
                    return Err(domain(format!("link ({i},{j}) has a delay outside {{0,...,L-1}}")));
                }
                if gains[i][j].iter().all(|g| g.norm() == 0.0) {
                    return Err(domain(format!("link ({i},{j}) has no nonzero path gain")));
                }
            }
        }
        if !(psd_over_n0 > 0.0) {
            return Err(domain("psd_over_n0 must be positive"));
        }
        Ok(Self {
            users,
            paths,
            delay_bins,
            delays,
            gains,
            psd_over_n0,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn delay_bins(&self) -> usize {
        self.delay_bins
    }

    pub fn delay(&self, rx: usize, tx: usize, path: usize) -> i64 {
        self.delays[rx][tx][path]
    }

    pub fn gain(&self, rx: usize, tx: usize, path: usize) -> Complex64 {
        self.gains[rx][tx][path]
    }

    /// Index of the strongest direct path of user `i`, lowest index on ties.
    pub fn strongest_direct_path(&self, user: usize) -> usize {
        let g = &self.gains[user][user];
        let mut best = 0;
        for d in 1..self.paths {
            if g[d].norm_sqr() > g[best].norm_sqr() {
                best = d;
            }
        }
        best
    }
}

/// How the virtual users of an expanded D-path channel map back to the real
/// users.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMapping {
    pub paths: usize,
    /// `virtual_user / paths` is the real transmitter, `virtual_user % paths`
    /// the path.
    pub data_path: Vec<usize>,
}

impl PathMapping {
    pub fn virtual_user(&self, user: usize, path: usize) -> usize {
        user * self.paths + path
    }

    /// The virtual user whose receiver decodes real user `user`.
    pub fn data_user(&self, user: usize) -> usize {
        self.virtual_user(user, self.data_path[user])
    }

    pub fn real_user(&self, virtual_user: usize) -> (usize, usize) {
        (virtual_user / self.paths, virtual_user % self.paths)
    }
}

/// Reinterpret a D-path channel as a `D*K`-user line-of-sight channel.
///
/// Virtual transmitter `(j,d)` sends user `j`'s signal over path `d` only, so
/// the delay from `(j,d)` to any virtual receiver `(i,e)` is `l_ij,d`. Virtual
/// user `(j,d)` therefore has path `d` of link `(j,j)` as its direct link.
/// The receiver of `(i,d*)`, with `d*` the strongest direct path, decodes real
/// user `i`; every other path reaching it is a cross link.
pub fn expand_dpath(dch: &DPathChannel) -> Result<(ChannelInstance, PathMapping)> {
    let k = dch.users;
    let p = dch.paths;
    let n = k * p;
    let mut delays = vec![vec![0i64; n]; n];
    let mut gains = vec![vec![Complex64::new(1.0, 0.0); n]; n];
    for rx in 0..n {
        let i = rx / p;
        for tx in 0..n {
            let (j, d) = (tx / p, tx % p);
            delays[rx][tx] = dch.delays[i][j][d];
            let g = dch.gains[i][j][d];
            // a silent path still needs a placeholder gain for the LOS model
            gains[rx][tx] = if g.norm() > 0.0 { g } else { Complex64::new(f64::MIN_POSITIVE, 0.0) };
        }
    }
    let data_path = (0..k).map(|i| dch.strongest_direct_path(i)).collect();
    let ch = ChannelInstance::new(dch.delay_bins, delays, gains, dch.psd_over_n0)?;
    Ok((ch, PathMapping { paths: p, data_path }))
}

/// JSON ingestion format shared by every CLI command.
///
/// `{"K":int,"L":int,"delays":[[int]],"gains_re":[[num]],"gains_im":[[num]],"psd_over_n0":num}`
/// with delays indexed `[rx][tx]`. Gains default to 1 and the SNR ratio to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "L")]
    pub delay_bins: usize,
    pub delays: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains_re: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains_im: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd_over_n0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_phase: Option<Vec<Vec<f64>>>,
}

impl ChannelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| domain(format!("malformed channel JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("channel spec serializes")
    }

    pub fn into_channel(self) -> Result<ChannelInstance> {
        let k = self.users;
        if self.delays.len() != k {
            return Err(domain(format!("K = {k} but delays has {} rows", self.delays.len())));
        }
        let re = self.gains_re.unwrap_or_else(|| vec![vec![1.0; k]; k]);
        let im = self.gains_im.unwrap_or_else(|| vec![vec![0.0; k]; k]);
        check_square(&re, k, "gains_re")?;
        check_square(&im, k, "gains_im")?;
        let gains = re
            .iter()
            .zip(&im)
            .map(|(r, i)| r.iter().zip(i).map(|(&a, &b)| Complex64::new(a, b)).collect())
            .collect();
        let ch = ChannelInstance::new(self.delay_bins, self.delays, gains, self.psd_over_n0.unwrap_or(1.0))?;
        match self.carrier_phase {
            Some(p) => ch.with_carrier_phase(p),
            None => Ok(ch),
        }
    }
}
