//! `tdia`: batch runner for the solvers and experiments in the `tdia` crate.
//!
//! Every run prints (or writes to `--out`) one document that embeds the fully
//! resolved configuration, so a result file can be replayed from itself.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use tdia::channel::{ChannelInstance, ChannelSpec};
use tdia::converse::{self, DelayBinsOfUsers};
use tdia::dp::{self, Boundary, Weights};
use tdia::gap::{self, DelayBinRule, GapExperiment};
use tdia::graph::{self, InterferenceGraph, BRUTE_FORCE_MAX_VERTICES};
use tdia::numtheory;
use tdia::ofdm::{self, DecodeOutcome, RankConfig};
use tdia::{presets, seed};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] tdia::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(tdia::Error::Domain(_)) => 2,
            CliError::Core(tdia::Error::Size(_) | tdia::Error::Degenerate(_)) => 3,
            CliError::Core(tdia::Error::Internal(_)) => 4,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "tdia", version, about = "Time-domain interference alignment experiments")]
struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file, written atomically; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Channel: a JSON file, inline JSON, `random:K=3,L=8` or
    /// `preset:staggered|half-rate|aligned-ofdm`.
    #[arg(long, global = true)]
    channel: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal finite-horizon transmit pattern.
    Solve(SolveArgs),
    /// Independence rate via maximum mean cycle.
    Ir(IrArgs),
    /// Three-user half-rate test, or a sweep over all cross delays.
    Check3(Check3Args),
    /// Progression-based schedule experiment on random channels.
    Gap(GapArgs),
    /// Column-graph independence number against the number of users.
    Converse(ConverseArgs),
    /// OFDM precoders, permutation and orthogonality checks.
    OfdmPrecode(OfdmArgs),
    /// Slot table of one OFDM block.
    OfdmSchedule(OfdmArgs),
    /// Rank of the multi-user alignment column set.
    OfdmRank(RankArgs),
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    #[arg(long, short = 'T')]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Exact)]
    boundary: BoundaryArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BoundaryArg {
    Exact,
    Paper,
}

#[derive(Args, Debug, Serialize)]
struct IrArgs {
    /// Weight each symbol by its user's rate instead of counting symbols.
    #[arg(long)]
    rates: bool,
}

#[derive(Args, Debug, Serialize)]
struct Check3Args {
    /// Scan every normalized cross delay in `-R..=R` instead of one channel.
    #[arg(long, value_name = "R")]
    sweep: Option<i64>,
}

#[derive(Args, Debug, Serialize)]
struct GapArgs {
    #[arg(long = "users", short = 'K', default_value_t = 2)]
    users: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Explicit `L`; defaults to `ceil((2N)^(N+eps))`.
    #[arg(long = "delay-bins", short = 'L')]
    delay_bins: Option<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    shifts: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct ConverseArgs {
    /// Comma-separated user counts.
    #[arg(long = "users", short = 'K', value_delimiter = ',', default_value = "10,20,30,40")]
    users: Vec<usize>,
    /// Fixed `L`, or `square` for `L = K^2`.
    #[arg(long = "delay-bins", short = 'L', default_value = "4")]
    delay_bins: String,
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Args, Debug, Serialize)]
struct OfdmArgs {
    /// Block length; defaults to the smallest admissible prime above `--floor`.
    #[arg(long = "block", short = 'M')]
    block: Option<usize>,
    #[arg(long, default_value_t = 0)]
    floor: usize,
    /// With `--format csv`, emit this precoder matrix (`v`, `v1`, `v2`, `v3`).
    #[arg(long)]
    matrix: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct RankArgs {
    #[arg(long = "users", short = 'K', default_value_t = 4)]
    users: usize,
    #[arg(long, short = 'n', default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    taps: usize,
    #[arg(long = "block", short = 'M', default_value_t = 191)]
    block: usize,
    #[arg(long = "max-columns")]
    max_columns: Option<usize>,
    #[arg(long = "delay-spread", default_value_t = 0)]
    delay_spread: usize,
}

/// The document body and, for CSV output, its table.
struct Output {
    params: Value,
    result: Value,
    csv: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tdia: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let channel = match &cli.channel {
        Some(src) => Some(load_channel(src, cli.seed)?),
        None => None,
    };
    let need = || channel.as_ref().ok_or_else(|| CliError::Config("this command needs --channel".into()));
    let out = match &cli.command {
        Command::Solve(a) => cmd_solve(need()?, a)?,
        Command::Ir(a) => cmd_ir(need()?, a)?,
        Command::Check3(a) => match a.sweep {
            Some(r) => cmd_sweep(r)?,
            None => cmd_check3(need()?)?,
        },
        Command::Gap(a) => cmd_gap(a, cli.seed)?,
        Command::Converse(a) => cmd_converse(a, cli.seed)?,
        Command::OfdmPrecode(a) => cmd_ofdm_precode(need()?, a, cli.seed, cli.format)?,
        Command::OfdmSchedule(a) => cmd_ofdm_schedule(need()?, a)?,
        Command::OfdmRank(a) => cmd_ofdm_rank(a, cli.seed)?,
    };
    let echo = json!({
        "command": command_name(&cli.command),
        "seed": cli.seed,
        "format": cli.format,
        "channel": channel.as_ref().map(|c| c.to_spec()),
        "params": out.params,
    });
    let text = match cli.format {
        Format::Json => {
            let doc = json!({ "config": echo, "result": out.result });
            serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
        }
        Format::Csv => {
            let table = out
                .csv
                .ok_or_else(|| CliError::Config(format!("{} has no CSV form", command_name(&cli.command))))?;
            format!("# config: {echo}\n{table}")
        }
    };
    match &cli.out {
        Some(path) => write_atomic(path, &text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Solve(_) => "solve",
        Command::Ir(_) => "ir",
        Command::Check3(_) => "check3",
        Command::Gap(_) => "gap",
        Command::Converse(_) => "converse",
        Command::OfdmPrecode(_) => "ofdm-precode",
        Command::OfdmSchedule(_) => "ofdm-schedule",
        Command::OfdmRank(_) => "ofdm-rank",
    }
}

fn write_atomic(path: &Path, text: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn load_channel(src: &str, master: u64) -> CliResult<ChannelInstance> {
    if let Some(rest) = src.strip_prefix("random:") {
        let (mut k, mut l) = (None, None);
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("expected KEY=VALUE in '{part}'")))?;
            let v: usize = val
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("'{val}' is not a non-negative integer")))?;
            match key.trim() {
                "K" => k = Some(v),
                "L" => l = Some(v),
                other => return Err(CliError::Config(format!("unknown random channel key '{other}'"))),
            }
        }
        let (k, l) = k
            .zip(l)
            .ok_or_else(|| CliError::Config("random channel needs both K and L".into()))?;
        let mut rng = seed::rng_for(master, &[0]);
        return Ok(ChannelInstance::random(k, l, &mut rng)?);
    }
    if let Some(name) = src.strip_prefix("preset:") {
        return match name {
            "staggered" => Ok(presets::staggered_three_user()),
            "half-rate" => Ok(presets::half_rate_three_user_channel()),
            "aligned-ofdm" => Ok(presets::aligned_ofdm_three_user()),
            other => Err(CliError::Config(format!("unknown preset '{other}'"))),
        };
    }
    let text = if src.trim_start().starts_with('{') {
        src.to_string()
    } else {
        std::fs::read_to_string(src).map_err(|e| CliError::Config(format!("cannot read channel file '{src}': {e}")))?
    };
    Ok(ChannelSpec::from_json(&text)?.into_channel()?)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn csv_of<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[derive(Serialize)]
struct SlotRow {
    user: usize,
    slot: usize,
}

fn pattern_rows(slots: &[Vec<usize>]) -> Vec<SlotRow> {
    slots
        .iter()
        .enumerate()
        .flat_map(|(u, s)| s.iter().map(move |&t| SlotRow { user: u + 1, slot: t }))
        .collect()
}

fn cmd_solve(ch: &ChannelInstance, a: &SolveArgs) -> CliResult<Output> {
    if a.horizon == 0 {
        return Err(CliError::Config("horizon T must be at least 1".into()));
    }
    let nc = ch.normalize();
    let boundary = match a.boundary {
        BoundaryArg::Exact => Boundary::Exact,
        BoundaryArg::Paper => Boundary::Paper,
    };
    let sol = dp::solve_finite(&nc, a.horizon, boundary)?;
    let g = InterferenceGraph::build(&nc, a.horizon)?;
    let feasible = g.is_feasible(&sol.pattern)?;
    let check = if g.vertex_count() <= BRUTE_FORCE_MAX_VERTICES {
        let (_, best) = g.brute_force_optimum(nc.rates())?;
        let agrees = match boundary {
            Boundary::Exact => (best - sol.objective).abs() <= 1e-9 * best.abs().max(1.0),
            Boundary::Paper => sol.objective + 1e-9 >= best,
        };
        if agrees { "ok" } else { "mismatch" }
    } else {
        "skipped"
    };
    if !feasible || check == "mismatch" {
        return Err(CliError::Core(tdia::Error::Internal(format!(
            "solver self-check failed: feasible = {feasible}, brute force {check}"
        ))));
    }
    let report = graph::rate_report(&sol.pattern, &nc);
    Ok(Output {
        params: to_value(a),
        result: json!({
            "objective": sol.objective,
            "pattern": sol.pattern,
            "rates": report,
            "period": sol.period,
            "feasible": feasible,
            "check": check,
        }),
        csv: Some(csv_of(&pattern_rows(sol.pattern.slots()))),
    })
}

fn cmd_ir(ch: &ChannelInstance, a: &IrArgs) -> CliResult<Output> {
    let nc = ch.normalize();
    let w = if a.rates { Weights::Rates } else { Weights::Uniform };
    let ir = dp::independence_rate(&nc, w)?;
    let csv = csv_of(&pattern_rows(&ir.pattern.slots));
    Ok(Output {
        params: to_value(a),
        result: json!({
            "rate": ir.rate,
            "exact": to_value(&ir)["exact"],
            "period": ir.pattern.period,
            "pattern": ir.pattern,
        }),
        csv: Some(csv),
    })
}

fn cmd_check3(ch: &ChannelInstance) -> CliResult<Output> {
    let nc = ch.normalize();
    let v = numtheory::theorem3_check(&nc)?;
    let mut patterns = Vec::new();
    if let Some(g) = v.gcd_exponent {
        // listing stops at 2^12 patterns; the count is still reported
        if g <= 12 {
            for s in numtheory::all_seed_vectors(g as usize)? {
                patterns.push(numtheory::construct_half_rate_pattern(&nc, &s)?);
            }
        }
    }
    let rows: Vec<Value> = patterns
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            pattern_rows(&p.slots)
                .into_iter()
                .map(move |r| json!({"pattern": i, "period": p.period, "user": r.user, "slot": r.slot}))
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pattern", "period", "user", "slot"]).expect("in-memory write");
    for r in &rows {
        w.write_record([&r["pattern"], &r["period"], &r["user"], &r["slot"]].map(|x| x.to_string()))
            .expect("in-memory write");
    }
    Ok(Output {
        params: json!({}),
        result: json!({
            "achievable": v.achievable,
            "count": v.pattern_count().map(|c| c.to_string()),
            "gcd_exponent": v.gcd_exponent,
            "sums": v.sums,
            "patterns": patterns,
        }),
        csv: Some(String::from_utf8(w.into_inner().expect("flush")).expect("utf8")),
    })
}

fn cmd_sweep(range: i64) -> CliResult<Output> {
    if !(0..=4).contains(&range) {
        return Err(CliError::Config("sweep range must be in 0..=4".into()));
    }
    let rows = numtheory::sweep_tuples(range)
        .into_iter()
        .map(numtheory::sweep_row)
        .collect::<tdia::Result<Vec<_>>>()?;
    let achievable = rows.iter().filter(|r| r.achievable).count();
    Ok(Output {
        params: json!({ "sweep": range }),
        result: json!({ "channels": rows.len(), "achievable": achievable, "rows": rows }),
        csv: Some(numtheory::sweep_csv(&rows)),
    })
}

fn cmd_gap(a: &GapArgs, master: u64) -> CliResult<Output> {
    let exp = GapExperiment {
        users: a.users,
        epsilon: a.epsilon,
        rule: match a.delay_bins {
            Some(l) => DelayBinRule::Explicit { l },
            None => DelayBinRule::Theorem1,
        },
        trials: a.trials,
        seed: master,
        shifts: a.shifts,
    };
    let (rows, summary) = exp.run()?;
    Ok(Output {
        params: to_value(&exp),
        result: json!({ "summary": summary, "trials": rows }),
        csv: Some(gap::experiment_csv(&rows, &summary)),
    })
}

fn cmd_converse(a: &ConverseArgs, master: u64) -> CliResult<Output> {
    let rule = match a.delay_bins.as_str() {
        "square" => DelayBinsOfUsers::Square,
        s => DelayBinsOfUsers::Constant {
            l: s.parse().map_err(|_| CliError::Config(format!("delay bins must be an integer or 'square', got '{s}'")))?,
        },
    };
    let (points, rows) = converse::scaling_curve(&a.users, rule, a.trials, master)?;
    Ok(Output {
        params: json!({ "users": a.users, "delay_bins": rule, "trials": a.trials }),
        result: json!({ "curve": points, "trials": rows }),
        csv: Some(csv_of(&points)),
    })
}

fn block_length(ch: &ChannelInstance, a: &OfdmArgs) -> CliResult<usize> {
    match a.block {
        Some(m) => Ok(m),
        None => Ok(ofdm::choose_block_length(ch, a.floor)?),
    }
}

fn cmd_ofdm_precode(ch: &ChannelInstance, a: &OfdmArgs, master: u64, format: Format) -> CliResult<Output> {
    let m = block_length(ch, a)?;
    let ps = ofdm::build_precoders(ch, m)?;
    let perm = ofdm::permutation_check(&ps);
    let orth = ofdm::orthogonality_check(ch, &ps);
    let mut rng = seed::rng_for(master, &[1]);
    let data: [DVector<Complex64>; 3] = std::array::from_fn(|_| {
        DVector::from_fn(ps.n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    });
    let y = ofdm::transmit(ch, &ps, &data)?;
    let mut decode = Vec::new();
    for (i, yi) in y.iter().enumerate() {
        decode.push(match ofdm::zf_decode(ch, &ps, yi, i)? {
            DecodeOutcome::Decoded { symbols } => {
                json!({"rx": i + 1, "status": "decoded", "relative_error": (&symbols - &data[i]).norm() / data[i].norm()})
            }
            u => to_value(&u),
        });
    }
    let csv = match (&a.matrix, format) {
        (Some(name), _) => {
            let mat = match name.as_str() {
                "v" => &ps.v,
                "v1" => &ps.v_user[0],
                "v2" => &ps.v_user[1],
                "v3" => &ps.v_user[2],
                other => return Err(CliError::Config(format!("unknown matrix '{other}'"))),
            };
            Some(ofdm::matrix_csv(mat))
        }
        (None, Format::Csv) => Some(ofdm::matrix_csv(&ps.v)),
        (None, Format::Json) => None,
    };
    Ok(Output {
        params: json!({ "M": m, "floor": a.floor, "matrix": a.matrix }),
        result: json!({
            "M": m,
            "n": ps.n,
            "l": ps.l,
            "delays": ps.delays,
            "cp_len": ps.cp_len,
            "permutation": perm,
            "orthogonality": orth,
            "decode": decode,
        }),
        csv,
    })
}

fn cmd_ofdm_schedule(ch: &ChannelInstance, a: &OfdmArgs) -> CliResult<Output> {
    let m = block_length(ch, a)?;
    let ps = ofdm::build_precoders(ch, m)?;
    let s = ofdm::build_schedule(ch, &ps);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rx", "tx", "k", "slot", "wrapped"]).expect("in-memory write");
    for u in &s.users {
        for (k, slot) in u.slots.iter().enumerate() {
            w.write_record(["0".to_string(), u.tx.to_string(), k.to_string(), slot.to_string(), slot.to_string()])
                .expect("in-memory write");
        }
    }
    for arr in &s.arrivals {
        for (k, (slot, wrapped)) in arr.slots.iter().zip(&arr.wrapped).enumerate() {
            w.write_record([arr.rx, arr.tx, k].map(|x| x.to_string()).into_iter().chain([slot.to_string(), wrapped.to_string()]))
                .expect("in-memory write");
        }
    }
    Ok(Output {
        params: json!({ "M": m, "floor": a.floor }),
        result: to_value(&s),
        csv: Some(String::from_utf8(w.into_inner().expect("flush")).expect("utf8")),
    })
}

fn cmd_ofdm_rank(a: &RankArgs, master: u64) -> CliResult<Output> {
    let cfg = RankConfig {
        users: a.users,
        n: a.n,
        taps: a.taps,
        m: a.block,
        seed: master,
        max_columns: a.max_columns,
        delay_spread: a.delay_spread,
    };
    let r = ofdm::dof_rank_experiment(&cfg)?;
    Ok(Output {
        params: to_value(&cfg),
        result: to_value(&r),
        csv: Some(csv_of(&[&r])),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_source_is_seeded() {
        let a = load_channel("random:K=3,L=7", 4).unwrap();
        assert_eq!(a.users(), 3);
        assert_eq!(a.delay_bins(), 7);
        assert_eq!(a.to_spec(), load_channel("random:L=7,K=3", 4).unwrap().to_spec());
    }

    #[test]
    fn bad_sources_are_config_errors() {
        for src in ["random:K=3", "random:K=x,L=2", "random:Q=1", "preset:nope", "{\"K\":2}"] {
            assert_eq!(load_channel(src, 0).unwrap_err().exit_code(), 2, "{src}");
        }
    }

    #[test]
    fn exit_code_contract() {
        assert_eq!(CliError::Core(tdia::Error::Size("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(tdia::Error::Degenerate("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(tdia::Error::Internal("x".into())).exit_code(), 4);
    }
}
