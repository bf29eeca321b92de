use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use circdim::pipeline::{run, Command, RunConfig};
use circdim::{report, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

/// Multicritical circle maps: rotation numbers, dynamical partitions,
/// real bounds and the dimension of the invariant measure.
#[derive(Parser)]
#[command(name = "circdim", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Partial quotients of the rotation number from closest returns.
    Rotnum(Common),
    /// Tune ω so the rotation number starts with the target quotients.
    Tune(Common),
    /// Atoms of the deepest partition, with tiling and refinement checks.
    Partition(Common),
    /// Critical spots and bridges of each level.
    Bridges(Common),
    /// Empirical real-bounds constants.
    Realbounds(Common),
    /// Central bridge covers and their measure and length inequalities.
    Cover(Common),
    /// Search for a set of large measure and small length.
    Singularity(Common),
    /// Local dimension exponents of the invariant measure.
    Dimension(Common),
    /// Conjugacy signature of the critical points.
    Signature(Common),
    /// Dimension estimate against the lower and upper bounds.
    Theorem1(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; the map flags below can stand in for it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    /// Decimal string.
    #[arg(long)]
    omega: Option<String>,
    #[arg(long, value_delimiter = ',')]
    target_cf: Option<Vec<u64>>,
    #[arg(long)]
    precision_bits: Option<u32>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Single level for partition, bridges and cover.
    #[arg(long)]
    level: Option<usize>,
    /// Level range `lo..hi` (inclusive) for realbounds.
    #[arg(long, value_parser = parse_levels)]
    levels: Option<[usize; 2]>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Cmd {
    fn split(self) -> (Command, Common) {
        match self {
            Cmd::Rotnum(c) => (Command::Rotnum, c),
            Cmd::Tune(c) => (Command::Tune, c),
            Cmd::Partition(c) => (Command::Partition, c),
            Cmd::Bridges(c) => (Command::Bridges, c),
            Cmd::Realbounds(c) => (Command::Realbounds, c),
            Cmd::Cover(c) => (Command::Cover, c),
            Cmd::Singularity(c) => (Command::Singularity, c),
            Cmd::Dimension(c) => (Command::Dimension, c),
            Cmd::Signature(c) => (Command::Signature, c),
            Cmd::Theorem1(c) => (Command::Theorem1, c),
        }
    }
}

fn parse_levels(text: &str) -> Result<[usize; 2], String> {
    let (lo, hi) = text.split_once("..").ok_or_else(|| format!("expected lo..hi, got {text:?}"))?;
    let parse = |s: &str| s.trim_start_matches('=').parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    Ok([parse(lo)?, parse(hi)?])
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let mut raw: Value = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => json!({ "map": {} }),
    };
    let map = raw
        .get_mut("map")
        .and_then(Value::as_object_mut)
        .ok_or_else(|| Error::Config("the configuration needs a map object".into()))?;
    if let Some(f) = &common.family {
        map.insert("family".into(), json!(f));
    }
    if let Some(w) = &common.omega {
        map.remove("target_cf");
        map.insert("omega".into(), json!(w));
    }
    if let Some(t) = &common.target_cf {
        map.remove("omega");
        map.insert("target_cf".into(), json!(t));
    }
    let mut cfg: RunConfig = serde_json::from_value(raw).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(p) = common.precision_bits {
        cfg.map.precision_bits = p;
    }
    let a = &mut cfg.analysis;
    if let Some(d) = common.depth {
        a.depth = d;
    }
    if let Some(g) = &common.gamma {
        a.gamma = g.clone();
    }
    if let Some(t) = common.tau {
        a.tau = t;
    }
    if let Some(s) = common.samples {
        a.samples = s;
    }
    if let Some(s) = common.seed {
        a.seed = s;
    }
    if let Some(e) = common.eps {
        a.epsilon = e;
    }
    if common.level.is_some() {
        a.level = common.level;
    }
    if common.levels.is_some() {
        a.levels = common.levels;
    }
    if let Some(out) = &common.out {
        cfg.output.path = Some(out.clone());
    }
    if let Some(f) = common.format {
        cfg.output.format = Some(match f {
            Format::Json => "json".into(),
            Format::Csv => "csv".into(),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: Option<&PathBuf>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::Config(format!("writing {}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::Config(format!("writing stdout: {e}"))),
    }
}

fn execute(cmd: Cmd) -> Result<i32, Error> {
    let (command, common) = cmd.split();
    let cfg = load(&common)?;
    let out = cfg.output.path.clone();
    let csv = match cfg.output.format.as_deref() {
        None | Some("json") => false,
        Some("csv") => true,
        Some(other) => return Err(Error::Config(format!("unknown output format {other:?}"))),
    };
    let outcome = run(command, cfg)?;
    write(out.as_ref(), &outcome.to_bytes(csv)?)?;
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let _ = std::io::stdout().write_all(&report::to_bytes(&report::error_envelope(&e)));
            ExitCode::from(1)
        }
    }
}
