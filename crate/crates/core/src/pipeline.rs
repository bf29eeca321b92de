//! Run configuration and the end-to-end commands behind the CLI.

use std::path::PathBuf;

use rug::Float;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::{adjacency_ratios, real_bounds, RealBoundsReport};
use crate::cf::{diophantine_profile, theorem1_bounds, ContinuedFraction, DiophantineProfile, Theorem1Bounds};
use crate::dimension::{local_dimension_samples, DimensionEstimate, SamplingPlan};
use crate::error::{Error, Result};
use crate::map::{validate_map, Family, MapSpec};
use crate::measure::{build_cover, cover_report, hausdorff_content_sum, signature, singularity_certificate, ContentSum};
use crate::numeric;
use crate::partition::{bridge_decomposition, refine_check, PartitionTower};
use crate::report;
use crate::rotation::{birkhoff_estimate, closest_return_quotients, tune_parameter, TUNE_MARGIN};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub family: String,
    #[serde(default)]
    pub params: Option<Value>,
    /// Decimal string or JSON number.
    #[serde(default)]
    pub omega: Option<Value>,
    /// Partial quotients, repeated periodically.
    #[serde(default)]
    pub target_cf: Option<Vec<u64>>,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub depth: usize,
    pub gamma: Vec<f64>,
    pub tau: f64,
    pub samples: usize,
    pub seed: u64,
    /// Target for the singularity certificate.
    pub epsilon: f64,
    /// `d` in the cover sums `Σ |A_i|^d`; defaults to `1/(τ+1) + 0.1`.
    pub content_dimension: Option<f64>,
    /// First level used by the bounds and dimension sweeps.
    pub min_level: usize,
    /// Single level for `partition`, `bridges` and `cover`.
    pub level: Option<usize>,
    /// Inclusive level range for `realbounds`.
    pub levels: Option<[usize; 2]>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            depth: 8,
            gamma: vec![0.3, 0.5, 0.7],
            tau: 0.0,
            samples: 128,
            seed: 0,
            epsilon: 0.05,
            content_dimension: None,
            min_level: 2,
            level: None,
            levels: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub map: MapConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_precision() -> u32 {
    256
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.map.omega, &self.map.target_cf) {
            (Some(_), Some(_)) => return Err(Error::Config("give either map.omega or map.target_cf, not both".into())),
            (None, None) => return Err(Error::Config("one of map.omega or map.target_cf is required".into())),
            (_, Some(t)) if t.is_empty() || t.contains(&0) => {
                return Err(Error::Config("map.target_cf needs positive partial quotients".into()))
            }
            _ => {}
        }
        if self.map.precision_bits < 128 {
            return Err(Error::Config(format!("precision_bits must be at least 128, got {}", self.map.precision_bits)));
        }
        let a = &self.analysis;
        if a.depth < 3 {
            return Err(Error::Config(format!("analysis.depth must be at least 3, got {}", a.depth)));
        }
        if let Some(g) = a.gamma.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return Err(Error::Config(format!("gamma values must lie in (0, 1), got {g}")));
        }
        if !(a.tau >= 0.0) {
            return Err(Error::Config(format!("tau must be non-negative, got {}", a.tau)));
        }
        if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", a.epsilon)));
        }
        if a.min_level < 1 || a.min_level >= a.depth {
            return Err(Error::Config(format!("min_level must lie in [1, depth), got {}", a.min_level)));
        }
        if let Some(n) = a.level {
            if n < 1 || n > a.depth {
                return Err(Error::Config(format!("level must lie in [1, depth], got {n}")));
            }
        }
        if let Some([lo, hi]) = a.levels {
            if lo < 1 || lo > hi || hi >= a.depth {
                return Err(Error::Config(format!("levels {lo}..{hi} must satisfy 1 <= lo <= hi < depth")));
            }
        }
        Ok(())
    }

    fn omega_text(&self) -> Option<String> {
        self.map.omega.as_ref().map(|v| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Rotnum,
    Tune,
    Partition,
    Bridges,
    Realbounds,
    Cover,
    Singularity,
    Dimension,
    Signature,
    Theorem1,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Rotnum => "rotnum",
            Command::Tune => "tune",
            Command::Partition => "partition",
            Command::Bridges => "bridges",
            Command::Realbounds => "realbounds",
            Command::Cover => "cover",
            Command::Singularity => "singularity",
            Command::Dimension => "dimension",
            Command::Signature => "signature",
            Command::Theorem1 => "theorem1",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TuneSummary {
    pub omega: String,
    pub steps: usize,
    pub quotients: Vec<u64>,
    pub tested_through: usize,
}

/// The map a run works on, tuned when the config names a target.
pub struct Session {
    pub config: RunConfig,
    pub spec: MapSpec,
    pub tuning: Option<TuneSummary>,
    // convergents whose quotients the tuner pinned exactly
    pinned: Option<usize>,
}

impl Session {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let family = Family::from_config(&config.map.family, config.map.params.as_ref())?;
        let prec = config.map.precision_bits;
        let digits = (prec as f64 / std::f64::consts::LOG2_10).floor() as usize;
        if let Some(text) = config.omega_text() {
            let spec = MapSpec::from_decimal(family, &text, prec)?;
            return Ok(Session { config, spec, tuning: None, pinned: None });
        }
        let target = config.map.target_cf.clone().unwrap();
        let depth = config.analysis.depth;
        if family == Family::RigidRotation {
            let cf = measure_cf_from_target(&target, depth)?;
            let spec = MapSpec::new(family, &cf.alpha_float(prec), prec)?;
            let pinned = Some(cf.depth());
            return Ok(Session { config, spec, tuning: None, pinned });
        }
        let template = MapSpec::new(family, &Float::with_val(prec, 0.5), prec)?;
        let tuned = tune_parameter(&template, &target, depth)?;
        let spec = template.with_omega(&tuned.omega);
        let tuning = TuneSummary {
            omega: numeric::decimal(&tuned.omega, digits),
            steps: tuned.steps,
            quotients: tuned.reading.quotients.clone(),
            tested_through: tuned.tested_through,
        };
        Ok(Session { config, spec, tuning: Some(tuning), pinned: Some(tuned.tested_through) })
    }

    pub fn depth(&self) -> usize {
        self.config.analysis.depth
    }

    pub fn tower(&self) -> Result<PartitionTower> {
        PartitionTower::build(&self.spec, 0, self.depth())
    }

    /// The continued fraction the measure is read from, and where it came from.
    pub fn measure_cf(&self, tower: &PartitionTower) -> Result<(ContinuedFraction, &'static str)> {
        match &self.config.map.target_cf {
            Some(t) => Ok((measure_cf_from_target(t, self.depth())?, "target")),
            None => Ok((ContinuedFraction::new(tower.quotients(), tower.depth())?, "extracted prefix, golden tail")),
        }
    }

    /// The configured level, or every level whose next partition is built.
    fn levels_below_depth(&self) -> std::ops::Range<usize> {
        match self.config.analysis.level {
            Some(n) => n..n + 1,
            None => 1..self.depth(),
        }
    }

    /// Deepest level whose atom measures are fixed by pinned quotients.
    pub fn measure_depth(&self) -> usize {
        match self.pinned {
            Some(p) => self.depth().min(p.saturating_sub(1)),
            None => self.depth() - 1,
        }
    }
}

/// The target word extended periodically past the tuned depth, with the
/// continuation of the period as tail.
pub fn measure_cf_from_target(target: &[u64], depth: usize) -> Result<ContinuedFraction> {
    let n = depth + TUNE_MARGIN;
    let word: Vec<u64> = target.iter().copied().cycle().take(n).collect();
    let shift = n % target.len();
    let tail: Vec<u64> = target[shift..].iter().chain(&target[..shift]).copied().collect();
    ContinuedFraction::with_tail(&word, n, &tail)
}

pub struct Outcome {
    pub command: Command,
    pub precision_bits: u32,
    pub result: Value,
    pub flags: Vec<String>,
    pub csv: Option<String>,
}

impl Outcome {
    /// 0 when every check passed, 2 when a soft check was flagged.
    pub fn exit_code(&self) -> i32 {
        if self.flags.is_empty() {
            0
        } else {
            2
        }
    }

    pub fn json(&self) -> Value {
        report::envelope(self.command.name(), self.precision_bits, &self.result, &self.flags)
    }

    pub fn to_bytes(&self, csv: bool) -> Result<Vec<u8>> {
        if csv {
            return self
                .csv
                .as_ref()
                .map(|s| s.clone().into_bytes())
                .ok_or_else(|| Error::Config(format!("{} has no CSV form", self.command.name())));
        }
        Ok(report::to_bytes(&self.json()))
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub fn run(command: Command, config: RunConfig) -> Result<Outcome> {
    let prec = config.map.precision_bits;
    if command == Command::Tune && config.map.target_cf.is_none() {
        return Err(Error::Config("tune needs map.target_cf".into()));
    }
    let session = Session::new(config)?;
    let mut flags = Vec::new();
    let mut csv = None;
    let tuning = to_value(&session.tuning);
    let result = match command {
        Command::Rotnum => rotnum(&session, &mut flags)?,
        Command::Tune => tuning.clone(),
        Command::Partition => {
            let tower = session.tower()?;
            let p = tower.partition(session.config.analysis.level.unwrap_or(session.depth()))?;
            let digits = (prec as f64 / std::f64::consts::LOG2_10).floor() as usize;
            csv = Some(p.to_csv(digits));
            let refinement =
                (1..session.depth()).map(|n| refine_check(&tower, n)).collect::<Result<Vec<_>>>()?;
            serde_json::json!({
                "level": p.level,
                "atoms": p.len(),
                "long_atoms": p.long_count(),
                "tiling_residual": p.tiling_residual,
                "min_length": p.min_length().to_f64(),
                "adjacency": adjacency_ratios(&p),
                "refinement": refinement,
                "quotients": tower.quotients(),
            })
        }
        Command::Bridges => {
            let tower = session.tower()?;
            let levels = session
                .levels_below_depth()
                .map(|n| bridge_decomposition(&session.spec, &tower, n))
                .collect::<Result<Vec<_>>>()?;
            to_value(&levels)
        }
        Command::Realbounds => {
            let tower = session.tower()?;
            let rb = realbounds(&session, &tower)?;
            flag_bounds(&rb, &mut flags);
            to_value(&rb)
        }
        Command::Cover => {
            let tower = session.tower()?;
            let (cf, _) = session.measure_cf(&tower)?;
            let rb = realbounds(&session, &tower)?;
            let m = rb.constant.value;
            let mut reports = Vec::new();
            for n in session.levels_below_depth() {
                let bridges = bridge_decomposition(&session.spec, &tower, n)?;
                if bridges.degenerate {
                    continue;
                }
                for &g in &session.config.analysis.gamma {
                    let cover = build_cover(&tower, &bridges, g)?;
                    if cover.trim == 0 {
                        continue;
                    }
                    let r = cover_report(&tower, &cf, &cover, session.spec.critical_points().len(), m)?;
                    let all = [&r.piece_measure_bound, &r.measure_bound, &r.piece_length_bound, &r.length_bound];
                    if !r.measure_sum_agrees || all.iter().any(|c| !c.holds) {
                        flags.push(format!("cover inequality fails at level {n}, gamma {g}"));
                    }
                    reports.push(r);
                }
            }
            serde_json::json!({ "bound_constant": m, "covers": reports })
        }
        Command::Singularity => {
            let tower = session.tower()?;
            let (cf, _) = session.measure_cf(&tower)?;
            let mut grid: Vec<f64> = (1..20).map(|k| k as f64 / 20.0).collect();
            grid.extend(session.config.analysis.gamma.iter().copied());
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let cert = singularity_certificate(&session.spec, &tower, &cf, session.config.analysis.epsilon, &grid)?;
            serde_json::json!({
                "feasible": cert.witness.is_some(),
                "certificate": cert,
            })
        }
        Command::Dimension => {
            let tower = session.tower()?;
            let (cf, source) = session.measure_cf(&tower)?;
            let est = dimension(&session, &tower, &cf)?;
            if est.low_confidence {
                flags.push("dimension estimate has low confidence".into());
            }
            csv = Some(est.to_csv());
            serde_json::json!({ "measure_source": source, "estimate": est })
        }
        Command::Signature => {
            let tower = session.tower()?;
            let (cf, _) = session.measure_cf(&tower)?;
            to_value(&signature(&session.spec, &tower, &cf)?)
        }
        Command::Theorem1 => to_value(&theorem1(&session, &mut flags)?),
    };
    let result = serde_json::json!({
        "family": session.spec.family().name(),
        "omega": numeric::decimal(session.spec.omega(), (prec as f64 / std::f64::consts::LOG2_10).floor() as usize),
        "tuning": tuning,
        "depth": session.depth(),
        "data": result,
    });
    Ok(Outcome { command, precision_bits: prec, result, flags, csv })
}

fn rotnum(session: &Session, flags: &mut Vec<String>) -> Result<Value> {
    let spec = &session.spec;
    let digits = 40;
    match closest_return_quotients(spec, &spec.base_point(0)?, session.depth()) {
        Ok(r) => {
            if r.quotients.len() < session.depth() && r.rational_lock.is_none() {
                flags.push("fewer quotients than requested".into());
            }
            Ok(to_value(&r.report(digits)))
        }
        Err(Error::DepthExceeded { .. }) => {
            flags.push("closest returns ran out of orbit; Birkhoff bracket reported".into());
            Ok(to_value(&birkhoff_estimate(spec, 1 << 16)?.report(digits)))
        }
        Err(e) => Err(e),
    }
}

fn realbounds(session: &Session, tower: &PartitionTower) -> Result<RealBoundsReport> {
    let a = &session.config.analysis;
    let [lo, hi] = a.levels.unwrap_or([a.min_level, session.depth() - 1]);
    real_bounds(&session.spec, tower, lo..=hi, a.samples)
}

fn flag_bounds(rb: &RealBoundsReport, flags: &mut Vec<String>) {
    if !rb.constant.stabilized {
        flags.push("empirical constant did not stabilise".into());
    }
    for p in &rb.parabolic {
        if p.negative_fraction < 1.0 {
            flags.push(format!("Schwarzian of the return map not negative on bridge {} at level {}", p.bridge, p.level));
        }
    }
}

fn dimension(session: &Session, tower: &PartitionTower, cf: &ContinuedFraction) -> Result<DimensionEstimate> {
    let a = &session.config.analysis;
    let plan = SamplingPlan {
        min_level: a.min_level,
        max_level: session.measure_depth(),
        samples: a.samples,
        seed: a.seed,
        balls: true,
    };
    local_dimension_samples(&session.spec, tower, cf, &plan)
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    pub measure_source: &'static str,
    pub tau: f64,
    pub diophantine: DiophantineProfile,
    pub bound_constant: f64,
    pub bound_constant_levels: Vec<usize>,
    pub bounds: Theorem1Bounds,
    pub estimate: DimensionEstimate,
    pub within_bounds: bool,
    pub content_sums: Vec<ContentSum>,
}

fn theorem1(session: &Session, flags: &mut Vec<String>) -> Result<Theorem1Report> {
    let tower = session.tower()?;
    let (cf, source) = session.measure_cf(&tower)?;
    let a = &session.config.analysis;
    validate_map(&session.spec)?;
    let rb = realbounds(session, &tower)?;
    flag_bounds(&rb, flags);
    let profile_cf = ContinuedFraction::new(&cf.quotients()[..tower.depth()], tower.depth())?;
    let profile = diophantine_profile(&profile_cf, a.tau)?;
    let bounds = theorem1_bounds(a.tau, profile.nu1, profile.nu2, rb.constant.value)?;
    let est = dimension(session, &tower, &cf)?;
    if est.low_confidence {
        flags.push("dimension estimate has low confidence".into());
    }
    if bounds.lower_clamped {
        flags.push("lower bound formula exceeded 1 and was clamped".into());
    }
    let within_bounds = bounds.lower <= est.estimate && est.estimate <= bounds.upper;
    if est.estimate < bounds.lower {
        flags.push("estimate below the lower bound".into());
    }
    if est.estimate > bounds.upper + 0.1 {
        flags.push("estimate exceeds the upper bound by more than 0.1".into());
    }
    let mut content_sums = Vec::new();
    if a.tau > 0.0 {
        let d = a.content_dimension.unwrap_or(1.0 / (a.tau + 1.0) + 0.1);
        let levels: Vec<usize> = (1..tower.depth()).collect();
        for &g in &a.gamma {
            let s = hausdorff_content_sum(&session.spec, &tower, &levels, g, d, a.tau, rb.constant.value)?;
            content_sums.push(s);
        }
        if !content_sums.iter().any(|s| s.tails_decreasing) {
            flags.push("no gamma gave two non-empty cover levels with decreasing tails".into());
        }
    }
    Ok(Theorem1Report {
        measure_source: source,
        tau: a.tau,
        diophantine: profile,
        bound_constant: rb.constant.value,
        bound_constant_levels: rb.constant.levels.clone(),
        bounds,
        estimate: est,
        within_bounds,
        content_sums,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_both_omega_and_target() {
        let text = r#"{"map": {"family": "arnold_cubic", "omega": "0.6", "target_cf": [1]}}"#;
        assert!(matches!(RunConfig::from_json(text), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_analysis_values() {
        for analysis in [r#"{"depth": 2}"#, r#"{"gamma": [1.0]}"#, r#"{"gamma": [0.0]}"#] {
            let text = format!(r#"{{"map": {{"family": "arnold_cubic", "omega": 0.6}}, "analysis": {analysis}}}"#);
            assert!(RunConfig::from_json(&text).is_err(), "{analysis}");
        }
        let low = r#"{"map": {"family": "arnold_cubic", "omega": 0.6, "precision_bits": 64}}"#;
        assert!(RunConfig::from_json(low).is_err());
    }

    #[test]
    fn periodic_target_measure_source() {
        let cf = measure_cf_from_target(&[1, 2], 4).unwrap();
        assert_eq!(cf.quotients(), &[1, 2, 1, 2, 1, 2, 1]);
        assert_eq!(cf.tail(), &[2, 1]);
        assert_eq!(cf.a(8), 2);
        assert_eq!(cf.a(9), 1);
    }
}
