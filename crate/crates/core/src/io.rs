//! Run configuration, experiment dispatch and result files.
//!
//! A run writes `results.csv` (bulk samples or profile rows), `summary.json`
//! (estimates and verdicts) and `manifest.json` (the resolved configuration, its
//! hash and the tool version). Feeding `manifest.json` back to [`parse_config`]
//! reproduces `results.csv` byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{self, Estimate, ExperimentPlan};
use crate::hydro::{Density, LAW_J2_MEAN};
use crate::measures::MeasureKind;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "theorem1")]
    Theorem1,
    #[serde(rename = "theorem2")]
    Theorem2,
    #[serde(rename = "corollary3")]
    Corollary3,
    #[serde(rename = "theorem4")]
    Theorem4,
    #[serde(rename = "crossing")]
    Crossing,
    #[serde(rename = "localEq")]
    LocalEq,
    #[serde(rename = "tasepFK")]
    TasepFk,
    #[serde(rename = "mapping")]
    Mapping,
    #[serde(rename = "stationarity")]
    Stationarity,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Theorem1,
        ExperimentKind::Theorem2,
        ExperimentKind::Corollary3,
        ExperimentKind::Theorem4,
        ExperimentKind::Crossing,
        ExperimentKind::LocalEq,
        ExperimentKind::TasepFk,
        ExperimentKind::Mapping,
        ExperimentKind::Stationarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Theorem1 => "theorem1",
            ExperimentKind::Theorem2 => "theorem2",
            ExperimentKind::Corollary3 => "corollary3",
            ExperimentKind::Theorem4 => "theorem4",
            ExperimentKind::Crossing => "crossing",
            ExperimentKind::LocalEq => "localEq",
            ExperimentKind::TasepFk => "tasepFK",
            ExperimentKind::Mapping => "mapping",
            ExperimentKind::Stationarity => "stationarity",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::Theorem1 => "weighted moving-bond sums of stacked second-class particles",
            ExperimentKind::Theorem2 => "law of X2(t)/t from the reservoir step",
            ExperimentKind::Corollary3 => "current J2(t)/t seen by the second-class particle",
            ExperimentKind::Theorem4 => "second-class particle, current and X1 speed in the perturbed finite step",
            ExperimentKind::Crossing => "P(X2 > X3) for second- and third-class particles",
            ExperimentKind::LocalEq => "occupation and density profiles against the entropy solution",
            ExperimentKind::TasepFk => "exclusion second-class particle against the uniform law",
            ExperimentKind::Mapping => "pathwise gap map between exclusion and zero-range",
            ExperimentKind::Stationarity => "ring moments under the invariant product measures",
        }
    }

    /// Defaults `(t, N, rho, lambda, uGrid)` matching the acceptance runs.
    fn defaults(self) -> (f64, usize, Density, f64, &'static [f64]) {
        match self {
            ExperimentKind::Theorem1 => (400.0, 4000, Density::Finite(1.0), 0.0, &[0.2, 0.36, 0.49, 0.81]),
            ExperimentKind::Theorem2 | ExperimentKind::Corollary3 => (400.0, 4000, Density::Infinite, 0.0, &[]),
            ExperimentKind::Theorem4 => (400.0, 4000, Density::Finite(1.0), 0.5, &[]),
            ExperimentKind::Crossing => (200.0, 10_000, Density::Infinite, 0.0, &[]),
            ExperimentKind::LocalEq => (400.0, 4000, Density::Infinite, 0.0, &[0.09, 0.25, 0.49, 0.81]),
            ExperimentKind::TasepFk => (400.0, 4000, Density::Finite(1.0), 0.0, &[]),
            ExperimentKind::Mapping => (100.0, 100, Density::Finite(1.0), 0.0, &[]),
            ExperimentKind::Stationarity => (100.0, 400, Density::Finite(0.5), 0.0, &[]),
        }
    }
}

/// A density as written in the configuration: a number or `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensityValue {
    Number(f64),
    Text(String),
}

impl DensityValue {
    fn resolve(&self, path: &str) -> Result<Density> {
        match self {
            DensityValue::Number(v) if *v >= 0.0 && v.is_finite() => Ok(Density::Finite(*v)),
            DensityValue::Number(_) => Err(config_err(path, "must be a finite non-negative number or \"inf\"")),
            DensityValue::Text(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => Ok(Density::Infinite),
                _ => Err(config_err(path, format!("unrecognised density {s:?}"))),
            },
        }
    }
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parsed configuration. Absent fields take per-experiment defaults; the
/// manifest stores the resolved record so reruns do not depend on defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<DensityValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "Jmax", default, skip_serializing_if = "Option::is_none")]
    pub jmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring_size: Option<i64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_epsilon() -> f64 {
    0.02
}

fn default_delta() -> f64 {
    1e-3
}

impl RunConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        RunConfig {
            experiment,
            t: None,
            n: None,
            master_seed: 0,
            rho: None,
            lambda: None,
            jmax: None,
            u_grid: None,
            ring_size: None,
            m: None,
            out_dir: None,
            epsilon: default_epsilon(),
            delta: default_delta(),
        }
    }

    /// Copy with every defaulted parameter written out.
    pub fn resolved(&self) -> Result<RunConfig> {
        let plan = self.plan()?;
        let mut c = self.clone();
        c.t = Some(plan.t);
        c.n = Some(plan.n);
        c.rho = Some(match plan.rho {
            Density::Finite(v) => DensityValue::Number(v),
            Density::Infinite => DensityValue::Text("inf".into()),
        });
        c.lambda = Some(plan.lambda);
        c.jmax = Some(plan.jmax);
        c.u_grid = Some(plan.u_grid.clone());
        c.ring_size = Some(plan.ring_size);
        c.m = Some(plan.m);
        Ok(c)
    }

    /// Validated experiment plan.
    pub fn plan(&self) -> Result<ExperimentPlan> {
        let kind = self.experiment;
        let (t0, n0, rho0, lambda0, grid0) = kind.defaults();
        let t = self.t.unwrap_or(t0);
        if !(t > 0.0) || !t.is_finite() {
            return Err(config_err("t", "must be a positive finite number"));
        }
        let n = self.n.unwrap_or(n0);
        if n == 0 {
            return Err(config_err("N", "need at least one replica"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(config_err("epsilon", "must lie in (0, 1)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_err("delta", "must lie in (0, 1)"));
        }
        let rho = match &self.rho {
            Some(v) => v.resolve("rho")?,
            None => rho0,
        };
        let lambda = self.lambda.unwrap_or(lambda0);
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(config_err("lambda", "must be finite and non-negative"));
        }
        let u_grid = self.u_grid.clone().unwrap_or_else(|| grid0.to_vec());
        if let Some(i) = u_grid.iter().position(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err(config_err(&format!("uGrid[{i}]"), "must be finite and non-negative"));
        }
        let step = !matches!(kind, ExperimentKind::Mapping | ExperimentKind::Stationarity);
        if step && !rho.gt(Density::Finite(lambda)) && kind != ExperimentKind::TasepFk {
            return Err(config_err("rho", "rho must exceed lambda"));
        }
        match kind {
            ExperimentKind::Theorem2 | ExperimentKind::Corollary3 | ExperimentKind::Crossing => {
                if rho != Density::Infinite || lambda != 0.0 {
                    return Err(config_err("rho", "this experiment starts from rho = inf, lambda = 0"));
                }
            }
            ExperimentKind::Theorem4 => {
                let r = rho
                    .finite()
                    .ok_or_else(|| config_err("rho", "must be finite for theorem4"))?;
                if r - lambda > 1.0 {
                    return Err(config_err("rho", "rho−lambda ≤ 1 required"));
                }
            }
            ExperimentKind::Theorem1 | ExperimentKind::Stationarity => {
                if rho.is_infinite() {
                    return Err(config_err("rho", "must be finite for this experiment"));
                }
            }
            ExperimentKind::TasepFk => {
                let r = rho
                    .finite()
                    .ok_or_else(|| config_err("rho", "exclusion densities lie in [0, 1]"))?;
                if r > 1.0 || lambda > 1.0 {
                    return Err(config_err("rho", "exclusion densities lie in [0, 1]"));
                }
                if r < lambda {
                    return Err(config_err("rho", "rho must be at least lambda"));
                }
            }
            ExperimentKind::LocalEq | ExperimentKind::Mapping => {}
        }
        if kind == ExperimentKind::Stationarity {
            if let Some(r) = rho.finite() {
                if r > 1.0 {
                    return Err(config_err("rho", "the exclusion ring needs rho in [0, 1]"));
                }
            }
        }
        let ring_size = self.ring_size.unwrap_or(64);
        if ring_size < 2 {
            return Err(config_err("ringSize", "need at least two sites"));
        }
        let m = self.m.unwrap_or(50);
        if m < 2 {
            return Err(config_err("M", "need at least two particles"));
        }
        let mut plan = ExperimentPlan::new(t, n, self.master_seed)
            .with_densities(rho, lambda)
            .with_u_grid(u_grid)
            .with_jmax(self.jmax.unwrap_or(25));
        plan.ring_size = ring_size;
        plan.m = m;
        plan.epsilon = self.epsilon;
        plan.delta = self.delta;
        Ok(plan)
    }

    /// Hex SHA-256 of the resolved configuration's JSON.
    pub fn hash(&self) -> Result<String> {
        let text = serde_json::to_string(&self.resolved()?).map_err(|e| Error::Io(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

/// Parses a configuration document, or a manifest written by [`run`] (its
/// `config` member is used).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| config_err("<document>", e.to_string()))?;
    let body = match value.get("config") {
        Some(inner) if value.get("experiment").is_none() => inner.clone(),
        _ => value,
    };
    let config: RunConfig = serde_json::from_value(body).map_err(|e| config_err("<config>", e.to_string()))?;
    config.plan()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// One acceptance check: `value` compared against `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Verdict {
    fn at_most(criterion: impl Into<String>, value: f64, threshold: f64) -> Self {
        Verdict {
            criterion: criterion.into(),
            value,
            threshold,
            // estimates are count ratios; allow for their representation error
            passed: value <= threshold + 1e-12,
        }
    }
}

/// In-memory outcome of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub csv: Vec<u8>,
    pub summary: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub violations: usize,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        Ok(Table { w })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.w.write_record(fields)?;
        Ok(())
    }

    fn finish(self) -> Result<Vec<u8>> {
        self.w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

// Shortest round-trip decimal.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

fn estimate_gap(e: &Estimate, reference: f64) -> f64 {
    (e.point - reference).abs()
}

fn samples_table(column: &str, samples: &[f64]) -> Result<Vec<u8>> {
    let mut t = Table::new(&["replica", column])?;
    for (r, v) in samples.iter().enumerate() {
        t.row(&[r.to_string(), num(*v)])?;
    }
    t.finish()
}

/// Tolerances of the acceptance thresholds.
pub mod thresholds {
    pub const THEOREM2_SUP: f64 = 0.05;
    pub const COROLLARY3_MEAN: f64 = 0.03;
    pub const COROLLARY3_SUP: f64 = 0.05;
    pub const THEOREM1_GAP: f64 = 0.06;
    pub const THEOREM1_TAIL: f64 = 1e-7;
    pub const THEOREM4_SUP: f64 = 0.06;
    pub const THEOREM4_CURRENT: f64 = 0.03;
    pub const THEOREM4_SPEED: f64 = 0.02;
    pub const CROSSING: f64 = 0.025;
    pub const CROSSING_LIMIT: f64 = 2.0 / 3.0;
    pub const LOCAL_EQ: f64 = 0.03;
    pub const TASEP_FK_SUP: f64 = 0.05;
    pub const STATIONARITY_STDERRS: f64 = 3.0;
}

/// Runs the configured experiment and renders its outputs without touching disk.
pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    use thresholds::*;
    let plan = config.plan()?;
    let mut verdicts = Vec::new();
    let (csv, summary, violations) = match config.experiment {
        ExperimentKind::Theorem2 => {
            let rep = experiments::exp_theorem2(&plan)?;
            verdicts.push(Verdict::at_most("sup_distance", rep.summary.sup_distance, THEOREM2_SUP));
            (samples_table("x2_over_t", &rep.samples)?, to_json(&rep)?, rep.summary.violations)
        }
        ExperimentKind::Corollary3 => {
            let rep = experiments::exp_corollary3(&plan)?;
            verdicts.push(Verdict::at_most(
                "mean_gap",
                estimate_gap(&rep.mean, LAW_J2_MEAN),
                COROLLARY3_MEAN,
            ));
            verdicts.push(Verdict::at_most("sup_distance", rep.summary.sup_distance, COROLLARY3_SUP));
            (samples_table("j2_over_t", &rep.samples)?, to_json(&rep)?, rep.summary.violations)
        }
        ExperimentKind::Theorem1 => {
            let rep = experiments::exp_theorem1(&plan)?;
            let mut t = Table::new(&["u", "weighted_sum", "reference", "tail_bound", "stderr"])?;
            for p in &rep.points {
                t.row(&[num(p.u), num(p.weighted_sum), num(p.reference), num(p.tail_bound), num(p.stderr)])?;
                verdicts.push(Verdict::at_most(
                    format!("gap_at_u={}", p.u),
                    (p.weighted_sum - p.reference).abs(),
                    THEOREM1_GAP,
                ));
            }
            verdicts.push(Verdict::at_most("tail_bound", rep.tail_bound, THEOREM1_TAIL));
            verdicts.push(Verdict::at_most("label_order_violations", rep.label_order_violations as f64, 0.0));
            (t.finish()?, to_json(&rep)?, rep.violations)
        }
        ExperimentKind::Theorem4 => {
            let rep = experiments::exp_theorem4(&plan)?;
            let mut t = Table::new(&["replica", "x2_over_t", "j2_over_t", "x1_over_t"])?;
            for (r, s) in rep.samples.iter().enumerate() {
                t.row(&[r.to_string(), num(s.0), num(s.1), num(s.2)])?;
            }
            verdicts.push(Verdict::at_most("sup_distance", rep.summary.sup_distance, THEOREM4_SUP));
            verdicts.push(Verdict::at_most(
                "mean_current_gap",
                estimate_gap(&rep.mean_current, rep.reference_current),
                THEOREM4_CURRENT,
            ));
            verdicts.push(Verdict::at_most(
                "x1_speed_gap",
                estimate_gap(&rep.x1_speed, rep.reference_speed),
                THEOREM4_SPEED,
            ));
            (t.finish()?, to_json(&rep)?, rep.summary.violations)
        }
        ExperimentKind::Crossing => {
            let rep = experiments::exp_crossing(&plan)?;
            let mut t = Table::new(&["replica", "x2", "x3", "overtaken"])?;
            for (r, s) in rep.samples.iter().enumerate() {
                t.row(&[r.to_string(), s.0.to_string(), s.1.to_string(), s.2.to_string()])?;
            }
            verdicts.push(Verdict::at_most(
                "crossing_gap",
                estimate_gap(&rep.crossing, CROSSING_LIMIT),
                CROSSING,
            ));
            (t.finish()?, to_json(&rep)?, rep.violations)
        }
        ExperimentKind::LocalEq => {
            let rep = experiments::exp_local_equilibrium(&plan)?;
            let mut t = Table::new(&[
                "u",
                "site",
                "occupied",
                "occupied_stderr",
                "occupied_reference",
                "density",
                "density_stderr",
                "density_reference",
            ])?;
            for p in &rep.points {
                t.row(&[
                    num(p.u),
                    p.site.to_string(),
                    num(p.occupied.point),
                    num(p.occupied.stderr),
                    num(p.occupied_reference),
                    num(p.density.point),
                    num(p.density.stderr),
                    opt(p.density_reference),
                ])?;
                verdicts.push(Verdict::at_most(
                    format!("occupied_gap_at_u={}", p.u),
                    estimate_gap(&p.occupied, p.occupied_reference),
                    LOCAL_EQ,
                ));
            }
            (t.finish()?, to_json(&rep)?, rep.violations)
        }
        ExperimentKind::TasepFk => {
            let rep = experiments::exp_tasep_fk(&plan)?;
            verdicts.push(Verdict::at_most("sup_distance", rep.summary.sup_distance, TASEP_FK_SUP));
            (samples_table("y2_over_t", &rep.samples)?, to_json(&rep)?, rep.summary.violations)
        }
        ExperimentKind::Mapping => {
            let rep = experiments::exp_mapping(&plan)?;
            let mut t = Table::new(&[
                "replica",
                "events",
                "first_divergence",
                "snapshot_mismatches",
                "second_class_events",
                "second_class_divergence",
                "identity_mismatches",
                "reservoir_exhausted",
            ])?;
            for s in &rep.seeds {
                t.row(&[
                    s.replica.to_string(),
                    s.events.to_string(),
                    opt(s.first_divergence),
                    s.snapshot_mismatches.to_string(),
                    s.second_class_events.to_string(),
                    opt(s.second_class_divergence),
                    s.identity_mismatches.to_string(),
                    s.reservoir_exhausted.to_string(),
                ])?;
            }
            verdicts.push(Verdict::at_most("divergent_replicas", rep.divergent_replicas as f64, 0.0));
            verdicts.push(Verdict::at_most("identity_failures", rep.identity_failures as f64, 0.0));
            let exhausted = rep.seeds.iter().filter(|s| s.reservoir_exhausted).count();
            verdicts.push(Verdict::at_most("reservoir_exhausted", exhausted as f64, 0.0));
            (t.finish()?, to_json(&rep)?, 0)
        }
        ExperimentKind::Stationarity => {
            let zr = experiments::exp_stationarity_ring(&plan, MeasureKind::ZeroRangeGeometric)?;
            let se = experiments::exp_stationarity_ring(&plan, MeasureKind::ExclusionBernoulli)?;
            let mut t2 = Table::new(&["measure", "observable", "estimate", "stderr", "reference"])?;
            for (name, rep) in [("zeroRange", &zr), ("exclusion", &se)] {
                t2.row(&[name.into(), "mean".into(), num(rep.mean.point), num(rep.mean.stderr), num(rep.mean_reference)])?;
                t2.row(&[
                    name.into(),
                    "occupied".into(),
                    num(rep.occupied.point),
                    num(rep.occupied.stderr),
                    num(rep.occupied_reference),
                ])?;
                verdicts.push(Verdict {
                    criterion: format!("{name}_within_3_stderr"),
                    value: (rep.mean.point - rep.mean_reference).abs().max((rep.occupied.point - rep.occupied_reference).abs()),
                    threshold: STATIONARITY_STDERRS,
                    passed: rep.within(STATIONARITY_STDERRS),
                });
            }
            let summary = serde_json::json!({ "zeroRange": to_json(&zr)?, "exclusion": to_json(&se)? });
            (t2.finish()?, summary, 0)
        }
    };
    Ok(RunOutput {
        csv,
        summary,
        verdicts,
        violations,
    })
}

/// Process exit status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Failure = 1,
    ThresholdFailed = 2,
    LightConeAbort = 3,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    config_hash: String,
    seed: u64,
    replicas: usize,
    wall_time_seconds: f64,
    violations: Option<usize>,
    status: &'static str,
    verdicts: &'a [Verdict],
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs `config`, writes the three result files into `out_dir` (or the
/// configured `outDir`, or the working directory) and returns the exit status.
pub fn run(config: &RunConfig, out_dir: Option<&Path>) -> Result<ExitStatus> {
    let resolved = config.resolved()?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let start = Instant::now();
    let outcome = execute(&resolved);
    let wall = start.elapsed().as_secs_f64();
    let (status, verdicts, violations, summary) = match outcome {
        Ok(out) => {
            fs::write(dir.join("results.csv"), &out.csv)
                .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            let status = if out.passed() {
                ExitStatus::Ok
            } else {
                ExitStatus::ThresholdFailed
            };
            let summary = serde_json::json!({
                "experiment": resolved.experiment.name(),
                "passed": out.passed(),
                "verdicts": &out.verdicts,
                "report": out.summary,
            });
            (status, out.verdicts, Some(out.violations), summary)
        }
        Err(Error::LightConeAbort { violations, replicas }) => {
            let summary = serde_json::json!({
                "experiment": resolved.experiment.name(),
                "passed": false,
                "error": format!("light-cone guard violated in {violations} of {replicas} replicas"),
            });
            (ExitStatus::LightConeAbort, Vec::new(), Some(violations), summary)
        }
        Err(e) => return Err(e),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    let manifest = Manifest {
        tool: "rarefan",
        version: VERSION,
        config: &resolved,
        config_hash: resolved.hash()?,
        seed: resolved.master_seed,
        replicas: resolved.n.unwrap_or(0),
        wall_time_seconds: wall,
        violations,
        status: match status {
            ExitStatus::Ok => "passed",
            ExitStatus::ThresholdFailed => "threshold_failed",
            ExitStatus::LightConeAbort => "light_cone_abort",
            ExitStatus::Failure => "failed",
        },
        verdicts: &verdicts,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(status)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_valid() {
        let c = parse_config(r#"{"experiment":"theorem2","t":400,"N":2000,"masterSeed":42}"#).unwrap();
        let p = c.plan().unwrap();
        assert_eq!(p.n, 2000);
        assert_eq!(p.epsilon, 0.02);
        assert_eq!(p.delta, 1e-3);
        assert_eq!(p.rho, Density::Infinite);
    }

    #[test]
    fn step_ordering_is_enforced() {
        let e = parse_config(r#"{"experiment":"theorem4","rho":0.5,"lambda":1}"#).unwrap_err();
        assert!(e.to_string().contains("rho must exceed lambda"), "{e}");
        let e = parse_config(r#"{"experiment":"theorem4","rho":2,"lambda":0.5}"#).unwrap_err();
        assert!(e.to_string().contains("rho−lambda ≤ 1 required"), "{e}");
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let e = parse_config(r#"{"experiment":"theorem2","bogus":1}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = parse_config(r#"{"experiment":"theorem1","uGrid":[0.2,-1]}"#).unwrap_err();
        assert!(e.to_string().starts_with("uGrid[1]"), "{e}");
        assert!(parse_config(r#"{"experiment":"nope"}"#).is_err());
        assert!(parse_config("{").is_err());
        let c = parse_config(r#"{"experiment":"localEq","rho":"inf"}"#).unwrap();
        assert_eq!(c.plan().unwrap().rho, Density::Infinite);
    }

    #[test]
    fn manifest_round_trip() {
        let c = parse_config(r#"{"experiment":"crossing","t":3,"N":5,"masterSeed":7}"#).unwrap();
        let r = c.resolved().unwrap();
        let doc = serde_json::json!({ "tool": "rarefan", "config": r });
        let back = parse_config(&doc.to_string()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn small_runs_render() {
        for kind in ExperimentKind::ALL {
            let mut c = RunConfig::new(kind);
            c.t = Some(4.0);
            c.n = Some(8);
            c.m = Some(6);
            c.ring_size = Some(8);
            c.jmax = Some(25);
            let out = execute(&c).unwrap();
            assert!(!out.csv.is_empty(), "{kind:?}");
            assert!(!out.verdicts.is_empty(), "{kind:?}");
            assert_eq!(execute(&c).unwrap().csv, out.csv);
        }
    }
}
