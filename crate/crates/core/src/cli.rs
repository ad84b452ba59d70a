//! Batch front end: run configuration, the five commands and their reports.
//!
//! Reports are pretty-printed JSON; trajectories are comma-separated text
//! with a one-line header. Identical configuration and seed give
//! byte-identical output.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundles::{CotangentPoint, TangentPoint};
use crate::constraint_algo::{
    dirac_iterate, project_to_constraints, AlgoOptions, AlgoReport, Constraint, ConstraintError, ConstraintTag,
    ProjectionOptions,
};
use crate::genfun::{
    morse_rank_ok, solve_critical_fiber, MorseFamily, NewtonOptions, ReductionAnchor, ReductionSeed,
};
use crate::integrator::{drift_report, integrate, IntegrateOptions, IntegratorError, Trajectory};
use crate::legendre::{
    classical_hamiltonian, dirac_hamiltonian_on_graph, hyperregular_probe, reduce_energy_family, slow_legendre,
    HyperregularVerdict,
};
use crate::systems::{
    build_dynamics, hyperboloid_family, relativistic_lagrangian, singularity_scan, statics_constitutive,
    DynamicsSystem, Potential, RankProfile, StaticsInput, StaticsOutcome, SystemError, SystemId, SystemParams,
};
use crate::verify::{run_suite, VerifyError, VerifyOptions, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::UnknownSystem(_)
            | SystemError::Param(_)
            | SystemError::NoDynamics(_)
            | SystemError::NoStatics(_) => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<ConstraintError> for CliError {
    fn from(e: ConstraintError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<IntegratorError> for CliError {
    fn from(e: IntegratorError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

fn numeric<E: fmt::Display>(e: E) -> CliError {
    CliError::Numeric(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analyze,
    Legendre,
    Integrate,
    Statics,
    Verify,
}

/// Command-line flags. Values from a `--config` file take precedence.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "implicit-dynamics", version, about = "Implicit dynamics, Legendre transformations and constraint analysis")]
pub struct Flags {
    /// analyze | legendre | integrate | statics | verify
    #[arg(value_enum)]
    pub command: Option<Command>,
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gauge: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Two-particle potential: quadratic[:ω] or constant[:c].
    #[arg(long = "V", alias = "potential")]
    pub potential: Option<String>,
    #[arg(long, hide = true)]
    pub inject_sign_flip: bool,
}

/// Structured configuration document (TOML).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub system: Option<String>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub gauge: Option<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: SystemParams,
    /// Input point for the statics command.
    pub input: Option<StaticsInput>,
    #[serde(default)]
    pub inject_sign_flip: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::parse(&text)
    }

    /// Layers `self` over `base`: every field set here wins.
    pub fn over(self, base: RunConfig) -> RunConfig {
        let p = self.params;
        let b = base.params;
        RunConfig {
            command: self.command.or(base.command),
            system: self.system.or(base.system),
            seed: self.seed.or(base.seed),
            tol: self.tol.or(base.tol),
            samples: self.samples.or(base.samples),
            dt: self.dt.or(base.dt),
            steps: self.steps.or(base.steps),
            gauge: self.gauge.or(base.gauge),
            out: self.out.or(base.out),
            params: SystemParams {
                mass: p.mass.or(b.mass),
                charge: p.charge.or(b.charge),
                b: p.b.or(b.b),
                k: p.k.or(b.k),
                a: p.a.or(b.a),
                m1: p.m1.or(b.m1),
                m2: p.m2.or(b.m2),
                potential: p.potential.or(b.potential),
            },
            input: self.input.or(base.input),
            inject_sign_flip: self.inject_sign_flip || base.inject_sign_flip,
        }
    }
}

/// quadratic, quadratic:ω, constant or constant:c.
pub fn parse_potential(s: &str) -> Result<Potential, CliError> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    let value = |default: f64| -> Result<f64, CliError> {
        arg.map_or(Ok(default), |a| {
            a.parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad potential parameter {a:?}")))
        })
    };
    match kind {
        "quadratic" => Ok(Potential::Quadratic { omega: value(1.0)? }),
        "constant" => Ok(Potential::Constant { c: value(0.0)? }),
        other => Err(CliError::Config(format!(
            "unknown potential {other:?}; expected quadratic[:ω] or constant[:c]"
        ))),
    }
}

impl Flags {
    pub fn to_config(&self) -> Result<RunConfig, CliError> {
        Ok(RunConfig {
            command: self.command,
            system: self.system.clone(),
            seed: self.seed,
            tol: self.tol,
            samples: self.samples,
            dt: self.dt,
            steps: self.steps,
            gauge: self.gauge.clone(),
            out: self.out.clone(),
            params: SystemParams {
                potential: self.potential.as_deref().map(parse_potential).transpose()?,
                ..Default::default()
            },
            input: None,
            inject_sign_flip: self.inject_sign_flip,
        })
    }

    /// Flags over defaults, then the config file over both.
    pub fn resolve(&self) -> Result<Run, CliError> {
        let flags = self.to_config()?;
        let merged = match &self.config {
            Some(path) => RunConfig::load(path)?.over(flags),
            None => flags,
        };
        Run::from_config(merged)
    }
}

/// Numeric policy embedded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericPolicy {
    pub seed: u64,
    pub tol: f64,
    pub samples: usize,
    pub dt: f64,
    pub steps: usize,
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub command: Command,
    pub system: Option<SystemId>,
    pub policy: NumericPolicy,
    pub gauge: Option<String>,
    pub out: Option<PathBuf>,
    pub params: SystemParams,
    pub input: Option<StaticsInput>,
    pub inject_sign_flip: bool,
}

impl Run {
    pub fn from_config(c: RunConfig) -> Result<Run, CliError> {
        let command = c
            .command
            .ok_or_else(|| CliError::Config("no command given (analyze, legendre, integrate, statics, verify)".into()))?;
        let seed = c
            .seed
            .ok_or_else(|| CliError::Config("an RNG seed is required (--seed or `seed` in the config)".into()))?;
        let system = c.system.as_deref().map(str::parse::<SystemId>).transpose()?;
        let policy = NumericPolicy {
            seed,
            tol: c.tol.unwrap_or(1e-8),
            samples: c.samples.unwrap_or(match command {
                Command::Verify => 20,
                _ => 32,
            }),
            dt: c.dt.unwrap_or(1e-3),
            steps: c.steps.unwrap_or(1000),
        };
        for (name, v) in [("tol", policy.tol), ("dt", policy.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if policy.samples == 0 {
            return Err(CliError::Config("samples must be positive".into()));
        }
        if system.is_none() && command != Command::Verify {
            return Err(CliError::Config("--system is required for this command".into()));
        }
        Ok(Run {
            command,
            system,
            policy,
            gauge: c.gauge,
            out: c.out,
            params: c.params,
            input: c.input,
            inject_sign_flip: c.inject_sign_flip,
        })
    }

    fn system_id(&self) -> SystemId {
        self.system.expect("checked in from_config")
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// The JSON report.
    pub report: String,
    /// Comma-separated trajectory for the integrate command.
    pub trajectory: Option<String>,
    pub exit_code: i32,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    command: Command,
    system: SystemId,
    policy: NumericPolicy,
    params: crate::systems::Resolved,
    exclusion: Option<String>,
    algorithm: AlgoReport,
}

pub fn cmd_analyze(run: &Run) -> Result<Outcome, CliError> {
    let sys = build_dynamics(run.system_id(), &run.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.policy.seed);
    let seeds: Vec<CotangentPoint> = (0..run.policy.samples).map(|_| sys.sample_seed(&mut rng, 1e-3)).collect();
    let opts = AlgoOptions {
        tol: run.policy.tol,
        ..Default::default()
    };
    let res = dirac_iterate(&sys.family, &sys.primary, &seeds, &opts)?;
    let report = AnalyzeReport {
        command: Command::Analyze,
        system: sys.id,
        policy: run.policy,
        params: sys.params,
        exclusion: sys.family.exclusion_name().map(str::to_string),
        algorithm: res.report,
    };
    Ok(Outcome {
        report: to_json(&report),
        trajectory: None,
        exit_code: EXIT_OK,
    })
}

#[derive(Debug, Serialize)]
struct EnergyFamilyRow {
    fiber_dim: usize,
    samples: usize,
    rank_ok_at_all_samples: bool,
    min_rank: usize,
    required_rank: usize,
}

#[derive(Debug, Serialize)]
struct ReductionRow {
    name: String,
    eliminated: Vec<usize>,
    samples: usize,
    max_deviation: f64,
    local_only: bool,
    note: String,
}

#[derive(Debug, Serialize)]
struct GraphRow {
    name: String,
    samples: usize,
    max_abs_value: f64,
    max_velocity_derivative: f64,
}

#[derive(Debug, Serialize)]
struct LegendreReport {
    command: Command,
    system: SystemId,
    policy: NumericPolicy,
    hyperregular: Option<HyperregularVerdict>,
    energy_family: EnergyFamilyRow,
    reductions: Vec<ReductionRow>,
    graph: Vec<GraphRow>,
}

fn energy_family_row(sys: &DynamicsSystem, rng: &mut ChaCha8Rng, n: usize) -> Result<EnergyFamilyRow, CliError> {
    let ef = slow_legendre(&sys.lagrangian);
    let (mut ok, mut min_rank, mut required) = (true, usize::MAX, 0);
    for _ in 0..n {
        let (q, v, y) = sys.sample_tangent(rng);
        let z = sys.lagrange_point(&q, &v, &y)?;
        let r = morse_rank_ok(&ef.family, &[q, z.p].concat(), &[y, v].concat()).map_err(numeric)?;
        ok &= r.ok;
        min_rank = min_rank.min(r.rank);
        required = r.required;
    }
    Ok(EnergyFamilyRow {
        fiber_dim: ef.family.fiber_dim(),
        samples: n,
        rank_ok_at_all_samples: ok,
        min_rank,
        required_rank: required,
    })
}

fn reduction_rows(sys: &DynamicsSystem, rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<ReductionRow>, CliError> {
    let mut rows = Vec::new();
    match sys.id {
        SystemId::Em3d => {
            let red = sys.reduced_energy_family()?;
            let l = sys.lagrangian.plain_lagrangian().map_err(numeric)?;
            let mut worst = 0.0f64;
            for _ in 0..n {
                let x = sys.sample_on_c(rng);
                let h = classical_hamiltonian(l, &x, &vec![0.0; x.dim()]).map_err(numeric)?;
                let u = red.family.generator().value(&x.coords()).map_err(numeric)?;
                worst = worst.max((u - h.value).abs());
            }
            rows.push(ReductionRow {
                name: "all velocities eliminated vs classical Hamiltonian".into(),
                eliminated: red.report.eliminated,
                samples: n,
                max_deviation: worst,
                local_only: red.report.local_only,
                note: "hyperregular".into(),
            });
        }
        SystemId::Kaluza5d => {
            let red = sys.reduced_energy_family()?;
            let mut worst = 0.0f64;
            for _ in 0..n {
                let x = sys.sample_seed(rng, 0.3).coords();
                let v0: f64 = rng.gen_range(-1.0..1.0);
                let u = red.family.generator().value(&red.family.point(&x, &[v0])).map_err(numeric)?;
                let h = sys.dirac.base_h.value(&x).map_err(numeric)? + v0 * sys.dirac.constraints[0].value(&x).map_err(numeric)?;
                worst = worst.max((u - h).abs());
            }
            rows.push(ReductionRow {
                name: "spatial velocities eliminated vs H̄ + v(p₀ − e)".into(),
                eliminated: red.report.eliminated,
                samples: n,
                max_deviation: worst,
                local_only: red.report.local_only,
                note: "the remaining fiber variable is the multiplier of p₀ − e".into(),
            });
        }
        SystemId::Massless => {
            let ef = slow_legendre(&sys.lagrangian);
            let start = sys.default_start();
            let anchor = ReductionAnchor {
                q: start.coords(),
                kept: vec![1.0],
                seed: ReductionSeed::Fixed(vec![0.0; 4]),
            };
            let red = reduce_energy_family(&ef, &[1, 2, 3, 4], &anchor, &NewtonOptions::default()).map_err(numeric)?;
            let mut worst = 0.0f64;
            for _ in 0..n {
                let x = sys.sample_seed(rng, 0.3).coords();
                let y: f64 = rng.gen_range(0.5..1.5);
                let u = red.family.generator().value(&red.family.point(&x, &[y])).map_err(numeric)?;
                let h = y * sys.dirac.constraints[0].value(&x).map_err(numeric)?;
                worst = worst.max((u - h).abs());
            }
            rows.push(ReductionRow {
                name: "velocities eliminated vs (y/2) g⁻¹(p, p)".into(),
                eliminated: red.report.eliminated,
                samples: n,
                max_deviation: worst,
                local_only: red.report.local_only,
                note: "the auxiliary variable y becomes the multiplier".into(),
            });
        }
        SystemId::Relativistic => rows.push(hyperboloid_row(sys, rng, n)?),
        _ => {}
    }
    Ok(rows)
}

/// Critical points of the hyperboloid family over (v, λ) at fixed v₀ and
/// their values against ±v₀(‖p − eA‖ ∓ m).
fn hyperboloid_row(sys: &DynamicsSystem, rng: &mut ChaCha8Rng, n: usize) -> Result<ReductionRow, CliError> {
    let fam = hyperboloid_family(&sys.params)?;
    let sub = MorseFamily::new(9, 5, fam.generator().clone()).map_err(numeric)?;
    let m = sys.params.mass;
    let mut worst = 0.0f64;
    let mut branches = 0usize;
    for _ in 0..n {
        let x = sys.sample_on_c(rng).coords();
        let v0: f64 = rng.gen_range(0.5..1.5);
        let em = sys.em.as_ref().expect("relativistic system carries a potential");
        let a = em.a_at(&x[..4]);
        let pi: Vec<f64> = (0..4).map(|i| x[4 + i] - em.e * a[i]).collect();
        let norm = (pi[0] * pi[0] - pi[1..].iter().map(|v| v * v).sum::<f64>()).sqrt();
        // v = ±v₀ g⁻¹π/‖π‖ with λ from ‖π‖ = |m − 2λv₀|
        let vdir: Vec<f64> = [pi[0], -pi[1], -pi[2], -pi[3]].iter().map(|c| c * v0 / norm).collect();
        let seeds = vec![
            [vdir.iter().map(|c| c * 0.9).collect::<Vec<_>>(), vec![(m - norm) / (2.0 * v0) + 0.1]].concat(),
            [vdir.iter().map(|c| -c * 0.9).collect::<Vec<_>>(), vec![(m + norm) / (2.0 * v0) - 0.1]].concat(),
        ];
        let base = [x.clone(), vec![v0]].concat();
        let found = solve_critical_fiber(&sub, &base, &seeds, &NewtonOptions::default()).map_err(numeric)?;
        branches = branches.max(found.len());
        for y in &found {
            let u = sub.generator().value(&sub.point(&base, y)).map_err(numeric)?;
            let plus = v0 * (norm - m);
            let minus = -v0 * (norm + m);
            worst = worst.max((u - plus).abs().min((u - minus).abs()));
        }
    }
    Ok(ReductionRow {
        name: "hyperboloid fibration: critical values vs ±v₀(‖p − eA‖ ∓ m)".into(),
        eliminated: vec![1, 2, 3, 4, 5],
        samples: n,
        max_deviation: worst,
        local_only: true,
        note: format!("{branches} critical branches per point"),
    })
}

fn graph_rows(sys: &DynamicsSystem, rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<GraphRow>, CliError> {
    if sys.id != SystemId::Relativistic {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for (sign, name) in [(1.0, "m‖q̇‖ + eA·q̇"), (-1.0, "−m‖q̇‖ + eA·q̇")] {
        let l = relativistic_lagrangian(sign, &sys.params);
        let (mut value, mut deriv) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let (q, v, _) = sys.sample_tangent(rng);
            let p = crate::legendre::legendre_map(&l, &TangentPoint::new(q.clone(), v.clone()).map_err(numeric)?)
                .map_err(numeric)?;
            let g = dirac_hamiltonian_on_graph(&l, &q, &p.p, &v, 1e-10).map_err(numeric)?;
            value = value.max(g.value.abs());
            deriv = deriv.max(g.velocity_derivative);
        }
        rows.push(GraphRow {
            name: name.into(),
            samples: n,
            max_abs_value: value,
            max_velocity_derivative: deriv,
        });
    }
    Ok(rows)
}

pub fn cmd_legendre(run: &Run) -> Result<Outcome, CliError> {
    let sys = build_dynamics(run.system_id(), &run.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.policy.seed);
    let n = run.policy.samples;
    let hyperregular = match sys.lagrangian.plain_lagrangian() {
        Ok(l) => {
            let pts = (0..n)
                .map(|_| {
                    let (q, v, _) = sys.sample_tangent(&mut rng);
                    TangentPoint::new(q, v).map_err(numeric)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(hyperregular_probe(l, &pts, run.policy.tol).map_err(numeric)?)
        }
        Err(_) => None,
    };
    let report = LegendreReport {
        command: Command::Legendre,
        system: sys.id,
        policy: run.policy,
        hyperregular,
        energy_family: energy_family_row(&sys, &mut rng, n)?,
        reductions: reduction_rows(&sys, &mut rng, n)?,
        graph: graph_rows(&sys, &mut rng, n)?,
    };
    Ok(Outcome {
        report: to_json(&report),
        trajectory: None,
        exit_code: EXIT_OK,
    })
}

#[derive(Debug, Serialize)]
struct DriftSummary {
    command: Command,
    system: SystemId,
    policy: NumericPolicy,
    gauge: String,
    constraints: Vec<String>,
    steps_taken: usize,
    final_time: f64,
    max_drift: f64,
    max_drift_per_constraint: Vec<f64>,
    start: Vec<f64>,
    end: Vec<f64>,
}

/// Header `t,q0..,p0..,v0..` and one row per stored state.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let m = traj.states.first().map_or(0, |x| x.dim());
    let k = traj.gauge_values.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for i in 0..m {
        out.push_str(&format!(",q{i}"));
    }
    for i in 0..m {
        out.push_str(&format!(",p{i}"));
    }
    for i in 0..k {
        out.push_str(&format!(",v{i}"));
    }
    out.push('\n');
    for ((t, x), v) in traj.times.iter().zip(&traj.states).zip(&traj.gauge_values) {
        out.push_str(&format!("{t:e}"));
        for c in x.coords().iter().chain(v) {
            out.push_str(&format!(",{c:e}"));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_integrate(run: &Run) -> Result<Outcome, CliError> {
    let sys = build_dynamics(run.system_id(), &run.params)?;
    let gauge_name = run.gauge.clone().unwrap_or_else(|| sys.default_gauge_name().to_string());
    let gauge = sys.gauge(&gauge_name)?;
    let mut constraints = sys.primary.clone();
    if let Some(spec) = sys.two_particle {
        constraints.constraints.push(Constraint {
            field: spec.psi(),
            tag: ConstraintTag(1),
        });
    }
    let x0 = sys.default_start();
    let x0 = if constraints.is_empty() {
        x0
    } else {
        project_to_constraints(&x0, &constraints, &ProjectionOptions::default())?
    };
    let opts = IntegrateOptions {
        dt: run.policy.dt,
        steps: run.policy.steps,
        ..Default::default()
    };
    let traj = integrate(&sys.dirac, &gauge, &x0, &opts)?;
    let drift = drift_report(&traj, &constraints)?;
    let summary = DriftSummary {
        command: Command::Integrate,
        system: sys.id,
        policy: run.policy,
        gauge: gauge_name,
        constraints: constraints.fields().iter().map(|f| f.name().to_string()).collect(),
        steps_taken: traj.len().saturating_sub(1),
        final_time: *traj.times.last().unwrap_or(&0.0),
        max_drift: drift.max,
        max_drift_per_constraint: drift.per_constraint,
        start: x0.coords(),
        end: traj.last().map(|x| x.coords()).unwrap_or_default(),
    };
    Ok(Outcome {
        report: to_json(&summary),
        trajectory: Some(trajectory_csv(&traj)),
        exit_code: EXIT_OK,
    })
}

#[derive(Debug, Serialize)]
struct StaticsReport {
    command: Command,
    system: SystemId,
    policy: NumericPolicy,
    outcome: StaticsOutcome,
    residual_ok: bool,
    rank_profile: Option<RankProfile>,
}

pub fn cmd_statics(run: &Run) -> Result<Outcome, CliError> {
    let id = run.system_id();
    let params = run.params.resolve(id)?;
    let input = match run.input {
        Some(i) => i,
        None => match id {
            SystemId::ElasticPoint => StaticsInput::Point { x: 1.0, y: 2.0 },
            SystemId::BeadCircle => StaticsInput::Circle { theta: 0.3, lambda: 0.5 },
            SystemId::ElasticCircle => StaticsInput::Polar {
                rho: params.a,
                theta: 0.3,
            },
            other => return Err(CliError::Config(SystemError::NoStatics(other).to_string())),
        },
    };
    let outcome = statics_constitutive(id, &params, input)?;
    let rank_profile = (id == SystemId::ElasticCircle).then(|| singularity_scan(&params, &[1.0, 1e-6, 1e-12, 0.0, -0.5], 0.3));
    let report = StaticsReport {
        command: Command::Statics,
        system: id,
        policy: run.policy,
        residual_ok: outcome.residual <= run.policy.tol,
        outcome,
        rank_profile,
    };
    let exit_code = if report.residual_ok { EXIT_OK } else { EXIT_VERIFY };
    Ok(Outcome {
        report: to_json(&report),
        trajectory: None,
        exit_code,
    })
}

#[derive(Debug, Serialize)]
struct VerifyDocument {
    command: Command,
    policy: NumericPolicy,
    inject_sign_flip: bool,
    result: VerifyReport,
}

pub fn cmd_verify(run: &Run) -> Result<Outcome, CliError> {
    let result = run_suite(&VerifyOptions {
        seed: run.policy.seed,
        samples: run.policy.samples,
        inject_sign_flip: run.inject_sign_flip,
    })?;
    let exit_code = if result.passed { EXIT_OK } else { EXIT_VERIFY };
    let doc = VerifyDocument {
        command: Command::Verify,
        policy: run.policy,
        inject_sign_flip: run.inject_sign_flip,
        result,
    };
    Ok(Outcome {
        report: to_json(&doc),
        trajectory: None,
        exit_code,
    })
}

pub fn execute(run: &Run) -> Result<Outcome, CliError> {
    match run.command {
        Command::Analyze => cmd_analyze(run),
        Command::Legendre => cmd_legendre(run),
        Command::Integrate => cmd_integrate(run),
        Command::Statics => cmd_statics(run),
        Command::Verify => cmd_verify(run),
    }
}

/// Writes the outputs of a run. With `--out`, the report (or, for integrate,
/// the trajectory) goes to that path and an integrate drift summary to
/// `<out>.drift.json`.
pub fn write_outputs(outcome: &Outcome, out: Option<&Path>) -> Result<(), CliError> {
    let Some(path) = out else { return Ok(()) };
    let write = |p: &Path, text: &str| {
        std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    match &outcome.trajectory {
        Some(csv) => {
            write(path, csv)?;
            let mut drift = path.as_os_str().to_owned();
            drift.push(".drift.json");
            write(Path::new(&drift), &outcome.report)
        }
        None => write(path, &outcome.report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_of(args: &[&str]) -> Result<Run, CliError> {
        let mut full = vec!["implicit-dynamics"];
        full.extend_from_slice(args);
        Flags::try_parse_from(full).map_err(|e| CliError::Config(e.to_string()))?.resolve()
    }

    #[test]
    fn seed_is_mandatory() {
        let e = run_of(&["analyze", "--system", "relativistic"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn unknown_system_is_config_error() {
        let e = run_of(&["analyze", "--system", "nope", "--seed", "1"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn config_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 9\nsamples = 7\n[params]\nmass = 2.0\n").unwrap();
        let run = run_of(&["analyze", "--system", "relativistic", "--seed", "1", "--samples", "3", "--config", path.to_str().unwrap()]).unwrap();
        assert_eq!(run.policy.seed, 9);
        assert_eq!(run.policy.samples, 7);
        assert_eq!(run.params.mass, Some(2.0));
        assert_eq!(run.system, Some(SystemId::Relativistic));
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        assert!(RunConfig::parse("sede = 3").is_err());
    }

    #[test]
    fn analyze_reports_verdicts() {
        let r = execute(&run_of(&["analyze", "--system", "two-particle", "--V", "quadratic", "--seed", "3", "--samples", "16"]).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.report).unwrap();
        assert_eq!(v["algorithm"]["verdict"], "integrable");
        assert_eq!(v["algorithm"]["secondary_count"], 1);
        assert_eq!(v["policy"]["seed"], 3);
        for sys in ["relativistic", "em-3d"] {
            let r = execute(&run_of(&["analyze", "--system", sys, "--seed", "3", "--samples", "8"]).unwrap()).unwrap();
            let v: serde_json::Value = serde_json::from_str(&r.report).unwrap();
            assert_eq!(v["algorithm"]["verdict"], "integrable");
            assert_eq!(v["algorithm"]["secondary_count"], 0);
        }
    }

    #[test]
    fn potential_parsing() {
        assert_eq!(parse_potential("constant:2").unwrap(), Potential::Constant { c: 2.0 });
        assert_eq!(parse_potential("quadratic").unwrap(), Potential::Quadratic { omega: 1.0 });
        assert!(parse_potential("cubic").is_err());
    }

    #[test]
    fn statics_default_inputs() {
        for sys in ["elastic-point", "bead-circle", "elastic-circle"] {
            let r = execute(&run_of(&["statics", "--system", sys, "--seed", "0"]).unwrap()).unwrap();
            assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
        }
        let e = execute(&run_of(&["statics", "--system", "em-3d", "--seed", "0"]).unwrap()).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn legendre_reports_run() {
        for id in SystemId::DYNAMICS {
            let r = execute(&run_of(&["legendre", "--system", id.as_str(), "--seed", "2", "--samples", "5"]).unwrap()).unwrap();
            let v: serde_json::Value = serde_json::from_str(&r.report).unwrap();
            assert_eq!(v["energy_family"]["rank_ok_at_all_samples"], true, "{id}");
            for row in v["reductions"].as_array().unwrap() {
                assert!(row["max_deviation"].as_f64().unwrap() < 1e-9, "{id}: {row}");
            }
        }
    }

    #[test]
    fn integrate_writes_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("traj.csv");
        let run = run_of(&["integrate", "--system", "relativistic", "--seed", "0", "--steps", "20", "--out", out.to_str().unwrap()]).unwrap();
        let r = execute(&run).unwrap();
        write_outputs(&r, run.out.as_deref()).unwrap();
        let csv = std::fs::read_to_string(&out).unwrap();
        assert!(csv.starts_with("t,q0,q1,q2,q3,p0,p1,p2,p3,v0\n"));
        assert_eq!(csv.lines().count(), 22);
        assert!(dir.path().join("traj.csv.drift.json").exists());
    }
}
