//! Tangency of Hamiltonian families to constraint sets: Poisson-bracket
//! tests, secondary constraints, multiplier conditions, the iterative
//! Dirac-style algorithm and the prolongation feasibility test.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::bundles::{bracket_from_gradients, CotangentPoint, TangentPoint};
use crate::dynamics::MultiplierDomain;
use crate::jetcalc::{JetError, LocalJet, ScalarField};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("projection onto the constraint set failed: residual {residual:e} after {iterations} iterations")]
    Projection { iterations: usize, residual: f64 },
    #[error("point is off the constraint set: max |Φ| = {0:e}")]
    OffConstraints(f64),
    #[error("point is off D: max |f| = {0:e}")]
    OffDynamics(f64),
    #[error("multiplier cone is empty within the domains")]
    OverConstrained,
    #[error("no sample point could be projected onto the constraint set")]
    NoSamples,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("a family needs at least one generator")]
    EmptyFamily,
}

/// Generation in which a constraint entered: 0 for primary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstraintTag(pub usize);

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "primary"),
            1 => write!(f, "secondary"),
            2 => write!(f, "tertiary"),
            n => write!(f, "generation-{n}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub field: ScalarField,
    pub tag: ConstraintTag,
}

#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn primary(fields: Vec<ScalarField>) -> Self {
        ConstraintSet {
            constraints: fields
                .into_iter()
                .map(|field| Constraint {
                    field,
                    tag: ConstraintTag(0),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn fields(&self) -> Vec<ScalarField> {
        self.constraints.iter().map(|c| c.field.clone()).collect()
    }

    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>, ConstraintError> {
        Ok(self
            .constraints
            .iter()
            .map(|c| c.field.value(x))
            .collect::<Result<_, _>>()?)
    }

    pub fn admits(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.field.admits(x))
    }

    /// Rows ∂Φ_A at x.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, ConstraintError> {
        let n = x.len();
        let mut j = DMatrix::zeros(self.len(), n);
        for (a, c) in self.constraints.iter().enumerate() {
            let g = c.field.gradient(x)?;
            for (k, v) in g.gradient().iter().enumerate() {
                j[(a, k)] = *v;
            }
        }
        Ok(j)
    }
}

type Exclusion = dyn Fn(&[f64]) -> bool + Send + Sync;

/// H_α = Σ α^i K_i with α^i in per-generator domains.
#[derive(Clone)]
pub struct HamiltonianFamily {
    pub generators: Vec<ScalarField>,
    pub domains: Vec<MultiplierDomain>,
    exclusion: Option<(String, Arc<Exclusion>)>,
}

impl fmt::Debug for HamiltonianFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianFamily")
            .field("generators", &self.generators)
            .field("domains", &self.domains)
            .field("exclusion", &self.exclusion.as_ref().map(|e| e.0.as_str()))
            .finish()
    }
}

impl HamiltonianFamily {
    pub fn new(generators: Vec<ScalarField>, domains: Vec<MultiplierDomain>) -> Result<Self, ConstraintError> {
        if generators.is_empty() {
            return Err(ConstraintError::EmptyFamily);
        }
        if generators.len() != domains.len() {
            return Err(ConstraintError::Dimension {
                expected: generators.len(),
                got: domains.len(),
            });
        }
        Ok(HamiltonianFamily {
            generators,
            domains,
            exclusion: None,
        })
    }

    /// Declares points where `excluded` holds to be outside the analysis.
    pub fn with_exclusion<F>(mut self, name: impl Into<String>, excluded: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.exclusion = Some((name.into(), Arc::new(excluded)));
        self
    }

    pub fn exclusion_name(&self) -> Option<&str> {
        self.exclusion.as_ref().map(|e| e.0.as_str())
    }

    pub fn excludes(&self, x: &[f64]) -> bool {
        self.exclusion.as_ref().is_some_and(|e| (e.1)(x))
    }

    pub fn admits(&self, x: &[f64]) -> bool {
        !self.excludes(x) && self.generators.iter().all(|g| g.admits(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            tol: 1e-12,
            max_iter: 100,
        }
    }
}

/// Gauss–Newton projection onto {Φ_A = 0} with minimum-norm steps.
pub fn project_to_constraints(
    x0: &CotangentPoint,
    c: &ConstraintSet,
    opts: &ProjectionOptions,
) -> Result<CotangentPoint, ConstraintError> {
    project_coords(&x0.coords(), c, opts, &|_| true).map(|x| CotangentPoint::from_coords(&x))
}

fn project_coords(
    x0: &[f64],
    c: &ConstraintSet,
    opts: &ProjectionOptions,
    admissible: &dyn Fn(&[f64]) -> bool,
) -> Result<Vec<f64>, ConstraintError> {
    if c.is_empty() {
        return Ok(x0.to_vec());
    }
    let mut x = x0.to_vec();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut r = c.values(&x)?;
    for it in 0..=opts.max_iter {
        if linalg::max_abs(&r) <= opts.tol {
            return Ok(x);
        }
        if it == opts.max_iter {
            break;
        }
        let j = c.jacobian(&x)?;
        let step = linalg::lstsq(&j, &(-DVector::from_column_slice(&r)));
        let n0 = norm(&r);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if c.admits(&trial) && admissible(&trial) {
                if let Ok(rt) = c.values(&trial) {
                    if norm(&rt) < n0 {
                        x = trial;
                        r = rt;
                        moved = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Err(ConstraintError::Projection {
        iterations: opts.max_iter,
        residual: linalg::max_abs(&r),
    })
}

fn bracket_value_and_gradient(f: &ScalarField, g: &ScalarField, x: &[f64]) -> Option<(f64, Vec<f64>)> {
    let jf = f.jet(x).ok()?;
    let jg = g.jet(x).ok()?;
    let n = x.len();
    let m = n / 2;
    let (df, dg) = (jf.gradient(), jg.gradient());
    let value = bracket_from_gradients(df, dg);
    let grad = (0..n)
        .map(|k| {
            (0..m)
                .map(|i| {
                    jf.hessian(k, i) * dg[m + i] + df[i] * jg.hessian(k, m + i)
                        - jg.hessian(k, i) * df[m + i]
                        - dg[i] * jf.hessian(k, m + i)
                })
                .sum()
        })
        .collect();
    Some((value, grad))
}

/// The function x ↦ {F, G}(x) as a field.
///
/// Value and gradient are exact; the Hessian is a central difference of
/// the exact gradient.
pub fn bracket_field(f: &ScalarField, g: &ScalarField) -> ScalarField {
    let (f, g) = (f.clone(), g.clone());
    let n = f.arity();
    let name = format!("{{{}, {}}}", f.name(), g.name());
    ScalarField::from_local(name, n, move |x, need_h| {
        let (value, gradient) = bracket_value_and_gradient(&f, &g, x)?;
        let hessian = if need_h {
            let mut h = vec![0.0; n * n];
            for k in 0..n {
                let step = 1e-5 * (1.0 + x[k].abs());
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += step;
                xm[k] -= step;
                let (_, gp) = bracket_value_and_gradient(&f, &g, &xp)?;
                let (_, gm) = bracket_value_and_gradient(&f, &g, &xm)?;
                for i in 0..n {
                    h[k * n + i] = (gp[i] - gm[i]) / (2.0 * step);
                }
            }
            for a in 0..n {
                for b in (a + 1)..n {
                    let s = 0.5 * (h[a * n + b] + h[b * n + a]);
                    h[a * n + b] = s;
                    h[b * n + a] = s;
                }
            }
            Some(h)
        } else {
            None
        };
        Some(LocalJet {
            value,
            gradient,
            hessian,
        })
    })
}

/// Tolerance for accepting a point as lying on C.
pub const ON_SET_TOL: f64 = 1e-8;

/// {K_i, Φ_A}(x), generators by rows and constraints by columns.
pub fn bracket_matrix(
    fam: &HamiltonianFamily,
    c: &ConstraintSet,
    x: &CotangentPoint,
) -> Result<DMatrix<f64>, ConstraintError> {
    bracket_matrix_at(fam, c, &x.coords(), ON_SET_TOL)
}

fn bracket_matrix_at(
    fam: &HamiltonianFamily,
    c: &ConstraintSet,
    x: &[f64],
    on_tol: f64,
) -> Result<DMatrix<f64>, ConstraintError> {
    let off = linalg::max_abs(&c.values(x)?);
    if off > on_tol {
        return Err(ConstraintError::OffConstraints(off));
    }
    let dk: Vec<Vec<f64>> = fam
        .generators
        .iter()
        .map(|k| k.gradient(x).map(|j| j.gradient().to_vec()))
        .collect::<Result<_, _>>()?;
    let dphi: Vec<Vec<f64>> = c
        .constraints
        .iter()
        .map(|p| p.field.gradient(x).map(|j| j.gradient().to_vec()))
        .collect::<Result<_, _>>()?;
    Ok(DMatrix::from_fn(dk.len(), dphi.len(), |i, a| bracket_from_gradients(&dk[i], &dphi[a])))
}

/// Bracket functions {K_i, Φ_A} that exceed `tol` at some sample, with
/// candidates proportional on the samples merged.
pub fn discover_secondary(
    fam: &HamiltonianFamily,
    c: &ConstraintSet,
    samples: &[CotangentPoint],
    tol: f64,
) -> Result<Vec<ScalarField>, ConstraintError> {
    let pts: Vec<Vec<f64>> = samples.iter().map(|s| s.coords()).collect();
    discover_at(fam, c, &pts, tol)
}

fn discover_at(
    fam: &HamiltonianFamily,
    c: &ConstraintSet,
    pts: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<ScalarField>, ConstraintError> {
    let mats: Vec<DMatrix<f64>> = pts
        .iter()
        .map(|x| bracket_matrix_at(fam, c, x, ON_SET_TOL))
        .collect::<Result<_, _>>()?;
    let mut kept: Vec<(ScalarField, Vec<f64>)> = Vec::new();
    for i in 0..fam.generators.len() {
        for a in 0..c.len() {
            let vals: Vec<f64> = mats.iter().map(|b| b[(i, a)]).collect();
            if linalg::max_abs(&vals) <= tol {
                continue;
            }
            let dup = kept.iter().any(|(_, w)| proportional(&vals, w));
            if !dup {
                kept.push((bracket_field(&fam.generators[i], &c.constraints[a].field), vals));
            }
        }
    }
    Ok(kept.into_iter().map(|(f, _)| f).collect())
}

fn proportional(a: &[f64], b: &[f64]) -> bool {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    na > 0.0 && nb > 0.0 && (dot / (na * nb)).abs() >= 1.0 - 1e-9
}

/// Linear conditions Σ_i α^i {K_i, Φ_A}(x) = 0 at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierConditions {
    /// Coefficient rows (one per constraint with a nonzero bracket row).
    pub rows: Vec<Vec<f64>>,
    /// Number of independent conditions.
    pub rank: usize,
    /// Basis of the solution space, as vectors α.
    pub cone_basis: Vec<Vec<f64>>,
    /// A solution inside the multiplier domains, if one exists.
    pub witness: Option<Vec<f64>>,
    /// Largest achievable min α_i over sign-constrained indices (capped at 1).
    pub margin: f64,
}

impl MultiplierConditions {
    pub fn feasible(&self) -> bool {
        self.witness.is_some()
    }
}

const MARGIN_TOL: f64 = 1e-9;

fn conditions_from_matrix(b: &DMatrix<f64>, domains: &[MultiplierDomain], tol: f64) -> MultiplierConditions {
    let n = b.nrows();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for a in 0..b.ncols() {
        let row: Vec<f64> = (0..n).map(|i| b[(i, a)]).collect();
        if linalg::max_abs(&row) > tol {
            rows.push(row);
        }
    }
    // generators with fixed zero coefficient drop out
    for (i, d) in domains.iter().enumerate() {
        if *d == MultiplierDomain::Fixed(0.0) {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            rows.push(r);
        }
    }
    let mat = linalg::from_rows(&rows, n);
    let rank = if rows.is_empty() { 0 } else { linalg::rank(&mat) };
    let basis = if rows.is_empty() {
        DMatrix::identity(n, n)
    } else {
        linalg::nullspace(&mat)
    };
    let cone_basis: Vec<Vec<f64>> = (0..basis.ncols())
        .map(|c| basis.column(c).iter().copied().collect())
        .collect();
    // sign-normalize: α_i σ_i ≥ t for constrained indices
    let signs: Vec<f64> = domains
        .iter()
        .map(|d| match d {
            MultiplierDomain::Positive => 1.0,
            MultiplierDomain::Negative => -1.0,
            MultiplierDomain::Fixed(c) if *c > 0.0 => 1.0,
            MultiplierDomain::Fixed(c) if *c < 0.0 => -1.0,
            _ => 0.0,
        })
        .collect();
    let positive: Vec<usize> = (0..n).filter(|&i| signs[i] != 0.0).collect();
    let (margin, witness) = if basis.ncols() == 0 {
        (f64::NEG_INFINITY, None)
    } else if positive.is_empty() {
        (1.0, Some(cone_basis[0].clone()))
    } else {
        let scaled = DMatrix::from_fn(n, basis.ncols(), |i, c| basis[(i, c)] * if signs[i] != 0.0 { signs[i] } else { 1.0 });
        let (t, coef) = linalg::max_min_margin(&DVector::zeros(n), &scaled, &positive, 1e3);
        if t > MARGIN_TOL {
            let alpha = &basis * coef;
            (t, Some(alpha.iter().copied().collect()))
        } else {
            (t, None)
        }
    };
    MultiplierConditions {
        rows,
        rank,
        cone_basis,
        witness,
        margin,
    }
}

/// The conditions on α at x and the part of their solution space inside the domains.
pub fn multiplier_conditions(
    fam: &HamiltonianFamily,
    c: &ConstraintSet,
    x: &CotangentPoint,
    tol: f64,
) -> Result<MultiplierConditions, ConstraintError> {
    if fam.excludes(&x.coords()) {
        return Err(ConstraintError::OffConstraints(0.0));
    }
    let b = bracket_matrix(fam, c, x)?;
    Ok(conditions_from_matrix(&b, &fam.domains, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgoOptions {
    pub tol: f64,
    pub max_generations: usize,
    pub projection: ProjectionOptions,
}

impl Default for AlgoOptions {
    fn default() -> Self {
        AlgoOptions {
            tol: 1e-8,
            max_generations: 5,
            projection: ProjectionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationVerdict {
    /// Every bracket vanishes at the samples.
    IntegrableAtSamples,
    /// Brackets vanish once the multipliers satisfy the recorded conditions.
    MultiplierRestricted,
    NewConstraintsAdded,
    /// The multiplier cone is empty and no new constraint could be added.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintInfo {
    pub name: String,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedConstraint {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    /// Largest number of independent conditions at any sample.
    pub max_rank: usize,
    /// Dimension of the solution space at the first sample.
    pub solution_dimension: usize,
    /// Minimum positivity margin over samples.
    pub min_margin: f64,
    pub feasible_at_all_samples: bool,
    /// Solution found at the first sample, normalized to unit max-norm.
    pub example_multipliers: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub generation: usize,
    pub constraints: Vec<ConstraintInfo>,
    pub samples_used: usize,
    pub samples_rejected: usize,
    pub raw_bracket_max: f64,
    /// max |Σ α^i {K_i, Φ_A}| with α the domain solution at each sample.
    pub constrained_bracket_max: f64,
    pub conditions: ConditionSummary,
    pub added: Vec<ConstraintInfo>,
    pub dropped: Vec<DroppedConstraint>,
    pub verdict: GenerationVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoVerdict {
    Integrable,
    NoIntegrablePart,
    MaxGenerationsReached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgoReport {
    pub generations: Vec<GenerationReport>,
    pub verdict: AlgoVerdict,
    /// Generation at which the verdict was reached.
    pub final_generation: usize,
    pub secondary_count: usize,
    pub final_constraints: Vec<ConstraintInfo>,
    pub tol: f64,
    pub samples_requested: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AlgoResult {
    pub report: AlgoReport,
    pub constraints: ConstraintSet,
    pub samples: Vec<CotangentPoint>,
}

fn info(c: &Constraint) -> ConstraintInfo {
    ConstraintInfo {
        name: c.field.name().to_string(),
        tag: c.tag.to_string(),
    }
}

/// Iterates tangency checks, secondary-constraint discovery and multiplier
/// conditions on projected samples until a fixed point.
pub fn dirac_iterate(
    fam: &HamiltonianFamily,
    primary: &ConstraintSet,
    seeds: &[CotangentPoint],
    opts: &AlgoOptions,
) -> Result<AlgoResult, ConstraintError> {
    let mut c = primary.clone();
    let mut generations = Vec::new();
    let admissible = |x: &[f64]| fam.admits(x);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for g in 0..=opts.max_generations {
        samples.clear();
        let mut rejected = 0;
        for s in seeds {
            match project_coords(&s.coords(), &c, &opts.projection, &admissible) {
                Ok(x) if fam.admits(&x) => samples.push(x),
                _ => rejected += 1,
            }
        }
        if samples.is_empty() {
            return Err(ConstraintError::NoSamples);
        }
        let mats: Vec<DMatrix<f64>> = samples
            .iter()
            .map(|x| bracket_matrix_at(fam, &c, x, ON_SET_TOL))
            .collect::<Result<_, _>>()?;
        let raw = mats.iter().fold(0.0f64, |a, b| a.max(b.amax()));
        let conds: Vec<MultiplierConditions> = mats
            .iter()
            .map(|b| conditions_from_matrix(b, &fam.domains, opts.tol))
            .collect();
        let feasible = conds.iter().all(MultiplierConditions::feasible);
        let constrained = mats
            .iter()
            .zip(&conds)
            .map(|(b, cd)| match &cd.witness {
                Some(w) => {
                    let s = linalg::max_abs(w).max(f64::MIN_POSITIVE);
                    let a = DVector::from_iterator(w.len(), w.iter().map(|v| v / s));
                    (b.transpose() * a).amax()
                }
                None => f64::INFINITY,
            })
            .fold(0.0f64, f64::max);
        let summary = ConditionSummary {
            max_rank: conds.iter().map(|c| c.rank).max().unwrap_or(0),
            solution_dimension: conds[0].cone_basis.len(),
            min_margin: conds.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min),
            feasible_at_all_samples: feasible,
            example_multipliers: conds[0].witness.as_ref().map(|w| {
                let s = linalg::max_abs(w);
                w.iter().map(|v| v / s).collect()
            }),
        };
        let constraints_info: Vec<ConstraintInfo> = c.constraints.iter().map(info).collect();
        if feasible {
            let verdict = if raw <= opts.tol {
                GenerationVerdict::IntegrableAtSamples
            } else {
                GenerationVerdict::MultiplierRestricted
            };
            generations.push(GenerationReport {
                generation: g,
                constraints: constraints_info,
                samples_used: samples.len(),
                samples_rejected: rejected,
                raw_bracket_max: raw,
                constrained_bracket_max: constrained,
                conditions: summary,
                added: Vec::new(),
                dropped: Vec::new(),
                verdict,
            });
            return Ok(finish(generations, AlgoVerdict::Integrable, g, c, samples, opts, seeds.len()));
        }
        if g == opts.max_generations {
            generations.push(GenerationReport {
                generation: g,
                constraints: constraints_info,
                samples_used: samples.len(),
                samples_rejected: rejected,
                raw_bracket_max: raw,
                constrained_bracket_max: constrained,
                conditions: summary,
                added: Vec::new(),
                dropped: Vec::new(),
                verdict: GenerationVerdict::Failed,
            });
            return Ok(finish(generations, AlgoVerdict::MaxGenerationsReached, g, c, samples, opts, seeds.len()));
        }
        let candidates = discover_at(fam, &c, &samples, opts.tol)?;
        let mut added = Vec::new();
        let mut dropped = Vec::new();
        for cand in candidates {
            let mut trial = c.clone();
            trial.constraints.push(Constraint {
                field: cand.clone(),
                tag: ConstraintTag(g + 1),
            });
            match independence_defect(&trial, &samples) {
                Ok(None) => {
                    added.push(info(trial.constraints.last().unwrap()));
                    c = trial;
                }
                Ok(Some(reason)) => dropped.push(DroppedConstraint {
                    name: cand.name().to_string(),
                    reason,
                }),
                Err(e) => dropped.push(DroppedConstraint {
                    name: cand.name().to_string(),
                    reason: e.to_string(),
                }),
            }
        }
        let verdict = if added.is_empty() {
            GenerationVerdict::Failed
        } else {
            GenerationVerdict::NewConstraintsAdded
        };
        generations.push(GenerationReport {
            generation: g,
            constraints: constraints_info,
            samples_used: samples.len(),
            samples_rejected: rejected,
            raw_bracket_max: raw,
            constrained_bracket_max: constrained,
            conditions: summary,
            added,
            dropped,
            verdict,
        });
        if verdict == GenerationVerdict::Failed {
            return Ok(finish(generations, AlgoVerdict::NoIntegrablePart, g, c, samples, opts, seeds.len()));
        }
    }
    unreachable!("loop returns at max_generations")
}

/// Rank deficiency of the constraint Jacobian at any sample, as a message.
///
/// Rank is tested on the projected samples of the previous set, where the
/// new function need not vanish; only its differential matters here.
fn independence_defect(c: &ConstraintSet, samples: &[Vec<f64>]) -> Result<Option<String>, ConstraintError> {
    for x in samples {
        let j = c.jacobian(x)?;
        let r = linalg::rank(&j);
        if r < c.len() {
            return Ok(Some(format!("constraint Jacobian rank {r} < {} at a sample", c.len())));
        }
    }
    Ok(None)
}

fn finish(
    generations: Vec<GenerationReport>,
    verdict: AlgoVerdict,
    g: usize,
    c: ConstraintSet,
    samples: Vec<Vec<f64>>,
    opts: &AlgoOptions,
    requested: usize,
) -> AlgoResult {
    let report = AlgoReport {
        secondary_count: c.constraints.iter().filter(|k| k.tag.0 > 0).count(),
        final_constraints: c.constraints.iter().map(info).collect(),
        generations,
        verdict,
        final_generation: g,
        tol: opts.tol,
        samples_requested: requested,
        notes: vec![
            "vanishing on the constraint set is decided at the projected samples only".into(),
            "prolongation feasibility is tested per point; the set-level prolongation sequence is not iterated".into(),
        ],
    };
    AlgoResult {
        report,
        constraints: c,
        samples: samples.iter().map(|x| CotangentPoint::from_coords(x)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProlongationVerdict {
    pub feasible: bool,
    /// Least-squares residual of ∂f/∂q̇ · q̈ = −∂f/∂q · q̇.
    pub residual: f64,
    pub qddot: Vec<f64>,
}

/// Whether some q̈ prolongs the point of D = {f_i = 0} to second order.
pub fn prolongation_feasible(
    fs: &[ScalarField],
    v: &TangentPoint,
    tol: f64,
) -> Result<ProlongationVerdict, ConstraintError> {
    let m = v.dim();
    let x = v.coords();
    let mut a = DMatrix::zeros(fs.len(), m);
    let mut b = DVector::zeros(fs.len());
    let mut off = 0.0f64;
    for (i, f) in fs.iter().enumerate() {
        if f.arity() != 2 * m {
            return Err(ConstraintError::Dimension {
                expected: 2 * m,
                got: f.arity(),
            });
        }
        let j = f.gradient(&x)?;
        off = off.max(j.value().abs());
        let g = j.gradient();
        for k in 0..m {
            a[(i, k)] = g[m + k];
        }
        b[i] = -(0..m).map(|k| g[k] * v.v[k]).sum::<f64>();
    }
    if off > tol {
        return Err(ConstraintError::OffDynamics(off));
    }
    let qdd = linalg::lstsq(&a, &b);
    let residual = (&a * &qdd - &b).amax();
    Ok(ProlongationVerdict {
        feasible: residual <= tol,
        residual,
        qddot: qdd.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundles::poisson_bracket;
    use crate::jetcalc::{fd_jet_default, Jet2};

    fn mink(p: &[Jet2]) -> Jet2 {
        &p[0] * &p[0] - &p[1] * &p[1] - &p[2] * &p[2] - &p[3] * &p[3]
    }

    fn rel_constraint() -> ScalarField {
        ScalarField::new("sqrt(g(p,p)) − 1", 8, |x| mink(&x[4..]).sqrt() - 1.0)
            .with_guard("timelike p", |x| x[4] * x[4] - x[5] * x[5] - x[6] * x[6] - x[7] * x[7] > 0.0)
    }

    #[test]
    fn projection_examples() {
        let c = ConstraintSet::primary(vec![rel_constraint()]);
        let x0 = CotangentPoint::new(vec![0.0; 4], vec![1.1, 0.0, 0.0, 0.0]).unwrap();
        let x = project_to_constraints(&x0, &c, &ProjectionOptions::default()).unwrap();
        assert!((x.p[0] - 1.0).abs() < 1e-12);
        assert!(x.p[1..].iter().all(|v| v.abs() < 1e-15));
        let again = project_to_constraints(&x, &c, &ProjectionOptions::default()).unwrap();
        assert_eq!(again, x);
        let e = ConstraintSet::default();
        assert_eq!(project_to_constraints(&x0, &e, &ProjectionOptions::default()).unwrap(), x0);
    }

    #[test]
    fn massless_bracket_zero() {
        let h = ScalarField::new("g(p,p)/2", 8, |x| mink(&x[4..]) * 0.5);
        let phi = ScalarField::new("g(p,p)", 8, |x| mink(&x[4..]));
        let fam = HamiltonianFamily::new(vec![h], vec![MultiplierDomain::Positive]).unwrap();
        let c = ConstraintSet::primary(vec![phi]);
        let x = CotangentPoint::new(vec![0.3, 0.1, 0.0, 0.2], vec![1.0, 0.6, 0.8, 0.0]).unwrap();
        assert_eq!(bracket_matrix(&fam, &c, &x).unwrap()[(0, 0)], 0.0);
        let off = CotangentPoint::new(vec![0.0; 4], vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(bracket_matrix(&fam, &c, &off), Err(ConstraintError::OffConstraints(_))));
    }

    #[test]
    fn bracket_field_matches_fd() {
        let f = ScalarField::new("f", 4, |x| &x[0] * &x[3] + x[1].sin() * &x[2]);
        let g = ScalarField::new("g", 4, |x| &x[0] * &x[0] * &x[2] + x[3].exp());
        let b = bracket_field(&f, &g);
        let x = [0.3, -0.2, 0.7, 0.1];
        let direct = poisson_bracket(&f, &g, &CotangentPoint::from_coords(&x)).unwrap();
        assert!((b.value(&x).unwrap() - direct).abs() < 1e-14);
        let exact = b.jet(&x).unwrap();
        let fd = fd_jet_default(&b, &x).unwrap();
        for k in 0..4 {
            assert!((exact.gradient()[k] - fd.gradient()[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn conditions_examples() {
        let b = DMatrix::zeros(2, 1);
        let c = conditions_from_matrix(&b, &[MultiplierDomain::Positive, MultiplierDomain::Positive], 1e-8);
        assert_eq!(c.rank, 0);
        assert_eq!(c.cone_basis.len(), 2);
        assert!(c.feasible());
        // α¹ − α² = 0 admits positive solutions; α¹ + α² = 0 does not
        let b = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let c = conditions_from_matrix(&b, &[MultiplierDomain::Positive, MultiplierDomain::Positive], 1e-8);
        assert_eq!(c.rank, 1);
        let w = c.witness.unwrap();
        assert!((w[0] - w[1]).abs() < 1e-12 && w[0] > 0.0);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = conditions_from_matrix(&b, &[MultiplierDomain::Positive, MultiplierDomain::Positive], 1e-8);
        assert!(!c.feasible());
        let c = conditions_from_matrix(&b, &[MultiplierDomain::Positive, MultiplierDomain::Free], 1e-8);
        assert!(c.feasible());
    }

    #[test]
    fn empty_primary_is_integrable() {
        let h = ScalarField::new("H", 2, |x| &x[1] * &x[1] * 0.5 + &x[0] * &x[0] * 0.5);
        let fam = HamiltonianFamily::new(vec![h], vec![MultiplierDomain::Fixed(1.0)]).unwrap();
        let seeds = vec![CotangentPoint::new(vec![0.2], vec![1.0]).unwrap()];
        let r = dirac_iterate(&fam, &ConstraintSet::default(), &seeds, &AlgoOptions::default()).unwrap();
        assert_eq!(r.report.verdict, AlgoVerdict::Integrable);
        assert_eq!(r.report.final_generation, 0);
    }

    #[test]
    fn secondary_constraint_in_the_plane() {
        // K = p₁, Φ = q₁: {K, Φ} = −1 never vanishes and has zero differential
        let k = ScalarField::new("p1", 4, |x| x[2].clone());
        let phi = ScalarField::new("q1", 4, |x| x[0].clone());
        let fam = HamiltonianFamily::new(vec![k], vec![MultiplierDomain::Positive]).unwrap();
        let seeds = vec![CotangentPoint::new(vec![0.1, 0.2], vec![0.3, 0.4]).unwrap()];
        let r = dirac_iterate(&fam, &ConstraintSet::primary(vec![phi]), &seeds, &AlgoOptions::default()).unwrap();
        assert_eq!(r.report.verdict, AlgoVerdict::NoIntegrablePart);
        assert_eq!(r.report.generations[0].dropped.len(), 1);
    }

    #[test]
    fn prolongation_examples() {
        // image of X(q) = (q₂, −q₁)
        let f1 = ScalarField::new("f1", 4, |x| &x[2] - &x[1]);
        let f2 = ScalarField::new("f2", 4, |x| &x[3] + &x[0]);
        let v = TangentPoint::new(vec![0.3, 0.5], vec![0.5, -0.3]).unwrap();
        assert!(prolongation_feasible(&[f1, f2], &v, 1e-10).unwrap().feasible);
        // f₁ = q̇¹, f₂ = q¹
        let g1 = ScalarField::new("qdot1", 4, |x| x[2].clone());
        let g2 = ScalarField::new("q1", 4, |x| x[0].clone());
        let on = TangentPoint::new(vec![0.0, 0.7], vec![0.0, 1.3]).unwrap();
        let r = prolongation_feasible(&[g1.clone(), g2.clone()], &on, 1e-10).unwrap();
        assert!(r.feasible);
        let off = TangentPoint::new(vec![0.0, 0.7], vec![0.4, 1.3]).unwrap();
        assert!(matches!(
            prolongation_feasible(&[g1, g2], &off, 1e-10),
            Err(ConstraintError::OffDynamics(_))
        ));
    }
}
