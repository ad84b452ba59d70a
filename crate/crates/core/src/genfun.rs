//! Generating functions for Lagrangian submanifolds of T*Q: plain functions,
//! functions constrained to a submanifold, and Morse families.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::bundles::omega_q;
use crate::jetcalc::{JetError, LocalJet, ScalarField};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("fiber derivative {residual:e} exceeds tolerance {tol:e}")]
    NotCritical { residual: f64, tol: f64 },
    #[error("rank condition fails: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("fiber point {0:?} outside the fiber domain")]
    FiberDomain(Vec<f64>),
    #[error("Newton Hessian singular at iterate {iterate:?} (seed {seed})")]
    SingularNewton { seed: usize, iterate: Vec<f64> },
    #[error("reduction refused: {0}")]
    ReductionRefused(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

type FiberPredicate = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A family U(q; y) over a base of dimension `base_dim` with `fiber_dim` fiber variables.
#[derive(Clone)]
pub struct MorseFamily {
    base_dim: usize,
    fiber_dim: usize,
    u: ScalarField,
    fiber_domain: Option<(String, Arc<FiberPredicate>)>,
}

impl fmt::Debug for MorseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MorseFamily")
            .field("base_dim", &self.base_dim)
            .field("fiber_dim", &self.fiber_dim)
            .field("u", &self.u)
            .field("fiber_domain", &self.fiber_domain.as_ref().map(|d| d.0.as_str()))
            .finish()
    }
}

impl MorseFamily {
    pub fn new(base_dim: usize, fiber_dim: usize, u: ScalarField) -> Result<Self, GenError> {
        if u.arity() != base_dim + fiber_dim {
            return Err(GenError::Dimension {
                expected: base_dim + fiber_dim,
                got: u.arity(),
            });
        }
        Ok(MorseFamily {
            base_dim,
            fiber_dim,
            u,
            fiber_domain: None,
        })
    }

    /// The trivial family (no fiber variables) of a plain function.
    pub fn trivial(u: ScalarField) -> Self {
        MorseFamily {
            base_dim: u.arity(),
            fiber_dim: 0,
            u,
            fiber_domain: None,
        }
    }

    pub fn with_fiber_domain<F>(mut self, name: impl Into<String>, pred: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.fiber_domain = Some((name.into(), Arc::new(pred)));
        self
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn generator(&self) -> &ScalarField {
        &self.u
    }

    pub fn fiber_domain_name(&self) -> Option<&str> {
        self.fiber_domain.as_ref().map(|d| d.0.as_str())
    }

    pub fn fiber_admits(&self, y: &[f64]) -> bool {
        self.fiber_domain.as_ref().map_or(true, |d| (d.1)(y))
    }

    pub fn admits(&self, q: &[f64], y: &[f64]) -> bool {
        self.fiber_admits(y) && self.u.admits(&self.point(q, y))
    }

    pub fn point(&self, q: &[f64], y: &[f64]) -> Vec<f64> {
        [q, y].concat()
    }

    fn fiber_indices(&self) -> Vec<usize> {
        (self.base_dim..self.base_dim + self.fiber_dim).collect()
    }

    /// ∂U/∂y at (q, y).
    pub fn fiber_gradient(&self, q: &[f64], y: &[f64]) -> Result<Vec<f64>, GenError> {
        let j = self.u.jet_wrt(&self.point(q, y), &self.fiber_indices(), false)?;
        Ok(j.gradient().to_vec())
    }
}

/// Energy Ū on Q restricted by constraints F_A = 0 through multipliers.
#[derive(Debug, Clone)]
pub struct ConstrainedGenerator {
    pub constraints: Vec<ScalarField>,
    pub energy: ScalarField,
}

impl ConstrainedGenerator {
    /// The linear Morse family U(q, y) = Ū(q) + F_A(q) y^A.
    pub fn as_morse_family(&self) -> MorseFamily {
        let m = self.energy.arity();
        let k = self.constraints.len();
        let e = self.energy.clone();
        let fs = self.constraints.clone();
        let u = ScalarField::new(format!("{} + F·y", self.energy.name()), m + k, move |x| {
            let mut acc = e.compose_jets(&x[..m]);
            for (a, f) in fs.iter().enumerate() {
                acc = acc + f.compose_jets(&x[..m]) * &x[m + a];
            }
            acc
        });
        MorseFamily {
            base_dim: m,
            fiber_dim: k,
            u,
            fiber_domain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedPoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankVerdict {
    pub ok: bool,
    pub rank: usize,
    pub required: usize,
    pub singular_values: Vec<f64>,
}

/// How Newton reacts to a singular fiber Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SingularPolicy {
    /// Take the minimum-norm least-squares step instead.
    LeastSquares,
    /// Report [`GenError::SingularNewton`].
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub singular: SingularPolicy,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 50,
            singular: SingularPolicy::LeastSquares,
        }
    }
}

pub fn generate_from_function(u: &ScalarField, q: &[f64]) -> Result<GeneratedPoint, GenError> {
    let j = u.gradient(q)?;
    Ok(GeneratedPoint {
        q: q.to_vec(),
        p: j.gradient().to_vec(),
        witness: Vec::new(),
    })
}

/// Stacks F_A(q) and p − ∇Ū − λ^A ∇F_A.
pub fn constrained_residual(
    gen: &ConstrainedGenerator,
    q: &[f64],
    p: &[f64],
    lambda: &[f64],
) -> Result<Vec<f64>, GenError> {
    if lambda.len() != gen.constraints.len() {
        return Err(GenError::Dimension {
            expected: gen.constraints.len(),
            got: lambda.len(),
        });
    }
    let mut out = Vec::with_capacity(lambda.len() + q.len());
    let mut force = p.to_vec();
    let de = gen.energy.gradient(q)?;
    for (f, g) in force.iter_mut().zip(de.gradient()) {
        *f -= g;
    }
    for (c, l) in gen.constraints.iter().zip(lambda) {
        let j = c.gradient(q)?;
        out.push(j.value());
        for (f, g) in force.iter_mut().zip(j.gradient()) {
            *f -= l * g;
        }
    }
    out.extend(force);
    Ok(out)
}

/// Rank of the k×(m+k) block of second derivatives ∂²U/∂y∂(q, y).
pub fn morse_rank_ok(fam: &MorseFamily, q: &[f64], y: &[f64]) -> Result<RankVerdict, GenError> {
    let k = fam.fiber_dim;
    if k == 0 {
        return Ok(RankVerdict {
            ok: true,
            rank: 0,
            required: 0,
            singular_values: Vec::new(),
        });
    }
    let j = fam.u.jet(&fam.point(q, y))?;
    let m = fam.base_dim;
    let block = DMatrix::from_fn(k, m + k, |a, c| j.hessian(m + a, c));
    let sv = linalg::singular_values(&block);
    let rank = linalg::rank_with(&sv, linalg::RANK_RTOL);
    Ok(RankVerdict {
        ok: rank == k,
        rank,
        required: k,
        singular_values: sv,
    })
}

/// Newton iteration for stationarity of `f` in the coordinates `vars` of `x`.
///
/// Returns `Ok(None)` when the iteration fails to converge.
pub(crate) fn newton_stationary(
    f: &ScalarField,
    x: &[f64],
    vars: &[usize],
    opts: &NewtonOptions,
    admissible: &dyn Fn(&[f64]) -> bool,
    seed_index: usize,
) -> Result<Option<Vec<f64>>, GenError> {
    let mut x = x.to_vec();
    if vars.is_empty() {
        return Ok(Some(x));
    }
    let resid = |x: &[f64]| -> Option<f64> {
        f.jet_wrt(x, vars, false)
            .ok()
            .map(|j| linalg::max_abs(j.gradient()))
    };
    for _ in 0..=opts.max_iter {
        let j = match f.jet_wrt(&x, vars, true) {
            Ok(j) => j,
            Err(_) => return Ok(None),
        };
        let r0 = linalg::max_abs(j.gradient());
        if r0 <= opts.tol {
            return Ok(Some(x));
        }
        let k = vars.len();
        let h = DMatrix::from_fn(k, k, |a, b| j.hessian(a, b));
        let g = DVector::from_column_slice(j.gradient());
        let sv = linalg::singular_values(&h);
        let regular = linalg::rank_with(&sv, linalg::RANK_RTOL) == k;
        let step = if regular {
            match h.clone().lu().solve(&(-&g)) {
                Some(s) => s,
                None => linalg::lstsq(&h, &(-&g)),
            }
        } else {
            match opts.singular {
                SingularPolicy::Fail => {
                    return Err(GenError::SingularNewton {
                        seed: seed_index,
                        iterate: vars.iter().map(|&i| x[i]).collect(),
                    })
                }
                SingularPolicy::LeastSquares => linalg::lstsq(&h, &(-&g)),
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let mut trial = x.clone();
            for (s, &i) in vars.iter().enumerate() {
                trial[i] += t * step[s];
            }
            if admissible(&trial) {
                if let Some(r1) = resid(&trial) {
                    if r1 < r0 {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Critical points of U(q, ·) reached by Newton from each seed, deduplicated.
pub fn solve_critical_fiber(
    fam: &MorseFamily,
    q: &[f64],
    seeds: &[Vec<f64>],
    opts: &NewtonOptions,
) -> Result<Vec<Vec<f64>>, GenError> {
    let m = fam.base_dim;
    let vars = fam.fiber_indices();
    let mut found: Vec<Vec<f64>> = Vec::new();
    for (s, y0) in seeds.iter().enumerate() {
        if y0.len() != fam.fiber_dim {
            return Err(GenError::Dimension {
                expected: fam.fiber_dim,
                got: y0.len(),
            });
        }
        if !fam.fiber_admits(y0) {
            return Err(GenError::FiberDomain(y0.clone()));
        }
        let admissible = |x: &[f64]| fam.fiber_admits(&x[m..]) && fam.u.admits(x);
        if let Some(x) = newton_stationary(&fam.u, &fam.point(q, y0), &vars, opts, &admissible, s)? {
            let y = x[m..].to_vec();
            let scale = 1.0 + linalg::max_abs(&y);
            let dup = found.iter().any(|z| {
                z.iter().zip(&y).fold(0.0f64, |a, (u, v)| a.max((u - v).abs())) <= 1e-8 * scale
            });
            if !dup {
                found.push(y);
            }
        }
    }
    Ok(found)
}

/// The covector p = ∂U/∂q generated at a critical fiber point.
pub fn generated_covector(
    fam: &MorseFamily,
    q: &[f64],
    y: &[f64],
    tol: f64,
) -> Result<GeneratedPoint, GenError> {
    let j = fam.u.gradient(&fam.point(q, y))?;
    let m = fam.base_dim;
    let residual = linalg::max_abs(&j.gradient()[m..]);
    if residual > tol {
        return Err(GenError::NotCritical { residual, tol });
    }
    let rank = morse_rank_ok(fam, q, y)?;
    if !rank.ok {
        return Err(GenError::RankDeficient {
            rank: rank.rank,
            required: rank.required,
        });
    }
    Ok(GeneratedPoint {
        q: q.to_vec(),
        p: j.gradient()[..m].to_vec(),
        witness: y.to_vec(),
    })
}

/// Tangent vectors (δq, δp) of the generated set at a critical point, as columns.
pub fn generated_tangents(fam: &MorseFamily, q: &[f64], y: &[f64]) -> Result<DMatrix<f64>, GenError> {
    let m = fam.base_dim;
    let k = fam.fiber_dim;
    let j = fam.u.jet(&fam.point(q, y))?;
    // rows: p − ∂_qU = 0 (m), ∂_yU = 0 (k); columns: (q, y, p)
    let n = 2 * m + k;
    let mut jac = DMatrix::zeros(m + k, n);
    for r in 0..m {
        for c in 0..m + k {
            jac[(r, c)] = -j.hessian(r, c);
        }
        jac[(r, m + k + r)] = 1.0;
    }
    for a in 0..k {
        for c in 0..m + k {
            jac[(m + a, c)] = j.hessian(m + a, c);
        }
    }
    let ns = linalg::nullspace(&jac);
    let mut out = DMatrix::zeros(2 * m, ns.ncols());
    for c in 0..ns.ncols() {
        for r in 0..m {
            out[(r, c)] = ns[(r, c)];
            out[(m + r, c)] = ns[(m + k + r, c)];
        }
    }
    Ok(out)
}

/// max |ω_Q(u, w)| over pairs of tangent vectors of the generated set.
pub fn isotropy_defect(fam: &MorseFamily, q: &[f64], y: &[f64]) -> Result<f64, GenError> {
    let t = generated_tangents(fam, q, y)?;
    let cols: Vec<Vec<f64>> = (0..t.ncols()).map(|c| t.column(c).iter().copied().collect()).collect();
    let mut worst = 0.0f64;
    for i in 0..cols.len() {
        for j in (i + 1)..cols.len() {
            worst = worst.max(omega_q(&cols[i], &cols[j]).abs());
        }
    }
    Ok(worst)
}

/// Maximum Lagrange bracket of a parametrized surface t ↦ (q(t), p(t)),
/// by central differences with step `h`.
pub fn lagrange_bracket_max<F>(surface: F, samples: &[Vec<f64>], h: f64) -> f64
where
    F: Fn(&[f64]) -> (Vec<f64>, Vec<f64>),
{
    let mut worst = 0.0f64;
    for t in samples {
        let d = t.len();
        let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
            .map(|a| {
                let mut tp = t.clone();
                let mut tm = t.clone();
                tp[a] += h;
                tm[a] -= h;
                let (qp, pp) = surface(&tp);
                let (qm, pm) = surface(&tm);
                let dq = qp.iter().zip(&qm).map(|(x, y)| (x - y) / (2.0 * h)).collect();
                let dp = pp.iter().zip(&pm).map(|(x, y)| (x - y) / (2.0 * h)).collect();
                (dq, dp)
            })
            .collect();
        for a in 0..d {
            for b in (a + 1)..d {
                let (qa, pa) = &partials[a];
                let (qb, pb) = &partials[b];
                let v: f64 = pa.iter().zip(qb).map(|(x, y)| x * y).sum::<f64>()
                    - pb.iter().zip(qa).map(|(x, y)| x * y).sum::<f64>();
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

type SeedMap = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Initial guess for the eliminated fiber block at a point of the reduced family.
#[derive(Clone)]
pub enum ReductionSeed {
    Fixed(Vec<f64>),
    /// Maps (q, kept fiber values) to a guess.
    Map(Arc<SeedMap>),
}

impl ReductionSeed {
    pub fn map<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        ReductionSeed::Map(Arc::new(f))
    }

    fn at(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ReductionSeed::Fixed(v) => v.clone(),
            ReductionSeed::Map(f) => f(x),
        }
    }
}

/// Where a reduction is validated: a base point, the kept fiber values, and
/// the seed for the eliminated block.
#[derive(Clone)]
pub struct ReductionAnchor {
    pub q: Vec<f64>,
    pub kept: Vec<f64>,
    pub seed: ReductionSeed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub eliminated: Vec<usize>,
    pub anchor_solution: Vec<f64>,
    pub block_singular_values: Vec<f64>,
    /// Only local regularity of the eliminated block is checked; whether the
    /// critical set is a global section is not decided.
    pub local_only: bool,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub family: MorseFamily,
    pub report: ReductionReport,
}

/// Eliminates the listed fiber variables by solving ∂U/∂y_e = 0.
///
/// The reduced generator has value U at the solved point, gradient given by
/// the partial derivatives there, and Hessian given by the Schur complement
/// H_oo − H_oe H_ee⁻¹ H_eo.
pub fn reduce_family(
    fam: &MorseFamily,
    eliminate: &[usize],
    anchor: &ReductionAnchor,
    opts: &NewtonOptions,
) -> Result<Reduction, GenError> {
    let m = fam.base_dim;
    let k = fam.fiber_dim;
    if eliminate.iter().any(|&e| e >= k) {
        return Err(GenError::ReductionRefused(format!(
            "fiber index out of range in {eliminate:?} (fiber dimension {k})"
        )));
    }
    if eliminate.is_empty() {
        return Ok(Reduction {
            family: fam.clone(),
            report: ReductionReport {
                eliminated: Vec::new(),
                anchor_solution: Vec::new(),
                block_singular_values: Vec::new(),
                local_only: true,
            },
        });
    }
    let kept: Vec<usize> = (0..k).filter(|i| !eliminate.contains(i)).collect();
    let elim_full: Vec<usize> = eliminate.iter().map(|e| m + e).collect();
    let outer: Vec<usize> = (0..m).chain(kept.iter().map(|i| m + i)).collect();
    let n_outer = outer.len();

    let assemble = move |xo: &[f64], ye: &[f64], m: usize, k: usize, kept: &[usize], elim: &[usize]| {
        let mut full = vec![0.0; m + k];
        full[..m].copy_from_slice(&xo[..m]);
        for (s, &i) in kept.iter().enumerate() {
            full[m + i] = xo[m + s];
        }
        for (s, &i) in elim.iter().enumerate() {
            full[m + i] = ye[s];
        }
        full
    };

    // Validate at the anchor.
    let xo_anchor: Vec<f64> = [anchor.q.as_slice(), &anchor.kept].concat();
    if xo_anchor.len() != n_outer {
        return Err(GenError::Dimension {
            expected: n_outer,
            got: xo_anchor.len(),
        });
    }
    let seed = anchor.seed.at(&xo_anchor);
    let start = assemble(&xo_anchor, &seed, m, k, &kept, eliminate);
    let fam_a = fam.clone();
    let admissible = move |x: &[f64]| fam_a.fiber_admits(&x[m..]) && fam_a.u.admits(x);
    let solved = newton_stationary(&fam.u, &start, &elim_full, opts, &admissible, 0)?
        .ok_or_else(|| GenError::ReductionRefused("no critical point of the eliminated block at the anchor".into()))?;
    let jb = fam.u.jet_wrt(&solved, &elim_full, true)?;
    let ke = elim_full.len();
    let block = DMatrix::from_fn(ke, ke, |a, b| jb.hessian(a, b));
    let sv = linalg::singular_values(&block);
    if linalg::rank_with(&sv, linalg::RANK_RTOL) < ke {
        return Err(GenError::ReductionRefused(format!(
            "eliminated Hessian block singular at the anchor; singular values {sv:?}"
        )));
    }
    let anchor_solution: Vec<f64> = elim_full.iter().map(|&i| solved[i]).collect();

    let parent = fam.clone();
    let seed_rule = anchor.seed.clone();
    let opts = *opts;
    let elim = eliminate.to_vec();
    let kept_c = kept.clone();
    let elim_full_c = elim_full.clone();
    let outer_c = outer.clone();
    let u = ScalarField::from_local(format!("{} reduced", fam.u.name()), n_outer, move |xo, need_h| {
        let seed = seed_rule.at(xo);
        let start = assemble(xo, &seed, m, k, &kept_c, &elim);
        let adm = |x: &[f64]| parent.fiber_admits(&x[m..]) && parent.u.admits(x);
        let x = newton_stationary(&parent.u, &start, &elim_full_c, &opts, &adm, 0).ok()??;
        let j = parent.u.jet(&x).ok()?;
        let gradient: Vec<f64> = outer_c.iter().map(|&i| j.gradient()[i]).collect();
        let hessian = if need_h {
            let hoo = DMatrix::from_fn(n_outer, n_outer, |a, b| j.hessian(outer_c[a], outer_c[b]));
            let hoe = DMatrix::from_fn(n_outer, ke, |a, b| j.hessian(outer_c[a], elim_full_c[b]));
            let hee = DMatrix::from_fn(ke, ke, |a, b| j.hessian(elim_full_c[a], elim_full_c[b]));
            let sol = hee.lu().solve(&hoe.transpose())?;
            let s = hoo - &hoe * sol;
            let mut flat = vec![0.0; n_outer * n_outer];
            for a in 0..n_outer {
                for b in a..n_outer {
                    let v = 0.5 * (s[(a, b)] + s[(b, a)]);
                    flat[a * n_outer + b] = v;
                    flat[b * n_outer + a] = v;
                }
            }
            Some(flat)
        } else {
            None
        };
        Some(LocalJet {
            value: j.value(),
            gradient,
            hessian,
        })
    });
    let family = MorseFamily::new(m, kept.len(), u)?;
    Ok(Reduction {
        family,
        report: ReductionReport {
            eliminated: eliminate.to_vec(),
            anchor_solution,
            block_singular_values: sv,
            local_only: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::Jet2;

    fn circle_family(k: f64, a: f64) -> MorseFamily {
        // U = k y + λ/2 (x² + y² − a²), fiber λ
        let u = ScalarField::new("bead", 3, move |v: &[Jet2]| {
            &v[1] * k + &v[2] * 0.5 * (&v[0] * &v[0] + &v[1] * &v[1] - a * a)
        });
        MorseFamily::new(2, 1, u).unwrap()
    }

    #[test]
    fn plain_generation() {
        let u = ScalarField::new("spring", 2, |x| (&x[0] * &x[0] + &x[1] * &x[1]) * 1.5);
        assert_eq!(generate_from_function(&u, &[1.0, 2.0]).unwrap().p, vec![3.0, 6.0]);
        let g = ScalarField::new("gravity", 2, |x| &x[1] * 5.0);
        assert_eq!(generate_from_function(&g, &[7.0, 1.0]).unwrap().p, vec![0.0, 5.0]);
        let c = ScalarField::constant("c", 2, 1.0);
        assert_eq!(generate_from_function(&c, &[7.0, 1.0]).unwrap().p, vec![0.0, 0.0]);
    }

    #[test]
    fn trivial_family_matches_plain() {
        let u = ScalarField::new("u", 2, |x| x[0].sin() * &x[1]);
        let a = generate_from_function(&u, &[0.3, 0.8]).unwrap();
        let b = generated_covector(&MorseFamily::trivial(u), &[0.3, 0.8], &[], 1e-12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn circle_residual() {
        let a = 2.0;
        let k = 3.0;
        let gen = ConstrainedGenerator {
            constraints: vec![ScalarField::new("circle", 2, move |x| {
                &x[0] * &x[0] + &x[1] * &x[1] - a * a
            })],
            energy: ScalarField::new("gravity", 2, move |x| &x[1] * k),
        };
        let lam = 0.7;
        let r = constrained_residual(&gen, &[a, 0.0], &[2.0 * a * lam, k], &[lam]).unwrap();
        assert!(linalg::max_abs(&r) < 1e-15);
        let r = constrained_residual(&gen, &[a, 0.0], &[1.0, k], &[lam]).unwrap();
        assert!(linalg::max_abs(&r) > 0.1);
        let r = constrained_residual(&gen, &[a, 1.0], &[0.0, k], &[0.0]).unwrap();
        assert!(r[0].abs() > 0.5);
        // the linear family generates the same covectors
        let fam = gen.as_morse_family();
        let p = generated_covector(&fam, &[a, 0.0], &[lam], 1e-12).unwrap();
        assert!((p.p[0] - 2.0 * a * lam).abs() < 1e-14 && (p.p[1] - k).abs() < 1e-14);
    }

    #[test]
    fn rank_examples() {
        let a = 1.5;
        let v = morse_rank_ok(&circle_family(2.0, a), &[a, 0.0], &[1.0]).unwrap();
        assert!(v.ok);
        assert!((v.singular_values[0] - a).abs() < 1e-14);
        let flat = MorseFamily::new(1, 1, ScalarField::new("flat", 2, |x| x[0].clone())).unwrap();
        assert!(!morse_rank_ok(&flat, &[1.0], &[0.0]).unwrap().ok);
    }

    #[test]
    fn critical_fiber_examples() {
        let quad = MorseFamily::new(1, 1, ScalarField::new("quad", 2, |x| (&x[1] - 2.5).powi(2) * 0.5)).unwrap();
        let ys = solve_critical_fiber(&quad, &[0.0], &[vec![-10.0], vec![7.0]], &NewtonOptions::default()).unwrap();
        assert_eq!(ys.len(), 1);
        assert!((ys[0][0] - 2.5).abs() < 1e-12);
        let lin = MorseFamily::new(1, 1, ScalarField::new("lin", 2, |x| &x[1] * 3.0)).unwrap();
        let ys = solve_critical_fiber(&lin, &[0.0], &[vec![1.0]], &NewtonOptions::default()).unwrap();
        assert!(ys.is_empty());
        let strict = NewtonOptions {
            singular: SingularPolicy::Fail,
            ..NewtonOptions::default()
        };
        assert!(matches!(
            solve_critical_fiber(&lin, &[0.0], &[vec![1.0]], &strict),
            Err(GenError::SingularNewton { .. })
        ));
    }

    #[test]
    fn not_critical_rejected() {
        let fam = circle_family(1.0, 1.0);
        assert!(matches!(
            generated_covector(&fam, &[2.0, 0.0], &[1.0], 1e-12),
            Err(GenError::NotCritical { .. })
        ));
    }

    #[test]
    fn broken_surface_detected() {
        let ts: Vec<Vec<f64>> = vec![vec![0.3, 0.2], vec![-1.0, 2.0]];
        let good = lagrange_bracket_max(|t| (t.to_vec(), vec![2.0 * t[0], 3.0 * t[1] * t[1]]), &ts, 1e-5);
        assert!(good < 1e-6);
        let bad = lagrange_bracket_max(|t| (t.to_vec(), vec![t[1], 0.0]), &ts, 1e-5);
        assert!((bad - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reduction_of_quadratic_fiber() {
        // U(q; y1, y2) = q y1 − y1²/2 + (y2 − q)² y1 ... keep y2 only as spectator
        let u = ScalarField::new("u", 3, |x| &x[0] * &x[1] - &x[1] * &x[1] * 0.5 + &x[2] * &x[0]);
        let fam = MorseFamily::new(1, 2, u).unwrap();
        let anchor = ReductionAnchor {
            q: vec![1.0],
            kept: vec![0.5],
            seed: ReductionSeed::Fixed(vec![0.0]),
        };
        let red = reduce_family(&fam, &[0], &anchor, &NewtonOptions::default()).unwrap();
        // reduced: q²/2 + y2 q
        let j = red.family.generator().jet(&[2.0, 0.5]).unwrap();
        assert!((j.value() - 3.0).abs() < 1e-12);
        assert!((j.gradient()[0] - 2.5).abs() < 1e-12);
        assert!((j.hessian(0, 0) - 1.0).abs() < 1e-12);
        assert!((j.hessian(0, 1) - 1.0).abs() < 1e-12);
        let same = reduce_family(&fam, &[], &anchor, &NewtonOptions::default()).unwrap();
        assert_eq!(same.family.fiber_dim(), 2);
    }

    #[test]
    fn reduction_refused_on_singular_block() {
        let u = ScalarField::new("u", 2, |x| &x[0] * &x[1]);
        let fam = MorseFamily::new(1, 1, u).unwrap();
        let anchor = ReductionAnchor {
            q: vec![0.0],
            kept: vec![],
            seed: ReductionSeed::Fixed(vec![0.0]),
        };
        assert!(matches!(
            reduce_family(&fam, &[0], &anchor, &NewtonOptions::default()),
            Err(GenError::ReductionRefused(_))
        ));
    }

    #[test]
    fn circle_family_isotropic() {
        let fam = circle_family(2.0, 1.0);
        for th in [0.1f64, 1.0, 2.5] {
            let q = [th.cos(), th.sin()];
            // λ solving ∂U/∂(x,y) consistency is free; every (q on circle, λ) is critical
            let d = isotropy_defect(&fam, &q, &[0.4]).unwrap();
            assert!(d < 1e-12);
        }
    }
}
