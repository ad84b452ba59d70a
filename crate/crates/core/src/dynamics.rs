//! Implicit dynamics D ⊂ TT*Q given by residual operators.
//!
//! Each source (Lagrangian, Lagrangian family, Hamiltonian, Dirac system,
//! Hamiltonian family) exposes its defining equations as a residual that
//! vanishes exactly on D for a suitable witness.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::bundles::{dt_omega, CotangentPoint, PhaseVelocity, SecondTangent};
use crate::genfun::{morse_rank_ok, GenError, MorseFamily};
use crate::jetcalc::{JetError, ScalarField};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("multiplier {index} = {value} outside its domain {domain}")]
    MultiplierDomain {
        index: usize,
        value: f64,
        domain: String,
    },
    #[error("witness has length {got}, expected {expected}")]
    Witness { expected: usize, got: usize },
    #[error("point is not on D: residual {0:e}")]
    OffDynamics(f64),
    #[error("operation needs a plain Lagrangian")]
    NotPlain,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Stacked residual together with the witness used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsResidual {
    pub values: Vec<f64>,
    pub witness: Vec<f64>,
}

impl DynamicsResidual {
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.values)
    }
}

/// Open interval constraint on a multiplier, or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MultiplierDomain {
    Free,
    Positive,
    Negative,
    Fixed(f64),
}

impl MultiplierDomain {
    pub fn contains(&self, v: f64) -> bool {
        match self {
            MultiplierDomain::Free => v.is_finite(),
            MultiplierDomain::Positive => v > 0.0,
            MultiplierDomain::Negative => v < 0.0,
            MultiplierDomain::Fixed(c) => v == *c,
        }
    }

    pub fn label(&self) -> String {
        match self {
            MultiplierDomain::Free => "free".into(),
            MultiplierDomain::Positive => "v > 0".into(),
            MultiplierDomain::Negative => "v < 0".into(),
            MultiplierDomain::Fixed(c) => format!("v = {c}"),
        }
    }
}

/// Any implicit dynamics given by a residual on TT*Q × witness space.
pub trait ImplicitDynamics {
    fn config_dim(&self) -> usize;
    fn witness_dim(&self) -> usize;
    fn residual(&self, z: &PhaseVelocity, witness: &[f64]) -> Result<DynamicsResidual, DynamicsError>;
    fn witness_admissible(&self, _witness: &[f64]) -> bool {
        true
    }
}

/// Lagrangian L(q, q̇) or a Lagrangian family L(q, q̇; y).
#[derive(Debug, Clone)]
pub enum LagrangianSystem {
    Plain { lagrangian: ScalarField, dim: usize },
    Family { family: MorseFamily, dim: usize },
}

impl LagrangianSystem {
    pub fn plain(lagrangian: ScalarField) -> Result<Self, DynamicsError> {
        let n = lagrangian.arity();
        if n % 2 != 0 {
            return Err(DynamicsError::Dimension {
                expected: n + 1,
                got: n,
            });
        }
        Ok(LagrangianSystem::Plain {
            lagrangian,
            dim: n / 2,
        })
    }

    pub fn family(family: MorseFamily) -> Result<Self, DynamicsError> {
        let n = family.base_dim();
        if n % 2 != 0 {
            return Err(DynamicsError::Dimension {
                expected: n + 1,
                got: n,
            });
        }
        Ok(LagrangianSystem::Family { family, dim: n / 2 })
    }

    pub fn dim(&self) -> usize {
        match self {
            LagrangianSystem::Plain { dim, .. } | LagrangianSystem::Family { dim, .. } => *dim,
        }
    }

    pub fn fiber_dim(&self) -> usize {
        match self {
            LagrangianSystem::Plain { .. } => 0,
            LagrangianSystem::Family { family, .. } => family.fiber_dim(),
        }
    }

    /// The generating field with variables (q, q̇[, y]).
    pub fn field(&self) -> &ScalarField {
        match self {
            LagrangianSystem::Plain { lagrangian, .. } => lagrangian,
            LagrangianSystem::Family { family, .. } => family.generator(),
        }
    }

    pub fn plain_lagrangian(&self) -> Result<&ScalarField, DynamicsError> {
        match self {
            LagrangianSystem::Plain { lagrangian, .. } => Ok(lagrangian),
            LagrangianSystem::Family { .. } => Err(DynamicsError::NotPlain),
        }
    }

    pub fn fiber_admits(&self, y: &[f64]) -> bool {
        match self {
            LagrangianSystem::Plain { .. } => y.is_empty(),
            LagrangianSystem::Family { family, .. } => family.fiber_admits(y),
        }
    }
}

fn check_witness(expected: usize, w: &[f64]) -> Result<(), DynamicsError> {
    if w.len() != expected {
        Err(DynamicsError::Witness {
            expected,
            got: w.len(),
        })
    } else {
        Ok(())
    }
}

/// ṗ − ∂L/∂q, p − ∂L/∂q̇ and, for families, ∂L/∂y, all at (q, q̇, y).
pub fn lagrange_residual(
    sys: &LagrangianSystem,
    z: &PhaseVelocity,
    y: &[f64],
) -> Result<DynamicsResidual, DynamicsError> {
    let m = sys.dim();
    check_witness(sys.fiber_dim(), y)?;
    if z.dim() != m {
        return Err(DynamicsError::Dimension {
            expected: m,
            got: z.dim(),
        });
    }
    let x = [z.q.as_slice(), &z.qdot, y].concat();
    let j = sys.field().gradient(&x)?;
    let g = j.gradient();
    let mut values = Vec::with_capacity(2 * m + y.len());
    values.extend((0..m).map(|i| z.pdot[i] - g[i]));
    values.extend((0..m).map(|i| z.p[i] - g[m + i]));
    values.extend_from_slice(&g[2 * m..]);
    Ok(DynamicsResidual {
        values,
        witness: y.to_vec(),
    })
}

impl ImplicitDynamics for LagrangianSystem {
    fn config_dim(&self) -> usize {
        self.dim()
    }
    fn witness_dim(&self) -> usize {
        self.fiber_dim()
    }
    fn residual(&self, z: &PhaseVelocity, witness: &[f64]) -> Result<DynamicsResidual, DynamicsError> {
        lagrange_residual(self, z, witness)
    }
    fn witness_admissible(&self, w: &[f64]) -> bool {
        self.fiber_admits(w)
    }
}

/// Checks the rank condition of a Lagrangian family at (q, q̇, y).
pub fn family_rank_ok(sys: &LagrangianSystem, q: &[f64], qdot: &[f64], y: &[f64]) -> Result<bool, DynamicsError> {
    match sys {
        LagrangianSystem::Plain { .. } => Ok(true),
        LagrangianSystem::Family { family, .. } => {
            Ok(morse_rank_ok(family, &[q, qdot].concat(), y)?.ok)
        }
    }
}

/// ∂_ν∂_{q̇μ}L q̇^ν + ∂_{q̇ν}∂_{q̇μ}L q̈^ν − ∂_μL.
pub fn euler_lagrange_residual(sys: &LagrangianSystem, a: &SecondTangent) -> Result<Vec<f64>, DynamicsError> {
    let l = sys.plain_lagrangian()?;
    let m = sys.dim();
    let j = l.jet(&[a.q.as_slice(), &a.qdot].concat())?;
    Ok((0..m)
        .map(|mu| {
            let mut r = -j.gradient()[mu];
            for nu in 0..m {
                r += j.hessian(m + mu, nu) * a.qdot[nu] + j.hessian(m + mu, m + nu) * a.qddot[nu];
            }
            r
        })
        .collect())
}

/// Velocity-level data (p, ṗ, p̈) accompanying a second-order point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumCurve {
    pub p: Vec<f64>,
    pub pdot: Vec<f64>,
    pub pddot: Vec<f64>,
}

/// The prolonged Lagrange equations in four groups:
/// ṗ − ∂L/∂q, p − ∂L/∂q̇, p̈ − (∂∂L q̇ + ∂_{q̇}∂L q̈), ṗ − (∂∂_{q̇}L q̇ + ∂_{q̇}∂_{q̇}L q̈).
pub fn prolonged_lagrange_residual(
    sys: &LagrangianSystem,
    a: &SecondTangent,
    c: &MomentumCurve,
) -> Result<Vec<f64>, DynamicsError> {
    let l = sys.plain_lagrangian()?;
    let m = sys.dim();
    let j = l.jet(&[a.q.as_slice(), &a.qdot].concat())?;
    let g = j.gradient();
    let mut out = Vec::with_capacity(4 * m);
    out.extend((0..m).map(|i| c.pdot[i] - g[i]));
    out.extend((0..m).map(|i| c.p[i] - g[m + i]));
    out.extend((0..m).map(|mu| {
        let mut s = 0.0;
        for nu in 0..m {
            s += j.hessian(mu, nu) * a.qdot[nu] + j.hessian(mu, m + nu) * a.qddot[nu];
        }
        c.pddot[mu] - s
    }));
    out.extend((0..m).map(|mu| {
        let mut s = 0.0;
        for nu in 0..m {
            s += j.hessian(m + mu, nu) * a.qdot[nu] + j.hessian(m + mu, m + nu) * a.qddot[nu];
        }
        c.pdot[mu] - s
    }));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    pub hamiltonian: ScalarField,
    dim: usize,
}

impl HamiltonianSystem {
    pub fn new(hamiltonian: ScalarField) -> Result<Self, DynamicsError> {
        let n = hamiltonian.arity();
        if n % 2 != 0 {
            return Err(DynamicsError::Dimension {
                expected: n + 1,
                got: n,
            });
        }
        Ok(HamiltonianSystem {
            hamiltonian,
            dim: n / 2,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// q̇ = ∂H/∂p, ṗ = −∂H/∂q.
pub fn hamilton_field(sys: &HamiltonianSystem, x: &CotangentPoint) -> Result<PhaseVelocity, DynamicsError> {
    let m = sys.dim;
    let j = sys.hamiltonian.gradient(&x.coords())?;
    let g = j.gradient();
    Ok(PhaseVelocity {
        q: x.q.clone(),
        p: x.p.clone(),
        qdot: g[m..].to_vec(),
        pdot: g[..m].iter().map(|v| -v).collect(),
    })
}

impl ImplicitDynamics for HamiltonianSystem {
    fn config_dim(&self) -> usize {
        self.dim
    }
    fn witness_dim(&self) -> usize {
        0
    }
    fn residual(&self, z: &PhaseVelocity, witness: &[f64]) -> Result<DynamicsResidual, DynamicsError> {
        check_witness(0, witness)?;
        let f = hamilton_field(self, &z.base())?;
        let values = z
            .qdot
            .iter()
            .zip(&f.qdot)
            .chain(z.pdot.iter().zip(&f.pdot))
            .map(|(a, b)| a - b)
            .collect();
        Ok(DynamicsResidual {
            values,
            witness: Vec::new(),
        })
    }
}

/// Base Hamiltonian plus multiplier-weighted constraints, H̄ + v^A Φ_A, with
/// the constraint set Φ_A = 0 and a domain per multiplier.
#[derive(Debug, Clone)]
pub struct DiracSystem {
    pub base_h: ScalarField,
    pub constraints: Vec<ScalarField>,
    pub multiplier_domain: Vec<MultiplierDomain>,
    dim: usize,
}

impl DiracSystem {
    pub fn new(
        base_h: ScalarField,
        constraints: Vec<ScalarField>,
        multiplier_domain: Vec<MultiplierDomain>,
    ) -> Result<Self, DynamicsError> {
        let n = base_h.arity();
        if n % 2 != 0 || constraints.iter().any(|c| c.arity() != n) {
            return Err(DynamicsError::Dimension {
                expected: n,
                got: constraints.iter().map(|c| c.arity()).find(|&a| a != n).unwrap_or(n + 1),
            });
        }
        if multiplier_domain.len() != constraints.len() {
            return Err(DynamicsError::Witness {
                expected: constraints.len(),
                got: multiplier_domain.len(),
            });
        }
        Ok(DiracSystem {
            base_h,
            constraints,
            multiplier_domain,
            dim: n / 2,
        })
    }

    /// A Hamiltonian system seen as a Dirac system without constraints.
    pub fn unconstrained(h: ScalarField) -> Result<Self, DynamicsError> {
        DiracSystem::new(h, Vec::new(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn check_multipliers(&self, v: &[f64]) -> Result<(), DynamicsError> {
        check_witness(self.constraints.len(), v)?;
        for (i, (d, &x)) in self.multiplier_domain.iter().zip(v).enumerate() {
            if !d.contains(x) {
                return Err(DynamicsError::MultiplierDomain {
                    index: i,
                    value: x,
                    domain: d.label(),
                });
            }
        }
        Ok(())
    }

    /// The multiplier-fixed vector field (q̇, ṗ) at x:
    /// q̇ = ∂_pH̄ + v^A ∂_pΦ_A, ṗ = −∂_qH̄ − v^A ∂_qΦ_A.
    pub fn field(&self, x: &CotangentPoint, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
        self.check_multipliers(v)?;
        let m = self.dim;
        let c = x.coords();
        let mut grad = self.base_h.gradient(&c)?.gradient().to_vec();
        for (phi, &va) in self.constraints.iter().zip(v) {
            let j = phi.gradient(&c)?;
            for (g, d) in grad.iter_mut().zip(j.gradient()) {
                *g += va * d;
            }
        }
        let qdot = grad[m..].to_vec();
        let pdot = grad[..m].iter().map(|g| -g).collect();
        Ok((qdot, pdot))
    }

    pub fn constraint_values(&self, x: &CotangentPoint) -> Result<Vec<f64>, DynamicsError> {
        let c = x.coords();
        Ok(self
            .constraints
            .iter()
            .map(|f| f.value(&c))
            .collect::<Result<_, _>>()?)
    }
}

/// Stacks Φ_A(q, p), q̇ − (∂_pH̄ + v^A∂_pΦ_A) and ṗ − (−∂_qH̄ − v^A∂_qΦ_A).
pub fn dirac_residual(sys: &DiracSystem, z: &PhaseVelocity, v: &[f64]) -> Result<DynamicsResidual, DynamicsError> {
    let x = z.base();
    let (qdot, pdot) = sys.field(&x, v)?;
    let mut values = sys.constraint_values(&x)?;
    values.extend(z.qdot.iter().zip(&qdot).map(|(a, b)| a - b));
    values.extend(z.pdot.iter().zip(&pdot).map(|(a, b)| a - b));
    Ok(DynamicsResidual {
        values,
        witness: v.to_vec(),
    })
}

impl ImplicitDynamics for DiracSystem {
    fn config_dim(&self) -> usize {
        self.dim
    }
    fn witness_dim(&self) -> usize {
        self.constraints.len()
    }
    fn residual(&self, z: &PhaseVelocity, witness: &[f64]) -> Result<DynamicsResidual, DynamicsError> {
        dirac_residual(self, z, witness)
    }
    fn witness_admissible(&self, w: &[f64]) -> bool {
        self.check_multipliers(w).is_ok()
    }
}

/// Dynamics generated by a Hamiltonian Morse family F(q, p; y):
/// q̇ = ∂F/∂p, ṗ = −∂F/∂q, ∂F/∂y = 0.
#[derive(Debug, Clone)]
pub struct HamiltonianFamilySystem {
    pub family: MorseFamily,
    dim: usize,
}

impl HamiltonianFamilySystem {
    pub fn new(family: MorseFamily) -> Result<Self, DynamicsError> {
        let n = family.base_dim();
        if n % 2 != 0 {
            return Err(DynamicsError::Dimension {
                expected: n + 1,
                got: n,
            });
        }
        Ok(HamiltonianFamilySystem { family, dim: n / 2 })
    }
}

impl ImplicitDynamics for HamiltonianFamilySystem {
    fn config_dim(&self) -> usize {
        self.dim
    }
    fn witness_dim(&self) -> usize {
        self.family.fiber_dim()
    }
    fn residual(&self, z: &PhaseVelocity, witness: &[f64]) -> Result<DynamicsResidual, DynamicsError> {
        check_witness(self.family.fiber_dim(), witness)?;
        let m = self.dim;
        let x = [z.q.as_slice(), &z.p, witness].concat();
        let j = self.family.generator().gradient(&x)?;
        let g = j.gradient();
        let mut values = Vec::with_capacity(2 * m + witness.len());
        values.extend((0..m).map(|i| z.qdot[i] - g[m + i]));
        values.extend((0..m).map(|i| z.pdot[i] + g[i]));
        values.extend_from_slice(&g[2 * m..]);
        Ok(DynamicsResidual {
            values,
            witness: witness.to_vec(),
        })
    }
    fn witness_admissible(&self, w: &[f64]) -> bool {
        self.family.fiber_admits(w)
    }
}

/// Lagrange equations with the force term of the wrong sign, ṗ = −∂L/∂q.
///
/// Not a Lagrangian submanifold in general; used to exercise [`lagrangian_check`].
#[derive(Debug, Clone)]
pub struct FlippedForce(pub LagrangianSystem);

impl ImplicitDynamics for FlippedForce {
    fn config_dim(&self) -> usize {
        self.0.dim()
    }
    fn witness_dim(&self) -> usize {
        self.0.fiber_dim()
    }
    fn residual(&self, z: &PhaseVelocity, witness: &[f64]) -> Result<DynamicsResidual, DynamicsError> {
        let m = self.0.dim();
        let x = [z.q.as_slice(), &z.qdot, witness].concat();
        let j = self.0.field().gradient(&x)?;
        let g = j.gradient();
        let mut r = lagrange_residual(&self.0, z, witness)?;
        for i in 0..m {
            r.values[i] = z.pdot[i] + g[i];
        }
        Ok(r)
    }
    fn witness_admissible(&self, w: &[f64]) -> bool {
        self.0.fiber_admits(w)
    }
}

/// Jacobian of the residual over (q, p, q̇, ṗ, witness) by central differences.
pub fn residual_jacobian(
    dynamics: &dyn ImplicitDynamics,
    z: &PhaseVelocity,
    witness: &[f64],
    h: f64,
) -> Result<DMatrix<f64>, DynamicsError> {
    let x0 = [z.coords(), witness.to_vec()].concat();
    let m4 = 4 * dynamics.config_dim();
    let eval = |x: &[f64]| -> Result<Vec<f64>, DynamicsError> {
        Ok(dynamics
            .residual(&PhaseVelocity::from_coords(&x[..m4]), &x[m4..])?
            .values)
    };
    let r0 = eval(&x0)?;
    let n = x0.len();
    let mut jac = DMatrix::zeros(r0.len(), n);
    for c in 0..n {
        let step = h * (1.0 + x0[c].abs());
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[c] += step;
        xm[c] -= step;
        let rp = eval(&xp)?;
        let rm = eval(&xm)?;
        for r in 0..r0.len() {
            jac[(r, c)] = (rp[r] - rm[r]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Tangent vectors of D at a point, projected to (δq, δp, δq̇, δṗ), as columns.
pub fn dynamics_tangents(
    dynamics: &dyn ImplicitDynamics,
    z: &PhaseVelocity,
    witness: &[f64],
) -> Result<DMatrix<f64>, DynamicsError> {
    let jac = residual_jacobian(dynamics, z, witness, 1e-6)?;
    let ns = linalg::nullspace(&jac);
    let m4 = 4 * dynamics.config_dim();
    Ok(ns.rows(0, m4).into_owned())
}

/// max |d_Tω_Q| over pairs of tangent vectors of D at a point on D.
pub fn lagrangian_check(
    dynamics: &dyn ImplicitDynamics,
    z: &PhaseVelocity,
    witness: &[f64],
    tol: f64,
) -> Result<f64, DynamicsError> {
    let r = dynamics.residual(z, witness)?.max_abs();
    if r > tol {
        return Err(DynamicsError::OffDynamics(r));
    }
    let t = dynamics_tangents(dynamics, z, witness)?;
    let cols: Vec<Vec<f64>> = (0..t.ncols()).map(|c| t.column(c).iter().copied().collect()).collect();
    let mut worst = 0.0f64;
    for i in 0..cols.len() {
        for j in (i + 1)..cols.len() {
            worst = worst.max(dt_omega(&cols[i], &cols[j]).abs());
        }
    }
    Ok(worst)
}

/// Smallest residual at `z` over admissible witnesses, by Gauss–Newton from `seed`.
///
/// Returns the residual norm (max abs) and the witness reached. For a
/// dynamics without witness this is just the residual at `z`.
pub fn membership_defect(
    dynamics: &dyn ImplicitDynamics,
    z: &PhaseVelocity,
    seed: &[f64],
) -> Result<(f64, Vec<f64>), DynamicsError> {
    let k = dynamics.witness_dim();
    check_witness(k, seed)?;
    let mut w = seed.to_vec();
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut r = dynamics.residual(z, &w)?.values;
    if k == 0 {
        return Ok((linalg::max_abs(&r), w));
    }
    for _ in 0..60 {
        let mut jac = DMatrix::zeros(r.len(), k);
        for c in 0..k {
            let step = 1e-7 * (1.0 + w[c].abs());
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[c] += step;
            wm[c] -= step;
            let (rp, rm) = match (dynamics.residual(z, &wp), dynamics.residual(z, &wm)) {
                (Ok(a), Ok(b)) => (a.values, b.values),
                _ => {
                    // one-sided at a domain boundary
                    let a = dynamics.residual(z, &wp).map(|x| x.values).unwrap_or_else(|_| r.clone());
                    let b = dynamics.residual(z, &wm).map(|x| x.values).unwrap_or_else(|_| r.clone());
                    (a, b)
                }
            };
            for i in 0..r.len() {
                jac[(i, c)] = (rp[i] - rm[i]) / (2.0 * step);
            }
        }
        let step = linalg::lstsq(&jac, &(-DVector::from_column_slice(&r)));
        let n0 = norm(&r);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if dynamics.witness_admissible(&trial) {
                if let Ok(rt) = dynamics.residual(z, &trial) {
                    if norm(&rt.values) < n0 {
                        w = trial;
                        r = rt.values;
                        moved = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !moved || norm(&r) < 1e-15 {
            break;
        }
    }
    Ok((linalg::max_abs(&r), w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::{dot, Jet2};

    fn free_particle(m: usize) -> LagrangianSystem {
        LagrangianSystem::plain(ScalarField::new("free", 2 * m, move |x| dot(&x[m..], &x[m..]) * 0.5)).unwrap()
    }

    fn minkowski(v: &[Jet2]) -> Jet2 {
        &v[0] * &v[0] - &v[1] * &v[1] - &v[2] * &v[2] - &v[3] * &v[3]
    }

    #[test]
    fn free_particle_lagrange() {
        let sys = free_particle(2);
        let z = PhaseVelocity::new(vec![1.0, 2.0], vec![0.5, -1.0], vec![0.5, -1.0], vec![0.0; 2]).unwrap();
        assert_eq!(lagrange_residual(&sys, &z, &[]).unwrap().max_abs(), 0.0);
        let bad = PhaseVelocity { p: vec![0.0, 0.0], ..z.clone() };
        let r = lagrange_residual(&sys, &bad, &[]).unwrap();
        assert!(r.values[2..4].iter().any(|v| v.abs() > 0.1));
        let a = SecondTangent::new(vec![0.0; 2], vec![1.0, 1.0], vec![0.0; 2]).unwrap();
        assert_eq!(euler_lagrange_residual(&sys, &a).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn massless_family_point() {
        let fam = MorseFamily::new(
            8,
            1,
            ScalarField::new("massless", 9, |x| minkowski(&x[4..8]) / (&x[8] * 2.0)),
        )
        .unwrap()
        .with_fiber_domain("y > 0", |y| y[0] > 0.0);
        let sys = LagrangianSystem::family(fam).unwrap();
        let z = PhaseVelocity::new(vec![0.0; 4], vec![0.5, -0.5, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0], vec![0.0; 4]).unwrap();
        assert!(lagrange_residual(&sys, &z, &[2.0]).unwrap().max_abs() < 1e-15);
        assert!(family_rank_ok(&sys, &z.q, &z.qdot, &[2.0]).unwrap());
    }

    #[test]
    fn hamilton_field_kinetic() {
        let h = HamiltonianSystem::new(ScalarField::new("kin", 6, |x| dot(&x[3..], &x[3..]) * 0.25)).unwrap();
        let x = CotangentPoint::new(vec![0.0; 3], vec![3.0, 0.0, 0.0]).unwrap();
        let f = hamilton_field(&h, &x).unwrap();
        assert_eq!(f.qdot, vec![1.5, 0.0, 0.0]);
        assert_eq!(f.pdot, vec![0.0, 0.0, 0.0]);
        let c = HamiltonianSystem::new(ScalarField::constant("c", 6, 2.0)).unwrap();
        let f = hamilton_field(&c, &x).unwrap();
        assert!(f.qdot.iter().chain(&f.pdot).all(|v| *v == 0.0));
    }

    fn massless_dirac() -> DiracSystem {
        DiracSystem::new(
            ScalarField::constant("0", 8, 0.0),
            vec![ScalarField::new("g(p,p)/2", 8, |x| minkowski(&x[4..]) * 0.5)],
            vec![MultiplierDomain::Positive],
        )
        .unwrap()
    }

    #[test]
    fn massless_dirac_point() {
        let sys = massless_dirac();
        let z = PhaseVelocity::new(vec![0.0; 4], vec![1.0, 1.0, 0.0, 0.0], vec![3.0, -3.0, 0.0, 0.0], vec![0.0; 4]).unwrap();
        assert_eq!(dirac_residual(&sys, &z, &[3.0]).unwrap().max_abs(), 0.0);
        assert!(matches!(
            dirac_residual(&sys, &z, &[0.0]),
            Err(DynamicsError::MultiplierDomain { .. })
        ));
        let off = PhaseVelocity { p: vec![2.0, 1.0, 0.0, 0.0], ..z };
        assert!(dirac_residual(&sys, &off, &[3.0]).unwrap().values[0].abs() > 1.0);
    }

    #[test]
    fn sign_convention_is_hamiltonian() {
        // Φ = q p: the multiplier field is that of v Φ, q̇ = v q, ṗ = −v p
        let sys = DiracSystem::new(
            ScalarField::constant("0", 2, 0.0),
            vec![ScalarField::new("qp", 2, |x| &x[0] * &x[1])],
            vec![MultiplierDomain::Free],
        )
        .unwrap();
        let x = CotangentPoint::new(vec![2.0], vec![3.0]).unwrap();
        let (qd, pd) = sys.field(&x, &[0.5]).unwrap();
        assert_eq!(qd, vec![1.0]);
        assert_eq!(pd, vec![-1.5]);
    }

    #[test]
    fn isotropy_and_sign_flip() {
        // charged particle in a constant magnetic field
        let b = 1.3;
        let l = ScalarField::new("charged", 6, move |x| {
            dot(&x[3..], &x[3..]) * 0.5 + (&x[1] * &x[3] * (-0.5 * b)) + (&x[0] * &x[4] * (0.5 * b))
        });
        let sys = LagrangianSystem::plain(l).unwrap();
        let q = vec![0.3, -0.7, 0.2];
        let qd = vec![0.9, 0.4, -0.5];
        let x = [q.as_slice(), &qd].concat();
        let g = sys.field().gradient(&x).unwrap().gradient().to_vec();
        let z = PhaseVelocity::new(q.clone(), g[3..].to_vec(), qd.clone(), g[..3].to_vec()).unwrap();
        assert!(lagrangian_check(&sys, &z, &[], 1e-10).unwrap() < 1e-8);
        let flipped = FlippedForce(sys);
        let zf = PhaseVelocity { pdot: g[..3].iter().map(|v| -v).collect(), ..z };
        assert!(lagrangian_check(&flipped, &zf, &[], 1e-10).unwrap() > 1e-3);
    }

    #[test]
    fn prolonged_matches_lagrange_blocks() {
        let sys = free_particle(1);
        let a = SecondTangent::new(vec![0.0], vec![2.0], vec![0.0]).unwrap();
        let c = MomentumCurve {
            p: vec![2.0],
            pdot: vec![0.0],
            pddot: vec![0.0],
        };
        assert!(linalg::max_abs(&prolonged_lagrange_residual(&sys, &a, &c).unwrap()) < 1e-15);
        let zero = MomentumCurve {
            p: vec![0.0],
            pdot: vec![0.0],
            pddot: vec![0.0],
        };
        let r = prolonged_lagrange_residual(&sys, &a, &zero).unwrap();
        assert_eq!(r, vec![0.0, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn membership_recovers_multiplier() {
        let sys = massless_dirac();
        let z = PhaseVelocity::new(vec![0.0; 4], vec![1.0, 1.0, 0.0, 0.0], vec![3.0, -3.0, 0.0, 0.0], vec![0.0; 4]).unwrap();
        let (d, w) = membership_defect(&sys, &z, &[1.0]).unwrap();
        assert!(d < 1e-12);
        assert!((w[0] - 3.0).abs() < 1e-10);
    }
}
