//! Coordinate points of TQ, T*Q, TT*Q, TTQ, T²Q, T*TQ and T*T*Q, the canonical
//! maps between them, and the forms and brackets evaluated in coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jetcalc::{JetError, ScalarField};

/// Absolute tolerance for matching base points of paired objects.
pub const BASE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BundleError {
    #[error("base points differ by {0:e}")]
    BaseMismatch(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
}

fn check_dims(m: usize, parts: &[&[f64]]) -> Result<(), BundleError> {
    for p in parts {
        if p.len() != m {
            return Err(BundleError::Dimension {
                expected: m,
                got: p.len(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentPoint {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl TangentPoint {
    pub fn new(q: Vec<f64>, v: Vec<f64>) -> Result<Self, BundleError> {
        check_dims(q.len(), &[&v])?;
        Ok(TangentPoint { q, v })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Coordinates (q, v) as one vector.
    pub fn coords(&self) -> Vec<f64> {
        [self.q.as_slice(), &self.v].concat()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotangentPoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl CotangentPoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self, BundleError> {
        check_dims(q.len(), &[&p])?;
        Ok(CotangentPoint { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Coordinates (q, p) as one vector.
    pub fn coords(&self) -> Vec<f64> {
        [self.q.as_slice(), &self.p].concat()
    }

    pub fn from_coords(x: &[f64]) -> Self {
        let m = x.len() / 2;
        CotangentPoint {
            q: x[..m].to_vec(),
            p: x[m..2 * m].to_vec(),
        }
    }
}

/// A point of TT*Q with coordinates (q, p, q̇, ṗ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVelocity {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub qdot: Vec<f64>,
    pub pdot: Vec<f64>,
}

impl PhaseVelocity {
    pub fn new(q: Vec<f64>, p: Vec<f64>, qdot: Vec<f64>, pdot: Vec<f64>) -> Result<Self, BundleError> {
        check_dims(q.len(), &[&p, &qdot, &pdot])?;
        Ok(PhaseVelocity { q, p, qdot, pdot })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn coords(&self) -> Vec<f64> {
        [self.q.as_slice(), &self.p, &self.qdot, &self.pdot].concat()
    }

    pub fn from_coords(x: &[f64]) -> Self {
        let m = x.len() / 4;
        PhaseVelocity {
            q: x[..m].to_vec(),
            p: x[m..2 * m].to_vec(),
            qdot: x[2 * m..3 * m].to_vec(),
            pdot: x[3 * m..4 * m].to_vec(),
        }
    }

    pub fn base(&self) -> CotangentPoint {
        CotangentPoint {
            q: self.q.clone(),
            p: self.p.clone(),
        }
    }
}

/// A point of TTQ with coordinates (q, q̇, q′, q̇′).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteratedTangent {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub qprime: Vec<f64>,
    pub qdotprime: Vec<f64>,
}

impl IteratedTangent {
    pub fn new(
        q: Vec<f64>,
        qdot: Vec<f64>,
        qprime: Vec<f64>,
        qdotprime: Vec<f64>,
    ) -> Result<Self, BundleError> {
        check_dims(q.len(), &[&qdot, &qprime, &qdotprime])?;
        Ok(IteratedTangent {
            q,
            qdot,
            qprime,
            qdotprime,
        })
    }
}

/// A point of T²Q with coordinates (q, q̇, q̈).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondTangent {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub qddot: Vec<f64>,
}

impl SecondTangent {
    pub fn new(q: Vec<f64>, qdot: Vec<f64>, qddot: Vec<f64>) -> Result<Self, BundleError> {
        check_dims(q.len(), &[&qdot, &qddot])?;
        Ok(SecondTangent { q, qdot, qddot })
    }
}

/// A point of T*TQ with coordinates (q, q̇, a, b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotangentOfTangent {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// A point of T*T*Q with coordinates (q, p, u, v).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotangentOfCotangent {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub vup: Vec<f64>,
}

/// The canonical involution of TTQ.
pub fn kappa(w: &IteratedTangent) -> IteratedTangent {
    IteratedTangent {
        q: w.q.clone(),
        qdot: w.qprime.clone(),
        qprime: w.qdot.clone(),
        qdotprime: w.qdotprime.clone(),
    }
}

pub fn alpha(z: &PhaseVelocity) -> CotangentOfTangent {
    CotangentOfTangent {
        q: z.q.clone(),
        qdot: z.qdot.clone(),
        a: z.pdot.clone(),
        b: z.p.clone(),
    }
}

pub fn alpha_inverse(n: &CotangentOfTangent) -> PhaseVelocity {
    PhaseVelocity {
        q: n.q.clone(),
        p: n.b.clone(),
        qdot: n.qdot.clone(),
        pdot: n.a.clone(),
    }
}

pub fn beta(z: &PhaseVelocity) -> CotangentOfCotangent {
    CotangentOfCotangent {
        q: z.q.clone(),
        p: z.p.clone(),
        u: z.pdot.clone(),
        vup: z.qdot.iter().map(|x| -x).collect(),
    }
}

pub fn beta_inverse(b: &CotangentOfCotangent) -> PhaseVelocity {
    PhaseVelocity {
        q: b.q.clone(),
        p: b.p.clone(),
        qdot: b.vup.iter().map(|x| -x).collect(),
        pdot: b.u.clone(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splits a variation vector of TT*Q into (δq, δp, δq̇, δṗ).
fn split4(d: &[f64]) -> [&[f64]; 4] {
    let m = d.len() / 4;
    [&d[..m], &d[m..2 * m], &d[2 * m..3 * m], &d[3 * m..]]
}

/// Pushforward of a TT*Q variation (δq, δp, δq̇, δṗ) through `alpha`,
/// returned in T*TQ order (δq, δq̇, δa, δb).
pub fn alpha_pushforward(d: &[f64]) -> Vec<f64> {
    let [dq, dp, dqd, dpd] = split4(d);
    [dq, dqd, dpd, dp].concat()
}

/// Pushforward of a TT*Q variation through `beta`, in T*T*Q order (δq, δp, δu, δv).
pub fn beta_pushforward(d: &[f64]) -> Vec<f64> {
    let [dq, dp, dqd, dpd] = split4(d);
    let neg: Vec<f64> = dqd.iter().map(|x| -x).collect();
    [dq, dp, dpd, &neg].concat()
}

/// Liouville form of T*TQ, a dq + b dq̇, on a variation (δq, δq̇, δa, δb).
pub fn theta_tq(n: &CotangentOfTangent, d: &[f64]) -> f64 {
    let [dq, dqd, _, _] = split4(d);
    dot(&n.a, dq) + dot(&n.b, dqd)
}

/// Liouville form of T*T*Q, u dq + v dp, on a variation (δq, δp, δu, δv).
pub fn theta_tstarq(b: &CotangentOfCotangent, d: &[f64]) -> f64 {
    let [dq, dp, _, _] = split4(d);
    dot(&b.u, dq) + dot(&b.vup, dp)
}

/// The tangent lift d_Tθ_Q = ṗ dq + p dq̇ on a TT*Q variation.
pub fn dt_theta(z: &PhaseVelocity, d: &[f64]) -> f64 {
    let [dq, _, dqd, _] = split4(d);
    dot(&z.pdot, dq) + dot(&z.p, dqd)
}

/// Contraction i_Tω_Q = ṗ dq − q̇ dp at `z`, evaluated on a TT*Q variation `w`.
pub fn it_omega(z: &PhaseVelocity, w: &[f64]) -> f64 {
    let [dq, dp, _, _] = split4(w);
    dot(&z.pdot, dq) - dot(&z.qdot, dp)
}

/// The symplectic form d_Tω_Q = dṗ∧dq + dp∧dq̇ on two TT*Q variations.
pub fn dt_omega(d1: &[f64], d2: &[f64]) -> f64 {
    let [q1, p1, qd1, pd1] = split4(d1);
    let [q2, p2, qd2, pd2] = split4(d2);
    dot(pd1, q2) - dot(pd2, q1) + dot(p1, qd2) - dot(p2, qd1)
}

/// Canonical form ω_Q = dp∧dq on two T*Q variations (δq, δp).
pub fn omega_q(d1: &[f64], d2: &[f64]) -> f64 {
    let m = d1.len() / 2;
    dot(&d1[m..], &d2[..m]) - dot(&d2[m..], &d1[..m])
}

/// Pairing p·q̇ of the Liouville form with a phase velocity.
pub fn liouville_pair(w: &PhaseVelocity) -> f64 {
    dot(&w.p, &w.qdot)
}

/// Pairing of TT*Q with TTQ over a common TQ point: p(z)·q̇′(w) + ṗ(z)·q′(w).
pub fn tilde_pairing(z: &PhaseVelocity, w: &IteratedTangent) -> f64 {
    dot(&z.p, &w.qdotprime) + dot(&z.pdot, &w.qdot)
}

/// Pairing of a T*TQ covector with a TTQ vector over the same TQ point.
pub fn tq_pairing(n: &CotangentOfTangent, w: &IteratedTangent) -> f64 {
    dot(&n.a, &w.qprime) + dot(&n.b, &w.qdotprime)
}

/// Canonical Poisson bracket of two functions on T*Q (variables (q, p)).
pub fn poisson_bracket(f: &ScalarField, g: &ScalarField, x: &CotangentPoint) -> Result<f64, BundleError> {
    let c = x.coords();
    let jf = f.gradient(&c)?;
    let jg = g.gradient(&c)?;
    Ok(bracket_from_gradients(jf.gradient(), jg.gradient()))
}

/// {F,G} from the two gradients in (q, p) order.
pub fn bracket_from_gradients(df: &[f64], dg: &[f64]) -> f64 {
    let m = df.len() / 2;
    (0..m).map(|k| df[k] * dg[m + k] - dg[k] * df[m + k]).sum()
}

/// Total derivative d_T F = ∇F · v of a function on Q.
pub fn dt_function(f: &ScalarField, x: &TangentPoint) -> Result<f64, BundleError> {
    let j = f.gradient(&x.q)?;
    Ok(dot(j.gradient(), &x.v))
}

/// Shift of the force component: ṗ ↦ ṗ − f.
pub fn chi_shift(w: &PhaseVelocity, f: &CotangentPoint) -> Result<PhaseVelocity, BundleError> {
    check_dims(w.dim(), &[&f.q, &f.p])?;
    let gap = w
        .q
        .iter()
        .zip(&f.q)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if gap > BASE_TOL {
        return Err(BundleError::BaseMismatch(gap));
    }
    Ok(PhaseVelocity {
        pdot: w.pdot.iter().zip(&f.p).map(|(a, b)| a - b).collect(),
        ..w.clone()
    })
}
