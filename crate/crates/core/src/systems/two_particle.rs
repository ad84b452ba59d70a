//! Two relativistic particles in flat space-time interacting through a
//! potential of their spacelike separation.
//!
//! Phase-space coordinates are (q₁, q₂, p¹, p²), each block of length 4.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SystemError;
use crate::bundles::CotangentPoint;
use crate::constraint_algo::{project_to_constraints, ConstraintSet, HamiltonianFamily, ProjectionOptions};
use crate::dynamics::{DiracSystem, LagrangianSystem, MultiplierDomain};
use crate::integrator::Gauge;
use crate::jetcalc::{Jet2, ScalarField};

const ETA: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

fn mink(a: &[Jet2], b: &[Jet2]) -> Jet2 {
    (0..4).fold(Jet2::constant(0.0), |acc, i| acc + &a[i] * &b[i] * ETA[i])
}

fn mink_f(a: &[f64], b: &[f64]) -> f64 {
    (0..4).map(|i| ETA[i] * a[i] * b[i]).sum()
}

/// Interaction potential V(r) of the separation r > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    /// V = ½ω²r²
    Quadratic { omega: f64 },
    Constant { c: f64 },
}

impl Potential {
    pub fn jet(&self, r: &Jet2) -> Jet2 {
        match *self {
            Potential::Quadratic { omega } => r * r * (0.5 * omega * omega),
            Potential::Constant { c } => Jet2::constant(c),
        }
    }

    /// dV/dr as a jet.
    pub fn derivative_jet(&self, r: &Jet2) -> Jet2 {
        match *self {
            Potential::Quadratic { omega } => r * (omega * omega),
            Potential::Constant { .. } => Jet2::constant(0.0),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.jet(&Jet2::constant(r)).value()
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.derivative_jet(&Jet2::constant(r)).value()
    }

    pub fn label(&self) -> String {
        match self {
            Potential::Quadratic { omega } => format!("quadratic(ω={omega})"),
            Potential::Constant { c } => format!("constant({c})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoParticleSpec {
    pub m1: f64,
    pub m2: f64,
    pub potential: Potential,
}

impl TwoParticleSpec {
    /// ‖q₂ − q₁‖ = √(−g(Δ, Δ)) from the position blocks.
    pub fn separation(&self, q1: &[Jet2], q2: &[Jet2]) -> Jet2 {
        let d: Vec<Jet2> = (0..4).map(|i| &q2[i] - &q1[i]).collect();
        (-mink(&d, &d)).sqrt()
    }

    /// m̄_A = √(m_A² + V(r)).
    pub fn dressed_mass(&self, which: usize, r: &Jet2) -> Jet2 {
        let m = if which == 0 { self.m1 } else { self.m2 };
        (self.potential.jet(r) + m * m).sqrt()
    }

    pub fn dressed_mass_at(&self, which: usize, q1: &[f64], q2: &[f64]) -> f64 {
        let d: Vec<f64> = (0..4).map(|i| q2[i] - q1[i]).collect();
        let r = (-mink_f(&d, &d)).sqrt();
        let m = if which == 0 { self.m1 } else { self.m2 };
        (m * m + self.potential.value(r)).sqrt()
    }

    fn domain_ok(&self, x: &[f64]) -> bool {
        let d: Vec<f64> = (0..4).map(|i| x[4 + i] - x[i]).collect();
        let s = -mink_f(&d, &d);
        s > 0.0
            && mink_f(&x[8..12], &x[8..12]) > 0.0
            && mink_f(&x[12..16], &x[12..16]) > 0.0
            && self.m1 * self.m1 + self.potential.value(s.sqrt()) > 0.0
            && self.m2 * self.m2 + self.potential.value(s.sqrt()) > 0.0
    }

    /// Φ_A = ‖p^A‖ − m̄_A.
    pub fn constraint(&self, which: usize) -> ScalarField {
        let spec = *self;
        let name = if which == 0 { "‖p¹‖ − m̄₁" } else { "‖p²‖ − m̄₂" };
        ScalarField::new(name, 16, move |x| {
            let p = &x[8 + 4 * which..12 + 4 * which];
            let r = spec.separation(&x[..4], &x[4..8]);
            mink(p, p).sqrt() - spec.dressed_mass(which, &r)
        })
        .with_guard("timelike momenta and spacelike separation", move |x| spec.domain_ok(x))
    }

    /// Ψ = (p¹ + p²)·(q₂ − q₁), the contraction P_κ Δ^κ.
    pub fn psi(&self) -> ScalarField {
        ScalarField::new("(p¹ + p²)·(q₂ − q₁)", 16, |x| {
            (0..4).fold(Jet2::constant(0.0), |acc, i| acc + (&x[8 + i] + &x[12 + i]) * (&x[4 + i] - &x[i]))
        })
    }

    /// L = m̄₁‖q̇₁‖ + m̄₂‖q̇₂‖ on T(Q × Q) with variables (q₁, q₂, q̇₁, q̇₂).
    pub fn lagrangian(&self) -> ScalarField {
        let spec = *self;
        ScalarField::new("m̄₁‖q̇₁‖ + m̄₂‖q̇₂‖", 16, move |x| {
            let r = spec.separation(&x[..4], &x[4..8]);
            spec.dressed_mass(0, &r) * mink(&x[8..12], &x[8..12]).sqrt()
                + spec.dressed_mass(1, &r) * mink(&x[12..16], &x[12..16]).sqrt()
        })
        .with_guard("timelike velocities and spacelike separation", move |x| spec.domain_ok(x))
    }

    pub fn lagrangian_system(&self) -> Result<LagrangianSystem, SystemError> {
        Ok(LagrangianSystem::plain(self.lagrangian())?)
    }

    pub fn dirac(&self) -> Result<DiracSystem, SystemError> {
        Ok(DiracSystem::new(
            ScalarField::constant("0", 16, 0.0),
            vec![self.constraint(0), self.constraint(1)],
            vec![MultiplierDomain::Positive, MultiplierDomain::Positive],
        )?)
    }

    pub fn family(&self) -> Result<HamiltonianFamily, SystemError> {
        Ok(HamiltonianFamily::new(
            vec![self.constraint(0), self.constraint(1)],
            vec![MultiplierDomain::Positive, MultiplierDomain::Positive],
        )?
        .with_exclusion("p¹ + p² = 0", |x| (0..4).all(|i| (x[8 + i] + x[12 + i]).abs() < 1e-12)))
    }

    pub fn primary(&self) -> ConstraintSet {
        ConstraintSet::primary(vec![self.constraint(0), self.constraint(1)])
    }

    /// Multipliers (1, α²) with α² fixed by tangency to Ψ = 0.
    pub fn synchronized_gauge(&self) -> Gauge {
        let spec = *self;
        Gauge::custom("synchronized", move |x| {
            let c = x.coords();
            let p1 = &c[8..12];
            let p2 = &c[12..16];
            let pp: Vec<f64> = (0..4).map(|i| p1[i] + p2[i]).collect();
            let (a, b) = (mink_f(&pp, p1), mink_f(&pp, p2));
            if !(a > 0.0 && b > 0.0) {
                return Err("g⁻¹(P, p^A) must be positive".into());
            }
            let mb1 = spec.dressed_mass_at(0, &c[..4], &c[4..8]);
            let mb2 = spec.dressed_mass_at(1, &c[..4], &c[4..8]);
            Ok(vec![1.0, mb2 * a / (mb1 * b)])
        })
    }

    /// A point of C: random spacelike separation and future-directed
    /// momenta of the dressed masses.
    pub fn sample_on_c<R: Rng>(&self, rng: &mut R) -> CotangentPoint {
        let q1: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dir: Vec<f64> = loop {
            let d: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.1 {
                break d.iter().map(|v| v / n).collect();
            }
        };
        let len = rng.gen_range(0.6..1.5);
        let dt = rng.gen_range(-0.3..0.3) * len;
        let q2: Vec<f64> = std::iter::once(q1[0] + dt)
            .chain((0..3).map(|i| q1[1 + i] + len * dir[i]))
            .collect();
        let mut p = Vec::with_capacity(8);
        for which in 0..2 {
            let mb = self.dressed_mass_at(which, &q1, &q2);
            let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let gamma = 1.0 / (1.0 - u.iter().map(|v| v * v).sum::<f64>()).sqrt();
            p.push(mb * gamma);
            // lower-index spatial components: p_i = −m̄ γ u^i
            p.extend(u.iter().map(|v| -mb * gamma * v));
        }
        CotangentPoint::new([q1, q2].concat(), p).expect("equal lengths")
    }

    /// A point of C̄¹ = C ∩ {Ψ = 0}, by projection from a point of C.
    pub fn sample_on_c1<R: Rng>(&self, rng: &mut R) -> Result<CotangentPoint, SystemError> {
        let mut c = self.primary();
        c.constraints.push(crate::constraint_algo::Constraint {
            field: self.psi(),
            tag: crate::constraint_algo::ConstraintTag(1),
        });
        for _ in 0..20 {
            let x = self.sample_on_c(rng);
            if let Ok(y) = project_to_constraints(&x, &c, &ProjectionOptions::default()) {
                let yc = y.coords();
                if self.domain_ok(&yc) && self.phase_future(&yc) {
                    return Ok(y);
                }
            }
        }
        Err(SystemError::Domain("no admissible point of C̄¹ reached".into()))
    }

    fn phase_future(&self, x: &[f64]) -> bool {
        x[8] > 0.0 && x[12] > 0.0
    }
}

/// First-order equations on T(T*(Q × Q)): the Lagrange equations in
/// momentum form together with Ψ = 0.
///
/// Variables: (q₁, q₂, p¹, p², q̇₁, q̇₂, ṗ¹, ṗ²), 32 in total.
pub fn first_order_equations(spec: &TwoParticleSpec) -> Vec<ScalarField> {
    let mut out = Vec::new();
    let s = *spec;
    let guard = move |x: &[f64]| {
        mink_f(&x[16..20], &x[16..20]) > 0.0 && mink_f(&x[20..24], &x[20..24]) > 0.0 && s.domain_ok(&x[..16])
    };
    let force = move |x: &[Jet2]| -> Vec<Jet2> {
        // DV/(2r) (‖q̇₁‖/m̄₁ + ‖q̇₂‖/m̄₂) g(Δ)
        let r = s.separation(&x[..4], &x[4..8]);
        let coef = s.potential.derivative_jet(&r) / (&r * 2.0)
            * (mink(&x[16..20], &x[16..20]).sqrt() / s.dressed_mass(0, &r)
                + mink(&x[20..24], &x[20..24]).sqrt() / s.dressed_mass(1, &r));
        (0..4).map(|k| &coef * (&x[4 + k] - &x[k]) * ETA[k]).collect()
    };
    for which in 0..2 {
        for k in 0..4 {
            let f = force;
            let sign = if which == 0 { 1.0 } else { -1.0 };
            out.push(
                ScalarField::new(format!("ṗ{}_{k} − force", which + 1), 32, move |x| {
                    &x[24 + 4 * which + k] - f(x)[k].clone() * sign
                })
                .with_guard("domain", guard),
            );
        }
    }
    for which in 0..2 {
        for k in 0..4 {
            out.push(
                ScalarField::new(format!("p{}_{k} − m̄ g q̇/‖q̇‖", which + 1), 32, move |x| {
                    let r = s.separation(&x[..4], &x[4..8]);
                    let v = &x[16 + 4 * which..20 + 4 * which];
                    &x[8 + 4 * which + k] - s.dressed_mass(which, &r) * &v[k] * ETA[k] / mink(v, v).sqrt()
                })
                .with_guard("domain", guard),
            );
        }
    }
    let psi = spec.psi();
    out.push(
        ScalarField::new("Ψ", 32, move |x| psi.compose_jets(&x[..16])).with_guard("domain", guard),
    );
    out
}
