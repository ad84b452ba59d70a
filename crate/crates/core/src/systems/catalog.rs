//! Constructors for the dynamical systems of the catalog.
//!
//! Every system carries its Lagrangian, its Dirac (or Hamiltonian) form, and
//! the Hamiltonian family with primary constraints fed to the constraint
//! algorithm, together with samplers for points on each representation.

use nalgebra::DMatrix;
use rand::Rng;

use super::em::EMFieldSpec;
use super::metric::MetricSpec;
use super::two_particle::TwoParticleSpec;
use super::{Resolved, SystemError, SystemId, SystemParams};
use crate::bundles::{CotangentPoint, PhaseVelocity};
use crate::constraint_algo::{ConstraintSet, HamiltonianFamily};
use crate::dynamics::{DiracSystem, HamiltonianSystem, LagrangianSystem, MultiplierDomain};
use crate::genfun::{MorseFamily, NewtonOptions, Reduction, ReductionAnchor, ReductionSeed};
use crate::integrator::Gauge;
use crate::jetcalc::{dot, sum, Jet2, ScalarField};
use crate::legendre::{reduce_energy_family, slow_legendre};

/// A point of TT*Q lying on both the Lagrange and the Dirac form of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct OnShell {
    pub z: PhaseVelocity,
    /// Auxiliary Lagrangian variables (empty for a plain Lagrangian).
    pub lagrange_witness: Vec<f64>,
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DynamicsSystem {
    pub id: SystemId,
    pub params: Resolved,
    /// Metric of the space-time (or space) part of Q.
    pub metric: MetricSpec,
    pub em: Option<EMFieldSpec>,
    pub two_particle: Option<TwoParticleSpec>,
    pub lagrangian: LagrangianSystem,
    pub dirac: DiracSystem,
    pub family: HamiltonianFamily,
    pub primary: ConstraintSet,
    pub hamiltonian: Option<HamiltonianSystem>,
}

fn square_sum(v: &[Jet2]) -> Jet2 {
    sum(v.iter().map(|x| x * x))
}

fn minus(a: &[Jet2], b: &[Jet2]) -> Vec<Jet2> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn timelike(metric: &MetricSpec, v: &[f64]) -> bool {
    let g = metric.g(&vec![0.0; metric.dim()]);
    let n = v.len();
    (0..n).map(|i| (0..n).map(|j| g[(i, j)] * v[i] * v[j]).sum::<f64>()).sum::<f64>() > 0.0
}

fn timelike_inv(metric: &MetricSpec, p: &[f64]) -> bool {
    match metric.g_inv(&vec![0.0; metric.dim()]) {
        Ok(g) => {
            let n = p.len();
            (0..n).map(|i| (0..n).map(|j| g[(i, j)] * p[i] * p[j]).sum::<f64>()).sum::<f64>() > 0.0
        }
        Err(_) => false,
    }
}

/// L = σ m √g(q̇, q̇) + e A·q̇ on the time-like cone, σ = ±1.
pub fn relativistic_lagrangian(sign: f64, params: &Resolved) -> ScalarField {
    let em = EMFieldSpec::spacetime_b(params.b, params.charge, params.mass);
    let metric = MetricSpec::minkowski();
    let guard_metric = metric.clone();
    let m = params.mass;
    let name = if sign > 0.0 { "m‖q̇‖ + eA·q̇" } else { "−m‖q̇‖ + eA·q̇" };
    ScalarField::new(name, 8, move |x| {
        let (q, v) = x.split_at(4);
        metric.quad(q, v).sqrt() * (sign * m) + dot(&em.a_jets(q), v) * em.e
    })
    .with_guard("time-like velocity", move |x| timelike(&guard_metric, &x[4..]))
}

/// U = p·v − m√g(v, v) − eA·v + λ(g(v, v) − v₀²) over T*Q with fiber
/// (v₀, v, λ); v₀ > 0 is the multiplier of the mass-shell constraint.
pub fn hyperboloid_family(params: &Resolved) -> Result<MorseFamily, SystemError> {
    let em = EMFieldSpec::spacetime_b(params.b, params.charge, params.mass);
    let metric = MetricSpec::minkowski();
    let guard_metric = metric.clone();
    let m = params.mass;
    let u = ScalarField::new("p·v − m‖v‖ − eA·v + λ(g(v,v) − v₀²)", 14, move |x| {
        let (q, rest) = x.split_at(4);
        let p = &rest[..4];
        let v0 = &rest[4];
        let v = &rest[5..9];
        let lambda = &rest[9];
        let gvv = metric.quad(q, v);
        dot(p, v) - gvv.sqrt() * m - dot(&em.a_jets(q), v) * em.e + lambda * (gvv - v0 * v0)
    })
    .with_guard("time-like v", move |x| timelike(&guard_metric, &x[9..13]));
    Ok(MorseFamily::new(8, 6, u)?.with_fiber_domain("v₀ > 0", |y| y[0] > 0.0))
}

/// Builds one of the dynamical catalog systems.
pub fn build_dynamics(id: SystemId, params: &SystemParams) -> Result<DynamicsSystem, SystemError> {
    let r = params.resolve(id)?;
    match id {
        SystemId::Em3d => build_em3d(r),
        SystemId::Kaluza5d => build_kaluza(r),
        SystemId::Relativistic => build_relativistic(r),
        SystemId::Relativistic5d => build_relativistic5d(r),
        SystemId::Massless => build_massless(r),
        SystemId::TwoParticle => build_two_particle(r),
        _ => Err(SystemError::NoDynamics(id)),
    }
}

fn em_lagrangian_3d(em: &EMFieldSpec, offset: usize, dim: usize) -> impl Fn(&[Jet2]) -> Jet2 + Send + Sync + 'static {
    // m/2 |v|² + e A·v − eφ on the spatial block [offset, offset + 3)
    let em = em.clone();
    move |x: &[Jet2]| {
        let q = &x[offset..offset + 3];
        let v = &x[dim + offset..dim + offset + 3];
        square_sum(v) * (0.5 * em.m) + dot(&em.a_jets(q), v) * em.e - em.phi_jet(q) * em.e
    }
}

fn em_hamiltonian_3d(em: &EMFieldSpec, offset: usize, dim: usize) -> impl Fn(&[Jet2]) -> Jet2 + Send + Sync + 'static {
    // |p − eA|²/2m + eφ
    let em = em.clone();
    move |x: &[Jet2]| {
        let q = &x[offset..offset + 3];
        let p = &x[dim + offset..dim + offset + 3];
        let ea: Vec<Jet2> = em.a_jets(q).into_iter().map(|a| a * em.e).collect();
        square_sum(&minus(p, &ea)) / (2.0 * em.m) + em.phi_jet(q) * em.e
    }
}

fn build_em3d(r: Resolved) -> Result<DynamicsSystem, SystemError> {
    let em = EMFieldSpec::constant_b(r.b, r.charge, r.mass);
    let l = em.lagrangian();
    let h = ScalarField::new("|p − eA|²/2m + eφ", 6, em_hamiltonian_3d(&em, 0, 3));
    Ok(DynamicsSystem {
        id: SystemId::Em3d,
        params: r,
        metric: MetricSpec::euclidean(3),
        em: Some(em),
        two_particle: None,
        lagrangian: LagrangianSystem::plain(l)?,
        dirac: DiracSystem::unconstrained(h.clone())?,
        family: HamiltonianFamily::new(vec![h.clone()], vec![MultiplierDomain::Fixed(1.0)])?,
        primary: ConstraintSet::primary(Vec::new()),
        hamiltonian: Some(HamiltonianSystem::new(h)?),
    })
}

fn build_kaluza(r: Resolved) -> Result<DynamicsSystem, SystemError> {
    let em = EMFieldSpec::constant_b(r.b, r.charge, r.mass);
    let e = r.charge;
    let base = em_lagrangian_3d(&em, 1, 4);
    let l = ScalarField::new("m/2|q̇|² + eA·q̇ − eφ + e q̇₀", 8, move |x| base(x) + &x[4] * e);
    let hbar = ScalarField::new("|p − eA|²/2m + eφ", 8, em_hamiltonian_3d(&em, 1, 4));
    let phi = ScalarField::new("p₀ − e", 8, move |x| &x[4] - e);
    Ok(DynamicsSystem {
        id: SystemId::Kaluza5d,
        params: r,
        metric: MetricSpec::euclidean(3),
        em: Some(em),
        two_particle: None,
        lagrangian: LagrangianSystem::plain(l)?,
        dirac: DiracSystem::new(hbar.clone(), vec![phi.clone()], vec![MultiplierDomain::Free])?,
        family: HamiltonianFamily::new(vec![hbar, phi.clone()], vec![MultiplierDomain::Fixed(1.0), MultiplierDomain::Free])?,
        primary: ConstraintSet::primary(vec![phi]),
        hamiltonian: None,
    })
}

/// ‖p − eA‖ − m on the block [offset, offset + 4) of T*Q with dimension `dim`.
fn mass_shell(em: &EMFieldSpec, metric: &MetricSpec, offset: usize, dim: usize) -> ScalarField {
    let (em, metric) = (em.clone(), metric.clone());
    let guard = (em.clone(), metric.clone());
    ScalarField::new("‖p − eA‖ − m", 2 * dim, move |x| {
        let q = &x[offset..offset + 4];
        let p = &x[dim + offset..dim + offset + 4];
        let ea: Vec<Jet2> = em.a_jets(q).into_iter().map(|a| a * em.e).collect();
        metric.inv_quad(q, &minus(p, &ea)).sqrt() - em.m
    })
    .with_guard("time-like p − eA", move |x| {
        let (em, metric) = (&guard.0, &guard.1);
        let q = &x[offset..offset + 4];
        let pi: Vec<f64> = x[dim + offset..dim + offset + 4]
            .iter()
            .zip(em.a_at(q))
            .map(|(p, a)| p - em.e * a)
            .collect();
        timelike_inv(metric, &pi)
    })
}

fn build_relativistic(r: Resolved) -> Result<DynamicsSystem, SystemError> {
    let em = EMFieldSpec::spacetime_b(r.b, r.charge, r.mass);
    let metric = MetricSpec::minkowski();
    let phi = mass_shell(&em, &metric, 0, 4);
    Ok(DynamicsSystem {
        id: SystemId::Relativistic,
        params: r,
        lagrangian: LagrangianSystem::plain(relativistic_lagrangian(1.0, &r))?,
        dirac: DiracSystem::new(ScalarField::constant("0", 8, 0.0), vec![phi.clone()], vec![MultiplierDomain::Positive])?,
        family: HamiltonianFamily::new(vec![phi.clone()], vec![MultiplierDomain::Positive])?,
        primary: ConstraintSet::primary(vec![phi]),
        hamiltonian: None,
        metric,
        em: Some(em),
        two_particle: None,
    })
}

fn build_relativistic5d(r: Resolved) -> Result<DynamicsSystem, SystemError> {
    let em = EMFieldSpec::spacetime_b(r.b, r.charge, r.mass);
    let metric = MetricSpec::minkowski();
    let e = r.charge;
    let (lm, lem, m) = (metric.clone(), em.clone(), r.mass);
    let l = ScalarField::new("m‖q̇‖ + eA·q̇ + e q̇₀", 10, move |x| {
        let q = &x[1..5];
        let v = &x[6..10];
        lm.quad(q, v).sqrt() * m + dot(&lem.a_jets(q), v) * e + &x[5] * e
    })
    .with_guard("time-like velocity", {
        let gm = metric.clone();
        move |x| timelike(&gm, &x[6..10])
    });
    let phi1 = mass_shell(&em, &metric, 1, 5);
    let phi2 = ScalarField::new("p₀ − e", 10, move |x| &x[5] - e);
    let domains = vec![MultiplierDomain::Positive, MultiplierDomain::Free];
    Ok(DynamicsSystem {
        id: SystemId::Relativistic5d,
        params: r,
        lagrangian: LagrangianSystem::plain(l)?,
        dirac: DiracSystem::new(
            ScalarField::constant("0", 10, 0.0),
            vec![phi1.clone(), phi2.clone()],
            domains.clone(),
        )?,
        family: HamiltonianFamily::new(vec![phi1.clone(), phi2.clone()], domains)?,
        primary: ConstraintSet::primary(vec![phi1, phi2]),
        hamiltonian: None,
        metric,
        em: Some(em),
        two_particle: None,
    })
}

fn build_massless(r: Resolved) -> Result<DynamicsSystem, SystemError> {
    let metric = MetricSpec::minkowski();
    let lm = metric.clone();
    let l = ScalarField::new("g(q̇, q̇)/2y", 9, move |x| lm.quad(&x[..4], &x[4..8]) / (&x[8] * 2.0));
    let lfam = MorseFamily::new(8, 1, l)?.with_fiber_domain("y > 0", |y| y[0] > 0.0);
    let hm = metric.clone();
    let half = ScalarField::new("½g⁻¹(p, p)", 8, move |x| hm.inv_quad(&x[..4], &x[4..]) * 0.5);
    let cm = metric.clone();
    let null = ScalarField::new("g⁻¹(p, p)", 8, move |x| cm.inv_quad(&x[..4], &x[4..]));
    Ok(DynamicsSystem {
        id: SystemId::Massless,
        params: r,
        lagrangian: LagrangianSystem::family(lfam)?,
        dirac: DiracSystem::new(ScalarField::constant("0", 8, 0.0), vec![half.clone()], vec![MultiplierDomain::Positive])?,
        family: HamiltonianFamily::new(vec![half], vec![MultiplierDomain::Positive])?,
        primary: ConstraintSet::primary(vec![null]),
        hamiltonian: None,
        metric,
        em: None,
        two_particle: None,
    })
}

fn build_two_particle(r: Resolved) -> Result<DynamicsSystem, SystemError> {
    let spec = TwoParticleSpec {
        m1: r.m1,
        m2: r.m2,
        potential: r.potential,
    };
    Ok(DynamicsSystem {
        id: SystemId::TwoParticle,
        params: r,
        metric: MetricSpec::minkowski(),
        em: None,
        two_particle: Some(spec),
        lagrangian: spec.lagrangian_system()?,
        dirac: spec.dirac()?,
        family: spec.family()?,
        primary: spec.primary(),
        hamiltonian: None,
    })
}

fn block_metric(blocks: &[(usize, Option<&MetricSpec>)]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.0).sum();
    let mut g = DMatrix::zeros(n, n);
    let mut at = 0;
    for (len, m) in blocks {
        if let Some(m) = m {
            let gm = m.g(&vec![0.0; m.dim()]);
            g.view_mut((at, at), (*len, *len)).copy_from(&gm);
        }
        at += len;
    }
    g
}

fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if s > 0.1 && s <= 1.0 {
            return d.iter().map(|v| v / s).collect();
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Future time-like vector λ(1, u) with |u| < 0.6, upper indices.
fn timelike_velocity<R: Rng>(rng: &mut R) -> Vec<f64> {
    let lam = rng.gen_range(0.5..1.5);
    let u: Vec<f64> = unit_vector(rng, 3).iter().map(|d| d * rng.gen_range(0.0..0.6)).collect();
    std::iter::once(lam).chain(u.iter().map(|c| lam * c)).collect()
}

impl DynamicsSystem {
    pub fn dim(&self) -> usize {
        self.dirac.dim()
    }

    fn mass_shell_momentum<R: Rng>(&self, rng: &mut R, q: &[f64]) -> Vec<f64> {
        // π = (√(m² + |s|²), s), p = π + eA(q)
        let em = self.em.as_ref().expect("mass shell needs a potential");
        let s = uniform(rng, 3, -1.0, 1.0);
        let m = self.params.mass;
        let pi0 = (m * m + s.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let a = em.a_at(q);
        std::iter::once(pi0).chain(s).zip(a).map(|(p, a)| p + em.e * a).collect()
    }

    /// A point of the primary constraint set C.
    pub fn sample_on_c<R: Rng>(&self, rng: &mut R) -> CotangentPoint {
        let e = self.params.charge;
        match self.id {
            SystemId::Em3d => CotangentPoint::new(uniform(rng, 3, -1.0, 1.0), uniform(rng, 3, -1.0, 1.0)),
            SystemId::Kaluza5d => {
                let q = uniform(rng, 4, -1.0, 1.0);
                let p = std::iter::once(e).chain(uniform(rng, 3, -1.0, 1.0)).collect();
                CotangentPoint::new(q, p)
            }
            SystemId::Relativistic => {
                let q = uniform(rng, 4, -1.0, 1.0);
                let p = self.mass_shell_momentum(rng, &q);
                CotangentPoint::new(q, p)
            }
            SystemId::Relativistic5d => {
                let q = uniform(rng, 5, -1.0, 1.0);
                let p = std::iter::once(e).chain(self.mass_shell_momentum(rng, &q[1..])).collect();
                CotangentPoint::new(q, p)
            }
            SystemId::Massless => {
                let q = uniform(rng, 4, -1.0, 1.0);
                let s: Vec<f64> = unit_vector(rng, 3).iter().map(|d| d * rng.gen_range(0.2..1.5)).collect();
                let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
                CotangentPoint::new(q, std::iter::once(n).chain(s).collect())
            }
            SystemId::TwoParticle => return self.two_particle.expect("two-particle spec").sample_on_c(rng),
            _ => unreachable!("statics systems are never built as dynamics"),
        }
        .expect("block lengths agree")
    }

    /// A point near C, for seeding projections.
    pub fn sample_seed<R: Rng>(&self, rng: &mut R, noise: f64) -> CotangentPoint {
        let x = self.sample_on_c(rng);
        let c: Vec<f64> = x.coords().iter().map(|v| v + noise * rng.gen_range(-1.0..1.0)).collect();
        CotangentPoint::from_coords(&c)
    }

    /// Multipliers drawn from each domain.
    pub fn sample_multipliers<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.dirac
            .multiplier_domain
            .iter()
            .map(|d| match d {
                MultiplierDomain::Free => rng.gen_range(-1.0..1.0),
                MultiplierDomain::Positive => rng.gen_range(0.5..1.5),
                MultiplierDomain::Negative => -rng.gen_range(0.5..1.5),
                MultiplierDomain::Fixed(c) => *c,
            })
            .collect()
    }

    /// A tangent point (q, q̇, y) in the domain of the Lagrangian and on the
    /// critical set of its auxiliary variables.
    pub fn sample_tangent<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        match self.id {
            SystemId::Em3d => (uniform(rng, 3, -1.0, 1.0), uniform(rng, 3, -1.0, 1.0), vec![]),
            SystemId::Kaluza5d => (uniform(rng, 4, -1.0, 1.0), uniform(rng, 4, -1.0, 1.0), vec![]),
            SystemId::Relativistic => (uniform(rng, 4, -1.0, 1.0), timelike_velocity(rng), vec![]),
            SystemId::Relativistic5d => {
                let v = std::iter::once(rng.gen_range(-1.0..1.0)).chain(timelike_velocity(rng)).collect();
                (uniform(rng, 5, -1.0, 1.0), v, vec![])
            }
            SystemId::Massless => {
                let lam = rng.gen_range(0.5..1.5);
                let v = std::iter::once(lam).chain(unit_vector(rng, 3).iter().map(|d| lam * d)).collect();
                (uniform(rng, 4, -1.0, 1.0), v, vec![rng.gen_range(0.5..1.5)])
            }
            SystemId::TwoParticle => {
                let x = self.sample_on_c(rng).coords();
                let v = [timelike_velocity(rng), timelike_velocity(rng)].concat();
                (x[..8].to_vec(), v, vec![])
            }
            _ => unreachable!("statics systems are never built as dynamics"),
        }
    }

    /// The multipliers under which the Lagrange and Dirac forms agree at a
    /// tangent point: ‖q̇‖ for mass shells, q̇₀ for the charge constraint,
    /// and y for the massless particle.
    pub fn multipliers_for(&self, _q: &[f64], qdot: &[f64], y: &[f64]) -> Vec<f64> {
        let g = self.metric.g(&vec![0.0; self.metric.dim()]);
        let norm = |v: &[f64]| {
            (0..v.len()).map(|i| (0..v.len()).map(|j| g[(i, j)] * v[i] * v[j]).sum::<f64>()).sum::<f64>().sqrt()
        };
        match self.id {
            SystemId::Em3d => vec![],
            SystemId::Kaluza5d => vec![qdot[0]],
            SystemId::Relativistic => vec![norm(qdot)],
            SystemId::Relativistic5d => vec![norm(&qdot[1..]), qdot[0]],
            SystemId::Massless => vec![y[0]],
            SystemId::TwoParticle => vec![norm(&qdot[..4]), norm(&qdot[4..])],
            _ => unreachable!("statics systems are never built as dynamics"),
        }
    }

    /// (q, ∂L/∂q̇, q̇, ∂L/∂q) at a tangent point.
    pub fn lagrange_point(&self, q: &[f64], qdot: &[f64], y: &[f64]) -> Result<PhaseVelocity, SystemError> {
        let m = self.dim();
        let j = self.lagrangian.field().gradient(&[q, qdot, y].concat())?;
        let g = j.gradient();
        Ok(PhaseVelocity {
            q: q.to_vec(),
            p: g[m..2 * m].to_vec(),
            qdot: qdot.to_vec(),
            pdot: g[..m].to_vec(),
        })
    }

    /// (x, q̇, ṗ) with (q̇, ṗ) given by the Dirac field at multipliers v.
    pub fn dirac_point(&self, x: &CotangentPoint, v: &[f64]) -> Result<PhaseVelocity, SystemError> {
        let (qdot, pdot) = self.dirac.field(x, v)?;
        Ok(PhaseVelocity {
            q: x.q.clone(),
            p: x.p.clone(),
            qdot,
            pdot,
        })
    }

    /// Auxiliary Lagrangian variables matching Dirac multipliers.
    pub fn lagrange_witness_for(&self, v: &[f64]) -> Vec<f64> {
        match self.id {
            SystemId::Massless => vec![v[0]],
            _ => vec![],
        }
    }

    /// An on-shell point built from a sampled tangent point.
    pub fn on_shell_from_lagrangian<R: Rng>(&self, rng: &mut R) -> Result<OnShell, SystemError> {
        let (q, qdot, y) = self.sample_tangent(rng);
        Ok(OnShell {
            z: self.lagrange_point(&q, &qdot, &y)?,
            multipliers: self.multipliers_for(&q, &qdot, &y),
            lagrange_witness: y,
        })
    }

    /// An on-shell point built from a sampled point of C and multipliers.
    pub fn on_shell_from_dirac<R: Rng>(&self, rng: &mut R) -> Result<OnShell, SystemError> {
        let x = self.sample_on_c(rng);
        let v = self.sample_multipliers(rng);
        Ok(OnShell {
            z: self.dirac_point(&x, &v)?,
            lagrange_witness: self.lagrange_witness_for(&v),
            multipliers: v,
        })
    }

    /// Scalar fields on T*Q used by the system: Hamiltonians and constraints.
    pub fn phase_fields(&self) -> Vec<ScalarField> {
        let mut out = vec![self.dirac.base_h.clone()];
        out.extend(self.dirac.constraints.iter().cloned());
        out.extend(self.primary.fields());
        out.extend(self.family.generators.iter().cloned());
        out
    }

    /// Initial state for integration.
    pub fn default_start(&self) -> CotangentPoint {
        let r = &self.params;
        let (q, p) = match self.id {
            SystemId::Em3d => (vec![0.0; 3], vec![r.mass, 0.0, 0.0]),
            SystemId::Kaluza5d => (vec![0.0; 4], vec![r.charge, r.mass, 0.0, 0.0]),
            SystemId::Relativistic => (vec![0.0; 4], vec![r.mass, 0.0, 0.0, 0.0]),
            SystemId::Relativistic5d => (vec![0.0; 5], vec![r.charge, r.mass, 0.0, 0.0, 0.0]),
            SystemId::Massless => (vec![0.0; 4], vec![1.0, 1.0, 0.0, 0.0]),
            SystemId::TwoParticle => {
                let spec = self.two_particle.expect("two-particle spec");
                let q: Vec<f64> = vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
                let m1 = spec.dressed_mass_at(0, &q[..4], &q[4..]);
                let m2 = spec.dressed_mass_at(1, &q[..4], &q[4..]);
                (q, vec![m1, 0.0, 0.0, 0.0, m2, 0.0, 0.0, 0.0])
            }
            _ => unreachable!("statics systems are never built as dynamics"),
        };
        CotangentPoint::new(q, p).expect("block lengths agree")
    }

    /// Metric on Q used by the proper-time gauge.
    pub fn gauge_metric(&self) -> DMatrix<f64> {
        let mk = MetricSpec::minkowski();
        match self.id {
            SystemId::Em3d => DMatrix::identity(3, 3),
            SystemId::Kaluza5d => block_metric(&[(1, None), (3, Some(&MetricSpec::euclidean(3)))]),
            SystemId::Relativistic | SystemId::Massless => block_metric(&[(4, Some(&mk))]),
            SystemId::Relativistic5d => block_metric(&[(1, None), (4, Some(&mk))]),
            SystemId::TwoParticle => block_metric(&[(4, Some(&mk)), (4, Some(&mk))]),
            _ => unreachable!("statics systems are never built as dynamics"),
        }
    }

    pub fn gauge_names(&self) -> Vec<&'static str> {
        let mut names = vec!["unit", "proper-time"];
        if self.id == SystemId::TwoParticle {
            names.push("synchronized");
        }
        names
    }

    pub fn default_gauge_name(&self) -> &'static str {
        match self.id {
            SystemId::Relativistic | SystemId::Relativistic5d => "proper-time",
            SystemId::TwoParticle => "synchronized",
            _ => "unit",
        }
    }

    /// Gauge by name: "unit" (all multipliers 1, fixed ones at their
    /// value), "proper-time", or "synchronized" for the two-particle system.
    pub fn gauge(&self, name: &str) -> Result<Gauge, SystemError> {
        match name {
            "unit" => {
                let v: Vec<f64> = self
                    .dirac
                    .multiplier_domain
                    .iter()
                    .map(|d| match d {
                        MultiplierDomain::Fixed(c) => *c,
                        MultiplierDomain::Negative => -1.0,
                        _ => 1.0,
                    })
                    .collect();
                Ok(Gauge::constant("unit", v))
            }
            "proper-time" => {
                let g = self.gauge_metric();
                Ok(Gauge::proper_time(&self.dirac, move |_| g.clone()))
            }
            "synchronized" if self.id == SystemId::TwoParticle => {
                Ok(self.two_particle.expect("two-particle spec").synchronized_gauge())
            }
            other => Err(SystemError::Param(format!(
                "gauge {other:?} is not available for {}; choose one of {:?}",
                self.id,
                self.gauge_names()
            ))),
        }
    }

    /// Slow Legendre transformation followed by elimination of the spatial
    /// velocities, for the systems quadratic in them (em-3d, kaluza-5d).
    pub fn reduced_energy_family(&self) -> Result<Reduction, SystemError> {
        let ef = slow_legendre(&self.lagrangian);
        let (eliminate, kept): (Vec<usize>, Vec<f64>) = match self.id {
            SystemId::Em3d => ((0..3).collect(), vec![]),
            SystemId::Kaluza5d => ((1..4).collect(), vec![1.0]),
            other => {
                return Err(SystemError::Param(format!(
                    "{other} has no velocity block on which the energy is quadratic"
                )))
            }
        };
        let start = self.default_start();
        let anchor = ReductionAnchor {
            q: start.coords(),
            kept,
            seed: ReductionSeed::Fixed(vec![0.0; eliminate.len()]),
        };
        Ok(reduce_energy_family(&ef, &eliminate, &anchor, &NewtonOptions::default())?)
    }
}
