//! Cross-module invariant suite: canonical maps, bracket algebra, jets,
//! isotropy of generated sets and agreement of the Lagrange and Dirac forms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bundles::{
    alpha, alpha_pushforward, beta, beta_pushforward, bracket_from_gradients, dt_theta, it_omega, kappa,
    poisson_bracket, theta_tq, theta_tstarq, BundleError, IteratedTangent, PhaseVelocity,
};
use crate::constraint_algo::bracket_field;
use crate::dynamics::{dirac_residual, lagrange_residual, lagrangian_check, DynamicsError, FlippedForce, ImplicitDynamics};
use crate::jetcalc::{fd_jet_default, JetError, Polynomial, ScalarField};
use crate::systems::{
    build_dynamics, first_order_equations, hyperboloid_family, statics_constitutive, DynamicsSystem, StaticsInput,
    SystemError, SystemId, SystemParams,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tol: f64,
    pub samples: usize,
    pub passed: bool,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, measured: f64, tol: f64, samples: usize) -> Self {
        CheckResult {
            name: name.into(),
            measured,
            tol,
            samples,
            passed: measured <= tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Points per check.
    pub samples: usize,
    /// Replace the em-3d dynamics by its force-flipped counterfeit in the
    /// isotropy check.
    pub inject_sign_flip: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            samples: 20,
            inject_sign_flip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub failed: Vec<String>,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// κ∘κ = id and the pullbacks α*θ_TQ = d_Tθ_Q, β*θ_T*Q = i_Tω_Q at random points.
pub fn canonical_map_checks(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<CheckResult> {
    let (mut inv, mut a_def, mut b_def) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let w = IteratedTangent {
            q: uniform(rng, dim),
            qdot: uniform(rng, dim),
            qprime: uniform(rng, dim),
            qdotprime: uniform(rng, dim),
        };
        if kappa(&kappa(&w)) != w {
            inv = f64::INFINITY;
        }
        let z = PhaseVelocity::from_coords(&uniform(rng, 4 * dim));
        let d = uniform(rng, 4 * dim);
        a_def = a_def.max((theta_tq(&alpha(&z), &alpha_pushforward(&d)) - dt_theta(&z, &d)).abs());
        b_def = b_def.max((theta_tstarq(&beta(&z), &beta_pushforward(&d)) - it_omega(&z, &d)).abs());
    }
    vec![
        CheckResult::new("kappa-involution", inv, 0.0, n),
        CheckResult::new("alpha-pullback", a_def, 1e-12, n),
        CheckResult::new("beta-pullback", b_def, 1e-12, n),
    ]
}

fn product(f: &ScalarField, g: &ScalarField) -> ScalarField {
    let (f, g) = (f.clone(), g.clone());
    ScalarField::new(format!("({})({})", f.name(), g.name()), f.arity(), move |x| {
        f.compose_jets(x) * g.compose_jets(x)
    })
}

fn fd_bracket(f: &ScalarField, g: &ScalarField, x: &[f64]) -> Result<f64, JetError> {
    let df = fd_jet_default(f, x)?;
    let dg = fd_jet_default(g, x)?;
    Ok(bracket_from_gradients(df.gradient(), dg.gradient()))
}

/// Distinct non-constant fields on T*Q of a system.
fn bracket_fields(sys: &DynamicsSystem) -> Vec<ScalarField> {
    let mut fields: Vec<ScalarField> = Vec::new();
    for f in sys.phase_fields() {
        if f.name() != "0" && !fields.iter().any(|g| g.name() == f.name()) {
            fields.push(f);
        }
    }
    fields
}

/// Antisymmetry, Jacobi, Leibniz and the finite-difference oracle over the
/// catalog fields at points near the primary constraint sets.
pub fn bracket_checks(
    systems: &[DynamicsSystem],
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<Vec<CheckResult>, VerifyError> {
    let (mut anti, mut jacobi, mut leibniz, mut oracle) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for s in systems {
        let fields = bracket_fields(s);
        for i in 0..n.div_ceil(systems.len()) {
            let x = s.sample_seed(rng, 0.05);
            let c = x.coords();
            let g = Polynomial::random(rng, 2 * s.dim(), 3, 6).to_field("random cubic");
            let h = Polynomial::random(rng, 2 * s.dim(), 2, 6).to_field("random quadratic");
            let (f, g, h) = (&fields[i % fields.len()], &g, &h);
            let fg = poisson_bracket(f, g, &x)?;
            anti = anti.max((fg + poisson_bracket(g, f, &x)?).abs());
            let j = poisson_bracket(f, &bracket_field(g, h), &x)?
                + poisson_bracket(g, &bracket_field(h, f), &x)?
                + poisson_bracket(h, &bracket_field(f, g), &x)?;
            jacobi = jacobi.max(j.abs());
            let gv = g.value(&c)?;
            let hv = h.value(&c)?;
            let l = poisson_bracket(f, &product(g, h), &x)? - fg * hv - gv * poisson_bracket(f, h, &x)?;
            leibniz = leibniz.max(l.abs());
            oracle = oracle.max((fg - fd_bracket(f, g, &c)?).abs());
            count += 1;
        }
    }
    Ok(vec![
        CheckResult::new("bracket-antisymmetry", anti, 0.0, count),
        CheckResult::new("bracket-jacobi", jacobi, 1e-8, count),
        CheckResult::new("bracket-leibniz", leibniz, 1e-10, count),
        CheckResult::new("bracket-fd-oracle", oracle, 1e-6, count),
    ])
}

/// A catalog scalar field with a sampler of points in its domain.
pub struct SampledField {
    pub field: ScalarField,
    pub sample: Box<dyn Fn(&mut ChaCha8Rng) -> Vec<f64>>,
}

/// Every scalar field of the catalog with a point sampler.
pub fn catalog_fields(systems: &[DynamicsSystem]) -> Result<Vec<SampledField>, VerifyError> {
    let mut out: Vec<SampledField> = Vec::new();
    for s in systems {
        for f in s.phase_fields() {
            let s2 = s.clone();
            out.push(SampledField {
                field: f,
                sample: Box::new(move |rng| s2.sample_seed(rng, 0.05).coords()),
            });
        }
        let s2 = s.clone();
        out.push(SampledField {
            field: s.lagrangian.field().clone(),
            sample: Box::new(move |rng| {
                let (q, v, y) = s2.sample_tangent(rng);
                [q, v, y].concat()
            }),
        });
        let energy = crate::legendre::slow_legendre(&s.lagrangian);
        let s2 = s.clone();
        out.push(SampledField {
            field: energy.family.generator().clone(),
            sample: Box::new(move |rng| {
                let (q, v, y) = s2.sample_tangent(rng);
                let p = s2.lagrange_point(&q, &v, &y).map(|z| z.p).unwrap_or_else(|_| vec![0.0; v.len()]);
                [q, p, y, v].concat()
            }),
        });
        if let Some(spec) = s.two_particle {
            for f in first_order_equations(&spec) {
                let s2 = s.clone();
                out.push(SampledField {
                    field: f,
                    sample: Box::new(move |rng| {
                        let x = s2.sample_on_c(rng).coords();
                        let (_, v, _) = s2.sample_tangent(rng);
                        let pd: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        [x, v, pd].concat()
                    }),
                });
            }
        }
    }
    let params = SystemParams::default().resolve(SystemId::Relativistic)?;
    out.push(SampledField {
        field: hyperboloid_family(&params)?.generator().clone(),
        sample: Box::new(|rng| {
            let q = uniform(rng, 8);
            let v0 = rng.gen_range(0.5..1.5);
            let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let v: Vec<f64> = std::iter::once(1.0).chain(u).collect();
            [q, vec![v0], v, vec![rng.gen_range(-1.0..1.0)]].concat()
        }),
    });
    let statics = SystemParams::default().resolve(SystemId::ElasticCircle)?;
    for f in [
        crate::systems::elastic_point_energy(statics.k),
        crate::systems::bead_circle_generator(statics.k, statics.a).as_morse_family().generator().clone(),
        crate::systems::elastic_circle_family(statics.k, statics.a).generator().clone(),
    ] {
        let n = f.arity();
        out.push(SampledField {
            field: f,
            sample: Box::new(move |rng| uniform(rng, n)),
        });
    }
    Ok(out)
}

/// Jet derivatives against central differences, relative to 1 + |value|.
pub fn jet_checks(fields: &[SampledField], rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<CheckResult>, VerifyError> {
    let (mut grad, mut hess) = (0.0f64, 0.0f64);
    let mut count = 0;
    for i in 0..n {
        let sf = &fields[i % fields.len()];
        let x = (sf.sample)(rng);
        if !sf.field.admits(&x) {
            continue;
        }
        let j = sf.field.jet(&x)?;
        let d = fd_jet_default(&sf.field, &x)?;
        for (a, b) in j.gradient().iter().zip(d.gradient()) {
            grad = grad.max((a - b).abs() / (1.0 + a.abs()));
        }
        for r in 0..x.len() {
            for c in 0..x.len() {
                let (a, b) = (j.hessian(r, c), d.hessian(r, c));
                hess = hess.max((a - b).abs() / (1.0 + a.abs()));
            }
        }
        count += 1;
    }
    Ok(vec![
        CheckResult::new("jet-gradient-vs-fd", grad, 1e-6, count),
        CheckResult::new("jet-hessian-vs-fd", hess, 1e-4, count),
    ])
}

/// A point of the force-flipped dynamics: ṗ = −∂L/∂q.
fn flipped_point(s: &DynamicsSystem, rng: &mut ChaCha8Rng) -> Result<(PhaseVelocity, Vec<f64>), VerifyError> {
    let (q, v, y) = s.sample_tangent(rng);
    let mut z = s.lagrange_point(&q, &v, &y)?;
    z.pdot.iter_mut().for_each(|x| *x = -*x);
    Ok((z, y))
}

/// d_Tω_Q on tangent pairs of every catalog dynamics and ω_Q on the statics
/// constitutive sets.
pub fn isotropy_checks(
    systems: &[DynamicsSystem],
    rng: &mut ChaCha8Rng,
    n: usize,
    inject_sign_flip: bool,
) -> Result<Vec<CheckResult>, VerifyError> {
    let mut out = Vec::new();
    for s in systems {
        let mut worst = 0.0f64;
        for _ in 0..n {
            let flip = inject_sign_flip && s.id == SystemId::Em3d;
            let (dynamics, z, w): (Box<dyn ImplicitDynamics>, PhaseVelocity, Vec<f64>) = if flip {
                let (z, y) = flipped_point(s, rng)?;
                (Box::new(FlippedForce(s.lagrangian.clone())), z, y)
            } else {
                let pt = s.on_shell_from_lagrangian(rng)?;
                (Box::new(s.lagrangian.clone()), pt.z, pt.lagrange_witness)
            };
            worst = worst.max(lagrangian_check(dynamics.as_ref(), &z, &w, 1e-8)?);
            let pt = s.on_shell_from_dirac(rng)?;
            worst = worst.max(lagrangian_check(&s.dirac, &pt.z, &pt.multipliers, 1e-8)?);
        }
        let name = if inject_sign_flip && s.id == SystemId::Em3d {
            format!("isotropy[{}, injected sign flip]", s.id)
        } else {
            format!("isotropy[{}]", s.id)
        };
        out.push(CheckResult::new(name, worst, 1e-6, 2 * n));
    }
    let mut worst = 0.0f64;
    for id in [SystemId::ElasticPoint, SystemId::BeadCircle, SystemId::ElasticCircle] {
        let params = SystemParams::default().resolve(id)?;
        for _ in 0..n {
            let input = match id {
                SystemId::ElasticPoint => StaticsInput::Point {
                    x: rng.gen_range(-2.0..2.0),
                    y: rng.gen_range(-2.0..2.0),
                },
                SystemId::BeadCircle => StaticsInput::Circle {
                    theta: rng.gen_range(-3.0..3.0),
                    lambda: rng.gen_range(-2.0..2.0),
                },
                _ => StaticsInput::Polar {
                    rho: rng.gen_range(0.2..2.0),
                    theta: rng.gen_range(-3.0..3.0),
                },
            };
            worst = worst.max(statics_constitutive(id, &params, input)?.isotropy);
        }
    }
    out.push(CheckResult::new("isotropy[statics]", worst, 1e-6, 3 * n));
    Ok(out)
}

/// Residuals of each form at points built from the other.
pub fn consistency_checks(
    systems: &[DynamicsSystem],
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<Vec<CheckResult>, VerifyError> {
    let mut out = Vec::new();
    for s in systems {
        let mut worst = 0.0f64;
        for _ in 0..n {
            for pt in [s.on_shell_from_lagrangian(rng)?, s.on_shell_from_dirac(rng)?] {
                worst = worst.max(lagrange_residual(&s.lagrangian, &pt.z, &pt.lagrange_witness)?.max_abs());
                worst = worst.max(dirac_residual(&s.dirac, &pt.z, &pt.multipliers)?.max_abs());
            }
        }
        out.push(CheckResult::new(format!("lagrange-dirac-agreement[{}]", s.id), worst, 1e-8, 2 * n));
    }
    Ok(out)
}

pub fn catalog_systems() -> Result<Vec<DynamicsSystem>, VerifyError> {
    Ok(SystemId::DYNAMICS
        .iter()
        .map(|&id| build_dynamics(id, &SystemParams::default()))
        .collect::<Result<_, _>>()?)
}

/// Runs every check of the suite.
pub fn run_suite(opts: &VerifyOptions) -> Result<VerifyReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let systems = catalog_systems()?;
    let n = opts.samples.max(1);
    let mut checks = canonical_map_checks(&mut rng, n, 3);
    checks.extend(bracket_checks(&systems, &mut rng, n)?);
    let fields = catalog_fields(&systems)?;
    checks.extend(jet_checks(&fields, &mut rng, n.max(fields.len()))?);
    checks.extend(isotropy_checks(&systems, &mut rng, n.min(20), opts.inject_sign_flip)?);
    checks.extend(consistency_checks(&systems, &mut rng, n)?);
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    Ok(VerifyReport {
        passed: failed.is_empty(),
        failed,
        checks,
    })
}
