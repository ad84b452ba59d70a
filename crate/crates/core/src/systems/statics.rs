//! Statics examples on the Euclidean plane: an elastically suspended point,
//! a bead on a circle, and a point tied elastically to a bead on a circle.

use serde::{Deserialize, Serialize};

use super::{Resolved, SystemError, SystemId};
use crate::genfun::{constrained_residual, generated_covector, ConstrainedGenerator, MorseFamily};
use crate::jetcalc::{Jet2, ScalarField};
use crate::linalg;

/// U(x, y) = k/2 (x² + y²).
pub fn elastic_point_energy(k: f64) -> ScalarField {
    ScalarField::new("k/2 (x² + y²)", 2, move |q| (&q[0] * &q[0] + &q[1] * &q[1]) * (0.5 * k))
}

/// Ū = ky restricted by ½(x² + y² − a²) = 0.
pub fn bead_circle_generator(k: f64, a: f64) -> ConstrainedGenerator {
    ConstrainedGenerator {
        energy: ScalarField::new("k y", 2, move |q| &q[1] * k),
        constraints: vec![ScalarField::new("(x² + y² − a²)/2", 2, move |q| {
            (&q[0] * &q[0] + &q[1] * &q[1] - a * a) * 0.5
        })],
    }
}

/// U(x, y; θ) = k/2 ((x − a cos θ)² + (y − a sin θ)²).
pub fn elastic_circle_family(k: f64, a: f64) -> MorseFamily {
    let u = ScalarField::new("k/2 |q − a(cos θ, sin θ)|²", 3, move |x| {
        let dx = &x[0] - &(x[2].cos() * a);
        let dy = &x[1] - &(x[2].sin() * a);
        (&dx * &dx + &dy * &dy) * (0.5 * k)
    });
    MorseFamily::new(2, 1, u).expect("arity 3 = 2 + 1")
}

/// (ρ, θ) ↦ (x, y, f, g) parametrizing the elastic-circle constitutive set.
pub fn elastic_circle_map(k: f64, a: f64, rho: &Jet2, theta: &Jet2) -> [Jet2; 4] {
    let (c, s) = (theta.cos(), theta.sin());
    let stretch = (rho - a) * k;
    [rho * &c, rho * &s, &stretch * &c, &stretch * &s]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StaticsInput {
    Point { x: f64, y: f64 },
    /// A point (a cos θ, a sin θ) of the circle with multiplier λ.
    Circle { theta: f64, lambda: f64 },
    Polar { rho: f64, theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticsOutcome {
    pub system: SystemId,
    pub q: Vec<f64>,
    pub force: Vec<f64>,
    pub witness: Vec<f64>,
    /// max |·| of the example's defining equations at the generated point.
    pub residual: f64,
    /// max |ω_Q| over tangent pairs of the generated set.
    pub isotropy: f64,
}

pub fn statics_constitutive(
    id: SystemId,
    params: &Resolved,
    input: StaticsInput,
) -> Result<StaticsOutcome, SystemError> {
    let (k, a) = (params.k, params.a);
    match (id, input) {
        (SystemId::ElasticPoint, StaticsInput::Point { x, y }) => {
            let fam = MorseFamily::trivial(elastic_point_energy(k));
            let g = generated_covector(&fam, &[x, y], &[], 1e-12)?;
            let residual = (g.p[0] - k * x).abs().max((g.p[1] - k * y).abs());
            Ok(StaticsOutcome {
                system: id,
                isotropy: crate::genfun::isotropy_defect(&fam, &g.q, &[])?,
                q: g.q,
                force: g.p,
                witness: Vec::new(),
                residual,
            })
        }
        (SystemId::BeadCircle, StaticsInput::Circle { theta, lambda }) => {
            let gen = bead_circle_generator(k, a);
            let fam = gen.as_morse_family();
            let q = [a * theta.cos(), a * theta.sin()];
            let g = generated_covector(&fam, &q, &[lambda], 1e-12)?;
            let lin = constrained_residual(&gen, &q, &g.p, &[lambda])?;
            // virtual work along the circle: −f a sin θ + g a cos θ − k a cos θ
            let vw = -g.p[0] * a * theta.sin() + g.p[1] * a * theta.cos() - k * a * theta.cos();
            Ok(StaticsOutcome {
                system: id,
                isotropy: crate::genfun::isotropy_defect(&fam, &q, &[lambda])?,
                q: q.to_vec(),
                force: g.p,
                witness: vec![lambda],
                residual: linalg::max_abs(&lin).max(vw.abs()),
            })
        }
        (SystemId::ElasticCircle, StaticsInput::Polar { rho, theta }) => {
            let fam = elastic_circle_family(k, a);
            let q = [rho * theta.cos(), rho * theta.sin()];
            let g = generated_covector(&fam, &q, &[theta], 1e-10)?;
            let m = elastic_circle_map(k, a, &Jet2::constant(rho), &Jet2::constant(theta));
            let residual = (g.p[0] - m[2].value()).abs().max((g.p[1] - m[3].value()).abs());
            Ok(StaticsOutcome {
                system: id,
                isotropy: crate::genfun::isotropy_defect(&fam, &q, &[theta])?,
                q: q.to_vec(),
                force: g.p,
                witness: vec![theta],
                residual,
            })
        }
        (id, _) if !id.is_statics() => Err(SystemError::NoStatics(id)),
        (id, input) => Err(SystemError::Param(format!("input {input:?} does not fit {id}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSample {
    pub rho: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Ratio of the smallest to the largest singular value.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankProfile {
    pub theta: f64,
    /// Singular values below threshold·σ_max count as zero.
    pub threshold: f64,
    pub samples: Vec<RankSample>,
}

/// Rank of ∂(x, y)/∂(ρ, θ) along a ρ-grid at fixed θ.
pub fn singularity_scan(params: &Resolved, rhos: &[f64], theta: f64) -> RankProfile {
    let (k, a) = (params.k, params.a);
    let threshold = linalg::RANK_RTOL;
    let samples = rhos
        .iter()
        .map(|&rho| {
            let v = Jet2::seed(&[rho, theta], false);
            let m = elastic_circle_map(k, a, &v[0], &v[1]);
            let jac = nalgebra::DMatrix::from_fn(2, 2, |i, j| m[j].gradient()[i]);
            let sv = linalg::singular_values(&jac);
            let smax = sv.iter().copied().fold(0.0, f64::max);
            let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
            RankSample {
                rho,
                rank: linalg::rank_with(&sv, threshold),
                gap: if smax > 0.0 { smin / smax } else { 0.0 },
                singular_values: sv,
            }
        })
        .collect();
    RankProfile {
        theta,
        threshold,
        samples,
    }
}
