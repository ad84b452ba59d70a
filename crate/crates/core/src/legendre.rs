//! Fast and slow Legendre transformations.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::bundles::{CotangentPoint, PhaseVelocity, TangentPoint};
use crate::dynamics::{DiracSystem, DynamicsError, HamiltonianFamilySystem, LagrangianSystem, MultiplierDomain};
use crate::genfun::{reduce_family, GenError, MorseFamily, NewtonOptions, Reduction, ReductionAnchor};
use crate::jetcalc::{dot, Jet2, JetError, LocalJet, ScalarField};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LegendreError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("Legendre map not inverted: residual {residual:e} after {iterations} iterations")]
    NoInverse { iterations: usize, residual: f64 },
    #[error("point is off the graph of the Legendre map: |p − ∂L/∂q̇| = {0:e}")]
    OffGraph(f64),
    #[error("family is not linear in its fiber: |∂²U/∂y²| = {0:e}")]
    NotLinear(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

fn plain_dim(l: &ScalarField) -> Result<usize, LegendreError> {
    if l.arity() % 2 != 0 {
        return Err(LegendreError::Dimension {
            expected: l.arity() + 1,
            got: l.arity(),
        });
    }
    Ok(l.arity() / 2)
}

/// (q, q̇) ↦ (q, ∂L/∂q̇).
pub fn legendre_map(l: &ScalarField, x: &TangentPoint) -> Result<CotangentPoint, LegendreError> {
    let m = plain_dim(l)?;
    if x.dim() != m {
        return Err(LegendreError::Dimension {
            expected: m,
            got: x.dim(),
        });
    }
    let j = l.gradient(&x.coords())?;
    Ok(CotangentPoint {
        q: x.q.clone(),
        p: j.gradient()[m..].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperregularVerdict {
    /// True when every sampled |det ∂²L/∂q̇∂q̇| exceeds the threshold.
    pub regular_at_samples: bool,
    pub samples: usize,
    pub threshold: f64,
    pub min_abs_det: f64,
    pub max_abs_det: f64,
    pub dets: Vec<f64>,
}

/// det ∂²L/∂q̇∂q̇ at each sample.
pub fn hyperregular_probe(
    l: &ScalarField,
    samples: &[TangentPoint],
    threshold: f64,
) -> Result<HyperregularVerdict, LegendreError> {
    let m = plain_dim(l)?;
    let vel: Vec<usize> = (m..2 * m).collect();
    let mut dets = Vec::with_capacity(samples.len());
    for s in samples {
        let j = l.jet_wrt(&s.coords(), &vel, true)?;
        dets.push(j.hessian_matrix().determinant());
    }
    let abs = dets.iter().map(|d| d.abs());
    let min_abs_det = abs.clone().fold(f64::INFINITY, f64::min);
    let max_abs_det = abs.fold(0.0, f64::max);
    Ok(HyperregularVerdict {
        regular_at_samples: !dets.is_empty() && min_abs_det > threshold,
        samples: dets.len(),
        threshold,
        min_abs_det,
        max_abs_det,
        dets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalHamiltonian {
    pub value: f64,
    /// The inverse Legendre velocity θ(q, p).
    pub velocity: Vec<f64>,
    pub iterations: usize,
}

/// Inverts the Legendre map at (q, p) by Newton from `seed` and returns
/// H = p·θ − L(q, θ).
pub fn classical_hamiltonian(
    l: &ScalarField,
    x: &CotangentPoint,
    seed: &[f64],
) -> Result<ClassicalHamiltonian, LegendreError> {
    let m = plain_dim(l)?;
    if x.dim() != m || seed.len() != m {
        return Err(LegendreError::Dimension {
            expected: m,
            got: if x.dim() != m { x.dim() } else { seed.len() },
        });
    }
    let vel: Vec<usize> = (m..2 * m).collect();
    let mut v = seed.to_vec();
    let resid = |v: &[f64]| -> Option<(Vec<f64>, f64)> {
        let j = l.jet_wrt(&[x.q.as_slice(), v].concat(), &vel, false).ok()?;
        let r: Vec<f64> = j.gradient().iter().zip(&x.p).map(|(a, b)| a - b).collect();
        let n = linalg::max_abs(&r);
        Some((r, n))
    };
    let tol = 1e-13 * (1.0 + linalg::max_abs(&x.p));
    let max_iter = 60;
    let mut last = f64::INFINITY;
    for it in 0..max_iter {
        let j = l.jet_wrt(&[x.q.as_slice(), &v].concat(), &vel, true)?;
        let r: Vec<f64> = j.gradient().iter().zip(&x.p).map(|(a, b)| a - b).collect();
        let n0 = linalg::max_abs(&r);
        last = n0;
        if n0 <= tol {
            let value = dot_f(&x.p, &v) - l.value(&[x.q.as_slice(), &v].concat())?;
            return Ok(ClassicalHamiltonian {
                value,
                velocity: v,
                iterations: it,
            });
        }
        let h = j.hessian_matrix();
        let step = match h.clone().lu().solve(&(-DVector::from_column_slice(&r))) {
            Some(s) => s,
            None => break,
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-10 {
            let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let Some((_, n1)) = resid(&trial) {
                if n1 < n0 {
                    v = trial;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Err(LegendreError::NoInverse {
        iterations: max_iter,
        residual: last,
    })
}

fn dot_f(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The energy Morse family E(q, p; y, v) = p·v − L(q, v, y) over T*Q.
///
/// Fiber coordinates are ordered (y, v); for a plain Lagrangian there is no y.
#[derive(Debug, Clone)]
pub struct EnergyFamily {
    pub family: MorseFamily,
    pub source: LagrangianSystem,
    dim: usize,
    aux: usize,
}

impl EnergyFamily {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of auxiliary variables y carried over from a Lagrangian family.
    pub fn aux_dim(&self) -> usize {
        self.aux
    }

    /// Fiber index of velocity component `i`.
    pub fn velocity_index(&self, i: usize) -> usize {
        self.aux + i
    }

    /// The generalized Dirac system generated by the family.
    pub fn dynamics(&self) -> Result<HamiltonianFamilySystem, LegendreError> {
        Ok(HamiltonianFamilySystem::new(self.family.clone())?)
    }

    /// The point of the generated dynamics over (q, v, y):
    /// q̇ = v, p = ∂L/∂q̇, ṗ = ∂L/∂q, with fiber witness (y, v).
    pub fn point(&self, q: &[f64], v: &[f64], y: &[f64]) -> Result<(PhaseVelocity, Vec<f64>), LegendreError> {
        let m = self.dim;
        if q.len() != m || v.len() != m || y.len() != self.aux {
            return Err(LegendreError::Dimension {
                expected: m,
                got: q.len(),
            });
        }
        let j = self.source.field().gradient(&[q, v, y].concat())?;
        let g = j.gradient();
        let z = PhaseVelocity {
            q: q.to_vec(),
            p: g[m..2 * m].to_vec(),
            qdot: v.to_vec(),
            pdot: g[..m].to_vec(),
        };
        Ok((z, [y, v].concat()))
    }
}

/// Builds E = p·v − L(q, v, y); no regularity is required of L.
pub fn slow_legendre(sys: &LagrangianSystem) -> EnergyFamily {
    let m = sys.dim();
    let k = sys.fiber_dim();
    let l = sys.field().clone();
    let lg = l.clone();
    // generator variables (q, p, y, v)
    let e = ScalarField::new(format!("p·v − {}", l.name()), 2 * m + k + m, move |x| {
        let lx: Vec<_> = x[..m]
            .iter()
            .chain(&x[2 * m + k..])
            .chain(&x[2 * m..2 * m + k])
            .cloned()
            .collect();
        dot(&x[m..2 * m], &x[2 * m + k..]) - l.compose_jets(&lx)
    });
    let e = match lg.guard_name() {
        Some(g) => {
            let name = g.to_string();
            e.with_guard(name, move |x| {
                let lx: Vec<f64> = x[..m]
                    .iter()
                    .chain(&x[2 * m + k..])
                    .chain(&x[2 * m..2 * m + k])
                    .copied()
                    .collect();
                lg.admits(&lx)
            })
        }
        None => e,
    };
    let mut family = MorseFamily::new(2 * m, k + m, e).expect("arity matches by construction");
    if let LagrangianSystem::Family { family: lf, .. } = sys {
        if let Some(name) = lf.fiber_domain_name() {
            let lf = lf.clone();
            family = family.with_fiber_domain(name.to_string(), move |f| lf.fiber_admits(&f[..k]));
        }
    }
    EnergyFamily {
        family,
        source: sys.clone(),
        dim: m,
        aux: k,
    }
}

/// Eliminates the listed fiber variables of an energy family (indices into
/// the (y, v) fiber), delegating to the generic reduction.
pub fn reduce_energy_family(
    ef: &EnergyFamily,
    eliminate: &[usize],
    anchor: &ReductionAnchor,
    opts: &NewtonOptions,
) -> Result<Reduction, LegendreError> {
    Ok(reduce_family(&ef.family, eliminate, anchor, opts)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphHamiltonian {
    pub value: f64,
    /// max |∂E/∂q̇| at the graph point.
    pub velocity_derivative: f64,
}

/// E(q, p, q̇) = p·q̇ − L(q, q̇) at a point of the graph of the Legendre map.
pub fn dirac_hamiltonian_on_graph(
    l: &ScalarField,
    q: &[f64],
    p: &[f64],
    qdot: &[f64],
    tol: f64,
) -> Result<GraphHamiltonian, LegendreError> {
    let m = plain_dim(l)?;
    if q.len() != m || p.len() != m || qdot.len() != m {
        return Err(LegendreError::Dimension {
            expected: m,
            got: q.len(),
        });
    }
    let j = l.gradient(&[q, qdot].concat())?;
    let d: Vec<f64> = p.iter().zip(&j.gradient()[m..]).map(|(a, b)| a - b).collect();
    let off = linalg::max_abs(&d);
    if off > tol {
        return Err(LegendreError::OffGraph(off));
    }
    Ok(GraphHamiltonian {
        value: dot_f(p, qdot) - j.value(),
        velocity_derivative: off,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphConsistency {
    pub values: Vec<f64>,
    pub spread: f64,
    /// Value agreement over the supplied points; connectedness of the
    /// fibres is not examined.
    pub consistent: bool,
}

/// Evaluates the graph Hamiltonian at several velocities over the same
/// covector and reports the spread of the values.
pub fn graph_value_spread(
    l: &ScalarField,
    q: &[f64],
    p: &[f64],
    velocities: &[Vec<f64>],
    tol: f64,
) -> Result<GraphConsistency, LegendreError> {
    let values = velocities
        .iter()
        .map(|v| dirac_hamiltonian_on_graph(l, q, p, v, tol).map(|g| g.value))
        .collect::<Result<Vec<_>, _>>()?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = if values.is_empty() { 0.0 } else { hi - lo };
    Ok(GraphConsistency {
        consistent: spread <= tol,
        values,
        spread,
    })
}

/// Lifts a family U(x; y) affine in y into a Dirac system with
/// H̄ = U(x, y₀) − y₀·Φ and Φ_A = U(x, y₀ + e_A) − U(x, y₀).
///
/// Affinity is checked at `checks` (pairs of base point and fiber point).
pub fn lift_linear_family(
    fam: &MorseFamily,
    y0: &[f64],
    domains: Vec<MultiplierDomain>,
    checks: &[(Vec<f64>, Vec<f64>)],
    tol: f64,
) -> Result<DiracSystem, LegendreError> {
    let n = fam.base_dim();
    let k = fam.fiber_dim();
    if y0.len() != k {
        return Err(LegendreError::Dimension {
            expected: k,
            got: y0.len(),
        });
    }
    let fiber: Vec<usize> = (n..n + k).collect();
    for (x, y) in checks {
        let j = fam.generator().jet_wrt(&fam.point(x, y), &fiber, true)?;
        let h = j.hessian_matrix();
        let worst = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if worst > tol {
            return Err(LegendreError::NotLinear(worst));
        }
    }
    let u = fam.generator().clone();
    let shifted = |e: Option<usize>| {
        let mut y = y0.to_vec();
        if let Some(a) = e {
            y[a] += 1.0;
        }
        y
    };
    let constraints: Vec<ScalarField> = (0..k)
        .map(|a| {
            let u = u.clone();
            let ya = shifted(Some(a));
            let yb = shifted(None);
            ScalarField::from_local(format!("Φ{}", a + 1), n, move |x, need_h| {
                let ja = u.jet(&[x, &ya].concat()).ok()?;
                let jb = u.jet(&[x, &yb].concat()).ok()?;
                local_difference(&ja, &jb, n, need_h)
            })
        })
        .collect();
    let u_c = u.clone();
    let base_y = y0.to_vec();
    let cons = constraints.clone();
    let base = ScalarField::from_local(format!("{} at fiber base", u.name()), n, move |x, need_h| {
        let j0 = u_c.jet(&[x, &base_y].concat()).ok()?;
        let mut value = j0.value();
        let mut gradient = j0.gradient()[..n].to_vec();
        let mut hess = DMatrix::from_fn(n, n, |a, b| j0.hessian(a, b));
        for (a, c) in cons.iter().enumerate() {
            let jc = c.jet(x).ok()?;
            value -= base_y[a] * jc.value();
            for (g, d) in gradient.iter_mut().zip(jc.gradient()) {
                *g -= base_y[a] * d;
            }
            hess -= jc.hessian_matrix() * base_y[a];
        }
        Some(LocalJet {
            value,
            gradient,
            hessian: need_h.then(|| hess.iter().copied().collect::<Vec<_>>()),
        })
    });
    Ok(DiracSystem::new(base, constraints, domains)?)
}

fn local_difference(
    ja: &Jet2,
    jb: &Jet2,
    n: usize,
    need_h: bool,
) -> Option<LocalJet> {
    let gradient = (0..n).map(|i| ja.gradient()[i] - jb.gradient()[i]).collect();
    let hessian = need_h.then(|| {
        let mut h = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                h[a * n + b] = ja.hessian(a, b) - jb.hessian(a, b);
            }
        }
        h
    });
    Some(LocalJet {
        value: ja.value() - jb.value(),
        gradient,
        hessian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ImplicitDynamics;
    use crate::genfun::{morse_rank_ok, solve_critical_fiber, ReductionSeed};
    use Jet2;

    fn charged(m: f64, e: f64, a: [f64; 3]) -> ScalarField {
        ScalarField::new("charged", 6, move |x| {
            dot(&x[3..], &x[3..]) * (0.5 * m) + crate::jetcalc::dot_const(&x[3..], &a) * e
        })
    }

    fn minkowski(v: &[Jet2]) -> Jet2 {
        &v[0] * &v[0] - &v[1] * &v[1] - &v[2] * &v[2] - &v[3] * &v[3]
    }

    fn relativistic(sign: f64) -> ScalarField {
        ScalarField::new("relativistic", 8, move |x| minkowski(&x[4..]).sqrt() * sign)
            .with_guard("timelike", |x| x[4] * x[4] - x[5] * x[5] - x[6] * x[6] - x[7] * x[7] > 0.0)
    }

    #[test]
    fn legendre_examples() {
        let l = charged(2.0, 0.0, [0.0; 3]);
        let p = legendre_map(&l, &TangentPoint::new(vec![0.0; 3], vec![3.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(p.p, vec![6.0, 0.0, 0.0]);
        let r = legendre_map(&relativistic(1.0), &TangentPoint::new(vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(r.p, vec![1.0, 0.0, 0.0, 0.0]);
        let c = ScalarField::new("q only", 2, |x| x[0].square());
        assert_eq!(legendre_map(&c, &TangentPoint::new(vec![1.0], vec![5.0]).unwrap()).unwrap().p, vec![0.0]);
    }

    #[test]
    fn probe_examples() {
        let pts = vec![TangentPoint::new(vec![0.1, 0.2, 0.3], vec![1.0, -2.0, 0.5]).unwrap()];
        let v = hyperregular_probe(&charged(2.0, 0.0, [0.0; 3]), &pts, 1e-10).unwrap();
        assert!((v.dets[0] - 8.0).abs() < 1e-12 && v.regular_at_samples);
        let rel = vec![TangentPoint::new(vec![0.0; 4], vec![2.0, 0.3, -0.4, 0.1]).unwrap()];
        let v = hyperregular_probe(&relativistic(1.0), &rel, 1e-10).unwrap();
        assert!(v.max_abs_det <= 1e-10 && !v.regular_at_samples);
        let cubic = ScalarField::new("cubic", 2, |x| x[1].powi(3) * (1.0 / 3.0));
        let at = |v| TangentPoint::new(vec![0.0], vec![v]).unwrap();
        let d = hyperregular_probe(&cubic, &[at(0.0), at(1.0)], 1e-10).unwrap();
        assert_eq!(d.dets, vec![0.0, 2.0]);
    }

    #[test]
    fn classical_examples() {
        let x = CotangentPoint::new(vec![0.0; 3], vec![3.0, 0.0, 0.0]).unwrap();
        let h = classical_hamiltonian(&charged(2.0, 0.0, [0.0; 3]), &x, &[0.0; 3]).unwrap();
        assert!((h.value - 2.25).abs() < 1e-12);
        let h = classical_hamiltonian(&charged(2.0, 1.0, [1.0, 0.0, 0.0]), &x, &[0.0; 3]).unwrap();
        assert!((h.value - 1.0).abs() < 1e-12);
        let l = charged(2.0, 1.0, [0.3, -0.2, 0.1]);
        let t = TangentPoint::new(vec![0.0; 3], vec![0.7, -1.1, 0.4]).unwrap();
        let p = legendre_map(&l, &t).unwrap();
        let h = classical_hamiltonian(&l, &p, &[0.0; 3]).unwrap();
        for (a, b) in h.velocity.iter().zip(&t.v) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn slow_plain_one_dim() {
        let l = LagrangianSystem::plain(ScalarField::new("v²/2", 2, |x| x[1].square() * 0.5)).unwrap();
        let ef = slow_legendre(&l);
        let crit = solve_critical_fiber(&ef.family, &[0.0, 3.0], &[vec![0.0]], &NewtonOptions::default()).unwrap();
        assert_eq!(crit.len(), 1);
        assert!((crit[0][0] - 3.0).abs() < 1e-12);
        let val = ef.family.generator().value(&[0.0, 3.0, crit[0][0]]).unwrap();
        assert!((val - 4.5).abs() < 1e-12);
    }

    #[test]
    fn slow_massless_reduces() {
        let lf = MorseFamily::new(8, 1, ScalarField::new("massless", 9, |x| minkowski(&x[4..8]) / (&x[8] * 2.0)))
            .unwrap()
            .with_fiber_domain("y > 0", |y| y[0] > 0.0);
        let sys = LagrangianSystem::family(lf).unwrap();
        let ef = slow_legendre(&sys);
        let q = vec![0.0; 4];
        let p = vec![1.2, 0.3, -0.5, 0.2];
        let y = 1.7;
        let anchor = ReductionAnchor {
            q: [q.clone(), p.clone()].concat(),
            kept: vec![y],
            seed: ReductionSeed::Fixed(vec![0.0; 4]),
        };
        let red = reduce_energy_family(&ef, &[1, 2, 3, 4], &anchor, &NewtonOptions::default()).unwrap();
        let val = red.family.generator().value(&[q.as_slice(), &p, &[y]].concat()).unwrap();
        let gpp = p[0] * p[0] - p[1] * p[1] - p[2] * p[2] - p[3] * p[3];
        assert!((val - 0.5 * y * gpp).abs() < 1e-12);
        let rank = morse_rank_ok(&ef.family, &[q.as_slice(), &p].concat(), &[y, 0.4, 0.1, 0.2, -0.3]).unwrap();
        assert!(rank.ok);
    }

    #[test]
    fn slow_dynamics_matches_lagrange() {
        let l = charged(1.5, 0.8, [0.2, -0.1, 0.4]);
        let sys = LagrangianSystem::plain(l).unwrap();
        let ef = slow_legendre(&sys);
        let (z, w) = ef.point(&[0.1, 0.2, 0.3], &[0.5, -0.4, 1.0], &[]).unwrap();
        assert!(ef.dynamics().unwrap().residual(&z, &w).unwrap().max_abs() < 1e-14);
        assert!(sys.residual(&z, &[]).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn graph_hamiltonian_zero_for_both_signs() {
        for s in [1.0, -1.0] {
            let l = relativistic(s);
            let qd = vec![1.3, 0.2, -0.4, 0.5];
            let p = legendre_map(&l, &TangentPoint::new(vec![0.0; 4], qd.clone()).unwrap()).unwrap();
            let g = dirac_hamiltonian_on_graph(&l, &p.q, &p.p, &qd, 1e-12).unwrap();
            assert!(g.value.abs() < 1e-14);
            let scaled: Vec<f64> = qd.iter().map(|v| 2.5 * v).collect();
            let spread = graph_value_spread(&l, &p.q, &p.p, &[qd.clone(), scaled], 1e-12).unwrap();
            assert!(spread.consistent);
        }
        let l = relativistic(1.0);
        let off = dirac_hamiltonian_on_graph(&l, &[0.0; 4], &[3.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0], 1e-9);
        assert!(matches!(off, Err(LegendreError::OffGraph(_))));
    }

    #[test]
    fn lift_reproduces_linear_family() {
        // U = |p|² / 2 + y (p₀ − 1) over T*R
        let u = ScalarField::new("U", 3, |x| &x[1] * &x[1] * 0.5 + &x[2] * (&x[1] - 1.0));
        let fam = MorseFamily::new(2, 1, u).unwrap();
        let d = lift_linear_family(&fam, &[1.0], vec![MultiplierDomain::Free], &[(vec![0.0, 2.0], vec![0.3])], 1e-12).unwrap();
        assert!((d.constraints[0].value(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-14);
        assert!((d.base_h.value(&[0.0, 2.0]).unwrap() - 2.0).abs() < 1e-14);
        let quad = MorseFamily::new(2, 1, ScalarField::new("Q", 3, |x| x[2].square())).unwrap();
        assert!(matches!(
            lift_linear_family(&quad, &[0.0], vec![MultiplierDomain::Free], &[(vec![0.0, 0.0], vec![0.0])], 1e-12),
            Err(LegendreError::NotLinear(_))
        ));
    }
}
