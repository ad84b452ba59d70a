//! Fixed-step RK4 integration of Dirac systems with gauge-fixed multipliers
//! and per-step projection onto the constraint set.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::bundles::{CotangentPoint, PhaseVelocity};
use crate::constraint_algo::{project_to_constraints, ConstraintError, ConstraintSet, ProjectionOptions};
use crate::dynamics::{dirac_residual, DiracSystem, DynamicsError, MultiplierDomain};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error("step {step}: {source}")]
    Dynamics { step: usize, source: DynamicsError },
    #[error("step {step}: {source}")]
    Projection { step: usize, source: ConstraintError },
    #[error("initial point is off the constraint set: max |Φ| = {0:e}")]
    OffConstraints(f64),
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("gauge {gauge} cannot be evaluated at step {step}: {reason}")]
    Gauge { gauge: String, step: usize, reason: String },
    #[error("time map must have positive derivative; σ′ = {derivative} at s = {s}")]
    Orientation { s: f64, derivative: f64 },
    #[error("time map does not cover the trajectory interval")]
    TimeMapRange,
    #[error("trajectory needs at least three samples")]
    ShortTrajectory,
}

type GaugeRule = dyn Fn(&CotangentPoint) -> Result<Vec<f64>, String> + Send + Sync;

/// Rule fixing the multipliers as functions of the state.
#[derive(Clone)]
pub struct Gauge {
    pub name: String,
    rule: Arc<GaugeRule>,
}

impl fmt::Debug for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gauge").field("name", &self.name).finish()
    }
}

impl Gauge {
    pub fn custom<F>(name: impl Into<String>, rule: F) -> Self
    where
        F: Fn(&CotangentPoint) -> Result<Vec<f64>, String> + Send + Sync + 'static,
    {
        Gauge {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }

    /// Constant multipliers.
    pub fn constant(name: impl Into<String>, v: Vec<f64>) -> Self {
        Gauge::custom(name, move |_| Ok(v.clone()))
    }

    /// All multipliers equal to 1.
    pub fn unit(k: usize) -> Self {
        Gauge::constant("unit", vec![1.0; k])
    }

    /// v_A = 1/‖∂_pΦ_A‖_g for sign-restricted multipliers, so that the
    /// velocity contributed by each such constraint has unit length;
    /// free multipliers are set to 0 and fixed ones to their value.
    pub fn proper_time<G>(sys: &DiracSystem, metric: G) -> Self
    where
        G: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let constraints = sys.constraints.clone();
        let domains = sys.multiplier_domain.clone();
        Gauge::custom("proper-time", move |x| {
            let m = x.dim();
            let g = metric(&x.q);
            let c = x.coords();
            constraints
                .iter()
                .zip(&domains)
                .map(|(phi, d)| match d {
                    MultiplierDomain::Free => Ok(0.0),
                    MultiplierDomain::Fixed(v) => Ok(*v),
                    _ => {
                        let j = phi.gradient(&c).map_err(|e| e.to_string())?;
                        let w = &j.gradient()[m..];
                        let n2: f64 = (0..m).map(|i| (0..m).map(|k| g[(i, k)] * w[i] * w[k]).sum::<f64>()).sum();
                        if !(n2 > 0.0) {
                            return Err(format!("‖∂_pΦ‖² = {n2} is not positive"));
                        }
                        let v = 1.0 / n2.sqrt();
                        Ok(if *d == MultiplierDomain::Negative { -v } else { v })
                    }
                })
                .collect()
        })
    }

    pub fn eval(&self, x: &CotangentPoint) -> Result<Vec<f64>, String> {
        (self.rule)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub steps: usize,
    pub project_every: usize,
    pub projection: ProjectionOptions,
    /// Tolerance for accepting x0 on C.
    pub start_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            dt: 1e-3,
            steps: 1000,
            project_every: 1,
            projection: ProjectionOptions::default(),
            start_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CotangentPoint>,
    pub gauge_values: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&CotangentPoint> {
        self.states.last()
    }
}

fn constraint_set(sys: &DiracSystem) -> ConstraintSet {
    ConstraintSet::primary(sys.constraints.clone())
}

fn gauged_field(
    sys: &DiracSystem,
    gauge: &Gauge,
    coords: &[f64],
    step: usize,
) -> Result<(Vec<f64>, Vec<f64>), IntegratorError> {
    let x = CotangentPoint::from_coords(coords);
    let v = gauge.eval(&x).map_err(|reason| IntegratorError::Gauge {
        gauge: gauge.name.clone(),
        step,
        reason,
    })?;
    let (qd, pd) = sys
        .field(&x, &v)
        .map_err(|source| IntegratorError::Dynamics { step, source })?;
    Ok((qd.into_iter().chain(pd).collect(), v))
}

/// RK4 with the multiplier-fixed field and projection every
/// `project_every` steps (0 disables projection).
pub fn integrate(
    sys: &DiracSystem,
    gauge: &Gauge,
    x0: &CotangentPoint,
    opts: &IntegrateOptions,
) -> Result<Trajectory, IntegratorError> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(IntegratorError::BadStep(opts.dt));
    }
    let c = constraint_set(sys);
    let off = c
        .values(&x0.coords())
        .map_err(|source| IntegratorError::Projection { step: 0, source })?
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()));
    if off > opts.start_tol {
        return Err(IntegratorError::OffConstraints(off));
    }
    let dt = opts.dt;
    let mut x = x0.coords();
    let (_, v0) = gauged_field(sys, gauge, &x, 0)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        gauge_values: vec![v0],
    };
    let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    for step in 1..=opts.steps {
        let (k1, _) = gauged_field(sys, gauge, &x, step)?;
        let (k2, _) = gauged_field(sys, gauge, &axpy(&x, &k1, 0.5 * dt), step)?;
        let (k3, _) = gauged_field(sys, gauge, &axpy(&x, &k2, 0.5 * dt), step)?;
        let (k4, _) = gauged_field(sys, gauge, &axpy(&x, &k3, dt), step)?;
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let mut pt = CotangentPoint::from_coords(&x);
        if opts.project_every > 0 && step % opts.project_every == 0 && !c.is_empty() {
            pt = project_to_constraints(&pt, &c, &opts.projection)
                .map_err(|source| IntegratorError::Projection { step, source })?;
            x = pt.coords();
        }
        let (_, v) = gauged_field(sys, gauge, &x, step)?;
        traj.times.push(step as f64 * dt);
        traj.states.push(pt);
        traj.gauge_values.push(v);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    /// max_A |Φ_A| at each stored state.
    pub per_step: Vec<f64>,
    /// max over the trajectory, per constraint.
    pub per_constraint: Vec<f64>,
    pub max: f64,
}

pub fn drift_report(traj: &Trajectory, c: &ConstraintSet) -> Result<DriftReport, ConstraintError> {
    let mut per_step = Vec::with_capacity(traj.len());
    let mut per_constraint = vec![0.0f64; c.len()];
    for s in &traj.states {
        let vals = c.values(&s.coords())?;
        let mut m = 0.0f64;
        for (a, v) in vals.iter().enumerate() {
            per_constraint[a] = per_constraint[a].max(v.abs());
            m = m.max(v.abs());
        }
        per_step.push(m);
    }
    let max = per_step.iter().copied().fold(0.0, f64::max);
    Ok(DriftReport {
        per_step,
        per_constraint,
        max,
    })
}

/// Monotone time map s ↦ σ(s) with its derivative.
pub struct TimeMap<'a> {
    pub sigma: &'a dyn Fn(f64) -> f64,
    pub derivative: &'a dyn Fn(f64) -> f64,
}

impl TimeMap<'_> {
    fn inverse(&self, t: f64, lo: f64, hi: f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if (self.sigma)(mid) < t {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

/// Max Dirac residual of s ↦ γ(σ(s)) with multipliers σ′(s)·v(σ(s)),
/// velocities taken by second-order differences on the reparametrized grid.
pub fn reparametrize_check(sys: &DiracSystem, traj: &Trajectory, map: &TimeMap<'_>) -> Result<f64, IntegratorError> {
    let n = traj.len();
    if n < 3 {
        return Err(IntegratorError::ShortTrajectory);
    }
    let (t0, t1) = (traj.times[0], traj.times[n - 1]);
    // bracket σ⁻¹ of the trajectory interval
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while ((map.sigma)(lo) > t0 || (map.sigma)(hi) < t1) && grow < 200 {
        lo *= 2.0;
        hi *= 2.0;
        grow += 1;
    }
    if (map.sigma)(lo) > t0 || (map.sigma)(hi) < t1 {
        return Err(IntegratorError::TimeMapRange);
    }
    let s: Vec<f64> = traj.times.iter().map(|&t| map.inverse(t, lo, hi)).collect();
    for &si in &s {
        let d = (map.derivative)(si);
        if !(d > 0.0) {
            return Err(IntegratorError::Orientation { s: si, derivative: d });
        }
    }
    let mut worst = 0.0f64;
    for k in 1..n - 1 {
        let (h0, h1) = (s[k] - s[k - 1], s[k + 1] - s[k]);
        let xm = traj.states[k - 1].coords();
        let x = traj.states[k].coords();
        let xp = traj.states[k + 1].coords();
        let vel: Vec<f64> = (0..x.len())
            .map(|i| {
                -h1 / (h0 * (h0 + h1)) * xm[i] + (h1 - h0) / (h0 * h1) * x[i] + h0 / (h1 * (h0 + h1)) * xp[i]
            })
            .collect();
        let m = x.len() / 2;
        let z = PhaseVelocity::from_coords(&[x[..m].to_vec(), x[m..].to_vec(), vel[..m].to_vec(), vel[m..].to_vec()].concat());
        let d = (map.derivative)(s[k]);
        let v: Vec<f64> = traj.gauge_values[k].iter().map(|a| d * a).collect();
        let r = dirac_residual(sys, &z, &v).map_err(|source| IntegratorError::Dynamics { step: k, source })?;
        worst = worst.max(r.max_abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::{Jet2, ScalarField};

    fn mink(p: &[Jet2]) -> Jet2 {
        &p[0] * &p[0] - &p[1] * &p[1] - &p[2] * &p[2] - &p[3] * &p[3]
    }

    fn free_relativistic() -> DiracSystem {
        let zero = ScalarField::constant("0", 8, 0.0);
        let phi = ScalarField::new("‖p‖ − 1", 8, |x| mink(&x[4..]).sqrt() - 1.0);
        DiracSystem::new(zero, vec![phi], vec![MultiplierDomain::Positive]).unwrap()
    }

    fn oscillator() -> DiracSystem {
        let h = ScalarField::new("H", 2, |x| (&x[0] * &x[0] + &x[1] * &x[1]) * 0.5);
        DiracSystem::unconstrained(h).unwrap()
    }

    #[test]
    fn straight_line() {
        let sys = free_relativistic();
        let x0 = CotangentPoint::new(vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let opts = IntegrateOptions {
            dt: 1e-2,
            steps: 100,
            ..Default::default()
        };
        let tr = integrate(&sys, &Gauge::unit(1), &x0, &opts).unwrap();
        let last = tr.last().unwrap();
        assert!((last.q[0] - 1.0).abs() < 1e-12);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        let d = drift_report(&tr, &ConstraintSet::primary(sys.constraints.clone())).unwrap();
        assert!(d.max < 1e-14);
    }

    #[test]
    fn oscillator_order() {
        let sys = oscillator();
        let x0 = CotangentPoint::new(vec![1.0], vec![0.0]).unwrap();
        let err = |n: usize| {
            let opts = IntegrateOptions {
                dt: 2.0 * std::f64::consts::PI / n as f64,
                steps: n,
                ..Default::default()
            };
            let tr = integrate(&sys, &Gauge::unit(0), &x0, &opts).unwrap();
            let l = tr.last().unwrap();
            ((l.q[0] - 1.0).powi(2) + l.p[0].powi(2)).sqrt()
        };
        let ratio = err(50) / err(100);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = free_relativistic();
        let off = CotangentPoint::new(vec![0.0; 4], vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            integrate(&sys, &Gauge::unit(1), &off, &IntegrateOptions::default()),
            Err(IntegratorError::OffConstraints(_))
        ));
        let on = CotangentPoint::new(vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let neg = Gauge::constant("custom", vec![-1.0]);
        assert!(matches!(
            integrate(&sys, &neg, &on, &IntegrateOptions::default()),
            Err(IntegratorError::Dynamics { step: 0, .. })
        ));
    }

    #[test]
    fn proper_time_gauge() {
        let sys = free_relativistic();
        let g = Gauge::proper_time(&sys, |_| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, -1.0, -1.0])));
        let x = CotangentPoint::new(vec![0.0; 4], vec![1.25, 0.75, 0.0, 0.0]).unwrap();
        let v = g.eval(&x).unwrap();
        let (qd, _) = sys.field(&x, &v).unwrap();
        let n2 = qd[0] * qd[0] - qd[1] * qd[1] - qd[2] * qd[2] - qd[3] * qd[3];
        assert!((n2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reparametrization() {
        let sys = free_relativistic();
        let x0 = CotangentPoint::new(vec![0.0; 4], vec![1.25, 0.75, 0.0, 0.0]).unwrap();
        let opts = IntegrateOptions {
            dt: 1e-2,
            steps: 50,
            ..Default::default()
        };
        let tr = integrate(&sys, &Gauge::unit(1), &x0, &opts).unwrap();
        let id = TimeMap {
            sigma: &|s| s,
            derivative: &|_| 1.0,
        };
        assert!(reparametrize_check(&sys, &tr, &id).unwrap() < 1e-10);
        let double = TimeMap {
            sigma: &|s| 2.0 * s,
            derivative: &|_| 2.0,
        };
        assert!(reparametrize_check(&sys, &tr, &double).unwrap() < 1e-8);
        let wrong = TimeMap {
            sigma: &|s| 2.0 * s,
            derivative: &|_| 1.0,
        };
        assert!(reparametrize_check(&sys, &tr, &wrong).unwrap() > 0.1);
        let rev = TimeMap {
            sigma: &|s| -s,
            derivative: &|_| -1.0,
        };
        assert!(reparametrize_check(&sys, &tr, &rev).is_err());
    }
}
