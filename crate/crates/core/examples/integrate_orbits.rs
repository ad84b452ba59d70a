//! Gauge-fixed integration: a Larmor circle in a constant magnetic field and
//! a charged relativistic particle in proper time, with constraint drift.

use implicit_dynamics::bundles::CotangentPoint;
use implicit_dynamics::integrator::{drift_report, integrate, IntegrateOptions};
use implicit_dynamics::systems::{build_dynamics, SystemId, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let em = build_dynamics(SystemId::Em3d, &SystemParams::default())?;
    let steps = 2000;
    let traj = integrate(
        &em.dirac,
        &em.gauge("unit")?,
        &em.default_start(),
        &IntegrateOptions {
            dt: 2.0 * std::f64::consts::PI / steps as f64,
            steps,
            ..Default::default()
        },
    )?;
    let radius_err = traj
        .states
        .iter()
        .map(|x| ((x.q[0].powi(2) + (x.q[1] + 1.0).powi(2)).sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    println!("Larmor: {} steps, end q = {:?}, radius error {radius_err:.2e}", steps, traj.last().unwrap().q);

    let params = SystemParams {
        b: Some(1.0),
        ..Default::default()
    };
    let rel = build_dynamics(SystemId::Relativistic, &params)?;
    let traj = integrate(
        &rel.dirac,
        &rel.gauge("proper-time")?,
        &CotangentPoint::new(vec![0.0; 4], vec![(1.0f64 + 0.36).sqrt(), 0.6, 0.0, 0.0])?,
        &IntegrateOptions {
            dt: 1e-2,
            steps: 500,
            ..Default::default()
        },
    )?;
    let drift = drift_report(&traj, &rel.primary)?;
    let end = traj.last().unwrap();
    println!("relativistic: end q = {:.4?}, max constraint drift {:.2e}", end.q, drift.max);
    for (t, x) in traj.times.iter().zip(&traj.states).step_by(100) {
        println!("  t = {t:5.2}  q = {:.4?}", x.q);
    }
    Ok(())
}
