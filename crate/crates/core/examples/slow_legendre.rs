//! Fast and slow Legendre transformations for a charged relativistic
//! particle. The Lagrangian is singular, so the fast method fails and the
//! energy family must be reduced instead.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use implicit_dynamics::bundles::TangentPoint;
use implicit_dynamics::genfun::{morse_rank_ok, solve_critical_fiber, MorseFamily, NewtonOptions};
use implicit_dynamics::legendre::{hyperregular_probe, slow_legendre};
use implicit_dynamics::systems::{build_dynamics, hyperboloid_family, SystemId, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SystemParams {
        b: Some(0.5),
        ..Default::default()
    };
    let sys = build_dynamics(SystemId::Relativistic, &params)?;
    let l = sys.lagrangian.plain_lagrangian()?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<TangentPoint> = (0..20)
        .map(|_| {
            let (q, v, _) = sys.sample_tangent(&mut rng);
            TangentPoint::new(q, v).unwrap()
        })
        .collect();
    let probe = hyperregular_probe(l, &pts, 1e-10)?;
    println!(
        "hyperregular at {} samples: {} (max |det| {:.1e})",
        probe.samples, probe.regular_at_samples, probe.max_abs_det
    );

    let ef = slow_legendre(&sys.lagrangian);
    let (q, v, _) = sys.sample_tangent(&mut rng);
    let z = sys.lagrange_point(&q, &v, &[])?;
    let rank = morse_rank_ok(&ef.family, &[q.clone(), z.p.clone()].concat(), &v)?;
    println!("energy family rank {} of {} required: {}", rank.rank, rank.required, rank.ok);

    // critical points of the hyperboloid family at q = 0, p = (2, 0, 0, 0),
    // with v₀ = 1 held fixed and (v, λ) solved for
    let fam = hyperboloid_family(&sys.params)?;
    let sub = MorseFamily::new(9, 5, fam.generator().clone())?;
    let base = [vec![0.0; 4], vec![2.0, 0.0, 0.0, 0.0], vec![1.0]].concat();
    let seeds = vec![vec![0.9, 0.1, 0.0, 0.0, -0.4], vec![-0.9, 0.1, 0.0, 0.0, 1.4]];
    for y in solve_critical_fiber(&sub, &base, &seeds, &NewtonOptions::default())? {
        let value = sub.generator().value(&sub.point(&base, &y))?;
        println!("critical point v = {:.4?}  λ = {:.4}  value {value:.6}", &y[..4], y[4]);
    }
    Ok(())
}
