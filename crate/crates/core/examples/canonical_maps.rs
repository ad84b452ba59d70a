//! The canonical maps of the triple on a point of TT*Q, and the two
//! pullback identities checked at random points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use implicit_dynamics::bundles::{alpha, beta, kappa, PhaseVelocity};
use implicit_dynamics::verify::canonical_map_checks;

fn main() {
    let z = PhaseVelocity::from_coords(&[1.0, 2.0, 0.5, -0.5, 0.1, 0.2, 3.0, 4.0]);
    println!("z        = {z:?}");
    println!("alpha(z) = {:?}", alpha(&z));
    println!("beta(z)  = {:?}", beta(&z));

    let w = implicit_dynamics::bundles::IteratedTangent::new(vec![1.0, 2.0], vec![0.3, 0.4], vec![5.0, 6.0], vec![7.0, 8.0])
        .unwrap();
    println!("kappa(kappa(w)) == w: {}", kappa(&kappa(&w)) == w);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for c in canonical_map_checks(&mut rng, 100, 3) {
        println!("{:<18} max {:.2e} (tol {:.0e}) {}", c.name, c.measured, c.tol, if c.passed { "ok" } else { "FAIL" });
    }
}
