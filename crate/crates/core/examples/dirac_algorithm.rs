//! Constraint algorithm on two interacting relativistic particles. A
//! quadratic potential forces one secondary constraint and fixes the ratio
//! of the two multipliers; a constant potential needs nothing more.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use implicit_dynamics::bundles::CotangentPoint;
use implicit_dynamics::constraint_algo::{dirac_iterate, AlgoOptions};
use implicit_dynamics::systems::{build_dynamics, Potential, SystemId, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for potential in [Potential::Quadratic { omega: 1.0 }, Potential::Constant { c: 0.5 }] {
        let params = SystemParams {
            potential: Some(potential),
            ..Default::default()
        };
        let sys = build_dynamics(SystemId::TwoParticle, &params)?;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seeds: Vec<CotangentPoint> = (0..32).map(|_| sys.sample_seed(&mut rng, 1e-3)).collect();
        let res = dirac_iterate(&sys.family, &sys.primary, &seeds, &AlgoOptions::default())?;
        println!("V = {}", potential.label());
        for g in &res.report.generations {
            println!(
                "  generation {}: {} constraints, max bracket {:.2e}, condition rank {}, {:?}",
                g.generation,
                g.constraints.len(),
                g.raw_bracket_max,
                g.conditions.max_rank,
                g.verdict
            );
            if let Some(m) = &g.conditions.example_multipliers {
                println!("    admissible multipliers {m:.4?}");
            }
        }
        println!("  verdict {:?}, {} secondary", res.report.verdict, res.report.secondary_count);
    }
    Ok(())
}
