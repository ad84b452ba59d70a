//! Constitutive sets of three static systems: an elastic point, a bead on a
//! circle, and an elastic circle, plus the rank drop of the last one at ρ = 0.

use implicit_dynamics::systems::{singularity_scan, statics_constitutive, StaticsInput, SystemId, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        (SystemId::ElasticPoint, StaticsInput::Point { x: 0.4, y: -0.2 }),
        (SystemId::BeadCircle, StaticsInput::Circle { theta: 0.8, lambda: 0.3 }),
        (SystemId::ElasticCircle, StaticsInput::Polar { rho: 0.5, theta: 1.1 }),
    ];
    for (id, input) in cases {
        let params = SystemParams::default().resolve(id)?;
        let out = statics_constitutive(id, &params, input)?;
        println!(
            "{id:<15} q = {:?}  f = {:?}  residual {:.1e}  isotropy {:.1e}",
            out.q, out.force, out.residual, out.isotropy
        );
    }

    let params = SystemParams::default().resolve(SystemId::ElasticCircle)?;
    let profile = singularity_scan(&params, &[1.0, 0.1, 1e-3, 1e-6, 0.0], 0.7);
    for s in &profile.samples {
        println!("rho = {:>8.1e}  rank {}  singular values {}", s.rho, s.rank, s.singular_values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(", "));
    }
    Ok(())
}
