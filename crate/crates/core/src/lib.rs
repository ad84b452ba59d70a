pub mod bundles;
pub mod jetcalc;
pub mod linalg;
pub mod genfun;
pub mod dynamics;
pub mod legendre;
pub mod constraint_algo;
pub mod integrator;
pub mod systems;
pub mod verify;
pub mod cli;
