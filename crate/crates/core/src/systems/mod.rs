//! The verification catalog: every worked example as a constructible system,
//! plus metric utilities and the statics constitutive-set checks.

mod catalog;
mod em;
mod metric;
mod statics;
mod two_particle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint_algo::ConstraintError;
use crate::dynamics::DynamicsError;
use crate::genfun::GenError;
use crate::jetcalc::JetError;
use crate::legendre::LegendreError;

pub use catalog::{
    build_dynamics, hyperboloid_family, relativistic_lagrangian, DynamicsSystem, OnShell,
};
pub use em::EMFieldSpec;
pub use metric::{christoffel, Christoffel, MetricSpec, Signature};
pub use statics::{
    bead_circle_generator, elastic_circle_family, elastic_circle_map, elastic_point_energy, singularity_scan,
    statics_constitutive, RankProfile, RankSample, StaticsInput, StaticsOutcome,
};
pub use two_particle::{first_order_equations, Potential, TwoParticleSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("unknown system id {0:?}")]
    UnknownSystem(String),
    #[error("metric is singular at the requested point")]
    SingularMetric,
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("{0} is a statics example and has no dynamics")]
    NoDynamics(SystemId),
    #[error("{0} has no statics constitutive set")]
    NoStatics(SystemId),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Legendre(#[from] LegendreError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

/// Stable identifiers of the catalog systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemId {
    ElasticPoint,
    BeadCircle,
    ElasticCircle,
    Em3d,
    Kaluza5d,
    Relativistic,
    Relativistic5d,
    Massless,
    TwoParticle,
}

impl SystemId {
    pub const ALL: [SystemId; 9] = [
        SystemId::ElasticPoint,
        SystemId::BeadCircle,
        SystemId::ElasticCircle,
        SystemId::Em3d,
        SystemId::Kaluza5d,
        SystemId::Relativistic,
        SystemId::Relativistic5d,
        SystemId::Massless,
        SystemId::TwoParticle,
    ];

    pub const DYNAMICS: [SystemId; 6] = [
        SystemId::Em3d,
        SystemId::Kaluza5d,
        SystemId::Relativistic,
        SystemId::Relativistic5d,
        SystemId::Massless,
        SystemId::TwoParticle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemId::ElasticPoint => "elastic-point",
            SystemId::BeadCircle => "bead-circle",
            SystemId::ElasticCircle => "elastic-circle",
            SystemId::Em3d => "em-3d",
            SystemId::Kaluza5d => "kaluza-5d",
            SystemId::Relativistic => "relativistic",
            SystemId::Relativistic5d => "relativistic-5d",
            SystemId::Massless => "massless",
            SystemId::TwoParticle => "two-particle",
        }
    }

    pub fn is_statics(self) -> bool {
        matches!(self, SystemId::ElasticPoint | SystemId::BeadCircle | SystemId::ElasticCircle)
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemId {
    type Err = SystemError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SystemId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| SystemError::UnknownSystem(s.to_string()))
    }
}

/// Parameter overrides; unset fields take per-system defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub mass: Option<f64>,
    pub charge: Option<f64>,
    /// Constant magnetic field strength.
    pub b: Option<f64>,
    /// Spring constant (statics).
    pub k: Option<f64>,
    /// Circle radius (statics).
    pub a: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub potential: Option<Potential>,
}

/// Parameters after defaults are applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolved {
    pub mass: f64,
    pub charge: f64,
    pub b: f64,
    pub k: f64,
    pub a: f64,
    pub m1: f64,
    pub m2: f64,
    pub potential: Potential,
}

impl SystemParams {
    pub fn resolve(&self, id: SystemId) -> Result<Resolved, SystemError> {
        let default_b = match id {
            SystemId::Em3d | SystemId::Kaluza5d => 1.0,
            _ => 0.0,
        };
        let r = Resolved {
            mass: self.mass.unwrap_or(1.0),
            charge: self.charge.unwrap_or(1.0),
            b: self.b.unwrap_or(default_b),
            k: self.k.unwrap_or(3.0),
            a: self.a.unwrap_or(1.0),
            m1: self.m1.unwrap_or(1.0),
            m2: self.m2.unwrap_or(2.0),
            potential: self.potential.unwrap_or(Potential::Quadratic { omega: 1.0 }),
        };
        let positive = [("mass", r.mass), ("k", r.k), ("a", r.a), ("m1", r.m1), ("m2", r.m2)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SystemError::Param(format!("{name} must be positive, got {v}")));
            }
        }
        if !r.charge.is_finite() || !r.b.is_finite() {
            return Err(SystemError::Param("charge and b must be finite".into()));
        }
        Ok(r)
    }
}
