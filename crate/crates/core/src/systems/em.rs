//! Electromagnetic potentials (φ, A) with charge and mass.

use crate::jetcalc::{dot, sum, Jet2, Polynomial, ScalarField};

#[derive(Debug, Clone)]
pub struct EMFieldSpec {
    pub phi: ScalarField,
    pub a: Vec<ScalarField>,
    pub e: f64,
    pub m: f64,
}

impl EMFieldSpec {
    /// Constant field B along the third spatial axis, A = (−By/2, Bx/2, 0), φ = 0.
    pub fn constant_b(b: f64, e: f64, m: f64) -> Self {
        EMFieldSpec {
            phi: ScalarField::constant("φ", 3, 0.0),
            a: vec![
                ScalarField::new("A_x", 3, move |q| &q[1] * (-0.5 * b)),
                ScalarField::new("A_y", 3, move |q| &q[0] * (0.5 * b)),
                ScalarField::constant("A_z", 3, 0.0),
            ],
            e,
            m,
        }
    }

    /// Space-time potential A = (0, −By/2, Bx/2, 0) for coordinates (t, x, y, z).
    pub fn spacetime_b(b: f64, e: f64, m: f64) -> Self {
        EMFieldSpec {
            phi: ScalarField::constant("φ", 4, 0.0),
            a: vec![
                ScalarField::constant("A_t", 4, 0.0),
                ScalarField::new("A_x", 4, move |q| &q[2] * (-0.5 * b)),
                ScalarField::new("A_y", 4, move |q| &q[1] * (0.5 * b)),
                ScalarField::constant("A_z", 4, 0.0),
            ],
            e,
            m,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// A ↦ A + ∇χ.
    pub fn gauge_shifted(&self, chi: &Polynomial) -> Self {
        let a = self
            .a
            .iter()
            .enumerate()
            .map(|(i, ai)| {
                let d = chi.derivative(i);
                let ai = ai.clone();
                ScalarField::new(format!("{} + ∂χ", ai.name()), ai.arity(), move |q| {
                    ai.compose_jets(q) + d.eval_jets(q)
                })
            })
            .collect();
        EMFieldSpec {
            phi: self.phi.clone(),
            a,
            e: self.e,
            m: self.m,
        }
    }

    /// L = m/2 |q̇|² + e A·q̇ − eφ with variables (q, q̇).
    pub fn lagrangian(&self) -> ScalarField {
        let em = self.clone();
        let n = self.dim();
        ScalarField::new("m/2|q̇|² + eA·q̇ − eφ", 2 * n, move |x| {
            let (q, v) = x.split_at(n);
            sum(v.iter().map(|c| c * c)) * (0.5 * em.m) + dot(&em.a_jets(q), v) * em.e - em.phi_jet(q) * em.e
        })
    }

    pub fn a_jets(&self, q: &[Jet2]) -> Vec<Jet2> {
        self.a.iter().map(|f| f.compose_jets(q)).collect()
    }

    pub fn phi_jet(&self, q: &[Jet2]) -> Jet2 {
        self.phi.compose_jets(q)
    }

    pub fn a_at(&self, q: &[f64]) -> Vec<f64> {
        self.a.iter().map(|f| f.value(q).unwrap_or(f64::NAN)).collect()
    }

    /// B_{ij} = ∂_i A_j − ∂_j A_i at q.
    pub fn field_strength(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let grads: Vec<Vec<f64>> = self
            .a
            .iter()
            .map(|f| f.gradient(q).map(|j| j.gradient().to_vec()).unwrap_or_else(|_| vec![f64::NAN; n]))
            .collect();
        (0..n)
            .map(|i| (0..n).map(|j| grads[j][i] - grads[i][j]).collect())
            .collect()
    }
}
