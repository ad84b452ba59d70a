//! Metrics on configuration space and their Christoffel symbols.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::SystemError;
use crate::jetcalc::{sum, Jet2};

type MetricFn = dyn Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signature {
    Euclidean,
    /// (+, −, −, −)
    Minkowski,
    User,
}

#[derive(Clone)]
enum MetricKind {
    Constant(DMatrix<f64>),
    Field(Arc<MetricFn>),
}

/// Symmetric metric g(q), either constant or a field of row-major components.
#[derive(Clone)]
pub struct MetricSpec {
    dim: usize,
    pub signature: Signature,
    kind: MetricKind,
}

impl fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricSpec")
            .field("dim", &self.dim)
            .field("signature", &self.signature)
            .field("constant", &matches!(self.kind, MetricKind::Constant(_)))
            .finish()
    }
}

impl MetricSpec {
    pub fn euclidean(n: usize) -> Self {
        MetricSpec {
            dim: n,
            signature: Signature::Euclidean,
            kind: MetricKind::Constant(DMatrix::identity(n, n)),
        }
    }

    pub fn minkowski() -> Self {
        MetricSpec {
            dim: 4,
            signature: Signature::Minkowski,
            kind: MetricKind::Constant(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                1.0, -1.0, -1.0, -1.0,
            ]))),
        }
    }

    pub fn constant(g: DMatrix<f64>, signature: Signature) -> Result<Self, SystemError> {
        if !g.is_square() || (&g - g.transpose()).amax() > 0.0 {
            return Err(SystemError::Param("metric must be square and symmetric".into()));
        }
        Ok(MetricSpec {
            dim: g.nrows(),
            signature,
            kind: MetricKind::Constant(g),
        })
    }

    /// A position-dependent metric; `f` returns the n×n components row-major.
    pub fn field<F>(dim: usize, signature: Signature, f: F) -> Self
    where
        F: Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync + 'static,
    {
        MetricSpec {
            dim,
            signature,
            kind: MetricKind::Field(Arc::new(f)),
        }
    }

    /// diag(1, r²) in polar coordinates (r, θ) on the plane.
    pub fn polar_plane() -> Self {
        MetricSpec::field(2, Signature::Euclidean, |q| {
            vec![Jet2::constant(1.0), Jet2::constant(0.0), Jet2::constant(0.0), &q[0] * &q[0]]
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, MetricKind::Constant(_))
    }

    pub fn components(&self, q: &[Jet2]) -> Vec<Jet2> {
        match &self.kind {
            MetricKind::Constant(g) => (0..self.dim * self.dim)
                .map(|k| Jet2::constant(g[(k / self.dim, k % self.dim)]))
                .collect(),
            MetricKind::Field(f) => f(q),
        }
    }

    pub fn g(&self, q: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            MetricKind::Constant(g) => g.clone(),
            MetricKind::Field(f) => {
                let jets: Vec<Jet2> = q.iter().map(|&x| Jet2::constant(x)).collect();
                let c = f(&jets);
                DMatrix::from_fn(self.dim, self.dim, |i, j| c[i * self.dim + j].value())
            }
        }
    }

    pub fn g_inv(&self, q: &[f64]) -> Result<DMatrix<f64>, SystemError> {
        self.g(q).try_inverse().ok_or(SystemError::SingularMetric)
    }

    /// g(q)(v, v).
    pub fn quad(&self, q: &[Jet2], v: &[Jet2]) -> Jet2 {
        let n = self.dim;
        match &self.kind {
            MetricKind::Constant(g) => sum((0..n).flat_map(|i| {
                (0..n).filter(move |&j| g[(i, j)] != 0.0).map(move |j| &v[i] * &v[j] * g[(i, j)])
            })),
            MetricKind::Field(f) => {
                let c = f(q);
                sum((0..n).flat_map(|i| {
                    let c = &c;
                    (0..n).map(move |j| &c[i * n + j] * &v[i] * &v[j])
                }))
            }
        }
    }

    /// g(q)⁻¹(p, p).
    pub fn inv_quad(&self, q: &[Jet2], p: &[Jet2]) -> Jet2 {
        let n = self.dim;
        let inv: Vec<Jet2> = match &self.kind {
            MetricKind::Constant(g) => match g.clone().try_inverse() {
                Some(gi) => (0..n * n).map(|k| Jet2::constant(gi[(k / n, k % n)])).collect(),
                None => return Jet2::constant(f64::NAN),
            },
            MetricKind::Field(f) => match invert_jets(&f(q), n) {
                Some(gi) => gi,
                None => return Jet2::constant(f64::NAN),
            },
        };
        sum((0..n).flat_map(|i| {
            let inv = &inv;
            (0..n).map(move |j| &inv[i * n + j] * &p[i] * &p[j])
        }))
    }
}

/// Gauss–Jordan inverse of a jet matrix with partial pivoting on values.
fn invert_jets(a: &[Jet2], n: usize) -> Option<Vec<Jet2>> {
    let mut m: Vec<Vec<Jet2>> = (0..n)
        .map(|i| {
            let mut row: Vec<Jet2> = a[i * n..(i + 1) * n].to_vec();
            row.extend((0..n).map(|j| Jet2::constant(if i == j { 1.0 } else { 0.0 })));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].value().abs().total_cmp(&m[j][col].value().abs()))?;
        if m[piv][col].value().abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        let inv = m[col][col].recip();
        m[col] = m[col].iter().map(|x| x * &inv).collect();
        for r in 0..n {
            if r != col && m[r][col].value() != 0.0 {
                let f = m[r][col].clone();
                let pivot_row = m[col].clone();
                m[r] = m[r].iter().zip(&pivot_row).map(|(x, y)| x - &(&f * y)).collect();
            }
        }
    }
    Some(m.into_iter().flat_map(|row| row.into_iter().skip(n)).collect())
}

/// Γ^j_{kl}, stored with index order (j, k, l).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Christoffel {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        self.data[(j * self.dim + k) * self.dim + l]
    }
}

/// ½ g^{ji}(∂_k g_{li} + ∂_l g_{ki} − ∂_i g_{kl}) with derivatives from jets.
pub fn christoffel(metric: &MetricSpec, q: &[f64]) -> Result<Christoffel, SystemError> {
    let n = metric.dim();
    if q.len() != n {
        return Err(SystemError::Param(format!("point has dimension {}, metric {n}", q.len())));
    }
    let jets = Jet2::seed(q, false);
    let comps = metric.components(&jets);
    let dg = |i: usize, j: usize, k: usize| comps[i * n + j].gradient().get(k).copied().unwrap_or(0.0);
    let ginv = metric.g_inv(q)?;
    let mut data = vec![0.0; n * n * n];
    for j in 0..n {
        for k in 0..n {
            for l in k..n {
                let v: f64 = 0.5
                    * (0..n)
                        .map(|i| ginv[(j, i)] * (dg(l, i, k) + dg(k, i, l) - dg(k, l, i)))
                        .sum::<f64>();
                data[(j * n + k) * n + l] = v;
                data[(j * n + l) * n + k] = v;
            }
        }
    }
    Ok(Christoffel { dim: n, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::ScalarField;

    #[test]
    fn flat_is_zero() {
        let c = christoffel(&MetricSpec::minkowski(), &[0.3, 1.0, -2.0, 0.5]).unwrap();
        assert!(c.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn polar_symbols() {
        let c = christoffel(&MetricSpec::polar_plane(), &[2.0, 0.7]).unwrap();
        assert_eq!(c.get(0, 1, 1), -2.0);
        assert_eq!(c.get(1, 0, 1), 0.5);
        assert_eq!(c.get(1, 1, 0), c.get(1, 0, 1));
        // fd oracle on the metric
        let h = 1e-6;
        let g = |r: f64| r * r;
        let fd_gamma_r_tt = -0.5 * (g(2.0 + h) - g(2.0 - h)) / (2.0 * h);
        assert!((c.get(0, 1, 1) - fd_gamma_r_tt).abs() < 1e-8);
    }

    #[test]
    fn singular_metric() {
        let m = MetricSpec::field(2, Signature::User, |q| {
            vec![q[0].clone(), Jet2::constant(0.0), Jet2::constant(0.0), Jet2::constant(1.0)]
        });
        assert!(matches!(christoffel(&m, &[0.0, 1.0]), Err(SystemError::SingularMetric)));
    }

    #[test]
    fn jet_inverse_matches() {
        let m = MetricSpec::polar_plane();
        let f = ScalarField::new("g⁻¹(p,p)", 4, move |x| m.inv_quad(&x[..2], &x[2..]));
        let x = [1.5, 0.2, 0.3, -0.8];
        let j = f.jet(&x).unwrap();
        let expect = 0.3 * 0.3 + 0.64 / 2.25;
        assert!((j.value() - expect).abs() < 1e-14);
        // ∂_r (p_θ²/r²) = −2 p_θ²/r³
        assert!((j.gradient()[0] + 2.0 * 0.64 / 3.375).abs() < 1e-13);
    }
}
