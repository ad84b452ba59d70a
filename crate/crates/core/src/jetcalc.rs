//! Second-order forward-mode differentiation.
//!
//! A [`Jet2`] carries a value together with its gradient and Hessian with
//! respect to `n` seeded variables. Scalar fields are closures over jets, so a
//! single evaluation yields all derivatives up to order two.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("point {point:?} violates domain guard `{guard}` of field `{field}`")]
    Domain {
        field: String,
        guard: String,
        point: Vec<f64>,
    },
    #[error("field `{field}` expects {expected} variables, got {got}")]
    Arity {
        field: String,
        expected: usize,
        got: usize,
    },
    #[error("field `{field}` produced a non-finite result at {point:?}")]
    NonFinite { field: String, point: Vec<f64> },
}

/// Value, gradient and symmetric Hessian of a scalar at a point.
///
/// A jet with `n == 0` behaves as a constant in mixed arithmetic. Jets built in
/// first-order mode keep an empty Hessian.
#[derive(Clone, PartialEq)]
pub struct Jet2 {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    second: bool,
}

impl fmt::Debug for Jet2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet2")
            .field("value", &self.value)
            .field("gradient", &self.grad)
            .field("hessian", &self.hess)
            .finish()
    }
}

impl Jet2 {
    pub fn constant(value: f64) -> Self {
        Jet2 {
            value,
            grad: Vec::new(),
            hess: Vec::new(),
            second: true,
        }
    }

    /// The `index`-th of `n` independent variables, seeded at `value`.
    pub fn variable(value: f64, index: usize, n: usize, second_order: bool) -> Self {
        let mut grad = vec![0.0; n];
        grad[index] = 1.0;
        Jet2 {
            value,
            grad,
            hess: if second_order { vec![0.0; n * n] } else { Vec::new() },
            second: second_order,
        }
    }

    /// Seeds every coordinate of `x` as an independent variable.
    pub fn seed(x: &[f64], second_order: bool) -> Vec<Jet2> {
        let n = x.len();
        x.iter()
            .enumerate()
            .map(|(i, &xi)| Jet2::variable(xi, i, n, second_order))
            .collect()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn n(&self) -> usize {
        self.grad.len()
    }

    pub fn has_hessian(&self) -> bool {
        self.second && self.hess.len() == self.grad.len() * self.grad.len()
    }

    /// Hessian entry; zero when the jet was built in first-order mode.
    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        if self.hess.is_empty() {
            0.0
        } else {
            self.hess[i * self.n() + j]
        }
    }

    /// Row-major `n × n` Hessian.
    pub fn hessian_rows(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.hessian(i, j)).collect())
            .collect()
    }

    pub fn hessian_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        nalgebra::DMatrix::from_fn(n, n, |i, j| self.hessian(i, j))
    }

    fn is_const(&self) -> bool {
        self.grad.is_empty()
    }

    /// Applies a scalar function given its value and first two derivatives.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let n = self.n();
        let grad: Vec<f64> = self.grad.iter().map(|g| f1 * g).collect();
        let hess = if self.has_hessian() {
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = f1 * self.hess[i * n + j] + f2 * self.grad[i] * self.grad[j];
                    h[i * n + j] = v;
                    h[j * n + i] = v;
                }
            }
            h
        } else {
            Vec::new()
        };
        Jet2 {
            value: f0,
            grad,
            hess,
            second: self.second,
        }
    }

    /// Lifts a local expansion of `g` at the input values through the input jets.
    ///
    /// `local_grad` and `local_hess` are the derivatives of `g` with respect to
    /// its own arguments. `local_hess` may be `None` when the inputs carry no
    /// second-order information.
    pub fn compose(
        inputs: &[Jet2],
        local_value: f64,
        local_grad: &[f64],
        local_hess: Option<&[f64]>,
    ) -> Jet2 {
        let k = inputs.len();
        let n = inputs.iter().map(Jet2::n).max().unwrap_or(0);
        let second = inputs
            .iter()
            .filter(|x| !x.is_const())
            .all(|x| x.has_hessian());
        let mut grad = vec![0.0; n];
        for (a, x) in inputs.iter().enumerate() {
            for (i, g) in x.grad.iter().enumerate() {
                grad[i] += local_grad[a] * g;
            }
        }
        let hess = if second && n > 0 {
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let mut v = 0.0;
                    for (a, x) in inputs.iter().enumerate() {
                        if !x.is_const() {
                            v += local_grad[a] * x.hess[i * n + j];
                        }
                    }
                    if let Some(lh) = local_hess {
                        for a in 0..k {
                            let ga = inputs[a].grad.get(i).copied().unwrap_or(0.0);
                            if ga == 0.0 {
                                continue;
                            }
                            for b in 0..k {
                                let gbj = inputs[b].grad.get(j).copied().unwrap_or(0.0);
                                v += lh[a * k + b] * ga * gbj;
                            }
                        }
                    }
                    h[i * n + j] = v;
                    h[j * n + i] = v;
                }
            }
            h
        } else {
            Vec::new()
        };
        Jet2 {
            value: local_value,
            grad,
            hess,
            second,
        }
    }

    pub fn sqrt(&self) -> Jet2 {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }

    pub fn sin(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Jet2 {
        let x = self.value;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn recip(&self) -> Jet2 {
        let x = self.value;
        let r = 1.0 / x;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(&self, k: i32) -> Jet2 {
        let x = self.value;
        match k {
            0 => self.chain(1.0, 0.0, 0.0),
            1 => self.clone(),
            _ => {
                let kf = k as f64;
                self.chain(
                    x.powi(k),
                    kf * x.powi(k - 1),
                    kf * (kf - 1.0) * x.powi(k - 2),
                )
            }
        }
    }

    pub fn square(&self) -> Jet2 {
        self * self
    }

    fn binary(a: &Jet2, b: &Jet2, value: f64, da: f64, db: f64, dab: f64) -> Jet2 {
        // value = f(a, b) with ∂f/∂a = da, ∂f/∂b = db, ∂²f/∂a∂b = dab and
        // vanishing pure second derivatives (true for +, −, ×).
        if b.is_const() {
            return a.chain(value, da, 0.0);
        }
        if a.is_const() {
            return b.chain(value, db, 0.0);
        }
        let n = a.n();
        debug_assert_eq!(n, b.n(), "jet dimension mismatch");
        let grad: Vec<f64> = (0..n).map(|i| da * a.grad[i] + db * b.grad[i]).collect();
        let second = a.has_hessian() && b.has_hessian();
        let hess = if second {
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = da * a.hess[i * n + j]
                        + db * b.hess[i * n + j]
                        + dab * (a.grad[i] * b.grad[j] + b.grad[i] * a.grad[j]);
                    h[i * n + j] = v;
                    h[j * n + i] = v;
                }
            }
            h
        } else {
            Vec::new()
        };
        Jet2 {
            value,
            grad,
            hess,
            second,
        }
    }
}

impl From<f64> for Jet2 {
    fn from(c: f64) -> Self {
        Jet2::constant(c)
    }
}

fn add_jj(a: &Jet2, b: &Jet2) -> Jet2 {
    Jet2::binary(a, b, a.value + b.value, 1.0, 1.0, 0.0)
}

fn sub_jj(a: &Jet2, b: &Jet2) -> Jet2 {
    Jet2::binary(a, b, a.value - b.value, 1.0, -1.0, 0.0)
}

fn mul_jj(a: &Jet2, b: &Jet2) -> Jet2 {
    Jet2::binary(a, b, a.value * b.value, b.value, a.value, 1.0)
}

fn div_jj(a: &Jet2, b: &Jet2) -> Jet2 {
    mul_jj(a, &b.recip())
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $f:ident) => {
        impl $trait<&Jet2> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                $f(self, rhs)
            }
        }
        impl $trait<Jet2> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                $f(&self, &rhs)
            }
        }
        impl $trait<&Jet2> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                $f(&self, rhs)
            }
        }
        impl $trait<Jet2> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                $f(self, &rhs)
            }
        }
        impl $trait<f64> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: f64) -> Jet2 {
                $f(self, &Jet2::constant(rhs))
            }
        }
        impl $trait<f64> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: f64) -> Jet2 {
                $f(&self, &Jet2::constant(rhs))
            }
        }
        impl $trait<&Jet2> for f64 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                $f(&Jet2::constant(self), rhs)
            }
        }
        impl $trait<Jet2> for f64 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                $f(&Jet2::constant(self), &rhs)
            }
        }
    };
}

jet_binop!(Add, add, add_jj);
jet_binop!(Sub, sub, sub_jj);
jet_binop!(Mul, mul, mul_jj);
jet_binop!(Div, div, div_jj);

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.chain(-self.value, -1.0, 0.0)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        -&self
    }
}

/// Sum of jets; the empty sum is the constant zero.
pub fn sum<I: IntoIterator<Item = Jet2>>(terms: I) -> Jet2 {
    terms
        .into_iter()
        .fold(Jet2::constant(0.0), |acc, t| acc + t)
}

/// Euclidean dot product of two jet vectors.
pub fn dot(a: &[Jet2], b: &[Jet2]) -> Jet2 {
    sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Dot product of a jet vector with a constant vector.
pub fn dot_const(a: &[Jet2], c: &[f64]) -> Jet2 {
    sum(a.iter().zip(c).map(|(x, &y)| x * y))
}

type JetFn = dyn Fn(&[Jet2]) -> Jet2 + Send + Sync;
type GuardFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Local expansion of a field at a plain point: value, gradient and optional Hessian.
pub struct LocalJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<Vec<f64>>,
}

type LocalFn = dyn Fn(&[f64], bool) -> Option<LocalJet> + Send + Sync;

#[derive(Clone)]
struct Guard {
    name: String,
    pred: Arc<GuardFn>,
}

/// A twice-differentiable scalar field on `R^arity` with an optional domain guard.
#[derive(Clone)]
pub struct ScalarField {
    arity: usize,
    name: String,
    eval: Arc<JetFn>,
    guard: Option<Guard>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("guard", &self.guard.as_ref().map(|g| g.name.as_str()))
            .finish()
    }
}

impl ScalarField {
    pub fn new<F>(name: impl Into<String>, arity: usize, f: F) -> Self
    where
        F: Fn(&[Jet2]) -> Jet2 + Send + Sync + 'static,
    {
        ScalarField {
            arity,
            name: name.into(),
            eval: Arc::new(f),
            guard: None,
        }
    }

    /// A field whose expansion is computed directly at plain points and then
    /// composed with the caller's input jets by the chain rule.
    ///
    /// The provider receives the point and whether a Hessian is required; it
    /// returns `None` where the field is undefined.
    pub fn from_local<F>(name: impl Into<String>, arity: usize, f: F) -> Self
    where
        F: Fn(&[f64], bool) -> Option<LocalJet> + Send + Sync + 'static,
    {
        let local: Arc<LocalFn> = Arc::new(f);
        ScalarField::new(name, arity, move |x: &[Jet2]| {
            let x0: Vec<f64> = x.iter().map(Jet2::value).collect();
            let need_second = x.iter().any(|j| j.has_hessian() && j.n() > 0);
            match local(&x0, need_second) {
                Some(l) => Jet2::compose(x, l.value, &l.gradient, l.hessian.as_deref()),
                None => Jet2::constant(f64::NAN),
            }
        })
    }

    pub fn constant(name: impl Into<String>, arity: usize, c: f64) -> Self {
        ScalarField::new(name, arity, move |_| Jet2::constant(c))
    }

    /// Attaches (or conjoins) a named domain predicate.
    pub fn with_guard<G>(mut self, name: impl Into<String>, pred: G) -> Self
    where
        G: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        let name = name.into();
        self.guard = Some(match self.guard.take() {
            None => Guard {
                name,
                pred: Arc::new(pred),
            },
            Some(old) => {
                let p0 = old.pred.clone();
                Guard {
                    name: format!("{} && {}", old.name, name),
                    pred: Arc::new(move |x: &[f64]| p0(x) && pred(x)),
                }
            }
        });
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn guard_name(&self) -> Option<&str> {
        self.guard.as_ref().map(|g| g.name.as_str())
    }

    pub fn admits(&self, x: &[f64]) -> bool {
        x.len() == self.arity && self.guard.as_ref().map_or(true, |g| (g.pred)(x))
    }

    fn check(&self, x: &[f64]) -> Result<(), JetError> {
        if x.len() != self.arity {
            return Err(JetError::Arity {
                field: self.name.clone(),
                expected: self.arity,
                got: x.len(),
            });
        }
        if let Some(g) = &self.guard {
            if !(g.pred)(x) {
                return Err(JetError::Domain {
                    field: self.name.clone(),
                    guard: g.name.clone(),
                    point: x.to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Evaluates on jets without a guard check; used for composition.
    pub fn eval_jets(&self, x: &[Jet2]) -> Jet2 {
        (self.eval)(x)
    }

    /// Guarded composition: a NaN jet when the inner values leave the domain.
    pub fn compose_jets(&self, x: &[Jet2]) -> Jet2 {
        let x0: Vec<f64> = x.iter().map(Jet2::value).collect();
        if self.admits(&x0) {
            (self.eval)(x)
        } else {
            Jet2::constant(f64::NAN)
        }
    }

    fn finished(&self, x: &[f64], j: Jet2) -> Result<Jet2, JetError> {
        let finite = j.value.is_finite()
            && j.grad.iter().all(|v| v.is_finite())
            && j.hess.iter().all(|v| v.is_finite());
        if finite {
            Ok(j)
        } else {
            Err(JetError::NonFinite {
                field: self.name.clone(),
                point: x.to_vec(),
            })
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, JetError> {
        self.check(x)?;
        let consts: Vec<Jet2> = x.iter().map(|&v| Jet2::constant(v)).collect();
        let v = (self.eval)(&consts).value;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(JetError::NonFinite {
                field: self.name.clone(),
                point: x.to_vec(),
            })
        }
    }

    /// Value and gradient (first-order jet).
    pub fn gradient(&self, x: &[f64]) -> Result<Jet2, JetError> {
        self.check(x)?;
        let j = (self.eval)(&Jet2::seed(x, false));
        self.finished(x, pad(j, x.len(), false))
    }

    /// Value, gradient and Hessian.
    pub fn jet(&self, x: &[f64]) -> Result<Jet2, JetError> {
        jet(self, x)
    }

    /// Jet with respect to the listed coordinates only; the rest are held fixed.
    pub fn jet_wrt(&self, x: &[f64], vars: &[usize], second_order: bool) -> Result<Jet2, JetError> {
        self.check(x)?;
        let k = vars.len();
        let mut inputs: Vec<Jet2> = x.iter().map(|&v| Jet2::constant(v)).collect();
        for (slot, &i) in vars.iter().enumerate() {
            inputs[i] = Jet2::variable(x[i], slot, k, second_order);
        }
        let j = (self.eval)(&inputs);
        self.finished(x, pad(j, k, second_order))
    }
}

fn pad(j: Jet2, n: usize, second: bool) -> Jet2 {
    // A field that ignores its inputs returns a constant jet.
    if j.n() == n || j.n() != 0 {
        j
    } else {
        Jet2 {
            value: j.value,
            grad: vec![0.0; n],
            hess: if second { vec![0.0; n * n] } else { Vec::new() },
            second,
        }
    }
}

/// Exact value, gradient and Hessian of `f` at `x`.
pub fn jet(f: &ScalarField, x: &[f64]) -> Result<Jet2, JetError> {
    f.check(x)?;
    let j = (f.eval)(&Jet2::seed(x, true));
    f.finished(x, pad(j, x.len(), true))
}

/// Central-difference gradient and Hessian with a single step `h`.
pub fn fd_jet(f: &ScalarField, x: &[f64], h: f64) -> Result<Jet2, JetError> {
    fd_jet_steps(f, x, h, h)
}

/// Central differences with the default steps (1e-5 gradient, 1e-4 Hessian).
pub fn fd_jet_default(f: &ScalarField, x: &[f64]) -> Result<Jet2, JetError> {
    fd_jet_steps(f, x, 1e-5, 1e-4)
}

pub fn fd_jet_steps(f: &ScalarField, x: &[f64], hg: f64, hh: f64) -> Result<Jet2, JetError> {
    let n = x.len();
    let eval = |d: &[(usize, f64)]| -> Result<f64, JetError> {
        let mut y = x.to_vec();
        for &(i, s) in d {
            y[i] += s;
        }
        f.value(&y)
    };
    let f0 = eval(&[])?;
    let mut grad = vec![0.0; n];
    for (i, g) in grad.iter_mut().enumerate() {
        *g = (eval(&[(i, hg)])? - eval(&[(i, -hg)])?) / (2.0 * hg);
    }
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        let d = (eval(&[(i, hh)])? - 2.0 * f0 + eval(&[(i, -hh)])?) / (hh * hh);
        hess[i * n + i] = d;
        for j in (i + 1)..n {
            let v = (eval(&[(i, hh), (j, hh)])? - eval(&[(i, hh), (j, -hh)])?
                - eval(&[(i, -hh), (j, hh)])?
                + eval(&[(i, -hh), (j, -hh)])?)
                / (4.0 * hh * hh);
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    Ok(Jet2 {
        value: f0,
        grad,
        hess,
        second: true,
    })
}

/// A sparse multivariate polynomial, used for random test fields and gauge functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub vars: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(vars: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, e)| e.len() == vars));
        Polynomial { vars, terms }
    }

    /// Random polynomial with `n_terms` monomials of total degree at most `degree`
    /// and coefficients uniform in [-1, 1].
    pub fn random<R: Rng>(rng: &mut R, vars: usize, degree: u32, n_terms: usize) -> Self {
        let terms = (0..n_terms)
            .map(|_| {
                let mut e = vec![0u32; vars];
                let d = rng.gen_range(0..=degree);
                for _ in 0..d {
                    e[rng.gen_range(0..vars)] += 1;
                }
                (rng.gen_range(-1.0..1.0), e)
            })
            .collect();
        Polynomial { vars, terms }
    }

    pub fn derivative(&self, i: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[i] > 0)
            .map(|(c, e)| {
                let mut e2 = e.clone();
                e2[i] -= 1;
                (c * e[i] as f64, e2)
            })
            .collect();
        Polynomial {
            vars: self.vars,
            terms,
        }
    }

    pub fn eval_jets(&self, x: &[Jet2]) -> Jet2 {
        sum(self.terms.iter().map(|(c, e)| {
            let mut t = Jet2::constant(*c);
            for (k, &p) in e.iter().enumerate() {
                if p > 0 {
                    t = t * x[k].powi(p as i32);
                }
            }
            t
        }))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&p, &xi)| xi.powi(p as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn to_field(&self, name: impl Into<String>) -> ScalarField {
        let p = self.clone();
        ScalarField::new(name, self.vars, move |x| p.eval_jets(x))
    }
}
