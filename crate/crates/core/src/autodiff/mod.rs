//! Automatic differentiation.
//!
//! Two complementary engines live here:
//!
//! * [`Dual`], a forward-mode number with a fixed count of tangent directions.
//!   Duals nest (`Dual<Dual<f64, 2>, 2>`) to produce exact second derivatives.
//! * [`Tape`] / [`Var`], a reverse-mode recorder for gradients of a scalar with
//!   respect to many parameters.
//!
//! Both implement [`Scalar`], so generic code (network forward passes,
//! constitutive laws, residuals) can be evaluated on plain `f64`, on duals, or
//! on tape variables, and the engines compose: a `Dual<Dual<Var, 2>, 2>`
//! carries spatial second derivatives whose dependence on the parameters is
//! recorded on the tape.

mod dual;
pub mod linalg;
mod tape;

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use dual::Dual;
pub use tape::{Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    /// A primitive was evaluated outside its domain.
    #[error("domain error in `{primitive}` at argument {value:e}")]
    Domain { primitive: &'static str, value: f64 },
    /// A loss term or intermediate turned out NaN or infinite.
    #[error("non-finite value in {term}")]
    NonFinite { term: String },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
}

/// A differentiable real number.
///
/// Arithmetic with `f64` on the right-hand side is supported directly. The
/// plain operators never fail; the `checked_*` variants report domain errors
/// on the primal value instead of silently producing NaN or infinity.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant (zero derivative) with the given value.
    fn cst(value: f64) -> Self;

    /// The primal value.
    fn value(&self) -> f64;

    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }

    fn square(self) -> Self {
        self * self
    }

    fn checked_div(self, rhs: Self) -> Result<Self, AdError> {
        if rhs.value() == 0.0 {
            return Err(AdError::Domain { primitive: "div", value: 0.0 });
        }
        Ok(self / rhs)
    }

    fn checked_ln(self) -> Result<Self, AdError> {
        let v = self.value();
        if v <= 0.0 || v.is_nan() {
            return Err(AdError::Domain { primitive: "ln", value: v });
        }
        Ok(self.ln())
    }

    fn checked_sqrt(self) -> Result<Self, AdError> {
        let v = self.value();
        // the derivative of sqrt is unbounded at zero
        if v <= 0.0 || v.is_nan() {
            return Err(AdError::Domain { primitive: "sqrt", value: v });
        }
        Ok(self.sqrt())
    }

    /// `self^p`; the base must be positive for non-integer exponents.
    fn checked_powf(self, p: f64) -> Result<Self, AdError> {
        let v = self.value();
        if v < 0.0 && p.fract() != 0.0 || v == 0.0 && p < 1.0 {
            return Err(AdError::Domain { primitive: "powf", value: v });
        }
        Ok(self.powf(p))
    }
}

impl Scalar for f64 {
    fn cst(value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Dense Jacobian, row-major: `rows` outputs by `cols` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Jacobian {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

type D1 = Dual<f64, 1>;
type D2 = Dual<Dual<f64, 1>, 1>;

/// Jacobian of `f` at `x` by forward mode, one sweep per input.
pub fn grad_input<F>(f: F, x: &[f64]) -> Result<Jacobian, AdError>
where
    F: Fn(&[D1]) -> Result<Vec<D1>, AdError>,
{
    let cols = x.len();
    let mut columns = Vec::with_capacity(cols);
    let mut rows = 0;
    for j in 0..cols {
        let seeded: Vec<D1> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| if i == j { Dual::variable(xi, 0) } else { Dual::cst(xi) })
            .collect();
        let out = f(&seeded)?;
        if j > 0 && out.len() != rows {
            return Err(AdError::Shape { expected: rows, got: out.len() });
        }
        rows = out.len();
        columns.push(out.iter().map(|o| o.eps[0]).collect::<Vec<_>>());
    }
    let mut data = vec![0.0; rows * cols];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            data[i * cols + j] = *v;
        }
    }
    Ok(Jacobian { rows, cols, data })
}

/// Hessian of a scalar function by nested forward mode.
///
/// Each entry is an independent forward-over-forward sweep, so symmetry of the
/// result is a property of the function, not something this routine enforces.
pub fn hessian_input<F>(f: F, x: &[f64]) -> Result<Vec<Vec<f64>>, AdError>
where
    F: Fn(&[D2]) -> Result<D2, AdError>,
{
    let n = x.len();
    let mut h = vec![vec![0.0; n]; n];
    for (i, row) in h.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let seeded: Vec<D2> = x
                .iter()
                .enumerate()
                .map(|(k, &xk)| {
                    let inner = if k == j { Dual::variable(xk, 0) } else { Dual::cst(xk) };
                    let outer_eps = if k == i { Dual::cst(1.0) } else { Dual::cst(0.0) };
                    Dual { re: inner, eps: [outer_eps] }
                })
                .collect();
            *entry = f(&seeded)?.eps[0].eps[0];
        }
    }
    Ok(h)
}

/// Value and gradient of a scalar loss with respect to the parameter vector.
///
/// The closure receives the parameters as tape variables; it may lift them into
/// duals to take spatial derivatives before reducing to the loss.
pub fn grad_params<F>(loss: F, theta: &[f64]) -> Result<(f64, Vec<f64>), AdError>
where
    F: for<'t> Fn(&[Var<'t>]) -> Result<Var<'t>, AdError>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = theta.iter().map(|&t| tape.var(t)).collect();
    let out = loss(&vars)?;
    if !out.value().is_finite() {
        return Err(AdError::NonFinite { term: "loss".into() });
    }
    let adjoints = tape.gradient(out);
    let grad = vars.iter().map(|v| v.adjoint_in(&adjoints)).collect::<Vec<_>>();
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(AdError::NonFinite { term: format!("gradient entry {i}") });
    }
    Ok((out.value(), grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn square_derivative() {
        let j = grad_input(|x| Ok(vec![x[0] * x[0]]), &[3.0]).unwrap();
        assert_eq!(j.get(0, 0), 6.0);
    }

    #[test]
    fn constant_has_zero_derivative() {
        let j = grad_input(|_x| Ok(vec![D1::cst(4.2)]), &[1.0, 2.0]).unwrap();
        assert!(j.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilinear_mixed_second_derivative() {
        for p in [[0.0, 0.0], [1.5, -2.0], [-3.0, 7.0]] {
            let h = hessian_input(|x| Ok(x[0] * x[1]), &p).unwrap();
            assert_eq!(h[0][1], 1.0);
            assert_eq!(h[1][0], 1.0);
            assert_eq!(h[0][0], 0.0);
        }
    }

    #[test]
    fn tanh_matches_central_difference() {
        let x = 0.7;
        let ad = grad_input(|v| Ok(vec![v[0].tanh()]), &[x]).unwrap().get(0, 0);
        let fd = central_diff(f64::tanh, x, 1e-5);
        assert!(((ad - fd) / ad).abs() < 1e-6, "{ad} vs {fd}");
    }

    #[test]
    fn nested_tanh_second_derivative() {
        for &x in &[-1.3, -0.2, 0.0, 0.4, 2.1] {
            let h = hessian_input(|v| Ok(v[0].tanh()), &[x]).unwrap()[0][0];
            let t = x.tanh();
            let exact = -2.0 * t * (1.0 - t * t);
            assert!((h - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn domain_errors_name_the_primitive() {
        let err = grad_input(|v| Ok(vec![v[0].checked_ln()?]), &[-1.0]).unwrap_err();
        assert!(matches!(err, AdError::Domain { primitive: "ln", .. }));
        let err = grad_input(|v| Ok(vec![v[0].checked_sqrt()?]), &[0.0]).unwrap_err();
        assert!(matches!(err, AdError::Domain { primitive: "sqrt", .. }));
        let err =
            grad_input(|v| Ok(vec![D1::cst(1.0).checked_div(v[0])?]), &[0.0]).unwrap_err();
        assert!(matches!(err, AdError::Domain { primitive: "div", .. }));
    }

    #[test]
    fn half_squared_norm_gradient_is_identity() {
        let theta = [0.5, -1.25, 3.0, 0.0];
        let (v, g) = grad_params(
            |t| {
                let mut acc = Var::cst(0.0);
                for &ti in t {
                    acc = acc + ti * ti * 0.5;
                }
                Ok(acc)
            },
            &theta,
        )
        .unwrap();
        assert!((v - 0.5 * theta.iter().map(|t| t * t).sum::<f64>()).abs() < 1e-15);
        assert_eq!(g, theta.to_vec());
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let err = grad_params(|t| Ok(t[0] / 0.0), &[1.0]).unwrap_err();
        assert!(matches!(err, AdError::NonFinite { .. }));
    }
}
