use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

/// Forward-mode dual number with `N` tangent directions over an inner scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T, const N: usize> {
    pub re: T,
    pub eps: [T; N],
}

impl<T: Scalar, const N: usize> Dual<T, N> {
    pub fn new(re: T, eps: [T; N]) -> Self {
        Self { re, eps }
    }

    /// Lift an inner value as a constant.
    pub fn lift(re: T) -> Self {
        Self { re, eps: [T::zero(); N] }
    }

    /// A variable seeded along direction `dir`.
    pub fn variable(re: f64, dir: usize) -> Self {
        Self::lifted_variable(T::cst(re), dir)
    }

    pub fn lifted_variable(re: T, dir: usize) -> Self {
        let mut eps = [T::zero(); N];
        eps[dir] = T::cst(1.0);
        Self { re, eps }
    }

    #[inline]
    fn chain(self, f: T, df: T) -> Self {
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e = *e * df;
        }
        Self { re: f, eps }
    }
}

impl<T: Scalar, const N: usize> Scalar for Dual<T, N> {
    fn cst(value: f64) -> Self {
        Self::lift(T::cst(value))
    }

    fn value(&self) -> f64 {
        self.re.value()
    }

    fn tanh(self) -> Self {
        let t = self.re.tanh();
        let dt = -(t * t) + 1.0;
        self.chain(t, dt)
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Self {
        let d = self.re.recip();
        self.chain(self.re.ln(), d)
    }

    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        let d = s.recip() * 0.5;
        self.chain(s, d)
    }

    fn powf(self, p: f64) -> Self {
        let f = self.re.powf(p);
        let d = self.re.powf(p - 1.0) * p;
        self.chain(f, d)
    }

    fn powi(self, n: i32) -> Self {
        let f = self.re.powi(n);
        let d = if n == 0 { T::zero() } else { self.re.powi(n - 1) * n as f64 };
        self.chain(f, d)
    }
}

impl<T: Scalar, const N: usize> Add for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.re = self.re + rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps) {
            *a = *a + b;
        }
        self
    }
}

impl<T: Scalar, const N: usize> Sub for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.re = self.re - rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps) {
            *a = *a - b;
        }
        self
    }
}

impl<T: Scalar, const N: usize> Mul for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (a, b) in eps.iter_mut().zip(rhs.eps) {
            *a = *a * rhs.re + self.re * b;
        }
        Self { re: self.re * rhs.re, eps }
    }
}

impl<T: Scalar, const N: usize> Div for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.re.recip();
        let q = self.re * inv;
        let mut eps = self.eps;
        for (a, b) in eps.iter_mut().zip(rhs.eps) {
            *a = (*a - q * b) * inv;
        }
        Self { re: q, eps }
    }
}

impl<T: Scalar, const N: usize> Neg for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.re = -self.re;
        for a in self.eps.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl<T: Scalar, const N: usize> Add<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.re = self.re + rhs;
        self
    }
}

impl<T: Scalar, const N: usize> Sub<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.re = self.re - rhs;
        self
    }
}

impl<T: Scalar, const N: usize> Mul<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self.re = self.re * rhs;
        for a in self.eps.iter_mut() {
            *a = *a * rhs;
        }
        self
    }
}

impl<T: Scalar, const N: usize> Div<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type D = Dual<f64, 2>;

    #[test]
    fn product_and_quotient_rules() {
        let x = D::variable(2.0, 0);
        let y = D::variable(5.0, 1);
        let p = x * y;
        assert_eq!(p.eps, [5.0, 2.0]);
        let q = x / y;
        assert!((q.eps[0] - 0.2).abs() < 1e-15);
        assert!((q.eps[1] + 2.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn linearity() {
        let x = D::variable(0.3, 0);
        let f = |x: D| x.tanh();
        let g = |x: D| x.exp();
        let combo = f(x) * 2.5 + g(x) * -1.5;
        let expected = f(x).eps[0] * 2.5 - 1.5 * g(x).eps[0];
        assert!((combo.eps[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn powi_zero_exponent_has_zero_slope() {
        let x = D::variable(3.0, 0);
        assert_eq!(x.powi(0).eps, [0.0, 0.0]);
        assert_eq!(x.powi(3).eps[0], 27.0);
    }
}
