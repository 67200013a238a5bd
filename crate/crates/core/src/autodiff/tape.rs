use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Wengert list for reverse-mode differentiation.
///
/// A tape is owned by one evaluation; variables borrow it, so two concurrent
/// evaluations cannot share a recorder.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { nodes: RefCell::new(Vec::with_capacity(n)) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Register an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(Node { parents: [NO_PARENT; 2], partials: [0.0; 2] });
        Var { tape: Some(self), index, value }
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        (nodes.len() - 1) as u32
    }

    /// Adjoints of every recorded node with respect to `output`.
    pub fn gradient(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        if output.index == NO_PARENT {
            return adj;
        }
        adj[output.index as usize] = 1.0;
        for i in (0..=output.index as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NO_PARENT {
                    adj[p as usize] += a * node.partials[k];
                }
            }
        }
        adj
    }
}

/// A scalar recorded on a [`Tape`]. Constants carry no tape reference.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    index: u32,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == NO_PARENT {
            write!(f, "Var(const {})", self.value)
        } else {
            write!(f, "Var(#{} = {})", self.index, self.value)
        }
    }
}

impl<'t> Var<'t> {
    /// Adjoint of this variable inside a vector returned by [`Tape::gradient`].
    pub fn adjoint_in(&self, adjoints: &[f64]) -> f64 {
        if self.index == NO_PARENT {
            0.0
        } else {
            adjoints[self.index as usize]
        }
    }

    fn unary(self, value: f64, partial: f64) -> Self {
        match self.tape {
            Some(t) if self.index != NO_PARENT => {
                let index = t.push(Node { parents: [self.index, NO_PARENT], partials: [partial, 0.0] });
                Var { tape: Some(t), index, value }
            }
            _ => Var { tape: None, index: NO_PARENT, value },
        }
    }

    fn binary(self, rhs: Self, value: f64, da: f64, db: f64) -> Self {
        let tape = self.tape.or(rhs.tape);
        match tape {
            Some(t) if self.index != NO_PARENT || rhs.index != NO_PARENT => {
                let index = t.push(Node { parents: [self.index, rhs.index], partials: [da, db] });
                Var { tape: Some(t), index, value }
            }
            _ => Var { tape: None, index: NO_PARENT, value },
        }
    }
}

impl Scalar for Var<'_> {
    fn cst(value: f64) -> Self {
        Var { tape: None, index: NO_PARENT, value }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(self.value.ln(), 1.0 / self.value)
    }
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.unary(s, 0.5 / s)
    }
    fn powf(self, p: f64) -> Self {
        self.unary(self.value.powf(p), p * self.value.powf(p - 1.0))
    }
    fn powi(self, n: i32) -> Self {
        let d = if n == 0 { 0.0 } else { n as f64 * self.value.powi(n - 1) };
        self.unary(self.value.powi(n), d)
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.value;
        let q = self.value * inv;
        self.binary(rhs, q, inv, -q * inv)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl Add<f64> for Var<'_> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.unary(self.value + rhs, 1.0)
    }
}

impl Sub<f64> for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.value - rhs, 1.0)
    }
}

impl Mul<f64> for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.value * rhs, rhs)
    }
}

impl Div<f64> for Var<'_> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.unary(self.value / rhs, 1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_product_chain() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let y = tape.var(-2.0);
        let f = (x * y).exp() + x.tanh() * 3.0 - y / x;
        let adj = tape.gradient(f);
        let e = (1.5f64 * -2.0).exp();
        let t = 1.5f64.tanh();
        let dfdx = -2.0 * e + 3.0 * (1.0 - t * t) + (-2.0) / (1.5 * 1.5);
        let dfdy = 1.5 * e - 1.0 / 1.5;
        assert!((x.adjoint_in(&adj) - dfdx).abs() < 1e-12);
        assert!((y.adjoint_in(&adj) - dfdy).abs() < 1e-12);
    }

    #[test]
    fn constants_do_not_record() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let c = Var::cst(3.0) * Var::cst(4.0) + 1.0;
        assert_eq!(tape.len(), 1);
        let f = x * c;
        assert_eq!(x.adjoint_in(&tape.gradient(f)), 13.0);
    }
}
