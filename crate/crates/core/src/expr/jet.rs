//! Forward-mode jets carrying exact first and second partial derivatives.
//!
//! All jets have a fixed capacity of [`MAX_DIM`] variables so they are `Copy`
//! and never allocate; unused slots stay zero.

use std::ops::{Add, Mul, Neg, Sub};

/// Largest chart dimension supported anywhere in the crate.
pub const MAX_DIM: usize = 6;

/// Number of entries of the upper triangle of a `MAX_DIM x MAX_DIM` matrix.
pub const HESS_LEN: usize = MAX_DIM * (MAX_DIM + 1) / 2;

/// Arithmetic shared by plain numbers and jets, used by the generic evaluator.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    /// Chain rule for a unary function with value `f`, first derivative `d1`
    /// and second derivative `d2` at `self.value()`.
    fn chain(self, f: f64, d1: f64, d2: f64) -> Self;
    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn constant(c: f64) -> Self {
        c
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn chain(self, f: f64, _d1: f64, _d2: f64) -> Self {
        f
    }
    #[inline]
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// Value and gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet1 {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
}

impl Jet1 {
    pub fn variable(value: f64, index: usize) -> Self {
        let mut grad = [0.0; MAX_DIM];
        grad[index] = 1.0;
        Jet1 { value, grad }
    }
}

impl Add for Jet1 {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.value += rhs.value;
        for k in 0..MAX_DIM {
            self.grad[k] += rhs.grad[k];
        }
        self
    }
}

impl Sub for Jet1 {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.value -= rhs.value;
        for k in 0..MAX_DIM {
            self.grad[k] -= rhs.grad[k];
        }
        self
    }
}

impl Mul for Jet1 {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut grad = [0.0; MAX_DIM];
        for (k, g) in grad.iter_mut().enumerate() {
            *g = self.value * rhs.grad[k] + rhs.value * self.grad[k];
        }
        Jet1 {
            value: self.value * rhs.value,
            grad,
        }
    }
}

impl Neg for Jet1 {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.value = -self.value;
        for g in self.grad.iter_mut() {
            *g = -*g;
        }
        self
    }
}

impl Scalar for Jet1 {
    #[inline]
    fn constant(c: f64) -> Self {
        Jet1 {
            value: c,
            grad: [0.0; MAX_DIM],
        }
    }
    #[inline]
    fn value(&self) -> f64 {
        self.value
    }
    #[inline]
    fn chain(self, f: f64, d1: f64, _d2: f64) -> Self {
        let mut grad = [0.0; MAX_DIM];
        for (k, g) in grad.iter_mut().enumerate() {
            if self.grad[k] != 0.0 {
                *g = d1 * self.grad[k];
            }
        }
        Jet1 { value: f, grad }
    }
    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }
}

/// Value, gradient and Hessian (packed upper triangle, so exactly symmetric).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [f64; HESS_LEN],
}

impl Jet2 {
    pub fn variable(value: f64, index: usize) -> Self {
        let mut grad = [0.0; MAX_DIM];
        grad[index] = 1.0;
        Jet2 {
            value,
            grad,
            hess: [0.0; HESS_LEN],
        }
    }

    /// Second partial derivative with respect to variables `i` and `j`.
    #[inline]
    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[packed(i, j)]
    }

    pub fn first_order(&self) -> Jet1 {
        Jet1 {
            value: self.value,
            grad: self.grad,
        }
    }
}

/// Offset of `(i, j)` in the packed upper-triangular Hessian.
#[inline]
pub const fn packed(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row r holds MAX_DIM - r entries
    i * MAX_DIM - (i * i.saturating_sub(1)) / 2 + (j - i)
}

impl Add for Jet2 {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.value += rhs.value;
        for k in 0..MAX_DIM {
            self.grad[k] += rhs.grad[k];
        }
        for k in 0..HESS_LEN {
            self.hess[k] += rhs.hess[k];
        }
        self
    }
}

impl Sub for Jet2 {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.value -= rhs.value;
        for k in 0..MAX_DIM {
            self.grad[k] -= rhs.grad[k];
        }
        for k in 0..HESS_LEN {
            self.hess[k] -= rhs.hess[k];
        }
        self
    }
}

impl Mul for Jet2 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self.value, rhs.value);
        let mut grad = [0.0; MAX_DIM];
        for (k, g) in grad.iter_mut().enumerate() {
            *g = a * rhs.grad[k] + b * self.grad[k];
        }
        let mut hess = [0.0; HESS_LEN];
        for i in 0..MAX_DIM {
            for j in i..MAX_DIM {
                let idx = packed(i, j);
                hess[idx] = a * rhs.hess[idx]
                    + b * self.hess[idx]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        Jet2 {
            value: a * b,
            grad,
            hess,
        }
    }
}

impl Neg for Jet2 {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.value = -self.value;
        for g in self.grad.iter_mut() {
            *g = -*g;
        }
        for h in self.hess.iter_mut() {
            *h = -*h;
        }
        self
    }
}

impl Scalar for Jet2 {
    #[inline]
    fn constant(c: f64) -> Self {
        Jet2 {
            value: c,
            grad: [0.0; MAX_DIM],
            hess: [0.0; HESS_LEN],
        }
    }
    #[inline]
    fn value(&self) -> f64 {
        self.value
    }
    fn chain(self, f: f64, d1: f64, d2: f64) -> Self {
        let mut grad = [0.0; MAX_DIM];
        for (k, g) in grad.iter_mut().enumerate() {
            if self.grad[k] != 0.0 {
                *g = d1 * self.grad[k];
            }
        }
        let mut hess = [0.0; HESS_LEN];
        for i in 0..MAX_DIM {
            for j in i..MAX_DIM {
                let idx = packed(i, j);
                let mut h = 0.0;
                if self.hess[idx] != 0.0 {
                    h += d1 * self.hess[idx];
                }
                let outer = self.grad[i] * self.grad[j];
                if outer != 0.0 {
                    h += d2 * outer;
                }
                hess[idx] = h;
            }
        }
        Jet2 {
            value: f,
            grad,
            hess,
        }
    }
    fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }
}
