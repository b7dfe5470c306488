//! Scalar types the expression evaluator can run over.
//!
//! `f64` gives plain values. [`Dual`] carries a tangent vector alongside the
//! value and is itself a [`Scalar`], so `Dual<Dual<f64>>` yields second
//! derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(value: f64) -> Self;
    /// The underlying real value, with all derivative parts dropped.
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, e: f64) -> Self;

    fn scale(self, factor: f64) -> Self {
        self * Self::constant(factor)
    }
}

impl Scalar for f64 {
    fn constant(value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
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
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    fn scale(self, factor: f64) -> Self {
        self * factor
    }
}

/// Forward-mode dual number with a vector of tangent slots.
///
/// An empty `eps` means all tangent slots are zero, so constants cost no
/// allocation. Slots are zero-extended when operands differ in length.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: Vec<T>,
}

impl<T: Scalar> Dual<T> {
    pub fn constant_of(re: T) -> Self {
        Dual { re, eps: Vec::new() }
    }

    /// A variable with tangent `1` in `slot` of `width` slots.
    pub fn variable(re: T, slot: usize, width: usize) -> Self {
        let mut eps = vec![T::constant(0.0); width];
        eps[slot] = T::constant(1.0);
        Dual { re, eps }
    }

    /// Tangent component `slot`, zero when absent.
    pub fn tangent(&self, slot: usize) -> T {
        self.eps.get(slot).cloned().unwrap_or_else(|| T::constant(0.0))
    }

    /// Applies the chain rule with outer derivative `d` evaluated at `re`.
    fn chain(self, re: T, d: T) -> Self {
        let eps = self.eps.into_iter().map(|e| e * d.clone()).collect();
        Dual { re, eps }
    }
}

fn zip_eps<T: Scalar>(a: Vec<T>, b: Vec<T>, op: impl Fn(T, T) -> T) -> Vec<T> {
    let n = a.len().max(b.len());
    let mut a = a.into_iter();
    let mut b = b.into_iter();
    (0..n)
        .map(|_| {
            let x = a.next().unwrap_or_else(|| T::constant(0.0));
            let y = b.next().unwrap_or_else(|| T::constant(0.0));
            op(x, y)
        })
        .collect()
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual {
            re: self.re + rhs.re,
            eps: zip_eps(self.eps, rhs.eps, |x, y| x + y),
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual {
            re: self.re - rhs.re,
            eps: zip_eps(self.eps, rhs.eps, |x, y| x - y),
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self.re.clone(), rhs.re.clone());
        Dual {
            re: self.re * rhs.re,
            eps: zip_eps(self.eps, rhs.eps, |x, y| x * b.clone() + a.clone() * y),
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.re.clone() / rhs.re.clone();
        let (qc, b) = (q.clone(), rhs.re.clone());
        Dual {
            re: q,
            eps: zip_eps(self.eps, rhs.eps, |x, y| (x - qc.clone() * y) / b.clone()),
        }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            eps: self.eps.into_iter().map(|e| -e).collect(),
        }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn constant(value: f64) -> Self {
        Dual::constant_of(T::constant(value))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn sin(self) -> Self {
        let (s, c) = (self.re.clone().sin(), self.re.clone().cos());
        self.chain(s, c)
    }
    fn cos(self) -> Self {
        let (c, s) = (self.re.clone().cos(), self.re.clone().sin());
        self.chain(c, -s)
    }
    fn exp(self) -> Self {
        let e = self.re.clone().exp();
        self.chain(e.clone(), e)
    }
    fn ln(self) -> Self {
        let l = self.re.clone().ln();
        let d = T::constant(1.0) / self.re.clone();
        self.chain(l, d)
    }
    fn sqrt(self) -> Self {
        let s = self.re.clone().sqrt();
        let d = T::constant(0.5) / s.clone();
        self.chain(s, d)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::constant(1.0),
            1 => self,
            _ => {
                let p = self.re.clone().powi(n);
                let d = self.re.clone().powi(n - 1).scale(n as f64);
                self.chain(p, d)
            }
        }
    }
    fn powf(self, e: f64) -> Self {
        let p = self.re.clone().powf(e);
        let d = self.re.clone().powf(e - 1.0).scale(e);
        self.chain(p, d)
    }
    fn scale(self, factor: f64) -> Self {
        Dual {
            re: self.re.scale(factor),
            eps: self.eps.into_iter().map(|e| e.scale(factor)).collect(),
        }
    }
}

/// Seeds every coordinate of `point` as an active variable.
pub fn seed_all(point: &[f64]) -> Vec<Dual<f64>> {
    let n = point.len();
    point
        .iter()
        .enumerate()
        .map(|(i, &x)| Dual::variable(x, i, n))
        .collect()
}

/// Seeds every coordinate twice (outer and inner) for second derivatives.
pub fn seed_all_nested(point: &[f64]) -> Vec<Dual<Dual<f64>>> {
    let n = point.len();
    point
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut eps = vec![Dual::constant(0.0); n];
            eps[i] = Dual::constant(1.0);
            Dual {
                re: Dual::variable(x, i, n),
                eps,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let v = seed_all(&[3.0, 4.0]);
        let f = v[0].clone() * v[1].clone();
        assert_eq!(f.re, 12.0);
        assert_eq!(f.eps, vec![4.0, 3.0]);
    }

    #[test]
    fn nested_second_derivative_of_cube() {
        let v = seed_all_nested(&[2.0]);
        let f = v[0].clone().powi(3);
        assert_eq!(f.re.re, 8.0);
        assert_eq!(f.re.eps[0], 12.0);
        assert_eq!(f.eps[0].eps[0], 12.0);
    }

    #[test]
    fn constants_carry_no_tangent() {
        let c = Dual::<f64>::constant(2.0);
        assert!(c.eps.is_empty());
        let x = Dual::variable(1.5, 0, 1);
        let y = c.clone() * x.clone() + c;
        assert_eq!(y.eps, vec![2.0]);
    }
}
