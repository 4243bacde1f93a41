//! First-order jets: forward-mode automatic differentiation carriers.

use nalgebra::DVector;
use std::ops::{Add, Mul, Neg, Sub};

/// A value together with its gradient with respect to `n` inputs.
///
/// Arithmetic propagates derivatives by the sum, product and chain rules,
/// so gradients are exact up to floating-point rounding (no truncation error).
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub value: f64,
    pub gradient: DVector<f64>,
}

impl Jet1 {
    /// A constant: value with zero gradient.
    pub fn constant(value: f64, n: usize) -> Self {
        Jet1 {
            value,
            gradient: DVector::zeros(n),
        }
    }

    /// The `i`-th input variable seeded with unit derivative.
    pub fn variable(value: f64, i: usize, n: usize) -> Self {
        let mut gradient = DVector::zeros(n);
        gradient[i] = 1.0;
        Jet1 { value, gradient }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    /// Nonnegative integer power by repeated multiplication.
    ///
    /// The multiplication order matches a plain f64 evaluation loop, so jet
    /// values agree bit-for-bit with scalar evaluation of the same expression.
    pub fn powi(&self, exp: u32) -> Self {
        if exp == 0 {
            return Jet1::constant(1.0, self.dim());
        }
        let mut acc = self.clone();
        for _ in 1..exp {
            acc = &acc * self;
        }
        acc
    }
}

/// Scalar power by the same repeated-multiplication loop as `Jet1::powi`.
pub fn powi_f64(x: f64, exp: u32) -> f64 {
    if exp == 0 {
        return 1.0;
    }
    let mut acc = x;
    for _ in 1..exp {
        acc *= x;
    }
    acc
}

impl Add for &Jet1 {
    type Output = Jet1;
    fn add(self, rhs: &Jet1) -> Jet1 {
        Jet1 {
            value: self.value + rhs.value,
            gradient: &self.gradient + &rhs.gradient,
        }
    }
}

impl Sub for &Jet1 {
    type Output = Jet1;
    fn sub(self, rhs: &Jet1) -> Jet1 {
        Jet1 {
            value: self.value - rhs.value,
            gradient: &self.gradient - &rhs.gradient,
        }
    }
}

impl Mul for &Jet1 {
    type Output = Jet1;
    fn mul(self, rhs: &Jet1) -> Jet1 {
        Jet1 {
            value: self.value * rhs.value,
            gradient: &self.gradient * rhs.value + &rhs.gradient * self.value,
        }
    }
}

impl Neg for &Jet1 {
    type Output = Jet1;
    fn neg(self) -> Jet1 {
        Jet1 {
            value: -self.value,
            gradient: -&self.gradient,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_is_exact() {
        // d(xy)/dx = y, d(xy)/dy = x at (3, 5)
        let x = Jet1::variable(3.0, 0, 2);
        let y = Jet1::variable(5.0, 1, 2);
        let p = &x * &y;
        assert_eq!(p.value, 15.0);
        assert_eq!(p.gradient[0], 5.0);
        assert_eq!(p.gradient[1], 3.0);
    }

    #[test]
    fn chain_rule_through_powers() {
        // d(x^4)/dx = 4x^3 at x = 2
        let x = Jet1::variable(2.0, 0, 1);
        let p = x.powi(4);
        assert_eq!(p.value, 16.0);
        assert_eq!(p.gradient[0], 32.0);
    }

    #[test]
    fn zero_power_is_constant_one() {
        let x = Jet1::variable(7.0, 0, 1);
        let p = x.powi(0);
        assert_eq!(p.value, 1.0);
        assert_eq!(p.gradient[0], 0.0);
    }

    #[test]
    fn scalar_power_matches_jet_value() {
        for exp in 0..8 {
            let x = Jet1::variable(1.7, 0, 1);
            assert_eq!(x.powi(exp).value, powi_f64(1.7, exp));
        }
    }
}
