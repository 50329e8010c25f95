//! Truncated bivariate Taylor series ("jets") of order 3 in disk coordinates.
//!
//! A [`Jet`] stores the Taylor coefficients of a smooth function of `(x, y)`
//! around a base point, for every monomial `x^i y^j` with `i + j <= 3`.
//! Arithmetic and composition with univariate functions propagate all
//! derivatives exactly (up to rounding), which is how the fields, Christoffel
//! symbols, curvature and the Lorentz force obtain their derivatives.
//!
//! Differentiating a jet drops one order of validity: the result of
//! [`Jet::dx`] is exact through order 2 only.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Highest total degree kept.
pub const ORDER: usize = 3;
const LEN: usize = 10;

/// Exponents `(i, j)` of each coefficient slot.
const EXPONENTS: [(u8, u8); LEN] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

const fn slot(i: u8, j: u8) -> usize {
    let d = (i + j) as usize;
    // slots of degree d start at d(d+1)/2 and are ordered by decreasing i
    d * (d + 1) / 2 + j as usize
}

const fn product_table() -> ([(u8, u8, u8); 35], usize) {
    let mut table = [(0u8, 0u8, 0u8); 35];
    let mut n = 0;
    let mut a = 0;
    while a < LEN {
        let mut b = 0;
        while b < LEN {
            let (ia, ja) = EXPONENTS[a];
            let (ib, jb) = EXPONENTS[b];
            if (ia + ja + ib + jb) as usize <= ORDER {
                table[n] = (a as u8, b as u8, slot(ia + ib, ja + jb) as u8);
                n += 1;
            }
            b += 1;
        }
        a += 1;
    }
    (table, n)
}

const PRODUCTS: ([(u8, u8, u8); 35], usize) = product_table();

const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; LEN],
}

impl Default for Jet {
    fn default() -> Self {
        Self::zero()
    }
}

impl Jet {
    pub const fn zero() -> Self {
        Self { c: [0.0; LEN] }
    }

    pub const fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Self { c }
    }

    /// The coordinate function `x` expanded at `x0`.
    pub fn var_x(x0: f64) -> Self {
        let mut j = Self::constant(x0);
        j.c[1] = 1.0;
        j
    }

    /// The coordinate function `y` expanded at `y0`.
    pub fn var_y(y0: f64) -> Self {
        let mut j = Self::constant(y0);
        j.c[2] = 1.0;
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative `d^(i+j) / dx^i dy^j` at the base point.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= ORDER, "jet order exceeded");
        self.c[slot(i as u8, j as u8)] * FACT[i] * FACT[j]
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.c[1], self.c[2]]
    }

    /// Euclidean Laplacian at the base point.
    pub fn laplacian(&self) -> f64 {
        2.0 * (self.c[3] + self.c[5])
    }

    pub fn coefficients(&self) -> &[f64; LEN] {
        &self.c
    }

    pub fn scale(mut self, k: f64) -> Self {
        for v in &mut self.c {
            *v *= k;
        }
        self
    }

    pub fn add_const(mut self, k: f64) -> Self {
        self.c[0] += k;
        self
    }

    /// Derivative in `x`; valid through order 2.
    pub fn dx(&self) -> Self {
        let mut out = Self::zero();
        for (s, &(i, j)) in EXPONENTS.iter().enumerate() {
            if ((i + j) as usize) < ORDER {
                out.c[s] = (i as f64 + 1.0) * self.c[slot(i + 1, j)];
            }
        }
        out
    }

    /// Derivative in `y`; valid through order 2.
    pub fn dy(&self) -> Self {
        let mut out = Self::zero();
        for (s, &(i, j)) in EXPONENTS.iter().enumerate() {
            if ((i + j) as usize) < ORDER {
                out.c[s] = (j as f64 + 1.0) * self.c[slot(i, j + 1)];
            }
        }
        out
    }

    pub fn d(&self, axis: usize) -> Self {
        if axis == 0 {
            self.dx()
        } else {
            self.dy()
        }
    }

    /// `phi(self)` given `derivs[k] = phi^(k)(self.value())`.
    pub fn compose(&self, derivs: [f64; 4]) -> Self {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let mut out = Self::constant(derivs[0]);
        for s in 1..LEN {
            out.c[s] = derivs[1] * delta.c[s] + 0.5 * derivs[2] * d2.c[s] + derivs[3] / 6.0 * d3.c[s];
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        self.compose([e; 4])
    }

    pub fn ln(&self) -> Self {
        let v = self.c[0];
        self.compose([v.ln(), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)])
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.c[0];
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn sqrt(&self) -> Self {
        let s = self.c[0].sqrt();
        let v = self.c[0];
        self.compose([s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)])
    }

    pub fn div(&self, other: &Jet) -> Self {
        *self * other.recip()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a -= b;
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = [0.0; LEN];
        let (table, n) = &PRODUCTS;
        for &(a, b, k) in &table[..*n] {
            out[k as usize] += self.c[a as usize] * rhs.c[b as usize];
        }
        Jet { c: out }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eval_poly(j: &Jet, dx: f64, dy: f64) -> f64 {
        EXPONENTS
            .iter()
            .zip(j.c.iter())
            .map(|(&(i, k), c)| c * dx.powi(i as i32) * dy.powi(k as i32))
            .sum()
    }

    #[test]
    fn product_table_is_complete() {
        assert_eq!(PRODUCTS.1, 35);
    }

    #[test]
    fn derivatives_of_a_known_function() {
        // f = exp(x) * sin-free polynomial mix: x^2 y + exp(x y)
        let (x0, y0) = (0.3, -0.7);
        let x = Jet::var_x(x0);
        let y = Jet::var_y(y0);
        let f = x * x * y + (x * y).exp();
        let e = (x0 * y0).exp();
        assert_relative_eq!(f.value(), x0 * x0 * y0 + e, epsilon = 1e-14);
        assert_relative_eq!(f.partial(1, 0), 2.0 * x0 * y0 + y0 * e, epsilon = 1e-14);
        assert_relative_eq!(f.partial(0, 1), x0 * x0 + x0 * e, epsilon = 1e-14);
        assert_relative_eq!(f.partial(2, 0), 2.0 * y0 + y0 * y0 * e, epsilon = 1e-14);
        assert_relative_eq!(f.partial(1, 1), 2.0 * x0 + e + x0 * y0 * e, epsilon = 1e-14);
        assert_relative_eq!(f.partial(0, 3), x0.powi(3) * e, epsilon = 1e-14);
        assert_relative_eq!(f.partial(2, 1), 2.0 + (2.0 * y0 + x0 * y0 * y0) * e, epsilon = 1e-13);
    }

    #[test]
    fn elementary_functions_match_series() {
        let x = Jet::var_x(0.4);
        let y = Jet::var_y(0.2);
        let u = x * x + y + Jet::constant(1.0);
        for (jet, f) in [
            (u.ln(), (|t: f64| t.ln()) as fn(f64) -> f64),
            (u.sqrt(), |t: f64| t.sqrt()),
            (u.recip(), |t: f64| 1.0 / t),
        ] {
            let (dx, dy): (f64, f64) = (1e-3, -2e-3);
            let exact = f((0.4 + dx).powi(2) + 0.2 + dy + 1.0);
            // truncation error is fourth order in the offset
            assert!((eval_poly(&jet, dx, dy) - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn differentiation_commutes() {
        let x = Jet::var_x(0.1);
        let y = Jet::var_y(0.5);
        let f = (x * y * y).exp() + x * x * x;
        assert_relative_eq!(f.dx().dy().value(), f.dy().dx().value(), epsilon = 1e-14);
        assert_relative_eq!(f.dx().partial(1, 1), f.partial(2, 1), epsilon = 1e-14);
    }
}
