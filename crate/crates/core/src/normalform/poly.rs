//! Dense polynomial algebra over the four phase-space variables
//! `(z₁, z₂, z₃, z₄)` and, in complexified form, over the rotation
//! coordinates `(w₁, w̄₁, w₂, w̄₂)` with `w₁ = z₁ + i z₂`, `w₂ = z₃ + i z₄`.
//!
//! The Poisson bracket is the one of the symplectic form
//! `dz₁∧dz₃ + dz₂∧dz₄`:
//! `{f, g} = f₁g₃ − f₃g₁ + f₂g₄ − f₄g₂` (subscripts are partials). In the
//! rotation coordinates the simultaneous-rotation invariant `S` acts
//! diagonally: `{m, S} = i((p₁−q₁)+(p₂−q₂)) m` for a monomial
//! `m = w₁^{p₁} w̄₁^{q₁} w₂^{p₂} w̄₂^{q₂}`.

use num_complex::Complex64;
use std::collections::BTreeMap;

/// Exponent multi-index over four variables.
pub type Exp = [u8; 4];

fn total_degree(e: &Exp) -> u32 {
    e.iter().map(|&x| x as u32).sum()
}

/// Real polynomial in `(z₁..z₄)` with finitely many terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<Exp, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(exp: Exp, coeff: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(exp, coeff);
        p
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial([0, 0, 0, 0], c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exp, &f64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, exp: &Exp) -> f64 {
        self.terms.get(exp).copied().unwrap_or(0.0)
    }

    pub fn add_term(&mut self, exp: Exp, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(exp).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&exp);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, -c);
        }
        out
    }

    pub fn scale(&self, k: f64) -> Self {
        if k == 0.0 {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(e, c)| (*e, c * k)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]];
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    /// Drop every term of total degree above `cap`.
    pub fn truncate_above(&self, cap: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| total_degree(e) <= cap)
                .map(|(e, c)| (*e, *c))
                .collect(),
        }
    }

    /// Terms of exact total degree `d`.
    pub fn degree_part(&self, d: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| total_degree(e) == d)
                .map(|(e, c)| (*e, *c))
                .collect(),
        }
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(total_degree).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> u32 {
        self.terms.keys().map(total_degree).min().unwrap_or(0)
    }

    /// Largest absolute coefficient.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Remove coefficients with `|c| <= eps`.
    pub fn drop_small(&self, eps: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > eps)
                .map(|(e, c)| (*e, *c))
                .collect(),
        }
    }

    pub fn diff(&self, var: usize) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut d = *e;
            d[var] -= 1;
            out.add_term(d, c * e[var] as f64);
        }
        out
    }

    pub fn eval(&self, z: &[f64; 4]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (i, &p) in e.iter().enumerate() {
                t *= z[i].powi(p as i32);
            }
            acc += t;
        }
        acc
    }

    pub fn grad_eval(&self, z: &[f64; 4]) -> [f64; 4] {
        let mut g = [0.0; 4];
        for (e, c) in &self.terms {
            for var in 0..4 {
                if e[var] == 0 {
                    continue;
                }
                let mut t = *c * e[var] as f64;
                for (i, &p) in e.iter().enumerate() {
                    let p = if i == var { p - 1 } else { p };
                    t *= z[i].powi(p as i32);
                }
                g[var] += t;
            }
        }
        g
    }

    /// Poisson bracket `{self, other}` for the form `dz₁∧dz₃ + dz₂∧dz₄`.
    pub fn poisson(&self, other: &Self) -> Self {
        let f1 = self.diff(0);
        let f2 = self.diff(1);
        let f3 = self.diff(2);
        let f4 = self.diff(3);
        let g1 = other.diff(0);
        let g2 = other.diff(1);
        let g3 = other.diff(2);
        let g4 = other.diff(3);
        f1.mul(&g3)
            .sub(&f3.mul(&g1))
            .add(&f2.mul(&g4))
            .sub(&f4.mul(&g2))
    }

    /// Substitute `z ↦ s·z` and report the rescaled polynomial.
    pub fn scale_vars(&self, s: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (*e, c * s.powi(total_degree(e) as i32)))
                .collect(),
        }
    }
}

// Quadratic invariants of the simultaneous rotation.

/// `S = z₁z₄ − z₂z₃`
pub fn s_invariant() -> Poly {
    let mut p = Poly::zero();
    p.add_term([1, 0, 0, 1], 1.0);
    p.add_term([0, 1, 1, 0], -1.0);
    p
}

/// `M = ½(z₁² + z₂²)`
pub fn m_invariant() -> Poly {
    let mut p = Poly::zero();
    p.add_term([2, 0, 0, 0], 0.5);
    p.add_term([0, 2, 0, 0], 0.5);
    p
}

/// `N = ½(z₃² + z₄²)`
pub fn n_invariant() -> Poly {
    let mut p = Poly::zero();
    p.add_term([0, 0, 2, 0], 0.5);
    p.add_term([0, 0, 0, 2], 0.5);
    p
}

/// `Z = z₁z₃ + z₂z₄` (helper invariant; `Z² + S² = 4MN`)
pub fn z_invariant() -> Poly {
    let mut p = Poly::zero();
    p.add_term([1, 0, 1, 0], 1.0);
    p.add_term([0, 1, 0, 1], 1.0);
    p
}

/// Complex polynomial in the rotation coordinates `(w₁, w̄₁, w₂, w̄₂)`.
#[derive(Clone, Debug, Default)]
pub struct CPoly {
    terms: BTreeMap<Exp, Complex64>,
}

impl CPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(exp: Exp, coeff: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(exp, coeff);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exp, &Complex64)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, exp: Exp, coeff: Complex64) {
        if coeff == Complex64::ZERO {
            return;
        }
        let entry = self.terms.entry(exp).or_insert(Complex64::ZERO);
        *entry += coeff;
        if *entry == Complex64::ZERO {
            self.terms.remove(&exp);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, *c);
        }
        out
    }

    pub fn scale(&self, k: Complex64) -> Self {
        if k == Complex64::ZERO {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(e, c)| (*e, c * k)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]];
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn coeff_norm(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn drop_small(&self, eps: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.norm() > eps)
                .map(|(e, c)| (*e, *c))
                .collect(),
        }
    }

    fn diff(&self, var: usize) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut d = *e;
            d[var] -= 1;
            out.add_term(d, c * e[var] as f64);
        }
        out
    }

    /// Poisson bracket in rotation coordinates:
    /// `{f, g} = 2(f_{w₁}g_{w̄₂} − g_{w₁}f_{w̄₂} + f_{w̄₁}g_{w₂} − g_{w̄₁}f_{w₂})`.
    pub fn poisson(&self, other: &Self) -> Self {
        let fw1 = self.diff(0);
        let fw1b = self.diff(1);
        let fw2 = self.diff(2);
        let fw2b = self.diff(3);
        let gw1 = other.diff(0);
        let gw1b = other.diff(1);
        let gw2 = other.diff(2);
        let gw2b = other.diff(3);
        fw1.mul(&gw2b)
            .add(&gw1.mul(&fw2b).scale((-1.0).into()))
            .add(&fw1b.mul(&gw2))
            .add(&gw1b.mul(&fw2).scale((-1.0).into()))
            .scale(2.0.into())
    }

    /// Rotation weight of a monomial under the S¹-action
    /// `w ↦ e^{it} w`: `(p₁ − q₁) + (p₂ − q₂)`.
    pub fn s_weight(exp: &Exp) -> i32 {
        (exp[0] as i32 - exp[1] as i32) + (exp[2] as i32 - exp[3] as i32)
    }

    /// Keep only monomials with `s_weight == 0` (the exact S¹-average).
    pub fn invariant_part(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| Self::s_weight(e) == 0)
                .map(|(e, c)| (*e, *c))
                .collect(),
        }
    }

    /// Keep only monomials with `s_weight != 0`.
    pub fn noninvariant_part(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| Self::s_weight(e) != 0)
                .map(|(e, c)| (*e, *c))
                .collect(),
        }
    }
}

fn var_basis_z_to_w() -> [CPoly; 4] {
    let half = Complex64::new(0.5, 0.0);
    let neg_half_i = Complex64::new(0.0, -0.5);
    let pos_half_i = Complex64::new(0.0, 0.5);
    // z₁ = (w₁ + w̄₁)/2, z₂ = −(i/2)w₁ + (i/2)w̄₁,
    // z₃ = (w₂ + w̄₂)/2, z₄ = −(i/2)w₂ + (i/2)w̄₂
    let mut z1 = CPoly::zero();
    z1.add_term([1, 0, 0, 0], half);
    z1.add_term([0, 1, 0, 0], half);
    let mut z2 = CPoly::zero();
    z2.add_term([1, 0, 0, 0], neg_half_i);
    z2.add_term([0, 1, 0, 0], pos_half_i);
    let mut z3 = CPoly::zero();
    z3.add_term([0, 0, 1, 0], half);
    z3.add_term([0, 0, 0, 1], half);
    let mut z4 = CPoly::zero();
    z4.add_term([0, 0, 1, 0], neg_half_i);
    z4.add_term([0, 0, 0, 1], pos_half_i);
    [z1, z2, z3, z4]
}

fn var_basis_w_to_z() -> [CPoly; 4] {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    // w₁ = z₁ + i z₂, w̄₁ = z₁ − i z₂, w₂ = z₃ + i z₄, w̄₂ = z₃ − i z₄
    let mut w1 = CPoly::zero();
    w1.add_term([1, 0, 0, 0], one);
    w1.add_term([0, 1, 0, 0], i);
    let mut w1b = CPoly::zero();
    w1b.add_term([1, 0, 0, 0], one);
    w1b.add_term([0, 1, 0, 0], -i);
    let mut w2 = CPoly::zero();
    w2.add_term([0, 0, 1, 0], one);
    w2.add_term([0, 0, 0, 1], i);
    let mut w2b = CPoly::zero();
    w2b.add_term([0, 0, 1, 0], one);
    w2b.add_term([0, 0, 0, 1], -i);
    [w1, w1b, w2, w2b]
}

fn substitute(terms: impl Iterator<Item = (Exp, Complex64)>, basis: &[CPoly; 4]) -> CPoly {
    let mut out = CPoly::zero();
    for (e, c) in terms {
        let mut prod = CPoly::monomial([0, 0, 0, 0], Complex64::new(1.0, 0.0));
        for (var, &p) in e.iter().enumerate() {
            for _ in 0..p {
                prod = prod.mul(&basis[var]);
            }
        }
        out = out.add(&prod.scale(c));
    }
    out
}

/// Express a real z-polynomial in rotation coordinates.
pub fn to_rotation(p: &Poly) -> CPoly {
    let basis = var_basis_z_to_w();
    substitute(
        p.terms().map(|(e, c)| (*e, Complex64::new(*c, 0.0))),
        &basis,
    )
}

/// Convert back to z-coordinates; returns the real part and the largest
/// imaginary coefficient left over (zero for polynomials that are real in z).
pub fn to_cartesian(p: &CPoly) -> (Poly, f64) {
    let basis = var_basis_w_to_z();
    let expanded = substitute(p.terms().map(|(e, c)| (*e, *c)), &basis);
    let mut out = Poly::zero();
    let mut max_imag = 0.0_f64;
    for (e, c) in expanded.terms() {
        max_imag = max_imag.max(c.im.abs());
        if c.re != 0.0 {
            out.add_term(*e, c.re);
        }
    }
    (out, max_imag)
}
