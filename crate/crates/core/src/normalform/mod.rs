//! Quadratic invariants, S¹-averaging and the order-4 Lie-series Birkhoff
//! normalization of a two-degrees-of-freedom Hamiltonian in 1:-1 resonance.
//!
//! A Hamiltonian with quadratic part `(λ₀+μ₁)S + N + μ₂M` is brought, by the
//! time-1 flow of a polynomial generator, to the integrable truncation
//!
//! ```text
//! G_int = ⟨ω, y⟩ + (λ₀+μ₁)S + N + μ₂M + 2bM² + 2c₁SM + c₂S²
//! ```
//!
//! modulo S¹-invariant terms of higher grading (z of weight 1, μ₂ of
//! weight 2, y of weight 4). The homological equations are solved on the
//! S¹-noninvariant subspace, where the semisimple part `S` acts diagonally in
//! rotation coordinates; the degree-4 invariant leftovers are reduced to the
//! span of `{M², SM, S²}` with a generator built from the nilpotent part `N`.

pub mod poly;

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linstab::UnfoldingParams;
pub use poly::{m_invariant, n_invariant, s_invariant, z_invariant, CPoly, Exp, Poly};

/// Degree cap of the polynomial representation; order-4 normalization needs
/// brackets up to degree 6.
pub const DEGREE_CAP: u32 = 6;

/// Values of the quadratic invariants at a phase-space point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticInvariants {
    pub s: f64,
    pub m: f64,
    pub n: f64,
}

/// `S = z₁z₄ − z₂z₃`, `M = ½(z₁²+z₂²)`, `N = ½(z₃²+z₄²)`.
pub fn invariants(z: &[f64; 4]) -> QuadraticInvariants {
    QuadraticInvariants {
        s: z[0] * z[3] - z[1] * z[2],
        m: 0.5 * (z[0] * z[0] + z[1] * z[1]),
        n: 0.5 * (z[2] * z[2] + z[3] * z[3]),
    }
}

/// Helper invariant `Z = z₁z₃ + z₂z₄`; satisfies `Z² + S² = 4MN`.
pub fn z_helper(z: &[f64; 4]) -> f64 {
    z[0] * z[2] + z[1] * z[3]
}

/// Average a polynomial over the flow of `S` (the simultaneous rotation).
///
/// The output Poisson-commutes with `S` and the operation is an idempotent
/// projection.
pub fn s1_average(h: &Poly) -> Result<Poly> {
    if h.max_degree() > DEGREE_CAP {
        return Err(Error::Capacity(format!(
            "degree {} exceeds cap {DEGREE_CAP}",
            h.max_degree()
        )));
    }
    let (avg, imag) = poly::to_cartesian(&poly::to_rotation(h).invariant_part());
    debug_assert!(imag < 1e-12 * h.coeff_norm().max(1.0));
    Ok(avg)
}

/// Coefficients of the integrable truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormCoefficients {
    pub lambda0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    /// Internal frequency vector, carried through unchanged.
    #[serde(default)]
    pub omega: Vec<f64>,
}

impl NormalFormCoefficients {
    pub fn alpha(&self) -> f64 {
        self.lambda0 + self.mu1
    }

    pub fn supercritical(&self) -> bool {
        self.b > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Criticality {
    Supercritical,
    Subcritical,
    Degenerate,
}

/// Sign test on the leading quartic coefficient `b`.
pub fn supercriticality_test(c: &NormalFormCoefficients, tol: f64) -> Criticality {
    if c.b > tol {
        Criticality::Supercritical
    } else if c.b < -tol {
        Criticality::Subcritical
    } else {
        Criticality::Degenerate
    }
}

/// Evaluate `G_int = ⟨ω,y⟩ + (λ₀+μ₁)S + N + μ₂M + 2bM² + 2c₁SM + c₂S²`.
pub fn evaluate_gint(y: &[f64], z: &[f64; 4], c: &NormalFormCoefficients) -> f64 {
    debug_assert_eq!(y.len(), c.omega.len());
    let q = invariants(z);
    let mut g = c.alpha() * q.s + q.n + c.mu2 * q.m + 2.0 * c.b * q.m * q.m
        + 2.0 * c.c1 * q.s * q.m
        + c.c2 * q.s * q.s;
    for (w, yi) in c.omega.iter().zip(y) {
        g += w * yi;
    }
    g
}

/// The z-part of `G_int` as a polynomial.
pub fn gint_zpart(c: &NormalFormCoefficients) -> Poly {
    let s = s_invariant();
    let m = m_invariant();
    let n = n_invariant();
    s.scale(c.alpha())
        .add(&n)
        .add(&m.scale(c.mu2))
        .add(&m.mul(&m).scale(2.0 * c.b))
        .add(&s.mul(&m).scale(2.0 * c.c1))
        .add(&s.mul(&s).scale(c.c2))
}

/// Quadratic part `(λ₀+μ₁)S + N + μ₂M` matching the centralizer unfolding.
pub fn quadratic_part(p: &UnfoldingParams) -> Poly {
    s_invariant()
        .scale(p.alpha())
        .add(&n_invariant())
        .add(&m_invariant().scale(p.mu2))
}

/// Truncated Lie transform `exp(L_χ) h = h + {h,χ} + ½{{h,χ},χ} + …`,
/// which is `h ∘ Φ¹_χ` with all output degrees above `cap` dropped.
pub fn lie_transform(h: &Poly, chi: &Poly, cap: u32) -> Poly {
    let mut out = h.truncate_above(cap);
    let mut term = h.clone();
    let mut k = 1.0;
    // χ of minimal degree 3 raises the degree by at least one per bracket.
    for j in 1..=(cap as usize + 1) {
        term = term.poisson(chi).truncate_above(cap);
        if term.is_zero() {
            break;
        }
        k *= j as f64;
        out = out.add(&term.scale(1.0 / k));
    }
    out
}

fn monomials_of_degree(d: u32) -> Vec<Exp> {
    let mut out = Vec::new();
    for a in 0..=d {
        for b in 0..=(d - a) {
            for c in 0..=(d - a - b) {
                let e = d - a - b - c;
                out.push([a as u8, b as u8, c as u8, e as u8]);
            }
        }
    }
    out
}

/// Solve `{H₂, χ} = −(noninvariant part of rhs)` on the degree-`d`
/// noninvariant subspace, in rotation coordinates where the semisimple part
/// is diagonal. Returns χ as a complex polynomial in rotation coordinates.
fn solve_homological(h2_w: &CPoly, rhs_w: &CPoly, d: u32) -> Result<CPoly> {
    let basis: Vec<Exp> = monomials_of_degree(d)
        .into_iter()
        .filter(|e| CPoly::s_weight(e) != 0)
        .collect();
    let nb = basis.len();
    let index: std::collections::BTreeMap<Exp, usize> =
        basis.iter().enumerate().map(|(i, e)| (*e, i)).collect();

    let mut op = DMatrix::<Complex64>::zeros(nb, nb);
    for (j, e) in basis.iter().enumerate() {
        let m = CPoly::monomial(*e, Complex64::new(1.0, 0.0));
        let t = h2_w.poisson(&m);
        for (te, tc) in t.terms() {
            match index.get(te) {
                Some(&i) => op[(i, j)] += tc,
                // Bracket with the quadratic part stays in degree d and, since
                // H₂ is invariant, in the noninvariant subspace; anything else
                // is coefficient dirt.
                None => debug_assert!(tc.norm() < 1e-12),
            }
        }
    }

    let mut b = DVector::<Complex64>::zeros(nb);
    for (e, c) in rhs_w.terms() {
        if let Some(&i) = index.get(e) {
            b[i] = -c;
        }
    }
    let rhs_norm = b.norm();
    if rhs_norm == 0.0 {
        return Ok(CPoly::zero());
    }

    let lu = op.clone().lu();
    let x = lu
        .solve(&b)
        .ok_or(Error::SmallDivisor(0.0))?;
    let residual = (&op * &x - &b).norm();
    if residual > 1e-8 * rhs_norm {
        return Err(Error::SmallDivisor(residual / rhs_norm));
    }

    let mut chi = CPoly::zero();
    for (i, e) in basis.iter().enumerate() {
        chi.add_term(*e, x[i]);
    }
    Ok(chi)
}

/// Result of expressing a degree-4 invariant polynomial in the product basis
/// `[M², MN, N², MS, NS, S², MZ, NZ, SZ]`.
fn invariant_quartic_coordinates(k4: &Poly) -> Result<[f64; 9]> {
    let m = m_invariant();
    let n = n_invariant();
    let s = s_invariant();
    let z = z_invariant();
    let basis = [
        m.mul(&m),
        m.mul(&n),
        n.mul(&n),
        m.mul(&s),
        n.mul(&s),
        s.mul(&s),
        m.mul(&z),
        n.mul(&z),
        s.mul(&z),
    ];
    let monos = monomials_of_degree(4);
    let mono_index: std::collections::BTreeMap<Exp, usize> =
        monos.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let mut a = DMatrix::<f64>::zeros(monos.len(), 9);
    for (j, bp) in basis.iter().enumerate() {
        for (e, c) in bp.terms() {
            a[(mono_index[e], j)] = *c;
        }
    }
    let mut rhs = DVector::<f64>::zeros(monos.len());
    for (e, c) in k4.terms() {
        rhs[*mono_index
            .get(e)
            .ok_or_else(|| Error::Numeric("degree-4 part contains foreign monomials".into()))?] =
            *c;
    }
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numeric(format!("invariant basis solve failed: {e}")))?;
    let residual = (&a * &x - &rhs).norm();
    if residual > 1e-9 * rhs.norm().max(1.0) {
        return Err(Error::Numeric(format!(
            "degree-4 part is not S¹-invariant: residual {residual:.3e}"
        )));
    }
    Ok([x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8]])
}

/// Order-4 Birkhoff normalization of a Hamiltonian in 1:-1 resonance.
///
/// The quadratic part of `h` must equal `(λ₀+μ₁)S + N + μ₂M` for the given
/// unfolding parameters. Returns the coefficients of the integrable
/// truncation together with the generator whose time-1 flow performs the
/// normalization (apply with [`lie_transform`]).
pub fn birkhoff_normalize(
    h: &Poly,
    p: &UnfoldingParams,
    omega: &[f64],
    order: u32,
) -> Result<(NormalFormCoefficients, Poly)> {
    if order != 4 {
        return Err(Error::Config(format!("normalization order is fixed at 4, got {order}")));
    }
    p.validate()?;
    if h.max_degree() > DEGREE_CAP {
        return Err(Error::Capacity(format!(
            "degree {} exceeds cap {DEGREE_CAP}",
            h.max_degree()
        )));
    }
    let scale = h.coeff_norm().max(1.0);
    let h2_expected = quadratic_part(p);
    let defect = h.degree_part(2).sub(&h2_expected).coeff_norm();
    if defect > 1e-10 * scale {
        return Err(Error::Config(format!(
            "quadratic part deviates from the unfolding form by {defect:.3e}"
        )));
    }
    let low = h.degree_part(0).coeff_norm() + h.degree_part(1).coeff_norm();
    if low > 1e-12 * scale {
        return Err(Error::Config(
            "input must have an equilibrium at the origin (no constant/linear part)".into(),
        ));
    }

    let h2_w = poly::to_rotation(&h2_expected);

    // Stage 1a: remove the cubic part (odd terms have no invariant component).
    let rhs3 = poly::to_rotation(&h.degree_part(3)).noninvariant_part();
    let chi3_w = solve_homological(&h2_w, &rhs3, 3)?;
    let (chi3, imag3) = poly::to_cartesian(&chi3_w);
    debug_assert!(imag3 < 1e-10 * scale.max(1.0));
    let h_a = lie_transform(h, &chi3, DEGREE_CAP);
    let leftover3 = h_a.degree_part(3).coeff_norm();
    if leftover3 > 1e-9 * scale {
        return Err(Error::Numeric(format!(
            "cubic terms survived normalization: {leftover3:.3e}"
        )));
    }

    // Stage 1b: remove the noninvariant quartic part.
    let rhs4 = poly::to_rotation(&h_a.degree_part(4)).noninvariant_part();
    let chi4_w = solve_homological(&h2_w, &rhs4, 4)?;
    let (chi4, imag4) = poly::to_cartesian(&chi4_w);
    debug_assert!(imag4 < 1e-10 * scale.max(1.0));
    let h_b = lie_transform(&h_a, &chi4, DEGREE_CAP);

    // Stage 2: reduce the invariant quartic part to span{M², SM, S²} modulo
    // the image of ad_N; the kept S² coefficient absorbs MN/6 through the
    // relation {MZ, N} = 6MN − S².
    let k4 = h_b.degree_part(4).drop_small(1e-13 * scale);
    let x = invariant_quartic_coordinates(&k4)?;
    let [c_m2, c_mn, c_n2, c_ms, c_ns, c_s2, c_mz, c_nz, c_sz] = x;
    let kept_m2 = c_m2;
    let kept_ms = c_ms;
    let kept_s2 = c_s2 + c_mn / 6.0;

    let m = m_invariant();
    let n = n_invariant();
    let s = s_invariant();
    let z = z_invariant();
    let chi4s = m
        .mul(&m)
        .scale(c_mz / 2.0)
        .add(&m.mul(&n).scale(c_nz))
        .add(&m.mul(&s).scale(c_sz))
        .add(&m.mul(&z).scale(c_mn / 6.0))
        .add(&n.mul(&z).scale(c_n2 / 2.0))
        .add(&s.mul(&z).scale(c_ns / 2.0));

    let generator = chi3.add(&chi4).add(&chi4s);
    let coeffs = NormalFormCoefficients {
        lambda0: p.lambda0,
        mu1: p.mu1,
        mu2: p.mu2,
        b: kept_m2 / 2.0,
        c1: kept_ms / 2.0,
        c2: kept_s2,
        omega: omega.to_vec(),
    };
    Ok((coeffs, generator))
}

/// Hamiltonian vector field of a polynomial: `X_χ = J ∇χ`.
pub fn hamiltonian_field(chi: &Poly, z: &[f64; 4]) -> [f64; 4] {
    let g = chi.grad_eval(z);
    [g[2], g[3], -g[0], -g[1]]
}

/// Time-1 flow of `X_χ` by `n_steps` implicit-midpoint steps, together with
/// the Jacobian accumulated from the per-step Cayley transforms (exactly
/// symplectic when the per-step linearization is Hamiltonian).
pub fn time1_flow(chi: &Poly, z0: &[f64; 4], n_steps: usize) -> Result<([f64; 4], Matrix4<f64>)> {
    let dt = 1.0 / n_steps as f64;
    let mut z = *z0;
    let mut jac = Matrix4::<f64>::identity();
    let grads: [Poly; 4] = [chi.diff(0), chi.diff(1), chi.diff(2), chi.diff(3)];
    let hess = |z: &[f64; 4]| {
        let mut h = Matrix4::<f64>::zeros();
        for (i, gi) in grads.iter().enumerate() {
            let gg = gi.grad_eval(z);
            for j in 0..4 {
                h[(i, j)] = gg[j];
            }
        }
        h
    };
    let j_mat = crate::linstab::standard_j();
    for _ in 0..n_steps {
        // midpoint solve by fixed-point iteration
        let mut mid = z;
        let mut znext = z;
        for _ in 0..100 {
            let f = hamiltonian_field(chi, &mid);
            let mut zn = z;
            for i in 0..4 {
                zn[i] = z[i] + dt * f[i];
            }
            let mut delta = 0.0_f64;
            for i in 0..4 {
                delta = delta.max((zn[i] - znext[i]).abs());
                znext[i] = zn[i];
                mid[i] = 0.5 * (z[i] + zn[i]);
            }
            if delta < 1e-15 {
                break;
            }
        }
        let a = j_mat * hess(&mid);
        let lhs = Matrix4::identity() - 0.5 * dt * a;
        let rhs = Matrix4::identity() + 0.5 * dt * a;
        let step_jac = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("flow Jacobian solve failed".into()))?;
        jac = step_jac * jac;
        z = znext;
    }
    Ok((z, jac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_z(rng: &mut ChaCha8Rng, r: f64) -> [f64; 4] {
        [
            rng.random_range(-r..r),
            rng.random_range(-r..r),
            rng.random_range(-r..r),
            rng.random_range(-r..r),
        ]
    }

    fn random_cubic(rng: &mut ChaCha8Rng) -> Poly {
        let mut p = Poly::zero();
        for e in monomials_of_degree(3) {
            p.add_term(e, rng.random_range(-0.5..0.5));
        }
        p
    }

    #[test]
    fn invariants_examples() {
        let q = invariants(&[0.0; 4]);
        assert_eq!((q.s, q.m, q.n), (0.0, 0.0, 0.0));
        let q = invariants(&[1.0, 0.0, 0.0, 1.0]);
        assert_eq!((q.s, q.m, q.n), (1.0, 0.5, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10_000 {
            let z = random_z(&mut rng, 2.0);
            let q = invariants(&z);
            let zh = z_helper(&z);
            let lhs = q.s * q.s + zh * zh;
            let rhs = 4.0 * q.m * q.n;
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn average_fixes_invariants_and_kills_odd_terms() {
        let m = m_invariant();
        let m2 = m.mul(&m);
        assert_eq!(s1_average(&m2).unwrap(), m2);
        let z1 = Poly::monomial([1, 0, 0, 0], 1.0);
        assert!(s1_average(&z1).unwrap().is_zero());
    }

    #[test]
    fn average_matches_discrete_rotation_oracle() {
        // The S¹-average of a polynomial of degree ≤ 6 equals the average
        // over the cyclic subgroup of order 8.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut h = Poly::zero();
        for _ in 0..25 {
            let mut e = [0u8; 4];
            loop {
                for x in &mut e {
                    *x = rng.random_range(0..=4);
                }
                if e.iter().map(|&v| v as u32).sum::<u32>() <= 6 {
                    break;
                }
            }
            h.add_term(e, rng.random_range(-1.0..1.0));
        }
        let avg = s1_average(&h).unwrap();
        let nrot = 8;
        for _ in 0..50 {
            let z = random_z(&mut rng, 1.0);
            let mut acc = 0.0;
            for j in 0..nrot {
                let t = std::f64::consts::TAU * j as f64 / nrot as f64;
                let (ct, st) = (t.cos(), t.sin());
                let zr = [
                    ct * z[0] - st * z[1],
                    st * z[0] + ct * z[1],
                    ct * z[2] - st * z[3],
                    st * z[2] + ct * z[3],
                ];
                acc += h.eval(&zr);
            }
            acc /= nrot as f64;
            assert!(
                (avg.eval(&z) - acc).abs() < 1e-11,
                "average mismatch {:.3e}",
                (avg.eval(&z) - acc).abs()
            );
        }
    }

    #[test]
    fn average_is_idempotent_projection_commuting_with_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let mut h = Poly::zero();
            for _ in 0..15 {
                let mut e = [0u8; 4];
                loop {
                    for x in &mut e {
                        *x = rng.random_range(0..=3);
                    }
                    if e.iter().map(|&v| v as u32).sum::<u32>() <= 6 {
                        break;
                    }
                }
                h.add_term(e, rng.random_range(-1.0..1.0));
            }
            let a1 = s1_average(&h).unwrap();
            let a2 = s1_average(&a1).unwrap();
            assert!(a2.sub(&a1).coeff_norm() < 1e-13);
            let br = a1.poisson(&s_invariant());
            assert!(br.coeff_norm() < 1e-12 * h.coeff_norm().max(1.0));
        }
    }

    #[test]
    fn capacity_error_beyond_cap() {
        let p = Poly::monomial([7, 0, 0, 0], 1.0);
        assert!(matches!(s1_average(&p), Err(Error::Capacity(_))));
    }

    #[test]
    fn supercriticality_cases() {
        let mut c = NormalFormCoefficients {
            lambda0: 1.0,
            mu1: 0.0,
            mu2: 0.0,
            b: 1.0,
            c1: 0.0,
            c2: 0.0,
            omega: vec![],
        };
        assert_eq!(supercriticality_test(&c, 1e-12), Criticality::Supercritical);
        c.b = -1.0;
        assert_eq!(supercriticality_test(&c, 1e-12), Criticality::Subcritical);
        c.b = 0.0;
        assert_eq!(supercriticality_test(&c, 1e-12), Criticality::Degenerate);
    }

    #[test]
    fn gint_hand_value_and_s_commutation() {
        let c = NormalFormCoefficients {
            lambda0: 1.0,
            mu1: 0.0,
            mu2: 0.0,
            b: 1.0,
            c1: 0.0,
            c2: 0.0,
            omega: vec![],
        };
        assert_eq!(evaluate_gint(&[], &[0.0; 4], &c), 0.0);
        let v = evaluate_gint(&[], &[1.0, 0.0, 0.0, 1.0], &c);
        assert!((v - 2.0).abs() < 1e-15);

        // {G_int, S} = 0 as polynomials and on random points
        let g = gint_zpart(&c);
        assert!(g.poisson(&s_invariant()).coeff_norm() < 1e-14);
        let c2 = NormalFormCoefficients {
            lambda0: 0.8,
            mu1: 0.1,
            mu2: -0.4,
            b: 0.7,
            c1: 0.3,
            c2: -0.2,
            omega: vec![],
        };
        let g2 = gint_zpart(&c2);
        let br = g2.poisson(&s_invariant());
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..10_000 {
            let z = random_z(&mut rng, 1.5);
            assert!(br.eval(&z).abs() < 1e-11);
        }
    }

    #[test]
    fn normalize_identity_on_gint_form() {
        let p = UnfoldingParams::new(1.0, 0.0, 0.3).unwrap();
        let truth = NormalFormCoefficients {
            lambda0: 1.0,
            mu1: 0.0,
            mu2: 0.3,
            b: 0.9,
            c1: -0.2,
            c2: 0.4,
            omega: vec![1.0, 2.0],
        };
        let h = gint_zpart(&truth);
        let (coeffs, gen) = birkhoff_normalize(&h, &p, &[1.0, 2.0], 4).unwrap();
        assert!(gen.coeff_norm() < 1e-12);
        assert!((coeffs.b - truth.b).abs() < 1e-12);
        assert!((coeffs.c1 - truth.c1).abs() < 1e-12);
        assert!((coeffs.c2 - truth.c2).abs() < 1e-12);
        assert_eq!(coeffs.omega, truth.omega);
    }

    #[test]
    fn normalize_removes_average_free_quartic() {
        // H = quadratic + α(z₁⁴ − avg(z₁⁴)): the added part is removable and
        // the extracted quartic coefficients stay zero.
        let p = UnfoldingParams::new(1.0, 0.0, 0.2).unwrap();
        let z14 = Poly::monomial([4, 0, 0, 0], 1.0);
        let avg = s1_average(&z14).unwrap();
        let h = quadratic_part(&p).add(&z14.sub(&avg).scale(0.35));
        let (coeffs, _gen) = birkhoff_normalize(&h, &p, &[], 4).unwrap();
        assert!(coeffs.b.abs() < 1e-10, "b = {}", coeffs.b);
        assert!(coeffs.c1.abs() < 1e-10);
        assert!(coeffs.c2.abs() < 1e-10);
    }

    #[test]
    fn roundtrip_recovers_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..5 {
            let p = UnfoldingParams::new(1.0, 0.0, rng.random_range(-0.3..0.3)).unwrap();
            let truth = NormalFormCoefficients {
                lambda0: p.lambda0,
                mu1: p.mu1,
                mu2: p.mu2,
                b: rng.random_range(0.3..1.2),
                c1: rng.random_range(-0.5..0.5),
                c2: rng.random_range(-0.5..0.5),
                omega: vec![],
            };
            let gint = gint_zpart(&truth);
            let chi = random_cubic(&mut rng);
            let pushed = lie_transform(&gint, &chi, DEGREE_CAP);
            let (coeffs, _gen) = birkhoff_normalize(&pushed, &p, &[], 4).unwrap();
            assert!((coeffs.mu2 - truth.mu2).abs() < 1e-9, "mu2");
            assert!((coeffs.b - truth.b).abs() < 1e-6, "b: {} vs {}", coeffs.b, truth.b);
            assert!((coeffs.c1 - truth.c1).abs() < 1e-6, "c1");
            assert!((coeffs.c2 - truth.c2).abs() < 1e-6, "c2");
        }
    }

    #[test]
    fn roundtrip_remainder_has_quintic_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let p = UnfoldingParams::new(1.0, 0.0, 0.15).unwrap();
        let truth = NormalFormCoefficients {
            lambda0: 1.0,
            mu1: 0.0,
            mu2: 0.15,
            b: 0.8,
            c1: 0.1,
            c2: -0.25,
            omega: vec![],
        };
        let gint = gint_zpart(&truth);
        let chi = random_cubic(&mut rng);
        let pushed = lie_transform(&gint, &chi, DEGREE_CAP);
        let (_coeffs, gen) = birkhoff_normalize(&pushed, &p, &[], 4).unwrap();
        // Extend the series past the cap: the composition of the degree-6
        // input with the flow of the generator is exact at any finite degree.
        let normalized = lie_transform(&pushed, &gen, 12);
        let remainder = normalized.sub(&gint).drop_small(1e-10 * gint.coeff_norm());
        assert!(!remainder.is_zero());
        assert!(remainder.min_degree() >= 5, "min degree {}", remainder.min_degree());

        // slope of |remainder| along rays
        let z0 = [0.7, -0.4, 0.5, 0.8];
        let mut pts = Vec::new();
        for k in 0..6 {
            let t = 0.5_f64.powi(k) * 0.3;
            let z = [t * z0[0], t * z0[1], t * z0[2], t * z0[3]];
            let r = remainder.eval(&z).abs();
            if r > 1e-300 {
                pts.push((t.ln(), r.ln()));
            }
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope >= 5.0 - 0.3, "remainder slope {slope}");
    }

    #[test]
    fn generator_flow_is_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let chi = random_cubic(&mut rng).scale(0.2);
        let j = crate::linstab::standard_j();
        for _ in 0..1000 {
            let z0 = random_z(&mut rng, 0.5);
            let (_z1, jac) = time1_flow(&chi, &z0, 64).unwrap();
            let defect = (jac.transpose() * j * jac - j).norm();
            assert!(defect < 1e-10, "symplectic defect {defect:.3e}");
        }
    }

    #[test]
    fn flow_agrees_with_lie_transform() {
        // h ∘ Φ¹ evaluated two ways: Lie series on polynomials vs numerical
        // flow of the generator.
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let chi = random_cubic(&mut rng).scale(0.1);
        let h = gint_zpart(&NormalFormCoefficients {
            lambda0: 1.0,
            mu1: 0.0,
            mu2: 0.2,
            b: 0.6,
            c1: 0.0,
            c2: 0.0,
            omega: vec![],
        });
        let pushed = lie_transform(&h, &chi, 10);
        for _ in 0..20 {
            let z0 = random_z(&mut rng, 0.05);
            let (z1, _) = time1_flow(&chi, &z0, 200).unwrap();
            let lhs = pushed.eval(&z0);
            let rhs = h.eval(&z1);
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "Lie series vs flow: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn coefficient_equivariance_under_scaling() {
        let p = UnfoldingParams::new(1.0, 0.0, 0.1).unwrap();
        let truth = NormalFormCoefficients {
            lambda0: 1.0,
            mu1: 0.0,
            mu2: 0.1,
            b: 0.5,
            c1: 0.2,
            c2: -0.3,
            omega: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let chi = random_cubic(&mut rng);
        let pushed = lie_transform(&gint_zpart(&truth), &chi, DEGREE_CAP);
        let s = 0.5;
        // H(s z)/s² has the same quadratic part; b picks up s².
        let scaled = pushed.scale_vars(s).scale(1.0 / (s * s));
        let (c_ref, _) = birkhoff_normalize(&pushed, &p, &[], 4).unwrap();
        let (c_scaled, _) = birkhoff_normalize(&scaled, &p, &[], 4).unwrap();
        assert!((c_scaled.mu2 - c_ref.mu2).abs() < 1e-10);
        assert!((c_scaled.b - s * s * c_ref.b).abs() < 1e-8);
    }

    #[test]
    fn order_and_quadratic_part_are_enforced() {
        let p = UnfoldingParams::new(1.0, 0.0, 0.1).unwrap();
        let h = quadratic_part(&p);
        assert!(matches!(
            birkhoff_normalize(&h, &p, &[], 3),
            Err(Error::Config(_))
        ));
        let wrong = quadratic_part(&UnfoldingParams::new(1.0, 0.0, 0.5).unwrap());
        assert!(matches!(
            birkhoff_normalize(&wrong, &p, &[], 4),
            Err(Error::Config(_))
        ));
    }
}
