//! Linear stability of the vertical rotations: Floquet matrices, the explicit
//! two-parameter unfolding of the 1:-1 resonant matrix, spectrum
//! classification through the eigenvalue collision, the gyroscopic
//! stabilization threshold, and non-degeneracy / Hölder diagnostics.
//!
//! Matrices live in `sp(4, R)` for the symplectic form
//! `dz₁∧dz₃ + dz₂∧dz₄`, i.e. `JΩ` is symmetric with
//! `J = [[0, I], [-I, 0]]` in coordinates `(z₁, z₂, z₃, z₄)`.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::TopParams;

/// The standard symplectic matrix for the form `dz₁∧dz₃ + dz₂∧dz₄`.
pub fn standard_j() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, 0.0,
    )
}

/// Generator of the simultaneous rotation in the `(z₁,z₂)` and `(z₃,z₄)`
/// planes (the linearized flow of the invariant `S = z₁z₄ − z₂z₃`).
pub fn s_rotation_generator() -> Matrix4<f64> {
    Matrix4::new(
        0.0, -1.0, 0.0, 0.0, //
        1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, -1.0, //
        0.0, 0.0, 1.0, 0.0,
    )
}

/// A 4×4 infinitesimally symplectic matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloquetMatrix(pub Matrix4<f64>);

impl FloquetMatrix {
    /// Validating constructor: `JΩ` must be symmetric.
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let jm = standard_j() * m;
        let defect = (jm - jm.transpose()).norm();
        let tol = 1e-12 * m.norm().max(1.0);
        if defect > tol {
            return Err(Error::Structure(format!(
                "matrix is not infinitesimally symplectic: ‖JΩ − (JΩ)ᵀ‖ = {defect:.3e}"
            )));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    /// Eigenvalues, via the complexified 2×2 reduction when the matrix
    /// commutes with the S-rotation, else via the quartic characteristic
    /// polynomial solved on its companion matrix.
    pub fn eigenvalues(&self) -> [Complex64; 4] {
        let m = &self.0;
        let r = s_rotation_generator();
        let comm = (m * r - r * m).norm();
        if comm <= 1e-12 * m.norm().max(1.0) {
            // ℂ-linear on (w₁, w₂) = (z₁+iz₂, z₃+iz₄): read the 2×2 block off
            // columns 1 and 3.
            let b = Matrix2::new(
                Complex64::new(m[(0, 0)], m[(1, 0)]),
                Complex64::new(m[(0, 2)], m[(1, 2)]),
                Complex64::new(m[(2, 0)], m[(3, 0)]),
                Complex64::new(m[(2, 2)], m[(3, 2)]),
            );
            let tr = b[(0, 0)] + b[(1, 1)];
            let det = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
            let disc = (tr * tr - 4.0 * det).sqrt();
            let l1 = 0.5 * (tr + disc);
            let l2 = 0.5 * (tr - disc);
            [l1, l2, l1.conj(), l2.conj()]
        } else {
            let coeffs = char_poly_coeffs(m);
            quartic_roots(&coeffs)
        }
    }
}

/// Coefficients `c₀..c₃` of `λ⁴ + c₃λ³ + c₂λ² + c₁λ + c₀` by the
/// Faddeev–LeVerrier recursion.
fn char_poly_coeffs(m: &Matrix4<f64>) -> [f64; 4] {
    let mut mk = *m;
    let c3 = -mk.trace();
    let mut acc = mk + Matrix4::from_diagonal_element(c3);
    mk = m * acc;
    let c2 = -mk.trace() / 2.0;
    acc = mk + Matrix4::from_diagonal_element(c2);
    mk = m * acc;
    let c1 = -mk.trace() / 3.0;
    acc = mk + Matrix4::from_diagonal_element(c1);
    mk = m * acc;
    let c0 = -mk.trace() / 4.0;
    [c0, c1, c2, c3]
}

/// Roots of `λ⁴ + c₃λ³ + c₂λ² + c₁λ + c₀`.
///
/// Infinitesimally symplectic matrices have even characteristic polynomials
/// (the spectrum is symmetric under negation), so the biquadratic branch is
/// the one exercised in practice; the Durand–Kerner iteration covers general
/// coefficients with a bounded iteration count.
fn quartic_roots(c: &[f64; 4]) -> [Complex64; 4] {
    let scale = c.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    if c[3].abs() <= 1e-12 * scale && c[1].abs() <= 1e-12 * scale {
        // λ⁴ + pλ² + q = 0
        let p = Complex64::new(c[2], 0.0);
        let q = Complex64::new(c[0], 0.0);
        let disc = (p * p - 4.0 * q).sqrt();
        let r1 = 0.5 * (-p + disc);
        let r2 = 0.5 * (-p - disc);
        let s1 = r1.sqrt();
        let s2 = r2.sqrt();
        return [s1, -s1, s2, -s2];
    }
    durand_kerner(c)
}

fn durand_kerner(c: &[f64; 4]) -> [Complex64; 4] {
    let eval = |z: Complex64| {
        (((z + c[3]) * z + c[2]) * z + c[1]) * z + c[0]
    };
    // standard non-real starting configuration
    let seed = Complex64::new(0.4, 0.9);
    let mut roots = [seed, seed * seed, seed * seed * seed, seed * seed * seed * seed];
    for _ in 0..200 {
        let mut delta = 0.0_f64;
        for i in 0..4 {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let d = eval(roots[i]) / denom;
            roots[i] -= d;
            delta = delta.max(d.norm());
        }
        if delta < 1e-14 {
            break;
        }
    }
    roots
}

/// Eigenvalue configuration of a Floquet matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumClass {
    /// Complex quartet `±α ± iβ` with `α ≠ 0`.
    HyperbolicQuartet,
    /// Double purely imaginary pair with non-trivial nilpotent part.
    Resonant11,
    /// Two distinct purely imaginary pairs.
    EllipticPairs,
    /// Anything else (zero eigenvalues, semisimple double pairs, mixed).
    Degenerate,
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub eigenvalues: [Complex64; 4],
    pub class: SpectrumClass,
    /// Positive imaginary parts of the purely imaginary eigenvalues, ascending.
    pub normal_frequencies: Vec<f64>,
    pub nilpotent: bool,
    /// Determinant of the input matrix (invertibility is assumed by the
    /// persistence theory; we only report it).
    pub det: f64,
}

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

/// Classify a Floquet spectrum through the 1:-1 collision.
///
/// `tol` is the scale for "purely imaginary" and "distinct" decisions on the
/// eigenvalues. Nilpotency at a collision is decided by the rank of
/// `(Ω − λI)(Ω − λ̄I) = Ω² + |λ|²I`, computed from singular values with
/// threshold `1e-8 ‖Ω‖`.
pub fn classify_spectrum(m: &FloquetMatrix, tol: f64) -> Result<SpectrumReport> {
    let eigs = m.eigenvalues();
    let scale = m.0.norm().max(1.0);
    let tol = tol * scale;
    let all_imag = eigs.iter().all(|l| l.re.abs() <= tol);
    let all_off_axis = eigs.iter().all(|l| l.re.abs() > tol);
    let any_zero = eigs.iter().any(|l| l.norm() <= tol);

    let mut normal_frequencies: Vec<f64> = eigs
        .iter()
        .filter(|l| l.re.abs() <= tol && l.im > tol)
        .map(|l| l.im)
        .collect();
    normal_frequencies.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut nilpotent = false;
    let class = if any_zero {
        SpectrumClass::Degenerate
    } else if all_imag {
        // distinct pairs vs collision
        let mut pos: Vec<f64> = eigs.iter().filter(|l| l.im > 0.0).map(|l| l.im).collect();
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if pos.len() == 2 && (pos[1] - pos[0]).abs() > tol {
            SpectrumClass::EllipticPairs
        } else if pos.len() == 2 {
            let beta = 0.5 * (pos[0] + pos[1]);
            let p = m.0 * m.0 + Matrix4::from_diagonal_element(beta * beta);
            let rank = svd_rank(&p, 1e-8 * scale);
            nilpotent = rank > 0;
            if nilpotent {
                SpectrumClass::Resonant11
            } else {
                SpectrumClass::Degenerate
            }
        } else {
            SpectrumClass::Degenerate
        }
    } else if all_off_axis {
        SpectrumClass::HyperbolicQuartet
    } else {
        SpectrumClass::Degenerate
    };

    Ok(SpectrumReport {
        eigenvalues: eigs,
        class,
        normal_frequencies,
        nilpotent,
        det: m.det(),
    })
}

fn svd_rank(m: &Matrix4<f64>, threshold: f64) -> usize {
    let svd = DMatrix::from_iterator(4, 4, m.iter().copied()).svd(false, false);
    svd.singular_values.iter().filter(|&&s| s > threshold).count()
}

/// Linearization of the reduced flow at the vertical rotation `P_a`,
/// restricted to the constraint tangent plane `{δu₃ = 0, δv₃ = 0}` and
/// expressed in canonical coordinates
/// `(z₁, z₂, z₃, z₄) = (δu₂, δu₁, δv₁, a δu₂ − δv₂)`.
pub fn linearize_at_pa(params: &TopParams) -> Result<FloquetMatrix> {
    params.validate()?;
    let (a, c) = (params.a, params.c);
    FloquetMatrix::new(Matrix4::new(
        0.0, -a, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        c, 0.0, 0.0, 0.0, //
        0.0, c - a * a, a, 0.0,
    ))
}

/// Parameters of the linear centralizer unfolding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnfoldingParams {
    pub lambda0: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl UnfoldingParams {
    pub fn new(lambda0: f64, mu1: f64, mu2: f64) -> Result<Self> {
        let p = Self { lambda0, mu1, mu2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 + self.mu1 > 0.0) {
            return Err(Error::Config(format!(
                "unfolding requires lambda0 + mu1 > 0, got {}",
                self.lambda0 + self.mu1
            )));
        }
        if !self.mu2.is_finite() {
            return Err(Error::Config("mu2 must be finite".into()));
        }
        Ok(())
    }

    /// Base rotation frequency `λ₀ + μ₁`.
    pub fn alpha(&self) -> f64 {
        self.lambda0 + self.mu1
    }
}

/// The linear centralizer unfolding of the 1:-1 resonant matrix:
///
/// ```text
///        ⎛   0    −λ₀−μ₁   1      0    ⎞
/// Ω(μ) = ⎜ λ₀+μ₁     0     0      1    ⎟
///        ⎜  −μ₂      0     0   −λ₀−μ₁  ⎟
///        ⎝   0      −μ₂  λ₀+μ₁    0    ⎠
/// ```
///
/// Eigenvalues are `i(λ₀+μ₁) ± i√μ₂` for `μ₂ ≥ 0` and
/// `±√(−μ₂) + i(λ₀+μ₁)` (with conjugates) for `μ₂ < 0`.
pub fn versal_unfolding(p: &UnfoldingParams) -> Result<FloquetMatrix> {
    p.validate()?;
    let al = p.alpha();
    let m2 = p.mu2;
    FloquetMatrix::new(Matrix4::new(
        0.0, -al, 1.0, 0.0, //
        al, 0.0, 0.0, 1.0, //
        -m2, 0.0, 0.0, -al, //
        0.0, -m2, al, 0.0,
    ))
}

/// Locate the gyroscopic stabilization threshold `a₀` by bisection on the
/// discriminant `a² − 4c` of the linearization at `P_a`.
pub fn stabilization_threshold(c: f64, bracket: (f64, f64), tol: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Config(format!("c must be positive, got {c}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config("tol must be positive".into()));
    }
    let disc = |a: f64| a * a - 4.0 * c;
    let (mut lo, mut hi) = bracket;
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let (flo, fhi) = (disc(lo), disc(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket(format!(
            "no hyperbolic/elliptic transition in [{lo}, {hi}] for c = {c}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = disc(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Map top parameters onto the unfolding: `(λ₀+μ₁, μ₂) = (a/2, a²/4 − c)`.
pub fn top_to_unfolding(a: f64, c: f64) -> Result<UnfoldingParams> {
    if !(a > 0.0) {
        return Err(Error::Config(format!("top_to_unfolding requires a > 0, got {a}")));
    }
    UnfoldingParams::new(0.5 * a, 0.0, 0.25 * a * a - c)
}

/// Result of the non-degeneracy test.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NondegeneracyReport {
    /// Jacobian of the internal-frequency map has full rank m.
    pub submersive: bool,
    /// The product map is transversal to `{ω₀} × Orbit(Ω₀)`.
    pub versal: bool,
    pub rank_omega: usize,
    pub rank_combined: usize,
}

/// Basis of `sp(4, R)`: `J·Sym` for the 10 elementary symmetric matrices.
fn sp4_basis() -> Vec<Matrix4<f64>> {
    let j = standard_j();
    let mut basis = Vec::with_capacity(10);
    for i in 0..4 {
        for k in i..4 {
            let mut s = Matrix4::zeros();
            s[(i, k)] = 1.0;
            s[(k, i)] = 1.0;
            basis.push(j * s);
        }
    }
    basis
}

/// Numerical check of the non-degeneracy conditions at `nu0`.
///
/// `omega_map` is the internal-frequency map `ν ↦ ω(ν) ∈ ℝ^m`, `omega_matrix`
/// the Floquet family `ν ↦ Ω(ν)`. `submersive` tests `rank Dω(ν₀) = m`;
/// `versal` tests that the columns of `D(ω × Ω)(ν₀)` together with the
/// tangent space of the similarity orbit of `Ω(ν₀)` span `ℝ^m × sp(4, R)`.
/// Derivatives are central differences with step `probe_radius`.
pub fn nondegeneracy_check(
    omega_map: &dyn Fn(&[f64]) -> Vec<f64>,
    omega_matrix: &dyn Fn(&[f64]) -> Matrix4<f64>,
    nu0: &[f64],
    probe_radius: f64,
) -> Result<NondegeneracyReport> {
    let p = nu0.len();
    let m = omega_map(nu0).len();
    if p < m + 2 {
        return Err(Error::Dimension(format!(
            "need at least m + 2 = {} parameters, got p = {p}",
            m + 2
        )));
    }
    if !(probe_radius > 0.0) {
        return Err(Error::Config("probe_radius must be positive".into()));
    }
    let h = probe_radius;
    let mut nu = nu0.to_vec();

    // Dω(ν₀): m × p
    let mut d_omega = DMatrix::zeros(m, p);
    // DΩ(ν₀): 16 × p (vectorized)
    let mut d_mat = DMatrix::zeros(16, p);
    for j in 0..p {
        nu[j] = nu0[j] + h;
        let wp = omega_map(&nu);
        let mp = omega_matrix(&nu);
        nu[j] = nu0[j] - h;
        let wm = omega_map(&nu);
        let mm = omega_matrix(&nu);
        nu[j] = nu0[j];
        for i in 0..m {
            d_omega[(i, j)] = (wp[i] - wm[i]) / (2.0 * h);
        }
        for (i, (a, b)) in mp.iter().zip(mm.iter()).enumerate() {
            d_mat[(i, j)] = (a - b) / (2.0 * h);
        }
    }

    let rank_omega = mat_rank(&d_omega);
    let submersive = rank_omega == m;

    // Combined: columns (Dω_j, DΩ_j) plus columns (0, [X_i, Ω₀]).
    let m0 = omega_matrix(nu0);
    let basis = sp4_basis();
    let mut combined = DMatrix::zeros(m + 16, p + basis.len());
    for j in 0..p {
        for i in 0..m {
            combined[(i, j)] = d_omega[(i, j)];
        }
        for i in 0..16 {
            combined[(m + i, j)] = d_mat[(i, j)];
        }
    }
    for (k, x) in basis.iter().enumerate() {
        let t = x * m0 - m0 * x;
        for (i, v) in t.iter().enumerate() {
            combined[(m + i, p + k)] = *v;
        }
    }
    let rank_combined = mat_rank(&combined);
    // span must be all of ℝ^m × sp(4,R): m + 10 dimensions
    let versal = rank_combined == m + 10;

    Ok(NondegeneracyReport {
        submersive,
        versal,
        rank_omega,
        rank_combined,
    })
}

fn mat_rank(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > 1e-8 * smax)
        .count()
}

/// Estimate the Hölder exponent of the imaginary parts of a matrix family
/// along a one-parameter path `t ↦ Ω(t)` at `t₀`.
///
/// For each radius `r` the distance is the largest (over eigenvalues of
/// `Ω(t₀+r)`) gap to the nearest imaginary part in the base spectrum; the
/// exponent is the least-squares slope of `log dist` against `log r`.
/// A constant family is reported as `+∞`.
pub fn holder_exponent_estimate(
    family: &dyn Fn(f64) -> Matrix4<f64>,
    t0: f64,
    radii: &[f64],
) -> Result<f64> {
    if radii.len() < 4 {
        return Err(Error::Estimation(format!(
            "need at least 4 radii, got {}",
            radii.len()
        )));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Estimation("radii must be positive and strictly decreasing".into()));
    }
    let span = radii[0] / radii[radii.len() - 1];
    if span < 100.0 {
        return Err(Error::Estimation(format!(
            "radii must span at least two decades, got factor {span:.3}"
        )));
    }
    let base = FloquetMatrix::new(family(t0))?.eigenvalues();
    let mut pts = Vec::new();
    for &r in radii {
        let eigs = FloquetMatrix::new(family(t0 + r))?.eigenvalues();
        let mut dist = 0.0_f64;
        for e in &eigs {
            let gap = base
                .iter()
                .map(|b| (e.im - b.im).abs())
                .fold(f64::INFINITY, f64::min);
            dist = dist.max(gap);
        }
        if dist > 1e-14 {
            pts.push((r.ln(), dist.ln()));
        }
    }
    if pts.is_empty() {
        return Ok(f64::INFINITY);
    }
    if pts.len() < 4 {
        return Err(Error::Estimation(
            "too few usable radii for a slope fit (distances vanish)".into(),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::Estimation("degenerate least-squares fit".into()));
    }
    Ok((n * sxy - sx * sy) / denom)
}

/// Sort eigenvalues lexicographically by (Re, Im); for set comparisons.
pub fn sorted_eigenvalues(eigs: &[Complex64; 4]) -> [Complex64; 4] {
    let mut v = *eigs;
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    v
}

/// Greedy matching distance between two eigenvalue multisets.
pub fn spectral_distance(a: &[Complex64; 4], b: &[Complex64; 4]) -> f64 {
    let mut used = [false; 4];
    let mut worst = 0.0_f64;
    for ea in a {
        let mut best = f64::INFINITY;
        let mut best_i = 0;
        for (i, eb) in b.iter().enumerate() {
            if used[i] {
                continue;
            }
            let d = (ea - eb).norm();
            if d < best {
                best = d;
                best_i = i;
            }
        }
        used[best_i] = true;
        worst = worst.max(best);
    }
    worst
}
