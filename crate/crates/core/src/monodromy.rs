//! Rotation numbers of the reduced one-degree-of-freedom dynamics, their
//! continuation around loops in the value space of `(G_red, S)`, the integer
//! monodromy matrix of the torus bundle, and the Kolmogorov non-degeneracy
//! diagnostic.
//!
//! On the level set `{G_red = g, S = s}` the reduced motion satisfies
//! `Ṁ = Z`, `Z² = P(M)` with the cubic
//! `P(M) = −2bM³ − 4(μ₂+c₁s)M² + 4(g − αs − c₂s²)M − s²`; regular values in
//! the open region give `P > 0` between two positive roots. The conjugate
//! angle of `S` advances by
//!
//! ```text
//! Θ = 2 ∫ [α + c₁M + 2c₂s + s/(2M)] dM / √P(M)
//! ```
//!
//! over one libration period. The `s/(2M)` term carries a ±π jump as `s`
//! crosses zero close to the thread, which is what the loop continuation
//! converts into the integer monodromy entry.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normalform::NormalFormCoefficients;

/// A closed polygonal loop in the `(s, g)` value plane at fixed detuning.
#[derive(Clone, Debug, Serialize)]
pub struct LoopSpec {
    pub mu2: f64,
    pub nodes: Vec<(f64, f64)>,
}

impl LoopSpec {
    pub fn new(mu2: f64, nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.len() < 8 {
            return Err(Error::Config(format!(
                "loop needs at least 8 nodes, got {}",
                nodes.len()
            )));
        }
        Ok(Self { mu2, nodes })
    }

    /// Elliptical loop of `turns` windings around the origin of the `(s, g)`
    /// plane, sampled at `steps` nodes per turn.
    pub fn ellipse(mu2: f64, radius_s: f64, radius_g: f64, steps: usize, turns: i32) -> Result<Self> {
        if steps < 8 {
            return Err(Error::Config("need at least 8 steps per turn".into()));
        }
        if !(radius_s > 0.0) || !(radius_g > 0.0) {
            return Err(Error::Config("loop radii must be positive".into()));
        }
        let total = steps * turns.unsigned_abs() as usize;
        let orient = if turns >= 0 { 1.0 } else { -1.0 };
        let nodes = (0..total)
            .map(|i| {
                let t = orient * std::f64::consts::TAU * i as f64 / steps as f64;
                (radius_s * t.cos(), radius_g * t.sin())
            })
            .collect();
        Self::new(mu2, nodes)
    }

    /// Winding number of the polygon around the origin.
    pub fn winding(&self) -> i64 {
        let mut total = 0.0;
        let n = self.nodes.len();
        for i in 0..n {
            let (x1, y1) = self.nodes[i];
            let (x2, y2) = self.nodes[(i + 1) % n];
            let cross = x1 * y2 - y1 * x2;
            let dot = x1 * x2 + y1 * y2;
            total += cross.atan2(dot);
        }
        (total / std::f64::consts::TAU).round() as i64
    }
}

/// Integer monodromy matrix with its continuation log.
#[derive(Clone, Debug, Serialize)]
pub struct MonodromyResult {
    pub matrix: [[i64; 2]; 2],
    pub winding: i64,
    /// `(s, g, Θ)` along the continued branch, including refinements.
    pub nodes: Vec<(f64, f64, f64)>,
}

struct Cubic {
    r1: f64,
    m_lo: f64,
    m_hi: f64,
}

/// Roots of `P(M)` for a regular value; errors on non-regular values.
fn libration_roots(c: &NormalFormCoefficients, s: f64, g: f64) -> Result<Cubic> {
    let b = c.b;
    if !(b > 0.0) {
        return Err(Error::Unsupported(
            "rotation numbers require the supercritical case b > 0".into(),
        ));
    }
    // P(M) = -2b M³ - 4(μ₂+c₁s) M² + 4(g - αs - c₂s²) M - s²
    // normalized: M³ + p M² + q M + r
    let p = 2.0 * (c.mu2 + c.c1 * s) / b;
    let q = -2.0 * (g - c.alpha() * s - c.c2 * s * s) / b;
    let r = s * s / (2.0 * b);
    let qq = (p * p - 3.0 * q) / 9.0;
    let rr = (2.0 * p * p * p - 9.0 * p * q + 27.0 * r) / 54.0;
    if !(rr * rr < qq * qq * qq) {
        return Err(Error::Stratum(format!(
            "(s, g) = ({s}, {g}) is not a regular open-region value (no libration window)"
        )));
    }
    let theta = (rr / qq.powi(3).sqrt()).acos();
    let mut roots = [0.0; 3];
    for (k, root) in roots.iter_mut().enumerate() {
        *root = -2.0 * qq.sqrt() * ((theta + std::f64::consts::TAU * k as f64) / 3.0).cos()
            - p / 3.0;
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Newton polish on P itself
    let pval = |m: f64| -2.0 * b * m.powi(3) - 4.0 * (c.mu2 + c.c1 * s) * m * m
        + 4.0 * (g - c.alpha() * s - c.c2 * s * s) * m
        - s * s;
    let dval = |m: f64| {
        -6.0 * b * m * m - 8.0 * (c.mu2 + c.c1 * s) * m
            + 4.0 * (g - c.alpha() * s - c.c2 * s * s)
    };
    for root in roots.iter_mut() {
        for _ in 0..3 {
            let d = dval(*root);
            if d.abs() > 1e-14 {
                *root -= pval(*root) / d;
            }
        }
    }
    let [r1, m_lo, m_hi] = roots;
    let scale = m_hi.abs().max(1.0);
    if !(m_hi - m_lo > 1e-12 * scale) || !(m_lo - r1 > 1e-12 * scale) {
        return Err(Error::Stratum(format!(
            "(s, g) = ({s}, {g}) lies on or too close to the critical surface"
        )));
    }
    if m_hi <= 0.0 || pval(0.5 * (m_lo + m_hi)) <= 0.0 {
        return Err(Error::Stratum(format!(
            "(s, g) = ({s}, {g}) has no positive libration window"
        )));
    }
    Ok(Cubic { r1, m_lo, m_hi })
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numeric(
            "rotation-number quadrature failed to converge".into(),
        ));
    }
    Ok(
        adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)?
            + adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)?,
    )
}

/// Angle advance of the `S`-conjugate angle over one period of the reduced
/// orbit at the regular value `(s, g)`.
pub fn rotation_number(value: (f64, f64), c: &NormalFormCoefficients) -> Result<f64> {
    rotation_number_with_tol(value, c, 1e-11)
}

/// Same with an explicit quadrature tolerance (for self-consistency checks).
///
/// The `s/(2M)` part of the integrand spikes near the inner turning point as
/// the value approaches the thread (height `O(1/s)`, width `O(s²)`), so it is
/// split off: a comparison term with the same singular structure integrates
/// in closed form to `sπ/(√κ √(M₋M₊))` with `κ = 2b(M₋ − r₁)`, and only the
/// `O(s)`-bounded difference is integrated numerically.
pub fn rotation_number_with_tol(
    value: (f64, f64),
    c: &NormalFormCoefficients,
    tol: f64,
) -> Result<f64> {
    let (s, g) = value;
    let cubic = libration_roots(c, s, g)?;
    let (r1, m_lo, m_hi) = (cubic.r1, cubic.m_lo, cubic.m_hi);
    let width = m_hi - m_lo;
    let b = c.b;
    let alpha = c.alpha();
    let kappa = 2.0 * b * (m_lo - r1);
    let integrand = move |phi: f64| {
        let sh = (0.5 * phi).sin();
        let m = m_lo + width * sh * sh;
        let root = (2.0 * b * (m - r1)).sqrt();
        let mut val = 2.0 * (alpha + c.c1 * m + 2.0 * c.c2 * s) / root;
        if s != 0.0 {
            val += s * (1.0 / root - 1.0 / kappa.sqrt()) / m;
        }
        val
    };
    let a = 0.0;
    let bb = std::f64::consts::PI;
    let fa = integrand(a);
    let fm = integrand(0.5 * (a + bb));
    let fb = integrand(bb);
    let mut theta = adaptive_simpson(&integrand, a, bb, fa, fm, fb, tol, 48)?;
    if s != 0.0 {
        theta += s * std::f64::consts::PI / (kappa.sqrt() * (m_lo * m_hi).sqrt());
    }
    Ok(theta)
}

/// Libration period of the reduced orbit at `(s, g)`.
pub fn reduced_period(value: (f64, f64), c: &NormalFormCoefficients) -> Result<f64> {
    let (s, g) = value;
    let cubic = libration_roots(c, s, g)?;
    let (r1, m_lo, m_hi) = (cubic.r1, cubic.m_lo, cubic.m_hi);
    let width = m_hi - m_lo;
    let b = c.b;
    let integrand = move |phi: f64| {
        let sh = (0.5 * phi).sin();
        let m = m_lo + width * sh * sh;
        1.0 / (2.0 * b * (m - r1)).sqrt()
    };
    let a = 0.0;
    let bb = std::f64::consts::PI;
    let (fa, fm, fb) = (integrand(a), integrand(0.5 * bb), integrand(bb));
    Ok(2.0 * adaptive_simpson(&integrand, a, bb, fa, fm, fb, 1e-11, 48)?)
}

fn continue_branch(
    from: (f64, f64, f64),
    to: (f64, f64),
    c: &NormalFormCoefficients,
    log: &mut Vec<(f64, f64, f64)>,
    depth: usize,
) -> Result<f64> {
    let theta_raw = rotation_number(to, c)?;
    let tau = std::f64::consts::TAU;
    let k = ((from.2 - theta_raw) / tau).round();
    let adjusted = theta_raw + tau * k;
    if (adjusted - from.2).abs() <= std::f64::consts::FRAC_PI_2 {
        log.push((to.0, to.1, adjusted));
        return Ok(adjusted);
    }
    if depth == 0 {
        return Err(Error::Continuation(format!(
            "branch jump {:.3} rad between ({}, {}) and ({}, {}); refine the loop",
            (adjusted - from.2).abs(),
            from.0,
            from.1,
            to.0,
            to.1
        )));
    }
    let mid = (0.5 * (from.0 + to.0), 0.5 * (from.1 + to.1));
    let theta_mid = continue_branch(from, mid, c, log, depth - 1)?;
    continue_branch((mid.0, mid.1, theta_mid), to, c, log, depth - 1)
}

/// Continue the rotation number around the loop and extract the integer
/// monodromy matrix.
///
/// The result is the unipotent matrix `[[1, k], [0, 1]]` with `k` the number
/// of `2π` jumps accumulated by the continuous branch of `Θ`; it is reported
/// up to integer-basis conjugacy. Contractible loops give the identity.
pub fn monodromy_around_thread(
    spec: &LoopSpec,
    c: &NormalFormCoefficients,
) -> Result<MonodromyResult> {
    if spec.nodes.len() < 8 {
        return Err(Error::Config("loop needs at least 8 nodes".into()));
    }
    let mut cc = c.clone();
    cc.mu2 = spec.mu2;
    let start = spec.nodes[0];
    let theta0 = rotation_number(start, &cc)?;
    let mut log = vec![(start.0, start.1, theta0)];
    let mut current = (start.0, start.1, theta0);
    for i in 1..=spec.nodes.len() {
        let target = spec.nodes[i % spec.nodes.len()];
        let theta = continue_branch(current, target, &cc, &mut log, 14)?;
        current = (target.0, target.1, theta);
    }
    let delta = current.2 - theta0;
    let k_float = delta / std::f64::consts::TAU;
    let k = k_float.round();
    if (k_float - k).abs() > 0.02 {
        return Err(Error::Continuation(format!(
            "net branch change {delta:.6} rad is not an integer multiple of 2π"
        )));
    }
    Ok(MonodromyResult {
        matrix: [[1, k as i64], [0, 1]],
        winding: spec.winding(),
        nodes: log,
    })
}

/// Report of the action-Hessian diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct KolmogorovReport {
    pub det: f64,
    pub hessian: Vec<Vec<f64>>,
    /// Ratio of extreme singular values; infinite for singular Hessians.
    pub condition: f64,
    /// Set when the finite-difference step loses too many digits.
    pub precision_warning: bool,
    /// Determinant negligible against the Hessian scale.
    pub degenerate: bool,
}

/// Central-difference Hessian of `f` in the action variables at `y0`.
pub fn kolmogorov_hessian(
    f: &dyn Fn(&[f64]) -> f64,
    y0: &[f64],
    h: f64,
) -> Result<KolmogorovReport> {
    let m = y0.len();
    if m == 0 {
        return Err(Error::Config("empty action vector".into()));
    }
    if !(h > 0.0) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let mut y = y0.to_vec();
    let f0 = f(&y);
    let mut hess = vec![vec![0.0; m]; m];
    for i in 0..m {
        y[i] = y0[i] + h;
        let fp = f(&y);
        y[i] = y0[i] - h;
        let fm = f(&y);
        y[i] = y0[i];
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in (i + 1)..m {
            y[i] = y0[i] + h;
            y[j] = y0[j] + h;
            let fpp = f(&y);
            y[j] = y0[j] - h;
            let fpm = f(&y);
            y[i] = y0[i] - h;
            y[j] = y0[j] + h;
            let fmp = f(&y);
            y[j] = y0[j] - h;
            let fmm = f(&y);
            y[i] = y0[i];
            y[j] = y0[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| hess[i][j]);
    let det = mat.determinant();
    let svd = mat.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let scale = smax.max(f64::EPSILON);
    Ok(KolmogorovReport {
        det,
        hessian: hess,
        condition,
        precision_warning: condition > 1e7,
        degenerate: det.abs() <= 1e-8 * scale.powi(m as i32),
    })
}
