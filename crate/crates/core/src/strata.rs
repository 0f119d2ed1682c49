//! The swallowtail stratification of the torus bundle: the elliptic-family
//! cubic, the critical-value surface of `(G, S)`, stratum classification of
//! values, and the physical critical-value surface of the top in `(a, b, h)`.
//!
//! The reduced model used throughout this module (and by the monodromy
//! quadrature) is
//!
//! ```text
//! G_red(M, N, S) = (λ₀+μ₁)S + N + μ₂M + (b/2)M² + c₁SM + c₂S²
//! ```
//!
//! whose relative equilibria on the reduced space `{Z² + S² = 4MN}` satisfy
//! exactly the cubic `S² − 4bM³ − 4μ₂M² − 4c₁SM² = 0`: with `Z = 0` and `λ`
//! the multiplier of the constrained gradient, `λ² = c₁²M² + bM + μ₂` and
//! `S = 2λM + 2c₁M²`. The quartic coefficients here are therefore `b/2` and
//! `c₁` where the unreduced truncation carries `2b` and `2c₁`; the two
//! conventions are bridged by the shared [`NormalFormCoefficients`].

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{reduced_vector_field_raw, ReducedTopState};
use crate::normalform::{
    m_invariant, n_invariant, s_invariant, NormalFormCoefficients, Poly,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StratumLabel {
    /// The z = 0 family (m-tori).
    Thread,
    /// Regular part of the critical surface ((m+1)-tori).
    SurfaceEven,
    /// Open region above the surface ((m+2)-tori).
    OpenRegion,
    /// Below the surface: not attained by the bundle.
    Outside,
}

impl std::fmt::Display for StratumLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StratumLabel::Thread => "thread",
            StratumLabel::SurfaceEven => "surface",
            StratumLabel::OpenRegion => "open",
            StratumLabel::Outside => "outside",
        };
        f.write_str(s)
    }
}

/// A classified point in the `(μ₂, S, G)` value space.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StratumPoint {
    pub mu2: f64,
    pub s: f64,
    pub g: f64,
    pub label: StratumLabel,
}

/// A point on the critical surface together with its `M` parameter.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SurfaceSample {
    pub m: f64,
    pub point: StratumPoint,
}

/// Value of the top's energy-momentum map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopEMValue {
    pub a: f64,
    pub b: f64,
    pub h: f64,
}

/// A steady precession of the top together with its energy-momentum value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TopEquilibrium {
    pub u3: f64,
    pub omega: f64,
    pub kappa: f64,
    pub em: TopEMValue,
}

/// All real roots `S` of the cubic `S² − 4bM³ − 4μ₂M² − 4c₁SM² = 0`
/// at fixed `M ≥ 0`: `S = 2c₁M² ± 2M√(c₁²M² + bM + μ₂)` where the radicand
/// is non-negative, else none. `M = 0` yields the thread value `S = 0`.
pub fn elliptic_family(b: f64, c1: f64, mu2: f64, m: f64) -> Vec<f64> {
    if m < 0.0 || !m.is_finite() {
        return Vec::new();
    }
    if m == 0.0 {
        return vec![0.0];
    }
    let rad = c1 * c1 * m * m + b * m + mu2;
    if rad < 0.0 {
        return Vec::new();
    }
    let root = rad.sqrt();
    let base = 2.0 * c1 * m * m;
    let lo = base - 2.0 * m * root;
    let hi = base + 2.0 * m * root;
    if (hi - lo).abs() <= 1e-14 * hi.abs().max(1.0) {
        vec![lo]
    } else {
        vec![lo, hi]
    }
}

/// Residual of the cubic at `(M, S)`.
pub fn elliptic_family_residual(b: f64, c1: f64, mu2: f64, m: f64, s: f64) -> f64 {
    s * s - 4.0 * b * m.powi(3) - 4.0 * mu2 * m * m - 4.0 * c1 * s * m * m
}

/// The reduced energy `G_red` evaluated on invariant values.
pub fn reduced_energy(c: &NormalFormCoefficients, m: f64, n: f64, s: f64) -> f64 {
    c.alpha() * s + n + c.mu2 * m + 0.5 * c.b * m * m + c.c1 * s * m + c.c2 * s * s
}

/// `G_red` as a polynomial on phase space (for gradient oracles).
pub fn reduced_energy_poly(c: &NormalFormCoefficients) -> Poly {
    let s = s_invariant();
    let m = m_invariant();
    let n = n_invariant();
    s.scale(c.alpha())
        .add(&n)
        .add(&m.scale(c.mu2))
        .add(&m.mul(&m).scale(0.5 * c.b))
        .add(&s.mul(&m).scale(c.c1))
        .add(&s.mul(&s).scale(c.c2))
}

/// Lagrange-multiplier criticality residual of `(G_red, S)` at the point of
/// the reduced space with invariants `(M, N, S, Z) = (m, s²/4m, s, 0)`,
/// computed brute-force in the original phase space: the gradient of `G_red`
/// must be parallel to the gradient of `S`.
pub fn criticality_residual(c: &NormalFormCoefficients, m: f64, s: f64) -> f64 {
    if m <= 0.0 {
        return f64::NAN;
    }
    let z1 = (2.0 * m).sqrt();
    let z = [z1, 0.0, 0.0, s / z1];
    let g_poly = reduced_energy_poly(c);
    let dg = g_poly.grad_eval(&z);
    let ds = s_invariant().grad_eval(&z);
    let ds_norm2: f64 = ds.iter().map(|x| x * x).sum();
    let dot: f64 = dg.iter().zip(&ds).map(|(a, b)| a * b).sum();
    let lambda = dot / ds_norm2;
    let mut res = 0.0_f64;
    let mut scale = 1.0_f64;
    for i in 0..4 {
        res = res.max((dg[i] - lambda * ds[i]).abs());
        scale = scale.max(dg[i].abs());
    }
    res / scale
}

/// The critical-value surface of `(G_red, S)` sampled over an `M`-grid.
///
/// Each `M > 0` contributes one point per real root of the elliptic-family
/// cubic; the `M = 0` row collapses to the thread value `(μ₂, 0, 0)`.
/// Subcritical coefficients are rejected.
pub fn critical_surface(
    c: &NormalFormCoefficients,
    m_grid: &[f64],
) -> Result<Vec<SurfaceSample>> {
    if !(c.b > 0.0) {
        return Err(Error::Unsupported(format!(
            "critical surface requires the supercritical case b > 0, got b = {}",
            c.b
        )));
    }
    if m_grid.is_empty() {
        return Err(Error::Config("empty M grid".into()));
    }
    let mut out = Vec::new();
    for &m in m_grid {
        if m < 0.0 || !m.is_finite() {
            return Err(Error::Config(format!("grid value M = {m} is invalid")));
        }
        for s in elliptic_family(c.b, c.c1, c.mu2, m) {
            let (g, label) = if m == 0.0 {
                (0.0, StratumLabel::Thread)
            } else {
                let n = s * s / (4.0 * m);
                (reduced_energy(c, m, n, s), StratumLabel::SurfaceEven)
            };
            out.push(SurfaceSample {
                m,
                point: StratumPoint {
                    mu2: c.mu2,
                    s,
                    g,
                    label,
                },
            });
        }
    }
    Ok(out)
}

/// All `(M, G)` points of the critical surface over the line `S = s`
/// (at the detuning `mu2`, overriding the one in `c`).
pub fn surface_branches_at(c: &NormalFormCoefficients, mu2: f64, s: f64) -> Vec<(f64, f64)> {
    let mut cc = c.clone();
    cc.mu2 = mu2;
    let (b, c1) = (cc.b, cc.c1);
    if !(b > 0.0) {
        return Vec::new();
    }
    // Domain of the square root.
    let m_start = if mu2 >= 0.0 {
        0.0
    } else if c1 == 0.0 {
        -mu2 / b
    } else {
        (-b + (b * b - 4.0 * c1 * c1 * mu2).sqrt()) / (2.0 * c1 * c1)
    };
    // Expand until both branches have passed |s|.
    let mut m_max = (m_start + s.abs().max(1e-3)).max(1e-3);
    for _ in 0..200 {
        let vals = elliptic_family(b, c1, mu2, m_max);
        let reach = vals.iter().fold(0.0_f64, |r, v| r.max(v.abs()));
        if !vals.is_empty() && reach > 2.0 * s.abs() + 1.0 {
            break;
        }
        m_max *= 2.0;
    }
    let n_scan = 1024;
    let mut roots: Vec<f64> = Vec::new();
    for branch in [false, true] {
        let f = |m: f64| -> Option<f64> {
            if m <= 0.0 {
                // the M = 0 endpoint belongs to the domain only for μ₂ ≥ 0
                return if mu2 >= 0.0 { Some(0.0) } else { None };
            }
            let rad = c1 * c1 * m * m + b * m + mu2;
            if rad < 0.0 {
                return None;
            }
            let r = rad.sqrt();
            Some(2.0 * c1 * m * m + if branch { 2.0 * m * r } else { -2.0 * m * r })
        };
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=n_scan {
            let m = m_start + (m_max - m_start) * i as f64 / n_scan as f64;
            let Some(v) = f(m) else {
                prev = None;
                continue;
            };
            let val = v - s;
            if val == 0.0 {
                roots.push(m);
            } else if let Some((pm, pv)) = prev {
                if pv.signum() != val.signum() {
                    // bisect
                    let (mut lo, mut hi, mut flo) = (pm, m, pv);
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        let fv = f(mid).map_or(f64::NAN, |x| x - s);
                        if !fv.is_finite() {
                            break;
                        }
                        if fv == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if fv.signum() == flo.signum() {
                            lo = mid;
                            flo = fv;
                        } else {
                            hi = mid;
                        }
                    }
                    roots.push(0.5 * (lo + hi));
                }
            }
            prev = Some((m, val));
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * a.abs().max(1.0));
    roots
        .into_iter()
        .map(|m| {
            if m <= 0.0 {
                (0.0, 0.0)
            } else {
                let n = s * s / (4.0 * m);
                (m, reduced_energy(&cc, m, n, s))
            }
        })
        .collect()
}

/// Classify a value `(μ₂, s, g)` of `(G_red, S)` into its stratum.
///
/// Thread: `|s| ≤ tol`, `|g| ≤ tol`, `μ₂ > 0`. Surface: within `tol` of a
/// critical-surface branch. Open region: `g` above every branch. Outside:
/// below the surface.
pub fn classify_value(
    value: (f64, f64, f64),
    c: &NormalFormCoefficients,
    tol: f64,
) -> StratumPoint {
    let (mu2, s, g) = value;
    let label = if s.abs() <= tol && g.abs() <= tol && mu2 > 0.0 {
        StratumLabel::Thread
    } else {
        let branches = surface_branches_at(c, mu2, s);
        if branches.iter().any(|(_, gv)| (g - gv).abs() <= tol) {
            StratumLabel::SurfaceEven
        } else {
            let gmax = branches
                .iter()
                .map(|(_, gv)| *gv)
                .fold(f64::NEG_INFINITY, f64::max);
            if branches.is_empty() {
                StratumLabel::Outside
            } else if g > gmax {
                StratumLabel::OpenRegion
            } else {
                StratumLabel::Outside
            }
        }
    };
    StratumPoint { mu2, s, g, label }
}

/// Steady precession state for `(u₃, Ω)`: `v = κu − Ωe₃` with `κΩ = −c`.
pub fn steady_state(c: f64, u3: f64, omega: f64) -> Result<(ReducedTopState, f64)> {
    if omega == 0.0 {
        return Err(Error::DegenerateInput(
            "steady precession parametrization is singular at Ω = 0".into(),
        ));
    }
    if !(c > 0.0) {
        return Err(Error::Config(format!("c must be positive, got {c}")));
    }
    if u3.abs() > 1.0 {
        return Err(Error::Config(format!("u₃ must lie in [-1, 1], got {u3}")));
    }
    let kappa = -c / omega;
    let u = Vector3::new((1.0 - u3 * u3).max(0.0).sqrt(), 0.0, u3);
    let v = kappa * u - omega * Vector3::new(0.0, 0.0, 1.0);
    Ok((ReducedTopState { u, v }, kappa))
}

/// Deviation of the reduced vector field from the vertical-rotation generator
/// at the steady state: both `u̇ − Ω e₃×u` and `v̇ − Ω e₃×v` must vanish.
pub fn steady_precession_residual(c: f64, u3: f64, omega: f64) -> Result<f64> {
    let (state, _) = steady_state(c, u3, omega)?;
    let (du, dv) = reduced_vector_field_raw(&state.u, &state.v, c);
    let e3 = Vector3::new(0.0, 0.0, 1.0);
    let ru = du - omega * e3.cross(&state.u);
    let rv = dv - omega * e3.cross(&state.v);
    Ok(ru.norm().max(rv.norm()))
}

/// The critical-value surface of the top's energy-momentum map over a grid of
/// steady precessions: `a = κ − Ωu₃`, `b = κu₃ − Ω`, `h = ½(κ²+Ω²) + 2cu₃`.
pub fn top_relative_equilibria(c: f64, grid: &[(f64, f64)]) -> Result<Vec<TopEquilibrium>> {
    if grid.is_empty() {
        return Err(Error::Config("empty (u₃, Ω) grid".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    for &(u3, omega) in grid {
        let (_state, kappa) = steady_state(c, u3, omega)?;
        out.push(TopEquilibrium {
            u3,
            omega,
            kappa,
            em: TopEMValue {
                a: kappa - omega * u3,
                b: kappa * u3 - omega,
                h: 0.5 * (kappa * kappa + omega * omega) + 2.0 * c * u3,
            },
        });
    }
    Ok(out)
}

/// Energy-momentum value of the vertical rotation family: `(a, a, a²/2 + c)`.
pub fn thread_em(c: f64, a: f64) -> TopEMValue {
    TopEMValue {
        a,
        b: a,
        h: 0.5 * a * a + c,
    }
}
