//! Reduced Lagrange top on the manifold `{u·u = 1, u·v = a}` and its weak
//! coupling to a quasi-periodic oscillator.
//!
//! The reduced Hamiltonian is `H_a = ½ v·v + c u₃ + ρ a²` and the flow is
//! `u̇ = u×v, v̇ = c u×e₃`, which conserves `u·u`, `u·v` and `H_a` identically
//! and has the vertical rotation `P_a = (e₃, a e₃)` as an isolated equilibrium.
//! The coupled Hamiltonian is `H_a + ⟨ω, y⟩ + ε F(u, x)` with `F` drawn from a
//! small catalog of coupling functions.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on the constraint residuals `|u·u − 1|` and `|u·v − a|`.
pub const DEFAULT_CONSTRAINT_TOL: f64 = 1e-10;

/// Physical parameters of the reduced top.
///
/// `c` is the gravity coefficient (> 0), `rho` the coefficient of the constant
/// energy offset `ρ a²`, and `a` the angular momentum along the figure axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopParams {
    pub c: f64,
    #[serde(default)]
    pub rho: f64,
    pub a: f64,
}

impl TopParams {
    pub fn new(c: f64, rho: f64, a: f64) -> Result<Self> {
        let p = Self { c, rho, a };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Config(format!("gravity coefficient c must be positive, got {}", self.c)));
        }
        if !self.rho.is_finite() || !self.a.is_finite() {
            return Err(Error::Config("rho and a must be finite".into()));
        }
        Ok(())
    }
}

/// A point `(u, v)` on the constraint manifold `{u·u = 1, u·v = a}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedTopState {
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
}

/// Flat serialization record: `{u: [...], v: [...], a}` with `a = u·v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub u: [f64; 3],
    pub v: [f64; 3],
    pub a: f64,
}

impl ReducedTopState {
    /// Validating constructor; `tol` bounds both constraint residuals.
    pub fn new(u: Vector3<f64>, v: Vector3<f64>, a: f64, tol: f64) -> Result<Self> {
        let s = Self { u, v };
        s.validate(a, tol)?;
        Ok(s)
    }

    /// The vertical rotation equilibrium `P_a = (e₃, a e₃)`.
    pub fn equilibrium(a: f64) -> Self {
        Self {
            u: Vector3::new(0.0, 0.0, 1.0),
            v: Vector3::new(0.0, 0.0, a),
        }
    }

    pub fn momentum(&self) -> f64 {
        self.u.dot(&self.v)
    }

    /// Residuals `(u·u − 1, u·v − a)`.
    pub fn constraint_residuals(&self, a: f64) -> (f64, f64) {
        (self.u.dot(&self.u) - 1.0, self.u.dot(&self.v) - a)
    }

    pub fn validate(&self, a: f64, tol: f64) -> Result<()> {
        let (ru, rv) = self.constraint_residuals(a);
        if !ru.is_finite() || !rv.is_finite() {
            return Err(Error::InvalidState("non-finite state".into()));
        }
        if ru.abs() > tol || rv.abs() > tol {
            return Err(Error::InvalidState(format!(
                "constraint residuals |u·u−1| = {:.3e}, |u·v−a| = {:.3e} exceed tol {:.3e}",
                ru.abs(),
                rv.abs(),
                tol
            )));
        }
        Ok(())
    }

    pub fn record(&self) -> StateRecord {
        StateRecord {
            u: [self.u.x, self.u.y, self.u.z],
            v: [self.v.x, self.v.y, self.v.z],
            a: self.momentum(),
        }
    }
}

impl From<StateRecord> for ReducedTopState {
    fn from(r: StateRecord) -> Self {
        Self {
            u: Vector3::from(r.u),
            v: Vector3::from(r.v),
        }
    }
}

/// Reduced Hamiltonian `H_a = ½ v·v + c u₃ + ρ a²`.
///
/// The state is validated against the constraint manifold at
/// [`DEFAULT_CONSTRAINT_TOL`]; the `ρ a²` term is a constant energy offset.
pub fn reduced_hamiltonian(state: &ReducedTopState, params: &TopParams) -> Result<f64> {
    params.validate()?;
    state.validate(params.a, DEFAULT_CONSTRAINT_TOL)?;
    Ok(reduced_hamiltonian_raw(state, params))
}

/// Same as [`reduced_hamiltonian`] without the constraint check.
pub fn reduced_hamiltonian_raw(state: &ReducedTopState, params: &TopParams) -> f64 {
    0.5 * state.v.dot(&state.v) + params.c * state.u.z + params.rho * params.a * params.a
}

/// Hamiltonian vector field of the reduced top: `u̇ = u×v, v̇ = c u×e₃`.
///
/// This closed form conserves `u·u`, `u·v` and `H_a` as algebraic identities
/// and vanishes at `P_a`.
pub fn reduced_vector_field(
    state: &ReducedTopState,
    params: &TopParams,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    params.validate()?;
    state.validate(params.a, DEFAULT_CONSTRAINT_TOL)?;
    Ok(reduced_vector_field_raw(&state.u, &state.v, params.c))
}

/// Unvalidated vector field; used by integrators whose intermediate stages sit
/// slightly off the manifold.
#[inline]
pub fn reduced_vector_field_raw(
    u: &Vector3<f64>,
    v: &Vector3<f64>,
    c: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let e3 = Vector3::new(0.0, 0.0, 1.0);
    (u.cross(v), c * u.cross(&e3))
}

/// Catalog of coupling functions `F(u, x)` between the top and the oscillator.
///
/// All entries are linear in a single component of `u` and trigonometric in
/// the oscillator angles, so their derivatives and sup-bounds are exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Coupling {
    /// `F = u₃ Σᵢ wᵢ cos xᵢ` — the vertically vibrating table spring.
    VerticalCosine {
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// `F = u₁ Σᵢ wᵢ cos xᵢ` — forcing transverse to the figure axis.
    PlanarCosine {
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

impl Coupling {
    fn weight(&self, i: usize) -> f64 {
        let w = match self {
            Coupling::VerticalCosine { weights } | Coupling::PlanarCosine { weights } => weights,
        };
        w.as_ref().map_or(1.0, |w| w.get(i).copied().unwrap_or(1.0))
    }

    fn u_component(&self, u: &Vector3<f64>) -> (f64, usize) {
        match self {
            Coupling::VerticalCosine { .. } => (u.z, 2),
            Coupling::PlanarCosine { .. } => (u.x, 0),
        }
    }

    pub fn eval(&self, u: &Vector3<f64>, x: &[f64]) -> f64 {
        let (uc, _) = self.u_component(u);
        uc * x
            .iter()
            .enumerate()
            .map(|(i, &xi)| self.weight(i) * xi.cos())
            .sum::<f64>()
    }

    /// Gradient of `F` with respect to `u`.
    pub fn grad_u(&self, _u: &Vector3<f64>, x: &[f64]) -> Vector3<f64> {
        let s: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| self.weight(i) * xi.cos())
            .sum();
        let (_, idx) = self.u_component(&Vector3::zeros());
        let mut g = Vector3::zeros();
        g[idx] = s;
        g
    }

    /// Gradient of `F` with respect to the oscillator angles.
    pub fn grad_x(&self, u: &Vector3<f64>, x: &[f64], out: &mut [f64]) {
        let (uc, _) = self.u_component(u);
        for (i, (&xi, o)) in x.iter().zip(out.iter_mut()).enumerate() {
            *o = -uc * self.weight(i) * xi.sin();
        }
    }

    /// Bound on `|F|` over the constraint manifold (|u| = 1).
    pub fn sup_f(&self, n: usize) -> f64 {
        (0..n).map(|i| self.weight(i).abs()).sum()
    }

    /// Bound on `|∂F/∂xᵢ|` summed over i.
    pub fn sup_grad_x(&self, n: usize) -> f64 {
        self.sup_f(n)
    }
}

/// Configuration of the quasi-periodic oscillator and its coupling to the top.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledConfig {
    pub n: usize,
    pub omega_osc: Vec<f64>,
    pub epsilon: f64,
    pub coupling: Coupling,
}

impl CoupledConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("oscillator frequency count n must be >= 1".into()));
        }
        if self.omega_osc.len() != self.n {
            return Err(Error::Config(format!(
                "omega_osc has {} entries, expected n = {}",
                self.omega_osc.len(),
                self.n
            )));
        }
        if self.omega_osc.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("omega_osc entries must be finite".into()));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// State of the coupled top–oscillator system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub top: StateRecord,
    pub x_osc: Vec<f64>,
    pub y_osc: Vec<f64>,
}

impl CoupledState {
    pub fn new(top: ReducedTopState, x_osc: Vec<f64>, y_osc: Vec<f64>) -> Self {
        let mut s = Self {
            top: top.record(),
            x_osc,
            y_osc,
        };
        s.wrap_angles();
        s
    }

    pub fn top_state(&self) -> ReducedTopState {
        ReducedTopState {
            u: Vector3::from(self.top.u),
            v: Vector3::from(self.top.v),
        }
    }

    /// Reduce oscillator angles to `[0, 2π)`.
    pub fn wrap_angles(&mut self) {
        let tau = std::f64::consts::TAU;
        for x in &mut self.x_osc {
            *x = x.rem_euclid(tau);
        }
    }

    pub fn validate(&self, a: f64, config: &CoupledConfig) -> Result<()> {
        self.top_state().validate(a, DEFAULT_CONSTRAINT_TOL)?;
        if self.x_osc.len() != config.n || self.y_osc.len() != config.n {
            return Err(Error::Config(format!(
                "oscillator state has ({}, {}) entries, expected n = {}",
                self.x_osc.len(),
                self.y_osc.len(),
                config.n
            )));
        }
        Ok(())
    }
}

/// Coupled Hamiltonian `H_ε = H_a + ⟨ω, y⟩ + ε F`.
///
/// With `ε = 0` this is bit-for-bit the sum of the uncoupled energies.
pub fn coupled_hamiltonian(
    state: &CoupledState,
    params: &TopParams,
    config: &CoupledConfig,
) -> Result<f64> {
    params.validate()?;
    config.validate()?;
    state.validate(params.a, config)?;
    Ok(coupled_hamiltonian_raw(state, params, config))
}

pub fn coupled_hamiltonian_raw(
    state: &CoupledState,
    params: &TopParams,
    config: &CoupledConfig,
) -> f64 {
    let top = state.top_state();
    let mut h = reduced_hamiltonian_raw(&top, params);
    for (w, y) in config.omega_osc.iter().zip(&state.y_osc) {
        h += w * y;
    }
    if config.epsilon != 0.0 {
        h += config.epsilon * config.coupling.eval(&top.u, &state.x_osc);
    }
    h
}

/// Tangent vector of a [`CoupledState`].
#[derive(Clone, Debug)]
pub struct CoupledTangent {
    pub du: Vector3<f64>,
    pub dv: Vector3<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Canonical equations of the coupled system.
///
/// `u̇ = u×v`, `v̇ = u×(c e₃ + ε ∂F/∂u)`, `ẋ = ω`, `ẏ = −ε ∂F/∂x`.
/// At `ε = 0` the top part equals [`reduced_vector_field`] and the oscillator
/// actions are constant.
pub fn coupled_vector_field(
    state: &CoupledState,
    params: &TopParams,
    config: &CoupledConfig,
) -> Result<CoupledTangent> {
    params.validate()?;
    config.validate()?;
    state.validate(params.a, config)?;
    let top = state.top_state();
    // ẋ = ∂H/∂y is ω for every catalog coupling (F is y-independent).
    let dx = config.omega_osc.clone();
    let mut dy = vec![0.0; config.n];
    let (du, dv) = if config.epsilon == 0.0 {
        reduced_vector_field_raw(&top.u, &top.v, params.c)
    } else {
        let eps = config.epsilon;
        let e3 = Vector3::new(0.0, 0.0, 1.0);
        let g = params.c * e3 + eps * config.coupling.grad_u(&top.u, &state.x_osc);
        let mut fx = vec![0.0; config.n];
        config.coupling.grad_x(&top.u, &state.x_osc, &mut fx);
        for (d, f) in dy.iter_mut().zip(&fx) {
            *d = -eps * f;
        }
        (top.u.cross(&top.v), top.u.cross(&g))
    };
    Ok(CoupledTangent { du, dv, dx, dy })
}

/// Project `(u, v)` onto the manifold `{u·u = 1, u·v = a}`.
///
/// Normalizes `u`, then shifts `v` along `u` so that `u·v = a`. States already
/// on the manifold (to a few ulps) are returned unchanged, which makes the
/// projection exactly idempotent.
pub fn project_to_constraints(
    u: Vector3<f64>,
    v: Vector3<f64>,
    a: f64,
) -> Result<ReducedTopState> {
    let n2 = u.dot(&u);
    if n2 == 0.0 || !n2.is_finite() {
        return Err(Error::DegenerateInput(format!("cannot project u with |u|² = {n2}")));
    }
    let eps = f64::EPSILON;
    let u = if (n2 - 1.0).abs() > 4.0 * eps {
        u / n2.sqrt()
    } else {
        u
    };
    let d = a - u.dot(&v);
    let scale = 1.0_f64.max(a.abs()).max(v.norm());
    let v = if d.abs() > 4.0 * eps * scale { v + d * u } else { v };
    Ok(ReducedTopState { u, v })
}
