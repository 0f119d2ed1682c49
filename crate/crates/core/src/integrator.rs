//! Structure-preserving time integration of the reduced top and the coupled
//! top–oscillator system, with invariant-drift monitoring.
//!
//! The default scheme is the implicit midpoint rule, which preserves the
//! quadratic invariants `u·u` and `u·v` up to the tolerance of the implicit
//! solve. The splitting schemes compose two exactly solvable subflows: the
//! kinetic part (`v` frozen, `u` rotates about `v`, oscillator angles advance)
//! and the potential part (`u`, `x` frozen, `v` and `y` move linearly). Both
//! subflows preserve the constraints exactly.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    coupled_hamiltonian_raw, reduced_hamiltonian_raw, reduced_vector_field_raw, CoupledConfig,
    CoupledState, ReducedTopState, TopParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ImplicitMidpoint,
    Splitting2nd,
    Splitting4th,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
}

fn default_newton_tol() -> f64 {
    1e-13
}

fn default_newton_max_iter() -> usize {
    25
}

impl IntegratorConfig {
    pub fn new(scheme: Scheme, dt: f64) -> Result<Self> {
        let c = Self {
            scheme,
            dt,
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("time step dt must be > 0, got {}", self.dt)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::Config("newton_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-sample record of invariant drift relative to the initial state.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DriftSample {
    pub dh: f64,
    pub d_uu: f64,
    pub d_uv: f64,
}

/// Sampled trajectory with drift record; `times` are strictly increasing and
/// all three sequences have equal length.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub drift: Vec<DriftSample>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs_drift(&self) -> DriftSample {
        let mut m = DriftSample {
            dh: 0.0,
            d_uu: 0.0,
            d_uv: 0.0,
        };
        for d in &self.drift {
            m.dh = m.dh.max(d.dh.abs());
            m.d_uu = m.d_uu.max(d.d_uu.abs());
            m.d_uv = m.d_uv.max(d.d_uv.abs());
        }
        m
    }
}

/// Flat-vector view of a dynamical system, used by the implicit solver.
trait FlowSystem {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], dy: &mut [f64]);

    fn jacobian(&self, y: &[f64], out: &mut DMatrix<f64>) {
        let n = self.dim();
        let mut yp = y.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..n {
            let h = 1e-7 * y[j].abs().max(1.0);
            yp[j] = y[j] + h;
            self.eval(&yp, &mut fp);
            yp[j] = y[j] - h;
            self.eval(&yp, &mut fm);
            yp[j] = y[j];
            for i in 0..n {
                out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
    }
}

struct ReducedSystem {
    c: f64,
}

impl FlowSystem for ReducedSystem {
    fn dim(&self) -> usize {
        6
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let u = Vector3::new(y[0], y[1], y[2]);
        let v = Vector3::new(y[3], y[4], y[5]);
        let (du, dv) = reduced_vector_field_raw(&u, &v, self.c);
        dy[..3].copy_from_slice(du.as_slice());
        dy[3..].copy_from_slice(dv.as_slice());
    }

    fn jacobian(&self, y: &[f64], out: &mut DMatrix<f64>) {
        // d(u×v) = -v̂ δu + û δv ; d(c u×e₃) = -c ê₃ δu
        let u = Vector3::new(y[0], y[1], y[2]);
        let v = Vector3::new(y[3], y[4], y[5]);
        out.fill(0.0);
        let vh = cross_matrix(&v);
        let uh = cross_matrix(&u);
        for i in 0..3 {
            for j in 0..3 {
                out[(i, j)] = -vh[(i, j)];
                out[(i, j + 3)] = uh[(i, j)];
            }
        }
        // -c ê₃: only the (0,1) and (1,0) entries of ê₃ are nonzero.
        out[(3, 1)] = self.c;
        out[(4, 0)] = -self.c;
    }
}

fn cross_matrix(w: &Vector3<f64>) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

struct CoupledSystem<'a> {
    params: &'a TopParams,
    config: &'a CoupledConfig,
}

impl CoupledSystem<'_> {
    fn pack(&self, s: &CoupledState, y: &mut [f64]) {
        y[..3].copy_from_slice(&s.top.u);
        y[3..6].copy_from_slice(&s.top.v);
        let n = self.config.n;
        y[6..6 + n].copy_from_slice(&s.x_osc);
        y[6 + n..6 + 2 * n].copy_from_slice(&s.y_osc);
    }

    fn unpack(&self, y: &[f64]) -> CoupledState {
        let n = self.config.n;
        CoupledState {
            top: crate::models::StateRecord {
                u: [y[0], y[1], y[2]],
                v: [y[3], y[4], y[5]],
                a: y[0] * y[3] + y[1] * y[4] + y[2] * y[5],
            },
            x_osc: y[6..6 + n].to_vec(),
            y_osc: y[6 + n..6 + 2 * n].to_vec(),
        }
    }
}

impl FlowSystem for CoupledSystem<'_> {
    fn dim(&self) -> usize {
        6 + 2 * self.config.n
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.config.n;
        let u = Vector3::new(y[0], y[1], y[2]);
        let v = Vector3::new(y[3], y[4], y[5]);
        let x = &y[6..6 + n];
        let eps = self.config.epsilon;
        let (du, dv) = if eps == 0.0 {
            reduced_vector_field_raw(&u, &v, self.params.c)
        } else {
            let e3 = Vector3::new(0.0, 0.0, 1.0);
            let g = self.params.c * e3 + eps * self.config.coupling.grad_u(&u, x);
            (u.cross(&v), u.cross(&g))
        };
        dy[..3].copy_from_slice(du.as_slice());
        dy[3..6].copy_from_slice(dv.as_slice());
        dy[6..6 + n].copy_from_slice(&self.config.omega_osc);
        if eps == 0.0 {
            dy[6 + n..6 + 2 * n].fill(0.0);
        } else {
            let fx = &mut dy[6 + n..6 + 2 * n];
            self.config.coupling.grad_x(&u, x, fx);
            for d in fx.iter_mut() {
                *d = -eps * *d;
            }
        }
    }
}

/// Newton solve of the midpoint equation `z = y + dt f((y+z)/2)`.
struct MidpointSolver {
    mid: Vec<f64>,
    f: Vec<f64>,
    jac: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl MidpointSolver {
    fn new(dim: usize) -> Self {
        Self {
            mid: vec![0.0; dim],
            f: vec![0.0; dim],
            jac: DMatrix::zeros(dim, dim),
            rhs: DVector::zeros(dim),
        }
    }

    fn step<S: FlowSystem>(
        &mut self,
        sys: &S,
        y: &[f64],
        z: &mut [f64],
        dt: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<()> {
        let n = sys.dim();
        // explicit Euler predictor
        sys.eval(y, &mut self.f);
        for i in 0..n {
            z[i] = y[i] + dt * self.f[i];
        }
        let mut prev_res = f64::INFINITY;
        for iter in 0..max_iter {
            for i in 0..n {
                self.mid[i] = 0.5 * (y[i] + z[i]);
            }
            sys.eval(&self.mid, &mut self.f);
            let mut res = 0.0_f64;
            for i in 0..n {
                let g = z[i] - y[i] - dt * self.f[i];
                self.rhs[i] = -g;
                res = res.max(g.abs());
            }
            if res > 1e6 * prev_res.min(1.0) && iter > 2 {
                return Err(Error::StepFailure {
                    step: 0,
                    residual: res,
                    iterations: iter,
                });
            }
            prev_res = prev_res.min(res);
            sys.jacobian(&self.mid, &mut self.jac);
            // J_g = I - (dt/2) Df(mid)
            let mut jg = self.jac.clone();
            jg *= -0.5 * dt;
            for i in 0..n {
                jg[(i, i)] += 1.0;
            }
            let delta = jg.lu().solve(&self.rhs).ok_or(Error::StepFailure {
                step: 0,
                residual: res,
                iterations: iter,
            })?;
            let mut dmax = 0.0_f64;
            for i in 0..n {
                z[i] += delta[i];
                dmax = dmax.max(delta[i].abs());
            }
            if dmax <= tol {
                return Ok(());
            }
        }
        Err(Error::StepFailure {
            step: 0,
            residual: prev_res,
            iterations: max_iter,
        })
    }
}

/// Rotate `p` about the unit direction of `axis` by `angle`.
fn rodrigues(p: &Vector3<f64>, axis: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let norm = axis.norm();
    if norm == 0.0 || angle == 0.0 {
        return *p;
    }
    let k = axis / norm;
    let (s, c) = angle.sin_cos();
    p * c + k.cross(p) * s + k * (k.dot(p)) * (1.0 - c)
}

/// Kinetic subflow for time h: `v` frozen, `u̇ = u×v` (rotation of `u` about
/// `v` by angle `-|v| h`), oscillator angles advance linearly.
fn kinetic_flow(u: &mut Vector3<f64>, v: &Vector3<f64>, x: &mut [f64], omega: &[f64], h: f64) {
    *u = rodrigues(u, v, -v.norm() * h);
    for (xi, w) in x.iter_mut().zip(omega) {
        *xi += w * h;
    }
}

/// Potential subflow for time h: `u` and `x` frozen, `v̇` and `ẏ` constant.
fn potential_flow(
    u: &Vector3<f64>,
    v: &mut Vector3<f64>,
    x: &[f64],
    y: &mut [f64],
    params: &TopParams,
    coupling: Option<(&CoupledConfig, &mut Vec<f64>)>,
    h: f64,
) {
    let e3 = Vector3::new(0.0, 0.0, 1.0);
    let mut g = params.c * e3;
    if let Some((config, fx)) = coupling {
        if config.epsilon != 0.0 {
            g += config.epsilon * config.coupling.grad_u(u, x);
            config.coupling.grad_x(u, x, fx);
            for (yi, f) in y.iter_mut().zip(fx.iter()) {
                *yi -= h * config.epsilon * f;
            }
        }
    }
    *v += h * u.cross(&g);
}

// Yoshida composition coefficients for the fourth-order scheme.
fn yoshida_weights() -> (f64, f64) {
    let cbrt2 = 2.0_f64.cbrt();
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 / (2.0 - cbrt2);
    (w1, w0)
}

struct SplitState {
    u: Vector3<f64>,
    v: Vector3<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
}

fn strang_step(
    s: &mut SplitState,
    params: &TopParams,
    config: Option<&CoupledConfig>,
    fx: &mut Vec<f64>,
    h: f64,
) {
    let omega: &[f64] = config.map_or(&[], |c| &c.omega_osc);
    kinetic_flow(&mut s.u, &s.v, &mut s.x, omega, 0.5 * h);
    potential_flow(
        &s.u,
        &mut s.v,
        &s.x,
        &mut s.y,
        params,
        config.map(|c| (c, &mut *fx)),
        h,
    );
    kinetic_flow(&mut s.u, &s.v, &mut s.x, omega, 0.5 * h);
}

fn splitting_step(
    s: &mut SplitState,
    params: &TopParams,
    config: Option<&CoupledConfig>,
    fx: &mut Vec<f64>,
    h: f64,
    fourth_order: bool,
) {
    if fourth_order {
        let (w1, w0) = yoshida_weights();
        strang_step(s, params, config, fx, w1 * h);
        strang_step(s, params, config, fx, w0 * h);
        strang_step(s, params, config, fx, w1 * h);
    } else {
        strang_step(s, params, config, fx, h);
    }
}

/// One step of the configured scheme with a signed time step `dt`.
pub fn step_with_dt(
    state: &ReducedTopState,
    params: &TopParams,
    config: &IntegratorConfig,
    dt: f64,
) -> Result<ReducedTopState> {
    params.validate()?;
    config.validate()?;
    state.validate(params.a, crate::models::DEFAULT_CONSTRAINT_TOL)?;
    match config.scheme {
        Scheme::ImplicitMidpoint => {
            let sys = ReducedSystem { c: params.c };
            let mut solver = MidpointSolver::new(6);
            let y = [
                state.u.x, state.u.y, state.u.z, state.v.x, state.v.y, state.v.z,
            ];
            let mut z = [0.0; 6];
            solver.step(&sys, &y, &mut z, dt, config.newton_tol, config.newton_max_iter)?;
            Ok(ReducedTopState {
                u: Vector3::new(z[0], z[1], z[2]),
                v: Vector3::new(z[3], z[4], z[5]),
            })
        }
        Scheme::Splitting2nd | Scheme::Splitting4th => {
            let mut s = SplitState {
                u: state.u,
                v: state.v,
                x: Vec::new(),
                y: Vec::new(),
            };
            let mut fx = Vec::new();
            splitting_step(
                &mut s,
                params,
                None,
                &mut fx,
                dt,
                config.scheme == Scheme::Splitting4th,
            );
            Ok(ReducedTopState { u: s.u, v: s.v })
        }
    }
}

/// One step of the configured scheme for the reduced top.
pub fn step(
    state: &ReducedTopState,
    params: &TopParams,
    config: &IntegratorConfig,
) -> Result<ReducedTopState> {
    step_with_dt(state, params, config, config.dt)
}

/// One step for the coupled system with a signed time step.
pub fn step_coupled_with_dt(
    state: &CoupledState,
    params: &TopParams,
    config: &IntegratorConfig,
    coupled: &CoupledConfig,
    dt: f64,
) -> Result<CoupledState> {
    params.validate()?;
    config.validate()?;
    coupled.validate()?;
    state.validate(params.a, coupled)?;
    let mut out = match config.scheme {
        Scheme::ImplicitMidpoint => {
            let sys = CoupledSystem {
                params,
                config: coupled,
            };
            let dim = sys.dim();
            let mut solver = MidpointSolver::new(dim);
            let mut y = vec![0.0; dim];
            sys.pack(state, &mut y);
            let mut z = vec![0.0; dim];
            solver.step(&sys, &y, &mut z, dt, config.newton_tol, config.newton_max_iter)?;
            sys.unpack(&z)
        }
        Scheme::Splitting2nd | Scheme::Splitting4th => {
            let top = state.top_state();
            let mut s = SplitState {
                u: top.u,
                v: top.v,
                x: state.x_osc.clone(),
                y: state.y_osc.clone(),
            };
            let mut fx = vec![0.0; coupled.n];
            splitting_step(
                &mut s,
                params,
                Some(coupled),
                &mut fx,
                dt,
                config.scheme == Scheme::Splitting4th,
            );
            CoupledState::new(ReducedTopState { u: s.u, v: s.v }, s.x, s.y)
        }
    };
    out.wrap_angles();
    Ok(out)
}

pub fn step_coupled(
    state: &CoupledState,
    params: &TopParams,
    config: &IntegratorConfig,
    coupled: &CoupledConfig,
) -> Result<CoupledState> {
    step_coupled_with_dt(state, params, config, coupled, config.dt)
}

/// Integrate the reduced top for `ceil(t_end/dt)` steps, sampling every
/// `sample_every`-th step (the initial and final states are always sampled).
pub fn integrate(
    state: &ReducedTopState,
    params: &TopParams,
    config: &IntegratorConfig,
    t_end: f64,
    sample_every: usize,
) -> Result<Trajectory<ReducedTopState>> {
    params.validate()?;
    config.validate()?;
    if !(t_end >= 0.0) {
        return Err(Error::Config(format!("t_end must be >= 0, got {t_end}")));
    }
    let sample_every = sample_every.max(1);
    let n_steps = (t_end / config.dt).ceil() as usize;
    let h0 = reduced_hamiltonian_raw(state, params);
    let (uu0, uv0) = (state.u.dot(&state.u), state.u.dot(&state.v));
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![*state],
        drift: vec![DriftSample {
            dh: 0.0,
            d_uu: 0.0,
            d_uv: 0.0,
        }],
    };

    // The implicit solver re-validates per step; do the work inline to reuse
    // one solver allocation across the whole run.
    match config.scheme {
        Scheme::ImplicitMidpoint => {
            let sys = ReducedSystem { c: params.c };
            let mut solver = MidpointSolver::new(6);
            let mut y = [
                state.u.x, state.u.y, state.u.z, state.v.x, state.v.y, state.v.z,
            ];
            let mut z = [0.0; 6];
            for i in 1..=n_steps {
                solver
                    .step(&sys, &y, &mut z, config.dt, config.newton_tol, config.newton_max_iter)
                    .map_err(|e| at_step(e, i))?;
                y = z;
                if i % sample_every == 0 || i == n_steps {
                    let s = ReducedTopState {
                        u: Vector3::new(y[0], y[1], y[2]),
                        v: Vector3::new(y[3], y[4], y[5]),
                    };
                    push_sample(&mut traj, i as f64 * config.dt, s, params, h0, uu0, uv0);
                }
            }
        }
        Scheme::Splitting2nd | Scheme::Splitting4th => {
            let mut s = SplitState {
                u: state.u,
                v: state.v,
                x: Vec::new(),
                y: Vec::new(),
            };
            let mut fx = Vec::new();
            let fourth = config.scheme == Scheme::Splitting4th;
            for i in 1..=n_steps {
                splitting_step(&mut s, params, None, &mut fx, config.dt, fourth);
                if i % sample_every == 0 || i == n_steps {
                    let st = ReducedTopState { u: s.u, v: s.v };
                    push_sample(&mut traj, i as f64 * config.dt, st, params, h0, uu0, uv0);
                }
            }
        }
    }
    Ok(traj)
}

fn at_step(e: Error, i: usize) -> Error {
    match e {
        Error::StepFailure {
            residual,
            iterations,
            ..
        } => Error::StepFailure {
            step: i,
            residual,
            iterations,
        },
        other => other,
    }
}

fn push_sample(
    traj: &mut Trajectory<ReducedTopState>,
    t: f64,
    s: ReducedTopState,
    params: &TopParams,
    h0: f64,
    uu0: f64,
    uv0: f64,
) {
    let dh = reduced_hamiltonian_raw(&s, params) - h0;
    traj.drift.push(DriftSample {
        dh,
        d_uu: s.u.dot(&s.u) - uu0,
        d_uv: s.u.dot(&s.v) - uv0,
    });
    traj.times.push(t);
    traj.states.push(s);
}

/// Integrate the coupled system; drift is recorded for the coupled energy and
/// the top constraints.
pub fn integrate_coupled(
    state: &CoupledState,
    params: &TopParams,
    config: &IntegratorConfig,
    coupled: &CoupledConfig,
    t_end: f64,
    sample_every: usize,
) -> Result<Trajectory<CoupledState>> {
    params.validate()?;
    config.validate()?;
    coupled.validate()?;
    state.validate(params.a, coupled)?;
    if !(t_end >= 0.0) {
        return Err(Error::Config(format!("t_end must be >= 0, got {t_end}")));
    }
    let sample_every = sample_every.max(1);
    let n_steps = (t_end / config.dt).ceil() as usize;
    let h0 = coupled_hamiltonian_raw(state, params, coupled);
    let top0 = state.top_state();
    let (uu0, uv0) = (top0.u.dot(&top0.u), top0.u.dot(&top0.v));
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![state.clone()],
        drift: vec![DriftSample {
            dh: 0.0,
            d_uu: 0.0,
            d_uv: 0.0,
        }],
    };
    let mut current = state.clone();
    match config.scheme {
        Scheme::ImplicitMidpoint => {
            let sys = CoupledSystem {
                params,
                config: coupled,
            };
            let dim = sys.dim();
            let mut solver = MidpointSolver::new(dim);
            let mut y = vec![0.0; dim];
            sys.pack(&current, &mut y);
            let mut z = vec![0.0; dim];
            let tau = std::f64::consts::TAU;
            for i in 1..=n_steps {
                solver
                    .step(&sys, &y, &mut z, config.dt, config.newton_tol, config.newton_max_iter)
                    .map_err(|e| at_step(e, i))?;
                y.copy_from_slice(&z);
                for x in &mut y[6..6 + coupled.n] {
                    *x = x.rem_euclid(tau);
                }
                if i % sample_every == 0 || i == n_steps {
                    current = sys.unpack(&y);
                    push_coupled_sample(&mut traj, i as f64 * config.dt, current.clone(), params, coupled, h0, uu0, uv0);
                }
            }
        }
        Scheme::Splitting2nd | Scheme::Splitting4th => {
            let top = current.top_state();
            let mut s = SplitState {
                u: top.u,
                v: top.v,
                x: current.x_osc.clone(),
                y: current.y_osc.clone(),
            };
            let mut fx = vec![0.0; coupled.n];
            let fourth = config.scheme == Scheme::Splitting4th;
            let tau = std::f64::consts::TAU;
            for i in 1..=n_steps {
                splitting_step(&mut s, params, Some(coupled), &mut fx, config.dt, fourth);
                for x in &mut s.x {
                    *x = x.rem_euclid(tau);
                }
                if i % sample_every == 0 || i == n_steps {
                    let st = CoupledState::new(
                        ReducedTopState { u: s.u, v: s.v },
                        s.x.clone(),
                        s.y.clone(),
                    );
                    push_coupled_sample(&mut traj, i as f64 * config.dt, st, params, coupled, h0, uu0, uv0);
                }
            }
        }
    }
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn push_coupled_sample(
    traj: &mut Trajectory<CoupledState>,
    t: f64,
    s: CoupledState,
    params: &TopParams,
    coupled: &CoupledConfig,
    h0: f64,
    uu0: f64,
    uv0: f64,
) {
    let top = s.top_state();
    let dh = coupled_hamiltonian_raw(&s, params, coupled) - h0;
    traj.drift.push(DriftSample {
        dh,
        d_uu: top.u.dot(&top.u) - uu0,
        d_uv: top.u.dot(&top.v) - uv0,
    });
    traj.times.push(t);
    traj.states.push(s);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{project_to_constraints, Coupling};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn midpoint(dt: f64) -> IntegratorConfig {
        IntegratorConfig::new(Scheme::ImplicitMidpoint, dt).unwrap()
    }

    fn swing_state(theta: f64) -> ReducedTopState {
        ReducedTopState {
            u: Vector3::new(theta.sin(), 0.0, theta.cos()),
            v: Vector3::zeros(),
        }
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = TopParams::new(1.0, 0.0, 3.0).unwrap();
        let s = ReducedTopState::equilibrium(3.0);
        for scheme in [Scheme::ImplicitMidpoint, Scheme::Splitting2nd, Scheme::Splitting4th] {
            let cfg = IntegratorConfig::new(scheme, 0.05).unwrap();
            let next = step(&s, &p, &cfg).unwrap();
            assert!((next.u - s.u).norm() < 1e-13);
            assert!((next.v - s.v).norm() < 1e-13);
        }
    }

    #[test]
    fn reversibility_of_symmetric_schemes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst = 0.0_f64;
        for _ in 0..1000 {
            let a = rng.random_range(-2.0..2.0);
            let c = rng.random_range(0.2..3.0);
            let p = TopParams::new(c, 0.0, a).unwrap();
            let u = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let v = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let Ok(s) = project_to_constraints(u, v, a) else {
                continue;
            };
            for scheme in [Scheme::ImplicitMidpoint, Scheme::Splitting2nd, Scheme::Splitting4th] {
                let cfg = IntegratorConfig::new(scheme, 0.02).unwrap();
                let fwd = step_with_dt(&s, &p, &cfg, cfg.dt).unwrap();
                let back = step_with_dt(&fwd, &p, &cfg, -cfg.dt).unwrap();
                let err = (back.u - s.u).norm().max((back.v - s.v).norm());
                worst = worst.max(err);
            }
        }
        assert!(worst < 1e-12, "reversibility defect {worst:.3e}");
    }

    #[test]
    fn midpoint_preserves_quadratic_invariants_per_step() {
        let p = TopParams::new(1.0, 0.0, 1.2).unwrap();
        let s = project_to_constraints(
            Vector3::new(0.4, -0.2, 0.9),
            Vector3::new(0.3, 1.0, 1.0),
            1.2,
        )
        .unwrap();
        let cfg = midpoint(0.01);
        let next = step(&s, &p, &cfg).unwrap();
        let (ru, rv) = next.constraint_residuals(1.2);
        assert!(ru.abs() < 10.0 * cfg.newton_tol);
        assert!(rv.abs() < 10.0 * cfg.newton_tol);
    }

    #[test]
    fn single_sample_for_zero_t_end() {
        let p = TopParams::new(1.0, 0.0, 0.5).unwrap();
        let s = ReducedTopState::equilibrium(0.5);
        let traj = integrate(&s, &p, &midpoint(0.01), 0.0, 1).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.times[0], 0.0);
    }

    #[test]
    fn local_error_matches_richardson_reference() {
        // One midpoint step against a Richardson-extrapolated reference has
        // O(dt^3) local error.
        let p = TopParams::new(1.0, 0.0, 0.0).unwrap();
        let s = swing_state(1.0);
        let dt = 0.02;
        let coarse = step(&s, &p, &midpoint(dt)).unwrap();
        // reference: two half steps + Richardson extrapolation
        let h1 = step(&s, &p, &midpoint(dt / 2.0)).unwrap();
        let h2 = step(&h1, &p, &midpoint(dt / 2.0)).unwrap();
        let refine = |c: f64, f: f64| f + (f - c) / 3.0;
        let ref_u = Vector3::new(
            refine(coarse.u.x, h2.u.x),
            refine(coarse.u.y, h2.u.y),
            refine(coarse.u.z, h2.u.z),
        );
        let err = (coarse.u - ref_u).norm();
        assert!(err < dt.powi(3), "local error {err:.3e} vs dt^3 {:.3e}", dt.powi(3));
        assert!(err > 1e-12, "local error suspiciously small; oracle broken?");
    }

    #[test]
    fn convergence_orders() {
        let p = TopParams::new(1.0, 0.0, 0.0).unwrap();
        let s = swing_state(2.0);
        let t_end = 1.0;
        // high-accuracy reference
        let reference = integrate(
            &s,
            &p,
            &IntegratorConfig::new(Scheme::Splitting4th, 1e-5).unwrap(),
            t_end,
            usize::MAX,
        )
        .unwrap();
        let ref_state = *reference.states.last().unwrap();
        for (scheme, order) in [
            (Scheme::ImplicitMidpoint, 2.0),
            (Scheme::Splitting2nd, 2.0),
            (Scheme::Splitting4th, 4.0),
        ] {
            let dts = [0.02, 0.01, 0.005];
            let mut logs = Vec::new();
            for &dt in &dts {
                let cfg = IntegratorConfig::new(scheme, dt).unwrap();
                let traj = integrate(&s, &p, &cfg, t_end, usize::MAX).unwrap();
                let last = traj.states.last().unwrap();
                let err = (last.u - ref_state.u).norm() + (last.v - ref_state.v).norm();
                logs.push((dt.ln(), err.ln()));
            }
            let n = logs.len() as f64;
            let sx: f64 = logs.iter().map(|l| l.0).sum();
            let sy: f64 = logs.iter().map(|l| l.1).sum();
            let sxx: f64 = logs.iter().map(|l| l.0 * l.0).sum();
            let sxy: f64 = logs.iter().map(|l| l.0 * l.1).sum();
            let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            assert!(
                (slope - order).abs() <= 0.2,
                "{scheme:?}: slope {slope:.3} expected {order}"
            );
        }
    }

    #[test]
    fn energy_error_bounded_medium_run() {
        // 1e5 midpoint steps near the elliptic equilibrium; the long 1e6-step
        // run is exercised by the acceptance suite.
        let a = 3.0;
        let p = TopParams::new(1.0, 0.0, a).unwrap();
        let s = project_to_constraints(
            Vector3::new(0.02, 0.0, 1.0),
            Vector3::new(0.0, 0.01, a),
            a,
        )
        .unwrap();
        let traj = integrate(&s, &p, &midpoint(0.01), 1_000.0, 100).unwrap();
        let h0 = reduced_hamiltonian_raw(&s, &p);
        let m = traj.max_abs_drift();
        assert!(m.dh / h0.abs() < 1e-8, "relative energy drift {:.3e}", m.dh / h0.abs());
        assert!(m.d_uu < 1e-10);
        assert!(m.d_uv < 1e-10);
    }

    #[test]
    fn coupled_eps_zero_matches_reduced_and_linear_angles() {
        let a = 2.5;
        let p = TopParams::new(1.0, 0.0, a).unwrap();
        let top = project_to_constraints(
            Vector3::new(0.1, -0.05, 1.0),
            Vector3::new(0.0, 0.2, a),
            a,
        )
        .unwrap();
        let coupled_cfg = CoupledConfig {
            n: 2,
            omega_osc: vec![1.0, 1.7],
            epsilon: 0.0,
            coupling: Coupling::VerticalCosine { weights: None },
        };
        let x0 = vec![0.3, 4.0];
        let state = CoupledState::new(top, x0.clone(), vec![0.5, -0.25]);
        let cfg = midpoint(0.01);
        let t_end = 20.0;
        let traj_c = integrate_coupled(&state, &p, &cfg, &coupled_cfg, t_end, 10).unwrap();
        let traj_r = integrate(&top, &p, &cfg, t_end, 10).unwrap();
        let tau = std::f64::consts::TAU;

        // the splitting subflows take identical code paths at ε = 0, so the
        // top subtrajectory matches bit for bit there
        let split = IntegratorConfig::new(Scheme::Splitting2nd, 0.01).unwrap();
        let tc = integrate_coupled(&state, &p, &split, &coupled_cfg, 5.0, 10).unwrap();
        let tr = integrate(&top, &p, &split, 5.0, 10).unwrap();
        for (cs, rs) in tc.states.iter().zip(&tr.states) {
            assert_eq!(cs.top_state(), *rs);
        }
        for (i, t) in traj_c.times.iter().enumerate() {
            let cs = &traj_c.states[i];
            let rs = &traj_r.states[i];
            let ct = cs.top_state();
            assert!((ct.u - rs.u).norm() < 1e-10, "top subtrajectory deviates");
            assert!((ct.v - rs.v).norm() < 1e-10);
            for k in 0..2 {
                let expected = (x0[k] + coupled_cfg.omega_osc[k] * t).rem_euclid(tau);
                let got = cs.x_osc[k];
                let diff = (got - expected).abs();
                let diff = diff.min(tau - diff);
                assert!(diff < 1e-9, "angle {k} at t={t}: {got} vs {expected}");
            }
            assert_eq!(cs.y_osc, state.y_osc, "oscillator actions must stay constant");
        }
    }

    #[test]
    fn coupled_conservation_and_action_bound() {
        let a = 3.0;
        let eps = 1e-3;
        let p = TopParams::new(1.0, 0.0, a).unwrap();
        let top = project_to_constraints(
            Vector3::new(0.05, 0.0, 1.0),
            Vector3::new(0.0, 0.05, a),
            a,
        )
        .unwrap();
        let coupled_cfg = CoupledConfig {
            n: 1,
            omega_osc: vec![std::f64::consts::SQRT_2],
            epsilon: eps,
            coupling: Coupling::VerticalCosine { weights: None },
        };
        let state = CoupledState::new(top, vec![0.0], vec![1.0]);
        let cfg = midpoint(0.01);
        let t_end = 1000.0;
        let traj = integrate_coupled(&state, &p, &cfg, &coupled_cfg, t_end, 100).unwrap();
        let m = traj.max_abs_drift();
        assert!(m.dh < 1e-7, "coupled energy drift {:.3e}", m.dh);
        // |Δy| ≤ ε t sup|∂F/∂x|
        let bound = eps * t_end * coupled_cfg.coupling.sup_grad_x(1);
        for s in &traj.states {
            assert!((s.y_osc[0] - 1.0).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn splitting_preserves_constraints_exactly() {
        let a = 1.0;
        let p = TopParams::new(0.7, 0.0, a).unwrap();
        let s = project_to_constraints(
            Vector3::new(0.3, 0.4, 0.9),
            Vector3::new(1.0, -0.5, 0.7),
            a,
        )
        .unwrap();
        let cfg = IntegratorConfig::new(Scheme::Splitting2nd, 0.05).unwrap();
        let traj = integrate(&s, &p, &cfg, 100.0, 50).unwrap();
        let m = traj.max_abs_drift();
        assert!(m.d_uu < 1e-12);
        assert!(m.d_uv < 1e-12);
    }
}
