//! Frequency analysis of trajectories: iterative windowed-correlation
//! extraction of fundamental frequencies, torus-dimension estimation from
//! integer-relation searches, and persistence scans of invariant tori under
//! coupling perturbations.
//!
//! Extraction uses a Hann window and golden-section refinement of the
//! correlation maximum around the strongest FFT bin, then subtracts the
//! component and repeats. On a pure single-frequency signal the correlation
//! peak sits exactly at the signal frequency, so the only error is the
//! refinement tolerance.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_coupled, IntegratorConfig};
use crate::models::{project_to_constraints, CoupledConfig, CoupledState, TopParams};

/// Uniformly sampled complex signal.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub samples: Vec<Complex64>,
    pub dt: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<Complex64>, dt: f64) -> Result<Self> {
        if samples.len() < 16 {
            return Err(Error::Data(format!(
                "need at least 16 samples, got {}",
                samples.len()
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::Data(format!("sampling step must be positive, got {dt}")));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::Data("non-finite samples".into()));
        }
        Ok(Self { samples, dt })
    }
}

/// One extracted spectral line.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FrequencyTerm {
    /// Angular frequency in rad per unit time.
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Decomposition `s(t) ≈ Σ aₖ e^{i(ωₖ t + φₖ)}`, amplitudes non-increasing.
#[derive(Clone, Debug, Serialize)]
pub struct FrequencyDecomposition {
    pub terms: Vec<FrequencyTerm>,
    pub residual_norm: f64,
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 0.5 * (1.0 - (std::f64::consts::TAU * j as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Windowed correlation amplitude `|Σ rⱼ wⱼ e^{−iωtⱼ}|`.
fn correlation(res: &[Complex64], window: &[f64], dt: f64, omega: f64) -> f64 {
    let mut acc = Complex64::ZERO;
    // incremental rotation, resynchronized periodically
    let step = Complex64::from_polar(1.0, -omega * dt);
    let mut rot = Complex64::new(1.0, 0.0);
    for (j, (r, w)) in res.iter().zip(window).enumerate() {
        if j % 1024 == 0 {
            rot = Complex64::from_polar(1.0, -omega * dt * j as f64);
        }
        acc += r * w * rot;
        rot *= step;
    }
    acc.norm()
}

fn golden_max(
    f: &dyn Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Least-squares coefficients of `exp(iωₖ t)` against the original signal.
fn solve_amplitudes(samples: &[Complex64], dt: f64, freqs: &[f64]) -> Vec<Complex64> {
    use nalgebra::{DMatrix, DVector};
    let n = samples.len();
    let k = freqs.len();
    let mut gram = DMatrix::<Complex64>::zeros(k, k);
    let mut rhs = DVector::<Complex64>::zeros(k);
    let basis: Vec<Vec<Complex64>> = freqs
        .iter()
        .map(|&w| {
            (0..n)
                .map(|j| Complex64::from_polar(1.0, w * dt * j as f64))
                .collect()
        })
        .collect();
    for a in 0..k {
        for b in 0..k {
            let mut acc = Complex64::ZERO;
            for j in 0..n {
                acc += basis[a][j].conj() * basis[b][j];
            }
            gram[(a, b)] = acc / n as f64;
        }
        let mut acc = Complex64::ZERO;
        for j in 0..n {
            acc += basis[a][j].conj() * samples[j];
        }
        rhs[a] = acc / n as f64;
    }
    match gram.lu().solve(&rhs) {
        Some(x) => x.iter().copied().collect(),
        None => rhs.iter().copied().collect(),
    }
}

/// Iterative frequency extraction.
///
/// Finds the argmax of the Hann-windowed correlation, refines it by
/// golden-section search to `refine_tol`, orthogonally subtracts the
/// component, and repeats up to `max_terms` or until the residual is
/// negligible. Frequencies within `refine_tol` of zero are reported as
/// exactly zero.
pub fn naff_extract(
    ts: &TimeSeries,
    max_terms: usize,
    refine_tol: f64,
) -> Result<FrequencyDecomposition> {
    if max_terms == 0 {
        return Err(Error::Config("max_terms must be at least 1".into()));
    }
    if !(refine_tol > 0.0) {
        return Err(Error::Config("refine_tol must be positive".into()));
    }
    let n = ts.samples.len();
    let dt = ts.dt;
    let window = hann(n);
    let mut residual = ts.samples.clone();
    let mut freqs: Vec<f64> = Vec::new();

    let initial_rms =
        (ts.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);

    for _ in 0..max_terms {
        // coarse stage: strongest bin of the windowed spectrum
        let mut buf: Vec<Complex64> = residual
            .iter()
            .zip(&window)
            .map(|(r, w)| r * w)
            .collect();
        fft.process(&mut buf);
        let (best_bin, best_amp) = buf
            .iter()
            .enumerate()
            .map(|(k, v)| (k, v.norm()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_amp < 1e-13 * initial_rms.max(1e-300) * n as f64 {
            break;
        }
        let k_signed = if best_bin <= n / 2 {
            best_bin as f64
        } else {
            best_bin as f64 - n as f64
        };
        let omega0 = std::f64::consts::TAU * k_signed / (n as f64 * dt);
        let half_bin = std::f64::consts::TAU / (n as f64 * dt);
        let res_ref = &residual;
        let win_ref = &window;
        let f = move |w: f64| correlation(res_ref, win_ref, dt, w);
        let bin = std::f64::consts::TAU / (n as f64 * dt);
        let mut omega = golden_max(&f, omega0 - half_bin, omega0 + half_bin, refine_tol);
        // snap to an exact zero when the estimate is below the achievable
        // resolution (the correlation peak is quadratically flat, so the
        // refinement is noise-limited near ω = 0)
        if omega.abs() < refine_tol.max(1e-6 * bin) {
            omega = 0.0;
        }
        // resolution guard: lines closer than a Fourier bin to an extracted
        // one are artifacts of the residual floor, and the Gram system
        // degenerates for near-coinciding exponentials
        if freqs.iter().any(|&w| (w - omega).abs() < bin) {
            break;
        }
        freqs.push(omega);
        // refresh all coefficients against the original signal and rebuild
        // the residual
        let coeffs = solve_amplitudes(&ts.samples, dt, &freqs);
        residual = ts.samples.clone();
        for (w, c) in freqs.iter().zip(&coeffs) {
            for (j, r) in residual.iter_mut().enumerate() {
                *r -= c * Complex64::from_polar(1.0, w * dt * j as f64);
            }
        }
        let rms = (residual.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64).sqrt();
        if rms < 1e-13 * initial_rms.max(1e-300) {
            break;
        }
    }

    let coeffs = solve_amplitudes(&ts.samples, dt, &freqs);
    let mut terms: Vec<FrequencyTerm> = freqs
        .iter()
        .zip(&coeffs)
        .map(|(&frequency, c)| FrequencyTerm {
            frequency,
            amplitude: c.norm(),
            phase: c.arg(),
        })
        .collect();
    terms.sort_by(|a, b| b.amplitude.partial_cmp(&a.amplitude).unwrap());
    let mut residual = ts.samples.clone();
    for t in &terms {
        for (j, r) in residual.iter_mut().enumerate() {
            *r -= Complex64::from_polar(t.amplitude, t.frequency * dt * j as f64 + t.phase);
        }
    }
    let residual_norm =
        (residual.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    Ok(FrequencyDecomposition {
        terms,
        residual_norm,
    })
}

/// Result of the rational-independence analysis of a frequency list.
#[derive(Clone, Debug, Serialize)]
pub struct TorusDimension {
    pub dim: usize,
    /// A maximal rationally independent subset of the input frequencies.
    pub basis: Vec<f64>,
    /// The integer relations found (within tolerance).
    pub relations: Vec<Vec<i64>>,
}

fn enumerate_k(m: usize, k_max: u32, f: &mut dyn FnMut(&[i64])) {
    fn rec(k: &mut Vec<i64>, i: usize, budget: i64, any: bool, f: &mut dyn FnMut(&[i64])) {
        if i == k.len() {
            if any {
                f(k);
            }
            return;
        }
        let lo = if any { -budget } else { 0 };
        for v in lo..=budget {
            k[i] = v;
            rec(k, i + 1, budget - v.abs(), any || v != 0, f);
        }
        k[i] = 0;
    }
    let mut k = vec![0i64; m];
    rec(&mut k, 0, k_max as i64, false, f);
}

fn integer_rank(relations: &[Vec<i64>]) -> usize {
    if relations.is_empty() {
        return 0;
    }
    let rows = relations.len();
    let cols = relations[0].len();
    let mut m: Vec<Vec<i128>> = relations
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, pivot);
        for r in 0..rows {
            if r != rank && m[r][col] != 0 {
                let (a, b) = (m[rank][col], m[r][col]);
                let g = gcd(a.unsigned_abs(), b.unsigned_abs()) as i128;
                let (fa, fb) = (b / g, a / g);
                for c in 0..cols {
                    m[r][c] = m[r][c] * fb - m[rank][c] * fa;
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// Dimension of the torus spanned by the given frequencies: the size of a
/// maximal subset with no integer relation `⟨k, f⟩ = 0`, `|k|₁ ≤ k_rel`,
/// within `tol`.
pub fn torus_dimension(freqs: &[f64], k_rel: u32, tol: f64) -> TorusDimension {
    let n = freqs.len();
    if n == 0 {
        return TorusDimension {
            dim: 0,
            basis: vec![],
            relations: vec![],
        };
    }
    let mut relations: Vec<Vec<i64>> = Vec::new();
    enumerate_k(n, k_rel, &mut |k| {
        let v: f64 = k.iter().zip(freqs).map(|(ki, f)| *ki as f64 * f).sum();
        if v.abs() <= tol {
            relations.push(k.to_vec());
        }
    });
    let dim = n - integer_rank(&relations);
    // greedy independent subset
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..n {
        let mut trial = chosen.clone();
        trial.push(i);
        let sub: Vec<f64> = trial.iter().map(|&j| freqs[j]).collect();
        let mut dependent = false;
        enumerate_k(sub.len(), k_rel, &mut |k| {
            if dependent {
                return;
            }
            let v: f64 = k.iter().zip(&sub).map(|(ki, f)| *ki as f64 * f).sum();
            if v.abs() <= tol {
                dependent = true;
            }
        });
        if !dependent {
            chosen = trial;
        }
        if chosen.len() == dim {
            break;
        }
    }
    TorusDimension {
        dim,
        basis: chosen.iter().map(|&j| freqs[j]).collect(),
        relations,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TorusClass {
    Survived,
    Resonant,
    Escaped,
}

/// Configuration of a persistence scan over initial tori and coupling
/// strengths.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistenceConfig {
    pub params: TopParams,
    pub coupled: CoupledConfig,
    pub integrator: IntegratorConfig,
    /// Initial displacement amplitudes along the slow normal mode of `P_a`.
    pub amplitudes: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub windows: usize,
    pub window_samples: usize,
    pub sample_every: usize,
    #[serde(default = "default_refine_tol")]
    pub refine_tol: f64,
    /// Spatial escape threshold as a multiple of the initial amplitude.
    #[serde(default = "default_escape_factor")]
    pub escape_factor: f64,
    #[serde(default = "default_resonance_order")]
    pub resonance_order: u32,
    #[serde(default = "default_resonance_tol")]
    pub resonance_tol: f64,
}

fn default_refine_tol() -> f64 {
    1e-10
}

fn default_escape_factor() -> f64 {
    4.0
}

fn default_resonance_order() -> u32 {
    6
}

fn default_resonance_tol() -> f64 {
    1e-4
}

#[derive(Clone, Debug, Serialize)]
pub struct PersistenceCell {
    pub amplitude: f64,
    pub epsilon: f64,
    pub class: TorusClass,
    /// Leading observable frequency per window.
    pub window_frequencies: Vec<f64>,
    pub drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PersistenceOutcome {
    pub cells: Vec<PersistenceCell>,
    /// `(ε, survived fraction)` in the order of the configured epsilons.
    pub survival_by_epsilon: Vec<(f64, f64)>,
    pub drift_tol: f64,
}

/// Initial state displaced from `P_a` along the slow normal mode.
pub fn displaced_torus_state(
    params: &TopParams,
    coupled: &CoupledConfig,
    amplitude: f64,
) -> Result<CoupledState> {
    let (a, c) = (params.a, params.c);
    let disc = a * a - 4.0 * c;
    if disc <= 0.0 {
        return Err(Error::Config(format!(
            "persistence scans require the elliptic regime a > 2√c (a = {a}, c = {c})"
        )));
    }
    let omega_slow = 0.5 * (a - disc.sqrt());
    let u = nalgebra::Vector3::new(amplitude, 0.0, (1.0 - amplitude * amplitude).sqrt());
    let v = nalgebra::Vector3::new((a - omega_slow) * amplitude, 0.0, a);
    let top = project_to_constraints(u, v, a)?;
    Ok(CoupledState::new(
        top,
        vec![0.0; coupled.n],
        vec![1.0; coupled.n],
    ))
}

fn classify_cell(
    cfg: &PersistenceConfig,
    amplitude: f64,
    epsilon: f64,
) -> Result<PersistenceCell> {
    let mut coupled = cfg.coupled.clone();
    coupled.epsilon = epsilon;
    let mut state = displaced_torus_state(&cfg.params, &coupled, amplitude)?;
    let dt_sample = cfg.integrator.dt * cfg.sample_every as f64;
    let window_t = dt_sample * cfg.window_samples as f64;

    let mut window_frequencies = Vec::with_capacity(cfg.windows);
    let mut window_amplitudes = Vec::with_capacity(cfg.windows);
    let mut escaped = false;
    for _ in 0..cfg.windows {
        let traj = integrate_coupled(
            &state,
            &cfg.params,
            &cfg.integrator,
            &coupled,
            window_t,
            cfg.sample_every,
        )?;
        let obs: Vec<Complex64> = traj
            .states
            .iter()
            .take(cfg.window_samples)
            .map(|s| Complex64::new(s.top.u[0], s.top.u[1]))
            .collect();
        if obs
            .iter()
            .any(|z| z.norm() > cfg.escape_factor * amplitude || !z.re.is_finite())
        {
            escaped = true;
            break;
        }
        let ts = TimeSeries::new(obs, dt_sample)?;
        let dec = naff_extract(&ts, 4, cfg.refine_tol)?;
        let Some(lead) = dec.terms.first() else {
            escaped = true;
            break;
        };
        window_frequencies.push(lead.frequency);
        window_amplitudes.push(lead.amplitude);
        state = traj.states.last().unwrap().clone();
    }

    if escaped || window_frequencies.len() < cfg.windows {
        return Ok(PersistenceCell {
            amplitude,
            epsilon,
            class: TorusClass::Escaped,
            window_frequencies,
            drift: f64::INFINITY,
        });
    }

    let f0 = window_frequencies[0];
    let drift = window_frequencies
        .iter()
        .map(|f| (f - f0).abs())
        .fold(0.0, f64::max);
    let amp0 = window_amplitudes[0];
    let amp_stable = window_amplitudes
        .iter()
        .all(|a| (a - amp0).abs() <= 0.3 * amp0.max(1e-12));

    // low-order relation between the observable frequency and the drive
    let mut rel_freqs = vec![f0];
    rel_freqs.extend_from_slice(&coupled.omega_osc);
    let td = torus_dimension(&rel_freqs, cfg.resonance_order, cfg.resonance_tol);
    let resonant = td.dim < rel_freqs.len();

    let drift_tol = drift_tolerance(cfg.refine_tol, f0);
    let class = if resonant && epsilon > 0.0 {
        TorusClass::Resonant
    } else if drift <= drift_tol && amp_stable {
        TorusClass::Survived
    } else {
        TorusClass::Resonant
    };
    Ok(PersistenceCell {
        amplitude,
        epsilon,
        class,
        window_frequencies,
        drift,
    })
}

/// Drift tolerance separating extraction noise from genuine diffusion.
pub fn drift_tolerance(refine_tol: f64, omega: f64) -> f64 {
    (10.0 * refine_tol).max(1e-7 * omega.abs())
}

/// Classify each configured torus and coupling strength.
pub fn persistence_scan(cfg: &PersistenceConfig) -> Result<PersistenceOutcome> {
    if cfg.windows < 2 {
        return Err(Error::Config("persistence scans need at least 2 windows".into()));
    }
    cfg.params.validate()?;
    cfg.coupled.validate()?;
    cfg.integrator.validate()?;
    if cfg.amplitudes.is_empty() || cfg.epsilons.is_empty() {
        return Err(Error::Config("empty amplitude or epsilon grid".into()));
    }
    let cases: Vec<(f64, f64)> = cfg
        .epsilons
        .iter()
        .flat_map(|&e| cfg.amplitudes.iter().map(move |&a| (a, e)))
        .collect();
    let cells: Vec<PersistenceCell> = cases
        .par_iter()
        .map(|&(a, e)| classify_cell(cfg, a, e))
        .collect::<Result<_>>()?;
    let survival_by_epsilon = cfg
        .epsilons
        .iter()
        .map(|&e| {
            let of_eps: Vec<&PersistenceCell> =
                cells.iter().filter(|c| c.epsilon == e).collect();
            let survived = of_eps
                .iter()
                .filter(|c| c.class == TorusClass::Survived)
                .count();
            (e, survived as f64 / of_eps.len() as f64)
        })
        .collect();
    // representative frequency for the reported drift tolerance
    let f_rep = cells
        .iter()
        .flat_map(|c| c.window_frequencies.first().copied())
        .next()
        .unwrap_or(1.0);
    Ok(PersistenceOutcome {
        cells,
        survival_by_epsilon,
        drift_tol: drift_tolerance(cfg.refine_tol, f_rep),
    })
}
