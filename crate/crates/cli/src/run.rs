//! Command implementations: each reads a validated configuration, runs the
//! corresponding library machinery and writes CSV/JSON files with provenance
//! headers into the output directory.

use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use toplab::dioph::{cantor_scan, FrequencyData};
use toplab::error::{Error, Result};
use toplab::freqmap::{naff_extract, persistence_scan, TimeSeries};
use toplab::integrator::{integrate, integrate_coupled, Trajectory};
use toplab::linstab::{
    classify_spectrum, linearize_at_pa, stabilization_threshold, SpectrumClass,
};
use toplab::models::{CoupledState, ReducedTopState, TopParams};
use toplab::monodromy::{monodromy_around_thread, LoopSpec};
use toplab::normalform::{birkhoff_normalize, gint_zpart, lie_transform, Poly, DEGREE_CAP};
use toplab::strata::{critical_surface, top_relative_equilibria};

use crate::config::*;
use crate::output::{fmt_f64, write_json, CsvWriter, Provenance};

pub fn simulate(cfg: &SimulateConfig, out: &Path, prov: &Provenance) -> Result<()> {
    cfg.top.validate()?;
    let initial = ReducedTopState::new(
        Vector3::from(cfg.initial.u),
        Vector3::from(cfg.initial.v),
        cfg.top.a,
        toplab::models::DEFAULT_CONSTRAINT_TOL,
    )?;
    match &cfg.coupled {
        None => {
            let traj = integrate(&initial, &cfg.top, &cfg.integrator, cfg.t_end, cfg.sample_every)?;
            write_reduced_trajectory(&traj, out, prov)?;
            write_drift_summary(&traj.max_abs_drift(), traj.len(), out, prov)?;
        }
        Some(block) => {
            let state = CoupledState::new(initial, block.x_osc.clone(), block.y_osc.clone());
            let traj = integrate_coupled(
                &state,
                &cfg.top,
                &cfg.integrator,
                &block.config,
                cfg.t_end,
                cfg.sample_every,
            )?;
            write_coupled_trajectory(&traj, block.config.n, out, prov)?;
            write_drift_summary(&traj.max_abs_drift(), traj.len(), out, prov)?;
        }
    }
    Ok(())
}

fn write_reduced_trajectory(
    traj: &Trajectory<ReducedTopState>,
    out: &Path,
    prov: &Provenance,
) -> Result<()> {
    let mut w = CsvWriter::new(
        prov,
        &["t", "u1", "u2", "u3", "v1", "v2", "v3", "dH", "d_uu", "d_uv"],
    );
    for i in 0..traj.len() {
        let s = &traj.states[i];
        let d = &traj.drift[i];
        w.row(&[
            fmt_f64(traj.times[i]),
            fmt_f64(s.u.x),
            fmt_f64(s.u.y),
            fmt_f64(s.u.z),
            fmt_f64(s.v.x),
            fmt_f64(s.v.y),
            fmt_f64(s.v.z),
            fmt_f64(d.dh),
            fmt_f64(d.d_uu),
            fmt_f64(d.d_uv),
        ]);
    }
    w.write(&out.join("trajectory.csv")).map_err(io_err)
}

fn write_coupled_trajectory(
    traj: &Trajectory<CoupledState>,
    n: usize,
    out: &Path,
    prov: &Provenance,
) -> Result<()> {
    let mut cols: Vec<String> = ["t", "u1", "u2", "u3", "v1", "v2", "v3"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..n {
        cols.push(format!("x{}", i + 1));
    }
    for i in 0..n {
        cols.push(format!("y{}", i + 1));
    }
    cols.extend(["dH", "d_uu", "d_uv"].iter().map(|s| s.to_string()));
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut w = CsvWriter::new(prov, &col_refs);
    for i in 0..traj.len() {
        let s = &traj.states[i];
        let d = &traj.drift[i];
        let mut row = vec![fmt_f64(traj.times[i])];
        row.extend(s.top.u.iter().map(|x| fmt_f64(*x)));
        row.extend(s.top.v.iter().map(|x| fmt_f64(*x)));
        row.extend(s.x_osc.iter().map(|x| fmt_f64(*x)));
        row.extend(s.y_osc.iter().map(|x| fmt_f64(*x)));
        row.extend([fmt_f64(d.dh), fmt_f64(d.d_uu), fmt_f64(d.d_uv)]);
        w.row(&row);
    }
    w.write(&out.join("trajectory.csv")).map_err(io_err)
}

#[derive(Serialize)]
struct DriftSummary {
    samples: usize,
    max_abs_dh: f64,
    max_abs_d_uu: f64,
    max_abs_d_uv: f64,
}

fn write_drift_summary(
    m: &toplab::integrator::DriftSample,
    samples: usize,
    out: &Path,
    prov: &Provenance,
) -> Result<()> {
    write_json(
        &out.join("drift_summary.json"),
        prov,
        &DriftSummary {
            samples,
            max_abs_dh: m.dh,
            max_abs_d_uu: m.d_uu,
            max_abs_d_uv: m.d_uv,
        },
    )
    .map_err(io_err)
}

fn class_name(c: SpectrumClass) -> &'static str {
    match c {
        SpectrumClass::HyperbolicQuartet => "hyperbolic",
        SpectrumClass::Resonant11 => "resonant",
        SpectrumClass::EllipticPairs => "elliptic",
        SpectrumClass::Degenerate => "degenerate",
    }
}

pub fn scan_spectrum(cfg: &ScanSpectrumConfig, out: &Path, prov: &Provenance) -> Result<()> {
    if cfg.c_values.is_empty() || cfg.a_range.count == 0 {
        return Err(Error::Config("empty spectrum scan grid".into()));
    }
    let a_values = cfg.a_range.values();
    let mut w = CsvWriter::new(
        prov,
        &[
            "a", "c", "mu2", "class", "re1", "re2", "re3", "re4", "im1", "im2", "im3", "im4",
        ],
    );
    let mut thresholds = Vec::new();
    for &c in &cfg.c_values {
        for &a in &a_values {
            let params = TopParams { c, rho: 0.0, a };
            let m = linearize_at_pa(&params)?;
            let rep = classify_spectrum(&m, cfg.tol)?;
            let eigs = toplab::linstab::sorted_eigenvalues(&rep.eigenvalues);
            let mut row = vec![
                fmt_f64(a),
                fmt_f64(c),
                fmt_f64(0.25 * a * a - c),
                class_name(rep.class).to_string(),
            ];
            row.extend(eigs.iter().map(|e| fmt_f64(e.re)));
            row.extend(eigs.iter().map(|e| fmt_f64(e.im)));
            w.row(&row);
        }
        let bracket = (a_values[0], a_values[a_values.len() - 1]);
        if let Ok(a0) = stabilization_threshold(c, bracket, 1e-10) {
            thresholds.push((c, a0));
        }
    }
    w.write(&out.join("spectrum.csv")).map_err(io_err)?;
    #[derive(Serialize)]
    struct Thresholds {
        thresholds: Vec<(f64, f64)>,
    }
    write_json(&out.join("thresholds.json"), prov, &Thresholds { thresholds }).map_err(io_err)
}

pub fn normal_form(
    cfg: &NormalFormConfig,
    out: &Path,
    prov: &Provenance,
    seed: u64,
) -> Result<()> {
    let p = toplab::linstab::UnfoldingParams::new(
        cfg.unfolding.lambda0,
        cfg.unfolding.mu1,
        cfg.unfolding.mu2,
    )?;
    let h = match &cfg.roundtrip {
        Some(rt) => {
            let truth = toplab::normalform::NormalFormCoefficients {
                lambda0: p.lambda0,
                mu1: p.mu1,
                mu2: p.mu2,
                b: rt.b,
                c1: rt.c1,
                c2: rt.c2,
                omega: cfg.omega.clone(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chi = Poly::zero();
            for e0 in 0..=3u8 {
                for e1 in 0..=(3 - e0) {
                    for e2 in 0..=(3 - e0 - e1) {
                        let e3 = 3 - e0 - e1 - e2;
                        chi.add_term([e0, e1, e2, e3], rng.random_range(-0.5..0.5));
                    }
                }
            }
            lie_transform(&gint_zpart(&truth), &chi, DEGREE_CAP)
        }
        None => {
            let mut h = toplab::normalform::quadratic_part(&p);
            for t in &cfg.terms {
                let deg: u32 = t.exps.iter().map(|&e| e as u32).sum();
                if deg < 3 {
                    return Err(Error::Config(format!(
                        "term {:?} has degree {deg}; the quadratic part is implied by `unfolding`",
                        t.exps
                    )));
                }
                h.add_term(t.exps, t.coeff);
            }
            h
        }
    };
    let (coeffs, generator) = birkhoff_normalize(&h, &p, &cfg.omega, 4)?;
    #[derive(Serialize)]
    struct CoeffOut {
        lambda0: f64,
        mu1: f64,
        mu2: f64,
        b: f64,
        c1: f64,
        c2: f64,
        supercritical: bool,
        omega: Vec<f64>,
    }
    write_json(
        &out.join("coefficients.json"),
        prov,
        &CoeffOut {
            lambda0: coeffs.lambda0,
            mu1: coeffs.mu1,
            mu2: coeffs.mu2,
            b: coeffs.b,
            c1: coeffs.c1,
            c2: coeffs.c2,
            supercritical: coeffs.supercritical(),
            omega: coeffs.omega.clone(),
        },
    )
    .map_err(io_err)?;
    let mut w = CsvWriter::new(prov, &["e1", "e2", "e3", "e4", "coeff"]);
    for (e, c) in generator.terms() {
        w.row(&[
            e[0].to_string(),
            e[1].to_string(),
            e[2].to_string(),
            e[3].to_string(),
            fmt_f64(*c),
        ]);
    }
    w.write(&out.join("generator.csv")).map_err(io_err)
}

pub fn strata(cfg: &StrataConfig, out: &Path, prov: &Provenance) -> Result<()> {
    let coeffs = cfg.coeffs.to_coeffs();
    let m_grid = cfg.m_range.values();
    let surf = critical_surface(&coeffs, &m_grid)?;
    let mut w = CsvWriter::new(prov, &["mu2", "M", "S", "G", "label"]);
    for s in &surf {
        w.row(&[
            fmt_f64(s.point.mu2),
            fmt_f64(s.m),
            fmt_f64(s.point.s),
            fmt_f64(s.point.g),
            s.point.label.to_string(),
        ]);
    }
    w.write(&out.join("surface.csv")).map_err(io_err)?;

    if let Some(top) = &cfg.top {
        let mut grid = Vec::new();
        for &u3 in &top.u3_range.values() {
            for &omega in &top.omega_range.values() {
                grid.push((u3, omega));
            }
        }
        let eqs = top_relative_equilibria(top.c, &grid)?;
        let a0 = 2.0 * top.c.sqrt();
        let mut w = CsvWriter::new(prov, &["u3", "Omega", "a", "b", "h", "class"]);
        for eq in &eqs {
            let class = if (eq.u3 - 1.0).abs() < 1e-12 {
                if eq.em.a.abs() > a0 {
                    "thread-elliptic"
                } else {
                    "thread-hyperbolic"
                }
            } else {
                "surface"
            };
            w.row(&[
                fmt_f64(eq.u3),
                fmt_f64(eq.omega),
                fmt_f64(eq.em.a),
                fmt_f64(eq.em.b),
                fmt_f64(eq.em.h),
                class.to_string(),
            ]);
        }
        w.write(&out.join("top_surface.csv")).map_err(io_err)?;
    }
    Ok(())
}

pub fn dioph_scan(cfg: &DiophScanConfig, out: &Path, prov: &Provenance) -> Result<()> {
    let omega_base = cfg.omega.clone();
    let lambda0 = cfg.lambda0;
    if omega_base.is_empty() {
        return Err(Error::Config("need at least one internal frequency".into()));
    }
    let model = move |nu: &[f64]| -> Result<FrequencyData> {
        let (scale, mu2) = if nu.len() == 2 {
            (nu[0], nu[1])
        } else {
            (1.0, nu[0])
        };
        let omega: Vec<f64> = omega_base.iter().map(|w| w * scale).collect();
        let omega_n = if mu2 > 0.0 {
            let d = mu2.sqrt();
            vec![lambda0 - d, lambda0 + d]
        } else {
            Vec::new()
        };
        FrequencyData::new(omega, omega_n)
    };
    let (box_, resolution): (Vec<(f64, f64)>, Vec<usize>) = match &cfg.scale_range {
        Some(sr) => (
            vec![(sr.min, sr.max), (cfg.mu2_range.min, cfg.mu2_range.max)],
            vec![sr.count, cfg.mu2_range.count],
        ),
        None => (
            vec![(cfg.mu2_range.min, cfg.mu2_range.max)],
            vec![cfg.mu2_range.count],
        ),
    };
    let scan = cantor_scan(model, &box_, &resolution, &cfg.dioph)?;
    let coord_names: Vec<&str> = if cfg.scale_range.is_some() {
        vec!["scale", "mu2"]
    } else {
        vec!["mu2"]
    };
    let mut cols = coord_names.clone();
    cols.extend(["pass", "margin", "worst_k", "worst_l"]);
    let mut w = CsvWriter::new(prov, &cols);
    for (nu, rep) in &scan.points {
        let mut row: Vec<String> = nu.iter().map(|x| fmt_f64(*x)).collect();
        row.push(if rep.pass { "1" } else { "0" }.to_string());
        row.push(fmt_f64(rep.margin));
        row.push(format!(
            "\"{}\"",
            rep.worst_k
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(";")
        ));
        row.push(format!(
            "\"{}\"",
            rep.worst_l
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(";")
        ));
        w.row(&row);
    }
    w.write(&out.join("dioph.csv")).map_err(io_err)?;
    #[derive(Serialize)]
    struct Summary {
        survival: f64,
        points: usize,
        k_max: u32,
    }
    write_json(
        &out.join("summary.json"),
        prov,
        &Summary {
            survival: scan.survival,
            points: scan.points.len(),
            k_max: cfg.dioph.k_max,
        },
    )
    .map_err(io_err)
}

pub fn naff(cfg: &NaffConfig, out: &Path, prov: &Provenance) -> Result<()> {
    let ts = match (&cfg.synthetic, &cfg.simulate) {
        (Some(s), None) => {
            let samples = (0..s.n)
                .map(|j| {
                    let t = s.dt * j as f64;
                    s.terms
                        .iter()
                        .map(|term| {
                            Complex64::from_polar(term.amplitude, term.frequency * t + term.phase)
                        })
                        .sum()
                })
                .collect();
            TimeSeries::new(samples, s.dt)?
        }
        (None, Some(sim)) => {
            sim.top.validate()?;
            let initial = ReducedTopState::new(
                Vector3::from(sim.initial.u),
                Vector3::from(sim.initial.v),
                sim.top.a,
                toplab::models::DEFAULT_CONSTRAINT_TOL,
            )?;
            let traj = integrate(&initial, &sim.top, &sim.integrator, sim.t_end, sim.sample_every)?;
            let samples = traj
                .states
                .iter()
                .map(|s| Complex64::new(s.u.x, s.u.y))
                .collect();
            TimeSeries::new(samples, sim.integrator.dt * sim.sample_every as f64)?
        }
        _ => {
            return Err(Error::Config(
                "exactly one of `synthetic` or `simulate` must be given".into(),
            ))
        }
    };
    let dec = naff_extract(&ts, cfg.max_terms, cfg.refine_tol)?;
    let mut w = CsvWriter::new(prov, &["frequency", "amplitude", "phase"]);
    for t in &dec.terms {
        w.row(&[fmt_f64(t.frequency), fmt_f64(t.amplitude), fmt_f64(t.phase)]);
    }
    w.write(&out.join("naff.csv")).map_err(io_err)?;
    write_json(&out.join("naff.json"), prov, &dec).map_err(io_err)
}

pub fn persistence(cfg: &PersistenceRun, out: &Path, prov: &Provenance) -> Result<()> {
    let outcome = persistence_scan(cfg)?;
    let mut cols: Vec<String> = vec!["amplitude".into(), "epsilon".into(), "class".into()];
    for i in 0..cfg.windows {
        cols.push(format!("f{}", i + 1));
    }
    cols.push("drift".into());
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut w = CsvWriter::new(prov, &col_refs);
    for cell in &outcome.cells {
        let mut row = vec![
            fmt_f64(cell.amplitude),
            fmt_f64(cell.epsilon),
            format!("{:?}", cell.class).to_lowercase(),
        ];
        for i in 0..cfg.windows {
            row.push(fmt_f64(
                cell.window_frequencies.get(i).copied().unwrap_or(f64::NAN),
            ));
        }
        row.push(fmt_f64(cell.drift));
        w.row(&row);
    }
    w.write(&out.join("persistence.csv")).map_err(io_err)?;
    write_json(&out.join("summary.json"), prov, &outcome).map_err(io_err)
}

pub fn monodromy(cfg: &MonodromyConfig, out: &Path, prov: &Provenance) -> Result<()> {
    let coeffs = cfg.coeffs.to_coeffs();
    let spec = match &cfg.loop_spec.nodes {
        Some(nodes) => LoopSpec::new(cfg.loop_spec.mu2, nodes.clone())?,
        None => {
            let rs = cfg.loop_spec.radius_s.ok_or_else(|| {
                Error::Config("loop needs either nodes or radius_s/radius_g".into())
            })?;
            let rg = cfg
                .loop_spec
                .radius_g
                .ok_or_else(|| Error::Config("loop needs radius_g".into()))?;
            LoopSpec::ellipse(cfg.loop_spec.mu2, rs, rg, cfg.loop_spec.steps, cfg.loop_spec.turns)?
        }
    };
    let result = monodromy_around_thread(&spec, &coeffs)?;
    let mut w = CsvWriter::new(prov, &["s", "g", "theta"]);
    for (s, g, theta) in &result.nodes {
        w.row(&[fmt_f64(*s), fmt_f64(*g), fmt_f64(*theta)]);
    }
    w.write(&out.join("theta_branch.csv")).map_err(io_err)?;
    write_json(&out.join("monodromy.json"), prov, &result).map_err(io_err)
}

fn io_err(e: std::io::Error) -> Error {
    Error::Numeric(format!("io error: {e}"))
}
