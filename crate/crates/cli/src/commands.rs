use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use eqspec::invariants::{self, InvariantCurve};
use eqspec::inverse::{self, BranchPair, InverseError, ReconstructionResult, SCurve};
use eqspec::laplace;
use eqspec::measure::{self, MeasureError, MeasureOptions};
use eqspec::profiles::{self, SingleWellCertificate};
use eqspec::semiclassics;

use crate::config::RunConfig;
use crate::output::{Cell, Outputs};
use crate::specs::{GridSpec, ModeRange, RhoSpec};
use crate::CliError;

fn inverse_failure(e: InverseError) -> CliError {
    CliError::numerical(e.stage(), e)
}

pub fn spectrum(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let p = cfg.profile_spec().build()?;
    let s = &cfg.spectrum;
    let modes = ModeRange::parse(&s.m_range)?.0;
    let spectra = modes
        .par_iter()
        .map(|&m| laplace::equivariant_spectrum(&p, m, s.cells, s.lambda_max))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::numerical("spectrum", e))?;
    if let Some(sp) = spectra.iter().find(|sp| sp.truncated) {
        eprintln!(
            "warning: lambda_max = {} exceeds the resolved range {} at N = {}; spectra are cut there",
            s.lambda_max,
            laplace::resolved_cap(sp.cells),
            sp.cells
        );
    }
    let mut rows = Vec::new();
    for sp in &spectra {
        for (k, &l) in sp.eigenvalues.iter().enumerate() {
            rows.push(vec![
                Cell::from(sp.m),
                Cell::from(sp.m.unsigned_abs() as usize + k),
                Cell::from(l),
            ]);
        }
    }
    out.csv("spectrum.csv", &["m", "k", "lambda"], rows)
}

#[derive(Serialize)]
struct MeasureSummary<'a> {
    alpha: f64,
    rho: &'a str,
    i1: f64,
    i2: f64,
    /// log-log slope of |2πħμ - I₁| against ħ over complete samples
    slope: Option<f64>,
    extrapolated_second: Option<f64>,
    truncated_modes: Vec<i64>,
}

pub fn measure(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let p = cfg.profile_spec().build()?;
    let m = &cfg.measure;
    let rho = RhoSpec::parse(&m.rho)?.0;
    let opts = MeasureOptions {
        cells: m.cells,
        richardson: m.richardson,
    };
    let study = measure::convergence_study(&p, &rho, m.alpha, &m.modes, &opts, m.quadrature_tol)
        .map_err(|e| {
            let stage = match e {
                MeasureError::Invariant(_) => "invariants",
                MeasureError::Laplace(_) => "spectrum",
                _ => "measure",
            };
            CliError::numerical(stage, e)
        })?;
    let truncated: Vec<i64> = study.rows.iter().filter(|r| !r.complete).map(|r| r.m).collect();
    if !truncated.is_empty() {
        eprintln!("warning: modes {truncated:?} need more cells; excluded from the fits");
    }
    let rows = study
        .rows
        .iter()
        .map(|r| {
            vec![
                r.m.into(),
                r.hbar.into(),
                r.mu.into(),
                r.i1.into(),
                r.i2.into(),
                r.resid1.into(),
                r.resid2.into(),
            ]
        })
        .collect();
    out.csv(
        "measure.csv",
        &["m", "hbar", "mu", "I1", "I2", "resid1", "resid2"],
        rows,
    )?;
    out.json(
        "measure.json",
        &MeasureSummary {
            alpha: study.alpha,
            rho: &m.rho,
            i1: study.i1,
            i2: study.i2,
            slope: study.slope,
            extrapolated_second: study.extrapolated_second,
            truncated_modes: truncated,
        },
    )
}

fn curve_rows(c: &InvariantCurve) -> Vec<Vec<Cell>> {
    let w = c.w.as_deref().unwrap_or(&[]);
    let q = c.q.as_deref().unwrap_or(&[]);
    c.lambda
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            vec![
                l.into(),
                w.get(i).copied().unwrap_or(f64::NAN).into(),
                q.get(i).copied().unwrap_or(f64::NAN).into(),
            ]
        })
        .collect()
}

pub fn invariants(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let p = cfg.profile_spec().build()?;
    profiles::certify_single_well(&p, cfg.profile.grid_size)
        .map_err(|e| CliError::numerical("certify", e))?;
    let alpha = cfg.invariants.alpha;
    let grid = GridSpec::parse(&cfg.invariants.lambda_grid)?.points(&p, alpha);
    let curve = invariants::invariant_curve(&p, alpha, &grid)
        .map_err(|e| CliError::numerical("invariants", e))?;
    out.csv("invariants.csv", &["lambda", "W", "Q"], curve_rows(&curve))
}

pub fn symbols_report(max_order: u32) -> Result<String, CliError> {
    let mut s = String::new();
    let fail = |e| CliError::numerical("symbols", e);
    for k in 1..=max_order {
        let b = semiclassics::b_recursion(k, max_order).map_err(fail)?;
        let _ = writeln!(s, "b_{k}: degree {:?}", b.degree());
        for (l, e) in b.terms() {
            let _ = writeln!(s, "  b_{k},{l} = {e}");
        }
        let term = semiclassics::assemble_term(k, max_order).map_err(fail)?;
        let _ = writeln!(
            s,
            "term {k}: zero by parity {}, uniform i-power {:?}",
            term.zero_by_parity,
            term.uniform_i_power()
        );
        for (l, e) in &term.integrands {
            let _ = writeln!(s, "  rho^({l}): {e}");
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn symbols(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let text = symbols_report(cfg.symbols.max_order)?;
    out.text("symbols.txt", &text)
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    lambda: f64,
    #[serde(rename = "W")]
    w: f64,
    #[serde(rename = "Q")]
    q: f64,
}

pub fn read_curve(path: &std::path::Path, alpha: f64) -> Result<InvariantCurve, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut lambda = Vec::new();
    let mut w = Vec::new();
    let mut q = Vec::new();
    for row in r.deserialize::<CurveRow>() {
        let row = row.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        lambda.push(row.lambda);
        w.push(row.w);
        q.push(row.q);
    }
    if lambda.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(CliError::Config(format!(
            "{}: lambda must be strictly increasing",
            path.display()
        )));
    }
    let mut c = InvariantCurve::new(alpha, lambda);
    c.w = Some(w);
    c.q = Some(q);
    Ok(c)
}

#[derive(Serialize)]
struct ReconstructReport<'a> {
    alpha: f64,
    c: f64,
    curvature: f64,
    x_max: f64,
    near_degenerate: usize,
    reflection: &'a str,
    certificate: &'a SingleWellCertificate,
}

fn write_reconstruction(
    out: &mut Outputs,
    d: &SCurve,
    f: &SCurve,
    bp: &BranchPair,
    r: &ReconstructionResult,
) -> Result<(), CliError> {
    let rows = r.x.iter().zip(&r.v).map(|(&x, &v)| vec![x.into(), v.into()]).collect();
    out.csv("reconstruction.csv", &["x", "v"], rows)?;
    let rows = (0..bp.big_s.len())
        .map(|k| {
            vec![
                (bp.c + bp.big_s[k]).into(),
                d.values[k + 1].into(),
                f.values[k + 1].into(),
                bp.first[k].into(),
                bp.second[k].into(),
            ]
        })
        .collect();
    out.csv("branches.csv", &["s", "D", "F", "f1_prime", "f2_prime"], rows)
}

pub fn reconstruct(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let i = &cfg.inverse;
    let path = i
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("reconstruct needs inverse.input or --input".into()))?;
    let curve = read_curve(path, i.alpha)?;
    let opts = i.roundtrip_options().inverse;
    let c = inverse::detect_c(&curve, opts.threshold).map_err(inverse_failure)?;
    let (d, f, bp, r) = inverse::reconstruct(&curve, c, &opts).map_err(inverse_failure)?;
    write_reconstruction(out, &d, &f, &bp, &r)?;
    out.json(
        "reconstruct.json",
        &ReconstructReport {
            alpha: i.alpha,
            c,
            curvature: r.curvature,
            x_max: r.x_max,
            near_degenerate: bp.near_degenerate,
            reflection: r.reflection,
            certificate: &r.certificate,
        },
    )
}

pub fn roundtrip(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let p = cfg.profile_spec().build()?;
    let opts = cfg.inverse.roundtrip_options();
    let report = inverse::roundtrip(&p, cfg.inverse.alpha, &opts).map_err(inverse_failure)?;
    out.csv("invariants.csv", &["lambda", "W", "Q"], curve_rows(&report.curve))?;
    let r = &report.reconstruction;
    let rows = r.x.iter().zip(&r.v).map(|(&x, &v)| vec![x.into(), v.into()]).collect();
    out.csv("reconstruction.csv", &["x", "v"], rows)?;
    out.json("roundtrip.json", &report)
}
