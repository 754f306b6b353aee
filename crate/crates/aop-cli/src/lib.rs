//! Report assembly for the `aop` binary: one record that carries every
//! derived quantity for an input operator, cross-checked against the
//! independent formulas at build time so an inconsistent report can
//! never be emitted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use aop_core::error::{AopError, Result};
use aop_core::matrix::{parse_matrix, OperatorMatrix};
use aop_core::metrics::{eps_hat, min_modulus_from_eps, witness_pair};
use aop_core::nearness::{dist_to_scalar_isometries, stability_certificate};
use aop_core::oracle::estimate_eps_hat;
use aop_core::tolerances::{default_rank_tol, DIST_EVAL_TOL, WITNESS_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDescriptor {
    pub path: String,
    pub rows: usize,
    pub cols: usize,
    pub field: String,
}

/// Witness vectors as (re, im) component pairs, plus their defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub gap: f64,
    pub rhs_improved: f64,
    pub rhs_turnsek: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub estimate: f64,
    pub samples: usize,
    pub seed: u64,
    /// |estimate − closed form|.
    pub agreement: f64,
}

/// Everything the analyzer knows about one operator. Fields that need
/// more columns than rows stay `None` for wide inputs; the stability
/// block also needs the constant to be strictly below 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AopReport {
    pub input: InputDescriptor,
    pub norm: f64,
    pub min_modulus: f64,
    pub eps_hat: f64,
    /// None only for the zero operator, which has no witness pair.
    pub witness: Option<WitnessReport>,
    pub dist_cv: Option<f64>,
    pub lambda_star: Option<f64>,
    pub stability: Option<StabilityReport>,
    pub oracle: Option<OracleReport>,
}

/// Sampling parameters for the optional estimator section.
#[derive(Debug, Clone, Copy)]
pub struct OracleRequest {
    pub samples: usize,
    pub refine_iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    /// Relative singular-value cutoff; derived from the dimensions
    /// when absent.
    pub rank_tol: Option<f64>,
    pub oracle: Option<OracleRequest>,
}

fn inconsistent(msg: String) -> AopError {
    AopError::Inconsistency(msg)
}

pub fn load_matrix(path: &Path) -> Result<OperatorMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| AopError::Parse {
        line: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_matrix(&text)
}

pub fn build_report(label: &str, t: &OperatorMatrix, opts: ReportOptions) -> Result<AopReport> {
    let rank_tol = opts
        .rank_tol
        .unwrap_or_else(|| default_rank_tol(t.rows(), t.cols()));
    let e = eps_hat(t)?;
    let scale = e.norm.max(1.0);

    let witness = if t.is_zero() {
        None
    } else {
        let pair = witness_pair(t, rank_tol)?;
        if (pair.defect - e.value).abs() > WITNESS_TOL {
            return Err(inconsistent(format!(
                "witness defect {} disagrees with constant {}",
                pair.defect, e.value
            )));
        }
        Some(WitnessReport {
            x: pair.x.iter().map(|z| [z.re, z.im]).collect(),
            y: pair.y.iter().map(|z| [z.re, z.im]).collect(),
            defect: pair.defect,
        })
    };

    let (dist_cv, lambda_star, stability) = if t.is_wide() {
        (None, None, None)
    } else {
        let near = dist_to_scalar_isometries(t, rank_tol)?;
        near.verify(t)?;
        if (near.distance - 0.5 * (e.norm - e.min_mod)).abs() > DIST_EVAL_TOL * scale {
            return Err(inconsistent(format!(
                "distance {} disagrees with half the modulus spread",
                near.distance
            )));
        }
        if e.value < 1.0 && e.norm > 0.0 {
            let back = min_modulus_from_eps(e.value, e.norm)?;
            if (back - e.min_mod).abs() > WITNESS_TOL * scale {
                return Err(inconsistent(format!(
                    "inverted minimum modulus {back} disagrees with {}",
                    e.min_mod
                )));
            }
        }
        let stability = if e.value < 1.0 {
            let cert = stability_certificate(t, rank_tol)?;
            if !cert.holds_improved {
                return Err(inconsistent(format!(
                    "stability gap {} exceeds its own bound {}",
                    cert.gap, cert.rhs_improved
                )));
            }
            Some(StabilityReport {
                gap: cert.gap,
                rhs_improved: cert.rhs_improved,
                rhs_turnsek: cert.rhs_turnsek,
            })
        } else {
            None
        };
        (Some(near.distance), Some(near.lambda_star), stability)
    };

    let oracle = match opts.oracle {
        None => None,
        Some(req) => {
            let est = estimate_eps_hat(t, req.samples, req.refine_iters, req.seed)?;
            if est.value > e.value + 1e-9 {
                return Err(inconsistent(format!(
                    "sampled estimate {} exceeds the closed form {}",
                    est.value, e.value
                )));
            }
            Some(OracleReport {
                estimate: est.value,
                samples: req.samples,
                seed: req.seed,
                agreement: (est.value - e.value).abs(),
            })
        }
    };

    Ok(AopReport {
        input: InputDescriptor {
            path: label.to_string(),
            rows: t.rows(),
            cols: t.cols(),
            field: t.field().to_string(),
        },
        norm: e.norm,
        min_modulus: e.min_mod,
        eps_hat: e.value,
        witness,
        dist_cv,
        lambda_star,
        stability,
        oracle,
    })
}

/// 12 significant digits; plain decimal in a readable range, scientific
/// outside it.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let a = v.abs();
    if (1e-4..1e12).contains(&a) {
        let exp = a.log10().floor() as i32;
        let decimals = (11 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.11e}")
    }
}

fn fmt_component(re: f64, im: f64, field: &str) -> String {
    if field == "real" {
        fmt_sig(re)
    } else if im.is_sign_negative() {
        format!("{}-{}i", fmt_sig(re), fmt_sig(-im))
    } else {
        format!("{}+{}i", fmt_sig(re), fmt_sig(im))
    }
}

fn fmt_vector(v: &[[f64; 2]], field: &str) -> String {
    let parts: Vec<String> = v.iter().map(|c| fmt_component(c[0], c[1], field)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn render_text(r: &AopReport) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(&format!("{k:<26}{v}\n"));
    };
    line(
        "operator",
        format!(
            "{} ({}x{}, {})",
            r.input.path, r.input.rows, r.input.cols, r.input.field
        ),
    );
    line("norm", fmt_sig(r.norm));
    line("min modulus", fmt_sig(r.min_modulus));
    line("eps hat", fmt_sig(r.eps_hat));
    match &r.witness {
        Some(w) => {
            line("witness defect", fmt_sig(w.defect));
            line("witness x", fmt_vector(&w.x, &r.input.field));
            line("witness y", fmt_vector(&w.y, &r.input.field));
        }
        None => line("witness", "none (zero operator)".to_string()),
    }
    match (r.dist_cv, r.lambda_star) {
        (Some(d), Some(l)) => {
            line("dist to scaled isometries", fmt_sig(d));
            line("lambda star", fmt_sig(l));
        }
        _ => line(
            "dist to scaled isometries",
            "unavailable (wider than tall)".to_string(),
        ),
    }
    match &r.stability {
        Some(s) => {
            line("stability gap", fmt_sig(s.gap));
            line("  improved rhs", fmt_sig(s.rhs_improved));
            line("  classical rhs", fmt_sig(s.rhs_turnsek));
        }
        None if r.dist_cv.is_some() => {
            line("stability", "unavailable (constant is 1)".to_string())
        }
        None => {}
    }
    if let Some(o) = &r.oracle {
        line("sampled estimate", fmt_sig(o.estimate));
        line(
            "  sampling",
            format!("{} samples, seed {}", o.samples, o.seed),
        );
        line("  agreement", fmt_sig(o.agreement));
    }
    out
}

pub fn render_json(r: &AopReport) -> Result<String> {
    serde_json::to_string_pretty(r).map_err(|e| inconsistent(format!("json encode: {e}")))
}

pub fn report_from_json(s: &str) -> Result<AopReport> {
    serde_json::from_str(s).map_err(|e| AopError::Parse {
        line: 0,
        msg: format!("json decode: {e}"),
    })
}
