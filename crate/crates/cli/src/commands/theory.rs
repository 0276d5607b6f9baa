//! `fedzmg verify-theory`: numerical verification of the projection's
//! variance identity, the `δ/(γ+t)` decay bound of the step-indexed
//! process, and the ordering of the convergence constants.
//!
//! Every check prints one line; any failed check is collected and the
//! command exits nonzero listing all of them, so a regression in one
//! property never hides another.

use anyhow::{bail, Result};
use std::path::Path;

use fedzmg_core::analysis::theory::{
    compare_constants, verify_convergence, verify_lemma2, ConstantsComparison, ConvergenceCheck,
};
use fedzmg_core::linalg::{self, Matrix};
use fedzmg_core::rng::Stream;

use crate::config::{load_config, TheorySection};

/// Monte Carlo agreement required from each variance-identity estimate.
pub const MC_RELATIVE_TOLERANCE: f64 = 0.02;

/// Fitted decay exponents must land in this window around the ideal −1.
pub const DECAY_EXPONENT_RANGE: (f64, f64) = (-1.6, -0.7);

/// Parameter sums are conserved exactly in algebra; anything above this is
/// a real leak, not rounding.
pub const MEAN_RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Debug)]
pub struct CheckLine {
    pub name: &'static str,
    pub detail: String,
    pub ok: bool,
}

#[derive(Debug)]
pub struct TheoryReport {
    pub checks: Vec<CheckLine>,
    pub convergence: ConvergenceCheck,
    pub comparison: ConstantsComparison,
}

impl TheoryReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

pub fn verify_theory(config_path: Option<&Path>) -> Result<TheoryReport> {
    let section = match config_path {
        Some(path) => load_config(path)?.theory.unwrap_or_default(),
        None => TheorySection::default(),
    };
    let report = run_checks(&section)?;
    for check in &report.checks {
        println!(
            "{} {}: {}",
            if check.ok { "ok  " } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.ok)
        .map(|c| c.name)
        .collect();
    if !failed.is_empty() {
        bail!("theory verification failed: {}", failed.join(", "));
    }
    println!("all {} checks passed", report.checks.len());
    Ok(report)
}

/// Random PSD covariance Σ = BBᵀ with standard-normal B.
fn random_psd(d: usize, seed: u64) -> Matrix {
    let mut s = Stream::from_key(&[seed]);
    let b = Matrix::from_vec(d, d, (0..d * d).map(|_| s.gaussian()).collect());
    let mut sigma = Matrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            sigma.set(r, c, linalg::dot(b.row(r), b.row(c)));
        }
    }
    sigma
}

fn rel_err(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth.abs().max(1e-300)
}

pub fn run_checks(section: &TheorySection) -> Result<TheoryReport> {
    let mut checks = Vec::new();
    let d = section.lemma_dim;
    let trials = section.lemma_trials;
    let sigma_sq = section.lemma_sigma_sq;

    // --- variance identity -------------------------------------------------
    // isotropic Σ = σ²I: the projection removes exactly one of the d equal
    // directions, so the expectation is (d−1)σ².
    {
        let mut iso = Matrix::zeros(d, d);
        for i in 0..d {
            iso.set(i, i, sigma_sq);
        }
        let (analytic, empirical) = verify_lemma2(&iso, trials, section.lemma_seed)?;
        let expected = (d as f64 - 1.0) * sigma_sq;
        let analytic_ok = rel_err(analytic, expected) < 1e-10;
        let mc_err = rel_err(empirical, expected);
        checks.push(CheckLine {
            name: "variance identity, isotropic",
            detail: format!(
                "d={d} σ²={sigma_sq}: analytic {analytic:.6} vs (d−1)σ² = {expected}, \
                 Monte Carlo {empirical:.6} (rel err {:.3}%)",
                mc_err * 100.0
            ),
            ok: analytic_ok && mc_err < MC_RELATIVE_TOLERANCE,
        });
    }

    // rank-one along the all-ones direction: every draw lies in the
    // projection's null space, so both sides collapse to zero.
    {
        let mut ones = Matrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                ones.set(r, c, sigma_sq);
            }
        }
        let (analytic, empirical) = verify_lemma2(&ones, trials, section.lemma_seed + 1)?;
        let scale = sigma_sq * d as f64; // the trace
        checks.push(CheckLine {
            name: "variance identity, mean-direction rank one",
            detail: format!(
                "trace {scale} collapses to analytic {analytic:.3e}, Monte Carlo {empirical:.3e}"
            ),
            ok: analytic.abs() < 1e-10 * scale && empirical < 1e-16 * scale.max(1.0),
        });
    }

    // random PSD covariances: Monte Carlo against the closed form.
    {
        let mut worst = 0.0f64;
        let mut passed = 0usize;
        for m in 0..section.lemma_matrices {
            let sigma = random_psd(d, section.lemma_seed.wrapping_add(100 + m as u64));
            let (analytic, empirical) =
                verify_lemma2(&sigma, trials, section.lemma_seed + 2 + m as u64)?;
            let err = rel_err(empirical, analytic);
            worst = worst.max(err);
            if err < MC_RELATIVE_TOLERANCE {
                passed += 1;
            }
        }
        checks.push(CheckLine {
            name: "variance identity, random covariances",
            detail: format!(
                "{passed}/{} within {:.0}% over {trials} draws each (worst {:.3}%)",
                section.lemma_matrices,
                MC_RELATIVE_TOLERANCE * 100.0,
                worst * 100.0
            ),
            ok: passed == section.lemma_matrices,
        });
    }

    // --- decay bound --------------------------------------------------------
    let core_cfg = section.to_core();
    let convergence = verify_convergence(&core_cfg)?;
    {
        let c = &convergence.constants;
        // worst Δ_t·(γ+t)/δ over the run; ≤ 1 means the bound held everywhere
        let worst_ratio = convergence
            .deltas
            .iter()
            .enumerate()
            .map(|(t, &delta)| delta * (c.gamma + t as f64) / c.delta)
            .fold(0.0f64, f64::max);
        checks.push(CheckLine {
            name: "decay bound",
            detail: format!(
                "Δ_t ≤ δ/(γ+t) over {} steps (worst ratio {:.4}, δ={:.4}, γ={:.4})",
                convergence.deltas.len(),
                worst_ratio,
                c.delta,
                c.gamma
            ),
            ok: convergence.bound_satisfied,
        });
        let (lo, hi) = DECAY_EXPONENT_RANGE;
        checks.push(CheckLine {
            name: "decay exponent",
            detail: format!(
                "fitted {:.4}, expected within [{lo}, {hi}]",
                convergence.fitted_decay_exponent
            ),
            ok: (lo..=hi).contains(&convergence.fitted_decay_exponent),
        });
        checks.push(CheckLine {
            name: "parameter-sum conservation",
            detail: format!("max |1ᵀ(w̄−w*)| = {:.3e}", convergence.max_mean_residual),
            ok: convergence.max_mean_residual < MEAN_RESIDUAL_LIMIT,
        });
    }

    // --- constant ordering ---------------------------------------------------
    let comparison = compare_constants(&core_cfg)?;
    checks.push(CheckLine {
        name: "constant ordering",
        detail: format!(
            "projected C = {:.4} vs plain C = {:.4} (mean-direction energy {:.4})",
            comparison.c_zmg, comparison.c_fedavg_analog, comparison.mean_direction_energy
        ),
        ok: comparison.c_zmg < comparison.c_fedavg_analog
            && comparison.mean_direction_energy > 0.0,
    });

    Ok(TheoryReport {
        checks,
        convergence,
        comparison,
    })
}
