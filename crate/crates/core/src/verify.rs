//! Self-checks run against a panel: uniqueness, orthonormality,
//! completeness, eigenvalue pairing and the circulant/Toeplitz decay.

use crate::decomposition::{uniqueness_against, McissaFit};
use crate::error::Result;
use crate::moments::circulant_toeplitz_distance;
use crate::panel::TimeSeriesPanel;
use crate::spectral::{num_frequencies, partner};
use crate::synth::population_autocov_ar1;

pub const UNIQUENESS_TOL: f64 = 1e-8;
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
pub const COMPLETENESS_TOL: f64 = 1e-8;
pub const PAIRING_TOL: f64 = 1e-8;
pub const TRACE_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-8;
/// `S_C` is only materialized up to this size.
pub const RESIDUAL_MAX_SIZE: usize = 600;
/// AR(1) coefficient and window lengths for the decay check.
pub const DECAY_PHI: f64 = 0.5;
pub const DECAY_WINDOWS: [usize; 4] = [8, 16, 32, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &'static str, measured: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        measured,
        tolerance,
        passed: measured <= tolerance,
    }
}

/// Completeness: all elementary pairs together reproduce the panel.
pub fn completeness_error(fit: &McissaFit) -> Result<f64> {
    let all: Vec<(usize, usize)> = (1..=num_frequencies(fit.window()))
        .flat_map(|k| (1..=fit.dim()).map(move |m| (k, m)))
        .collect();
    let total = fit.reconstruct(&all)?;
    let x = fit.panel().values();
    let scale = x.amax();
    let err = (total - x).amax();
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// Largest `|lambda_{k,m} - lambda_{L+2-k,m}| / (1 + lambda_{k,m})`.
pub fn pairing_error(fit: &McissaFit) -> f64 {
    let basis = fit.basis();
    let l = fit.window();
    (1..=l)
        .flat_map(|k| (1..=fit.dim()).map(move |m| (k, m)))
        .map(|(k, m)| {
            let a = basis.eigenvalue(k, m);
            let b = basis.eigenvalue(partner(k, l), m);
            (a - b).abs() / (1.0 + a.abs())
        })
        .fold(0.0, f64::max)
}

/// Relative gap between the eigenvalue sum and `L trace(Gamma_0)`.
pub fn trace_error(fit: &McissaFit) -> f64 {
    let sum: f64 = fit.basis().eigenvalues().iter().sum();
    let want = fit.window() as f64 * fit.autocov().gammas()[0].trace();
    let gap = (sum - want).abs();
    if want > 0.0 {
        gap / want
    } else {
        gap
    }
}

/// Number of strict increases in the decay profile (0 when it decreases).
pub fn decay_violations() -> Result<(usize, Vec<f64>)> {
    let profile = DECAY_WINDOWS
        .iter()
        .map(|&l| {
            Ok(circulant_toeplitz_distance(&population_autocov_ar1(
                DECAY_PHI, 1.0, 1, l,
            )?))
        })
        .collect::<Result<Vec<f64>>>()?;
    let bad = profile.windows(2).filter(|w| w[1] >= w[0]).count();
    Ok((bad, profile))
}

pub fn verify(panel: &TimeSeriesPanel, window: usize, inject_fault: bool) -> Result<VerifyReport> {
    let mut fit = McissaFit::new(panel, window)?;
    if inject_fault {
        fit.inject_basis_fault();
    }
    let mut checks = Vec::new();

    let uniq = uniqueness_against(&fit)?;
    checks.push(check("uniqueness", uniq.max_scaled(), UNIQUENESS_TOL));
    checks.push(check(
        "orthonormality",
        fit.basis().orthonormality_error(),
        ORTHONORMALITY_TOL,
    ));
    checks.push(check(
        "completeness",
        completeness_error(&fit)?,
        COMPLETENESS_TOL,
    ));
    checks.push(check(
        "eigenvalue_pairing",
        pairing_error(&fit),
        PAIRING_TOL,
    ));
    checks.push(check("eigenvalue_trace", trace_error(&fit), TRACE_TOL));
    if window * fit.dim() <= RESIDUAL_MAX_SIZE {
        let s = fit.circulant().full_matrix();
        checks.push(check(
            "eigen_residual",
            fit.basis().eigen_residual(&s),
            RESIDUAL_TOL,
        ));
    }
    let (bad, _) = decay_violations()?;
    checks.push(check("circulant_decay", bad as f64, 0.0));
    Ok(VerifyReport { checks })
}
