//! Contribution tables, eigenvector weights, participation indices and
//! denoising on top of a fitted decomposition.

use crate::decomposition::McissaFit;
use crate::error::{Error, Result};
use crate::spectral::{num_frequencies, partner, period, RealEigenbasis, SpectralBlockSet};

#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRow {
    /// Frequency index `k` in `1..=L/2+1`; the row also covers `L + 2 - k`.
    pub k: usize,
    /// `L / (k - 1)`, infinite at `k = 1`.
    pub period: f64,
    /// Percentage of total variability.
    pub share: f64,
}

/// Share of total variability per frequency, conjugate pairs merged.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionTable {
    pub window: usize,
    pub rows: Vec<ContributionRow>,
}

impl ContributionTable {
    pub fn share(&self, k: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k).map(|r| r.share)
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.share).sum()
    }
}

fn check_k(k: usize, window: usize) -> Result<()> {
    let bound = num_frequencies(window);
    if k == 0 || k > bound {
        return Err(Error::IndexOutOfRange {
            what: "frequency",
            index: k,
            bound,
        });
    }
    Ok(())
}

fn check_m(m: usize, dim: usize) -> Result<()> {
    if m == 0 || m > dim {
        return Err(Error::IndexOutOfRange {
            what: "subcomponent",
            index: m,
            bound: dim,
        });
    }
    Ok(())
}

pub fn frequency_contributions(set: &SpectralBlockSet) -> Result<ContributionTable> {
    let l = set.window();
    let total: f64 = (1..=l).map(|k| set.trace(k)).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate(
            "total spectral trace is zero; nothing to apportion".into(),
        ));
    }
    let rows = (1..=num_frequencies(l))
        .map(|k| {
            let p = partner(k, l);
            let mut mass = set.trace(k);
            if p != k {
                mass += set.trace(p);
            }
            ContributionRow {
                k,
                period: period(k, l),
                share: 100.0 * mass / total,
            }
        })
        .collect();
    Ok(ContributionTable { window: l, rows })
}

/// Cumulative percentages of `sum_{m' <= m} lambda_{k,m'}` over the block
/// trace, for `m = 1..=M`.
pub fn subcomponent_contributions(set: &SpectralBlockSet, k: usize) -> Result<Vec<f64>> {
    check_k(k, set.window())?;
    let lambdas = set.eigenvalues(k);
    let total: f64 = lambdas.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate(format!(
            "frequency {k} carries no variance"
        )));
    }
    let mut acc = 0.0;
    Ok(lambdas
        .iter()
        .map(|l| {
            acc += l;
            100.0 * acc / total
        })
        .collect())
}

/// `100 |e_{k,m}[i]|^2` for each series `i`.
pub fn eigenvector_weights(set: &SpectralBlockSet, k: usize, m: usize) -> Result<Vec<f64>> {
    check_k(k, set.window())?;
    check_m(m, set.dim())?;
    Ok(set
        .eigenvector(k, m)
        .iter()
        .map(|z| 100.0 * z.norm_sqr())
        .collect())
}

/// `pi_{k,m}^(i) = lambda_{k,m} |v^(i)_{k,m}|^2` for every `k = 1..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationIndex {
    window: usize,
    dim: usize,
    values: Vec<f64>,
}

impl ParticipationIndex {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, m: usize, i: usize) -> f64 {
        self.values[((k - 1) * self.dim + (m - 1)) * self.dim + i]
    }

    /// All series' indices for `(k, m)`.
    pub fn series(&self, k: usize, m: usize) -> &[f64] {
        let start = ((k - 1) * self.dim + (m - 1)) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn sum(&self, k: usize, m: usize) -> f64 {
        self.series(k, m).iter().sum()
    }
}

pub fn participation(basis: &RealEigenbasis) -> ParticipationIndex {
    let (l, dim) = (basis.window(), basis.dim());
    let mut values = Vec::with_capacity(l * dim * dim);
    for k in 1..=l {
        for m in 1..=dim {
            let lambda = basis.eigenvalue(k, m);
            for i in 0..dim {
                let norm: f64 = basis.segment(k, m, i).iter().map(|v| v * v).sum();
                values.push(lambda * norm);
            }
        }
    }
    ParticipationIndex {
        window: l,
        dim,
        values,
    }
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// For each series, the cumulative variance share of the first `m`
/// elementary subcomponents at frequency `k` relative to the full
/// frequency-`k` component. `None` where that component has no variance.
pub fn series_subcomponent_contributions(
    fit: &McissaFit,
    k: usize,
) -> Result<Vec<Vec<Option<f64>>>> {
    check_k(k, fit.window())?;
    let mut out = Vec::with_capacity(fit.dim());
    for i in 0..fit.dim() {
        let full = variance(&fit.frequency_component(k, i)?);
        let scale = variance(&fit.panel().series(i));
        let defined = full > 0.0 && full > 1e-20 * scale;
        let mut partial = vec![0.0; fit.len()];
        let mut row = Vec::with_capacity(fit.dim());
        for m in 1..=fit.dim() {
            for (acc, v) in partial.iter_mut().zip(fit.pair_component(k, m, i)?) {
                *acc += v;
            }
            row.push(defined.then(|| 100.0 * variance(&partial) / full));
        }
        out.push(row);
    }
    Ok(out)
}

/// Per series, the sum of the `top_m` leading subcomponents at frequency `k`.
pub fn denoise(fit: &McissaFit, k: usize, top_m: usize) -> Result<Vec<Vec<f64>>> {
    check_k(k, fit.window())?;
    if top_m == 0 || top_m > fit.dim() {
        return Err(Error::Parameter(format!(
            "top_m must be in 1..={}, got {top_m}",
            fit.dim()
        )));
    }
    (0..fit.dim())
        .map(|i| fit.leading_component(k, top_m, i))
        .collect()
}
