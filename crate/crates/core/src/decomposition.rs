//! The four-step decomposition: embedding, projection onto the real
//! eigenbasis of `S_C`, grouping of frequency pairs, and diagonal averaging.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grouping::{GroupingSpec, ResolvedGrouping};
use crate::moments::{
    build_circulant_blocks, check_window, estimate_autocov, AutocovSequence, CirculantBlocks,
};
use crate::panel::TimeSeriesPanel;
use crate::spectral::{
    eigendecompose_blocks, num_frequencies, partner, real_eigenbasis, spectral_blocks,
    RealEigenbasis, SpectralBlockSet,
};

/// Block-Hankel `LM x N` trajectory matrix. Row `r M + i` holds series `i`
/// at lag `r`: entry `(r M + i, c)` is `x^(i)_{c + r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    data: DMatrix<f64>,
    window: usize,
    dim: usize,
}

impl TrajectoryMatrix {
    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of columns `N = T - L + 1`.
    pub fn columns(&self) -> usize {
        self.data.ncols()
    }

    /// The `M`-vector block at block row `r`, column `c`.
    pub fn block(&self, r: usize, c: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.data[(r * self.dim + i, c)])
            .collect()
    }

    /// Univariate `L x N` trajectory matrix of series `i`.
    pub fn series(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.window, self.columns(), |r, c| {
            self.data[(r * self.dim + i, c)]
        })
    }
}

pub fn embed(panel: &TimeSeriesPanel, window: usize) -> Result<TrajectoryMatrix> {
    let t = panel.len();
    check_window(window, t)?;
    let m = panel.dim();
    let n = t - window + 1;
    let x = panel.values();
    let data = DMatrix::from_fn(window * m, n, |row, c| x[(row % m, c + row / m)]);
    Ok(TrajectoryMatrix {
        data,
        window,
        dim: m,
    })
}

/// Diagonal averaging of an `L x N` matrix (`L <= N`) into a series of
/// length `T = L + N - 1`.
pub fn hankelize(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (l, n) = matrix.shape();
    if l == 0 || l > n {
        return Err(Error::Parameter(format!(
            "hankelization needs 1 <= L <= N, got {l} x {n}"
        )));
    }
    let t = l + n - 1;
    let mut out = vec![0.0; t];
    // Anti-diagonals with identical entries are returned as-is, so that
    // hankelizing a trajectory matrix gives back the series bit for bit.
    let mut uniform = vec![true; t];
    for c in 0..n {
        for r in 0..l {
            let v = matrix[(r, c)];
            if r > 0 && c + 1 < n && v != matrix[(r - 1, c + 1)] {
                uniform[r + c] = false;
            }
            out[r + c] += v;
        }
    }
    for (s, v) in out.iter_mut().enumerate() {
        if uniform[s] {
            *v = matrix[(s.min(l - 1), s - s.min(l - 1))];
        } else {
            *v /= ((s + 1).min(l).min(t - s)) as f64;
        }
    }
    Ok(out)
}

fn check_frequency(k: usize, bound: usize) -> Result<()> {
    if k == 0 || k > bound {
        return Err(Error::IndexOutOfRange {
            what: "frequency",
            index: k,
            bound,
        });
    }
    Ok(())
}

fn check_sub(m: usize, dim: usize) -> Result<()> {
    if m == 0 || m > dim {
        return Err(Error::IndexOutOfRange {
            what: "subcomponent",
            index: m,
            bound: dim,
        });
    }
    Ok(())
}

fn check_series(i: usize, dim: usize) -> Result<()> {
    if i >= dim {
        return Err(Error::IndexOutOfRange {
            what: "series",
            index: i + 1,
            bound: dim,
        });
    }
    Ok(())
}

/// Elementary matrix `v_{k,m} v_{k,m}' X` (`LM x N`) or, for series `i`,
/// `v^(i)_{k,m} v_{k,m}' X` (`L x N`). `k` ranges over `1..=L`.
pub fn elementary_projection(
    x: &TrajectoryMatrix,
    basis: &RealEigenbasis,
    k: usize,
    m: usize,
    series: Option<usize>,
) -> Result<DMatrix<f64>> {
    check_frequency(k, basis.window())?;
    check_sub(m, basis.dim())?;
    let v = nalgebra::DVector::from_vec(basis.vector(k, m));
    let w = x.data.tr_mul(&v);
    match series {
        None => Ok(&v * w.transpose()),
        Some(i) => {
            check_series(i, basis.dim())?;
            let seg = nalgebra::DVector::from_vec(basis.segment(k, m, i));
            Ok(seg * w.transpose())
        }
    }
}

/// Basis columns of the elementary pairs `B_{k,m}` for the given `(k, m)`,
/// `k` in `1..=L/2+1`.
fn pair_columns(basis: &RealEigenbasis, pairs: &[(usize, usize)]) -> Vec<usize> {
    let l = basis.window();
    let mut cols = Vec::with_capacity(2 * pairs.len());
    for &(k, m) in pairs {
        cols.push(basis.column_index(k, m));
        let p = partner(k, l);
        if p != k {
            cols.push(basis.column_index(p, m));
        }
    }
    cols
}

fn check_pairs(pairs: &[(usize, usize)], window: usize, dim: usize) -> Result<()> {
    for &(k, m) in pairs {
        check_frequency(k, num_frequencies(window))?;
        check_sub(m, dim)?;
    }
    Ok(())
}

/// `sum_{c in cols} v^(i)_c w_c'` as an `L x N` matrix.
fn series_matrix(
    basis: &RealEigenbasis,
    scores: &DMatrix<f64>,
    cols: &[usize],
    i: usize,
) -> DMatrix<f64> {
    let l = basis.window();
    let m = basis.dim();
    let v = basis.vectors();
    let a = DMatrix::from_fn(l, cols.len(), |r, j| v[(r * m + i, cols[j])]);
    let w = DMatrix::from_fn(cols.len(), scores.ncols(), |j, c| scores[(cols[j], c)]);
    a * w
}

/// Per-group `L x N` matrices `X^(i)_{I_j}` for series `i`.
pub fn group_matrices(
    x: &TrajectoryMatrix,
    basis: &RealEigenbasis,
    grouping: &ResolvedGrouping,
    i: usize,
) -> Result<Vec<(String, DMatrix<f64>)>> {
    check_series(i, basis.dim())?;
    if grouping.window != basis.window() || grouping.dim != basis.dim() {
        return Err(Error::Grouping(format!(
            "grouping resolved for L = {}, M = {} but basis has L = {}, M = {}",
            grouping.window,
            grouping.dim,
            basis.window(),
            basis.dim()
        )));
    }
    let scores = basis.vectors().tr_mul(x.data());
    grouping
        .groups
        .iter()
        .map(|(name, pairs)| {
            check_pairs(pairs, basis.window(), basis.dim())?;
            let cols = pair_columns(basis, pairs);
            Ok((name.clone(), series_matrix(basis, &scores, &cols, i)))
        })
        .collect()
}

/// A fitted decomposition of one panel at one window length.
#[derive(Debug, Clone)]
pub struct McissaFit {
    panel: TimeSeriesPanel,
    autocov: AutocovSequence,
    circulant: CirculantBlocks,
    spectra: SpectralBlockSet,
    basis: RealEigenbasis,
    trajectory: TrajectoryMatrix,
    /// `V' X`, one row of scores per basis vector.
    scores: DMatrix<f64>,
}

impl McissaFit {
    /// Runs embedding, moment estimation and the spectral decomposition.
    /// The panel is used as given; demean it first for the usual analysis.
    pub fn new(panel: &TimeSeriesPanel, window: usize) -> Result<Self> {
        let trajectory = embed(panel, window)?;
        let autocov = estimate_autocov(panel, window)?;
        let circulant = build_circulant_blocks(&autocov);
        let spectra = eigendecompose_blocks(spectral_blocks(&circulant))?;
        let basis = real_eigenbasis(&spectra)?;
        let scores = basis.vectors().tr_mul(trajectory.data());
        Ok(Self {
            panel: panel.clone(),
            autocov,
            circulant,
            spectra,
            basis,
            trajectory,
            scores,
        })
    }

    pub fn panel(&self) -> &TimeSeriesPanel {
        &self.panel
    }

    pub fn window(&self) -> usize {
        self.basis.window()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn len(&self) -> usize {
        self.panel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panel.is_empty()
    }

    pub fn autocov(&self) -> &AutocovSequence {
        &self.autocov
    }

    pub fn circulant(&self) -> &CirculantBlocks {
        &self.circulant
    }

    pub fn spectra(&self) -> &SpectralBlockSet {
        &self.spectra
    }

    pub fn basis(&self) -> &RealEigenbasis {
        &self.basis
    }

    pub fn trajectory(&self) -> &TrajectoryMatrix {
        &self.trajectory
    }

    /// Corrupts one basis entry and recomputes the scores. Fault-injection
    /// hook for the verification suite.
    #[doc(hidden)]
    pub fn inject_basis_fault(&mut self) {
        self.basis.inject_sign_flip();
        self.scores = self.basis.vectors().tr_mul(self.trajectory.data());
    }

    /// Reconstructed series `i` from the pairs `B_{k,m}` listed in `pairs`.
    pub fn reconstruct_series(&self, pairs: &[(usize, usize)], i: usize) -> Result<Vec<f64>> {
        check_series(i, self.dim())?;
        check_pairs(pairs, self.window(), self.dim())?;
        let cols = pair_columns(&self.basis, pairs);
        hankelize(&series_matrix(&self.basis, &self.scores, &cols, i))
    }

    /// Reconstructed `M x T` values from the pairs `B_{k,m}` listed in `pairs`.
    pub fn reconstruct(&self, pairs: &[(usize, usize)]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.dim(), self.len());
        for i in 0..self.dim() {
            for (s, v) in self.reconstruct_series(pairs, i)?.into_iter().enumerate() {
                out[(i, s)] = v;
            }
        }
        Ok(out)
    }

    /// Elementary reconstructed subcomponent `m` of series `i` at frequency
    /// pair `B_{k,m}`.
    pub fn pair_component(&self, k: usize, m: usize, i: usize) -> Result<Vec<f64>> {
        self.reconstruct_series(&[(k, m)], i)
    }

    /// Sum of the subcomponents `1..=top` at frequency `k` for series `i`.
    pub fn leading_component(&self, k: usize, top: usize, i: usize) -> Result<Vec<f64>> {
        check_sub(top, self.dim())?;
        let pairs: Vec<(usize, usize)> = (1..=top).map(|m| (k, m)).collect();
        self.reconstruct_series(&pairs, i)
    }

    /// Full frequency-`k` component `B_k` of series `i`.
    pub fn frequency_component(&self, k: usize, i: usize) -> Result<Vec<f64>> {
        self.leading_component(k, self.dim(), i)
    }

    pub fn decompose(
        &self,
        grouping: &ResolvedGrouping,
        elementary: bool,
    ) -> Result<ReconstructedSet> {
        if grouping.window != self.window() || grouping.dim != self.dim() {
            return Err(Error::Grouping(format!(
                "grouping resolved for L = {}, M = {} but fit has L = {}, M = {}",
                grouping.window,
                grouping.dim,
                self.window(),
                self.dim()
            )));
        }
        let mut components = Vec::with_capacity(grouping.groups.len());
        for (name, pairs) in &grouping.groups {
            let values = self.reconstruct(pairs)?;
            components.push((name.clone(), self.panel.with_values(values)?));
        }
        let elementary = if elementary {
            let mut out = Vec::new();
            for k in 1..=num_frequencies(self.window()) {
                for m in 1..=self.dim() {
                    let values = self.reconstruct(&[(k, m)])?;
                    out.push(((k, m), self.panel.with_values(values)?));
                }
            }
            Some(out)
        } else {
            None
        };
        Ok(ReconstructedSet {
            grouping: grouping.clone(),
            components,
            elementary,
        })
    }
}

/// Reconstructed components per group, plus optional elementary
/// reconstructions per `(k, m)`.
#[derive(Debug, Clone)]
pub struct ReconstructedSet {
    pub grouping: ResolvedGrouping,
    pub components: Vec<(String, TimeSeriesPanel)>,
    pub elementary: Option<Vec<((usize, usize), TimeSeriesPanel)>>,
}

impl ReconstructedSet {
    pub fn component(&self, name: &str) -> Option<&TimeSeriesPanel> {
        self.components
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
    }

    /// Sum of all group components.
    pub fn total(&self) -> DMatrix<f64> {
        let mut it = self.components.iter();
        let first = it
            .next()
            .map(|(_, p)| p.values().clone())
            .unwrap_or_default();
        it.fold(first, |acc, (_, p)| acc + p.values())
    }
}

pub fn decompose(
    panel: &TimeSeriesPanel,
    window: usize,
    spec: &GroupingSpec,
) -> Result<ReconstructedSet> {
    decompose_with(panel, window, spec, false)
}

pub fn decompose_with(
    panel: &TimeSeriesPanel,
    window: usize,
    spec: &GroupingSpec,
    elementary: bool,
) -> Result<ReconstructedSet> {
    check_window(window, panel.len())?;
    let grouping = spec.resolve(window, panel.dim())?;
    McissaFit::new(panel, window)?.decompose(&grouping, elementary)
}

/// Univariate decomposition: the same pipeline with `M = 1`.
pub fn decompose_univariate(
    series: &[f64],
    window: usize,
    spec: &GroupingSpec,
) -> Result<Vec<(String, Vec<f64>)>> {
    let panel = TimeSeriesPanel::from_rows(&[series.to_vec()])?;
    let set = decompose(&panel, window, spec)?;
    Ok(set
        .components
        .into_iter()
        .map(|(name, p)| (name, p.series(0)))
        .collect())
}

/// Largest absolute differences between univariate frequency components and
/// summed multivariate subcomponents.
#[derive(Debug, Clone)]
pub struct UniquenessReport {
    /// `discrepancies[i][k - 1]` for series `i` and frequency `k = 1..=L/2+1`.
    pub discrepancies: Vec<Vec<f64>>,
    /// `max_t |x^(i)_t|` per series.
    pub amplitudes: Vec<f64>,
}

impl UniquenessReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.discrepancies
            .iter()
            .flatten()
            .fold(0.0, |a, &b| a.max(b))
    }

    /// Largest discrepancy divided by `1 + amplitude` of its series.
    pub fn max_scaled(&self) -> f64 {
        self.discrepancies
            .iter()
            .zip(&self.amplitudes)
            .flat_map(|(row, a)| row.iter().map(move |d| d / (1.0 + a)))
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_scaled() <= tol
    }
}

pub fn uniqueness_check(panel: &TimeSeriesPanel, window: usize) -> Result<UniquenessReport> {
    let fit = McissaFit::new(panel, window)?;
    uniqueness_against(&fit)
}

/// Uniqueness check for an existing fit, refitting each series alone.
pub fn uniqueness_against(fit: &McissaFit) -> Result<UniquenessReport> {
    let window = fit.window();
    let panel = fit.panel();
    let mut discrepancies = Vec::with_capacity(fit.dim());
    let mut amplitudes = Vec::with_capacity(fit.dim());
    for i in 0..fit.dim() {
        let single = McissaFit::new(&panel.select(i)?, window)?;
        let mut row = Vec::with_capacity(num_frequencies(window));
        for k in 1..=num_frequencies(window) {
            let uni = single.frequency_component(k, 0)?;
            let mut multi = vec![0.0; panel.len()];
            for m in 1..=fit.dim() {
                for (acc, v) in multi.iter_mut().zip(fit.pair_component(k, m, i)?) {
                    *acc += v;
                }
            }
            let d = uni
                .iter()
                .zip(&multi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            row.push(d);
        }
        discrepancies.push(row);
        amplitudes.push(
            panel
                .series(i)
                .iter()
                .fold(0.0, |a: f64, &b| a.max(b.abs())),
        );
    }
    Ok(UniquenessReport {
        discrepancies,
        amplitudes,
    })
}
