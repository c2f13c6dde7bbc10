//! Lagged cross-covariances and the block-circulant / block-Toeplitz
//! second-moment matrices built from them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;

/// Checks `1 < L <= T/2`.
pub fn check_window(window: usize, len: usize) -> Result<()> {
    if window < 2 || 2 * window > len {
        return Err(Error::InvalidWindow { window, len });
    }
    Ok(())
}

/// Lag-`k` cross-covariance matrices `Gamma_k[r, s] ~ E[x_{t+k}^(r) x_t^(s)]`
/// for `k = 0..L-1`. Negative lags are `Gamma_{-k} = Gamma_k'`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSequence {
    gammas: Vec<DMatrix<f64>>,
    /// Sample length the estimates came from; `None` for population values.
    samples: Option<usize>,
}

impl AutocovSequence {
    pub fn new(gammas: Vec<DMatrix<f64>>, samples: Option<usize>) -> Result<Self> {
        let Some(first) = gammas.first() else {
            return Err(Error::Parameter("empty autocovariance sequence".into()));
        };
        let m = first.nrows();
        if m == 0 || gammas.iter().any(|g| g.shape() != (m, m)) {
            return Err(Error::Parameter(
                "autocovariances must be non-empty square matrices of equal size".into(),
            ));
        }
        Ok(Self { gammas, samples })
    }

    pub fn window(&self) -> usize {
        self.gammas.len()
    }

    pub fn dim(&self) -> usize {
        self.gammas[0].nrows()
    }

    pub fn samples(&self) -> Option<usize> {
        self.samples
    }

    pub fn gammas(&self) -> &[DMatrix<f64>] {
        &self.gammas
    }

    /// `Gamma_lag` for `|lag| < L`, transposing for negative lags.
    pub fn lag(&self, lag: isize) -> DMatrix<f64> {
        let k = lag.unsigned_abs();
        if lag >= 0 {
            self.gammas[k].clone()
        } else {
            self.gammas[k].transpose()
        }
    }
}

/// Biased (divisor `T`) sample cross-covariances up to lag `L - 1`.
pub fn estimate_autocov(panel: &TimeSeriesPanel, window: usize) -> Result<AutocovSequence> {
    let t = panel.len();
    check_window(window, t)?;
    let x = panel.values();
    let m = panel.dim();
    let gammas = (0..window)
        .map(|k| {
            DMatrix::from_fn(m, m, |r, s| {
                let mut acc = 0.0;
                for time in 0..t - k {
                    acc += x[(r, time + k)] * x[(s, time)];
                }
                acc / t as f64
            })
        })
        .collect();
    AutocovSequence::new(gammas, Some(t))
}

/// First block row `Omega_0..Omega_{L-1}` of the block-circulant matrix `S_C`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantBlocks {
    omegas: Vec<DMatrix<f64>>,
}

impl CirculantBlocks {
    pub fn window(&self) -> usize {
        self.omegas.len()
    }

    pub fn dim(&self) -> usize {
        self.omegas[0].nrows()
    }

    pub fn omegas(&self) -> &[DMatrix<f64>] {
        &self.omegas
    }

    /// Materializes the full `LM x LM` matrix; block `(r, c)` is
    /// `Omega_{(c - r) mod L}`. Diagnostics only.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let l = self.window();
        let m = self.dim();
        DMatrix::from_fn(l * m, l * m, |row, col| {
            let (br, bc) = (row / m, col / m);
            self.omegas[(bc + l - br) % l][(row % m, col % m)]
        })
    }
}

/// `Omega_k = (k/L) Gamma_{L-k} + ((L-k)/L) Gamma_k'`, with `Omega_0 = Gamma_0`.
pub fn build_circulant_blocks(autocov: &AutocovSequence) -> CirculantBlocks {
    let l = autocov.window();
    let lf = l as f64;
    let g = autocov.gammas();
    let omegas = (0..l)
        .map(|k| {
            if k == 0 {
                return g[0].clone();
            }
            let near = (k as f64) / lf;
            let far = ((l - k) as f64) / lf;
            let gt = g[k].transpose();
            DMatrix::from_fn(g[0].nrows(), g[0].ncols(), |r, s| {
                near * g[l - k][(r, s)] + far * gt[(r, s)]
            })
        })
        .collect();
    CirculantBlocks { omegas }
}

/// Block-Toeplitz `S_T` with block `(i, j) = Gamma_{i-j}`.
pub fn build_toeplitz_matrix(autocov: &AutocovSequence) -> DMatrix<f64> {
    let l = autocov.window();
    let m = autocov.dim();
    let g = autocov.gammas();
    DMatrix::from_fn(l * m, l * m, |row, col| {
        let (bi, bj) = (row / m, col / m);
        let (r, s) = (row % m, col % m);
        if bi >= bj {
            g[bi - bj][(r, s)]
        } else {
            g[bj - bi][(s, r)]
        }
    })
}

/// `||S_T - S_C||_F / sqrt(L)`.
pub fn circulant_toeplitz_distance(autocov: &AutocovSequence) -> f64 {
    let toeplitz = build_toeplitz_matrix(autocov);
    let circulant = build_circulant_blocks(autocov).full_matrix();
    (toeplitz - circulant).norm() / (autocov.window() as f64).sqrt()
}
