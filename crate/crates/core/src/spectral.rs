//! Per-frequency cross-spectral blocks of the circulant matrix, their
//! eigendecompositions and the real orthonormal eigenbasis of `S_C`.
//!
//! Frequencies are 1-based: block `k` sits at `omega_k = (k - 1) / L`.
//! Blocks `k` and `L + 2 - k` are complex conjugates, so only
//! `k = 1..=L/2 + 1` are eigendecomposed and the rest are mirrored.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::moments::CirculantBlocks;

pub type C64 = Complex<f64>;

/// Eigenvalues below `-NEGATIVE_CLAMP * trace` are clamped to zero only
/// when they stay above `-NEGATIVE_LIMIT * trace`; otherwise they are an error.
pub const NEGATIVE_CLAMP: f64 = 1e-8;
pub const NEGATIVE_LIMIT: f64 = 1e-6;

/// Tolerance of the orthonormality self-check in [`real_eigenbasis`].
pub const ORTHONORMALITY_LIMIT: f64 = 1e-8;

/// Relative gap under which two eigenvalues of a block count as equal.
const DEGENERATE_GAP: f64 = 1e-12;

/// Relative modulus gap under which two eigenvector entries tie for largest.
const MODULUS_TIE: f64 = 1e-10;

/// Number of distinct frequency pairs `B_k`, `k = 1..=L/2 + 1`.
pub fn num_frequencies(window: usize) -> usize {
    window / 2 + 1
}

/// Conjugate partner `L + 2 - k` of frequency `k` (itself for `k = 1` and,
/// with even `L`, `k = L/2 + 1`).
pub fn partner(k: usize, window: usize) -> usize {
    if k == 1 {
        1
    } else {
        window + 2 - k
    }
}

/// Period `L / (k - 1)` in samples; infinite for `k = 1`.
pub fn period(k: usize, window: usize) -> f64 {
    if k == 1 {
        f64::INFINITY
    } else {
        window as f64 / (k - 1) as f64
    }
}

/// `exp(-i 2 pi n / L)`, exact at quarter turns and conjugate-symmetric
/// (`twiddle(L - n) == conj(twiddle(n))` bit for bit).
pub(crate) fn twiddle(n: usize, window: usize) -> C64 {
    let n = n % window;
    if n == 0 {
        C64::new(1.0, 0.0)
    } else if 2 * n == window {
        C64::new(-1.0, 0.0)
    } else if 4 * n == window {
        C64::new(0.0, -1.0)
    } else if 4 * n == 3 * window {
        C64::new(0.0, 1.0)
    } else if 2 * n > window {
        twiddle(window - n, window).conj()
    } else {
        let angle = -2.0 * PI * n as f64 / window as f64;
        C64::new(angle.cos(), angle.sin())
    }
}

/// Hermitian cross-spectral matrices `F_1..F_L` before eigendecomposition.
#[derive(Debug, Clone)]
pub struct CrossSpectra {
    blocks: Vec<DMatrix<C64>>,
}

impl CrossSpectra {
    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn window(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }
}

/// `F_k = sum_j Omega_j exp(-i 2 pi j (k-1) / L)`, then Hermitian-symmetrized.
pub fn spectral_blocks(circ: &CirculantBlocks) -> CrossSpectra {
    let l = circ.window();
    let m = circ.dim();
    let blocks = (0..l)
        .map(|q| {
            let mut f = DMatrix::<C64>::zeros(m, m);
            for (j, omega) in circ.omegas().iter().enumerate() {
                let w = twiddle(j * q, l);
                for s in 0..m {
                    for r in 0..m {
                        f[(r, s)] += w * omega[(r, s)];
                    }
                }
            }
            (&f + f.adjoint()) * C64::new(0.5, 0.0)
        })
        .collect();
    CrossSpectra { blocks }
}

/// Cross-spectral blocks with their ordered eigenpairs.
#[derive(Debug, Clone)]
pub struct SpectralBlockSet {
    blocks: Vec<DMatrix<C64>>,
    eigenvalues: Vec<Vec<f64>>,
    eigenvectors: Vec<DMatrix<C64>>,
}

impl SpectralBlockSet {
    pub fn window(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    /// Block `F_k`, 1-based.
    pub fn block(&self, k: usize) -> &DMatrix<C64> {
        &self.blocks[k - 1]
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    /// Eigenvalues of `F_k`, descending.
    pub fn eigenvalues(&self, k: usize) -> &[f64] {
        &self.eigenvalues[k - 1]
    }

    /// Unit eigenvectors of `F_k` as columns, in eigenvalue order.
    pub fn eigenvectors(&self, k: usize) -> &DMatrix<C64> {
        &self.eigenvectors[k - 1]
    }

    pub fn eigenvector(&self, k: usize, m: usize) -> Vec<C64> {
        self.eigenvectors[k - 1]
            .column(m - 1)
            .iter()
            .copied()
            .collect()
    }

    /// Real trace of `F_k`.
    pub fn trace(&self, k: usize) -> f64 {
        self.blocks[k - 1].trace().re
    }

    pub fn total_eigenvalue_sum(&self) -> f64 {
        self.eigenvalues.iter().flatten().sum()
    }
}

/// Scales `v` to unit norm and rotates it so its largest-modulus entry
/// (lowest index on ties) is real and positive. Returns that index.
fn fix_phase(v: &mut [C64]) -> usize {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|z| *z /= norm);
    }
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let idx = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - MODULUS_TIE))
        .unwrap_or(0);
    let pivot = v[idx];
    let modulus = pivot.norm();
    if modulus > 0.0 {
        let rot = pivot.conj() / modulus;
        v.iter_mut().for_each(|z| *z *= rot);
        v[idx] = C64::new(modulus, 0.0);
    }
    idx
}

struct Eigenpair {
    value: f64,
    vector: Vec<C64>,
    pivot: usize,
}

fn eigen_block(f: &DMatrix<C64>, real: bool) -> Vec<Eigenpair> {
    let m = f.nrows();
    let (values, vectors): (Vec<f64>, DMatrix<C64>) = if real {
        let re = f.map(|z| z.re);
        let eig = SymmetricEigen::new(re);
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| C64::new(x, 0.0)),
        )
    } else {
        let eig = SymmetricEigen::new(f.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    (0..m)
        .map(|c| {
            let mut vector: Vec<C64> = vectors.column(c).iter().copied().collect();
            let pivot = fix_phase(&mut vector);
            Eigenpair {
                value: values[c],
                vector,
                pivot,
            }
        })
        .collect()
}

/// Orders eigenpairs by descending eigenvalue; numerically equal eigenvalues
/// are ordered by the index of their largest-modulus entry.
fn order_pairs(pairs: &mut [Eigenpair], scale: f64) {
    pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
    let gap = DEGENERATE_GAP * scale;
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end - 1].value - pairs[end].value <= gap {
            end += 1;
        }
        pairs[start..end].sort_by_key(|p| p.pivot);
        start = end;
    }
}

/// Eigendecomposes `F_1..F_{L/2+1}` and mirrors the conjugate half.
pub fn eigendecompose_blocks(spectra: CrossSpectra) -> Result<SpectralBlockSet> {
    let l = spectra.window();
    let m = spectra.dim();
    let half = num_frequencies(l);
    let mean_trace = spectra
        .blocks
        .iter()
        .map(|b| b.trace().re.abs())
        .sum::<f64>()
        / l as f64;

    let mut eigenvalues = Vec::with_capacity(l);
    let mut eigenvectors = Vec::with_capacity(l);
    for k in 1..=half {
        let f = &spectra.blocks[k - 1];
        let real = k == 1 || 2 * (k - 1) == l;
        let scale = f.trace().re.max(1e-12 * mean_trace).max(f64::MIN_POSITIVE);
        let mut pairs = eigen_block(f, real);
        for p in pairs.iter_mut() {
            if p.value < -NEGATIVE_LIMIT * scale {
                return Err(Error::NegativeEigenvalue {
                    frequency: k,
                    value: p.value,
                    scale,
                });
            }
            if p.value < 0.0 {
                p.value = 0.0;
            }
        }
        order_pairs(&mut pairs, scale);
        eigenvalues.push(pairs.iter().map(|p| p.value).collect::<Vec<_>>());
        eigenvectors.push(DMatrix::from_fn(m, m, |r, c| pairs[c].vector[r]));
    }
    for k in half + 1..=l {
        let mirror = partner(k, l);
        eigenvalues.push(eigenvalues[mirror - 1].clone());
        eigenvectors.push(eigenvectors[mirror - 1].map(|z| z.conj()));
    }
    Ok(SpectralBlockSet {
        blocks: spectra.blocks,
        eigenvalues,
        eigenvectors,
    })
}

/// The `LM` real orthonormal eigenvectors of `S_C`, one column per
/// `(k, m)` at column `(k - 1) M + (m - 1)`.
#[derive(Debug, Clone)]
pub struct RealEigenbasis {
    window: usize,
    dim: usize,
    vectors: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl RealEigenbasis {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All basis vectors as columns of an `LM x LM` matrix.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn column_index(&self, k: usize, m: usize) -> usize {
        (k - 1) * self.dim + (m - 1)
    }

    pub fn vector(&self, k: usize, m: usize) -> Vec<f64> {
        self.vectors
            .column(self.column_index(k, m))
            .iter()
            .copied()
            .collect()
    }

    /// Eigenvalue attached to `v_{k,m}`.
    pub fn eigenvalue(&self, k: usize, m: usize) -> f64 {
        self.eigenvalues[self.column_index(k, m)]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Frequency `(k - 1) / L` in cycles per sample.
    pub fn frequency(&self, k: usize) -> f64 {
        (k - 1) as f64 / self.window as f64
    }

    /// Entries of `v_{k,m}` belonging to series `i` (0-based), length `L`.
    pub fn segment(&self, k: usize, m: usize, i: usize) -> Vec<f64> {
        let col = self.vectors.column(self.column_index(k, m));
        (0..self.window).map(|r| col[r * self.dim + i]).collect()
    }

    /// `max |V'V - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.vectors.tr_mul(&self.vectors);
        let n = gram.nrows();
        (&gram - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Largest `||S v - lambda v|| / (1 + lambda)` over the basis.
    pub fn eigen_residual(&self, s: &DMatrix<f64>) -> f64 {
        let sv = s * &self.vectors;
        (0..self.vectors.ncols())
            .map(|c| {
                let lambda = self.eigenvalues[c];
                let r = sv.column(c) - self.vectors.column(c) * lambda;
                r.norm() / (1.0 + lambda.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Flips the sign of a single entry. Fault-injection hook for the
    /// verification suite; the result is no longer orthonormal.
    #[doc(hidden)]
    pub fn inject_sign_flip(&mut self) {
        self.vectors[(0, 0)] = -self.vectors[(0, 0)];
        if self.vectors[(0, 0)] == 0.0 {
            self.vectors[(0, 0)] = 1.0;
        }
    }
}

/// Builds the real basis from the complex eigenvectors `u_k (x) e_{k,m}`:
/// the vector itself at the real frequencies, `sqrt(2) Re(v_{k,m})` for
/// `k = 2..=floor((L+1)/2)` and `sqrt(2) Im(v_{L+2-k,m})` above that.
pub fn real_eigenbasis(set: &SpectralBlockSet) -> Result<RealEigenbasis> {
    let l = set.window();
    let m = set.dim();
    let g = l.div_ceil(2);
    let inv_sqrt_l = 1.0 / (l as f64).sqrt();
    let mut vectors = DMatrix::<f64>::zeros(l * m, l * m);
    let mut eigenvalues = vec![0.0; l * m];
    for k in 1..=l {
        let q = k - 1;
        let nyquist = 2 * q == l;
        let (source, kind) = if k == 1 || nyquist {
            (k, Part::Plain)
        } else if k <= g {
            (k, Part::Real)
        } else {
            (partner(k, l), Part::Imag)
        };
        let u: Vec<C64> = (0..l)
            .map(|r| twiddle(r * (source - 1), l) * inv_sqrt_l)
            .collect();
        let e = set.eigenvectors(source);
        for mm in 0..m {
            let col = q * m + mm;
            eigenvalues[col] = set.eigenvalues(source)[mm];
            for r in 0..l {
                for i in 0..m {
                    let z = u[r] * e[(i, mm)];
                    vectors[(r * m + i, col)] = match kind {
                        Part::Plain => z.re,
                        Part::Real => SQRT_2 * z.re,
                        Part::Imag => SQRT_2 * z.im,
                    };
                }
            }
        }
    }
    let basis = RealEigenbasis {
        window: l,
        dim: m,
        vectors,
        eigenvalues,
    };
    let err = basis.orthonormality_error();
    if err.is_nan() || err > ORTHONORMALITY_LIMIT {
        return Err(Error::Consistency(format!(
            "real eigenbasis orthonormality error {err:e} exceeds {ORTHONORMALITY_LIMIT:e}"
        )));
    }
    Ok(basis)
}

#[derive(Clone, Copy)]
enum Part {
    Plain,
    Real,
    Imag,
}

/// Per-series eigenvector segments and relative phases for one `(k, m)`.
#[derive(Debug, Clone)]
pub struct PhaseSegments {
    /// `segments[i]` is the length-`L` piece of `v_{k,m}` for series `i`.
    pub segments: Vec<Vec<f64>>,
    /// Phase of series `i` relative to `reference`, in `(-pi, pi]`;
    /// `None` where the eigenvector entry vanishes.
    pub phases: Vec<Option<f64>>,
    /// Series with the largest eigenvector modulus.
    pub reference: usize,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn phase_segments(
    basis: &RealEigenbasis,
    set: &SpectralBlockSet,
    k: usize,
    m: usize,
) -> Result<PhaseSegments> {
    let l = set.window();
    let dim = set.dim();
    if k == 0 || k > l {
        return Err(Error::IndexOutOfRange {
            what: "frequency",
            index: k,
            bound: l,
        });
    }
    if m == 0 || m > dim {
        return Err(Error::IndexOutOfRange {
            what: "subcomponent",
            index: m,
            bound: dim,
        });
    }
    let e = set.eigenvector(k, m);
    let max = e.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let reference = e
        .iter()
        .position(|z| z.norm() >= max * (1.0 - MODULUS_TIE))
        .unwrap_or(0);
    let base = e[reference].arg();
    let phases = e
        .iter()
        .enumerate()
        .map(|(i, z)| {
            if i == reference {
                Some(0.0)
            } else if z.norm() < 1e-12 {
                None
            } else {
                Some(wrap_angle(z.arg() - base))
            }
        })
        .collect();
    let segments = (0..dim).map(|i| basis.segment(k, m, i)).collect();
    Ok(PhaseSegments {
        segments,
        phases,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{build_circulant_blocks, AutocovSequence};

    fn decompose_single(f: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
        // Wrap a single Hermitian block as F_2 of an L = 4 set; F_4 is its
        // conjugate and F_1, F_3 are zero.
        let m = f.nrows();
        let zero = DMatrix::<C64>::zeros(m, m);
        let conj = f.map(|z| z.conj());
        let spectra = CrossSpectra {
            blocks: vec![zero.clone(), f, zero, conj],
        };
        let set = eigendecompose_blocks(spectra).unwrap();
        (set.eigenvalues(2).to_vec(), set.eigenvectors(2).clone())
    }

    fn real(rows: usize, data: &[f64]) -> DMatrix<C64> {
        DMatrix::from_row_slice(rows, rows, data).map(|x| C64::new(x, 0.0))
    }

    #[test]
    fn twiddle_exact_and_symmetric() {
        assert_eq!(twiddle(0, 7), C64::new(1.0, 0.0));
        assert_eq!(twiddle(4, 8), C64::new(-1.0, 0.0));
        assert_eq!(twiddle(2, 8), C64::new(0.0, -1.0));
        for l in [5usize, 8, 12, 13] {
            for n in 1..l {
                assert_eq!(twiddle(l - n, l), twiddle(n, l).conj());
                let angle = -2.0 * PI * n as f64 / l as f64;
                assert!((twiddle(n, l) - C64::new(angle.cos(), angle.sin())).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn delta_gives_flat_blocks() {
        let mut gammas = vec![DMatrix::from_element(1, 1, 1.0)];
        gammas.extend((1..6).map(|_| DMatrix::zeros(1, 1)));
        let circ = build_circulant_blocks(&AutocovSequence::new(gammas, None).unwrap());
        let spectra = spectral_blocks(&circ);
        for f in spectra.blocks() {
            assert!((f[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn inverse_dft_recovers_omega0() {
        let gammas: Vec<DMatrix<f64>> = (0..6)
            .map(|k| {
                DMatrix::from_fn(2, 2, |r, s| {
                    0.8f64.powi(k) * (1.0 + (r + s) as f64 * 0.1)
                })
            })
            .collect();
        let circ = build_circulant_blocks(&AutocovSequence::new(gammas, None).unwrap());
        let spectra = spectral_blocks(&circ);
        let mut mean = DMatrix::<C64>::zeros(2, 2);
        for f in spectra.blocks() {
            mean += f;
        }
        mean /= C64::new(6.0, 0.0);
        let diff = mean - circ.omegas()[0].map(|x| C64::new(x, 0.0));
        assert!(diff.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn ar1_spectrum_peaks_at_zero() {
        let phi: f64 = 0.5;
        let gammas = (0..32)
            .map(|k| DMatrix::from_element(1, 1, phi.powi(k) / (1.0 - phi * phi)))
            .collect();
        let circ = build_circulant_blocks(&AutocovSequence::new(gammas, None).unwrap());
        let spectra = spectral_blocks(&circ);
        let (argmax, _) = spectra
            .blocks()
            .iter()
            .map(|f| f[(0, 0)].re)
            .enumerate()
            .fold(
                (0, f64::MIN),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
        assert_eq!(argmax + 1, 1);
    }

    #[test]
    fn identity_block_gives_canonical_vectors() {
        let (values, vectors) = decompose_single(real(2, &[1.0, 0.0, 0.0, 1.0]));
        assert!((values[0] - 1.0).abs() < 1e-14 && (values[1] - 1.0).abs() < 1e-14);
        // Equal eigenvalues: ordered by pivot index, canonical after phase fix.
        assert!((vectors[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(vectors[(1, 0)].norm() < 1e-14);
        assert!((vectors[(1, 1)] - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    /// Roots of the 2x2 characteristic polynomial.
    fn char_poly_roots(a: f64, b: f64, d: f64) -> (f64, f64) {
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr / 4.0 - det).sqrt();
        (tr / 2.0 + disc, tr / 2.0 - disc)
    }

    #[test]
    fn two_by_two_matches_characteristic_polynomial() {
        let (values, vectors) = decompose_single(real(2, &[2.0, 1.0, 1.0, 2.0]));
        let (hi, lo) = char_poly_roots(2.0, 1.0, 2.0);
        assert!((values[0] - hi).abs() < 1e-13 && (values[1] - lo).abs() < 1e-13);
        assert_eq!((hi, lo), (3.0, 1.0));
        let s = 1.0 / 2f64.sqrt();
        assert!((vectors[(0, 0)] - C64::new(s, 0.0)).norm() < 1e-13);
        assert!((vectors[(1, 0)] - C64::new(s, 0.0)).norm() < 1e-13);
        assert!((vectors[(0, 1)] - C64::new(s, 0.0)).norm() < 1e-13);
        assert!((vectors[(1, 1)] - C64::new(-s, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn rank_one_complex_block() {
        let s = 1.0 / 2f64.sqrt();
        let a = [C64::new(s, 0.0), C64::new(0.0, s)];
        let f = DMatrix::from_fn(2, 2, |r, c| a[r] * a[c].conj());
        let (values, vectors) = decompose_single(f);
        assert!((values[0] - 1.0).abs() < 1e-14);
        assert_eq!(values[1], 0.0);
        assert!((vectors[(0, 0)] - a[0]).norm() < 1e-14);
        assert!((vectors[(1, 0)] - a[1]).norm() < 1e-14);
    }

    #[test]
    fn large_negative_eigenvalue_is_error() {
        let spectra = CrossSpectra {
            blocks: vec![real(1, &[-1.0]), real(1, &[1.0]), real(1, &[1.0])],
        };
        assert!(matches!(
            eigendecompose_blocks(spectra),
            Err(Error::NegativeEigenvalue { frequency: 1, .. })
        ));
    }

    #[test]
    fn tiny_negative_eigenvalue_clamped() {
        let spectra = CrossSpectra {
            blocks: vec![
                real(2, &[1.0, 0.0, 0.0, -1e-10]),
                real(2, &[1.0, 0.0, 0.0, 1.0]),
            ],
        };
        let set = eigendecompose_blocks(spectra).unwrap();
        assert_eq!(set.eigenvalues(1), &[1.0, 0.0]);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn period_and_partner() {
        assert!(period(1, 96).is_infinite());
        assert_eq!(period(2, 96), 96.0);
        assert_eq!(period(9, 96), 12.0);
        assert_eq!(partner(2, 96), 96);
        assert_eq!(partner(49, 96), 49);
        assert_eq!(num_frequencies(96), 49);
        assert_eq!(num_frequencies(7), 4);
    }
}
