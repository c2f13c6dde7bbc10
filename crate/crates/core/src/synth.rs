//! Synthetic panels with known components.
//!
//! A recipe is a TOML document:
//!
//! ```toml
//! seed = 7
//! phase_offsets = [0.0, 1.5708]   # radians, per series; missing entries are 0
//!
//! [[component]]
//! kind = "harmonic"
//! amplitude = 2.0
//! frequency = 0.083333            # cycles per sample, in [0, 0.5]
//! phase = 0.0
//!
//! [[component]]
//! kind = "white_noise"
//! std = 0.5
//! ```
//!
//! Other kinds: `am_fm` (`amplitude`, `carrier`, `envelope_rate`,
//! `envelope_depth`, `fm_depth`, `fm_rate`, `phase`), `ar1` (`phi`,
//! `sigma`) and `trend` (`slope`). Time runs `t = 0..T-1`.
//!
//! Randomness comes from ChaCha8 seeded with `seed + i` for series `i`, so
//! output is identical across platforms.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};
use crate::moments::AutocovSequence;
use crate::panel::TimeSeriesPanel;

fn finite<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if !v.is_finite() {
        return Err(serde::de::Error::custom(format!("{v} is not finite")));
    }
    Ok(v)
}

fn nonnegative<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v = finite(d)?;
    if v < 0.0 {
        return Err(serde::de::Error::custom(format!("{v} must be >= 0")));
    }
    Ok(v)
}

fn frequency<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v = finite(d)?;
    if !(0.0..=0.5).contains(&v) {
        return Err(serde::de::Error::custom(format!(
            "frequency {v} outside [0, 0.5]"
        )));
    }
    Ok(v)
}

fn coefficient<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v = finite(d)?;
    if v.abs() >= 1.0 {
        return Err(serde::de::Error::custom(format!(
            "AR coefficient {v} outside (-1, 1)"
        )));
    }
    Ok(v)
}

fn offsets<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let v = Vec::<f64>::deserialize(d)?;
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(serde::de::Error::custom(format!(
            "phase offset {bad} is not finite"
        )));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    Harmonic {
        #[serde(deserialize_with = "finite")]
        amplitude: f64,
        #[serde(deserialize_with = "frequency")]
        frequency: f64,
        #[serde(default, deserialize_with = "finite")]
        phase: f64,
    },
    /// Amplitude- and frequency-modulated cosine:
    /// `A (1 + d_e cos(2 pi r_e t)) cos(2 pi f t + FM(t) + phase)`, where the
    /// instantaneous frequency swings by `fm_depth` at rate `fm_rate`.
    AmFm {
        #[serde(deserialize_with = "finite")]
        amplitude: f64,
        #[serde(deserialize_with = "frequency")]
        carrier: f64,
        #[serde(default, deserialize_with = "frequency")]
        envelope_rate: f64,
        #[serde(default, deserialize_with = "nonnegative")]
        envelope_depth: f64,
        #[serde(default, deserialize_with = "nonnegative")]
        fm_depth: f64,
        #[serde(default, deserialize_with = "frequency")]
        fm_rate: f64,
        #[serde(default, deserialize_with = "finite")]
        phase: f64,
    },
    Ar1 {
        #[serde(deserialize_with = "coefficient")]
        phi: f64,
        #[serde(deserialize_with = "nonnegative")]
        sigma: f64,
    },
    WhiteNoise {
        #[serde(deserialize_with = "nonnegative")]
        std: f64,
    },
    Trend {
        #[serde(deserialize_with = "finite")]
        slope: f64,
    },
}

impl Primitive {
    pub fn kind(&self) -> &'static str {
        match self {
            Primitive::Harmonic { .. } => "harmonic",
            Primitive::AmFm { .. } => "am_fm",
            Primitive::Ar1 { .. } => "ar1",
            Primitive::WhiteNoise { .. } => "white_noise",
            Primitive::Trend { .. } => "trend",
        }
    }

    fn sample(&self, len: usize, offset: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match *self {
            Primitive::Harmonic {
                amplitude,
                frequency,
                phase,
            } => (0..len)
                .map(|t| amplitude * (2.0 * PI * frequency * t as f64 + phase + offset).cos())
                .collect(),
            Primitive::AmFm {
                amplitude,
                carrier,
                envelope_rate,
                envelope_depth,
                fm_depth,
                fm_rate,
                phase,
            } => (0..len)
                .map(|t| {
                    let t = t as f64;
                    let envelope = 1.0 + envelope_depth * (2.0 * PI * envelope_rate * t).cos();
                    let fm = if fm_rate > 0.0 {
                        fm_depth / fm_rate * (2.0 * PI * fm_rate * t).sin()
                    } else {
                        2.0 * PI * fm_depth * t
                    };
                    amplitude * envelope * (2.0 * PI * carrier * t + fm + phase + offset).cos()
                })
                .collect(),
            Primitive::Ar1 { phi, sigma } => {
                let eps = Normal::new(0.0, 1.0).expect("unit normal");
                let mut x = sigma / (1.0 - phi * phi).sqrt() * eps.sample(rng);
                (0..len)
                    .map(|t| {
                        if t > 0 {
                            x = phi * x + sigma * eps.sample(rng);
                        }
                        x
                    })
                    .collect()
            }
            Primitive::WhiteNoise { std } => {
                let eps = Normal::new(0.0, 1.0).expect("unit normal");
                (0..len).map(|_| std * eps.sample(rng)).collect()
            }
            Primitive::Trend { slope } => (0..len).map(|t| slope * t as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalRecipe {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, deserialize_with = "offsets")]
    pub phase_offsets: Vec<f64>,
    #[serde(default, rename = "component")]
    pub components: Vec<Primitive>,
}

impl SignalRecipe {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Recipe(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A generated panel with its per-primitive ground truth.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub mixed: TimeSeriesPanel,
    /// One panel per recipe component, in recipe order.
    pub truths: Vec<(&'static str, TimeSeriesPanel)>,
}

pub fn generate(recipe: &SignalRecipe, dim: usize, len: usize) -> Result<Synthetic> {
    if dim == 0 {
        return Err(Error::Parameter("need at least one series".into()));
    }
    let mut truths: Vec<DMatrix<f64>> = vec![DMatrix::zeros(dim, len); recipe.components.len()];
    for i in 0..dim {
        let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed.wrapping_add(i as u64));
        let offset = recipe.phase_offsets.get(i).copied().unwrap_or(0.0);
        for (c, prim) in recipe.components.iter().enumerate() {
            for (t, v) in prim.sample(len, offset, &mut rng).into_iter().enumerate() {
                truths[c][(i, t)] = v;
            }
        }
    }
    let mut mixed = DMatrix::zeros(dim, len);
    for truth in &truths {
        mixed += truth;
    }
    let names: Vec<String> = (1..=dim).map(|i| format!("s{i}")).collect();
    let mixed = TimeSeriesPanel::new(mixed, names.clone(), None)?;
    let truths = recipe
        .components
        .iter()
        .zip(truths)
        .map(|(p, v)| Ok((p.kind(), TimeSeriesPanel::new(v, names.clone(), None)?)))
        .collect::<Result<_>>()?;
    Ok(Synthetic { mixed, truths })
}

/// Autocovariances of `M` independent AR(1) series:
/// `Gamma_k = sigma^2 phi^k / (1 - phi^2) I` for `k = 0..L-1`.
pub fn population_autocov_ar1(
    phi: f64,
    sigma: f64,
    dim: usize,
    window: usize,
) -> Result<AutocovSequence> {
    if !phi.is_finite() || phi.abs() >= 1.0 {
        return Err(Error::Parameter(format!("phi = {phi} outside (-1, 1)")));
    }
    if sigma.is_nan() || sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::Parameter(format!(
            "sigma = {sigma} must be positive"
        )));
    }
    if dim == 0 || window < 2 {
        return Err(Error::Parameter(format!(
            "need M >= 1 and L >= 2, got M = {dim}, L = {window}"
        )));
    }
    let gamma0 = sigma * sigma / (1.0 - phi * phi);
    let gammas = (0..window)
        .map(|k| DMatrix::identity(dim, dim) * (gamma0 * phi.powi(k as i32)))
        .collect();
    AutocovSequence::new(gammas, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_harmonic_matches_definition() {
        let recipe = SignalRecipe::from_toml_str(
            "[[component]]\nkind = \"harmonic\"\namplitude = 3.0\nfrequency = 0.08333333333333333\n",
        )
        .unwrap();
        let out = generate(&recipe, 2, 24).unwrap();
        for t in 0..24 {
            let want = 3.0 * (2.0 * PI * t as f64 / 12.0).cos();
            assert!((out.mixed.values()[(0, t)] - want).abs() < 1e-12);
        }
        assert_eq!(out.truths.len(), 1);
        assert_eq!(out.truths[0].1.values(), out.mixed.values());
    }

    #[test]
    fn empty_recipe_gives_zeros() {
        let out = generate(&SignalRecipe::default(), 3, 10).unwrap();
        assert!(out.mixed.values().iter().all(|&v| v == 0.0));
        assert!(out.truths.is_empty());
    }

    #[test]
    fn phase_offsets_shift_series() {
        let recipe = SignalRecipe::from_toml_str(
            "phase_offsets = [0.0, 1.0]\n[[component]]\nkind = \"harmonic\"\namplitude = 1.0\nfrequency = 0.1\n",
        )
        .unwrap();
        let out = generate(&recipe, 3, 8).unwrap();
        assert!((out.mixed.values()[(1, 0)] - 1f64.cos()).abs() < 1e-15);
        assert_eq!(out.mixed.values()[(2, 0)], 1.0);
    }

    #[test]
    fn seeded_and_summed() {
        let text = "seed = 5\n[[component]]\nkind = \"trend\"\nslope = 0.1\n\
                    [[component]]\nkind = \"ar1\"\nphi = 0.7\nsigma = 1.0\n\
                    [[component]]\nkind = \"white_noise\"\nstd = 0.2\n\
                    [[component]]\nkind = \"am_fm\"\namplitude = 1.0\ncarrier = 0.1\n\
                    envelope_rate = 0.01\nenvelope_depth = 0.3\nfm_depth = 0.02\nfm_rate = 0.005\n";
        let recipe = SignalRecipe::from_toml_str(text).unwrap();
        let a = generate(&recipe, 3, 50).unwrap();
        let b = generate(&recipe, 3, 50).unwrap();
        assert_eq!(a.mixed.values(), b.mixed.values());
        let mut sum = DMatrix::zeros(3, 50);
        for (_, p) in &a.truths {
            sum += p.values();
        }
        assert_eq!(&sum, a.mixed.values());
        let kinds: Vec<_> = a.truths.iter().map(|(k, _)| *k).collect();
        assert_eq!(kinds, ["trend", "ar1", "white_noise", "am_fm"]);

        let c = generate(&recipe.clone().with_seed(6), 3, 50).unwrap();
        assert_ne!(a.mixed.values(), c.mixed.values());
        // series i uses seed + i
        let shifted = generate(&recipe.with_seed(6), 2, 50).unwrap();
        assert_eq!(shifted.truths[1].1.series(0), a.truths[1].1.series(1));
    }

    #[test]
    fn schema_errors_carry_lines() {
        let cases = [
            "[[component]]\nkind = \"harmonic\"\namplitude = 1.0\nfrequency = 0.7\n",
            "[[component]]\nkind = \"ar1\"\nphi = 1.0\nsigma = 1.0\n",
            "[[component]]\nkind = \"ar1\"\nphi = 0.1\nsigma = -1.0\n",
            "[[component]]\nkind = \"wavelet\"\n",
            "[[component]]\nkind = \"trend\"\nslope = 1.0\nextra = 2\n",
            "seed = 1\nbogus = true\n",
            "[[component]]\nkind = \"harmonic\"\namplitude = 1.0\n",
        ];
        for text in cases {
            let err = SignalRecipe::from_toml_str(text).unwrap_err();
            assert!(matches!(err, Error::Recipe(_)));
            assert!(err.to_string().contains("line"), "{err}");
        }
    }

    #[test]
    fn ar1_population_values() {
        let acv = population_autocov_ar1(0.5, 1.0, 2, 4).unwrap();
        assert!((acv.gammas()[1][(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(acv.gammas()[1][(0, 1)], 0.0);
        for k in 0..3 {
            let ratio = acv.gammas()[k + 1][(1, 1)] / acv.gammas()[k][(1, 1)];
            assert!((ratio - 0.5).abs() < 1e-15);
        }
        let white = population_autocov_ar1(0.0, 2.0, 1, 3).unwrap();
        assert_eq!(white.gammas()[0][(0, 0)], 4.0);
        assert_eq!(white.gammas()[1][(0, 0)], 0.0);
        assert!(population_autocov_ar1(1.0, 1.0, 1, 3).is_err());
        assert!(population_autocov_ar1(0.5, 0.0, 1, 3).is_err());
    }
}
