//! Two-user channel pairs, Gaussian ensembles and the parametric region family.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexVec, MIN_ANTENNAS};

/// Channels of the two users, ordered so that user 1 is the stronger one.
///
/// All downstream user indices refer to this ordering. `swapped` records
/// whether the caller's first user became user 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelPair {
    h1: ComplexVec,
    h2: ComplexVec,
    norm1: f64,
    norm2: f64,
    swapped: bool,
}

impl ChannelPair {
    pub fn h1(&self) -> &ComplexVec {
        &self.h1
    }

    pub fn h2(&self) -> &ComplexVec {
        &self.h2
    }

    pub fn norm1(&self) -> f64 {
        self.norm1
    }

    pub fn norm2(&self) -> f64 {
        self.norm2
    }

    pub fn swapped(&self) -> bool {
        self.swapped
    }

    pub fn n_t(&self) -> usize {
        self.h1.len()
    }

    /// The channels in the caller's original labelling.
    pub fn to_record(&self) -> ChannelRecord {
        if self.swapped {
            ChannelRecord {
                h1: self.h2.clone(),
                h2: self.h1.clone(),
            }
        } else {
            ChannelRecord {
                h1: self.h1.clone(),
                h2: self.h2.clone(),
            }
        }
    }

    /// Both channels multiplied by the same positive real factor.
    pub fn scaled(&self, factor: f64) -> Result<ChannelPair> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Invalid(format!("scale factor must be positive, got {factor}")));
        }
        make_channel_pair(self.h1.scaled(factor), self.h2.scaled(factor))
    }
}

/// Orders two raw channels by Euclidean norm. Equal norms keep the input order.
pub fn make_channel_pair(h_a: ComplexVec, h_b: ComplexVec) -> Result<ChannelPair> {
    if h_a.len() != h_b.len() {
        return Err(Error::Dimension {
            expected: h_a.len(),
            got: h_b.len(),
        });
    }
    let (norm_a, norm_b) = (h_a.norm(), h_b.norm());
    if norm_a == 0.0 && norm_b == 0.0 {
        return Err(Error::DegenerateChannel("both channels are zero".into()));
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(Error::DegenerateChannel(
            "one user's channel is zero; the weaker user has no effective gain".into(),
        ));
    }
    let swapped = norm_a < norm_b;
    let pair = if swapped {
        ChannelPair {
            h1: h_b,
            h2: h_a,
            norm1: norm_b,
            norm2: norm_a,
            swapped,
        }
    } else {
        ChannelPair {
            h1: h_a,
            h2: h_b,
            norm1: norm_a,
            norm2: norm_b,
            swapped,
        }
    };
    Ok(pair)
}

/// Raw channel pair as stored in JSON channel files: `{"h1": [[re, im], ...], "h2": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub h1: ComplexVec,
    pub h2: ComplexVec,
}

impl ChannelRecord {
    pub fn into_pair(self) -> Result<ChannelPair> {
        make_channel_pair(self.h1, self.h2)
    }
}

/// Parses a JSON array of channel records.
pub fn parse_channel_records(json: &str) -> Result<Vec<ChannelRecord>> {
    serde_json::from_str(json).map_err(|e| Error::Invalid(format!("malformed channel JSON: {e}")))
}

pub fn channel_records_to_json(records: &[ChannelRecord]) -> String {
    serde_json::to_string_pretty(records).expect("channel records always serialize")
}

/// I.i.d. circularly-symmetric complex Gaussian channels, `h_k ~ CN(0, sigma_k^2 I)`.
///
/// Reproducibility: the generator is ChaCha8 keyed by `seed`; user 1 draws
/// from stream 0 and user 2 from stream 1. Each channel consumes, per
/// antenna in order, one real then one imaginary standard-normal sample from
/// its user's stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEnsembleSpec {
    pub n_t: usize,
    /// Per-entry variance of user 1 (real and imaginary parts carry half each).
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub seed: u64,
    pub count: usize,
}

impl Default for ChannelEnsembleSpec {
    fn default() -> Self {
        Self {
            n_t: 2,
            sigma1_sq: 1.0,
            sigma2_sq: 0.3,
            seed: 0,
            count: 100,
        }
    }
}

impl ChannelEnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_t < MIN_ANTENNAS {
            return Err(Error::Invalid(format!(
                "n_t must be at least {MIN_ANTENNAS}, got {}",
                self.n_t
            )));
        }
        for (name, v) in [("sigma1_sq", self.sigma1_sq), ("sigma2_sq", self.sigma2_sq)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.count == 0 {
            return Err(Error::Invalid("ensemble count must be positive".into()));
        }
        Ok(())
    }
}

/// The raw (unordered) channels of an ensemble, user 1 first.
pub fn sample_raw_ensemble(spec: &ChannelEnsembleSpec) -> Result<Vec<(ComplexVec, ComplexVec)>> {
    spec.validate()?;
    let mut streams = [0u64, 1].map(|stream| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stream);
        rng
    });
    let std_devs = [spec.sigma1_sq, spec.sigma2_sq].map(|v| (v / 2.0).sqrt());
    let mut out = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let mut draw = |user: usize| {
            let normal = Normal::new(0.0, std_devs[user]).expect("validated variance");
            let rng = &mut streams[user];
            let entries = (0..spec.n_t)
                .map(|_| {
                    let re = normal.sample(rng);
                    let im = normal.sample(rng);
                    Complex64::new(re, im)
                })
                .collect();
            ComplexVec::new(entries)
        };
        let h1 = draw(0)?;
        let h2 = draw(1)?;
        out.push((h1, h2));
    }
    Ok(out)
}

/// Samples `spec.count` channel pairs, each ordered by [`make_channel_pair`].
pub fn sample_gaussian_ensemble(spec: &ChannelEnsembleSpec) -> Result<Vec<ChannelPair>> {
    sample_raw_ensemble(spec)?
        .into_iter()
        .map(|(a, b)| make_channel_pair(a, b))
        .collect()
}

/// Two-antenna family `h1 = [1, 1]/sqrt(2)`, `h2 = gamma [1, e^{-j theta}]/sqrt(2)`
/// with `gamma = 10^(gamma_db / 20)`.
///
/// The squared correlation of the normalized channels is `cos^2(theta / 2)`,
/// so `rho = sin^2(theta / 2)`.
pub fn make_region_channel(gamma_db: f64, theta: f64) -> Result<ChannelPair> {
    if !gamma_db.is_finite() {
        return Err(Error::Invalid(format!("gamma_db must be finite, got {gamma_db}")));
    }
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::Invalid(format!("theta must lie in [0, pi], got {theta}")));
    }
    let gamma = 10f64.powf(gamma_db / 20.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let h1 = ComplexVec::new(vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)])?;
    let h2 = ComplexVec::new(vec![
        Complex64::new(gamma * s, 0.0),
        Complex64::from_polar(gamma * s, -theta),
    ])?;
    make_channel_pair(h1, h2)
}

/// Angle that yields a given `rho` in [`make_region_channel`].
pub fn theta_for_rho(rho: f64) -> f64 {
    2.0 * rho.clamp(0.0, 1.0).sqrt().asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inner_product;
    use std::f64::consts::PI;

    fn real(v: &[f64]) -> ComplexVec {
        ComplexVec::from_real(v).unwrap()
    }

    fn rho_of(pair: &ChannelPair) -> f64 {
        let c = inner_product(pair.h1(), pair.h2()).unwrap().norm_sqr();
        1.0 - c / (pair.norm1().powi(2) * pair.norm2().powi(2))
    }

    #[test]
    fn ordering_examples() {
        let p = make_channel_pair(real(&[0.0, 1.0]), real(&[2.0, 0.0])).unwrap();
        assert!(p.swapped());
        assert_eq!(p.h1(), &real(&[2.0, 0.0]));
        assert_eq!(p.norm1(), 2.0);

        let p = make_channel_pair(real(&[1.0, 1.0]), real(&[1.0, 0.0])).unwrap();
        assert!(!p.swapped());
        assert_eq!(p.h1(), &real(&[1.0, 1.0]));

        let p = make_channel_pair(real(&[1.0, 0.0]), real(&[0.0, 1.0])).unwrap();
        assert!(!p.swapped());
        assert_eq!(p.h1(), &real(&[1.0, 0.0]));
    }

    #[test]
    fn ordering_errors() {
        assert!(matches!(
            make_channel_pair(real(&[0.0, 0.0]), real(&[0.0, 0.0])),
            Err(Error::DegenerateChannel(_))
        ));
        assert!(matches!(
            make_channel_pair(real(&[1.0, 0.0]), real(&[0.0, 0.0])),
            Err(Error::DegenerateChannel(_))
        ));
        assert!(matches!(
            make_channel_pair(real(&[1.0, 0.0]), real(&[1.0, 0.0, 0.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn record_restores_original_labels() {
        let a = real(&[0.0, 1.0]);
        let b = real(&[2.0, 0.0]);
        let rec = make_channel_pair(a.clone(), b.clone()).unwrap().to_record();
        assert_eq!(rec, ChannelRecord { h1: a, h2: b });
    }

    #[test]
    fn ensemble_is_deterministic() {
        let spec = ChannelEnsembleSpec {
            count: 100,
            seed: 7,
            ..Default::default()
        };
        let a = sample_gaussian_ensemble(&spec).unwrap();
        let b = sample_gaussian_ensemble(&spec).unwrap();
        assert_eq!(a, b);
        let other = sample_gaussian_ensemble(&ChannelEnsembleSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn ensemble_variance_matches_spec() {
        let spec = ChannelEnsembleSpec {
            sigma2_sq: 0.3,
            count: 100_000,
            seed: 11,
            ..Default::default()
        };
        let raw = sample_raw_ensemble(&spec).unwrap();
        let mean2 = raw.iter().map(|(_, h2)| h2.norm_sqr()).sum::<f64>() / raw.len() as f64;
        let mean1 = raw.iter().map(|(h1, _)| h1.norm_sqr()).sum::<f64>() / raw.len() as f64;
        assert!((mean2 / (2.0 * 0.3) - 1.0).abs() < 0.02, "mean |h2|^2 = {mean2}");
        assert!((mean1 / 2.0 - 1.0).abs() < 0.02, "mean |h1|^2 = {mean1}");
    }

    #[test]
    fn ensemble_validation() {
        let bad = ChannelEnsembleSpec {
            count: 0,
            ..Default::default()
        };
        assert!(sample_gaussian_ensemble(&bad).is_err());
        let bad = ChannelEnsembleSpec {
            sigma1_sq: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChannelEnsembleSpec {
            n_t: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ensemble_pairs_are_ordered() {
        let spec = ChannelEnsembleSpec {
            count: 500,
            seed: 3,
            n_t: 4,
            ..Default::default()
        };
        for p in sample_gaussian_ensemble(&spec).unwrap() {
            assert!(p.norm1() >= p.norm2());
            assert!((p.h1().norm() - p.norm1()).abs() <= 1e-12 * p.norm1());
            assert!((p.h2().norm() - p.norm2()).abs() <= 1e-12 * p.norm2());
        }
    }

    #[test]
    fn region_channel_examples() {
        let p = make_region_channel(0.0, PI).unwrap();
        assert!((rho_of(&p) - 1.0).abs() < 1e-12);
        let p = make_region_channel(0.0, 0.0).unwrap();
        assert!(rho_of(&p).abs() < 1e-12);

        let p = make_region_channel(-15.0, PI / 2.0).unwrap();
        assert!((rho_of(&p) - 0.5).abs() < 1e-12);
        assert!((p.norm2().powi(2) - 10f64.powf(-1.5)).abs() < 1e-14);
        assert!(!p.swapped());
    }

    #[test]
    fn region_channel_rho_matches_closed_form() {
        for i in 0..=200 {
            let theta = PI * i as f64 / 200.0;
            let p = make_region_channel(-7.0, theta).unwrap();
            let expected = (theta / 2.0).sin().powi(2);
            assert!((rho_of(&p) - expected).abs() <= 1e-12, "theta = {theta}");
        }
        for rho in [0.01, 0.25, 0.5, 0.9, 1.0] {
            let p = make_region_channel(-3.0, theta_for_rho(rho)).unwrap();
            assert!((rho_of(&p) - rho).abs() <= 1e-12);
        }
    }

    #[test]
    fn region_channel_rejects_bad_theta() {
        assert!(make_region_channel(0.0, -0.1).is_err());
        assert!(make_region_channel(0.0, 4.0).is_err());
    }

    #[test]
    fn channel_file_round_trip() {
        let spec = ChannelEnsembleSpec {
            count: 5,
            seed: 1,
            ..Default::default()
        };
        let recs: Vec<_> = sample_gaussian_ensemble(&spec)
            .unwrap()
            .iter()
            .map(ChannelPair::to_record)
            .collect();
        let json = channel_records_to_json(&recs);
        assert_eq!(parse_channel_records(&json).unwrap(), recs);
        assert!(parse_channel_records("{").is_err());
        assert!(parse_channel_records(r#"[{"h1": [[1,0]], "h2": [[1,0]]}]"#).is_err());
    }
}
