//! Fixed precoding directions and the scalar gains they induce.
//!
//! Private streams use zero-forcing directions, the common stream uses the
//! closed-form two-user max-min multicast direction. With these directions
//! the received SINRs depend on the channel only through a handful of
//! scalars, collected in [`EffectiveGains`].

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::ChannelPair;
use crate::error::{Error, Result};
use crate::linalg::ComplexVec;

/// Below this value of `rho` the channels are treated as collinear.
pub const COLLINEAR_EPS: f64 = 1e-10;

/// Scalar gains of the two-user model under the fixed precoder design.
///
/// * `rho = 1 - |h1_bar^H h2_bar|^2`
/// * `rho_k = |h_k|^2 rho` (private-stream gain after zero-forcing)
/// * `rho_ck = |h_k^H pc_bar|^2` (common-stream gain)
/// * `gamma_gap = 1/rho2 - 1/rho1`, the private power at which water-filling
///   starts serving user 2; `+inf` for collinear channels (serialized as `null`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveGains {
    rho: f64,
    rho1: f64,
    rho2: f64,
    rho_c1: f64,
    rho_c2: f64,
    gamma_gap: f64,
}

impl EffectiveGains {
    /// Builds gains from raw scalars, checking the ordering invariants.
    pub fn from_parts(rho: f64, rho1: f64, rho2: f64, rho_c1: f64, rho_c2: f64) -> Result<Self> {
        let all = [rho, rho1, rho2, rho_c1, rho_c2];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid(format!(
                "gains must be finite and non-negative: {all:?}"
            )));
        }
        if rho > 1.0 {
            return Err(Error::Invalid(format!("rho must lie in [0, 1], got {rho}")));
        }
        if rho1 < rho2 {
            return Err(Error::Invalid(format!("rho1 ({rho1}) must be at least rho2 ({rho2})")));
        }
        let collinear = rho <= COLLINEAR_EPS || rho2 == 0.0;
        let gamma_gap = if collinear {
            f64::INFINITY
        } else {
            (1.0 / rho2 - 1.0 / rho1).max(0.0)
        };
        Ok(Self {
            rho,
            rho1,
            rho2,
            rho_c1,
            rho_c2,
            gamma_gap,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    pub fn rho_c1(&self) -> f64 {
        self.rho_c1
    }

    pub fn rho_c2(&self) -> f64 {
        self.rho_c2
    }

    pub fn gamma_gap(&self) -> f64 {
        self.gamma_gap
    }

    /// True when zero-forcing has no usable gain and only the common stream remains.
    pub fn is_collinear(&self) -> bool {
        self.gamma_gap.is_infinite()
    }

    /// Gains of the same geometry with every channel scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let f2 = factor * factor;
        Self::from_parts(
            self.rho,
            self.rho1 * f2,
            self.rho2 * f2,
            self.rho_c1 * f2,
            self.rho_c2 * f2,
        )
        .expect("scaling preserves validity")
    }
}

/// Unit-norm directions for the two private streams and the common stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecoderSet {
    pub dir1: ComplexVec,
    pub dir2: ComplexVec,
    pub dir_c: ComplexVec,
}

/// `h1_bar^H h2_bar`.
pub fn normalized_correlation(ch: &ChannelPair) -> Complex64 {
    let raw = ch.h1().dot(ch.h2()).expect("pair has equal lengths");
    raw / (ch.norm1() * ch.norm2())
}

fn rho_of(ch: &ChannelPair) -> f64 {
    (1.0 - normalized_correlation(ch).norm_sqr()).clamp(0.0, 1.0)
}

/// Zero-forcing directions: each user's channel projected onto the orthogonal
/// complement of the other user's channel, then normalized.
pub fn zf_directions(ch: &ChannelPair) -> Result<(ComplexVec, ComplexVec)> {
    let rho = rho_of(ch);
    if rho <= COLLINEAR_EPS {
        return Err(Error::CollinearChannels { rho });
    }
    let project_out = |h: &ComplexVec, other: &ComplexVec, other_norm: f64| {
        let unit = other.scaled(1.0 / other_norm);
        let coeff = unit.dot(h).expect("equal lengths");
        h.add_scaled(&unit, -coeff)
            .normalized()
            .ok_or(Error::CollinearChannels { rho })
    };
    let dir1 = project_out(ch.h1(), ch.h2(), ch.norm2())?;
    let dir2 = project_out(ch.h2(), ch.h1(), ch.norm1())?;
    Ok((dir1, dir2))
}

/// Max-min multicast direction for two users,
/// `(h1_bar + h2_bar e^{-j angle(c)}) / sqrt(2 (1 + |c|))` with `c = h1_bar^H h2_bar`.
///
/// It gives both users the same normalized projection `|h_k_bar^H pc_bar|^2 = (1 + |c|) / 2`.
pub fn common_precoder(ch: &ChannelPair) -> ComplexVec {
    let c = normalized_correlation(ch);
    let phase = if c == Complex64::new(0.0, 0.0) { 0.0 } else { c.arg() };
    let h1_bar = ch.h1().scaled(1.0 / ch.norm1());
    let h2_bar = ch.h2().scaled(1.0 / ch.norm2());
    let sum = h1_bar.add_scaled(&h2_bar, Complex64::from_polar(1.0, -phase));
    sum.scaled(1.0 / (2.0 * (1.0 + c.norm())).sqrt())
}

pub fn precoders(ch: &ChannelPair) -> Result<PrecoderSet> {
    let (dir1, dir2) = zf_directions(ch)?;
    Ok(PrecoderSet {
        dir1,
        dir2,
        dir_c: common_precoder(ch),
    })
}

/// Reduces a channel pair to its effective gains. Never fails: collinear
/// pairs get `rho = 0` and an infinite `gamma_gap`.
pub fn effective_gains(ch: &ChannelPair) -> EffectiveGains {
    let mut rho = rho_of(ch);
    if rho <= COLLINEAR_EPS {
        rho = 0.0;
    }
    let dir_c = common_precoder(ch);
    let gain = |h: &ComplexVec| h.dot(&dir_c).expect("equal lengths").norm_sqr();
    let n1 = ch.norm1() * ch.norm1();
    let n2 = ch.norm2() * ch.norm2();
    EffectiveGains::from_parts(rho, n1 * rho, (n2 * rho).min(n1 * rho), gain(ch.h1()), gain(ch.h2()))
        .expect("gains of an ordered pair are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_channel_pair, sample_gaussian_ensemble, ChannelEnsembleSpec};
    use crate::linalg::inner_product;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn pair(a: &[f64], b: &[f64]) -> ChannelPair {
        make_channel_pair(ComplexVec::from_real(a).unwrap(), ComplexVec::from_real(b).unwrap()).unwrap()
    }

    fn abs_dot(a: &ComplexVec, b: &ComplexVec) -> f64 {
        inner_product(a, b).unwrap().norm()
    }

    fn random_pairs(count: usize, n_t: usize, seed: u64) -> Vec<ChannelPair> {
        sample_gaussian_ensemble(&ChannelEnsembleSpec {
            n_t,
            count,
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn zf_orthogonal_channels() {
        let ch = pair(&[1.0, 0.0], &[0.0, 1.0]);
        let (d1, d2) = zf_directions(&ch).unwrap();
        assert!((abs_dot(&d1, &ComplexVec::from_real(&[1.0, 0.0]).unwrap()) - 1.0).abs() < 1e-15);
        assert!((abs_dot(&d2, &ComplexVec::from_real(&[0.0, 1.0]).unwrap()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zf_half_correlated() {
        // h1 = [1,1]/sqrt2, h2 = [1,0]: Gram-Schmidt by hand gives dir1 = [0,1], rho = 1/2.
        let ch = pair(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &[1.0, 0.0]);
        let (d1, _) = zf_directions(&ch).unwrap();
        assert!(abs_dot(ch.h2(), &d1) < 1e-15);
        assert!((abs_dot(ch.h1(), &d1).powi(2) - 0.5).abs() < 1e-15);
        assert!((d1.as_slice()[1].norm() - 1.0).abs() < 1e-15);
        assert!((effective_gains(&ch).rho() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zf_collinear_is_rejected() {
        let ch = pair(&[1.0, 0.0], &[1.0, 0.0]);
        assert!(matches!(zf_directions(&ch), Err(Error::CollinearChannels { .. })));
        assert!(precoders(&ch).is_err());
    }

    #[test]
    fn common_precoder_examples() {
        let ch = pair(&[1.0, 0.0], &[0.0, 1.0]);
        let pc = common_precoder(&ch);
        for z in pc.as_slice() {
            assert!((z.re - FRAC_1_SQRT_2).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
        let g = effective_gains(&ch);
        assert!((g.rho_c1() - 0.5).abs() < 1e-15 && (g.rho_c2() - 0.5).abs() < 1e-15);

        let ch = pair(&[1.0, 0.0], &[1.0, 0.0]);
        let pc = common_precoder(&ch);
        assert!((pc.as_slice()[0].re - 1.0).abs() < 1e-15);
        assert!(pc.as_slice()[1].norm() < 1e-15);
    }

    #[test]
    fn common_precoder_beats_random_directions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for ch in random_pairs(5, 3, 21) {
            let h1 = ch.h1().scaled(1.0 / ch.norm1());
            let h2 = ch.h2().scaled(1.0 / ch.norm2());
            let score = |p: &ComplexVec| abs_dot(&h1, p).min(abs_dot(&h2, p));
            let best = score(&common_precoder(&ch));
            for _ in 0..10_000 {
                let v = ComplexVec::new(
                    (0..3)
                        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect(),
                )
                .unwrap()
                .normalized()
                .unwrap();
                assert!(score(&v) <= best + 1e-12);
            }
        }
    }

    #[test]
    fn gains_examples() {
        let g = effective_gains(&pair(&[1.0, 0.0], &[0.0, 1.0]));
        assert_eq!((g.rho(), g.rho1(), g.rho2(), g.gamma_gap()), (1.0, 1.0, 1.0, 0.0));

        let g = effective_gains(&pair(&[1.0, 0.0], &[0.0, 0.5]));
        assert!((g.rho2() - 0.25).abs() < 1e-15);
        assert!((g.gamma_gap() - 3.0).abs() < 1e-12);

        let g = effective_gains(&pair(&[1.0, 0.0], &[2.0, 0.0]));
        assert_eq!(g.rho(), 0.0);
        assert!(g.gamma_gap().is_infinite() && g.is_collinear());
    }

    #[test]
    fn from_parts_validation() {
        assert!(EffectiveGains::from_parts(0.5, 0.1, 0.2, 0.3, 0.3).is_err());
        assert!(EffectiveGains::from_parts(1.5, 1.0, 0.2, 0.3, 0.3).is_err());
        assert!(EffectiveGains::from_parts(0.5, 1.0, -0.2, 0.3, 0.3).is_err());
        let g = EffectiveGains::from_parts(0.5, 1.0, 0.25, 0.5, 0.5).unwrap();
        assert_eq!(g.gamma_gap(), 3.0);
    }

    #[test]
    fn precoder_invariants_on_random_channels() {
        for n_t in [2, 4] {
            for ch in random_pairs(300, n_t, 5) {
                let p = precoders(&ch).unwrap();
                for d in [&p.dir1, &p.dir2, &p.dir_c] {
                    assert!((d.norm() - 1.0).abs() <= 1e-12);
                }
                assert!(abs_dot(ch.h2(), &p.dir1) <= 1e-10 * ch.norm2());
                assert!(abs_dot(ch.h1(), &p.dir2) <= 1e-10 * ch.norm1());
                let a1 = abs_dot(ch.h1(), &p.dir_c) / ch.norm1();
                let a2 = abs_dot(ch.h2(), &p.dir_c) / ch.norm2();
                assert!((a1 - a2).abs() <= 1e-10);

                let g = effective_gains(&ch);
                assert!((abs_dot(ch.h1(), &p.dir1).powi(2) / g.rho1() - 1.0).abs() <= 1e-9);
                assert!((abs_dot(ch.h2(), &p.dir2).powi(2) / g.rho2() - 1.0).abs() <= 1e-9);
                assert!(g.rho1() >= g.rho2() && g.gamma_gap() >= 0.0);
                let rel = (g.rho_c1() / ch.norm1().powi(2)) / (g.rho_c2() / ch.norm2().powi(2));
                assert!((rel - 1.0).abs() <= 1e-10);
            }
        }
    }
}
