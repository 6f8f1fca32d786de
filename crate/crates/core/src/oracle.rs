//! Brute-force validators for the closed-form allocator.
//!
//! Nothing here calls into [`crate::allocator`]: private powers come from an
//! explicit water level, both common decoding rates are computed and the
//! smaller taken, and the common-rate division is a direct max-min over the
//! feasible shares.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::allocator::{CommonSplit, RateTuple};
use crate::beamform::EffectiveGains;
use crate::error::{Error, Result};

/// Finest step the refined t-grid may reach.
pub const MIN_GRID_STEP: f64 = 1e-8;

/// Largest per-axis resolution accepted by [`grid_power_3d`].
pub const MAX_POWER_GRID: usize = 400;

/// Coarse uniform grid on `t in [0, 1]` followed by local refinement rounds,
/// each covering one coarse cell either side of the incumbent best point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub coarse_step: f64,
    pub refine_factor: u32,
    pub refine_rounds: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            coarse_step: 1e-4,
            refine_factor: 10,
            refine_rounds: 2,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.coarse_step > 0.0 && self.coarse_step <= 1.0) {
            return Err(Error::Invalid(format!(
                "coarse_step must lie in (0, 1], got {}",
                self.coarse_step
            )));
        }
        if self.refine_factor == 0 {
            return Err(Error::Invalid("refine_factor must be positive".into()));
        }
        if self.finest_step() < MIN_GRID_STEP {
            return Err(Error::Invalid(format!(
                "finest step {:e} is below the floor {MIN_GRID_STEP:e}",
                self.finest_step()
            )));
        }
        Ok(())
    }

    pub fn finest_step(&self) -> f64 {
        self.coarse_step / f64::from(self.refine_factor).powi(self.refine_rounds as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOptimum {
    pub t: f64,
    pub mmf: f64,
    /// Best value after the coarse pass and after each refinement round.
    pub round_best: Vec<f64>,
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Private powers from the water level `mu` with `P_k = max(mu - 1/rho_k, 0)`.
fn private_powers(g: &EffectiveGains, private: f64) -> (f64, f64) {
    if g.rho2() <= 0.0 || g.gamma_gap().is_infinite() {
        return (private, 0.0);
    }
    let (inv1, inv2) = (1.0 / g.rho1(), 1.0 / g.rho2());
    let both = 0.5 * (private + inv1 + inv2);
    if both > inv2 {
        (both - inv1, both - inv2)
    } else {
        (private, 0.0)
    }
}

/// `(R1, R2, R_c)` with `R_c = min(R_c1, R_c2)` evaluated directly.
fn stream_rates(g: &EffectiveGains, p1: f64, p2: f64, pc: f64) -> (f64, f64, f64) {
    let s1 = g.rho1() * p1;
    let s2 = g.rho2() * p2;
    let rc1 = log2_1p(g.rho_c1() * pc / (1.0 + s1));
    let rc2 = log2_1p(g.rho_c2() * pc / (1.0 + s2));
    (log2_1p(s1), log2_1p(s2), rc1.min(rc2))
}

/// `max over c1 + c2 = rc, c_k >= 0` of `min(r1 + c1, r2 + c2)`.
fn best_share(r1: f64, r2: f64, rc: f64) -> f64 {
    (0.5 * (r1 + r2 + rc)).min(r1.min(r2) + rc)
}

/// Piecewise max-min objective at `t`, using the strategy the split implies:
/// multicast at `t = 0`, NOMA while user 2 gets no private power, RSMA
/// beyond that, SDMA at `t = 1`.
fn objective(g: &EffectiveGains, t: f64, total: f64) -> f64 {
    let (p1, p2) = private_powers(g, t * total);
    let pc = (1.0 - t) * total;
    let (r1, r2, rc) = stream_rates(g, p1, p2, pc);
    if t == 0.0 {
        0.5 * rc
    } else if t == 1.0 {
        r1.min(r2)
    } else if p2 == 0.0 {
        r1.min(rc)
    } else {
        best_share(r1, r2, rc)
    }
}

/// Grid search over `t` of the piecewise max-min objective.
///
/// The NOMA/RSMA boundary `gamma_gap / P` is evaluated under both
/// interpretations and the larger value kept.
pub fn grid_mmf(g: &EffectiveGains, total: f64, spec: &GridSpec) -> Result<GridOptimum> {
    spec.validate()?;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Invalid(format!("power budget must be positive, got {total}")));
    }
    let mut best_t = 0.0;
    let mut best = f64::NEG_INFINITY;
    let consider = |t: f64, v: f64, best_t: &mut f64, best: &mut f64| {
        if v > *best {
            *best = v;
            *best_t = t;
        }
    };

    let boundary = g.gamma_gap() / total;
    if boundary > 0.0 && boundary < 1.0 {
        let (p1, _) = private_powers(g, boundary * total);
        let (r1, _, rc) = stream_rates(g, p1, 0.0, (1.0 - boundary) * total);
        consider(boundary, r1.min(rc), &mut best_t, &mut best);
        consider(boundary, best_share(r1, 0.0, rc), &mut best_t, &mut best);
    }

    let n = (1.0 / spec.coarse_step).round().max(1.0) as usize;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        consider(t, objective(g, t, total), &mut best_t, &mut best);
    }
    let mut round_best = vec![best];

    let mut half_width = 1.0 / n as f64;
    let factor = spec.refine_factor as usize;
    for _ in 0..spec.refine_rounds {
        let center = best_t;
        let step = half_width / factor as f64;
        for k in 0..=2 * factor {
            let t = center - half_width + k as f64 * step;
            if (0.0..=1.0).contains(&t) {
                consider(t, objective(g, t, total), &mut best_t, &mut best);
            }
        }
        round_best.push(best);
        half_width = step;
    }
    Ok(GridOptimum {
        t: best_t,
        mmf: best,
        round_best,
    })
}

/// Best division of the common rate on a uniform grid of `c1` values.
pub fn grid_common_split(r: &RateTuple, step: f64) -> Result<CommonSplit> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Invalid(format!("step must be positive, got {step}")));
    }
    let rc = r.rc.max(0.0);
    let mut best = CommonSplit {
        c1: 0.0,
        c2: rc,
        mmf: r.r1.min(r.r2 + rc),
    };
    if rc == 0.0 {
        return Ok(best);
    }
    let n = (rc / step).ceil() as usize;
    for i in 0..=n {
        let c1 = (i as f64 * step).min(rc);
        let c2 = rc - c1;
        let v = (r.r1 + c1).min(r.r2 + c2);
        if v > best.mmf {
            best = CommonSplit { c1, c2, mmf: v };
        }
    }
    Ok(best)
}

fn power_point_value(g: &EffectiveGains, p1: f64, p2: f64, pc: f64) -> f64 {
    let (r1, r2, rc) = stream_rates(g, p1, p2, pc);
    best_share(r1, r2, rc)
}

fn check_power_grid(total: f64, n: usize) -> Result<()> {
    if !(2..=MAX_POWER_GRID).contains(&n) {
        return Err(Error::Invalid(format!(
            "power grid needs 2..={MAX_POWER_GRID} points per axis, got {n}"
        )));
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Invalid(format!("power budget must be positive, got {total}")));
    }
    Ok(())
}

fn coarse_power_grid(g: &EffectiveGains, total: f64, n: usize) -> Vec<Vec<f64>> {
    let h = total / (n - 1) as f64;
    (0..n)
        .map(|i| {
            (0..n - i)
                .map(|j| {
                    let (p1, p2) = (i as f64 * h, j as f64 * h);
                    power_point_value(g, p1, p2, (total - p1 - p2).max(0.0))
                })
                .collect()
        })
        .collect()
}

/// Grid cells that are no worse than any of their eight neighbours, best first.
fn local_maxima(values: &[Vec<f64>]) -> Vec<(f64, usize, usize)> {
    let at = |i: isize, j: isize| -> Option<f64> {
        let row = values.get(usize::try_from(i).ok()?)?;
        row.get(usize::try_from(j).ok()?).copied()
    };
    let mut peaks = Vec::new();
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (ii, jj) = (i as isize, j as isize);
            let is_peak = (-1..=1)
                .flat_map(|di| (-1..=1).map(move |dj| (di, dj)))
                .filter(|&d| d != (0, 0))
                .all(|(di, dj)| at(ii + di, jj + dj).is_none_or(|w| w <= v));
            if is_peak {
                peaks.push((v, i, j));
            }
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
    peaks
}

/// Max-min rate over the power simplex `P1 + P2 + Pc = P` sampled with `n`
/// points per axis, precoding directions fixed, no water-filling.
pub fn grid_power_3d(g: &EffectiveGains, total: f64, n: usize) -> Result<f64> {
    check_power_grid(total, n)?;
    Ok(coarse_power_grid(g, total, n)
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Number of coarse local maxima refined by [`grid_power_3d_refined`].
pub const REFINE_STARTS: usize = 16;

/// Cap on re-centred passes at one scale before [`grid_power_3d_refined`] shrinks.
const MAX_RECENTRE: usize = 200;

/// [`grid_power_3d`] followed by `rounds` tenfold local refinements around
/// each of the best [`REFINE_STARTS`] coarse local maxima. At each scale the
/// window is re-centred on the incumbent until it stops moving.
pub fn grid_power_3d_refined(g: &EffectiveGains, total: f64, n: usize, rounds: u32) -> Result<f64> {
    check_power_grid(total, n)?;
    let coarse_h = total / (n - 1) as f64;
    let values = coarse_power_grid(g, total, n);
    let mut overall = f64::NEG_INFINITY;
    for (v, i, j) in local_maxima(&values).into_iter().take(REFINE_STARTS) {
        let (mut best, mut b1, mut b2) = (v, i as f64 * coarse_h, j as f64 * coarse_h);
        let mut h = coarse_h;
        for _ in 0..rounds {
            let step = h / 10.0;
            for _ in 0..MAX_RECENTRE {
                let (c1, c2) = (b1, b2);
                for i in 0..=20 {
                    for j in 0..=20 {
                        let p1 = c1 - h + i as f64 * step;
                        let p2 = c2 - h + j as f64 * step;
                        let pc = total - p1 - p2;
                        if p1 < 0.0 || p2 < 0.0 || pc < -1e-12 * total {
                            continue;
                        }
                        let v = power_point_value(g, p1, p2, pc.max(0.0));
                        if v > best {
                            (best, b1, b2) = (v, p1, p2);
                        }
                    }
                }
                if (b1, b2) == (c1, c2) {
                    break;
                }
            }
            h = step;
        }
        overall = overall.max(best);
    }
    Ok(overall)
}
