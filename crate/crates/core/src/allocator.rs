//! Closed-form max-min fair allocation for the two-user rate-splitting downlink.
//!
//! With the precoding directions fixed, the whole allocation reduces to one
//! scalar: the fraction `t` of the power budget given to the private streams.
//! Water-filling splits `tP` between the private streams, the common rate is
//! divided between the users in closed form, and the optimal `t` is one of at
//! most six closed-form candidates. Evaluating those candidates and keeping the
//! best also selects among RSMA, NOMA, SDMA and multicast transmission.

use std::f64::consts::LN_2;
use std::fmt;

use serde::Serialize;

use crate::beamform::EffectiveGains;
use crate::error::{Error, Result};

/// Relative floor below which a candidate's denominator is treated as zero.
pub const DENOM_EPS: f64 = 1e-12;

/// Tolerance used by [`MmfSolution::validate`].
pub const VALIDATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Strategy {
    #[serde(rename = "RSMA")]
    Rsma,
    #[serde(rename = "NOMA")]
    Noma,
    #[serde(rename = "SDMA")]
    Sdma,
    Multicast,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Rsma, Strategy::Noma, Strategy::Sdma, Strategy::Multicast];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Rsma => "RSMA",
            Strategy::Noma => "NOMA",
            Strategy::Sdma => "SDMA",
            Strategy::Multicast => "Multicast",
        })
    }
}

/// Power split for a private-stream fraction `t` of the budget `total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSplit {
    pub t: f64,
    pub p1: f64,
    pub p2: f64,
    pub pc: f64,
    pub total: f64,
}

/// Water-filling of `tP` over the two private streams.
///
/// User 1 takes everything until the private power exceeds `gamma_gap`; after
/// that the excess is shared equally.
pub fn water_fill(g: &EffectiveGains, t: f64, total: f64) -> PowerSplit {
    let private = t * total;
    let gap = g.gamma_gap();
    let (p1, p2) = if private <= gap {
        (private, 0.0)
    } else {
        (0.5 * (private + gap), 0.5 * (private - gap))
    };
    PowerSplit {
        t,
        p1,
        p2,
        pc: (1.0 - t) * total,
        total,
    }
}

/// Achievable rates in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateTuple {
    pub r1: f64,
    pub r2: f64,
    pub rc1: f64,
    pub rc2: f64,
    pub rc: f64,
}

impl RateTuple {
    /// Tuple with both common decoding rates equal to `rc`.
    pub fn from_triple(r1: f64, r2: f64, rc: f64) -> Self {
        Self {
            r1,
            r2,
            rc1: rc,
            rc2: rc,
            rc,
        }
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Private and common rates at a given split. The common stream is decoded
/// first, treating the user's own private stream as noise.
pub fn rates_at(g: &EffectiveGains, split: &PowerSplit) -> RateTuple {
    let s1 = g.rho1() * split.p1;
    let s2 = g.rho2() * split.p2;
    let rc1 = log2_1p(g.rho_c1() * split.pc / (1.0 + s1));
    let rc2 = log2_1p(g.rho_c2() * split.pc / (1.0 + s2));
    RateTuple {
        r1: log2_1p(s1),
        r2: log2_1p(s2),
        rc1,
        rc2,
        rc: rc1.min(rc2),
    }
}

/// Shares `c1 + c2` of the common rate and the resulting max-min rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommonSplit {
    pub c1: f64,
    pub c2: f64,
    pub mmf: f64,
}

/// Optimal division of the common rate: give it all to the weaker user while
/// the private-rate gap exceeds it, otherwise equalize the two totals.
///
/// Guarantees `c1, c2 >= 0` and `c1 + c2 <= rc` in floating point.
pub fn optimal_common_split(r: &RateTuple) -> CommonSplit {
    let rc = r.rc.max(0.0);
    let gap = r.r1 - r.r2;
    let (c1, mut c2) = if gap >= 0.0 {
        if rc <= gap {
            (0.0, rc)
        } else {
            let c1 = 0.5 * (rc - gap);
            (c1, rc - c1)
        }
    } else if rc <= -gap {
        (rc, 0.0)
    } else {
        let c2 = 0.5 * (rc + gap);
        (rc - c2, c2)
    };
    while c1 + c2 > rc && c2 > 0.0 {
        c2 = c2.next_down().max(0.0);
    }
    CommonSplit {
        c1,
        c2,
        mmf: (r.r1 + c1).min(r.r2 + c2),
    }
}

fn rsma_objective(r: &RateTuple) -> f64 {
    0.5 * (r.r1 + r.r2 + r.rc - (r.r1 - r.r2 - r.rc).max(0.0))
}

fn check_budget(total: f64) -> Result<()> {
    if total > 0.0 && total.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "power budget must be positive and finite, got {total}"
        )))
    }
}

/// Max-min rate of one strategy at private fraction `t`.
///
/// SDMA always uses `t = 1` and multicast `t = 0`, whatever `t` is passed.
/// NOMA needs `tP <= gamma_gap`, RSMA needs `gamma_gap / P < t < 1`.
pub fn strategy_mmf(g: &EffectiveGains, t: f64, total: f64, strategy: Strategy) -> Result<f64> {
    check_budget(total)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain {
            strategy: strategy.to_string(),
            interval: "[0, 1]".into(),
            t,
        });
    }
    let boundary = g.gamma_gap() / total;
    let region_error = |interval: String| Error::Domain {
        strategy: strategy.to_string(),
        interval,
        t,
    };
    let rates = |t| rates_at(g, &water_fill(g, t, total));
    match strategy {
        Strategy::Multicast => Ok(0.5 * rates(0.0).rc),
        Strategy::Sdma => Ok(rates(1.0).r2),
        Strategy::Noma => {
            if t * total > g.gamma_gap() {
                return Err(region_error(format!("[0, {}]", boundary.min(1.0))));
            }
            let r = rates(t);
            Ok(r.r1.min(r.rc))
        }
        Strategy::Rsma => {
            if t <= boundary || t >= 1.0 {
                return Err(region_error(format!("({boundary}, 1)")));
            }
            Ok(rsma_objective(&rates(t)))
        }
    }
}

/// Origin of a candidate private-power fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    /// `t = 0`.
    Multicast,
    /// `t = 1`.
    Sdma,
    /// `t = gamma_gap / P` evaluated with NOMA rate bookkeeping.
    NomaBoundary,
    /// `t = rho_c2 / (rho1 + rho_c2)`, where user 1's private rate meets the common rate.
    NomaCrossing,
    /// `t = gamma_gap / P` approached from the RSMA side (user 2 private power -> 0).
    RsmaBoundary,
    /// Where the common rate equals the private-rate gap `R1 - R2`.
    RsmaBranchEdge,
    /// Stationary point of the equal-totals RSMA objective.
    RsmaStationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub t: f64,
    pub strategy: Strategy,
    pub kind: CandidateKind,
}

fn denom_ok(denom: f64, eps: f64) -> bool {
    denom.is_finite() && denom.abs() > eps
}

/// Unclamped fraction at which `R_c = R1 - R2` inside the RSMA region.
pub fn rsma_branch_edge(g: &EffectiveGains, total: f64) -> Option<f64> {
    let (r1, r2, rc2, gap) = (g.rho1(), g.rho2(), g.rho_c2(), g.gamma_gap());
    let denom = (r1 - r2 + 2.0 * rc2) * total;
    let eps = DENOM_EPS * (r1 * total).max(1.0);
    let t = (2.0 * rc2 * total - (r1 + r2) * gap) / denom;
    (denom_ok(denom, eps) && t.is_finite()).then_some(t)
}

/// Unclamped stationary point of `(1 + rho1 P1)(1 + rho2 P2 + rho_c2 Pc)` in the RSMA region.
pub fn rsma_stationary_point(g: &EffectiveGains, total: f64) -> Option<f64> {
    let (r1, r2, rc2, gap) = (g.rho1(), g.rho2(), g.rho_c2(), g.gamma_gap());
    let denom = (r2 - 2.0 * rc2) * total;
    let eps = DENOM_EPS * (r1 * total).max(1.0);
    if !denom_ok(denom, eps) || !denom_ok(r1 * total, eps) {
        return None;
    }
    let t = (0.5 * r2 * gap - rc2 * total - 1.0) / denom - 1.0 / (r1 * total) - gap / (2.0 * total);
    t.is_finite().then_some(t)
}

/// Fraction at which `log2(1 + rho1 tP) = log2(1 + rho_c2 (1 - t) P)` with user 2 silent.
pub fn noma_crossing(g: &EffectiveGains) -> Option<f64> {
    let denom = g.rho1() + g.rho_c2();
    let t = g.rho_c2() / denom;
    (denom > 0.0 && t.is_finite()).then_some(t)
}

/// Candidate private-power fractions that contain the optimum.
///
/// Boundary points `0` and `1` are always present (only `0` for collinear
/// channels). Interior candidates are dropped when their denominator
/// vanishes and otherwise clamped into their strategy's region; candidates
/// clamped onto `0` or `1` coincide with the boundary points and are omitted.
pub fn candidate_splits(g: &EffectiveGains, total: f64) -> Vec<Candidate> {
    let mut out = vec![Candidate {
        t: 0.0,
        strategy: Strategy::Multicast,
        kind: CandidateKind::Multicast,
    }];
    if g.is_collinear() || !(total > 0.0) {
        return out;
    }
    out.push(Candidate {
        t: 1.0,
        strategy: Strategy::Sdma,
        kind: CandidateKind::Sdma,
    });
    let mut push = |t: f64, strategy, kind| {
        if t > 0.0 && t < 1.0 && !out.iter().any(|c| c.t == t && c.strategy == strategy) {
            out.push(Candidate { t, strategy, kind });
        }
    };

    let boundary = g.gamma_gap() / total;
    if boundary > 0.0 {
        push(boundary, Strategy::Noma, CandidateKind::NomaBoundary);
        if let Some(t) = noma_crossing(g) {
            push(
                t.clamp(0.0, boundary.min(1.0)),
                Strategy::Noma,
                CandidateKind::NomaCrossing,
            );
        }
    }
    if boundary < 1.0 {
        push(boundary, Strategy::Rsma, CandidateKind::RsmaBoundary);
        if let Some(t) = rsma_branch_edge(g, total) {
            push(t.clamp(boundary, 1.0), Strategy::Rsma, CandidateKind::RsmaBranchEdge);
        }
        if let Some(t) = rsma_stationary_point(g, total) {
            push(t.clamp(boundary, 1.0), Strategy::Rsma, CandidateKind::RsmaStationary);
        }
    }
    out
}

/// A fully evaluated allocation for one strategy at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Allocation {
    pub strategy: Strategy,
    pub split: PowerSplit,
    pub rates: RateTuple,
    pub c1: f64,
    pub c2: f64,
    pub user_totals: [f64; 2],
    pub mmf: f64,
}

/// Evaluates a strategy at `t` without region checks; SDMA and multicast
/// force `t = 1` and `t = 0`.
///
/// Common-rate bookkeeping: RSMA and multicast use the optimal split, NOMA
/// credits the whole common rate to user 2, SDMA has no common rate.
pub fn allocate(g: &EffectiveGains, t: f64, total: f64, strategy: Strategy) -> Allocation {
    let t = match strategy {
        Strategy::Multicast => 0.0,
        Strategy::Sdma => 1.0,
        _ => t,
    };
    let split = water_fill(g, t, total);
    let rates = rates_at(g, &split);
    let (c1, c2) = match strategy {
        Strategy::Rsma | Strategy::Multicast => {
            let s = optimal_common_split(&rates);
            (s.c1, s.c2)
        }
        Strategy::Noma => (0.0, rates.rc),
        Strategy::Sdma => (0.0, 0.0),
    };
    let user_totals = [rates.r1 + c1, rates.r2 + c2];
    Allocation {
        strategy,
        split,
        rates,
        c1,
        c2,
        user_totals,
        mmf: user_totals[0].min(user_totals[1]),
    }
}

/// Diagnostic record of one evaluated candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateReport {
    pub t: f64,
    pub strategy: Strategy,
    pub kind: CandidateKind,
    pub mmf: f64,
    /// `R_c > R1 - R2` at this point, i.e. the optimal common split equalizes the totals.
    pub equalizing_branch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmfSolution {
    pub strategy: Strategy,
    pub kind: CandidateKind,
    pub t_opt: f64,
    pub c1: f64,
    pub c2: f64,
    pub split: PowerSplit,
    pub rates: RateTuple,
    pub user_totals: [f64; 2],
    pub mmf: f64,
    /// `gamma_gap / P`: NOMA occupies `(0, boundary]`, RSMA `(boundary, 1)`.
    /// Infinite for collinear channels (serialized as `null`).
    pub region_boundary: f64,
    pub candidates: Vec<CandidateReport>,
}

/// Best value of each strategy among the evaluated candidates.
///
/// `rsma` is the supremum of the RSMA objective over its region, which by
/// continuity includes the SDMA point (and the multicast point when
/// `gamma_gap = 0`). `None` marks a strategy whose region is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyBest {
    pub rsma: Option<f64>,
    pub noma: Option<f64>,
    pub sdma: f64,
    pub multicast: f64,
}

impl StrategyBest {
    pub fn value(&self, s: Strategy) -> f64 {
        match s {
            Strategy::Rsma => self.rsma.unwrap_or(0.0),
            Strategy::Noma => self.noma.unwrap_or(0.0),
            Strategy::Sdma => self.sdma,
            Strategy::Multicast => self.multicast,
        }
    }

    /// Best of SDMA, NOMA and multicast, i.e. dynamic switching without rate splitting.
    pub fn switching_best(&self) -> f64 {
        self.noma.unwrap_or(0.0).max(self.sdma).max(self.multicast)
    }

    /// `(RSMA - switching) / switching` in percent; zero when RSMA has no region.
    pub fn relative_gain_pct(&self) -> f64 {
        match self.rsma {
            Some(r) => {
                let base = self.switching_best();
                if base > 0.0 {
                    100.0 * (r - base) / base
                } else {
                    0.0
                }
            }
            None => 0.0,
        }
    }

    /// Relative gain of RSMA over one other strategy in percent, if both are available.
    pub fn gain_over_pct(&self, other: Strategy) -> Option<f64> {
        let r = self.rsma?;
        let base = match other {
            Strategy::Noma => self.noma?,
            s => self.value(s),
        };
        (base > 0.0).then(|| 100.0 * (r - base) / base)
    }
}

impl MmfSolution {
    /// True when water-filling never serves user 2, so RSMA cannot be activated.
    pub fn rsma_region_empty(&self) -> bool {
        !(self.region_boundary < 1.0)
    }

    pub fn strategy_best(&self) -> StrategyBest {
        let best_of = |s: Strategy| {
            self.candidates
                .iter()
                .filter(|c| c.strategy == s)
                .map(|c| c.mmf)
                .reduce(f64::max)
        };
        let sdma = best_of(Strategy::Sdma).unwrap_or(0.0);
        let multicast = best_of(Strategy::Multicast).unwrap_or(0.0);
        let rsma = if self.rsma_region_empty() {
            None
        } else {
            let mut v = best_of(Strategy::Rsma).unwrap_or(f64::NEG_INFINITY).max(sdma);
            if self.region_boundary == 0.0 {
                v = v.max(multicast);
            }
            Some(v)
        };
        StrategyBest {
            rsma,
            noma: best_of(Strategy::Noma),
            sdma,
            multicast,
        }
    }

    /// Re-checks the feasibility and consistency invariants of the solution.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        let s = &self.split;
        let tol_p = VALIDATION_TOL * s.total;
        if !(0.0..=1.0).contains(&self.t_opt) || s.t != self.t_opt {
            return fail(format!("t = {} outside [0, 1]", self.t_opt));
        }
        if [s.p1, s.p2, s.pc].iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return fail(format!("negative or non-finite power in {s:?}"));
        }
        if (s.p1 + s.p2 + s.pc - s.total).abs() > tol_p {
            return fail(format!("powers do not sum to the budget: {s:?}"));
        }
        if (s.p1 + s.p2 - s.t * s.total).abs() > tol_p || (s.pc - (1.0 - s.t) * s.total).abs() > tol_p {
            return fail(format!("split inconsistent with t: {s:?}"));
        }
        if s.p1 < s.p2 {
            return fail(format!("water-filling gave the weaker user more power: {s:?}"));
        }
        let r = &self.rates;
        if [r.r1, r.r2, r.rc1, r.rc2, r.rc]
            .iter()
            .any(|x| *x < 0.0 || !x.is_finite())
        {
            return fail(format!("invalid rates {r:?}"));
        }
        if r.rc != r.rc1.min(r.rc2) {
            return fail(format!("common rate is not the minimum decoding rate: {r:?}"));
        }
        if self.c1 < 0.0 || self.c2 < 0.0 || self.c1 + self.c2 > r.rc + VALIDATION_TOL {
            return fail(format!(
                "common split ({}, {}) infeasible for R_c = {}",
                self.c1, self.c2, r.rc
            ));
        }
        if self.mmf != self.user_totals[0].min(self.user_totals[1]) {
            return fail(format!(
                "mmf {} differs from min of totals {:?}",
                self.mmf, self.user_totals
            ));
        }
        if let Some(c) = self.candidates.iter().find(|c| c.mmf > self.mmf) {
            return fail(format!("candidate {c:?} beats the reported optimum {}", self.mmf));
        }
        Ok(())
    }
}

/// Solves the max-min fair allocation in closed form.
pub fn solve_mmf(g: &EffectiveGains, total: f64) -> Result<MmfSolution> {
    check_budget(total)?;
    let candidates = candidate_splits(g, total);
    solve_with_candidates(g, total, &candidates)
}

/// Evaluates an explicit candidate list and keeps the best. Ties keep the
/// earliest candidate.
pub fn solve_with_candidates(g: &EffectiveGains, total: f64, candidates: &[Candidate]) -> Result<MmfSolution> {
    check_budget(total)?;
    let mut best: Option<(Allocation, Candidate)> = None;
    let mut reports = Vec::with_capacity(candidates.len());
    for &cand in candidates {
        if !(0.0..=1.0).contains(&cand.t) {
            return Err(Error::Invalid(format!("candidate t = {} outside [0, 1]", cand.t)));
        }
        let alloc = allocate(g, cand.t, total, cand.strategy);
        reports.push(CandidateReport {
            t: alloc.split.t,
            strategy: cand.strategy,
            kind: cand.kind,
            mmf: alloc.mmf,
            equalizing_branch: alloc.rates.rc > alloc.rates.r1 - alloc.rates.r2,
        });
        if best.as_ref().is_none_or(|(b, _)| alloc.mmf > b.mmf) {
            best = Some((alloc, cand));
        }
    }
    let (alloc, cand) = best.ok_or_else(|| Error::Invalid("no candidates to evaluate".into()))?;
    Ok(MmfSolution {
        strategy: alloc.strategy,
        kind: cand.kind,
        t_opt: alloc.split.t,
        c1: alloc.c1,
        c2: alloc.c2,
        split: alloc.split,
        rates: alloc.rates,
        user_totals: alloc.user_totals,
        mmf: alloc.mmf,
        region_boundary: g.gamma_gap() / total,
        candidates: reports,
    })
}

/// High-SNR limits of the RSMA-over-SDMA max-min gain at the two RSMA
/// candidates: `(gap at branch edge, gap at stationary point)`.
///
/// Requires partially correlated channels (`0 < rho < 1`) of unequal strength.
pub fn high_snr_gaps(g: &EffectiveGains) -> Result<(f64, f64)> {
    let (r1, r2, rc2) = (g.rho1(), g.rho2(), g.rho_c2());
    if g.is_collinear() || g.rho() >= 1.0 {
        return Err(Error::Invalid(format!(
            "high-SNR gaps need partially correlated channels, got rho = {}",
            g.rho()
        )));
    }
    if r1 <= r2 {
        return Err(Error::Invalid(
            "high-SNR gaps need users of unequal channel strength".into(),
        ));
    }
    let gap1 = (2.0 * r1 * rc2 / (r2 * (r1 - r2 + 2.0 * rc2))).log2();
    let gap2 = 0.5 * (r1 * rc2 * rc2 / (r2 * r2 * (2.0 * rc2 - r2))).log2();
    Ok((gap1, gap2))
}
