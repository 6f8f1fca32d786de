//! Experiment drivers: rate-vs-SNR sweeps, strategy region maps, timing
//! runs and oracle cross-validation, plus their CSV/JSON writers.
//!
//! SNR convention: noise power is 1, so `P = 10^(SNR_dB / 10)`.

use std::hint::black_box;
use std::io;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::allocator::{candidate_splits, solve_mmf, solve_with_candidates, CandidateKind, MmfSolution, Strategy};
use crate::beamform::{effective_gains, EffectiveGains};
use crate::channel::{
    make_region_channel, sample_gaussian_ensemble, theta_for_rho, ChannelEnsembleSpec, ChannelPair, ChannelRecord,
};
use crate::error::{Error, Result};
use crate::oracle::{grid_mmf, GridSpec};
use crate::snr_db_to_power;

/// Version string of the form `v<version>-g<commit>[-dirty]`.
pub const VERSION: &str = env!("RSMA_MMF_VERSION");

pub const SNR_CONVENTION: &str = "SNR_dB = 10 log10(P), unit noise power";

pub const MIN_TIMING_COUNT: usize = 100;

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::Invalid(format!("{name} must not be empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("{name} contains non-finite values")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

fn solve_checked(g: &EffectiveGains, total: f64) -> Result<MmfSolution> {
    let sol = solve_mmf(g, total)?;
    sol.validate()?;
    Ok(sol)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

// ---------------------------------------------------------------------------
// SNR sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub snr_db_list: Vec<f64>,
    pub ensemble: ChannelEnsembleSpec,
    /// Also report each strategy's standalone best.
    pub per_strategy: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            snr_db_list: linspace(0.0, 30.0, 7),
            ensemble: ChannelEnsembleSpec::default(),
            per_strategy: true,
        }
    }
}

/// Rows of a sweep. Every series comes from the closed-form allocator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Series {
    Proposed,
    Only(Strategy),
}

impl Series {
    pub fn label(&self) -> &'static str {
        match self {
            Series::Proposed => "proposed-closed-form",
            Series::Only(Strategy::Rsma) => "rsma-closed-form",
            Series::Only(Strategy::Noma) => "noma-closed-form",
            Series::Only(Strategy::Sdma) => "sdma-closed-form",
            Series::Only(Strategy::Multicast) => "multicast-closed-form",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub strategy: String,
    pub mean_mmf_bits: f64,
}

pub fn run_snr_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    check_axis("snr_db_list", &spec.snr_db_list)?;
    let channels = sample_gaussian_ensemble(&spec.ensemble)?;
    run_sweep_on(&channels, &spec.snr_db_list, spec.per_strategy)
}

/// Ensemble-mean max-min rate per SNR over a fixed channel set.
///
/// Strategies with an empty region on a channel contribute zero for it.
pub fn run_sweep_on(channels: &[ChannelPair], snr_db_list: &[f64], per_strategy: bool) -> Result<Vec<SweepRow>> {
    check_axis("snr_db_list", snr_db_list)?;
    if channels.is_empty() {
        return Err(Error::Invalid("sweep needs at least one channel".into()));
    }
    let gains: Vec<EffectiveGains> = channels.par_iter().map(effective_gains).collect();
    let mut series = vec![Series::Proposed];
    if per_strategy {
        series.extend(Strategy::ALL.map(Series::Only));
    }
    let mut rows = Vec::with_capacity(snr_db_list.len() * series.len());
    for &snr_db in snr_db_list {
        let total = snr_db_to_power(snr_db);
        let solutions: Vec<MmfSolution> = gains
            .par_iter()
            .map(|g| solve_checked(g, total))
            .collect::<Result<_>>()?;
        for s in &series {
            let sum: f64 = solutions
                .iter()
                .map(|sol| match s {
                    Series::Proposed => sol.mmf,
                    Series::Only(st) => sol.strategy_best().value(*st),
                })
                .sum();
            rows.push(SweepRow {
                snr_db,
                strategy: s.label().to_string(),
                mean_mmf_bits: sum / solutions.len() as f64,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Region maps
// ---------------------------------------------------------------------------

/// Cells of the two-antenna parametric family, indexed by the correlation
/// measure `rho` and the strength ratio `gamma_db`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSpec {
    pub rho_axis: Vec<f64>,
    pub gamma_db_axis: Vec<f64>,
    pub snr_db: f64,
}

impl RegionSpec {
    /// `rho` in `[0.01, 1]`, `gamma_db` in `[-20, 0]`.
    pub fn uniform(snr_db: f64, n_rho: usize, n_gamma: usize) -> Self {
        Self {
            rho_axis: linspace(0.01, 1.0, n_rho),
            gamma_db_axis: linspace(-20.0, 0.0, n_gamma),
            snr_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("rho_axis", &self.rho_axis)?;
        check_axis("gamma_db_axis", &self.gamma_db_axis)?;
        if self.rho_axis.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::Invalid("rho_axis must lie in (0, 1]".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Invalid("snr_db must be finite".into()));
        }
        Ok(())
    }
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self::uniform(30.0, 101, 101)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCell {
    pub rho: f64,
    pub gamma_db: f64,
    pub t_opt: f64,
    pub strategy: Strategy,
    pub rel_gain_pct: f64,
    pub gain_vs_sdma_pct: Option<f64>,
    pub gain_vs_noma_pct: Option<f64>,
    pub gain_vs_multicast_pct: Option<f64>,
}

/// Solves every cell; cells are ordered by `gamma_db`, then `rho`.
pub fn run_region_map(spec: &RegionSpec) -> Result<Vec<RegionCell>> {
    spec.validate()?;
    let total = snr_db_to_power(spec.snr_db);
    let coords: Vec<(f64, f64)> = spec
        .gamma_db_axis
        .iter()
        .flat_map(|&gdb| spec.rho_axis.iter().map(move |&rho| (rho, gdb)))
        .collect();
    coords
        .par_iter()
        .map(|&(rho, gamma_db)| {
            let ch = make_region_channel(gamma_db, theta_for_rho(rho))?;
            let sol = solve_checked(&effective_gains(&ch), total)?;
            let best = sol.strategy_best();
            Ok(RegionCell {
                rho,
                gamma_db,
                t_opt: sol.t_opt,
                strategy: sol.strategy,
                rel_gain_pct: best.relative_gain_pct(),
                gain_vs_sdma_pct: best.gain_over_pct(Strategy::Sdma),
                gain_vs_noma_pct: best.gain_over_pct(Strategy::Noma),
                gain_vs_multicast_pct: best.gain_over_pct(Strategy::Multicast),
            })
        })
        .collect()
}

/// Number of cells with the given strategy whose `gamma_db` lies strictly inside `(lo, hi)`.
pub fn count_strategy_in_band(cells: &[RegionCell], strategy: Strategy, lo: f64, hi: f64) -> (usize, usize) {
    let band: Vec<_> = cells.iter().filter(|c| c.gamma_db > lo && c.gamma_db < hi).collect();
    (band.iter().filter(|c| c.strategy == strategy).count(), band.len())
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub count: usize,
    pub snr_db: f64,
    pub mean_us: f64,
    pub p99_us: f64,
}

/// Wall-clock time of gain computation plus closed-form solve per channel,
/// measured on the calling thread. Channel generation is excluded.
pub fn run_timing(count: usize, snr_db: f64, seed: u64) -> Result<TimingStats> {
    if count < MIN_TIMING_COUNT {
        return Err(Error::Invalid(format!(
            "timing needs at least {MIN_TIMING_COUNT} channels, got {count}"
        )));
    }
    let channels = sample_gaussian_ensemble(&ChannelEnsembleSpec {
        count,
        seed,
        ..Default::default()
    })?;
    let total = snr_db_to_power(snr_db);
    let mut samples_us = Vec::with_capacity(count);
    for ch in &channels {
        let start = Instant::now();
        let g = effective_gains(black_box(ch));
        let sol = solve_mmf(&g, total)?;
        black_box(&sol);
        samples_us.push(start.elapsed().as_secs_f64() * 1e6);
    }
    let mean_us = samples_us.iter().sum::<f64>() / count as f64;
    samples_us.sort_by(f64::total_cmp);
    let idx = ((0.99 * count as f64).ceil() as usize).clamp(1, count) - 1;
    Ok(TimingStats {
        count,
        snr_db,
        mean_us,
        p99_us: samples_us[idx],
    })
}

// ---------------------------------------------------------------------------
// Oracle cross-validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySpec {
    pub ensemble: ChannelEnsembleSpec,
    pub snr_db_list: Vec<f64>,
    pub grid: GridSpec,
    pub tolerance: f64,
    /// Debug aid: shift every interior candidate before solving, which must
    /// make the cross-check fail.
    pub inject_fault: bool,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            ensemble: ChannelEnsembleSpec {
                count: 1000,
                ..Default::default()
            },
            snr_db_list: vec![0.0, 10.0, 20.0, 30.0],
            grid: GridSpec::default(),
            tolerance: 1e-3,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyCase {
    pub snr_db: f64,
    pub channel: ChannelRecord,
    pub closed_form_mmf: f64,
    pub closed_form_t: f64,
    pub closed_form_strategy: Strategy,
    pub grid_mmf: f64,
    pub grid_t: f64,
}

impl VerifyCase {
    pub fn deviation(&self) -> f64 {
        (self.closed_form_mmf - self.grid_mmf).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub instances: usize,
    pub max_abs_deviation: f64,
    pub failures: usize,
    pub tolerance: f64,
    pub worst: Option<VerifyCase>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn faulty_solve(g: &EffectiveGains, total: f64) -> Result<MmfSolution> {
    let mut cands = candidate_splits(g, total);
    for c in cands.iter_mut() {
        if !matches!(c.kind, CandidateKind::Multicast | CandidateKind::Sdma) {
            c.t = (c.t + 0.05).min(1.0);
        }
    }
    solve_with_candidates(g, total, &cands)
}

/// Compares the closed-form optimum with the t-grid oracle on every channel
/// and SNR of the spec.
pub fn run_verification(spec: &VerifySpec) -> Result<VerifyReport> {
    check_axis("snr_db_list", &spec.snr_db_list)?;
    spec.grid.validate()?;
    let channels = sample_gaussian_ensemble(&spec.ensemble)?;
    let jobs: Vec<(f64, &ChannelPair)> = spec
        .snr_db_list
        .iter()
        .flat_map(|&s| channels.iter().map(move |c| (s, c)))
        .collect();
    let cases: Vec<VerifyCase> = jobs
        .par_iter()
        .map(|&(snr_db, ch)| {
            let total = snr_db_to_power(snr_db);
            let g = effective_gains(ch);
            let sol = if spec.inject_fault {
                faulty_solve(&g, total)?
            } else {
                solve_checked(&g, total)?
            };
            let grid = grid_mmf(&g, total, &spec.grid)?;
            Ok(VerifyCase {
                snr_db,
                channel: ch.to_record(),
                closed_form_mmf: sol.mmf,
                closed_form_t: sol.t_opt,
                closed_form_strategy: sol.strategy,
                grid_mmf: grid.mmf,
                grid_t: grid.t,
            })
        })
        .collect::<Result<_>>()?;
    let failures = cases.iter().filter(|c| !(c.deviation() <= spec.tolerance)).count();
    let worst = cases
        .iter()
        .max_by(|a, b| a.deviation().total_cmp(&b.deviation()))
        .cloned();
    Ok(VerifyReport {
        instances: cases.len(),
        max_abs_deviation: worst.as_ref().map_or(0.0, VerifyCase::deviation),
        failures,
        tolerance: spec.tolerance,
        worst,
    })
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// Provenance record written next to every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub method: &'static str,
    pub snr_convention: &'static str,
    pub config: &'a C,
}

impl<'a, C: Serialize> RunMetadata<'a, C> {
    pub fn new(command: &'a str, config: &'a C) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: VERSION,
            command,
            method: "closed-form",
            snr_convention: SNR_CONVENTION,
            config,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }
}

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// `snr_db,strategy,mean_mmf_bits`
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    to_csv(rows)
}

#[derive(Serialize)]
struct RegionRecord {
    rho: f64,
    gamma_db: f64,
    t_opt: f64,
    strategy: Strategy,
    rel_gain_pct: f64,
}

/// `rho,gamma_db,t_opt,strategy,rel_gain_pct`
pub fn region_csv(cells: &[RegionCell]) -> String {
    to_csv(cells.iter().map(|c| RegionRecord {
        rho: c.rho,
        gamma_db: c.gamma_db,
        t_opt: c.t_opt,
        strategy: c.strategy,
        rel_gain_pct: c.rel_gain_pct,
    }))
}

#[derive(Serialize)]
struct GainRecord {
    rho: f64,
    gamma_db: f64,
    rel_gain_pct: f64,
    gain_vs_sdma_pct: Option<f64>,
    gain_vs_noma_pct: Option<f64>,
    gain_vs_multicast_pct: Option<f64>,
}

/// `rho,gamma_db,rel_gain_pct,gain_vs_sdma_pct,gain_vs_noma_pct,gain_vs_multicast_pct`;
/// gains against an unavailable strategy are left empty.
pub fn gain_map_csv(cells: &[RegionCell]) -> String {
    to_csv(cells.iter().map(|c| GainRecord {
        rho: c.rho,
        gamma_db: c.gamma_db,
        rel_gain_pct: c.rel_gain_pct,
        gain_vs_sdma_pct: c.gain_vs_sdma_pct,
        gain_vs_noma_pct: c.gain_vs_noma_pct,
        gain_vs_multicast_pct: c.gain_vs_multicast_pct,
    }))
}

#[derive(Serialize)]
struct TimingRecord {
    count: usize,
    mean_us: f64,
    p99_us: f64,
}

/// `count,mean_us,p99_us`
pub fn timing_csv(stats: &[TimingStats]) -> String {
    to_csv(stats.iter().map(|s| TimingRecord {
        count: s.count,
        mean_us: s.mean_us,
        p99_us: s.p99_us,
    }))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, contents: &[u8]) -> io::Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
