//! Monte Carlo drivers: logical-failure-rate estimation with confidence
//! intervals, pseudo-threshold extraction by bisection, and the memory-chain
//! experiment producing the failure-rate-reduction factor `R(alpha, N)` and
//! its crossover `N(R=1)`.
//!
//! Trials are distributed over a rayon pool; each trial owns an RNG stream
//! derived from (seed, trial index), so aggregates are identical under any
//! worker count and CSV output is reproducible apart from the wall-time
//! column.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builders::{self, ChainVariant};
use crate::circuit::Probe;
use crate::code::SubsystemCode;
use crate::engine::{trial_rng, Engine, ProbeRunner};
use crate::noise::{FaultAssignment, NoiseModel};
use crate::{Error, Result};

/// Which physical error type an experiment sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorType {
    Z,
    X,
}

impl std::fmt::Display for ErrorType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ErrorType::Z => write!(f, "z"),
            ErrorType::X => write!(f, "x"),
        }
    }
}

/// Shared progress counters for long-running jobs.
#[derive(Clone, Default)]
pub struct Progress(Option<Arc<(AtomicU64, AtomicU64)>>);

impl Progress {
    pub fn none() -> Self {
        Self(None)
    }

    pub fn new() -> Self {
        Self(Some(Arc::new((AtomicU64::new(0), AtomicU64::new(0)))))
    }

    pub fn add_total(&self, n: u64) {
        if let Some(c) = &self.0 {
            c.1.fetch_add(n, Ordering::Relaxed);
        }
    }

    pub fn tick(&self, n: u64) {
        if let Some(c) = &self.0 {
            c.0.fetch_add(n, Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> (u64, u64) {
        match &self.0 {
            Some(c) => (c.0.load(Ordering::Relaxed), c.1.load(Ordering::Relaxed)),
            None => (0, 0),
        }
    }
}

/// Wilson score interval at 95%.
pub fn wilson(fails: u64, trials: u64) -> (f64, f64, f64) {
    if trials == 0 {
        return (0.0, 0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = fails as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (p, (center - half).max(0.0), (center + half).min(1.0))
}

/// Failure counts for one probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub trials: u64,
    pub fails: u64,
}

impl ProbeStats {
    pub fn est(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.fails as f64 / self.trials as f64
        }
    }

    pub fn wilson(&self) -> (f64, f64, f64) {
        wilson(self.fails, self.trials)
    }
}

/// Aggregated failure estimate over both probes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FailureEstimate {
    /// `|+_L>` probe: counts logical-Z failures.
    pub z: ProbeStats,
    /// `|0_L>` probe: counts logical-X failures.
    pub x: ProbeStats,
    pub locations: u64,
    pub wall_ms: u64,
}

impl FailureEstimate {
    /// Total failure probability `1 - (1-f_x)(1-f_z)`.
    pub fn total_est(&self) -> f64 {
        1.0 - (1.0 - self.x.est()) * (1.0 - self.z.est())
    }

    /// Conservative CI combining the per-probe Wilson intervals.
    pub fn total_ci(&self) -> (f64, f64) {
        let (_, zl, zh) = self.z.wilson();
        let (_, xl, xh) = self.x.wilson();
        (1.0 - (1.0 - xl) * (1.0 - zl), 1.0 - (1.0 - xh) * (1.0 - zh))
    }
}

/// One CSV row. Schema (header mandatory):
/// `experiment,code,alpha,pz,px,N,rz,rx,trials,seed,fail_z,fail_x,fail_total,est,ci_low,ci_high,locations,wall_ms`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub code: String,
    pub alpha: f64,
    pub pz: f64,
    pub px: f64,
    pub n_cycles: u32,
    pub rz: u32,
    pub rx: u32,
    pub trials: u64,
    pub seed: u64,
    pub fail_z: u64,
    pub fail_x: u64,
    pub fail_total: u64,
    pub est: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub locations: u64,
    pub wall_ms: u64,
}

pub const CSV_HEADER: &str =
    "experiment,code,alpha,pz,px,N,rz,rx,trials,seed,fail_z,fail_x,fail_total,est,ci_low,ci_high,locations,wall_ms";

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.code,
            self.alpha,
            self.pz,
            self.px,
            self.n_cycles,
            self.rz,
            self.rx,
            self.trials,
            self.seed,
            self.fail_z,
            self.fail_x,
            self.fail_total,
            self.est,
            self.ci_low,
            self.ci_high,
            self.locations,
            self.wall_ms
        )
    }
}

/// Serializes rows to the canonical CSV document.
pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// CSV with the wall-time column blanked, for byte-identity comparisons
/// (wall time is the one legitimately non-reproducible column).
pub fn csv_without_wall(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rfind(',') {
            Some(i) => format!("{},-", &line[..i]),
            None => line.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Family of circuits an estimate runs over (one build per probe).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CircuitFamily {
    MemoryExrec { n1: u16, n2: u16, rz: u32, rx: u32 },
    Chain { variant: ChainVariant, n_cycles: u32, rz: u32, rx: u32 },
}

impl CircuitFamily {
    pub fn experiment_label(&self) -> String {
        match self {
            CircuitFamily::MemoryExrec { .. } => "exrec".into(),
            CircuitFamily::Chain { variant, .. } => format!("chain-{variant}"),
        }
    }

    pub fn code_label(&self) -> String {
        match self {
            CircuitFamily::MemoryExrec { n1, n2, .. } => format!("C({n1},{n2})"),
            CircuitFamily::Chain { variant, .. } => match variant {
                ChainVariant::Plain33 => "C(3,3)".into(),
                ChainVariant::Combined => "C(3,3)+C(5,3)".into(),
            },
        }
    }

    pub fn reps(&self) -> (u32, u32) {
        match self {
            CircuitFamily::MemoryExrec { rz, rx, .. } | CircuitFamily::Chain { rz, rx, .. } => {
                (*rz, *rx)
            }
        }
    }

    pub fn n_cycles(&self) -> u32 {
        match self {
            CircuitFamily::MemoryExrec { .. } => 0,
            CircuitFamily::Chain { n_cycles, .. } => *n_cycles,
        }
    }

    fn build_runner(&self, probe: Probe) -> Result<ProbeRunner> {
        match *self {
            CircuitFamily::MemoryExrec { n1, n2, rz, rx } => {
                let code = SubsystemCode::new(n1, n2)?;
                let circ = builders::memory_exrec(&code, rz, rx, probe)?;
                ProbeRunner::new(circ, &code, probe)
            }
            CircuitFamily::Chain { variant, n_cycles, rz, rx } => {
                let code_out = SubsystemCode::new(3, 3)?;
                let circ = builders::chain_circuit(variant, n_cycles, rz, rx, probe)?;
                ProbeRunner::new(circ, &code_out, probe)
            }
        }
    }
}

fn run_probe(
    runner: &ProbeRunner,
    model: &NoiseModel,
    trials: u64,
    seed: u64,
    stream_base: u64,
    progress: &Progress,
) -> u64 {
    (0..trials)
        .into_par_iter()
        .map_init(
            || (Engine::new(), FaultAssignment::empty()),
            |(engine, scratch), t| {
                let mut rng = trial_rng(seed, stream_base + t);
                let res = runner
                    .run_noisy_trial(engine, model, &mut rng, scratch)
                    .expect("trial execution");
                progress.tick(1);
                res.failed as u64
            },
        )
        .sum()
}

/// Estimates the logical failure rate of a circuit family under the model:
/// `trials/2` runs of the `|0_L>` probe (x-type failures) and `trials/2` of
/// the `|+_L>` probe (z-type failures).
pub fn estimate_failure(
    family: &CircuitFamily,
    model: &NoiseModel,
    trials: u64,
    seed: u64,
    progress: &Progress,
) -> Result<FailureEstimate> {
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let start = Instant::now();
    let trials_x = trials / 2;
    let trials_z = trials - trials_x;
    progress.add_total(trials);
    let runner_x = family.build_runner(Probe::Zero)?;
    let runner_z = family.build_runner(Probe::Plus)?;
    let fails_x = run_probe(&runner_x, model, trials_x, seed, 0, progress);
    let fails_z = run_probe(&runner_z, model, trials_z, seed, trials_x, progress);
    Ok(FailureEstimate {
        z: ProbeStats { trials: trials_z, fails: fails_z },
        x: ProbeStats { trials: trials_x, fails: fails_x },
        locations: runner_z.fault_location_count() as u64,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// Packs an estimate into a CSV row.
pub fn to_row(
    family: &CircuitFamily,
    model: &NoiseModel,
    seed: u64,
    est: &FailureEstimate,
) -> ResultRow {
    let (ci_low, ci_high) = est.total_ci();
    let (rz, rx) = family.reps();
    ResultRow {
        experiment: family.experiment_label(),
        code: family.code_label(),
        alpha: model.alpha(),
        pz: model.p_z,
        px: model.p_x,
        n_cycles: family.n_cycles(),
        rz,
        rx,
        trials: est.z.trials + est.x.trials,
        seed,
        fail_z: est.z.fails,
        fail_x: est.x.fails,
        fail_total: est.z.fails + est.x.fails,
        est: est.total_est(),
        ci_low,
        ci_high,
        locations: est.locations,
        wall_ms: est.wall_ms,
    }
}

/// Ordinary least squares slope of `ln f` against `ln p`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(p, f)| *p > 0.0 && *f > 0.0)
        .map(|&(p, f)| (p.ln(), f.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Options controlling the pseudo-threshold search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub bracket: (f64, f64),
    pub base_trials: u64,
    pub max_trials: u64,
    /// Stop once `hi/lo - 1` falls below this.
    pub rel_width: f64,
    pub max_evals: u32,
    pub rz: u32,
    pub rx: u32,
    /// When the crossing lies below the bracket (failure rates there are too
    /// small to resolve directly), locate it by fitting the power law in the
    /// measurable window and extrapolating; the result is labeled.
    pub allow_extrapolation: bool,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            bracket: (3e-5, 8e-2),
            base_trials: 40_000,
            max_trials: 1_000_000,
            rel_width: 0.3,
            max_evals: 22,
            rz: 3,
            rx: 3,
            allow_extrapolation: true,
        }
    }
}

/// Pseudo-threshold result: the crossing of `f_type(p) = p` on the memory
/// extended rectangle, with its final bracket and the evaluation trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub error_type: ErrorType,
    pub alpha: f64,
    pub p_star: f64,
    pub bracket: (f64, f64),
    /// Set when the crossing was located by power-law extrapolation rather
    /// than direct bisection.
    pub extrapolated: bool,
    /// Fitted log-log slope of the failure curve (extrapolated path).
    pub slope: Option<f64>,
    pub rows: Vec<ResultRow>,
}

enum Side {
    Below, // f(p) < p: error correction wins
    Above,
}

/// Variance-weighted least squares of `ln f` on `ln p` with binomial errors;
/// returns (intercept, slope, var_c, var_s, cov).
fn weighted_loglog_fit(points: &[(f64, u64, u64)]) -> (f64, f64, f64, f64, f64) {
    // var(ln f) ~ (1 - f) / (f n) ~ 1 / fails.
    let data: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|&&(_, fails, _)| fails > 0)
        .map(|&(p, fails, trials)| {
            let f = fails as f64 / trials as f64;
            (p.ln(), f.ln(), 1.0 / fails as f64)
        })
        .collect();
    let sw: f64 = data.iter().map(|d| 1.0 / d.2).sum();
    let sx: f64 = data.iter().map(|d| d.0 / d.2).sum();
    let sy: f64 = data.iter().map(|d| d.1 / d.2).sum();
    let sxx: f64 = data.iter().map(|d| d.0 * d.0 / d.2).sum();
    let sxy: f64 = data.iter().map(|d| d.0 * d.1 / d.2).sum();
    let det = sw * sxx - sx * sx;
    let c = (sxx * sy - sx * sxy) / det;
    let s = (sw * sxy - sx * sy) / det;
    (c, s, sxx / det, sw / det, -sx / det)
}

/// Pseudo-threshold of the named error type for `C(n1,n2)` at asymmetry
/// `alpha`: bisection for the crossing `f_type(p) = p` on the memory
/// extended rectangle, with adaptive trial counts. When the crossing lies
/// below the bracket, the failure curve there is too rare to sample, so the
/// crossing is located by a weighted power-law fit in the measurable window
/// and extrapolation along the fitted slope (flagged in the result).
pub fn pseudo_threshold(
    n1: u16,
    n2: u16,
    error_type: ErrorType,
    alpha: f64,
    seed: u64,
    opts: &ThresholdOptions,
    progress: &Progress,
) -> Result<ThresholdResult> {
    if alpha <= 0.0 {
        return Err(Error::InvalidParameter("alpha must be positive".into()));
    }
    let family = CircuitFamily::MemoryExrec { n1, n2, rz: opts.rz, rx: opts.rx };
    let probe = match error_type {
        ErrorType::Z => Probe::Plus,
        ErrorType::X => Probe::Zero,
    };
    let runner = family.build_runner(probe)?;
    let mut rows = Vec::new();
    let mut eval_idx = 0u64;

    let model_for = |p: f64| match error_type {
        ErrorType::Z => NoiseModel::from_alpha(p, alpha),
        ErrorType::X => NoiseModel::from_rates((alpha * p).min(1.0), p),
    };

    let mut measure = |p: f64, trials: u64, rows: &mut Vec<ResultRow>| -> (f64, f64, f64, u64, u64) {
        let model = model_for(p);
        let eval_seed = seed ^ eval_idx.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        eval_idx += 1;
        progress.add_total(trials);
        let start = Instant::now();
        let fails = run_probe(&runner, &model, trials, eval_seed, 0, progress);
        let (est, lo, hi) = wilson(fails, trials);
        let stats = ProbeStats { trials, fails };
        let mut row = to_row(&family, &model, eval_seed, &FailureEstimate {
            z: if error_type == ErrorType::Z { stats } else { ProbeStats { trials: 0, fails: 0 } },
            x: if error_type == ErrorType::X { stats } else { ProbeStats { trials: 0, fails: 0 } },
            locations: runner.fault_location_count() as u64,
            wall_ms: start.elapsed().as_millis() as u64,
        });
        row.experiment = format!("threshold-eval-{error_type}");
        row.est = est;
        row.ci_low = lo;
        row.ci_high = hi;
        rows.push(row);
        (est, lo, hi, fails, trials)
    };

    let mut classify = |p: f64, rows: &mut Vec<ResultRow>| -> Side {
        let mut trials = opts.base_trials;
        loop {
            let (_, lo, hi, _, _) = measure(p, trials, rows);
            if hi < p {
                return Side::Below;
            }
            if lo > p {
                return Side::Above;
            }
            if trials >= opts.max_trials {
                // Unresolvable at the trial cap: the point sits statistically
                // on the crossing; treat as above so brackets keep shrinking.
                return Side::Above;
            }
            trials = (trials * 4).min(opts.max_trials);
        }
    };

    let (mut lo, mut hi) = opts.bracket;
    let below_bracket = matches!(classify(lo, &mut rows), Side::Above);
    if !below_bracket {
        match classify(hi, &mut rows) {
            Side::Above => {}
            Side::Below => return Err(Error::NoCrossing(lo, hi)),
        }
        let mut evals = 2;
        while hi / lo - 1.0 > opts.rel_width && evals < opts.max_evals {
            let mid = (lo * hi).sqrt();
            match classify(mid, &mut rows) {
                Side::Below => lo = mid,
                Side::Above => hi = mid,
            }
            evals += 1;
        }
        let p_star = (lo * hi).sqrt();
        let mut row = rows.last().cloned().expect("at least two evaluations");
        row.experiment = format!("threshold-{error_type}");
        row.est = p_star;
        row.ci_low = lo;
        row.ci_high = hi;
        rows.push(row);
        return Ok(ThresholdResult {
            error_type,
            alpha,
            p_star,
            bracket: (lo, hi),
            extrapolated: false,
            slope: None,
            rows,
        });
    }

    if !opts.allow_extrapolation {
        return Err(Error::NoCrossing(lo, hi));
    }

    // Extrapolation path. Walk up from the bracket floor to an anchor where
    // the failure rate is comfortably measurable yet unsaturated, then fit
    // the power law over a factor-4 span below the anchor.
    let mut anchor = opts.bracket.0.max(1e-4);
    let mut anchor_est;
    loop {
        let (est, _, _, _, _) = measure(anchor, opts.base_trials, &mut rows);
        anchor_est = est;
        if anchor_est >= 2e-2 || anchor >= opts.bracket.1 {
            break;
        }
        anchor *= 2.0;
    }
    while anchor_est > 6e-2 && anchor > 1e-6 {
        anchor /= 1.6;
        let (est, _, _, _, _) = measure(anchor, opts.base_trials, &mut rows);
        anchor_est = est;
    }
    let mut pts = Vec::new();
    let mut guess = anchor_est;
    for k in 0..3 {
        let p = anchor / 2f64.powi(k);
        // Aim for >= ~150 failures per point.
        let trials = ((150.0 / guess.max(1e-9)) as u64)
            .clamp(opts.base_trials, opts.max_trials * 4);
        let (est, _, _, fails, trials) = measure(p, trials, &mut rows);
        pts.push((p, fails, trials));
        guess = (est / 6.0).max(1e-9); // expect slope between 2 and 3
    }
    let (c, s, var_c, var_s, cov) = weighted_loglog_fit(&pts);
    if s <= 1.0 + 1e-6 {
        return Err(Error::NoCrossing(opts.bracket.0, opts.bracket.1));
    }
    // f(p) = p  at  ln p* = c / (1 - s).
    let ln_p = c / (1.0 - s);
    let dc = 1.0 / (1.0 - s);
    let ds = c / ((1.0 - s) * (1.0 - s));
    let var = dc * dc * var_c + ds * ds * var_s + 2.0 * dc * ds * cov;
    let sigma = var.max(0.0).sqrt();
    let p_star = ln_p.exp();
    let bracket = ((ln_p - 2.0 * sigma).exp(), (ln_p + 2.0 * sigma).exp());
    let mut row = rows.last().cloned().expect("measured rows");
    row.experiment = format!("threshold-extrapolated-{error_type}");
    row.est = p_star;
    row.ci_low = bracket.0;
    row.ci_high = bracket.1;
    rows.push(row);
    Ok(ThresholdResult {
        error_type,
        alpha,
        p_star,
        bracket,
        extrapolated: true,
        slope: Some(s),
        rows,
    })
}

/// Configuration of one chain comparison cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainConfig {
    pub alpha: f64,
    pub pz: f64,
    pub n_cycles: u32,
    pub trials: u64,
    pub seed: u64,
    pub rz: u32,
    pub rx: u32,
}

/// Failure-rate reduction `R = f(plain) / f(combined)` with a conservative
/// CI formed from the component intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainR {
    pub config: ChainConfig,
    pub plain: ResultRow,
    pub combined: ResultRow,
    pub r: f64,
    pub r_low: f64,
    pub r_high: f64,
    /// Combined-chain failures hit zero: `r` is only a lower bound.
    pub insufficient: bool,
}

/// Runs both chain variants and forms R.
pub fn chain_r(config: &ChainConfig, progress: &Progress) -> Result<ChainR> {
    let model = NoiseModel::from_alpha(config.pz, config.alpha);
    let fam_plain = CircuitFamily::Chain {
        variant: ChainVariant::Plain33,
        n_cycles: config.n_cycles,
        rz: config.rz,
        rx: config.rx,
    };
    let fam_comb = CircuitFamily::Chain {
        variant: ChainVariant::Combined,
        n_cycles: config.n_cycles,
        rz: config.rz,
        rx: config.rx,
    };
    let est_plain = estimate_failure(&fam_plain, &model, config.trials, config.seed, progress)?;
    let est_comb = estimate_failure(&fam_comb, &model, config.trials, config.seed, progress)?;
    let plain = to_row(&fam_plain, &model, config.seed, &est_plain);
    let combined = to_row(&fam_comb, &model, config.seed, &est_comb);
    let (pl, ph) = est_plain.total_ci();
    let (cl, ch) = est_comb.total_ci();
    let insufficient = est_comb.z.fails + est_comb.x.fails == 0;
    let r = if insufficient {
        plain.est / ch.max(f64::MIN_POSITIVE)
    } else {
        plain.est / combined.est
    };
    let r_low = pl / ch.max(f64::MIN_POSITIVE);
    let r_high = if cl > 0.0 { ph / cl } else { f64::INFINITY };
    Ok(ChainR { config: config.clone(), plain, combined, r, r_low, r_high, insufficient })
}

/// Options for the crossover scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossoverOptions {
    pub base_trials: u64,
    pub max_trials: u64,
    pub max_n: u32,
    pub rz: u32,
    pub rx: u32,
}

impl Default for CrossoverOptions {
    fn default() -> Self {
        Self { base_trials: 60_000, max_trials: 4_000_000, max_n: 128, rz: 3, rx: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossoverResult {
    pub alpha: f64,
    pub pz: f64,
    /// Smallest scanned N whose R CI lower bound reached 1.
    pub n_star: Option<u32>,
    pub cells: Vec<ChainR>,
}

/// Finds the smallest N at which converting becomes beneficial: doubling
/// scan followed by integer bisection on the CI rule `r_low >= 1`.
pub fn crossover_n(
    alpha: f64,
    pz: f64,
    seed: u64,
    opts: &CrossoverOptions,
    progress: &Progress,
) -> Result<CrossoverResult> {
    let mut cells: Vec<ChainR> = Vec::new();
    // Beneficial = R CI lower bound at or above 1; adaptive trials until the
    // cell resolves against 1 or the cap is hit.
    let beneficial = |n: u32, cells: &mut Vec<ChainR>| -> Result<bool> {
        let mut trials = opts.base_trials;
        loop {
            let cfg = ChainConfig {
                alpha,
                pz,
                n_cycles: n,
                trials,
                seed: seed ^ (n as u64) << 32,
                rz: opts.rz,
                rx: opts.rx,
            };
            let cell = chain_r(&cfg, progress)?;
            let resolved = cell.r_low >= 1.0 || cell.r_high < 1.0;
            let done = resolved || trials >= opts.max_trials;
            if done {
                let verdict = cell.r_low >= 1.0;
                cells.push(cell);
                return Ok(verdict);
            }
            trials = (trials * 4).min(opts.max_trials);
        }
    };

    let mut n = 1u32;
    let mut prev = 0u32;
    let n_star = loop {
        if beneficial(n, &mut cells)? {
            break Some(n);
        }
        prev = n;
        n *= 2;
        if n > opts.max_n {
            break None;
        }
    };
    let n_star = match n_star {
        None => None,
        Some(mut hi) => {
            let mut lo = prev; // below: not beneficial (or 0)
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if beneficial(mid, &mut cells)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        }
    };
    Ok(CrossoverResult { alpha, pz, n_star, cells })
}
