use std::fs;

use serde::Serialize;

use crate::analysis::{
    compute_a, coordinate_coupling, ks_against, mean_and_stderr, sign_concentration,
    NormalizedSample,
};
use crate::oracle::{moment_recursion, LimitFamily, MomentPair};
use crate::urn::{Coord, UrnState};

use super::csv::{fmt_f64, render_row, Table};
use super::realization::{run_many, Probe, RunSpec};
use super::{run_fixed_point_suite, ExitStatus, ExperimentConfig, HarnessError, Mode, Outcome};

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    rng: &'static str,
    config: &'a ExperimentConfig,
}

fn prepare(cfg: &ExperimentConfig, mode: Mode) -> Result<(), HarnessError> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.clone(),
        source,
    })?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: mode.as_str(),
        seed: cfg.seed,
        rng: "ChaCha8; key from seed, stream = realization index",
        config: cfg,
    };
    let text = toml::to_string(&manifest).expect("manifest is serializable");
    let path = dir.join("manifest.toml");
    fs::write(&path, text).map_err(|source| HarnessError::Io { path, source })
}

fn out(cfg: &ExperimentConfig, name: &str) -> std::path::PathBuf {
    cfg.output_dir.join(name)
}

fn bool_field(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Runs the command for `mode`.
pub fn run_command(mode: Mode, cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    match mode {
        Mode::Simulate => cmd_simulate(cfg),
        Mode::ADistribution => cmd_a_distribution(cfg),
        Mode::MomentsCheck => cmd_moments_check(cfg),
        Mode::LimitCheck => cmd_limit_check(cfg),
        Mode::FixedPoint => cmd_fixed_point(cfg),
    }
}

fn final_checkpoints(cfg: &ExperimentConfig) -> Vec<usize> {
    if cfg.checkpoints.is_empty() && cfg.additions > 0 {
        vec![cfg.tau0() + cfg.additions]
    } else {
        cfg.checkpoints.clone()
    }
}

struct SimulateProbe {
    realization: u64,
    trace: String,
}

struct SimulateResult {
    trace: String,
    labels: String,
    a: Vec<f64>,
    signs: Vec<(f64, bool)>,
}

impl Probe for SimulateProbe {
    type Output = SimulateResult;

    fn checkpoint<C: Coord>(&mut self, urn: &UrnState<C>) {
        for (j, a) in compute_a(urn).into_iter().enumerate() {
            render_row(
                &mut self.trace,
                &[&self.realization, &urn.n(), &(j + 1), &fmt_f64(a)],
            );
        }
    }

    fn finish<C: Coord>(self, urn: &UrnState<C>) -> SimulateResult {
        let mut labels = String::new();
        for (i, label) in urn.labels().enumerate() {
            labels.push_str(&format!("{},{}", self.realization, i + 1));
            for x in label {
                labels.push_str(&format!(",{x}"));
            }
            labels.push('\n');
        }
        let signs = (0..urn.dim())
            .map(|j| {
                let s = sign_concentration(urn, j);
                (s.fraction, s.zero_a_fallback)
            })
            .collect();
        SimulateResult {
            trace: self.trace,
            labels,
            a: compute_a(urn),
            signs,
        }
    }
}

/// Runs M realizations and writes `labels_final.csv`, `a_trace.csv` and
/// `summary.csv`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    prepare(cfg, Mode::Simulate)?;
    let d = cfg.dim();
    let mut spec = RunSpec::from_config(cfg);
    spec.checkpoints = final_checkpoints(cfg);
    let results = run_many(&spec, cfg.realizations, cfg.threads, |r| SimulateProbe {
        realization: r,
        trace: String::new(),
    })?;

    let mut header = vec!["realization".to_string(), "index".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut labels = Table::new(&header);
    let mut trace = Table::new(&["realization", "n", "coord", "a"]);
    let mut summary = Table::new(&[
        "realization",
        "coord",
        "a_final",
        "sign_concentration",
        "zero_a_fallback",
        "overflow",
    ]);
    let mut outcome = Outcome::new();
    let mut overflows = 0;
    for (r, res) in results.iter().enumerate() {
        match res {
            Ok(sim) => {
                labels.push_rendered(&sim.labels);
                trace.push_rendered(&sim.trace);
                for j in 0..d {
                    summary.row([
                        r.to_string(),
                        (j + 1).to_string(),
                        fmt_f64(sim.a[j]),
                        fmt_f64(sim.signs[j].0),
                        bool_field(sim.signs[j].1).to_string(),
                        "0".to_string(),
                    ]);
                }
            }
            Err(e) => {
                overflows += 1;
                outcome.note(format!("realization {r} failed: {e}"));
                for j in 0..d {
                    summary.row([
                        r.to_string(),
                        (j + 1).to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        "1".into(),
                    ]);
                }
            }
        }
    }
    labels.write(&out(cfg, "labels_final.csv"))?;
    trace.write(&out(cfg, "a_trace.csv"))?;
    summary.write(&out(cfg, "summary.csv"))?;
    outcome.note(format!(
        "{} realizations, {} balls each, {} overflowed",
        cfg.realizations,
        cfg.tau0() + cfg.additions,
        overflows
    ));
    if overflows > 0 {
        outcome.raise(ExitStatus::Overflow);
    }
    Ok(outcome)
}

struct FinalA;

impl Probe for FinalA {
    type Output = Vec<f64>;

    fn finish<C: Coord>(self, urn: &UrnState<C>) -> Vec<f64> {
        compute_a(urn)
    }
}

/// z-score of `observed − expected` with a zero-variance special case.
fn z_score(observed: f64, expected: f64, stderr: f64) -> f64 {
    let diff = observed - expected;
    if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() <= 1e-9 * expected.abs().max(1.0) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Distribution of `A_N` over M realizations against the oracle mean
/// `S_τ₀ / (τ₀(τ₀+1))`.
pub fn cmd_a_distribution(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    if cfg.realizations < 2 {
        return Err(HarnessError::Config(
            "a-distribution needs at least 2 realizations".into(),
        ));
    }
    prepare(cfg, Mode::ADistribution)?;
    let d = cfg.dim();
    let mut spec = RunSpec::from_config(cfg);
    spec.checkpoints.clear();
    let results = run_many(&spec, cfg.realizations, cfg.threads, |_| FinalA)?;

    let mut outcome = Outcome::new();
    let mut table = Table::new(&["realization", "coord", "a"]);
    let mut per_coord = vec![Vec::with_capacity(results.len()); d];
    let mut overflows = 0;
    for (r, res) in results.iter().enumerate() {
        match res {
            Ok(a) => {
                for j in 0..d {
                    table.row([r.to_string(), (j + 1).to_string(), fmt_f64(a[j])]);
                    per_coord[j].push(a[j]);
                }
            }
            Err(e) => {
                overflows += 1;
                outcome.note(format!("realization {r} excluded: {e}"));
            }
        }
    }
    table.write(&out(cfg, "a_final.csv"))?;

    let initial: UrnState = UrnState::new(&cfg.labels(), d)?;
    let oracle = compute_a(&initial);
    let mut summary = Table::new(&[
        "coord",
        "realizations",
        "mean",
        "stderr",
        "oracle",
        "z",
        "pass",
    ]);
    for j in 0..d {
        let (mean, stderr) = mean_and_stderr(&per_coord[j]);
        let z = z_score(mean, oracle[j], stderr);
        let pass = z.abs() <= cfg.a_mean_z_max;
        summary.row([
            (j + 1).to_string(),
            per_coord[j].len().to_string(),
            fmt_f64(mean),
            fmt_f64(stderr),
            fmt_f64(oracle[j]),
            fmt_f64(z),
            bool_field(pass).to_string(),
        ]);
        outcome.check(
            &format!("mean A coord {}", j + 1),
            pass,
            format!(
                "empirical {mean:.6} ± {stderr:.6}, oracle {:.6}, z = {z:.3} (|z| <= {})",
                oracle[j], cfg.a_mean_z_max
            ),
        );
    }
    summary.write(&out(cfg, "a_summary.csv"))?;
    if overflows > 0 {
        outcome.raise(ExitStatus::Overflow);
    }
    Ok(outcome)
}

struct MomentProbe(Vec<(f64, f64)>);

impl Probe for MomentProbe {
    type Output = Vec<(f64, f64)>;

    fn checkpoint<C: Coord>(&mut self, urn: &UrnState<C>) {
        self.0.push((urn.r_f64(0), urn.q_f64(0)));
    }

    fn finish<C: Coord>(self, _urn: &UrnState<C>) -> Vec<(f64, f64)> {
        self.0
    }
}

/// Monte Carlo `E[R_n]`, `E[Q_n]` against the exact recursion.
pub fn cmd_moments_check(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    if cfg.dim() != 1 {
        return Err(HarnessError::Config("moments-check needs d = 1".into()));
    }
    let checkpoints = final_checkpoints(cfg);
    if checkpoints.is_empty() {
        return Err(HarnessError::Config(
            "moments-check needs additions > 0 or checkpoints".into(),
        ));
    }
    prepare(cfg, Mode::MomentsCheck)?;
    let mut spec = RunSpec::from_config(cfg);
    spec.checkpoints = checkpoints.clone();
    let results = run_many(&spec, cfg.realizations, cfg.threads, |_| {
        MomentProbe(Vec::new())
    })?;
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let initial: UrnState = UrnState::new(&cfg.labels(), 1)?;
    let start = MomentPair::from_urn(&initial, 0);
    let mut table = Table::new(&[
        "n", "mc_r", "mc_q", "exact_r", "exact_q", "stderr_r", "stderr_q", "z_r", "z_q",
    ]);
    let mut outcome = Outcome::new();
    for (c, &n) in checkpoints.iter().enumerate() {
        let rs: Vec<f64> = results.iter().map(|v| v[c].0).collect();
        let qs: Vec<f64> = results.iter().map(|v| v[c].1).collect();
        let (mc_r, se_r) = mean_and_stderr(&rs);
        let (mc_q, se_q) = mean_and_stderr(&qs);
        let exact = moment_recursion(cfg.tau0(), start, n).expect("checkpoint after tau0");
        let z_r = z_score(mc_r, exact.r, se_r);
        let z_q = z_score(mc_q, exact.q, se_q);
        table.row([
            n.to_string(),
            fmt_f64(mc_r),
            fmt_f64(mc_q),
            fmt_f64(exact.r),
            fmt_f64(exact.q),
            fmt_f64(se_r),
            fmt_f64(se_q),
            fmt_f64(z_r),
            fmt_f64(z_q),
        ]);
        let pass = z_r.abs() <= cfg.z_max && z_q.abs() <= cfg.z_max;
        outcome.check(
            &format!("moments n={n}"),
            pass,
            format!(
                "E[R] mc {mc_r:.4} exact {:.4} z {z_r:.2}; E[Q] mc {mc_q:.4} exact {:.4} z {z_q:.2}",
                exact.r, exact.q
            ),
        );
    }
    table.write(&out(cfg, "moments.csv"))?;
    Ok(outcome)
}

#[derive(Debug, Clone)]
struct LimitObservation {
    /// Per coordinate: `None` when `|A_N|` is below the exclusion threshold,
    /// otherwise the quenched KS statistic and `X_N / (N A_N)`.
    coords: Vec<Option<(f64, f64)>>,
    coupling: Option<f64>,
}

struct LimitProbe {
    min_abs_a: f64,
    window: usize,
}

impl Probe for LimitProbe {
    type Output = LimitObservation;

    fn finish<C: Coord>(self, urn: &UrnState<C>) -> LimitObservation {
        let n = urn.n();
        let a = compute_a(urn);
        let valid: Vec<bool> = a.iter().map(|v| v.abs() >= self.min_abs_a).collect();
        let coords = (0..urn.dim())
            .map(|j| {
                if !valid[j] {
                    return None;
                }
                let scale = n as f64 * a[j];
                let normalized: Vec<f64> = urn.labels().map(|l| l[j].to_f64() / scale).collect();
                let ks =
                    ks_against(&normalized, LimitFamily::ExpSigned(1.0)).expect("finite sample");
                Some((ks, normalized[n - 1]))
            })
            .collect();
        let coupling = (urn.dim() == 2 && valid.iter().all(|&v| v)).then(|| {
            let w = self.window.min(n);
            let sample = NormalizedSample::by_na_range(urn, n - w..n).expect("A_n checked above");
            coordinate_coupling(&sample, [1.0, 1.0]).expect("d = 2, nonzero scale")
        });
        LimitObservation { coords, coupling }
    }
}

/// Quenched Exp(1) law of normalized labels, pooled Gamma(2,1) law of the
/// last added ball, and (d = 2) the shared-scalar coupling of coordinates.
pub fn cmd_limit_check(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let n_final = cfg.tau0() + cfg.additions;
    if n_final < cfg.min_limit_n {
        return Err(HarnessError::Config(format!(
            "limit-check needs at least {} balls at evaluation, config reaches {n_final}",
            cfg.min_limit_n
        )));
    }
    prepare(cfg, Mode::LimitCheck)?;
    let d = cfg.dim();
    let mut spec = RunSpec::from_config(cfg);
    spec.checkpoints.clear();
    let results = run_many(&spec, cfg.realizations, cfg.threads, |_| LimitProbe {
        min_abs_a: cfg.min_abs_a,
        window: cfg.coupling_window,
    })?;

    let mut outcome = Outcome::new();
    let mut report = Table::new(&[
        "test",
        "realization",
        "coord",
        "statistic",
        "threshold",
        "pass",
    ]);
    let mut pooled = vec![Vec::new(); d];
    let mut excluded = 0;
    let mut overflows = 0;
    let mut quenched_fail = 0;
    let mut quenched_total = 0;
    let mut worst_quenched: f64 = 0.0;
    let mut coupling_fail = 0;
    let mut worst_coupling: f64 = 0.0;
    for (r, res) in results.iter().enumerate() {
        let obs = match res {
            Ok(obs) => obs,
            Err(e) => {
                overflows += 1;
                outcome.note(format!("realization {r} failed: {e}"));
                continue;
            }
        };
        for (j, c) in obs.coords.iter().enumerate() {
            match c {
                None => {
                    excluded += 1;
                    report.row(["excluded", &r.to_string(), &(j + 1).to_string(), "", "", ""]);
                }
                Some((ks, x)) => {
                    let pass = *ks < cfg.ks_quenched_max;
                    quenched_total += 1;
                    quenched_fail += usize::from(!pass);
                    worst_quenched = worst_quenched.max(*ks);
                    report.row([
                        "quenched_exp",
                        &r.to_string(),
                        &(j + 1).to_string(),
                        &fmt_f64(*ks),
                        &fmt_f64(cfg.ks_quenched_max),
                        bool_field(pass),
                    ]);
                    pooled[j].push(*x);
                }
            }
        }
        if let Some(c) = obs.coupling {
            let pass = c < cfg.coupling_max;
            coupling_fail += usize::from(!pass);
            worst_coupling = worst_coupling.max(c);
            report.row([
                "coordinate_coupling",
                &r.to_string(),
                "",
                &fmt_f64(c),
                &fmt_f64(cfg.coupling_max),
                bool_field(pass),
            ]);
        }
    }
    outcome.check(
        "quenched Exp(1) law",
        quenched_fail == 0,
        format!(
            "{} of {quenched_total} realization-coordinates below {}; worst KS {worst_quenched:.5}",
            quenched_total - quenched_fail,
            cfg.ks_quenched_max
        ),
    );
    for (j, xs) in pooled.iter().enumerate() {
        if xs.len() < 2 {
            outcome.note(format!(
                "pooled Gamma(2,1) law coord {}: skipped, {} sample(s)",
                j + 1,
                xs.len()
            ));
            continue;
        }
        let ks = ks_against(xs, LimitFamily::Gamma2(1.0)).expect("finite sample");
        let pass = ks < cfg.ks_pooled_max;
        report.row([
            "pooled_gamma",
            "",
            &(j + 1).to_string(),
            &fmt_f64(ks),
            &fmt_f64(cfg.ks_pooled_max),
            bool_field(pass),
        ]);
        outcome.check(
            &format!("pooled Gamma(2,1) law coord {}", j + 1),
            pass,
            format!(
                "KS {ks:.5} over {} realizations (< {})",
                xs.len(),
                cfg.ks_pooled_max
            ),
        );
    }
    if d == 2 {
        outcome.check(
            "coordinate coupling",
            coupling_fail == 0,
            format!(
                "worst statistic {worst_coupling:.5} (< {})",
                cfg.coupling_max
            ),
        );
    }
    if excluded > 0 {
        outcome.note(format!(
            "{excluded} realization-coordinates excluded for |A_N| < {}",
            cfg.min_abs_a
        ));
    }
    report.write(&out(cfg, "limit_report.csv"))?;
    if overflows > 0 {
        outcome.raise(ExitStatus::Overflow);
    }
    Ok(outcome)
}

/// Population-dynamics checks of the fixed-point equations.
pub fn cmd_fixed_point(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    prepare(cfg, Mode::FixedPoint)?;
    let rep = run_fixed_point_suite(cfg)?;

    let mut table = Table::new(&["experiment", "iteration", "distance", "ratio"]);
    for (t, trial) in rep.stationarity.iter().enumerate() {
        table.row([
            "gamma_stationarity_ks",
            &t.to_string(),
            &fmt_f64(trial.ks),
            "",
        ]);
    }
    for (t, w) in rep.gamma_w2_trace.iter().enumerate() {
        table.row(["gamma_w2", &t.to_string(), &fmt_f64(*w), ""]);
    }
    for (t, ks) in rep.exp_ks_trace.iter().enumerate() {
        table.row(["exp_ks", &t.to_string(), &fmt_f64(*ks), ""]);
    }
    for (t, dist) in rep.contraction.coupled.iter().enumerate() {
        let ratio = if t == 0 {
            String::new()
        } else {
            fmt_f64(dist / rep.contraction.coupled[t - 1])
        };
        table.row([
            "contraction_coupled",
            &t.to_string(),
            &fmt_f64(*dist),
            &ratio,
        ]);
    }
    for (t, dist) in rep.contraction.empirical.iter().enumerate() {
        table.row(["contraction_empirical", &t.to_string(), &fmt_f64(*dist), ""]);
    }
    table.row([
        "k3_fitted_gamma_ks",
        &cfg.k3_iterations.to_string(),
        &fmt_f64(rep.k3_ks),
        "",
    ]);
    table.write(&out(cfg, "fixedpoint.csv"))?;

    let mut summary = Table::new(&["check", "statistic", "low", "high", "pass"]);
    let mut outcome = Outcome::new();
    let rate = rep.stationarity_pass_rate();
    summary.row([
        "gamma_stationarity_pass_rate",
        &fmt_f64(rate),
        &fmt_f64(rep.stationarity_min_pass_rate),
        "",
        bool_field(rep.stationarity_pass()),
    ]);
    outcome.check(
        "Gamma(2,1) stationarity",
        rep.stationarity_pass(),
        format!(
            "{:.0}% of {} trials pass KS at {} (need {:.0}%)",
            100.0 * rate,
            rep.stationarity.len(),
            rep.stationarity_alpha,
            100.0 * rep.stationarity_min_pass_rate
        ),
    );
    let exp_limit = rep.exp_floor_factor * rep.exp_floor;
    summary.row([
        "exp_convergence_ks",
        &fmt_f64(rep.exp_final_ks()),
        "",
        &fmt_f64(exp_limit),
        bool_field(rep.exp_pass()),
    ]);
    outcome.check(
        "exponential fixed point",
        rep.exp_pass(),
        format!(
            "KS {:.5} after {} iterations, floor {:.5} (iid floor {:.5}), limit {exp_limit:.5}",
            rep.exp_final_ks(),
            rep.exp_ks_trace.len() - 1,
            rep.exp_floor,
            rep.exp_iid_floor
        ),
    );
    let ratio = rep.contraction_ratio();
    summary.row([
        "contraction_geometric_mean_ratio",
        &fmt_f64(ratio),
        &fmt_f64(rep.contraction_range.0),
        &fmt_f64(rep.contraction_range.1),
        bool_field(rep.contraction_pass()),
    ]);
    outcome.check(
        "coupled contraction",
        rep.contraction_pass(),
        format!(
            "geometric-mean ratio {ratio:.4} in [{}, {}] (theory 2/3)",
            rep.contraction_range.0, rep.contraction_range.1
        ),
    );
    summary.row([
        "k3_fitted_gamma_ks",
        &fmt_f64(rep.k3_ks),
        &fmt_f64(rep.k3_critical),
        "",
        bool_field(rep.k3_rejected()),
    ]);
    outcome.check(
        "k=3 pool is not Gamma",
        rep.k3_rejected(),
        format!(
            "KS {:.5} vs fitted Gamma(shape {:.4}, scale {:.4}), critical {:.5}",
            rep.k3_ks, rep.k3_shape, rep.k3_scale, rep.k3_critical
        ),
    );
    summary.write(&out(cfg, "fixedpoint_summary.csv"))?;
    Ok(outcome)
}
