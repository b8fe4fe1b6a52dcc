//! End-to-end benchmark: closed forms, the stationary chain, and the Gaussian
//! transient regime across a ladder of dimensions, compared with the limit
//! ensemble and the moment ODE.
//!
//! Every artifact is a deterministic function of the configuration; wall
//! clock times are reported on the side and never written into a CSV.

use std::time::{Duration, Instant};

use crate::analysis::{
    build_report, chaos_diagnostic, ks_test, mean_se, moment_bound_check, wasserstein1_bootstrap, ChainTable,
    ComparisonReport,
};
use crate::chain::{run_replicas, step_index, ChainConfig, InitialDistribution};
use crate::closed_forms::oracle::identity_suite;
use crate::closed_forms::{acc_rate, argmax_h, gamma_coef, gee_coef, h_of_l, normal_cdf, MomentPair, ScalingParams};
use crate::error::Result;
use crate::gaussian_ode::{gaussian_rhs, integrate_moment_ode, MomentCurve};
use crate::io::{fmt_f64, ode_table, report_table, CsvTable, Manifest};
use crate::limit::{
    martingale_defect, run_ensemble, taper_radius, EnsembleConfig, EnsembleRun, TaperKind, TestFunction,
};
use crate::potentials::Potential;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub l: f64,
    pub identity_draws: u64,
    pub identity_samples: u64,
    pub stationary_n: usize,
    pub stationary_steps: u64,
    pub stationary_replicas: u64,
    /// Dimensions of the transient ladder, increasing.
    pub ladder: Vec<usize>,
    /// Replicas per dimension for the distributional statistics.
    pub replicas: u64,
    /// Leading replicas used for the second-moment comparison.
    pub moment_replicas: usize,
    pub horizon: f64,
    /// Spacing of the chain record grid on `[0, horizon]`.
    pub record_step: f64,
    pub w1_times: Vec<f64>,
    pub chaos_components: usize,
    pub chaos_time: f64,
    pub bootstrap_reps: usize,
    pub particles: usize,
    pub dt: f64,
    pub ode_dt: f64,
    pub martingale_horizon: f64,
    pub martingale_spacing: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            l: 2.38,
            identity_draws: 20,
            identity_samples: 10_000_000,
            stationary_n: 100,
            stationary_steps: 100_000,
            stationary_replicas: 20,
            ladder: vec![10, 50, 200],
            replicas: 10_000,
            moment_replicas: 100,
            horizon: 5.0,
            record_step: 0.1,
            w1_times: vec![0.5, 1.0, 2.0, 5.0],
            chaos_components: 5,
            chaos_time: 1.0,
            bootstrap_reps: 200,
            particles: 100_000,
            dt: 1e-3,
            ode_dt: 1e-3,
            martingale_horizon: 2.0,
            martingale_spacing: 0.05,
        }
    }
}

impl BenchmarkConfig {
    /// Small sizes for smoke tests; the statistical criteria are not expected
    /// to pass at this scale.
    pub fn quick(seed: u64) -> Self {
        Self {
            seed,
            identity_draws: 2,
            identity_samples: 20_000,
            stationary_steps: 2_000,
            stationary_replicas: 20,
            replicas: 200,
            moment_replicas: 50,
            horizon: 2.0,
            w1_times: vec![0.5, 1.0, 2.0],
            bootstrap_reps: 20,
            particles: 4_000,
            dt: 0.01,
            martingale_horizon: 0.5,
            martingale_spacing: 0.1,
            ..Self::default()
        }
    }

    fn manifest(&self) -> Manifest {
        let ladder: Vec<String> = self.ladder.iter().map(|n| n.to_string()).collect();
        let w1: Vec<String> = self.w1_times.iter().map(|t| fmt_f64(*t)).collect();
        Manifest::new("full-benchmark")
            .with("seed", self.seed)
            .with("l", fmt_f64(self.l))
            .with("identity_draws", self.identity_draws)
            .with("identity_samples", self.identity_samples)
            .with("stationary_n", self.stationary_n)
            .with("stationary_steps", self.stationary_steps)
            .with("stationary_replicas", self.stationary_replicas)
            .with("ladder", ladder.join(" "))
            .with("replicas", self.replicas)
            .with("moment_replicas", self.moment_replicas)
            .with("horizon", fmt_f64(self.horizon))
            .with("record_step", fmt_f64(self.record_step))
            .with("w1_times", w1.join(" "))
            .with("chaos_components", self.chaos_components)
            .with("chaos_time", fmt_f64(self.chaos_time))
            .with("bootstrap_reps", self.bootstrap_reps)
            .with("particles", self.particles)
            .with("dt", fmt_f64(self.dt))
            .with("ode_dt", fmt_f64(self.ode_dt))
            .with("martingale_horizon", fmt_f64(self.martingale_horizon))
            .with("martingale_spacing", fmt_f64(self.martingale_spacing))
    }

    fn record_times(&self) -> Vec<f64> {
        let k = (self.horizon / self.record_step).round() as usize;
        let mut ts: Vec<f64> = (0..=k).map(|i| i as f64 * self.record_step).collect();
        ts.extend(self.w1_times.iter().copied());
        ts.push(self.chaos_time);
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        ts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    /// Verdict on the numerical content of the criterion.
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl CriterionResult {
    pub fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| self.elapsed <= b)
    }

    /// Numerical verdict and runtime budget together.
    pub fn passed(&self) -> bool {
        self.pass && self.within_budget()
    }

    pub fn line(&self) -> String {
        let budget = match self.budget {
            Some(b) => format!(" [{:.1}s of {:.0}s]", self.elapsed.as_secs_f64(), b.as_secs_f64()),
            None => String::new(),
        };
        format!(
            "criterion {:>2} {:<28} {}  {}{}",
            self.id,
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.detail,
            budget
        )
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub criteria: Vec<CriterionResult>,
    /// `(file name, bytes)` in a fixed order.
    pub files: Vec<(String, Vec<u8>)>,
}

impl BenchmarkOutput {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(CriterionResult::passed)
    }
}

struct Sink {
    base: Manifest,
    files: Vec<(String, Vec<u8>)>,
}

impl Sink {
    fn table(&self, artifact: &str, header: &[&str]) -> CsvTable {
        CsvTable::new(self.base.clone().with("artifact", artifact), header)
    }

    fn add(&mut self, name: &str, t: &CsvTable) -> Result<()> {
        self.files.push((name.to_string(), t.to_bytes()?));
        Ok(())
    }
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn criterion(
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
    start: Instant,
    budget: Option<u64>,
) -> CriterionResult {
    CriterionResult { id, name, pass, detail, elapsed: start.elapsed(), budget: budget.map(Duration::from_secs) }
}

/// `values[k+1] ≤ values[k] + 2·√(se[k]² + se[k+1]²)` for every step.
fn non_increasing_within(values: &[f64], se: &[f64]) -> bool {
    (1..values.len()).all(|k| values[k] <= values[k - 1] + 2.0 * (se[k] * se[k] + se[k - 1] * se[k - 1]).sqrt())
}

fn closed_form_suite(cfg: &BenchmarkConfig, sink: &mut Sink) -> Result<CriterionResult> {
    let start = Instant::now();
    let rows = identity_suite(cfg.identity_draws, cfg.identity_samples, derive_seed(cfg.seed, 1))?;
    let mut t = sink.table("closed_forms", &["identity", "params", "closed_form", "mc_mean", "mc_se", "z_score"]);
    let mut worst = 0.0f64;
    for r in &rows {
        let z = r.z_score();
        worst = worst.max(z.abs());
        t.push(vec![r.identity.name().into(), r.params_string(), f(r.closed_form), f(r.mc.mean), f(r.mc.se), f(z)]);
    }
    sink.add("closed_forms.csv", &t)?;
    let bad = rows.iter().filter(|r| !(r.z_score().abs() <= 3.0)).count();
    Ok(criterion(
        1,
        "closed-form identities",
        bad == 0,
        format!("{} checks, {} beyond 3 SE, max |z| = {:.3}", rows.len(), bad, worst),
        start,
        Some(120),
    ))
}

fn coefficient_identities(sink: &mut Sink) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut t = sink.table("coefficient_identities", &["l", "I", "gamma", "two_gee", "h", "max_gap"]);
    let mut worst_gap = 0.0f64;
    for l in [0.5, 1.0, 2.38, 5.0] {
        let s = ScalingParams::new(l)?;
        for i in [0.25, 1.0, 4.0] {
            let p = MomentPair::new(i, i)?;
            let g = gamma_coef(p, s);
            let g2 = 2.0 * gee_coef(p, s);
            let h = h_of_l(l, i);
            let gap = (g - g2).abs().max((g - h).abs()).max((g2 - h).abs());
            worst_gap = worst_gap.max(gap);
            t.push(vec![f(l), f(i), f(g), f(g2), f(h), f(gap)]);
        }
    }
    sink.add("coefficient_identities.csv", &t)?;
    let mut a_grid = vec![0.0, f64::INFINITY];
    a_grid.extend((0..98).map(|k| 10f64.powf(-8.0 + 14.0 * f64::from(k) / 97.0)));
    let b_grid: Vec<f64> = (0..100).map(|k| -50.0 + 100.0 * f64::from(k) / 99.0).collect();
    let (mut points, mut violations) = (0usize, 0usize);
    for l in [0.5, 1.0, 2.38, 5.0] {
        let s = ScalingParams::new(l)?;
        for &a in &a_grid {
            for &b in &b_grid {
                let p = MomentPair::new(a, b)?;
                let (g, ge) = (gamma_coef(p, s), gee_coef(p, s));
                points += 1;
                if !(ge >= -1e-12 && ge <= g + 1e-12 && g <= l * l + 1e-12) {
                    violations += 1;
                }
            }
        }
    }
    let pass = worst_gap <= 1e-12 && violations == 0;
    Ok(criterion(
        2,
        "coefficient identities",
        pass,
        format!("max |Γ-2𝒢|,|Γ-h| = {worst_gap:.2e}; bound violations {violations}/{points}"),
        start,
        None,
    ))
}

fn optimal_scaling(sink: &mut Sink) -> Result<CriterionResult> {
    let start = Instant::now();
    let best = argmax_h(1.0, 1e-9);
    let acc = acc_rate(MomentPair::new(1.0, 1.0)?, ScalingParams::new(2.38)?);
    let mut t = sink.table("optimal_scaling", &["quantity", "value"]);
    t.push(vec!["argmax_h_I1".into(), f(best)]);
    t.push(vec!["acc_1_1_l2.38".into(), f(acc)]);
    t.push(vec!["two_phi_minus_1.19".into(), f(2.0 * normal_cdf(-1.19))]);
    sink.add("optimal_scaling.csv", &t)?;
    let pass = (best - 2.38).abs() <= 0.01 && (acc - 0.2340).abs() <= 0.0005;
    Ok(criterion(3, "optimal scaling", pass, format!("argmax h = {best:.6}, acc(1,1) = {acc:.6}"), start, Some(1)))
}

fn stationary_chain(cfg: &BenchmarkConfig, sink: &mut Sink) -> Result<CriterionResult> {
    let start = Instant::now();
    let p = Potential::gaussian(1.0)?;
    let ccfg = ChainConfig {
        n: cfg.stationary_n,
        l: cfg.l,
        steps: cfg.stationary_steps,
        seed: derive_seed(cfg.seed, 4),
        init: InitialDistribution::Stationary { burnin: 0 },
        keep_components: 1,
    };
    let horizon = cfg.stationary_steps as f64 / cfg.stationary_n as f64;
    let times: Vec<f64> = (0..6).map(|i| horizon * f64::from(i) / 5.0).collect();
    let trs = run_replicas(&ccfg, &p, &times, cfg.stationary_replicas)?;
    let accepted: u64 = trs.iter().map(|t| t.accepted).sum();
    let mean_acc = accepted as f64 / (cfg.stationary_steps * cfg.stationary_replicas) as f64;
    let table = ChainTable::from_trajectories(&trs)?;
    let level = 0.01 / times.len() as f64;
    let mut t = sink.table("stationary_chain", &["t", "k", "ks_statistic", "p_value", "level"]);
    t.manifest.push("mean_acceptance", f(mean_acc));
    let mut ks_ok = true;
    let mut min_p = 1.0f64;
    for (i, &time) in table.times.iter().enumerate() {
        let r = ks_test(&table.component(i, 0)?, normal_cdf)?;
        ks_ok &= r.p_value > level;
        min_p = min_p.min(r.p_value);
        t.push(vec![f(time), step_index(cfg.stationary_n, time).to_string(), f(r.statistic), f(r.p_value), f(level)]);
    }
    sink.add("stationary_chain.csv", &t)?;
    let pass = (mean_acc - 0.234).abs() <= 0.02 && ks_ok;
    Ok(criterion(
        4,
        "stationary chain",
        pass,
        format!("mean acceptance {mean_acc:.4}; min KS p = {min_p:.4} (level {level:.5})"),
        start,
        Some(300),
    ))
}

struct Transient {
    ode: MomentCurve,
    limit: EnsembleRun,
    chains: Vec<(usize, ChainTable)>,
}

fn run_transient(cfg: &BenchmarkConfig) -> Result<Transient> {
    let p = Potential::gaussian(1.0)?;
    let init = InitialDistribution::IidNormal { mean: 0.0, sd: 2.0 };
    let ode = integrate_moment_ode(4.0, cfg.l, cfg.horizon, cfg.ode_dt)?;
    let mut snaps = vec![0.0];
    snaps.extend(cfg.w1_times.iter().copied());
    snaps.dedup();
    let ecfg = EnsembleConfig {
        n_particles: cfg.particles,
        dt: cfg.dt,
        horizon: cfg.horizon,
        l: cfg.l,
        seed: derive_seed(cfg.seed, 6),
        init: init.clone(),
        stratified_init: true,
    };
    let limit = run_ensemble(&ecfg, &p, &snaps)?;
    let times = cfg.record_times();
    let mut chains = Vec::with_capacity(cfg.ladder.len());
    for &n in &cfg.ladder {
        let ccfg = ChainConfig {
            n,
            l: cfg.l,
            steps: step_index(n, cfg.horizon).max(1),
            seed: derive_seed(derive_seed(cfg.seed, 5), n as u64),
            init: init.clone(),
            keep_components: cfg.chaos_components.min(n),
        };
        let trs = run_replicas(&ccfg, &p, &times, cfg.replicas)?;
        chains.push((n, ChainTable::from_trajectories(&trs)?));
    }
    Ok(Transient { ode, limit, chains })
}

fn gaussian_transient(
    cfg: &BenchmarkConfig,
    tr: &Transient,
    sink: &mut Sink,
    start: Instant,
) -> Result<CriterionResult> {
    let s = ScalingParams::new(cfg.l)?;
    // (a) ODE shape.
    let g = &tr.ode.grid;
    let monotone = g.windows(2).all(|w| w[1].1 < w[0].1) && g.iter().all(|&(_, m)| m > 1.0);
    let ode_ok = g[0].1 == 4.0 && monotone && gaussian_rhs(1.0, s).abs() <= 1e-12 && tr.ode.err_estimate <= 1e-8;
    let mut t = sink.table("ode", &["t", "m"]);
    t.manifest.push("err_estimate", f(tr.ode.err_estimate));
    t.rows = ode_table(Manifest::default(), &tr.ode).rows;
    sink.add("ode.csv", &t)?;
    // (b) Limit ensemble against the ODE.
    let mut lt = sink.table("limit_transient", &["t", "a", "b", "m_ode"]);
    let mut sup_limit = 0.0f64;
    for m in &tr.limit.history {
        let mo = tr.ode.value_at(m.t).unwrap_or(f64::NAN);
        sup_limit = sup_limit.max((m.a - mo).abs());
        lt.push(vec![f(m.t), f(m.a), f(m.b), f(mo)]);
    }
    sink.add("limit_transient.csv", &lt)?;
    // (c) Chain second moment against the ODE.
    let mut ct = sink.table("transient_moments", &["n", "t", "a_chain", "a_chain_se", "m_ode"]);
    let (mut errs, mut ses) = (Vec::new(), Vec::new());
    for (n, table) in &tr.chains {
        let head = table.head(cfg.moment_replicas);
        let (mut sup, mut se_at) = (0.0f64, 0.0);
        for (i, &time) in head.times.iter().enumerate() {
            let a: Vec<f64> = head.points[i].iter().map(|p| p.a_emp).collect();
            let (m, se) = mean_se(&a);
            let mo = tr.ode.value_at(time).unwrap_or(f64::NAN);
            if (m - mo).abs() > sup {
                sup = (m - mo).abs();
                se_at = se;
            }
            ct.push(vec![n.to_string(), f(time), f(m), f(se), f(mo)]);
        }
        errs.push(sup);
        ses.push(se_at);
    }
    sink.add("transient_moments.csv", &ct)?;
    let chain_ok = errs.last().is_some_and(|&e| e <= 0.05) && non_increasing_within(&errs, &ses);
    let pass = ode_ok && sup_limit <= 0.03 && chain_ok;
    let ladder: Vec<String> = errs.iter().zip(&ses).map(|(e, s)| format!("{e:.4}±{s:.4}")).collect();
    Ok(criterion(
        5,
        "gaussian transient",
        pass,
        format!(
            "(a) ode {}; (b) sup|a-m| = {sup_limit:.4}; (c) sup|chain-m| over n = [{}]",
            if ode_ok { "ok" } else { "bad" },
            ladder.join(", ")
        ),
        start,
        Some(1200),
    ))
}

fn propagation_of_chaos(cfg: &BenchmarkConfig, tr: &Transient, sink: &mut Sink) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut wt = sink.table("w1", &["n", "t", "w1", "w1_se"]);
    let mut w1_ok = true;
    let mut w1_detail = Vec::new();
    for (ti, &time) in cfg.w1_times.iter().enumerate() {
        let snap = tr.limit.snapshot(time).expect("limit snapshot at every W1 time");
        let (mut ws, mut ses) = (Vec::new(), Vec::new());
        for (n, table) in &tr.chains {
            let i = table.time_index(time).expect("chain record at every W1 time");
            let seed = derive_seed(derive_seed(cfg.seed, 66), ((*n as u64) << 16) | ti as u64);
            let (w, se) = wasserstein1_bootstrap(&table.component(i, 0)?, &snap.particles, cfg.bootstrap_reps, seed)?;
            wt.push(vec![n.to_string(), f(time), f(w), f(se)]);
            ws.push(w);
            ses.push(se);
        }
        let ok = non_increasing_within(&ws, &ses);
        w1_ok &= ok;
        w1_detail.push(format!("t={time}:{}", if ok { "ok" } else { "up" }));
    }
    sink.add("w1.csv", &wt)?;
    let mut ch =
        sink.table("chaos", &["n", "t", "mean1", "var1", "corr_value", "corr_square", "corr_square_se", "copula_dev"]);
    let (mut stat, mut stat_se) = (Vec::new(), Vec::new());
    for (n, table) in &tr.chains {
        let keep: Vec<usize> = cfg.w1_times.iter().filter_map(|&t| table.time_index(t)).collect();
        let sub = ChainTable {
            times: keep.iter().map(|&i| table.times[i]).collect(),
            points: keep.iter().map(|&i| table.points[i].clone()).collect(),
        };
        let j = cfg.chaos_components.min(*n);
        let rows = chaos_diagnostic(&sub, j)?;
        let opt = |x: Option<f64>| x.map_or("NaN".to_string(), f);
        for r in &rows {
            ch.push(vec![
                n.to_string(),
                f(r.t),
                f(r.mean1),
                f(r.var1),
                opt(r.corr_value),
                opt(r.corr_square),
                opt(r.corr_square_se),
                opt(r.copula_dev),
            ]);
        }
        let at = rows.iter().find(|r| (r.t - cfg.chaos_time).abs() < 1e-9).expect("chaos time recorded");
        stat.push(at.corr_square.unwrap_or(f64::NAN));
        stat_se.push(at.corr_square_se.unwrap_or(f64::NAN));
    }
    sink.add("chaos.csv", &ch)?;
    let chaos_ok = stat.len() >= 2 && stat[stat.len() - 1] < stat[0] && non_increasing_within(&stat, &stat_se);
    let cs: Vec<String> = stat.iter().zip(&stat_se).map(|(v, s)| format!("{v:.4}±{s:.4}")).collect();
    Ok(criterion(
        6,
        "propagation of chaos",
        w1_ok && chaos_ok,
        format!("W1 [{}]; corr(X²) at t={} over n = [{}]", w1_detail.join(" "), cfg.chaos_time, cs.join(", ")),
        start,
        None,
    ))
}

fn acceptance_rates(
    cfg: &BenchmarkConfig,
    tr: &Transient,
    sink: &mut Sink,
) -> Result<(CriterionResult, Vec<ComparisonReport>)> {
    let start = Instant::now();
    let s = ScalingParams::new(cfg.l)?;
    let mut sups = Vec::new();
    let mut reports = Vec::new();
    let mut identity_gap = 0.0f64;
    for (n, table) in &tr.chains {
        let meta = vec![
            ("n".to_string(), n.to_string()),
            ("replicas".to_string(), table.replicas().to_string()),
            ("n_particles".to_string(), cfg.particles.to_string()),
            ("chain_seed".to_string(), derive_seed(derive_seed(cfg.seed, 5), *n as u64).to_string()),
            ("limit_seed".to_string(), derive_seed(cfg.seed, 6).to_string()),
        ];
        let rep = build_report(table, &tr.limit, s, meta)?;
        for r in &rep.rows {
            let mp = MomentPair::new(r.a_limit, r.b_limit)?;
            identity_gap = identity_gap.max((r.acc_pred - gamma_coef(mp, s) / s.l2()).abs());
        }
        sups.push(rep.sup_acc_error());
        sink.add(&format!("report_n{n}.csv"), &report_table(sink.base.clone().with("artifact", "report"), &rep))?;
        reports.push(rep);
    }
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let last = sups.last().copied().unwrap_or(f64::NAN);
    let pass = last <= 0.03 && decreasing && identity_gap <= 1e-15;
    let ss: Vec<String> = sups.iter().map(|v| format!("{v:.4}")).collect();
    Ok((
        criterion(
            7,
            "acceptance-rate curve",
            pass,
            format!("sup|acc_emp-acc_pred| over n = [{}]; |acc_pred-Γ/l²| ≤ {identity_gap:.1e}", ss.join(", ")),
            start,
            None,
        ),
        reports,
    ))
}

fn stationary_ensemble(cfg: &BenchmarkConfig) -> Result<EnsembleRun> {
    let p = Potential::gaussian(1.0)?;
    let ecfg = EnsembleConfig {
        n_particles: cfg.particles,
        dt: cfg.dt,
        horizon: cfg.martingale_horizon,
        l: cfg.l,
        seed: derive_seed(cfg.seed, 9),
        init: InitialDistribution::Stationary { burnin: 0 },
        stratified_init: true,
    };
    let k = (cfg.martingale_horizon / cfg.martingale_spacing).round() as usize;
    let times: Vec<f64> = (0..=k).map(|i| (i as f64 * cfg.martingale_spacing).min(cfg.martingale_horizon)).collect();
    run_ensemble(&ecfg, &p, &times)
}

fn moment_bounds(cfg: &BenchmarkConfig, runs: &[(&str, &EnsembleRun)], sink: &mut Sink) -> Result<CriterionResult> {
    let start = Instant::now();
    let p = Potential::gaussian(1.0)?;
    let mut t = sink.table("moment_bound", &["run", "s", "t", "lhs", "lhs_se", "rhs", "pass"]);
    let (mut total, mut bad) = (0usize, 0usize);
    let mut tightest = f64::INFINITY;
    for (name, run) in runs {
        for r in moment_bound_check(run, cfg.l, p.v2_sup)? {
            total += 1;
            bad += usize::from(!r.pass);
            if r.t > r.s {
                tightest = tightest.min((r.rhs - r.lhs) / r.rhs);
            }
            t.push(vec![name.to_string(), f(r.s), f(r.t), f(r.lhs), f(r.lhs_se), f(r.rhs), r.pass.to_string()]);
        }
    }
    sink.add("moment_bound.csv", &t)?;
    Ok(criterion(
        8,
        "moment bound audit",
        bad == 0 && total > 0,
        format!("{total} (s,t) pairs, {bad} violations, smallest relative margin {tightest:.3}"),
        start,
        None,
    ))
}

fn martingale(cfg: &BenchmarkConfig, run: &EnsembleRun, sink: &mut Sink) -> Result<CriterionResult> {
    let start = Instant::now();
    let p = Potential::gaussian(1.0)?;
    let s = ScalingParams::new(cfg.l)?;
    let radius = taper_radius(&run.snapshots[0].particles, 0.999)?;
    let h = cfg.martingale_horizon;
    let snap = |x: f64| {
        run.snapshots.iter().map(|e| e.t).min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs())).unwrap_or(0.0)
    };
    let pairs = [(0.0, snap(0.25 * h)), (0.0, snap(0.5 * h)), (0.0, h), (snap(0.5 * h), h)];
    let mut t = sink.table("martingale", &["phi", "s", "t", "defect", "se", "tolerance", "pass"]);
    let (mut bad, mut worst) = (0usize, 0.0f64);
    for kind in [TaperKind::Linear, TaperKind::Square, TaperKind::Sine] {
        let phi = TestFunction::Taper { kind, radius };
        for &(a, b) in &pairs {
            let d = martingale_defect(run, &p, s, phi, a, b)?;
            let tol = 3.0 * (d.se + 5.0 * cfg.dt);
            let ok = d.defect.abs() <= tol;
            bad += usize::from(!ok);
            worst = worst.max(d.defect.abs() / tol);
            t.push(vec![phi.name(), f(a), f(b), f(d.defect), f(d.se), f(tol), ok.to_string()]);
        }
    }
    sink.add("martingale.csv", &t)?;
    Ok(criterion(
        9,
        "martingale defect",
        bad == 0,
        format!("{} defects, {bad} beyond tolerance, max |defect|/tol = {worst:.3}", 3 * pairs.len()),
        start,
        None,
    ))
}

/// Runs criteria 1–9 and collects every artifact in memory.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    let mut sink = Sink { base: cfg.manifest(), files: Vec::new() };
    let mut criteria = vec![
        closed_form_suite(cfg, &mut sink)?,
        coefficient_identities(&mut sink)?,
        optimal_scaling(&mut sink)?,
        stationary_chain(cfg, &mut sink)?,
    ];
    let start = Instant::now();
    let tr = run_transient(cfg)?;
    criteria.push(gaussian_transient(cfg, &tr, &mut sink, start)?);
    criteria.push(propagation_of_chaos(cfg, &tr, &mut sink)?);
    let (c7, _) = acceptance_rates(cfg, &tr, &mut sink)?;
    criteria.push(c7);
    let stat = stationary_ensemble(cfg)?;
    criteria.push(moment_bounds(cfg, &[("transient", &tr.limit), ("stationary", &stat)], &mut sink)?);
    criteria.push(martingale(cfg, &stat, &mut sink)?);
    let mut ct = sink.table("criteria", &["id", "name", "pass", "detail"]);
    for c in &criteria {
        ct.push(vec![c.id.to_string(), c.name.to_string(), c.pass.to_string(), c.detail.clone()]);
    }
    sink.add("criteria.csv", &ct)?;
    Ok(BenchmarkOutput { criteria, files: sink.files })
}

/// Criterion 10 from two runs of the same configuration.
pub fn determinism_criterion(a: &BenchmarkOutput, b: &BenchmarkOutput, what: &str) -> CriterionResult {
    let same_names = a.files.iter().map(|f| &f.0).eq(b.files.iter().map(|f| &f.0));
    let diff: Vec<&str> = a.files.iter().zip(&b.files).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    let pass = same_names && diff.is_empty();
    let detail = if pass {
        format!("{} files byte-identical ({what})", a.files.len())
    } else {
        format!("differences in [{}] ({what})", diff.join(", "))
    };
    CriterionResult { id: 10, name: "determinism", pass, detail, elapsed: Duration::ZERO, budget: None }
}
