//! The five subcommands. Each returns its config echo, its JSON result and,
//! where a natural table exists, the rows for CSV output.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};

use dcrep::asymptotics::{
    alt_example_constants, family_small_h_limits, phase_transition_alpha, small_h_limits_3, stable_limit_report,
    stable_order2_limit_101_symmetric, g_ptalpha, stable_q_limits, Family3, Order2, SmallHStatus, StableFamily,
};
use dcrep::conditions::{
    ab_region_classify, classify_degenerate, classify_large_h_3, is_dgff, savage_report, Degenerate, LargeH,
};
use dcrep::dc_solver::{
    lp_feasibility, signed_rep_3, square_circle_solver, symmetric_rep_family_3, FeasibilityResult, TolPolicy,
};
use dcrep::embeddings::{
    ou_partition_samples, sign_law, stable_chain_partition_samples, verify_color_property, EmbeddingSample,
};
use dcrep::gaussian_law::{
    bivariate_threshold_exact, square_threshold_law, threshold_law_mc, zero_threshold_law_3, CovarianceSpec,
};
use dcrep::partitions::{simulate_color_process, BinaryLaw};
use dcrep::report::{ClassificationReport, Regime, Verdict};
use dcrep::rng::CHUNK;
use dcrep::special::norm_sf;
use dcrep::stable_law::{stable_threshold_law_mc, StableLinearModel};
use dcrep::stats::chi_square;
use serde_json::{json, Map, Value};

use crate::model::{parse_model, Model, ModelKind, Preset};
use crate::output::{num, Table};
use crate::{CliError, Common, RegimeArg, ScanKind};

pub const DEFAULT_MC_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_SIM_SAMPLES: u64 = 100_000;

pub struct Outcome {
    pub config: Value,
    pub result: Value,
    pub table: Option<Table>,
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn echo(c: &Common, command: &str, samples: u64, policy: &TolPolicy, extra: Value) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("model".into(), json!(c.model));
    m.insert("h".into(), json!(c.h));
    m.insert("p".into(), json!(c.p));
    m.insert("samples".into(), json!(samples));
    m.insert("seed".into(), json!(c.seed()));
    m.insert("tolerances".into(), to_value(policy));
    m.insert("mc_chunk".into(), json!(CHUNK));
    m.insert("format".into(), to_value(&c.format()));
    if let Value::Object(e) = extra {
        m.extend(e);
    }
    Value::Object(m)
}

fn require_model(c: &Common) -> Result<Model, CliError> {
    let spec = c.model.as_deref().ok_or_else(|| CliError::Usage("--model is required".into()))?;
    parse_model(spec)
}

fn model_summary(m: &Model) -> Value {
    match &m.kind {
        ModelKind::Gaussian(cov) => json!({"type": "gaussian", "covariance": to_value(cov), "pd": cov.is_pd(), "rank": cov.rank()}),
        ModelKind::Stable(s) => json!({"type": "stable", "model": to_value(s), "standardized": s.is_standardized()}),
        ModelKind::Law(l) => json!({"type": "law", "law": to_value(l)}),
    }
}

fn bivariate_law(cov: &CovarianceSpec, h: f64) -> Result<BinaryLaw, CliError> {
    let p11 = bivariate_threshold_exact(cov.a(0, 1), h)?;
    let p1 = norm_sf(h);
    Ok(BinaryLaw::new(2, vec![1.0 - 2.0 * p1 + p11, p1 - p11, p1 - p11, p11])?)
}

/// The law of the thresholded vector at h: exact where a closed form or
/// quadrature exists, Monte Carlo otherwise.
fn law_at(m: &Model, h: f64, samples: u64, seed: u64) -> Result<(BinaryLaw, &'static str), CliError> {
    Ok(match &m.kind {
        ModelKind::Gaussian(cov) => match m.preset {
            Preset::Square { theta } => (square_threshold_law(theta, h)?, "exact-conditioning"),
            _ if cov.n() == 3 && h == 0.0 && cov.is_standard() => (zero_threshold_law_3(cov)?, "exact-arccos"),
            _ if cov.n() == 2 && cov.is_standard() => (bivariate_law(cov, h)?, "exact-bivariate"),
            _ => (threshold_law_mc(cov, h, samples, seed)?, "monte-carlo"),
        },
        ModelKind::Stable(s) => (stable_threshold_law_mc(s, h, samples, seed)?, "monte-carlo"),
        ModelKind::Law(l) => (l.clone(), "given"),
    })
}

fn feasibility(m: &Model, law: &BinaryLaw, p: Option<f64>, policy: TolPolicy) -> Result<FeasibilityResult, CliError> {
    Ok(match m.preset {
        Preset::Square { .. } if p.is_none() => square_circle_solver(law, policy)?,
        _ => lp_feasibility(law, p, policy)?,
    })
}

fn fixed_h_report(res: &FeasibilityResult, h: Option<f64>, method: &str) -> ClassificationReport {
    let r = match h {
        Some(0.0) => ClassificationReport::new(res.verdict(), Regime::ZeroH, "lp-feasibility").at(0.0),
        Some(h) => ClassificationReport::new(res.verdict(), Regime::FixedH, "lp-feasibility").at(h),
        None => ClassificationReport::new(res.verdict(), Regime::FixedH, "lp-feasibility"),
    };
    r.with_detail(format!("{:?} from a {method} law, phase-I margin {:e}", res.status, res.margin))
}

fn large_h_report(v: LargeH, method: &str, detail: String) -> ClassificationReport {
    let verdict = match v {
        LargeH::ColorForLargeH => Verdict::ColorRep,
        LargeH::NotColorForLargeH => Verdict::NoColorRep,
        LargeH::OutOfScope => Verdict::Undetermined,
    };
    ClassificationReport::new(verdict, Regime::LargeH, method).with_detail(detail)
}

fn small_h_report(status: SmallHStatus) -> ClassificationReport {
    let verdict = match status {
        SmallHStatus::ColorForSmallH => Verdict::ColorRep,
        SmallHStatus::NotColorForSmallH => Verdict::NoColorRep,
        SmallHStatus::Borderline => Verdict::Undetermined,
    };
    ClassificationReport::new(verdict, Regime::SmallH, "small-h-limits")
}

pub fn analyze(c: &Common, regime: RegimeArg) -> Result<Outcome, CliError> {
    let model = require_model(c)?;
    let policy = c.policy()?;
    let samples = c.samples.unwrap_or(DEFAULT_MC_SAMPLES);
    let want = |r: RegimeArg| regime == RegimeArg::All || regime == r;
    let mut out = Map::new();
    out.insert("model".into(), model_summary(&model));
    let mut reports = Vec::new();

    match &model.kind {
        ModelKind::Gaussian(cov) => {
            if cov.is_pd() {
                out.insert("conditions".into(), to_value(&savage_report(cov)?));
            } else {
                out.insert("dgff".into(), to_value(&is_dgff(cov)));
            }
            if want(RegimeArg::LargeH) {
                if !cov.is_pd() {
                    let d = classify_degenerate(cov)?;
                    for item in &d {
                        reports.push(match item {
                            Degenerate::NotColorAnyPositiveH { support, .. } => {
                                ClassificationReport::new(Verdict::NoColorRep, Regime::AllH, "degenerate-null-vector")
                                    .with_detail(format!("every h > 0; null vector support {support:?}"))
                            }
                            Degenerate::NotColorForLargeH { rank } => large_h_report(
                                LargeH::NotColorForLargeH,
                                "degenerate-rank",
                                format!("singular covariance of rank {rank}"),
                            ),
                        });
                    }
                    out.insert("degenerate".into(), to_value(&d));
                } else if cov.n() == 3 {
                    let v = classify_large_h_3(cov)?;
                    out.insert("large_h".into(), to_value(&v));
                    reports.push(large_h_report(v.verdict, "large-h-classifier", format!("case {}", v.case_tag.as_str())));
                }
            }
            if want(RegimeArg::SmallH) && cov.n() == 3 && cov.is_pd() && cov.is_standard() {
                let l = small_h_limits_3(cov)?;
                reports.push(small_h_report(l.status));
                out.insert("small_h".into(), to_value(&l));
            }
        }
        ModelKind::Stable(s) => {
            if want(RegimeArg::LargeH) {
                let r = stable_limit_report(&s.spectral_measure()?, model.stable_family())?;
                reports.push(large_h_report(r.verdict, "stable-tail-limits", r.reason.clone()));
                out.insert("large_h".into(), to_value(&r));
            }
        }
        ModelKind::Law(_) => {}
    }

    let h = match regime {
        RegimeArg::ZeroH => Some(0.0),
        _ => c.h,
    };
    let fixed = matches!(model.kind, ModelKind::Law(_)) || h.is_some();
    if fixed && (want(RegimeArg::FixedH) || want(RegimeArg::ZeroH)) {
        let (law, method) = law_at(&model, h.unwrap_or(0.0), samples, c.seed())?;
        let res = feasibility(&model, &law, c.p, policy)?;
        reports.push(fixed_h_report(&res, h, method));
        out.insert("law".into(), json!({"method": method, "law": to_value(&law)}));
        out.insert("feasibility".into(), to_value(&res));
    }
    out.insert("reports".into(), to_value(&reports));
    Ok(Outcome {
        config: echo(c, "analyze", samples, &policy, json!({"regime": regime})),
        result: Value::Object(out),
        table: None,
    })
}

pub fn solve(c: &Common) -> Result<Outcome, CliError> {
    let model = require_model(c)?;
    let policy = c.policy()?;
    let samples = c.samples.unwrap_or(DEFAULT_MC_SAMPLES);
    let h = c.h.unwrap_or(0.0);
    let (law, method) = law_at(&model, h, samples, c.seed())?;
    let res = feasibility(&model, &law, c.p, policy)?;
    let mut out = Map::new();
    out.insert("law".into(), json!({"method": method, "h": h, "law": to_value(&law)}));
    out.insert("feasibility".into(), to_value(&res));
    if law.n() == 3 {
        match signed_rep_3(&law) {
            Ok(s) => {
                out.insert("signed_rep_3".into(), to_value(&s));
            }
            Err(_) => {
                if let Ok(f) = symmetric_rep_family_3(&law) {
                    out.insert("symmetric_family_3".into(), to_value(&f));
                }
            }
        }
    }
    Ok(Outcome { config: echo(c, "solve", samples, &policy, json!({})), result: Value::Object(out), table: None })
}

fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Usage(format!("step {step} must be positive")));
    }
    // interior points k·step of (lo, hi), computed by multiplication
    let first = (lo / step).floor() as i64 + 1;
    let pts: Vec<f64> = (first..).map(|k| k as f64 * step).take_while(|x| *x < hi - 1e-12).collect();
    if pts.is_empty() {
        return Err(CliError::Usage("empty grid".into()));
    }
    Ok(pts)
}

fn ab_rows(step: f64) -> Result<Table, CliError> {
    let pts = grid(0.0, 1.0, step)?;
    let columns = [
        "a", "b", "pd", "dgff", "large_h_color", "markov_boundary", "small_h_feasible", "large_h_case", "savage_min",
    ];
    let mut rows = Vec::with_capacity(pts.len() * pts.len());
    for &a in &pts {
        for &b in &pts {
            let r = ab_region_classify(a, b)?;
            let small = if r.pd {
                let (x, y, z) = r.small_h_inputs;
                match small_h_limits_3(&CovarianceSpec::standard3(x, y, z)?)?.status {
                    SmallHStatus::ColorForSmallH => json!(true),
                    SmallHStatus::NotColorForSmallH => json!(false),
                    SmallHStatus::Borderline => json!("borderline"),
                }
            } else {
                Value::Null
            };
            rows.push(vec![
                num(a),
                num(b),
                json!(r.pd),
                json!(r.dgff),
                json!(r.large_h_color),
                json!(r.markov_boundary),
                small,
                json!(r.large_h_case.map(|t| t.as_str())),
                r.savage_min.map(num).unwrap_or(Value::Null),
            ]);
        }
    }
    Ok(Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows })
}

fn ptalpha_rows(step: f64, a: f64) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for alpha in grid(0.0, 2.0, step)? {
        let model = StableLinearModel::ptalpha12(a, alpha)?;
        let measure = model.spectral_measure()?;
        let q = stable_q_limits(&measure)?;
        let o2 = stable_order2_limit_101_symmetric(a, alpha)?;
        let r = stable_limit_report(&measure, StableFamily::PtAlpha12 { a })?;
        rows.push(vec![
            num(alpha),
            num(a),
            num(q[4]),
            num(q[0]),
            match o2 {
                Order2::Finite(v) => num(v),
                Order2::Infinite => json!("inf"),
            },
            if alpha < 1.0 { num(g_ptalpha(alpha)) } else { json!("inf") },
            to_value(&r.verdict),
        ]);
    }
    let columns = ["alpha", "a", "q_1_2_3_limit", "q_123_limit", "order2_101", "g", "large_h_verdict"];
    Ok(Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows })
}

fn square_rows(step: f64, h: f64, policy: TolPolicy) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for theta in grid(0.0, FRAC_PI_2, step)? {
        let law = square_threshold_law(theta, h)?;
        let res = square_circle_solver(&law, policy)?;
        let gap = FRAC_PI_8 - ((theta.cos().powi(2)).acos() - theta);
        rows.push(vec![num(theta), num(h), to_value(&res.status), num(res.margin), num(gap)]);
    }
    let columns = ["theta", "h", "status", "margin", "analytic_gap"];
    Ok(Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows })
}

fn alt_rows(step: f64) -> Result<Table, CliError> {
    let pts = grid(0.0, std::f64::consts::FRAC_1_SQRT_2, step)?;
    let mut rows = Vec::new();
    for &a in &pts {
        for &b in &pts {
            if 2.0 * a * a + 2.0 * b * b >= 1.0 {
                continue;
            }
            let k = alt_example_constants(a, b)?;
            rows.push(vec![num(a), num(b), num(k.c1), k.c2.map(num).unwrap_or(json!("inf")), to_value(&k.regime)]);
        }
    }
    let columns = ["a", "b", "c1", "c2", "regime"];
    Ok(Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows })
}

pub fn scan(c: &Common, kind: ScanKind, step: Option<f64>, a: f64) -> Result<Outcome, CliError> {
    let policy = c.policy()?;
    let step = step.unwrap_or(if kind == ScanKind::Ab { 0.005 } else { 0.01 });
    let table = match kind {
        ScanKind::Ab => ab_rows(step)?,
        ScanKind::Ptalpha => ptalpha_rows(step, a)?,
        ScanKind::Square => square_rows(step, c.h.unwrap_or(0.0), policy)?,
        ScanKind::Alt => alt_rows(step)?,
    };
    let mut extra = json!({"kind": kind, "step": step});
    if kind == ScanKind::Ptalpha {
        extra["a"] = json!(a);
    }
    let result = json!({"columns": table.columns, "rows": table.records()});
    Ok(Outcome { config: echo(c, "scan", 0, &policy, extra), result, table: Some(table) })
}

fn tamper(samples: &mut [EmbeddingSample]) {
    for x in samples.iter_mut() {
        let blocks = x.partition.blocks();
        if blocks.len() >= 2 {
            let colour = x.signs[blocks[0][0]];
            for &i in &blocks[1] {
                x.signs[i] = colour;
            }
        }
    }
}

/// Cell-wise agreement of two estimated laws, in combined standard errors.
fn law_gap(x: &BinaryLaw, mx: u64, y: &BinaryLaw, my: Option<u64>) -> f64 {
    x.probs()
        .iter()
        .zip(y.probs())
        .map(|(p, q)| {
            let mut var = p * (1.0 - p) / mx as f64;
            if let Some(my) = my {
                var += q * (1.0 - q) / my as f64;
            }
            let se = var.sqrt().max(1.0 / mx as f64);
            (p - q).abs() / se
        })
        .fold(0.0, f64::max)
}

fn sample_table(samples: &[EmbeddingSample]) -> Table {
    let n = samples.first().map_or(0, |s| s.n());
    let mut columns: Vec<String> = (1..=n).map(|i| format!("sign_{i}")).collect();
    columns.push("partition".into());
    columns.extend((1..n).map(|i| format!("cross_{i}")));
    let rows = samples
        .iter()
        .map(|s| {
            let mut row: Vec<Value> = s.signs.iter().map(|v| json!(v)).collect();
            row.push(json!(s.partition.key()));
            row.extend(s.path_meta.iter().map(|p| num(*p)));
            row
        })
        .collect();
    Table { columns, rows }
}

pub fn simulate(c: &Common, tampered: bool, significance: f64) -> Result<Outcome, CliError> {
    let model = require_model(c)?;
    let policy = c.policy()?;
    let m = c.samples.unwrap_or(DEFAULT_SIM_SAMPLES);
    let seed = c.seed();
    let mut out = Map::new();
    out.insert("model".into(), model_summary(&model));
    let embedding = match (&model.kind, model.preset) {
        (ModelKind::Gaussian(cov), Preset::Markov { a }) => {
            let mut s = ou_partition_samples(a, cov.n(), m, seed)?;
            let reference = if cov.n() == 3 {
                let exact = zero_threshold_law_3(cov)?;
                let law = sign_law(&s)?;
                let counts: Vec<u64> = law.probs().iter().map(|p| (p * m as f64).round() as u64).collect();
                let (stat, dof, pv) = chi_square(&counts, exact.probs());
                json!({"method": "chi-square against the exact law", "statistic": num(stat), "dof": dof, "p_value": num(pv), "passed": pv >= significance})
            } else {
                let mc = threshold_law_mc(cov, 0.0, m, seed.wrapping_add(1))?;
                let z = law_gap(&sign_law(&s)?, m, &mc, Some(m));
                json!({"method": "threshold Monte Carlo, 4 SE per cell", "max_z": num(z), "passed": z <= 4.0})
            };
            if tampered {
                tamper(&mut s);
            }
            out.insert("embedding".into(), json!("ornstein-uhlenbeck"));
            out.insert("law_check".into(), reference);
            Some(s)
        }
        (ModelKind::Stable(sm), Preset::StableMarkov { a }) => {
            let mut s = stable_chain_partition_samples(sm.alpha(), a, sm.d(), m, seed)?;
            let mc = stable_threshold_law_mc(sm, 0.0, m, seed.wrapping_add(1))?;
            let z = law_gap(&sign_law(&s)?, m, &mc, Some(m));
            out.insert("embedding".into(), json!("subordinated-brownian"));
            out.insert(
                "law_check".into(),
                json!({"method": "threshold Monte Carlo, 4 SE per cell", "max_z": num(z), "passed": z <= 4.0}),
            );
            if tampered {
                tamper(&mut s);
            }
            Some(s)
        }
        _ if tampered => {
            return Err(CliError::Usage("--tamper needs an embedding model (markov3:a, markov:n,a or smarkov:n,a,alpha)".into()))
        }
        (ModelKind::Law(law), _) => {
            let res = lp_feasibility(law, c.p, policy)?;
            let Some(q) = res.q.clone().filter(|_| res.is_feasible()) else {
                out.insert("feasibility".into(), to_value(&res));
                return Ok(Outcome {
                    config: echo(c, "simulate", m, &policy, json!({"tamper": tampered, "significance": significance})),
                    result: Value::Object(out),
                    table: None,
                });
            };
            let p = c.p.map_or_else(|| law.common_marginal(law.marginal_tolerance()), Ok)?;
            let sim = simulate_color_process(&q, p, m as usize, seed)?;
            let z = law_gap(&sim.law, m, law, law.samples());
            out.insert("feasibility".into(), to_value(&res));
            out.insert(
                "law_check".into(),
                json!({"method": "color process from the solved representation, 4 SE per cell", "max_z": num(z), "passed": z <= 4.0}),
            );
            if p == 0.5 {
                let s: Vec<EmbeddingSample> = sim
                    .samples
                    .iter()
                    .zip(&sim.partitions)
                    .map(|(rho, sigma)| EmbeddingSample {
                        signs: (0..law.n()).map(|i| if rho >> (law.n() - 1 - i) & 1 == 1 { 1 } else { -1 }).collect(),
                        partition: *sigma,
                        path_meta: Vec::new(),
                        values: Vec::new(),
                    })
                    .collect();
                Some(s)
            } else {
                None
            }
        }
        (kind, _) => {
            let h = c.h.unwrap_or(0.0);
            let (law, method) = match kind {
                ModelKind::Gaussian(cov) => (threshold_law_mc(cov, h, m, seed)?, "gaussian threshold Monte Carlo"),
                ModelKind::Stable(s) => (stable_threshold_law_mc(s, h, m, seed)?, "stable threshold Monte Carlo"),
                ModelKind::Law(_) => unreachable!(),
            };
            let res = lp_feasibility(&law, c.p, policy)?;
            out.insert("law".into(), json!({"method": method, "h": h, "law": to_value(&law)}));
            out.insert("feasibility".into(), to_value(&res));
            None
        }
    };
    let mut table = None;
    if let Some(s) = embedding {
        let check = verify_color_property(&s, significance, 4.0)?;
        out.insert("verification".into(), to_value(&check));
        if s.first().is_some_and(|x| !x.values.is_empty()) {
            table = Some(sample_table(&s));
        }
    }
    Ok(Outcome {
        config: echo(c, "simulate", m, &policy, json!({"tamper": tampered, "significance": significance})),
        result: Value::Object(out),
        table,
    })
}

pub fn asymptotics(c: &Common, phase: bool) -> Result<Outcome, CliError> {
    let policy = c.policy()?;
    let mut out = Map::new();
    if phase {
        out.insert("phase_transition".into(), to_value(&phase_transition_alpha()));
    }
    match c.model.as_deref() {
        None if phase => {}
        None => return Err(CliError::Usage("--model is required unless --phase is given".into())),
        Some(spec) => {
            let model = parse_model(spec)?;
            out.insert("model".into(), model_summary(&model));
            match &model.kind {
                ModelKind::Gaussian(cov) => {
                    if cov.n() != 3 || !cov.is_pd() || !cov.is_standard() {
                        return Err(CliError::Usage("Gaussian limits need a standard positive definite 3x3 covariance".into()));
                    }
                    let l = small_h_limits_3(cov)?;
                    let family = match model.preset {
                        Preset::Symmetric { a } => Some((Family3::FullySymmetric, a)),
                        Preset::Markov { a } => Some((Family3::Markov, a)),
                        _ => None,
                    };
                    if let Some((f, a)) = family {
                        let w = family_small_h_limits(f, a)?;
                        let diff = w.iter().zip(l.weights()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                        out.insert("family_limits".into(), json!({"family": f, "limits": w, "max_diff": num(diff)}));
                    }
                    out.insert("small_h".into(), to_value(&l));
                    out.insert("large_h".into(), to_value(&classify_large_h_3(cov)?));
                }
                ModelKind::Stable(s) => {
                    let r = stable_limit_report(&s.spectral_measure()?, model.stable_family())?;
                    out.insert("large_h".into(), to_value(&r));
                    if let Preset::Alt { a, b } = model.preset {
                        let k = alt_example_constants(a, b)?;
                        out.insert("alt_constants".into(), json!({"constants": to_value(&k), "g_at_alpha": num(k.g(s.alpha()))}));
                    }
                }
                ModelKind::Law(_) => return Err(CliError::Usage("asymptotics needs a Gaussian or stable model".into())),
            }
        }
    }
    Ok(Outcome {
        config: echo(c, "asymptotics", 0, &policy, json!({"phase": phase})),
        result: Value::Object(out),
        table: None,
    })
}
