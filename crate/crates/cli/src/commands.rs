use crate::input::{read_matrix, symmetrized};
use crate::output::{RunManifest, Sink};
use crate::plot::gnuplot_script;
use crate::{
    CliError, CliResult, EstimateArgs, ExperimentArgs, ExperimentName, GeometryArgs, InfoLossArgs, Method, ReplayArgs,
};
use eigengeo::experiments::{
    bias_to_csv, figure3_grid, fmt_num, BIAS_SCHEMA, POWER_SCHEMA, RISK_SCHEMA,
};
use eigengeo::geometry::oracle::{curvature_oracle_a, fd_metric};
use eigengeo::spd::pairs;
use eigengeo::*;
use nalgebra::DMatrix;
use serde_json::json;
use std::fmt::Write as _;
use std::path::Path;

pub const GEOMETRY_SCHEMA: &str = "eigengeo.geometry.v1";
pub const INFO_LOSS_SCHEMA: &str = "eigengeo.info_loss.v1";
pub const ESTIMATE_SCHEMA: &str = "eigengeo.estimate.v1";

/// 1-based index label, one `_`-separated group per index tuple. Digits in a
/// group run together below dimension 10 and are joined by `.` from there on.
fn label(prefix: &str, groups: &[&[usize]], p: usize) -> String {
    let sep = if p < 10 { "" } else { "." };
    let mut out = prefix.to_string();
    for g in groups {
        let parts: Vec<String> = g.iter().map(|i| (i + 1).to_string()).collect();
        out.push('_');
        out.push_str(&parts.join(sep));
    }
    out
}

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

pub fn geometry(a: &GeometryArgs, args: &[String]) -> CliResult<()> {
    let lambda = &a.lambda;
    let p = lambda.len();
    let metric = metric_spectral(lambda)?;
    let tensor = curvature_tensor(lambda)?;
    let gamma = statistical_curvature(lambda)?;
    let ps = pairs(p);

    let mut rows: Vec<(String, f64, Option<f64>)> = Vec::new();
    for (i, g) in metric.g_lambda().iter().enumerate() {
        rows.push((label("g", &[&[i, i]], p), *g, None));
    }
    for (k, g) in metric.g_u().iter().enumerate() {
        rows.push((label("g_u", &[&[ps[k].0, ps[k].1]], p), *g, None));
    }
    for (k, &(s, t)) in ps.iter().enumerate() {
        for (i, h) in tensor.slab(k).iter().enumerate() {
            rows.push((label("H", &[&[s, t], &[s, t], &[i]], p), *h, None));
        }
    }

    let mut max_dev = None;
    if a.check_fd {
        let sp = Spectrum::diagonal(lambda.clone())?;
        let dense = fd_metric(&sp);
        let mut oracle = Vec::with_capacity(rows.len());
        for i in 0..p + ps.len() {
            oracle.push(dense[(i, i)]);
        }
        for &(s, t) in &ps {
            for i in 0..p {
                oracle.push(curvature_oracle_a(&sp, (s, t), (s, t), i)?);
            }
        }
        let mut worst = 0.0f64;
        for (row, o) in rows.iter_mut().zip(oracle) {
            worst = worst.max(rel_dev(row.1, o));
            row.2 = Some(o);
        }
        max_dev = Some(worst);
    }
    rows.push(("gamma_A".into(), gamma, None));

    let mut csv = format!("# schema={GEOMETRY_SCHEMA} p={p}\n");
    match max_dev {
        None => {
            csv.push_str("quantity,value\n");
            for (name, v, _) in &rows {
                let _ = writeln!(csv, "{name},{}", fmt_num(*v));
            }
        }
        Some(worst) => {
            csv.push_str("quantity,value,fd_value,rel_dev,max_dev\n");
            for (name, v, o) in &rows {
                let (fd, dev) = match o {
                    Some(o) => (fmt_num(*o), fmt_num(rel_dev(*v, *o))),
                    None => (String::new(), String::new()),
                };
                let _ = writeln!(csv, "{name},{},{fd},{dev},{}", fmt_num(*v), fmt_num(worst));
            }
        }
    }

    let mut sink = Sink::new(a.out.as_deref())?;
    sink.emit("geometry.csv", GEOMETRY_SCHEMA, &csv)?;
    sink.finish(
        "geometry",
        args,
        json!({ "lambda": lambda, "check_fd": a.check_fd }),
        None,
        json!({ "gamma_A": gamma, "max_dev": max_dev }),
    )
}

pub fn info_loss(a: &InfoLossArgs, args: &[String]) -> CliResult<()> {
    let lambda = &a.lambda;
    let p = lambda.len();
    let b = loss_first_order(lambda)?;
    let carried = a.n.map(|n| info_carried_by_l(lambda, n)).transpose()?;

    let mut csv = format!("# schema={INFO_LOSS_SCHEMA} p={p}");
    if let Some(n) = a.n {
        let _ = write!(csv, " n={n}");
    }
    csv.push('\n');
    let flag = carried.as_ref().map(|c| (!c.positive_definite).to_string());
    csv.push_str(if flag.is_some() { "quantity,value,non_pd\n" } else { "quantity,value\n" });
    let mut push = |name: String, v: f64| {
        let _ = match &flag {
            Some(f) => writeln!(csv, "{name},{},{f}", fmt_num(v)),
            None => writeln!(csv, "{name},{}", fmt_num(v)),
        };
    };
    for i in 0..p {
        for j in 0..p {
            push(label("B", &[&[i, j]], p), b.get(i, j));
        }
    }
    if let Some(c) = &carried {
        for i in 0..p {
            for j in 0..p {
                push(label("carried", &[&[i, j]], p), c.matrix[(i, j)]);
            }
        }
    }
    if let Some(c) = &carried {
        if !c.positive_definite {
            eprintln!("warning: first-order information matrix is not positive definite; the expansion has broken down");
        }
    }

    let mut sink = Sink::new(a.out.as_deref())?;
    sink.emit("info_loss.csv", INFO_LOSS_SCHEMA, &csv)?;
    sink.finish(
        "info-loss",
        args,
        json!({ "lambda": lambda, "n": a.n }),
        None,
        json!({ "non_pd": carried.map(|c| !c.positive_definite) }),
    )
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Lbar => "lbar",
        Method::GammaFrame => "gamma-frame",
        Method::Star => "star",
    }
}

pub fn estimate(a: &EstimateArgs, args: &[String]) -> CliResult<()> {
    let s = SpdMatrix::new(symmetrized(&read_matrix(&a.input)?)?)?;
    let p = s.dim();
    let mut csv = format!("# schema={ESTIMATE_SCHEMA} p={p} n={}\nmethod,", a.n);
    let cols: Vec<String> = (1..=p).map(|i| format!("lambda{i}")).collect();
    csv.push_str(&cols.join(","));
    csv.push_str(",meta\n");

    let spec = a.ensemble.unwrap_or(EnsembleSpec::estimation_default(p));
    for &m in &a.method {
        let (est, meta) = match m {
            Method::Lbar => (lbar(&s, a.n)?, String::new()),
            Method::GammaFrame => {
                let gamma = if a.gamma == "identity" {
                    DMatrix::identity(p, p)
                } else {
                    read_matrix(Path::new(&a.gamma))?
                };
                (lambda_hat(&s, a.n, &gamma)?, format!("gamma={}", a.gamma))
            }
            Method::Star => {
                let ens = spec.build(p, a.seed)?;
                (lambda_star(&s, a.n, &ens)?, format!("ensemble={spec}"))
            }
        };
        let vals: Vec<String> = est.lambda_hat.iter().map(|v| fmt_num(*v)).collect();
        let _ = writeln!(csv, "{},{},{meta}", method_name(m), vals.join(","));
    }

    let mut sink = Sink::new(a.out.as_deref())?;
    sink.emit("estimate.csv", ESTIMATE_SCHEMA, &csv)?;
    let methods: Vec<&str> = a.method.iter().map(|m| method_name(*m)).collect();
    sink.finish(
        "estimate",
        args,
        json!({
            "input": a.input,
            "n": a.n,
            "methods": methods,
            "gamma": a.gamma,
            "ensemble": spec.to_string(),
        }),
        Some(a.seed),
        serde_json::Value::Null,
    )
}

fn experiment_config(a: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let exp = match a.name {
        ExperimentName::Fig3 => Experiment::Figure3,
        ExperimentName::Fig4 => Experiment::Figure4,
        ExperimentName::Fig5 => Experiment::Figure5,
        ExperimentName::Fig6 => Experiment::Figure6,
        ExperimentName::Bias => Experiment::Bias,
    };
    let reps = a.reps.unwrap_or(exp.reps(a.paper_scale));
    let mut cfg = if exp == Experiment::Bias {
        let lambda = match (&a.lambda, a.p) {
            (Some(l), Some(p)) if l.len() != p => {
                return Err(CliError::Input(format!("--lambda has {} values but --p is {p}", l.len())))
            }
            (Some(l), _) => l.clone(),
            (None, p) => vec![1.0; p.unwrap_or(2)],
        };
        ExperimentConfig::bias(&lambda, a.n, reps, a.seed)
    } else {
        if a.lambda.is_some() {
            return Err(CliError::Input(format!("--lambda is not used by {}", exp.name())));
        }
        let mut cfg = ExperimentConfig::standard(exp, reps, a.seed);
        if let Some(p) = a.p {
            cfg.p = p;
        }
        cfg.n = a.n;
        cfg
    };
    if a.full_grid && exp != Experiment::Figure3 {
        return Err(CliError::Input("--full-grid applies to fig3 only".into()));
    }
    if exp == Experiment::Figure3 && (a.full_grid || a.paper_scale) {
        cfg.grid = figure3_grid();
    }
    if let Some(spec) = a.ensemble {
        if cfg.ensemble.is_none() {
            return Err(CliError::Input(format!("{} does not use a quadrature ensemble", exp.name())));
        }
        cfg.ensemble = Some(spec);
    }
    cfg.alpha = a.alpha;
    cfg.validate()?;
    Ok(cfg)
}

pub fn experiment(a: &ExperimentArgs, args: &[String]) -> CliResult<()> {
    if a.plot && a.out.is_none() {
        return Err(CliError::Input("--plot needs --out".into()));
    }
    let cfg = experiment_config(a)?;
    let name = cfg.experiment.name();
    let csv_name = format!("{name}.csv");
    let mut sink = Sink::new(a.out.as_deref())?;

    let summary = match cfg.experiment {
        Experiment::Figure3 => {
            let r = figure3_experiment(&cfg)?;
            sink.emit(&csv_name, POWER_SCHEMA, &r.to_csv())?;
            if a.plot {
                let script = gnuplot_script(
                    &csv_name,
                    "power",
                    2,
                    "theta",
                    "rejection rate",
                    &[("full", 5, 6), ("eigenvalues", 7, 8)],
                );
                sink.emit(&format!("{name}.plot"), "gnuplot", &script)?;
            }
            let max_diff = r.rows.iter().map(|row| row.difference().0).fold(0.0, f64::max);
            json!({
                "size_full": r.size_full.rejection_rate,
                "size_eigen": r.size_eigen.rejection_rate,
                "threshold_full": r.critical_full.threshold,
                "threshold_eigen": r.critical_eigen.threshold,
                "max_power_difference": max_diff,
            })
        }
        Experiment::Figure4 | Experiment::Figure5 | Experiment::Figure6 => {
            let r = match cfg.experiment {
                Experiment::Figure4 => figure4_experiment(&cfg)?,
                Experiment::Figure5 => figure5_experiment(&cfg)?,
                _ => figure6_experiment(&cfg)?,
            };
            sink.emit(&csv_name, RISK_SCHEMA, &r.to_csv())?;
            if a.plot {
                let labels: Vec<&str> = r.estimators.iter().map(String::as_str).collect();
                let script = gnuplot_script(
                    &csv_name,
                    "KL risk",
                    1,
                    &r.param_name,
                    "risk",
                    &[(labels[0], 4, 5), (labels[1], 6, 7)],
                );
                sink.emit(&format!("{name}.plot"), "gnuplot", &script)?;
            }
            let first = &r.rows[0];
            let mut s = json!({
                "estimators": r.estimators,
                "first_point": first.param,
                "risk_ratio_at_first_point": first.risks[0].mean / first.risks[1].mean,
            });
            if cfg.experiment == Experiment::Figure5 {
                let crossover = figure5_crossover(&r);
                match crossover {
                    Some(t) => eprintln!("fixed-frame risk first exceeds lbar at theta = {t}"),
                    None => eprintln!("fixed-frame risk stays below lbar on the whole grid"),
                }
                s["crossover_theta"] = json!(crossover);
            }
            s
        }
        Experiment::Bias => {
            if a.plot {
                return Err(CliError::Input("bias has no plot".into()));
            }
            let r = bias_experiment(&cfg)?;
            sink.emit(&csv_name, BIAS_SCHEMA, &bias_to_csv(&r))?;
            if !r.all_hold() {
                eprintln!("warning: not every partial-sum inequality is resolved beyond three standard errors");
            }
            json!({ "all_hold": r.all_hold(), "trace_max_rel_error": r.trace_max_rel_error })
        }
    };
    let config = serde_json::to_value(&cfg).map_err(|e| CliError::Input(e.to_string()))?;
    sink.finish("experiment", args, config, Some(cfg.seed), summary)
}

/// `args` with any `--out` removed and `--out dir` appended.
fn redirect_out(args: &[String], dir: &Path) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len() + 2);
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out.push("--out".into());
    out.push(dir.to_string_lossy().into_owned());
    out
}

pub fn replay(a: &ReplayArgs) -> CliResult<()> {
    let manifest = RunManifest::read(&a.manifest)?;
    if manifest.command == "replay" {
        return Err(CliError::Input("cannot replay a replay".into()));
    }
    let original = a.manifest.parent().unwrap_or(Path::new("."));
    crate::run(redirect_out(&manifest.args, &a.out))?;

    let mut mismatched = Vec::new();
    for f in &manifest.outputs {
        let read = |dir: &Path| {
            let path = dir.join(&f.path);
            std::fs::read(&path).map_err(|source| CliError::Io { path, source })
        };
        if read(original)? == read(&a.out)? {
            println!("identical {}", f.path);
        } else {
            mismatched.push(f.path.clone());
        }
    }
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(CliError::Mismatch(mismatched.join(", ")))
    }
}
