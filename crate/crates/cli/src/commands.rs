use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path as FsPath;

use serde::Serialize;
use truncvar::closed_form::{
    drawup_cdf_complement, eigen_roots, eigenroot_eta, exp_moment_upper_bound,
    expected_drawup_excess, expected_tc, hv_mean, hv_tail, sup_bm_mgf, tc_moment_ratio,
    SeriesConfig,
};
use truncvar::harness::{run_grid, BoundReport, HarnessConfig, Quantity, CLAIMS};
use truncvar::path::{generate_bm_path, generate_gbm_price_path, negate_path};
use truncvar::trading::{
    commission_threshold, log_price_utv, max_return_bound, optimal_trades, realized_return,
};
use truncvar::variation::{dtv_linear, tv_linear, utv_argmax_partition, utv_linear};
use truncvar::{Error, ModelParams, Path, SimConfig};

use crate::args::{
    Cli, ClosedForm, Command, ComputeArgs, Format, KindArg, PathKind, SimulateArgs, TradeArgs,
    VerifyArgs,
};
use crate::output::{csv, emit, json, table};
use crate::{EXIT_INTERNAL, EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED};

/// Relative tolerance of the trading identity guard.
const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Invariant(_) | Error::Numeric(_) => EXIT_INTERNAL,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult<u8> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Simulate(a) => simulate(a, out, cli.format),
        Command::Compute(a) => compute(a, out, cli.format),
        Command::ClosedForm(f) => closed_form(f, out, cli.format),
        Command::Verify(a) => verify(a, out, cli.format),
        Command::Trade(a) => trade(a, out, cli.format),
    }
}

fn read_path(p: &FsPath) -> CliResult<Path> {
    let f =
        File::open(p).map_err(|e| CliError::usage(format!("cannot open {}: {e}", p.display())))?;
    Path::read_csv(f).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))
}

/// Prints a flat list of named numbers in the requested format.
fn emit_fields<T: Serialize>(
    doc: &T,
    fields: &[(&str, String)],
    out: Option<&FsPath>,
    format: Format,
) -> CliResult<u8> {
    let text = match format {
        Format::Json => json(doc)?,
        Format::Csv => csv(&["name", "value"], &rows(fields)),
        Format::Table => table(&["name", "value"], &rows(fields)),
    };
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn rows(fields: &[(&str, String)]) -> Vec<Vec<String>> {
    fields
        .iter()
        .map(|(k, v)| vec![k.to_string(), v.clone()])
        .collect()
}

#[derive(Serialize)]
struct SimulateConfig {
    kind: &'static str,
    params: ModelParams,
    sim: SimConfig,
}

#[derive(Serialize)]
struct SimulateDoc {
    config: SimulateConfig,
    files: Vec<String>,
}

fn simulate(a: &SimulateArgs, out: Option<&FsPath>, format: Format) -> CliResult<u8> {
    let params = ModelParams::new(a.mu, a.sigma, 1.0, a.horizon)?;
    let sim = SimConfig::new(a.steps, a.paths, a.seed.seed)?;
    let dir = out.unwrap_or(FsPath::new("."));
    fs::create_dir_all(dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    let width = (sim.n_paths.max(2) - 1).to_string().len().max(4);
    let mut files = Vec::with_capacity(sim.n_paths);
    for i in 0..sim.n_paths {
        let path = match a.kind {
            PathKind::Bm => generate_bm_path(&params, sim.n_steps, sim.seed, i as u64)?,
            PathKind::Gbm => generate_gbm_price_path(&params, sim.n_steps, sim.seed, i as u64)?,
        };
        let name = format!("path_{i:0width$}.csv");
        let file = dir.join(&name);
        let f = File::create(&file)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", file.display())))?;
        path.write_csv(BufWriter::new(f))
            .map_err(|e| CliError::usage(format!("{}: {e}", file.display())))?;
        files.push(name);
    }
    let doc = SimulateDoc {
        config: SimulateConfig {
            kind: match a.kind {
                PathKind::Bm => "bm",
                PathKind::Gbm => "gbm",
            },
            params,
            sim,
        },
        files,
    };
    let meta = json(&doc)?;
    let meta_path = dir.join("simulate.json");
    fs::write(&meta_path, &meta)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", meta_path.display())))?;
    let fields = [
        ("paths", sim.n_paths.to_string()),
        ("steps", sim.n_steps.to_string()),
        ("seed", sim.seed.to_string()),
        ("directory", dir.display().to_string()),
    ];
    emit_fields(&doc, &fields, None, format)
}

#[derive(Serialize)]
struct ComputeConfig {
    input: String,
    c: f64,
    kind: &'static str,
    partition: bool,
}

#[derive(Serialize)]
struct ComputeDoc {
    config: ComputeConfig,
    len: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    utv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dtv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    partition: Option<Vec<(usize, usize)>>,
}

fn compute(a: &ComputeArgs, out: Option<&FsPath>, format: Format) -> CliResult<u8> {
    let path = read_path(&a.input)?;
    let v = path.values();
    let c = a.c;
    let want = |k: KindArg| a.kind == KindArg::All || a.kind == k;
    let partition = if a.partition {
        Some(match a.kind {
            KindArg::Utv => utv_argmax_partition(v, c)?.pairs,
            KindArg::Dtv => utv_argmax_partition(negate_path(&path).values(), c)?.pairs,
            _ => {
                return Err(CliError::usage(
                    "--partition needs --kind utv or --kind dtv",
                ))
            }
        })
    } else {
        None
    };
    let doc = ComputeDoc {
        config: ComputeConfig {
            input: a.input.display().to_string(),
            c,
            kind: match a.kind {
                KindArg::Tv => "tv",
                KindArg::Utv => "utv",
                KindArg::Dtv => "dtv",
                KindArg::All => "all",
            },
            partition: a.partition,
        },
        len: path.len(),
        tv: want(KindArg::Tv).then(|| tv_linear(v, c)).transpose()?,
        utv: want(KindArg::Utv).then(|| utv_linear(v, c)).transpose()?,
        dtv: want(KindArg::Dtv).then(|| dtv_linear(v, c)).transpose()?,
        partition,
    };
    let mut fields = Vec::new();
    for (name, val) in [("tv", doc.tv), ("utv", doc.utv), ("dtv", doc.dtv)] {
        if let Some(x) = val {
            fields.push((name, x.to_string()));
        }
    }
    if let Some(p) = &doc.partition {
        let pairs: Vec<String> = p.iter().map(|(t, s)| format!("{t}-{s}")).collect();
        fields.push(("partition", pairs.join(" ")));
    }
    emit_fields(&doc, &fields, out, format)
}

#[derive(Serialize)]
struct ClosedFormDoc {
    formula: &'static str,
    inputs: BTreeMap<&'static str, f64>,
    value: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    terms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
}

fn inputs(args: &[(&'static str, f64)]) -> BTreeMap<&'static str, f64> {
    args.iter().copied().collect()
}

fn closed_form(f: &ClosedForm, out: Option<&FsPath>, format: Format) -> CliResult<u8> {
    use serde_json::json as j;
    let scalar = |formula, args: &[(&'static str, f64)], v: f64| ClosedFormDoc {
        formula,
        inputs: inputs(args),
        value: j!(v),
        terms: None,
        residual: None,
    };
    let doc = match f {
        ClosedForm::ExpectedTc(b) => scalar(
            "expected-tc",
            &[("mu", b.mu), ("c", b.c)],
            expected_tc(b.mu, b.c)?,
        ),
        ClosedForm::MomentRatio(b) => scalar(
            "moment-ratio",
            &[("mu", b.mu), ("c", b.c)],
            tc_moment_ratio(b.mu, b.c)?,
        ),
        ClosedForm::HvTail { base, y } => scalar(
            "hv-tail",
            &[("mu", base.mu), ("c", base.c), ("y", *y)],
            hv_tail(base.mu, base.c, *y)?,
        ),
        ClosedForm::HvMean(b) => {
            scalar("hv-mean", &[("mu", b.mu), ("c", b.c)], hv_mean(b.mu, b.c)?)
        }
        ClosedForm::Gdbar {
            mu,
            horizon,
            y,
            max_terms,
            tol,
        } => {
            let cfg = SeriesConfig {
                max_terms: *max_terms,
                term_tolerance: *tol,
            };
            let s = drawup_cdf_complement(*y, *mu, *horizon, &cfg)?;
            ClosedFormDoc {
                formula: "gdbar",
                inputs: inputs(&[("mu", *mu), ("T", *horizon), ("y", *y)]),
                value: j!(s.value),
                terms: Some(s.terms),
                residual: Some(s.residual),
            }
        }
        ClosedForm::DrawupExcess { base, horizon } => scalar(
            "drawup-excess",
            &[("mu", base.mu), ("c", base.c), ("T", *horizon)],
            expected_drawup_excess(base.mu, base.c, *horizon)?,
        ),
        ClosedForm::EigenTheta { mu, y, n } => {
            let r = eigen_roots(mu * y, *n)?;
            ClosedFormDoc {
                formula: "eigen-theta",
                inputs: inputs(&[("mu", *mu), ("y", *y), ("n", *n as f64)]),
                value: j!(r.theta),
                terms: None,
                residual: None,
            }
        }
        ClosedForm::EigenEta { mu, y } => ClosedFormDoc {
            formula: "eigen-eta",
            inputs: inputs(&[("mu", *mu), ("y", *y)]),
            value: j!(eigenroot_eta(mu * y)),
            terms: None,
            residual: None,
        },
        ClosedForm::SupMgf { alpha, mu, horizon } => scalar(
            "sup-mgf",
            &[("alpha", *alpha), ("mu", *mu), ("T", *horizon)],
            sup_bm_mgf(*alpha, *mu, *horizon)?,
        ),
        ClosedForm::ExpBound {
            alpha,
            base,
            horizon,
        } => {
            let params = ModelParams::bm(base.mu, base.c, *horizon)?;
            let b = exp_moment_upper_bound(*alpha, &params)?;
            ClosedFormDoc {
                formula: "exp-bound",
                inputs: inputs(&[
                    ("alpha", *alpha),
                    ("mu", base.mu),
                    ("c", base.c),
                    ("T", *horizon),
                ]),
                value: j!(b),
                terms: None,
                residual: None,
            }
        }
    };
    let mut fields: Vec<(&str, String)> = doc
        .inputs
        .iter()
        .map(|(k, v)| (*k, v.to_string()))
        .collect();
    fields.push(("value", doc.value.to_string()));
    if let Some(t) = doc.terms {
        fields.push(("terms", t.to_string()));
    }
    if let Some(r) = doc.residual {
        fields.push(("residual", format!("{r:e}")));
    }
    emit_fields(&doc, &fields, out, format)
}

fn quantity_text(q: &Quantity) -> String {
    match q {
        Quantity::Exact(v) => format!("{v:.6}"),
        Quantity::Estimate(e) => format!("{:.6}±{:.6}", e.mean, e.std_error),
    }
}

fn status(r: &BoundReport) -> &'static str {
    match (r.passed, r.low_power) {
        (true, _) => "pass",
        (false, true) => "weak",
        (false, false) => "FAIL",
    }
}

fn verify(a: &VerifyArgs, out: Option<&FsPath>, format: Format) -> CliResult<u8> {
    if let Some(c) = &a.claim {
        if !CLAIMS.iter().any(|(id, _)| id.starts_with(c.as_str())) {
            let known: Vec<&str> = CLAIMS.iter().map(|(id, _)| *id).collect();
            return Err(CliError::usage(format!(
                "no claim starts with `{c}`; known: {}",
                known.join(", ")
            )));
        }
    }
    let sim = SimConfig::new(a.steps, a.paths, a.seed.seed)?;
    let mut cfg = HarnessConfig::default_grid(sim);
    cfg.mus = a.mus.clone();
    cfg.cs = a.cs.clone();
    let reports = run_grid(&cfg, a.claim.as_deref())?;

    let param = |r: &BoundReport, f: fn(&ModelParams) -> f64| {
        r.config
            .params
            .map(|p| f(&p).to_string())
            .unwrap_or_default()
    };
    let text = match format {
        Format::Json => json(&reports)?,
        Format::Csv | Format::Table => {
            let header = [
                "claim_id", "mu", "c", "T", "lhs", "rhs", "margin", "slack", "status",
            ];
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    vec![
                        r.claim_id.clone(),
                        param(r, |p| p.mu),
                        param(r, |p| p.c),
                        param(r, |p| p.horizon),
                        if format == Format::Csv {
                            r.lhs.value().to_string()
                        } else {
                            quantity_text(&r.lhs)
                        },
                        if format == Format::Csv {
                            r.rhs.value().to_string()
                        } else {
                            quantity_text(&r.rhs)
                        },
                        if format == Format::Csv {
                            r.margin.to_string()
                        } else {
                            format!("{:.6}", r.margin)
                        },
                        if format == Format::Csv {
                            r.slack().to_string()
                        } else {
                            format!("{:.6}", r.slack())
                        },
                        status(r).to_string(),
                    ]
                })
                .collect();
            if format == Format::Csv {
                csv(&header, &rows)
            } else {
                table(&header, &rows)
            }
        }
    };
    emit(out, &text)?;

    let failed: Vec<&BoundReport> = reports
        .iter()
        .filter(|r| !r.passed && !r.low_power)
        .collect();
    let weak = reports.iter().filter(|r| !r.passed && r.low_power).count();
    let low_power = reports.iter().any(|r| r.low_power);
    if low_power {
        eprintln!(
            "warning: fewer than {} paths per check; results are low-power",
            truncvar::harness::LOW_POWER_PATHS
        );
    }
    if weak > 0 {
        eprintln!("warning: {weak} low-power report(s) did not pass");
    }
    for r in &failed {
        eprintln!(
            "failed: {} (margin {}, slack {})",
            r.claim_id,
            r.margin,
            r.slack()
        );
    }
    eprintln!("{} report(s), {} failed", reports.len(), failed.len());
    Ok(if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

#[derive(Serialize)]
struct TradeConfig {
    input: String,
    gamma: f64,
}

#[derive(Serialize)]
struct TradeDoc {
    config: TradeConfig,
    c: f64,
    utv: f64,
    max_return: f64,
    trades: Vec<(usize, usize)>,
    realized_return: f64,
}

fn trade(a: &TradeArgs, out: Option<&FsPath>, format: Format) -> CliResult<u8> {
    let prices = read_path(&a.input)?;
    let c = commission_threshold(a.gamma)?;
    let plan = optimal_trades(&prices, a.gamma)?;
    let realized = realized_return(&prices, &plan)?;
    let bound = max_return_bound(&prices, a.gamma)?;
    if (realized - bound).abs() > IDENTITY_TOL * (1.0 + bound.abs()) {
        return Err(CliError::internal(format!(
            "realized return {realized} differs from the bound {bound}"
        )));
    }
    let doc = TradeDoc {
        config: TradeConfig {
            input: a.input.display().to_string(),
            gamma: a.gamma,
        },
        c,
        utv: log_price_utv(&prices, a.gamma)?,
        max_return: bound,
        trades: plan.trades,
        realized_return: realized,
    };
    let pairs: Vec<String> = doc.trades.iter().map(|(b, s)| format!("{b}-{s}")).collect();
    let fields = [
        ("c", doc.c.to_string()),
        ("utv", doc.utv.to_string()),
        ("max_return", doc.max_return.to_string()),
        ("realized_return", doc.realized_return.to_string()),
        ("trades", pairs.join(" ")),
    ];
    emit_fields(&doc, &fields, out, format)
}
