//! Command-line front end: simulate data, fit β, run experiments.
//!
//! Exit codes: 0 success, 2 usage, parse or domain error, 3 degenerate
//! (uninformative) likelihood. Every report echoes its configuration and
//! seed, and numbers are printed in shortest round-trip form, so identical
//! command lines give byte-identical output.

use std::ffi::OsString;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::covariance::{build_sigma, gamma_of, Ar1Model, SigmaSpec};
use crate::error::{Error, Result};
use crate::experiments::{
    bartlett_check, default_beta_grid, deletion_experiment, degeneracy_check, efficiency_table, haar_trace_moments,
    info_curve, polynomial_design, sigma_independence_check, ut_info_curve, BartlettConfig,
};
use crate::likelihood::{fit_beta, ModelKind, SearchConfig};
use crate::linalg::Matrix;
use crate::projection::DesignMatrix;
use crate::sampling::sample_gaussian;
use crate::stats::McReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kronlik", version, about = "Likelihood inference for parallel series with Γ(β) ⊗ Σ covariance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw an n×k data matrix and write it as CSV.
    Simulate(SimulateArgs),
    /// Maximize the profile likelihood for a CSV data matrix.
    Fit(FitArgs),
    /// Run a seeded Monte Carlo experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Columns of the polynomial design written by --design.
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    /// scalar:v | diag:v1,..,vk | full:r1;..;rk | green:a1,..,ak;b1,..,bk
    #[arg(long, default_value = "scalar:1")]
    sigma: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write a y1,..,yk header line.
    #[arg(long)]
    header: bool,
    /// Also write the n×p polynomial design matrix here.
    #[arg(long)]
    design: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "III")]
    model: ModelKind,
    /// CSV file with the n×p design matrix (residual likelihood).
    #[arg(long, conflicts_with = "p")]
    design: Option<PathBuf>,
    /// Columns of a polynomial design on 1..n (residual likelihood).
    #[arg(long)]
    p: Option<usize>,
    /// The input files start with a header line.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Experiment {
    Bartlett,
    InfoCurve,
    Deletion,
    Degeneracy,
    SigmaIndependence,
    UtCurve,
    Efficiency,
    HaarMoments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: Experiment,
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Number of series, or a comma-separated list.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    p: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value = "III")]
    model: ModelKind,
    #[arg(long, default_value = "scalar:1")]
    sigma: String,
    /// Second covariance for sigma-independence.
    #[arg(long)]
    sigma_b: Option<String>,
    #[arg(long, default_value_t = 7)]
    k_full: usize,
    #[arg(long, default_value_t = 4)]
    k_sub: usize,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse `scalar:v`, `diag:v1,..`, `full:r1;r2;..` or `green:a1,..;b1,..`.
pub fn parse_sigma(text: &str) -> Result<SigmaSpec> {
    let (kind, body) = text
        .split_once(':')
        .ok_or_else(|| Error::domain(format!("sigma '{text}' has no kind prefix")))?;
    let list = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::domain(format!("bad number '{v}' in sigma"))))
            .collect()
    };
    match kind {
        "scalar" => Ok(SigmaSpec::ScalarVar(
            body.trim().parse().map_err(|_| Error::domain(format!("bad number '{body}' in sigma")))?,
        )),
        "diag" => Ok(SigmaSpec::DiagonalVar(list(body)?)),
        "full" => {
            let rows = body.split(';').map(list).collect::<Result<Vec<_>>>()?;
            let k = rows.len();
            if rows.iter().any(|r| r.len() != k) {
                return Err(Error::domain("full sigma must be square"));
            }
            Ok(SigmaSpec::FullPd { k, values: rows.concat() })
        }
        "green" => {
            let (a, b) = body
                .split_once(';')
                .ok_or_else(|| Error::domain("green sigma needs 'a1,..,ak;b1,..,bk'"))?;
            Ok(SigmaSpec::Green { a: list(a)?, b: list(b)? })
        }
        other => Err(Error::domain(format!("unknown sigma kind '{other}'"))),
    }
}

/// Read a numeric CSV matrix; errors name the 1-based line.
pub fn read_matrix_csv<R: Read>(reader: R, header: bool) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(header).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { row: line, msg: format!("'{f}' is not a finite number") })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if vals.len() != first.len() {
                return Err(Error::Parse {
                    row: line,
                    msg: format!("expected {} fields, found {}", first.len(), vals.len()),
                });
            }
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 0, msg: "no data rows".into() });
    }
    let (n, k) = (rows.len(), rows[0].len());
    Ok(Matrix::from_fn(n, k, |i, j| rows[i][j]))
}

fn read_matrix_file(path: &Path, header: bool) -> Result<Matrix> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_matrix_csv(f, header)
}

/// Write a matrix as CSV, one row per line.
pub fn write_matrix_csv<W: Write>(out: W, m: &Matrix, header: Option<&str>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    if let Some(prefix) = header {
        w.write_record((1..=m.ncols()).map(|j| format!("{prefix}{j}"))).map_err(csv_err)?;
    }
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_json_line(v: &Value) -> String {
    serde_json::to_string(v).expect("json values serialize")
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let model = Ar1Model::new(args.n)?;
    let bundle = gamma_of(&model, args.beta)?;
    let sigma = build_sigma(&parse_sigma(&args.sigma)?, args.k)?;
    let y = sample_gaussian(&bundle.gamma, &sigma, args.seed)?;
    write_matrix_csv(create(&args.out)?, &y, args.header.then_some("y"))?;
    if let Some(path) = &args.design {
        let x = polynomial_design(&model, args.p)?
            .ok_or_else(|| Error::domain("--design needs p >= 1"))?;
        write_matrix_csv(create(path)?, x.matrix(), args.header.then_some("x"))?;
    }
    writeln!(
        out,
        "{}",
        to_json_line(&json!({
            "command": "simulate",
            "config": args,
            "seed": args.seed,
            "result": {"rows": args.n, "cols": args.k},
            "pass": true,
        }))
    )?;
    Ok(())
}

fn fit(args: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let y = read_matrix_file(&args.input, args.header)?;
    let (n, k) = y.shape();
    let model = Ar1Model::new(n)?;
    let design = match (&args.design, args.p) {
        (Some(path), _) => {
            let x = read_matrix_file(path, args.header)?;
            if x.nrows() != n {
                return Err(Error::domain(format!("design has {} rows, data have {n}", x.nrows())));
            }
            Some(DesignMatrix::new(x)?)
        }
        (None, Some(p)) => polynomial_design(&model, p)?,
        (None, None) => None,
    };
    let base = json!({"command": "fit", "config": args, "model": args.model, "n": n, "k": k});
    let mut report = base.as_object().cloned().expect("object");
    match fit_beta(&model, &y, args.model, design.as_ref(), SearchConfig::default()) {
        Ok(f) => {
            report.insert("beta_hat".into(), json!(f.beta_hat));
            report.insert("se".into(), json!(f.se));
            report.insert("loglik".into(), json!(f.loglik_at_max));
            report.insert("at_boundary".into(), json!(f.at_boundary));
            report.insert("degenerate".into(), json!(false));
            writeln!(out, "{}", to_json_line(&Value::Object(report)))?;
            Ok(())
        }
        Err(e) if e.is_degenerate() => {
            report.insert("degenerate".into(), json!(true));
            report.insert("error".into(), json!(e.to_string()));
            writeln!(out, "{}", to_json_line(&Value::Object(report)))?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

/// A report as a header plus rows of optional numbers or labels.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
    pass: bool,
    result: Value,
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

fn report_cells(r: &McReport) -> Vec<Value> {
    vec![json!(r.estimate), json!(r.std_error), opt(r.target), opt(r.z), json!(r.pass)]
}

fn single_k(args: &ExperimentArgs) -> Result<usize> {
    match args.k.as_slice() {
        [k] => Ok(*k as usize),
        _ => Err(Error::domain("this experiment takes a single --k")),
    }
}

fn run_experiment(args: &ExperimentArgs) -> Result<Table> {
    Ok(match args.name {
        Experiment::Bartlett => {
            let sigma = parse_sigma(&args.sigma)?;
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for &k in &args.k {
                let r = bartlett_check(&BartlettConfig {
                    n: args.n,
                    k: k as usize,
                    p: args.p,
                    beta: args.beta,
                    model: args.model,
                    sigma: sigma.clone(),
                    reps: args.reps,
                    seed: args.seed,
                })?;
                let mut row = vec![json!(k)];
                row.extend(report_cells(&r.mean));
                row.extend(report_cells(&r.variance));
                rows.push(row);
                reports.push(r);
            }
            Table {
                header: vec![
                    "k", "mean", "mean_se", "mean_target", "mean_z", "mean_pass", "var", "var_se", "var_target",
                    "var_z", "var_pass",
                ],
                pass: reports.iter().all(|r| r.pass),
                result: json!(reports),
                rows,
            }
        }
        Experiment::InfoCurve => {
            let c = info_curve(args.n, args.p, args.beta, args.model, args.reps, args.seed)?;
            Table {
                header: vec!["k", "formula_info", "mc_info", "mc_se", "z", "pass"],
                rows: c
                    .rows
                    .iter()
                    .map(|r| vec![json!(r.k), json!(r.formula_info), json!(r.mc_info), json!(r.mc_se), opt(r.z), json!(r.pass)])
                    .collect(),
                pass: c.pass,
                result: json!(c),
            }
        }
        Experiment::Deletion => {
            let d = deletion_experiment(args.n, args.k_full, args.k_sub, args.beta, args.reps, args.seed)?;
            Table {
                header: vec![
                    "k_full", "k_sub", "used", "degenerate", "var_full", "var_sub", "var_ratio", "var_ratio_se",
                    "mse_ratio", "mse_ratio_se", "formula_ratio",
                ],
                rows: vec![vec![
                    json!(d.k_full),
                    json!(d.k_sub),
                    json!(d.used),
                    json!(d.degenerate),
                    json!(d.var_full),
                    json!(d.var_sub),
                    json!(d.var_ratio),
                    json!(d.var_ratio_se),
                    json!(d.mse_ratio),
                    json!(d.mse_ratio_se),
                    json!(d.formula_ratio),
                ]],
                pass: true,
                result: json!(d),
            }
        }
        Experiment::Degeneracy => {
            let d = degeneracy_check(args.n, args.p, &default_beta_grid(), &parse_sigma(&args.sigma)?, args.seed)?;
            Table {
                header: vec!["spread_square", "loglik_square", "spread_wide", "spread_single", "pass"],
                rows: vec![vec![
                    json!(d.spread_square),
                    json!(d.loglik_square),
                    json!(d.spread_wide),
                    json!(d.spread_single),
                    json!(d.pass),
                ]],
                pass: d.pass,
                result: json!(d),
            }
        }
        Experiment::SigmaIndependence => {
            let k = single_k(args)?;
            let a = build_sigma(&parse_sigma(&args.sigma)?, k)?;
            let b_text = args.sigma_b.as_deref().ok_or_else(|| Error::domain("--sigma-b is required"))?;
            let b = build_sigma(&parse_sigma(b_text)?, k)?;
            let r = sigma_independence_check(args.n, k, args.beta, &a, &b, args.reps, args.seed)?;
            let mut rows = Vec::new();
            for (arm, rep) in [("a", &r.a), ("b", &r.b)] {
                let mut row = vec![json!(arm)];
                row.extend(report_cells(rep));
                row.push(json!(r.z_diff));
                rows.push(row);
            }
            Table {
                header: vec!["arm", "var", "var_se", "target", "z", "pass", "z_diff"],
                rows,
                pass: r.pass,
                result: json!(r),
            }
        }
        Experiment::UtCurve => {
            let c = ut_info_curve(args.n, args.p, args.beta, args.reps, args.seed)?;
            Table {
                header: vec!["k", "mc_info", "mc_se", "increment", "increment_se", "pass"],
                rows: c
                    .rows
                    .iter()
                    .map(|r| {
                        vec![json!(r.k), json!(r.mc_info), json!(r.mc_se), json!(r.increment), json!(r.increment_se), json!(r.pass)]
                    })
                    .collect(),
                pass: c.pass,
                result: json!(c),
            }
        }
        Experiment::Efficiency => {
            let t = efficiency_table(args.n as u64, &args.k)?;
            Table {
                header: vec!["k", "efficiency"],
                rows: t.rows.iter().map(|r| vec![json!(r.k), json!(r.efficiency)]).collect(),
                pass: true,
                result: json!(t),
            }
        }
        Experiment::HaarMoments => {
            let rows = haar_trace_moments(args.n, args.reps, args.seed)?;
            Table {
                header: vec!["statistic", "estimate", "std_error", "target", "z", "pass"],
                rows: rows
                    .iter()
                    .map(|r| {
                        let mut row = vec![json!(r.statistic)];
                        row.extend(report_cells(&r.report));
                        row
                    })
                    .collect(),
                pass: rows.iter().all(|r| r.report.pass),
                result: json!(rows),
            }
        }
    })
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn experiment(args: &ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let table = run_experiment(args)?;
    let config = json!(args);
    let mut buf: Vec<u8> = Vec::new();
    match args.format {
        Format::Json => {
            let doc = json!({
                "command": "experiment",
                "config": config,
                "seed": args.seed,
                "rows": table.rows.iter().map(|r| {
                    table.header.iter().zip(r).map(|(h, v)| (h.to_string(), v.clone())).collect::<serde_json::Map<_, _>>()
                }).collect::<Vec<_>>(),
                "result": table.result,
                "pass": table.pass,
            });
            writeln!(buf, "{}", serde_json::to_string_pretty(&doc).expect("json values serialize"))?;
        }
        Format::Csv => {
            writeln!(buf, "# {}", to_json_line(&json!({"command": "experiment", "config": config, "seed": args.seed, "pass": table.pass})))?;
            let mut w = csv::Writer::from_writer(&mut buf);
            let csv_err = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(&table.header).map_err(csv_err)?;
            for r in &table.rows {
                w.write_record(r.iter().map(cell)).map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    match &args.out {
        Some(path) => create(path)?.write_all(&buf)?,
        None => out.write_all(&buf)?,
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_degenerate() {
        EXIT_DEGENERATE
    } else {
        EXIT_USAGE
    }
}

/// Run the command line `args` (including the program name), writing
/// reports to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Experiment(a) => experiment(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_strings() {
        assert_eq!(parse_sigma("scalar:2").unwrap(), SigmaSpec::ScalarVar(2.0));
        assert_eq!(parse_sigma("diag:1,2").unwrap(), SigmaSpec::DiagonalVar(vec![1.0, 2.0]));
        assert_eq!(
            parse_sigma("full:2,1;1,2").unwrap(),
            SigmaSpec::FullPd { k: 2, values: vec![2.0, 1.0, 1.0, 2.0] }
        );
        assert_eq!(
            parse_sigma("green:1,2;3,4").unwrap(),
            SigmaSpec::Green { a: vec![1.0, 2.0], b: vec![3.0, 4.0] }
        );
        assert!(parse_sigma("full:1,2;3").is_err());
        assert!(parse_sigma("wishart:3").is_err());
        assert!(parse_sigma("2").is_err());
    }

    #[test]
    fn csv_round_trip_and_row_errors() {
        let m = Matrix::from_row_slice(2, 3, &[0.1, -2.0, 3.5e-12, 1.0 / 3.0, 7.0, -0.0]);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m, None).unwrap();
        assert_eq!(read_matrix_csv(buf.as_slice(), false).unwrap(), m);

        let bad = "1,2\n3,x\n";
        match read_matrix_csv(bad.as_bytes(), false).unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            e => panic!("{e}"),
        }
        let ragged = "y1,y2\n1,2\n3\n";
        match read_matrix_csv(ragged.as_bytes(), true).unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn exit_codes() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["kronlik", "experiment", "nope"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["kronlik", "fit", "--input", "x.csv", "--bogus"], &mut out, &mut err), EXIT_USAGE);
        let code = run(["kronlik", "experiment", "efficiency", "--n", "10", "--k", "1,2,5,100000"], &mut out, &mut err);
        assert_eq!(code, EXIT_OK);
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# {"));
        assert!(text.lines().last().unwrap().starts_with("100000,0.8333"));
    }
}
