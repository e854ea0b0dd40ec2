//! `torsion` — complex-valued combinatorial and analytic torsion from
//! problem files.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical error, 4 parse
//! error.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sha2::{Digest, Sha256};
use torsion_cli::ops::{self, Context};
use torsion_cli::records::{timestamp_now, Operation, ResultRecord, Tolerances};
use torsion_cli::schema::{LoadedProblem, ProblemFile};
use torsion_core::circle::CoEulerStructureS1;
use torsion_core::{Complex64, TorsionError, DEFAULT_TOL};

#[derive(Parser, Debug)]
#[command(
    name = "torsion",
    about = "Complex-valued combinatorial and analytic torsion for finite complexes, \
             flat circle bundles and mapping tori",
    long_about = None
)]
struct Cli {
    /// One of: torsion-direct, torsion-spectral, analytic, combinatorial,
    /// relative, zeta, spectrum, verify.
    command: String,
    /// Problem file (JSON, schema "torsionlab/1").
    file: PathBuf,
    /// Holonomy parameter override for mapping tori, as RE,IM.
    #[arg(long)]
    z: Option<String>,
    /// Contour radius for torsion-spectral.
    #[arg(long)]
    radius: Option<f64>,
    /// Fourier truncation for spectrum.
    #[arg(long)]
    truncation: Option<usize>,
    /// Euler-structure offset (integer).
    #[arg(long, default_value_t = 0)]
    euler_offset: i64,
    /// CoEuler structure: "base", "canonical", "offset=RE,IM" (or bare RE,IM).
    #[arg(long)]
    coeuler: Option<String>,
    /// Relative tolerance (overrides TORSION_TOL).
    #[arg(long)]
    tol: Option<f64>,
    /// Machine-readable output: one JSON record per line.
    #[arg(long)]
    json: bool,
    /// Also append the JSON records to this path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate the verify suite at this many extra parameter points.
    #[arg(long)]
    sweep: Option<usize>,
}

struct AppError {
    exit: u8,
    code: String,
    message: String,
}

impl AppError {
    fn parse(message: String) -> Self {
        AppError {
            exit: 4,
            code: "PARSE_ERROR".into(),
            message,
        }
    }

    fn validation(message: String) -> Self {
        AppError {
            exit: 2,
            code: "VALIDATION_ERROR".into(),
            message,
        }
    }

    fn from_compute(err: TorsionError) -> Self {
        let exit = match err {
            TorsionError::InvalidInput(_) | TorsionError::NotAComplex { .. } => 2,
            _ => 3,
        };
        AppError {
            exit,
            code: err.code().into(),
            message: err.to_string(),
        }
    }
}

fn parse_complex_pair(text: &str, what: &str) -> Result<Complex64, AppError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(AppError::validation(format!(
            "{what} expects RE,IM, got {text:?}"
        )));
    }
    let re = parts[0].trim().parse::<f64>();
    let im = parts[1].trim().parse::<f64>();
    match (re, im) {
        (Ok(re), Ok(im)) => Ok(Complex64::new(re, im)),
        _ => Err(AppError::validation(format!(
            "{what} expects RE,IM, got {text:?}"
        ))),
    }
}

fn parse_coeuler(text: Option<&str>) -> Result<CoEulerStructureS1, AppError> {
    match text {
        None | Some("base") => Ok(CoEulerStructureS1::base()),
        Some("canonical") => Ok(CoEulerStructureS1::canonical()),
        Some(other) => {
            let spec = other
                .strip_prefix("offset=")
                .or_else(|| other.strip_prefix("offset "));
            let pair = spec.unwrap_or(other);
            Ok(CoEulerStructureS1::with_offset(parse_complex_pair(
                pair,
                "--coeuler offset",
            )?))
        }
    }
}

fn resolve_tolerance(cli: &Cli) -> Result<f64, AppError> {
    if let Some(tol) = cli.tol {
        if !(tol > 0.0) {
            return Err(AppError::validation("tolerance must be positive".into()));
        }
        return Ok(tol);
    }
    match std::env::var("TORSION_TOL") {
        Ok(text) => text
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|t| *t > 0.0)
            .ok_or_else(|| AppError::validation(format!("invalid TORSION_TOL value {text:?}"))),
        Err(_) => Ok(DEFAULT_TOL),
    }
}

fn load_problem(path: &PathBuf, tol: f64) -> Result<LoadedProblem, AppError> {
    let bytes = fs::read(path)
        .map_err(|e| AppError::parse(format!("cannot read {}: {e}", path.display())))?;
    let digest = format!("sha256:{}", hex::encode(Sha256::digest(&bytes)));
    let parsed: ProblemFile = serde_json::from_slice(&bytes).map_err(|e| {
        AppError::parse(format!("{} at line {}, column {}", e, e.line(), e.column()))
    })?;
    let (file, typed) = parsed
        .validate(tol)
        .map_err(|e| AppError::validation(e.to_string()))?;
    Ok(LoadedProblem {
        file,
        digest,
        typed,
    })
}

fn human_print(record: &ResultRecord) {
    match record.value.get("type").and_then(|t| t.as_str()) {
        Some("torsion") => {
            let v = &record.value;
            println!(
                "torsion   : {} + {}i   (basis: {})",
                v["value"][0], v["value"][1], v["basis"]
            );
            println!("log|τ|    : {}   arg τ: {}", v["log_abs"], v["arg"]);
        }
        Some("relative_torsion") => {
            let v = &record.value;
            println!("S         : {} + {}i", v["s"][0], v["s"][1]);
            println!("| |S|-1 | : {}", v["modulus_deviation"]);
            println!("| S - 1 | : {}", v["conjecture_deviation"]);
        }
        Some("zeta") => {
            let v = &record.value;
            println!("zeta      : {} + {}i", v["zeta"][0], v["zeta"][1]);
            println!(
                "torsion   : {} + {}i",
                v["torsion"]["value"][0], v["torsion"]["value"][1]
            );
        }
        Some("spectrum") => {
            let v = &record.value;
            let eigs = v["eigenvalues"].as_array().map(|a| a.len()).unwrap_or(0);
            println!(
                "spectrum  : degree {}  truncation {}  ({} eigenvalues)",
                v["degree"], v["truncation"], eigs
            );
            println!("converge  : {}", v["convergence_estimate"]);
            if let Some(list) = v["eigenvalues"].as_array() {
                for (i, e) in list.iter().take(8).enumerate() {
                    println!("  λ[{i}] = {} + {}i", e[0], e[1]);
                }
                if list.len() > 8 {
                    println!("  … {} more", list.len() - 8);
                }
            }
        }
        Some("property") => {
            let v = &record.value;
            let status = if v["pass"].as_bool().unwrap_or(false) {
                "PASS"
            } else {
                "FAIL"
            };
            println!(
                "{status}  {:<32} deviation = {}   {}",
                v["name"].as_str().unwrap_or("?"),
                v["deviation"],
                v["detail"].as_str().unwrap_or("")
            );
        }
        _ => println!("value     : {}", record.value),
    }
}

fn run() -> Result<u8, AppError> {
    let cli = Cli::parse();
    let tol = resolve_tolerance(&cli)?;
    let ctx = Context {
        tol,
        z: match &cli.z {
            Some(text) => Some(parse_complex_pair(text, "--z")?),
            None => None,
        },
        radius: cli.radius,
        truncation: cli.truncation,
        euler_offset: cli.euler_offset,
        coeuler: parse_coeuler(cli.coeuler.as_deref())?,
        sweep: cli.sweep,
    };
    let loaded = load_problem(&cli.file, tol)?;
    let output = ops::run(&cli.command, &loaded.typed, &ctx).map_err(AppError::from_compute)?;

    let records: Vec<ResultRecord> = output
        .values
        .into_iter()
        .map(|value| ResultRecord {
            schema: torsion_cli::schema::SCHEMA,
            input_digest: loaded.digest.clone(),
            operation: Operation {
                name: cli.command.clone(),
                params: output.params.clone(),
            },
            value,
            tolerances: Tolerances { tol },
            timestamp: timestamp_now(),
        })
        .collect();

    if let Some(path) = &cli.out {
        let mut sink = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| AppError::validation(format!("cannot open {}: {e}", path.display())))?;
        for record in &records {
            let line = serde_json::to_string(record).expect("records serialize");
            writeln!(sink, "{line}")
                .map_err(|e| AppError::validation(format!("write failed: {e}")))?;
        }
    }

    if cli.json {
        for record in &records {
            println!(
                "{}",
                serde_json::to_string(record).expect("records serialize")
            );
        }
    } else if let Some(first) = records.first() {
        println!("operation : {}", first.operation.name);
        println!("input     : {}", first.input_digest);
        for record in &records {
            human_print(record);
        }
    }

    // A verify run with failed properties exits with the numerical-error code.
    if cli.command == "verify" && !output.all_passed {
        return Ok(3);
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "code": err.code, "message": err.message } })
            );
            ExitCode::from(err.exit)
        }
    }
}
