//! `cnc`: census of ideal counts of cyclic cubic fields over binary cubic
//! forms. One subcommand per subsystem plus `verify`, which runs the full
//! oracle comparison suite.
//!
//! Exit codes: 0 success, 1 validation error, 2 budget exceeded,
//! 3 oracle failure.

use clap::{Args, Parser, Subcommand};
use cnc_core::arith;
use cnc_core::census::{self, parse_ratio, RegionSpec};
use cnc_core::character::{l_value_product, CubicCharacter};
use cnc_core::congruence::{rho_minus, rho_plus, rho_star, BinaryCubicForm};
use cnc_core::delta::{delta3, delta3_grid_oracle, moment_sum, DeltaWeights, MomentMode};
use cnc_core::density;
use cnc_core::error::Error;
use cnc_core::field::{BuiltinField, CubicField};
use cnc_core::verify::{self, Level};
use num::rational::Ratio;
use serde::Serialize;
use std::fs;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cnc", version, about = "ideal-count census for cyclic cubic fields")]
struct Cli {
    /// worker threads; the CNC_THREADS environment variable overrides
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct a cyclic cubic field and print its invariants
    Field(FieldArgs),
    /// Print the order-3 character table mod q, its kernel, and the L-value
    Char(CharArgs),
    /// Evaluate r3(n) for the conductor-q character
    R3(R3Args),
    /// Root counts of a binary cubic form modulo s
    Rho(RhoArgs),
    /// Generalized Hooley Delta_3 of one n
    Delta(DeltaArgs),
    /// Moment sums of Delta_3 weights up to x (diagnostic)
    Moments(MomentsArgs),
    /// Local densities K_p, K_q and the constant K(F)
    Density(DensityArgs),
    /// The census Q(F, xi, R) against the predicted main term
    Count(CountArgs),
    /// Run the oracle comparison suite
    Verify(VerifyArgs),
}

#[derive(Args)]
struct FieldArgs {
    /// one of q7, q9, q13
    #[arg(long, conflicts_with = "poly")]
    builtin: Option<String>,
    /// monic cubic "1,a,b,c"
    #[arg(long)]
    poly: Option<String>,
}

#[derive(Args)]
struct CharArgs {
    #[arg(long)]
    q: u64,
    /// also evaluate L(1,chi)L(1,chi^2) by both routes
    #[arg(long)]
    lvalue: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct R3Args {
    #[arg(long)]
    q: u64,
    #[arg(long)]
    n: u64,
}

#[derive(Args)]
struct RhoArgs {
    /// form coefficients "a0,a1,a2,a3"
    #[arg(long)]
    form: String,
    #[arg(long)]
    s: u64,
}

#[derive(Args)]
struct DeltaArgs {
    #[arg(long)]
    n: u64,
    /// unit or char
    #[arg(long, default_value = "unit")]
    weights: String,
    #[arg(long)]
    q: Option<u64>,
    /// also run the grid oracle at this step and report both
    #[arg(long)]
    grid_step: Option<f64>,
}

#[derive(Args)]
struct MomentsArgs {
    #[arg(long)]
    x: u64,
    #[arg(long, default_value_t = 1.0)]
    y: f64,
    /// plain or char_squared
    #[arg(long, default_value = "plain")]
    mode: String,
    #[arg(long, default_value_t = 7)]
    q: u64,
    #[arg(long)]
    csv: Option<String>,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    q: u64,
    #[arg(long)]
    form: String,
    #[arg(long, default_value_t = 1000)]
    pmax: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// exponent cap of the W-sum route
    #[arg(long, default_value_t = 6)]
    kq_cap: u32,
    /// also run the limit route to this depth
    #[arg(long)]
    kq_limit_kmax: Option<u32>,
    #[arg(long)]
    json: Option<String>,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    q: u64,
    #[arg(long)]
    form: String,
    /// disc:R or ellipse:A,B
    #[arg(long, default_value = "disc:1.0")]
    region: String,
    /// ascending list "50,100,200,400"
    #[arg(long)]
    xi: String,
    #[arg(long, default_value_t = 1000)]
    pmax: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 6)]
    kq_cap: u32,
    #[arg(long)]
    csv: Option<String>,
    #[arg(long)]
    json: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// quick or full
    #[arg(long, default_value = "quick")]
    level: String,
    /// seed for the randomized property samples
    #[arg(long, default_value_t = 20260809)]
    seed: u64,
    #[arg(long)]
    json: Option<String>,
    /// run a single named identity instead of the suite (q-decomposition)
    #[arg(long)]
    identity: Option<String>,
    #[arg(long, requires = "identity")]
    xi: Option<String>,
    #[arg(long, requires = "identity")]
    q: Option<u64>,
    #[arg(long, requires = "identity")]
    form: Option<String>,
    #[arg(long, default_value = "disc:1.0")]
    region: String,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Budget(_) | Error::OracleScale(_) | Error::CapExceeded(_) => 2,
        _ => 1,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code_for(&e))
}

fn builtin_or_err(name: &str) -> Result<CubicField, Error> {
    BuiltinField::parse(name)
        .map(CubicField::builtin)
        .ok_or_else(|| Error::Validation(format!("unknown builtin '{name}' (q7, q9, q13)")))
}

fn parse_form(s: &str) -> Result<BinaryCubicForm, Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(Error::Validation(format!(
            "form needs exactly 4 coefficients, got {}",
            parts.len()
        )));
    }
    let mut coeffs = [0i64; 4];
    for (c, p) in coeffs.iter_mut().zip(parts) {
        *c = p
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("bad coefficient '{p}'")))?;
    }
    BinaryCubicForm::new(coeffs)
}

fn field_for_conductor(q: u64) -> Result<CubicField, Error> {
    match q {
        7 => Ok(CubicField::builtin(BuiltinField::Q7)),
        9 => Ok(CubicField::builtin(BuiltinField::Q9)),
        13 => Ok(CubicField::builtin(BuiltinField::Q13)),
        _ => Err(Error::Validation(format!(
            "no built-in field with conductor {q} (use q in {{7, 9, 13}})"
        ))),
    }
}

fn chi_for_conductor(q: u64) -> Result<CubicCharacter, Error> {
    match q {
        7 | 9 | 13 => CubicCharacter::for_field(&field_for_conductor(q)?),
        _ => CubicCharacter::canonical_for_modulus(q),
    }
}

fn print_json<T: Serialize>(value: &T, path: &Option<String>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Validation(format!("serialization: {e}")))?;
    println!("{text}");
    if let Some(p) = path {
        fs::write(p, text.as_bytes() as &[u8])
            .map_err(|e| Error::Validation(format!("write {p}: {e}")))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FieldOut {
    schema: u32,
    poly: [i64; 4],
    disc: i128,
    conductor: u64,
    norm_form_coeffs: Vec<i128>,
    norm_form_monomials: Vec<String>,
    principal_assumed: bool,
    maximality_warning: Option<String>,
}

fn cmd_field(a: FieldArgs) -> Result<(), Error> {
    let field = match (&a.builtin, &a.poly) {
        (Some(b), None) => builtin_or_err(b)?,
        (None, Some(p)) => {
            let parts: Vec<i64> = p
                .split(',')
                .map(|x| x.trim().parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Error::Validation(format!("bad polynomial '{p}'")))?;
            if parts.len() != 4 || parts[0] != 1 {
                return Err(Error::Validation(
                    "polynomial must be monic with 4 coefficients: 1,a,b,c".into(),
                ));
            }
            CubicField::new([parts[1], parts[2], parts[3]], None)?
        }
        _ => return Err(Error::Validation("provide exactly one of --builtin, --poly".into())),
    };
    let out = FieldOut {
        schema: 1,
        poly: [1, field.coeffs[0], field.coeffs[1], field.coeffs[2]],
        disc: field.disc,
        conductor: field.conductor_q,
        norm_form_coeffs: field.norm_form.coeffs.to_vec(),
        norm_form_monomials: cnc_core::field::NORM_FORM_MONOMIALS
            .iter()
            .map(|&(i, j, k)| format!("y^{i} z^{j} t^{k}"))
            .collect(),
        principal_assumed: field.principal_assumed,
        maximality_warning: field.maximality_warning.clone(),
    };
    print_json(&out, &None)
}

#[derive(Serialize)]
struct CharOut {
    schema: u32,
    q: u64,
    primitive: bool,
    /// exponent of omega, or null at non-units
    value_table: Vec<Option<u8>>,
    g1: Vec<u64>,
    lvalue: Option<cnc_core::character::LValueProduct>,
    tol: Option<f64>,
}

fn cmd_char(a: CharArgs) -> Result<(), Error> {
    let chi = chi_for_conductor(a.q)?;
    let lvalue = if a.lvalue { Some(l_value_product(&chi, a.tol)?) } else { None };
    let out = CharOut {
        schema: 1,
        q: a.q,
        primitive: chi.primitive,
        value_table: chi.value_table.iter().map(|v| v.exp()).collect(),
        g1: chi.kernel_g1.clone(),
        lvalue,
        tol: a.lvalue.then_some(a.tol),
    };
    print_json(&out, &None)
}

#[derive(Serialize)]
struct R3Out {
    schema: u32,
    q: u64,
    n: u64,
    r3: u64,
    factorization: Vec<(u64, u32)>,
}

fn cmd_r3(a: R3Args) -> Result<(), Error> {
    let chi = chi_for_conductor(a.q)?;
    let f = arith::factor(a.n)?;
    let out = R3Out {
        schema: 1,
        q: a.q,
        n: a.n,
        r3: arith::r3_of_factorization(&chi, &f),
        factorization: f.pairs,
    };
    print_json(&out, &None)
}

#[derive(Serialize)]
struct RhoOut {
    schema: u32,
    form: [i64; 4],
    disc: i128,
    s: u64,
    rho_minus: u64,
    rho_plus: u64,
    rho_star: u64,
}

fn cmd_rho(a: RhoArgs) -> Result<(), Error> {
    let form = parse_form(&a.form)?;
    if a.s == 0 {
        return Err(Error::Validation("s must be positive".into()));
    }
    let out = RhoOut {
        schema: 1,
        form: form.coeffs,
        disc: form.disc(),
        s: a.s,
        rho_minus: rho_minus(&form, a.s)?,
        rho_plus: rho_plus(&form, a.s)?,
        rho_star: rho_star(&form, a.s)?,
    };
    print_json(&out, &None)
}

#[derive(Serialize)]
struct DeltaOut {
    schema: u32,
    n: u64,
    weights: String,
    q: Option<u64>,
    sweep: cnc_core::delta::DeltaResult,
    grid_oracle: Option<cnc_core::delta::DeltaResult>,
    grid_step: Option<f64>,
}

fn cmd_delta(a: DeltaArgs) -> Result<(), Error> {
    let (weights, chi) = match a.weights.as_str() {
        "unit" => (DeltaWeights::Unit, None),
        "char" => {
            let q = a.q.ok_or_else(|| Error::Validation("char weights need --q".into()))?;
            (DeltaWeights::CharPair, Some(chi_for_conductor(q)?))
        }
        other => return Err(Error::Validation(format!("weights '{other}' (unit|char)"))),
    };
    let sweep = delta3(a.n, weights, chi.as_ref())?;
    let grid_oracle = match a.grid_step {
        Some(step) => Some(delta3_grid_oracle(a.n, weights, chi.as_ref(), step)?),
        None => None,
    };
    let out = DeltaOut {
        schema: 1,
        n: a.n,
        weights: a.weights,
        q: a.q,
        sweep,
        grid_oracle,
        grid_step: a.grid_step,
    };
    print_json(&out, &None)
}

fn cmd_moments(a: MomentsArgs) -> Result<(), Error> {
    let mode = match a.mode.as_str() {
        "plain" => MomentMode::Plain,
        "char_squared" => MomentMode::CharSquared,
        other => return Err(Error::Validation(format!("mode '{other}' (plain|char_squared)"))),
    };
    let chi = chi_for_conductor(a.q)?;
    let report = moment_sum(a.x, a.y, &chi, mode)?;
    if let Some(path) = &a.csv {
        let mut csv = String::from("x,sum,log_avg,loglog_x\r\n");
        for c in &report.checkpoints {
            csv.push_str(&format!("{},{},{},{}\r\n", c.x, c.sum, c.log_avg, c.loglog_x));
        }
        fs::write(path, csv).map_err(|e| Error::Validation(format!("write {path}: {e}")))?;
    }
    print_json(&report, &None)
}

fn cmd_density(a: DensityArgs) -> Result<(), Error> {
    let form = parse_form(&a.form)?;
    let field = field_for_conductor(a.q)?;
    let chi = CubicCharacter::for_field(&field)?;
    let lv = l_value_product(&chi, 1e-8)?;
    let report = density::k_total(
        &form,
        &chi,
        &field,
        a.pmax,
        a.tol,
        a.kq_cap,
        a.kq_limit_kmax,
        &lv,
    )?;
    print_json(&report, &a.json)
}

fn cmd_count(a: CountArgs) -> Result<(), Error> {
    let form = parse_form(&a.form)?;
    let field = field_for_conductor(a.q)?;
    let chi = CubicCharacter::for_field(&field)?;
    let region = RegionSpec::parse(&a.region)?;
    let xi_list: Vec<Ratio<i64>> = a
        .xi
        .split(',')
        .map(parse_ratio)
        .collect::<Result<_, _>>()?;
    let lv = l_value_product(&chi, 1e-8)?;
    let dens = density::k_total(&form, &chi, &field, a.pmax, a.tol, a.kq_cap, None, &lv)?;
    let report = census::convergence_run(&form, &chi, &field, &region, &xi_list, &dens, &lv)?;
    if let Some(path) = &a.csv {
        fs::write(path, census::census_csv(&report))
            .map_err(|e| Error::Validation(format!("write {path}: {e}")))?;
    }
    print_json(&report, &a.json)
}

fn cmd_verify_identity(a: &VerifyArgs) -> Result<bool, Error> {
    let name = a.identity.as_deref().unwrap();
    if name != "q-decomposition" {
        return Err(Error::Validation(format!(
            "unknown identity '{name}' (available: q-decomposition)"
        )));
    }
    let q = a.q.ok_or_else(|| Error::Validation("--identity needs --q".into()))?;
    let form = parse_form(a.form.as_deref().ok_or_else(|| Error::Validation("--identity needs --form".into()))?)?;
    let xi = parse_ratio(a.xi.as_deref().ok_or_else(|| Error::Validation("--identity needs --xi".into()))?)?;
    let region = RegionSpec::parse(&a.region)?;
    let chi = chi_for_conductor(q)?;
    let report = cnc_core::parametrize::q_decomposition_check(&form, &chi, &region, xi)?;
    let pass = report.dilation_identity_holds() && report.branch_identity_holds();
    print_json(&report, &None)?;
    println!(
        "identity q-decomposition at xi = {}: {}",
        report.xi,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

fn cmd_verify(a: VerifyArgs) -> Result<bool, Error> {
    if a.identity.is_some() {
        return cmd_verify_identity(&a);
    }
    let level = Level::parse(&a.level)
        .ok_or_else(|| Error::Validation(format!("level '{}' (quick|full)", a.level)))?;
    let report = verify::run(level, a.seed);
    println!("{:<34} {:<6} detail", "check", "status");
    println!("{}", "-".repeat(78));
    for c in &report.checks {
        println!(
            "{:<34} {:<6} {}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    println!("{}", "-".repeat(78));
    println!(
        "{}: {}/{} checks passed",
        if report.all_pass { "OK" } else { "FAILURE" },
        report.checks.iter().filter(|c| c.pass).count(),
        report.checks.len()
    );
    if let Some(p) = &a.json {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Validation(format!("serialization: {e}")))?;
        fs::write(p, text).map_err(|e| Error::Validation(format!("write {p}: {e}")))?;
    }
    Ok(report.all_pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let threads = std::env::var("CNC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.threads);
    if let Some(t) = threads {
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            eprintln!("warning: thread pool already initialized");
        }
    }
    let result = match cli.cmd {
        Cmd::Field(a) => cmd_field(a),
        Cmd::Char(a) => cmd_char(a),
        Cmd::R3(a) => cmd_r3(a),
        Cmd::Rho(a) => cmd_rho(a),
        Cmd::Delta(a) => cmd_delta(a),
        Cmd::Moments(a) => cmd_moments(a),
        Cmd::Density(a) => cmd_density(a),
        Cmd::Count(a) => cmd_count(a),
        Cmd::Verify(a) => {
            return match cmd_verify(a) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(3),
                Err(e) => fail(e),
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
