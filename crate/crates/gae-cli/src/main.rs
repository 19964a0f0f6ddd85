//! `gae` — experiment runner around the library.
//!
//! Subcommands: `run` (solve and stream a JSONL trace), `path` (one greedy
//! path plus its verification report), `certify`, `gap`, `params` (print a
//! constants ledger), `zoo` (list problems). Exit codes: 0 success, 2
//! convergence error, 3 validation error; `certify` exits 0/1/4 for
//! pass/fail/inconclusive.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gae::certify::{certify, duality_gap, Verdict};
use gae::greedy_path::{run_greedy_path, verify_greedy_path};
use gae::hyper::{practical_params, theoretical_params, verified_path_params, HyperParams, Preset};
use gae::oracle::{make_problem, ParamValue, Problem, ProblemParams};
use gae::solver::{solve_with, SolveEvent};
use gae::trace::{MetaRecord, SummaryRecord, TraceLine, TRACE_SCHEMA_VERSION};
use gae::{GaeError, Result};

use config::{format_vec, parse_preset, parse_vec, set_param, RunConfig};

#[derive(Parser)]
#[command(name = "gae", version, about = "Greedy adversarial equilibrium toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the equilibrium solver; stream a JSONL trace and print a summary.
    Run(RunArgs),
    /// Compute one greedy path and print its verification report.
    Path(PathArgs),
    /// Check a claimed equilibrium; exits 0 pass / 1 fail / 4 inconclusive.
    Certify(CertifyArgs),
    /// Duality gap at a point, via analytic best responses.
    Gap(GapArgs),
    /// Print the full constants ledger for a preset.
    Params(ParamsArgs),
    /// List the registered problems.
    Zoo,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key-value config file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// `practical` or `theoretical`.
    #[arg(long)]
    preset: Option<String>,
    /// Defaults to $GAE_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated starting point (default: origin).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<String>,
    /// JSONL trace output path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// One-row CSV summary output path.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Write the effective configuration (after overrides) to a file.
    #[arg(long)]
    save_config: Option<PathBuf>,
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Problem parameter `name=value` (repeatable; value may be a comma list).
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    problem: String,
    /// Fixed x (comma-separated).
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// Starting y (comma-separated).
    #[arg(long, allow_hyphen_values = true)]
    y0: String,
    /// Target accuracy eps' for the ascent.
    #[arg(long)]
    eps: f64,
    /// JSONL output (one step per line).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    samples_per_segment: usize,
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

#[derive(Args)]
struct CertifyArgs {
    /// Read the point to certify from a run trace (meta + summary lines).
    #[arg(long, conflicts_with_all = ["problem", "x", "y", "eps", "sigma"])]
    trace: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Emit the machine-readable certificate as JSON instead of the report.
    #[arg(long)]
    json: bool,
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

#[derive(Args)]
struct GapArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long, allow_hyphen_values = true)]
    y: String,
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long)]
    preset: String,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    b: f64,
    #[arg(long = "L", alias = "l")]
    l: f64,
    #[arg(long)]
    d: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Path(args) => cmd_path(args),
        Cmd::Certify(args) => cmd_certify(args),
        Cmd::Gap(args) => cmd_gap(args),
        Cmd::Params(args) => cmd_params(args),
        Cmd::Zoo => cmd_zoo(),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                GaeError::Convergence(_) | GaeError::Internal(_) => 2,
                _ => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn env_seed() -> u64 {
    std::env::var("GAE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0)
}

fn parse_params(pairs: &[String], into: &mut ProblemParams) -> Result<()> {
    for pair in pairs {
        let (k, v) = pair.split_once('=').ok_or_else(|| {
            GaeError::Validation(format!("--param expects name=value, got `{pair}`"))
        })?;
        set_param(into, k.trim(), v.trim())?;
    }
    Ok(())
}

fn build_hp(preset: Preset, eps: f64, sigma: f64, p: &Problem) -> Result<HyperParams> {
    match preset {
        Preset::Practical => practical_params(eps, sigma, p.b, p.l, p.d),
        Preset::Theoretical => theoretical_params(eps, sigma, p.b, p.l, p.d),
        Preset::Custom => Err(GaeError::Validation(
            "preset must be `practical` or `theoretical` here".into(),
        )),
    }
}

fn params_to_meta(params: &ProblemParams) -> BTreeMap<String, String> {
    params
        .entries()
        .map(|(k, v)| {
            let s = match v {
                ParamValue::Scalar(x) => x.to_string(),
                ParamValue::Vector(xs) => format_vec(xs),
            };
            (k.clone(), s)
        })
        .collect()
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_kv_str(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.problem {
        cfg.problem = v;
    }
    if let Some(v) = args.eps {
        cfg.eps = v;
    }
    if let Some(v) = args.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = args.preset {
        cfg.preset = parse_preset(&v)?;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    } else if args.config.is_none() {
        cfg.seed = env_seed();
    }
    if let Some(v) = args.x0 {
        cfg.x0 = parse_vec(&v)?;
    }
    if let Some(v) = args.y0 {
        cfg.y0 = parse_vec(&v)?;
    }
    if let Some(v) = args.trace {
        cfg.trace = Some(v);
    }
    if let Some(v) = args.mc_samples {
        cfg.mc_samples = v;
    }
    parse_params(&args.params, &mut cfg.params)?;
    if let Some(path) = &args.save_config {
        fs::write(path, cfg.to_kv_string())?;
    }

    let problem = make_problem(&cfg.problem, &cfg.params)?;
    let hp = build_hp(cfg.preset, cfg.eps, cfg.sigma, &problem)?;
    let x0 = if cfg.x0.is_empty() { vec![0.0; problem.d] } else { cfg.x0.clone() };
    let y0 = if cfg.y0.is_empty() { vec![0.0; problem.d] } else { cfg.y0.clone() };

    let mut writer = match &cfg.trace {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            Some(BufWriter::new(fs::File::create(path)?))
        }
        None => None,
    };
    let meta = TraceLine::Meta(MetaRecord {
        schema_version: TRACE_SCHEMA_VERSION,
        problem: cfg.problem.clone(),
        eps: cfg.eps,
        sigma: cfg.sigma,
        preset: cfg.preset.to_string(),
        seed: cfg.seed,
        x0: x0.clone(),
        y0: y0.clone(),
        params: params_to_meta(&cfg.params),
    });
    let mut io_err: Option<std::io::Error> = None;
    if let Some(w) = writer.as_mut() {
        writeln!(w, "{}", serde_json::to_string(&meta).unwrap())?;
    }
    let result = solve_with(&problem, cfg.eps, cfg.sigma, &hp, &x0, &y0, cfg.seed, |ev| {
        if let Some(w) = writer.as_mut() {
            let line = match ev {
                SolveEvent::Iteration(r) => serde_json::to_string(&TraceLine::Iter(r.clone())),
                SolveEvent::Probe(r) => serde_json::to_string(&TraceLine::Probe(r.clone())),
            }
            .unwrap();
            if let Err(e) = writeln!(w, "{line}") {
                io_err.get_or_insert(e);
            }
        }
    });
    // partial traces are flushed even when the solver errors out
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let (eq, trace) = result?;
    let f_star = problem.value(&eq.x_star, &eq.y_star);
    let summary = SummaryRecord {
        schema_version: TRACE_SCHEMA_VERSION,
        i_star: eq.i_star,
        eps_star: eq.eps_star,
        x_star: eq.x_star.clone(),
        y_star: eq.y_star.clone(),
        f_star,
        oracle_calls: trace.oracle_calls,
    };
    if let Some(w) = writer.as_mut() {
        writeln!(w, "{}", serde_json::to_string(&TraceLine::Summary(summary.clone())).unwrap())?;
        w.flush()?;
    }
    if let Some(path) = &args.summary {
        let mut csv = String::from(
            "problem,eps,sigma,preset,seed,i_star,eps_star,f_star,x_star,y_star,\
             oracle_value,oracle_grad_y,oracle_hess_y\n",
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            cfg.problem,
            cfg.eps,
            cfg.sigma,
            cfg.preset,
            cfg.seed,
            summary.i_star,
            summary.eps_star,
            summary.f_star,
            summary.x_star.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
            summary.y_star.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
            summary.oracle_calls.value,
            summary.oracle_calls.grad_y,
            summary.oracle_calls.hess_y,
        ));
        fs::write(path, csv)?;
    }
    println!("i_star = {}", summary.i_star);
    println!("eps_star = {}", summary.eps_star);
    println!("x_star = {}", format_vec(&summary.x_star));
    println!("y_star = {}", format_vec(&summary.y_star));
    println!("f_star = {}", summary.f_star);
    println!(
        "oracle_calls = value:{} grad_y:{} hess_y:{}",
        summary.oracle_calls.value, summary.oracle_calls.grad_y, summary.oracle_calls.hess_y
    );
    println!("outer_iterations = {}", gae::solver::outer_iterations(&trace));
    Ok(0)
}

#[derive(serde::Serialize)]
struct PathStepLine<'a> {
    kind: gae::greedy_path::StepKind,
    from: &'a [f64],
    to: &'a [f64],
    f_before: f64,
    f_after: f64,
}

fn cmd_path(args: PathArgs) -> Result<u8> {
    let mut params = ProblemParams::new();
    parse_params(&args.params, &mut params)?;
    let problem = make_problem(&args.problem, &params)?;
    let x = parse_vec(&args.x)?;
    let y0 = parse_vec(&args.y0)?;
    let hp = verified_path_params(args.eps, problem.b, problem.l, problem.d)?;
    let (y_end, trace) = run_greedy_path(&problem, &x, &y0, args.eps, &hp)?;
    let level = args.eps / (1.0 + hp.delta);
    let check = verify_greedy_path(&problem, &trace, level, args.samples_per_segment)?;
    if let Some(path) = &args.trace {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for s in &trace.steps {
            let line = PathStepLine {
                kind: s.kind,
                from: &s.from,
                to: &s.to,
                f_before: s.f_before,
                f_after: s.f_after,
            };
            writeln!(w, "{}", serde_json::to_string(&line).unwrap())?;
        }
        w.flush()?;
    }
    println!("steps = {}", trace.steps.len());
    println!("y_end = {}", format_vec(&y_end));
    println!("f_end = {}", problem.value(&x, &y_end));
    println!("greedy_level = {level}");
    println!("valid = {}", check.ok);
    println!("worst_slope = {}", check.worst_slope);
    println!("worst_curvature = {}", check.worst_curvature);
    if let Some(seg) = check.violating_segment {
        println!("violating_segment = {seg}");
        return Ok(2);
    }
    Ok(0)
}

fn read_trace_point(path: &PathBuf) -> Result<(MetaRecord, SummaryRecord)> {
    let text = fs::read_to_string(path)?;
    let mut meta = None;
    let mut summary = None;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TraceLine>(line) {
            Ok(TraceLine::Meta(m)) => meta = Some(m),
            Ok(TraceLine::Summary(s)) => summary = Some(s),
            Ok(_) => {}
            Err(e) => {
                return Err(GaeError::Validation(format!("bad trace line: {e}")));
            }
        }
    }
    match (meta, summary) {
        (Some(m), Some(s)) => Ok((m, s)),
        _ => Err(GaeError::Validation(
            "trace file is missing its meta or summary record".into(),
        )),
    }
}

fn cmd_certify(args: CertifyArgs) -> Result<u8> {
    let mut params = ProblemParams::new();
    parse_params(&args.params, &mut params)?;
    let (problem_id, x, y, eps, sigma) = match &args.trace {
        Some(path) => {
            let (meta, summary) = read_trace_point(path)?;
            for (k, v) in &meta.params {
                set_param(&mut params, k, v)?;
            }
            (meta.problem, summary.x_star, summary.y_star, summary.eps_star, meta.sigma)
        }
        None => {
            let need = |name: &str| {
                GaeError::Validation(format!("--{name} is required without --trace"))
            };
            (
                args.problem.clone().ok_or_else(|| need("problem"))?,
                parse_vec(args.x.as_deref().ok_or_else(|| need("x"))?)?,
                parse_vec(args.y.as_deref().ok_or_else(|| need("y"))?)?,
                args.eps.ok_or_else(|| need("eps"))?,
                args.sigma.ok_or_else(|| need("sigma"))?,
            )
        }
    };
    let problem = make_problem(&problem_id, &params)?;
    let hp = practical_params(eps.min(1.0), sigma, problem.b, problem.l, problem.d)?;
    let seed = args.seed.unwrap_or_else(env_seed);
    let cert = certify(&problem, &x, &y, eps, sigma, &hp, args.mc_samples, seed)?;
    if args.json {
        println!("{}", serde_json::to_string(&cert).unwrap());
    } else {
        println!("problem = {problem_id}");
        println!("eps = {eps}");
        println!("sigma = {sigma}");
        println!("y_grad_norm = {}", cert.y_grad_norm);
        println!("y_hess_lambda_max = {}", cert.y_hess_lambda_max);
        if let (Some(m), Some(s)) = (cert.x_sg_mean_norm, cert.x_sg_stderr) {
            println!("x_sg_mean_norm = {m} (stderr {s})");
        }
        if let (Some(m), Some(s)) = (cert.x_hess_lambda_min, cert.x_hess_stderr) {
            println!("x_hess_lambda_min = {m} (stderr {s})");
        }
        println!("fixed_point_ok = {}", cert.fixed_point_ok);
        println!("lower_bound_ok = {}", cert.lower_bound_ok);
        println!("n_samples = {}", cert.n_samples);
        println!("verdict = {}", cert.verdict);
    }
    Ok(match cert.verdict {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 4,
    })
}

fn cmd_gap(args: GapArgs) -> Result<u8> {
    let mut params = ProblemParams::new();
    parse_params(&args.params, &mut params)?;
    let problem = make_problem(&args.problem, &params)?;
    let gap = duality_gap(&problem, &parse_vec(&args.x)?, &parse_vec(&args.y)?)?;
    println!("{gap}");
    Ok(0)
}

fn cmd_params(args: ParamsArgs) -> Result<u8> {
    let preset = parse_preset(&args.preset)?;
    let hp = match preset {
        Preset::Practical => practical_params(args.eps, args.sigma, args.b, args.l, args.d)?,
        Preset::Theoretical => theoretical_params(args.eps, args.sigma, args.b, args.l, args.d)?,
        Preset::Custom => verified_path_params(args.eps, args.b, args.l, args.d)?,
    };
    println!("preset = {}", hp.preset);
    println!("eps = {}", hp.eps);
    println!("sigma = {}", hp.sigma);
    println!("b = {}", hp.b);
    println!("L = {}", hp.l);
    println!("L1 = {}", hp.l1);
    println!("L2 = {}", hp.l2);
    println!("d = {}", hp.d);
    println!("omega = {}", hp.omega);
    println!("gamma1 = {}", hp.gamma1);
    println!("delta = {}", hp.delta);
    println!("mu1 = {}", hp.mu1);
    println!("mu3 = {}", hp.mu3);
    println!("mu4 = {}", hp.mu4);
    println!("eta = {}", hp.eta);
    println!("alpha = {}", hp.alpha_noise);
    println!("I2 = {}", hp.i2);
    println!("I3 = {}", hp.i3);
    println!("I4 = {}", hp.i4);
    println!("eps0 = {}", hp.eps0);
    println!("c = {}", hp.c_univ);
    Ok(0)
}

fn cmd_zoo() -> Result<u8> {
    let entries: [(&str, &str); 8] = [
        ("ex22", "cos(x+y)sin(2x+2y) - exp(-x^2); discontinuous greedy max"),
        ("fig4", "periodic Gaussian crests; equilibria at (0, +-2)"),
        ("quad_scsc", "strongly convex-concave quadratic with analytic best responses"),
        ("cosine1d", "f(x,y) = cos(y); saddle at y = pi"),
        ("concquad", "f = -||y||^2/2, constant in x"),
        ("shiftmin1d", "discontinuous staircase in x; smoothing testbed"),
        ("mirror_bilinear", "mirrored bilinear game with C^2 fold caps"),
        ("constant", "f = 0"),
    ];
    for (id, desc) in entries {
        let p = make_problem(id, &ProblemParams::new())?;
        println!("{id:16} d={} b={} L={}  {desc}", p.d, p.b, p.l);
    }
    Ok(0)
}
