use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qpseries::config::RunConfig;
use qpseries::trees::{check_lemmas, oracle_compare, Scheme};
use qpseries::{frequency, report, verify, Error, Problem, SolverRegistry};

#[derive(Parser)]
#[command(name = "qpseries", version, about = "Quasi-periodic response solutions of ε ẍ + ẋ + ε g(x) = ε f(ωt)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diophantine diagnostics of the frequency vector.
    Diagnose(Common),
    /// Build the series solution and its residual.
    Solve(SolveArgs),
    /// Compare coefficients with tree sums and check the counting lemmas.
    Oracle(Common),
    /// Integrate perturbed trajectories and measure their distance to the solution.
    Attract(Common),
    /// Sup residual over a grid of ε and truncation orders.
    ResidualSweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Truncation order K.
    #[arg(long)]
    order: Option<usize>,
    /// Tree budget (oracle) or lattice budget (diagnose).
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Registered solver name or "auto".
    #[arg(long)]
    solver: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Exit with status 4 when the sup residual exceeds this value.
    #[arg(long)]
    max_residual: Option<f64>,
}

enum Failure {
    Config(String),
    Solver(String),
    Verification(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Verification(_) => 4,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Verification(m) | Failure::Io(m) => m,
        }
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn solver_err(e: Error) -> Failure {
    Failure::Solver(e.to_string())
}

type Outcome = Result<(), Failure>;

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Outcome {
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", dir.join(name).display()));
    fs::create_dir_all(dir).map_err(io)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, dir.join(name)).map_err(io)
}

struct Context {
    cfg: RunConfig,
    problem: Problem,
    order: usize,
    method: String,
}

fn load(common: &Common) -> Result<Context, Failure> {
    let cfg = RunConfig::load(&common.config).map_err(config_err)?;
    let problem = cfg.problem().map_err(config_err)?;
    Ok(Context {
        order: common.order.unwrap_or(cfg.solver.order),
        method: common.solver.clone().unwrap_or_else(|| cfg.solver.method.clone()),
        cfg,
        problem,
    })
}

fn diagnose(common: &Common) -> Outcome {
    let ctx = load(common)?;
    let budget = common.budget.unwrap_or(ctx.cfg.solver.lattice_budget);
    let rep = frequency::diagnose(&ctx.problem.omega, &ctx.problem.support(), ctx.cfg.solver.n_max, budget)
        .map_err(solver_err)?;
    write_atomic(&common.out, "diagnose.txt", &report::diagnose(&rep))?;
    println!("bryuno_partial = {}", report::num(rep.bryuno_partial));
    Ok(())
}

fn solve(args: &SolveArgs) -> Outcome {
    let ctx = load(&args.common)?;
    let registry = SolverRegistry::default();
    let sol = registry.solve(&ctx.problem, &ctx.method, ctx.order).map_err(|e| match e {
        Error::UnknownSolver(_) | Error::InvalidInput(_) => config_err(e),
        e => solver_err(e),
    })?;
    let res = verify::residual(&ctx.problem, &sol).map_err(solver_err)?;
    let out = &args.common.out;
    write_atomic(out, "coefficients.txt", &report::coefficients(&sol))?;
    write_atomic(out, "scalars.txt", &report::scalars(&sol))?;
    write_atomic(out, "residual.txt", &report::residual(&res))?;
    println!("method = {}", sol.method);
    println!("sup_residual = {}", report::num(res.sup_residual));
    if sol.radius_warning {
        eprintln!("warning: root-test radius {} does not exceed 1", sol.mu_radius_estimate);
    }
    match args.max_residual {
        Some(bound) if !(res.sup_residual <= bound) => Err(Failure::Verification(format!(
            "sup residual {} exceeds {}",
            report::num(res.sup_residual),
            report::num(bound)
        ))),
        _ => Ok(()),
    }
}

fn oracle(common: &Common) -> Outcome {
    let ctx = load(common)?;
    let budget = common.budget.map_or(ctx.cfg.solver.tree_budget, |b| b as usize);
    let registry = SolverRegistry::default();
    let k_max = common.order.unwrap_or(ctx.cfg.solver.k_max);
    let sol = registry.solve(&ctx.problem, &ctx.method, k_max).map_err(solver_err)?;
    let scheme = Scheme::for_method(sol.method).map_err(solver_err)?;
    let orep = oracle_compare(&ctx.problem, &sol, k_max, budget).map_err(solver_err)?;
    let lemma_k = match scheme {
        Scheme::N1 => 7,
        Scheme::N3 => ctx.problem.nonlinearity.order + 4,
    };
    let lrep = check_lemmas(&ctx.problem, scheme, lemma_k, budget).map_err(solver_err)?;
    write_atomic(&common.out, "oracle.txt", &report::oracle(&orep))?;
    write_atomic(&common.out, "lemmas.txt", &report::lemmas(&lrep))?;
    println!("max_rel_error = {}", report::num(orep.max_rel_error));
    println!("lemma_violations = {}", lrep.total_violations());
    if !orep.pass {
        return Err(Failure::Verification(format!(
            "oracle mismatch: max relative error {}",
            report::num(orep.max_rel_error)
        )));
    }
    if !lrep.pass() {
        return Err(Failure::Verification(format!("{} lemma violations", lrep.total_violations())));
    }
    Ok(())
}

fn attract(common: &Common) -> Outcome {
    let ctx = load(common)?;
    let sol = SolverRegistry::default()
        .solve(&ctx.problem, &ctx.method, ctx.order)
        .map_err(solver_err)?;
    let a = &ctx.cfg.attract;
    let rep = verify::attractor_test(&ctx.problem, &sol, &a.offsets, a.t_end, a.dt).map_err(solver_err)?;
    write_atomic(&common.out, "attract.txt", &report::attractor(&rep))?;
    for (i, e) in rep.entries.iter().enumerate() {
        write_atomic(&common.out, &format!("trajectory_{i}.csv"), &e.trajectory.to_csv())?;
    }
    for e in &rep.entries {
        println!(
            "offset {} terminal_distance {} pass {}",
            report::num(e.offset),
            report::num(e.terminal_distance),
            e.pass
        );
    }
    if rep.pass {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "terminal distance above {} for some offset",
            report::num(verify::ATTRACT_TOL)
        )))
    }
}

fn residual_sweep(common: &Common) -> Outcome {
    let ctx = load(common)?;
    let eps_list = common.eps_list.clone().unwrap_or_else(|| ctx.cfg.sweep.eps_list.clone());
    if eps_list.is_empty() {
        return Err(Failure::Config("empty ε list".into()));
    }
    let orders = match common.order {
        Some(k) => vec![k],
        None => ctx.cfg.sweep.orders.clone(),
    };
    let registry = SolverRegistry::default();
    let rows = verify::residual_sweep(&ctx.problem, &eps_list, &orders, |p, k| registry.solve(p, &ctx.method, k))
        .map_err(solver_err)?;
    write_atomic(&common.out, "sweep.csv", &verify::sweep_csv(&rows))?;
    print!("{}", verify::sweep_csv(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Diagnose(c) => diagnose(c),
        Command::Solve(s) => solve(s),
        Command::Oracle(c) => oracle(c),
        Command::Attract(c) => attract(c),
        Command::ResidualSweep(c) => residual_sweep(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
