//! drso: batch command-line frontend for the robust-optimization solvers.
//!
//! Every subcommand reads a `drso/1` JSON (or CSV) problem file, runs one
//! solver, and emits JSON, CSV, or a table. Numeric output carries 17
//! significant digits so byte-identical reruns are the expected behaviour.
//! `--check-oracle` additionally runs the matching brute-force path and
//! prints the gap.

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use drso_core::error::Error;
use drso_core::io::{
    self, format_f64, parse_column_csv, parse_paths_csv, to_json_17, DistributionFile,
    ProblemFile, WassersteinFile,
};
use drso_core::newsvendor::{bin_samples, newsvendor_solve, NewsvendorInstance};
use drso_core::phi_baseline::phi_worst_case;
use drso_core::process::{
    evaluate_control, inner_lp_oracle, optimize_control, ControlPolicy, SamplePath,
    SearchOptions, SinusoidalModel,
};
use drso_core::uq::{uq_solve, GridRegion, HalfSpace, OpenBall, Region};
use drso_core::var::{wc_var, VarQuery};
use drso_core::{
    calibrate, construct_worst_case, drtp, epsilon_optimal_sequence, primal_oracle, solve_dual,
    wasserstein_1d_fast, wasserstein_distance, DiscreteDistribution, Existence, GroundMetric,
    MetricKind, Objective, PointSpace, WassersteinBall,
};

#[derive(Parser)]
#[command(
    name = "drso",
    version,
    about = "Distributionally robust optimization over transport balls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args)]
struct CommonArgs {
    /// Problem file (drso/1 JSON unless stated otherwise).
    #[arg(short, long)]
    input: Option<String>,
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    output: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Seed for synthetic generators.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Acceptable oracle gap for --check-oracle, overriding the command's
    /// documented default; larger gaps fail the run.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Also run the brute-force path, print the gap, and enforce the
    /// tolerance on it.
    #[arg(long, default_value_t = false)]
    check_oracle: bool,
}

impl CommonArgs {
    /// Prints the brute-force gap and fails the run when it exceeds the
    /// command's documented tolerance (or the --tolerance override).
    fn enforce_gap(&self, gap: f64, default_tol: f64) -> Result<(), Error> {
        eprintln!("oracle gap: {}", format_f64(gap));
        let tol = self.tolerance.unwrap_or(default_tol);
        if gap > tol {
            return Err(Error::Infeasible(format!(
                "oracle gap {gap:.3e} exceeds tolerance {tol:.3e}"
            )));
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Transport distance and optimal plan between two distributions.
    Wasserstein(CommonArgs),
    /// Minimize the one-dimensional dual of the worst-case expectation.
    DualSolve(CommonArgs),
    /// Dual solve plus worst-case distribution construction.
    WorstCase(CommonArgs),
    /// Brute-force primal LP for the worst-case expectation.
    Oracle(CommonArgs),
    /// Robust newsvendor over integer demand bins.
    Newsvendor(CommonArgs),
    /// Worst-case probability of a region.
    Uq(CommonArgs),
    /// Worst-case Value-at-Risk.
    Var(CommonArgs),
    /// Robust affine objective over candidate decisions.
    Affine(CommonArgs),
    /// Worst-case profit of a fixed on/off control.
    ProcessEval(CommonArgs),
    /// Local search for a robust on/off control.
    ProcessOpt(CommonArgs),
    /// Generate seeded sinusoidal-intensity sample paths.
    ProcessGen(CommonArgs),
    /// Worst-case concave gain over densities on a grid.
    Drtp(CommonArgs),
    /// Transport vs divergence worst cases, side by side, as CSV.
    PhiCompare(CommonArgs),
    /// Radius calibration from a concentration bound.
    Calibrate(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, fn(&CommonArgs) -> Result<String, Error>) = match &cli.command
    {
        Command::Wasserstein(a) => (a, cmd_wasserstein),
        Command::DualSolve(a) => (a, cmd_dual_solve),
        Command::WorstCase(a) => (a, cmd_worst_case),
        Command::Oracle(a) => (a, cmd_oracle),
        Command::Newsvendor(a) => (a, cmd_newsvendor),
        Command::Uq(a) => (a, cmd_uq),
        Command::Var(a) => (a, cmd_var),
        Command::Affine(a) => (a, cmd_affine),
        Command::ProcessEval(a) => (a, cmd_process_eval),
        Command::ProcessOpt(a) => (a, cmd_process_opt),
        Command::ProcessGen(a) => (a, cmd_process_gen),
        Command::Drtp(a) => (a, cmd_drtp),
        Command::PhiCompare(a) => (a, cmd_phi_compare),
        Command::Calibrate(a) => (a, cmd_calibrate),
    };
    match run(args) {
        Ok(text) => {
            let out = if text.ends_with('\n') { text } else { format!("{text}\n") };
            match &args.output {
                Some(path) => {
                    if let Err(e) = fs::write(path, out) {
                        return fail(&Error::Schema(format!("cannot write {path}: {e}")));
                    }
                }
                None => print!("{out}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

/// Machine-readable error envelope on stderr; exit code by failure class.
fn fail(e: &Error) -> ExitCode {
    let kind = match e {
        Error::Schema(_) => "schema",
        Error::BudgetExceeded { .. } => "budget",
        _ => "solver",
    };
    let payload = json!({ "error": { "kind": kind, "message": e.to_string() } });
    let _ = writeln!(std::io::stderr(), "{payload}");
    match kind {
        "schema" => ExitCode::from(1),
        "budget" => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn read_input(args: &CommonArgs) -> Result<String, Error> {
    let path = args
        .input
        .as_ref()
        .ok_or_else(|| Error::Schema("--input is required for this command".into()))?;
    fs::read_to_string(path).map_err(|e| Error::Schema(format!("cannot read {path}: {e}")))
}

fn parse_json(text: &str) -> Result<serde_json::Value, Error> {
    serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
}

fn require_schema(v: &serde_json::Value) -> Result<(), Error> {
    match v.get("schema").and_then(|s| s.as_str()) {
        Some(io::SCHEMA) => Ok(()),
        Some(other) => Err(Error::Schema(format!("expected schema {}, got {other}", io::SCHEMA))),
        None => Err(Error::Schema("missing schema field".into())),
    }
}

fn field<'a>(v: &'a serde_json::Value, name: &str) -> Result<&'a serde_json::Value, Error> {
    v.get(name).ok_or_else(|| Error::Schema(format!("missing field {name:?}")))
}

fn parse_field<T: serde::de::DeserializeOwned>(
    v: &serde_json::Value,
    name: &str,
) -> Result<T, Error> {
    serde_json::from_value(field(v, name)?.clone())
        .map_err(|e| Error::Schema(format!("field {name:?}: {e}")))
}

/// Renders a serializable result in the requested format. Tables and CSV
/// flatten top-level scalars; nested values stay JSON-encoded.
fn render<T: Serialize>(value: &T, format: Format) -> Result<String, Error> {
    match format {
        Format::Json => to_json_17(value),
        Format::Csv | Format::Table => {
            let v = serde_json::to_value(value).map_err(|e| Error::Schema(e.to_string()))?;
            let obj = v
                .as_object()
                .ok_or_else(|| Error::Schema("expected an object result".into()))?;
            let mut out = String::new();
            if format == Format::Csv {
                out.push_str("key,value\n");
            }
            for (k, item) in obj {
                let rendered = match item {
                    serde_json::Value::Number(n)
                        if n.as_f64().is_some() && n.as_i64().is_none() =>
                    {
                        format_f64(n.as_f64().unwrap())
                    }
                    serde_json::Value::String(s) => s.clone(),
                    other => to_json_17(other)?,
                };
                if format == Format::Csv {
                    out.push_str(&format!("{k},{rendered}\n"));
                } else {
                    out.push_str(&format!("{k}: {rendered}\n"));
                }
            }
            Ok(out)
        }
    }
}

fn cmd_wasserstein(args: &CommonArgs) -> Result<String, Error> {
    let file = WassersteinFile::parse(&read_input(args)?)?;
    let mu = file.mu.to_distribution()?;
    let nu = file.nu.to_distribution()?;
    let metric = GroundMetric::new(file.metric.clone(), file.p)?;
    let (distance, plan) = wasserstein_distance(&mu, &nu, &metric)?;

    #[derive(Serialize)]
    struct Out {
        distance: f64,
        cost: f64,
        plan: drso_core::TransportPlan,
        #[serde(skip_serializing_if = "Option::is_none")]
        oracle_gap: Option<f64>,
    }
    let oracle_gap = if args.check_oracle {
        // Quantile formula against the LP on 1-D supports; marginal audit
        // elsewhere.
        let gap = if metric.kind == MetricKind::Absolute1d && mu.space().dim() == 1 {
            (distance - wasserstein_1d_fast(&mu, &nu, file.p)?).abs()
        } else {
            let rows = plan.row_sums(mu.len());
            let cols = plan.col_sums(nu.len());
            let row_gap = rows
                .iter()
                .zip(mu.atoms())
                .map(|(r, a)| (r - a.weight).abs())
                .fold(0.0f64, f64::max);
            let col_gap = cols
                .iter()
                .zip(nu.atoms())
                .map(|(c, a)| (c - a.weight).abs())
                .fold(0.0f64, f64::max);
            row_gap.max(col_gap)
        };
        args.enforce_gap(gap, 1e-9)?;
        Some(gap)
    } else {
        None
    };
    render(&Out { distance, cost: plan.cost, plan, oracle_gap }, args.format)
}

fn dual_inputs(args: &CommonArgs) -> Result<(WassersteinBall, Objective), Error> {
    ProblemFile::parse(&read_input(args)?)?.build()
}

#[derive(Serialize)]
struct DualOut {
    lambda_star: f64,
    value: f64,
    kappa_hat: f64,
    existence: Existence,
    left_slope: f64,
    right_slope: f64,
    regularizations: Vec<drso_core::RegularizedValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_gap: Option<f64>,
}

fn dual_out(
    ball: &WassersteinBall,
    objective: &Objective,
    sol: drso_core::DualSolution,
    args: &CommonArgs,
) -> Result<DualOut, Error> {
    let oracle_gap = if args.check_oracle {
        let (primal, _) = primal_oracle(ball, objective)?;
        let gap = (sol.value - primal).abs();
        args.enforce_gap(gap, 1e-8)?;
        Some(gap)
    } else {
        None
    };
    Ok(DualOut {
        lambda_star: sol.lambda_star,
        value: sol.value,
        kappa_hat: sol.kappa_hat,
        existence: sol.existence,
        left_slope: sol.left_slope,
        right_slope: sol.right_slope,
        regularizations: sol.regularizations,
        oracle_gap,
    })
}

fn cmd_dual_solve(args: &CommonArgs) -> Result<String, Error> {
    let (ball, objective) = dual_inputs(args)?;
    let sol = solve_dual(&ball, &objective)?;
    let out = dual_out(&ball, &objective, sol, args)?;
    render(&out, args.format)
}

fn cmd_worst_case(args: &CommonArgs) -> Result<String, Error> {
    let (ball, objective) = dual_inputs(args)?;
    let sol = solve_dual(&ball, &objective)?;

    #[derive(Serialize)]
    struct Out {
        dual: DualOut,
        worst_case: drso_core::WorstCaseDistribution,
        support: Vec<Vec<f64>>,
    }
    let wc = match sol.existence {
        Existence::Exists => construct_worst_case(&sol, &ball, &objective)?,
        Existence::VanishingSequence => {
            // Report the best escape the candidate radius allows.
            let eps = sol.value.abs().max(1.0);
            epsilon_optimal_sequence(&sol, &ball, &objective, eps)?
        }
        Existence::Unbounded => {
            return Err(Error::Unbounded("worst-case expectation is infinite".into()))
        }
    };
    let support = wc
        .distribution
        .atoms()
        .iter()
        .map(|a| wc.distribution.space().point(a.index).to_vec())
        .collect();
    let dual = dual_out(&ball, &objective, sol, args)?;
    render(&Out { dual, worst_case: wc, support }, args.format)
}

fn cmd_oracle(args: &CommonArgs) -> Result<String, Error> {
    let (ball, objective) = dual_inputs(args)?;
    let (value, distribution) = primal_oracle(&ball, &objective)?;

    #[derive(Serialize)]
    struct Out {
        value: f64,
        distribution: DistributionFile,
        #[serde(skip_serializing_if = "Option::is_none")]
        oracle_gap: Option<f64>,
    }
    let oracle_gap = if args.check_oracle {
        let sol = solve_dual(&ball, &objective)?;
        let gap = (sol.value - value).abs();
        args.enforce_gap(gap, 1e-8)?;
        Some(gap)
    } else {
        None
    };
    render(
        &Out {
            value,
            distribution: DistributionFile::from_distribution(&distribution),
            oracle_gap,
        },
        args.format,
    )
}

fn cmd_newsvendor(args: &CommonArgs) -> Result<String, Error> {
    let v = parse_json(&read_input(args)?)?;
    require_schema(&v)?;
    let b_bar: usize = parse_field(&v, "b_bar")?;
    let weights: Vec<f64> = if let Some(w) = v.get("weights") {
        serde_json::from_value(w.clone()).map_err(|e| Error::Schema(e.to_string()))?
    } else if let Some(s) = v.get("samples") {
        // Raw demand draws; binned onto {0..b_bar} here.
        let samples: Vec<f64> = if let Some(path) = s.as_str() {
            parse_column_csv(
                &fs::read_to_string(path)
                    .map_err(|e| Error::Schema(format!("cannot read {path}: {e}")))?,
            )?
        } else {
            serde_json::from_value(s.clone()).map_err(|e| Error::Schema(e.to_string()))?
        };
        bin_samples(&samples, b_bar)?
    } else {
        return Err(Error::Schema("need either weights or samples".into()));
    };
    let instance = NewsvendorInstance {
        overage: parse_field(&v, "h")?,
        underage: parse_field(&v, "b")?,
        b_bar,
        weights,
        theta: parse_field(&v, "theta")?,
        order: parse_field(&v, "p")?,
    };
    let sol = newsvendor_solve(&instance)?;

    #[derive(Serialize)]
    struct Out {
        x_star: usize,
        value: f64,
        lambda_star: f64,
        existence: Existence,
        worst_case: drso_core::WorstCaseDistribution,
        per_level: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        oracle_gap: Option<f64>,
    }
    let oracle_gap = if args.check_oracle {
        let ball = instance.ball()?;
        let objective = Objective::from_table(instance.cost_table(sol.x_star))?;
        let (primal, _) = primal_oracle(&ball, &objective)?;
        let gap = (sol.value - primal).abs();
        args.enforce_gap(gap, 1e-8)?;
        Some(gap)
    } else {
        None
    };
    render(
        &Out {
            x_star: sol.x_star,
            value: sol.value,
            lambda_star: sol.dual.lambda_star,
            existence: sol.dual.existence,
            worst_case: sol.worst_case,
            per_level: sol.per_level,
            oracle_gap,
        },
        args.format,
    )
}

fn cmd_uq(args: &CommonArgs) -> Result<String, Error> {
    let v = parse_json(&read_input(args)?)?;
    require_schema(&v)?;
    let nominal_file: DistributionFile = parse_field(&v, "nominal")?;
    let nominal = nominal_file.to_distribution()?;
    let metric_kind: MetricKind = parse_field(&v, "metric")?;
    let p: f64 = parse_field(&v, "p")?;
    let metric = GroundMetric::new(metric_kind, p)?;
    let theta: f64 = parse_field(&v, "theta")?;
    let region_spec = field(&v, "region")?;
    let kind = region_spec
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| Error::Schema("region needs a kind".into()))?;
    let region: Box<dyn Region + '_> = match kind {
        "ball" => Box::new(OpenBall {
            center: parse_field(region_spec, "center")?,
            radius: parse_field(region_spec, "radius")?,
        }),
        "half-space" => Box::new(HalfSpace {
            normal: parse_field(region_spec, "normal")?,
            offset: parse_field(region_spec, "offset")?,
        }),
        "grid" => Box::new(GridRegion {
            space: nominal.space(),
            inside: parse_field(region_spec, "inside")?,
            metric: metric.clone(),
        }),
        other => return Err(Error::Schema(format!("unknown region kind {other:?}"))),
    };
    let result = uq_solve(&nominal, region.as_ref(), theta, &metric)?;

    #[derive(Serialize)]
    struct Out {
        wc_probability: f64,
        worst_case: drso_core::WorstCaseDistribution,
        #[serde(skip_serializing_if = "Option::is_none")]
        oracle_gap: Option<f64>,
    }
    let oracle_gap = if args.check_oracle {
        let lp = uq_lp_check(&nominal, region.as_ref(), theta, &metric)?;
        let gap = (result.wc_probability - lp).abs();
        args.enforce_gap(gap, 1e-8)?;
        Some(gap)
    } else {
        None
    };
    render(
        &Out {
            wc_probability: result.wc_probability,
            worst_case: result.worst_case,
            oracle_gap,
        },
        args.format,
    )
}

/// Brute-force check: primal LP over the atoms plus their exit points with
/// the negated region indicator.
fn uq_lp_check(
    nominal: &DiscreteDistribution,
    region: &dyn Region,
    theta: f64,
    metric: &GroundMetric,
) -> Result<f64, Error> {
    let space = nominal.space();
    let exits: Vec<Vec<f64>> = nominal
        .atoms()
        .iter()
        .map(|a| region.exit_point(space.point(a.index)))
        .collect();
    let (augmented, _) = space.extend_with(&exits)?;
    let atoms: Vec<(usize, f64)> = nominal
        .atoms()
        .iter()
        .map(|a| {
            augmented
                .find(space.point(a.index))
                .map(|idx| (idx, a.weight))
                .ok_or_else(|| Error::Schema("atom lost during augmentation".into()))
        })
        .collect::<Result<_, _>>()?;
    let table: Vec<f64> = (0..augmented.len())
        .map(|x| if region.contains(augmented.point(x)) { -1.0 } else { 0.0 })
        .collect();
    let nominal = DiscreteDistribution::new(augmented, atoms)?;
    let ball = WassersteinBall::new(nominal, metric.clone(), theta)?;
    let objective = Objective::from_table(table)?;
    let (value, _) = primal_oracle(&ball, &objective)?;
    Ok(-value)
}

fn cmd_var(args: &CommonArgs) -> Result<String, Error> {
    let v = parse_json(&read_input(args)?)?;
    require_schema(&v)?;
    let query = VarQuery {
        nominal: parse_field(&v, "nominal")?,
        weights: parse_field(&v, "weights")?,
        alpha: parse_field(&v, "alpha")?,
        theta: parse_field(&v, "theta")?,
        order: parse_field(&v, "p")?,
    };
    let result = wc_var(&query)?;
    if args.check_oracle {
        let target = drso_core::metric::pow_order(query.theta, query.order);
        args.enforce_gap((result.certificate - target).abs(), 1e-6)?;
    }
    render(&result, args.format)
}

fn cmd_affine(args: &CommonArgs) -> Result<String, Error> {
    let v = parse_json(&read_input(args)?)?;
    require_schema(&v)?;
    let data: Vec<drso_core::affine::AffineSample> = parse_field(&v, "data")?;
    let theta: f64 = parse_field(&v, "theta")?;
    let dual_order: f64 = parse_field(&v, "dual_order")?;
    let candidates: Vec<Vec<f64>> = parse_field(&v, "candidates")?;
    let sol = drso_core::affine::affine_drso(&data, theta, dual_order, &candidates)?;
    if args.check_oracle {
        // Sampled feasible perturbations can only fall short of the closed
        // form; report the remaining slack at the chosen decision.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(args.seed);
        let dim = sol.x_star.len();
        let primal_order =
            if dual_order.is_infinite() { 1.0 } else { dual_order / (dual_order - 1.0) };
        let mut best = f64::NEG_INFINITY;
        for _ in 0..2000 {
            let dir: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let norm = drso_core::numeric::lq_norm(&dir, primal_order);
            if norm <= 0.0 {
                continue;
            }
            let shifted: Vec<drso_core::affine::AffineSample> = data
                .iter()
                .map(|s| drso_core::affine::AffineSample {
                    a: s.a.iter().zip(&dir).map(|(ai, di)| ai + theta * di / norm).collect(),
                    b: s.b,
                })
                .collect();
            let value =
                drso_core::affine::affine_objective(&shifted, 0.0, dual_order, &sol.x_star)?;
            best = best.max(value);
        }
        // Directional sampling only lower-bounds the worst case.
        args.enforce_gap((sol.value - best).max(0.0), 1e-2)?;
    }
    render(&sol, args.format)
}

fn read_paths(v: &serde_json::Value) -> Result<Vec<SamplePath>, Error> {
    let p = field(v, "paths")?;
    if let Some(path) = p.as_str() {
        return parse_paths_csv(
            &fs::read_to_string(path)
                .map_err(|e| Error::Schema(format!("cannot read {path}: {e}")))?,
        );
    }
    let raw: Vec<Vec<f64>> =
        serde_json::from_value(p.clone()).map_err(|e| Error::Schema(e.to_string()))?;
    raw.into_iter().map(SamplePath::new).collect()
}

fn cmd_process_eval(args: &CommonArgs) -> Result<String, Error> {
    let v = parse_json(&read_input(args)?)?;
    require_schema(&v)?;
    let intervals: Vec<(f64, f64)> = parse_field(&v, "control")?;
    let control = ControlPolicy::new(intervals)?;
    let paths = read_paths(&v)?;
    let theta: f64 = parse_field(&v, "theta")?;
    let cost_rate: f64 = parse_field(&v, "c")?;
    let value = evaluate_control(&control, &paths, theta, cost_rate)?;
    if args.check_oracle {
        let lp = inner_lp_oracle(&control, &paths, theta)?;
        args.enforce_gap((value.transport.removed_mass - lp).abs(), 1e-9)?;
    }
    render(&value, args.format)
}

fn cmd_process_opt(args: &CommonArgs) -> Result<String, Error> {
    let v = parse_json(&read_input(args)?)?;
    require_schema(&v)?;
    let paths = read_paths(&v)?;
    let theta: f64 = parse_field(&v, "theta")?;
    let cost_rate: f64 = parse_field(&v, "c")?;
    let options: SearchOptions = match v.get("options") {
        Some(o) => serde_json::from_value(o.clone()).map_err(|e| Error::Schema(e.to_string()))?,
        None => SearchOptions::default(),
    };
    let (control, value) = optimize_control(&paths, theta, cost_rate, &options)?;

    #[derive(Serialize)]
    struct Out {
        control: Vec<(f64, f64)>,
        value: f64,
        on_length: f64,
        inside_mass: f64,
    }
    if args.check_oracle {
        let lp = inner_lp_oracle(&control, &paths, theta)?;
        args.enforce_gap((value.transport.removed_mass - lp).abs(), 1e-9)?;
    }
    render(
        &Out {
            control: control.intervals.clone(),
            value: value.value,
            on_length: value.on_length,
            inside_mass: value.inside_mass,
        },
        args.format,
    )
}

fn cmd_process_gen(args: &CommonArgs) -> Result<String, Error> {
    // Optional input overrides the banded-intensity defaults.
    let (n_paths, model) = match &args.input {
        Some(_) => {
            let v = parse_json(&read_input(args)?)?;
            require_schema(&v)?;
            let n: usize = parse_field(&v, "n_paths")?;
            let model = SinusoidalModel {
                rate: parse_field(&v, "rate")?,
                w: parse_field(&v, "w")?,
                s: parse_field(&v, "s")?,
                a: parse_field(&v, "a")?,
            };
            (n, model)
        }
        None => (10, SinusoidalModel::bands_experiment()),
    };
    let paths = model.sample_paths(n_paths, args.seed);
    match args.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out {
                seed: u64,
                paths: Vec<Vec<f64>>,
            }
            to_json_17(&Out {
                seed: args.seed,
                paths: paths.into_iter().map(|p| p.arrivals).collect(),
            })
        }
        _ => {
            // One row per path, variable-length arrival lists.
            let mut out = String::new();
            for p in &paths {
                let cells: Vec<String> = p.arrivals.iter().map(|&t| format_f64(t)).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            Ok(out)
        }
    }
}

fn cmd_drtp(args: &CommonArgs) -> Result<String, Error> {
    let v = parse_json(&read_input(args)?)?;
    require_schema(&v)?;
    let atoms: Vec<Vec<f64>> = parse_field(&v, "atoms")?;
    let theta: f64 = parse_field(&v, "theta")?;
    let p: f64 = parse_field(&v, "p")?;
    let instance = if v.get("cells").is_some() {
        drtp::ContinuumInstance {
            cells: parse_field(&v, "cells")?,
            areas: parse_field(&v, "areas")?,
            atoms,
            theta,
            order: p,
        }
    } else {
        let nx: usize = parse_field(&v, "nx")?;
        let ny: usize = parse_field(&v, "ny")?;
        drtp::ContinuumInstance::unit_square(nx, ny, atoms, theta, p)
    };
    let sol = drtp::drtp_solve(&instance)?;
    if args.check_oracle {
        args.enforce_gap(sol.duality_gap, 1e-3)?;
    }
    match args.format {
        Format::Csv => {
            // Plot-ready density samples.
            let rows: Vec<Vec<f64>> = instance
                .cells
                .iter()
                .zip(&sol.f_star)
                .map(|(c, &f)| vec![c[0], c[1], f])
                .collect();
            Ok(io::write_csv(&["x", "y", "f"], &rows))
        }
        _ => render(&sol, args.format),
    }
}

fn cmd_phi_compare(args: &CommonArgs) -> Result<String, Error> {
    let v = parse_json(&read_input(args)?)?;
    require_schema(&v)?;
    let q: Vec<f64> = parse_field(&v, "q")?;
    let psi: Vec<f64> = parse_field(&v, "psi")?;
    let theta_w: f64 = parse_field(&v, "theta_wasserstein")?;
    let theta_phi: f64 = parse_field(&v, "theta_phi")?;
    let p: f64 = parse_field(&v, "p")?;
    if q.len() != psi.len() {
        return Err(Error::Schema("q and psi must have equal length".into()));
    }

    // Transport worst case over the integer bins.
    let bins = PointSpace::new((0..q.len()).map(|j| vec![j as f64]).collect())?;
    let nominal = DiscreteDistribution::from_weights(bins, &q)?;
    let ball = WassersteinBall::new(nominal, GroundMetric::absolute_1d(p)?, theta_w)?;
    let objective = Objective::from_table(psi.clone())?;
    let sol = solve_dual(&ball, &objective)?;
    let wc = construct_worst_case(&sol, &ball, &objective)?;
    let p_wass = wc.distribution.dense_weights();

    let burg = phi_worst_case(&q, &psi, theta_phi, drso_core::PhiKind::Burg)?;
    let kl = phi_worst_case(&q, &psi, theta_phi, drso_core::PhiKind::Kl)?;
    if args.check_oracle {
        let (primal, _) = primal_oracle(&ball, &objective)?;
        args.enforce_gap((sol.value - primal).abs(), 1e-8)?;
    }

    let rows: Vec<Vec<f64>> = (0..q.len())
        .map(|j| vec![j as f64, q[j], p_wass[j], burg.p_star[j], kl.p_star[j]])
        .collect();
    Ok(io::write_csv(&["bin", "q", "p_wasserstein", "p_burg", "p_kl"], &rows))
}

fn cmd_calibrate(args: &CommonArgs) -> Result<String, Error> {
    let v = parse_json(&read_input(args)?)?;
    require_schema(&v)?;
    let samples: Vec<f64> = if let Some(path) = field(&v, "samples")?.as_str() {
        parse_column_csv(
            &fs::read_to_string(path)
                .map_err(|e| Error::Schema(format!("cannot read {path}: {e}")))?,
        )?
    } else {
        parse_field(&v, "samples")?
    };
    let b_bar: f64 = parse_field(&v, "b_bar")?;
    let target: f64 = parse_field(&v, "target")?;
    let cal = calibrate::calibrate_radius(&samples, b_bar, target)?;
    if args.check_oracle {
        args.enforce_gap((cal.achieved_bound - target).abs(), 1e-6)?;
    }
    match args.format {
        Format::Csv => {
            // Summary rows, then the bound curve for plotting.
            let mut out = String::new();
            out.push_str(&format!("theta_star,{}\n", format_f64(cal.theta_star)));
            out.push_str(&format!("delta_star,{}\n", format_f64(cal.delta_star)));
            out.push_str(&format!("lambda,{}\n", format_f64(cal.lambda)));
            out.push_str(&format!("achieved_bound,{}\n", format_f64(cal.achieved_bound)));
            out.push_str("theta,bound\n");
            for (t, b) in &cal.curve {
                out.push_str(&format!("{},{}\n", format_f64(*t), format_f64(*b)));
            }
            Ok(out)
        }
        _ => render(&cal, args.format),
    }
}
