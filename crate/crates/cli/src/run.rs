use std::fs;
use std::path::Path;

use distglm::experiments::bench::{median, run_suite, BenchRow, BenchSize, Suite};
use distglm::experiments::{cross_validate, gen_sparse_glm, metrics, SimSpec};
use distglm::matrix_reg::unvec;
use distglm::{fit, fit_matrix, ConstraintSpec, Family, FitResult, MatrixDataset, SolverConfig};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::args::{BenchArgs, Command, Common, CvArgs, FitArgs, FitMatrixArgs, SimulateArgs};
use crate::clause::Clause;
use crate::error::CliError;
use crate::ingest::{ingest_csv, read_matrix, read_vector, write_matrix, write_vector};

/// Optional TOML file; any field may be omitted.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    family: Option<String>,
    constraints: Vec<String>,
    seed: Option<u64>,
    solver: Option<SolverConfig>,
}

/// Settings after merging the config file with flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub family: Option<Family>,
    pub constraints: Vec<String>,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Settings {
    pub fn resolve(common: &Common, flag_constraints: &[String]) -> Result<Self, CliError> {
        let file: FileConfig = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                toml::from_str(&text).map_err(|e| CliError::Format {
                    path: path.clone(),
                    message: e.to_string(),
                })?
            }
            None => FileConfig::default(),
        };
        let mut s = file.solver.unwrap_or_default();
        macro_rules! set {
            ($flag:expr, $field:ident) => {
                if let Some(v) = $flag {
                    s.$field = v;
                }
            };
        }
        set!(common.alpha, armijo_alpha);
        set!(common.sigma, halving_sigma);
        set!(common.grad_tol, grad_tol);
        set!(common.obj_tol, obj_tol);
        set!(common.max_iter, max_iter);
        set!(common.ridge, ridge_omega);
        set!(common.anneal_rho, anneal_rho);
        set!(common.anneal_cap, anneal_cap);
        set!(common.qn, qn_secants);
        if let Some(w) = &common.woodbury {
            s.use_woodbury = w.parse()?;
        }
        s.validate()?;
        let family = common
            .family
            .as_deref()
            .or(file.family.as_deref())
            .map(str::parse::<Family>)
            .transpose()?;
        let constraints = if flag_constraints.is_empty() {
            file.constraints
        } else {
            flag_constraints.to_vec()
        };
        Ok(Self {
            family,
            constraints,
            seed: common.seed.or(file.seed).unwrap_or(0),
            solver: s,
        })
    }

    fn family(&self) -> Result<Family, CliError> {
        self.family
            .ok_or_else(|| CliError::Usage("--family is required for this command".into()))
    }

    fn specs(&self, n: usize) -> Result<Vec<ConstraintSpec>, CliError> {
        self.constraints.iter().map(|c| Clause::parse(c)?.resolve(n)).collect()
    }

    fn echo(&self, command: &str, extra: Value) -> Value {
        json!({
            "command": command,
            "family": self.family.map(|f| f.name()),
            "constraints": self.constraints,
            "seed": self.seed,
            "solver": self.solver,
            "inputs": extra,
        })
    }
}

/// What a command reports; `main` wraps it in the result document.
pub struct Outcome {
    pub config: Value,
    pub result: Value,
    pub metrics: Value,
    pub converged: bool,
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Fit(a) => run_fit(a),
        Command::FitMatrix(a) => run_fit_matrix(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Cv(a) => run_cv(a),
        Command::Bench(a) => run_bench(a),
    }
}

pub fn common(command: &Command) -> &Common {
    match command {
        Command::Fit(a) => &a.common,
        Command::FitMatrix(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::Cv(a) => &a.common,
        Command::Bench(a) => &a.common,
    }
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| json!(r.iter().copied().collect::<Vec<_>>()))
            .collect(),
    )
}

/// Every public field of a fit, in a stable schema.
pub fn fit_json(r: &FitResult) -> Value {
    let epochs: Vec<Value> = r
        .epochs
        .iter()
        .map(|e| {
            json!({
                "weights": e.weights,
                "iterations": e.iterations,
                "backtracks": e.backtracks,
                "accelerated_steps": e.accelerated_steps,
                "termination": e.termination,
                "distances_sq": e.distances_sq,
                "trace_start": e.trace_start,
                "trace_end": e.trace_end,
            })
        })
        .collect();
    json!({
        "beta": vec_json(&r.beta),
        "projected_beta": vec_json(&r.projected_beta),
        "objective_trace": r.objective_trace,
        "grad_norm_trace": r.grad_norm_trace,
        "constraint_distances": r.constraint_distances,
        "iterations": r.iterations,
        "total_backtracks": r.total_backtracks,
        "accelerated_steps": r.accelerated_steps,
        "converged": r.converged,
        "termination": r.termination,
        "epochs": epochs,
        "final_weights": r.final_weights,
        "final_grad_norm": r.final_grad_norm,
        "last_step_norm": r.last_step_norm,
        "used_woodbury": r.used_woodbury,
        "coercivity_warning": r.coercivity_warning,
    })
}

fn data_echo(x: &Path, y: &Path, header: bool) -> Value {
    json!({ "x": x, "y": y, "header": header })
}

fn run_fit(a: &FitArgs) -> Result<Outcome, CliError> {
    let settings = Settings::resolve(&a.common, &a.constraints)?;
    let family = settings.family()?;
    let data = ingest_csv(&a.data.x, &a.data.y, a.data.header)?;
    let specs = settings.specs(data.n_predictors())?;
    let result = fit(family, &data, &specs, &settings.solver, None)?;
    let metrics = match &a.beta_true {
        Some(path) => {
            let truth = read_vector(path, a.data.header)?;
            serde_json::to_value(metrics(family, &result.projected_beta, &truth, None)?).expect("plain data")
        }
        None => Value::Null,
    };
    Ok(Outcome {
        config: settings.echo("fit", data_echo(&a.data.x, &a.data.y, a.data.header)),
        result: fit_json(&result),
        metrics,
        converged: result.converged,
    })
}

fn run_fit_matrix(a: &FitMatrixArgs) -> Result<Outcome, CliError> {
    let settings = Settings::resolve(&a.common, &[])?;
    let family = settings.family.unwrap_or(Family::Gaussian);
    let flat = read_matrix(&a.data.x, a.data.header)?;
    let y = read_vector(&a.data.y, a.data.header)?;
    let predictors = flat
        .row_iter()
        .map(|row| unvec(&row.transpose(), a.rows, a.cols))
        .collect::<Result<Vec<_>, _>>()?;
    let md = MatrixDataset::new(predictors, y)?;
    let mf = fit_matrix(family, &md, a.rank, a.weight, &settings.solver)?;
    let mut result = fit_json(&mf.fit);
    result["estimate"] = matrix_json(&mf.estimate);
    result["projected"] = matrix_json(&mf.projected);
    let mut inputs = data_echo(&a.data.x, &a.data.y, a.data.header);
    inputs["rows"] = json!(a.rows);
    inputs["cols"] = json!(a.cols);
    inputs["rank"] = json!(a.rank);
    inputs["weight"] = json!(a.weight);
    Ok(Outcome {
        config: settings.echo("fit-matrix", inputs),
        result,
        metrics: Value::Null,
        converged: mf.fit.converged,
    })
}

fn run_simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let settings = Settings::resolve(&a.common, &[])?;
    let mut spec = SimSpec::standard(settings.family()?, a.n, a.m, a.k, settings.seed);
    if let Some(sd) = a.design_sd {
        spec.design_sd = sd;
    }
    let sim = gen_sparse_glm(&spec)?;
    fs::create_dir_all(&a.dir).map_err(|e| CliError::io(&a.dir, e))?;
    let (px, py, pb) = (a.dir.join("X.csv"), a.dir.join("y.csv"), a.dir.join("beta.csv"));
    write_matrix(&px, &sim.data.x)?;
    write_vector(&py, &sim.data.y)?;
    write_vector(&pb, &sim.beta_true)?;
    Ok(Outcome {
        config: settings.echo("simulate", serde_json::to_value(&spec).expect("plain data")),
        result: json!({ "x": px, "y": py, "beta": pb, "regenerated": sim.regenerated }),
        metrics: Value::Null,
        converged: true,
    })
}

fn run_cv(a: &CvArgs) -> Result<Outcome, CliError> {
    let settings = Settings::resolve(&a.common, &[])?;
    let family = settings.family()?;
    if !a.template.contains("{}") {
        return Err(CliError::Usage("--template must contain `{}` for the level".into()));
    }
    let data = ingest_csv(&a.data.x, &a.data.y, a.data.header)?;
    let n = data.n_predictors();
    let template = a.template.clone();
    let levels = move |level: usize| {
        Clause::parse(&template.replace("{}", &level.to_string()))
            .and_then(|c| c.resolve(n))
            .map(|s| vec![s])
            .map_err(|e| match e {
                CliError::Model(m) => m,
                other => distglm::Error::InvalidConstraint(other.to_string()),
            })
    };
    let cv = cross_validate(
        family,
        &data,
        levels,
        &a.levels,
        a.folds,
        &settings.solver,
        settings.seed,
    )?;
    let mut inputs = data_echo(&a.data.x, &a.data.y, a.data.header);
    inputs["template"] = json!(a.template);
    inputs["levels"] = json!(a.levels);
    inputs["folds"] = json!(a.folds);
    Ok(Outcome {
        config: settings.echo("cv", inputs),
        result: json!({
            "chosen": cv.chosen,
            "losses": cv.losses.iter().map(|(l, v)| json!({ "level": l, "loss": v })).collect::<Vec<_>>(),
        }),
        metrics: Value::Null,
        converged: true,
    })
}

/// Worker count from `DISTGLM_THREADS`, defaulting to the available cores.
fn bench_threads() -> usize {
    std::env::var("DISTGLM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
}

fn summarize(rows: &[BenchRow]) -> Value {
    let pick = |f: fn(&BenchRow) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<f64>>();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let mse: Vec<f64> = rows.iter().map(|r| r.mse).collect();
    let exact = rows
        .iter()
        .filter(|r| r.support_precision == Some(1.0) && r.support_recall == Some(1.0))
        .count();
    let precision = mean(&pick(|r| r.support_precision));
    let recall = mean(&pick(|r| r.support_recall));
    let has_support = rows.iter().any(|r| r.support_precision.is_some());
    let jaccards = pick(|r| r.cross_jaccard);
    let iterations: Vec<f64> = rows.iter().map(|r| r.iterations as f64).collect();
    let converged = rows.iter().filter(|r| r.converged).count();
    let seconds: f64 = rows.iter().map(|r| r.seconds).sum();
    json!({
        "seeds": rows.len(),
        "median_mse": (!mse.is_empty()).then(|| median(&mse)),
        "mean_precision": precision,
        "mean_recall": recall,
        "exact_support_fraction": has_support.then(|| exact as f64 / rows.len() as f64),
        "median_cross_jaccard": (!jaccards.is_empty()).then(|| median(&jaccards)),
        "converged_fraction": converged as f64 / rows.len().max(1) as f64,
        "median_iterations": (!iterations.is_empty()).then(|| median(&iterations)),
        "total_seconds": seconds,
    })
}

fn run_bench(a: &BenchArgs) -> Result<Outcome, CliError> {
    let settings = Settings::resolve(&a.common, &[])?;
    let suite: Suite = a.suite.parse()?;
    let size = BenchSize {
        n: a.n,
        m: a.m,
        k: a.k,
        rank: a.rank,
        eps: a.eps,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(bench_threads())
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let seeds: Vec<u64> = (settings.seed..settings.seed + a.seeds).collect();
    let mut rows = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_suite(suite, seed, &size, &settings.solver).map(|run| run.row))
            .collect::<Result<Vec<_>, _>>()
    })?;
    rows.sort_by_key(|r| r.seed);
    if let Some(path) = &a.table {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Format {
            path: path.clone(),
            message: e.to_string(),
        })?;
        for row in &rows {
            w.serialize(row).map_err(|e| CliError::Format {
                path: path.clone(),
                message: e.to_string(),
            })?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    let converged = rows.iter().all(|r| r.converged);
    Ok(Outcome {
        config: settings.echo(
            "bench",
            json!({ "suite": suite, "seeds": a.seeds, "size": size, "table": a.table }),
        ),
        result: json!({ "rows": rows }),
        metrics: summarize(&rows),
        converged,
    })
}
