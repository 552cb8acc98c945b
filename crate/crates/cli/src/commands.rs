use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use awreg::bandwidth::geometric_grid;
use awreg::estimate::sandwich_covariance;
use awreg::pipeline::fit_adaptive;
use awreg::simulation::{run_replications, Method, Replication, SimConfig, SimSummary};
use awreg::weights::{BandwidthChoice, EpsilonChoice, StrategyConfig, WeightRegistry};
use awreg::{Error, KernelFamily, Loss, MOptions, SigmaModel};

use crate::io::{format_f64, read_csv};
use crate::json::to_json;
use crate::report::FitReport;

#[derive(Debug, Parser)]
#[command(name = "awreg", version, about = "Adaptively weighted regression under heteroscedasticity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a weighted regression to a CSV file and print a JSON report.
    Fit(FitArgs),
    /// Run the Monte Carlo comparison of weighting methods.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV file with a header row and a column named `y`.
    #[arg(long)]
    pub data: PathBuf,
    /// square, huber:<cutoff> or power:<exponent>
    #[arg(long, default_value = "square")]
    pub loss: String,
    /// constant, parametric, np, sp-index, sp-proj or oracle
    #[arg(long, default_value = "constant")]
    pub weights: String,
    /// `cv` or a positive bandwidth
    #[arg(long, default_value = "cv")]
    pub bandwidth: String,
    /// Explicit geometric CV grid as min:max:count.
    #[arg(long)]
    pub cv_grid: Option<String>,
    /// `auto` or a nonnegative perturbation for sp-proj
    #[arg(long, default_value = "auto")]
    pub epsilon: String,
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    /// Variance family for parametric and oracle weights: smooth, disc or homo.
    #[arg(long, default_value = "smooth")]
    pub sigma_model: String,
    /// Accepted for interface symmetry; fitting draws no random numbers.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// File of `key = value` lines; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    /// smooth, disc or homo
    #[arg(long)]
    pub sigma: Option<String>,
    /// Comma-separated list of first-step, parametric, np, sp, sp-index, oracle.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub bandwidth: Option<String>,
    #[arg(long)]
    pub cv_grid: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub loss: Option<String>,
    /// Upper bound on worker threads; does not change the results.
    #[arg(long)]
    pub workers: Option<String>,
    /// Directory for errors.csv and summary.json.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Input(Error),
    Numerical(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Text for the error stream: JSON for numerical failures.
    pub fn render(&self) -> String {
        match self {
            CliError::Input(e) => format!("error: {e}"),
            CliError::Numerical(e) => to_json(&ErrorReport {
                error: e.category(),
                message: e.to_string(),
            }),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) | CliError::Numerical(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Input(e)
        }
    }
}

#[derive(serde::Serialize)]
struct ErrorReport {
    error: &'static str,
    message: String,
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidParameter(format!("cv grid must be min:max:count, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let min: f64 = parts[0].parse().map_err(|_| bad())?;
    let max: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    geometric_grid(min, max, count)
}

fn bandwidth_choice(bandwidth: &str, grid: Option<&str>) -> Result<BandwidthChoice, Error> {
    let choice: BandwidthChoice = bandwidth.parse()?;
    match (choice, grid) {
        (choice, None) => Ok(choice),
        (BandwidthChoice::Cv, Some(g)) => Ok(BandwidthChoice::CvGrid(parse_grid(g)?)),
        (_, Some(_)) => Err(Error::InvalidParameter(
            "--cv-grid only applies with --bandwidth cv".into(),
        )),
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<String, CliError> {
    let loss: Loss = args.loss.parse()?;
    loss.validate()?;
    let config = StrategyConfig {
        kernel: args.kernel.parse::<KernelFamily>()?,
        bandwidth: bandwidth_choice(&args.bandwidth, args.cv_grid.as_deref())?,
        epsilon: args.epsilon.parse::<EpsilonChoice>()?,
        sigma_model: args.sigma_model.parse::<SigmaModel>()?,
        ..StrategyConfig::default()
    };
    if !(args.tol.is_finite() && args.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", args.tol)).into());
    }
    let strategy = WeightRegistry::builtin().create(&args.weights, &config)?;
    let data = read_csv(&args.data)?;
    let options = MOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        init: None,
    };
    let fit = fit_adaptive(&data, &loss, strategy.as_ref(), &options)?;
    let cov = sandwich_covariance(&data, &loss, &fit.fit.weights, &fit.fit.beta)?;
    let diag: Vec<f64> = cov.diagonal().iter().copied().collect();
    let report = FitReport::new(data.n(), data.q(), loss.to_string(), strategy.name(), &fit, &diag);
    Ok(to_json(&report))
}

const SIM_KEYS: [&str; 12] = [
    "n", "q", "sigma", "methods", "reps", "seed", "bandwidth", "cv-grid", "epsilon", "loss", "workers", "out",
];

/// Reads a flat `key = value` file. Keys use the flag spelling without the
/// leading dashes; underscores are accepted in place of hyphens.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::InvalidParameter(format!("config: {}", e.message())))?;
    let mut out = BTreeMap::new();
    for (key, value) in table {
        let key = key.replace('_', "-");
        if !SIM_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!("config: unknown key `{key}`")));
        }
        let value = match value {
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "config: unsupported value for `{key}`: {other}"
                )))
            }
        };
        out.insert(key, value);
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse `{value}`")))
}

/// Resolves defaults, then the config file, then explicit flags.
pub fn sim_config(args: &SimulateArgs) -> Result<(SimConfig, PathBuf), Error> {
    let mut settings = match &args.config {
        Some(path) => read_config(path)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("n", &args.n),
        ("q", &args.q),
        ("sigma", &args.sigma),
        ("methods", &args.methods),
        ("reps", &args.reps),
        ("seed", &args.seed),
        ("bandwidth", &args.bandwidth),
        ("cv-grid", &args.cv_grid),
        ("epsilon", &args.epsilon),
        ("loss", &args.loss),
        ("workers", &args.workers),
        ("out", &args.out),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            settings.insert(key.to_string(), v.clone());
        }
    }

    let mut config = SimConfig::default();
    let get = |k: &str| settings.get(k).map(String::as_str);
    if let Some(v) = get("n") {
        config.n = parse_num("n", v)?;
    }
    if let Some(v) = get("q") {
        config.q = parse_num("q", v)?;
    }
    if let Some(v) = get("sigma") {
        config.sigma = v.parse()?;
    }
    if let Some(v) = get("methods") {
        config.methods = Method::parse_list(v)?;
    }
    if let Some(v) = get("reps") {
        config.replications = parse_num("reps", v)?;
    }
    if let Some(v) = get("seed") {
        config.seed = parse_num("seed", v)?;
    }
    config.bandwidth = bandwidth_choice(get("bandwidth").unwrap_or("cv"), get("cv-grid"))?;
    if let Some(v) = get("epsilon") {
        config.epsilon = v.parse()?;
    }
    if let Some(v) = get("loss") {
        config.loss = v.parse()?;
    }
    if let Some(v) = get("workers") {
        config.workers = Some(parse_num("workers", v)?);
    }
    config.validate()?;
    let out = PathBuf::from(get("out").unwrap_or("."));
    Ok((config, out))
}

/// One row per replication and method, replications in index order.
pub fn errors_csv(raw: &[Replication]) -> Result<Vec<u8>, Error> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    wtr.write_record(["replication", "method", "sq_error", "status"]).map_err(io)?;
    for rep in raw {
        for (method, outcome) in &rep.outcomes {
            let err = outcome.sq_error.map(format_f64).unwrap_or_default();
            wtr.write_record([rep.index.to_string(), method.to_string(), err, outcome.status.clone()])
                .map_err(io)?;
        }
    }
    wtr.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let (config, out) = sim_config(args)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let mut raw = run_replications(&config)?;
    raw.sort_by_key(|r| r.index);
    // raw errors are kept even when the study as a whole fails
    write_file(&out.join("errors.csv"), &errors_csv(&raw)?)?;
    let summary = SimSummary::from_replications(&config, raw)?;
    let json = to_json(&summary);
    write_file(&out.join("summary.json"), format!("{json}\n").as_bytes())?;
    Ok(json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec() {
        assert_eq!(parse_grid("0.5:2:3").unwrap().len(), 3);
        assert!(parse_grid("0.5:2").is_err());
        assert!(parse_grid("a:2:3").is_err());
        assert!(bandwidth_choice("0.3", Some("0.1:1:4")).is_err());
        assert!(matches!(bandwidth_choice("cv", Some("0.1:1:4")), Ok(BandwidthChoice::CvGrid(g)) if g.len() == 4));
    }

    #[test]
    fn config_values() {
        let c = parse_config("n = 200\nsigma = \"disc\"\nmethods = [\"np\", \"oracle\"]\ncv_grid = \"0.1:1:5\"\n").unwrap();
        assert_eq!(c["n"], "200");
        assert_eq!(c["sigma"], "disc");
        assert_eq!(c["methods"], "np,oracle");
        assert_eq!(c["cv-grid"], "0.1:1:5");
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_config("n = ").is_err());
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(Error::IndexDegenerate).exit_code(), 3);
        assert_eq!(CliError::from(Error::MissingColumn("y".into())).exit_code(), 2);
        let text = CliError::from(Error::BandwidthTooSmall { h: 0.01 }).render();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["error"], "bandwidth_too_small");
    }
}
