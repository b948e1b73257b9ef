//! `attrpriv`: release query answers under attribute privacy.
//!
//! Reports go to stdout as JSON. Failures print `{"code", "message"}` to
//! stderr and exit with status 2 for I/O errors, 1 for everything else.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attrpriv::approx::{
    apgmng, calibrate_approximations, certify_approximation, effective_privacy, ApproximationSet,
    DivergenceBudget, GaussianApprox,
};
use attrpriv::config::FrameworkConfig;
use attrpriv::gaussian::{accuracy_from_variance, apgm, calibrate, GaussianCalibration};
use attrpriv::quilt::{
    apmqm, baseline_analysis, baseline_mqm, quilt_analysis, QuiltChoice, QuiltEvaluation,
    DEFAULT_MAX_QUILT_SIZE,
};
use attrpriv::wasserstein::{conditional_table, pair_distances, wasserstein_mechanism, worst_case_distance};
use attrpriv::{DiscreteDistribution, Error, NoiseRng, PrivacyParams, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value as Json};

#[derive(Parser)]
#[command(name = "attrpriv", version, about = "Attribute-private query release")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism and print its report.
    Release(ReleaseArgs),
    /// Print the calibration a mechanism would use, without releasing anything.
    Inspect(InspectArgs),
    /// Estimate how far a Gaussian approximation is from a distribution.
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mechanism {
    Apgm,
    Apgmng,
    Apmqm,
    MqmBaseline,
    Wasserstein,
}

impl Mechanism {
    fn name(self) -> &'static str {
        match self {
            Mechanism::Apgm => "apgm",
            Mechanism::Apgmng => "apgmng",
            Mechanism::Apmqm => "apmqm",
            Mechanism::MqmBaseline => "mqm-baseline",
            Mechanism::Wasserstein => "wasserstein",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// CSV file whose header names the framework's attributes.
    #[arg(long)]
    dataset: PathBuf,
    /// JSON framework document.
    #[arg(long)]
    framework: PathBuf,
    #[arg(long, value_enum)]
    mechanism: Mechanism,
    #[arg(long)]
    epsilon: f64,
    /// Required by apgm and apgmng, rejected by the others.
    #[arg(long)]
    delta: Option<f64>,
    /// Gaussian approximations for apgmng.
    #[arg(long)]
    approximations: Option<PathBuf>,
    /// Largest quilt separator searched by apmqm and mqm-baseline.
    #[arg(long)]
    max_quilt_size: Option<usize>,
    /// Lipschitz constant of the query, for mqm-baseline.
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Step of the grid used to expand a continuous class.
    #[arg(long)]
    grid_step: Option<f64>,
}

#[derive(Args)]
struct ReleaseArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    seed: u64,
    /// Include the drawn noise in the report. Debugging only: publishing the
    /// noise voids the privacy guarantee.
    #[arg(long)]
    reveal_noise: bool,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Failure probability for the reported accuracy of Gaussian mechanisms.
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
}

#[derive(Args)]
struct CertifyArgs {
    /// JSON distribution `{"atoms": [[x, p], ...]}`.
    #[arg(long)]
    distribution: Option<PathBuf>,
    /// JSON approximation `{"mean": .., "variance": ..}`.
    #[arg(long)]
    approximation: Option<PathBuf>,
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    /// Use this divergence bound instead of estimating one.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

fn usage(message: String) -> Error {
    Error::InvalidConfig(message)
}

impl RunArgs {
    /// Rejects options that the chosen mechanism does not take and requires
    /// those it does.
    fn check(&self) -> Result<()> {
        let m = self.mechanism;
        let gaussian = matches!(m, Mechanism::Apgm | Mechanism::Apgmng);
        let quilts = matches!(m, Mechanism::Apmqm | Mechanism::MqmBaseline);
        match (gaussian, self.delta) {
            (true, None) => return Err(usage(format!("{} requires --delta", m.name()))),
            (false, Some(_)) => return Err(usage(format!("{} does not take --delta", m.name()))),
            _ => {}
        }
        if (m == Mechanism::Apgmng) != self.approximations.is_some() {
            return Err(usage("--approximations is required by apgmng and only by it".into()));
        }
        if (m == Mechanism::MqmBaseline) != self.lipschitz.is_some() {
            return Err(usage("--lipschitz is required by mqm-baseline and only by it".into()));
        }
        if !quilts && self.max_quilt_size.is_some() {
            return Err(usage(format!("{} does not take --max-quilt-size", m.name())));
        }
        Ok(())
    }

    fn params(&self) -> Result<PrivacyParams> {
        PrivacyParams::new(self.epsilon, self.delta.unwrap_or(0.0))
    }

    fn quilt_size(&self) -> usize {
        self.max_quilt_size.unwrap_or(DEFAULT_MAX_QUILT_SIZE)
    }

    fn approximations(&self) -> Result<ApproximationSet> {
        let path = self.approximations.as_deref().expect("checked by RunArgs::check");
        ApproximationSet::from_json(&std::fs::read_to_string(path)?)
    }
}

fn to_json<T: Serialize>(value: &T) -> Json {
    serde_json::to_value(value).expect("reports serialize")
}

fn release(args: &ReleaseArgs) -> Result<Json> {
    let run = &args.run;
    run.check()?;
    let cfg = FrameworkConfig::from_path(&run.framework, run.grid_step)?;
    let x = cfg.load_dataset(&run.dataset)?;
    let (fw, query) = (&cfg.framework, &cfg.query);
    let mut rng = NoiseRng::derive(args.seed, run.mechanism.name());
    let (mut report, noise) = match run.mechanism {
        Mechanism::Apgm => {
            let r = apgm(&x, query, fw, &run.params()?, &mut rng)?;
            (to_json(&r), r.noise_drawn)
        }
        Mechanism::Apgmng => {
            let r = apgmng(&x, query, &run.approximations()?, fw, &run.params()?, &mut rng)?;
            (to_json(&r), r.noise_drawn)
        }
        Mechanism::Apmqm => {
            let r = apmqm(&x, query, fw, run.epsilon, run.quilt_size(), &mut rng)?;
            (to_json(&r), r.noise_drawn)
        }
        Mechanism::MqmBaseline => {
            let lipschitz = run.lipschitz.expect("checked by RunArgs::check");
            let r = baseline_mqm(&x, query, lipschitz, fw, run.epsilon, run.quilt_size(), &mut rng)?;
            (to_json(&r), r.noise_drawn)
        }
        Mechanism::Wasserstein => {
            let r = wasserstein_mechanism(&x, query, fw, run.epsilon, &mut rng)?;
            (to_json(&r), r.noise_drawn)
        }
    };
    if args.reveal_noise {
        report["noise"] = json!(noise.unwrap_or(0.0));
    }
    Ok(report)
}

fn gaussian_inspection(
    mechanism: Mechanism,
    n: usize,
    cal: GaussianCalibration,
    params: &PrivacyParams,
    beta: f64,
) -> Result<Json> {
    Ok(json!({
        "mechanism": mechanism.name(),
        "n": n,
        "epsilon": params.epsilon(),
        "delta": params.delta(),
        "c": cal.c,
        "sensitivities": cal.sensitivities,
        "min_conditional_variances": cal.min_conditional_variances,
        "sigma2": cal.sigma2,
        "beta": beta,
        "accuracy": accuracy_from_variance(cal.sigma2, beta)?,
    }))
}

fn quilt_inspection(per_node: Vec<(QuiltChoice, Vec<QuiltEvaluation>)>) -> Json {
    let scale = per_node.iter().map(|(c, _)| c.scale).fold(0.0, f64::max);
    let nodes: Vec<Json> =
        per_node.into_iter().map(|(choice, quilts)| json!({"choice": choice, "quilts": quilts})).collect();
    json!({"per_node": nodes, "scale": scale})
}

fn inspect(args: &InspectArgs) -> Result<Json> {
    let run = &args.run;
    run.check()?;
    let cfg = FrameworkConfig::from_path(&run.framework, run.grid_step)?;
    let x = cfg.load_dataset(&run.dataset)?;
    let (fw, query) = (&cfg.framework, &cfg.query);
    fw.check_dataset(&x)?;
    let n = x.n();
    match run.mechanism {
        Mechanism::Apgm => {
            let params = run.params()?;
            let cal = calibrate(fw, query, &params, n)?;
            gaussian_inspection(run.mechanism, n, cal, &params, args.beta)
        }
        Mechanism::Apgmng => {
            let params = run.params()?;
            let cal = calibrate_approximations(fw, &run.approximations()?, &params)?;
            gaussian_inspection(run.mechanism, n, cal, &params, args.beta)
        }
        Mechanism::Apmqm => {
            let fallback = query.column_sensitivity(&query.attributes(), n, &fw.domains())?;
            let mut out = quilt_inspection(quilt_analysis(fw, query, n, run.epsilon, run.quilt_size())?);
            out["mechanism"] = json!("apmqm");
            out["query_sensitivity"] = json!(fallback);
            Ok(out)
        }
        Mechanism::MqmBaseline => {
            let b = quilt_inspection(baseline_analysis(fw, n, run.epsilon, run.quilt_size())?);
            let lipschitz = run.lipschitz.expect("checked by RunArgs::check");
            let scale = b["scale"].as_f64().unwrap_or(f64::INFINITY) * lipschitz;
            Ok(json!({
                "mechanism": "mqm-baseline",
                "lipschitz": lipschitz,
                "per_node": b["per_node"],
                "scale": if scale.is_finite() { json!(scale) } else { Json::Null },
            }))
        }
        Mechanism::Wasserstein => {
            let entries = conditional_table(fw, query, n)?;
            let pairs = pair_distances(&entries);
            let w = worst_case_distance(&pairs)?;
            Ok(json!({
                "mechanism": "wasserstein",
                "conditionals": entries,
                "per_pair_distances": pairs,
                "W": w,
                "scale": w / run.epsilon,
                "grid_step": fw.grid_step(),
            }))
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn certify(args: &CertifyArgs) -> Result<Json> {
    let params = PrivacyParams::new(args.epsilon, args.delta)?;
    let (lambda, estimated) = match (&args.lambda, &args.distribution, &args.approximation) {
        (Some(l), None, None) => (*l, false),
        (None, Some(f), Some(g)) => {
            let f: DiscreteDistribution = read_json(f)?;
            let g: GaussianApprox = read_json(g)?;
            (certify_approximation(&f, &g, args.eta, args.bins)?, true)
        }
        _ => return Err(usage("give either --lambda, or both --distribution and --approximation".into())),
    };
    if lambda.is_infinite() {
        return Ok(json!({
            "eta": args.eta,
            "lambda_eta": null,
            "estimated": estimated,
            "bins": estimated.then_some(args.bins),
            "epsilon": params.epsilon(),
            "delta": params.delta(),
            "effective_epsilon": null,
            "effective_delta": null,
            "vacuous": true,
        }));
    }
    let budget = DivergenceBudget::new(args.eta, lambda)?;
    let eff = effective_privacy(&params, &budget);
    Ok(json!({
        "eta": args.eta,
        "lambda_eta": lambda,
        "estimated": estimated,
        "bins": estimated.then_some(args.bins),
        "epsilon": params.epsilon(),
        "delta": params.delta(),
        "effective_epsilon": eff.epsilon,
        "effective_delta": eff.delta,
        "vacuous": eff.vacuous,
    }))
}

fn fail(code: &str, message: String, status: u8) -> ExitCode {
    eprintln!("{}", json!({"code": code, "message": message}));
    ExitCode::from(status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string(), 1),
    };
    let result = match &cli.command {
        Command::Release(a) => release(a),
        Command::Inspect(a) => inspect(a),
        Command::Certify(a) => certify(a),
    };
    match result {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report).expect("reports serialize");
            // A reader that closes the pipe early is not an error.
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => fail("io", e.to_string(), 2),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => fail(e.code(), e.to_string(), if e.is_io() { 2 } else { 1 }),
    }
}
