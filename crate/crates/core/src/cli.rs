//! Command-line interface.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::baselines::{free_production_cue_validity, r2_and_mse, write_prediction_table, LabelNormalizer, PredictionRow};
use crate::data::{joint_data_from_elicitation, joint_data_from_habitual, DatasetLayout, EndorsementTable};
use crate::error::{csv_error, Error, Result};
use crate::fixtures::{FixtureLibrary, WORKED_EXAMPLE_LAMBDA};
use crate::inference::{
    distortion_check, fit_beta_mixture, fit_isolated, fit_joint, fit_single_beta, ks_distance, map_estimates,
    posterior_predictive, predict_items, summarize, JointData, McmcConfig, ModelKind, PosteriorSamples, PriorData,
};
use crate::inference::summary::empirical_cdf;
use crate::numerics::{BetaMixturePrior, BetaParams, GridDistribution, GridSpec, RateMixturePrior, Scale};
use crate::pragmatics::{endorse, endorse_expectation, endorse_fixed, interpret, FixedThresholdParams, SpeakerConfig, SpeakerVariant};
use crate::priors::{cue_validity_table, clamp_percent, CategoryWorld, ElicitationRow, ElicitationTable, HabitualElicitationTable};
use crate::replicate;
use crate::semantics::{threshold_prior_for, Utterance};
use crate::simulate::{prior_responses, simulate_joint, SyntheticJointSpec};

/// Environment variable naming the published-data directory.
pub const DATA_DIR_ENV: &str = "LGEN_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Uncertain,
    Fixed,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Uncertain => ModelKind::Uncertain,
            ModelArg::Fixed => ModelKind::Fixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Point,
    Expectation,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Grid resolution for prevalence and rate grids.
    #[arg(long, global = true, default_value_t = 100)]
    pub grid_bins: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 2)]
    pub chains: usize,
    /// MCMC iterations per chain, burn-in included.
    #[arg(long, global = true, default_value_t = 20_000)]
    pub iterations: usize,
    #[arg(long, global = true, default_value_t = 5_000)]
    pub burn_in: usize,
    /// Speaker rationality.
    #[arg(long, global = true, default_value_t = WORKED_EXAMPLE_LAMBDA)]
    pub lambda: f64,
    #[arg(long, global = true, value_enum, default_value_t = ModelArg::Uncertain)]
    pub model: ModelArg,
    #[arg(long, global = true, value_enum, default_value_t = VariantArg::Point)]
    pub variant: VariantArg,
}

impl GlobalOpts {
    fn mcmc(&self) -> Result<McmcConfig> {
        McmcConfig::new(self.iterations, self.burn_in, self.chains, self.seed)
    }

    fn speaker(&self) -> Result<SpeakerConfig> {
        let variant = match self.variant {
            VariantArg::Point => SpeakerVariant::Point,
            VariantArg::Expectation => SpeakerVariant::Expectation,
        };
        SpeakerConfig::with_variant(self.lambda, variant)
    }

    fn unit(&self) -> Result<GridSpec> {
        let g = GridSpec::unit(self.grid_bins);
        g.validate()?;
        Ok(g)
    }

    fn rate(&self) -> Result<GridSpec> {
        let d = GridSpec::default_rate();
        let g = GridSpec { bins: self.grid_bins, ..d };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Parser)]
#[command(name = "lgen", version, about = "Uncertain-threshold models of generic, habitual and causal language")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct PriorSource {
    /// Fixture name (see `lgen endorse --list-fixtures`).
    #[arg(long, conflicts_with = "prior_file")]
    pub fixture: Option<String>,
    /// JSON prior: `{phi, gamma, xi}` for prevalence, `{phi, mu, sigma}` for
    /// rates, or a `fit-prior` MAP file.
    #[arg(long)]
    pub prior_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the Beta-mixture prior of each property in an elicitation CSV.
    FitPrior {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fit only this property.
        #[arg(long)]
        property: Option<String>,
        /// Also fit a single Beta for comparison.
        #[arg(long)]
        single_beta: bool,
    },
    /// Endorsement probability of the generalization.
    Endorse {
        #[command(flatten)]
        prior: PriorSource,
        /// Referent prevalence (or rate, events/year, for rate priors).
        #[arg(long)]
        referent: Option<f64>,
        /// Referent belief as a Beta `gamma,xi` (expectation speaker).
        #[arg(long, value_delimiter = ',')]
        referent_beta: Option<Vec<f64>>,
        /// Fixed-model threshold.
        #[arg(long, default_value_t = 0.3)]
        theta_star: f64,
        /// Fixed-model guessing rate.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Write the listener's interpretation table here.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        list_fixtures: bool,
    },
    /// Listener interpretation of an utterance.
    Interpret {
        #[command(flatten)]
        prior: PriorSource,
        /// gen, silence, some, most or quant:<threshold>.
        #[arg(long, default_value = "gen")]
        utterance: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Joint fit of priors, referents and endorsements.
    FitJoint {
        /// Percent-elicitation CSV (generic and causal data).
        #[arg(long, required_unless_present = "q1")]
        prior: Option<PathBuf>,
        /// Habitual Q1 CSV.
        #[arg(long, requires = "q2", conflicts_with = "prior")]
        q1: Option<PathBuf>,
        /// Habitual Q2 CSV.
        #[arg(long, requires = "q1")]
        q2: Option<PathBuf>,
        /// Separate referent-prevalence elicitation CSV; by default referent
        /// responses are read from --prior.
        #[arg(long, conflicts_with = "q1")]
        referents: Option<PathBuf>,
        #[arg(long)]
        endorsements: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also fit each block alone and compare MAP estimates.
        #[arg(long)]
        distortion: bool,
    },
    /// Reproduce the model comparisons and fixture checks.
    Replicate {
        #[arg(value_enum)]
        case: ReplicateCase,
        /// Published data root; defaults to $LGEN_DATA_DIR.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cue validities from a category world or free-production responses.
    CueValidity {
        /// CSV `category,prior_prob,<feature>...`.
        #[arg(long, conflicts_with = "free_production", required_unless_present = "free_production")]
        world: Option<PathBuf>,
        /// CSV `feature,response`.
        #[arg(long)]
        free_production: Option<PathBuf>,
        /// Report only this category.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic data from a model.
    Simulate {
        #[arg(value_enum)]
        kind: SimulateKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 10.0)]
        xi: f64,
        /// Number of prior responses.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        theta_star: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReplicateCase {
    WorkedExamples,
    Generics,
    Habituals,
    Causals,
    Conjunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateKind {
    /// Elicitation CSV drawn from one Beta-mixture prior.
    Prior,
    /// Directory with prior.csv, referents.csv, endorsements.csv and truth.json.
    Joint,
}

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Input(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn write_with<F: FnOnce(&mut Vec<u8>) -> Result<()>>(path: &Path, f: F) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Input(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Input(format!("no such file: {}", path.display())))
    }
}

/// File-name-safe form of a property name.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    let s = s.trim_matches('_').to_string();
    if s.is_empty() {
        "property".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PriorJson {
    #[serde(default)]
    phi: Option<f64>,
    gamma: Option<f64>,
    xi: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
}

/// A prior resolved from the command line.
#[derive(Debug, Clone)]
pub struct ResolvedPrior {
    pub name: String,
    pub grid: GridDistribution,
}

fn resolve_prior(src: &PriorSource, g: &GlobalOpts) -> Result<ResolvedPrior> {
    if let Some(name) = &src.fixture {
        let grid = FixtureLibrary.grid(name, &g.unit()?, &g.rate()?)?;
        return Ok(ResolvedPrior { name: name.clone(), grid });
    }
    let path = src
        .prior_file
        .as_ref()
        .ok_or_else(|| Error::Input("give --fixture or --prior-file".into()))?;
    require_file(path)?;
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let body = value.get("map").cloned().unwrap_or(value);
    let p: PriorJson =
        serde_json::from_value(body).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let phi = p.phi.unwrap_or(1.0);
    let grid = match (p.gamma, p.xi, p.mu, p.sigma) {
        (Some(gamma), Some(xi), _, _) => BetaMixturePrior::new(phi, BetaParams::new(gamma, xi)?)?.discretize(&g.unit()?)?,
        (_, _, Some(mu), Some(sigma)) => RateMixturePrior::new(phi, mu, sigma)?.discretize(&g.rate()?)?,
        _ => return Err(Error::Input(format!("{}: need gamma and xi, or mu and sigma", path.display()))),
    };
    Ok(ResolvedPrior { name: path.display().to_string(), grid })
}

fn interpretation_table(prior: &GridDistribution, posterior: &GridDistribution) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["p", "prior", "posterior"]).map_err(csv_error)?;
        for ((p, a), b) in prior.support().iter().zip(prior.mass()).zip(posterior.mass()) {
            w.write_record([p.to_string(), a.to_string(), b.to_string()]).map_err(csv_error)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::FitPrior { input, out: dir, property, single_beta } => fit_prior(g, input, dir, property.as_deref(), *single_beta, out),
        Command::Endorse { prior, referent, referent_beta, theta_star, noise, table, list_fixtures } => {
            if *list_fixtures {
                for name in FixtureLibrary.names() {
                    writeln!(out, "{name}")?;
                }
                return Ok(());
            }
            cmd_endorse(g, prior, *referent, referent_beta.as_deref(), *theta_star, *noise, table.as_deref(), out)
        }
        Command::Interpret { prior, utterance, out: path } => cmd_interpret(g, prior, utterance, path.as_deref(), out),
        Command::FitJoint { prior, q1, q2, referents, endorsements, out: dir, distortion } => {
            let inputs = JointInputs {
                prior: prior.as_deref(),
                habitual: q1.as_deref().zip(q2.as_deref()),
                referents: referents.as_deref(),
                endorsements,
            };
            cmd_fit_joint(g, &inputs, dir, *distortion, out)
        }
        Command::Replicate { case, data_dir, out: dir } => cmd_replicate(g, *case, data_dir.as_deref(), dir.as_deref(), out),
        Command::CueValidity { world, free_production, target, out: path } => {
            cmd_cue_validity(world.as_deref(), free_production.as_deref(), target.as_deref(), path.as_deref(), out)
        }
        Command::Simulate { kind, out: path, phi, gamma, xi, n, theta_star, noise } => {
            cmd_simulate(g, *kind, path, *phi, *gamma, *xi, *n, *theta_star, *noise, out)
        }
    }
}

fn fit_prior(g: &GlobalOpts, input: &Path, dir: &Path, only: Option<&str>, single: bool, out: &mut dyn Write) -> Result<()> {
    require_file(input)?;
    let table = ElicitationTable::from_path(input)?;
    let cfg = g.mcmc()?;
    let properties: Vec<String> = match only {
        Some(p) => {
            if !table.properties().iter().any(|q| q == p) {
                return Err(Error::Input(format!("property '{p}' not found in {}", input.display())));
            }
            vec![p.to_string()]
        }
        None => table.properties(),
    };
    if properties.is_empty() {
        return Err(Error::Input(format!("{} has no responses", input.display())));
    }
    ensure_dir(dir)?;
    for property in properties {
        let responses = table.responses_for_property(&property);
        let stem = slug(&property);
        let data: Vec<f64> = responses.iter().map(|r| clamp_percent(*r)).collect();
        let mut fits: Vec<(&str, PosteriorSamples)> = vec![("mixture", fit_beta_mixture(&responses, &cfg)?)];
        if single {
            fits.push(("single", fit_single_beta(&responses, &cfg)?));
        }
        let at: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let mut cdf_columns = vec![("data".to_string(), empirical_cdf(&data, &at))];
        let mut report = BTreeMap::new();
        for (label, samples) in &fits {
            let suffix = if *label == "mixture" { String::new() } else { format!(".{label}") };
            write_with(&dir.join(format!("{stem}{suffix}.samples.csv")), |b| samples.write_csv(b))?;
            let summary = summarize(samples)?;
            let map: BTreeMap<String, f64> = summary.iter().map(|(k, v)| (k.clone(), v.map)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            rng.set_stream(1);
            let ppc = posterior_predictive(samples, 10_000, None, &mut rng)?;
            let ks = ks_distance(&ppc, &data)?;
            cdf_columns.push((format!("predictive_{label}"), empirical_cdf(&ppc, &at)));
            let doc = json!({
                "property": property,
                "model": label,
                "responses": responses.len(),
                "map": map,
                "hpd95": summary.iter().map(|(k, v)| (k.clone(), [v.lo, v.hi])).collect::<BTreeMap<_, _>>(),
                "ks_predictive_vs_data": ks,
                "diagnostics": samples.diagnostics(),
            });
            write_json(&dir.join(format!("{stem}{suffix}.map.json")), &doc)?;
            report.insert(label.to_string(), (map, ks));
        }
        write_with(&dir.join(format!("{stem}.ppc.csv")), |b| {
            let mut w = csv::Writer::from_writer(b);
            let mut header = vec!["x".to_string()];
            header.extend(cdf_columns.iter().map(|c| c.0.clone()));
            w.write_record(&header).map_err(csv_error)?;
            for (i, x) in at.iter().enumerate() {
                let mut row = vec![x.to_string()];
                row.extend(cdf_columns.iter().map(|c| c.1[i].to_string()));
                w.write_record(&row).map_err(csv_error)?;
            }
            w.flush()?;
            Ok(())
        })?;
        for (label, (map, ks)) in report {
            let params: Vec<String> = map.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
            writeln!(out, "{property}\t{label}\t{}\tKS={ks:.4}", params.join(" "))?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_endorse(
    g: &GlobalOpts,
    src: &PriorSource,
    referent: Option<f64>,
    referent_beta: Option<&[f64]>,
    theta_star: f64,
    noise: f64,
    table: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let prior = resolve_prior(src, g)?;
    let cfg = g.speaker()?;
    let theta = threshold_prior_for(&match prior.grid.scale() {
        Scale::Unit => g.unit()?,
        Scale::Rate => g.rate()?,
    })?;
    let model: ModelKind = g.model.into();
    let s = match (cfg.variant, referent, referent_beta) {
        (SpeakerVariant::Point, Some(p), _) => {
            check_referent(&prior.grid, p)?;
            match model {
                ModelKind::Uncertain => endorse(p, &prior.grid, &theta, &cfg)?,
                ModelKind::Fixed => endorse_fixed(p, &prior.grid, &FixedThresholdParams::new(theta_star, noise)?, &cfg)?,
            }
        }
        (SpeakerVariant::Expectation, _, Some(b)) => {
            if b.len() != 2 {
                return Err(Error::Input("--referent-beta takes gamma,xi".into()));
            }
            if model == ModelKind::Fixed {
                return Err(Error::Input("the fixed model takes a point referent".into()));
            }
            if prior.grid.scale() != Scale::Unit {
                return Err(Error::Input("--referent-beta needs a prevalence prior".into()));
            }
            let r = BetaParams::new(b[0], b[1])?.discretize(&g.unit()?)?;
            endorse_expectation(&r, &prior.grid, &theta, &cfg)?
        }
        (SpeakerVariant::Point, None, _) => return Err(Error::Input("the point speaker needs --referent".into())),
        (SpeakerVariant::Expectation, _, None) => {
            return Err(Error::Input("the expectation speaker needs --referent-beta gamma,xi".into()))
        }
    };
    if let Some(path) = table {
        let post = interpret(&Utterance::Generalization, &prior.grid, &theta)?;
        write_atomic(path, &interpretation_table(&prior.grid, &post)?)?;
    }
    let doc = json!({
        "prior": prior.name,
        "referent": referent,
        "referent_beta": referent_beta,
        "lambda": cfg.lambda,
        "model": match model { ModelKind::Uncertain => "uncertain", ModelKind::Fixed => "fixed" },
        "endorsement": s,
    });
    writeln!(out, "{}", serde_json::to_string(&doc).map_err(|e| Error::Input(e.to_string()))?)?;
    Ok(())
}

fn check_referent(prior: &GridDistribution, p: f64) -> Result<()> {
    let ok = match prior.scale() {
        Scale::Unit => (0.0..=1.0).contains(&p),
        Scale::Rate => p.is_finite() && p >= 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Input(format!("referent {p} is outside the prior's scale")))
    }
}

fn cmd_interpret(g: &GlobalOpts, src: &PriorSource, utterance: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let prior = resolve_prior(src, g)?;
    let u: Utterance = utterance.parse()?;
    let theta = threshold_prior_for(&match prior.grid.scale() {
        Scale::Unit => g.unit()?,
        Scale::Rate => g.rate()?,
    })?;
    let post = interpret(&u, &prior.grid, &theta)?;
    let table = interpretation_table(&prior.grid, &post)?;
    match path {
        Some(p) => write_atomic(p, &table)?,
        None => out.write_all(&table)?,
    }
    let doc = json!({ "prior": prior.name, "utterance": u.to_string(), "prior_mean": prior.grid.mean(), "posterior_mean": post.mean() });
    writeln!(out, "{}", serde_json::to_string(&doc).map_err(|e| Error::Input(e.to_string()))?)?;
    Ok(())
}

struct JointInputs<'a> {
    prior: Option<&'a Path>,
    habitual: Option<(&'a Path, &'a Path)>,
    referents: Option<&'a Path>,
    endorsements: &'a Path,
}

fn cmd_fit_joint(g: &GlobalOpts, inputs: &JointInputs, dir: &Path, distortion: bool, out: &mut dyn Write) -> Result<()> {
    require_file(inputs.endorsements)?;
    let table = EndorsementTable::from_path(inputs.endorsements)?;
    let data = match (inputs.prior, inputs.habitual) {
        (Some(p), _) => {
            require_file(p)?;
            let referents = match inputs.referents {
                Some(r) => {
                    require_file(r)?;
                    Some(ElicitationTable::from_path(r)?)
                }
                None => None,
            };
            joint_data_from_elicitation(&ElicitationTable::from_path(p)?, referents.as_ref(), &table)?
        }
        (None, Some((q1, q2))) => {
            require_file(q1)?;
            require_file(q2)?;
            joint_data_from_habitual(&HabitualElicitationTable::from_paths(q1, q2)?, &table)?
        }
        (None, None) => return Err(Error::Input("give --prior or --q1/--q2".into())),
    };
    let cfg = g.mcmc()?;
    ensure_dir(dir)?;
    let (model, samples) = fit_joint(&data, g.model.into(), g.grid_bins, &cfg)?;
    write_with(&dir.join("samples.csv"), |b| samples.write_csv(b))?;
    let summary = summarize(&samples)?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("diagnostics.json"), &samples.diagnostics())?;
    let preds = predict_items(&model, &data, &samples, 2_000)?;
    let rows: Vec<PredictionRow> = preds
        .iter()
        .map(|p| PredictionRow { item: p.id.clone(), human: p.human, model: p.mean, lo: p.lo, hi: p.hi })
        .collect();
    write_with(&dir.join("predictions.csv"), |b| write_prediction_table(&rows, b))?;
    for name in ["lambda", "theta_star", "theta_star_log_rate", "noise"] {
        if let Some(s) = summary.get(name) {
            writeln!(out, "{name}\tMAP={:.4}\t95% HPD=[{:.4}, {:.4}]", s.map, s.lo, s.hi)?;
        }
    }
    if rows.len() >= 2 {
        let m: Vec<f64> = rows.iter().map(|r| r.model).collect();
        let h: Vec<f64> = rows.iter().map(|r| r.human).collect();
        match r2_and_mse(&m, &h) {
            Ok((r2, mse)) => writeln!(out, "items={}\tr2={r2:.4}\tMSE={mse:.6}", rows.len())?,
            Err(e) => writeln!(out, "items={}\tr2 undefined: {e}", rows.len())?,
        }
    }
    if distortion {
        let isolated = fit_isolated(&data, g.grid_bins, &cfg)?;
        let joint = map_estimates(&samples)?;
        let report = distortion_check(&isolated, &joint)?;
        write_json(&dir.join("distortion.json"), &report)?;
        writeln!(out, "distortion r2={:.4}\tmax |dev|={:.4}", report.r2, report.max_abs_deviation)?;
    }
    Ok(())
}

fn print_scores(out: &mut dyn Write, scores: &[replicate::ModelScore]) -> Result<()> {
    writeln!(out, "{:<40}{:>10}{:>12}  parameters", "model", "r2", "MSE")?;
    for s in scores {
        let params: Vec<String> = s.parameters.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
        writeln!(out, "{:<40}{:>10.4}{:>12.6}  {}", s.model, s.r2, s.mse, params.join(" "))?;
    }
    Ok(())
}

fn print_fixture_report(out: &mut dyn Write, r: &replicate::FixtureReport) -> Result<()> {
    for e in &r.endorsements {
        writeln!(out, "{:<36}referent={:<8}endorsement={:.4}", e.prior, e.referent, e.endorsement)?;
    }
    for c in &r.checks {
        writeln!(out, "{} {}", if c.pass { "PASS" } else { "FAIL" }, c.description)?;
    }
    Ok(())
}

fn cmd_replicate(g: &GlobalOpts, case: ReplicateCase, data_dir: Option<&Path>, dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    if let Some(d) = dir {
        ensure_dir(d)?;
    }
    let unit = g.unit()?;
    match case {
        ReplicateCase::WorkedExamples => {
            let rows = replicate::worked_examples(&unit, g.lambda)?;
            for r in &rows {
                writeln!(
                    out,
                    "{} row {}: {:<28} prior={:<20} referent={:<5} endorsement={:.4} target {}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.row,
                    r.sentence,
                    r.prior,
                    r.referent,
                    r.endorsement,
                    r.target
                )?;
            }
            if let Some(d) = dir {
                write_json(&d.join("worked_examples.json"), &rows)?;
            }
        }
        ReplicateCase::Conjunction => {
            let r = replicate::conjunction(&GridSpec::unit(g.grid_bins.min(50)))?;
            writeln!(
                out,
                "E[p_A] prior={:.4} partial={:.4} full={:.4} non-monotone={}",
                r.prior_mean, r.partial_mean, r.full_mean, r.non_monotone
            )?;
            if let Some(d) = dir {
                write_json(&d.join("conjunction.json"), &r)?;
            }
        }
        ReplicateCase::Generics | ReplicateCase::Habituals | ReplicateCase::Causals => {
            let name = match case {
                ReplicateCase::Generics => "generics",
                ReplicateCase::Habituals => "habituals",
                _ => "causals",
            };
            let root = data_dir.map(Path::to_path_buf).or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from));
            let published = match &root {
                Some(r) => replicate::published(name, &DatasetLayout::new(r), g.grid_bins, &g.mcmc()?)?,
                None => None,
            };
            if let Some(report) = published {
                writeln!(out, "published {name} data: {} items", report.items)?;
                print_scores(out, &report.scores)?;
                if let Some(d) = dir {
                    write_json(&d.join(format!("{name}.json")), &report)?;
                    write_with(&d.join(format!("{name}_predictions.csv")), |b| write_prediction_table(&report.predictions, b))?;
                }
                return Ok(());
            }
            let layout = root.map(DatasetLayout::new);
            writeln!(out, "{}", replicate::missing_data_banner(name, layout.as_ref()))?;
            match case {
                ReplicateCase::Causals => {
                    let r = replicate::causal_fixtures(&unit, g.lambda)?;
                    print_fixture_report(out, &r)?;
                    if let Some(d) = dir {
                        write_json(&d.join("causals_fixtures.json"), &r)?;
                    }
                }
                ReplicateCase::Habituals => {
                    let r = replicate::habitual_fixtures(&g.rate()?, g.lambda)?;
                    print_fixture_report(out, &r)?;
                    if let Some(d) = dir {
                        write_json(&d.join("habituals_fixtures.json"), &r)?;
                    }
                }
                _ => {}
            }
            let r = replicate::model_comparison(&unit, g.lambda, 100, g.seed)?;
            writeln!(out, "synthetic comparison: {} items generated by the uncertain model, lambda={}", r.items, r.generating_lambda)?;
            print_scores(out, &r.scores)?;
            if let Some(d) = dir {
                write_json(&d.join(format!("{name}_synthetic.json")), &r)?;
                write_with(&d.join(format!("{name}_synthetic_predictions.csv")), |b| write_prediction_table(&r.predictions, b))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct FreeProductionRow {
    feature: String,
    response: String,
}

fn cmd_cue_validity(
    world: Option<&Path>,
    free: Option<&Path>,
    target: Option<&str>,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut rows: Vec<(String, String, Option<f64>, Option<f64>)> = Vec::new();
    if let Some(w) = world {
        require_file(w)?;
        let world = CategoryWorld::from_path(w)?;
        for (f, k, cv, z) in cue_validity_table(&world) {
            rows.push((f, k, cv, Some(z)));
        }
    } else if let Some(p) = free {
        require_file(p)?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(p).map_err(csv_error)?;
        let mut by_feature: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for rec in rdr.deserialize::<FreeProductionRow>() {
            let r = rec.map_err(csv_error)?;
            by_feature.entry(r.feature).or_default().push(r.response);
        }
        let norm = LabelNormalizer::default();
        for (feature, responses) in by_feature {
            let mut labels: Vec<String> = responses.iter().map(|r| norm.normalize(r)).collect();
            labels.sort();
            labels.dedup();
            for label in labels {
                let cv = free_production_cue_validity(&responses, &label, &norm)?;
                rows.push((feature.clone(), label, Some(cv), None));
            }
        }
    }
    if let Some(t) = target {
        let t = LabelNormalizer::default().normalize(t);
        rows.retain(|r| LabelNormalizer::default().normalize(&r.1) == t);
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["feature", "category", "cue_validity", "z", "flag"]).map_err(csv_error)?;
        for (f, k, cv, z) in &rows {
            w.write_record([
                f.clone(),
                k.clone(),
                cv.map_or(String::new(), |v| v.to_string()),
                z.map_or(String::new(), |v| v.to_string()),
                if cv.is_none() { "undefined: feature absent from every category".into() } else { String::new() },
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
    }
    match path {
        Some(p) => write_atomic(p, &buf)?,
        None => out.write_all(&buf)?,
    }
    Ok(())
}

/// Split a joint dataset into a prior table, where each response stands for
/// its own category, and a referent table keyed by item category.
pub fn joint_to_elicitation(data: &JointData) -> Result<(ElicitationTable, ElicitationTable)> {
    let row = |pid: String, property: &str, category: String, pct: f64| ElicitationRow {
        participant_id: pid,
        property: property.to_string(),
        category,
        category_source: Default::default(),
        response_pct: pct,
    };
    let mut prior = Vec::new();
    for block in &data.properties {
        let PriorData::Mixture(responses) = &block.prior else {
            return Err(Error::Input("only percent priors can be written as an elicitation table".into()));
        };
        for (j, r) in responses.iter().enumerate() {
            prior.push(row(format!("s{j}"), &block.name, format!("c{j}"), *r));
        }
    }
    let mut referents = Vec::new();
    for block in &data.referents {
        for (j, r) in block.responses_pct.iter().enumerate() {
            referents.push(row(format!("r{j}"), &block.property, block.category.clone(), *r));
        }
    }
    Ok((ElicitationTable { rows: prior }, ElicitationTable { rows: referents }))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    g: &GlobalOpts,
    kind: SimulateKind,
    path: &Path,
    phi: f64,
    gamma: f64,
    xi: f64,
    n: usize,
    theta_star: f64,
    noise: f64,
    out: &mut dyn Write,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    match kind {
        SimulateKind::Prior => {
            let prior = BetaMixturePrior::new(phi, BetaParams::new(gamma, xi)?)?;
            let rows = prior_responses(&prior, n, &mut rng)
                .into_iter()
                .enumerate()
                .map(|(j, r)| ElicitationRow {
                    participant_id: format!("s{j}"),
                    property: "synthetic".into(),
                    category: format!("c{j}"),
                    category_source: Default::default(),
                    response_pct: r,
                })
                .collect();
            write_with(path, |b| ElicitationTable { rows }.write_csv(b))?;
            writeln!(out, "wrote {n} responses to {}", path.display())?;
        }
        SimulateKind::Joint => {
            let mut spec = SyntheticJointSpec::five_items(g.lambda)?;
            spec.model = g.model.into();
            spec.bins = g.grid_bins;
            if spec.model == ModelKind::Fixed {
                spec.fixed = Some(FixedThresholdParams::new(theta_star, noise)?);
            }
            let data = simulate_joint(&spec, &mut rng)?;
            ensure_dir(path)?;
            let (prior, referents) = joint_to_elicitation(&data)?;
            write_with(&path.join("prior.csv"), |b| prior.write_csv(b))?;
            write_with(&path.join("referents.csv"), |b| referents.write_csv(b))?;
            write_with(&path.join("endorsements.csv"), |b| {
                let mut w = csv::Writer::from_writer(b);
                w.write_record(["item", "property", "category", "referent", "n_agree", "n_total"]).map_err(csv_error)?;
                for (it, prop) in data.items.iter().zip(&spec.properties) {
                    w.write_record([
                        it.id.clone(),
                        it.property.clone(),
                        prop.category.clone(),
                        String::new(),
                        it.n_agree.to_string(),
                        it.n_total.to_string(),
                    ])
                    .map_err(csv_error)?;
                }
                w.flush()?;
                Ok(())
            })?;
            write_json(&path.join("truth.json"), &spec)?;
            writeln!(out, "wrote {} items to {}", data.items.len(), path.display())?;
        }
    }
    Ok(())
}
