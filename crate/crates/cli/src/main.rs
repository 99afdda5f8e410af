use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pedrisk::oracle::brute_force_evidence_and_marginals;
use pedrisk::report::{heatmap_csv, posterior_csv, posterior_json, risk_csv, risk_json, round_sig};
use pedrisk::risk::{heatmap, risk_curve_from_pedigree, RiskError, RiskOptions, DEFAULT_DELTA_T, DEFAULT_T_MAX};
use pedrisk::{InferenceError, Model, Network, Pedigree};
use serde_json::json;

/// Carrier probabilities and age-specific disease risk from a family history.
#[derive(Parser)]
#[command(name = "pedrisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior genotype probabilities of every individual.
    Posterior {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Engine::Bp)]
        engine: Engine,
        #[command(flatten)]
        output: Output,
    },
    /// Cumulative risk curves, with and without competing death.
    Risk {
        #[command(flatten)]
        input: Input,
        /// Individual ids; repeat the flag or separate with commas.
        #[arg(long = "individual", value_delimiter = ',', required = true)]
        individuals: Vec<String>,
        /// Conditioning age; defaults to each individual's censoring age.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_T_MAX)]
        tmax: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA_T)]
        dt: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Junction-tree diagnostics: cliques, separators, width and cost.
    Tree {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
    },
    /// Risk at tmax without minus with competing death over a (pi, tau) grid.
    Heatmap {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        pi_step: f64,
        #[arg(long, default_value_t = 1.0)]
        tau_step: f64,
        #[arg(long, default_value_t = DEFAULT_T_MAX)]
        tmax: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA_T)]
        dt: f64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    pedigree: PathBuf,
    /// Model JSON; the built-in Claus-Easton model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Bp,
    Brute,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Invalid(String),
    Impossible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Impossible(_) => 3,
        }
    }
}

impl From<RiskError> for Failure {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Inference(InferenceError::Impossible(_)) => Failure::Impossible(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn load_pedigree(path: &Path) -> Result<Pedigree, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Pedigree::from_json_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_model(path: Option<&Path>) -> Result<Model, Failure> {
    match path {
        None => Ok(Model::claus_easton()),
        Some(p) => Model::from_path(p).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display()))),
    }
}

fn emit(output: &Output, text: String) -> Result<(), Failure> {
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn cmd_posterior(input: &Input, engine: Engine, output: &Output) -> Result<(), Failure> {
    let pedigree = load_pedigree(&input.pedigree)?;
    let model = load_model(input.model.as_deref())?;
    let result = match engine {
        Engine::Bp => Network::new(&pedigree, &model.genetics, &model.disease).posterior(),
        Engine::Brute => brute_force_evidence_and_marginals(&pedigree, &model.genetics, &model.disease)
            .map_err(|e| Failure::Invalid(e.to_string()))?,
    };
    if result.is_impossible() {
        return Err(Failure::Impossible(format!(
            "impossible family history: {}",
            result.explanation.unwrap_or_default()
        )));
    }
    let text = match output.format {
        Format::Json => pretty(&posterior_json(&result)),
        Format::Csv => posterior_csv(&result),
    };
    emit(output, text)
}

fn cmd_risk(input: &Input, individuals: &[String], tau: Option<f64>, tmax: f64, dt: f64, output: &Output) -> Result<(), Failure> {
    let pedigree = load_pedigree(&input.pedigree)?;
    let model = load_model(input.model.as_deref())?;
    let options = RiskOptions {
        tau,
        death: model.death.as_ref(),
        t_max: tmax,
        delta_t: dt,
    };
    let risks = individuals
        .iter()
        .map(|id| risk_curve_from_pedigree(&pedigree, id, &model.genetics, &model.disease, options))
        .collect::<Result<Vec<_>, _>>()?;
    let text = match output.format {
        Format::Json => pretty(&risk_json(&risks)),
        Format::Csv => risk_csv(&risks),
    };
    emit(output, text)
}

fn cmd_tree(input: &Input, output: &Output) -> Result<(), Failure> {
    let pedigree = load_pedigree(&input.pedigree)?;
    let model = load_model(input.model.as_deref())?;
    let summary = Network::new(&pedigree, &model.genetics, &model.disease).tree_summary();
    let text = match output.format {
        Format::Json => pretty(&json!(summary)),
        Format::Csv => {
            let mut s = String::from("clique,members,separator,to\n");
            for c in &summary.cliques {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    c.index,
                    c.members.join(" "),
                    c.separator.join(" "),
                    c.to.map(|t| t.to_string()).unwrap_or_default()
                ));
            }
            s
        }
    };
    emit(output, text)
}

fn steps(step: f64, upper: f64, inclusive: bool) -> Result<Vec<f64>, Failure> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Failure::Invalid(format!("grid step must be positive, got {step}")));
    }
    let n = (upper / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| k as f64 * step)
        .filter(|v| if inclusive { *v <= upper + 1e-9 } else { *v < upper - 1e-9 })
        .map(|v| v.min(upper))
        .collect())
}

fn cmd_heatmap(model: Option<&Path>, pi_step: f64, tau_step: f64, tmax: f64, dt: f64, output: &Output) -> Result<(), Failure> {
    let model = load_model(model)?;
    let death = model
        .death
        .as_ref()
        .ok_or_else(|| Failure::Invalid(format!("model {:?} has no death hazard", model.name)))?;
    let pis = steps(pi_step, 1.0, true)?;
    let taus = steps(tau_step, tmax, false)?;
    let cells = heatmap(&pis, &taus, &model.disease, death, tmax, dt)?;
    let text = match output.format {
        Format::Csv => heatmap_csv(&cells),
        Format::Json => {
            let rows: Vec<_> = cells
                .iter()
                .map(|c| {
                    json!({
                        "pi": round_sig(c.pi),
                        "tau": round_sig(c.tau),
                        "risk_no_competing": round_sig(c.risk_no_competing),
                        "risk_competing": round_sig(c.risk_competing),
                        "difference": round_sig(c.difference),
                    })
                })
                .collect();
            pretty(&json!(rows))
        }
    };
    emit(output, text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Posterior { input, engine, output } => cmd_posterior(input, *engine, output),
        Command::Risk { input, individuals, tau, tmax, dt, output } => cmd_risk(input, individuals, *tau, *tmax, *dt, output),
        Command::Tree { input, output } => cmd_tree(input, output),
        Command::Heatmap { model, pi_step, tau_step, tmax, dt, output } => {
            cmd_heatmap(model.as_deref(), *pi_step, *tau_step, *tmax, *dt, output)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Invalid(m) | Failure::Impossible(m) => m,
            };
            eprintln!("pedrisk: {msg}");
            ExitCode::from(f.code())
        }
    }
}
