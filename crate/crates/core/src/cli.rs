//! Command-line front end of the `maglab` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{load_words, parse_word_list, Config};
use crate::error::{MaglabError, Result};
use crate::experiments::{
    conformal_experiment, criteria_report, linearization_experiment, oneform_average_decay, xray_report, Context,
    LinearDirection, OrbitReport,
};
use crate::fields::{OneFormField, ScalarField};
use crate::geometry::Word;
use crate::orbit::{marked_spectrum, random_words, shortest_classes, solve_class};
use crate::report::{emit, Format, Metadata, Report, Tabular};
use crate::xray::PairSpec;

/// Classes used when neither `--words` nor the config lists any.
pub const DEFAULT_CLASS_COUNT: usize = 20;

#[derive(Parser, Debug)]
#[command(name = "maglab", version, about = "Closed magnetic geodesics, action spectra and X-ray transforms on a genus-2 surface")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration file (defaults are used when omitted).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads; defaults to $MAGLAB_JOBS, then to the number of CPUs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve and refine the closed orbit of one class.
    Orbit {
        #[arg(long)]
        word: String,
    },
    /// Marked action spectrum over a list of classes.
    Spectrum {
        /// Word list file: whitespace separated, `#` comments.
        #[arg(long)]
        words: Option<PathBuf>,
    },
    /// X-ray transform of a pair over a list of classes.
    Xray {
        /// JSON pair: `{"xi": …, "phi": …}` for a potential or `{"p": …, "q": …}`.
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        words: Option<PathBuf>,
    },
    /// crit_b margin, per-orbit crit_dp and the injectivity verdict.
    Criteria {
        #[arg(long)]
        words: Option<PathBuf>,
    },
    /// Headline experiments.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Experiment {
    /// Order of the Taylor remainder of the marked action.
    Linearization,
    /// Volume chains, orbit averages and the action gap of a conformal change.
    Conformal,
    /// Decay of 1-form averages along longer orbits.
    Averages,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.common.verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn jobs(common: &Common) -> Result<usize> {
    if let Some(n) = common.jobs {
        return Ok(n);
    }
    match std::env::var("MAGLAB_JOBS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| MaglabError::Input(format!("MAGLAB_JOBS must be a nonnegative integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs(&cli.common)?)
        .build()
        .map_err(|e| MaglabError::Resource(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn load_config(common: &Common) -> Result<Config> {
    match &common.config {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

/// `--words` file, then the config's list, then the shortest classes.
fn class_list(file: Option<&PathBuf>, listed: &[String], cfg: &Config, default_count: usize) -> Result<Vec<Word>> {
    if let Some(p) = file {
        return load_words(p);
    }
    if !listed.is_empty() {
        return parse_word_list(listed);
    }
    shortest_classes(&cfg.surface()?, default_count, 4)
}

fn write<T: Serialize + Tabular>(common: &Common, metadata: Metadata, result: T) -> Result<()> {
    let text = Report { metadata, result }.render(common.format)?;
    emit(&text, common.out.as_deref())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    let cfg = load_config(common)?;
    let surface = cfg.surface()?;
    let sys = cfg.system(&surface)?;
    let ctx = Context::from_config(&cfg)?;
    let meta = Metadata::new(&cfg, &sys.id);
    match &cli.command {
        Command::Orbit { word } => {
            let w: Word = word.parse()?;
            let orbit = solve_class(&sys, &w, &ctx.opts)?;
            if !orbit.refined {
                return Err(MaglabError::Refinement(format!(
                    "class {w}: shooting stopped at residual {:.3e}",
                    orbit.shooting_residual
                )));
            }
            write(common, meta, OrbitReport::new(&orbit))
        }
        Command::Spectrum { words } => {
            let words = class_list(words.as_ref(), &cfg.words, &cfg, DEFAULT_CLASS_COUNT)?;
            let spectrum = marked_spectrum(&sys, &words, &ctx.opts)?;
            write(common, meta, spectrum)
        }
        Command::Xray { pair, words } => {
            let text = std::fs::read_to_string(pair).map_err(|source| MaglabError::Io {
                path: pair.display().to_string(),
                source,
            })?;
            let spec: PairSpec = serde_json::from_str(&text).map_err(|source| MaglabError::Json {
                path: pair.display().to_string(),
                source,
            })?;
            let words = class_list(words.as_ref(), &cfg.words, &cfg, DEFAULT_CLASS_COUNT)?;
            write(common, meta, xray_report(&sys, &spec, &words, &ctx)?)
        }
        Command::Criteria { words } => {
            let words = class_list(words.as_ref(), &cfg.words, &cfg, 4)?;
            write(common, meta, criteria_report(&sys, &ctx.grid, &words, &ctx)?)
        }
        Command::Experiment { which } => match which {
            Experiment::Linearization => {
                let lin = &cfg.experiments.linearization;
                let direction = LinearDirection {
                    conformal: ScalarField::from_spec(&lin.conformal, &surface)?,
                    beta: OneFormField::from_spec(&lin.one_form, &surface)?,
                };
                let words = class_list(None, &lin.words, &cfg, lin.classes)?;
                let r = linearization_experiment(&sys, &direction, &lin.epsilons, &words, &ctx)?;
                write(common, meta, r)
            }
            Experiment::Conformal => {
                let c = &cfg.experiments.conformal;
                let f = ScalarField::from_spec(&c.f, &surface)?;
                let gap_words = shortest_classes(&surface, c.classes, 4)?;
                let avg_words = random_words(cfg.seed, &c.average_lengths);
                write(common, meta, conformal_experiment(&sys, &f, &gap_words, &avg_words, &ctx)?)
            }
            Experiment::Averages => {
                let a = &cfg.experiments.averages;
                let lengths: Vec<usize> = a
                    .lengths
                    .iter()
                    .flat_map(|&l| std::iter::repeat_n(l, a.per_length))
                    .collect();
                if lengths.contains(&0) {
                    return Err(MaglabError::Input("word lengths must be positive".into()));
                }
                let words = random_words(cfg.seed, &lengths);
                write(common, meta, oneform_average_decay(&sys, &words, &ctx)?)
            }
        },
    }
}
