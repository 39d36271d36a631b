use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use povm_core::io::{
    from_json, to_json, DensityDoc, HistogramDoc, MapDoc, MixtureDoc, PovmDoc, StateDoc,
    VerdictDoc, VerificationDoc,
};
use povm_core::outcomes::{
    gen_covariant_sphere, gen_ea_family, gen_pvm, gen_random_povm, gen_sic_qubit, gen_standard_pvm,
    gen_trine, random_unitary,
};
use povm_core::{
    apply_postprocessing, decompose_extremal, is_extreme, sample_direct, sample_two_stage,
    trace_density, validate_povm, verify_barycenter, Config, Mixture, Povm, Strategy,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CONFIG_ENV: &str = "POVM_CONFIG";
const DEFAULT_CONFIG: &str = "povm.toml";
const VERIFY_TOL: f64 = 1e-8;

const EXIT_NON_EXTREME: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "povm",
    version,
    about = "Extremality and extremal decomposition of finite-outcome POVMs"
)]
struct Cli {
    /// TOML configuration file [default: $POVM_CONFIG, else ./povm.toml if present]
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a POVM
    Gen(GenArgs),
    /// Check positivity, normalisation and label distinctness (exit 2 if invalid)
    Validate(InputArgs),
    /// Decide extremality (exit 0 extreme, 2 not extreme)
    ExtremalCheck(InputArgs),
    /// Decompose into extreme POVMs (exit 3 if the leaf budget ran out)
    Decompose(DecomposeArgs),
    /// Trace measure and unit-trace densities
    Density(InputArgs),
    /// Relabel outcomes through a classical map
    Postprocess(PostprocessArgs),
    /// Sample outcomes on a state
    Sample(SampleArgs),
    /// Check that a mixture has the given POVM as barycenter (exit 2 on failure)
    VerifyBarycenter(VerifyArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input document ('-' or omitted for stdin)
    input: Option<PathBuf>,
    /// Output path ('-' for stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Pvm,
    Sic,
    Trine,
    Ea,
    Random,
    CovariantSphere,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Angle of the E_a family
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Hilbert space dimension (pvm, random)
    #[arg(long)]
    d: Option<usize>,
    /// Number of outcomes (random)
    #[arg(long)]
    k: Option<usize>,
    /// Rank cap of each effect (random) [default: d]
    #[arg(long)]
    rank: Option<usize>,
    /// Number of directions (covariant-sphere)
    #[arg(long)]
    n: Option<usize>,
    /// Seed; for pvm it selects a Haar-random basis instead of the standard one
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Peel,
    Tree,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    io: InputArgs,
    #[arg(long)]
    max_leaves: Option<usize>,
    /// Merge numerically identical leaves
    #[arg(long)]
    merge: bool,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Do not embed the input POVM in the mixture document
    #[arg(long)]
    no_source: bool,
}

#[derive(Args)]
struct PostprocessArgs {
    #[command(flatten)]
    io: InputArgs,
    /// JSON document `{"targets": [label, ...]}`, one target per outcome
    #[arg(long)]
    map: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleMode {
    Direct,
    TwoStage,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(value_enum)]
    mode: SampleMode,
    /// POVM (direct) or mixture (two-stage) document
    input: Option<PathBuf>,
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// POVM and mixture documents; with a single input (or stdin) the
    /// mixture must embed its source POVM
    #[arg(num_args = 0..=2)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct ValidationDoc {
    valid: bool,
    normalization_residual: f64,
    min_eigenvalue: f64,
    violations: Vec<String>,
}

fn is_stdio(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p.as_os_str() == "-")
}

fn read_input(path: Option<&Path>) -> Result<String> {
    if is_stdio(path) {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .context("reading stdin")?;
        Ok(s)
    } else {
        let p = path.unwrap();
        fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    if is_stdio(path) {
        let mut out = io::stdout().lock();
        writeln!(out, "{text}")?;
        out.flush()?;
        Ok(())
    } else {
        let p = path.unwrap();
        fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))
    }
}

fn parse<D: serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<D> {
    let text = read_input(path)?;
    let name = path
        .filter(|_| !is_stdio(path))
        .map_or("<stdin>".into(), |p| p.display().to_string());
    from_json(&text).with_context(|| format!("parsing {name}"))
}

fn read_povm(path: Option<&Path>) -> Result<Povm> {
    Ok(parse::<PovmDoc>(path)?.to_povm()?)
}

fn load_config(explicit: Option<&Path>) -> Result<Config> {
    let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    let (path, required) = match (explicit, env) {
        (Some(p), _) => (p.to_path_buf(), true),
        (None, Some(p)) => (p, true),
        (None, None) => (PathBuf::from(DEFAULT_CONFIG), false),
    };
    if !required && !path.exists() {
        return Ok(Config::default());
    }
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg: Config =
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn gen(args: &GenArgs, cfg: &Config) -> Result<Povm> {
    let need = |v: Option<usize>, flag: &str| {
        v.ok_or_else(|| anyhow!("--{flag} is required for this kind"))
    };
    Ok(match args.kind {
        Kind::Pvm => {
            let d = need(args.d, "d")?;
            match args.seed {
                Some(seed) => gen_pvm(&random_unitary(d, &mut ChaCha8Rng::seed_from_u64(seed)))?,
                None => gen_standard_pvm(d),
            }
        }
        Kind::Sic => gen_sic_qubit(),
        Kind::Trine => gen_trine(),
        Kind::Ea => gen_ea_family(
            args.a
                .ok_or_else(|| anyhow!("--a is required for kind ea"))?,
        ),
        Kind::Random => {
            let d = need(args.d, "d")?;
            let k = need(args.k, "k")?;
            gen_random_povm(d, k, args.rank.unwrap_or(d), args.seed.unwrap_or(cfg.seed))?
        }
        Kind::CovariantSphere => {
            gen_covariant_sphere(need(args.n, "n")?, args.seed.unwrap_or(cfg.seed))?
        }
    })
}

fn verify_inputs(args: &VerifyArgs) -> Result<(Povm, Mixture)> {
    let mixture_with_source = |path: Option<&Path>| -> Result<(Povm, Mixture)> {
        let doc: MixtureDoc = parse(path)?;
        let source = doc.source_povm()?.ok_or_else(|| {
            anyhow!("mixture has no embedded source; pass the POVM document as well")
        })?;
        Ok((source, doc.to_mixture()?))
    };
    match args.inputs.as_slice() {
        [] => mixture_with_source(None),
        [mix] => mixture_with_source(Some(mix)),
        [povm, mix] => {
            if is_stdio(Some(povm)) && is_stdio(Some(mix)) {
                bail!("at most one input can be read from stdin");
            }
            Ok((
                read_povm(Some(povm))?,
                parse::<MixtureDoc>(Some(mix))?.to_mixture()?,
            ))
        }
        _ => unreachable!("clap limits the number of inputs"),
    }
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(args) => {
            let p = gen(&args, &cfg)?;
            write_output(args.output.as_deref(), &to_json(&PovmDoc::from_povm(&p)))?;
            Ok(0)
        }
        Command::Validate(args) => {
            let p = read_povm(args.input.as_deref())?;
            let report = validate_povm(&p, &cfg);
            let doc = ValidationDoc {
                valid: report.is_valid(),
                normalization_residual: report.normalization_residual,
                min_eigenvalue: report.min_eigenvalue,
                violations: report.violations.iter().map(ToString::to_string).collect(),
            };
            write_output(args.output.as_deref(), &to_json(&doc))?;
            if !report.is_valid() {
                eprintln!("invalid POVM: {report}");
                return Ok(EXIT_NON_EXTREME);
            }
            Ok(0)
        }
        Command::ExtremalCheck(args) => {
            let p = read_povm(args.input.as_deref())?;
            let v = is_extreme(&p, &cfg)?;
            write_output(
                args.output.as_deref(),
                &to_json(&VerdictDoc::from_verdict(&v)),
            )?;
            Ok(if v.is_extreme { 0 } else { EXIT_NON_EXTREME })
        }
        Command::Decompose(args) => {
            if let Some(n) = args.max_leaves {
                cfg.max_leaves = n;
            }
            cfg.merge_leaves |= args.merge;
            match args.strategy {
                Some(StrategyArg::Peel) => cfg.strategy = Strategy::Peel,
                Some(StrategyArg::Tree) => cfg.strategy = Strategy::Tree,
                None => {}
            }
            let p = read_povm(args.io.input.as_deref())?;
            let mix = decompose_extremal(&p, &cfg)?;
            let source = (!args.no_source).then_some(&p);
            write_output(
                args.io.output.as_deref(),
                &to_json(&MixtureDoc::from_mixture(&mix, source)),
            )?;
            if !mix.complete {
                eprintln!(
                    "leaf budget of {} exhausted; the last component is not extreme",
                    cfg.max_leaves
                );
                return Ok(EXIT_INCOMPLETE);
            }
            Ok(0)
        }
        Command::Density(args) => {
            let p = read_povm(args.input.as_deref())?;
            p.ensure_valid(&cfg)?;
            write_output(
                args.output.as_deref(),
                &to_json(&DensityDoc::from_density(&trace_density(&p))),
            )?;
            Ok(0)
        }
        Command::Postprocess(args) => {
            let p = read_povm(args.io.input.as_deref())?;
            let phi = parse::<MapDoc>(Some(&args.map))?.to_postprocessing();
            if !phi.is_injective(cfg.label_tol()) {
                eprintln!("warning: map is not injective; extremality need not be preserved");
            }
            let q = apply_postprocessing(&p, &phi, &cfg)?;
            write_output(args.io.output.as_deref(), &to_json(&PovmDoc::from_povm(&q)))?;
            Ok(0)
        }
        Command::Sample(args) => {
            let state = parse::<StateDoc>(Some(&args.state))?.to_state()?;
            let seed = args.seed.unwrap_or(cfg.seed);
            let h = match args.mode {
                SampleMode::Direct => {
                    let p = read_povm(args.input.as_deref())?;
                    p.ensure_valid(&cfg)?;
                    sample_direct(&p, &state, args.n, seed)?
                }
                SampleMode::TwoStage => {
                    let mix = parse::<MixtureDoc>(args.input.as_deref())?.to_mixture()?;
                    sample_two_stage(&mix, &state, args.n, seed, &cfg)?
                }
            };
            write_output(
                args.output.as_deref(),
                &to_json(&HistogramDoc::from_histogram(&h)),
            )?;
            Ok(0)
        }
        Command::VerifyBarycenter(args) => {
            let (p, mix) = verify_inputs(&args)?;
            let report =
                verify_barycenter(&p, &mix, args.trials, args.seed.unwrap_or(cfg.seed), &cfg)?;
            let doc = VerificationDoc::from_report(&report, VERIFY_TOL);
            write_output(args.output.as_deref(), &to_json(&doc))?;
            Ok(if doc.passed { 0 } else { EXIT_NON_EXTREME })
        }
    }
}

fn main() -> ExitCode {
    // clap reports usage errors with status 2, which is reserved here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
