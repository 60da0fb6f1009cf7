//! `diffdesc` command-line tool.
//!
//! Exit codes: 0 success, 1 identity verification failure, 2 usage,
//! validation or input error.

mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use diffdesc::descriptors::{self, DescriptorKind};
use diffdesc::field::{load_pgm, ScalarField};
use diffdesc::homotopy::{
    continuation_minimize, landscape, ContinuationOptions, DiffusionSchedule, ToyProblem,
    Trajectory,
};
use diffdesc::matching::{match_templates, Candidate, CandidateSet, Score};
use diffdesc_verify::identities;

use config::Config;

/// Candidates as a bare list or as `{"entries": [...]}`.
#[derive(serde::Deserialize)]
#[serde(untagged)]
enum CandidatesFile {
    List(Vec<Candidate>),
    Set(CandidateSet),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verify(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Verify(m) => f.write_str(m),
        }
    }
}

impl From<diffdesc::Error> for CliError {
    fn from(e: diffdesc::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "diffdesc",
    version,
    about = "Diffusion-based local descriptors, matching and continuation"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Correlation,
    Distance,
}

impl From<ScoreArg> for Score {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Correlation => Score::Correlation,
            ScoreArg::Distance => Score::Distance,
        }
    }
}

fn parse_kind(s: &str) -> Result<DescriptorKind, String> {
    s.parse::<DescriptorKind>().map_err(|_| {
        let names: Vec<&str> = DescriptorKind::ALL.iter().map(|k| k.name()).collect();
        format!(
            "unknown descriptor kind '{s}', expected one of: {}",
            names.join(", ")
        )
    })
}

fn parse_schedule(s: &str) -> Result<DiffusionSchedule, String> {
    DiffusionSchedule::parse(s).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Compute a descriptor of a PGM image.
    Descriptor {
        #[arg(long, value_parser = parse_kind)]
        kind: DescriptorKind,
        /// Input PGM (P2 or P5).
        input: PathBuf,
        /// Output payload; the header goes to `<output>.json`.
        output: PathBuf,
    },
    /// Rank candidate transforms and templates for an image.
    Match {
        #[arg(long, value_parser = parse_kind, default_value = "heat")]
        kind: DescriptorKind,
        /// Overrides `matching.score` from the config.
        #[arg(long, value_enum)]
        score: Option<ScoreArg>,
        /// Also write `match.json` and the resolved config here.
        #[arg(long)]
        out: Option<PathBuf>,
        image: PathBuf,
        /// Directory of template PGM files, used in file-name order.
        templates: PathBuf,
        /// JSON list of labelled transforms.
        candidates: PathBuf,
    },
    /// Diffusion and continuation on the toy problem.
    ToyDiffuse {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated decreasing σ list ending at 0; overrides the config.
        #[arg(long, value_parser = parse_schedule)]
        schedule: Option<DiffusionSchedule>,
        /// Only write the landscape smoothed at `--sigma`.
        #[arg(long)]
        landscape_only: bool,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Check closed forms against quadrature oracles on seeded draws.
    VerifyIdentities {
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Also write `identities.csv` and the resolved config here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one smoothed toy landscape as CSV.
    Landscape {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn read_pgm(path: &Path) -> Result<ScalarField, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    load_pgm(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn cmd_descriptor(
    cfg: &Config,
    kind: DescriptorKind,
    input: &Path,
    output: &Path,
) -> Result<(), CliError> {
    cfg.validate_descriptor(kind)?;
    let field = read_pgm(input)?;
    let d = descriptors::compute(kind, &field, &cfg.descriptor)?;
    write_file(output, &d.payload_bytes())?;
    let header = serde_json::to_string_pretty(&d.header()).expect("header serialises");
    write_file(&with_suffix(output, ".json"), header.as_bytes())?;
    if cfg.io.write_csv {
        write_file(&with_suffix(output, ".csv"), d.to_csv().as_bytes())?;
    }
    cfg.echo(&parent_dir(output))?;
    println!(
        "wrote {} ({} x {} x {} {})",
        output.display(),
        d.n_beta(),
        d.grid.height,
        d.grid.width,
        kind.name()
    );
    Ok(())
}

fn load_templates(dir: &Path) -> Result<Vec<(String, ScalarField)>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read templates {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no .pgm templates in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| {
            Ok((
                p.file_name().unwrap().to_string_lossy().into_owned(),
                read_pgm(p)?,
            ))
        })
        .collect()
}

fn cmd_match(
    cfg: &Config,
    kind: DescriptorKind,
    out: Option<&Path>,
    image: &Path,
    templates: &Path,
    candidates: &Path,
) -> Result<(), CliError> {
    cfg.validate_descriptor(kind)?;
    let field = read_pgm(image)?;
    let text = std::fs::read_to_string(candidates).map_err(|e| {
        CliError::Usage(format!(
            "cannot read candidates {}: {e}",
            candidates.display()
        ))
    })?;
    let set = match serde_json::from_str(&text) {
        Ok(CandidatesFile::List(entries)) => CandidateSet { entries },
        Ok(CandidatesFile::Set(set)) => set,
        Err(e) => {
            return Err(CliError::Usage(format!(
                "invalid candidates {}: {e}",
                candidates.display()
            )))
        }
    };
    set.validate()?;
    let named = load_templates(templates)?;
    let fields: Vec<ScalarField> = named.iter().map(|(_, f)| f.clone()).collect();
    let result = match_templates(
        &field,
        &set,
        &fields,
        kind,
        &cfg.descriptor,
        cfg.matching.score,
    )?;
    let mut ranking: Vec<(usize, usize, f64)> = result
        .scores
        .iter()
        .enumerate()
        .flat_map(|(j, row)| row.iter().enumerate().map(move |(k, s)| (j, k, *s)))
        .collect();
    ranking.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    eprintln!("score = {:?}", cfg.matching.score);
    for (j, k, s) in ranking {
        eprintln!(
            "  {:>12.6e}  candidate {}  template {}",
            s, result.labels[j], named[k].0
        );
    }
    let json = serde_json::to_string_pretty(&result).expect("match result serialises");
    println!("{json}");
    if let Some(dir) = out {
        write_file(&dir.join("match.json"), json.as_bytes())?;
        cfg.echo(dir)?;
    }
    Ok(())
}

fn load_problem(cfg: &Config) -> Result<ToyProblem, CliError> {
    match &cfg.homotopy.problem {
        None => Ok(ToyProblem::shipped()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Usage(format!("cannot read problem {}: {e}", p.display()))
            })?;
            Ok(ToyProblem::from_json(&text)?)
        }
    }
}

fn write_landscape(
    cfg: &Config,
    problem: &ToyProblem,
    sigma: f64,
    path: &Path,
) -> Result<(), CliError> {
    let grid = landscape(problem, &cfg.homotopy.landscape, sigma)?;
    write_file(path, grid.to_csv().as_bytes())
}

/// Runs the continuation. A schedule without any smoothing stage has no
/// convexified start, so it descends from `(0, 0)` unless a start is configured.
fn run_continuation(cfg: &Config, problem: &ToyProblem) -> Result<Trajectory, CliError> {
    let schedule = &cfg.homotopy.schedule;
    let start = cfg
        .homotopy
        .start
        .map(|[c, t]| (c, t))
        .or_else(|| (schedule.sigmas().len() == 1).then_some((0.0, 0.0)));
    let opts = ContinuationOptions {
        start,
        require_unique_start: true,
        tol: cfg.homotopy.tol,
    };
    Ok(continuation_minimize(
        problem,
        schedule,
        &cfg.homotopy.landscape,
        &opts,
    )?)
}

fn cmd_toy_diffuse(
    cfg: &Config,
    out: &Path,
    landscape_only: bool,
    sigma: f64,
) -> Result<(), CliError> {
    cfg.validate_homotopy()?;
    let problem = load_problem(cfg)?;
    if landscape_only {
        let path = out.join(format!("landscape_sigma{sigma}.csv"));
        write_landscape(cfg, &problem, sigma, &path)?;
        cfg.echo(out)?;
        println!("wrote {}", path.display());
        return Ok(());
    }
    let traj = run_continuation(cfg, &problem)?;
    for s in &traj.stages {
        write_landscape(
            cfg,
            &problem,
            s.sigma,
            &out.join(format!("landscape_stage{}_sigma{}.csv", s.stage, s.sigma)),
        )?;
    }
    write_file(&out.join("trajectory.csv"), traj.to_csv().as_bytes())?;
    cfg.echo(out)?;
    let last = traj.last();
    println!(
        "final c1={:.6} theta={:.6} cost={:.6e}",
        last.c1, last.theta, last.cost
    );
    Ok(())
}

fn cmd_landscape(cfg: &Config, out: &Path, sigma: f64) -> Result<(), CliError> {
    cfg.validate_homotopy()?;
    let problem = load_problem(cfg)?;
    let path = out.join(format!("landscape_sigma{sigma}.csv"));
    write_landscape(cfg, &problem, sigma, &path)?;
    cfg.echo(out)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_verify(cfg: &Config, seed: u64, count: usize, out: Option<&Path>) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let rows = identities::run_all(seed, count);
    let csv = identities::to_csv(&rows);
    print!("{csv}");
    if let Some(dir) = out {
        write_file(&dir.join("identities.csv"), csv.as_bytes())?;
        cfg.echo(dir)?;
    }
    let failed = rows.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        let w = identities::worst(&rows).expect("rows are non-empty");
        return Err(CliError::Verify(format!(
            "{failed} of {} identities exceed tolerance; worst: {} params={} closed_form={:e} oracle={:e} rel_err={:e} tol={:e}",
            rows.len(),
            w.identity,
            w.params,
            w.closed_form,
            w.oracle,
            w.rel_err,
            w.tolerance
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Descriptor {
            kind,
            input,
            output,
        } => cmd_descriptor(&cfg, kind, &input, &output),
        Command::Match {
            kind,
            score,
            out,
            image,
            templates,
            candidates,
        } => {
            if let Some(s) = score {
                cfg.matching.score = s.into();
            }
            cmd_match(&cfg, kind, out.as_deref(), &image, &templates, &candidates)
        }
        Command::ToyDiffuse {
            out,
            schedule,
            landscape_only,
            sigma,
        } => {
            if let Some(s) = schedule {
                cfg.homotopy.schedule = s;
            }
            cmd_toy_diffuse(&cfg, &out, landscape_only, sigma)
        }
        Command::VerifyIdentities { count, out } => {
            cmd_verify(&cfg, cli.seed, count, out.as_deref())
        }
        Command::Landscape { out, sigma } => cmd_landscape(&cfg, &out, sigma),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{}", e.render());
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Verify(_)) => {
            eprintln!("verification failed: {e}");
            ExitCode::from(1)
        }
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
