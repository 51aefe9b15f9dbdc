use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rislink::codebook::{self, Codebook, CodebookKind};
use rislink::estimation::{control_signaling_bits, three_phase_overhead, Signaling};
use rislink::harness::output::{emit_results, write_records, Format};
use rislink::harness::sweep::{crossovers, save_table, sweep, write_table, Metric, SweepAxis};
use rislink::harness::{run_trials, Learner, ScenarioConfig};
use rislink::metrics::Scheme;
use rislink::Result;

#[derive(Parser)]
#[command(name = "rislink", version, about = "RIS codebook-based passive beamforming link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and emit per-trial records.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Append to an existing output file.
        #[arg(long)]
        append: bool,
    },
    /// Sweep one parameter and emit an aggregated table.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        /// Aggregated table (CSV); stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write the per-trial records here.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Generate, inspect or export codebooks.
    Codebook {
        #[command(subcommand)]
        action: CodebookAction,
    },
    /// Pilot and control-signalling overhead calculators.
    Overhead {
        #[command(subcommand)]
        action: OverheadAction,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file; defaults apply to missing keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// RIS elements (M).
    #[arg(short = 'm', long)]
    elements: Option<usize>,
    /// Phase levels (B).
    #[arg(short = 'b', long)]
    levels: Option<u32>,
    /// Codebook size (Q).
    #[arg(short = 'q', long)]
    codebook_size: Option<usize>,
    #[arg(long, value_parser = parse_kind)]
    kind: Option<CodebookKind>,
    #[arg(long, value_parser = parse_learner)]
    learner: Option<Learner>,
    #[arg(long, allow_hyphen_values = true)]
    pilot_power_dbm: Option<f64>,
    #[arg(long)]
    coherence: Option<u64>,
    /// Comma-separated subset of codebook,ao,random,oracle.
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    schemes: Option<Vec<Scheme>>,
}

fn parse_kind(s: &str) -> std::result::Result<CodebookKind, String> {
    s.parse().map_err(|e: rislink::Error| e.to_string())
}

fn parse_learner(s: &str) -> std::result::Result<Learner, String> {
    s.parse().map_err(|e: rislink::Error| e.to_string())
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: rislink::Error| e.to_string())
}

fn parse_signaling(s: &str) -> std::result::Result<Signaling, String> {
    s.parse().map_err(|e: rislink::Error| e.to_string())
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$field = v; })*
            };
        }
        set!(seed => master_seed, trials => n_trials, workers => workers,
             elements => elements, levels => phase_levels, codebook_size => codebook_size,
             kind => codebook_kind, learner => learner, pilot_power_dbm => pilot_power_dbm,
             coherence => coherence_slots, schemes => schemes);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum CodebookAction {
    /// Generate a codebook and write it in the text exchange format.
    Generate {
        #[arg(long, value_parser = parse_kind)]
        kind: CodebookKind,
        #[arg(short = 'm', long)]
        elements: usize,
        #[arg(short = 'b', long)]
        levels: u32,
        #[arg(short = 'q', long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Summarize a codebook file.
    Inspect { file: PathBuf },
}

#[derive(Subcommand)]
enum OverheadAction {
    /// Pilot slots of three-phase cascaded estimation.
    ThreePhase {
        #[arg(long)]
        users: u64,
        #[arg(long)]
        elements: u64,
        #[arg(long)]
        antennas: u64,
    },
    /// Control bits to configure the RIS.
    Bits {
        #[arg(long, value_parser = parse_signaling)]
        scheme: Signaling,
        #[arg(short = 'm', long, default_value_t = 0)]
        elements: u64,
        #[arg(short = 'b', long, default_value_t = 2)]
        levels: u64,
        #[arg(short = 'q', long, default_value_t = 1)]
        size: u64,
    },
}

fn inspect(cb: &Codebook) {
    println!("kind      {}", cb.kind());
    println!("M         {}", cb.num_elements());
    println!("B         {}", cb.levels());
    println!("Q         {}", cb.len());
    match cb.generation_seed() {
        Some(s) => println!("seed      {s}"),
        None => println!("seed      none"),
    }
    println!("sum-dist  {:.6}", codebook::sum_pairwise_distance(cb));
    let gram = cb.gram();
    let max_off = (0..cb.len())
        .flat_map(|i| (0..cb.len()).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| gram[i][j].norm())
        .fold(0.0, f64::max);
    println!("max |<ci,cj>| (i != j)  {max_off:.3e}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            format,
            append,
        } => {
            let cfg = scenario.resolve()?;
            let records = run_trials(&cfg)?;
            match out {
                Some(path) => {
                    let format = format.unwrap_or_else(|| Format::from_path(&path));
                    emit_results(&records, &path, format, append)?;
                }
                None => write_records(&records, std::io::stdout().lock(), format.unwrap_or(Format::Csv), true)?,
            }
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            out,
            records,
        } => {
            let cfg = scenario.resolve()?;
            let res = sweep(&cfg, axis, &values)?;
            match out {
                Some(path) => save_table(&res.rows, &path)?,
                None => write_table(&res.rows, std::io::stdout().lock())?,
            }
            if let Some(path) = records {
                emit_results(&res.records, &path, Format::from_path(&path), false)?;
            }
            let metric = if axis == SweepAxis::T { Metric::EffectiveRate } else { Metric::Rate };
            let present = |s: Scheme| res.rows.iter().any(|r| r.scheme == s);
            for (a, b) in [(Scheme::Codebook, Scheme::Ao), (Scheme::Codebook, Scheme::Random), (Scheme::Ao, Scheme::Random)] {
                if present(a) && present(b) {
                    let x = crossovers(&res.rows, a, b, metric);
                    eprintln!("crossovers {a} vs {b} along {axis}: {x:?}");
                }
            }
        }
        Command::Codebook { action } => match action {
            CodebookAction::Generate {
                kind,
                elements,
                levels,
                size,
                seed,
                out,
            } => {
                let cb = codebook::generate(kind, elements, levels, size, seed)?;
                match out {
                    Some(path) => cb.save(&path)?,
                    None => print!("{}", cb.to_text()),
                }
            }
            CodebookAction::Inspect { file } => inspect(&Codebook::load(&file)?),
        },
        Command::Overhead { action } => match action {
            OverheadAction::ThreePhase {
                users,
                elements,
                antennas,
            } => {
                let o = three_phase_overhead(users, elements, antennas)?;
                println!("phase_1 {}\nphase_2 {}\nphase_3 {}\ntotal {}", o.phase1, o.phase2, o.phase3, o.total);
            }
            OverheadAction::Bits {
                scheme,
                elements,
                levels,
                size,
            } => println!("{}", control_signaling_bits(scheme, elements, levels, size)),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
