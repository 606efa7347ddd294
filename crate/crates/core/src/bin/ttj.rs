use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ttj::casefile::{read_case, write_case, CaseFile};
use ttj::engine::DefectFlags;
use ttj::harness::{fuzz_paths, run_case, run_case_traced, shrink, SynthesisPath, TestCase, Verdict};
use ttj::oracle::emit_sql;
use ttj::synth::SynthConfig;

const EXIT_USAGE: u8 = 3;

// Writes to stdout, ignoring a closed pipe.
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}
macro_rules! outln {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "ttj", version, about = "TreeTracker Join engine and differential tester")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize one test case.
    Gen {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, value_enum, default_value_t = PathArg::A)]
        path: PathArg,
        #[arg(long)]
        defect: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a case through the physical, recursive and oracle evaluators.
    Run {
        #[command(flatten)]
        case: CaseArgs,
        /// Include the physical event log in the report.
        #[arg(long)]
        trace: bool,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded campaign.
    Fuzz {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, value_enum, default_value_t = PathArg::Both)]
        path: PathArg,
        #[arg(long, default_value = "none")]
        defect: String,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        /// Directory for summary.json, failing cases and their shrunk forms.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Shrink every failing case (requires --out).
        #[arg(long)]
        shrink: bool,
    },
    /// Reduce a failing case while keeping its verdict.
    Shrink {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print DDL, inserts and the equivalent SELECT.
    EmitSql {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the physical pipeline's event log.
    Trace {
        #[command(flatten)]
        case: CaseArgs,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    max_size: usize,
    #[arg(long, default_value_t = 10)]
    max_rel_size: usize,
}

impl SynthArgs {
    fn config(&self) -> Result<SynthConfig, String> {
        let cfg = SynthConfig {
            max_size: self.max_size,
            max_rel_size: self.max_rel_size,
            seed: self.seed,
            ..SynthConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CaseArgs {
    #[arg(long = "case")]
    file: PathBuf,
    /// Overrides the flags stored in the case file.
    #[arg(long)]
    defect: Option<String>,
}

impl CaseArgs {
    fn load(&self) -> Result<TestCase, String> {
        let tc = read_case(&self.file).map_err(|e| format!("{}: {e}", self.file.display()))?;
        Ok(match &self.defect {
            Some(d) => tc.with_flags(parse_defect(d)?),
            None => tc,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    A,
    B,
    Both,
}

impl PathArg {
    fn paths(self) -> Vec<SynthesisPath> {
        match self {
            PathArg::A => vec![SynthesisPath::A],
            PathArg::B => vec![SynthesisPath::B],
            PathArg::Both => vec![SynthesisPath::A, SynthesisPath::B],
        }
    }
}

fn parse_defect(s: &str) -> Result<DefectFlags, String> {
    DefectFlags::parse(s).ok_or_else(|| format!("unknown defect '{s}' (expected none, m1, m2, m3 or a comma list)"))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            out!("{text}");
            Ok(())
        }
    }
}

fn exit_for(v: &Verdict) -> ExitCode {
    ExitCode::from(v.exit_code() as u8)
}

fn run(cmd: Cmd) -> Result<ExitCode, String> {
    match cmd {
        Cmd::Gen { synth, path, defect, out } => {
            let cfg = synth.config()?;
            let flags = defect.as_deref().map(parse_defect).transpose()?.unwrap_or_default();
            let sp = match path {
                PathArg::A => SynthesisPath::A,
                PathArg::B => SynthesisPath::B,
                PathArg::Both => return Err("gen takes --path a or --path b".into()),
            };
            let tc = sp.generate(&cfg).with_flags(flags);
            emit(out.as_deref(), &CaseFile::from_case(&tc).to_json())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run { case, trace, out } => {
            let tc = case.load()?;
            let report = run_case_traced(&tc, trace);
            outln!("{report}");
            for line in &report.trace {
                outln!("  {line}");
            }
            if let Some(p) = out {
                let json = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
                emit(Some(&p), &format!("{json}\n"))?;
            }
            Ok(exit_for(&report.verdict))
        }
        Cmd::Fuzz { synth, path, defect, cases, out, shrink: do_shrink } => {
            let cfg = synth.config()?;
            let flags = parse_defect(&defect)?;
            if do_shrink && out.is_none() {
                return Err("--shrink requires --out".into());
            }
            let summary = fuzz_paths(&cfg, cases, flags, &path.paths());
            out!("{summary}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
                let json = serde_json::to_string_pretty(&summary.to_json()).expect("summary serializes");
                emit(Some(&dir.join("summary.json")), &format!("{json}\n"))?;
                for (tc, report) in summary.failures() {
                    let case_path = dir.join(format!("{}.json", tc.id));
                    write_case(&case_path, tc).map_err(|e| e.to_string())?;
                    if do_shrink {
                        let mre = shrink(tc, &report.verdict.kind()).map_err(|e| e.to_string())?;
                        write_case(&dir.join(format!("{}.mre.json", tc.id)), &mre).map_err(|e| e.to_string())?;
                    }
                }
            }
            Ok(if summary.all_pass() { ExitCode::SUCCESS } else if summary.mismatches() > 0 { ExitCode::from(1) } else { ExitCode::from(2) })
        }
        Cmd::Shrink { case, out } => {
            let tc = case.load()?;
            let kind = run_case(&tc).verdict.kind();
            let mre = shrink(&tc, &kind).map_err(|e| format!("{}: {e}", case.file.display()))?;
            eprintln!(
                "shrunk {} relations / {} tuples to {} / {} ({kind})",
                tc.relation_count(),
                tc.tuple_count(),
                mre.relation_count(),
                mre.tuple_count()
            );
            emit(out.as_deref(), &CaseFile::from_case(&mre).to_json())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::EmitSql { case, out } => {
            let tc = case.load()?;
            emit(out.as_deref(), &emit_sql(&tc.db))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Trace { case } => {
            let tc = case.load()?;
            let report = run_case_traced(&tc, true);
            for line in &report.trace {
                outln!("{line}");
            }
            outln!("{}", report.verdict);
            Ok(exit_for(&report.verdict))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
