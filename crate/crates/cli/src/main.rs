use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pilot_adapt::asymptotic::{asymptotic_rates, deterministic_sinr, sinr_bar, AsymptoticModel};
use pilot_adapt::harness::{
    registry_bound, run_estimation, run_sweep, run_trials, write_csv, write_json,
    write_records_csv, ExperimentConfig, PointSummary,
};
use pilot_adapt::pattern::{conventional_pattern, default_registry, select_pattern_for_group};
use pilot_adapt::{max_spacing, PilotSpacing};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "pilot-adapt",
    version,
    about = "Pilot-pattern adaptation simulator for multi-user MIMO OFDM"
)]
struct Cli {
    /// Experiment config (TOML, or JSON for .json files); reference defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, overriding the config; standard output when neither is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Print the pattern registry, grid maps and overheads.
    Patterns,
    /// Per-trial spectral efficiency of grouping vs conventional scheduling.
    Simulate,
    /// Relative-gain sweep with per-point means and the gain bound.
    Sweep,
    /// Deterministic equivalents, limiting rates and the gain bound.
    Asymptotics,
    /// Interpolation NMSE at the spacing rule and at twice the spacing.
    ValidateEstimation,
}

#[derive(Serialize)]
struct PatternRow {
    #[serde(rename = "U_mux")]
    u_mux: usize,
    profile: String,
    rule_spacing: String,
    spacing: String,
    pilots: usize,
    overhead: f64,
    #[serde(skip)]
    map: String,
}

#[derive(Serialize)]
struct AsymptoticRow {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "U_mux")]
    u_mux: usize,
    direction: String,
    eta_bar: f64,
    deterministic_sinr: f64,
    sinr_bar: f64,
    r_grp_limit: f64,
    r_conv_limit: f64,
    bound: f64,
}

fn load_config(cli: &Cli) -> pilot_adapt::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::reference(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

fn sink(cfg: &ExperimentConfig) -> pilot_adapt::Result<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_records<T: Serialize>(
    rows: &[T],
    format: Format,
    out: impl Write,
) -> pilot_adapt::Result<()> {
    match format {
        Format::Json => write_json(&rows, out),
        Format::Csv => write_records_csv(rows, out),
    }
}

fn print_summary(summary: &[PointSummary]) {
    println!("M\tU_mux\tdirection\ttrials\tR_grp\tR_conv\tgain\tse\twins\tbound");
    for s in summary {
        println!(
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{:.4}",
            s.m,
            s.u_mux,
            s.direction,
            s.trials,
            s.mean_r_grp,
            s.mean_r_conv,
            s.mean_gain,
            s.gain_se,
            s.wins,
            s.bound
        );
    }
}

fn patterns(cfg: &ExperimentConfig, format: Option<Format>) -> pilot_adapt::Result<()> {
    let profiles = cfg.profiles()?;
    let num = &cfg.numerology;
    let spacing =
        |s: PilotSpacing| format!("{}x{}", s.time_spacing_symbols, s.freq_spacing_subcarriers);
    let mut rows = Vec::new();
    for &u in &cfg.mux_sweep {
        let registry = default_registry(&profiles, num, u)?;
        for p in &profiles {
            let pat = select_pattern_for_group(&registry, p, num)?;
            rows.push(PatternRow {
                u_mux: u,
                profile: p.name.clone(),
                rule_spacing: spacing(max_spacing(p, num)?),
                spacing: spacing(pat.spacing),
                pilots: pat.len(),
                overhead: pat.overhead(),
                map: pat.grid_map(),
            });
        }
        let conv = conventional_pattern(&profiles, num, u)?;
        rows.push(PatternRow {
            u_mux: u,
            profile: "conventional".into(),
            rule_spacing: "-".into(),
            spacing: spacing(conv.spacing),
            pilots: conv.len(),
            overhead: conv.overhead(),
            map: conv.grid_map(),
        });
    }
    let mut out = sink(cfg)?;
    match format {
        Some(f) => write_records(&rows, f, &mut out)?,
        None => {
            for &u in &cfg.mux_sweep {
                writeln!(out, "U_mux = {u}, bound = {:.4}", registry_bound(cfg, u)?)?;
                for r in rows.iter().filter(|r| r.u_mux == u) {
                    writeln!(
                        out,
                        "  {:<14} rule {:<6} pattern {:<6} pilots {:>3}  overhead {:.4}",
                        r.profile, r.rule_spacing, r.spacing, r.pilots, r.overhead
                    )?;
                    for line in r.map.lines() {
                        writeln!(out, "    {line}")?;
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn asymptotics(cfg: &ExperimentConfig, format: Format) -> pilot_adapt::Result<()> {
    let profiles = cfg.profiles()?;
    let num = &cfg.numerology;
    let mut rows = Vec::new();
    for &m in &cfg.m_sweep {
        for &u in &cfg.mux_sweep {
            let sizes = cfg.group_sizes(u)?;
            let k: usize = sizes.iter().sum();
            let gammas: Vec<f64> = sizes.iter().map(|s| *s as f64 / k as f64).collect();
            let registry = default_registry(&profiles, num, u)?;
            let pattern_sizes = profiles
                .iter()
                .map(|p| Ok(select_pattern_for_group(&registry, p, num)?.len()))
                .collect::<pilot_adapt::Result<Vec<usize>>>()?;
            for d in cfg.directions() {
                let model = AsymptoticModel::new(
                    &cfg.system_config(m, u),
                    gammas.clone(),
                    cfg.fading.clone(),
                    d,
                )?;
                let eta_bar = model.eta_bar();
                let (r_grp, r_conv) =
                    asymptotic_rates(&model, &pattern_sizes, num.res_per_rb(), m, u)?;
                rows.push(AsymptoticRow {
                    m,
                    u_mux: u,
                    direction: d.to_string(),
                    eta_bar,
                    deterministic_sinr: deterministic_sinr(&model, eta_bar, eta_bar, m, u),
                    sinr_bar: sinr_bar(&model, m, u),
                    r_grp_limit: r_grp,
                    r_conv_limit: r_conv,
                    bound: registry_bound(cfg, u)?,
                });
            }
        }
    }
    let mut out = sink(cfg)?;
    write_records(&rows, format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> pilot_adapt::Result<()> {
    let cfg = load_config(cli)?;
    let format = cli.format.unwrap_or(Format::Csv);
    match cli.command {
        Command::Patterns => patterns(&cfg, cli.format),
        Command::Simulate => {
            let rows = run_trials(&cfg)?;
            let mut out = sink(&cfg)?;
            match format {
                Format::Csv => write_csv(&rows, &mut out)?,
                Format::Json => write_json(&rows, &mut out)?,
            }
            out.flush()?;
            if cfg.output.is_some() {
                print_summary(&pilot_adapt::harness::summarize(&rows));
            }
            Ok(())
        }
        Command::Sweep => {
            let res = run_sweep(&cfg)?;
            let mut out = sink(&cfg)?;
            match format {
                Format::Csv => write_csv(&res.rows, &mut out)?,
                Format::Json => write_json(&res, &mut out)?,
            }
            out.flush()?;
            if cfg.output.is_some() {
                print_summary(&res.summary);
            }
            Ok(())
        }
        Command::Asymptotics => asymptotics(&cfg, format),
        Command::ValidateEstimation => {
            let rows = run_estimation(&cfg)?;
            let mut out = sink(&cfg)?;
            write_records(&rows, format, &mut out)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn report(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // help and version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            report("usage", first);
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
