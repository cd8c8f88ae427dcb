//! Command-line front end for the memristive MMSE-SIC detector model.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use memsic::crossbar::Bits;
use memsic::detector::{build_detector, DetectorConfig};
use memsic::harness::{
    ber_sweep, emit_plot_data, perf_report, run_demo, write_ber_csv, ExperimentConfig, PerfConfig,
};
use memsic::mimo::{
    build_constellation, generate_channel, noise_variance_for_snr, MimoConfig,
};
use memsic::perf::{comparison_csv, comparison_table, TimingParams};
use memsic::slicer::{
    format_truth_table_csv, format_truth_table_text, truth_table, SlicerConfig, Structure,
};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "memsic", version, about = "Memristive MMSE-SIC MIMO detector model")]
struct Cli {
    /// Overrides the seed from any config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BER against SNR for each memristor precision and the digital reference.
    BerSweep {
        /// TOML experiment file; defaults to the 8x16 16-QAM desk sweep.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the 32x64 sweep as the base configuration.
        #[arg(long)]
        full: bool,
        /// Plot data CSV (snr_db,series,ber).
        #[arg(long)]
        plot_csv: Option<PathBuf>,
        /// Log-scale SVG of the curves.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Worst-case convergence time and speed.
    Timing {
        /// TOML performance file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the slower 4x4 bench comparator and multiplexer.
        #[arg(long)]
        bench_parts: bool,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        antennas: Option<usize>,
    },
    /// Energy breakdown and comparison with digital platforms.
    Energy {
        /// TOML performance file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Emit the comparison as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Slicer truth table for a QAM order.
    SlicerTable {
        #[arg(long, default_value_t = 16)]
        order: usize,
        #[arg(long, default_value = "direct")]
        structure: Structure,
        /// Volts per symbol unit.
        #[arg(long, default_value_t = 0.1)]
        voltage_scale: f64,
        #[arg(long)]
        csv: bool,
    },
    /// Noise-free 4x4 16-QAM stage-by-stage walk-through.
    Demo {
        #[arg(long, default_value = "direct")]
        structure: Structure,
    },
    /// Conductances and feedback values of one programmed stage.
    DumpProgram {
        #[arg(long, default_value_t = 4)]
        users: usize,
        #[arg(long, default_value_t = 8)]
        antennas: usize,
        #[arg(long, default_value_t = 16)]
        modulation: usize,
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long, default_value = "inf")]
        bits: Bits,
        /// 1-based stage index.
        #[arg(long, default_value_t = 1)]
        stage: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_perf(config: &Option<PathBuf>, seed: Option<u64>) -> Result<PerfConfig> {
    let mut cfg = match config {
        Some(p) => PerfConfig::load(p)?,
        None => PerfConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BerSweep {
            config,
            full,
            plot_csv,
            svg,
        } => {
            let mut cfg = match (&config, full) {
                (Some(p), _) => ExperimentConfig::load(p)?,
                (None, true) => ExperimentConfig::full_scale(),
                (None, false) => ExperimentConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = cli.threads {
                cfg.threads = t;
            }
            let records = ber_sweep(&cfg)?;
            let mut buf = Vec::new();
            write_ber_csv(&records, &mut buf)?;
            let csv = String::from_utf8(buf)?;
            if let Some(p) = &cfg.csv {
                std::fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?;
            }
            let plot_csv = plot_csv.or(cfg.plot_csv.clone());
            let svg = svg.or(cfg.svg.clone());
            match (&plot_csv, &svg) {
                (Some(c), s) => emit_plot_data(&records, c, s.as_deref())?,
                (None, Some(s)) => std::fs::write(s, memsic::harness::render_svg(&records))
                    .with_context(|| format!("writing {}", s.display()))?,
                (None, None) => {}
            }
            for r in &records {
                eprintln!(
                    "snr {:>6} dB  {:>8}  ber {:.4e}  ({} errors / {} bits, {:.1} s)",
                    r.snr_db, r.precision, r.ber, r.bit_errors, r.bits_sent, r.wall_time
                );
            }
            emit(&cli.out, &csv)
        }
        Command::Timing {
            config,
            bench_parts,
            users,
            antennas,
        } => {
            let mut cfg = load_perf(&config, cli.seed)?;
            if bench_parts {
                cfg.timing = TimingParams::bench_parts();
            }
            if let Some(k) = users {
                cfg.users = k;
            }
            if let Some(r) = antennas {
                cfg.antennas = r;
            }
            let time = memsic::perf::convergence_time(cfg.users, &cfg.timing);
            let t = &cfg.timing;
            let flops = cfg.headline_flops();
            let mut s = String::new();
            writeln!(s, "users {}  antennas {}", cfg.users, cfg.antennas)?;
            writeln!(s, "dac settle      {:>10.3} ns", t.dac_settle * 1e9)?;
            writeln!(s, "module settle   {:>10.3} ns per stage", t.t2 * 1e9)?;
            writeln!(s, "comparator      {:>10.3} ns per stage", t.comparator_delay * 1e9)?;
            writeln!(s, "multiplexer     {:>10.3} ns per stage", t.mux_delay * 1e9)?;
            writeln!(s, "adc delay       {:>10.3} ns", t.adc_delay * 1e9)?;
            writeln!(s, "total           {:>10.3} ns", time * 1e9)?;
            writeln!(s, "flops           {:>10.4e}", flops)?;
            writeln!(s, "speed           {:>10.4} TOPS", memsic::perf::compute_tops(flops, time))?;
            emit(&cli.out, &s)
        }
        Command::Energy { config, csv } => {
            let cfg = load_perf(&config, cli.seed)?;
            let report = perf_report(&cfg)?;
            let reports = [report];
            let text = if csv {
                comparison_csv(&reports)
            } else {
                format!("{}\n{}", reports[0].to_text(), comparison_table(&reports))
            };
            emit(&cli.out, &text)
        }
        Command::SlicerTable {
            order,
            structure,
            voltage_scale,
            csv,
        } => {
            let c = build_constellation(order, voltage_scale)?;
            let cfg = SlicerConfig::for_constellation(&c, structure)?;
            let rows = truth_table(&cfg);
            let text = if csv {
                format_truth_table_csv(&rows)
            } else {
                format_truth_table_text(&rows)
            };
            emit(&cli.out, &text)
        }
        Command::Demo { structure } => {
            let rep = run_demo(cli.seed.unwrap_or(1), structure)?;
            emit(&cli.out, &rep.to_text())?;
            if !rep.recovered() {
                bail!("noise-free demo did not recover the transmitted symbols");
            }
            Ok(())
        }
        Command::DumpProgram {
            users,
            antennas,
            modulation,
            snr_db,
            bits,
            stage,
        } => {
            if stage == 0 || stage > users {
                bail!("stage must be in 1..={users}");
            }
            let noise_variance = noise_variance_for_snr(users, snr_db);
            let mimo = MimoConfig::equal_power(users, antennas, noise_variance, modulation)?;
            let chan = generate_channel(&mimo, cli.seed.unwrap_or(1));
            let dcfg = DetectorConfig {
                bits,
                ..DetectorConfig::default()
            };
            let c = build_constellation(modulation, dcfg.voltage_scale)?;
            let det = build_detector(&chan, noise_variance, &c, &dcfg)?;
            let mut buf = Vec::new();
            det.programs[stage - 1].dump(&mut buf)?;
            emit(&cli.out, &String::from_utf8(buf)?)
        }
    }
}
