//! Experiment drivers: BER sweeps over SNR and memristor precision, the
//! stage-by-stage demo, performance reports and their file outputs.

mod config;
mod demo;
mod plot;
mod report;
mod sweep;

pub use config::{ExperimentConfig, PerfConfig, Precision};
pub use demo::{run_demo, DemoReport, DemoStage};
pub use plot::{emit_plot_data, read_plot_csv, render_svg, PlotRow};
pub use report::{default_perf_report, perf_report};
pub use sweep::{ber_sweep, read_ber_csv, write_ber_csv, BerRecord, TrialOutcome, run_trial};

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
pub(crate) fn mix_seed(base: u64, trial: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
