//! Latency, throughput and energy model.
//!
//! The worst-case settling of the detector is one module settling time plus
//! one slicer delay per stage, bracketed by the input DAC settling and the
//! output ADC delay. Speed and efficiency are an equivalent FLOP count
//! divided by that time and by the consumed energy.

use crate::crossbar::ModuleIO;
use crate::detector::DetectorInstance;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// FLOP count implied by the reference 32×64 figures (5.5 TOPS over
/// 4.874 µs).
pub const IMPLIED_FLOPS_32X64: f64 = 2.68e7;

/// Component delays in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingParams {
    /// Matrix-computing module settling time.
    pub t2: f64,
    pub comparator_delay: f64,
    pub mux_delay: f64,
    pub dac_settle: f64,
    pub adc_delay: f64,
    /// OA gain-bandwidth product in hertz. Informational; its effect is
    /// folded into `t2`.
    pub oa_gbp: f64,
}

impl Default for TimingParams {
    /// High-speed parts: 8 ns comparators, 14 ns multiplexers, 130 ns module
    /// settling, 0.4 ns DAC settling and 10 ns ADC delay.
    fn default() -> Self {
        Self {
            t2: 130e-9,
            comparator_delay: 8e-9,
            mux_delay: 14e-9,
            dac_settle: 0.4e-9,
            adc_delay: 10e-9,
            oa_gbp: 500e6,
        }
    }
}

impl TimingParams {
    /// Slower 4×4 bench parts: 10 ns comparator and 150 ns multiplexer.
    pub fn bench_parts() -> Self {
        Self {
            comparator_delay: 10e-9,
            mux_delay: 150e-9,
            ..Self::default()
        }
    }

    /// `T_slicer`, comparator plus multiplexer.
    pub fn slicer_delay(&self) -> f64 {
        self.comparator_delay + self.mux_delay
    }
}

/// Worst-case total computing time: `dac + K·(T2 + T_slicer) + adc`.
pub fn convergence_time(num_users: usize, params: &TimingParams) -> f64 {
    params.dac_settle + num_users as f64 * (params.t2 + params.slicer_delay()) + params.adc_delay
}

/// Typical power per component instance, in watts.
///
/// Only the OA figure is a part value. The others are datasheet-class
/// figures chosen so one 32×64 detection costs about 19 µJ; override them
/// from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyParams {
    pub oa_power: f64,
    pub comparator_power: f64,
    pub mux_power: f64,
    pub adc_power: f64,
    pub dac_power: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            oa_power: 12e-6,
            comparator_power: 12e-3,
            mux_power: 0.5e-3,
            adc_power: 15e-3,
            dac_power: 3e-3,
        }
    }
}

/// Instance counts of the non-memristor components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComponentCounts {
    pub op_amps: usize,
    pub comparators: usize,
    pub muxes: usize,
    pub adcs: usize,
    pub dacs: usize,
}

impl ComponentCounts {
    /// Module OAs and inverters, one follower per slicer and one buffer per
    /// DAC; `W-1` comparators and one multiplexer per slicer; one ADC per
    /// slicer output and one DAC per entry of `ỹ`.
    pub fn of(det: &DetectorInstance) -> Self {
        let slicers = det.slicer_count();
        let dacs = 2 * det.num_bs_antennas();
        let module_oas: usize = det.programs.iter().map(|p| p.op_amp_count()).sum();
        Self {
            op_amps: module_oas + slicers + dacs,
            comparators: slicers * det.slicer.comparator_count(),
            muxes: slicers,
            adcs: slicers,
            dacs,
        }
    }
}

/// One line of the energy breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTerm {
    pub name: &'static str,
    pub count: usize,
    /// Watts for the whole group.
    pub power: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub terms: Vec<EnergyTerm>,
    pub total: f64,
}

impl EnergyReport {
    pub fn term(&self, name: &str) -> Option<&EnergyTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Joule dissipation of every memristor at the solved operating point plus
/// the typical power of every other component, over `time` seconds.
pub fn estimate_energy(
    det: &DetectorInstance,
    modules: &[ModuleIO],
    time: f64,
    params: &EnergyParams,
) -> EnergyReport {
    let memristor_power: f64 = det
        .programs
        .iter()
        .zip(modules)
        .map(|(p, io)| p.joule_power(io))
        .sum();
    let memristors: usize = det.programs.iter().map(|p| p.memristor_count()).sum();
    let counts = ComponentCounts::of(det);
    let groups = [
        ("memristors", memristors, memristor_power),
        ("op-amps", counts.op_amps, counts.op_amps as f64 * params.oa_power),
        (
            "comparators",
            counts.comparators,
            counts.comparators as f64 * params.comparator_power,
        ),
        ("multiplexers", counts.muxes, counts.muxes as f64 * params.mux_power),
        ("adcs", counts.adcs, counts.adcs as f64 * params.adc_power),
        ("dacs", counts.dacs, counts.dacs as f64 * params.dac_power),
    ];
    let terms: Vec<EnergyTerm> = groups
        .into_iter()
        .map(|(name, count, power)| EnergyTerm {
            name,
            count,
            power,
            energy: power * time,
        })
        .collect();
    let total = terms.iter().map(|t| t.energy).sum();
    EnergyReport { terms, total }
}

/// Tera-operations per second.
pub fn compute_tops(flops: f64, time: f64) -> f64 {
    flops / time / 1e12
}

/// Tera-operations per joule (TOPS/W).
pub fn compute_tops_per_watt(flops: f64, energy: f64) -> f64 {
    flops / energy / 1e12
}

/// Timing, throughput and energy of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    pub label: String,
    pub num_users: usize,
    pub num_bs_antennas: usize,
    pub total_time: f64,
    /// FLOP count the headline speed and efficiency are based on.
    pub flops: f64,
    /// Count under the documented real-valued convention.
    pub flops_convention: f64,
    pub speed_tops: f64,
    pub energy: f64,
    pub efficiency_tops_per_w: f64,
    pub timing: TimingParams,
    pub energy_breakdown: Option<EnergyReport>,
}

impl PerfReport {
    pub fn new(
        label: impl Into<String>,
        dims: (usize, usize),
        timing: TimingParams,
        flops: f64,
        energy: EnergyReport,
    ) -> Self {
        let total_time = convergence_time(dims.0, &timing);
        Self {
            label: label.into(),
            num_users: dims.0,
            num_bs_antennas: dims.1,
            total_time,
            flops,
            flops_convention: crate::sic::flop_count_dims(dims.0, dims.1) as f64,
            speed_tops: compute_tops(flops, total_time),
            energy: energy.total,
            efficiency_tops_per_w: compute_tops_per_watt(flops, energy.total),
            timing,
            energy_breakdown: Some(energy),
        }
    }

    /// Speed and efficiency recomputed on the convention FLOP count.
    pub fn convention_speed_tops(&self) -> f64 {
        compute_tops(self.flops_convention, self.total_time)
    }

    pub fn convention_efficiency(&self) -> f64 {
        compute_tops_per_watt(self.flops_convention, self.energy)
    }

    /// Convention count over the reference count.
    pub fn flop_ratio(&self) -> f64 {
        self.flops_convention / IMPLIED_FLOPS_32X64
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} ({}x{})", self.label, self.num_users, self.num_bs_antennas);
        let t = &self.timing;
        let _ = writeln!(s, "  timing");
        let _ = writeln!(s, "    dac settle         {:>12.3} ns", t.dac_settle * 1e9);
        let _ = writeln!(
            s,
            "    stages             {:>12} x ({:.1} + {:.1} + {:.1}) ns",
            self.num_users,
            t.t2 * 1e9,
            t.comparator_delay * 1e9,
            t.mux_delay * 1e9
        );
        let _ = writeln!(s, "    adc delay          {:>12.3} ns", t.adc_delay * 1e9);
        let _ = writeln!(s, "    total              {:>12.3} ns", self.total_time * 1e9);
        let _ = writeln!(s, "  flops");
        let _ = writeln!(s, "    headline           {:>12.4e}", self.flops);
        let _ = writeln!(
            s,
            "    convention         {:>12.4e}  (x{:.3} of {:.3e})",
            self.flops_convention,
            self.flop_ratio(),
            IMPLIED_FLOPS_32X64
        );
        if let Some(e) = &self.energy_breakdown {
            let _ = writeln!(s, "  energy");
            for term in &e.terms {
                let _ = writeln!(
                    s,
                    "    {:<18} {:>8}  {:>12.4e} W  {:>12.4} uJ",
                    term.name,
                    term.count,
                    term.power,
                    term.energy * 1e6
                );
            }
            let _ = writeln!(s, "    total              {:>12.4} uJ", self.energy * 1e6);
        }
        let _ = writeln!(s, "  speed                {:>12.4} TOPS", self.speed_tops);
        let _ = writeln!(s, "  efficiency           {:>12.4} TOPS/W", self.efficiency_tops_per_w);
        let _ = writeln!(
            s,
            "  on convention flops  {:>12.4} TOPS, {:.4} TOPS/W",
            self.convention_speed_tops(),
            self.convention_efficiency()
        );
        s
    }
}

/// A reference processor row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub name: &'static str,
    pub speed_tops: f64,
    pub energy: f64,
    pub efficiency_tops_per_w: f64,
}

/// Published digital processor figures for the 32×64 task.
pub const BASELINES: [Baseline; 3] = [
    Baseline {
        name: "8-core DSP (TMS320C6678)",
        speed_tops: 0.128,
        energy: 2.1e-3,
        efficiency_tops_per_w: 0.0128,
    },
    Baseline {
        name: "FPGA (Virtex-7 690T)",
        speed_tops: 3.12,
        energy: 343.1e-6,
        efficiency_tops_per_w: 0.078,
    },
    Baseline {
        name: "GPU (RTX A1000)",
        speed_tops: 6.7,
        energy: 199.7e-6,
        efficiency_tops_per_w: 0.134,
    },
];

fn fmt_energy(j: f64) -> String {
    if j >= 1e-3 {
        format!("{} mJ", trim_float(j * 1e3))
    } else {
        format!("{} uJ", trim_float(j * 1e6))
    }
}

fn trim_float(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Side-by-side table of the baselines and the given reports, plus speed and
/// efficiency ratios of each report against each baseline.
pub fn comparison_table(reports: &[PerfReport]) -> String {
    let mut header = vec![String::new()];
    let mut speed = vec!["Computing speed".to_string()];
    let mut energy = vec!["Energy consumption".to_string()];
    let mut eff = vec!["Computational energy efficiency".to_string()];
    for b in &BASELINES {
        header.push(b.name.to_string());
        speed.push(format!("{} TOPS", trim_float(b.speed_tops)));
        energy.push(fmt_energy(b.energy));
        eff.push(format!("{} TOPS/W", trim_float(b.efficiency_tops_per_w)));
    }
    for r in reports {
        header.push(r.label.clone());
        speed.push(format!("{} TOPS", trim_float(r.speed_tops)));
        energy.push(fmt_energy(r.energy));
        eff.push(format!("{} TOPS/W", trim_float(r.efficiency_tops_per_w)));
    }
    let rows = [header, speed, energy, eff];
    let ncols = rows[0].len();
    let widths: Vec<usize> = (0..ncols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    for r in reports {
        for b in &BASELINES {
            let _ = writeln!(
                out,
                "{} vs {}: speed x{:.2}, efficiency x{:.2}",
                r.label,
                b.name,
                r.speed_tops / b.speed_tops,
                r.efficiency_tops_per_w / b.efficiency_tops_per_w
            );
        }
    }
    out
}

/// CSV form of [`comparison_table`]: `processor,speed_tops,energy_j,efficiency_tops_per_w`.
pub fn comparison_csv(reports: &[PerfReport]) -> String {
    let mut out = String::from("processor,speed_tops,energy_j,efficiency_tops_per_w\n");
    for b in &BASELINES {
        let _ = writeln!(out, "{},{},{},{}", b.name, b.speed_tops, b.energy, b.efficiency_tops_per_w);
    }
    for r in reports {
        let _ = writeln!(out, "{},{},{},{}", r.label, r.speed_tops, r.energy, r.efficiency_tops_per_w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_timing() {
        let t = convergence_time(32, &TimingParams::default());
        assert!((t - 4874.4e-9).abs() < 1e-15);
    }

    #[test]
    fn single_stage_timing() {
        let p = TimingParams::default();
        let t = convergence_time(1, &p);
        assert!((t - (0.4e-9 + 130e-9 + 22e-9 + 10e-9)).abs() < 1e-18);
    }

    #[test]
    fn bench_parts_timing() {
        let t = convergence_time(4, &TimingParams::bench_parts());
        assert!((t - (0.4e-9 + 4.0 * 290e-9 + 10e-9)).abs() < 1e-18);
    }

    #[test]
    fn timing_is_affine_in_users() {
        let p = TimingParams::default();
        let slope = p.t2 + p.slicer_delay();
        for k in 1..40 {
            let d = convergence_time(k + 1, &p) - convergence_time(k, &p);
            assert!((d - slope).abs() < 1e-15);
        }
    }

    #[test]
    fn ratios() {
        assert!((compute_tops(2.68e7, 4.8744e-6) - 5.5).abs() / 5.5 < 0.01);
        assert!((compute_tops_per_watt(2.68e7, 18.98e-6) - 1.41).abs() / 1.41 < 0.01);
        assert_eq!(compute_tops(0.0, 1e-6), 0.0);
    }

    #[test]
    fn baseline_rows_render() {
        let t = comparison_table(&[]);
        for needle in [
            "0.128 TOPS", "3.12 TOPS", "6.7 TOPS", "2.1 mJ", "343.1 uJ", "199.7 uJ",
            "0.0128 TOPS/W", "0.078 TOPS/W", "0.134 TOPS/W",
        ] {
            assert!(t.contains(needle), "{needle}\n{t}");
        }
    }
}
