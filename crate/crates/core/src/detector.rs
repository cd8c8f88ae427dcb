//! The full detector: K matrix-computing stages, each feeding two slicers.
//!
//! Stage `k` sees the realified received vector `ỹ` (shared by all stages)
//! and the decisions of stages `1..k-1`, and its output `c·r_k` drives the
//! real and imaginary slicers through entries `1` and `K+2-k`.

use crate::crossbar::{
    decode_output, encode_inputs, program_stage, solve_module, Bits, ConductanceRange,
    CrossbarProgram, ModuleIO, StageSpec, VoltageWarning,
};
use crate::mimo::{ChannelRealization, Constellation};
use crate::sic::{
    complexify_vector, order_columns, realify_matrix, realify_vector, DetectionOrder, SicStage,
    SicTrace,
};
use crate::slicer::{slice, SliceOutcome, SlicerConfig, Structure};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Knobs for building a detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub range: ConductanceRange,
    pub bits: Bits,
    pub structure: Structure,
    /// Output volts per symbol unit; also the slicer reference voltage.
    pub voltage_scale: f64,
    /// Inputs above this magnitude are reported as warnings.
    pub voltage_ceiling: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            range: ConductanceRange::default(),
            bits: Bits::Infinite,
            structure: Structure::DirectSelect,
            voltage_scale: 0.1,
            voltage_ceiling: 1.0,
        }
    }
}

/// A programmed detector for one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorInstance {
    pub programs: Vec<CrossbarProgram>,
    pub slicer: SlicerConfig,
    pub order: DetectionOrder,
    /// `G`, the column-permuted transfer matrix.
    pub ordered: CMatrix,
    pub constellation: Constellation,
    pub config: DetectorConfig,
}

impl DetectorInstance {
    pub fn num_users(&self) -> usize {
        self.programs.len()
    }

    pub fn num_bs_antennas(&self) -> usize {
        self.ordered.nrows()
    }

    /// Two slicers per stage.
    pub fn slicer_count(&self) -> usize {
        2 * self.programs.len()
    }
}

/// Orders the channel, programs every stage and sets up the slicers.
pub fn build_detector(
    chan: &ChannelRealization,
    noise_variance: f64,
    constellation: &Constellation,
    config: &DetectorConfig,
) -> Result<DetectorInstance> {
    let order = order_columns(&chan.f)?;
    let g = order.permute_columns(&chan.f);
    let k_total = g.ncols();
    let programs = (0..k_total)
        .map(|k| {
            let tail = realify_matrix(&g.columns(k, k_total - k).into_owned());
            let head = (k > 0).then(|| realify_matrix(&g.columns(0, k).into_owned()));
            program_stage(&StageSpec {
                tail: &tail,
                head: head.as_ref(),
                noise_variance,
                range: config.range,
                bits: config.bits,
                voltage_scale: config.voltage_scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let levels = constellation
        .unit_levels()
        .iter()
        .map(|x| x * config.voltage_scale)
        .collect();
    let slicer = SlicerConfig::new(levels, config.structure, config.voltage_scale)?;
    Ok(DetectorInstance {
        programs,
        slicer,
        order,
        ordered: g,
        constellation: constellation.clone(),
        config: config.clone(),
    })
}

/// Result of running the detector on one received vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Estimates in user order.
    pub symbols: CVector,
    /// Decoded `r_k` and decisions, in the same layout as the digital oracle.
    pub trace: SicTrace,
    /// Node voltages of every stage.
    pub modules: Vec<ModuleIO>,
    /// Real and imaginary slicer outcomes per stage.
    pub slices: Vec<(SliceOutcome, SliceOutcome)>,
    pub warnings: Vec<(usize, VoltageWarning)>,
}

/// Runs all stages in order on `y`.
pub fn detect(det: &DetectorInstance, y: &CVector) -> Result<Detection> {
    if y.len() != det.num_bs_antennas() {
        return Err(Error::Dimension {
            what: "received vector",
            expected: det.num_bs_antennas(),
            got: y.len(),
        });
    }
    let y_real = realify_vector(y);
    let k_total = det.num_users();
    let mut estimates: Vec<C64> = Vec::with_capacity(k_total);
    let mut stages = Vec::with_capacity(k_total);
    let mut modules = Vec::with_capacity(k_total);
    let mut slices = Vec::with_capacity(k_total);
    let mut warnings = Vec::new();
    for (k, prog) in det.programs.iter().enumerate() {
        let e_head = realify_vector(&CVector::from_column_slice(&estimates));
        let enc = encode_inputs(&y_real, &e_head, prog, det.config.voltage_ceiling)?;
        warnings.extend(enc.warnings.into_iter().map(|w| (k, w)));
        let io = solve_module(prog, &enc.v_in1, &enc.v_in2)?;
        let n = k_total - k;
        let re = slice(io.v_out[0], &det.slicer);
        let im = slice(io.v_out[n], &det.slicer);
        let estimate = det
            .constellation
            .point_from_indices(re.level_index, im.level_index);
        estimates.push(estimate);
        let r = decode_output(&io.v_out, prog.voltage_scale);
        stages.push(SicStage {
            b: complexify_vector(&r),
            r,
            estimate,
        });
        modules.push(io);
        slices.push((re, im));
    }
    let trace = SicTrace {
        order: det.order.clone(),
        ordered: det.ordered.clone(),
        stages,
    };
    Ok(Detection {
        symbols: det.order.unpermute(&estimates),
        trace,
        modules,
        slices,
        warnings,
    })
}
