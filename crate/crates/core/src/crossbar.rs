//! Memristor crossbar matrix-computing module.
//!
//! A signed matrix `O` is stored as the difference of two conductance
//! arrays, `U - V = β·O`. Each module holds six arrays paired into
//! `D1 = C1 - C4`, `D2 = C2 - C5`, `D3 = C3 - C6` plus the scalar
//! conductances `λ0`, `λ1`, `λ2`, and settles to
//!
//! ```text
//! v_out = (D3ᵀ D2 + λ1 λ2 I)⁻¹ D3ᵀ (λ0 v_in1 - D1 v_in2)
//! ```
//!
//! which is solved here algebraically (steady state only).

use crate::{Error, RMatrix, RVector, Result};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

/// Relative slack for conductances that land a rounding error outside the
/// range (e.g. `α_max - β·max|o|`).
const RANGE_SLACK: f64 = 1e-9;

/// Achievable conductance window of the devices, in siemens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConductanceRange {
    pub min: f64,
    pub max: f64,
}

impl Default for ConductanceRange {
    /// 0.1 µS to 30 µS.
    fn default() -> Self {
        Self {
            min: 0.1e-6,
            max: 30e-6,
        }
    }
}

impl ConductanceRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && max > min && max.is_finite()) {
            return Err(Error::Config(format!(
                "conductance range must satisfy 0 < min < max (got {min:e}, {max:e})"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    fn slack(&self) -> f64 {
        RANGE_SLACK * self.max
    }

    /// Pulls values within rounding distance of the range onto it; anything
    /// further out is a contract violation.
    fn admit(&self, value: f64) -> Result<f64> {
        if value >= self.min && value <= self.max {
            Ok(value)
        } else if value >= self.min - self.slack() && value <= self.max + self.slack() {
            Ok(value.clamp(self.min, self.max))
        } else {
            Err(Error::OutOfRange {
                value,
                min: self.min,
                max: self.max,
            })
        }
    }
}

/// Memristor programming precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Deserialize)]
#[serde(try_from = "String")]
pub enum Bits {
    Finite(u32),
    Infinite,
}

impl Bits {
    /// Number of programmable levels, `None` when continuous.
    pub fn levels(&self) -> Option<u64> {
        match self {
            Bits::Finite(b) => Some(1u64 << b),
            Bits::Infinite => None,
        }
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bits::Finite(b) => write!(f, "{b}"),
            Bits::Infinite => f.write_str("inf"),
        }
    }
}

impl TryFrom<String> for Bits {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" | "ideal" => Ok(Bits::Infinite),
            other => match other.parse::<u32>() {
                Ok(b) if (1..=52).contains(&b) => Ok(Bits::Finite(b)),
                _ => Err(Error::Config(format!("invalid bit precision '{s}'"))),
            },
        }
    }
}

/// Rounds a conductance to the nearest of `2^b` evenly spaced levels over
/// the range, endpoints included.
pub fn quantize_conductance(value: f64, bits: Bits, range: &ConductanceRange) -> Result<f64> {
    let value = range.admit(value)?;
    match bits {
        Bits::Infinite => Ok(value),
        Bits::Finite(b) => {
            let steps = ((1u64 << b) - 1) as f64;
            let step = range.span() / steps;
            let idx = ((value - range.min) / step).round().min(steps);
            // The top level is exactly `max`, not `min + steps·step`.
            Ok(if idx == steps { range.max } else { range.min + idx * step })
        }
    }
}

/// A signed matrix realised as `U - V = β·O`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedMatrix {
    pub u: RMatrix,
    pub v: RMatrix,
    /// Siemens per matrix unit.
    pub beta: f64,
}

/// Largest scale that keeps every `v_ij` inside the range.
pub fn max_beta(o: &RMatrix, range: &ConductanceRange) -> Result<f64> {
    let peak = o.amax();
    if !peak.is_finite() {
        return Err(Error::Config("matrix has non-finite entries".into()));
    }
    if peak == 0.0 {
        return Err(Error::DegenerateMatrix);
    }
    Ok(range.span() / peak)
}

/// `u_ij = α_max` if `o_ij > 0` else `α_min`; `v_ij = u_ij - β·o_ij` with
/// `β = (α_max - α_min) / max|o_ij|`.
pub fn map_matrix(o: &RMatrix, range: &ConductanceRange) -> Result<MappedMatrix> {
    let beta = max_beta(o, range)?;
    map_matrix_with_beta(o, range, beta)
}

/// Same mapping with a caller-chosen scale, which must not exceed
/// [`max_beta`].
pub fn map_matrix_with_beta(
    o: &RMatrix,
    range: &ConductanceRange,
    beta: f64,
) -> Result<MappedMatrix> {
    let limit = max_beta(o, range)?;
    if !(beta > 0.0 && beta <= limit * (1.0 + 1e-12)) {
        return Err(Error::Config(format!(
            "mapping scale {beta:e} outside (0, {limit:e}]"
        )));
    }
    let u = o.map(|x| if x > 0.0 { range.max } else { range.min });
    let mut v = RMatrix::zeros(o.nrows(), o.ncols());
    for ((vij, &uij), &oij) in v.iter_mut().zip(u.iter()).zip(o.iter()) {
        *vij = range.admit(uij - beta * oij)?;
    }
    Ok(MappedMatrix { u, v, beta })
}

impl MappedMatrix {
    /// Effective signed conductance `U - V`.
    pub fn difference(&self) -> RMatrix {
        &self.u - &self.v
    }

    /// The matrix this array realises, `(U - V) / β`.
    pub fn logical(&self) -> RMatrix {
        self.difference() / self.beta
    }

    pub fn quantized(&self, bits: Bits, range: &ConductanceRange) -> Result<MappedMatrix> {
        let q = |m: &RMatrix| -> Result<RMatrix> {
            let mut out = m.clone();
            for x in out.iter_mut() {
                *x = quantize_conductance(*x, bits, range)?;
            }
            Ok(out)
        };
        Ok(MappedMatrix {
            u: q(&self.u)?,
            v: q(&self.v)?,
            beta: self.beta,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.u.shape()
    }

    /// `Σ (u_ij + v_ij)·x_j²`, the Joule power when column `j` of both
    /// arrays sees a drop of `±x_j`.
    fn column_drop_power(&self, x: &RVector) -> f64 {
        let g = &self.u + &self.v;
        g.column_iter()
            .zip(x.iter())
            .map(|(col, xj)| col.sum() * xj * xj)
            .sum()
    }

    /// Same with row `i` seeing `±x_i`.
    fn row_drop_power(&self, x: &RVector) -> f64 {
        let g = &self.u + &self.v;
        g.row_iter()
            .zip(x.iter())
            .map(|(row, xi)| row.sum() * xi * xi)
            .sum()
    }
}

/// Programmed conductances of one matrix-computing module.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarProgram {
    /// `C1 - C4`; absent in the first stage.
    pub d1: Option<MappedMatrix>,
    /// `C2 - C5`.
    pub d2: MappedMatrix,
    /// `C3 - C6`.
    pub d3: MappedMatrix,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Volts per symbol unit at the output.
    pub voltage_scale: f64,
    pub bits: Bits,
}

impl CrossbarProgram {
    /// Assembles a program from already-mapped arrays, checking shapes.
    ///
    /// `λ1 = λ2 = 0` is accepted and stands for the noise-free limit of an
    /// open feedback path.
    pub fn from_parts(
        d1: Option<MappedMatrix>,
        d2: MappedMatrix,
        d3: MappedMatrix,
        lambdas: [f64; 3],
        voltage_scale: f64,
        bits: Bits,
    ) -> Result<Self> {
        if d2.shape() != d3.shape() {
            return Err(Error::Dimension {
                what: "D3 columns (must match D2)",
                expected: d2.shape().1,
                got: d3.shape().1,
            });
        }
        if let Some(d1) = &d1 {
            if d1.shape().0 != d2.shape().0 {
                return Err(Error::Dimension {
                    what: "D1 rows (must match D2)",
                    expected: d2.shape().0,
                    got: d1.shape().0,
                });
            }
        }
        if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("feedback conductances must be nonnegative".into()));
        }
        if !(voltage_scale > 0.0) {
            return Err(Error::Config("voltage scale must be positive".into()));
        }
        Ok(Self {
            d1,
            d2,
            d3,
            lambda0: lambdas[0],
            lambda1: lambdas[1],
            lambda2: lambdas[2],
            voltage_scale,
            bits,
        })
    }

    /// Scale shared by `D2` and `D3`.
    pub fn beta_g(&self) -> f64 {
        self.d2.beta
    }

    /// Length of `v_in1` (`2R`).
    pub fn input_len(&self) -> usize {
        self.d2.shape().0
    }

    /// Length of `v_in2` (`2(k-1)`).
    pub fn head_len(&self) -> usize {
        self.d1.as_ref().map_or(0, |d| d.shape().1)
    }

    /// Length of `v_out` (`2(K-k+1)`).
    pub fn output_len(&self) -> usize {
        self.d2.shape().1
    }

    /// Number of memristors: six arrays plus the `λ0`, `λ1`, `λ2` devices.
    pub fn memristor_count(&self) -> usize {
        let (m, n) = self.d2.shape();
        let head = self.d1.as_ref().map_or(0, |d| 2 * d.u.len());
        head + 4 * m * n + 2 * m + n
    }

    /// Operational amplifiers: the two OA sets plus inverters for
    /// `-v_in2`, `-v2` and `-v1`.
    pub fn op_amp_count(&self) -> usize {
        let (m, n) = self.d2.shape();
        (m + n) + (self.head_len() + n + m)
    }

    /// Steady-state Joule dissipation in watts at the given operating point.
    pub fn joule_power(&self, io: &ModuleIO) -> f64 {
        let sq = |v: &RVector| v.norm_squared();
        let mut p = self.lambda0 * sq(&io.v_in1) + self.lambda2 * sq(&io.v2);
        if let Some(d1) = &self.d1 {
            p += d1.column_drop_power(&io.v_in2);
        }
        p += self.d2.column_drop_power(&io.v2);
        if let Some(v1) = &io.v1 {
            p += self.lambda1 * sq(v1) + self.d3.row_drop_power(v1);
        }
        p
    }

    /// Writes the program as `key = value` lines and matrix rows, all
    /// conductances in siemens with 12 significant digits.
    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# crossbar program")?;
        writeln!(w, "bits = {}", self.bits)?;
        writeln!(w, "voltage_scale = {:.11e}", self.voltage_scale)?;
        writeln!(w, "lambda0 = {:.11e}", self.lambda0)?;
        writeln!(w, "lambda1 = {:.11e}", self.lambda1)?;
        writeln!(w, "lambda2 = {:.11e}", self.lambda2)?;
        let arrays = [
            ("C1", self.d1.as_ref().map(|d| &d.u)),
            ("C4", self.d1.as_ref().map(|d| &d.v)),
            ("C2", Some(&self.d2.u)),
            ("C5", Some(&self.d2.v)),
            ("C3", Some(&self.d3.u)),
            ("C6", Some(&self.d3.v)),
        ];
        for (name, m) in arrays {
            let Some(m) = m else { continue };
            writeln!(w, "[{name}] rows = {} cols = {}", m.nrows(), m.ncols())?;
            for row in m.row_iter() {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:.11e}")).collect();
                writeln!(w, "{}", cells.join(" "))?;
            }
        }
        if let Some(d1) = &self.d1 {
            writeln!(w, "beta_d1 = {:.11e}", d1.beta)?;
        }
        writeln!(w, "beta_g = {:.11e}", self.beta_g())?;
        Ok(())
    }
}

/// Per-stage programming request.
#[derive(Debug, Clone)]
pub struct StageSpec<'a> {
    /// `M(G_⟨k⟩)`, `2R × 2(K-k+1)`.
    pub tail: &'a RMatrix,
    /// `M(G_(k-1))`, absent in the first stage.
    pub head: Option<&'a RMatrix>,
    pub noise_variance: f64,
    pub range: ConductanceRange,
    pub bits: Bits,
    pub voltage_scale: f64,
}

/// Calibrates one module.
///
/// `D2` and `D3` both realise the tail matrix with a shared scale `β_G`;
/// `D1` realises the head with its own scale. The feedback pair satisfies
/// `λ1·λ2 = β_G²·σ²` with `λ1 = λ2 = β_G·σ`. If the full-range scale would
/// push `β_G·σ` above `α_max`, `β_G` is lowered to `α_max/σ`, which keeps
/// the mapping inside the range. `σ² = 0` programs open feedback
/// (`λ1 = λ2 = 0`). All conductances are then quantized.
pub fn program_stage(spec: &StageSpec<'_>) -> Result<CrossbarProgram> {
    let range = spec.range;
    if !(spec.noise_variance >= 0.0 && spec.noise_variance.is_finite()) {
        return Err(Error::Config("noise variance must be nonnegative".into()));
    }
    if !(spec.voltage_scale > 0.0) {
        return Err(Error::Config("voltage scale must be positive".into()));
    }
    let sigma = spec.noise_variance.sqrt();
    let mut beta_g = max_beta(spec.tail, &range)?;
    if sigma > 0.0 {
        beta_g = beta_g.min(range.max / sigma);
    }
    let lambda = beta_g * sigma;
    if sigma > 0.0 && lambda < range.min {
        return Err(Error::Calibration {
            product: lambda * lambda,
            bound: "below the minimum conductance squared",
        });
    }
    let ideal = map_matrix_with_beta(spec.tail, &range, beta_g)?;
    let d2 = ideal.quantized(spec.bits, &range)?;
    let d3 = ideal.quantized(spec.bits, &range)?;
    let d1 = match spec.head {
        Some(h) if h.ncols() > 0 => {
            if h.nrows() != spec.tail.nrows() {
                return Err(Error::Dimension {
                    what: "head matrix rows",
                    expected: spec.tail.nrows(),
                    got: h.nrows(),
                });
            }
            Some(map_matrix(h, &range)?.quantized(spec.bits, &range)?)
        }
        _ => None,
    };
    let feedback = if sigma > 0.0 {
        quantize_conductance(lambda, spec.bits, &range)?
    } else {
        0.0
    };
    let lambda0 = quantize_conductance(range.midpoint(), spec.bits, &range)?;
    CrossbarProgram::from_parts(
        d1,
        d2,
        d3,
        [lambda0, feedback, feedback],
        spec.voltage_scale,
        spec.bits,
    )
}

/// Node voltages of one module at steady state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleIO {
    pub v_in1: RVector,
    pub v_in2: RVector,
    /// First OA set outputs; undefined with open feedback (`λ1 = 0`).
    pub v1: Option<RVector>,
    pub v2: RVector,
    pub v_out: RVector,
}

/// Steady-state solve of the module.
pub fn solve_module(prog: &CrossbarProgram, v_in1: &RVector, v_in2: &RVector) -> Result<ModuleIO> {
    if v_in1.len() != prog.input_len() {
        return Err(Error::Dimension {
            what: "v_in1",
            expected: prog.input_len(),
            got: v_in1.len(),
        });
    }
    if v_in2.len() != prog.head_len() {
        return Err(Error::Dimension {
            what: "v_in2",
            expected: prog.head_len(),
            got: v_in2.len(),
        });
    }
    let d2 = prog.d2.difference();
    let d3 = prog.d3.difference();
    // drive = λ0 v_in1 - D1 v_in2
    let mut drive = v_in1 * prog.lambda0;
    if let Some(d1) = &prog.d1 {
        drive -= d1.difference() * v_in2;
    }
    let mut system = d3.tr_mul(&d2);
    let reg = prog.lambda1 * prog.lambda2;
    for i in 0..system.nrows() {
        system[(i, i)] += reg;
    }
    let rhs = d3.tr_mul(&drive);
    let lu = system.clone().lu();
    let mut v_out = lu.solve(&rhs).ok_or(Error::Singular("crossbar system matrix"))?;
    // One refinement step; the second KCL residual is this residual over λ1.
    if let Some(dx) = lu.solve(&(&rhs - &system * &v_out)) {
        v_out += dx;
    }
    let v2 = -&v_out;
    let v1 = (prog.lambda1 > 0.0).then(|| -(&drive + &d2 * &v2) / prog.lambda1);
    Ok(ModuleIO {
        v_in1: v_in1.clone(),
        v_in2: v_in2.clone(),
        v1,
        v2,
        v_out,
    })
}

/// An input voltage above the configured ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageWarning {
    pub input: &'static str,
    pub index: usize,
    pub volts: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInputs {
    pub v_in1: RVector,
    pub v_in2: RVector,
    pub warnings: Vec<VoltageWarning>,
}

/// Encodes `ỹ` and `ẽ_(k-1)` so that the module output equals `c·r_k`:
/// `v_in1 = (β_G c / λ0)·ỹ`, `v_in2 = (β_G c / β_1)·ẽ`.
pub fn encode_inputs(
    y_real: &RVector,
    e_head: &RVector,
    prog: &CrossbarProgram,
    voltage_ceiling: f64,
) -> Result<EncodedInputs> {
    if y_real.len() != prog.input_len() {
        return Err(Error::Dimension {
            what: "realified received vector",
            expected: prog.input_len(),
            got: y_real.len(),
        });
    }
    if e_head.len() != prog.head_len() {
        return Err(Error::Dimension {
            what: "realified head estimates",
            expected: prog.head_len(),
            got: e_head.len(),
        });
    }
    let scale = prog.beta_g() * prog.voltage_scale;
    let v_in1 = y_real * (scale / prog.lambda0);
    let v_in2 = match &prog.d1 {
        Some(d1) => e_head * (scale / d1.beta),
        None => RVector::zeros(0),
    };
    let mut warnings = Vec::new();
    for (input, v) in [("v_in1", &v_in1), ("v_in2", &v_in2)] {
        warnings.extend(v.iter().enumerate().filter(|(_, x)| x.abs() > voltage_ceiling).map(
            |(index, &volts)| VoltageWarning {
                input,
                index,
                volts,
            },
        ));
    }
    Ok(EncodedInputs {
        v_in1,
        v_in2,
        warnings,
    })
}

/// `v_out / c`.
pub fn decode_output(v_out: &RVector, voltage_scale: f64) -> RVector {
    v_out / voltage_scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const US: f64 = 1e-6;

    fn rand_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> RMatrix {
        RMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn zero_entry_maps_to_min_pair() {
        let o = RMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let m = map_matrix(&o, &ConductanceRange::default()).unwrap();
        assert_eq!(m.u[(0, 0)], 0.1 * US);
        assert_eq!(m.v[(0, 0)], 0.1 * US);
    }

    #[test]
    fn hand_mapped_example() {
        let o = RMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 2.0]);
        let m = map_matrix(&o, &ConductanceRange::default()).unwrap();
        assert!((m.beta - 14.95 * US).abs() < 1e-18);
        let u = [30.0, 0.1, 0.1, 30.0];
        let v = [15.05, 30.0, 0.1, 0.1];
        for (i, (&uu, &vv)) in u.iter().zip(&v).enumerate() {
            let (r, c) = (i / 2, i % 2);
            assert!((m.u[(r, c)] - uu * US).abs() < 1e-17);
            assert!((m.v[(r, c)] - vv * US).abs() < 1e-17);
        }
    }

    #[test]
    fn all_zero_matrix_is_degenerate() {
        let o = RMatrix::zeros(2, 3);
        assert_eq!(map_matrix(&o, &ConductanceRange::default()), Err(Error::DegenerateMatrix));
    }

    #[test]
    fn quantize_identity_and_two_levels() {
        let r = ConductanceRange::default();
        assert_eq!(quantize_conductance(12.345 * US, Bits::Infinite, &r).unwrap(), 12.345 * US);
        assert_eq!(quantize_conductance(10.0 * US, Bits::Finite(1), &r).unwrap(), r.min);
        assert_eq!(quantize_conductance(20.0 * US, Bits::Finite(1), &r).unwrap(), r.max);
        assert!(matches!(
            quantize_conductance(31.0 * US, Bits::Finite(4), &r),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn six_bit_half_step_bound() {
        let r = ConductanceRange::default();
        let bound = 29.9 * US / (2.0 * 63.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100_000 {
            let g = rng.random_range(r.min..=r.max);
            let q = quantize_conductance(g, Bits::Finite(6), &r).unwrap();
            assert!((q - g).abs() <= bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn bits_parse_and_display() {
        assert_eq!("inf".parse::<Bits>().unwrap(), Bits::Infinite);
        assert_eq!("6".parse::<Bits>().unwrap(), Bits::Finite(6));
        assert!("0".parse::<Bits>().is_err());
        assert!("six".parse::<Bits>().is_err());
        assert_eq!(Bits::Finite(8).to_string(), "8");
        assert_eq!(Bits::Finite(3).levels(), Some(8));
    }

    fn stage<'a>(tail: &'a RMatrix, head: Option<&'a RMatrix>, s2: f64, bits: Bits) -> StageSpec<'a> {
        StageSpec {
            tail,
            head,
            noise_variance: s2,
            range: ConductanceRange::default(),
            bits,
            voltage_scale: 0.1,
        }
    }

    #[test]
    fn symmetric_feedback_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tail = rand_matrix(&mut rng, 8, 4);
        let prog = program_stage(&stage(&tail, None, 0.04, Bits::Infinite)).unwrap();
        let want = prog.beta_g() * 0.2;
        assert!((prog.lambda1 - want).abs() < 1e-20);
        assert_eq!(prog.lambda1, prog.lambda2);
        assert!((prog.lambda1 * prog.lambda2 - prog.beta_g().powi(2) * 0.04).abs() < 1e-24);
        assert!(prog.d1.is_none());
        assert_eq!(prog.head_len(), 0);
    }

    #[test]
    fn scale_lowered_when_feedback_would_exceed_range() {
        let tail = RMatrix::from_element(4, 2, 0.25);
        let prog = program_stage(&stage(&tail, None, 1.0, Bits::Infinite)).unwrap();
        assert!((prog.lambda1 - 30.0 * US).abs() < 1e-18);
        assert!((prog.beta_g() - 30.0 * US).abs() < 1e-18);
        let d = prog.d2.difference();
        assert!((d - &tail * prog.beta_g()).amax() < 1e-18);
    }

    #[test]
    fn calibration_infeasible_below_range() {
        let tail = RMatrix::from_element(4, 2, 100.0);
        let err = program_stage(&stage(&tail, None, 1e-6, Bits::Infinite)).unwrap_err();
        assert!(matches!(err, Error::Calibration { .. }));
    }

    #[test]
    fn stored_difference_matches_scaled_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tail = rand_matrix(&mut rng, 12, 6);
        let head = rand_matrix(&mut rng, 12, 4);
        let prog = program_stage(&stage(&tail, Some(&head), 0.1, Bits::Infinite)).unwrap();
        let eps = 4.0 * f64::EPSILON * 30.0 * US;
        assert!((prog.d2.difference() - &tail * prog.beta_g()).amax() <= eps);
        assert!((prog.d3.difference() - &tail * prog.beta_g()).amax() <= eps);
        let d1 = prog.d1.as_ref().unwrap();
        assert!((d1.difference() - &head * d1.beta).amax() <= eps);
    }

    #[test]
    fn quantized_program_stays_on_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tail = rand_matrix(&mut rng, 8, 4);
        let head = rand_matrix(&mut rng, 8, 2);
        let r = ConductanceRange::default();
        let prog = program_stage(&stage(&tail, Some(&head), 0.1, Bits::Finite(4))).unwrap();
        let step = r.span() / 15.0;
        let on_level = |g: f64| {
            let t = (g - r.min) / step;
            (t - t.round()).abs() < 1e-9 && g >= r.min && g <= r.max
        };
        for m in [&prog.d2.u, &prog.d2.v, &prog.d3.u, &prog.d3.v] {
            assert!(m.iter().all(|&g| on_level(g)));
        }
        assert!(on_level(prog.lambda0) && on_level(prog.lambda1) && on_level(prog.lambda2));
    }

    #[test]
    fn identity_module_scales_input() {
        let r = ConductanceRange::default();
        let ident = map_matrix(&RMatrix::identity(3, 3), &r).unwrap();
        let beta = ident.beta;
        let prog =
            CrossbarProgram::from_parts(None, ident.clone(), ident, [15.0 * US, 0.0, 0.0], 0.1, Bits::Infinite)
                .unwrap();
        let v_in1 = RVector::from_vec(vec![0.1, -0.2, 0.05]);
        let io = solve_module(&prog, &v_in1, &RVector::zeros(0)).unwrap();
        let want = &v_in1 * (15.0 * US / beta);
        assert!((io.v_out - want).norm() < 1e-12);
        assert!(io.v1.is_none());
    }

    #[test]
    fn zero_inputs_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tail = rand_matrix(&mut rng, 8, 4);
        let head = rand_matrix(&mut rng, 8, 2);
        let prog = program_stage(&stage(&tail, Some(&head), 0.1, Bits::Finite(5))).unwrap();
        let io = solve_module(&prog, &RVector::zeros(8), &RVector::zeros(2)).unwrap();
        assert_eq!(io.v_out, RVector::zeros(4));
    }

    #[test]
    fn solve_rejects_bad_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tail = rand_matrix(&mut rng, 8, 4);
        let prog = program_stage(&stage(&tail, None, 0.1, Bits::Infinite)).unwrap();
        assert!(solve_module(&prog, &RVector::zeros(7), &RVector::zeros(0)).is_err());
        assert!(solve_module(&prog, &RVector::zeros(8), &RVector::zeros(2)).is_err());
    }

    #[test]
    fn encode_unit_scaling_and_empty_head() {
        let r = ConductanceRange::default();
        let ident = map_matrix(&RMatrix::identity(2, 2), &r).unwrap();
        let beta = ident.beta;
        let c = 0.1;
        let prog = CrossbarProgram::from_parts(
            None,
            ident.clone(),
            ident,
            [beta * c, 1.0 * US, 1.0 * US],
            c,
            Bits::Infinite,
        )
        .unwrap();
        let y = RVector::from_vec(vec![0.3, -0.4]);
        let enc = encode_inputs(&y, &RVector::zeros(0), &prog, 1.0).unwrap();
        assert!((enc.v_in1 - &y).norm() < 1e-15);
        assert!(enc.v_in2.is_empty());
        assert!(enc.warnings.is_empty());
        let loud = RVector::from_vec(vec![3.0, 0.0]);
        let enc = encode_inputs(&loud, &RVector::zeros(0), &prog, 1.0).unwrap();
        assert_eq!(enc.warnings.len(), 1);
        assert_eq!(enc.warnings[0].index, 0);
    }

    #[test]
    fn decode_is_linear() {
        let v = RVector::from_vec(vec![0.1, -0.3]);
        assert_eq!(decode_output(&v, 1.0), v);
        assert!((decode_output(&(&v * 2.0), 0.1) - decode_output(&v, 0.1) * 2.0).norm() < 1e-15);
    }

    #[test]
    fn joule_power_scales_with_square_of_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tail = rand_matrix(&mut rng, 8, 4);
        let head = rand_matrix(&mut rng, 8, 2);
        let prog = program_stage(&stage(&tail, Some(&head), 0.1, Bits::Infinite)).unwrap();
        let a = RVector::from_fn(8, |i, _| 0.01 * i as f64);
        let b = RVector::from_vec(vec![0.02, -0.05]);
        let p1 = prog.joule_power(&solve_module(&prog, &a, &b).unwrap());
        let p2 = prog.joule_power(&solve_module(&prog, &(&a * 2.0), &(&b * 2.0)).unwrap());
        assert!(p1 > 0.0);
        assert!((p2 / p1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn dump_lists_every_array() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tail = rand_matrix(&mut rng, 4, 2);
        let head = rand_matrix(&mut rng, 4, 2);
        let prog = program_stage(&stage(&tail, Some(&head), 0.1, Bits::Finite(6))).unwrap();
        let mut buf = Vec::new();
        prog.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for key in ["[C1]", "[C2]", "[C3]", "[C4]", "[C5]", "[C6]", "lambda0 =", "beta_g ="] {
            assert!(text.contains(key), "{key}");
        }
        assert!(text.contains("bits = 6"));
        // 12 significant digits
        assert!(text.contains(&format!("{:.11e}", prog.lambda0)));
    }
}
