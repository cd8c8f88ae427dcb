//! Hybrid analog-digital slicer.
//!
//! `W - 1` strict comparators turn the input voltage into a thermometer code
//! `p`. In the directly-select structure `p` drives the select lines of a
//! `2^(W-1)`-channel multiplexer as-is. In the indirectly-select structure a
//! combinational block first compresses `p` into `q` of `log2 W` bits, which
//! then drives a `W`-channel multiplexer. Either way the multiplexer channels
//! are loaded with the levels of `S_value` so that the output is the level
//! nearest to the input, with exact-threshold inputs going to the lower
//! level.
//!
//! For `W = 4` the compression is `q1 = p2`, `q2 = p1 ∧ ¬p3`. In general `q`
//! is the reflected Gray code of the thermometer weight, most significant
//! bit first, and the multiplexer reads `q` with `q1` as its least
//! significant select line.

use crate::mimo::Constellation;
use crate::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Which select path the slicer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Deserialize)]
#[serde(try_from = "String")]
pub enum Structure {
    DirectSelect,
    IndirectSelect,
}

impl Structure {
    /// Multiplexer size needed for `w` levels.
    pub fn mux_channels(&self, w: usize) -> usize {
        match self {
            Structure::DirectSelect => 1 << (w - 1),
            Structure::IndirectSelect => w,
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::DirectSelect => "direct",
            Structure::IndirectSelect => "indirect",
        })
    }
}

impl TryFrom<String> for Structure {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" | "directselect" | "direct-select" => Ok(Structure::DirectSelect),
            "indirect" | "indirectselect" | "indirect-select" => Ok(Structure::IndirectSelect),
            other => Err(Error::Config(format!("unknown slicer structure '{other}'"))),
        }
    }
}

/// Midpoints between consecutive levels.
pub fn make_thresholds(levels: &[f64]) -> Result<Vec<f64>> {
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("slicer levels must be strictly increasing".into()));
    }
    Ok(levels.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect())
}

/// Comparator outputs, `p_w = [v_sin > z_w]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComparatorWord(pub Vec<u8>);

impl ComparatorWord {
    /// No 1 follows a 0.
    pub fn is_thermometer(&self) -> bool {
        self.0.windows(2).all(|w| w[0] >= w[1]) && self.0.iter().all(|&b| b <= 1)
    }

    /// Number of comparators that fired.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    fn checked_weight(&self) -> Result<usize> {
        if self.is_thermometer() {
            Ok(self.weight())
        } else {
            Err(Error::InvalidSelect(self.0.clone()))
        }
    }
}

/// Output of the combinational logic, `log2 W` bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompressedWord(pub Vec<u8>);

impl fmt::Display for ComparatorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bits_string(&self.0))
    }
}

impl fmt::Display for CompressedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bits_string(&self.0))
    }
}

/// Runs the comparator bank.
pub fn comparator_bank(v_sin: f64, thresholds: &[f64]) -> ComparatorWord {
    ComparatorWord(thresholds.iter().map(|&z| u8::from(v_sin > z)).collect())
}

/// Channel selected when `p` drives the select lines directly (`p1` is the
/// least significant line): `2^weight - 1`.
pub fn direct_select_index(p: &ComparatorWord) -> Result<usize> {
    let w = p.checked_weight()?;
    Ok((1usize << w) - 1)
}

/// Compresses a thermometer code into `log2 W` select bits.
pub fn logic_compress(p: &ComparatorWord) -> Result<CompressedWord> {
    let weight = p.checked_weight()?;
    let levels = p.0.len() + 1;
    if !levels.is_power_of_two() {
        return Err(Error::Config(format!("{levels} levels is not a power of two")));
    }
    let nbits = levels.trailing_zeros() as usize;
    let gray = weight ^ (weight >> 1);
    Ok(CompressedWord(
        (0..nbits).map(|i| ((gray >> (nbits - 1 - i)) & 1) as u8).collect(),
    ))
}

/// Channel selected by `q`, read with `q1` least significant.
pub fn indirect_select_index(q: &CompressedWord) -> usize {
    q.0.iter()
        .enumerate()
        .map(|(i, &b)| (b as usize) << i)
        .sum()
}

/// Slicer parameters: levels, thresholds and select structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicerConfig {
    levels: Vec<f64>,
    thresholds: Vec<f64>,
    structure: Structure,
    reference_voltage: f64,
    /// Multiplexer inputs: `channels[i]` is the level index wired to
    /// channel `i`, `None` for unused channels.
    channels: Vec<Option<usize>>,
}

impl SlicerConfig {
    pub fn new(levels: Vec<f64>, structure: Structure, reference_voltage: f64) -> Result<Self> {
        let w = levels.len();
        if w < 2 || !w.is_power_of_two() {
            return Err(Error::Config(format!(
                "slicer needs a power-of-two number of levels >= 2 (got {w})"
            )));
        }
        if w > 16 {
            return Err(Error::Config(format!("{w} levels exceeds the supported maximum of 16")));
        }
        let thresholds = make_thresholds(&levels)?;
        let mut channels = vec![None; structure.mux_channels(w)];
        for weight in 0..w {
            let p = ComparatorWord((0..w - 1).map(|i| u8::from(i < weight)).collect());
            channels[select_channel(structure, &p)?] = Some(weight);
        }
        Ok(Self {
            levels,
            thresholds,
            structure,
            reference_voltage,
            channels,
        })
    }

    /// Slicer for one axis of a constellation, levels in volts.
    pub fn for_constellation(c: &Constellation, structure: Structure) -> Result<Self> {
        Self::new(c.per_axis_levels(), structure, c.reference_voltage())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn reference_voltage(&self) -> f64 {
        self.reference_voltage
    }

    /// Number of multiplexer input channels.
    pub fn mux_channels(&self) -> usize {
        self.channels.len()
    }

    /// Level index wired to each multiplexer channel.
    pub fn channel_map(&self) -> &[Option<usize>] {
        &self.channels
    }

    pub fn comparator_count(&self) -> usize {
        self.thresholds.len()
    }
}

fn select_channel(structure: Structure, p: &ComparatorWord) -> Result<usize> {
    match structure {
        Structure::DirectSelect => direct_select_index(p),
        Structure::IndirectSelect => Ok(indirect_select_index(&logic_compress(p)?)),
    }
}

/// Everything the slicer produced for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceOutcome {
    pub p: ComparatorWord,
    pub q: Option<CompressedWord>,
    pub channel: usize,
    pub level_index: usize,
    pub v_sout: f64,
}

/// Full slicer path: comparators, select logic, multiplexer, follower.
pub fn slice(v_sin: f64, cfg: &SlicerConfig) -> SliceOutcome {
    let p = comparator_bank(v_sin, &cfg.thresholds);
    let q = match cfg.structure {
        Structure::DirectSelect => None,
        Structure::IndirectSelect => {
            Some(logic_compress(&p).expect("comparator bank emits thermometer codes"))
        }
    };
    let channel = match &q {
        Some(q) => indirect_select_index(q),
        None => direct_select_index(&p).expect("comparator bank emits thermometer codes"),
    };
    let level_index = cfg.channels[channel].expect("every reachable channel is loaded");
    SliceOutcome {
        p,
        q,
        channel,
        level_index,
        v_sout: cfg.levels[level_index],
    }
}

/// Output voltage of the slicer.
pub fn slicer_eval(v_sin: f64, cfg: &SlicerConfig) -> f64 {
    slice(v_sin, cfg).v_sout
}

/// Cell of the threshold partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interval {
    /// Below `z_1`.
    Below,
    /// Between `z_w` and `z_{w+1}` (1-based `w`).
    Between(usize),
    /// Above `z_{W-1}`.
    Above(usize),
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Below => write!(f, "< z1"),
            Interval::Between(w) => write!(f, "z{} ~ z{}", w, w + 1),
            Interval::Above(w) => write!(f, "> z{w}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub interval: Interval,
    pub p: ComparatorWord,
    pub q: Option<CompressedWord>,
    pub channel: usize,
    /// 0-based index into `S_value` (`x_{index+1}`).
    pub level_index: usize,
    pub v_sout: f64,
}

/// One row per cell of the threshold partition, evaluated through the
/// slicer itself at a representative point inside the cell.
pub fn truth_table(cfg: &SlicerConfig) -> Vec<TruthRow> {
    let w = cfg.levels.len();
    (0..w)
        .map(|cell| {
            let interval = match cell {
                0 => Interval::Below,
                c if c == w - 1 => Interval::Above(w - 1),
                c => Interval::Between(c),
            };
            let probe = cfg.levels[cell];
            let out = slice(probe, cfg);
            TruthRow {
                interval,
                p: out.p,
                q: out.q,
                channel: out.channel,
                level_index: out.level_index,
                v_sout: out.v_sout,
            }
        })
        .collect()
}

fn bits_string(bits: &[u8]) -> String {
    let inner: Vec<String> = bits.iter().map(|b| b.to_string()).collect();
    format!("[{}]", inner.join(","))
}

/// Aligned text rendering of a truth table.
pub fn format_truth_table_text(rows: &[TruthRow]) -> String {
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.interval.to_string(),
                bits_string(&r.p.0),
                r.q.as_ref().map_or("-".to_string(), |q| bits_string(&q.0)),
                r.channel.to_string(),
                format!("x{} = {:+.6} V", r.level_index + 1, r.v_sout),
            ]
        })
        .collect();
    let header = ["v_sin", "p", "q", "channel", "v_sout"];
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |row: &[&str]| -> String {
        row.iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&header);
    out.push('\n');
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        out.push_str(&line(&refs));
        out.push('\n');
    }
    out
}

/// CSV rendering: `interval,p,q,channel,level,v_sout`.
pub fn format_truth_table_csv(rows: &[TruthRow]) -> String {
    let mut out = String::from("interval,p,q,channel,level,v_sout\n");
    for r in rows {
        let p: String = r.p.0.iter().map(|b| b.to_string()).collect();
        let q: String = r
            .q
            .as_ref()
            .map_or(String::new(), |q| q.0.iter().map(|b| b.to_string()).collect());
        out.push_str(&format!(
            "{},{},{},{},x{},{:.12e}\n",
            r.interval,
            p,
            q,
            r.channel,
            r.level_index + 1,
            r.v_sout
        ));
    }
    out
}
