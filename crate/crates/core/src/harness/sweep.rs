use super::config::{ExperimentConfig, Precision};
use super::mix_seed;
use crate::detector::{build_detector, detect, DetectorConfig};
use crate::mimo::{
    build_constellation, generate_channel, noise_variance_for_snr, random_bits, transmit,
    Constellation, MimoConfig,
};
use crate::sic::sic_detect;
use crate::{CVector, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::time::Instant;

const CHANNEL_STREAM: u64 = 0;
const BITS_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const BATCH: u64 = 256;

/// Header of the BER CSV, schema version 1.
pub const BER_CSV_HEADER: &str = "snr_db,precision,trials,bits_sent,bit_errors,ber";

/// One (SNR, precision) point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub precision: Precision,
    pub trials: u64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// Seconds spent on the whole SNR point. Not written to CSV.
    pub wall_time: f64,
}

/// Bit errors of one trial, one entry per configured precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bits_sent: u64,
    pub bit_errors: Vec<u64>,
}

struct Setup {
    mimo: MimoConfig,
    constellation: Constellation,
    detector: DetectorConfig,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            mimo: MimoConfig::equal_power(cfg.users, cfg.antennas, 0.0, cfg.modulation)?,
            constellation: build_constellation(cfg.modulation, cfg.voltage_scale)?,
            detector: DetectorConfig {
                range: cfg.range()?,
                structure: cfg.structure,
                voltage_scale: cfg.voltage_scale,
                ..DetectorConfig::default()
            },
        })
    }
}

fn label_errors(a: &CVector, b: &CVector, c: &Constellation) -> Result<u64> {
    a.iter().zip(b.iter()).try_fold(0u64, |acc, (&x, &y)| {
        Ok(acc + (c.label_of(x)? ^ c.label_of(y)?).count_ones() as u64)
    })
}

fn trial_impl(
    cfg: &ExperimentConfig,
    setup: &Setup,
    snr_db: f64,
    trial: u64,
) -> Result<TrialOutcome> {
    let chan = generate_channel(&setup.mimo, mix_seed(cfg.seed, trial, CHANNEL_STREAM));
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, trial, BITS_STREAM));
    let bits = random_bits(&mut rng, cfg.bits_per_trial() as usize);
    let s = setup.constellation.modulate(&bits)?;
    let noise_variance = noise_variance_for_snr(cfg.users, snr_db);
    let rx = transmit(&chan, &s, noise_variance, mix_seed(cfg.seed, trial, NOISE_STREAM))?;
    let bit_errors = cfg
        .precisions
        .iter()
        .map(|p| {
            let estimate = match *p {
                Precision::Digital => {
                    sic_detect(&chan.f, &rx.y, noise_variance, &setup.constellation)?.0
                }
                Precision::Memristor(bits) => {
                    let dcfg = DetectorConfig {
                        bits,
                        ..setup.detector.clone()
                    };
                    let det = build_detector(&chan, noise_variance, &setup.constellation, &dcfg)?;
                    detect(&det, &rx.y)?.symbols
                }
            };
            label_errors(&estimate, &s, &setup.constellation)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialOutcome {
        bits_sent: bits.len() as u64,
        bit_errors,
    })
}

/// Runs trial `trial` at `snr_db` for every precision in `cfg`.
///
/// The channel, bits and normalized noise depend only on `(seed, trial)`,
/// so every SNR point and precision sees common random numbers.
pub fn run_trial(cfg: &ExperimentConfig, snr_db: f64, trial: u64) -> Result<TrialOutcome> {
    trial_impl(cfg, &Setup::new(cfg)?, snr_db, trial)
}

fn sweep_point(cfg: &ExperimentConfig, setup: &Setup, snr_db: f64) -> Result<Vec<BerRecord>> {
    let start = Instant::now();
    let np = cfg.precisions.len();
    let mut done = 0u64;
    let mut bits_sent = 0u64;
    let mut errors = vec![0u64; np];
    while done < cfg.trials {
        let end = match cfg.max_errors {
            Some(_) => (done + BATCH).min(cfg.trials),
            None => cfg.trials,
        };
        let outcomes = (done..end)
            .into_par_iter()
            .map(|t| trial_impl(cfg, setup, snr_db, t))
            .collect::<Result<Vec<_>>>()?;
        for o in outcomes {
            bits_sent += o.bits_sent;
            for (acc, e) in errors.iter_mut().zip(o.bit_errors) {
                *acc += e;
            }
        }
        done = end;
        if cfg.max_errors.is_some_and(|n| errors.iter().all(|&e| e >= n)) {
            break;
        }
    }
    let wall_time = start.elapsed().as_secs_f64();
    Ok(cfg
        .precisions
        .iter()
        .zip(errors)
        .map(|(&precision, bit_errors)| BerRecord {
            snr_db,
            precision,
            trials: done,
            bits_sent,
            bit_errors,
            ber: bit_errors as f64 / bits_sent as f64,
            wall_time,
        })
        .collect())
}

/// BER for every (SNR, precision) pair, ordered by SNR then precision as
/// listed in `cfg`. Results do not depend on the thread count.
pub fn ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    let setup = Setup::new(cfg)?;
    let run = || -> Result<Vec<BerRecord>> {
        let mut out = Vec::new();
        for &snr in &cfg.snr_db {
            out.extend(sweep_point(cfg, &setup, snr)?);
        }
        Ok(out)
    };
    if cfg.threads == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)
    }
}

/// Writes records as CSV with the v1 header.
pub fn write_ber_csv<W: Write>(records: &[BerRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let fail = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(BER_CSV_HEADER.split(',')).map_err(fail)?;
    for r in records {
        w.write_record([
            r.snr_db.to_string(),
            r.precision.to_string(),
            r.trials.to_string(),
            r.bits_sent.to_string(),
            r.bit_errors.to_string(),
            format!("{:e}", r.ber),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(())
}

/// Reads CSV written by [`write_ber_csv`]. `wall_time` comes back as zero.
pub fn read_ber_csv<R: Read>(reader: R) -> Result<Vec<BerRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    let bad = |what: &str| Error::Config(format!("csv: bad {what}"));
    let header = rd
        .headers()
        .map_err(|e| Error::Config(format!("csv: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != BER_CSV_HEADER {
        return Err(Error::Config(format!("csv: unexpected header {header:?}")));
    }
    rd.records()
        .map(|row| {
            let row = row.map_err(|e| Error::Config(format!("csv: {e}")))?;
            let field = |i: usize| row.get(i).ok_or_else(|| bad("row"));
            Ok(BerRecord {
                snr_db: field(0)?.parse().map_err(|_| bad("snr_db"))?,
                precision: field(1)?.parse()?,
                trials: field(2)?.parse().map_err(|_| bad("trials"))?,
                bits_sent: field(3)?.parse().map_err(|_| bad("bits_sent"))?,
                bit_errors: field(4)?.parse().map_err(|_| bad("bit_errors"))?,
                ber: field(5)?.parse().map_err(|_| bad("ber"))?,
                wall_time: 0.0,
            })
        })
        .collect()
}
