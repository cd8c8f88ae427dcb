use super::config::PerfConfig;
use super::mix_seed;
use crate::detector::{build_detector, detect, DetectorConfig};
use crate::mimo::{
    build_constellation, noise_variance_for_snr, random_bits, rayleigh_matrix, transmit,
    ChannelRealization,
};
use crate::perf::{convergence_time, estimate_energy, PerfReport};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Timing and energy of one detection at the configured operating point.
///
/// The memristor Joule term uses the steady-state node voltages of a real
/// detection; every other term is count × power × convergence time.
pub fn perf_report(cfg: &PerfConfig) -> Result<PerfReport> {
    if cfg.users == 0 || cfg.antennas < cfg.users {
        return Err(Error::Config(format!(
            "need 1 <= users <= antennas, got {}x{}",
            cfg.users, cfg.antennas
        )));
    }
    let dcfg = DetectorConfig {
        bits: cfg.bits,
        structure: cfg.structure,
        ..DetectorConfig::default()
    };
    let constellation = build_constellation(cfg.modulation, dcfg.voltage_scale)?;
    let chan = ChannelRealization::from_transfer(rayleigh_matrix(
        cfg.antennas,
        cfg.users,
        mix_seed(cfg.seed, 0, 0),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0, 1));
    let bits = random_bits(&mut rng, cfg.users * constellation.bits_per_symbol());
    let s = constellation.modulate(&bits)?;
    let noise_variance = noise_variance_for_snr(cfg.users, cfg.snr_db);
    let rx = transmit(&chan, &s, noise_variance, mix_seed(cfg.seed, 0, 2))?;
    let det = build_detector(&chan, noise_variance, &constellation, &dcfg)?;
    let out = detect(&det, &rx.y)?;
    let time = convergence_time(cfg.users, &cfg.timing);
    let energy = estimate_energy(&det, &out.modules, time, &cfg.energy);
    Ok(PerfReport::new(
        "memristor MMSE-SIC",
        (cfg.users, cfg.antennas),
        cfg.timing,
        cfg.headline_flops(),
        energy,
    ))
}

/// The 32×64 16-QAM report with default parts.
pub fn default_perf_report() -> Result<PerfReport> {
    perf_report(&PerfConfig::default())
}
