//! Uplink system model: `y = H·Λ·s + n = F·s + n`.
//!
//! Channels are i.i.d. Rayleigh (CN(0, 1) entries), noise is circularly
//! symmetric with per-entry variance `σ_n²`, and symbols are drawn from a
//! Gray-mapped square QAM constellation with unit average energy.

use crate::{CMatrix, CVector, Error, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Tolerance used to recognise an exact constellation level.
const LEVEL_TOL: f64 = 1e-9;

/// System dimensions, transmit powers and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoConfig {
    num_users: usize,
    num_bs_antennas: usize,
    tx_powers: Vec<f64>,
    noise_variance: f64,
    modulation_order: usize,
}

impl MimoConfig {
    pub fn new(
        num_users: usize,
        num_bs_antennas: usize,
        tx_powers: Vec<f64>,
        noise_variance: f64,
        modulation_order: usize,
    ) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::Config("need at least one user".into()));
        }
        if num_bs_antennas <= num_users {
            return Err(Error::Config(format!(
                "base station antennas ({num_bs_antennas}) must exceed users ({num_users})"
            )));
        }
        if tx_powers.len() != num_users {
            return Err(Error::Dimension {
                what: "transmit power list",
                expected: num_users,
                got: tx_powers.len(),
            });
        }
        if tx_powers.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Config("transmit powers must be positive".into()));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::Config("noise variance must be nonnegative".into()));
        }
        check_order(modulation_order)?;
        Ok(Self {
            num_users,
            num_bs_antennas,
            tx_powers,
            noise_variance,
            modulation_order,
        })
    }

    /// All users transmit with unit power.
    pub fn equal_power(
        num_users: usize,
        num_bs_antennas: usize,
        noise_variance: f64,
        modulation_order: usize,
    ) -> Result<Self> {
        Self::new(
            num_users,
            num_bs_antennas,
            vec![1.0; num_users],
            noise_variance,
            modulation_order,
        )
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_bs_antennas(&self) -> usize {
        self.num_bs_antennas
    }

    pub fn tx_powers(&self) -> &[f64] {
        &self.tx_powers
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn modulation_order(&self) -> usize {
        self.modulation_order
    }

    /// Same system with a different noise level.
    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(
            self.num_users,
            self.num_bs_antennas,
            self.tx_powers.clone(),
            noise_variance,
            self.modulation_order,
        )
    }
}

/// Noise variance for a given SNR in dB, with `SNR = K / σ_n²`.
///
/// With unit-power users and CN(0, 1) channel entries, `K` is the expected
/// received signal power per antenna.
pub fn noise_variance_for_snr(num_users: usize, snr_db: f64) -> f64 {
    num_users as f64 / 10f64.powf(snr_db / 10.0)
}

fn check_order(order: usize) -> Result<()> {
    match order {
        4 | 16 | 64 => Ok(()),
        _ => Err(Error::Config(format!(
            "unsupported modulation order {order} (expected 4, 16 or 64)"
        ))),
    }
}

/// One channel draw: `H` and the power-scaled transfer matrix `F = H·Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMatrix,
    pub f: CMatrix,
}

impl ChannelRealization {
    /// Wraps a known transfer matrix with unit powers (`H = F`).
    pub fn from_transfer(f: CMatrix) -> Self {
        Self { h: f.clone(), f }
    }

    pub fn num_users(&self) -> usize {
        self.f.ncols()
    }

    pub fn num_bs_antennas(&self) -> usize {
        self.f.nrows()
    }
}

/// Draws `H` with i.i.d. CN(0, 1) entries and forms `F = H·diag(√λ_k)`.
pub fn generate_channel(cfg: &MimoConfig, seed: u64) -> ChannelRealization {
    let h = rayleigh_matrix(cfg.num_bs_antennas, cfg.num_users, seed);
    let mut f = h.clone();
    for (j, &p) in cfg.tx_powers.iter().enumerate() {
        let scale = p.sqrt();
        f.column_mut(j).iter_mut().for_each(|z| *z *= scale);
    }
    ChannelRealization { h, f }
}

/// `rows × cols` matrix of i.i.d. CN(0, 1) entries. Unlike
/// [`generate_channel`] this accepts any shape, including square ones.
pub fn rayleigh_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
}

/// Circularly symmetric complex Gaussian with total variance `var`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Received vector together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    pub y: CVector,
    pub true_symbols: CVector,
    pub noise: CVector,
}

/// Passes `s` through the channel and adds noise of per-entry variance
/// `noise_variance`.
pub fn transmit(
    chan: &ChannelRealization,
    s: &CVector,
    noise_variance: f64,
    seed: u64,
) -> Result<ReceivedSignal> {
    if s.len() != chan.num_users() {
        return Err(Error::Dimension {
            what: "symbol vector",
            expected: chan.num_users(),
            got: s.len(),
        });
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::Config("noise variance must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = CVector::from_fn(chan.num_bs_antennas(), |_, _| {
        complex_gaussian(&mut rng, noise_variance)
    });
    let y = &chan.f * s + &noise;
    Ok(ReceivedSignal {
        y,
        true_symbols: s.clone(),
        noise,
    })
}

/// Gray-mapped square QAM with unit average symbol energy.
///
/// Labels are `log2(order)` bits, most significant first. The first half
/// of the label Gray-codes the in-phase level index, the second half the
/// quadrature level index.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    /// Points indexed by label.
    points: Vec<C64>,
    /// Per-axis levels in symbol units, ascending.
    unit_levels: Vec<f64>,
    reference_voltage: f64,
}

/// Builds the `order`-QAM constellation; per-axis voltage levels are the
/// symbol levels scaled by `v0`.
pub fn build_constellation(order: usize, v0: f64) -> Result<Constellation> {
    check_order(order)?;
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(Error::Config("reference voltage must be positive".into()));
    }
    let w = (order as f64).sqrt().round() as usize;
    let norm = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
    let unit_levels: Vec<f64> = (0..w)
        .map(|i| (2.0 * i as f64 - (w as f64 - 1.0)) / norm)
        .collect();
    let half_bits = w.trailing_zeros();
    let points = (0..order)
        .map(|label| {
            let gi = label >> half_bits;
            let gq = label & (w - 1);
            C64::new(unit_levels[gray_decode(gi)], unit_levels[gray_decode(gq)])
        })
        .collect();
    Ok(Constellation {
        order,
        points,
        unit_levels,
        reference_voltage: v0,
    })
}

pub(crate) fn gray_encode(i: usize) -> usize {
    i ^ (i >> 1)
}

pub(crate) fn gray_decode(mut g: usize) -> usize {
    let mut i = g;
    while g > 1 {
        g >>= 1;
        i ^= g;
    }
    i
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Points indexed by their bit label.
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// Levels per axis, `W = √order`.
    pub fn levels_per_axis(&self) -> usize {
        self.unit_levels.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    /// Per-axis levels in symbol units (ascending).
    pub fn unit_levels(&self) -> &[f64] {
        &self.unit_levels
    }

    /// Per-axis levels in volts (ascending), i.e. `S_value`.
    pub fn per_axis_levels(&self) -> Vec<f64> {
        self.unit_levels
            .iter()
            .map(|x| x * self.reference_voltage)
            .collect()
    }

    pub fn reference_voltage(&self) -> f64 {
        self.reference_voltage
    }

    /// Maps bits (one `u8` per bit, 0 or 1) to symbols.
    pub fn modulate(&self, bits: &[u8]) -> Result<CVector> {
        let m = self.bits_per_symbol();
        if bits.len() % m != 0 {
            return Err(Error::Dimension {
                what: "bit vector length (multiple of bits per symbol)",
                expected: bits.len().div_ceil(m) * m,
                got: bits.len(),
            });
        }
        let syms = bits
            .chunks(m)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                self.points[label]
            })
            .collect::<Vec<_>>();
        Ok(CVector::from_vec(syms))
    }

    /// Index of the per-axis level equal to `x` (symbol units).
    pub fn axis_index(&self, x: f64) -> Option<usize> {
        self.unit_levels
            .iter()
            .position(|&l| (l - x).abs() <= LEVEL_TOL)
    }

    /// Bit label of an exact constellation point.
    pub fn label_of(&self, z: C64) -> Result<usize> {
        let (i, q) = self
            .axis_index(z.re)
            .zip(self.axis_index(z.im))
            .ok_or_else(|| Error::NotAConstellationPoint(format!("{z}")))?;
        let half_bits = self.levels_per_axis().trailing_zeros();
        Ok((gray_encode(i) << half_bits) | gray_encode(q))
    }

    /// Symbol from per-axis level indices.
    pub fn point_from_indices(&self, i: usize, q: usize) -> C64 {
        C64::new(self.unit_levels[i], self.unit_levels[q])
    }
}

/// Inverse of [`Constellation::modulate`].
pub fn demap_bits(symbols: &CVector, constellation: &Constellation) -> Result<Vec<u8>> {
    let m = constellation.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * m);
    for &z in symbols.iter() {
        let label = constellation.label_of(z)?;
        bits.extend((0..m).rev().map(|b| ((label >> b) & 1) as u8));
    }
    Ok(bits)
}

/// Uniform random bits from `rng`.
pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}
