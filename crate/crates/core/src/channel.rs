//! AWGN link model for bit-level (digital) and symbol-level (analog) transport.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::FeatureTensor;

/// Default link goodput in bits per second.
pub const DEFAULT_RATE_BPS: f64 = 1.0e6;

/// Airtime of one analog channel symbol, in bit equivalents.
pub const DEFAULT_ANALOG_BITS_PER_SYMBOL: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Ul,
    Dl,
    D2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub snr_db: f64,
    pub rate_bps: f64,
    pub kind: LinkKind,
}

impl ChannelSpec {
    pub fn new(snr_db: f64, rate_bps: f64, kind: LinkKind) -> Result<Self> {
        let spec = Self {
            snr_db,
            rate_bps,
            kind,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_bps > 0.0) || !self.rate_bps.is_finite() {
            return Err(Error::Domain(format!(
                "link rate must be positive and finite, got {}",
                self.rate_bps
            )));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Domain("snr_db is NaN".into()));
        }
        Ok(())
    }

    pub fn snr_linear(&self) -> f64 {
        snr_db_to_linear(self.snr_db)
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_rate(mut self, rate_bps: f64) -> Self {
        self.rate_bps = rate_bps;
        self
    }
}

/// How the digital path draws bit errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitChannelMode {
    /// Flip each bit with the analytic BPSK error probability.
    #[default]
    Analytic,
    /// Modulate each bit as a BPSK symbol, add noise and slice.
    SymbolBpsk,
}

/// Bit string packed little-endian into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitPayload {
    words: Vec<u64>,
    len_bits: usize,
}

impl BitPayload {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len_bits: 0,
        }
    }

    pub fn zeros(len_bits: usize) -> Self {
        Self {
            words: vec![0; len_bits.div_ceil(64)],
            len_bits,
        }
    }

    pub fn len_bits(&self) -> usize {
        self.len_bits
    }

    pub fn is_empty(&self) -> bool {
        self.len_bits == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len_bits, "bit index {i} out of range");
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len_bits, "bit index {i} out of range");
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len_bits, "bit index {i} out of range");
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    /// Appends the low `width` bits of `value`, least significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        for b in 0..width {
            let pos = self.len_bits;
            if pos % 64 == 0 {
                self.words.push(0);
            }
            if (value >> b) & 1 == 1 {
                self.words[pos / 64] |= 1u64 << (pos % 64);
            }
            self.len_bits += 1;
        }
    }

    /// Reads `width` bits starting at `offset`, least significant first.
    pub fn read_bits(&self, offset: usize, width: u32) -> u64 {
        assert!(offset + width as usize <= self.len_bits);
        let mut out = 0u64;
        for b in 0..width as usize {
            let i = offset + b;
            out |= ((self.words[i / 64] >> (i % 64)) & 1) << b;
        }
        out
    }

    /// Number of positions where the two payloads differ.
    pub fn hamming_distance(&self, other: &BitPayload) -> usize {
        assert_eq!(self.len_bits, other.len_bits);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub(crate) fn from_u16_words(words16: &[u16]) -> Self {
        let mut words = vec![0u64; (words16.len() * 16).div_ceil(64)];
        for (i, &w) in words16.iter().enumerate() {
            words[i / 4] |= (w as u64) << ((i % 4) * 16);
        }
        Self {
            words,
            len_bits: words16.len() * 16,
        }
    }

    pub(crate) fn to_u16_words(&self) -> Vec<u16> {
        debug_assert_eq!(self.len_bits % 16, 0);
        (0..self.len_bits / 16)
            .map(|i| (self.words[i / 4] >> ((i % 4) * 16)) as u16)
            .collect()
    }
}

pub fn snr_db_to_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// BPSK bit error probability `Q(sqrt(2·snr))` in AWGN.
pub fn ber_bpsk(snr_linear: f64) -> Result<f64> {
    if !(snr_linear > 0.0) {
        return Err(Error::Domain(format!(
            "snr must be positive, got {snr_linear}"
        )));
    }
    // Q(sqrt(2γ)) = erfc(sqrt(γ)) / 2
    Ok(0.5 * libm::erfc(snr_linear.sqrt()))
}

/// Seconds needed to push `length_bits` through the link.
pub fn tx_latency(length_bits: u64, ch: &ChannelSpec) -> f64 {
    length_bits as f64 / ch.rate_bps
}

/// Bit-equivalent airtime of `symbols` analog channel uses.
pub fn analog_airtime_bits(symbols: usize, bits_per_symbol: u32) -> u64 {
    symbols as u64 * bits_per_symbol as u64
}

/// Passes a bit string through the link, flipping bits independently with
/// probability [`ber_bpsk`].
pub fn transmit_bits(payload: &BitPayload, ch: &ChannelSpec, stream: RngStream) -> Result<BitPayload> {
    transmit_bits_with(payload, ch, stream, BitChannelMode::Analytic)
}

pub fn transmit_bits_with(
    payload: &BitPayload,
    ch: &ChannelSpec,
    stream: RngStream,
    mode: BitChannelMode,
) -> Result<BitPayload> {
    let snr = ch.snr_linear();
    let p = ber_bpsk(snr)?;
    let mut out = payload.clone();
    let mut rng = stream.rng();
    match mode {
        BitChannelMode::Analytic => flip_bits(&mut out, p, &mut rng),
        BitChannelMode::SymbolBpsk => {
            // Unit bit energy, noise variance N0/2 = 1/(2·snr).
            let noise = Normal::new(0.0, (0.5 / snr).sqrt())
                .map_err(|e| Error::Domain(e.to_string()))?;
            for i in 0..out.len_bits() {
                let tx = if out.get(i) { -1.0 } else { 1.0 };
                let rx: f64 = tx + noise.sample(&mut rng);
                if (rx < 0.0) != out.get(i) {
                    out.flip(i);
                }
            }
        }
    }
    Ok(out)
}

fn flip_bits<R: RngCore>(payload: &mut BitPayload, p: f64, rng: &mut R) {
    let n = payload.len_bits();
    if n == 0 || p <= 0.0 {
        return;
    }
    if p >= 0.1 {
        // Dense regime: one comparison per bit against a 64-bit threshold.
        let threshold = (p * 2f64.powi(64)) as u64;
        for i in 0..n {
            if rng.next_u64() < threshold {
                payload.flip(i);
            }
        }
        return;
    }
    // Sparse regime: jump between flips with geometric gaps.
    let log_q = (-p).ln_1p();
    let mut i = 0usize;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let gap = (u.ln() / log_q).floor();
        if !(gap < (n - i) as f64) {
            break;
        }
        i += gap as usize;
        payload.flip(i);
        i += 1;
        if i >= n {
            break;
        }
    }
}

/// Adds zero-mean Gaussian noise of variance `1/snr` to each symbol.
/// Callers normalize symbols to unit average power beforehand.
pub fn transmit_analog(symbols: &FeatureTensor, ch: &ChannelSpec, stream: RngStream) -> Result<FeatureTensor> {
    let snr = ch.snr_linear();
    if !(snr > 0.0) {
        return Err(Error::Domain(format!("snr must be positive, got {snr}")));
    }
    let sigma = (1.0 / snr).sqrt();
    let mut rng = stream.rng();
    let values = symbols
        .values()
        .iter()
        .map(|&s| {
            let n: f64 = rand_distr::StandardNormal.sample(&mut rng);
            s + sigma * n
        })
        .collect();
    FeatureTensor::new(symbols.shape().to_vec(), values, symbols.role())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::gaussian_tensor;
    use crate::tensor::TensorRole;

    /// `Q(x)` by composite Simpson integration of the normal density over
    /// `[x, x + 40]`; independent of the erfc used in the implementation.
    fn q_quadrature(x: f64) -> f64 {
        let n = 200_000;
        let h = 40.0 / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(x) + pdf(x + 40.0);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(x + k as f64 * h);
        }
        s * h / 3.0
    }

    fn link(snr_db: f64) -> ChannelSpec {
        ChannelSpec::new(snr_db, DEFAULT_RATE_BPS, LinkKind::Dl).unwrap()
    }

    #[test]
    fn db_conversion() {
        assert_eq!(snr_db_to_linear(0.0), 1.0);
        assert!((snr_db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((snr_db_to_linear(-10.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ber_matches_quadrature_oracle() {
        for (snr, frozen) in [(1.0, 0.07865), (0.1, 0.32736)] {
            let oracle = q_quadrature((2.0 * snr as f64).sqrt());
            assert!((oracle - frozen).abs() < 1e-4, "oracle drifted: {oracle}");
            let got = ber_bpsk(snr).unwrap();
            assert!((got - oracle).abs() < 1e-9, "snr {snr}: {got} vs {oracle}");
        }
        let oracle = q_quadrature(20f64.sqrt());
        let got = ber_bpsk(10.0).unwrap();
        assert!((got - 3.872e-6).abs() < 1e-8, "{got}");
        assert!((got - oracle).abs() / oracle < 1e-6);
    }

    #[test]
    fn ber_rejects_non_positive_snr() {
        assert!(ber_bpsk(0.0).is_err());
        assert!(ber_bpsk(-1.0).is_err());
        assert!(ber_bpsk(f64::NAN).is_err());
    }

    #[test]
    fn latency_examples() {
        let ch = link(10.0);
        assert!((tx_latency(50_331_648, &ch) - 50.331648).abs() < 1e-12);
        assert!((tx_latency(1_048_576, &ch) - 1.048576).abs() < 1e-12);
        assert_eq!(tx_latency(0, &ch), 0.0);
        assert_eq!(analog_airtime_bits(36_250, 16), 580_000);
    }

    #[test]
    fn rejects_bad_rate() {
        assert!(ChannelSpec::new(0.0, 0.0, LinkKind::Ul).is_err());
        assert!(ChannelSpec::new(0.0, -5.0, LinkKind::Ul).is_err());
        assert!(ChannelSpec::new(f64::NAN, 1.0, LinkKind::Ul).is_err());
    }

    #[test]
    fn payload_bit_ops() {
        let mut p = BitPayload::new();
        p.push_bits(0b1011, 4);
        p.push_bits(u64::MAX, 64);
        assert_eq!(p.len_bits(), 68);
        assert_eq!(p.read_bits(0, 4), 0b1011);
        assert_eq!(p.read_bits(4, 64), u64::MAX);
        p.flip(1);
        assert_eq!(p.read_bits(0, 4), 0b1001);
        let words = [0x3c00u16, 0xffff, 0x0001, 0x8000, 0x1234];
        let packed = BitPayload::from_u16_words(&words);
        assert_eq!(packed.to_u16_words(), words);
        assert_eq!(packed.read_bits(64, 16), 0x1234);
    }

    #[test]
    fn empty_payload_passes_through() {
        let out = transmit_bits(&BitPayload::new(), &link(-10.0), RngStream::root(1)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn very_high_snr_flips_nothing() {
        let p = BitPayload::zeros(1_000_000);
        let out = transmit_bits(&p, &link(100.0), RngStream::root(3)).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn flips_are_deterministic() {
        let p = BitPayload::zeros(10_000);
        let s = RngStream::new(9, 9);
        assert_eq!(
            transmit_bits(&p, &link(0.0), s).unwrap(),
            transmit_bits(&p, &link(0.0), s).unwrap()
        );
    }

    #[test]
    fn symbol_level_mode_matches_analytic_ber() {
        let n = 400_000;
        let p = BitPayload::zeros(n);
        let ber = ber_bpsk(1.0).unwrap();
        let out = transmit_bits_with(&p, &link(0.0), RngStream::root(5), BitChannelMode::SymbolBpsk)
            .unwrap();
        let frac = out.hamming_distance(&p) as f64 / n as f64;
        let sd = (ber * (1.0 - ber) / n as f64).sqrt();
        assert!((frac - ber).abs() < 3.0 * sd, "{frac} vs {ber}");
    }

    #[test]
    fn analog_noise_variance() {
        let x = gaussian_tensor(&[100_000], RngStream::root(8)).unwrap();
        for (snr_db, tol) in [(0.0, 0.03), (100.0, 0.03)] {
            let ch = link(snr_db);
            let y = transmit_analog(&x, &ch, RngStream::root(9)).unwrap();
            assert_eq!(y.shape(), x.shape());
            let var = crate::metrics::mse(&x, &y).unwrap();
            let expected = 1.0 / ch.snr_linear();
            assert!(((var - expected) / expected).abs() < tol, "{snr_db}: {var}");
        }
        let empty = FeatureTensor::from_vec(vec![], TensorRole::Seed).unwrap();
        assert!(transmit_analog(&empty, &link(0.0), RngStream::root(1)).unwrap().is_empty());
    }
}
