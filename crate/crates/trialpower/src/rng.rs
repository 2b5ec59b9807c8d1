//! Counter-addressable uniform draws.
//!
//! Every random quantity in a simulation run is addressed by
//! `(master seed, replicate, patient, purpose)`. Draws are therefore
//! reproducible independently of execution order, and common-random-number
//! comparisons across candidate event sizes reuse the exact same latent
//! patient histories.

/// What a particular draw is for, the last word of the stream address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Entry,
    Event,
    Dropout,
}

impl Purpose {
    fn index(self) -> u64 {
        match self {
            Purpose::Entry => 0,
            Purpose::Event => 1,
            Purpose::Dropout => 2,
        }
    }
}

/// SplitMix64 finalizer; full-period bijective mix of a 64-bit word.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit word for a fully qualified stream address.
pub fn stream_bits(master: u64, replicate: u64, patient: u64, purpose: Purpose) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ replicate);
    h = splitmix64(h ^ patient);
    splitmix64(h ^ purpose.index())
}

/// Uniform draw on the open interval (0, 1) for a stream address.
///
/// The half-offset keeps both endpoints excluded, so `-ln(u)` style
/// inverse-CDF transforms never see 0 or 1.
pub fn uniform(master: u64, replicate: u64, patient: u64, purpose: Purpose) -> f64 {
    let bits = stream_bits(master, replicate, patient, purpose);
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
