//! Packed computational-basis configurations.
//!
//! Site `i` is bit `i` of the packed word, so the basis index of a
//! configuration is `Σᵢ sᵢ 2ⁱ`. A set bit is spin down (`σᶻ = −1`).

use std::fmt;

use crate::error::{Error, Result};

/// A configuration `s ∈ {0,1}^N` with `N ≤ 64`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Spins(pub u64);

impl Spins {
    pub const MAX_SITES: usize = 64;

    #[inline]
    pub fn from_index(index: usize) -> Self {
        Spins(index as u64)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn get(self, site: usize) -> bool {
        (self.0 >> site) & 1 == 1
    }

    #[inline]
    pub fn flipped(self, site: usize) -> Self {
        Spins(self.0 ^ (1u64 << site))
    }

    /// Global spin flip `s → 1 − s` on `n` sites.
    #[inline]
    pub fn complement(self, n: usize) -> Self {
        Spins(!self.0 & site_mask(n))
    }

    #[inline]
    pub fn count_ones(self) -> u32 {
        self.0.count_ones()
    }

    /// Indices of the sites with `sᵢ = 1`, ascending.
    #[inline]
    pub fn ones(self) -> Ones {
        Ones(self.0)
    }

    /// Per-configuration magnetization `(1/N) Σᵢ (1 − 2sᵢ)`.
    #[inline]
    pub fn magnetization(self, n: usize) -> f64 {
        let down = self.count_ones() as f64;
        (n as f64 - 2.0 * down) / n as f64
    }

    /// Takes the bits selected by `mask` from `self` and the rest from `other`.
    #[inline]
    pub fn splice(self, other: Spins, mask: u64) -> Spins {
        Spins((self.0 & mask) | (other.0 & !mask))
    }

    /// Renders the configuration as `'0'`/`'1'` characters, site 0 first.
    pub fn to_bitstring(self, n: usize) -> String {
        (0..n).map(|i| if self.get(i) { '1' } else { '0' }).collect()
    }

    pub fn parse_bitstring(text: &str) -> Result<Self> {
        if text.len() > Self::MAX_SITES {
            return Err(Error::Capacity {
                what: "bitstring length",
                limit: Self::MAX_SITES,
                got: text.len(),
            });
        }
        let mut bits = 0u64;
        for (i, ch) in text.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => bits |= 1 << i,
                other => {
                    return Err(Error::Data(format!(
                        "bitstring {text:?} contains {other:?}"
                    )))
                }
            }
        }
        Ok(Spins(bits))
    }
}

impl fmt::Display for Spins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// Mask with the low `n` bits set.
#[inline]
pub fn site_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Mask selecting the given sites.
pub fn subsystem_mask(sites: &[usize]) -> u64 {
    sites.iter().fold(0u64, |m, &i| m | (1u64 << i))
}

pub struct Ones(u64);

impl Iterator for Ones {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let i = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(i)
        }
    }
}
