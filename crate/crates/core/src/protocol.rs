//! Protocol parameters for the (M, L) family.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of polarization angles supported by the dense operator code.
pub const MAX_ANGLES: usize = 16;

/// An (M, L) protocol: `M` linear polarizations spaced by π/M, with the two
/// bit values encoded `L` steps apart (separation angle `Θ = πL/M`).
///
/// `(4, 1)` is SARG04 and `(4, 2)` behaves as BB84.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProtocolParams {
    m: usize,
    l: usize,
    double_even: bool,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(default)]
    double_even: bool,
}

impl TryFrom<RawParams> for ProtocolParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        ProtocolParams::new(raw.m, raw.l)?.with_doubling(raw.double_even)
    }
}

impl From<ProtocolParams> for RawParams {
    fn from(p: ProtocolParams) -> Self {
        RawParams { m: p.m, l: p.l, double_even: p.double_even }
    }
}

impl ProtocolParams {
    pub fn new(m: usize, l: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidParams(format!("M must be at least 3, got {m}")));
        }
        if m > MAX_ANGLES {
            return Err(Error::InvalidParams(format!("M must be at most {MAX_ANGLES}, got {m}")));
        }
        if l < 1 {
            return Err(Error::InvalidParams("L must be at least 1".into()));
        }
        if 2 * l > m {
            return Err(Error::InvalidParams(format!("2L <= M violated for (M, L) = ({m}, {l})")));
        }
        Ok(Self { m, l, double_even: false })
    }

    /// Enables the even-M key-gain doubling (second pool of mirrored clicks).
    pub fn with_doubling(mut self, on: bool) -> Result<Self> {
        if on && self.m % 2 != 0 {
            return Err(Error::InvalidParams(format!("doubling requires even M, got M = {}", self.m)));
        }
        self.double_even = on;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn double_even(&self) -> bool {
        self.double_even
    }

    /// Bit separation angle Θ = πL/M.
    pub fn theta(&self) -> f64 {
        PI * self.l as f64 / self.m as f64
    }

    /// Angle πj/M of the j-th element of the polarization set.
    pub fn angle(&self, j: usize) -> f64 {
        PI * j as f64 / self.m as f64
    }
}
