use serde::Serialize;

use super::{normalize, simplify, Expr, Point};
use crate::error::{Error, Result};

/// Axis-aligned sampling region over named symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub symbols: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn new(symbols: Vec<String>, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(symbols.len(), lo.len());
        assert_eq!(symbols.len(), hi.len());
        Self { symbols, lo, hi }
    }

    /// The cube `[-half, half]^dim` over `symbols`.
    pub fn cube<S: AsRef<str>>(symbols: &[S], half: f64) -> Self {
        Self::around(symbols, &vec![0.0; symbols.len()], half)
    }

    /// The cube of half-width `half` centred at `center`.
    pub fn around<S: AsRef<str>>(symbols: &[S], center: &[f64], half: f64) -> Self {
        Self {
            symbols: symbols.iter().map(|s| s.as_ref().to_string()).collect(),
            lo: center.iter().map(|c| c - half).collect(),
            hi: center.iter().map(|c| c + half).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.symbols.len()
    }

    /// Maps a unit-cube sample into the box.
    pub fn scale(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter().zip(self.lo.iter().zip(&self.hi)).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect()
    }

    pub fn point(&self, unit: &[f64]) -> Point {
        Point::from_slices(&self.symbols, &self.scale(unit))
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Halton low-discrepancy sequence in the unit cube, starting at index 1.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports up to {} dimensions", PRIMES.len());
        Self { dim, index: 0 }
    }

    fn radical_inverse(mut i: u64, base: u64) -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        let b = base as f64;
        while i > 0 {
            f /= b;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        self.index += 1;
        Some((0..self.dim).map(|d| Self::radical_inverse(self.index, PRIMES[d])).collect())
    }
}

/// Outcome of a zero test.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ZeroVerdict {
    /// The simplified expression is the literal constant 0.
    SymbolicZero,
    /// Every sample evaluated within tolerance of zero.
    NumericZero { samples: usize, max_abs: f64 },
    /// Some sample exceeded the tolerance.
    NonZero { witness: Vec<(String, f64)>, value: f64 },
}

impl ZeroVerdict {
    pub fn is_zero(&self) -> bool {
        !matches!(self, ZeroVerdict::NonZero { .. })
    }
}

/// Decides whether `e` vanishes identically on `region`.
///
/// Symbolic first (literal zero after [`simplify`] or [`normalize`]), then
/// `samples` quasi-random points. Points that hit a domain error are skipped;
/// more than 90% skipped is an error.
pub fn is_zero(e: &Expr, region: &SampleBox, samples: usize, tol: f64) -> Result<ZeroVerdict> {
    if simplify(e).is_literal_zero() || normalize(e).is_literal_zero() {
        return Ok(ZeroVerdict::SymbolicZero);
    }
    let mut seq = Halton::new(region.dim());
    let mut ok = 0usize;
    let mut failed = 0usize;
    let mut max_abs: f64 = 0.0;
    let max_attempts = samples.max(1) * 10;
    while ok < samples {
        if ok + failed >= max_attempts {
            break;
        }
        let at = region.point(&seq.next().expect("infinite sequence"));
        match e.eval(&at) {
            Ok(v) if v.is_finite() => {
                ok += 1;
                if v.abs() > tol {
                    return Ok(ZeroVerdict::NonZero {
                        witness: at.iter().map(|(k, v)| (k.to_string(), v)).collect(),
                        value: v,
                    });
                }
                max_abs = max_abs.max(v.abs());
            }
            Ok(_) | Err(Error::Domain { .. }) => failed += 1,
            Err(other) => return Err(other),
        }
    }
    let attempted = ok + failed;
    if attempted > 0 && failed * 10 > attempted * 9 || ok < samples {
        return Err(Error::SamplingFailed { failed, attempted });
    }
    Ok(ZeroVerdict::NumericZero { samples: ok, max_abs })
}

/// [`is_zero`] with 20 samples on `[-2, 2]^dim` over the free symbols of `e`
/// and tolerance `1e-9`.
pub fn is_zero_default(e: &Expr) -> Result<ZeroVerdict> {
    let symbols = e.free_symbols();
    is_zero(e, &SampleBox::cube(&symbols, 2.0), 20, 1e-9)
}
