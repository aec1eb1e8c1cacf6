//! ACF1: one text header line, then little-endian `f64` node values in
//! row-major order (last index fastest).
//!
//! ```text
//! ACF1 n=2 dims=257,257 h=0.0078125 origin=-1,-1
//! ```

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Acf1 {
    pub dims: Vec<usize>,
    pub h: f64,
    pub origin: Vec<f64>,
    pub values: Vec<f64>,
}

impl Acf1 {
    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let join = |v: Vec<String>| v.join(",");
        let mut out = Vec::with_capacity(64 + 8 * self.values.len());
        writeln!(
            out,
            "ACF1 n={} dims={} h={} origin={}",
            self.n(),
            join(self.dims.iter().map(|d| d.to_string()).collect()),
            self.h,
            join(self.origin.iter().map(|o| o.to_string()).collect())
        )
        .expect("write to Vec");
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("ACF1 header line missing".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::Format("ACF1 header is not UTF-8".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("ACF1") {
            return Err(Error::Format("missing ACF1 magic".into()));
        }
        let (mut n, mut dims, mut h, mut origin) = (None, None, None, None);
        for part in parts {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header token {part:?}")))?;
            let bad = || Error::Format(format!("bad value in {part:?}"));
            match key {
                "n" => n = Some(val.parse::<usize>().map_err(|_| bad())?),
                "dims" => {
                    dims = Some(
                        val.split(',')
                            .map(|d| d.parse::<usize>().map_err(|_| bad()))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "h" => h = Some(val.parse::<f64>().map_err(|_| bad())?),
                "origin" => {
                    origin = Some(
                        val.split(',')
                            .map(|d| d.parse::<f64>().map_err(|_| bad()))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                other => return Err(Error::Format(format!("unknown header key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Format(format!("ACF1 header lacks {k}"));
        let n = n.ok_or_else(|| missing("n"))?;
        let dims: Vec<usize> = dims.ok_or_else(|| missing("dims"))?;
        let h = h.ok_or_else(|| missing("h"))?;
        let origin: Vec<f64> = origin.ok_or_else(|| missing("origin"))?;
        if dims.len() != n || origin.len() != n {
            return Err(Error::Format(format!(
                "n={n} but {} dims and {} origin entries",
                dims.len(),
                origin.len()
            )));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("node count overflows".into()))?;
        let body = &bytes[nl + 1..];
        if body.len() != count.saturating_mul(8) {
            return Err(Error::Format(format!(
                "expected {} bytes of node data, found {}",
                count.saturating_mul(8),
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self { dims, h, origin, values })
    }
}
