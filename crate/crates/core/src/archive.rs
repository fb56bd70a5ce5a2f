//! Posterior draw archive: in-memory layout, binary serialization, and CSV
//! export.
//!
//! Binary format (little-endian):
//! header = magic `BMST`, format version `u32`, then `N, P, Q, T` as `u64`,
//! the master seed `u64`, and the configuration hash `u64`;
//! payload = draw-major records, each holding the P×Q coefficient draw
//! (column-major), the Q response variances, then λ1² and λ2².

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BMST";
const FORMAT_VERSION: u32 = 1;

/// Retained draws of every archived block plus provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorArchive {
    n: usize,
    p: usize,
    q: usize,
    t: usize,
    seed: u64,
    config_hash: u64,
    /// T·P·Q values; draw-major, column-major within each draw.
    beta: Vec<f64>,
    /// T·Q values, draw-major.
    sigma2: Vec<f64>,
    lambda1_sq: Vec<f64>,
    lambda2_sq: Vec<f64>,
}

impl PosteriorArchive {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        p: usize,
        q: usize,
        t: usize,
        seed: u64,
        config_hash: u64,
        beta: Vec<f64>,
        sigma2: Vec<f64>,
        lambda1_sq: Vec<f64>,
        lambda2_sq: Vec<f64>,
    ) -> Result<Self> {
        if beta.len() != t * p * q
            || sigma2.len() != t * q
            || lambda1_sq.len() != t
            || lambda2_sq.len() != t
        {
            return Err(Error::InvalidInput(
                "archive payload lengths do not match the declared dimensions".into(),
            ));
        }
        if beta.iter().any(|v| !v.is_finite())
            || sigma2.iter().any(|v| !v.is_finite())
            || lambda1_sq.iter().any(|v| !v.is_finite())
            || lambda2_sq.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Numeric("archive contains non-finite draws".into()));
        }
        Ok(Self {
            n,
            p,
            q,
            t,
            seed,
            config_hash,
            beta,
            sigma2,
            lambda1_sq,
            lambda2_sq,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn q(&self) -> usize {
        self.q
    }
    /// Number of retained draws.
    pub fn t(&self) -> usize {
        self.t
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn config_hash(&self) -> u64 {
        self.config_hash
    }
    pub fn beta_draws(&self) -> &[f64] {
        &self.beta
    }
    pub fn sigma2_draws(&self) -> &[f64] {
        &self.sigma2
    }
    pub fn lambda1_sq_draws(&self) -> &[f64] {
        &self.lambda1_sq
    }
    pub fn lambda2_sq_draws(&self) -> &[f64] {
        &self.lambda2_sq
    }

    /// The coefficient draw at index `t` as a fresh P×Q matrix.
    pub fn beta_draw(&self, draw: usize) -> DMatrix<f64> {
        let stride = self.p * self.q;
        DMatrix::from_column_slice(self.p, self.q, &self.beta[draw * stride..(draw + 1) * stride])
    }

    /// Iterator over one edge's draw series.
    pub fn edge_series(&self, p_idx: usize, q_idx: usize) -> impl Iterator<Item = f64> + '_ {
        let stride = self.p * self.q;
        let offset = q_idx * self.p + p_idx;
        (0..self.t).map(move |t_idx| self.beta[t_idx * stride + offset])
    }

    /// Write the binary archive.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for v in [
            self.n as u64,
            self.p as u64,
            self.q as u64,
            self.t as u64,
            self.seed,
            self.config_hash,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        let stride = self.p * self.q;
        for t_idx in 0..self.t {
            write_f64s(&mut w, &self.beta[t_idx * stride..(t_idx + 1) * stride])?;
            write_f64s(&mut w, &self.sigma2[t_idx * self.q..(t_idx + 1) * self.q])?;
            write_f64s(&mut w, &[self.lambda1_sq[t_idx], self.lambda2_sq[t_idx]])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a binary archive, validating magic, version, and payload size.
    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidInput(format!(
                "not a posterior archive: bad magic {magic:?}"
            )));
        }
        let mut v4 = [0u8; 4];
        r.read_exact(&mut v4)?;
        let version = u32::from_le_bytes(v4);
        if version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported archive format version {version}"
            )));
        }
        let mut u8s = [0u8; 8];
        let mut read_u64 = |r: &mut BufReader<File>| -> Result<u64> {
            r.read_exact(&mut u8s)?;
            Ok(u64::from_le_bytes(u8s))
        };
        let n = read_u64(&mut r)? as usize;
        let p = read_u64(&mut r)? as usize;
        let q = read_u64(&mut r)? as usize;
        let t = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let config_hash = read_u64(&mut r)?;

        let stride = p
            .checked_mul(q)
            .ok_or_else(|| Error::InvalidInput("archive dimensions overflow".into()))?;
        let mut beta = Vec::with_capacity(t * stride);
        let mut sigma2 = Vec::with_capacity(t * q);
        let mut lambda1_sq = Vec::with_capacity(t);
        let mut lambda2_sq = Vec::with_capacity(t);
        for _ in 0..t {
            read_f64s(&mut r, stride, &mut beta)?;
            read_f64s(&mut r, q, &mut sigma2)?;
            let mut pair = Vec::with_capacity(2);
            read_f64s(&mut r, 2, &mut pair)?;
            lambda1_sq.push(pair[0]);
            lambda2_sq.push(pair[1]);
        }
        // Must now be at end-of-file.
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::InvalidInput(
                "archive has trailing bytes beyond the declared draw count".into(),
            ));
        }
        Self::new(n, p, q, t, seed, config_hash, beta, sigma2, lambda1_sq, lambda2_sq)
    }

    /// CSV export: one row per draw, coefficient columns flattened
    /// column-major with 1-based header names `beta_p_q`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let mut header = Vec::with_capacity(self.p * self.q);
        for q_idx in 1..=self.q {
            for p_idx in 1..=self.p {
                header.push(format!("beta_{p_idx}_{q_idx}"));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        let stride = self.p * self.q;
        for t_idx in 0..self.t {
            let row = &self.beta[t_idx * stride..(t_idx + 1) * stride];
            let mut line = String::with_capacity(stride * 20);
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format_float(*v));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Round-trippable float formatting shared by all CSV writers: `{}` on f64
/// prints the shortest decimal that parses back to the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, count: usize, out: &mut Vec<f64>) -> Result<()> {
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|_| {
            Error::InvalidInput("archive truncated: payload shorter than header declares".into())
        })?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(())
}
