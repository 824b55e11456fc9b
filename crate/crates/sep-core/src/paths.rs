//! Per-path randomness and the lazily refined Brownian trajectory.
//!
//! Each path owns a dedicated ChaCha substream keyed by its index, so results
//! never depend on worker count or scheduling. The driving Brownian motion is
//! materialized just in time: a query beyond the stored horizon extends the
//! path with a fresh increment, a query between stored times inserts a
//! Brownian-bridge draw, and every obtained point is kept for later queries.

use std::io::{Read, Write};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Result, SepError};
use crate::normal::norm_quantile;

/// Deterministic per-path random stream.
///
/// Identical `(seed, stream_id, draw index)` produce identical variates.
/// Normal draws go through the inverse CDF of the stream's uniforms, so the
/// determinism contract holds for any draw count.
#[derive(Debug, Clone)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    /// Uniform draw strictly inside (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw.
    pub fn next_normal(&mut self) -> f64 {
        norm_quantile(self.next_uniform())
    }
}

/// One Brownian trajectory, stored as strictly increasing `(time, value)`
/// pairs with `(0, 0)` always present.
#[derive(Debug, Clone)]
pub struct PathStore {
    points: Vec<(f64, f64)>,
    stream: RngStream,
}

impl PathStore {
    pub fn new(stream: RngStream) -> Self {
        Self {
            points: vec![(0.0, 0.0)],
            stream,
        }
    }

    /// Store seeded with known trajectory points (e.g. a reconstructed path).
    /// Times must be strictly increasing and nonnegative; a point at time 0
    /// must have value exactly 0 and is added when missing.
    pub fn from_points(stream: RngStream, pts: &[(f64, f64)]) -> Result<Self> {
        let mut points: Vec<(f64, f64)> = Vec::with_capacity(pts.len() + 1);
        points.push((0.0, 0.0));
        for &(t, v) in pts {
            if !t.is_finite() || t < 0.0 {
                return Err(SepError::Domain(format!("path point at invalid time {t}")));
            }
            if t == 0.0 {
                if v != 0.0 {
                    return Err(SepError::Domain(format!(
                        "path value at time 0 must be 0, got {v}"
                    )));
                }
                continue;
            }
            let last = points.last().unwrap().0;
            if t <= last {
                return Err(SepError::Domain(format!(
                    "path point times must be strictly increasing: {t} after {last}"
                )));
            }
            points.push((t, v));
        }
        Ok(Self { points, stream })
    }

    pub fn horizon(&self) -> f64 {
        self.points.last().unwrap().0
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Value of the trajectory at `t`, drawing and storing it if unseen.
    ///
    /// Beyond the horizon the path extends by one `N(0, t − horizon)`
    /// increment; between stored times it bridges: conditionally on the
    /// neighbours `(t0, B0)` and `(t2, B2)` the value is normal with mean
    /// `B0·(t2−t)/(t2−t0) + B2·(t−t0)/(t2−t0)` and variance
    /// `(t2−t)(t−t0)/(t2−t0)`. Stored times return their value bit-exactly and
    /// interior insertion never changes previously stored points.
    pub fn sample_at(&mut self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(SepError::Domain(format!(
                "path query time must be finite and nonnegative, got {t}"
            )));
        }
        let idx = self.points.partition_point(|&(s, _)| s < t);
        if idx < self.points.len() && self.points[idx].0 == t {
            return Ok(self.points[idx].1);
        }
        if idx == self.points.len() {
            let (t0, v0) = *self.points.last().unwrap();
            let v = v0 + (t - t0).sqrt() * self.stream.next_normal();
            self.points.push((t, v));
            return Ok(v);
        }
        let (t0, v0) = self.points[idx - 1];
        let (t2, v2) = self.points[idx];
        let span = t2 - t0;
        let mean = v0 * ((t2 - t) / span) + v2 * ((t - t0) / span);
        let var = (t2 - t) * (t - t0) / span;
        let v = mean + var.sqrt() * self.stream.next_normal();
        self.points.insert(idx, (t, v));
        Ok(v)
    }

    /// `B(t2) − B(t1)`, materializing both endpoints. Zero when `t1 == t2`.
    pub fn increment(&mut self, t1: f64, t2: f64) -> Result<f64> {
        if t2 < t1 {
            return Err(SepError::Domain(format!(
                "increment needs t1 <= t2, got {t1} > {t2}"
            )));
        }
        let v1 = self.sample_at(t1)?;
        if t1 == t2 {
            return Ok(0.0);
        }
        let v2 = self.sample_at(t2)?;
        Ok(v2 - v1)
    }

    /// Dump stored `(time, value)` pairs as little-endian f64 pairs.
    pub fn dump<W: Write>(&self, w: &mut W) -> Result<()> {
        for &(t, v) in &self.points {
            w.write_all(&t.to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Load a dump. The store bridges further queries with the given stream.
    pub fn load<R: Read>(r: &mut R, stream: RngStream) -> Result<Self> {
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() % 16 != 0 {
            return Err(SepError::Domain(
                "path dump must contain little-endian f64 pairs".into(),
            ));
        }
        let mut pts = Vec::with_capacity(raw.len() / 16);
        for chunk in raw.chunks_exact(16) {
            let t = f64::from_le_bytes(chunk[..8].try_into().unwrap());
            let v = f64::from_le_bytes(chunk[8..].try_into().unwrap());
            pts.push((t, v));
        }
        Self::from_points(stream, &pts)
    }
}

/// One store per path, each on its own substream of `seed`.
pub fn make_stores(seed: u64, n_paths: usize) -> Vec<PathStore> {
    (0..n_paths)
        .map(|p| PathStore::new(RngStream::new(seed, p as u64)))
        .collect()
}
