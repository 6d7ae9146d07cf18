//! Decode-latency measurements for an opened archive.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{ByteSource, TokenArchive};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: u64,
    /// Records decoded back to back from the start of the archive.
    pub sequential_records: u64,
    pub sequential_seconds: f64,
    /// Sequential decode time scaled to 100 records.
    pub seconds_per_100_records: f64,
    pub random_reads: u64,
    pub random_access_mean_us: f64,
    pub random_access_max_us: f64,
    pub tokens_per_second: f64,
}

impl BenchReport {
    pub fn to_key_values(&self) -> String {
        format!(
            "records={}\nsequential_records={}\nsequential_seconds={:.6}\n\
             seconds_per_100_records={:.6}\nrandom_reads={}\n\
             random_access_mean_us={:.3}\nrandom_access_max_us={:.3}\n\
             tokens_per_second={:.0}\n",
            self.records,
            self.sequential_records,
            self.sequential_seconds,
            self.seconds_per_100_records,
            self.random_reads,
            self.random_access_mean_us,
            self.random_access_max_us,
            self.tokens_per_second,
        )
    }
}

/// Decodes up to `sequential` records in order, then `random_reads` records
/// at seeded random positions, one at a time on the calling thread.
pub fn bench<S: ByteSource>(
    archive: &TokenArchive<S>,
    sequential: usize,
    random_reads: usize,
    seed: u64,
) -> Result<BenchReport> {
    let n = archive.len();
    let per_record = archive.header().tokens_per_record() as f64;

    let count = sequential.min(n);
    let started = Instant::now();
    for i in 0..count {
        archive.read_image(i)?;
    }
    let sequential_seconds = started.elapsed().as_secs_f64();

    let reads = if n == 0 { 0 } else { random_reads };
    let mut r = rng::stream(seed, &[]);
    let mut total = 0.0f64;
    let mut worst = 0.0f64;
    for _ in 0..reads {
        let i = r.random_range(0..n);
        let t = Instant::now();
        archive.read_image(i)?;
        let us = t.elapsed().as_secs_f64() * 1e6;
        total += us;
        worst = worst.max(us);
    }

    let per_100 = if count == 0 {
        0.0
    } else {
        sequential_seconds * 100.0 / count as f64
    };
    Ok(BenchReport {
        records: n as u64,
        sequential_records: count as u64,
        sequential_seconds,
        seconds_per_100_records: per_100,
        random_reads: reads as u64,
        random_access_mean_us: if reads == 0 { 0.0 } else { total / reads as f64 },
        random_access_max_us: worst,
        tokens_per_second: if sequential_seconds > 0.0 {
            count as f64 * per_record / sequential_seconds
        } else {
            0.0
        },
    })
}
