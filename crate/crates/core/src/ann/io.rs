use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{HnswConfig, HnswIndex};
use crate::error::{Error, Result};

pub const INDEX_MAGIC: &[u8; 4] = b"QSRI";
pub const INDEX_VERSION: u32 = 1;

/// magic, version, d, n, M, entry point, top level.
const HEADER_BYTES: u64 = 4 + 4 + 4 + 8 + 4 + 8 + 4;
const NO_ENTRY: u64 = u64::MAX;

/// Byte accounting of an index; `total` equals the serialized size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Footprint {
    pub overhead: u64,
    pub vectors: u64,
    pub adjacency: u64,
    pub total: u64,
}

impl HnswIndex {
    pub fn memory_footprint(&self) -> Footprint {
        let vectors = 4 * self.vectors.len() as u64;
        let adjacency: u64 = self
            .links
            .iter()
            .map(|levels| 1 + levels.iter().map(|l| 2 + 8 * l.len() as u64).sum::<u64>())
            .sum();
        Footprint {
            overhead: HEADER_BYTES,
            vectors,
            adjacency,
            total: HEADER_BYTES + vectors + adjacency,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.memory_footprint().total as usize);
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.links.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.config.m as u32).to_le_bytes());
        out.extend_from_slice(&self.entry.map_or(NO_ENTRY, u64::from).to_le_bytes());
        out.extend_from_slice(&(self.top_level as u32).to_le_bytes());
        for v in &self.vectors {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for levels in &self.links {
            out.push(levels.len() as u8);
            for l in levels {
                out.extend_from_slice(&(l.len() as u16).to_le_bytes());
                for &id in l {
                    out.extend_from_slice(&u64::from(id).to_le_bytes());
                }
            }
        }
        out
    }

    /// Parses an index. `ef_construction`/`ef_search` are not part of the
    /// format and come from `runtime`; `m` is taken from the file.
    pub fn from_bytes(bytes: &[u8], runtime: &HnswConfig) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != INDEX_MAGIC {
            return Err(Error::format(CTX, 0, "bad magic"));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(Error::format(CTX, 4, format!("unsupported version {version}")));
        }
        let dim = r.u32()? as usize;
        let n = r.u64()?;
        let m = r.u32()? as usize;
        let entry = r.u64()?;
        let top_level = r.u32()? as usize;
        let n_usize = usize::try_from(n).map_err(|_| Error::format(CTX, 12, "element count overflows"))?;
        let needed = n_usize
            .checked_mul(dim)
            .and_then(|x| x.checked_mul(4))
            .ok_or_else(|| Error::format(CTX, 12, "vector block overflows"))?;
        let block = r.take(needed)?;
        let vectors: Vec<f32> = block
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();

        let mut links = Vec::with_capacity(n_usize);
        for _ in 0..n_usize {
            let at = r.at;
            let count = r.u8()? as usize;
            if count == 0 {
                return Err(Error::format(CTX, at as u64, "element without level 0"));
            }
            let mut levels = Vec::with_capacity(count);
            for _ in 0..count {
                let degree = r.u16()? as usize;
                let mut l = Vec::with_capacity(degree);
                for _ in 0..degree {
                    let at = r.at;
                    let id = r.u64()?;
                    if id >= n {
                        return Err(Error::format(CTX, at as u64, format!("neighbor {id} out of range")));
                    }
                    l.push(id as u32);
                }
                levels.push(l);
            }
            links.push(levels);
        }
        if r.at != bytes.len() {
            return Err(Error::format(CTX, r.at as u64, "trailing bytes"));
        }
        let entry = match (entry, n) {
            (NO_ENTRY, 0) => None,
            (e, _) if e < n && links[e as usize].len() == top_level + 1 => Some(e as u32),
            _ => return Err(Error::format(CTX, 24, "inconsistent entry point")),
        };
        Ok(HnswIndex {
            config: HnswConfig { m, ..runtime.clone() },
            dim,
            vectors,
            links,
            entry,
            top_level,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, runtime: &HnswConfig) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, runtime)
    }
}

const CTX: &str = "hnsw index";

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < len {
            return Err(Error::format(
                CTX,
                self.at as u64,
                format!("truncated: wanted {len} bytes"),
            ));
        }
        let out = &self.bytes[self.at..self.at + len];
        self.at += len;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::NeighborIndex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
                v.iter().map(|x| x / norm).collect()
            })
            .collect()
    }

    #[test]
    fn round_trip_answers_identically() {
        let vectors = random_unit(800, 16, 5);
        let config = HnswConfig::default();
        let idx = HnswIndex::build(&vectors, &config).unwrap();
        let back = HnswIndex::from_bytes(&idx.to_bytes(), &config).unwrap();
        assert_eq!(back, idx);
        for q in random_unit(100, 16, 6) {
            assert_eq!(idx.search(&q, 10).unwrap(), back.search(&q, 10).unwrap());
        }
    }

    #[test]
    fn footprint_matches_file_size() {
        let empty = HnswIndex::build(&[], &HnswConfig::default()).unwrap();
        let fp = empty.memory_footprint();
        assert_eq!(fp.total, HEADER_BYTES);
        assert_eq!((fp.vectors, fp.adjacency), (0, 0));
        assert_eq!(empty.to_bytes().len() as u64, fp.total);

        let small = HnswIndex::build(&random_unit(500, 32, 1), &HnswConfig::default()).unwrap();
        let big = HnswIndex::build(&random_unit(1000, 32, 1), &HnswConfig::default()).unwrap();
        let (fs, fb) = (small.memory_footprint(), big.memory_footprint());
        assert_eq!(small.to_bytes().len() as u64, fs.total);
        assert_eq!(fs.vectors, 500 * 32 * 4);
        // Independent recount of the adjacency payload.
        let mut adj = 0u64;
        for id in 0..500u32 {
            adj += 1;
            for level in 0..=small.level_of(id) {
                adj += 2 + 8 * small.neighbors(id, level).len() as u64;
            }
        }
        assert_eq!(fs.adjacency, adj);
        assert!(fb.total > 2 * fs.total - fs.overhead);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let idx = HnswIndex::build(&random_unit(50, 4, 2), &HnswConfig::default()).unwrap();
        let bytes = idx.to_bytes();
        for cut in [0, 3, 20, 40, bytes.len() - 1] {
            match HnswIndex::from_bytes(&bytes[..cut], &HnswConfig::default()) {
                Err(Error::Format { offset, .. }) => assert!(offset <= cut as u64),
                other => panic!("cut {cut}: expected format error, got {other:?}"),
            }
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            HnswIndex::from_bytes(&bad, &HnswConfig::default()),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut bad = bytes;
        bad[4] = 9;
        assert!(matches!(
            HnswIndex::from_bytes(&bad, &HnswConfig::default()),
            Err(Error::Format { offset: 4, .. })
        ));
    }
}
