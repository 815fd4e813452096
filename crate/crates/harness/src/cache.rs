//! On-disk cache of sieve tables, keyed by limit.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rvl_core::numtheory::{sieve_primes, PrimeTable};

pub const CACHE_ENV: &str = "RVL_SIEVE_CACHE";
const MAGIC: &[u8; 8] = b"RVLSIEVE";

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn cache_file(dir: &Path, limit: u64) -> PathBuf {
    dir.join(format!("primes-{limit}.bin"))
}

/// The primes up to `limit`, read from `$RVL_SIEVE_CACHE` when a table with
/// this limit is there, sieved (and stored) otherwise.
pub fn load_primes(limit: u64) -> Result<PrimeTable> {
    let Some(dir) = cache_dir() else {
        return Ok(sieve_primes(limit)?);
    };
    let path = cache_file(&dir, limit);
    if path.exists() {
        match read_table(&path) {
            Ok(t) if t.limit() == limit => return Ok(t),
            _ => {}
        }
    }
    let table = sieve_primes(limit)?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = path.with_extension("tmp");
    write_table(&tmp, &table)?;
    fs::rename(&tmp, &path)?;
    Ok(table)
}

fn write_table(path: &Path, t: &PrimeTable) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&t.limit().to_le_bytes())?;
    w.write_all(&(t.len() as u64).to_le_bytes())?;
    for &p in t.primes() {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_table(path: &Path) -> Result<PrimeTable> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut head = [0u8; 24];
    r.read_exact(&mut head)?;
    if &head[..8] != MAGIC {
        bail!("{} is not a sieve cache file", path.display());
    }
    let limit = u64::from_le_bytes(head[8..16].try_into()?);
    let count = u64::from_le_bytes(head[16..24].try_into()?) as usize;
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    let primes = buf.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(PrimeTable::from_sorted(limit, primes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let t = sieve_primes(1000).unwrap();
        write_table(&path, &t).unwrap();
        let u = read_table(&path).unwrap();
        assert_eq!(u.primes(), t.primes());
        assert_eq!(u.limit(), 1000);
    }
}
