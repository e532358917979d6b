//! Binary on-disk form of an [`NGramIndex`](super::NGramIndex).

use std::collections::HashSet;
use std::io::{Read, Write};

use super::{DecontamError, NGramIndex};

const MAGIC: &[u8; 8] = b"NGIDX\x00\x00\x01";

fn put_set<W: Write>(w: &mut W, set: &HashSet<u128>) -> std::io::Result<()> {
    let mut v: Vec<u128> = set.iter().copied().collect();
    v.sort_unstable();
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for h in v {
        w.write_all(&h.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_index<W: Write>(idx: &NGramIndex, mut w: W) -> Result<(), DecontamError> {
    w.write_all(MAGIC)?;
    w.write_all(&(idx.n as u64).to_le_bytes())?;
    w.write_all(&(idx.sample_count as u64).to_le_bytes())?;
    put_set(&mut w, &idx.grams)?;
    w.write_all(&(idx.short.len() as u64).to_le_bytes())?;
    for (&len, set) in &idx.short {
        w.write_all(&(len as u64).to_le_bytes())?;
        put_set(&mut w, set)?;
    }
    w.flush()?;
    Ok(())
}

fn u64_of<R: Read>(r: &mut R) -> Result<u64, DecontamError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> DecontamError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        DecontamError::Cache("truncated".into())
    } else {
        DecontamError::Io(e)
    }
}

fn get_set<R: Read>(r: &mut R) -> Result<HashSet<u128>, DecontamError> {
    let count = u64_of(r)?;
    let mut set = HashSet::new();
    let mut b = [0u8; 16];
    for _ in 0..count {
        r.read_exact(&mut b).map_err(truncated)?;
        set.insert(u128::from_le_bytes(b));
    }
    Ok(set)
}

pub fn read_index<R: Read>(mut r: R) -> Result<NGramIndex, DecontamError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(DecontamError::Cache("bad magic".into()));
    }
    let n = u64_of(&mut r)? as usize;
    if n == 0 {
        return Err(DecontamError::ZeroN);
    }
    let sample_count = u64_of(&mut r)? as usize;
    let grams = get_set(&mut r)?;
    let mut idx = NGramIndex {
        n,
        grams,
        sample_count,
        ..Default::default()
    };
    for _ in 0..u64_of(&mut r)? {
        let len = u64_of(&mut r)? as usize;
        idx.short.insert(len, get_set(&mut r)?);
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WhitespaceTokenizer;
    use crate::decontam::BenchmarkSample;

    #[test]
    fn round_trip() {
        let samples = [
            BenchmarkSample::new("short one", "x"),
            BenchmarkSample::new(&"long ".repeat(30), "y"),
        ];
        let idx = NGramIndex::build(&samples, 20, &WhitespaceTokenizer).unwrap();
        let mut buf = Vec::new();
        write_index(&idx, &mut buf).unwrap();
        assert_eq!(read_index(buf.as_slice()).unwrap(), idx);
        let mut again = Vec::new();
        write_index(&idx, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_index(&b"nope"[..]), Err(DecontamError::Cache(_))));
        let idx = NGramIndex::new(3).unwrap();
        let mut buf = Vec::new();
        write_index(&idx, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_index(buf.as_slice()), Err(DecontamError::Cache(_))));
    }
}
