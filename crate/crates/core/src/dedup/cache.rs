//! Signature cache: `doc_id` followed by the signature as little-endian u64s.
//!
//! File layout: magic `MHSIG\x01`, u32 LE signature length, then per record
//! u32 LE id byte length, id UTF-8 bytes, `len` × u64 LE values.

use std::io::{self, Read, Write};

use super::minhash::MinHashSignature;

const MAGIC: &[u8; 6] = b"MHSIG\x01";

pub fn write_signatures<W: Write>(mut out: W, sigs: &[MinHashSignature]) -> io::Result<()> {
    let len = sigs.first().map_or(0, |s| s.values.len());
    out.write_all(MAGIC)?;
    out.write_all(&(len as u32).to_le_bytes())?;
    for sig in sigs {
        if sig.values.len() != len {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("signature for {} has length {}, expected {len}", sig.doc_id, sig.values.len()),
            ));
        }
        out.write_all(&(sig.doc_id.len() as u32).to_le_bytes())?;
        out.write_all(sig.doc_id.as_bytes())?;
        for v in &sig.values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<Option<u32>> {
    let mut buf = [0u8; 4];
    match r.read_exact(&mut buf) {
        Ok(()) => Ok(Some(u32::from_le_bytes(buf))),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn read_signatures<R: Read>(mut input: R) -> io::Result<Vec<MinHashSignature>> {
    let mut magic = [0u8; 6];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "not a signature cache"));
    }
    let len = read_u32(&mut input)?
        .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "missing header"))?
        as usize;
    let mut sigs = Vec::new();
    while let Some(id_len) = read_u32(&mut input)? {
        let mut id = vec![0u8; id_len as usize];
        input.read_exact(&mut id)?;
        let doc_id = String::from_utf8(id)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let mut values = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            input.read_exact(&mut buf)?;
            values.push(u64::from_le_bytes(buf));
        }
        sigs.push(MinHashSignature { doc_id, values });
    }
    Ok(sigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_little_endian() {
        let sig = MinHashSignature { doc_id: "ab".into(), values: vec![1, 2] };
        let mut buf = Vec::new();
        write_signatures(&mut buf, &[sig]).unwrap();
        let mut expected = b"MHSIG\x01".to_vec();
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(b"ab");
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.extend_from_slice(&2u64.to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let sig = MinHashSignature { doc_id: "a".into(), values: vec![9; 112] };
        let mut buf = Vec::new();
        write_signatures(&mut buf, &[sig]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_signatures(&buf[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(entries in proptest::collection::vec(("[a-z0-9]{1,8}", proptest::collection::vec(any::<u64>(), 112)), 0..8)) {
            let sigs: Vec<_> = entries
                .into_iter()
                .map(|(doc_id, values)| MinHashSignature { doc_id, values })
                .collect();
            let mut buf = Vec::new();
            write_signatures(&mut buf, &sigs).unwrap();
            prop_assert_eq!(read_signatures(&buf[..]).unwrap(), sigs);
        }
    }
}
