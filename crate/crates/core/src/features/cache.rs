//! Binary feature-matrix cache.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "ECGFEAT1"
//! 8       8     n_epochs   (u64 LE)
//! 16      8     n_features (u64 LE)
//! 24      8*n   values, f64 LE, row-major
//! ```

use std::io::{Read, Write};

use super::{FeatureError, FeatureVector, N_FEATURES};

pub const CACHE_MAGIC: &[u8; 8] = b"ECGFEAT1";

pub fn write_feature_cache(mut w: impl Write, rows: &[FeatureVector]) -> Result<(), FeatureError> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    w.write_all(&(N_FEATURES as u64).to_le_bytes())?;
    for row in rows {
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_feature_cache(mut r: impl Read) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut head = [0u8; 24];
    r.read_exact(&mut head)?;
    if &head[..8] != CACHE_MAGIC {
        return Err(FeatureError::Cache("bad magic".into()));
    }
    let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
    if d != N_FEATURES {
        return Err(FeatureError::Cache(format!("{d} features per row, expected {N_FEATURES}")));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != n * d * 8 {
        return Err(FeatureError::Cache(format!(
            "payload is {} bytes, header implies {}",
            body.len(),
            n * d * 8
        )));
    }
    Ok(body
        .chunks_exact(d * 8)
        .map(|row| {
            let mut v = [0.0; N_FEATURES];
            for (x, b) in v.iter_mut().zip(row.chunks_exact(8)) {
                *x = f64::from_le_bytes(b.try_into().unwrap());
            }
            v
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let mut rows = vec![[0.0; N_FEATURES]; 2];
        rows[1][38] = -1.5;
        let mut buf = Vec::new();
        write_feature_cache(&mut buf, &rows).unwrap();
        assert_eq!(buf.len(), 24 + 2 * 39 * 8);
        assert_eq!(&buf[..8], b"ECGFEAT1");
        assert_eq!(buf[8], 2);
        assert_eq!(buf[16], 39);
        assert_eq!(&buf[buf.len() - 8..], &(-1.5f64).to_le_bytes());
        assert_eq!(read_feature_cache(&buf[..]).unwrap(), rows);
        assert!(read_feature_cache(&buf[..buf.len() - 1]).is_err());
    }
}
