//! Binary vector tables, used for both word vectors and tweet embeddings.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "IPVECv01"
//! dimension  u32
//! count      u64
//! keys       count × (u32 byte length, UTF-8 bytes)
//! rows       count × dimension × f32
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"IPVECv01";

/// Keyed dense rows of a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorTable {
    dimension: usize,
    keys: Vec<String>,
    rows: Vec<f32>,
    index: HashMap<String, usize>,
}

impl VectorTable {
    pub fn new(dimension: usize) -> Self {
        VectorTable {
            dimension,
            keys: Vec::new(),
            rows: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, key: impl Into<String>, row: &[f32]) -> Result<()> {
        if row.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: row.len(),
            });
        }
        let key = key.into();
        if self.index.contains_key(&key) {
            return Err(Error::VectorFile(format!("duplicate key `{key}`")));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.rows.extend_from_slice(row);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.index.get(key).map(|&i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dimension as u32).to_le_bytes())?;
        w.write_all(&(self.keys.len() as u64).to_le_bytes())?;
        for key in &self.keys {
            w.write_all(&(key.len() as u32).to_le_bytes())?;
            w.write_all(key.as_bytes())?;
        }
        for x in &self.rows {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::report::write_atomic(path, |w| {
            self.write_to(w).map_err(|e| Error::io(path, e))
        })
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |what: &str| Error::VectorFile(format!("truncated or corrupt file ({what})"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("magic"))?;
        if &magic != MAGIC {
            return Err(Error::VectorFile("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(|_| bad("dimension"))?;
        let dimension = u32::from_le_bytes(b4) as usize;
        if dimension == 0 {
            return Err(Error::VectorFile("zero dimension".into()));
        }
        r.read_exact(&mut b8).map_err(|_| bad("count"))?;
        let count = u64::from_le_bytes(b8) as usize;

        let mut table = VectorTable::new(dimension);
        let mut keys = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            r.read_exact(&mut b4).map_err(|_| bad("key length"))?;
            let mut buf = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut buf).map_err(|_| bad("key"))?;
            keys.push(String::from_utf8(buf).map_err(|_| bad("key utf-8"))?);
        }
        let mut row = vec![0f32; dimension];
        for key in keys {
            for x in row.iter_mut() {
                r.read_exact(&mut b4).map_err(|_| bad("rows"))?;
                *x = f32::from_le_bytes(b4);
            }
            table.push(key, &row)?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trips(rows in proptest::collection::vec(
            ("[a-z#0-9]{1,8}", proptest::collection::vec(-1e6f32..1e6, 3)), 0..20)
        ) {
            let mut t = VectorTable::new(3);
            for (k, v) in &rows {
                let _ = t.push(k.clone(), v);
            }
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            prop_assert_eq!(VectorTable::read_from(buf.as_slice()).unwrap(), t);
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(VectorTable::read_from(&b"NOTMAGIC"[..]).is_err());
        let mut t = VectorTable::new(2);
        t.push("a", &[1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 1);
        assert!(VectorTable::read_from(buf.as_slice()).is_err());
    }

    #[test]
    fn rejects_wrong_row_width() {
        let mut t = VectorTable::new(2);
        assert!(matches!(
            t.push("a", &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }
}
