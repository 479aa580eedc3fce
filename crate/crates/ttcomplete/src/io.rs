//! Binary container for tensor-train representations.
//!
//! # Byte layout (all integers and floats little-endian)
//!
//! ```text
//! offset  size  content
//!      0     8  magic "TTRBIN1\n"
//!      8     8  u64 d (number of modes, ≥ 2)
//!     16   8·d  u64 mode sizes n_0 … n_{d-1}
//!      …  8·(d+1)  u64 ranks r_0 … r_d (boundaries included, r_0 = r_d = 1)
//!      …          f64 block data, mode-major: for each mode s, the slices
//!                 G_s(0) … G_s(n_s−1), each stored column-major as
//!                 r_s · r_{s+1} values
//! ```
//!
//! No padding, no trailing data.  Ranks are stored redundantly (they are
//! implied by consistency) so a reader can validate the file shape before
//! touching the payload.

use std::io::{Read, Write};
use std::path::Path;

use crate::block::MatrixBlock;
use crate::error::{Error, Result};
use crate::tt::TTRep;

pub const MAGIC: &[u8; 8] = b"TTRBIN1\n";

/// Largest plausible mode count / mode size accepted by the reader, as a
/// guard against garbage headers allocating absurd buffers.
const SANE_LIMIT: u64 = 1 << 32;

pub fn save_tt(path: impl AsRef<Path>, tt: &TTRep) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    write_tt(&mut file, tt)
}

pub fn load_tt(path: impl AsRef<Path>) -> Result<TTRep> {
    let mut file = std::fs::File::open(path)?;
    read_tt(&mut file)
}

pub fn write_tt<W: Write>(w: &mut W, tt: &TTRep) -> Result<()> {
    let d = tt.order();
    w.write_all(MAGIC)?;
    w.write_all(&(d as u64).to_le_bytes())?;
    for n in tt.mode_sizes() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for r in tt.ranks() {
        w.write_all(&(r as u64).to_le_bytes())?;
    }
    for s in 0..d {
        let block = tt.block(s);
        for i in 0..block.len() {
            for v in block.slice(i).iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("truncated file while reading {what}")))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_dim<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = read_u64(r, what)?;
    if v == 0 || v >= SANE_LIMIT {
        return Err(Error::Format(format!("implausible {what}: {v}")));
    }
    Ok(v as usize)
}

pub fn read_tt<R: Read>(r: &mut R) -> Result<TTRep> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file shorter than the magic header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("not a tensor-train container".into()));
    }
    let d = read_dim(r, "mode count")?;
    if d < 2 {
        return Err(Error::Format("need at least two modes".into()));
    }
    let dims: Vec<usize> = (0..d)
        .map(|s| read_dim(r, &format!("mode size {s}")))
        .collect::<Result<_>>()?;
    let ranks: Vec<usize> = (0..=d)
        .map(|s| read_dim(r, &format!("rank {s}")))
        .collect::<Result<_>>()?;
    if ranks[0] != 1 || ranks[d] != 1 {
        return Err(Error::Format("boundary ranks must be 1".into()));
    }
    let mut blocks = Vec::with_capacity(d);
    for s in 0..d {
        let (rows, cols) = (ranks[s], ranks[s + 1]);
        let per_slice = rows * cols;
        let mut data = vec![0.0f64; dims[s] * per_slice];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format(format!("truncated block data in mode {s}")))?;
            *v = f64::from_le_bytes(buf);
            if !v.is_finite() {
                return Err(Error::Format(format!("non-finite entry in mode {s}")));
            }
        }
        blocks.push(MatrixBlock::from_fn(dims[s], rows, cols, |i, a, b| {
            data[i * per_slice + b * rows + a]
        }));
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing)? {
        0 => {}
        _ => return Err(Error::Format("trailing bytes after the block data".into())),
    }
    TTRep::new(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_tt;

    fn roundtrip(tt: &TTRep) -> TTRep {
        let mut buf = Vec::new();
        write_tt(&mut buf, tt).unwrap();
        read_tt(&mut &buf[..]).unwrap()
    }

    #[test]
    fn roundtrip_preserves_every_entry() {
        let tt = random_tt(&[3, 5, 2, 4], 3, 7).unwrap();
        let back = roundtrip(&tt);
        assert_eq!(back.mode_sizes(), tt.mode_sizes());
        assert_eq!(back.ranks(), tt.ranks());
        assert_eq!(back.materialize().unwrap(), tt.materialize().unwrap());
    }

    #[test]
    fn container_size_is_exactly_as_documented() {
        let tt = random_tt(&[3, 4], 2, 1).unwrap();
        let mut buf = Vec::new();
        write_tt(&mut buf, &tt).unwrap();
        // 8 magic + 8 d + 16 dims + 24 ranks + (3·1·2 + 4·2·1) · 8 payload.
        assert_eq!(buf.len(), 8 + 8 + 16 + 24 + (6 + 8) * 8);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let tt = random_tt(&[3, 3], 2, 2).unwrap();
        let mut buf = Vec::new();
        write_tt(&mut buf, &tt).unwrap();
        buf[0] ^= 0x40;
        assert!(matches!(read_tt(&mut &buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn truncation_anywhere_is_rejected() {
        let tt = random_tt(&[3, 4, 3], 2, 5).unwrap();
        let mut buf = Vec::new();
        write_tt(&mut buf, &tt).unwrap();
        for cut in [4, 8, 15, 40, 80, buf.len() - 1] {
            let r = read_tt(&mut &buf[..cut]);
            assert!(r.is_err(), "cut at {cut} slipped through");
        }
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let tt = random_tt(&[3, 3], 1, 3).unwrap();
        let mut buf = Vec::new();
        write_tt(&mut buf, &tt).unwrap();
        buf.push(0);
        assert!(matches!(read_tt(&mut &buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn corrupt_header_fields_are_rejected() {
        let tt = random_tt(&[3, 3], 2, 4).unwrap();
        let mut buf = Vec::new();
        write_tt(&mut buf, &tt).unwrap();

        // Zero mode count.
        let mut z = buf.clone();
        z[8..16].copy_from_slice(&0u64.to_le_bytes());
        assert!(read_tt(&mut &z[..]).is_err());

        // Absurd mode size.
        let mut z = buf.clone();
        z[16..24].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(read_tt(&mut &z[..]).is_err());

        // Broken boundary rank (r_0 = 2): shape validation must refuse.
        let mut z = buf.clone();
        z[32..40].copy_from_slice(&2u64.to_le_bytes());
        assert!(read_tt(&mut &z[..]).is_err());
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let tt = random_tt(&[3, 3], 1, 6).unwrap();
        let mut buf = Vec::new();
        write_tt(&mut buf, &tt).unwrap();
        let off = buf.len() - 8;
        buf[off..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(read_tt(&mut &buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ttr");
        let tt = random_tt(&[4, 4, 4], 2, 11).unwrap();
        save_tt(&path, &tt).unwrap();
        let back = load_tt(&path).unwrap();
        assert_eq!(back.materialize().unwrap(), tt.materialize().unwrap());
    }
}
