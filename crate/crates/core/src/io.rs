//! CT1 binary tensor files.
//!
//! Layout: magic bytes `CT1\0`, little-endian u32 order N, N little-endian
//! u64 dimensions, then 2 * product(dims) little-endian f64 values
//! interleaved (re, im) in row-major order. Matrices are written as order-2
//! tensors.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{ComplexMatrix, ComplexTensor, RealMatrix};

const MAGIC: [u8; 4] = *b"CT1\0";

pub fn write_tensor(path: &Path, t: &ComplexTensor) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let mut buf = Vec::with_capacity(4 + 4 + 8 * t.dims().len() + 16 * t.data().len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&(t.dims().len() as u32).to_le_bytes());
    for &d in t.dims() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for z in t.data() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    f.write_all(&buf)?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &ComplexMatrix) -> Result<()> {
    let t = ComplexTensor::new(vec![m.rows(), m.cols()], m.data().to_vec())?;
    write_tensor(path, &t)
}

pub fn write_real_matrix(path: &Path, m: &RealMatrix) -> Result<()> {
    write_matrix(path, &m.to_complex())
}

pub fn read_tensor(path: &Path) -> Result<ComplexTensor> {
    let mut f = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    let need = |n: usize, offset: usize, what: &str| -> Result<()> {
        if bytes.len() < offset + n {
            return Err(Error::BadFile {
                detail: format!(
                    "truncated while reading {what}: need {} bytes at offset {offset}, file has {}",
                    n,
                    bytes.len()
                ),
            });
        }
        Ok(())
    };
    need(4, 0, "magic")?;
    if bytes[0..4] != MAGIC {
        return Err(Error::BadFile {
            detail: format!("bad magic {:?}, expected CT1\\0", &bytes[0..4]),
        });
    }
    need(4, 4, "order")?;
    let order = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if order == 0 || order > 16 {
        return Err(Error::BadFile {
            detail: format!("implausible tensor order {order}"),
        });
    }
    let mut offset = 8;
    let mut dims = Vec::with_capacity(order);
    for k in 0..order {
        need(8, offset, &format!("dimension {k}"))?;
        let d = u64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap()) as usize;
        if d == 0 {
            return Err(Error::BadFile {
                detail: format!("zero dimension at index {k}"),
            });
        }
        dims.push(d);
        offset += 8;
    }
    let count: usize = dims.iter().product();
    need(16 * count, offset, "values")?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let re = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[offset + 8..offset + 16].try_into().unwrap());
        data.push(Complex64::new(re, im));
        offset += 16;
    }
    if offset != bytes.len() {
        return Err(Error::BadFile {
            detail: format!(
                "trailing bytes: expected file length {offset}, found {}",
                bytes.len()
            ),
        });
    }
    ComplexTensor::new(dims, data)
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix> {
    let t = read_tensor(path)?;
    if t.order() != 2 {
        return Err(Error::BadFile {
            detail: format!("expected order-2 tensor, got order {}", t.order()),
        });
    }
    ComplexMatrix::new(t.dims()[0], t.dims()[1], t.data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{cx, rng};

    #[test]
    fn round_trip() {
        let mut rg = rng(901);
        let t = ComplexTensor::from_fn(vec![2, 3, 2], |_| cx(&mut rg));
        let dir = std::env::temp_dir().join("cps5_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.ct1");
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(t, back);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn truncated_file_reports_offset() {
        let mut rg = rng(903);
        let t = ComplexTensor::from_fn(vec![2, 2], |_| cx(&mut rg));
        let dir = std::env::temp_dir().join("cps5_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.ct1");
        write_tensor(&path, &t).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        let err = read_tensor(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("offset"), "message: {msg}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = std::env::temp_dir().join("cps5_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ct1");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("magic"));
        std::fs::remove_file(&path).ok();
    }
}
