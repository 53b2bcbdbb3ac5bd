//! Binary checkpoint format. All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "GDCKPT01"
//! 8       1     value width in bytes (4 = f32, 8 = f64)
//! 9       1     activation (0 = relu, 1 = identity)
//! 10      2     reserved, zero
//! 12      32    blocks, width, input_dim, classes as u64
//! 44      ...   for each dense map (input projection, block 1 inner,
//!               block 1 outer, ..., head):
//!                 rows u64, cols u64, rows*cols weights row-major,
//!                 len u64, len biases
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Params, ResidualNet, Scalar};
use crate::error::{Error, Result};
use crate::net::NetShape;

pub const MAGIC: &[u8; 8] = b"GDCKPT01";

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_value<T: Scalar>(out: &mut Vec<u8>, v: T) {
    match T::WIDTH {
        4 => out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes()),
        _ => out.extend_from_slice(&v.to_f64_lossy().to_le_bytes()),
    }
}

pub fn to_bytes<T: Scalar>(net: &ResidualNet<T>) -> Vec<u8> {
    let shape = net.shape();
    let mut out = Vec::with_capacity(44 + net.params.num_params() * T::WIDTH as usize);
    out.extend_from_slice(MAGIC);
    out.push(T::WIDTH);
    out.push(match net.activation {
        Activation::Relu => 0,
        Activation::Identity => 1,
    });
    out.extend_from_slice(&[0, 0]);
    for v in [shape.blocks, shape.width, shape.input_dim, shape.classes] {
        put_u64(&mut out, v as u64);
    }
    for d in net.params.dense_maps() {
        put_u64(&mut out, d.w.nrows() as u64);
        put_u64(&mut out, d.w.ncols() as u64);
        d.w.iter().for_each(|&v| put_value(&mut out, v));
        put_u64(&mut out, d.b.len() as u64);
        d.b.iter().for_each(|&v| put_value(&mut out, v));
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::CorruptData {
            path: self.origin.to_path_buf(),
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.corrupt(format!("need {n} more bytes, file ends")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize_expect(&mut self, expected: usize, what: &str) -> Result<()> {
        let at = self.pos;
        let v = self.u64()?;
        if v != expected as u64 {
            self.pos = at;
            return Err(self.corrupt(format!("{what} is {v}, expected {expected}")));
        }
        Ok(())
    }

    fn value<T: Scalar>(&mut self) -> Result<T> {
        let v = if T::WIDTH == 4 {
            f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64
        } else {
            f64::from_le_bytes(self.take(8)?.try_into().unwrap())
        };
        if !v.is_finite() {
            self.pos -= T::WIDTH as usize;
            return Err(self.corrupt("non-finite parameter"));
        }
        Ok(T::from_f64_lossy(v))
    }
}

fn encoded_len(shape: NetShape, value_width: usize) -> Option<usize> {
    let map = |i: usize, o: usize| -> Option<usize> {
        i.checked_mul(o)?
            .checked_add(o)?
            .checked_mul(value_width)?
            .checked_add(24)
    };
    let block = map(shape.width, shape.width)?.checked_mul(2)?;
    44usize
        .checked_add(map(shape.input_dim, shape.width)?)?
        .checked_add(block.checked_mul(shape.blocks)?)?
        .checked_add(map(shape.width, shape.classes)?)
}

pub fn from_bytes<T: Scalar>(buf: &[u8], origin: &Path) -> Result<ResidualNet<T>> {
    let mut r = Reader {
        buf,
        pos: 0,
        origin,
    };
    if r.take(8)? != MAGIC {
        r.pos = 0;
        return Err(r.corrupt("bad magic"));
    }
    let width = r.take(1)?[0];
    if width != T::WIDTH {
        r.pos -= 1;
        return Err(r.corrupt(format!(
            "checkpoint stores {width}-byte values, caller asked for {}",
            T::WIDTH
        )));
    }
    let activation = match r.take(1)?[0] {
        0 => Activation::Relu,
        1 => Activation::Identity,
        other => {
            r.pos -= 1;
            return Err(r.corrupt(format!("unknown activation tag {other}")));
        }
    };
    r.take(2)?;
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = usize::try_from(r.u64()?).map_err(|_| r.corrupt("dimension overflows usize"))?;
    }
    let shape = NetShape {
        blocks: dims[0],
        width: dims[1],
        input_dim: dims[2],
        classes: dims[3],
    };
    shape.validate().map_err(|e| r.corrupt(e.to_string()))?;
    match encoded_len(shape, T::WIDTH as usize) {
        Some(n) if n == buf.len() => {}
        Some(n) if n > buf.len() => {
            return Err(r.corrupt(format!(
                "declared shape needs {n} bytes, file has {}",
                buf.len()
            )))
        }
        Some(_) => {}
        None => return Err(r.corrupt("declared shape overflows")),
    }

    let mut params = Params::<T>::zeros(shape);
    for d in params.dense_maps_mut() {
        let (rows, cols) = d.w.dim();
        r.usize_expect(rows, "weight rows")?;
        r.usize_expect(cols, "weight cols")?;
        let w = (0..rows * cols)
            .map(|_| r.value())
            .collect::<Result<Vec<T>>>()?;
        d.w = Array2::from_shape_vec((rows, cols), w).expect("sized above");
        r.usize_expect(cols, "bias length")?;
        let b = (0..cols).map(|_| r.value()).collect::<Result<Vec<T>>>()?;
        d.b = Array1::from_vec(b);
    }
    if r.pos != buf.len() {
        return Err(r.corrupt("trailing bytes after last tensor"));
    }
    Ok(ResidualNet { params, activation })
}

pub fn save<T: Scalar>(net: &ResidualNet<T>, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: &Path) -> Result<ResidualNet<T>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&buf, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::RngState;
    use crate::net::Dense;

    fn net() -> ResidualNet<f64> {
        let mut rng = RngState::new(21);
        let shape = NetShape {
            blocks: 3,
            width: 4,
            input_dim: 2,
            classes: 3,
        };
        let mut n = ResidualNet::init(shape, &mut rng).unwrap();
        n.params.head = Dense::gaussian(4, 3, 1.0, &mut rng);
        n.params.blocks[1].inner.b.fill(0.25);
        n
    }

    #[test]
    fn round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let n = net();
        save(&n, &path).unwrap();
        let back: ResidualNet<f64> = load(&path).unwrap();
        assert_eq!(back, n);

        let n32 = n.cast::<f32>().with_activation(Activation::Identity);
        save(&n32, &path).unwrap();
        assert_eq!(load::<f32>(&path).unwrap(), n32);
        assert!(matches!(
            load::<f64>(&path),
            Err(Error::CorruptData { offset: 8, .. })
        ));
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&net());
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(bytes[8], 8);
        assert_eq!(bytes[9], 0);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 4);
        // first tensor: input projection 2x4
        assert_eq!(u64::from_le_bytes(bytes[44..52].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[52..60].try_into().unwrap()), 4);
        let params = net().params.num_params();
        let tensors = net().params.dense_maps().len();
        assert_eq!(bytes.len(), 44 + params * 8 + tensors * 24);
    }

    #[test]
    fn truncated_and_corrupt() {
        let bytes = to_bytes(&net());
        let p = Path::new("mem");
        let short = &bytes[..bytes.len() - 3];
        assert!(matches!(
            from_bytes::<f64>(short, p),
            Err(Error::CorruptData { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes::<f64>(&bad, p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes::<f64>(&extra, p).is_err());
        let mut nan = bytes;
        let at = 44 + 16;
        nan[at..at + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            from_bytes::<f64>(&nan, p),
            Err(Error::CorruptData { offset, .. }) if offset == at as u64
        ));
    }
}
