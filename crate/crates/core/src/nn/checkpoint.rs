//! Binary parameter checkpoints.
//!
//! Network file (all integers and floats little-endian):
//!
//! ```text
//! magic      4 bytes   "PNET"
//! version    u32       1
//! n_sizes    u32       number of layer sizes (layers + 1)
//! sizes      u64 × n_sizes
//! params     f64 × Σ (fan_in + 1)·fan_out
//!            per layer: weights row-major (fan_in × fan_out), then bias
//! ```
//!
//! Optimizer file:
//!
//! ```text
//! magic      4 bytes   "PADM"
//! version    u32       1
//! lr, beta1, beta2, epsilon   f64 × 4
//! step       u64
//! len        u64
//! first      f64 × len
//! second     f64 × len
//! ```
//!
//! Floats are stored by bit pattern, so `load(save(x)) == x` exactly.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::{Adam, DenseNet, NnError, Result};

pub const NET_MAGIC: &[u8; 4] = b"PNET";
pub const ADAM_MAGIC: &[u8; 4] = b"PADM";
pub const FORMAT_VERSION: u32 = 1;

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

fn check_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(NnError::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    Ok(())
}

pub fn write_net(net: &DenseNet, w: &mut impl Write) -> Result<()> {
    w.write_all(NET_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let sizes = net.layer_sizes();
    w.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for &s in sizes {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    for v in net.flat_params() {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_net(r: &mut impl Read) -> Result<DenseNet> {
    check_header(r, NET_MAGIC)?;
    let n_sizes = read_u32(r)? as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(NnError::Checkpoint(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| read_u64(r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    if sizes.iter().any(|&s| s == 0 || s > 1 << 20) {
        return Err(NnError::Checkpoint(format!("implausible layer sizes {sizes:?}")));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in sizes.windows(2) {
        let w = read_f64s(r, pair[0] * pair[1])?;
        let b = read_f64s(r, pair[1])?;
        weights.push(
            Array2::from_shape_vec((pair[0], pair[1]), w)
                .map_err(|e| NnError::Checkpoint(e.to_string()))?,
        );
        biases.push(Array1::from_vec(b));
    }
    DenseNet::from_parts(weights, biases)
}

pub fn write_adam(opt: &Adam, w: &mut impl Write) -> Result<()> {
    w.write_all(ADAM_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for v in [opt.lr, opt.beta1, opt.beta2, opt.epsilon] {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    w.write_all(&opt.step.to_le_bytes())?;
    let (first, second) = opt.moments();
    w.write_all(&(first.len() as u64).to_le_bytes())?;
    for v in first.iter().chain(second) {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_adam(r: &mut impl Read) -> Result<Adam> {
    check_header(r, ADAM_MAGIC)?;
    let lr = read_f64(r)?;
    let beta1 = read_f64(r)?;
    let beta2 = read_f64(r)?;
    let epsilon = read_f64(r)?;
    let step = read_u64(r)?;
    let len = read_u64(r)? as usize;
    if len > 1 << 28 {
        return Err(NnError::Checkpoint(format!("implausible moment length {len}")));
    }
    let first = read_f64s(r, len)?;
    let second = read_f64s(r, len)?;
    Ok(Adam::from_parts(lr, beta1, beta2, epsilon, step, first, second))
}

pub fn save_net(net: &DenseNet, path: &std::path::Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_net(net, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_net(path: &std::path::Path) -> Result<DenseNet> {
    read_net(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_adam(opt: &Adam, path: &std::path::Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_adam(opt, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_adam(path: &std::path::Path) -> Result<Adam> {
    read_adam(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn net_round_trip_is_bit_exact() {
        let net = DenseNet::seeded(&[5, 7, 3], 11);
        let mut buf = Vec::new();
        write_net(&net, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 3 * 8 + net.param_count() * 8);
        let back = read_net(&mut buf.as_slice()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn adam_round_trip() {
        let mut opt = Adam::new(4, 3e-4);
        let mut p = vec![0.1, 0.2, 0.3, 0.4];
        opt.step_slice(&mut p, &[1.0, -1.0, 0.5, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_adam(&opt, &mut buf).unwrap();
        assert_eq!(read_adam(&mut buf.as_slice()).unwrap(), opt);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut buf = Vec::new();
        write_net(&DenseNet::zeros(&[1, 1]), &mut buf).unwrap();
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(matches!(read_net(&mut wrong.as_slice()), Err(NnError::Checkpoint(_))));
        let mut wrong = buf.clone();
        wrong[4] = 9;
        assert!(matches!(read_net(&mut wrong.as_slice()), Err(NnError::Checkpoint(_))));
        assert!(read_net(&mut &buf[..buf.len() - 1]).is_err());
    }
}
