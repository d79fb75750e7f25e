//! Binary channel file: `"HAF1"`, `u32 N`, `u32 P`, `u8 has_support`, then
//! `N×P` complex gains as little-endian `f64` pairs in subcarrier-major order,
//! then (optionally) `N` support bytes in `{0, 1}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::ChannelRealization;
use crate::error::{Error, Result};

pub const CHANNEL_MAGIC: &[u8; 4] = b"HAF1";

pub fn save_channel_file(channel: &ChannelRealization, path: impl AsRef<Path>) -> Result<()> {
    let n = u32::try_from(channel.n).map_err(|_| Error::Dimension("N exceeds u32".into()))?;
    let p = u32::try_from(channel.p).map_err(|_| Error::Dimension("P exceeds u32".into()))?;
    if channel.gains.len() != channel.n * channel.p {
        return Err(Error::Dimension("gain count differs from N×P".into()));
    }
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(CHANNEL_MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&p.to_le_bytes())?;
    w.write_all(&[u8::from(channel.support.is_some())])?;
    for g in &channel.gains {
        w.write_all(&g.re.to_le_bytes())?;
        w.write_all(&g.im.to_le_bytes())?;
    }
    if let Some(s) = &channel.support {
        if s.len() != channel.n {
            return Err(Error::Dimension("support length differs from N".into()));
        }
        let bytes: Vec<u8> = s.iter().map(|&b| u8::from(b)).collect();
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_channel_file(path: impl AsRef<Path>) -> Result<ChannelRealization> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    let eof = |e: std::io::Error| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::UnexpectedEof(path.to_path_buf())
        } else {
            Error::Io(e)
        }
    };
    let bad = |reason: String| Error::BadChannelFile {
        path: path.to_path_buf(),
        reason,
    };

    let mut magic = [0u8; 4];
    match r.read_exact(&mut magic) {
        Ok(()) if &magic == CHANNEL_MAGIC => {}
        Ok(()) => return Err(Error::BadMagic(path.to_path_buf())),
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => {
            return Err(Error::BadMagic(path.to_path_buf()))
        }
        Err(e) => return Err(Error::Io(e)),
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(eof)?;
    let n = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf).map_err(eof)?;
    let p = u32::from_le_bytes(u32buf) as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag).map_err(eof)?;
    let has_support = match flag[0] {
        0 => false,
        1 => true,
        other => return Err(bad(format!("has_support byte is {other}, expected 0 or 1"))),
    };
    if n == 0 || p == 0 {
        return Err(bad(format!("dimension mismatch: N={n}, P={p}")));
    }
    let count = n
        .checked_mul(p)
        .ok_or_else(|| bad("dimension overflow".into()))?;

    let mut gains = Vec::with_capacity(count.min(1 << 24));
    let mut f64buf = [0u8; 8];
    for idx in 0..count {
        r.read_exact(&mut f64buf).map_err(eof)?;
        let re = f64::from_le_bytes(f64buf);
        r.read_exact(&mut f64buf).map_err(eof)?;
        let im = f64::from_le_bytes(f64buf);
        if !re.is_finite() || !im.is_finite() {
            return Err(bad(format!(
                "non-finite gain at antenna {}, subcarrier {}",
                idx % n,
                idx / n
            )));
        }
        gains.push(Complex64::new(re, im));
    }
    let support = if has_support {
        let mut bytes = vec![0u8; n];
        r.read_exact(&mut bytes).map_err(eof)?;
        let mut s = Vec::with_capacity(n);
        for (i, b) in bytes.into_iter().enumerate() {
            match b {
                0 => s.push(false),
                1 => s.push(true),
                other => return Err(bad(format!("support byte {i} is {other}"))),
            }
        }
        Some(s)
    } else {
        None
    };
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(bad("dimension mismatch: trailing bytes after payload".into()));
    }
    let mut out = ChannelRealization::from_gains(n, p, gains)?;
    out.support = support;
    Ok(out)
}
