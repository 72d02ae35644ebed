//! Bounds-checked little/big-endian reads over byte slices.
//!
//! Every read failure reports the absolute offset at which the read was
//! attempted, so callers can wrap it in their own layer-specific error.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct OutOfBounds(pub usize);

pub(crate) fn slice(buf: &[u8], off: usize, len: usize) -> Result<&[u8], OutOfBounds> {
    let end = off.checked_add(len).ok_or(OutOfBounds(off))?;
    buf.get(off..end).ok_or(OutOfBounds(off))
}

pub(crate) fn u8_at(buf: &[u8], off: usize) -> Result<u8, OutOfBounds> {
    buf.get(off).copied().ok_or(OutOfBounds(off))
}

pub(crate) fn u16_le(buf: &[u8], off: usize) -> Result<u16, OutOfBounds> {
    let b = slice(buf, off, 2)?;
    Ok(u16::from_le_bytes([b[0], b[1]]))
}

pub(crate) fn u32_le(buf: &[u8], off: usize) -> Result<u32, OutOfBounds> {
    let b = slice(buf, off, 4)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub(crate) fn u16_be(buf: &[u8], off: usize) -> Result<u16, OutOfBounds> {
    let b = slice(buf, off, 2)?;
    Ok(u16::from_be_bytes([b[0], b[1]]))
}

pub(crate) fn u32_be(buf: &[u8], off: usize) -> Result<u32, OutOfBounds> {
    let b = slice(buf, off, 4)?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Reads an unsigned LEB128 value of at most five bytes; returns the value
/// and the offset just past it.
pub(crate) fn uleb128(buf: &[u8], off: usize) -> Result<(u32, usize), OutOfBounds> {
    let mut result: u32 = 0;
    let mut pos = off;
    for i in 0..5 {
        let b = u8_at(buf, pos)?;
        pos += 1;
        if i == 4 && b > 0x0f {
            return Err(OutOfBounds(off));
        }
        result |= ((b & 0x7f) as u32) << (7 * i);
        if b & 0x80 == 0 {
            return Ok((result, pos));
        }
    }
    Err(OutOfBounds(off))
}

pub(crate) fn write_uleb128(out: &mut Vec<u8>, mut v: u32) {
    loop {
        let b = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leb_round_trip() {
        for v in [0u32, 1, 127, 128, 300, 16_383, 16_384, u32::MAX] {
            let mut buf = Vec::new();
            write_uleb128(&mut buf, v);
            assert_eq!(uleb128(&buf, 0).unwrap(), (v, buf.len()));
        }
    }

    #[test]
    fn truncated_reads_report_offset() {
        let buf = [1u8, 2, 3];
        assert_eq!(u32_le(&buf, 0), Err(OutOfBounds(0)));
        assert_eq!(u16_le(&buf, 2), Err(OutOfBounds(2)));
        assert_eq!(uleb128(&[0x80, 0x80], 0), Err(OutOfBounds(2)));
        assert_eq!(slice(&buf, usize::MAX, 2), Err(OutOfBounds(usize::MAX)));
    }
}
