use glam::{Quat, Vec3};

use crate::error::FormatError;

pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn i16(&mut self, v: i16) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn vec3(&mut self, v: Vec3) {
        for c in v.to_array() {
            self.f32(c);
        }
    }

    /// w, x, y, z
    pub fn quat(&mut self, q: Quat) {
        for c in [q.w, q.x, q.y, q.z] {
            self.f32(c);
        }
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize, section: &str) -> Result<&'a [u8], FormatError> {
        if n > self.remaining() {
            return Err(FormatError::Truncated {
                section: section.to_string(),
                offset: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Fails before any allocation when `count` elements of `size` bytes
    /// cannot be present.
    pub fn ensure(&self, count: usize, size: usize, section: &str) -> Result<(), FormatError> {
        match count.checked_mul(size) {
            Some(n) if n <= self.remaining() => Ok(()),
            _ => Err(FormatError::Truncated {
                section: section.to_string(),
                offset: self.buf.len(),
            }),
        }
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let b = self.take(4, "header")?;
        let found = [b[0], b[1], b[2], b[3]];
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    pub fn u8(&mut self, section: &str) -> Result<u8, FormatError> {
        Ok(self.take(1, section)?[0])
    }

    pub fn u16(&mut self, section: &str) -> Result<u16, FormatError> {
        let b = self.take(2, section)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn i16(&mut self, section: &str) -> Result<i16, FormatError> {
        let b = self.take(2, section)?;
        Ok(i16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self, section: &str) -> Result<u32, FormatError> {
        let b = self.take(4, section)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f32(&mut self, section: &str) -> Result<f32, FormatError> {
        let b = self.take(4, section)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f32s<const N: usize>(&mut self, section: &str) -> Result<[f32; N], FormatError> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.f32(section)?;
        }
        Ok(out)
    }

    pub fn vec3(&mut self, section: &str) -> Result<Vec3, FormatError> {
        Ok(Vec3::from_array(self.f32s::<3>(section)?))
    }

    pub fn quat(&mut self, section: &str) -> Result<Quat, FormatError> {
        let [w, x, y, z] = self.f32s::<4>(section)?;
        Ok(Quat::from_xyzw(x, y, z, w))
    }

    pub fn finish(&self) -> Result<(), FormatError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }
}

pub(crate) fn check_version(found: u32, expected: u32) -> Result<(), FormatError> {
    if found != expected {
        return Err(FormatError::VersionMismatch { expected, found });
    }
    Ok(())
}
