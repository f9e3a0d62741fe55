//! Small binary-format helpers shared by the shard and checkpoint writers:
//! a CRC-64 checksum and little-endian cursor types with allocation guards.

/// CRC-64/XZ (ECMA-182 polynomial, reflected, init = xorout = !0).
/// Guarantees detection of any single-byte corruption.
pub fn crc64(bytes: &[u8]) -> u64 {
    const fn build_table() -> [u64; 256] {
        // Reflected polynomial of 0x42F0E1EBA9EA3693.
        const POLY: u64 = 0xC96C_5795_D787_0F42;
        let mut table = [0u64; 256];
        let mut i = 0;
        while i < 256 {
            let mut crc = i as u64;
            let mut b = 0;
            while b < 8 {
                crc = if crc & 1 == 1 { (crc >> 1) ^ POLY } else { crc >> 1 };
                b += 1;
            }
            table[i] = crc;
            i += 1;
        }
        table
    }
    const TABLE: [u64; 256] = build_table();

    let mut crc = !0u64;
    for &b in bytes {
        let idx = ((crc ^ u64::from(b)) & 0xFF) as usize;
        crc = (crc >> 8) ^ TABLE[idx];
    }
    !crc
}

/// Append-only little-endian byte buffer.
#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf
    }

    /// Append the CRC-64 of everything written so far and return the buffer.
    pub fn finish_with_checksum(mut self) -> Vec<u8> {
        let crc = crc64(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

/// Bounds-checked little-endian reader. Every read that would pass the end
/// of the buffer reports corruption instead of panicking, so a flipped
/// length byte cannot cause a huge allocation or an out-of-range slice.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'a str,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], what: &'a str) -> Self {
        Self { buf, pos: 0, what }
    }

    fn corrupt(&self, detail: &str) -> crate::Error {
        crate::Error::Corrupt(format!("{}: {}", self.what, detail))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> crate::Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.corrupt("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn get_u8(&mut self) -> crate::Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u32(&mut self) -> crate::Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> crate::Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64(&mut self) -> crate::Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f32(&mut self) -> crate::Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_str(&mut self) -> crate::Result<String> {
        let n = self.get_u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.corrupt("invalid utf-8 string"))
    }

    pub fn expect_end(&self) -> crate::Result<()> {
        if self.remaining() != 0 {
            return Err(self.corrupt("trailing bytes"));
        }
        Ok(())
    }
}

/// Validate and strip the trailing CRC-64 of a framed buffer, returning the
/// payload slice.
pub fn check_trailing_checksum<'a>(buf: &'a [u8], what: &str) -> crate::Result<&'a [u8]> {
    if buf.len() < 8 {
        return Err(crate::Error::Corrupt(format!("{what}: too short")));
    }
    let (payload, tail) = buf.split_at(buf.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let actual = crc64(payload);
    if stored != actual {
        return Err(crate::Error::Corrupt(format!(
            "{what}: checksum mismatch (stored {stored:#018x}, computed {actual:#018x})"
        )));
    }
    Ok(payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc64_known_vector() {
        // CRC-64/XZ("123456789") = 0x995DC9BBDF1939FA
        assert_eq!(crc64(b"123456789"), 0x995D_C9BB_DF19_39FA);
    }

    #[test]
    fn checksum_roundtrip_and_single_byte_flip() {
        let mut w = ByteWriter::new();
        w.put_str("hello");
        w.put_u64(42);
        let framed = w.finish_with_checksum();
        let payload = check_trailing_checksum(&framed, "test").unwrap();
        let mut r = ByteReader::new(payload, "test");
        assert_eq!(r.get_str().unwrap(), "hello");
        assert_eq!(r.get_u64().unwrap(), 42);
        r.expect_end().unwrap();

        for i in 0..framed.len() {
            let mut bad = framed.clone();
            bad[i] ^= 0x01;
            assert!(check_trailing_checksum(&bad, "test").is_err(), "flip at {i} undetected");
        }
    }

    #[test]
    fn reader_rejects_overrun_lengths() {
        let mut w = ByteWriter::new();
        w.put_u32(1_000_000); // claims a huge string
        let buf = w.into_inner();
        let mut r = ByteReader::new(&buf, "test");
        assert!(r.get_str().is_err());
    }
}
