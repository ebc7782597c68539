//! MSB-first bit stream reader/writer shared by the Huffman and Elias-Fano
//! codecs. Bit `i` of a stream lives in byte `i / 8` at position `7 - i % 8`.

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    buf: Vec<u8>,
    len_bits: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitWriter { buf: Vec::with_capacity(bits.div_ceil(8)), len_bits: 0 }
    }

    #[inline]
    pub fn write_bit(&mut self, bit: bool) {
        let byte = self.len_bits / 8;
        if byte == self.buf.len() {
            self.buf.push(0);
        }
        if bit {
            self.buf[byte] |= 1 << (7 - self.len_bits % 8);
        }
        self.len_bits += 1;
    }

    /// Writes the `n` low bits of `value`, most significant first. `n <= 64`.
    #[inline]
    pub fn write_bits(&mut self, value: u64, n: usize) {
        debug_assert!(n <= 64);
        for i in (0..n).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    pub fn len_bits(&self) -> usize {
        self.len_bits
    }

    /// Byte buffer (final partial byte zero-padded) plus the exact bit length.
    pub fn into_parts(self) -> (Vec<u8>, usize) {
        (self.buf, self.len_bits)
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    len_bits: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8], len_bits: usize) -> Self {
        debug_assert!(len_bits <= data.len() * 8);
        BitReader { data, pos: 0, len_bits }
    }

    pub fn from_bytes(data: &'a [u8]) -> Self {
        BitReader { data, pos: 0, len_bits: data.len() * 8 }
    }

    #[inline]
    pub fn read_bit(&mut self) -> Option<bool> {
        if self.pos >= self.len_bits {
            return None;
        }
        let bit = (self.data[self.pos / 8] >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Some(bit)
    }

    /// Reads `n` bits MSB-first; `None` if the stream is exhausted.
    #[inline]
    pub fn read_bits(&mut self, n: usize) -> Option<u64> {
        if self.pos + n > self.len_bits {
            return None;
        }
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | (self.read_bit().unwrap() as u64);
        }
        Some(v)
    }

    pub fn remaining_bits(&self) -> usize {
        self.len_bits - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_order_is_msb_first() {
        let mut w = BitWriter::new();
        w.write_bits(0b101, 3);
        let (bytes, n) = w.into_parts();
        assert_eq!(n, 3);
        assert_eq!(bytes, vec![0b1010_0000]);
    }

    proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec((0u64..u64::MAX, 1usize..=64), 0..50)) {
            let mut w = BitWriter::new();
            for &(v, n) in &values {
                w.write_bits(v & (u64::MAX >> (64 - n)), n);
            }
            let (bytes, len) = w.into_parts();
            let mut r = BitReader::new(&bytes, len);
            for &(v, n) in &values {
                prop_assert_eq!(r.read_bits(n).unwrap(), v & (u64::MAX >> (64 - n)));
            }
            prop_assert_eq!(r.remaining_bits(), 0);
        }
    }
}
