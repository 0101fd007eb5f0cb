//! Canonical Huffman coding of label/relation tokens.
//!
//! Both ends derive the same codebook from the knowledge-base vocabulary, so
//! only mutually known code lengths matter and no table is transmitted.
//! Tokens outside the vocabulary are sent as the reserved escape codeword
//! followed by a LEB128 byte length and the raw UTF-8 bytes, written as whole
//! 8-bit units into the same MSB-first bit stream.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use thiserror::Error;

/// Longest codeword the `u64` code registers can hold.
pub const MAX_CODE_LEN: u8 = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EntropyError {
    #[error("cannot build a codebook from an empty frequency table")]
    EmptyFrequencies,
    #[error("frequency table needs codewords longer than {MAX_CODE_LEN} bits")]
    CodeTooLong,
    #[error("invalid codeword prefix at bit {bit_offset}")]
    InvalidPrefix { bit_offset: u64 },
    #[error("bit stream truncated at bit {bit_offset}")]
    Truncated { bit_offset: u64 },
    #[error("escaped literal at bit {bit_offset} is not valid UTF-8")]
    InvalidUtf8 { bit_offset: u64 },
    #[error("{remaining} unread bits after the last token at bit {bit_offset}")]
    TrailingBits { bit_offset: u64, remaining: u64 },
    #[error("padding bits after bit {bit_offset} are not zero")]
    NonZeroPadding { bit_offset: u64 },
    #[error("byte length {bytes} does not match bit count {bits}")]
    LengthMismatch { bytes: usize, bits: u64 },
}

/// A codebook entry: either the escape marker or a vocabulary token.
/// The escape sorts before every token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Esc,
    Token(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Codeword {
    pub bits: u64,
    pub len: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    lengths: BTreeMap<Symbol, u8>,
    codes: HashMap<String, Codeword>,
    esc: Codeword,
    /// Symbols in canonical order: by length, then symbol order.
    canonical: Vec<Symbol>,
    /// Per length `l`: first canonical code, number of codes, index into `canonical`.
    first_code: Vec<u64>,
    count: Vec<u64>,
    offset: Vec<usize>,
}

struct Node {
    weight: u64,
    children: Option<(usize, usize)>,
}

impl Codebook {
    /// Builds a Huffman codebook; `Esc` is added with count 1 when absent.
    ///
    /// Merge order is by (weight, smallest symbol in the subtree), which makes
    /// the tree, and therefore the lengths, a pure function of the table.
    pub fn build(frequencies: &BTreeMap<String, u64>) -> Result<Self, EntropyError> {
        if frequencies.is_empty() {
            return Err(EntropyError::EmptyFrequencies);
        }
        let mut symbols: Vec<(Symbol, u64)> = vec![(Symbol::Esc, 1)];
        symbols.extend(
            frequencies
                .iter()
                .map(|(t, &c)| (Symbol::Token(t.clone()), c.max(1))),
        );

        let mut nodes: Vec<Node> = symbols
            .iter()
            .map(|(_, w)| Node {
                weight: *w,
                children: None,
            })
            .collect();
        let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| Reverse((n.weight, i, i)))
            .collect();
        while heap.len() > 1 {
            let Reverse((wa, ra, a)) = heap.pop().expect("len > 1");
            let Reverse((wb, rb, b)) = heap.pop().expect("len > 1");
            nodes.push(Node {
                weight: wa + wb,
                children: Some((a, b)),
            });
            heap.push(Reverse((wa + wb, ra.min(rb), nodes.len() - 1)));
        }

        let mut lengths = BTreeMap::new();
        let root = nodes.len() - 1;
        let mut stack = vec![(root, 0u32)];
        while let Some((id, depth)) = stack.pop() {
            match nodes[id].children {
                Some((a, b)) => {
                    stack.push((a, depth + 1));
                    stack.push((b, depth + 1));
                }
                None => {
                    if depth > u32::from(MAX_CODE_LEN) {
                        return Err(EntropyError::CodeTooLong);
                    }
                    lengths.insert(symbols[id].0.clone(), depth as u8);
                }
            }
        }
        debug_assert!(nodes[root].weight > 0);
        Ok(Self::from_lengths(lengths))
    }

    /// Assigns canonical codewords to the given lengths.
    pub fn from_lengths(lengths: BTreeMap<Symbol, u8>) -> Self {
        let mut canonical: Vec<(u8, Symbol)> = lengths.iter().map(|(s, &l)| (l, s.clone())).collect();
        canonical.sort();
        let max_len = canonical.last().map_or(0, |(l, _)| *l) as usize;

        let mut first_code = vec![0u64; max_len + 1];
        let mut count = vec![0u64; max_len + 1];
        let mut offset = vec![0usize; max_len + 1];
        for (l, _) in &canonical {
            count[*l as usize] += 1;
        }
        let mut code = 0u64;
        let mut index = 0usize;
        for l in 1..=max_len {
            // count[0] is always zero, so the first length starts at code 0.
            code = (code + count[l - 1]) << 1;
            first_code[l] = code;
            offset[l] = index;
            index += count[l] as usize;
        }

        let mut codes = HashMap::new();
        let mut esc = Codeword { bits: 0, len: 0 };
        let mut next = first_code.clone();
        for (l, sym) in &canonical {
            let cw = Codeword {
                bits: next[*l as usize],
                len: *l,
            };
            next[*l as usize] += 1;
            match sym {
                Symbol::Esc => esc = cw,
                Symbol::Token(t) => {
                    codes.insert(t.clone(), cw);
                }
            }
        }
        Codebook {
            lengths,
            codes,
            esc,
            canonical: canonical.into_iter().map(|(_, s)| s).collect(),
            first_code,
            count,
            offset,
        }
    }

    pub fn lengths(&self) -> &BTreeMap<Symbol, u8> {
        &self.lengths
    }

    pub fn codeword(&self, token: &str) -> Option<Codeword> {
        self.codes.get(token).copied()
    }

    pub fn esc(&self) -> Codeword {
        self.esc
    }

    pub fn contains(&self, token: &str) -> bool {
        self.codes.contains_key(token)
    }

    /// Bits needed to send `token`, escape path included.
    pub fn token_bits(&self, token: &str) -> u64 {
        match self.codes.get(token) {
            Some(cw) => u64::from(cw.len),
            None => u64::from(self.esc.len) + 8 * varint_len(token.len() as u64) + 8 * token.len() as u64,
        }
    }

    /// Kraft sum as an exact fraction `numerator / 2^max_len`.
    pub fn kraft_fraction(&self) -> (u128, u128) {
        let max = self.lengths.values().copied().max().unwrap_or(0) as u32;
        let num = self
            .lengths
            .values()
            .map(|&l| 1u128 << (max - u32::from(l)))
            .sum();
        (num, 1u128 << max)
    }

    pub fn kraft_sum(&self) -> f64 {
        let (n, d) = self.kraft_fraction();
        n as f64 / d as f64
    }

    fn max_len(&self) -> usize {
        self.first_code.len().saturating_sub(1)
    }
}

/// Free-function form of [`Codebook::build`].
pub fn build_codebook(frequencies: &BTreeMap<String, u64>) -> Result<Codebook, EntropyError> {
    Codebook::build(frequencies)
}

pub(crate) fn varint_len(mut v: u64) -> u64 {
    let mut n = 1;
    while v >= 0x80 {
        v >>= 7;
        n += 1;
    }
    n
}

/// Bytes plus the exact number of meaningful bits (the rest is zero padding).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bitstream {
    pub bytes: Vec<u8>,
    pub bit_len: u64,
}

#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `n` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, n: u8) {
        for i in (0..n).rev() {
            let bit = (value >> i) & 1;
            if self.bit_len.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if bit == 1 {
                let last = self.bytes.last_mut().expect("pushed");
                *last |= 0x80 >> (self.bit_len % 8);
            }
            self.bit_len += 1;
        }
    }

    pub fn write_byte(&mut self, b: u8) {
        self.write_bits(u64::from(b), 8);
    }

    /// LEB128, one 8-bit group at a time.
    pub fn write_varint(&mut self, mut v: u64) {
        loop {
            let byte = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                self.write_byte(byte);
                break;
            }
            self.write_byte(byte | 0x80);
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn finish(self) -> Bitstream {
        Bitstream {
            bytes: self.bytes,
            bit_len: self.bit_len,
        }
    }
}

#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    bit_len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(stream: &'a Bitstream) -> Result<Self, EntropyError> {
        Self::from_parts(&stream.bytes, stream.bit_len)
    }

    pub fn from_parts(bytes: &'a [u8], bit_len: u64) -> Result<Self, EntropyError> {
        if bytes.len() as u64 != bit_len.div_ceil(8) {
            return Err(EntropyError::LengthMismatch {
                bytes: bytes.len(),
                bits: bit_len,
            });
        }
        if !bit_len.is_multiple_of(8) {
            let last = bytes[bytes.len() - 1];
            if last & (0xffu8 >> (bit_len % 8)) != 0 {
                return Err(EntropyError::NonZeroPadding { bit_offset: bit_len });
            }
        }
        Ok(BitReader {
            bytes,
            bit_len,
            pos: 0,
        })
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.bit_len - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool, EntropyError> {
        if self.pos >= self.bit_len {
            return Err(EntropyError::Truncated { bit_offset: self.pos });
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, n: u8) -> Result<u64, EntropyError> {
        if self.remaining() < u64::from(n) {
            return Err(EntropyError::Truncated { bit_offset: self.pos });
        }
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | u64::from(self.read_bit()?);
        }
        Ok(v)
    }

    pub fn read_byte(&mut self) -> Result<u8, EntropyError> {
        Ok(self.read_bits(8)? as u8)
    }

    pub fn read_varint(&mut self) -> Result<u64, EntropyError> {
        let start = self.pos;
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = self.read_byte()?;
            v |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(EntropyError::InvalidPrefix { bit_offset: start })
    }

    /// Fails unless every meaningful bit has been consumed.
    pub fn expect_end(&self) -> Result<(), EntropyError> {
        match self.remaining() {
            0 => Ok(()),
            remaining => Err(EntropyError::TrailingBits {
                bit_offset: self.pos,
                remaining,
            }),
        }
    }
}

/// Writes tokens (and raw fields in between) against a codebook.
pub struct TokenWriter<'c> {
    codebook: &'c Codebook,
    bits: BitWriter,
    tokens: u64,
}

impl<'c> TokenWriter<'c> {
    pub fn new(codebook: &'c Codebook) -> Self {
        TokenWriter {
            codebook,
            bits: BitWriter::new(),
            tokens: 0,
        }
    }

    pub fn write_token(&mut self, token: &str) {
        self.tokens += 1;
        match self.codebook.codeword(token) {
            Some(cw) => self.bits.write_bits(cw.bits, cw.len),
            None => {
                let esc = self.codebook.esc();
                self.bits.write_bits(esc.bits, esc.len);
                self.bits.write_varint(token.len() as u64);
                for &b in token.as_bytes() {
                    self.bits.write_byte(b);
                }
            }
        }
    }

    pub fn write_varint(&mut self, v: u64) {
        self.bits.write_varint(v);
    }

    pub fn write_u16(&mut self, v: u16) {
        self.bits.write_bits(u64::from(v), 16);
    }

    pub fn token_count(&self) -> u64 {
        self.tokens
    }

    pub fn finish(self) -> (Bitstream, u64) {
        (self.bits.finish(), self.tokens)
    }
}

pub struct TokenReader<'c, 'b> {
    codebook: &'c Codebook,
    bits: BitReader<'b>,
    tokens: u64,
}

impl<'c, 'b> TokenReader<'c, 'b> {
    pub fn new(codebook: &'c Codebook, bytes: &'b [u8], bit_len: u64) -> Result<Self, EntropyError> {
        Ok(TokenReader {
            codebook,
            bits: BitReader::from_parts(bytes, bit_len)?,
            tokens: 0,
        })
    }

    pub fn read_token(&mut self) -> Result<String, EntropyError> {
        let start = self.bits.position();
        let cb = self.codebook;
        let mut code = 0u64;
        for len in 1..=cb.max_len() {
            code = (code << 1) | u64::from(self.bits.read_bit()?);
            let first = cb.first_code[len];
            if code >= first && code - first < cb.count[len] {
                let sym = &cb.canonical[cb.offset[len] + (code - first) as usize];
                self.tokens += 1;
                return match sym {
                    Symbol::Token(t) => Ok(t.clone()),
                    Symbol::Esc => self.read_literal(),
                };
            }
        }
        Err(EntropyError::InvalidPrefix { bit_offset: start })
    }

    fn read_literal(&mut self) -> Result<String, EntropyError> {
        let start = self.bits.position();
        let len = self.bits.read_varint()?;
        if len.saturating_mul(8) > self.bits.remaining() {
            return Err(EntropyError::Truncated {
                bit_offset: self.bits.position(),
            });
        }
        let bytes = (0..len)
            .map(|_| self.bits.read_byte())
            .collect::<Result<Vec<u8>, _>>()?;
        String::from_utf8(bytes).map_err(|_| EntropyError::InvalidUtf8 { bit_offset: start })
    }

    pub fn read_varint(&mut self) -> Result<u64, EntropyError> {
        self.bits.read_varint()
    }

    pub fn read_u16(&mut self) -> Result<u16, EntropyError> {
        Ok(self.bits.read_bits(16)? as u16)
    }

    pub fn token_count(&self) -> u64 {
        self.tokens
    }

    pub fn position(&self) -> u64 {
        self.bits.position()
    }

    pub fn expect_end(&self) -> Result<(), EntropyError> {
        self.bits.expect_end()
    }
}

pub fn encode<S: AsRef<str>>(codebook: &Codebook, tokens: &[S]) -> Bitstream {
    let mut w = TokenWriter::new(codebook);
    for t in tokens {
        w.write_token(t.as_ref());
    }
    w.finish().0
}

pub fn decode(codebook: &Codebook, bits: &Bitstream, token_count: u64) -> Result<Vec<String>, EntropyError> {
    let mut r = TokenReader::new(codebook, &bits.bytes, bits.bit_len)?;
    let mut out = Vec::with_capacity(token_count.min(1 << 20) as usize);
    for _ in 0..token_count {
        out.push(r.read_token()?);
    }
    r.expect_end()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn freqs(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn tok(s: &str) -> Symbol {
        Symbol::Token(s.into())
    }

    #[test]
    fn small_table() {
        let cb = Codebook::build(&freqs(&[("a", 2), ("b", 1), ("c", 1)])).unwrap();
        let l = cb.lengths();
        assert!(l[&tok("a")] <= 2);
        assert_eq!(cb.kraft_fraction().0, cb.kraft_fraction().1);
    }

    #[test]
    fn single_token_plus_escape() {
        let cb = Codebook::build(&freqs(&[("only", 10)])).unwrap();
        assert_eq!(cb.lengths()[&Symbol::Esc], 1);
        assert_eq!(cb.lengths()[&tok("only")], 1);
        assert_eq!(cb.esc().bits, 0);
        assert_eq!(cb.codeword("only").unwrap().bits, 1);
    }

    #[test]
    fn balanced_four_tokens() {
        // ESC (count 1) joins four equal tokens; with large counts every real
        // token ends up at depth two or three and the escape deepest.
        let cb = Codebook::build(&freqs(&[("a", 1000), ("b", 1000), ("c", 1000), ("d", 1000)])).unwrap();
        let lens: Vec<u8> = ["a", "b", "c", "d"].iter().map(|t| cb.lengths()[&tok(t)]).collect();
        assert!(lens.iter().filter(|&&l| l == 2).count() >= 3, "{lens:?}");
        assert_eq!(cb.kraft_sum(), 1.0);
    }

    #[test]
    fn equal_lengths_are_all_two() {
        let lengths = ["a", "b", "c", "d"].iter().map(|t| (tok(t), 2)).collect();
        let cb = Codebook::from_lengths(lengths);
        let codes: Vec<u64> = ["a", "b", "c", "d"]
            .iter()
            .map(|t| cb.codeword(t).unwrap().bits)
            .collect();
        assert_eq!(codes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn canonical_order_is_length_then_bytes() {
        let mut lengths = BTreeMap::new();
        lengths.insert(Symbol::Esc, 3);
        lengths.insert(tok("x"), 1);
        lengths.insert(tok("b"), 3);
        lengths.insert(tok("a"), 2);
        let cb = Codebook::from_lengths(lengths);
        assert_eq!(cb.codeword("x").unwrap(), Codeword { bits: 0b0, len: 1 });
        assert_eq!(cb.codeword("a").unwrap(), Codeword { bits: 0b10, len: 2 });
        assert_eq!(cb.esc(), Codeword { bits: 0b110, len: 3 });
        assert_eq!(cb.codeword("b").unwrap(), Codeword { bits: 0b111, len: 3 });
    }

    #[test]
    fn empty_table_rejected() {
        assert_eq!(Codebook::build(&BTreeMap::new()), Err(EntropyError::EmptyFrequencies));
    }

    #[test]
    fn escape_layout_bit_count() {
        let cb = Codebook::build(&freqs(&[("man", 5), ("hat", 3)])).unwrap();
        let bits = encode(&cb, &["zebra"]);
        assert_eq!(bits.bit_len, u64::from(cb.esc().len) + 8 + 40);
        assert_eq!(decode(&cb, &bits, 1).unwrap(), vec!["zebra"]);
    }

    #[test]
    fn in_vocabulary_bit_count() {
        let cb = Codebook::build(&freqs(&[("man", 5), ("hat", 3), ("wearing", 2)])).unwrap();
        let toks = ["man", "wearing", "hat", "man"];
        let bits = encode(&cb, &toks);
        let expected: u64 = toks.iter().map(|t| u64::from(cb.codeword(t).unwrap().len)).sum();
        assert_eq!(bits.bit_len, expected);
        assert_eq!(bits.bytes.len() as u64, expected.div_ceil(8));
    }

    #[test]
    fn empty_token_list() {
        let cb = Codebook::build(&freqs(&[("a", 1)])).unwrap();
        let bits = encode::<&str>(&cb, &[]);
        assert_eq!(bits, Bitstream::default());
        assert!(decode(&cb, &bits, 0).unwrap().is_empty());
    }

    #[test]
    fn truncated_stream() {
        let cb = Codebook::build(&freqs(&[("alpha", 1), ("beta", 1), ("gamma", 9)])).unwrap();
        let bits = encode(&cb, &["alpha", "beta", "unknown-token"]);
        let cut = Bitstream {
            bytes: bits.bytes[..bits.bytes.len() - 2].to_vec(),
            bit_len: (bits.bytes.len() as u64 - 2) * 8,
        };
        assert!(matches!(
            decode(&cb, &cut, 3),
            Err(EntropyError::Truncated { .. })
        ));
        assert!(matches!(
            decode(&cb, &bits, 2),
            Err(EntropyError::TrailingBits { .. })
        ));
    }

    #[test]
    fn padding_must_be_zero() {
        let cb = Codebook::build(&freqs(&[("a", 4), ("b", 1)])).unwrap();
        let mut bits = encode(&cb, &["a"]);
        assert!(!bits.bit_len.is_multiple_of(8));
        assert_eq!(decode(&cb, &bits, 1).unwrap(), vec!["a"]);
        bits.bytes[0] |= 1;
        assert!(matches!(
            decode(&cb, &bits, 1),
            Err(EntropyError::NonZeroPadding { .. })
        ));
    }

    #[test]
    fn varint_roundtrip_in_bits() {
        let mut w = BitWriter::new();
        w.write_bits(1, 1);
        for v in [0u64, 1, 127, 128, 300, u64::MAX] {
            w.write_varint(v);
        }
        let s = w.finish();
        let mut r = BitReader::new(&s).unwrap();
        assert!(r.read_bit().unwrap());
        for v in [0u64, 1, 127, 128, 300, u64::MAX] {
            assert_eq!(r.read_varint().unwrap(), v);
        }
        r.expect_end().unwrap();
        assert_eq!(varint_len(127), 1);
        assert_eq!(varint_len(128), 2);
    }

    fn table() -> impl Strategy<Value = BTreeMap<String, u64>> {
        prop::collection::btree_map("[a-z]{1,5}", 1u64..1000, 1..30)
    }

    proptest! {
        #[test]
        fn prefix_free_and_kraft(f in table()) {
            let cb = Codebook::build(&f).unwrap();
            let (num, den) = cb.kraft_fraction();
            prop_assert!(num <= den);
            let words: Vec<Codeword> = f.keys().map(|t| cb.codeword(t).unwrap()).chain([cb.esc()]).collect();
            for (i, a) in words.iter().enumerate() {
                for b in &words[i + 1..] {
                    let (short, long) = if a.len <= b.len { (a, b) } else { (b, a) };
                    prop_assert_ne!(long.bits >> (long.len - short.len), short.bits);
                }
            }
        }

        #[test]
        fn encode_is_deterministic(f in table(), picks in prop::collection::vec(any::<prop::sample::Index>(), 0..40)) {
            let keys: Vec<&String> = f.keys().collect();
            let toks: Vec<&str> = picks.iter().map(|i| keys[i.index(keys.len())].as_str()).collect();
            let a = encode(&Codebook::build(&f).unwrap(), &toks);
            let b = encode(&Codebook::build(&f).unwrap(), &toks);
            prop_assert_eq!(a, b);
        }
    }
}
