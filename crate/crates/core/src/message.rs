//! Bit-string messages and their two-bit operation encoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::PauliCode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MessageError {
    #[error("invalid character {ch:?} at position {position}")]
    InvalidChar { ch: char, position: usize },
    #[error("declared length {declared} exceeds the {available} bits carried by the operations")]
    TooLong { declared: usize, available: usize },
}

/// An ordered bit string. Storage is zero-padded to an even length; only the
/// first `declared_length` bits belong to the message.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MessageBits {
    bits: Vec<bool>,
    declared_length: usize,
}

impl MessageBits {
    pub fn new(mut bits: Vec<bool>) -> Self {
        let declared_length = bits.len();
        if bits.len() % 2 == 1 {
            bits.push(false);
        }
        Self { bits, declared_length }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn declared_length(&self) -> usize {
        self.declared_length
    }

    pub fn is_empty(&self) -> bool {
        self.declared_length == 0
    }

    /// Message bits without padding.
    pub fn bits(&self) -> &[bool] {
        &self.bits[..self.declared_length]
    }

    pub fn padded(&self) -> &[bool] {
        &self.bits
    }

    /// Accepts `0`/`1` strings or `0x`-prefixed hex (most significant bit first).
    pub fn parse(text: &str) -> Result<Self, MessageError> {
        let text = text.trim();
        if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
            let mut bits = Vec::with_capacity(hex.len() * 4);
            for (i, ch) in hex.chars().enumerate() {
                let nibble = ch
                    .to_digit(16)
                    .ok_or(MessageError::InvalidChar { ch, position: i + 2 })?;
                bits.extend((0..4).rev().map(|k| nibble >> k & 1 == 1));
            }
            return Ok(Self::new(bits));
        }
        text.chars()
            .enumerate()
            .map(|(position, ch)| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(MessageError::InvalidChar { ch, position }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::new)
    }
}

impl fmt::Display for MessageBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for MessageBits {
    type Err = MessageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for MessageBits {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MessageBits {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Maps consecutive bit pairs to operations: `00→U0, 01→U1, 10→U2, 11→U3`.
pub fn encode_bits(message: &MessageBits) -> Vec<PauliCode> {
    message
        .padded()
        .chunks_exact(2)
        .map(|pair| PauliCode::from_bits(pair[0], pair[1]))
        .collect()
}

pub fn decode_ops(ops: &[PauliCode], declared_length: usize) -> Result<MessageBits, MessageError> {
    let available = ops.len() * 2;
    if declared_length > available {
        return Err(MessageError::TooLong {
            declared: declared_length,
            available,
        });
    }
    let mut bits: Vec<bool> = ops
        .iter()
        .flat_map(|op| {
            let (h, l) = op.bits();
            [h, l]
        })
        .collect();
    bits.truncate(declared_length);
    Ok(MessageBits::new(bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PauliCode::*;

    fn m(s: &str) -> MessageBits {
        s.parse().unwrap()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(encode_bits(&m("011110")), vec![U1, U3, U2]);
        assert_eq!(encode_bits(&m("101100")), vec![U2, U3, U0]);
        assert_eq!(encode_bits(&m("")), vec![]);
        let one = m("1");
        assert_eq!(one.declared_length(), 1);
        assert_eq!(encode_bits(&one), vec![U2]);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_ops(&[U1, U3, U2], 6).unwrap().to_string(), "011110");
        assert_eq!(decode_ops(&[U2], 1).unwrap().to_string(), "1");
        assert_eq!(decode_ops(&[], 0).unwrap(), MessageBits::empty());
        assert_eq!(
            decode_ops(&[U2], 3),
            Err(MessageError::TooLong { declared: 3, available: 2 })
        );
    }

    #[test]
    fn parse_forms() {
        assert_eq!(m("0xA3").to_string(), "10100011");
        assert_eq!(m(" 0101\n").to_string(), "0101");
        assert_eq!(
            MessageBits::parse("01x1"),
            Err(MessageError::InvalidChar { ch: 'x', position: 2 })
        );
        assert!(MessageBits::parse("0xZ").is_err());
    }

    #[test]
    fn padding_is_even_and_zero() {
        let msg = m("101");
        assert_eq!(msg.padded(), &[true, false, true, false]);
        assert_eq!(msg.bits(), &[true, false, true]);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let msg = MessageBits::new(bits);
            let ops = encode_bits(&msg);
            prop_assert_eq!(ops.len(), msg.padded().len() / 2);
            prop_assert_eq!(decode_ops(&ops, msg.declared_length()).unwrap(), msg);
        }
    }
}
