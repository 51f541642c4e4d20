use std::fmt;

use serde::{Deserialize, Serialize};

/// Virtual time, in abstract ticks. Local computation takes zero time.
pub type Time = u64;

/// Identifier of a node in a topology. Ids are dense, `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A binary consensus value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Value {
    Zero,
    One,
}

impl Value {
    pub fn flip(self) -> Value {
        match self {
            Value::Zero => Value::One,
            Value::One => Value::Zero,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Value::Zero => 0,
            Value::One => 1,
        }
    }
}

impl From<Value> for u8 {
    fn from(v: Value) -> u8 {
        v.as_u8()
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Value {
        if b {
            Value::One
        } else {
            Value::Zero
        }
    }
}

impl TryFrom<u8> for Value {
    type Error = String;

    fn try_from(b: u8) -> Result<Value, String> {
        match b {
            0 => Ok(Value::Zero),
            1 => Ok(Value::One),
            other => Err(format!("consensus values are binary, got {other}")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Parses a bitstring such as `"0110"` into values.
pub fn parse_values(bits: &str) -> Result<Vec<Value>, String> {
    bits.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(Value::Zero),
            '1' => Ok(Value::One),
            other => Err(format!("invalid value character {other:?}")),
        })
        .collect()
}
