//! Byte layouts of the four LBF packets.
//!
//! All multi-byte fields are big-endian. Rows follow a 32-bit grid:
//!
//! ```text
//! LevelBuilding (6 bytes)   kind | level | sourceID(2) | seqNum(2)
//! LevelBack    (10 bytes)   kind | 0 | TTL | level | seqNum(2) | targetID(2) | sourceID(2)
//! Query        (10 bytes)   kind | 0 | hopCount | TTL | seqNum(2) | targetID(2) | sourceID(2)
//! DataBack  (10 + n bytes)  kind | 0 | TTL | dataLen | seqNum(2) | targetID(2) | sourceID(2) | data[n]
//! ```
//!
//! Kind codes: 1 LevelBuilding, 2 LevelBack, 3 Query, 4 DataBack.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::NodeId;

/// Level value meaning "not yet assigned"; also the largest 8-bit level.
pub const SENTINEL_LEVEL: u8 = u8::MAX;

pub const LEVEL_BUILDING_LEN: usize = 6;
pub const LEVEL_BACK_LEN: usize = 10;
pub const QUERY_LEN: usize = 10;
pub const DATA_BACK_HEADER_LEN: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum PacketKind {
    LevelBuilding = 1,
    LevelBack = 2,
    Query = 3,
    DataBack = 4,
}

impl PacketKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<PacketKind> {
        match code {
            1 => Some(PacketKind::LevelBuilding),
            2 => Some(PacketKind::LevelBack),
            3 => Some(PacketKind::Query),
            4 => Some(PacketKind::DataBack),
            _ => None,
        }
    }
}

/// Identifies one flood instance: who started it and with which sequence number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryKey {
    pub source_id: NodeId,
    pub seq_num: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelBuildingPacket {
    pub level: u8,
    pub source_id: NodeId,
    pub seq_num: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelBackPacket {
    pub ttl: u8,
    pub level: u8,
    pub target_id: NodeId,
    pub source_id: NodeId,
    pub seq_num: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryPacket {
    pub hop_count: u8,
    pub ttl: u8,
    pub seq_num: u16,
    pub target_id: NodeId,
    pub source_id: NodeId,
}

impl QueryPacket {
    pub fn key(&self) -> QueryKey {
        QueryKey {
            source_id: self.source_id,
            seq_num: self.seq_num,
        }
    }
}

/// `data_len` is derived from `data.len()` on encode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataBackPacket {
    pub ttl: u8,
    pub seq_num: u16,
    pub target_id: NodeId,
    pub source_id: NodeId,
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Packet {
    LevelBuilding(LevelBuildingPacket),
    LevelBack(LevelBackPacket),
    Query(QueryPacket),
    DataBack(DataBackPacket),
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::LevelBuilding(_) => PacketKind::LevelBuilding,
            Packet::LevelBack(_) => PacketKind::LevelBack,
            Packet::Query(_) => PacketKind::Query,
            Packet::DataBack(_) => PacketKind::DataBack,
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self {
            Packet::LevelBuilding(_) => LEVEL_BUILDING_LEN,
            Packet::LevelBack(_) => LEVEL_BACK_LEN,
            Packet::Query(_) => QUERY_LEN,
            Packet::DataBack(d) => DATA_BACK_HEADER_LEN + d.data.len(),
        }
    }
}

impl fmt::Display for Packet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Packet::LevelBuilding(p) => write!(
                f,
                "LB level={} src={} seq={}",
                p.level, p.source_id, p.seq_num
            ),
            Packet::LevelBack(p) => write!(
                f,
                "LBACK ttl={} level={} dst={} src={} seq={}",
                p.ttl, p.level, p.target_id, p.source_id, p.seq_num
            ),
            Packet::Query(p) => write!(
                f,
                "Q hop={} ttl={} dst={} src={} seq={}",
                p.hop_count, p.ttl, p.target_id, p.source_id, p.seq_num
            ),
            Packet::DataBack(p) => write!(
                f,
                "DATA ttl={} len={} dst={} src={} seq={}",
                p.ttl,
                p.data.len(),
                p.target_id,
                p.source_id,
                p.seq_num
            ),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("payload of {0} bytes exceeds the 8-bit dataLen field")]
    PayloadTooLong(usize),
    #[error("level-back level must be 1..=254, got {0}")]
    InvalidLevel(u8),
    #[error("level-back ttl {ttl} exceeds its level {level}")]
    TtlAboveLevel { ttl: u8, level: u8 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unknown packet kind {0:#04x}")]
    UnknownKind(u8),
    #[error("truncated {kind:?} packet: need {needed} bytes, have {actual}")]
    Truncated {
        kind: Option<PacketKind>,
        needed: usize,
        actual: usize,
    },
    #[error("dataLen declares {declared} payload bytes but {actual} follow the header")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("{extra} trailing bytes after a {kind:?} packet")]
    TrailingBytes { kind: PacketKind, extra: usize },
    #[error("padding byte at offset {offset} is {value:#04x}, expected 0")]
    NonZeroPadding { offset: usize, value: u8 },
    #[error("level-back packet carries invalid level {level} / ttl {ttl}")]
    InvalidLevelBack { level: u8, ttl: u8 },
}

pub fn encode(packet: &Packet) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::with_capacity(packet.encoded_len());
    out.push(packet.kind().code());
    match packet {
        Packet::LevelBuilding(p) => {
            out.push(p.level);
            out.extend_from_slice(&p.source_id.0.to_be_bytes());
            out.extend_from_slice(&p.seq_num.to_be_bytes());
        }
        Packet::LevelBack(p) => {
            if p.level == 0 || p.level == SENTINEL_LEVEL {
                return Err(EncodeError::InvalidLevel(p.level));
            }
            if p.ttl > p.level {
                return Err(EncodeError::TtlAboveLevel {
                    ttl: p.ttl,
                    level: p.level,
                });
            }
            out.extend_from_slice(&[0, p.ttl, p.level]);
            out.extend_from_slice(&p.seq_num.to_be_bytes());
            out.extend_from_slice(&p.target_id.0.to_be_bytes());
            out.extend_from_slice(&p.source_id.0.to_be_bytes());
        }
        Packet::Query(p) => {
            out.extend_from_slice(&[0, p.hop_count, p.ttl]);
            out.extend_from_slice(&p.seq_num.to_be_bytes());
            out.extend_from_slice(&p.target_id.0.to_be_bytes());
            out.extend_from_slice(&p.source_id.0.to_be_bytes());
        }
        Packet::DataBack(p) => {
            let len = u8::try_from(p.data.len())
                .map_err(|_| EncodeError::PayloadTooLong(p.data.len()))?;
            out.extend_from_slice(&[0, p.ttl, len]);
            out.extend_from_slice(&p.seq_num.to_be_bytes());
            out.extend_from_slice(&p.target_id.0.to_be_bytes());
            out.extend_from_slice(&p.source_id.0.to_be_bytes());
            out.extend_from_slice(&p.data);
        }
    }
    debug_assert_eq!(out.len(), packet.encoded_len());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Packet, DecodeError> {
    let Some(&code) = bytes.first() else {
        return Err(DecodeError::Truncated {
            kind: None,
            needed: 1,
            actual: 0,
        });
    };
    let kind = PacketKind::from_code(code).ok_or(DecodeError::UnknownKind(code))?;
    let header = match kind {
        PacketKind::LevelBuilding => LEVEL_BUILDING_LEN,
        PacketKind::LevelBack => LEVEL_BACK_LEN,
        PacketKind::Query => QUERY_LEN,
        PacketKind::DataBack => DATA_BACK_HEADER_LEN,
    };
    if bytes.len() < header {
        return Err(DecodeError::Truncated {
            kind: Some(kind),
            needed: header,
            actual: bytes.len(),
        });
    }
    let u16_at = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
    let check_pad = |i: usize| match bytes[i] {
        0 => Ok(()),
        value => Err(DecodeError::NonZeroPadding { offset: i, value }),
    };
    let fixed = |p: Packet| {
        if bytes.len() > header {
            Err(DecodeError::TrailingBytes {
                kind,
                extra: bytes.len() - header,
            })
        } else {
            Ok(p)
        }
    };
    match kind {
        PacketKind::LevelBuilding => fixed(Packet::LevelBuilding(LevelBuildingPacket {
            level: bytes[1],
            source_id: NodeId(u16_at(2)),
            seq_num: u16_at(4),
        })),
        PacketKind::LevelBack => {
            check_pad(1)?;
            let (ttl, level) = (bytes[2], bytes[3]);
            if level == 0 || level == SENTINEL_LEVEL || ttl > level {
                return Err(DecodeError::InvalidLevelBack { level, ttl });
            }
            fixed(Packet::LevelBack(LevelBackPacket {
                ttl,
                level,
                seq_num: u16_at(4),
                target_id: NodeId(u16_at(6)),
                source_id: NodeId(u16_at(8)),
            }))
        }
        PacketKind::Query => {
            check_pad(1)?;
            fixed(Packet::Query(QueryPacket {
                hop_count: bytes[2],
                ttl: bytes[3],
                seq_num: u16_at(4),
                target_id: NodeId(u16_at(6)),
                source_id: NodeId(u16_at(8)),
            }))
        }
        PacketKind::DataBack => {
            check_pad(1)?;
            let declared = bytes[3] as usize;
            let actual = bytes.len() - header;
            if declared != actual {
                return Err(DecodeError::LengthMismatch { declared, actual });
            }
            Ok(Packet::DataBack(DataBackPacket {
                ttl: bytes[2],
                seq_num: u16_at(4),
                target_id: NodeId(u16_at(6)),
                source_id: NodeId(u16_at(8)),
                data: bytes[header..].to_vec(),
            }))
        }
    }
}

pub fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 3);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid hex input: {0}")]
pub struct HexError(String);

/// Accepts whitespace-separated or contiguous hex digits, with optional `0x`
/// prefixes on each group.
pub fn from_hex(text: &str) -> Result<Vec<u8>, HexError> {
    let mut digits = String::new();
    for group in text.split_whitespace() {
        let group = group
            .strip_prefix("0x")
            .or_else(|| group.strip_prefix("0X"))
            .unwrap_or(group);
        digits.push_str(group);
    }
    if !digits.len().is_multiple_of(2) {
        return Err(HexError("odd number of hex digits".into()));
    }
    (0..digits.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&digits[i..i + 2], 16).map_err(|e| HexError(e.to_string())))
        .collect()
}
