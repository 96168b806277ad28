//! Message framing shared by both backends.
//!
//! On the wire a frame is `[u32 length][u8 kind][payload]`, little-endian,
//! where `length` counts payload bytes only.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    Handshake = 0,
    Broadcast = 1,
    Scatter = 2,
    Gather = 3,
    AllGather = 4,
    Reduce = 5,
    AllReduce = 6,
    Barrier = 7,
    /// Sent by the coordinator when it rejects a collective.
    Abort = 0xFF,
}

impl MessageKind {
    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => Self::Handshake,
            1 => Self::Broadcast,
            2 => Self::Scatter,
            3 => Self::Gather,
            4 => Self::AllGather,
            5 => Self::Reduce,
            6 => Self::AllReduce,
            7 => Self::Barrier,
            0xFF => Self::Abort,
            other => return Err(Error::Protocol(format!("unknown message kind {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: MessageKind,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: MessageKind, payload: Vec<u8>) -> Self {
        Self { kind, payload }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let len = u32::try_from(self.payload.len())
            .map_err(|_| std::io::Error::other("frame payload exceeds u32::MAX bytes"))?;
        let mut header = [0u8; 5];
        header[..4].copy_from_slice(&len.to_le_bytes());
        header[4] = self.kind as u8;
        w.write_all(&header)?;
        w.write_all(&self.payload)?;
        w.flush()
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; 5];
        r.read_exact(&mut header)?;
        let len = u32::from_le_bytes([header[0], header[1], header[2], header[3]]) as usize;
        let kind = MessageKind::from_u8(header[4])?;
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Self { kind, payload })
    }
}

/// Handshake payload: `[u32 rank][u32 world_size]` followed by optional extra bytes.
pub fn handshake(rank: usize, world_size: usize, extra: &[u8]) -> Frame {
    let mut payload = Vec::with_capacity(8 + extra.len());
    payload.extend_from_slice(&(rank as u32).to_le_bytes());
    payload.extend_from_slice(&(world_size as u32).to_le_bytes());
    payload.extend_from_slice(extra);
    Frame::new(MessageKind::Handshake, payload)
}

pub fn parse_handshake(frame: &Frame) -> Result<(usize, usize, &[u8])> {
    if frame.kind != MessageKind::Handshake || frame.payload.len() < 8 {
        return Err(Error::Protocol(format!(
            "expected handshake, got {:?} with {} bytes",
            frame.kind,
            frame.payload.len()
        )));
    }
    let p = &frame.payload;
    let rank = u32::from_le_bytes([p[0], p[1], p[2], p[3]]) as usize;
    let world = u32::from_le_bytes([p[4], p[5], p[6], p[7]]) as usize;
    Ok((rank, world, &p[8..]))
}
