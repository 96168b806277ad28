use std::sync::mpsc::{channel, Receiver, Sender};

use super::frame::Frame;
use super::Transport;
use crate::error::{Error, Result};

/// One endpoint of a full mesh of channels between worker threads.
pub(crate) struct ChannelTransport {
    senders: Vec<Option<Sender<Frame>>>,
    receivers: Vec<Option<Receiver<Frame>>>,
}

/// Builds `world_size` endpoints, one channel per ordered pair of ranks.
pub(crate) fn mesh(world_size: usize) -> Vec<ChannelTransport> {
    let mut ends: Vec<ChannelTransport> = (0..world_size)
        .map(|_| ChannelTransport {
            senders: (0..world_size).map(|_| None).collect(),
            receivers: (0..world_size).map(|_| None).collect(),
        })
        .collect();
    for from in 0..world_size {
        for to in 0..world_size {
            if from == to {
                continue;
            }
            let (tx, rx) = channel();
            ends[from].senders[to] = Some(tx);
            ends[to].receivers[from] = Some(rx);
        }
    }
    ends
}

impl Transport for ChannelTransport {
    fn send(&mut self, to: usize, frame: Frame) -> Result<()> {
        let tx = self.senders[to]
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("no channel to rank {to}")))?;
        tx.send(frame).map_err(|_| Error::Disconnected {
            rank: to,
            reason: "channel closed".into(),
        })
    }

    fn recv(&mut self, from: usize) -> Result<Frame> {
        let rx = self.receivers[from]
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("no channel from rank {from}")))?;
        rx.recv().map_err(|_| Error::Disconnected {
            rank: from,
            reason: "channel closed".into(),
        })
    }
}
