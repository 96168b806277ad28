//! SPMD worlds and blocking collective communication.
//!
//! Every collective is coordinated by rank 0: each other rank sends its
//! contribution to rank 0, rank 0 validates kinds, roots and lengths,
//! computes the result and replies to everyone. Reductions therefore always
//! accumulate in ascending rank order on one worker, which makes results
//! bitwise reproducible and identical across backends.

mod frame;
mod inproc;
pub mod multiproc;

use std::cell::RefCell;
use std::panic::{self, AssertUnwindSafe};
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use frame::{Frame, MessageKind};

use crate::error::{Error, Result};
use crate::scalar::{decode, encode, Scalar};

pub(crate) trait Transport: Send {
    fn send(&mut self, to: usize, frame: Frame) -> Result<()>;
    fn recv(&mut self, from: usize) -> Result<Frame>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Worker threads joined by channels.
    InProc,
    /// Worker processes joined by TCP loopback streams.
    MultiProc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollectiveKind {
    Broadcast,
    Scatter,
    Gather,
    AllGather,
    Reduce,
    AllReduce,
    Barrier,
}

impl CollectiveKind {
    fn message_kind(self) -> MessageKind {
        match self {
            Self::Broadcast => MessageKind::Broadcast,
            Self::Scatter => MessageKind::Scatter,
            Self::Gather => MessageKind::Gather,
            Self::AllGather => MessageKind::AllGather,
            Self::Reduce => MessageKind::Reduce,
            Self::AllReduce => MessageKind::AllReduce,
            Self::Barrier => MessageKind::Barrier,
        }
    }
}

/// A worker's handle on its world.
pub struct Communicator {
    rank: usize,
    world_size: usize,
    backend: Backend,
    transport: RefCell<Box<dyn Transport>>,
}

impl std::fmt::Debug for Communicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Communicator")
            .field("rank", &self.rank)
            .field("world_size", &self.world_size)
            .field("backend", &self.backend)
            .finish()
    }
}

/// Per-rank RNG seed: `base + rank`.
pub fn rank_seed(base: u64, rank: usize) -> u64 {
    base.wrapping_add(rank as u64)
}

struct Arrival<T> {
    kind: MessageKind,
    root: usize,
    data: Vec<T>,
}

impl Communicator {
    pub(crate) fn new(
        rank: usize,
        world_size: usize,
        backend: Backend,
        transport: Box<dyn Transport>,
    ) -> Self {
        Self {
            rank,
            world_size,
            backend,
            transport: RefCell::new(transport),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn world_size(&self) -> usize {
        self.world_size
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn is_root(&self) -> bool {
        self.rank == 0
    }

    /// A generator seeded with `base + rank`.
    pub fn rank_rng(&self, base: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(rank_seed(base, self.rank))
    }

    fn check_root(&self, root: usize) -> Result<()> {
        if root >= self.world_size {
            return Err(Error::Config(format!(
                "root {root} outside world of size {}",
                self.world_size
            )));
        }
        Ok(())
    }

    /// Every rank receives a copy of `root`'s buffer. All ranks pass
    /// buffers of the same length.
    pub fn broadcast<T: Scalar>(&self, root: usize, buf: &[T]) -> Result<Vec<T>> {
        self.check_root(root)?;
        self.run(CollectiveKind::Broadcast, root, buf)
    }

    /// Rank `k` receives the `k`-th of `world_size` equal parts of `root`'s
    /// buffer. Non-root ranks may pass any buffer; it is ignored.
    pub fn scatter<T: Scalar>(&self, root: usize, buf: &[T]) -> Result<Vec<T>> {
        self.check_root(root)?;
        self.run(CollectiveKind::Scatter, root, buf)
    }

    /// Concatenation of all buffers in rank order, delivered to `root` only.
    pub fn gather<T: Scalar>(&self, root: usize, buf: &[T]) -> Result<Option<Vec<T>>> {
        self.check_root(root)?;
        let out = self.run(CollectiveKind::Gather, root, buf)?;
        Ok((self.rank == root).then_some(out))
    }

    pub fn all_gather<T: Scalar>(&self, buf: &[T]) -> Result<Vec<T>> {
        self.run(CollectiveKind::AllGather, 0, buf)
    }

    /// Elementwise sum, accumulated in ascending rank order, at `root` only.
    pub fn reduce<T: Scalar>(&self, root: usize, buf: &[T]) -> Result<Option<Vec<T>>> {
        self.check_root(root)?;
        let out = self.run(CollectiveKind::Reduce, root, buf)?;
        Ok((self.rank == root).then_some(out))
    }

    pub fn all_reduce<T: Scalar>(&self, buf: &[T]) -> Result<Vec<T>> {
        self.run(CollectiveKind::AllReduce, 0, buf)
    }

    pub fn all_reduce_scalar(&self, v: f64) -> Result<f64> {
        Ok(self.all_reduce(&[v])?[0])
    }

    pub fn barrier(&self) -> Result<()> {
        self.run::<f64>(CollectiveKind::Barrier, 0, &[])?;
        Ok(())
    }

    /// Uniform entry point over all collectives. `root` is required for
    /// rooted kinds and ignored otherwise; the result is `None` where the
    /// kind delivers nothing to this rank.
    pub fn collective<T: Scalar>(
        &self,
        kind: CollectiveKind,
        root: Option<usize>,
        local: &[T],
    ) -> Result<Option<Vec<T>>> {
        let need_root = || {
            root.ok_or_else(|| Error::Config(format!("{kind:?} requires a root")))
        };
        Ok(match kind {
            CollectiveKind::Broadcast => Some(self.broadcast(need_root()?, local)?),
            CollectiveKind::Scatter => Some(self.scatter(need_root()?, local)?),
            CollectiveKind::Gather => self.gather(need_root()?, local)?,
            CollectiveKind::AllGather => Some(self.all_gather(local)?),
            CollectiveKind::Reduce => self.reduce(need_root()?, local)?,
            CollectiveKind::AllReduce => Some(self.all_reduce(local)?),
            CollectiveKind::Barrier => {
                self.barrier()?;
                None
            }
        })
    }

    fn sends_data(kind: CollectiveKind, rank: usize, root: usize) -> bool {
        match kind {
            CollectiveKind::Broadcast | CollectiveKind::Scatter => rank == root,
            CollectiveKind::Barrier => false,
            _ => true,
        }
    }

    fn arrival_payload<T: Scalar>(kind: CollectiveKind, rank: usize, root: usize, buf: &[T]) -> Vec<u8> {
        let mut p = Vec::with_capacity(13 + buf.len() * T::BYTES);
        p.push(T::DTYPE);
        p.extend_from_slice(&(root as u32).to_le_bytes());
        p.extend_from_slice(&(buf.len() as u64).to_le_bytes());
        if Self::sends_data(kind, rank, root) {
            p.extend_from_slice(&encode(buf));
        }
        p
    }

    fn parse_arrival<T: Scalar>(
        frame: Frame,
        from: usize,
        root_rank_sends: impl Fn(usize) -> bool,
    ) -> Result<Arrival<T>> {
        let p = &frame.payload;
        if p.len() < 13 {
            return Err(Error::Protocol(format!("short arrival frame from rank {from}")));
        }
        if p[0] != T::DTYPE {
            return Err(Error::Protocol(format!(
                "rank {from} sent dtype {} where {} was expected",
                p[0],
                T::DTYPE
            )));
        }
        let root = u32::from_le_bytes([p[1], p[2], p[3], p[4]]) as usize;
        let mut lb = [0u8; 8];
        lb.copy_from_slice(&p[5..13]);
        let len = u64::from_le_bytes(lb) as usize;
        let data = if root_rank_sends(root) {
            let body = &p[13..];
            if body.len() != len * T::BYTES {
                return Err(Error::Protocol(format!("truncated payload from rank {from}")));
            }
            decode(body)
        } else {
            // Only the declared length travels.
            vec![T::nan(); len]
        };
        Ok(Arrival {
            kind: frame.kind,
            root,
            data,
        })
    }

    fn run<T: Scalar>(&self, kind: CollectiveKind, root: usize, buf: &[T]) -> Result<Vec<T>> {
        let mkind = kind.message_kind();
        if self.rank != 0 {
            let payload = Self::arrival_payload(kind, self.rank, root, buf);
            let mut t = self.transport.borrow_mut();
            t.send(0, Frame::new(mkind, payload))?;
            let reply = t.recv(0)?;
            if reply.kind == MessageKind::Abort {
                return Err(Error::Aborted(String::from_utf8_lossy(&reply.payload).into_owned()));
            }
            if reply.kind != mkind {
                return Err(Error::Protocol(format!(
                    "expected {mkind:?} reply, got {:?}",
                    reply.kind
                )));
            }
            return Ok(decode(&reply.payload));
        }

        let world = self.world_size;
        let mut arrivals: Vec<Arrival<T>> = Vec::with_capacity(world);
        arrivals.push(Arrival {
            kind: mkind,
            root,
            data: if Self::sends_data(kind, 0, root) {
                buf.to_vec()
            } else {
                vec![T::nan(); buf.len()]
            },
        });
        let outcome = (|| -> Result<Vec<Vec<T>>> {
            let mut t = self.transport.borrow_mut();
            for r in 1..world {
                let frame = t.recv(r)?;
                let arrival =
                    Self::parse_arrival::<T>(frame, r, |rt| Self::sends_data(kind, r, rt))?;
                arrivals.push(arrival);
            }
            drop(t);
            self.combine(kind, root, &arrivals)
        })();

        let mut t = self.transport.borrow_mut();
        match outcome {
            Ok(mut outputs) => {
                for (r, out) in outputs.iter().enumerate().skip(1) {
                    let payload = encode(out);
                    t.send(r, Frame::new(mkind, payload))?;
                }
                Ok(std::mem::take(&mut outputs[0]))
            }
            Err(e) => {
                let msg = e.to_string();
                for r in 1..world {
                    let _ = t.send(r, Frame::new(MessageKind::Abort, msg.clone().into_bytes()));
                }
                Err(e)
            }
        }
    }

    /// Rank-0 side: validate arrivals and produce one output per rank.
    fn combine<T: Scalar>(
        &self,
        kind: CollectiveKind,
        root: usize,
        arrivals: &[Arrival<T>],
    ) -> Result<Vec<Vec<T>>> {
        let world = self.world_size;
        let mkind = kind.message_kind();
        for (r, a) in arrivals.iter().enumerate() {
            if a.kind != mkind {
                return Err(Error::Protocol(format!(
                    "rank {r} entered {:?} while rank 0 entered {mkind:?}",
                    a.kind
                )));
            }
            if a.root != root {
                return Err(Error::Protocol(format!(
                    "rank {r} named root {} while rank 0 named root {root}",
                    a.root
                )));
            }
        }
        let equal_lengths = || -> Result<usize> {
            let n = arrivals[0].data.len();
            for (r, a) in arrivals.iter().enumerate() {
                if a.data.len() != n {
                    return Err(Error::Size(format!(
                        "{kind:?}: rank {r} passed {} elements, rank 0 passed {n}",
                        a.data.len()
                    )));
                }
            }
            Ok(n)
        };
        let empty = || vec![Vec::new(); world];
        Ok(match kind {
            CollectiveKind::Barrier => empty(),
            CollectiveKind::Broadcast => {
                equal_lengths()?;
                vec![arrivals[root].data.clone(); world]
            }
            CollectiveKind::Scatter => {
                equal_lengths()?;
                let src = &arrivals[root].data;
                if !src.len().is_multiple_of(world) {
                    return Err(Error::Size(format!(
                        "scatter of {} elements over {world} ranks",
                        src.len()
                    )));
                }
                let chunk = src.len() / world;
                src.chunks(chunk.max(1))
                    .take(world)
                    .map(<[T]>::to_vec)
                    .chain(std::iter::repeat_with(Vec::new))
                    .take(world)
                    .collect()
            }
            CollectiveKind::Gather | CollectiveKind::AllGather => {
                equal_lengths()?;
                let cat: Vec<T> = arrivals.iter().flat_map(|a| a.data.iter().copied()).collect();
                if kind == CollectiveKind::AllGather {
                    vec![cat; world]
                } else {
                    let mut out = empty();
                    out[root] = cat;
                    out
                }
            }
            CollectiveKind::Reduce | CollectiveKind::AllReduce => {
                equal_lengths()?;
                let mut acc = arrivals[0].data.clone();
                for a in &arrivals[1..] {
                    for (s, &v) in acc.iter_mut().zip(&a.data) {
                        *s = *s + v;
                    }
                }
                if kind == CollectiveKind::AllReduce {
                    vec![acc; world]
                } else {
                    let mut out = empty();
                    out[root] = acc;
                    out
                }
            }
        })
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic payload".into()
    }
}

/// Runs `program` once per rank on worker threads and joins them.
///
/// Returns the per-rank results in rank order. If any rank fails, the
/// whole world fails with an error naming the rank whose failure was not
/// merely a consequence of a peer disappearing.
pub fn spawn_world<T, F>(world_size: usize, program: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Communicator) -> Result<T> + Sync,
{
    if world_size == 0 {
        return Err(Error::Config("world_size must be at least 1".into()));
    }
    let endpoints = inproc::mesh(world_size);
    let results: Vec<Result<T>> = thread::scope(|scope| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .enumerate()
            .map(|(rank, ep)| {
                let program = &program;
                thread::Builder::new()
                    .name(format!("rank-{rank}"))
                    .spawn_scoped(scope, move || {
                        let comm = Communicator::new(rank, world_size, Backend::InProc, Box::new(ep));
                        match panic::catch_unwind(AssertUnwindSafe(|| program(comm))) {
                            Ok(r) => r,
                            Err(p) => Err(Error::Panicked(panic_message(p))),
                        }
                    })
                    .expect("failed to spawn worker thread")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| Err(Error::Panicked(panic_message(p)))))
            .collect()
    });

    let mut ok = Vec::with_capacity(world_size);
    let mut failures = Vec::new();
    for (rank, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failures.push((rank, e)),
        }
    }
    if failures.is_empty() {
        return Ok(ok);
    }
    let culprit = failures
        .iter()
        .position(|(_, e)| !matches!(e, Error::Disconnected { .. } | Error::Aborted(_)))
        .unwrap_or(0);
    let (rank, source) = failures.swap_remove(culprit);
    Err(Error::RankFailed {
        rank,
        source: Box::new(source),
    })
}
