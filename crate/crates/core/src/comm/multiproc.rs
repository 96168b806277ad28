//! Separate OS processes connected by TCP loopback streams.
//!
//! The launcher re-executes a program once per rank with the rendezvous
//! address in the environment. Each worker binds its own listener, reports
//! the port to the launcher, receives the port table, then connects to every
//! lower rank and accepts every higher rank.

use std::ffi::OsStr;
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, ExitStatus};
use std::thread;
use std::time::{Duration, Instant};

use super::frame::{handshake, parse_handshake, Frame, MessageKind};
use super::{Backend, Communicator, Transport};
use crate::error::{Error, Result};

pub const ENV_RANK: &str = "DSTAT_RANK";
pub const ENV_WORLD_SIZE: &str = "DSTAT_WORLD_SIZE";
pub const ENV_LAUNCHER: &str = "DSTAT_LAUNCHER";

const STARTUP_TIMEOUT: Duration = Duration::from_secs(60);

pub(crate) struct TcpTransport {
    streams: Vec<Option<TcpStream>>,
}

impl Transport for TcpTransport {
    fn send(&mut self, to: usize, frame: Frame) -> Result<()> {
        let stream = self.streams[to]
            .as_mut()
            .ok_or_else(|| Error::Protocol(format!("no stream to rank {to}")))?;
        frame.write_to(stream).map_err(|e| Error::Disconnected {
            rank: to,
            reason: e.to_string(),
        })
    }

    fn recv(&mut self, from: usize) -> Result<Frame> {
        let stream = self.streams[from]
            .as_mut()
            .ok_or_else(|| Error::Protocol(format!("no stream from rank {from}")))?;
        Frame::read_from(stream).map_err(|e| match e {
            Error::Io(io) => Error::Disconnected {
                rank: from,
                reason: io.to_string(),
            },
            other => other,
        })
    }
}

/// True when this process was started by [`launch`] as a worker.
pub fn is_worker() -> bool {
    std::env::var_os(ENV_LAUNCHER).is_some()
}

fn env_usize(name: &str) -> Result<usize> {
    std::env::var(name)
        .map_err(|_| Error::Config(format!("missing environment variable {name}")))?
        .parse()
        .map_err(|_| Error::Config(format!("environment variable {name} is not an integer")))
}

/// Joins the world described by the environment set by [`launch`].
pub fn connect_from_env() -> Result<Communicator> {
    let rank = env_usize(ENV_RANK)?;
    let world_size = env_usize(ENV_WORLD_SIZE)?;
    let launcher = std::env::var(ENV_LAUNCHER)
        .map_err(|_| Error::Config(format!("missing environment variable {ENV_LAUNCHER}")))?;
    if world_size == 0 || rank >= world_size {
        return Err(Error::Config(format!(
            "rank {rank} outside world of size {world_size}"
        )));
    }

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let port = listener.local_addr()?.port();

    let mut ctl = TcpStream::connect(&launcher)?;
    handshake(rank, world_size, &port.to_le_bytes()).write_to(&mut ctl)?;
    let table = Frame::read_from(&mut ctl)?;
    let (_, _, ports) = parse_handshake(&table)?;
    if ports.len() != 2 * world_size {
        return Err(Error::Protocol("malformed port table".into()));
    }
    let port_of = |r: usize| u16::from_le_bytes([ports[2 * r], ports[2 * r + 1]]);

    let mut streams: Vec<Option<TcpStream>> = (0..world_size).map(|_| None).collect();
    for (peer, slot) in streams.iter_mut().enumerate().take(rank) {
        let mut s = TcpStream::connect(("127.0.0.1", port_of(peer)))?;
        s.set_nodelay(true)?;
        handshake(rank, world_size, &[]).write_to(&mut s)?;
        *slot = Some(s);
    }
    for _ in rank + 1..world_size {
        let (mut s, _) = listener.accept()?;
        s.set_nodelay(true)?;
        let hello = Frame::read_from(&mut s)?;
        let (peer, peer_world, _) = parse_handshake(&hello)?;
        if peer_world != world_size || peer <= rank || peer >= world_size {
            return Err(Error::Protocol(format!(
                "unexpected handshake from rank {peer} (world {peer_world})"
            )));
        }
        if streams[peer].is_some() {
            return Err(Error::Protocol(format!("rank {peer} connected twice")));
        }
        streams[peer] = Some(s);
    }
    drop(ctl);

    Ok(Communicator::new(
        rank,
        world_size,
        Backend::MultiProc,
        Box::new(TcpTransport { streams }),
    ))
}

fn kill_all(children: &mut [Child]) {
    for c in children.iter_mut() {
        let _ = c.kill();
        let _ = c.wait();
    }
}

/// Runs `exe args…` once per rank as worker processes and waits for all of them.
///
/// Returns exit statuses indexed by rank. Fails if the world cannot be
/// assembled or if any worker exits unsuccessfully; in the latter case the
/// error names the first rank observed to fail.
pub fn launch<I, S>(
    world_size: usize,
    exe: &Path,
    args: I,
    envs: &[(String, String)],
) -> Result<Vec<ExitStatus>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    if world_size == 0 {
        return Err(Error::Config("world_size must be at least 1".into()));
    }
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    let args: Vec<_> = args.into_iter().map(|a| a.as_ref().to_owned()).collect();

    let mut children = Vec::with_capacity(world_size);
    for rank in 0..world_size {
        let mut cmd = Command::new(exe);
        cmd.args(&args)
            .env(ENV_RANK, rank.to_string())
            .env(ENV_WORLD_SIZE, world_size.to_string())
            .env(ENV_LAUNCHER, &addr);
        for (k, v) in envs {
            cmd.env(k, v);
        }
        match cmd.spawn() {
            Ok(c) => children.push(c),
            Err(e) => {
                kill_all(&mut children);
                return Err(e.into());
            }
        }
    }

    if let Err(e) = rendezvous(&listener, world_size, &mut children) {
        kill_all(&mut children);
        return Err(e);
    }

    let mut statuses: Vec<Option<ExitStatus>> = vec![None; world_size];
    let mut first_failure = None;
    while statuses.iter().any(Option::is_none) {
        for (rank, child) in children.iter_mut().enumerate() {
            if statuses[rank].is_some() {
                continue;
            }
            if let Some(st) = child.try_wait()? {
                if !st.success() && first_failure.is_none() {
                    first_failure = Some((rank, st));
                }
                statuses[rank] = Some(st);
            }
        }
        thread::sleep(Duration::from_millis(2));
    }
    if let Some((rank, st)) = first_failure {
        return Err(Error::RankFailed {
            rank,
            source: Box::new(Error::WorkerExit { code: st.code() }),
        });
    }
    Ok(statuses.into_iter().map(Option::unwrap).collect())
}

fn rendezvous(listener: &TcpListener, world_size: usize, children: &mut [Child]) -> Result<()> {
    listener.set_nonblocking(true)?;
    let start = Instant::now();
    let mut ctl: Vec<Option<TcpStream>> = (0..world_size).map(|_| None).collect();
    let mut ports = vec![0u16; world_size];
    let mut joined = 0;
    while joined < world_size {
        match listener.accept() {
            Ok((mut s, _)) => {
                s.set_nonblocking(false)?;
                let hello = Frame::read_from(&mut s)?;
                let (rank, world, extra) = parse_handshake(&hello)?;
                if world != world_size || rank >= world_size || extra.len() != 2 {
                    return Err(Error::Protocol(format!(
                        "bad launcher handshake from rank {rank} (world {world})"
                    )));
                }
                if ctl[rank].is_some() {
                    return Err(Error::Protocol(format!("rank {rank} joined twice")));
                }
                ports[rank] = u16::from_le_bytes([extra[0], extra[1]]);
                ctl[rank] = Some(s);
                joined += 1;
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                for (rank, c) in children.iter_mut().enumerate() {
                    if let Some(st) = c.try_wait()? {
                        return Err(Error::RankFailed {
                            rank,
                            source: Box::new(Error::Protocol(format!(
                                "worker exited with {st} before joining the world"
                            ))),
                        });
                    }
                }
                if start.elapsed() > STARTUP_TIMEOUT {
                    return Err(Error::Protocol("timed out assembling the world".into()));
                }
                thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let table: Vec<u8> = ports.iter().flat_map(|p| p.to_le_bytes()).collect();
    for s in ctl.iter_mut().flatten() {
        let frame = handshake(0, world_size, &table);
        debug_assert_eq!(frame.kind, MessageKind::Handshake);
        frame.write_to(s)?;
    }
    Ok(())
}
