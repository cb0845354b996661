//! Reliable, ordered, duplex frame transports.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Barrier, Mutex};
use std::time::Duration;

use super::wire::{read_frame, write_frame, Frame, WireError};

pub trait Transport: Send {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError>;
    fn recv(&mut self) -> Result<Frame, WireError>;
    /// The waiting time between measurement and basis announcement. Returns
    /// once the other party has also finished measuring (logical mode) or
    /// after the configured delay (wall-clock mode).
    fn wait(&mut self) -> Result<(), WireError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        (**self).send(frame)
    }
    fn recv(&mut self) -> Result<Frame, WireError> {
        (**self).recv()
    }
    fn wait(&mut self) -> Result<(), WireError> {
        (**self).wait()
    }
}

/// In-process endpoint; the pair shares a barrier for the waiting time.
pub struct ChannelTransport {
    tx: Sender<Frame>,
    rx: Receiver<Frame>,
    barrier: Arc<Barrier>,
}

pub fn channel_pair() -> (ChannelTransport, ChannelTransport) {
    let (tx_a, rx_b) = channel();
    let (tx_b, rx_a) = channel();
    let barrier = Arc::new(Barrier::new(2));
    (
        ChannelTransport {
            tx: tx_a,
            rx: rx_a,
            barrier: barrier.clone(),
        },
        ChannelTransport {
            tx: tx_b,
            rx: rx_b,
            barrier,
        },
    )
}

impl Transport for ChannelTransport {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        self.tx.send(frame.clone()).map_err(|_| WireError::Closed)
    }

    fn recv(&mut self) -> Result<Frame, WireError> {
        self.rx.recv().map_err(|_| WireError::Closed)
    }

    fn wait(&mut self) -> Result<(), WireError> {
        self.barrier.wait();
        Ok(())
    }
}

/// Frames over a byte stream. The waiting time is a local sleep.
pub struct StreamTransport<R: Read, W: Write> {
    reader: BufReader<R>,
    writer: BufWriter<W>,
    delay: Duration,
}

impl<R: Read + Send, W: Write + Send> StreamTransport<R, W> {
    pub fn new(reader: R, writer: W, delay: Duration) -> Self {
        Self {
            reader: BufReader::new(reader),
            writer: BufWriter::new(writer),
            delay,
        }
    }
}

impl StreamTransport<TcpStream, TcpStream> {
    pub fn tcp(stream: TcpStream, delay: Duration) -> std::io::Result<Self> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(Self::new(reader, stream, delay))
    }
}

impl<R: Read + Send, W: Write + Send> Transport for StreamTransport<R, W> {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        write_frame(&mut self.writer, frame)
    }

    fn recv(&mut self) -> Result<Frame, WireError> {
        read_frame(&mut self.reader)
    }

    fn wait(&mut self) -> Result<(), WireError> {
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Direction {
    AliceToBob = 0,
    BobToAlice = 1,
}

/// All frames of one run in the order one endpoint saw them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<(Direction, Frame)>,
}

impl Transcript {
    /// Each entry as a direction byte followed by the encoded frame.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (dir, frame) in &self.entries {
            out.push(*dir as u8);
            out.extend_from_slice(&frame.to_bytes());
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, WireError> {
        let mut entries = Vec::new();
        while let Some((&dir, rest)) = bytes.split_first() {
            let dir = match dir {
                0 => Direction::AliceToBob,
                1 => Direction::BobToAlice,
                _ => {
                    return Err(WireError::Io(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("bad direction byte {dir}"),
                    )))
                }
            };
            let mut r = rest;
            let frame = read_frame(&mut r)?;
            bytes = r;
            entries.push((dir, frame));
        }
        Ok(Self { entries })
    }
}

/// Records every frame passing through one endpoint.
pub struct Recording<T> {
    inner: T,
    outgoing: Direction,
    log: Arc<Mutex<Transcript>>,
}

impl<T: Transport> Recording<T> {
    /// `outgoing` is the direction of frames this endpoint sends.
    pub fn new(inner: T, outgoing: Direction) -> (Self, Arc<Mutex<Transcript>>) {
        let log = Arc::new(Mutex::new(Transcript::default()));
        (
            Self {
                inner,
                outgoing,
                log: log.clone(),
            },
            log,
        )
    }

    fn incoming(&self) -> Direction {
        match self.outgoing {
            Direction::AliceToBob => Direction::BobToAlice,
            Direction::BobToAlice => Direction::AliceToBob,
        }
    }
}

impl<T: Transport> Transport for Recording<T> {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        self.log
            .lock()
            .unwrap()
            .entries
            .push((self.outgoing, frame.clone()));
        self.inner.send(frame)
    }

    fn recv(&mut self) -> Result<Frame, WireError> {
        let frame = self.inner.recv()?;
        let dir = self.incoming();
        self.log.lock().unwrap().entries.push((dir, frame.clone()));
        Ok(frame)
    }

    fn wait(&mut self) -> Result<(), WireError> {
        self.inner.wait()
    }
}

/// Rewrites outgoing frames, for fault-injection experiments.
pub struct Tamper<T, F> {
    inner: T,
    rewrite: F,
}

impl<T: Transport, F: FnMut(Frame) -> Frame + Send> Tamper<T, F> {
    pub fn new(inner: T, rewrite: F) -> Self {
        Self { inner, rewrite }
    }
}

impl<T: Transport, F: FnMut(Frame) -> Frame + Send> Transport for Tamper<T, F> {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        let out = (self.rewrite)(frame.clone());
        self.inner.send(&out)
    }

    fn recv(&mut self) -> Result<Frame, WireError> {
        self.inner.recv()
    }

    fn wait(&mut self) -> Result<(), WireError> {
        self.inner.wait()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::wire::Tag;
    use std::net::TcpListener;

    fn frame(tag: Tag, n: u8) -> Frame {
        Frame {
            tag,
            payload: vec![n; n as usize],
        }
    }

    #[test]
    fn channel_pair_is_duplex() {
        let (mut a, mut b) = channel_pair();
        let t = std::thread::spawn(move || {
            b.wait().unwrap();
            let f = b.recv().unwrap();
            b.send(&frame(Tag::IndexSets, f.payload.len() as u8 + 1))
                .unwrap();
        });
        a.wait().unwrap();
        a.send(&frame(Tag::Bases, 3)).unwrap();
        assert_eq!(a.recv().unwrap(), frame(Tag::IndexSets, 4));
        t.join().unwrap();
        assert!(matches!(a.recv(), Err(WireError::Closed)));
    }

    #[test]
    fn tcp_loopback() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let t = std::thread::spawn(move || {
            let (s, _) = listener.accept().unwrap();
            let mut alice = StreamTransport::tcp(s, Duration::ZERO).unwrap();
            alice.send(&frame(Tag::Bases, 200)).unwrap();
            alice.recv().unwrap()
        });
        let mut bob =
            StreamTransport::tcp(TcpStream::connect(addr).unwrap(), Duration::ZERO).unwrap();
        assert_eq!(bob.recv().unwrap(), frame(Tag::Bases, 200));
        bob.send(&frame(Tag::IndexSets, 0)).unwrap();
        assert_eq!(t.join().unwrap(), frame(Tag::IndexSets, 0));
    }

    #[test]
    fn transcript_round_trip() {
        let (a, mut b) = channel_pair();
        let (mut rec, log) = Recording::new(a, Direction::AliceToBob);
        rec.send(&frame(Tag::Bases, 5)).unwrap();
        b.recv().unwrap();
        b.send(&frame(Tag::IndexSets, 2)).unwrap();
        rec.recv().unwrap();
        let t = log.lock().unwrap().clone();
        assert_eq!(t.entries[0].0, Direction::AliceToBob);
        assert_eq!(t.entries[1].0, Direction::BobToAlice);
        assert_eq!(Transcript::from_bytes(&t.to_bytes()).unwrap(), t);
    }
}
