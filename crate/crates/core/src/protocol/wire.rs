//! Frame format and message payloads.
//!
//! A frame is `u32` little-endian payload length, `u8` tag, payload. Payload
//! layouts are documented in `docs/wire.md`.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::hashing::{Bits, HashError, ToeplitzDescriptor};

/// Largest payload accepted on read or write.
pub const MAX_PAYLOAD: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Tag {
    Bases = 1,
    IndexSets = 2,
    Syndromes = 3,
    HashDesc = 4,
    MaskedStrings = 5,
    Abort = 6,
}

impl Tag {
    pub fn from_u8(b: u8) -> Option<Tag> {
        Some(match b {
            1 => Tag::Bases,
            2 => Tag::IndexSets,
            3 => Tag::Syndromes,
            4 => Tag::HashDesc,
            5 => Tag::MaskedStrings,
            6 => Tag::Abort,
            _ => return None,
        })
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    TooLarge(usize),
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("malformed {tag:?} payload: {msg}")]
    Malformed { tag: Tag, msg: String },
    #[error("peer closed the connection")]
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub tag: Tag,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encoded_len(&self) -> usize {
        5 + self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.push(self.tag as u8);
        out.extend_from_slice(&self.payload);
        out
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<(), WireError> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(WireError::TooLarge(frame.payload.len()));
    }
    w.write_all(&frame.to_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads one frame; a clean end of stream before the header is `Closed`.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame, WireError> {
    let mut header = [0u8; 5];
    let mut got = 0;
    while got < header.len() {
        match r.read(&mut header[got..])? {
            0 if got == 0 => return Err(WireError::Closed),
            0 => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            k => got += k,
        }
    }
    let len = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(WireError::TooLarge(len));
    }
    let tag = Tag::from_u8(header[4]).ok_or(WireError::UnknownTag(header[4]))?;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Frame { tag, payload })
}

/// Reasons carried by an ABORT message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum AbortCode {
    ShortSets = 1,
    CodeMismatch = 2,
    Malformed = 3,
    Unexpected = 4,
}

impl AbortCode {
    fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            1 => AbortCode::ShortSets,
            2 => AbortCode::CodeMismatch,
            3 => AbortCode::Malformed,
            4 => AbortCode::Unexpected,
            _ => return None,
        })
    }
}

/// One reconciliation frame: Alice's plain low plane and the syndrome of her high plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyndromeBlock {
    pub low: Vec<u8>,
    pub syndrome: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    /// Alice's bases, 1 = P.
    Bases(Bits),
    /// Bob's index sets as a membership mask of `I₀`, and the id of his code.
    IndexSets {
        code_id: u64,
        mask: Bits,
    },
    Syndromes([SyndromeBlock; 2]),
    HashDesc([ToeplitzDescriptor; 2]),
    MaskedStrings([Bits; 2]),
    Abort {
        code: AbortCode,
        reason: String,
    },
}

struct Reader<'a> {
    tag: Tag,
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> WireError {
        WireError::Malformed {
            tag: self.tag,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(self.err(format!("needs {n} more bytes, {} left", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bits(&mut self) -> Result<Bits, WireError> {
        let len = self.u32()?;
        Ok(Bits::from_bytes_le(self.take(len.div_ceil(8))?, len))
    }

    fn finish(self) -> Result<(), WireError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(self.err(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

fn put_bits(out: &mut Vec<u8>, bits: &Bits) {
    out.extend_from_slice(&(bits.len() as u32).to_le_bytes());
    out.extend_from_slice(&bits.to_bytes_le());
}

/// Packs `width`-bit values LSB first.
fn pack(values: &[u8], width: usize) -> Vec<u8> {
    let mut bits = Bits::zeros(values.len() * width);
    for (i, &v) in values.iter().enumerate() {
        for b in 0..width {
            if v >> b & 1 == 1 {
                bits.set(i * width + b, true);
            }
        }
    }
    bits.to_bytes_le()
}

fn unpack(bytes: &[u8], count: usize, width: usize) -> Vec<u8> {
    let bits = Bits::from_bytes_le(bytes, count * width);
    (0..count)
        .map(|i| (0..width).fold(0u8, |acc, b| acc | (bits.get(i * width + b) as u8) << b))
        .collect()
}

impl Message {
    pub fn tag(&self) -> Tag {
        match self {
            Message::Bases(_) => Tag::Bases,
            Message::IndexSets { .. } => Tag::IndexSets,
            Message::Syndromes(_) => Tag::Syndromes,
            Message::HashDesc(_) => Tag::HashDesc,
            Message::MaskedStrings(_) => Tag::MaskedStrings,
            Message::Abort { .. } => Tag::Abort,
        }
    }

    pub fn to_frame(&self) -> Frame {
        let mut p = Vec::new();
        match self {
            Message::Bases(b) => put_bits(&mut p, b),
            Message::IndexSets { code_id, mask } => {
                p.extend_from_slice(&code_id.to_le_bytes());
                put_bits(&mut p, mask);
            }
            Message::Syndromes(blocks) => {
                for b in blocks {
                    p.extend_from_slice(&(b.low.len() as u32).to_le_bytes());
                    p.extend_from_slice(&pack(&b.low, 4));
                    p.extend_from_slice(&(b.syndrome.len() as u32).to_le_bytes());
                    p.extend_from_slice(&pack(&b.syndrome, 6));
                }
            }
            Message::HashDesc(descs) => {
                for d in descs {
                    let bytes = d.to_bytes();
                    p.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
                    p.extend_from_slice(&bytes);
                }
            }
            Message::MaskedStrings(strings) => {
                for s in strings {
                    put_bits(&mut p, s);
                }
            }
            Message::Abort { code, reason } => {
                p.push(*code as u8);
                p.extend_from_slice(reason.as_bytes());
            }
        }
        Frame {
            tag: self.tag(),
            payload: p,
        }
    }

    pub fn from_frame(frame: &Frame) -> Result<Message, WireError> {
        let mut r = Reader {
            tag: frame.tag,
            buf: &frame.payload,
        };
        let msg = match frame.tag {
            Tag::Bases => Message::Bases(r.bits()?),
            Tag::IndexSets => {
                let code_id = r.u64()?;
                Message::IndexSets {
                    code_id,
                    mask: r.bits()?,
                }
            }
            Tag::Syndromes => {
                let mut block = || -> Result<SyndromeBlock, WireError> {
                    let n = r.u32()?;
                    let low = unpack(r.take((4 * n).div_ceil(8))?, n, 4);
                    let m = r.u32()?;
                    let syndrome = unpack(r.take((6 * m).div_ceil(8))?, m, 6);
                    Ok(SyndromeBlock { low, syndrome })
                };
                let b0 = block()?;
                let b1 = block()?;
                Message::Syndromes([b0, b1])
            }
            Tag::HashDesc => {
                let mut desc = || -> Result<ToeplitzDescriptor, WireError> {
                    let len = r.u32()?;
                    let bytes = r.take(len)?;
                    ToeplitzDescriptor::from_bytes(bytes).map_err(|e: HashError| {
                        WireError::Malformed {
                            tag: Tag::HashDesc,
                            msg: e.to_string(),
                        }
                    })
                };
                let d0 = desc()?;
                let d1 = desc()?;
                Message::HashDesc([d0, d1])
            }
            Tag::MaskedStrings => {
                let a = r.bits()?;
                let b = r.bits()?;
                Message::MaskedStrings([a, b])
            }
            Tag::Abort => {
                let code = r.take(1)?[0];
                let code =
                    AbortCode::from_u8(code).ok_or_else(|| r.err(format!("abort code {code}")))?;
                let reason = String::from_utf8(r.take(r.buf.len())?.to_vec())
                    .map_err(|_| r.err("reason is not UTF-8"))?;
                Message::Abort { code, reason }
            }
        };
        r.finish()?;
        Ok(msg)
    }
}
