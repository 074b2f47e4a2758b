//! M-LLDP: LLDP announcements carrying the sending controller's contact details in an
//! organizationally specific TLV.
//!
//! Layout of the 60-byte LLDPDU (offsets in bytes):
//!
//! ```text
//!  0  02 03 07 <switch u16>          chassis id TLV, subtype 7 (locally assigned)
//!  5  04 03 07 <port u16>            port id TLV, subtype 7
//! 10  06 02 00 78                    TTL TLV, 120 s
//! 14  FE 2A                          custom TLV, type 0x7F, length 42
//! 16  00 26 E1                       OpenFlow OUI
//! 19  17                             messenger subtype
//! 20  02 <controller id, 8 bytes>    ASCII, zero padded
//! 29  03 <switch id u16>
//! 32  04 <switch port u16>
//! 35  05 <server ip, 4 bytes>
//! 40  06 <server port u16>
//! 43  08 <server name, 14 bytes>     ASCII, zero padded
//! 58  00 00                          end of LLDPDU
//! ```

use std::fmt;
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::model::{DomainId, MAX_DOMAIN_ID_LEN};

pub const FRAME_LEN: usize = 60;
pub const OPENFLOW_OUI: [u8; 3] = [0x00, 0x26, 0xE1];
pub const MESSENGER_SUBTYPE: u8 = 0x17;
pub const CUSTOM_TLV_TYPE: u8 = 0x7F;
pub const SERVER_NAME_LEN: usize = 14;

const TAG_CONTROLLER: u8 = 0x02;
const TAG_SWITCH: u8 = 0x03;
const TAG_PORT: u8 = 0x04;
const TAG_SERVER_IP: u8 = 0x05;
const TAG_SERVER_PORT: u8 = 0x06;
const TAG_SERVER_NAME: u8 = 0x08;

const CUSTOM_LEN: u16 = 42;
const TTL_SECS: u16 = 120;
const LOCAL_SUBTYPE: u8 = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlldpFrame {
    pub controller_id: DomainId,
    pub switch_id: u16,
    pub switch_port: u16,
    pub server_ip: Ipv4Addr,
    pub server_port: u16,
    pub server_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("server name {0:?} does not fit in {SERVER_NAME_LEN} bytes of printable ASCII")]
    ServerName(String),
    #[error("controller id {0:?} does not fit in {MAX_DOMAIN_ID_LEN} bytes")]
    ControllerId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Truncated,
    TrailingBytes,
    TlvHeader,
    CustomType,
    Oui,
    Subtype,
    FieldTag,
    ControllerId,
    ServerName,
    Mismatch,
    End,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::Truncated => "frame truncated",
            Violation::TrailingBytes => "bytes after end TLV",
            Violation::TlvHeader => "unexpected mandatory TLV",
            Violation::CustomType => "custom TLV type is not 0x7F",
            Violation::Oui => "OUI is not 00-26-E1",
            Violation::Subtype => "subtype is not 0x17",
            Violation::FieldTag => "unexpected field tag",
            Violation::ControllerId => "invalid controller id",
            Violation::ServerName => "invalid server name",
            Violation::Mismatch => "custom fields disagree with chassis/port TLVs",
            Violation::End => "missing end TLV",
        };
        f.write_str(s)
    }
}

/// Rejection with the byte offset of the first offending byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{violation} at byte {position}")]
pub struct DecodeError {
    pub position: usize,
    pub violation: Violation,
}

fn tlv_header(kind: u8, len: u16) -> [u8; 2] {
    (((kind as u16) << 9) | len).to_be_bytes()
}

fn padded<const N: usize>(s: &str) -> [u8; N] {
    let mut out = [0u8; N];
    out[..s.len()].copy_from_slice(s.as_bytes());
    out
}

pub fn encode(frame: &MlldpFrame) -> Result<[u8; FRAME_LEN], EncodeError> {
    let name = &frame.server_name;
    if name.is_empty() || name.len() > SERVER_NAME_LEN || !name.bytes().all(|b| b.is_ascii_graphic()) {
        return Err(EncodeError::ServerName(name.clone()));
    }
    let id = frame.controller_id.as_str();
    if id.len() > MAX_DOMAIN_ID_LEN {
        return Err(EncodeError::ControllerId(id.to_string()));
    }

    let mut out = Vec::with_capacity(FRAME_LEN);
    out.extend(tlv_header(1, 3));
    out.push(LOCAL_SUBTYPE);
    out.extend(frame.switch_id.to_be_bytes());
    out.extend(tlv_header(2, 3));
    out.push(LOCAL_SUBTYPE);
    out.extend(frame.switch_port.to_be_bytes());
    out.extend(tlv_header(3, 2));
    out.extend(TTL_SECS.to_be_bytes());

    out.extend(tlv_header(CUSTOM_TLV_TYPE, CUSTOM_LEN));
    out.extend(OPENFLOW_OUI);
    out.push(MESSENGER_SUBTYPE);
    out.push(TAG_CONTROLLER);
    out.extend(padded::<MAX_DOMAIN_ID_LEN>(id));
    out.push(TAG_SWITCH);
    out.extend(frame.switch_id.to_be_bytes());
    out.push(TAG_PORT);
    out.extend(frame.switch_port.to_be_bytes());
    out.push(TAG_SERVER_IP);
    out.extend(frame.server_ip.octets());
    out.push(TAG_SERVER_PORT);
    out.extend(frame.server_port.to_be_bytes());
    out.push(TAG_SERVER_NAME);
    out.extend(padded::<SERVER_NAME_LEN>(name));
    out.extend(tlv_header(0, 0));

    Ok(out.try_into().expect("layout is exactly 60 bytes"))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, at: usize, violation: Violation) -> DecodeError {
        DecodeError { position: at, violation }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.pos + n > self.buf.len() {
            return Err(self.err(self.buf.len(), Violation::Truncated));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Consumes `expected` verbatim, reporting the first differing byte.
    fn expect(&mut self, expected: &[u8], violation: Violation) -> Result<(), DecodeError> {
        let start = self.pos;
        let got = self.take(expected.len())?;
        match got.iter().zip(expected).position(|(a, b)| a != b) {
            Some(i) => Err(self.err(start + i, violation)),
            None => Ok(()),
        }
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn tagged(&mut self, tag: u8, n: usize) -> Result<(usize, &'a [u8]), DecodeError> {
        self.expect(&[tag], Violation::FieldTag)?;
        let at = self.pos;
        Ok((at, self.take(n)?))
    }
}

/// Text stored in a zero-padded fixed-width field: printable ASCII followed only by zeros.
fn unpad(field: &[u8]) -> Option<&str> {
    let end = field.iter().position(|b| *b == 0).unwrap_or(field.len());
    if end == 0 || field[end..].iter().any(|b| *b != 0) || !field[..end].iter().all(|b| b.is_ascii_graphic()) {
        return None;
    }
    std::str::from_utf8(&field[..end]).ok()
}

pub fn decode(bytes: &[u8]) -> Result<MlldpFrame, DecodeError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.expect(&tlv_header(1, 3), Violation::TlvHeader)?;
    r.expect(&[LOCAL_SUBTYPE], Violation::TlvHeader)?;
    let chassis = r.u16()?;
    r.expect(&tlv_header(2, 3), Violation::TlvHeader)?;
    r.expect(&[LOCAL_SUBTYPE], Violation::TlvHeader)?;
    let port = r.u16()?;
    r.expect(&tlv_header(3, 2), Violation::TlvHeader)?;
    r.take(2)?;

    let at = r.pos;
    let hdr = r.take(2)?;
    if hdr[0] >> 1 != CUSTOM_TLV_TYPE {
        return Err(r.err(at, Violation::CustomType));
    }
    if u16::from_be_bytes([hdr[0], hdr[1]]) & 0x01FF != CUSTOM_LEN {
        return Err(r.err(at, Violation::TlvHeader));
    }
    r.expect(&OPENFLOW_OUI, Violation::Oui)?;
    r.expect(&[MESSENGER_SUBTYPE], Violation::Subtype)?;

    let (at, raw) = r.tagged(TAG_CONTROLLER, MAX_DOMAIN_ID_LEN)?;
    let controller_id = unpad(raw)
        .and_then(|s| DomainId::new(s).ok())
        .ok_or(r.err(at, Violation::ControllerId))?;
    let (at, raw) = r.tagged(TAG_SWITCH, 2)?;
    let switch_id = u16::from_be_bytes([raw[0], raw[1]]);
    if switch_id != chassis {
        return Err(r.err(at, Violation::Mismatch));
    }
    let (at, raw) = r.tagged(TAG_PORT, 2)?;
    let switch_port = u16::from_be_bytes([raw[0], raw[1]]);
    if switch_port != port {
        return Err(r.err(at, Violation::Mismatch));
    }
    let (_, raw) = r.tagged(TAG_SERVER_IP, 4)?;
    let server_ip = Ipv4Addr::new(raw[0], raw[1], raw[2], raw[3]);
    let (_, raw) = r.tagged(TAG_SERVER_PORT, 2)?;
    let server_port = u16::from_be_bytes([raw[0], raw[1]]);
    let (at, raw) = r.tagged(TAG_SERVER_NAME, SERVER_NAME_LEN)?;
    let server_name = unpad(raw).ok_or(r.err(at, Violation::ServerName))?.to_string();
    r.expect(&tlv_header(0, 0), Violation::End)?;
    if r.pos != bytes.len() {
        return Err(r.err(r.pos, Violation::TrailingBytes));
    }

    Ok(MlldpFrame { controller_id, switch_id, switch_port, server_ip, server_port, server_name })
}
