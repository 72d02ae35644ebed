//! Classic libpcap files: reader for TCP segments and a small writer used to
//! synthesize captures.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use crate::bytes::{slice, u16_be, u32_be, u8_at};

use super::TraceError;

pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_RAW: u32 = 101;
pub const LINKTYPE_LINUX_SLL: u32 = 113;
pub const LINKTYPE_IPV4: u32 = 228;

const MAGIC_MICRO: u32 = 0xa1b2_c3d4;
const MAGIC_NANO: u32 = 0xa1b2_3c4d;
const GLOBAL_HEADER: usize = 24;
const RECORD_HEADER: usize = 16;
const MAX_RECORD: u32 = 256 * 1024;

pub const TCP_FIN: u8 = 0x01;
pub const TCP_SYN: u8 = 0x02;
pub const TCP_PSH: u8 = 0x08;
pub const TCP_ACK: u8 = 0x10;

/// One TCP segment as captured.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcpPacket {
    pub ts_nanos: i128,
    /// Captured frame length (`incl_len`).
    pub frame_len: u32,
    pub src: IpAddr,
    pub dst: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub flags: u8,
    pub payload: Vec<u8>,
}

impl TcpPacket {
    pub fn is_syn(&self) -> bool {
        self.flags & TCP_SYN != 0 && self.flags & TCP_ACK == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capture {
    pub link_type: u32,
    /// Number of records in the file, TCP or not.
    pub total_records: usize,
    pub tcp: Vec<TcpPacket>,
}

fn malformed(offset: usize) -> TraceError {
    TraceError::MalformedPcap { offset }
}

pub fn read_pcap(buf: &[u8]) -> Result<Capture, TraceError> {
    if buf.len() < GLOBAL_HEADER {
        return Err(malformed(buf.len()));
    }
    let raw = [buf[0], buf[1], buf[2], buf[3]];
    let (big, nano) = match (u32::from_be_bytes(raw), u32::from_le_bytes(raw)) {
        (MAGIC_MICRO, _) => (true, false),
        (MAGIC_NANO, _) => (true, true),
        (_, MAGIC_MICRO) => (false, false),
        (_, MAGIC_NANO) => (false, true),
        _ => return Err(malformed(0)),
    };
    let rd32 = |off: usize| -> Result<u32, TraceError> {
        let b = slice(buf, off, 4).map_err(|e| malformed(e.0))?;
        let a = [b[0], b[1], b[2], b[3]];
        Ok(if big {
            u32::from_be_bytes(a)
        } else {
            u32::from_le_bytes(a)
        })
    };
    let link_type = rd32(20)? & 0x0fff_ffff;
    if ![
        LINKTYPE_ETHERNET,
        LINKTYPE_RAW,
        LINKTYPE_LINUX_SLL,
        LINKTYPE_IPV4,
    ]
    .contains(&link_type)
    {
        return Err(malformed(20));
    }
    let mut off = GLOBAL_HEADER;
    let mut tcp = Vec::new();
    let mut total_records = 0;
    while off < buf.len() {
        if buf.len() - off < RECORD_HEADER {
            return Err(malformed(off));
        }
        let secs = rd32(off)? as i128;
        let frac = rd32(off + 4)? as i128;
        let incl = rd32(off + 8)?;
        let orig = rd32(off + 12)?;
        if incl > MAX_RECORD
            || incl > orig
            || (nano && frac >= 1_000_000_000)
            || (!nano && frac >= 1_000_000)
        {
            return Err(malformed(off));
        }
        let data = slice(buf, off + RECORD_HEADER, incl as usize).map_err(|_| malformed(off))?;
        let ts_nanos = secs * 1_000_000_000 + if nano { frac } else { frac * 1000 };
        if let Some(p) = decode_frame(link_type, data, ts_nanos, incl) {
            tcp.push(p);
        }
        total_records += 1;
        off += RECORD_HEADER + incl as usize;
    }
    Ok(Capture {
        link_type,
        total_records,
        tcp,
    })
}

/// Frames that are not complete TCP segments yield `None`.
fn decode_frame(link_type: u32, frame: &[u8], ts_nanos: i128, frame_len: u32) -> Option<TcpPacket> {
    let (ethertype, ip_off) = match link_type {
        LINKTYPE_ETHERNET => {
            let mut et = u16_be(frame, 12).ok()?;
            let mut off = 14;
            while et == 0x8100 || et == 0x88a8 {
                et = u16_be(frame, off + 2).ok()?;
                off += 4;
            }
            (et, off)
        }
        LINKTYPE_LINUX_SLL => (u16_be(frame, 14).ok()?, 16),
        _ => match u8_at(frame, 0).ok()? >> 4 {
            4 => (0x0800, 0),
            6 => (0x86dd, 0),
            _ => return None,
        },
    };
    let ip = frame.get(ip_off..)?;
    let (src, dst, l4) = match ethertype {
        0x0800 => {
            let vihl = u8_at(ip, 0).ok()?;
            let ihl = (vihl & 0x0f) as usize * 4;
            if vihl >> 4 != 4 || ihl < 20 || u8_at(ip, 9).ok()? != 6 {
                return None;
            }
            if u16_be(ip, 6).ok()? & 0x1fff != 0 {
                return None;
            }
            let total = (u16_be(ip, 2).ok()? as usize).min(ip.len());
            if total < ihl {
                return None;
            }
            let s = slice(ip, 12, 4).ok()?;
            let d = slice(ip, 16, 4).ok()?;
            (
                IpAddr::V4(Ipv4Addr::new(s[0], s[1], s[2], s[3])),
                IpAddr::V4(Ipv4Addr::new(d[0], d[1], d[2], d[3])),
                &ip[ihl..total],
            )
        }
        0x86dd => {
            if u8_at(ip, 0).ok()? >> 4 != 6 || u8_at(ip, 6).ok()? != 6 {
                return None;
            }
            let plen = u16_be(ip, 4).ok()? as usize;
            let end = (40 + plen).min(ip.len());
            let s: [u8; 16] = slice(ip, 8, 16).ok()?.try_into().ok()?;
            let d: [u8; 16] = slice(ip, 24, 16).ok()?.try_into().ok()?;
            (
                IpAddr::V6(Ipv6Addr::from(s)),
                IpAddr::V6(Ipv6Addr::from(d)),
                ip.get(40..end)?,
            )
        }
        _ => return None,
    };
    let data_off = (u8_at(l4, 12).ok()? >> 4) as usize * 4;
    if data_off < 20 || data_off > l4.len() {
        return None;
    }
    Some(TcpPacket {
        ts_nanos,
        frame_len,
        src,
        dst,
        src_port: u16_be(l4, 0).ok()?,
        dst_port: u16_be(l4, 2).ok()?,
        seq: u32_be(l4, 4).ok()?,
        flags: u8_at(l4, 13).ok()?,
        payload: l4[data_off..].to_vec(),
    })
}

/// Builds a little-endian microsecond pcap of IPv4/TCP frames.
#[derive(Debug, Clone)]
pub struct PcapWriter {
    link_type: u32,
    out: Vec<u8>,
}

impl PcapWriter {
    pub fn new(link_type: u32) -> Self {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC_MICRO.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&0i32.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&65535u32.to_le_bytes());
        out.extend_from_slice(&link_type.to_le_bytes());
        PcapWriter { link_type, out }
    }

    /// Header bytes added in front of the TCP payload for this link type.
    pub fn overhead(&self) -> usize {
        40 + match self.link_type {
            LINKTYPE_ETHERNET => 14,
            LINKTYPE_LINUX_SLL => 16,
            _ => 0,
        }
    }

    pub fn raw_frame(&mut self, ts_micros: u64, frame: &[u8]) {
        self.out
            .extend_from_slice(&((ts_micros / 1_000_000) as u32).to_le_bytes());
        self.out
            .extend_from_slice(&((ts_micros % 1_000_000) as u32).to_le_bytes());
        self.out
            .extend_from_slice(&(frame.len() as u32).to_le_bytes());
        self.out
            .extend_from_slice(&(frame.len() as u32).to_le_bytes());
        self.out.extend_from_slice(frame);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn tcp(
        &mut self,
        ts_micros: u64,
        src: (Ipv4Addr, u16),
        dst: (Ipv4Addr, u16),
        seq: u32,
        flags: u8,
        payload: &[u8],
    ) {
        let mut frame = Vec::with_capacity(self.overhead() + payload.len());
        match self.link_type {
            LINKTYPE_ETHERNET => {
                frame.extend_from_slice(&[0x02, 0, 0, 0, 0, 2, 0x02, 0, 0, 0, 0, 1, 0x08, 0x00]);
            }
            LINKTYPE_LINUX_SLL => {
                frame.extend_from_slice(&[0, 0, 0, 1, 0, 6, 2, 0, 0, 0, 0, 1, 0, 0, 0x08, 0x00]);
            }
            _ => {}
        }
        let total = (40 + payload.len()) as u16;
        let mut ip = vec![0x45, 0, 0, 0, 0, 0, 0x40, 0, 64, 6, 0, 0];
        ip[2..4].copy_from_slice(&total.to_be_bytes());
        ip.extend_from_slice(&src.0.octets());
        ip.extend_from_slice(&dst.0.octets());
        let sum = ip_checksum(&ip);
        ip[10..12].copy_from_slice(&sum.to_be_bytes());
        frame.extend_from_slice(&ip);
        frame.extend_from_slice(&src.1.to_be_bytes());
        frame.extend_from_slice(&dst.1.to_be_bytes());
        frame.extend_from_slice(&seq.to_be_bytes());
        frame.extend_from_slice(&0u32.to_be_bytes());
        frame.extend_from_slice(&[0x50, flags, 0xff, 0xff, 0, 0, 0, 0]);
        frame.extend_from_slice(payload);
        self.raw_frame(ts_micros, &frame);
    }

    pub fn finish(self) -> Vec<u8> {
        self.out
    }
}

fn ip_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
        .sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}
