//! TCP flow statistics and HTTP request headers from captures.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use super::pcap::{Capture, TcpPacket};
use super::TraceError;
use crate::report::{AppId, FeatureKind, FeatureRecord, FeatureReport, Source};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TcpFlowFeatures {
    pub avg_packet_size: f64,
    pub avg_packets_per_flow_out: f64,
    pub avg_packets_per_flow_in: f64,
    pub avg_bytes_sent_per_flow: f64,
    pub avg_bytes_received_per_flow: f64,
    pub in_out_byte_ratio: f64,
    pub avg_packets_received_per_second: f64,
}

impl TcpFlowFeatures {
    pub const NAMES: [&'static str; 7] = [
        "avg_packet_size",
        "avg_packets_per_flow_out",
        "avg_packets_per_flow_in",
        "avg_bytes_sent_per_flow",
        "avg_bytes_received_per_flow",
        "in_out_byte_ratio",
        "avg_packets_received_per_second",
    ];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.avg_packet_size,
            self.avg_packets_per_flow_out,
            self.avg_packets_per_flow_in,
            self.avg_bytes_sent_per_flow,
            self.avg_bytes_received_per_flow,
            self.in_out_byte_ratio,
            self.avg_packets_received_per_second,
        ]
    }
}

/// Unordered endpoint pair identifying a TCP connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub a: (IpAddr, u16),
    pub b: (IpAddr, u16),
}

impl FlowKey {
    pub fn of(p: &TcpPacket) -> FlowKey {
        let s = (p.src, p.src_port);
        let d = (p.dst, p.dst_port);
        if s <= d {
            FlowKey { a: s, b: d }
        } else {
            FlowKey { a: d, b: s }
        }
    }
}

/// Flows in order of first appearance, each with its packet indices.
pub fn partition_flows(packets: &[TcpPacket]) -> Vec<(FlowKey, Vec<usize>)> {
    let mut index: HashMap<FlowKey, usize> = HashMap::new();
    let mut flows: Vec<(FlowKey, Vec<usize>)> = Vec::new();
    for (i, p) in packets.iter().enumerate() {
        let k = FlowKey::of(p);
        let slot = *index.entry(k).or_insert_with(|| {
            flows.push((k, Vec::new()));
            flows.len() - 1
        });
        flows[slot].1.push(i);
    }
    flows
}

/// Sender of the first SYN without ACK.
pub fn infer_device(packets: &[TcpPacket]) -> Option<IpAddr> {
    packets.iter().find(|p| p.is_syn()).map(|p| p.src)
}

/// With `device` unset it is inferred from the first SYN; if there is none,
/// the lower endpoint of each flow is taken as the client.
pub fn tcp_features(cap: &Capture, device: Option<IpAddr>) -> Result<TcpFlowFeatures, TraceError> {
    let pkts = &cap.tcp;
    if pkts.is_empty() {
        return Err(TraceError::EmptyCapture);
    }
    let device = device.or_else(|| infer_device(pkts));
    let flows = partition_flows(pkts);
    let (mut out_pk, mut in_pk, mut out_b, mut in_b) = (0u64, 0u64, 0u64, 0u64);
    for (key, idx) in &flows {
        for &i in idx {
            let p = &pkts[i];
            let outbound = match device {
                Some(d) => p.src == d,
                None => (p.src, p.src_port) == key.a,
            };
            if outbound {
                out_pk += 1;
                out_b += p.frame_len as u64;
            } else {
                in_pk += 1;
                in_b += p.frame_len as u64;
            }
        }
    }
    let n = pkts.len() as f64;
    let nf = flows.len() as f64;
    let first = pkts.iter().map(|p| p.ts_nanos).min().unwrap_or(0);
    let last = pkts.iter().map(|p| p.ts_nanos).max().unwrap_or(0);
    let span = (last - first) as f64 / 1e9;
    Ok(TcpFlowFeatures {
        avg_packet_size: (out_b + in_b) as f64 / n,
        avg_packets_per_flow_out: out_pk as f64 / nf,
        avg_packets_per_flow_in: in_pk as f64 / nf,
        avg_bytes_sent_per_flow: out_b as f64 / nf,
        avg_bytes_received_per_flow: in_b as f64 / nf,
        in_out_byte_ratio: if out_b == 0 {
            0.0
        } else {
            in_b as f64 / out_b as f64
        },
        avg_packets_received_per_second: if span > 0.0 {
            in_pk as f64 / span
        } else {
            in_pk as f64
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequestFeatures {
    pub host: String,
    pub request_uri: String,
    pub method: String,
    pub user_agent: String,
}

pub const HTTP_PORTS: [u16; 2] = [80, 8080];

/// Requests sent to port 80/8080, flows in order of first appearance.
pub fn http_features(cap: &Capture) -> Vec<HttpRequestFeatures> {
    let mut streams: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
    let mut order: HashMap<FlowKey, usize> = HashMap::new();
    let mut seen: HashSet<(FlowKey, u32)> = HashSet::new();
    for p in &cap.tcp {
        if !HTTP_PORTS.contains(&p.dst_port) || p.payload.is_empty() {
            continue;
        }
        let key = FlowKey {
            a: (p.src, p.src_port),
            b: (p.dst, p.dst_port),
        };
        if !seen.insert((key, p.seq)) {
            continue;
        }
        let next = order.len();
        let slot = *order.entry(key).or_insert(next);
        streams
            .entry(slot)
            .or_default()
            .extend_from_slice(&p.payload);
    }
    streams.values().flat_map(|s| parse_requests(s)).collect()
}

/// Parses back-to-back requests; stops at the first unparseable one.
pub fn parse_requests(stream: &[u8]) -> Vec<HttpRequestFeatures> {
    let mut out = Vec::new();
    let mut rest = stream;
    while let Some(end) = find(rest, b"\r\n\r\n") {
        let Ok(head) = std::str::from_utf8(&rest[..end]) else {
            break;
        };
        let mut lines = head.split("\r\n");
        let mut parts = lines.next().unwrap_or("").split(' ');
        let (Some(method), Some(uri), Some(version), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            break;
        };
        if method.is_empty()
            || !method.bytes().all(|b| b.is_ascii_uppercase())
            || uri.is_empty()
            || !version.starts_with("HTTP/")
        {
            break;
        }
        let mut req = HttpRequestFeatures {
            host: String::new(),
            request_uri: uri.to_string(),
            method: method.to_string(),
            user_agent: String::new(),
        };
        let mut body_len = 0usize;
        for h in lines {
            let Some((name, value)) = h.split_once(':') else {
                continue;
            };
            let value = value.trim().to_string();
            match name.trim().to_ascii_lowercase().as_str() {
                "host" => req.host = value,
                "user-agent" => req.user_agent = value,
                "content-length" => body_len = value.parse().unwrap_or(0),
                _ => {}
            }
        }
        out.push(req);
        let next = end + 4 + body_len;
        if next > rest.len() {
            break;
        }
        rest = &rest[next..];
    }
    out
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

pub fn http_report(app_id: AppId, requests: &[HttpRequestFeatures]) -> FeatureReport {
    let mut r = FeatureReport::new(app_id, Source::Dynamic);
    for q in requests {
        for (k, v) in [
            (FeatureKind::HttpHost, &q.host),
            (FeatureKind::HttpRequestUri, &q.request_uri),
            (FeatureKind::HttpMethod, &q.method),
            (FeatureKind::HttpUserAgent, &q.user_agent),
        ] {
            if let Ok(rec) = FeatureRecord::new(k, v.clone()) {
                r.insert(rec);
            }
        }
    }
    r
}
