use std::collections::BTreeSet;
use std::net::{IpAddr, Ipv4Addr};

use droidlens::trace::flows::{partition_flows, tcp_features};
use droidlens::trace::pcap::{read_pcap, PcapWriter, LINKTYPE_ETHERNET, TCP_ACK, TCP_SYN};
use droidlens::trace::strace::{parse_strace_text, TargetFilter};
use droidlens::AppId;
use proptest::prelude::*;

const DEVICE: Ipv4Addr = Ipv4Addr::new(10, 0, 2, 15);

/// (outbound, server index, client port offset, payload length, flags, gap in micros)
type Pkt = (bool, u8, u8, usize, u8, u32);

fn packets() -> impl Strategy<Value = Vec<Pkt>> {
    prop::collection::vec(
        (
            any::<bool>(),
            0u8..3,
            0u8..3,
            0usize..200,
            prop::sample::select(vec![TCP_ACK, TCP_SYN, TCP_SYN | TCP_ACK]),
            0u32..2_000_000,
        ),
        1..40,
    )
}

fn capture(pkts: &[Pkt], swap: bool) -> Vec<u8> {
    let mut w = PcapWriter::new(LINKTYPE_ETHERNET);
    let mut ts = 0u64;
    for &(out, server, port, len, flags, gap) in pkts {
        ts += gap as u64;
        let dev = (DEVICE, 40000 + port as u16);
        let srv = (Ipv4Addr::new(93, 184, 216, 10 + server), 443);
        let (mut src, mut dst) = if out { (dev, srv) } else { (srv, dev) };
        if swap {
            std::mem::swap(&mut src, &mut dst);
        }
        w.tcp(ts, src, dst, 1, flags, &vec![0u8; len]);
    }
    w.finish()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn every_packet_lands_in_exactly_one_flow(pkts in packets()) {
        let cap = read_pcap(&capture(&pkts, false)).unwrap();
        let flows = partition_flows(&cap.tcp);
        let mut seen: Vec<usize> = flows.iter().flat_map(|(_, idx)| idx.iter().copied()).collect();
        prop_assert_eq!(seen.len(), cap.tcp.len());
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), cap.tcp.len());
    }

    #[test]
    fn swapping_direction_swaps_features(pkts in packets()) {
        let device = Some(IpAddr::V4(DEVICE));
        let a = tcp_features(&read_pcap(&capture(&pkts, false)).unwrap(), device).unwrap();
        let b = tcp_features(&read_pcap(&capture(&pkts, true)).unwrap(), device).unwrap();
        prop_assert_eq!(a.avg_packet_size, b.avg_packet_size);
        prop_assert_eq!(a.avg_packets_per_flow_out, b.avg_packets_per_flow_in);
        prop_assert_eq!(a.avg_packets_per_flow_in, b.avg_packets_per_flow_out);
        prop_assert_eq!(a.avg_bytes_sent_per_flow, b.avg_bytes_received_per_flow);
        prop_assert_eq!(a.avg_bytes_received_per_flow, b.avg_bytes_sent_per_flow);
        if a.in_out_byte_ratio > 0.0 && b.in_out_byte_ratio > 0.0 {
            prop_assert!((a.in_out_byte_ratio * b.in_out_byte_ratio - 1.0).abs() < 1e-12);
        } else {
            prop_assert_eq!(a.in_out_byte_ratio, 0.0);
            prop_assert_eq!(b.in_out_byte_ratio, 0.0);
        }
    }

    #[test]
    fn features_stay_finite_under_corruption(pkts in packets(), pos in 0.0f64..1.0, xor in 1u8..=255) {
        let mut bytes = capture(&pkts, false);
        let at = (24 + (pos * (bytes.len() - 24) as f64) as usize).min(bytes.len() - 1);
        bytes[at] ^= xor;
        if let Ok(cap) = read_pcap(&bytes) {
            if let Ok(f) = tcp_features(&cap, None) {
                prop_assert!(f.to_array().iter().all(|v| v.is_finite() && *v >= 0.0));
            }
        }
    }
}

/// (pid, forks a child with this pid instead of a plain syscall)
fn strace_lines() -> impl Strategy<Value = Vec<(u32, Option<u32>)>> {
    prop::collection::vec((1u32..8, prop::option::weighted(0.3, 1u32..8)), 1..40)
}

fn strace_text(lines: &[(u32, Option<u32>)]) -> String {
    lines
        .iter()
        .map(|&(pid, fork)| match fork {
            Some(child) => format!("{pid} clone(child_stack=NULL, flags=SIGCHLD) = {child}\n"),
            None => format!("{pid} read(3, \"\", 8) = 0\n"),
        })
        .collect()
}

fn is_subsequence<T: PartialEq>(small: &[T], big: &[T]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

proptest! {
    #[test]
    fn larger_seed_sets_never_lose_calls(lines in strace_lines(), a in prop::collection::btree_set(1u32..8, 0..4), extra in prop::collection::btree_set(1u32..8, 0..4)) {
        let text = strace_text(&lines);
        let id = AppId::of_bytes(b"s");
        let b: BTreeSet<u32> = a.union(&extra).copied().collect();
        let small = parse_strace_text(&text, id.clone(), &TargetFilter::Pids(a)).unwrap();
        let large = parse_strace_text(&text, id.clone(), &TargetFilter::Pids(b)).unwrap();
        let all = parse_strace_text(&text, id, &TargetFilter::All).unwrap();
        prop_assert!(is_subsequence(&small.calls, &large.calls));
        prop_assert!(is_subsequence(&large.calls, &all.calls));
        prop_assert_eq!(all.calls.len(), lines.len());
    }
}
