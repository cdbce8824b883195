//! Packet-capture ingestion and bidirectional TCP flow assembly.
//!
//! A flow is the full set of packets exchanged over one TCP connection; it is
//! the sampling unit for everything downstream. Flows are keyed by the
//! unordered endpoint pair, so both directions of a connection land in the
//! same flow.

mod labels;
mod pcap;

pub use labels::{label_flows, parse_label_rules, LabelPolicy, LabelRule};
pub use pcap::read_capture;

use std::collections::HashMap;
use std::net::IpAddr;

/// TCP flag set packed into one byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TcpFlags(pub u8);

impl TcpFlags {
    pub const FIN: u8 = 0x01;
    pub const SYN: u8 = 0x02;
    pub const RST: u8 = 0x04;
    pub const PSH: u8 = 0x08;
    pub const ACK: u8 = 0x10;
    pub const URG: u8 = 0x20;

    pub fn has(self, mask: u8) -> bool {
        self.0 & mask != 0
    }

    pub fn syn(self) -> bool {
        self.has(Self::SYN)
    }

    pub fn ack(self) -> bool {
        self.has(Self::ACK)
    }

    pub fn fin(self) -> bool {
        self.has(Self::FIN)
    }

    pub fn rst(self) -> bool {
        self.has(Self::RST)
    }
}

/// One captured TCP packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    /// Seconds since the epoch, fractional part at microsecond or nanosecond
    /// resolution depending on the capture format.
    pub timestamp: f64,
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub flags: TcpFlags,
    /// TCP payload bytes (IP and TCP headers excluded).
    pub payload_len: u32,
}

impl PacketRecord {
    pub fn src(&self) -> Endpoint {
        Endpoint {
            ip: self.src_ip,
            port: self.src_port,
        }
    }

    pub fn dst(&self) -> Endpoint {
        Endpoint {
            ip: self.dst_ip,
            port: self.dst_port,
        }
    }
}

/// One side of a TCP connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub ip: IpAddr,
    pub port: u16,
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.ip, self.port)
    }
}

/// Canonical unordered endpoint pair identifying a connection.
///
/// Endpoints are ordered lexicographically on (ip, port) so that packets in
/// either direction map to the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowKey {
    pub a: Endpoint,
    pub b: Endpoint,
}

impl FlowKey {
    pub fn of(packet: &PacketRecord) -> Self {
        Self::from_endpoints(packet.src(), packet.dst())
    }

    pub fn from_endpoints(x: Endpoint, y: Endpoint) -> Self {
        if x <= y {
            FlowKey { a: x, b: y }
        } else {
            FlowKey { a: y, b: x }
        }
    }
}

/// A bidirectional TCP connection: its packets in time order plus the
/// endpoint that opened it.
#[derive(Debug, Clone)]
pub struct TcpFlow {
    pub key: FlowKey,
    pub packets: Vec<PacketRecord>,
    /// Sender of the first SYN-without-ACK, falling back to the sender of the
    /// first observed packet when the capture missed the handshake.
    pub initiator: Endpoint,
    pub start_time: f64,
    pub end_time: f64,
}

impl TcpFlow {
    /// The endpoint opposite the initiator.
    pub fn responder(&self) -> Endpoint {
        if self.key.a == self.initiator {
            self.key.b
        } else {
            self.key.a
        }
    }
}

/// Flow assembly settings.
#[derive(Debug, Clone, Copy)]
pub struct AssembleConfig {
    /// A gap longer than this between packets of the same key closes the flow;
    /// the next packet opens a new one.
    pub idle_timeout: f64,
    /// Close a flow as soon as an RST is seen.
    pub terminate_on_rst: bool,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        AssembleConfig {
            idle_timeout: 300.0,
            terminate_on_rst: true,
        }
    }
}

/// In-progress flow state tracked during assembly.
struct OpenFlow {
    packets: Vec<PacketRecord>,
    /// Input position of the first packet, for deterministic output order.
    first_seen: usize,
    /// Per canonical direction (from key.a / from key.b): FIN observed.
    fin_seen: [bool; 2],
    /// Per canonical direction: that FIN was later acked by the peer.
    fin_acked: [bool; 2],
}

impl OpenFlow {
    fn finish(self, key: FlowKey) -> TcpFlow {
        let initiator = self
            .packets
            .iter()
            .find(|p| p.flags.syn() && !p.flags.ack())
            .map(|p| p.src())
            .unwrap_or_else(|| self.packets[0].src());
        let start_time = self.packets[0].timestamp;
        let end_time = self.packets[self.packets.len() - 1].timestamp;
        TcpFlow {
            key,
            packets: self.packets,
            initiator,
            start_time,
            end_time,
        }
    }
}

/// Group TCP packets into bidirectional flows.
///
/// Packets are taken in non-decreasing timestamp order (the input is sorted
/// first if needed, stably, so file order breaks timestamp ties). A flow
/// closes on RST (if enabled), once both endpoints' FINs have each been
/// followed by an ACK from the peer, on an idle gap exceeding
/// `config.idle_timeout`, or at end of input. Degenerate inputs produce
/// degenerate flows, never errors.
pub fn assemble_flows(packets: &[PacketRecord], config: &AssembleConfig) -> Vec<TcpFlow> {
    let sorted;
    let packets = if packets.windows(2).all(|w| w[0].timestamp <= w[1].timestamp) {
        packets
    } else {
        let mut v = packets.to_vec();
        v.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        sorted = v;
        &sorted
    };

    let mut open: HashMap<FlowKey, OpenFlow> = HashMap::new();
    let mut done: Vec<(usize, FlowKey, OpenFlow)> = Vec::new();

    for (pos, packet) in packets.iter().enumerate() {
        let key = FlowKey::of(packet);

        if let Some(flow) = open.get(&key) {
            let last = flow.packets[flow.packets.len() - 1].timestamp;
            if packet.timestamp - last > config.idle_timeout {
                let flow = open.remove(&key).unwrap();
                done.push((flow.first_seen, key, flow));
            }
        }

        let flow = open.entry(key).or_insert_with(|| OpenFlow {
            packets: Vec::new(),
            first_seen: pos,
            fin_seen: [false; 2],
            fin_acked: [false; 2],
        });

        let from_a = packet.src() == key.a;
        let dir = usize::from(!from_a);
        let peer = 1 - dir;
        if packet.flags.ack() && flow.fin_seen[peer] {
            flow.fin_acked[peer] = true;
        }
        if packet.flags.fin() {
            flow.fin_seen[dir] = true;
        }
        flow.packets.push(packet.clone());

        let rst_close = config.terminate_on_rst && packet.flags.rst();
        let fin_close = flow.fin_acked[0] && flow.fin_acked[1];
        if rst_close || fin_close {
            let flow = open.remove(&key).unwrap();
            done.push((flow.first_seen, key, flow));
        }
    }

    for (key, flow) in open.drain() {
        done.push((flow.first_seen, key, flow));
    }

    done.sort_by_key(|(first_seen, _, _)| *first_seen);
    done.into_iter()
        .map(|(_, key, flow)| flow.finish(key))
        .collect()
}
