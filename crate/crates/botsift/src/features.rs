//! The eleven per-flow traffic features.
//!
//! All statistics are computed over the merged, time-ordered packet stream of
//! a flow. Variances are population variances (divisor N). A statistic whose
//! sample set is empty is 0, so every flow yields a dense numeric vector.

use crate::capture::TcpFlow;
use crate::error::Error;
use crate::Result;

/// Canonical feature order; this is the column order everywhere.
pub const FEATURE_NAMES: [&str; 11] = [
    "sPort", "dPort", "mLen", "vLen", "mTime", "vTime", "mResp", "vResp", "nBytes", "nSYN",
    "nPackets",
];

/// The canonical feature schema, in fixed order.
pub fn feature_schema() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Index of a feature name in the canonical schema.
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&f| f == name)
}

/// Feature values for one TCP flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// Initiator's port.
    pub s_port: u16,
    /// Responder's port.
    pub d_port: u16,
    /// Mean payload length over all packets, both directions (bytes).
    pub m_len: f64,
    /// Population variance of payload lengths (bytes²).
    pub v_len: f64,
    /// Mean gap between consecutive packets in the merged stream (s).
    pub m_time: f64,
    /// Population variance of those gaps (s²).
    pub v_time: f64,
    /// Mean latency from a packet reaching the initiator to the initiator's
    /// next transmitted packet (s).
    pub m_resp: f64,
    /// Population variance of those latencies (s²).
    pub v_resp: f64,
    /// Total payload bytes exchanged.
    pub n_bytes: u64,
    /// Packets carrying a SYN flag, either direction.
    pub n_syn: u32,
    /// Total packet count.
    pub n_packets: u32,
}

impl FeatureVector {
    /// Values in canonical schema order.
    pub fn to_row(&self) -> [f64; 11] {
        [
            self.s_port as f64,
            self.d_port as f64,
            self.m_len,
            self.v_len,
            self.m_time,
            self.v_time,
            self.m_resp,
            self.v_resp,
            self.n_bytes as f64,
            self.n_syn as f64,
            self.n_packets as f64,
        ]
    }
}

fn mean_and_population_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Compute the eleven features of a flow.
pub fn extract_features(flow: &TcpFlow) -> Result<FeatureVector> {
    if flow.packets.is_empty() {
        return Err(Error::contract(
            "cannot extract features from an empty flow",
        ));
    }

    let initiator = flow.initiator;
    let responder = flow.responder();

    let lens: Vec<f64> = flow.packets.iter().map(|p| p.payload_len as f64).collect();
    let (m_len, v_len) = mean_and_population_variance(&lens);

    let gaps: Vec<f64> = flow
        .packets
        .windows(2)
        .map(|w| w[1].timestamp - w[0].timestamp)
        .collect();
    let (m_time, v_time) = mean_and_population_variance(&gaps);

    // Response latencies: each packet the initiator receives pairs with the
    // initiator's next transmitted packet; receipts never answered drop out.
    let mut latencies = Vec::new();
    let mut pending: Vec<f64> = Vec::new();
    for packet in &flow.packets {
        if packet.src() == initiator {
            for received_at in pending.drain(..) {
                latencies.push(packet.timestamp - received_at);
            }
        } else {
            pending.push(packet.timestamp);
        }
    }
    let (m_resp, v_resp) = mean_and_population_variance(&latencies);

    let n_bytes: u64 = flow.packets.iter().map(|p| p.payload_len as u64).sum();
    let n_syn = flow.packets.iter().filter(|p| p.flags.syn()).count() as u32;

    Ok(FeatureVector {
        s_port: initiator.port,
        d_port: responder.port,
        m_len,
        v_len,
        m_time,
        v_time,
        m_resp,
        v_resp,
        n_bytes,
        n_syn,
        n_packets: flow.packets.len() as u32,
    })
}
