//! Shared test fixtures: a tiny capture-file writer, the bundled synthetic
//! capture, and its hand-computed feature vectors.

#![allow(dead_code)]

use botsift::features::FeatureVector;

const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
const MAGIC_NANOS: u32 = 0xa1b2_3c4d;

/// Minimal little-endian Ethernet capture writer.
pub struct PcapWriter {
    bytes: Vec<u8>,
    nanos: bool,
}

impl PcapWriter {
    pub fn new_micros() -> Self {
        Self::new(false)
    }

    pub fn new_nanos() -> Self {
        Self::new(true)
    }

    fn new(nanos: bool) -> Self {
        let magic = if nanos { MAGIC_NANOS } else { MAGIC_MICROS };
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&magic.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes()); // version 2.4
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes()); // thiszone
        bytes.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
        bytes.extend_from_slice(&65535u32.to_le_bytes()); // snaplen
        bytes.extend_from_slice(&1u32.to_le_bytes()); // ethernet
        PcapWriter { bytes, nanos }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn tcp(
        &mut self,
        sec: u32,
        frac: u32,
        src: [u8; 4],
        sport: u16,
        dst: [u8; 4],
        dport: u16,
        flags: u8,
        payload_len: usize,
    ) {
        let mut frame = vec![0u8; 12];
        frame.extend_from_slice(&[0x08, 0x00]); // IPv4
        let total = (20 + 20 + payload_len) as u16;
        frame.push(0x45);
        frame.push(0);
        frame.extend_from_slice(&total.to_be_bytes());
        frame.extend_from_slice(&[0, 0, 0x40, 0, 64, 6, 0, 0]);
        frame.extend_from_slice(&src);
        frame.extend_from_slice(&dst);
        frame.extend_from_slice(&sport.to_be_bytes());
        frame.extend_from_slice(&dport.to_be_bytes());
        frame.extend_from_slice(&[0; 8]); // seq, ack
        frame.push(5 << 4); // data offset
        frame.push(flags);
        frame.extend_from_slice(&[0; 6]); // window, checksum, urgent
        frame.extend_from_slice(&vec![0xabu8; payload_len]);
        self.record(sec, frac, &frame);
    }

    pub fn udp(&mut self, sec: u32, frac: u32, src: [u8; 4], dst: [u8; 4]) {
        let mut frame = vec![0u8; 12];
        frame.extend_from_slice(&[0x08, 0x00]);
        frame.push(0x45);
        frame.push(0);
        frame.extend_from_slice(&28u16.to_be_bytes());
        frame.extend_from_slice(&[0, 0, 0x40, 0, 64, 17, 0, 0]);
        frame.extend_from_slice(&src);
        frame.extend_from_slice(&dst);
        frame.extend_from_slice(&5353u16.to_be_bytes());
        frame.extend_from_slice(&5353u16.to_be_bytes());
        frame.extend_from_slice(&8u16.to_be_bytes());
        frame.extend_from_slice(&[0, 0]);
        self.record(sec, frac, &frame);
    }

    pub fn record(&mut self, sec: u32, frac: u32, frame: &[u8]) {
        debug_assert!(if self.nanos {
            frac < 1_000_000_000
        } else {
            frac < 1_000_000
        });
        self.bytes.extend_from_slice(&sec.to_le_bytes());
        self.bytes.extend_from_slice(&frac.to_le_bytes());
        self.bytes
            .extend_from_slice(&(frame.len() as u32).to_le_bytes());
        self.bytes
            .extend_from_slice(&(frame.len() as u32).to_le_bytes());
        self.bytes.extend_from_slice(frame);
    }

    pub fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

const C: [u8; 4] = [10, 0, 0, 5]; // Miuref host
const C2: [u8; 4] = [10, 0, 0, 7]; // Rbot host
const N: [u8; 4] = [172, 16, 0, 2]; // Normal host
const U: [u8; 4] = [203, 0, 113, 9]; // matches no rule
const S: [u8; 4] = [192, 168, 1, 10]; // server

const FIN: u8 = 0x01;
const SYN: u8 = 0x02;
const RST: u8 = 0x04;
const PSH: u8 = 0x08;
const ACK: u8 = 0x10;

/// The bundled synthetic capture: six TCP flows (handshake-only,
/// response-pair, idle-timeout split, RST teardown, unlabeled host) plus two
/// UDP packets that ingestion must skip.
pub fn synthetic_capture_bytes() -> Vec<u8> {
    let mut w = PcapWriter::new_micros();

    // flow 1: handshake only, C:49152 -> S:80
    w.tcp(100, 0, C, 49152, S, 80, SYN, 0);
    w.tcp(100, 500, S, 80, C, 49152, SYN | ACK, 0);
    w.tcp(100, 1000, C, 49152, S, 80, ACK, 0);

    w.udp(150, 0, C, [224, 0, 0, 251]);

    // flow 2: handshake, two request/response rounds, FIN teardown
    w.tcp(200, 0, C, 49153, S, 80, SYN, 0);
    w.tcp(200, 100_000, S, 80, C, 49153, SYN | ACK, 0);
    w.tcp(200, 200_000, C, 49153, S, 80, ACK, 0);
    w.tcp(200, 300_000, C, 49153, S, 80, PSH | ACK, 100);
    w.tcp(200, 700_000, S, 80, C, 49153, PSH | ACK, 200);
    w.tcp(201, 100_000, C, 49153, S, 80, PSH | ACK, 50);
    w.tcp(201, 300_000, S, 80, C, 49153, PSH | ACK, 300);
    w.tcp(201, 500_000, C, 49153, S, 80, ACK, 0);
    w.tcp(201, 600_000, C, 49153, S, 80, FIN | ACK, 0);
    w.tcp(201, 700_000, S, 80, C, 49153, FIN | ACK, 0);
    w.tcp(201, 800_000, C, 49153, S, 80, ACK, 0);

    // flow 3: two bursts 400 s apart; splits at the default 300 s timeout
    w.tcp(300, 0, N, 50000, S, 80, SYN, 0);
    w.tcp(300, 500_000, S, 80, N, 50000, SYN | ACK, 0);
    w.tcp(301, 0, N, 50000, S, 80, ACK, 40);

    // flow 4: RST teardown, C2:50001 -> S:443
    w.tcp(400, 0, C2, 50001, S, 443, SYN, 0);
    w.tcp(400, 100_000, S, 443, C2, 50001, SYN | ACK, 0);
    w.tcp(400, 200_000, C2, 50001, S, 443, ACK, 20);
    w.tcp(400, 300_000, S, 443, C2, 50001, RST, 0);

    w.udp(450, 0, C, [224, 0, 0, 251]);

    // flow 5: handshake start from a host no label rule matches
    w.tcp(500, 0, U, 1234, S, 80, SYN, 0);
    w.tcp(500, 200_000, S, 80, U, 1234, SYN | ACK, 0);

    // flow 3, second burst (new flow after the idle gap)
    w.tcp(701, 0, N, 50000, S, 80, PSH | ACK, 60);
    w.tcp(701, 200_000, S, 80, N, 50000, ACK, 0);

    w.finish()
}

/// Label rules for the bundled capture.
pub const SYNTHETIC_LABELS: &str = "\
# labels for the bundled synthetic capture
10.0.0.5 Miuref
10.0.0.7/32 Rbot
172.16.0.0/16 Normal
";

/// Number of TCP packets in the bundled capture.
pub const SYNTHETIC_TCP_PACKETS: usize = 25;

/// Expected (label, features) per assembled flow of the bundled capture,
/// in assembly order, when labeled with [`SYNTHETIC_LABELS`] and a
/// drop-unmatched policy. Every value below is hand-evaluated from the packet
/// list in [`synthetic_capture_bytes`].
pub fn golden_flows() -> Vec<(&'static str, FeatureVector)> {
    vec![
        (
            // flow 1: payloads all 0; gaps {0.0005, 0.0005}; one response
            // pair (SYN|ACK at 100.0005 answered at 100.001)
            "Miuref",
            FeatureVector {
                s_port: 49152,
                d_port: 80,
                m_len: 0.0,
                v_len: 0.0,
                m_time: 0.0005,
                v_time: 0.0,
                m_resp: 0.0005,
                v_resp: 0.0,
                n_bytes: 0,
                n_syn: 2,
                n_packets: 3,
            },
        ),
        (
            // flow 2: payloads {0,0,0,100,200,50,300,0,0,0,0}
            //   mLen = 650/11, vLen = 12595000/1331
            //   gaps {.1,.1,.1,.4,.4,.2,.2,.1,.1,.1}: mean 0.18,
            //   var = 0.046 - 0.0324 = 0.0136
            //   response latencies {0.1, 0.4, 0.2, 0.1}: mean 0.2,
            //   var = 0.055 - 0.04 = 0.015
            "Miuref",
            FeatureVector {
                s_port: 49153,
                d_port: 80,
                m_len: 650.0 / 11.0,
                v_len: 12_595_000.0 / 1331.0,
                m_time: 0.18,
                v_time: 0.0136,
                m_resp: 0.2,
                v_resp: 0.015,
                n_bytes: 650,
                n_syn: 2,
                n_packets: 11,
            },
        ),
        (
            // flow 3, first burst: payloads {0,0,40}: mean 40/3,
            //   var = (2*(40/3)^2 + (80/3)^2)/3 = 3200/9
            //   gaps {0.5, 0.5}; SYN|ACK at 300.5 answered at 301.0
            "Normal",
            FeatureVector {
                s_port: 50000,
                d_port: 80,
                m_len: 40.0 / 3.0,
                v_len: 3200.0 / 9.0,
                m_time: 0.5,
                v_time: 0.0,
                m_resp: 0.5,
                v_resp: 0.0,
                n_bytes: 40,
                n_syn: 2,
                n_packets: 3,
            },
        ),
        (
            // flow 4: payloads {0,0,20,0}: mean 5, var 300/4 = 75
            //   gaps {0.1,0.1,0.1}; SYN|ACK answered 0.1 s later, RST never
            "Rbot",
            FeatureVector {
                s_port: 50001,
                d_port: 443,
                m_len: 5.0,
                v_len: 75.0,
                m_time: 0.1,
                v_time: 0.0,
                m_resp: 0.1,
                v_resp: 0.0,
                n_bytes: 20,
                n_syn: 2,
                n_packets: 4,
            },
        ),
        (
            // flow 3, second burst: no SYN, initiator falls back to the
            // first sender (N). payloads {60, 0}: mean 30, var 900;
            // the final ACK is never answered
            "Normal",
            FeatureVector {
                s_port: 50000,
                d_port: 80,
                m_len: 30.0,
                v_len: 900.0,
                m_time: 0.2,
                v_time: 0.0,
                m_resp: 0.0,
                v_resp: 0.0,
                n_bytes: 60,
                n_syn: 0,
                n_packets: 2,
            },
        ),
    ]
}

/// Expected features of the unlabeled flow (flow 5) when a default label is
/// configured instead of dropping.
pub fn golden_unlabeled_flow() -> FeatureVector {
    FeatureVector {
        s_port: 1234,
        d_port: 80,
        m_len: 0.0,
        v_len: 0.0,
        m_time: 0.2,
        v_time: 0.0,
        m_resp: 0.0,
        v_resp: 0.0,
        n_bytes: 0,
        n_syn: 2,
        n_packets: 2,
    }
}

/// Compare a computed feature vector against a hand-computed expectation:
/// integer fields exactly, statistics within 1e-9.
pub fn assert_features_match(got: &FeatureVector, want: &FeatureVector, context: &str) {
    assert_eq!(got.s_port, want.s_port, "{context}: sPort");
    assert_eq!(got.d_port, want.d_port, "{context}: dPort");
    assert_eq!(got.n_bytes, want.n_bytes, "{context}: nBytes");
    assert_eq!(got.n_syn, want.n_syn, "{context}: nSYN");
    assert_eq!(got.n_packets, want.n_packets, "{context}: nPackets");
    for (name, got_v, want_v) in [
        ("mLen", got.m_len, want.m_len),
        ("vLen", got.v_len, want.v_len),
        ("mTime", got.m_time, want.m_time),
        ("vTime", got.v_time, want.v_time),
        ("mResp", got.m_resp, want.m_resp),
        ("vResp", got.v_resp, want.v_resp),
    ] {
        assert!(
            (got_v - want_v).abs() <= 1e-9,
            "{context}: {name} = {got_v}, expected {want_v}"
        );
    }
}

/// Deterministic labeled dataset over the canonical 11-feature schema, with
/// learnable structure: the class depends on dPort and nBytes bands.
pub fn synthetic_dataset(n: usize, seed: u64) -> botsift::dataset::Dataset {
    use botsift::dataset::{Dataset, LabeledSample};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let d_port = [80.0, 443.0, 6667.0, 25.0][rng.random_range(0..4)];
        let n_packets = rng.random_range(2..400) as f64;
        let m_len = rng.random_range(0.0..900.0);
        let n_bytes = (m_len * n_packets).round();
        let m_time = rng.random_range(1e-4..2.0f64);
        let label = match (d_port as u32, n_bytes as u64) {
            (6667, _) => "bot-irc",
            (25, _) => "spam",
            (_, b) if b > 120_000 => "bulk",
            _ => "normal",
        };
        let values = vec![
            rng.random_range(1024.0..65535.0f64).round(),
            d_port,
            m_len,
            rng.random_range(0.0..2.5e5),
            m_time,
            rng.random_range(0.0..1.0f64),
            m_time * rng.random_range(0.2..1.0),
            rng.random_range(0.0..0.5f64),
            n_bytes,
            rng.random_range(0.0..4.0f64).floor(),
            n_packets,
        ];
        samples.push(LabeledSample {
            values,
            label: label.to_string(),
        });
    }
    Dataset::new(botsift::features::feature_schema(), samples).unwrap()
}
