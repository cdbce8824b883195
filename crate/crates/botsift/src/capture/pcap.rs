//! Classic packet-capture file reader.
//!
//! Supports both byte orders and both the microsecond and nanosecond magic
//! numbers. Only TCP packets are yielded; everything else is skipped at
//! ingestion. The payload length recorded per packet is the TCP payload size
//! derived from the IP headers (so snaplen-truncated packets still report
//! their true payload size).

use std::fs::File;
use std::io::{BufReader, Read};
use std::net::IpAddr;
use std::path::Path;

use crate::error::Error;
use crate::Result;

use super::{PacketRecord, TcpFlags};

const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
const MAGIC_NANOS: u32 = 0xa1b2_3c4d;

const LINKTYPE_NULL: u32 = 0;
const LINKTYPE_ETHERNET: u32 = 1;
const LINKTYPE_RAW: u32 = 101;

fn u16_at(data: &[u8], off: usize, be: bool) -> u16 {
    let bytes = [data[off], data[off + 1]];
    if be {
        u16::from_be_bytes(bytes)
    } else {
        u16::from_le_bytes(bytes)
    }
}

fn u32_at(data: &[u8], off: usize, be: bool) -> u32 {
    let bytes = [data[off], data[off + 1], data[off + 2], data[off + 3]];
    if be {
        u32::from_be_bytes(bytes)
    } else {
        u32::from_le_bytes(bytes)
    }
}

fn be16(data: &[u8], off: usize) -> u16 {
    u16_at(data, off, true)
}

/// Read a capture file, yielding its TCP packets in file order.
pub fn read_capture(path: impl AsRef<Path>) -> Result<Vec<PacketRecord>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::FileIo {
        path: name.clone(),
        source: e,
    })?;
    let file_len = file
        .metadata()
        .map_err(|e| Error::FileIo {
            path: name.clone(),
            source: e,
        })?
        .len();
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 4];
    if !read_full(&mut reader, &mut magic, &name, 0)? {
        return Err(Error::Truncated {
            path: name,
            offset: 0,
        });
    }
    let le_magic = u32::from_le_bytes(magic);
    let be_magic = u32::from_be_bytes(magic);
    let (big_endian, tick) = match (le_magic, be_magic) {
        (MAGIC_MICROS, _) => (false, 1e-6),
        (_, MAGIC_MICROS) => (true, 1e-6),
        (MAGIC_NANOS, _) => (false, 1e-9),
        (_, MAGIC_NANOS) => (true, 1e-9),
        _ => {
            return Err(Error::BadMagic {
                path: name,
                magic: le_magic,
            })
        }
    };

    let mut header = [0u8; 20];
    if !read_full(&mut reader, &mut header, &name, 4)? {
        return Err(Error::Truncated {
            path: name,
            offset: 4,
        });
    }
    let link_type = u32_at(&header, 16, big_endian);
    if !matches!(link_type, LINKTYPE_NULL | LINKTYPE_ETHERNET | LINKTYPE_RAW) {
        return Err(Error::UnsupportedLinkType {
            path: name,
            link_type,
        });
    }

    let mut packets = Vec::new();
    let mut offset: u64 = 24;
    let mut record = [0u8; 16];
    let mut data = Vec::new();
    loop {
        if !read_full(&mut reader, &mut record, &name, offset)? {
            break;
        }
        let ts_sec = u32_at(&record, 0, big_endian);
        let ts_frac = u32_at(&record, 4, big_endian);
        let incl_len = u32_at(&record, 8, big_endian) as u64;
        if offset + 16 + incl_len > file_len {
            return Err(Error::Truncated { path: name, offset });
        }
        data.resize(incl_len as usize, 0);
        reader.read_exact(&mut data).map_err(|_| Error::Truncated {
            path: name.clone(),
            offset,
        })?;
        let timestamp = ts_sec as f64 + ts_frac as f64 * tick;
        if let Some(packet) = parse_frame(&data, link_type, timestamp) {
            packets.push(packet);
        }
        offset += 16 + incl_len;
    }
    Ok(packets)
}

/// Fill `buf` completely. Ok(false) on clean EOF at a record boundary;
/// a partial read is a truncation error.
fn read_full(reader: &mut impl Read, buf: &mut [u8], path: &str, offset: u64) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => {
                if filled == 0 {
                    return Ok(false);
                }
                return Err(Error::Truncated {
                    path: path.to_string(),
                    offset,
                });
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => {
                return Err(Error::FileIo {
                    path: path.to_string(),
                    source: e,
                })
            }
        }
    }
    Ok(true)
}

/// Decode one captured frame down to TCP; None means "not a parseable TCP
/// packet", which is silently skipped.
fn parse_frame(data: &[u8], link_type: u32, timestamp: f64) -> Option<PacketRecord> {
    let ip = match link_type {
        LINKTYPE_ETHERNET => strip_ethernet(data)?,
        LINKTYPE_RAW => data,
        LINKTYPE_NULL => {
            // 4-byte address-family header in the writer's byte order.
            if data.len() < 4 {
                return None;
            }
            let fam_le = u32_at(data, 0, false);
            let fam_be = u32_at(data, 0, true);
            let known = |f: u32| f == 2 || matches!(f, 10 | 24 | 28 | 30);
            if !known(fam_le) && !known(fam_be) {
                return None;
            }
            &data[4..]
        }
        _ => return None,
    };
    if ip.is_empty() {
        return None;
    }
    match ip[0] >> 4 {
        4 => parse_ipv4(ip, timestamp),
        6 => parse_ipv6(ip, timestamp),
        _ => None,
    }
}

fn strip_ethernet(data: &[u8]) -> Option<&[u8]> {
    if data.len() < 14 {
        return None;
    }
    let mut ethertype = be16(data, 12);
    let mut off = 14;
    // 802.1Q / 802.1ad tags: 2-byte TCI then the real ethertype.
    while matches!(ethertype, 0x8100 | 0x88a8 | 0x9100) {
        if data.len() < off + 4 {
            return None;
        }
        ethertype = be16(data, off + 2);
        off += 4;
    }
    match ethertype {
        0x0800 | 0x86dd => Some(&data[off..]),
        _ => None,
    }
}

fn parse_ipv4(ip: &[u8], timestamp: f64) -> Option<PacketRecord> {
    if ip.len() < 20 {
        return None;
    }
    let ihl = ((ip[0] & 0x0f) as usize) * 4;
    if ihl < 20 || ip.len() < ihl {
        return None;
    }
    let total_len = be16(ip, 2) as usize;
    if total_len < ihl {
        return None;
    }
    let frag = be16(ip, 6);
    if frag & 0x1fff != 0 {
        // non-first fragment: no TCP header to read
        return None;
    }
    if ip[9] != 6 {
        return None;
    }
    let src = IpAddr::from([ip[12], ip[13], ip[14], ip[15]]);
    let dst = IpAddr::from([ip[16], ip[17], ip[18], ip[19]]);
    parse_tcp(&ip[ihl..], total_len - ihl, src, dst, timestamp)
}

fn parse_ipv6(ip: &[u8], timestamp: f64) -> Option<PacketRecord> {
    if ip.len() < 40 {
        return None;
    }
    let payload_len = be16(ip, 4) as usize;
    let mut next = ip[6];
    let src: [u8; 16] = ip[8..24].try_into().ok()?;
    let dst: [u8; 16] = ip[24..40].try_into().ok()?;
    let mut off = 40;
    let mut ext_len = 0usize;
    loop {
        match next {
            6 => break,
            // hop-by-hop, routing, destination options
            0 | 43 | 60 => {
                if ip.len() < off + 2 {
                    return None;
                }
                let len = (ip[off + 1] as usize + 1) * 8;
                next = ip[off];
                off += len;
                ext_len += len;
            }
            44 => {
                if ip.len() < off + 8 {
                    return None;
                }
                if be16(ip, off + 2) >> 3 != 0 {
                    return None; // non-first fragment
                }
                next = ip[off];
                off += 8;
                ext_len += 8;
            }
            51 => {
                if ip.len() < off + 2 {
                    return None;
                }
                let len = (ip[off + 1] as usize + 2) * 4;
                next = ip[off];
                off += len;
                ext_len += len;
            }
            _ => return None,
        }
        if ext_len > payload_len {
            return None;
        }
    }
    if ip.len() < off {
        return None;
    }
    parse_tcp(
        &ip[off..],
        payload_len - ext_len,
        IpAddr::from(src),
        IpAddr::from(dst),
        timestamp,
    )
}

/// `tcp_total` is the TCP segment size (header + payload) per the IP header.
fn parse_tcp(
    tcp: &[u8],
    tcp_total: usize,
    src_ip: IpAddr,
    dst_ip: IpAddr,
    timestamp: f64,
) -> Option<PacketRecord> {
    if tcp.len() < 14 {
        return None;
    }
    let header_len = ((tcp[12] >> 4) as usize) * 4;
    if header_len < 20 || tcp_total < header_len {
        return None;
    }
    Some(PacketRecord {
        timestamp,
        src_ip,
        dst_ip,
        src_port: be16(tcp, 0),
        dst_port: be16(tcp, 2),
        flags: TcpFlags(tcp[13] & 0x3f),
        payload_len: (tcp_total - header_len) as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    // Minimal capture writer used only to craft test inputs.
    pub(crate) struct CaptureBuilder {
        bytes: Vec<u8>,
        nanos: bool,
    }

    impl CaptureBuilder {
        pub(crate) fn new_ethernet(nanos: bool) -> Self {
            let magic: u32 = if nanos { MAGIC_NANOS } else { MAGIC_MICROS };
            let mut bytes = Vec::new();
            bytes.extend_from_slice(&magic.to_le_bytes());
            bytes.extend_from_slice(&2u16.to_le_bytes());
            bytes.extend_from_slice(&4u16.to_le_bytes());
            bytes.extend_from_slice(&0i32.to_le_bytes());
            bytes.extend_from_slice(&0u32.to_le_bytes());
            bytes.extend_from_slice(&65535u32.to_le_bytes());
            bytes.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
            CaptureBuilder { bytes, nanos }
        }

        #[allow(clippy::too_many_arguments)]
        pub(crate) fn push_tcp_v4(
            &mut self,
            sec: u32,
            frac: u32,
            src: [u8; 4],
            sport: u16,
            dst: [u8; 4],
            dport: u16,
            flags: u8,
            payload: &[u8],
        ) {
            let frame = ethernet_tcp_v4(src, sport, dst, dport, flags, payload);
            self.push_frame(sec, frac, &frame);
        }

        pub(crate) fn push_udp_v4(&mut self, sec: u32, frac: u32, src: [u8; 4], dst: [u8; 4]) {
            let mut frame = vec![0u8; 14];
            frame[12] = 0x08; // IPv4
            let udp_len = 8u16;
            let total = 20 + udp_len;
            frame.push(0x45);
            frame.push(0);
            frame.extend_from_slice(&total.to_be_bytes());
            frame.extend_from_slice(&[0, 0, 0x40, 0, 64, 17, 0, 0]);
            frame.extend_from_slice(&src);
            frame.extend_from_slice(&dst);
            frame.extend_from_slice(&5353u16.to_be_bytes());
            frame.extend_from_slice(&5353u16.to_be_bytes());
            frame.extend_from_slice(&udp_len.to_be_bytes());
            frame.extend_from_slice(&[0, 0]);
            self.push_frame(sec, frac, &frame);
        }

        pub(crate) fn push_frame(&mut self, sec: u32, frac: u32, frame: &[u8]) {
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

        pub(crate) fn finish(self) -> Vec<u8> {
            self.bytes
        }
    }

    pub(crate) fn ethernet_tcp_v4(
        src: [u8; 4],
        sport: u16,
        dst: [u8; 4],
        dport: u16,
        flags: u8,
        payload: &[u8],
    ) -> Vec<u8> {
        let mut frame = vec![0u8; 14];
        frame[12] = 0x08; // IPv4 ethertype 0x0800
        let total = (20 + 20 + payload.len()) as u16;
        frame.push(0x45);
        frame.push(0);
        frame.extend_from_slice(&total.to_be_bytes());
        frame.extend_from_slice(&[0, 0, 0x40, 0, 64, 6, 0, 0]);
        frame.extend_from_slice(&src);
        frame.extend_from_slice(&dst);
        frame.extend_from_slice(&sport.to_be_bytes());
        frame.extend_from_slice(&dport.to_be_bytes());
        frame.extend_from_slice(&[0; 8]); // seq, ack
        frame.push(5 << 4);
        frame.push(flags);
        frame.extend_from_slice(&[0; 4]); // window, checksum
        frame.extend_from_slice(&[0; 2]); // urgent
        frame.extend_from_slice(payload);
        frame
    }

    fn write_temp(bytes: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(bytes).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn empty_capture_yields_no_records() {
        let builder = CaptureBuilder::new_ethernet(false);
        let f = write_temp(&builder.finish());
        let packets = read_capture(f.path()).unwrap();
        assert!(packets.is_empty());
    }

    #[test]
    fn udp_packets_are_skipped() {
        let mut b = CaptureBuilder::new_ethernet(false);
        for i in 0..6u32 {
            b.push_tcp_v4(
                100 + i,
                0,
                [10, 0, 0, 1],
                1000,
                [10, 0, 0, 2],
                80,
                TcpFlags::ACK,
                &[1, 2, 3],
            );
        }
        b.push_udp_v4(103, 0, [10, 0, 0, 1], [224, 0, 0, 251]);
        b.push_udp_v4(104, 0, [10, 0, 0, 1], [224, 0, 0, 251]);
        let f = write_temp(&b.finish());
        let packets = read_capture(f.path()).unwrap();
        assert_eq!(packets.len(), 6);
        assert!(packets.iter().all(|p| p.payload_len == 3));
    }

    #[test]
    fn nanosecond_timestamps_are_preserved() {
        let mut b = CaptureBuilder::new_ethernet(true);
        b.push_tcp_v4(
            1,
            1,
            [10, 0, 0, 1],
            1000,
            [10, 0, 0, 2],
            80,
            TcpFlags::SYN,
            &[],
        );
        let f = write_temp(&b.finish());
        let packets = read_capture(f.path()).unwrap();
        assert_eq!(packets[0].timestamp, 1.0 + 1e-9);
    }

    #[test]
    fn big_endian_capture_reads_identically() {
        let mut le = CaptureBuilder::new_ethernet(false);
        le.push_tcp_v4(
            7,
            500_000,
            [192, 168, 0, 1],
            4444,
            [192, 168, 0, 2],
            443,
            TcpFlags::SYN | TcpFlags::ACK,
            &[9, 9],
        );
        let le_bytes = le.finish();

        // Re-encode header and record headers big-endian.
        let mut be_bytes = Vec::new();
        be_bytes.extend_from_slice(&MAGIC_MICROS.to_be_bytes());
        be_bytes.extend_from_slice(&2u16.to_be_bytes());
        be_bytes.extend_from_slice(&4u16.to_be_bytes());
        be_bytes.extend_from_slice(&0u32.to_be_bytes());
        be_bytes.extend_from_slice(&0u32.to_be_bytes());
        be_bytes.extend_from_slice(&65535u32.to_be_bytes());
        be_bytes.extend_from_slice(&LINKTYPE_ETHERNET.to_be_bytes());
        be_bytes.extend_from_slice(&7u32.to_be_bytes());
        be_bytes.extend_from_slice(&500_000u32.to_be_bytes());
        let frame = &le_bytes[24 + 16..];
        be_bytes.extend_from_slice(&(frame.len() as u32).to_be_bytes());
        be_bytes.extend_from_slice(&(frame.len() as u32).to_be_bytes());
        be_bytes.extend_from_slice(frame);

        let fa = write_temp(&le_bytes);
        let fb = write_temp(&be_bytes);
        assert_eq!(
            read_capture(fa.path()).unwrap(),
            read_capture(fb.path()).unwrap()
        );
    }

    #[test]
    fn unknown_magic_is_a_format_error() {
        let f = write_temp(&[0xde, 0xad, 0xbe, 0xef, 0, 0, 0, 0]);
        assert!(matches!(
            read_capture(f.path()),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn truncated_record_reports_offset() {
        let mut b = CaptureBuilder::new_ethernet(false);
        b.push_tcp_v4(
            1,
            0,
            [10, 0, 0, 1],
            1000,
            [10, 0, 0, 2],
            80,
            TcpFlags::SYN,
            &[],
        );
        let mut bytes = b.finish();
        bytes.truncate(bytes.len() - 5);
        let f = write_temp(&bytes);
        match read_capture(f.path()) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 24),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn ipv6_tcp_is_parsed() {
        let mut frame = vec![0u8; 14];
        frame[12] = 0x86;
        frame[13] = 0xdd;
        let payload = [1u8, 2, 3, 4, 5];
        let seg_len = (20 + payload.len()) as u16;
        frame.push(0x60);
        frame.extend_from_slice(&[0, 0, 0]);
        frame.extend_from_slice(&seg_len.to_be_bytes());
        frame.push(6); // next header: TCP
        frame.push(64);
        let src = [0u8, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let dst = [0u8, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2];
        frame.extend_from_slice(&src);
        frame.extend_from_slice(&dst);
        frame.extend_from_slice(&8080u16.to_be_bytes());
        frame.extend_from_slice(&80u16.to_be_bytes());
        frame.extend_from_slice(&[0; 8]);
        frame.push(5 << 4);
        frame.push(TcpFlags::PSH | TcpFlags::ACK);
        frame.extend_from_slice(&[0; 6]);
        frame.extend_from_slice(&payload);

        let mut b = CaptureBuilder::new_ethernet(false);
        b.push_frame(10, 250_000, &frame);
        let f = write_temp(&b.finish());
        let packets = read_capture(f.path()).unwrap();
        assert_eq!(packets.len(), 1);
        assert_eq!(packets[0].src_port, 8080);
        assert_eq!(packets[0].payload_len, 5);
        assert!(packets[0].src_ip.is_ipv6());
    }

    fn header_with_linktype(link_type: u32) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC_MICROS.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&65535u32.to_le_bytes());
        bytes.extend_from_slice(&link_type.to_le_bytes());
        bytes
    }

    fn raw_ipv4_tcp_segment(payload: &[u8]) -> Vec<u8> {
        let mut ip = Vec::new();
        let total = (20 + 20 + payload.len()) as u16;
        ip.push(0x45);
        ip.push(0);
        ip.extend_from_slice(&total.to_be_bytes());
        ip.extend_from_slice(&[0, 0, 0x40, 0, 64, 6, 0, 0]);
        ip.extend_from_slice(&[10, 0, 0, 1]);
        ip.extend_from_slice(&[10, 0, 0, 2]);
        ip.extend_from_slice(&2000u16.to_be_bytes());
        ip.extend_from_slice(&80u16.to_be_bytes());
        ip.extend_from_slice(&[0; 8]);
        ip.push(5 << 4);
        ip.push(TcpFlags::ACK);
        ip.extend_from_slice(&[0; 6]);
        ip.extend_from_slice(payload);
        ip
    }

    fn push_record(bytes: &mut Vec<u8>, sec: u32, usec: u32, frame: &[u8]) {
        bytes.extend_from_slice(&sec.to_le_bytes());
        bytes.extend_from_slice(&usec.to_le_bytes());
        bytes.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        bytes.extend_from_slice(frame);
    }

    #[test]
    fn raw_ip_linktype_is_supported() {
        let mut bytes = header_with_linktype(LINKTYPE_RAW);
        push_record(&mut bytes, 3, 0, &raw_ipv4_tcp_segment(&[1, 2, 3, 4]));
        let f = write_temp(&bytes);
        let packets = read_capture(f.path()).unwrap();
        assert_eq!(packets.len(), 1);
        assert_eq!(packets[0].payload_len, 4);
        assert_eq!(packets[0].dst_port, 80);
    }

    #[test]
    fn null_linktype_strips_the_family_header() {
        let mut bytes = header_with_linktype(LINKTYPE_NULL);
        let mut frame = 2u32.to_le_bytes().to_vec(); // AF_INET
        frame.extend_from_slice(&raw_ipv4_tcp_segment(&[9]));
        push_record(&mut bytes, 4, 0, &frame);
        let f = write_temp(&bytes);
        let packets = read_capture(f.path()).unwrap();
        assert_eq!(packets.len(), 1);
        assert_eq!(packets[0].payload_len, 1);
    }

    #[test]
    fn unsupported_linktype_is_an_error() {
        // 127 = radiotap wireless
        let f = write_temp(&header_with_linktype(127));
        assert!(matches!(
            read_capture(f.path()),
            Err(Error::UnsupportedLinkType { link_type: 127, .. })
        ));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            read_capture("/nonexistent/capture.pcap"),
            Err(Error::FileIo { .. })
        ));
    }
}
