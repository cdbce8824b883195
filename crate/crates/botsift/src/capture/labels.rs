//! Class labeling of flows from `<ip-or-CIDR> <label>` rules.

use std::net::IpAddr;

use crate::error::Error;
use crate::Result;

use super::TcpFlow;

/// One labeling rule: an address or subnet mapped to a class label.
#[derive(Debug, Clone)]
pub struct LabelRule {
    pub ip: IpAddr,
    pub prefix_len: u8,
    pub label: String,
}

impl LabelRule {
    /// Parse `"10.0.0.5"` or `"10.0.0.0/24"` (IPv6 likewise) plus a label.
    pub fn parse(addr: &str, label: &str) -> Result<Self> {
        let bad = |message: &str| Error::LabelRule {
            rule: format!("{addr} {label}"),
            message: message.to_string(),
        };
        if label.is_empty() {
            return Err(bad("empty label"));
        }
        let (ip_str, prefix) = match addr.split_once('/') {
            Some((ip, len)) => (ip, Some(len)),
            None => (addr, None),
        };
        let ip: IpAddr = ip_str
            .parse()
            .map_err(|_| bad("not an IP address or CIDR subnet"))?;
        let max = if ip.is_ipv4() { 32 } else { 128 };
        let prefix_len = match prefix {
            None => max,
            Some(len) => {
                let len: u8 = len.parse().map_err(|_| bad("bad prefix length"))?;
                if len > max {
                    return Err(bad("prefix length out of range"));
                }
                len
            }
        };
        Ok(LabelRule {
            ip,
            prefix_len,
            label: label.to_string(),
        })
    }

    pub fn matches(&self, ip: IpAddr) -> bool {
        match (self.ip, ip) {
            (IpAddr::V4(net), IpAddr::V4(ip)) => {
                let mask = if self.prefix_len == 0 {
                    0
                } else {
                    u32::MAX << (32 - self.prefix_len)
                };
                u32::from(net) & mask == u32::from(ip) & mask
            }
            (IpAddr::V6(net), IpAddr::V6(ip)) => {
                let mask = if self.prefix_len == 0 {
                    0
                } else {
                    u128::MAX << (128 - self.prefix_len)
                };
                u128::from(net) & mask == u128::from(ip) & mask
            }
            _ => false,
        }
    }
}

/// Parse a rules file: one `<ip-or-CIDR> <label>` per line, `#` comments and
/// blank lines allowed.
pub fn parse_label_rules(text: &str) -> Result<Vec<LabelRule>> {
    let mut rules = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let addr = parts.next().unwrap();
        let label = parts.next().ok_or_else(|| Error::LabelRule {
            rule: line.to_string(),
            message: "expected '<ip-or-CIDR> <label>'".to_string(),
        })?;
        if parts.next().is_some() {
            return Err(Error::LabelRule {
                rule: line.to_string(),
                message: "trailing tokens after label".to_string(),
            });
        }
        rules.push(LabelRule::parse(addr, label)?);
    }
    Ok(rules)
}

/// What to do with a flow no rule matches.
#[derive(Debug, Clone)]
pub enum LabelPolicy {
    Drop,
    Default(String),
}

/// Assign class labels to flows.
///
/// Rules are tried in order against the initiator's address; if none match,
/// they are tried in order against the responder's. The first match wins.
/// Unmatched flows get the default label or are dropped per `policy`.
pub fn label_flows(
    flows: Vec<TcpFlow>,
    rules: &[LabelRule],
    policy: &LabelPolicy,
) -> Result<Vec<(TcpFlow, String)>> {
    if rules.is_empty() {
        return Err(Error::param("label rules must be non-empty"));
    }
    let mut labeled = Vec::with_capacity(flows.len());
    for flow in flows {
        let hit = rules
            .iter()
            .find(|r| r.matches(flow.initiator.ip))
            .or_else(|| rules.iter().find(|r| r.matches(flow.responder().ip)));
        match hit {
            Some(rule) => {
                let label = rule.label.clone();
                labeled.push((flow, label));
            }
            None => match policy {
                LabelPolicy::Drop => {}
                LabelPolicy::Default(label) => labeled.push((flow, label.clone())),
            },
        }
    }
    Ok(labeled)
}
