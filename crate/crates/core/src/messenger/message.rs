use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::model::{DomainId, LinkKey, SimTime};

use super::mlldp::FRAME_LEN;
use super::topic::Topic;

/// A publication travelling through the federation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub topic: Topic,
    pub origin: DomainId,
    /// Per-origin counter; `(origin, seq)` identifies the message for duplicate suppression.
    pub seq: u64,
    pub sent_at: SimTime,
    pub payload: Value,
}

impl BusMessage {
    /// Key-sorted JSON text of the whole message.
    pub fn canonical(&self) -> String {
        let v = serde_json::to_value(self).expect("serializable");
        serde_json::to_string(&v).expect("serializable")
    }

    pub fn size(&self) -> usize {
        self.canonical().len()
    }
}

/// Subscription patterns of one domain, versioned so that newer tables win while flooding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Interest {
    pub version: u64,
    pub patterns: BTreeSet<Topic>,
}

pub type InterestTable = BTreeMap<DomainId, Interest>;

/// Everything one controller sends another over a peering link.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlFrame {
    Mlldp(Vec<u8>),
    Hello { from: DomainId, interests: InterestTable },
    SubSync { from: DomainId, interests: InterestTable },
    KeepAlive { from: DomainId, seq: u64 },
    KeepAliveReply { from: DomainId, seq: u64 },
    Bus { msg: BusMessage, blocked: BTreeSet<LinkKey> },
}

impl ControlFrame {
    /// Domain that created the frame's content.
    pub fn origin(&self) -> &DomainId {
        match self {
            ControlFrame::Mlldp(_) => unreachable!("M-LLDP origin lives inside the frame"),
            ControlFrame::Hello { from, .. }
            | ControlFrame::SubSync { from, .. }
            | ControlFrame::KeepAlive { from, .. }
            | ControlFrame::KeepAliveReply { from, .. } => from,
            ControlFrame::Bus { msg, .. } => &msg.origin,
        }
    }

    /// Topic used for accounting; federation housekeeping uses `fed.<verb>.<origin>`.
    pub fn label(&self) -> String {
        match self {
            ControlFrame::Mlldp(_) => "mlldp".to_string(),
            ControlFrame::Hello { from, .. } => format!("fed.hello.{from}"),
            ControlFrame::SubSync { from, .. } => format!("fed.subscribe.{from}"),
            ControlFrame::KeepAlive { from, .. } | ControlFrame::KeepAliveReply { from, .. } => {
                format!("fed.keepalive.{from}")
            }
            ControlFrame::Bus { msg, .. } => msg.topic.to_string(),
        }
    }

    /// Serialized payload size in bytes.
    pub fn size(&self) -> usize {
        let doc = match self {
            ControlFrame::Mlldp(b) => return b.len().max(FRAME_LEN),
            ControlFrame::Bus { msg, .. } => return msg.size(),
            ControlFrame::Hello { from, interests } | ControlFrame::SubSync { from, interests } => {
                json!({ "from": from, "interests": interests })
            }
            ControlFrame::KeepAlive { from, seq } => json!({ "from": from, "ping": seq }),
            ControlFrame::KeepAliveReply { from, seq } => json!({ "from": from, "pong": seq }),
        };
        serde_json::to_string(&doc).expect("serializable").len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_sorts_payload_keys() {
        let m = BusMessage {
            topic: "connectivity.A.update".parse().unwrap(),
            origin: DomainId::new("A").unwrap(),
            seq: 1,
            sent_at: 5,
            payload: json!({ "z": 1, "a": [1, 2] }),
        };
        let text = m.canonical();
        assert!(text.find("\"a\"").unwrap() < text.find("\"z\"").unwrap());
        assert_eq!(text, m.clone().canonical());
        assert_eq!(m.size(), text.len());
    }
}
