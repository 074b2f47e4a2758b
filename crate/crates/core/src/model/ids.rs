//! Identifiers shared by every layer: domains, switches, ports, links, hosts and flows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Longest domain identifier that still fits the fixed-width controller field of an M-LLDP frame.
pub const MAX_DOMAIN_ID_LEN: usize = 8;

/// Identifier of a network domain (and of the controller managing it).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DomainId(String);

impl DomainId {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if id.is_empty() || id.len() > MAX_DOMAIN_ID_LEN {
            return Err(ModelError::InvalidDomainId(id));
        }
        if !id.bytes().all(|b| b.is_ascii_graphic() && b != b'.' && b != b'*' && b != b':' && b != b'>' && b != b'-') {
            return Err(ModelError::InvalidDomainId(id));
        }
        Ok(DomainId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for DomainId {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainId::new(s)
    }
}

impl TryFrom<String> for DomainId {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        DomainId::new(s)
    }
}

impl From<DomainId> for String {
    fn from(d: DomainId) -> String {
        d.0
    }
}

/// A switch, written `<domain>.<index>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId {
    pub domain: DomainId,
    pub local: u16,
}

impl NodeId {
    pub fn new(domain: DomainId, local: u16) -> Self {
        NodeId { domain, local }
    }

    pub fn port(&self, port: u16) -> Endpoint {
        Endpoint { node: self.clone(), port }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.domain, self.local)
    }
}

impl FromStr for NodeId {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (d, n) = s.split_once('.').ok_or_else(|| ModelError::Syntax(s.to_string()))?;
        let local = n.parse().map_err(|_| ModelError::Syntax(s.to_string()))?;
        Ok(NodeId { domain: d.parse()?, local })
    }
}

impl TryFrom<String> for NodeId {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<NodeId> for String {
    fn from(n: NodeId) -> String {
        n.to_string()
    }
}

/// A switch port, written `<domain>.<index>:<port>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Endpoint {
    pub node: NodeId,
    pub port: u16,
}

impl Endpoint {
    pub fn domain(&self) -> &DomainId {
        &self.node.domain
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.node, self.port)
    }
}

impl FromStr for Endpoint {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, p) = s.rsplit_once(':').ok_or_else(|| ModelError::Syntax(s.to_string()))?;
        let port = p.parse().map_err(|_| ModelError::Syntax(s.to_string()))?;
        Ok(Endpoint { node: n.parse()?, port })
    }
}

impl TryFrom<String> for Endpoint {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}

/// One direction of a link, written `<from>><to>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DirLink {
    pub from: Endpoint,
    pub to: Endpoint,
}

impl DirLink {
    pub fn new(from: Endpoint, to: Endpoint) -> Self {
        DirLink { from, to }
    }

    pub fn reverse(&self) -> DirLink {
        DirLink { from: self.to.clone(), to: self.from.clone() }
    }

    /// Direction-independent identity of the underlying cable.
    pub fn key(&self) -> LinkKey {
        if self.from <= self.to {
            LinkKey(self.clone())
        } else {
            LinkKey(self.reverse())
        }
    }

    pub fn is_peering(&self) -> bool {
        self.from.node.domain != self.to.node.domain
    }
}

impl fmt::Display for DirLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}", self.from, self.to)
    }
}

impl FromStr for DirLink {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once('>').ok_or_else(|| ModelError::Syntax(s.to_string()))?;
        Ok(DirLink { from: a.parse()?, to: b.parse()? })
    }
}

impl TryFrom<String> for DirLink {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DirLink> for String {
    fn from(l: DirLink) -> String {
        l.to_string()
    }
}

/// Undirected link identity: the direction whose `from` endpoint sorts first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LinkKey(DirLink);

impl LinkKey {
    pub fn forward(&self) -> &DirLink {
        &self.0
    }

    pub fn directions(&self) -> [DirLink; 2] {
        [self.0.clone(), self.0.reverse()]
    }

    pub fn touches(&self, domain: &DomainId) -> bool {
        self.0.from.domain() == domain || self.0.to.domain() == domain
    }

    /// The two domains joined by this link, in key order.
    pub fn domains(&self) -> (&DomainId, &DomainId) {
        (self.0.from.domain(), self.0.to.domain())
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0.from, self.0.to)
    }
}

impl FromStr for LinkKey {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once('-').ok_or_else(|| ModelError::Syntax(s.to_string()))?;
        Ok(DirLink { from: a.parse()?, to: b.parse()? }.key())
    }
}

impl TryFrom<String> for LinkKey {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LinkKey> for String {
    fn from(k: LinkKey) -> String {
        k.to_string()
    }
}

/// Opaque host address (stands in for an IP).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HostAddr(pub String);

impl HostAddr {
    pub fn new(s: impl Into<String>) -> Self {
        HostAddr(s.into())
    }
}

impl fmt::Display for HostAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub String);

impl FlowId {
    pub fn new(s: impl Into<String>) -> Self {
        FlowId(s.into())
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A host and, while connected, the switch port it hangs off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostId {
    pub address: HostAddr,
    pub attach: Option<Endpoint>,
}

impl HostId {
    pub fn attached(address: HostAddr, at: Endpoint) -> Self {
        HostId { address, attach: Some(at) }
    }

    pub fn detached(address: HostAddr) -> Self {
        HostId { address, attach: None }
    }
}
