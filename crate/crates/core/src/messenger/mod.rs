//! Inter-controller control channel: M-LLDP discovery, topic routing over the federation of
//! paired controllers, and keep-alive failure detection.

pub mod federation;
pub mod keepalive;
pub mod message;
pub mod mlldp;
pub mod topic;

pub use federation::{DownReason, Messenger, MessengerEvent, ServerIdentity, Session};
pub use keepalive::{KeepAlive, KeepAliveAction, KEEPALIVE_INTERVAL_MS, MAX_MISSES};
pub use message::{BusMessage, ControlFrame, Interest, InterestTable};
pub use mlldp::{decode as decode_mlldp, encode as encode_mlldp, DecodeError, EncodeError, MlldpFrame, Violation};
pub use topic::{Topic, TopicError};
