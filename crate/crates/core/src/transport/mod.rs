//! TCP-like endpoints with exactly the behaviors the attacks lean on: SYN
//! retransmission with exponential backoff, timeout and fast retransmit,
//! ECN-driven window halving, receive-window clamping under window scaling,
//! RST teardown and optional SYN cookies.
//!
//! Congestion control is NewReno-flavored AIMD without SACK and ACKs are
//! sent immediately, so absolute slowdowns depend on these choices.
//! Data sequence numbers start at 0 for every flow; the handshake uses
//! `ack = isn + 1` as usual but does not shift the data sequence space.

mod listener;
mod packet;
mod receiver;
mod sender;

use serde::{Deserialize, Serialize};

use crate::simcore::SimTime;
use crate::topology::NodeId;

pub use listener::{Listener, ListenerConfig, ListenerStats};
pub use packet::{Ecn, Packet, Probe, Protocol, TcpFlags, DEFAULT_TTL, HEADER_BYTES};
pub use receiver::Receiver;
pub use sender::{Sender, SenderStats};

pub use crate::world::measure_flow;

/// Port every host listens on.
pub const SERVER_PORT: u16 = 80;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TcpConfig {
    pub mss: u32,
    /// Multiplier applied to the 16-bit advertised window.
    pub wscale: u32,
    pub rto_min: SimTime,
    pub rto_max: SimTime,
    pub syn_retries: u32,
    /// Consecutive data timeouts tolerated before the connection is abandoned.
    pub data_retries: u32,
    pub init_cwnd: u32,
    pub ecn: bool,
    /// Receiver buffer in bytes; advertised as `buffer / wscale`.
    pub rcv_buffer: u32,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            mss: 1460,
            wscale: 512,
            rto_min: SimTime::from_millis(200),
            rto_max: SimTime::from_secs(120),
            syn_retries: 6,
            data_retries: 15,
            init_cwnd: 10,
            ecn: true,
            rcv_buffer: 65_536,
        }
    }
}

impl TcpConfig {
    pub fn advertised_window(&self) -> u16 {
        (self.rcv_buffer / self.wscale).clamp(1, u16::MAX as u32) as u16
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConnState {
    Closed,
    SynSent,
    SynRcvd,
    Established,
    Closing,
    Terminated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Completed,
    /// Handshake never completed within the SYN retry budget.
    Failed,
    /// Torn down by a RST.
    Disconnected,
    /// Data retransmission budget exhausted.
    TimedOut,
    /// Still running when the horizon was reached.
    Incomplete,
}

impl FlowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowStatus::Completed => "completed",
            FlowStatus::Failed => "failed",
            FlowStatus::Disconnected => "disconnected",
            FlowStatus::TimedOut => "timed_out",
            FlowStatus::Incomplete => "incomplete",
        }
    }
}

/// Outcome of one application flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub flow_id: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub bytes: u64,
    pub start: SimTime,
    /// Handshake duration, when it completed.
    pub establishment_time: Option<SimTime>,
    /// Start to last byte acknowledged, when it completed.
    pub fct: Option<SimTime>,
    pub status: FlowStatus,
    /// Time from start to the end of the run or the failure; a lower bound on
    /// the FCT of flows that did not finish.
    pub elapsed: SimTime,
    pub retransmissions: u64,
    pub timeouts: u64,
    pub segments_sent: u64,
    pub srtt: Option<SimTime>,
    /// Core-ID tag last seen on the flow's packets at the server.
    pub fwd_core_tag: Option<NodeId>,
    /// Core-ID tag last seen on the reverse direction at the client.
    pub rev_core_tag: Option<NodeId>,
    /// In-order bytes handed to the receiving application.
    pub delivered: u64,
}

impl FlowResult {
    pub const CSV_HEADER: &'static str =
        "flow_id,src,dst,bytes,start_s,establishment_time_s,fct_s,status";

    pub fn csv_row(&self, name: impl Fn(NodeId) -> String) -> String {
        let opt = |t: Option<SimTime>| t.map(|t| format!("{:.9}", t.as_secs_f64())).unwrap_or_default();
        format!(
            "{},{},{},{},{:.9},{},{},{}",
            self.flow_id,
            name(self.src),
            name(self.dst),
            self.bytes,
            self.start.as_secs_f64(),
            opt(self.establishment_time),
            opt(self.fct),
            self.status.as_str()
        )
    }
}
